//! The low-pass symbol `m₀(t) = (1/√2)·Σ h_n e^{−i n·t}`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{special_vectors, CanonicalForm, IVec2};
use crate::lawton::FilterCoeffs;
use crate::sum::ComplexSum;

pub const DEFAULT_QMF_GRID: usize = 256;

#[derive(Clone, Debug)]
pub struct FilterEvaluator {
    h: FilterCoeffs,
    q: IVec2,
    n0: i64,
    taps: Vec<(IVec2, Complex64)>,
}

impl FilterEvaluator {
    pub fn new(h: FilterCoeffs, q: IVec2) -> Self {
        let taps = h
            .iter()
            .filter(|(_, v)| *v != Complex64::default())
            .collect();
        Self {
            n0: h.n0(),
            h,
            q,
            taps,
        }
    }

    pub fn for_form(h: FilterCoeffs, c: &CanonicalForm) -> Self {
        Self::new(h, special_vectors(c).q)
    }

    pub fn coeffs(&self) -> &FilterCoeffs {
        &self.h
    }

    pub fn q(&self) -> IVec2 {
        self.q
    }

    /// Powers `e^{−i k s}` for `k = −N0..=N0` from a single `sincos`.
    fn phases(&self, s: f64, out: &mut Vec<Complex64>) {
        let n0 = self.n0 as usize;
        let base = Complex64::new(s.cos(), -s.sin());
        out.clear();
        out.resize(2 * n0 + 1, Complex64::new(1.0, 0.0));
        for k in 1..=n0 {
            out[n0 + k] = out[n0 + k - 1] * base;
            out[n0 - k] = out[n0 - k + 1] * base.conj();
        }
    }

    pub fn eval(&self, t: [f64; 2]) -> Complex64 {
        let mut scratch = (Vec::new(), Vec::new());
        self.eval_with(t, &mut scratch)
    }

    /// `eval` with caller-owned scratch buffers, for hot loops.
    pub fn eval_with(
        &self,
        t: [f64; 2],
        scratch: &mut (Vec<Complex64>, Vec<Complex64>),
    ) -> Complex64 {
        let (p1, p2) = scratch;
        self.phases(t[0], p1);
        self.phases(t[1], p2);
        let n0 = self.n0;
        let mut acc = ComplexSum::default();
        for (n, v) in &self.taps {
            acc.add(v * p1[(n[0] + n0) as usize] * p2[(n[1] + n0) as usize]);
        }
        acc.value() * FRAC_1_SQRT_2
    }

    fn grid_map<F>(&self, grid_n: usize, f: F) -> f64
    where
        F: Fn(&Self, [f64; 2], &mut (Vec<Complex64>, Vec<Complex64>)) -> f64 + Sync,
    {
        let step = 2.0 * PI / grid_n as f64;
        (0..grid_n)
            .into_par_iter()
            .map(|i| {
                let mut scratch = (Vec::new(), Vec::new());
                (0..grid_n).fold(0.0f64, |m, j| {
                    let t = [-PI + i as f64 * step, -PI + j as f64 * step];
                    m.max(f(self, t, &mut scratch))
                })
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max | |m₀(t)|² + |m₀(t + πq)|² − 1 |` over a `grid_n²` grid on `[−π, π)²`.
    pub fn qmf_residual(&self, grid_n: usize) -> f64 {
        let shift = [PI * self.q[0] as f64, PI * self.q[1] as f64];
        self.grid_map(grid_n, |ev, t, s| {
            let a = ev.eval_with(t, s).norm_sqr();
            let b = ev
                .eval_with([t[0] + shift[0], t[1] + shift[1]], s)
                .norm_sqr();
            (a + b - 1.0).abs()
        })
    }

    pub fn max_abs(&self, grid_n: usize) -> f64 {
        self.grid_map(grid_n, |ev, t, s| ev.eval_with(t, s).norm())
    }

    pub fn check(&self, grid_n: usize) -> FilterCheck {
        let m0 = self.eval([0.0, 0.0]);
        FilterCheck {
            m0_at_zero: [m0.re, m0.im],
            qmf_residual: self.qmf_residual(grid_n),
            max_abs_m0: self.max_abs(grid_n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterCheck {
    pub m0_at_zero: [f64; 2],
    pub qmf_residual: f64,
    pub max_abs_m0: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn haar_eval(index: u8) -> FilterEvaluator {
        let c = CanonicalForm::from_index(index).unwrap();
        FilterEvaluator::for_form(FilterCoeffs::haar(&c, 1).unwrap(), &c)
    }

    /// Direct sum with one `exp` per tap.
    fn naive(h: &FilterCoeffs, t: [f64; 2]) -> Complex64 {
        h.iter()
            .map(|(n, v)| {
                v * Complex64::from_polar(1.0, -(n[0] as f64 * t[0] + n[1] as f64 * t[1]))
            })
            .sum::<Complex64>()
            / SQRT_2
    }

    #[test]
    fn haar_values() {
        let ev = haar_eval(1);
        assert!((ev.eval([0.0, 0.0]) - 1.0).norm() < 1e-15);
        assert!(ev.eval([PI, PI]).norm() < 1e-15);
        assert!(ev.qmf_residual(256) <= 1e-12);
        assert!(ev.max_abs(64) <= 1.0 + 1e-12);
    }

    #[test]
    fn matches_direct_sum() {
        let h = FilterCoeffs::from_entries(
            2,
            [
                ([0, 0], Complex64::new(0.3, 0.1)),
                ([-2, 1], Complex64::new(-0.7, 0.0)),
                ([2, 2], Complex64::new(0.2, -0.4)),
            ],
        )
        .unwrap();
        let ev = FilterEvaluator::new(h.clone(), [1, 1]);
        for t in [[0.3, -1.2], [2.9, 0.1], [-3.0, 3.0]] {
            assert!((ev.eval(t) - naive(&h, t)).norm() < 1e-14);
        }
    }

    #[test]
    fn periodic_and_hermitian() {
        let ev = haar_eval(5);
        for t in [[0.4, -0.9], [1.7, 2.2]] {
            let shifted = ev.eval([t[0] + 2.0 * PI * 3.0, t[1] - 2.0 * PI]);
            assert!((shifted - ev.eval(t)).norm() < 1e-13);
            assert!((ev.eval([-t[0], -t[1]]) - ev.eval(t).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_filter_breaks_qmf() {
        let h = FilterCoeffs::from_entries(1, [([0, 0], Complex64::new(SQRT_2, 0.0))]).unwrap();
        let ev = FilterEvaluator::new(h, [1, 1]);
        assert!((ev.qmf_residual(16) - 1.0).abs() < 1e-14);
    }
}
