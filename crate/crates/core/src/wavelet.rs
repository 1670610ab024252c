//! `ψ` from `φ` and the high-pass taps, and the pull-back to the caller's
//! dilation matrix.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Rect, SampledField};
use crate::filter::FilterEvaluator;
use crate::lattice::{
    reduce_to_canonical, sigma, special_vectors, CanonicalForm, IVec2, IntMat2, LatticeData,
};
use crate::lawton::{self, FilterCoeffs, SolverOptions};
use crate::scaling::{phi_support_box, synthesize_phi, PhiSynthesis, SynthesisParams};

/// Extra width kept around the attractor box when cropping `φ`, to hold
/// the ringing of a band-limited synthesis.
pub const DEFAULT_CROP_MARGIN: f64 = 2.0;

/// `g_n = (−1)^{σ(n)}·conj(h_{ℓ−n})` for `n ∈ ℓ − supp h`.
pub fn highpass_coeffs(h: &FilterCoeffs, c: &CanonicalForm) -> Vec<(IVec2, Complex64)> {
    let ell = special_vectors(c).ell;
    let mut g: Vec<(IVec2, Complex64)> = h
        .iter()
        .filter(|(_, v)| *v != Complex64::default())
        .map(|(m, v)| {
            let n = [ell[0] - m[0], ell[1] - m[1]];
            let sign = if sigma(c, n) == 0 { 1.0 } else { -1.0 };
            (n, v.conj() * sign)
        })
        .collect();
    g.sort_by_key(|(n, _)| *n);
    g
}

/// `Σ_n g_n·conj(g_{n+k}) − δ_{0k}` maximised over `k ∈ CᵀZ²`.
pub fn highpass_orthogonality(h: &FilterCoeffs, c: &CanonicalForm) -> f64 {
    let g = highpass_coeffs(h, c);
    let lookup = |n: IVec2| {
        g.iter()
            .find(|(m, _)| *m == n)
            .map(|(_, v)| *v)
            .unwrap_or_default()
    };
    lawton::constraint_set(c, h.n0() + 1)
        .into_iter()
        .map(|k| {
            let s: Complex64 = g
                .iter()
                .map(|(n, v)| v * lookup([n[0] + k[0], n[1] + k[1]]).conj())
                .sum();
            let delta = if k == [0, 0] { 1.0 } else { 0.0 };
            (s - delta).norm()
        })
        .fold(0.0, f64::max)
}

fn inverse_map(m: &IntMat2, p: [f64; 2]) -> [f64; 2] {
    m.solve_f64(p)
}

/// Bounding box of `C⁻¹(box + n)` over the high-pass indices `n`.
pub fn psi_box_from(phi_box: &Rect, h: &FilterCoeffs, c: &CanonicalForm) -> Rect {
    let m = c.matrix();
    let pts: Vec<[f64; 2]> = highpass_coeffs(h, c)
        .iter()
        .flat_map(|(n, _)| {
            phi_box
                .corners()
                .map(|p| inverse_map(&m, [p[0] + n[0] as f64, p[1] + n[1] as f64]))
        })
        .collect();
    Rect::bounding(pts)
}

/// `ψ(t) = √2·Σ_n g_n·φ(Ct − n)` on `φ`'s step, covering the image of
/// `φ`'s grid box.
pub fn synthesize_psi(
    phi: &PhiSynthesis,
    h: &FilterCoeffs,
    ld: &LatticeData,
) -> Result<SampledField> {
    if h.n0() != phi.n0 {
        return Err(Error::MismatchedFilter(format!(
            "filter N0 = {} but the scaling field was built with N0 = {}",
            h.n0(),
            phi.n0
        )));
    }
    let c = phi.canonical;
    if special_vectors(&c).ell != ld.ell {
        return Err(Error::MismatchedFilter(
            "lattice data belongs to another canonical form".into(),
        ));
    }
    let g: Vec<([f64; 2], Complex64)> = highpass_coeffs(h, &c)
        .into_iter()
        .map(|(n, v)| ([n[0] as f64, n[1] as f64], v * SQRT_2))
        .collect();
    let field = &phi.phi;
    let rect = psi_box_from(&field.bounds(), h, &c);
    let m = c.matrix();
    Ok(SampledField::covering("psi_c", &rect, field.step, |t| {
        let at = m.apply_f64(t);
        g.iter()
            .map(|(n, w)| w * field.interp([at[0] - n[0], at[1] - n[1]]))
            .sum()
    }))
}

/// `t ↦ ψ_c(S t)` on a grid covering `S⁻¹·box(ψ_c)`; zero off the image.
pub fn pull_back(psi_c: &SampledField, s: &IntMat2) -> Result<SampledField> {
    if !s.is_unimodular() {
        return Err(Error::InvalidParameter(format!(
            "conjugator {s} is not unimodular"
        )));
    }
    let rect = Rect::bounding(psi_c.bounds().corners().map(|p| s.solve_f64(p)));
    let label = if psi_c.label == "psi_c" {
        "psi".to_string()
    } else {
        psi_c.label.clone()
    };
    Ok(SampledField::covering(&label, &rect, psi_c.step, |t| {
        psi_c.interp(s.apply_f64(t))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub support_radius: f64,
    /// Attractor box containing the support of `φ`.
    pub phi_box: Rect,
    /// Predicted box containing the support of `ψ_c`.
    pub psi_box: Rect,
    pub tail_fraction: f64,
    /// Share of `‖φ‖²` dropped by cropping to `phi_box` plus the margin.
    pub crop_loss: f64,
    pub crop_margin: f64,
    pub spectrum_norm_sq: f64,
}

/// Everything the pipeline produces for one dilation matrix.
#[derive(Clone, Debug)]
pub struct WaveletSystem {
    pub a0: IntMat2,
    pub s: IntMat2,
    pub canonical: CanonicalForm,
    pub lattice: LatticeData,
    pub h: FilterCoeffs,
    pub phi: SampledField,
    pub psi_c: SampledField,
    pub psi: SampledField,
    pub params: SynthesisParams,
    pub meta: SystemMeta,
}

impl WaveletSystem {
    pub fn evaluator(&self) -> FilterEvaluator {
        FilterEvaluator::for_form(self.h.clone(), &self.canonical)
    }
}

#[derive(Clone, Debug, Default)]
pub struct BuildOptions {
    pub solver: SolverOptions,
    pub synthesis: SynthesisParams,
    /// Use this filter instead of solving.
    pub filter: Option<FilterCoeffs>,
    /// Crop margin around the attractor box; `None` keeps the default.
    pub crop_margin: Option<f64>,
}

/// Reduce, solve (or take the given filter), synthesise `φ`, `ψ_c`, and
/// pull back to `A0`.
pub fn build_system(a0: &IntMat2, n0: i64, opts: &BuildOptions) -> Result<WaveletSystem> {
    let red = reduce_to_canonical(a0)?;
    let c = red.canonical;
    let ld = special_vectors(&c);
    let h = match &opts.filter {
        Some(f) if f.n0() != n0 => {
            return Err(Error::MismatchedFilter(format!(
                "filter N0 = {} but N0 = {n0} was requested",
                f.n0()
            )))
        }
        Some(f) => f.clone().certify(&c, opts.solver.tol)?,
        None => lawton::solve(&c, n0, &opts.solver)?,
    };
    let ev = FilterEvaluator::for_form(h.clone(), &c);
    let synth = synthesize_phi(&ev, &c, &opts.synthesis)?;
    let margin = opts.crop_margin.unwrap_or(DEFAULT_CROP_MARGIN);
    let phi_box = phi_support_box(&h, &c);
    let cropped = synth.phi.crop(&phi_box.grow(margin));
    let total = synth.phi.norm_sq();
    let crop_loss = if total > 0.0 {
        ((total - cropped.norm_sq()) / total).max(0.0)
    } else {
        0.0
    };
    let meta = SystemMeta {
        support_radius: synth.support_radius,
        phi_box,
        psi_box: psi_box_from(&phi_box, &h, &c),
        tail_fraction: synth.tail_fraction,
        crop_loss,
        crop_margin: margin,
        spectrum_norm_sq: synth.spectrum_norm_sq,
    };
    let synth = PhiSynthesis {
        phi: cropped,
        ..synth
    };
    let psi_c = synthesize_psi(&synth, &h, &ld)?;
    let psi = pull_back(&psi_c, &red.s)?;
    Ok(WaveletSystem {
        a0: *a0,
        s: red.s,
        canonical: c,
        lattice: ld,
        h,
        phi: synth.phi,
        psi_c,
        psi,
        params: opts.synthesis.clone(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_params() -> SynthesisParams {
        SynthesisParams {
            j: 16,
            grid_extent: 8.0 * PI,
            grid_n: 128,
            ..Default::default()
        }
    }

    #[test]
    fn haar_highpass_taps() {
        let c = CanonicalForm::from_index(1).unwrap();
        let h = FilterCoeffs::haar(&c, 1).unwrap();
        let g = highpass_coeffs(&h, &c);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(
            g,
            vec![
                ([0, 0], Complex64::new(r, 0.0)),
                ([1, 0], Complex64::new(-r, 0.0))
            ]
        );
        assert!(highpass_orthogonality(&h, &c) < 1e-15);
    }

    #[test]
    fn haar_psi_matches_formula() {
        let a = IntMat2::new(1, 1, 1, -1);
        let sys = build_system(
            &a,
            1,
            &BuildOptions {
                synthesis: small_params(),
                ..Default::default()
            },
        )
        .unwrap();
        let c = sys.canonical.matrix();
        for (t, v) in sys.psi_c.points().step_by(7) {
            let at = c.apply_f64(t);
            let want = sys.phi.interp(at) - sys.phi.interp([at[0] - 1.0, at[1]]);
            assert!((v - want).norm() < 1e-12);
        }
        assert!(sys.psi_c.integral().norm() < 1e-2);
        assert_eq!(sys.s, IntMat2::IDENTITY);
        assert_eq!(sys.psi.values, sys.psi_c.values);
    }

    #[test]
    fn zero_phi_gives_zero_psi() {
        let c = CanonicalForm::from_index(1).unwrap();
        let h = FilterCoeffs::haar(&c, 1).unwrap();
        let phi = PhiSynthesis {
            phi: SampledField::zeros("phi", [-1.0, -1.0], 0.125, 24, 24),
            n0: 1,
            canonical: c,
            spectrum_norm_sq: 0.0,
            support_radius: 1.0,
            tail_fraction: 0.0,
        };
        let psi = synthesize_psi(&phi, &h, &special_vectors(&c)).unwrap();
        assert_eq!(psi.max_abs(), 0.0);
        let wide = FilterCoeffs::haar(&c, 2).unwrap();
        assert!(matches!(
            synthesize_psi(&phi, &wide, &special_vectors(&c)),
            Err(Error::MismatchedFilter(_))
        ));
    }

    #[test]
    fn pull_back_identity_and_round_trip() {
        let f = SampledField::from_fn("psi_c", [-2.0, -2.0], 0.125, 33, 33, |t| {
            Complex64::new((-(t[0] * t[0] + t[1] * t[1])).exp(), 0.0)
        });
        let same = pull_back(&f, &IntMat2::IDENTITY).unwrap();
        assert_eq!(same.values, f.values);
        let s = IntMat2::new(-1, 1, 2, -3);
        let there = pull_back(&f, &s).unwrap();
        assert!((there.norm_sq() - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
        let back = pull_back(&there, &s.unimodular_inverse().unwrap()).unwrap();
        for (t, v) in f.points() {
            assert!((back.interp(t) - v).norm() < 1e-12);
        }
        assert!(pull_back(&f, &IntMat2::new(2, 0, 0, 1)).is_err());
    }

    #[test]
    fn rejects_non_dilation() {
        let e = build_system(&IntMat2::new(2, 0, 0, 2), 1, &BuildOptions::default());
        assert!(matches!(e, Err(Error::NotReducible { .. })));
    }
}
