//! The Lawton system for finitely supported tight-frame filters.
//!
//! Unknowns are the taps `h_n`, `n ∈ [−N0, N0]²`. The constraints are
//! `Σ_n h_n·conj(h_{n+k}) = δ_{0k}` for `k ∈ CᵀZ²` and `Σ_n h_n = √2`.
//! Only `|k|∞ ≤ 2N0` can have overlapping support, so the system is finite.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{in_lattice, special_vectors, CanonicalForm, IVec2, IntMat2};
use crate::sum::ComplexSum;

pub const DEFAULT_TOL: f64 = 1e-12;

/// Filter taps on `Λ₀ = Z² ∩ [−N0, N0]²`; absent keys are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterCoeffs {
    n0: i64,
    coeffs: BTreeMap<IVec2, Complex64>,
    validated: bool,
}

impl FilterCoeffs {
    pub fn new(n0: i64) -> Result<Self> {
        if n0 < 1 {
            return Err(Error::InvalidN0(n0));
        }
        Ok(Self {
            n0,
            coeffs: BTreeMap::new(),
            validated: false,
        })
    }

    /// `h_0 = h_ℓ = 1/√2`.
    pub fn haar(c: &CanonicalForm, n0: i64) -> Result<Self> {
        let mut h = Self::new(n0)?;
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        h.set([0, 0], w)?;
        h.set(special_vectors(c).ell, w)?;
        Ok(h)
    }

    pub fn from_entries<I: IntoIterator<Item = (IVec2, Complex64)>>(
        n0: i64,
        it: I,
    ) -> Result<Self> {
        let mut h = Self::new(n0)?;
        for (n, v) in it {
            h.set(n, v)?;
        }
        Ok(h)
    }

    pub fn n0(&self) -> i64 {
        self.n0
    }

    pub fn contains_index(&self, n: IVec2) -> bool {
        n[0].abs() <= self.n0 && n[1].abs() <= self.n0
    }

    pub fn set(&mut self, n: IVec2, v: Complex64) -> Result<()> {
        if !self.contains_index(n) {
            return Err(Error::InvalidParameter(format!(
                "index ({}, {}) outside [-{N0}, {N0}]²",
                n[0],
                n[1],
                N0 = self.n0
            )));
        }
        self.coeffs.insert(n, v);
        self.validated = false;
        Ok(())
    }

    pub fn get(&self, n: IVec2) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    /// Stored taps in lexicographic index order.
    pub fn iter(&self) -> impl Iterator<Item = (IVec2, Complex64)> + '_ {
        self.coeffs.iter().map(|(n, v)| (*n, *v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.values().all(|v| v.im == 0.0)
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Same taps on a wider index box.
    pub fn with_n0(&self, n0: i64) -> Result<Self> {
        Self::from_entries(n0, self.iter())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n0: self.n0,
            coeffs: self.coeffs.iter().map(|(n, v)| (*n, v * s)).collect(),
            validated: false,
        }
    }

    /// Marks the filter validated if its Lawton residual is within `tol`.
    pub fn certify(mut self, c: &CanonicalForm, tol: f64) -> Result<Self> {
        let r = residuals(&self, c);
        if r.max_abs > tol {
            return Err(Error::FilterRejected {
                max_abs: r.max_abs,
                tol,
            });
        }
        self.validated = true;
        Ok(self)
    }

    pub fn to_document(&self, matrix: IntMat2) -> FilterDocument {
        FilterDocument {
            matrix,
            n0: self.n0,
            coeffs: self
                .iter()
                .map(|(n, v)| CoeffEntry {
                    n,
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub n: IVec2,
    pub re: f64,
    pub im: f64,
}

/// On-disk filter: `{"matrix": [[..]], "N0": k, "coeffs": [{"n":[i,j], "re":x, "im":y}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDocument {
    pub matrix: IntMat2,
    #[serde(rename = "N0")]
    pub n0: i64,
    pub coeffs: Vec<CoeffEntry>,
}

impl FilterDocument {
    pub fn to_filter(&self) -> Result<FilterCoeffs> {
        FilterCoeffs::from_entries(
            self.n0,
            self.coeffs
                .iter()
                .map(|e| (e.n, Complex64::new(e.re, e.im))),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthResidual {
    pub k: IVec2,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawtonResidual {
    pub orth: Vec<OrthResidual>,
    pub sum: [f64; 2],
    pub max_abs: f64,
}

/// `K = CᵀZ² ∩ [−2N0, 2N0]²` in lexicographic order.
pub fn constraint_set(c: &CanonicalForm, n0: i64) -> Vec<IVec2> {
    let ct = c.matrix().transpose();
    let r = 2 * n0;
    (-r..=r)
        .flat_map(|i| (-r..=r).map(move |j| [i, j]))
        .filter(|&k| in_lattice(&ct, k))
        .collect()
}

fn autocorrelation(h: &FilterCoeffs, k: IVec2) -> Complex64 {
    let mut acc = ComplexSum::default();
    for (n, v) in h.iter() {
        let w = h.get([n[0] + k[0], n[1] + k[1]]);
        acc.add(v * w.conj());
    }
    acc.value()
}

pub fn residuals(h: &FilterCoeffs, c: &CanonicalForm) -> LawtonResidual {
    let mut max_abs: f64 = 0.0;
    let orth = constraint_set(c, h.n0)
        .into_iter()
        .map(|k| {
            let delta = if k == [0, 0] { 1.0 } else { 0.0 };
            let r = autocorrelation(h, k) - delta;
            max_abs = max_abs.max(r.norm());
            OrthResidual {
                k,
                re: r.re,
                im: r.im,
            }
        })
        .collect();
    let mut total = ComplexSum::default();
    h.iter().for_each(|(_, v)| total.add(v));
    let sum = total.value() - SQRT_2;
    max_abs = max_abs.max(sum.norm());
    LawtonResidual {
        orth,
        sum: [sum.re, sum.im],
        max_abs,
    }
}

pub fn validate(h: &FilterCoeffs, c: &CanonicalForm, tol: f64) -> (bool, LawtonResidual) {
    let r = residuals(h, c);
    (r.max_abs <= tol, r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub seed: u64,
    /// Pseudo-random starts tried after the Haar start.
    pub random_starts: usize,
    /// Try the Haar pair as start 0. It is always a solution, so turning
    /// this off is the way to obtain filters of wider support.
    pub haar_start: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub complex: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            random_starts: 32,
            haar_start: true,
            max_iter: 300,
            tol: DEFAULT_TOL,
            complex: false,
        }
    }
}

/// Flattened unknowns and the residual/Jacobian assembly for one system.
struct System {
    n0: i64,
    width: i64,
    complex: bool,
    /// `k = 0` first, then the lexicographically positive half of `K`;
    /// `r_{−k} = conj(r_k)` makes the other half redundant.
    ks: Vec<IVec2>,
}

impl System {
    fn new(c: &CanonicalForm, n0: i64, complex: bool) -> Self {
        let ks = constraint_set(c, n0)
            .into_iter()
            .filter(|k| *k == [0, 0] || k[0] > 0 || (k[0] == 0 && k[1] > 0))
            .collect::<Vec<_>>();
        let mut ks = ks;
        ks.sort_by_key(|k| *k != [0, 0]);
        Self {
            n0,
            width: 2 * n0 + 1,
            complex,
            ks,
        }
    }

    fn taps(&self) -> usize {
        (self.width * self.width) as usize
    }

    fn unknowns(&self) -> usize {
        if self.complex {
            2 * self.taps()
        } else {
            self.taps()
        }
    }

    fn index(&self, n: IVec2) -> Option<usize> {
        if n[0].abs() > self.n0 || n[1].abs() > self.n0 {
            return None;
        }
        Some(((n[0] + self.n0) * self.width + (n[1] + self.n0)) as usize)
    }

    fn point(&self, idx: usize) -> IVec2 {
        let idx = idx as i64;
        [idx / self.width - self.n0, idx % self.width - self.n0]
    }

    fn tap(&self, x: &DVector<f64>, n: IVec2) -> Complex64 {
        match self.index(n) {
            None => Complex64::default(),
            Some(i) if self.complex => Complex64::new(x[i], x[i + self.taps()]),
            Some(i) => Complex64::new(x[i], 0.0),
        }
    }

    fn to_vector(&self, h: &FilterCoeffs) -> DVector<f64> {
        let mut x = DVector::zeros(self.unknowns());
        for (n, v) in h.iter() {
            if let Some(i) = self.index(n) {
                x[i] = v.re;
                if self.complex {
                    x[i + self.taps()] = v.im;
                }
            }
        }
        x
    }

    fn to_filter(&self, x: &DVector<f64>) -> FilterCoeffs {
        let entries = (0..self.taps()).map(|i| (self.point(i), self.tap(x, self.point(i))));
        FilterCoeffs::from_entries(self.n0, entries).expect("indices lie in the box")
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = Vec::with_capacity(2 * self.ks.len() + 2);
        for &k in &self.ks {
            let mut acc = ComplexSum::default();
            for i in 0..self.taps() {
                let n = self.point(i);
                acc.add(self.tap(x, n) * self.tap(x, [n[0] + k[0], n[1] + k[1]]).conj());
            }
            let r = acc.value();
            if k == [0, 0] {
                out.push(r.re - 1.0);
            } else {
                out.push(r.re);
                if self.complex {
                    out.push(r.im);
                }
            }
        }
        let mut total = ComplexSum::default();
        (0..self.taps()).for_each(|i| total.add(self.tap(x, self.point(i))));
        let s = total.value();
        out.push(s.re - SQRT_2);
        if self.complex {
            out.push(s.im);
        }
        DVector::from_vec(out)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let rows = if self.complex {
            2 * self.ks.len() + 1
        } else {
            self.ks.len() + 1
        };
        let t = self.taps();
        let mut jac = DMatrix::zeros(rows, self.unknowns());
        let mut row = 0;
        for &k in &self.ks {
            for i in 0..t {
                let m = self.point(i);
                let plus = self.tap(x, [m[0] + k[0], m[1] + k[1]]);
                let minus = self.tap(x, [m[0] - k[0], m[1] - k[1]]);
                jac[(row, i)] = plus.re + minus.re;
                if self.complex {
                    jac[(row, i + t)] = plus.im + minus.im;
                    if k != [0, 0] {
                        jac[(row + 1, i)] = minus.im - plus.im;
                        jac[(row + 1, i + t)] = plus.re - minus.re;
                    }
                }
            }
            row += if self.complex && k != [0, 0] { 2 } else { 1 };
        }
        for i in 0..t {
            jac[(row, i)] = 1.0;
            if self.complex {
                jac[(row + 1, i + t)] = 1.0;
            }
        }
        jac
    }
}

fn max_abs(r: &DVector<f64>) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Outcome {
    x: DVector<f64>,
    max_residual: f64,
}

/// Levenberg–Marquardt from one start.
///
/// The damping is `μ·‖r‖` rather than a free parameter: solution sets of the
/// Lawton system are manifolds on which the Jacobian drops rank, and
/// residual-proportional damping keeps fast local convergence there.
fn levenberg_marquardt(
    sys: &System,
    mut x: DVector<f64>,
    active: &[bool],
    opts: &SolverOptions,
) -> Outcome {
    let mut r = sys.residual(&x);
    let mut cost = r.norm_squared();
    let mut mu = 1e-2;
    for _ in 0..opts.max_iter {
        if max_abs(&r) <= opts.tol {
            break;
        }
        let mut jac = sys.jacobian(&x);
        for (j, _) in active.iter().enumerate().filter(|(_, a)| !**a) {
            jac.column_mut(j).fill(0.0);
        }
        // Minimum-norm Gauss–Newton step first; it is exact on the
        // underdetermined system whenever the linearisation is consistent.
        if let Ok(pinv) = jac.clone().pseudo_inverse(1e-10) {
            let trial = &x - pinv * &r;
            let r_trial = sys.residual(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial < 0.5 * cost {
                x = trial;
                r = r_trial;
                cost = cost_trial;
                continue;
            }
        }
        let grad = jac.tr_mul(&r);
        let normal = jac.tr_mul(&jac);
        let mut accepted = false;
        while mu < 1e16 {
            let lambda = mu * cost.sqrt();
            let mut damped = normal.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda;
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial = &x + &step;
            let r_trial = sys.residual(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial < cost {
                x = trial;
                r = r_trial;
                cost = cost_trial;
                mu = (mu / 4.0).max(1e-8);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Outcome {
        max_residual: max_abs(&r),
        x,
    }
}

/// Largest tap modulus treated as a vanishing tap during pruning.
const PRUNE_LEVEL: f64 = 1e-3;

/// LM followed, if needed, by one polish pass on the support of the taps
/// that did not drift to zero. Pairs of vanishing taps are exactly where
/// the Jacobian degenerates and convergence turns sublinear.
fn run_start(sys: &System, x: DVector<f64>, opts: &SolverOptions) -> Outcome {
    let all = vec![true; sys.unknowns()];
    let out = levenberg_marquardt(sys, x, &all, opts);
    if out.max_residual <= opts.tol || out.max_residual > PRUNE_LEVEL {
        return out;
    }
    let t = sys.taps();
    let keep: Vec<bool> = (0..t)
        .map(|i| sys.tap(&out.x, sys.point(i)).norm() > PRUNE_LEVEL)
        .collect();
    let active: Vec<bool> = (0..sys.unknowns()).map(|j| keep[j % t]).collect();
    let pruned = DVector::from_fn(
        sys.unknowns(),
        |j, _| if active[j] { out.x[j] } else { 0.0 },
    );
    let polished = levenberg_marquardt(sys, pruned, &active, opts);
    if polished.max_residual < out.max_residual {
        polished
    } else {
        out
    }
}

fn random_start(sys: &System, seed: u64, index: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let scale = 1.0 / sys.width as f64;
    DVector::from_fn(sys.unknowns(), |_, _| rng.gen_range(-1.0..1.0) * scale)
}

/// Runs LM from `start` alone.
pub fn solve_from(
    c: &CanonicalForm,
    start: &FilterCoeffs,
    opts: &SolverOptions,
) -> Result<FilterCoeffs> {
    let sys = System::new(c, start.n0(), opts.complex);
    let out = run_start(&sys, sys.to_vector(start), opts);
    finish(&sys, c, out, opts.tol)
}

fn finish(sys: &System, c: &CanonicalForm, out: Outcome, tol: f64) -> Result<FilterCoeffs> {
    if out.max_residual > tol {
        return Err(Error::NoConvergence {
            best_residual: out.max_residual,
        });
    }
    let h = sys.to_filter(&out.x);
    let full = residuals(&h, c).max_abs;
    if full > tol {
        return Err(Error::NoConvergence {
            best_residual: full,
        });
    }
    h.certify(c, tol)
}

/// Multi-start solve. Start 0 is the Haar pair (if enabled); starts `1..=random_starts`
/// are seeded pseudo-random points. The converged start with the lowest
/// index wins regardless of which thread finishes first.
pub fn solve(c: &CanonicalForm, n0: i64, opts: &SolverOptions) -> Result<FilterCoeffs> {
    if n0 < 1 {
        return Err(Error::InvalidN0(n0));
    }
    let sys = System::new(c, n0, opts.complex);
    let haar = sys.to_vector(&FilterCoeffs::haar(c, n0)?);
    let best = AtomicU64::new(f64::INFINITY.to_bits());
    let first = if opts.haar_start { 0 } else { 1 };
    let found = (first..=opts.random_starts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 {
                haar.clone()
            } else {
                random_start(&sys, opts.seed, i)
            };
            let out = run_start(&sys, start, opts);
            // Non-negative floats order like their bit patterns.
            best.fetch_min(out.max_residual.to_bits(), Ordering::Relaxed);
            out
        })
        .find_first(|out| out.max_residual <= opts.tol);
    match found {
        Some(out) => finish(&sys, c, out, opts.tol),
        None => Err(Error::NoConvergence {
            best_residual: f64::from_bits(best.load(Ordering::Relaxed)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(i: u8) -> CanonicalForm {
        CanonicalForm::from_index(i).unwrap()
    }

    #[test]
    fn haar_residual_vanishes() {
        for c in CanonicalForm::all() {
            let h = FilterCoeffs::haar(&c, 1).unwrap();
            assert!(residuals(&h, &c).max_abs <= 1e-15, "index {}", c.index());
        }
    }

    #[test]
    fn empty_and_constant_filters() {
        let c = form(1);
        let r = residuals(&FilterCoeffs::new(1).unwrap(), &c);
        let r0 = r.orth.iter().find(|o| o.k == [0, 0]).unwrap();
        assert_eq!(r0.re, -1.0);
        assert!((r.sum[0] + SQRT_2).abs() < 1e-15);

        let h = FilterCoeffs::from_entries(1, [([0, 0], Complex64::new(SQRT_2, 0.0))]).unwrap();
        let r = residuals(&h, &c);
        assert!(r.sum[0].abs() < 1e-15);
        let r0 = r.orth.iter().find(|o| o.k == [0, 0]).unwrap();
        assert!((r0.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_examples() {
        let c = form(1);
        let h = FilterCoeffs::haar(&c, 1).unwrap();
        assert!(validate(&h, &c, 1e-12).0);
        let (ok, r) = validate(&h.scaled(2.0), &c, 1e-12);
        assert!(!ok);
        assert!((r.sum[0] - SQRT_2).abs() < 1e-14);
        assert!(!validate(&FilterCoeffs::new(1).unwrap(), &c, 0.5).0);
    }

    #[test]
    fn constraint_set_is_symmetric_lattice_window() {
        let c = form(1);
        let ks = constraint_set(&c, 1);
        assert!(ks.contains(&[0, 0]));
        assert!(ks.contains(&[1, 1]));
        assert!(!ks.contains(&[1, 0]));
        for k in &ks {
            assert!(ks.contains(&[-k[0], -k[1]]));
        }
        // half of the 25 points of [−2, 2]², plus the origin's parity
        assert_eq!(ks.len(), 13);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for complex in [false, true] {
            let c = form(5);
            let sys = System::new(&c, 1, complex);
            let x = random_start(&sys, 7, 3);
            let jac = sys.jacobian(&x);
            let eps = 1e-6;
            for j in 0..sys.unknowns() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += eps;
                xm[j] -= eps;
                let fd = (sys.residual(&xp) - sys.residual(&xm)) / (2.0 * eps);
                for i in 0..fd.len() {
                    assert!(
                        (fd[i] - jac[(i, j)]).abs() < 1e-7,
                        "complex={complex} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn haar_start_is_a_fixed_point() {
        let c = form(1);
        let haar = FilterCoeffs::haar(&c, 1).unwrap();
        let h = solve_from(&c, &haar, &SolverOptions::default()).unwrap();
        for n in [[0, 0], [1, 0]] {
            assert_eq!(h.get(n), haar.get(n));
        }
        assert!(h
            .iter()
            .filter(|(n, _)| *n != [0, 0] && *n != [1, 0])
            .all(|(_, v)| v == Complex64::default()));
        assert!(h.is_validated());
    }

    #[test]
    fn zero_start_never_returns_an_invalid_filter() {
        let c = form(1);
        match solve_from(
            &c,
            &FilterCoeffs::new(1).unwrap(),
            &SolverOptions::default(),
        ) {
            Ok(h) => assert!(residuals(&h, &c).max_abs <= DEFAULT_TOL),
            Err(Error::NoConvergence { best_residual }) => assert!(best_residual > DEFAULT_TOL),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn random_starts_converge_for_every_form() {
        for c in CanonicalForm::all() {
            for complex in [false, true] {
                let sys = System::new(&c, 2, complex);
                let opts = SolverOptions {
                    complex,
                    ..Default::default()
                };
                let out = run_start(&sys, random_start(&sys, 42, 1), &opts);
                // not every start has to converge; just exercise the path
                assert!(out.max_residual.is_finite());
            }
        }
    }

    #[test]
    fn index5_support2_converges_with_seeded_starts() {
        let c = form(5);
        let opts = SolverOptions {
            seed: 42,
            random_starts: 64,
            haar_start: false,
            ..Default::default()
        };
        let h = solve(&c, 2, &opts).unwrap();
        assert!(h.is_validated());
        assert!(residuals(&h, &c).max_abs <= 1e-12);
        assert_ne!(
            h,
            FilterCoeffs::haar(&c, 2)
                .unwrap()
                .certify(&c, 1e-12)
                .unwrap()
        );
        let again = solve(&c, 2, &opts).unwrap();
        let bits = |f: &FilterCoeffs| {
            f.iter()
                .map(|(n, v)| (n, v.re.to_bits(), v.im.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&h), bits(&again));
    }

    #[test]
    fn rejects_bad_n0() {
        assert!(matches!(
            solve(&form(1), 0, &SolverOptions::default()),
            Err(Error::InvalidN0(0))
        ));
    }

    #[test]
    fn document_round_trip() {
        let c = form(1);
        let h = FilterCoeffs::haar(&c, 2).unwrap();
        let doc = h.to_document(c.matrix());
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"N0\":2"));
        let back: FilterDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(
            back.to_filter().unwrap().iter().collect::<Vec<_>>(),
            h.iter().collect::<Vec<_>>()
        );
    }
}
