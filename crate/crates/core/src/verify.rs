//! Numerical checks of the frame identities on concrete test functions.
//!
//! Inner products `⟨f, D^j T_ℓ g⟩` with `(D^j T_ℓ g)(t) = 2^{j/2} g(A^j t − ℓ)`
//! are midpoint sums. For `j ≥ 0` the atom is narrower than the test
//! function, so the sum runs over the atom's own grid after the change of
//! variables `u = A^j t − ℓ`, with `f` evaluated exactly:
//! `2^{−j/2}·Σ_u f(A^{−j}(u + ℓ))·conj g(u)·du`. For `j < 0` the sum runs
//! over the test function's grid with `g` interpolated bilinearly.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Rect, SampledField};
use crate::filter::DEFAULT_QMF_GRID;
use crate::lattice::{CanonicalForm, IVec2, IntMat2};
use crate::lawton::{self, FilterCoeffs};
use crate::scaling::{ghat_truncated, refinement_residual, synthesize_phi, SynthesisParams};
use crate::sum::{sum_complex, sum_f64, ComplexSum};
use crate::wavelet::{highpass_orthogonality, WaveletSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    GaussianBump,
    IndicatorBox,
    TrigWindowed,
    /// Bilinear interpolation of a stored field.
    Sampled,
}

/// Gaussians are cut off at this many widths from the centre.
const GAUSSIAN_CUTOFF: f64 = 6.0;

/// A compactly supported function with a realised sample grid.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub kind: TestKind,
    pub center: [f64; 2],
    /// Gaussian width, or half side for the indicator box.
    pub width: f64,
    pub frequency: [f64; 2],
    pub amplitude: f64,
    pub support: Rect,
    /// Samples on a grid covering `support`.
    pub field: SampledField,
    source: Option<SampledField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub kind: TestKind,
    pub center: [f64; 2],
    pub width: f64,
    pub frequency: [f64; 2],
}

impl TestFunction {
    fn analytic(
        kind: TestKind,
        center: [f64; 2],
        width: f64,
        frequency: [f64; 2],
        grid_n: usize,
    ) -> Result<Self> {
        if !(width > 0.0) || grid_n < 2 {
            return Err(Error::InvalidParameter(
                "test function needs positive width and grid ≥ 2".into(),
            ));
        }
        let half = match kind {
            TestKind::IndicatorBox => width,
            _ => GAUSSIAN_CUTOFF * width,
        };
        let support = Rect {
            lo: [center[0] - half, center[1] - half],
            hi: [center[0] + half, center[1] + half],
        };
        let mut f = Self {
            kind,
            center,
            width,
            frequency,
            amplitude: 1.0,
            support,
            field: SampledField::zeros("f", support.lo, 1.0, 1, 1),
            source: None,
        };
        f.realize(grid_n);
        Ok(f)
    }

    pub fn gaussian(center: [f64; 2], width: f64, grid_n: usize) -> Result<Self> {
        Self::analytic(TestKind::GaussianBump, center, width, [0.0; 2], grid_n)
    }

    pub fn indicator_box(center: [f64; 2], half_side: f64, grid_n: usize) -> Result<Self> {
        Self::analytic(TestKind::IndicatorBox, center, half_side, [0.0; 2], grid_n)
    }

    pub fn trig_windowed(
        center: [f64; 2],
        width: f64,
        frequency: [f64; 2],
        grid_n: usize,
    ) -> Result<Self> {
        Self::analytic(TestKind::TrigWindowed, center, width, frequency, grid_n)
    }

    pub fn from_field(field: SampledField) -> Self {
        let support = field.bounds();
        Self {
            kind: TestKind::Sampled,
            center: [
                (support.lo[0] + support.hi[0]) / 2.0,
                (support.lo[1] + support.hi[1]) / 2.0,
            ],
            width: 0.0,
            frequency: [0.0; 2],
            amplitude: 1.0,
            support,
            field: field.clone(),
            source: Some(field),
        }
    }

    fn realize(&mut self, grid_n: usize) {
        let step = (self.support.hi[0] - self.support.lo[0]) / grid_n as f64;
        let this = self.clone();
        self.field =
            SampledField::from_fn("f", self.support.lo, step, grid_n + 1, grid_n + 1, |t| {
                this.eval(t)
            });
    }

    pub fn spec(&self) -> TestFunctionSpec {
        TestFunctionSpec {
            kind: self.kind,
            center: self.center,
            width: self.width,
            frequency: self.frequency,
        }
    }

    pub fn eval(&self, t: [f64; 2]) -> Complex64 {
        if !self.support.contains(t) {
            return Complex64::default();
        }
        let d = [t[0] - self.center[0], t[1] - self.center[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        let w2 = 2.0 * self.width * self.width;
        let v = match self.kind {
            TestKind::GaussianBump => (-r2 / w2).exp(),
            TestKind::IndicatorBox => 1.0,
            TestKind::TrigWindowed => {
                (-r2 / w2).exp() * (self.frequency[0] * d[0] + self.frequency[1] * d[1]).cos()
            }
            TestKind::Sampled => {
                return self
                    .source
                    .as_ref()
                    .map(|s| s.interp(t))
                    .unwrap_or_default()
                    * self.amplitude
            }
        };
        Complex64::new(v * self.amplitude, 0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.field.norm_sq()
    }

    /// `c·f`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.amplitude *= c;
        out.field = self.field.scaled(Complex64::new(c, 0.0));
        out
    }

    /// `f(· − k)`.
    pub fn translated(&self, k: IVec2) -> Self {
        let shift = [k[0] as f64, k[1] as f64];
        let mut out = self.clone();
        out.center = [self.center[0] + shift[0], self.center[1] + shift[1]];
        out.support = Rect {
            lo: [self.support.lo[0] + shift[0], self.support.lo[1] + shift[1]],
            hi: [self.support.hi[0] + shift[0], self.support.hi[1] + shift[1]],
        };
        out.field.origin = [
            self.field.origin[0] + shift[0],
            self.field.origin[1] + shift[1],
        ];
        if let Some(src) = &mut out.source {
            src.origin = [src.origin[0] + shift[0], src.origin[1] + shift[1]];
        }
        out
    }
}

/// The three fixed test functions; centres come from a seeded generator.
pub fn standard_suite(grid_n: usize) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut center = || [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    Ok(vec![
        TestFunction::gaussian(center(), 0.3, grid_n)?,
        TestFunction::indicator_box(center(), 0.75, grid_n)?,
        TestFunction::trig_windowed(center(), 0.5, [4.0, 2.0], grid_n)?,
    ])
}

/// Integer power `A^{|j|}`; `j` picks the direction.
fn power(a: &IntMat2, j: i32) -> IntMat2 {
    a.pow(j.unsigned_abs())
}

/// `A^j p` for any sign of `j`.
fn apply_power(a: &IntMat2, j: i32, p: [f64; 2]) -> [f64; 2] {
    let m = power(a, j);
    if j >= 0 {
        m.apply_f64(p)
    } else {
        m.solve_f64(p)
    }
}

/// Bounding box of the atom `D^j T_ℓ g`: `A^{−j}(box_g + ℓ)`.
fn atom_box(g_box: &Rect, a: &IntMat2, j: i32, ell: IVec2) -> Rect {
    Rect::bounding(
        g_box
            .corners()
            .map(|p| apply_power(a, -j, [p[0] + ell[0] as f64, p[1] + ell[1] as f64])),
    )
}

/// Translates whose atom at level `j` can meet `support`:
/// integer points of the box `A^j·support − box_g`.
pub fn overlapping_translates(support: &Rect, g_box: &Rect, a: &IntMat2, j: i32) -> Vec<IVec2> {
    let img = Rect::bounding(support.corners().map(|p| apply_power(a, j, p)));
    let lo = [
        (img.lo[0] - g_box.hi[0]).ceil() as i64,
        (img.lo[1] - g_box.hi[1]).ceil() as i64,
    ];
    let hi = [
        (img.hi[0] - g_box.lo[0]).floor() as i64,
        (img.hi[1] - g_box.lo[1]).floor() as i64,
    ];
    (lo[0]..=hi[0])
        .flat_map(|x| (lo[1]..=hi[1]).map(move |y| [x, y]))
        .collect()
}

/// `⟨f, D^j T_ℓ g⟩` for a dilation matrix `a` with `|det a| = 2`.
pub fn coefficient(
    f: &TestFunction,
    g: &SampledField,
    a: &IntMat2,
    j: i32,
    ell: IVec2,
) -> Complex64 {
    let bx = atom_box(&g.bounds(), a, j, ell);
    if bx.intersect(&f.support).is_none() {
        return Complex64::default();
    }
    let scale = 2f64.powf(-j as f64 / 2.0);
    let mut acc = ComplexSum::default();
    if j >= 0 {
        let m = power(a, j);
        let shift = [ell[0] as f64, ell[1] as f64];
        for jj in 0..g.ny {
            for ii in 0..g.nx {
                let gv = g.at(ii, jj);
                if gv == Complex64::default() {
                    continue;
                }
                let u = g.point(ii, jj);
                let t = m.solve_f64([u[0] + shift[0], u[1] + shift[1]]);
                if f.support.contains(t) {
                    acc.add(f.eval(t) * gv.conj());
                }
            }
        }
        acc.value() * scale * g.cell_area()
    } else {
        let fld = &f.field;
        let Some(r) = bx.intersect(&fld.bounds()) else {
            return Complex64::default();
        };
        let m = power(a, j);
        let idx = |x: f64, o: f64| ((x - o) / fld.step).max(0.0);
        let (i0, i1) = (
            idx(r.lo[0], fld.origin[0]).floor() as usize,
            (idx(r.hi[0], fld.origin[0]).ceil() as usize).min(fld.nx - 1),
        );
        let (j0, j1) = (
            idx(r.lo[1], fld.origin[1]).floor() as usize,
            (idx(r.hi[1], fld.origin[1]).ceil() as usize).min(fld.ny - 1),
        );
        for jj in j0..=j1 {
            for ii in i0..=i1 {
                let fv = fld.at(ii, jj);
                if fv == Complex64::default() {
                    continue;
                }
                let t = fld.point(ii, jj);
                let s = m.solve_f64(t);
                acc.add(
                    fv * g
                        .interp([s[0] - ell[0] as f64, s[1] - ell[1] as f64])
                        .conj(),
                );
            }
        }
        // atom amplitude 2^{j/2} equals `scale⁻¹`
        acc.value() / scale * fld.cell_area()
    }
}

/// `1/step` when it is a whole number: integer shifts then move the atom
/// grid onto itself.
fn lattice_ratio(step: f64) -> Option<i64> {
    let inv = 1.0 / step;
    let s = inv.round();
    (s >= 1.0 && (inv - s).abs() <= 1e-9 * s).then_some(s as i64)
}

/// All nonzero-candidate coefficients at level `j`, in translate order.
pub fn level_coefficients(
    f: &TestFunction,
    g: &SampledField,
    a: &IntMat2,
    j: i32,
) -> Vec<(IVec2, Complex64)> {
    let ells = overlapping_translates(&f.support, &g.bounds(), a, j);
    match lattice_ratio(g.step) {
        Some(s) if j >= 0 && !ells.is_empty() => shared_lattice_level(f, g, a, j, &ells, s),
        _ => ells
            .into_par_iter()
            .map(|ell| (ell, coefficient(f, g, a, j, ell)))
            .collect(),
    }
}

/// Same sums as `coefficient` for `j ≥ 0`, with `f` sampled once on the
/// lattice `A^{−j}(origin + m·dx)` and each coefficient read off as a
/// correlation against `g`'s samples.
fn shared_lattice_level(
    f: &TestFunction,
    g: &SampledField,
    a: &IntMat2,
    j: i32,
    ells: &[IVec2],
    s: i64,
) -> Vec<(IVec2, Complex64)> {
    let lo = [
        ells.iter().map(|l| l[0]).min().unwrap_or(0),
        ells.iter().map(|l| l[1]).min().unwrap_or(0),
    ];
    let hi = [
        ells.iter().map(|l| l[0]).max().unwrap_or(0),
        ells.iter().map(|l| l[1]).max().unwrap_or(0),
    ];
    let w = ((hi[0] - lo[0]) * s) as usize + g.nx;
    let h = ((hi[1] - lo[1]) * s) as usize + g.ny;
    let m = power(a, j);
    let base = [g.origin[0] + lo[0] as f64, g.origin[1] + lo[1] as f64];
    let mut lattice = vec![Complex64::default(); w * h];
    lattice.par_chunks_mut(w).enumerate().for_each(|(q, row)| {
        let y = base[1] + q as f64 * g.step;
        for (p, v) in row.iter_mut().enumerate() {
            let t = m.solve_f64([base[0] + p as f64 * g.step, y]);
            if f.support.contains(t) {
                *v = f.eval(t);
            }
        }
    });
    let scale = 2f64.powf(-j as f64 / 2.0) * g.cell_area();
    ells.par_iter()
        .map(|&ell| {
            if atom_box(&g.bounds(), a, j, ell)
                .intersect(&f.support)
                .is_none()
            {
                return (ell, Complex64::default());
            }
            let off = [
                ((ell[0] - lo[0]) * s) as usize,
                ((ell[1] - lo[1]) * s) as usize,
            ];
            let mut acc = ComplexSum::default();
            for jj in 0..g.ny {
                let frow = &lattice[(off[1] + jj) * w + off[0]..][..g.nx];
                let grow = &g.values[jj * g.nx..][..g.nx];
                for (fv, gv) in frow.iter().zip(grow) {
                    if *fv != Complex64::default() {
                        acc.add(fv * gv.conj());
                    }
                }
            }
            (ell, acc.value() * scale)
        })
        .collect()
}

/// `Σ_ℓ |⟨f, D^j T_ℓ g⟩|²` over the overlapping translates.
pub fn level_energy(f: &TestFunction, g: &SampledField, a: &IntMat2, j: i32) -> f64 {
    sum_f64(
        level_coefficients(f, g, a, j)
            .into_iter()
            .map(|(_, c)| c.norm_sqr()),
    )
}

/// `L_J(f) = Σ_ℓ |⟨f, D^J T_ℓ φ⟩|²`.
pub fn l_j(f: &TestFunction, phi: &SampledField, a: &IntMat2, j: i32) -> f64 {
    level_energy(f, phi, a, j)
}

/// `Σ_{j ∈ levels} Σ_ℓ |⟨f, D^j T_ℓ ψ⟩|² / ‖f‖²`.
pub fn frame_ratio(
    f: &TestFunction,
    psi: &SampledField,
    a: &IntMat2,
    levels: (i32, i32),
) -> Result<f64> {
    let norm = f.norm_sq();
    if !(norm > 0.0) {
        return Err(Error::DegenerateInput(
            "test function has zero grid norm".into(),
        ));
    }
    let energies: Vec<f64> = (levels.0..=levels.1)
        .map(|j| level_energy(f, psi, a, j))
        .collect();
    Ok(sum_f64(energies) / norm)
}

/// Reconstruction `Σ_ℓ ⟨f, D^j T_ℓ g⟩·D^j T_ℓ g` sampled on `grid`.
fn reconstruction(
    f: &TestFunction,
    g: &SampledField,
    a: &IntMat2,
    j: i32,
    grid: &SampledField,
) -> Vec<Complex64> {
    let amp = 2f64.powf(j as f64 / 2.0);
    let atoms: Vec<(IVec2, Complex64, Rect)> = level_coefficients(f, g, a, j)
        .into_iter()
        .filter(|(_, c)| *c != Complex64::default())
        .map(|(ell, c)| (ell, c, atom_box(&g.bounds(), a, j, ell)))
        .collect();
    let m = power(a, j);
    let mut out = vec![Complex64::default(); grid.nx * grid.ny];
    out.par_chunks_mut(grid.nx)
        .enumerate()
        .for_each(|(jj, row)| {
            let y = grid.origin[1] + grid.step * jj as f64;
            for (ell, c, bx) in &atoms {
                if y < bx.lo[1] || y > bx.hi[1] {
                    continue;
                }
                let i0 = ((bx.lo[0] - grid.origin[0]) / grid.step).floor().max(0.0) as usize;
                let i1 = (((bx.hi[0] - grid.origin[0]) / grid.step).ceil().max(0.0) as usize)
                    .min(grid.nx - 1);
                for (ii, v) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    let t = grid.point(ii, jj);
                    let s = if j >= 0 {
                        m.apply_f64(t)
                    } else {
                        m.solve_f64(t)
                    };
                    *v += c * amp * g.interp([s[0] - ell[0] as f64, s[1] - ell[1] as f64]);
                }
            }
        });
    out
}

/// `‖I_{J+1} − I_J − F_J‖ / ‖f‖` on a grid with `f`'s step covering all
/// atoms involved.
pub fn telescoping_residual(
    f: &TestFunction,
    phi: &SampledField,
    psi: &SampledField,
    a: &IntMat2,
    j: i32,
) -> Result<f64> {
    let norm = f.norm_sq();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut boxes = vec![f.support];
    for (g, lvl) in [(phi, j + 1), (phi, j), (psi, j)] {
        for ell in overlapping_translates(&f.support, &g.bounds(), a, lvl) {
            boxes.push(atom_box(&g.bounds(), a, lvl, ell));
        }
    }
    let region = Rect::bounding(boxes.iter().flat_map(|b| [b.lo, b.hi]));
    let grid = SampledField::covering("grid", &region, f.field.step, |_| Complex64::default());
    let fine = reconstruction(f, phi, a, j + 1, &grid);
    let coarse = reconstruction(f, phi, a, j, &grid);
    let detail = reconstruction(f, psi, a, j, &grid);
    let diff = sum_f64(
        fine.iter()
            .zip(&coarse)
            .zip(&detail)
            .map(|((x, y), z)| (x - y - z).norm_sqr()),
    );
    Ok((diff * grid.cell_area() / norm).sqrt())
}

/// A finite Fourier series `Σ c_n e^{i n·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    pub terms: Vec<(IVec2, Complex64)>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![([0, 0], Complex64::new(c, 0.0))],
        }
    }

    pub fn cos_x1() -> Self {
        Self {
            terms: vec![
                ([1, 0], Complex64::new(0.5, 0.0)),
                ([-1, 0], Complex64::new(0.5, 0.0)),
            ],
        }
    }

    /// `|m₀(x)|² = ½ Σ_{n,m} h_n conj(h_m) e^{i(m−n)·x}`.
    pub fn m0_squared(h: &FilterCoeffs) -> Self {
        let mut acc: BTreeMap<IVec2, Complex64> = BTreeMap::new();
        for (n, a) in h.iter() {
            for (m, b) in h.iter() {
                *acc.entry([m[0] - n[0], m[1] - n[1]]).or_default() += a * b.conj() * 0.5;
            }
        }
        Self {
            terms: acc.into_iter().collect(),
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> Complex64 {
        sum_complex(
            self.terms.iter().map(|(n, c)| {
                c * Complex64::from_polar(1.0, n[0] as f64 * x[0] + n[1] as f64 * x[1])
            }),
        )
    }
}

/// `|∫_{CᵀΓ} h − ∫_Γ h − ∫_{Γ+πq} h|` with `Γ = [−π, π)²`, midpoint rule;
/// the parallelogram is pulled back to `Γ` with Jacobian `|det C|`.
pub fn click_residual(c: &CanonicalForm, q: IVec2, h: &TrigPoly, quad_n: usize) -> Result<f64> {
    if quad_n < 64 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs at least 64 points, got {quad_n}"
        )));
    }
    let ct = c.matrix().transpose();
    let jac = ct.det().abs() as f64;
    let step = 2.0 * PI / quad_n as f64;
    let shift = [PI * q[0] as f64, PI * q[1] as f64];
    let rows: Vec<ComplexSum> = (0..quad_n)
        .into_par_iter()
        .map(|i| {
            let mut acc = ComplexSum::default();
            let x = -PI + (i as f64 + 0.5) * step;
            for k in 0..quad_n {
                let u = [x, -PI + (k as f64 + 0.5) * step];
                acc.add(h.eval(ct.apply_f64(u)) * jac);
                acc.add(-h.eval(u));
                acc.add(-h.eval([u[0] + shift[0], u[1] + shift[1]]));
            }
            acc
        })
        .collect();
    let total = rows
        .into_iter()
        .fold(ComplexSum::default(), ComplexSum::merge);
    Ok((total.value() * step * step).norm())
}

/// `Σ|f|²` against `Σ|F|²/(nx·ny)` for the discrete transform of the
/// samples; returns the relative gap.
pub fn plancherel_gap(f: &SampledField) -> f64 {
    let (nx, ny) = (f.nx, f.ny);
    let mut data = f.values.clone();
    let mut planner = FftPlanner::new();
    let fx = planner.plan_fft_forward(nx);
    data.chunks_mut(nx).for_each(|row| fx.process(row));
    let fy = planner.plan_fft_forward(ny);
    let mut col = vec![Complex64::default(); ny];
    for i in 0..nx {
        (0..ny).for_each(|j| col[j] = data[j * nx + i]);
        fy.process(&mut col);
        (0..ny).for_each(|j| data[j * nx + i] = col[j]);
    }
    let time = sum_f64(f.values.iter().map(|v| v.norm_sqr()));
    let freq = sum_f64(data.iter().map(|v| v.norm_sqr())) / (nx * ny) as f64;
    if time == 0.0 {
        return 0.0;
    }
    (time - freq).abs() / time
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub value: f64,
    /// Upper bound, or the lower bound for checks marked `at_least`.
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub at_least: bool,
    pub pass: bool,
}

impl Check {
    pub fn at_most(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            lower: None,
            at_least: false,
            pass: value <= threshold,
        }
    }

    pub fn at_least(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            lower: None,
            at_least: true,
            pass: value >= threshold,
        }
    }

    pub fn within(value: f64, lower: f64, upper: f64) -> Self {
        Self {
            value,
            threshold: upper,
            lower: Some(lower),
            at_least: false,
            pass: value >= lower && value <= upper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub levels: [i32; 2],
    pub grid: usize,
    pub synthesis: SynthesisParams,
    pub test_functions: Vec<TestFunctionSpec>,
    pub telescoping_levels: Vec<i32>,
    pub limit_levels: [i32; 2],
    pub quad_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: BTreeMap<String, Check>,
    pub metadata: ReportMeta,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub levels: (i32, i32),
    /// Samples per axis for the realised test functions.
    pub grid: usize,
    pub telescoping_levels: Vec<i32>,
    /// `(low, high)` for the one-sided limits `L_low → 0`, `L_high → ‖f‖²`.
    pub limit_levels: (i32, i32),
    pub quad_n: usize,
    /// Extra product depth for the truncation stability check; `0` skips it.
    pub stability_extra_j: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            levels: (-6, 6),
            grid: 512,
            telescoping_levels: vec![-1, 0, 1],
            limit_levels: (-8, 6),
            quad_n: 512,
            stability_extra_j: 4,
        }
    }
}

/// Thresholds shared by the report and the test suite.
pub mod thresholds {
    pub const LAWTON: f64 = 1e-12;
    pub const QMF: f64 = 1e-10;
    pub const M0_MAX_SLACK: f64 = 1e-10;
    pub const M0_AT_ZERO: f64 = 1e-12;
    pub const GHAT_AT_ZERO: f64 = 1e-14;
    pub const PHI_INTEGRAL: f64 = 1e-2;
    pub const PHI_IMAG_RATIO: f64 = 1e-8;
    pub const TAIL_FRACTION: f64 = 1e-3;
    pub const TRUNCATION_STABILITY: f64 = 1e-6;
    pub const REFINEMENT_MAX: f64 = 5e-2;
    pub const REFINEMENT_RMS: f64 = 5e-3;
    pub const PSI_INTEGRAL: f64 = 1e-2;
    pub const SUPPORT_MASS: f64 = 1e-3;
    pub const PULL_BACK_NORM: f64 = 1e-2;
    pub const FRAME_LOW: f64 = 0.95;
    pub const FRAME_HIGH: f64 = 1.0 + 1e-3;
    pub const TELESCOPING: f64 = 5e-2;
    pub const LIMIT_LOW: f64 = 0.01;
    pub const LIMIT_HIGH: f64 = 0.95;
    pub const LEMMA_SLACK: f64 = 1e-2;
    pub const CLICK: f64 = 1e-6;
    pub const HIGHPASS: f64 = 1e-12;
    pub const PLANCHEREL: f64 = 1e-6;
}

fn kind_name(k: TestKind) -> &'static str {
    match k {
        TestKind::GaussianBump => "gaussian",
        TestKind::IndicatorBox => "indicator",
        TestKind::TrigWindowed => "trig",
        TestKind::Sampled => "sampled",
    }
}

/// Smallest integer `B` with the attractor box inside `[−B, B]²`.
pub fn integer_half_width(r: &Rect) -> f64 {
    [r.lo[0], r.lo[1], r.hi[0], r.hi[1]]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .ceil()
}

/// Runs every check on a built system.
pub fn verify_system(sys: &WaveletSystem, opts: &VerifyOptions) -> Result<VerificationReport> {
    use thresholds as t;
    let c = &sys.canonical;
    let cm = c.matrix();
    let ev = sys.evaluator();
    let mut checks = BTreeMap::new();
    let mut put = |name: String, ch: Check| {
        checks.insert(name, ch);
    };

    put(
        "lawton_residual".into(),
        Check::at_most(lawton::residuals(&sys.h, c).max_abs, t::LAWTON),
    );
    let m0 = ev.eval([0.0, 0.0]);
    put(
        "m0_at_zero".into(),
        Check::at_most((m0 - 1.0).norm(), t::M0_AT_ZERO),
    );
    put(
        "qmf_residual".into(),
        Check::at_most(ev.qmf_residual(DEFAULT_QMF_GRID), t::QMF),
    );
    put(
        "max_abs_m0".into(),
        Check::at_most(ev.max_abs(DEFAULT_QMF_GRID), 1.0 + t::M0_MAX_SLACK),
    );
    put(
        "highpass_orthogonality".into(),
        Check::at_most(highpass_orthogonality(&sys.h, c), t::HIGHPASS),
    );
    let g0 = ghat_truncated(&ev, c, [0.0, 0.0], sys.params.j);
    put(
        "ghat_at_zero".into(),
        Check::at_most((g0 - 1.0 / (2.0 * PI)).norm(), t::GHAT_AT_ZERO),
    );

    put(
        "phi_integral".into(),
        Check::at_most((sys.phi.integral() - 1.0).norm(), t::PHI_INTEGRAL),
    );
    let imag = if sys.h.is_real() {
        sys.phi.max_imag() / sys.phi.max_abs().max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    put(
        "phi_imag_ratio".into(),
        Check::at_most(imag, t::PHI_IMAG_RATIO),
    );
    put(
        "phi_tail_fraction".into(),
        Check::at_most(sys.meta.tail_fraction, t::TAIL_FRACTION),
    );
    // The stored φ is cropped; refinement and depth checks use the full window.
    let full = synthesize_phi(&ev, c, &sys.params)?;
    if opts.stability_extra_j > 0 {
        let deeper = SynthesisParams {
            j: sys.params.j + opts.stability_extra_j,
            ..sys.params.clone()
        };
        let diff = full.phi.max_diff(&synthesize_phi(&ev, c, &deeper)?.phi)?;
        put(
            "phi_truncation_stability".into(),
            Check::at_most(diff, t::TRUNCATION_STABILITY),
        );
    }
    let rr = refinement_residual(&full.phi, &sys.h, c);
    put(
        "refinement_max".into(),
        Check::at_most(rr.max_abs, t::REFINEMENT_MAX),
    );
    put(
        "refinement_rms".into(),
        Check::at_most(rr.rms, t::REFINEMENT_RMS),
    );

    put(
        "psi_integral".into(),
        Check::at_most(sys.psi_c.integral().norm(), t::PSI_INTEGRAL),
    );
    put(
        "psi_support_mass".into(),
        Check::at_most(mass_outside(&sys.psi_c, &sys.meta.psi_box), t::SUPPORT_MASS),
    );
    let (n_c, n_p) = (sys.psi_c.norm_sq(), sys.psi.norm_sq());
    put(
        "pull_back_norm".into(),
        Check::at_most(
            (n_p - n_c).abs() / n_c.max(f64::MIN_POSITIVE),
            t::PULL_BACK_NORM,
        ),
    );

    let suite = standard_suite(opts.grid)?;
    for f in &suite {
        let name = kind_name(f.kind);
        put(
            format!("plancherel_{name}"),
            Check::at_most(plancherel_gap(&f.field), t::PLANCHEREL),
        );
        let ratio = frame_ratio(f, &sys.psi, &sys.a0, opts.levels)?;
        put(
            format!("frame_ratio_{name}"),
            Check::within(ratio, t::FRAME_LOW, t::FRAME_HIGH),
        );
    }

    let gauss = &suite[0];
    let norm = gauss.norm_sq();
    for &j in &opts.telescoping_levels {
        let r = telescoping_residual(gauss, &sys.phi, &sys.psi_c, &cm, j)?;
        put(
            format!("telescoping_j{j}"),
            Check::at_most(r, t::TELESCOPING),
        );
    }
    let (lo, hi) = opts.limit_levels;
    let l: BTreeMap<i32, f64> = (lo..=hi + 1)
        .map(|j| (j, l_j(gauss, &sys.phi, &cm, j)))
        .collect();
    let scalar = (lo..=hi)
        .map(|j| (l[&(j + 1)] - l[&j] - level_energy(gauss, &sys.psi_c, &cm, j)).abs() / norm)
        .fold(0.0, f64::max);
    put(
        "telescoping_scalar".into(),
        Check::at_most(scalar, t::TELESCOPING),
    );
    put(
        "limit_low".into(),
        Check::at_most(l[&lo] / norm, t::LIMIT_LOW),
    );
    put(
        "limit_high".into(),
        Check::at_least(l[&hi] / norm, t::LIMIT_HIGH),
    );
    let b = integer_half_width(&sys.meta.phi_box);
    let bound = (2.0 * b + 1.0).powi(2) * sys.phi.norm_sq() * norm;
    let worst = l.values().fold(0.0f64, |m, v| m.max(v / bound));
    put(
        "lemma_bound".into(),
        Check::at_most(worst, 1.0 + t::LEMMA_SLACK),
    );

    let q = sys.lattice.q;
    for (name, poly) in [
        ("const", TrigPoly::constant(1.0)),
        ("cos", TrigPoly::cos_x1()),
        ("m0_squared", TrigPoly::m0_squared(&sys.h)),
    ] {
        put(
            format!("click_{name}"),
            Check::at_most(click_residual(c, q, &poly, opts.quad_n)?, t::CLICK),
        );
    }

    Ok(VerificationReport {
        checks,
        metadata: ReportMeta {
            levels: [opts.levels.0, opts.levels.1],
            grid: opts.grid,
            synthesis: sys.params.clone(),
            test_functions: suite.iter().map(TestFunction::spec).collect(),
            telescoping_levels: opts.telescoping_levels.clone(),
            limit_levels: [lo, hi],
            quad_n: opts.quad_n,
        },
    })
}

/// Share of `‖g‖²` outside `r`.
pub fn mass_outside(g: &SampledField, r: &Rect) -> f64 {
    let total = g.norm_sq();
    if total == 0.0 {
        return 0.0;
    }
    let outside = sum_f64(
        g.points()
            .filter(|(p, _)| !r.contains(*p))
            .map(|(_, v)| v.norm_sqr()),
    );
    outside * g.cell_area() / total
}
