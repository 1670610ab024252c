//! The scaling function `φ` as the inverse transform of the truncated
//! product `ĝ_J(ξ) = (1/2π)·∏_{j=1..J} m₀((Cᵀ)^{−j} ξ)`.
//!
//! Transforms use the symmetric convention `f̂(ξ) = (1/2π)∫ f(t) e^{−iξ·t} dt`,
//! so `∫φ = 2π·ĝ(0) = 1`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Rect, SampledField};
use crate::filter::FilterEvaluator;
use crate::lattice::{CanonicalForm, IntMat2};
use crate::lawton::FilterCoeffs;
use crate::sum::sum_f64;

pub use crate::field::{FieldMeta, SampledField as Field};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    /// Number of product factors.
    #[serde(rename = "J")]
    pub j: u32,
    /// Half-width `R` of the frequency box `[−R, R]²`.
    pub grid_extent: f64,
    /// Samples per axis; a power of two, at least 4.
    pub grid_n: usize,
    /// Largest spatial step accepted.
    pub max_step: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            j: 20,
            grid_extent: 32.0 * PI,
            grid_n: 1024,
            max_step: 0.125,
        }
    }
}

impl SynthesisParams {
    /// Spatial step `π/R` of the dual grid.
    pub fn spatial_step(&self) -> f64 {
        PI / self.grid_extent
    }

    pub fn check(&self) -> Result<()> {
        if self.j < 1 {
            return Err(Error::InvalidParameter("J must be at least 1".into()));
        }
        if self.grid_n < 4 || !self.grid_n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size {} is not a power of two ≥ 4",
                self.grid_n
            )));
        }
        if !(self.grid_extent > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter(
                "extent and step bound must be positive".into(),
            ));
        }
        let step = self.spatial_step();
        if step > self.max_step {
            return Err(Error::GridTooCoarse {
                step,
                max_step: self.max_step,
            });
        }
        Ok(())
    }
}

/// `(1/2π)·∏_{j=1..J} m₀((Cᵀ)^{−j} ξ)`; each inverse applied as `adj/det`.
pub fn ghat_truncated(ev: &FilterEvaluator, c: &CanonicalForm, xi: [f64; 2], j: u32) -> Complex64 {
    let mut scratch = (Vec::new(), Vec::new());
    ghat_with(ev, &c.matrix().transpose(), xi, j, &mut scratch)
}

fn ghat_with(
    ev: &FilterEvaluator,
    ct: &IntMat2,
    mut xi: [f64; 2],
    j: u32,
    scratch: &mut (Vec<Complex64>, Vec<Complex64>),
) -> Complex64 {
    let mut p = Complex64::new(1.0 / (2.0 * PI), 0.0);
    for _ in 0..j {
        xi = ct.solve_f64(xi);
        p *= ev.eval_with(xi, scratch);
    }
    p
}

/// Spectral norm of a real 2×2 matrix in closed form.
pub fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let fro = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    ((fro + disc) / 2.0).sqrt()
}

fn mat_mul(x: [[f64; 2]; 2], y: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            x[0][0] * y[0][0] + x[0][1] * y[1][0],
            x[0][0] * y[0][1] + x[0][1] * y[1][1],
        ],
        [
            x[1][0] * y[0][0] + x[1][1] * y[1][0],
            x[1][0] * y[0][1] + x[1][1] * y[1][1],
        ],
    ]
}

fn inverse_f64(m: &IntMat2) -> [[f64; 2]; 2] {
    let adj = m.adjugate().to_f64_rows();
    let det = m.det() as f64;
    [
        [adj[0][0] / det, adj[0][1] / det],
        [adj[1][0] / det, adj[1][1] / det],
    ]
}

/// `B = 4√2·N0·Σ_{j≥1} ‖(Cᵀ)^{−j}‖₂`.
///
/// With `β = ‖(Cᵀ)⁻¹‖₂⁻¹` this equals `B₀·β⁻¹/(1 − β⁻¹)` whenever the norm
/// is submultiplicative with equality, as for index 1. For indices 2, 5, 6
/// the one-step norm exceeds 1 and that closed form diverges, while the
/// series of actual power norms still converges at the spectral-radius
/// rate `2^{−1/2}`.
pub fn support_radius(n0: i64, c: &CanonicalForm) -> f64 {
    let b0 = 4.0 * SQRT_2 * n0 as f64;
    let inv = inverse_f64(&c.matrix().transpose());
    let mut power = inv;
    let mut terms = Vec::new();
    for _ in 0..400 {
        let t = spectral_norm(power);
        terms.push(t);
        if t < 1e-18 {
            break;
        }
        power = mat_mul(power, inv);
    }
    b0 * sum_f64(terms)
}

/// Bounding box of the attractor `{Σ_{j≥1} C^{−j} d_j : d_j ∈ supp h}`,
/// which contains the support of `φ`.
pub fn phi_support_box(h: &FilterCoeffs, c: &CanonicalForm) -> Rect {
    let digits: Vec<[f64; 2]> = h
        .iter()
        .filter(|(_, v)| *v != Complex64::default())
        .map(|(n, _)| [n[0] as f64, n[1] as f64])
        .collect();
    if digits.is_empty() {
        return Rect {
            lo: [0.0; 2],
            hi: [0.0; 2],
        };
    }
    let inv = inverse_f64(&c.matrix());
    let mut power = inv;
    let mut lo = [0.0f64; 2];
    let mut hi = [0.0f64; 2];
    for _ in 0..400 {
        let imgs: Vec<[f64; 2]> = digits
            .iter()
            .map(|d| {
                [
                    power[0][0] * d[0] + power[0][1] * d[1],
                    power[1][0] * d[0] + power[1][1] * d[1],
                ]
            })
            .collect();
        for k in 0..2 {
            lo[k] += imgs.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            hi[k] += imgs.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        }
        if spectral_norm(power) < 1e-18 {
            break;
        }
        power = mat_mul(power, inv);
    }
    Rect { lo, hi }
}

/// Output of [`synthesize_phi`].
#[derive(Clone, Debug)]
pub struct PhiSynthesis {
    pub phi: SampledField,
    /// Support half-width of the filter the field was built from.
    pub n0: i64,
    pub canonical: CanonicalForm,
    /// `Σ |ĝ_k|²·dξ²` over the (edge-folded) frequency samples.
    pub spectrum_norm_sq: f64,
    pub support_radius: f64,
    /// Share of `‖φ‖²` outside the ball of radius `support_radius`.
    pub tail_fraction: f64,
}

/// Samples `ĝ_J` on `ξ_k = (k − N/2)·dξ`, `dξ = 2R/N`, and inverts on the
/// dual grid `x_m = (m − N/2)·π/R`.
///
/// The row and column at `ξ = −R` stand for both `±R`; they hold the
/// average of the two, so that a Hermitian spectrum (real taps) gives a
/// real `φ`.
pub fn synthesize_phi(
    ev: &FilterEvaluator,
    c: &CanonicalForm,
    params: &SynthesisParams,
) -> Result<PhiSynthesis> {
    params.check()?;
    let n = params.grid_n;
    let r = params.grid_extent;
    let dxi = 2.0 * r / n as f64;
    let dx = params.spatial_step();
    let ct = c.matrix().transpose();
    let half = (n / 2) as f64;

    let mut spec = vec![Complex64::default(); n * n];
    spec.par_chunks_mut(n).enumerate().for_each(|(kj, row)| {
        let mut scratch = (Vec::new(), Vec::new());
        let eta = (kj as f64 - half) * dxi;
        for (ki, v) in row.iter_mut().enumerate() {
            let xi = (ki as f64 - half) * dxi;
            let g = |x: f64, y: f64, s: &mut _| ghat_with(ev, &ct, [x, y], params.j, s);
            *v = match (ki == 0, kj == 0) {
                (false, false) => g(xi, eta, &mut scratch),
                (true, false) => (g(-r, eta, &mut scratch) + g(r, eta, &mut scratch)) * 0.5,
                (false, true) => (g(xi, -r, &mut scratch) + g(xi, r, &mut scratch)) * 0.5,
                (true, true) => {
                    (g(-r, -r, &mut scratch)
                        + g(r, -r, &mut scratch)
                        + g(-r, r, &mut scratch)
                        + g(r, r, &mut scratch))
                        * 0.25
                }
            };
        }
    });
    let spectrum_norm_sq = sum_f64(spec.iter().map(|v| v.norm_sqr())) * dxi * dxi;

    // (−1)^k pre-twist, unnormalised inverse DFT, (−1)^m post-twist.
    let sign = |i: usize, j: usize| if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
    spec.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        row.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v *= sign(i, j));
    });
    inverse_fft_2d(&mut spec, n);
    let scale = dxi * dxi / (2.0 * PI);
    spec.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        row.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v *= sign(i, j) * scale);
    });

    let origin = [-half * dx, -half * dx];
    let phi = SampledField {
        label: "phi".into(),
        origin,
        step: dx,
        nx: n,
        ny: n,
        values: spec,
    };
    let radius = support_radius(ev.coeffs().n0(), c);
    let total = phi.norm_sq();
    let outside = sum_f64(
        phi.points()
            .filter(|(p, _)| p[0].hypot(p[1]) > radius)
            .map(|(_, v)| v.norm_sqr()),
    ) * phi.cell_area();
    let tail_fraction = if total > 0.0 { outside / total } else { 0.0 };
    Ok(PhiSynthesis {
        phi,
        n0: ev.coeffs().n0(),
        canonical: *c,
        spectrum_norm_sq,
        support_radius: radius,
        tail_fraction,
    })
}

/// In-place unnormalised inverse 2-D DFT of an `n × n` row-major array.
fn inverse_fft_2d(data: &mut [Complex64], n: usize) {
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let rows = |d: &mut [Complex64]| {
        d.par_chunks_mut(n).for_each(|row| fft.process(row));
    };
    rows(data);
    transpose(data, n);
    rows(data);
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for j in 0..n {
        for i in j + 1..n {
            data.swap(j * n + i, i * n + j);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementResidual {
    pub max_abs: f64,
    /// Root mean square over the same points.
    pub rms: f64,
}

/// `|φ(t) − √2·Σ h_n φ(Ct − n)|` over grid points at least one cell from the
/// edge, with `φ` on the right evaluated by bilinear interpolation.
pub fn refinement_residual(
    phi: &SampledField,
    h: &FilterCoeffs,
    c: &CanonicalForm,
) -> RefinementResidual {
    let m = c.matrix();
    let taps: Vec<([f64; 2], Complex64)> = h
        .iter()
        .filter(|(_, v)| *v != Complex64::default())
        .map(|(n, v)| ([n[0] as f64, n[1] as f64], v * SQRT_2))
        .collect();
    if phi.nx < 3 || phi.ny < 3 {
        return RefinementResidual {
            max_abs: 0.0,
            rms: 0.0,
        };
    }
    let rows: Vec<(f64, f64)> = (1..phi.ny - 1)
        .into_par_iter()
        .map(|j| {
            let mut mx = 0.0f64;
            let mut sq = Vec::with_capacity(phi.nx);
            for i in 1..phi.nx - 1 {
                let t = phi.point(i, j);
                let at = m.apply_f64(t);
                let rhs: Complex64 = taps
                    .iter()
                    .map(|(n, w)| w * phi.interp([at[0] - n[0], at[1] - n[1]]))
                    .sum();
                let e = (phi.at(i, j) - rhs).norm();
                mx = mx.max(e);
                sq.push(e * e);
            }
            (mx, sum_f64(sq))
        })
        .collect();
    let count = ((phi.nx - 2) * (phi.ny - 2)) as f64;
    let max_abs = rows.iter().fold(0.0f64, |a, r| a.max(r.0));
    let rms = (sum_f64(rows.iter().map(|r| r.1)) / count).sqrt();
    RefinementResidual { max_abs, rms }
}
