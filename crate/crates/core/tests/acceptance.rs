//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Oracles (cascade iteration, lattice bookkeeping,
//! closed-form integrals) live here and nowhere in the library.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use framelet::field::SampledField;
use framelet::filter::FilterEvaluator;
use framelet::lattice::{reduce_to_canonical, special_vectors, CanonicalForm, IntMat2};
use framelet::lawton::{self, FilterCoeffs, SolverOptions};
use framelet::scaling::{
    ghat_truncated, refinement_residual, support_radius, synthesize_phi, SynthesisParams,
};
use framelet::verify::{
    click_residual, frame_ratio, integer_half_width, l_j, level_energy, standard_suite,
    telescoping_residual, TrigPoly,
};
use framelet::wavelet::{build_system, pull_back, BuildOptions, WaveletSystem};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(parts: Vec<(bool, String)>) -> Self {
        Self {
            pass: parts.iter().all(|p| p.0),
            detail: parts
                .into_iter()
                .map(|(ok, s)| format!("{}{s}", if ok { "" } else { "!" }))
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

fn check(ok: bool, s: String) -> (bool, String) {
    (ok, s)
}

fn haar_params(grid_n: usize) -> SynthesisParams {
    // keep the spatial window at 32 units: step 32/grid_n
    SynthesisParams {
        grid_n,
        grid_extent: grid_n as f64 * PI / 32.0,
        ..Default::default()
    }
}

fn haar_opts(params: SynthesisParams) -> BuildOptions {
    BuildOptions {
        synthesis: params,
        ..Default::default()
    }
}

/// Index-1 Haar system at the default synthesis parameters, shared by 7–9.
fn haar_system() -> &'static WaveletSystem {
    static SYS: OnceLock<WaveletSystem> = OnceLock::new();
    SYS.get_or_init(|| {
        build_system(&IntMat2::new(1, 1, 1, -1), 1, &BuildOptions::default())
            .expect("Haar system builds")
    })
}

fn mul(x: [i64; 4], y: [i64; 4]) -> [i64; 4] {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn det(x: [i64; 4]) -> i64 {
    x[0] * x[3] - x[1] * x[2]
}

fn rows(m: &IntMat2) -> [i64; 4] {
    [m.a, m.b, m.c, m.d]
}

fn criterion_1() -> Outcome {
    // (known conjugator S, input matrix, canonical matrix)
    let table: [([i64; 4], [i64; 4], [i64; 4]); 4] = [
        ([-1, 1, 2, -3], [0, 2, 1, 0], [1, 1, 1, -1]),
        ([1, -1, 0, -1], [0, 2, -1, 0], [1, -3, 1, -1]),
        ([-1, 1, -1, 0], [0, 2, -1, 1], [-1, 2, -2, 2]),
        ([-1, 1, -1, 0], [0, -2, 1, -1], [1, -2, 2, -2]),
    ];
    let mut parts = Vec::new();
    for (known_s, b, c) in table {
        let known_ok = det(known_s).abs() == 1 && mul(known_s, b) == mul(c, known_s);
        let red = reduce_to_canonical(&IntMat2::new(b[0], b[1], b[2], b[3]));
        let ours_ok = match &red {
            Ok(r) => {
                let s = rows(&r.s);
                rows(&r.canonical.matrix()) == c && det(s).abs() == 1 && mul(s, b) == mul(c, s)
            }
            Err(_) => false,
        };
        let s_text = red
            .map(|r| r.s.to_string())
            .unwrap_or_else(|e| e.to_string());
        parts.push(check(
            known_ok && ours_ok,
            format!("{b:?} -> {c:?} via S={s_text}, known S ok={known_ok}"),
        ));
    }
    Outcome::new(parts)
}

/// `v ∈ MZ²` by exact division with the adjugate.
fn in_span(m: [i64; 4], v: [i64; 2]) -> bool {
    let d = det(m);
    let x = m[3] * v[0] - m[1] * v[1];
    let y = -m[2] * v[0] + m[0] * v[1];
    x % d == 0 && y % d == 0
}

fn criterion_2() -> Outcome {
    // (canonical, ℓ_A, q_A, Aᵀq_A), tabulated by hand
    let table: [([i64; 4], [i64; 2], [i64; 2], [i64; 2]); 6] = [
        ([1, 1, 1, -1], [1, 0], [1, 1], [2, 0]),
        ([1, -3, 1, -1], [1, 0], [1, 1], [2, -4]),
        ([1, 1, -1, 1], [1, 0], [1, 1], [0, 2]),
        ([-1, -1, 1, -1], [1, 0], [1, 1], [0, -2]),
        ([-1, 2, -2, 2], [0, 1], [0, 1], [-2, 2]),
        ([1, -2, 2, -2], [0, 1], [0, 1], [2, -2]),
    ];
    let mut parts = Vec::new();
    for (m, ell, q, atq) in table {
        let c =
            CanonicalForm::from_matrix(&IntMat2::new(m[0], m[1], m[2], m[3])).expect("canonical");
        let ld = special_vectors(&c);
        let row_ok = ld.ell == ell && ld.q == q && ld.at_q == atq;
        let at = [m[0], m[2], m[1], m[3]];
        let mut cover = true;
        let mut parity = true;
        let mut same = true;
        for x in -10..=10i64 {
            for y in -10..=10i64 {
                let v = [x, y];
                let a = in_span(at, v);
                let b = in_span(at, [x - ell[0], y - ell[1]]);
                cover &= a ^ b;
                parity &= ((q[0] * x + q[1] * y).rem_euclid(2) == 0) == a;
                same &= in_span(m, v) == a;
            }
        }
        let even = atq[0] % 2 == 0 && atq[1] % 2 == 0 && at[0] * q[0] + at[1] * q[1] == atq[0];
        parts.push(check(
            row_ok && cover && parity && even && same,
            format!(
                "index {}: row={row_ok} cover={cover} parity={parity} even={even} AZ²=AᵀZ²={same}",
                c.index()
            ),
        ));
    }
    Outcome::new(parts)
}

fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    for c in CanonicalForm::all() {
        let h = FilterCoeffs::haar(&c, 1).unwrap();
        let r = lawton::residuals(&h, &c).max_abs;
        let ld = special_vectors(&c);
        let m = rows(&c.matrix());
        let off_lattice = !in_span([m[0], m[2], m[1], m[3]], ld.ell);
        let back = lawton::solve_from(&c, &h, &SolverOptions::default());
        let nonzero = |f: &FilterCoeffs| {
            f.iter()
                .filter(|(_, v)| *v != Complex64::default())
                .collect::<Vec<_>>()
        };
        let unchanged = back.map(|b| nonzero(&b) == nonzero(&h)).unwrap_or(false);
        parts.push(check(
            off_lattice && r <= 1e-14 && unchanged,
            format!(
                "index {}: residual {r:.1e}, fixed point {unchanged}",
                c.index()
            ),
        ));
    }
    Outcome::new(parts)
}

fn criterion_4() -> Outcome {
    let mut filters: Vec<(String, CanonicalForm, FilterCoeffs)> = CanonicalForm::all()
        .map(|c| {
            (
                format!("haar{}", c.index()),
                c,
                FilterCoeffs::haar(&c, 1).unwrap(),
            )
        })
        .collect();
    for (index, seed) in [(5u8, 42u64), (6, 42)] {
        let c = CanonicalForm::from_index(index).unwrap();
        let opts = SolverOptions {
            seed,
            random_starts: 64,
            haar_start: false,
            ..Default::default()
        };
        match lawton::solve(&c, 2, &opts) {
            Ok(h) => filters.push((format!("solved{index}"), c, h)),
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: format!("solver on index {index}: {e}"),
                }
            }
        }
    }
    let mut parts = Vec::new();
    for (name, c, h) in filters {
        let (validated, _) = lawton::validate(&h, &c, 1e-12);
        let ev = FilterEvaluator::for_form(h, &c);
        let qmf = ev.qmf_residual(256);
        let mx = ev.max_abs(256);
        let m0 = (ev.eval([0.0, 0.0]) - 1.0).norm();
        parts.push(check(
            validated && qmf <= 1e-10 && mx <= 1.0 + 1e-10 && m0 <= 1e-12,
            format!("{name}: qmf {qmf:.1e}, max|m0| {mx:.12}, |m0(0)-1| {m0:.1e}"),
        ));
    }
    Outcome::new(parts)
}

fn criterion_5() -> Outcome {
    let c = CanonicalForm::from_index(1).unwrap();
    let h = FilterCoeffs::haar(&c, 1).unwrap();
    let ev = FilterEvaluator::for_form(h, &c);
    let p20 = haar_params(512);
    let g0 = (ghat_truncated(&ev, &c, [0.0, 0.0], 20) - 1.0 / (2.0 * PI)).norm();
    let a = synthesize_phi(&ev, &c, &p20).unwrap();
    let b = synthesize_phi(&ev, &c, &SynthesisParams { j: 24, ..p20 }).unwrap();
    let integral = (a.phi.integral() - 1.0).norm();
    let stab = a.phi.max_diff(&b.phi).unwrap();
    // tail mass outside radius B, recomputed here from the samples
    let radius = support_radius(1, &c);
    let (mut outside, mut total) = (0.0, 0.0);
    for (p, v) in a.phi.points() {
        total += v.norm_sqr();
        if (p[0] * p[0] + p[1] * p[1]).sqrt() > radius {
            outside += v.norm_sqr();
        }
    }
    let tail = outside / total;
    Outcome::new(vec![
        check(g0 <= 1e-14, format!("|ĝ(0)-1/2π| {g0:.1e}")),
        check(integral <= 1e-2, format!("|∫φ-1| {integral:.1e}")),
        check(
            stab <= 1e-6,
            format!("J 20->24 max change {stab:.2e} (limit 1e-6)"),
        ),
        check(
            tail <= 1e-3,
            format!("tail outside B={radius:.2} {tail:.1e}"),
        ),
    ])
}

/// Independent bilinear lookup, zero outside the grid.
fn lookup(f: &[f64], n: usize, origin: f64, step: f64, x: f64, y: f64) -> f64 {
    let u = (x - origin) / step;
    let v = (y - origin) / step;
    if u < 0.0 || v < 0.0 || u > (n - 1) as f64 || v > (n - 1) as f64 {
        return 0.0;
    }
    let (i, j) = (
        (u.floor() as usize).min(n - 2),
        (v.floor() as usize).min(n - 2),
    );
    let (s, t) = (u - i as f64, v - j as f64);
    let at = |i: usize, j: usize| f[j * n + i];
    (1.0 - s) * (1.0 - t) * at(i, j)
        + s * (1.0 - t) * at(i + 1, j)
        + (1.0 - s) * t * at(i, j + 1)
        + s * t * at(i + 1, j + 1)
}

/// Cascade iteration φ_{k+1}(t) = √2 Σ h_n φ_k(At − n) from the indicator of
/// [−½, ½)², on the grid of `like`.
fn cascade(
    like: &SampledField,
    taps: &[([i64; 2], f64)],
    a: [i64; 4],
    iterations: usize,
) -> Vec<f64> {
    let n = like.nx;
    let (o, h) = (like.origin[0], like.step);
    let mut cur: Vec<f64> = (0..n * n)
        .map(|k| {
            let (x, y) = (o + (k % n) as f64 * h, o + (k / n) as f64 * h);
            if (-0.5..0.5).contains(&x) && (-0.5..0.5).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for _ in 0..iterations {
        cur = (0..n * n)
            .map(|k| {
                let (x, y) = (o + (k % n) as f64 * h, o + (k / n) as f64 * h);
                let (ax, ay) = (
                    a[0] as f64 * x + a[1] as f64 * y,
                    a[2] as f64 * x + a[3] as f64 * y,
                );
                taps.iter()
                    .map(|(t, w)| {
                        SQRT_2 * w * lookup(&cur, n, o, h, ax - t[0] as f64, ay - t[1] as f64)
                    })
                    .sum()
            })
            .collect();
    }
    cur
}

fn criterion_6() -> Outcome {
    let c = CanonicalForm::from_index(1).unwrap();
    let h = FilterCoeffs::haar(&c, 1).unwrap();
    let ev = FilterEvaluator::for_form(h.clone(), &c);
    let coarse = synthesize_phi(&ev, &c, &haar_params(256)).unwrap();
    let fine = synthesize_phi(&ev, &c, &haar_params(512)).unwrap();
    let r256 = refinement_residual(&coarse.phi, &h, &c);
    let r512 = refinement_residual(&fine.phi, &h, &c);
    let ratio = r256.max_abs / r512.max_abs;
    let taps: Vec<([i64; 2], f64)> = h
        .iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(n, v)| (n, v.re))
        .collect();
    let casc = cascade(&fine.phi, &taps, rows(&c.matrix()), 12);
    let gap = casc
        .iter()
        .zip(&fine.phi.values)
        .map(|(x, y)| (x - y.re).abs())
        .fold(0.0, f64::max);
    let l2 = (casc
        .iter()
        .zip(&fine.phi.values)
        .map(|(x, y)| (x - y.re).powi(2))
        .sum::<f64>())
    .sqrt()
        * fine.phi.step;
    Outcome::new(vec![
        check(
            r512.max_abs <= 5e-2,
            format!(
                "refinement max {:.3e} at 512 (rms {:.1e})",
                r512.max_abs, r512.rms
            ),
        ),
        check(
            ratio >= 2.0,
            format!("256->512 ratio {ratio:.2} (256: {:.3e})", r256.max_abs),
        ),
        check(
            gap <= 5e-2,
            format!("cascade max gap {gap:.3e} (L2 gap {l2:.2e})"),
        ),
    ])
}

fn criterion_7() -> Outcome {
    let sys = haar_system();
    let suite = standard_suite(512).unwrap();
    let mut parts = Vec::new();
    for f in &suite {
        let r6 = frame_ratio(f, &sys.psi, &sys.a0, (-6, 6)).unwrap();
        let r4 = frame_ratio(f, &sys.psi, &sys.a0, (-4, 4)).unwrap();
        let r2 = frame_ratio(f, &sys.psi, &sys.a0, (-2, 2)).unwrap();
        let r3f = frame_ratio(&f.scaled(3.0), &sys.psi, &sys.a0, (-6, 6)).unwrap();
        let in_band = (0.95..=1.0 + 1e-3).contains(&r6);
        let monotone = r2 <= r4 + 1e-9 && r4 <= r6 + 1e-9;
        let scale = (r3f - r6).abs();
        parts.push(check(
            in_band && monotone && scale <= 1e-9,
            format!(
                "{:?}: ratio {r6:.4} ([-4,4] {r4:.4}, [-2,2] {r2:.4}), 3f gap {scale:.1e}",
                f.kind
            ),
        ));
    }
    Outcome::new(parts)
}

fn criterion_8() -> Outcome {
    let sys = haar_system();
    let f = &standard_suite(512).unwrap()[0];
    let cm = sys.canonical.matrix();
    let norm = f.norm_sq();
    let mut parts = Vec::new();
    for j in [-1, 0, 1] {
        let r = telescoping_residual(f, &sys.phi, &sys.psi_c, &cm, j).unwrap();
        let scalar = (l_j(f, &sys.phi, &cm, j + 1)
            - l_j(f, &sys.phi, &cm, j)
            - level_energy(f, &sys.psi_c, &cm, j))
        .abs()
            / norm;
        parts.push(check(
            r <= 5e-2 && scalar <= 5e-2,
            format!("J={j}: field {r:.3e}, scalar {scalar:.2e}"),
        ));
    }
    Outcome::new(parts)
}

fn criterion_9() -> Outcome {
    let sys = haar_system();
    let f = &standard_suite(512).unwrap()[0];
    let cm = sys.canonical.matrix();
    let norm = f.norm_sq();
    let ls: Vec<(i32, f64)> = (-8..=6).map(|j| (j, l_j(f, &sys.phi, &cm, j))).collect();
    let low = ls[0].1 / norm;
    let high = ls[ls.len() - 1].1 / norm;
    let b = integer_half_width(&sys.meta.phi_box);
    let bound = (2.0 * b + 1.0).powi(2) * sys.phi.norm_sq() * norm * (1.0 + 1e-2);
    let worst = ls.iter().map(|(_, l)| l / bound).fold(0.0, f64::max);
    Outcome::new(vec![
        check(low <= 0.01, format!("L_-8/‖f‖² {low:.2e}")),
        check(high >= 0.95, format!("L_6/‖f‖² {high:.4}")),
        check(worst <= 1.0, format!("max L_J / bound {worst:.2e} (B={b})")),
    ])
}

fn criterion_10() -> Outcome {
    let mut parts = Vec::new();
    for index in [1u8, 5] {
        let c = CanonicalForm::from_index(index).unwrap();
        let q = special_vectors(&c).q;
        let h = FilterCoeffs::haar(&c, 1).unwrap();
        for (name, poly) in [
            ("1", TrigPoly::constant(1.0)),
            ("cos x1", TrigPoly::cos_x1()),
            ("|m0|²", TrigPoly::m0_squared(&h)),
        ] {
            // Closed form: each side equals 8π²·c₀ for a trigonometric polynomial.
            let c0 = poly
                .terms
                .iter()
                .find(|(n, _)| *n == [0, 0])
                .map_or(Complex64::default(), |t| t.1);
            let exact = 8.0 * PI * PI * c0;
            let r = click_residual(&c, q, &poly, 512).unwrap();
            parts.push(check(
                r <= 1e-6,
                format!(
                    "index {index} h={name}: {r:.1e} (both sides {:.4})",
                    exact.re
                ),
            ));
        }
    }
    Outcome::new(parts)
}

fn criterion_11() -> Outcome {
    let a0 = IntMat2::new(0, 2, 1, 0);
    let sys = build_system(&a0, 1, &haar_opts(haar_params(512))).unwrap();
    let again = pull_back(&sys.psi_c, &sys.s).unwrap();
    let same = sys.psi.max_diff(&again).unwrap();
    // direct resampling ψ(t) = ψ_c(S t) at the stored grid points
    let direct = sys
        .psi
        .points()
        .map(|(p, v)| (v - sys.psi_c.interp(sys.s.apply_f64(p))).norm())
        .fold(0.0, f64::max);
    let (n_c, n) = (sys.psi_c.norm_sq(), sys.psi.norm_sq());
    let rel = (n - n_c).abs() / n_c;
    Outcome::new(vec![
        check(
            same <= 1e-12 && direct <= 1e-12,
            format!("S={}, pull-back gap {same:.1e}, direct {direct:.1e}", sys.s),
        ),
        check(rel <= 1e-2, format!("‖ψ‖² {n:.6} vs ‖ψ_c‖² {n_c:.6}")),
    ])
}

fn main() {
    let criteria: [(u8, &str, fn() -> Outcome, Duration); 11] = [
        (
            1,
            "canonical reduction",
            criterion_1,
            Duration::from_secs(1),
        ),
        (2, "special vectors", criterion_2, Duration::from_secs(1)),
        (
            3,
            "Haar filter equations",
            criterion_3,
            Duration::from_secs(1),
        ),
        (4, "low-pass symbol", criterion_4, Duration::from_secs(5)),
        (5, "scaling function", criterion_5, Duration::from_secs(60)),
        (6, "refinement equation", criterion_6, Duration::MAX),
        (7, "frame ratio", criterion_7, Duration::from_secs(300)),
        (8, "telescoping", criterion_8, Duration::MAX),
        (9, "one-sided limits", criterion_9, Duration::MAX),
        (10, "integral split", criterion_10, Duration::MAX),
        (11, "pull-back", criterion_11, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (n, name, run, budget) in criteria {
        let t = Instant::now();
        let out = run();
        let el = t.elapsed();
        let timely = el <= budget;
        let pass = out.pass && timely;
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", budget.as_secs())
        };
        println!(
            "criterion {n:>2} {} {name}: {} [{:.2}s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            el.as_secs_f64()
        );
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
    } else {
        println!(
            "acceptance: {} of 11 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
