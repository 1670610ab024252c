//! Integer 2×2 matrix algebra for dilation lattices.
//!
//! Everything here is exact integer arithmetic. A dilation matrix has
//! `|det| = 2` and both eigenvalues outside the closed unit disk; every such
//! matrix is unimodularly conjugate to exactly one of six canonical forms,
//! for which `AZ² = AᵀZ²` and the coset vectors `ℓ_A`, `q_A` are tabulated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Integer 2-vector.
pub type IVec2 = [i64; 2];

/// Largest conjugator entry magnitude tried by [`reduce_to_canonical`].
pub const DEFAULT_SEARCH_BOUND: i64 = 8;

/// A 2×2 integer matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntMat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMat2 {
    pub const IDENTITY: IntMat2 = IntMat2::new(1, 0, 0, 1);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn from_rows(rows: [[i64; 2]; 2]) -> Self {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub const fn rows(&self) -> [[i64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub const fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub const fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub const fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    /// `adj(M)`, so that `M · adj(M) = det(M) · I`.
    pub const fn adjugate(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub const fn mul(&self, o: &IntMat2) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub const fn apply(&self, v: IVec2) -> IVec2 {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn apply_f64(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a as f64 * v[0] + self.b as f64 * v[1],
            self.c as f64 * v[0] + self.d as f64 * v[1],
        ]
    }

    /// `M⁻¹ v` through the adjugate; exact up to one rounding per component
    /// because `det` is a small integer.
    pub fn solve_f64(&self, v: [f64; 2]) -> [f64; 2] {
        let w = self.adjugate().apply_f64(v);
        let det = self.det() as f64;
        [w[0] / det, w[1] / det]
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::IDENTITY, |acc, _| acc.mul(self))
    }

    pub const fn is_unimodular(&self) -> bool {
        self.det() == 1 || self.det() == -1
    }

    /// Exact inverse of a unimodular matrix.
    pub fn unimodular_inverse(&self) -> Option<Self> {
        match self.det() {
            1 => Some(self.adjugate()),
            -1 => {
                let adj = self.adjugate();
                Some(Self::new(-adj.a, -adj.b, -adj.c, -adj.d))
            }
            _ => None,
        }
    }

    fn max_abs_entry(&self) -> i64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }

    pub fn to_f64_rows(&self) -> [[f64; 2]; 2] {
        [
            [self.a as f64, self.b as f64],
            [self.c as f64, self.d as f64],
        ]
    }
}

impl fmt::Display for IntMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// Parses the CLI form `"a,b,c,d"` (row-major).
impl FromStr for IntMat2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("matrix entry in {s:?}: {e}")))?;
        match entries.as_slice() {
            &[a, b, c, d] => Ok(Self::new(a, b, c, d)),
            _ => Err(Error::Parse(format!(
                "expected four comma-separated integers, got {s:?}"
            ))),
        }
    }
}

impl Serialize for IntMat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <[[i64; 2]; 2]>::deserialize(d).map(Self::from_rows)
    }
}

/// True iff both roots of `λ² − tr·λ + det` have modulus greater than one.
///
/// Complex-conjugate roots have `|λ|² = det`. For real roots the polynomial
/// is tested for a root in `[−1, 1]` using its values at `±1` and the
/// position of the vertex, all in integers.
pub fn is_expansive(m: &IntMat2) -> bool {
    let t = m.trace();
    let det = m.det();
    let disc = t * t - 4 * det;
    if disc < 0 {
        return det > 1;
    }
    let p_plus = 1 - t + det;
    let p_minus = 1 + t + det;
    let root_inside =
        p_plus * p_minus <= 0 || (p_plus >= 0 && p_minus >= 0 && (-2..=2).contains(&t));
    !root_inside
}

/// True iff `v ∈ M·Z²`, decided by `adj(M)·v ≡ 0 (mod det M)`.
pub fn in_lattice(m: &IntMat2, v: IVec2) -> bool {
    let det = m.det();
    if det == 0 {
        return v == [0, 0];
    }
    let w = m.adjugate().apply(v);
    w[0] % det == 0 && w[1] % det == 0
}

/// One of the six canonical dilation matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    index: u8,
    matrix: IntMat2,
}

const CANONICAL_MATRICES: [IntMat2; 6] = [
    IntMat2::new(1, 1, 1, -1),
    IntMat2::new(1, -3, 1, -1),
    IntMat2::new(1, 1, -1, 1),
    IntMat2::new(-1, -1, 1, -1),
    IntMat2::new(-1, 2, -2, 2),
    IntMat2::new(1, -2, 2, -2),
];

impl CanonicalForm {
    /// `index` runs from 1 to 6.
    pub fn from_index(index: u8) -> Option<Self> {
        let matrix = *CANONICAL_MATRICES.get(usize::from(index).checked_sub(1)?)?;
        Some(Self { index, matrix })
    }

    pub fn from_matrix(m: &IntMat2) -> Option<Self> {
        Self::all().find(|c| c.matrix == *m)
    }

    pub fn all() -> impl Iterator<Item = CanonicalForm> {
        (1..=6).filter_map(Self::from_index)
    }

    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn matrix(&self) -> IntMat2 {
        self.matrix
    }
}

impl Serialize for CanonicalForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            index: u8,
            matrix: IntMat2,
        }
        Repr {
            index: self.index,
            matrix: self.matrix,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CanonicalForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            index: u8,
            matrix: IntMat2,
        }
        let r = Repr::deserialize(d)?;
        match Self::from_index(r.index) {
            Some(c) if c.matrix == r.matrix => Ok(c),
            _ => Err(serde::de::Error::custom(format!(
                "index {} does not name canonical matrix {}",
                r.index, r.matrix
            ))),
        }
    }
}

/// Unimodular `s` with `s · A0 · s⁻¹ = canonical.matrix()`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub s: IntMat2,
    pub canonical: CanonicalForm,
}

impl Reduction {
    /// Checks the conjugation identity `s · a0 = C · s` exactly.
    pub fn conjugates(&self, a0: &IntMat2) -> bool {
        self.s.is_unimodular() && self.s.mul(a0) == self.canonical.matrix().mul(&self.s)
    }
}

/// Candidate entries for a given bound in search order `1, 0, −1, 2, −2, …`.
/// Leading with 1 puts the identity first among bound-1 candidates.
fn ordered_entries(bound: i64) -> Vec<i64> {
    let mut v = vec![1, 0, -1];
    for k in 2..=bound {
        v.push(k);
        v.push(-k);
    }
    v
}

pub fn reduce_to_canonical(a0: &IntMat2) -> Result<Reduction> {
    reduce_with_bound(a0, DEFAULT_SEARCH_BOUND)
}

/// Searches unimodular conjugators with entries bounded by `1, 2, …, max_bound`.
///
/// Within a bound, candidates are visited lexicographically over the entry
/// order `1, 0, −1, 2, −2, …`; matrices already covered by a smaller bound are
/// skipped. The first hit wins, so an input that is already canonical yields
/// the identity.
pub fn reduce_with_bound(a0: &IntMat2, max_bound: i64) -> Result<Reduction> {
    let not_reducible = |reason: String| Error::NotReducible {
        matrix: *a0,
        reason,
    };
    if a0.det().abs() != 2 {
        return Err(not_reducible(format!(
            "|det| = {} (must be 2)",
            a0.det().abs()
        )));
    }
    if !is_expansive(a0) {
        return Err(not_reducible("matrix is not expansive".into()));
    }
    // Conjugation preserves trace and determinant; the six forms have
    // pairwise distinct (trace, det), so the target is fixed up front.
    let canonical = CanonicalForm::all()
        .find(|c| c.matrix.trace() == a0.trace() && c.matrix.det() == a0.det())
        .ok_or_else(|| {
            not_reducible("no canonical form shares its trace and determinant".into())
        })?;
    let target = canonical.matrix;

    for bound in 1..=max_bound {
        let entries = ordered_entries(bound);
        for &a in &entries {
            for &b in &entries {
                for &c in &entries {
                    for &d in &entries {
                        let s = IntMat2::new(a, b, c, d);
                        if s.max_abs_entry() < bound || !s.is_unimodular() {
                            continue;
                        }
                        if s.mul(a0) == target.mul(&s) {
                            return Ok(Reduction { s, canonical });
                        }
                    }
                }
            }
        }
    }
    Err(not_reducible(format!(
        "no conjugator with entries bounded by {max_bound}"
    )))
}

/// `ℓ_A`, `q_A`, `Aᵀq_A` and coset representatives for a canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeData {
    pub ell: IVec2,
    pub q: IVec2,
    pub at_q: IVec2,
    /// Representatives of `AᵀZ² / (2Z)²` among `{(0,0),(0,1),(1,0),(1,1)}`.
    pub coset_generators: Vec<IVec2>,
}

pub fn special_vectors(c: &CanonicalForm) -> LatticeData {
    let (ell, q, generator) = if c.index <= 4 {
        ([1, 0], [1, 1], [1, 1])
    } else {
        ([0, 1], [0, 1], [1, 0])
    };
    LatticeData {
        ell,
        q,
        at_q: c.matrix.transpose().apply(q),
        coset_generators: vec![[0, 0], generator],
    }
}

/// Coset indicator: 0 on `C·Z²`, 1 off it.
pub fn sigma(c: &CanonicalForm, n: IVec2) -> u8 {
    u8::from(!in_lattice(&c.matrix, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansive_examples() {
        assert!(is_expansive(&IntMat2::new(1, 1, 1, -1)));
        assert!(!is_expansive(&IntMat2::IDENTITY));
        assert!(is_expansive(&IntMat2::new(0, 2, 1, 0)));
        assert!(!is_expansive(&IntMat2::new(2, 0, 0, 1)));
        assert!(!is_expansive(&IntMat2::new(1, 1, 0, 2)));
        assert!(is_expansive(&IntMat2::new(2, 0, 0, 2)));
        // complex pair with |λ|² = 1
        assert!(!is_expansive(&IntMat2::new(0, -1, 1, 0)));
        for c in CanonicalForm::all() {
            assert!(is_expansive(&c.matrix()), "{}", c.matrix());
        }
    }

    #[test]
    fn expansive_matches_float_eigenvalues() {
        for a in -3..=3 {
            for b in -3..=3 {
                for c in -3..=3 {
                    for d in -3..=3 {
                        let m = IntMat2::new(a, b, c, d);
                        let t = m.trace() as f64;
                        let det = m.det() as f64;
                        let disc = t * t - 4.0 * det;
                        let (r1, r2) = if disc < 0.0 {
                            (det.sqrt(), det.sqrt())
                        } else {
                            ((t + disc.sqrt()).abs() / 2.0, (t - disc.sqrt()).abs() / 2.0)
                        };
                        // skip float-ambiguous boundary cases
                        if (r1 - 1.0).abs() < 1e-9 || (r2 - 1.0).abs() < 1e-9 {
                            assert!(!is_expansive(&m), "{m}");
                            continue;
                        }
                        assert_eq!(is_expansive(&m), r1 > 1.0 && r2 > 1.0, "{m}");
                    }
                }
            }
        }
    }

    #[test]
    fn lattice_membership() {
        let m = IntMat2::new(1, 1, 1, -1);
        assert!(in_lattice(&m, [2, 0]));
        assert!(!in_lattice(&m, [1, 0]));
        assert!(in_lattice(&m, [0, 0]));
        assert!(in_lattice(&IntMat2::new(0, 2, 1, 0), [0, 0]));
    }

    #[test]
    fn sigma_examples() {
        let c = CanonicalForm::from_index(1).unwrap();
        assert_eq!(sigma(&c, [0, 0]), 0);
        assert_eq!(sigma(&c, [1, 0]), 1);
        assert_eq!(sigma(&c, [1, 1]), 0);
    }

    #[test]
    fn canonical_input_reduces_to_identity() {
        for c in CanonicalForm::all() {
            let r = reduce_to_canonical(&c.matrix()).unwrap();
            assert_eq!(r.s, IntMat2::IDENTITY);
            assert_eq!(r.canonical, c);
        }
    }

    #[test]
    fn rejects_non_dilations() {
        assert!(matches!(
            reduce_to_canonical(&IntMat2::new(2, 0, 0, 2)),
            Err(Error::NotReducible { .. })
        ));
        // |det| = 2 but eigenvalues 2 and 1
        assert!(matches!(
            reduce_to_canonical(&IntMat2::new(2, 0, 0, 1)),
            Err(Error::NotReducible { .. })
        ));
    }

    #[test]
    fn parse_and_serialize() {
        let m: IntMat2 = "0, 2,1,-0".parse().unwrap();
        assert_eq!(m, IntMat2::new(0, 2, 1, 0));
        assert!("1,2,3".parse::<IntMat2>().is_err());
        assert!("1,2,x,4".parse::<IntMat2>().is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[0,2],[1,0]]");
        let back: IntMat2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn canonical_form_json_rejects_mismatch() {
        let bad = r#"{"index":2,"matrix":[[1,1],[1,-1]]}"#;
        assert!(serde_json::from_str::<CanonicalForm>(bad).is_err());
        let good = r#"{"index":1,"matrix":[[1,1],[1,-1]]}"#;
        assert_eq!(
            serde_json::from_str::<CanonicalForm>(good).unwrap(),
            CanonicalForm::from_index(1).unwrap()
        );
    }
}
