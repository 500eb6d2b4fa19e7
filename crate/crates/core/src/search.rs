//! Witness search in explicit dense sets: rectangular pairs via the slab
//! pigeonhole, square pairs and oriented lines by probing.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{classify_shape, parse_grid, product_vector, square_vector, GridVector, IndexSet, Shape, ShapeKind};
use crate::pointset::{PointSet, SetSource};

/// Largest side searched exhaustively under [`SearchMode::Auto`].
pub const EXHAUSTIVE_MAX_SIDE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    RectPair,
    SquarePair,
    Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    Pigeonhole,
    Exhaustive,
    Sampled,
}

/// Provenance block of a certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchInfo {
    pub mode: ProbeMode,
    pub seed: Option<u64>,
    /// Recipe for the searched set, when known.
    pub set: Option<SetSource>,
}

/// A claimed pair `(a, b)` of set members together with the recorded shape
/// of `a ⊕ b`. Nothing here is trusted until [`verify_certificate`] says so.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub a: GridVector,
    pub b: GridVector,
    pub shape_kind: ShapeKind,
    pub gamma1: IndexSet,
    pub gamma2: IndexSet,
    /// `a` is 0 and `b` is 1 on every wildcard cell.
    pub oriented: bool,
    pub search: SearchInfo,
}

impl Certificate {
    /// Records the true shape and orientation of `(a, b)`.
    pub fn new(kind: CertificateKind, a: GridVector, b: GridVector, search: SearchInfo) -> Self {
        let diff = &a ^ &b;
        let shape = classify_shape(&diff);
        let n = a.n();
        let empty = IndexSet::empty(n).expect("valid side");
        let oriented = a.is_disjoint_from(&diff) && !diff.is_zero();
        Certificate {
            kind,
            shape_kind: shape.kind(),
            gamma1: shape.gamma1().unwrap_or(empty),
            gamma2: shape.gamma2().unwrap_or(empty),
            a,
            b,
            oriented,
            search,
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::from_parts(self.shape_kind, self.gamma1, self.gamma2)
    }

    pub fn to_json(&self) -> String {
        let doc = CertificateDoc {
            kind: self.kind,
            n: self.n(),
            a: self.a.to_string(),
            b: self.b.to_string(),
            shape: self.shape_kind.as_str().to_string(),
            gamma1: self.gamma1.to_vec(),
            gamma2: self.gamma2.to_vec(),
            oriented: self.oriented,
            search: self.search.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("certificate serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::from_str(&self.to_json()).expect("round trip")
    }

    /// Parses a certificate. Structural problems (bad grid text, side
    /// mismatch, indices out of range) are errors; wrong claims are not.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CertificateDoc = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        Certificate::from_doc(doc)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let doc: CertificateDoc =
            serde_json::from_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Certificate::from_doc(doc)
    }

    fn from_doc(doc: CertificateDoc) -> Result<Self> {
        let a = parse_grid(&doc.a)?;
        let b = parse_grid(&doc.b)?;
        for v in [&a, &b] {
            if v.n() != doc.n {
                return Err(Error::DimensionMismatch {
                    expected: doc.n,
                    found: v.n(),
                });
            }
        }
        Ok(Certificate {
            kind: doc.kind,
            shape_kind: doc.shape.parse()?,
            gamma1: IndexSet::from_members(doc.n, doc.gamma1)?,
            gamma2: IndexSet::from_members(doc.n, doc.gamma2)?,
            a,
            b,
            oriented: doc.oriented,
            search: doc.search,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CertificateDoc {
    kind: CertificateKind,
    n: usize,
    a: String,
    b: String,
    shape: String,
    gamma1: Vec<usize>,
    gamma2: Vec<usize>,
    oriented: bool,
    search: SearchInfo,
}

/// Recomputes membership, shape and orientation; true iff every recorded
/// field matches and the shape is admissible for the certificate kind.
pub fn verify_certificate(cert: &Certificate, set: &PointSet) -> bool {
    if cert.a.n() != cert.b.n() || cert.a.n() != set.n() {
        return false;
    }
    if !set.contains(&cert.a) || !set.contains(&cert.b) {
        return false;
    }
    let diff = &cert.a ^ &cert.b;
    let actual = classify_shape(&diff);
    let Ok(recorded) = cert.shape() else {
        return false;
    };
    if actual != recorded {
        return false;
    }
    let oriented = !diff.is_zero() && cert.a.is_disjoint_from(&diff);
    if oriented != cert.oriented {
        return false;
    }
    match cert.kind {
        CertificateKind::RectPair => matches!(actual, Shape::Rect(..) | Shape::Square(_)),
        CertificateKind::SquarePair => matches!(actual, Shape::Square(_)),
        CertificateKind::Line => matches!(actual, Shape::Square(_)) && oriented,
    }
}

/// Finds two members whose difference is `γ₁ × γ₂` for some nonempty `γ₂`.
///
/// For each slab `g_i = γ₁ × {i}` (ascending `i`) and each member `s`
/// (canonical order), `b = g_i ⊕ s` is probed. A hit `b ∈ S` gives the
/// difference `γ₁ × {i}`. Misses are recorded as `b → (i, s)`; a later
/// `(j, t)` landing on the same `b` gives `s ⊕ t = γ₁ × {i, j}`. When
/// `n ≥ ⌈1/δ⌉` the `n·|S|` probes cannot all land on distinct non-members,
/// so `None` is only possible below that threshold.
pub fn find_rect_pair(set: &PointSet, gamma1: &IndexSet) -> Result<Option<Certificate>> {
    if gamma1.is_empty() {
        return Err(Error::InvalidArgument("gamma1 must be nonempty".into()));
    }
    let n = set.n();
    if gamma1.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: gamma1.n(),
        });
    }
    let info = SearchInfo {
        mode: ProbeMode::Pigeonhole,
        seed: None,
        set: None,
    };
    let members = set.members();
    let mut seen: HashMap<GridVector, (usize, usize)> = HashMap::new();
    for i in 1..=n {
        let slab = product_vector(gamma1, &IndexSet::singleton(n, i)?)?;
        for (si, s) in members.iter().enumerate() {
            let b = s ^ &slab;
            if set.contains(&b) {
                return Ok(Some(pair(CertificateKind::RectPair, s.clone(), b, info)));
            }
            match seen.get(&b) {
                Some(&(_, ti)) => {
                    let t = members[ti].clone();
                    return Ok(Some(pair(CertificateKind::RectPair, s.clone(), t, info)));
                }
                None => {
                    seen.insert(b, (i, si));
                }
            }
        }
    }
    Ok(None)
}

/// Orders the pair so that `a < b`; if either member is 0 on the whole
/// difference, it is the smaller one.
fn pair(kind: CertificateKind, x: GridVector, y: GridVector, info: SearchInfo) -> Certificate {
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    Certificate::new(kind, a, b, info)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Exhaustive for `n ≤ 5`, sampled otherwise.
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    pub limit: usize,
    pub mode: SearchMode,
    pub seed: u64,
    /// Number of random probes in sampled mode.
    pub budget: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            limit: usize::MAX,
            mode: SearchMode::Auto,
            seed: 0,
            budget: 1 << 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub certificates: Vec<Certificate>,
    /// True when the list is known to hold every witness.
    pub complete: bool,
    pub probes: u64,
}

/// Pairs `{s, s ⊕ γ×γ}` inside the set, in order of `γ` mask then `a`.
pub fn find_square_pairs(set: &PointSet, opts: &SearchOptions) -> SearchOutcome {
    square_search(set, opts, false)
}

/// Oriented square pairs: `a` is 0 on `γ×γ` and `b = a + γ×γ`.
pub fn find_line(set: &PointSet, opts: &SearchOptions) -> SearchOutcome {
    square_search(set, opts, true)
}

fn square_search(set: &PointSet, opts: &SearchOptions, lines_only: bool) -> SearchOutcome {
    let n = set.n();
    let exhaustive = match opts.mode {
        SearchMode::Auto => n <= EXHAUSTIVE_MAX_SIDE,
        SearchMode::Exhaustive => true,
        SearchMode::Sampled => false,
    };
    let kind = if lines_only {
        CertificateKind::Line
    } else {
        CertificateKind::SquarePair
    };
    if set.is_empty() || opts.limit == 0 {
        return SearchOutcome {
            certificates: Vec::new(),
            complete: exhaustive && set.is_empty(),
            probes: 0,
        };
    }
    if exhaustive {
        let info = SearchInfo {
            mode: ProbeMode::Exhaustive,
            seed: None,
            set: None,
        };
        let gammas: Vec<IndexSet> = IndexSet::nonempty_subsets(n).collect();
        let per_gamma: Vec<(Vec<Certificate>, bool)> = gammas
            .par_iter()
            .map(|g| {
                let sq = square_vector(g);
                let mut found = Vec::new();
                for s in set.members() {
                    if lines_only && !s.is_disjoint_from(&sq) {
                        continue;
                    }
                    let b = s ^ &sq;
                    if (lines_only || *s < b) && set.contains(&b) {
                        if found.len() == opts.limit {
                            return (found, true);
                        }
                        found.push(Certificate::new(kind, s.clone(), b, info.clone()));
                    }
                }
                (found, false)
            })
            .collect();
        let mut certificates = Vec::new();
        let mut complete = true;
        for (found, cut) in per_gamma {
            complete &= !cut;
            for c in found {
                if certificates.len() == opts.limit {
                    complete = false;
                    break;
                }
                certificates.push(c);
            }
        }
        let probes = set.len() as u64 * gammas.len() as u64;
        SearchOutcome {
            certificates,
            complete,
            probes,
        }
    } else {
        let info = SearchInfo {
            mode: ProbeMode::Sampled,
            seed: Some(opts.seed),
            set: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut hits: BTreeSet<(u64, GridVector)> = BTreeSet::new();
        let mut probes = 0;
        while probes < opts.budget && hits.len() < opts.limit {
            probes += 1;
            let s = &set.members()[rng.gen_range(0..set.len())];
            let mask = rng.gen_range(1..1u64 << n);
            let g = IndexSet::from_mask(n, mask).expect("mask in range");
            let sq = square_vector(&g);
            let b = s ^ &sq;
            if !set.contains(&b) {
                continue;
            }
            let a = if lines_only {
                if !s.is_disjoint_from(&sq) {
                    continue;
                }
                s.clone()
            } else {
                s.clone().min(b)
            };
            hits.insert((mask, a));
        }
        let certificates = hits
            .into_iter()
            .map(|(mask, a)| {
                let sq = square_vector(&IndexSet::from_mask(n, mask).unwrap());
                let b = &a ^ &sq;
                Certificate::new(kind, a, b, info.clone())
            })
            .collect();
        SearchOutcome {
            certificates,
            complete: false,
            probes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridVector;
    use crate::pointset::SetSource;
    use crate::subspace::spiral_basis;

    fn set(n: usize, m: &[usize]) -> IndexSet {
        IndexSet::from_members(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn full_universe_hits_first_probe() {
        let s = SetSource::Full { n: 3 }.build().unwrap();
        let g = set(3, &[2, 3]);
        let c = find_rect_pair(&s, &g).unwrap().unwrap();
        assert!(c.a.is_zero());
        assert_eq!(c.shape().unwrap(), Shape::Rect(g, set(3, &[1])));
        assert!(verify_certificate(&c, &s));
    }

    #[test]
    fn empty_gamma_rejected() {
        let s = SetSource::Full { n: 2 }.build().unwrap();
        assert!(find_rect_pair(&s, &IndexSet::empty(2).unwrap()).is_err());
    }

    #[test]
    fn spiral_rect_pair_shape() {
        let s = SetSource::Spiral { n: 4 }.build().unwrap();
        let h = spiral_basis(4).unwrap();
        let c = find_rect_pair(&s, &set(4, &[1])).unwrap().unwrap();
        assert!(verify_certificate(&c, &s));
        let diff = &c.a ^ &c.b;
        assert!(h.contains(&diff).unwrap() && h.contains_by_row_reduce(&diff));
        // Row 1 only: no diagonal cell, so column 1 is excluded and the
        // upper part {2,3,4} ∩ γ₂ has even size.
        assert_eq!(c.gamma1, set(4, &[1]));
        assert!(!c.gamma2.contains(1));
        assert_eq!(c.gamma2.len() % 2, 0);
    }

    #[test]
    fn below_threshold_may_miss() {
        // S = {0}: n·|S| probes land on n distinct non-members.
        let s = PointSet::new(3, [GridVector::zero(3).unwrap()]).unwrap();
        assert_eq!(find_rect_pair(&s, &set(3, &[1])).unwrap(), None);
    }

    #[test]
    fn collision_branch() {
        // Two members differing by γ₁ × {1, 2}, and nothing else reachable by one slab.
        let a = GridVector::from_cells(3, [(3, 3)]).unwrap();
        let b = GridVector::from_cells(3, [(3, 3), (1, 1), (1, 2)]).unwrap();
        let s = PointSet::new(3, [a, b]).unwrap();
        let c = find_rect_pair(&s, &set(3, &[1])).unwrap().unwrap();
        assert_eq!(c.shape().unwrap(), Shape::Rect(set(3, &[1]), set(3, &[1, 2])));
        assert!(verify_certificate(&c, &s));
    }

    #[test]
    fn square_pairs_in_spiral_span() {
        let s = SetSource::Spiral { n: 4 }.build().unwrap();
        let out = find_square_pairs(&s, &SearchOptions::default());
        assert!(out.complete);
        assert_eq!(out.certificates.len(), 16384 / 2);
        assert!(out.certificates.iter().all(|c| c.gamma1 == set(4, &[1, 2, 3, 4])));
        assert!(out.certificates[0].a.is_zero());
        assert!(out.certificates[0].oriented);
    }

    #[test]
    fn square_pairs_in_even_weight_n3() {
        let s = SetSource::EvenWeight { n: 3 }.build().unwrap();
        let out = find_square_pairs(&s, &SearchOptions::default());
        assert!(!out.certificates.is_empty());
        assert!(out.certificates.iter().all(|c| c.gamma1.len() == 2));
        // Three 2-subsets, 128 unordered pairs each.
        assert_eq!(out.certificates.len(), 3 * 128);
    }

    #[test]
    fn singleton_and_empty_sets() {
        let one = PointSet::new(3, [GridVector::zero(3).unwrap()]).unwrap();
        assert!(find_square_pairs(&one, &SearchOptions::default()).certificates.is_empty());
        let none = PointSet::new(3, []).unwrap();
        let out = find_line(&none, &SearchOptions::default());
        assert!(out.certificates.is_empty() && out.complete);
    }

    #[test]
    fn orientation_required_for_lines() {
        let v = GridVector::from_cells(3, [(1, 1), (3, 3)]).unwrap();
        let w = &v ^ &square_vector(&set(3, &[1, 2]));
        // v carries (1,1) inside the square, w carries the other three cells.
        let s = PointSet::new(3, [v, w]).unwrap();
        let pairs = find_square_pairs(&s, &SearchOptions::default());
        assert_eq!(pairs.certificates.len(), 1);
        assert!(!pairs.certificates[0].oriented);
        assert!(find_line(&s, &SearchOptions::default()).certificates.is_empty());
    }

    #[test]
    fn limit_truncates() {
        let s = SetSource::EvenWeight { n: 3 }.build().unwrap();
        let opts = SearchOptions { limit: 5, ..Default::default() };
        let out = find_square_pairs(&s, &opts);
        assert_eq!(out.certificates.len(), 5);
        assert!(!out.complete);
    }

    #[test]
    fn sampled_mode_is_seeded() {
        let s = SetSource::Spiral { n: 4 }.build().unwrap();
        let opts = SearchOptions {
            mode: SearchMode::Sampled,
            seed: 11,
            budget: 2000,
            limit: 20,
        };
        let a = find_line(&s, &opts);
        let b = find_line(&s, &opts);
        assert_eq!(a, b);
        assert!(!a.complete);
        assert!(a.certificates.iter().all(|c| verify_certificate(c, &s)));
    }

    #[test]
    fn tampering_is_detected() {
        let s = SetSource::Spiral { n: 4 }.build().unwrap();
        let c = find_rect_pair(&s, &set(4, &[1, 2])).unwrap().unwrap();
        assert!(verify_certificate(&c, &s));

        let mut flipped = c.clone();
        flipped.b.flip(4, 1);
        assert!(!verify_certificate(&flipped, &s));

        let mut relabeled = c.clone();
        relabeled.shape_kind = ShapeKind::Square;
        assert!(!verify_certificate(&relabeled, &s));

        let mut disoriented = c.clone();
        disoriented.oriented = !c.oriented;
        assert!(!verify_certificate(&disoriented, &s));
    }

    #[test]
    fn json_round_trip() {
        let s = SetSource::Spiral { n: 4 }.build().unwrap();
        let mut c = find_line(&s, &SearchOptions::default()).certificates.remove(0);
        c.search.set = Some(SetSource::Spiral { n: 4 });
        let text = c.to_json();
        let back = Certificate::from_json(&text).unwrap();
        assert_eq!(back, c);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "line");
        assert_eq!(v["gamma1"], serde_json::json!([1, 2, 3, 4]));
        assert_eq!(v["search"]["mode"], "exhaustive");
        assert_eq!(v["a"], "0000\n0000\n0000\n0000\n");
    }
}
