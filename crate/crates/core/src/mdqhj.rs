//! Machinery for the multidimensional induction: slicing a set of words
//! along a coordinate bipartition, extracting the dense ("good") slices,
//! counting candidate subspaces, and composing square-wildcard
//! combinatorial subspaces.
//!
//! Words live on a coordinate domain `0..len`; when `len = N²` coordinate
//! `(x-1)*N + (y-1)` is grid cell `(x, y)`, matching [`GridVector`].

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigUint;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridVector, IndexSet};
use crate::pointset::PointSet;
use crate::scalar::Scalar;
use crate::search::Certificate;

/// Largest alphabet accepted (letters are written as single decimal digits).
pub const MAX_ALPHABET: u8 = 10;

fn check_alphabet(k: u8) -> Result<()> {
    if !(2..=MAX_ALPHABET).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "alphabet size must lie in 2..={MAX_ALPHABET}, got {k}"
        )));
    }
    Ok(())
}

fn pow(k: u8, e: usize) -> u128 {
    (k as u128).pow(e as u32)
}

fn exact_side(len: usize) -> Option<usize> {
    let s = (len as f64).sqrt().round() as usize;
    (s * s == len).then_some(s)
}

/// A word over `{0, …, k-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KString {
    k: u8,
    letters: Vec<u8>,
}

impl KString {
    pub fn new(k: u8, letters: Vec<u8>) -> Result<Self> {
        check_alphabet(k)?;
        if let Some(&bad) = letters.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("letter {bad} outside alphabet of size {k}")));
        }
        Ok(KString { k, letters })
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn from_grid(v: &GridVector) -> KString {
        let n = v.n();
        let letters = (1..=n)
            .flat_map(|x| (1..=n).map(move |y| (x, y)))
            .map(|(x, y)| u8::from(v.get(x, y)))
            .collect();
        KString { k: 2, letters }
    }

    /// `N` lines of `N` base-`k` digits.
    pub fn parse(text: &str, k: u8) -> Result<KString> {
        check_alphabet(k)?;
        let lines: Vec<&str> = text.lines().collect();
        let n = lines.len();
        if n == 0 {
            return Err(Error::parse(1, 1, "empty input"));
        }
        let mut letters = Vec::with_capacity(n * n);
        for (i, line) in lines.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != n {
                return Err(Error::parse(i + 1, chars.len().min(n) + 1, format!("row has {} cells, expected {n}", chars.len())));
            }
            for (j, c) in chars.into_iter().enumerate() {
                match c.to_digit(10) {
                    Some(d) if (d as u8) < k => letters.push(d as u8),
                    _ => return Err(Error::parse(i + 1, j + 1, format!("{c:?} is not a base-{k} digit"))),
                }
            }
        }
        Ok(KString { k, letters })
    }

    /// Grid text; panics if the length is not a perfect square.
    pub fn format(&self) -> String {
        let n = exact_side(self.letters.len()).expect("square coordinate domain");
        let mut out = String::with_capacity(n * (n + 1));
        for row in self.letters.chunks(n) {
            for &l in row {
                out.push(char::from_digit(l as u32, 10).unwrap());
            }
            out.push('\n');
        }
        out
    }
}

/// A set of words of a common length over a common alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSet {
    k: u8,
    len: usize,
    members: BTreeSet<Vec<u8>>,
}

impl KSet {
    pub fn new<I: IntoIterator<Item = Vec<u8>>>(k: u8, len: usize, words: I) -> Result<Self> {
        check_alphabet(k)?;
        let mut members = BTreeSet::new();
        for w in words {
            if w.len() != len {
                return Err(Error::DimensionMismatch { expected: len, found: w.len() });
            }
            if w.iter().any(|&l| l >= k) {
                return Err(Error::InvalidArgument(format!("word {w:?} leaves the alphabet")));
            }
            members.insert(w);
        }
        Ok(KSet { k, len, members })
    }

    pub fn universe(k: u8, len: usize) -> Result<Self> {
        check_alphabet(k)?;
        let total = pow(k, len);
        if total > 1 << 24 {
            return Err(Error::InvalidArgument(format!("universe of {total} words is too large")));
        }
        KSet::new(k, len, (0..total as u64).map(|i| decode(i, k, len)))
    }

    /// `size` distinct uniformly random words.
    pub fn random<R: Rng>(k: u8, len: usize, size: u64, rng: &mut R) -> Result<Self> {
        check_alphabet(k)?;
        let total = pow(k, len);
        if total > 1 << 24 || size as u128 > total {
            return Err(Error::InvalidArgument(format!("cannot draw {size} of {total} words")));
        }
        let picks = index::sample(rng, total as usize, size as usize);
        KSet::new(k, len, picks.into_iter().map(|i| decode(i as u64, k, len)))
    }

    /// [`KSet::random`] driven by ChaCha8 seeded with `seed`.
    pub fn seeded(k: u8, len: usize, size: u64, seed: u64) -> Result<Self> {
        KSet::random(k, len, size, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Grids of base-`k` digits separated by blank lines.
    pub fn parse(text: &str, k: u8) -> Result<Self> {
        let mut words = Vec::new();
        let mut block = String::new();
        let mut start = 1;
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if !line.trim().is_empty() {
                if block.is_empty() {
                    start = i + 1;
                }
                block.push_str(line);
                block.push('\n');
            }
            if (line.trim().is_empty() || i + 1 == lines.len()) && !block.is_empty() {
                let w = KString::parse(&block, k).map_err(|e| match e {
                    Error::Parse { line, column, message } => Error::parse(line + start - 1, column, message),
                    other => other,
                })?;
                words.push(w.letters);
                block.clear();
            }
        }
        let len = words
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::parse(1, 1, "no words in input"))?;
        KSet::new(k, len, words)
    }

    pub fn from_point_set(set: &PointSet) -> KSet {
        let n = set.n();
        KSet {
            k: 2,
            len: n * n,
            members: set.members().iter().map(|v| KString::from_grid(v).letters).collect(),
        }
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    /// Number of coordinates.
    pub fn word_len(&self) -> usize {
        self.len
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, word: &[u8]) -> bool {
        self.members.contains(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.members.iter()
    }

    pub fn remove(&mut self, word: &[u8]) -> bool {
        self.members.remove(word)
    }

    pub fn density<T: Scalar>(&self) -> T {
        T::from_ratio(self.members.len() as u128, pow(self.k, self.len))
    }
}

/// Base-`k` digits of `i`, least significant coordinate first.
fn decode(mut i: u64, k: u8, len: usize) -> Vec<u8> {
    let mut w = vec![0u8; len];
    for slot in w.iter_mut() {
        *slot = (i % k as u64) as u8;
        i /= k as u64;
    }
    w
}

/// A split of the coordinate domain into `P` (kept inside each slice) and
/// its complement `Q` (the slice label).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub len: usize,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
}

impl Bipartition {
    pub fn new(len: usize, p: &[usize]) -> Result<Self> {
        let mut in_p = vec![false; len];
        for &c in p {
            if c >= len {
                return Err(Error::IndexOutOfRange { index: c, n: len });
            }
            if in_p[c] {
                return Err(Error::InvalidArgument(format!("coordinate {c} listed twice")));
            }
            in_p[c] = true;
        }
        Ok(Bipartition {
            len,
            p: (0..len).filter(|&c| in_p[c]).collect(),
            q: (0..len).filter(|&c| !in_p[c]).collect(),
        })
    }

    /// `P` = the upper-left `m × m` block of an `N × N` grid.
    pub fn block(side: usize, m: usize) -> Result<Self> {
        if m > side {
            return Err(Error::InvalidArgument(format!("block {m} exceeds side {side}")));
        }
        let p: Vec<usize> = (0..m).flat_map(|x| (0..m).map(move |y| x * side + y)).collect();
        Bipartition::new(side * side, &p)
    }

    /// Uniform random `P` with `1 ≤ |P| < len`.
    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidArgument("need at least two coordinates".into()));
        }
        let size = rng.gen_range(1..len);
        let p = index::sample(rng, len, size).into_vec();
        Bipartition::new(len, &p)
    }

    fn restrict(coords: &[usize], word: &[u8]) -> Vec<u8> {
        coords.iter().map(|&c| word[c]).collect()
    }

    pub fn restrict_p(&self, word: &[u8]) -> Vec<u8> {
        Bipartition::restrict(&self.p, word)
    }

    pub fn restrict_q(&self, word: &[u8]) -> Vec<u8> {
        Bipartition::restrict(&self.q, word)
    }

    /// Reassembles a word from its two restrictions.
    pub fn join(&self, zp: &[u8], zq: &[u8]) -> Vec<u8> {
        let mut w = vec![0u8; self.len];
        for (&c, &l) in self.p.iter().zip(zp) {
            w[c] = l;
        }
        for (&c, &l) in self.q.iter().zip(zq) {
            w[c] = l;
        }
        w
    }
}

/// `|E_{z_Q}|` for every `Q`-restriction `z_Q` that occurs in `E`.
#[derive(Clone, Debug)]
pub struct SliceTable {
    pub k: u8,
    pub partition: Bipartition,
    pub counts: BTreeMap<Vec<u8>, u64>,
}

impl SliceTable {
    /// `k^{|P|}`, the size of a full slice.
    pub fn slice_size(&self) -> u128 {
        pow(self.k, self.partition.p.len())
    }

    /// `k^{|Q|}`, the number of possible slice labels.
    pub fn label_count(&self) -> u128 {
        pow(self.k, self.partition.q.len())
    }

    /// Total mass; equals `|E|`.
    pub fn mass(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn density<T: Scalar>(&self, zq: &[u8]) -> T {
        let c = self.counts.get(zq).copied().unwrap_or(0);
        T::from_ratio(c as u128, self.slice_size())
    }

    pub fn rows<T: Scalar>(&self) -> impl Iterator<Item = (&Vec<u8>, T)> + '_ {
        self.counts
            .iter()
            .map(move |(z, &c)| (z, T::from_ratio(c as u128, self.slice_size())))
    }
}

pub(crate) fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (key, c) in b {
        *a.entry(key).or_insert(0) += c;
    }
    a
}

/// Groups `E` by restriction to the complement of `P`.
pub fn slice_decompose(set: &KSet, p: &[usize]) -> Result<SliceTable> {
    let partition = Bipartition::new(set.len, p)?;
    slice_by(set, partition)
}

pub fn slice_by(set: &KSet, partition: Bipartition) -> Result<SliceTable> {
    if partition.len != set.len {
        return Err(Error::DimensionMismatch { expected: set.len, found: partition.len });
    }
    let counts = set
        .members
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<Vec<u8>, u64>, w| {
            *acc.entry(partition.restrict_q(w)).or_insert(0) += 1;
            acc
        })
        .reduce(BTreeMap::new, merge_counts);
    Ok(SliceTable { k: set.k, partition, counts })
}

/// Slice labels whose slice density is at least `eps / 2`.
pub fn good_strings<T: Scalar>(table: &SliceTable, eps: T) -> BTreeSet<Vec<u8>> {
    let threshold = eps / T::two();
    table
        .rows::<T>()
        .filter(|(_, d)| *d >= threshold)
        .map(|(z, _)| z.clone())
        .collect()
}

/// Outcome of checking the averaging lemma on one set: if `|E| ≥ ε·k^{len}`
/// then at least `(ε/2)·k^{|Q|}` labels are good.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaCheck {
    pub premise: bool,
    pub good: u64,
    pub labels: u128,
    pub holds: bool,
}

pub fn check_counting_lemma<T: Scalar>(table: &SliceTable, eps: T) -> LemmaCheck {
    let total = table.slice_size() * table.label_count();
    let premise = T::from_ratio(table.mass() as u128, total) >= eps;
    let good = good_strings(table, eps).len() as u64;
    let labels = table.label_count();
    let enough = T::from_ratio(good as u128, labels) >= eps / T::two();
    LemmaCheck {
        premise,
        good,
        labels,
        holds: !premise || enough,
    }
}

/// `(k + d − 1)^{m²}`: each of the `m²` cells is a fixed letter or belongs
/// to one of `d − 1` wildcard sets, so this bounds the number of
/// `(d−1)`-dimensional subspaces of an `m × m` block.
pub fn subspace_count_bound(m: usize, k: u8, d: usize) -> Result<BigUint> {
    if m == 0 || k < 2 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "need m >= 1, k >= 2, d >= 1 (got m={m}, k={k}, d={d})"
        )));
    }
    Ok(BigUint::from(k as usize + d - 1).pow((m * m) as u32))
}

/// Where a coordinate sits in a combinatorial subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Not part of this subspace's coordinate support.
    Outside,
    Fixed(u8),
    /// Follows wildcard letter `i`.
    Wild(usize),
}

/// A combinatorial subspace `{base ⊕ x₁(α₁×α₁) ⊕ … ⊕ x_d(α_d×α_d)}` over
/// part (or all) of an `N × N` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombSubspaceSpec {
    k: u8,
    side: usize,
    slots: Vec<Slot>,
    alphas: Vec<IndexSet>,
}

impl CombSubspaceSpec {
    /// `base[c] = None` marks coordinates outside the support; letters on
    /// wildcard cells are ignored.
    pub fn new(k: u8, side: usize, base: &[Option<u8>], alphas: Vec<IndexSet>) -> Result<Self> {
        check_alphabet(k)?;
        if base.len() != side * side {
            return Err(Error::DimensionMismatch { expected: side * side, found: base.len() });
        }
        let mut slots: Vec<Slot> = base
            .iter()
            .map(|b| match *b {
                None => Ok(Slot::Outside),
                Some(l) if l < k => Ok(Slot::Fixed(l)),
                Some(l) => Err(Error::InvalidArgument(format!("letter {l} outside alphabet {k}"))),
            })
            .collect::<Result<_>>()?;
        for (i, alpha) in alphas.iter().enumerate() {
            if alpha.n() != side || alpha.is_empty() {
                return Err(Error::InvalidArgument(format!("alpha {i} must be a nonempty subset of [{side}]")));
            }
            for x in alpha.members() {
                for y in alpha.members() {
                    let c = (x - 1) * side + (y - 1);
                    match slots[c] {
                        Slot::Outside => {
                            return Err(Error::InvalidArgument(format!(
                                "wildcard cell ({x},{y}) lies outside the support"
                            )))
                        }
                        Slot::Wild(j) => {
                            return Err(Error::InvalidArgument(format!(
                                "wildcards {j} and {i} overlap at ({x},{y})"
                            )))
                        }
                        Slot::Fixed(_) => slots[c] = Slot::Wild(i),
                    }
                }
            }
        }
        Ok(CombSubspaceSpec { k, side, slots, alphas })
    }

    /// A subspace over the whole grid.
    pub fn full(base: &KString, alphas: Vec<IndexSet>) -> Result<Self> {
        let side = exact_side(base.len())
            .ok_or_else(|| Error::InvalidArgument("base word is not a square grid".into()))?;
        let letters: Vec<Option<u8>> = base.letters.iter().map(|&l| Some(l)).collect();
        CombSubspaceSpec::new(base.k, side, &letters, alphas)
    }

    /// The 1-dimensional subspace spanned by an oriented square certificate.
    pub fn from_line(cert: &Certificate) -> Result<Self> {
        if !cert.oriented || cert.gamma1 != cert.gamma2 || cert.gamma1.is_empty() {
            return Err(Error::InvalidArgument("certificate is not an oriented square pair".into()));
        }
        CombSubspaceSpec::full(&KString::from_grid(&cert.a), vec![cert.gamma1])
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[IndexSet] {
        &self.alphas
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn is_full(&self) -> bool {
        !self.slots.contains(&Slot::Outside)
    }

    /// Coordinates in the support.
    pub fn support(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&c| self.slots[c] != Slot::Outside).collect()
    }

    /// Re-derives the invariants from the slot table: every wildcard region
    /// is exactly `αᵢ × αᵢ`, the `αᵢ` are nonempty and pairwise distinct.
    pub fn validate(&self) -> Result<()> {
        if self.slots.len() != self.side * self.side {
            return Err(Error::InvalidArgument("slot table has the wrong size".into()));
        }
        let distinct: HashSet<u64> = self.alphas.iter().map(IndexSet::mask).collect();
        if distinct.len() != self.alphas.len() || self.alphas.iter().any(IndexSet::is_empty) {
            return Err(Error::InvalidArgument("wildcard index sets must be nonempty and distinct".into()));
        }
        for (i, alpha) in self.alphas.iter().enumerate() {
            for c in 0..self.slots.len() {
                let (x, y) = (c / self.side + 1, c % self.side + 1);
                let in_square = alpha.contains(x) && alpha.contains(y);
                if in_square != (self.slots[c] == Slot::Wild(i)) {
                    return Err(Error::InvalidArgument(format!(
                        "wildcard {i} is not the square of {alpha:?} at ({x},{y})"
                    )));
                }
            }
        }
        if let Some(Slot::Fixed(l)) = self.slots.iter().find(|s| matches!(s, Slot::Fixed(l) if *l >= self.k)) {
            return Err(Error::InvalidArgument(format!("letter {l} outside alphabet")));
        }
        Ok(())
    }

    /// The point with wildcard letters `xs`; `None` outside the support.
    pub fn instantiate(&self, xs: &[u8]) -> Vec<Option<u8>> {
        assert_eq!(xs.len(), self.dim(), "one letter per wildcard");
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Outside => None,
                Slot::Fixed(l) => Some(l),
                Slot::Wild(i) => Some(xs[i]),
            })
            .collect()
    }

    /// All `k^d` points, wildcard letters in mixed-radix order (`x₁` fastest).
    pub fn instantiations(&self) -> impl Iterator<Item = Vec<Option<u8>>> + '_ {
        let d = self.dim();
        (0..pow(self.k, d) as u64).map(move |t| self.instantiate(&decode(t, self.k, d)))
    }

    pub fn to_json(&self) -> String {
        let doc = SpecDoc {
            k: self.k,
            n: self.side,
            base: self.base_text(),
            alphas: self.alphas.iter().map(IndexSet::to_vec).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("spec serializes")
    }

    /// Base grid with wildcard cells written as 0 and unsupported cells as `.`.
    fn base_text(&self) -> String {
        let mut out = String::new();
        for row in self.slots.chunks(self.side) {
            for s in row {
                out.push(match *s {
                    Slot::Outside => '.',
                    Slot::Fixed(l) => char::from_digit(l as u32, 10).unwrap(),
                    Slot::Wild(_) => '0',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        let mut base = Vec::with_capacity(doc.n * doc.n);
        let lines: Vec<&str> = doc.base.lines().collect();
        if lines.len() != doc.n {
            return Err(Error::parse(1, 1, format!("base has {} rows, expected {}", lines.len(), doc.n)));
        }
        for (i, line) in lines.iter().enumerate() {
            if line.chars().count() != doc.n {
                return Err(Error::parse(i + 1, 1, format!("base row must have {} cells", doc.n)));
            }
            for (j, c) in line.chars().enumerate() {
                base.push(match c {
                    '.' => None,
                    _ => match c.to_digit(10) {
                        Some(d) => Some(d as u8),
                        None => return Err(Error::parse(i + 1, j + 1, format!("unexpected {c:?}"))),
                    },
                });
            }
        }
        let alphas = doc
            .alphas
            .into_iter()
            .map(|a| IndexSet::from_members(doc.n, a))
            .collect::<Result<Vec<_>>>()?;
        CombSubspaceSpec::new(doc.k, doc.n, &base, alphas)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    k: u8,
    #[serde(rename = "N")]
    n: usize,
    base: String,
    alphas: Vec<Vec<usize>>,
}

/// `σ × λ`: the subspace on the union of the two supports whose points are
/// all pairs `(x, y)`, `x ∈ σ`, `y ∈ λ`.
pub fn subspace_product(sigma: &CombSubspaceSpec, lambda: &CombSubspaceSpec) -> Result<CombSubspaceSpec> {
    if sigma.k != lambda.k || sigma.side != lambda.side {
        return Err(Error::InvalidArgument("subspaces live over different alphabets or grids".into()));
    }
    let mut base = Vec::with_capacity(sigma.slots.len());
    for (c, (s, l)) in sigma.slots.iter().zip(&lambda.slots).enumerate() {
        base.push(match (*s, *l) {
            (Slot::Outside, Slot::Outside) => None,
            (Slot::Fixed(x), Slot::Outside) | (Slot::Outside, Slot::Fixed(x)) => Some(x),
            (Slot::Wild(_), Slot::Outside) | (Slot::Outside, Slot::Wild(_)) => Some(0),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "supports overlap at cell ({}, {})",
                    c / sigma.side + 1,
                    c % sigma.side + 1
                )))
            }
        });
    }
    let alphas: Vec<IndexSet> = sigma.alphas.iter().chain(&lambda.alphas).copied().collect();
    let distinct: HashSet<u64> = alphas.iter().map(IndexSet::mask).collect();
    if distinct.len() != alphas.len() {
        return Err(Error::InvalidArgument("wildcard index sets must stay distinct".into()));
    }
    CombSubspaceSpec::new(sigma.k, sigma.side, &base, alphas)
}

/// Checks the spec's invariants and that all `k^d` points lie in `E`.
pub fn verify_subspace_in_set(set: &KSet, spec: &CombSubspaceSpec) -> bool {
    if spec.validate().is_err() || !spec.is_full() || spec.k != set.k || spec.slots.len() != set.len {
        return false;
    }
    spec.instantiations().all(|p| {
        let word: Vec<u8> = p.into_iter().map(|l| l.unwrap()).collect();
        set.contains(&word)
    })
}

/// Exhaustive count of distinct `dim`-dimensional square-wildcard subspaces
/// of `[k]^{m×m}`, counted as point sets.
pub fn count_square_subspaces(m: usize, k: u8, dim: usize) -> Result<u64> {
    check_alphabet(k)?;
    if m == 0 || m > 3 {
        return Err(Error::InvalidArgument("exhaustive count supports 1 <= m <= 3".into()));
    }
    let mut seen: HashSet<Vec<Vec<u8>>> = HashSet::new();
    let masks: Vec<u64> = (1u64..1 << m).collect();
    let mut tuple = Vec::new();
    collect_subspaces(m, k, dim, &masks, &mut tuple, &mut seen)?;
    Ok(seen.len() as u64)
}

fn collect_subspaces(
    m: usize,
    k: u8,
    dim: usize,
    masks: &[u64],
    tuple: &mut Vec<u64>,
    seen: &mut HashSet<Vec<Vec<u8>>>,
) -> Result<()> {
    if tuple.len() == dim {
        let used = tuple.iter().fold(0u64, |a, &b| a | b);
        if tuple.iter().map(|t| t.count_ones()).sum::<u32>() != used.count_ones() {
            return Ok(());
        }
        let alphas = tuple
            .iter()
            .map(|&t| IndexSet::from_mask(m, t))
            .collect::<Result<Vec<_>>>()?;
        let free: Vec<usize> = (0..m * m)
            .filter(|&c| !alphas.iter().any(|a| a.contains(c / m + 1) && a.contains(c % m + 1)))
            .collect();
        for t in 0..pow(k, free.len()) as u64 {
            let letters = decode(t, k, free.len());
            let mut base = vec![Some(0u8); m * m];
            for (&c, &l) in free.iter().zip(&letters) {
                base[c] = Some(l);
            }
            let spec = CombSubspaceSpec::new(k, m, &base, alphas.clone())?;
            let mut points: Vec<Vec<u8>> = spec
                .instantiations()
                .map(|p| p.into_iter().map(Option::unwrap).collect())
                .collect();
            points.sort();
            seen.insert(points);
        }
        return Ok(());
    }
    for &mask in masks {
        tuple.push(mask);
        collect_subspaces(m, k, dim, masks, tuple, seen)?;
        tuple.pop();
    }
    Ok(())
}

/// Trace of one run of the two-dimensional composition.
#[derive(Clone, Debug)]
pub struct CompositionDemo {
    pub good_labels: usize,
    /// Number of 1-dimensional square subspaces of the `P` block examined.
    pub sigma_candidates: usize,
    /// `|G_{σ₀}|`: good labels whose slice contains `σ₀`.
    pub sigma_support: usize,
    pub sigma: CombSubspaceSpec,
    pub lambda: CombSubspaceSpec,
    pub product: CombSubspaceSpec,
    pub verified: bool,
}

/// Runs the induction step for `d = 2` at desk scale, with exhaustive search
/// standing in for the one-dimensional base case.
///
/// `P` is the upper-left `m × m` block of the `N × N` grid. Among the
/// square lines `σ` of the block, `σ₀` maximizes the number of good labels
/// `z_Q` whose slice contains it (the set `G_{σ₀}`); a square line `λ` with
/// wildcard inside the lower-right block is then sought inside `G_{σ₀}`, and
/// `σ₀ × λ` is checked against `E`. Returns `None` when either search fails.
pub fn composition_demo<T: Scalar>(set: &KSet, m: usize, eps: T) -> Result<Option<CompositionDemo>> {
    let side = exact_side(set.len)
        .ok_or_else(|| Error::InvalidArgument("words must cover a square grid".into()))?;
    if m == 0 || m >= side {
        return Err(Error::InvalidArgument(format!("need 1 <= m < N, got m={m}, N={side}")));
    }
    let k = set.k;
    let partition = Bipartition::block(side, m)?;
    let table = slice_by(set, partition.clone())?;
    let good = good_strings(&table, eps);

    let mut slices: BTreeMap<Vec<u8>, BTreeSet<Vec<u8>>> = BTreeMap::new();
    for w in set.iter() {
        let zq = partition.restrict_q(w);
        if good.contains(&zq) {
            slices.entry(zq).or_default().insert(partition.restrict_p(w));
        }
    }

    let block_lines = lines_on(k, side, &partition.p, &(1..=m).collect::<Vec<_>>())?;
    let sigma_candidates = block_lines.len();
    let mut best: Option<(CombSubspaceSpec, BTreeSet<Vec<u8>>)> = None;
    for sigma in block_lines {
        let points: Vec<Vec<u8>> = sigma
            .instantiations()
            .map(|p| partition.p.iter().map(|&c| p[c].unwrap()).collect())
            .collect();
        let g: BTreeSet<Vec<u8>> = slices
            .iter()
            .filter(|(_, s)| points.iter().all(|pt| s.contains(pt)))
            .map(|(z, _)| z.clone())
            .collect();
        if best.as_ref().is_none_or(|(_, b)| g.len() > b.len()) {
            best = Some((sigma, g));
        }
    }
    let Some((sigma, g_sigma)) = best.filter(|(_, g)| !g.is_empty()) else {
        return Ok(None);
    };

    // λ: a square line inside the lower-right block, all of whose points
    // (as Q-restrictions) lie in G_σ₀.
    let lower: Vec<usize> = (m + 1..=side).collect();
    let mut lambda = None;
    'search: for z in &g_sigma {
        for mask in 1u64..1 << lower.len() {
            let alpha = IndexSet::from_members(side, lower.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i))?;
            let mut base = vec![None; side * side];
            for (&c, &l) in partition.q.iter().zip(z) {
                base[c] = Some(l);
            }
            let spec = CombSubspaceSpec::new(k, side, &base, vec![alpha])?;
            let inside = spec.instantiations().all(|p| {
                let zq: Vec<u8> = partition.q.iter().map(|&c| p[c].unwrap()).collect();
                g_sigma.contains(&zq)
            });
            if inside {
                lambda = Some(spec);
                break 'search;
            }
        }
    }
    let Some(lambda) = lambda else {
        return Ok(None);
    };
    let product = subspace_product(&sigma, &lambda)?;
    let verified = verify_subspace_in_set(set, &product);
    Ok(Some(CompositionDemo {
        good_labels: good.len(),
        sigma_candidates,
        sigma_support: g_sigma.len(),
        sigma,
        lambda,
        product,
        verified,
    }))
}

/// Every 1-dimensional square-wildcard subspace supported on `coords`
/// with `α ⊆ indices`.
fn lines_on(k: u8, side: usize, coords: &[usize], indices: &[usize]) -> Result<Vec<CombSubspaceSpec>> {
    let mut out = Vec::new();
    for mask in 1u64..1 << indices.len() {
        let alpha = IndexSet::from_members(side, indices.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i))?;
        let free: Vec<usize> = coords
            .iter()
            .copied()
            .filter(|&c| !(alpha.contains(c / side + 1) && alpha.contains(c % side + 1)))
            .collect();
        for t in 0..pow(k, free.len()) as u64 {
            let mut base = vec![None; side * side];
            for &c in coords {
                base[c] = Some(0);
            }
            for (&c, l) in free.iter().zip(decode(t, k, free.len())) {
                base[c] = Some(l);
            }
            out.push(CombSubspaceSpec::new(k, side, &base, vec![alpha])?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kset_text() {
        let set = KSet::parse("01\n20\n\n11\n11\n", 3).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains(&[0, 1, 2, 0]));
        match KSet::parse("01\n20\n\n11\n13\n", 3) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (5, 2)),
            other => panic!("{other:?}"),
        }
        assert_eq!(KSet::seeded(3, 4, 10, 1).unwrap(), KSet::seeded(3, 4, 10, 1).unwrap());
    }

    fn set(n: usize, m: &[usize]) -> IndexSet {
        IndexSet::from_members(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn kstring_text() {
        let s = KString::parse("012\n210\n000\n", 3).unwrap();
        assert_eq!(s.letters(), &[0, 1, 2, 2, 1, 0, 0, 0, 0]);
        assert_eq!(s.format(), "012\n210\n000\n");
        assert!(matches!(KString::parse("01\n03\n", 3), Err(Error::Parse { line: 2, column: 2, .. })));
        assert!(KString::new(2, vec![0, 2]).is_err());
    }

    #[test]
    fn full_universe_slices_are_full() {
        let e = KSet::universe(2, 9).unwrap();
        let t = slice_decompose(&e, &Bipartition::block(3, 2).unwrap().p).unwrap();
        assert_eq!(t.counts.len(), 32);
        assert!(t.rows::<f64>().all(|(_, d)| d == 1.0));
        assert_eq!(good_strings(&t, 1.0).len(), 32);
    }

    #[test]
    fn empty_set_gives_empty_table() {
        let e = KSet::new(3, 4, Vec::<Vec<u8>>::new()).unwrap();
        let t = slice_decompose(&e, &[0, 1]).unwrap();
        assert!(t.counts.is_empty());
        assert_eq!(t.mass(), 0);
    }

    #[test]
    fn half_density_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = KSet::random(2, 9, 256, &mut rng).unwrap();
        let t = slice_decompose(&e, &Bipartition::block(3, 2).unwrap().p).unwrap();
        assert_eq!(t.mass(), 256);
        // Weighted by the 32 labels, the slice densities average to |E| / 2^9.
        let sum: Rational = t.rows::<Rational>().map(|(_, d)| d).fold(Rational::from(0), |a, b| a + b);
        assert_eq!(sum / Rational::from(32), Rational::new(1, 2));
    }

    #[test]
    fn one_point_missing() {
        let mut e = KSet::universe(2, 4).unwrap();
        e.remove(&[1, 1, 1, 1]);
        let t = slice_decompose(&e, &Bipartition::block(2, 1).unwrap().p).unwrap();
        // P = {(1,1)}: 8 labels, one of which has a half-empty slice.
        let good = good_strings(&t, Rational::from(1));
        assert_eq!(good.len(), 8);
        let full = t.rows::<Rational>().filter(|(_, d)| *d == Rational::from(1)).count();
        assert_eq!(full, 7);
        let lemma = check_counting_lemma(&t, Rational::from(1));
        assert!(!lemma.premise && lemma.holds);
        // With P the top row (2 cells), 3 of the 4 labels are fully dense.
        let t = slice_decompose(&e, &[0, 1]).unwrap();
        let full = t.rows::<Rational>().filter(|(_, d)| *d == Rational::from(1)).count();
        assert_eq!(full, 3);
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(4, &[0, 4]).is_err());
        assert!(Bipartition::new(4, &[1, 1]).is_err());
        let b = Bipartition::new(4, &[2, 0]).unwrap();
        assert_eq!(b.p, vec![0, 2]);
        assert_eq!(b.q, vec![1, 3]);
        let w = [7, 8, 9, 10];
        assert_eq!(b.join(&b.restrict_p(&w), &b.restrict_q(&w)), w);
    }

    #[test]
    fn bound_values() {
        assert_eq!(subspace_count_bound(1, 2, 1).unwrap(), BigUint::from(2u32));
        assert_eq!(subspace_count_bound(2, 2, 1).unwrap(), BigUint::from(16u32));
        assert_eq!(subspace_count_bound(1, 3, 2).unwrap(), BigUint::from(4u32));
        assert!(subspace_count_bound(0, 2, 1).is_err());
        assert_eq!(
            subspace_count_bound(10, 3, 3).unwrap(),
            BigUint::from(5u32).pow(100)
        );
    }

    #[test]
    fn bound_counts_one_dimension_lower() {
        // The bound with parameter d covers (d-1)-dimensional subspaces.
        for m in 1..=2 {
            for d in 1..=3 {
                let count = count_square_subspaces(m, 2, d - 1).unwrap();
                assert!(BigUint::from(count) <= subspace_count_bound(m, 2, d).unwrap(), "m={m} d={d}");
            }
        }
        assert_eq!(count_square_subspaces(2, 2, 0).unwrap(), 16);
        // 8 lines through (1,1), 8 through (2,2), one full square.
        assert_eq!(count_square_subspaces(2, 2, 1).unwrap(), 17);
        assert_eq!(count_square_subspaces(2, 2, 2).unwrap(), 4);
        assert_eq!(count_square_subspaces(1, 2, 1).unwrap(), 1);
    }

    #[test]
    fn spec_construction_errors() {
        let base = vec![Some(0u8); 9];
        assert!(CombSubspaceSpec::new(2, 3, &base, vec![set(3, &[1, 2]), set(3, &[2, 3])]).is_err());
        assert!(CombSubspaceSpec::new(2, 3, &base, vec![set(3, &[1]), set(3, &[1])]).is_err());
        let mut partial = base.clone();
        partial[4] = None;
        assert!(CombSubspaceSpec::new(2, 3, &partial, vec![set(3, &[2])]).is_err());
        let ok = CombSubspaceSpec::new(3, 3, &base, vec![set(3, &[1]), set(3, &[2, 3])]).unwrap();
        assert_eq!(ok.instantiations().count(), 9);
        ok.validate().unwrap();
    }

    #[test]
    fn product_of_point_and_line() {
        let side = 3;
        let p = Bipartition::block(side, 1).unwrap();
        let mut sb = vec![None; 9];
        sb[0] = Some(1);
        let sigma = CombSubspaceSpec::new(2, side, &sb, vec![]).unwrap();
        let mut lb = vec![None; 9];
        for &c in &p.q {
            lb[c] = Some((c % 2) as u8);
        }
        let lambda = CombSubspaceSpec::new(2, side, &lb, vec![set(3, &[2, 3])]).unwrap();
        let prod = subspace_product(&sigma, &lambda).unwrap();
        assert!(prod.is_full());
        let pts: Vec<_> = prod.instantiations().collect();
        let lam: Vec<_> = lambda.instantiations().collect();
        assert_eq!(pts.len(), 2);
        for (a, b) in pts.iter().zip(&lam) {
            assert_eq!(a[0], Some(1));
            assert_eq!(&a[1..], &b[1..]);
        }
        assert!(subspace_product(&lambda, &lambda).is_err());
    }

    #[test]
    fn product_of_lines() {
        let side = 4;
        let p = Bipartition::block(side, 2).unwrap();
        let mut sb = vec![None; 16];
        for &c in &p.p {
            sb[c] = Some(2);
        }
        let sigma = CombSubspaceSpec::new(3, side, &sb, vec![set(4, &[1, 2])]).unwrap();
        let mut lb = vec![None; 16];
        for &c in &p.q {
            lb[c] = Some(1);
        }
        let lambda = CombSubspaceSpec::new(3, side, &lb, vec![set(4, &[3, 4])]).unwrap();
        let prod = subspace_product(&sigma, &lambda).unwrap();
        assert_eq!(prod.dim(), 2);
        let pts: BTreeSet<_> = prod.instantiations().collect();
        assert_eq!(pts.len(), 9);
        let expect: BTreeSet<Vec<Option<u8>>> = sigma
            .instantiations()
            .flat_map(|x| {
                lambda.instantiations().map(move |y| {
                    x.iter().zip(&y).map(|(a, b)| a.or(*b)).collect()
                })
            })
            .collect();
        assert_eq!(pts, expect);
    }

    #[test]
    fn verify_detects_missing_points() {
        let mut e = KSet::universe(2, 9).unwrap();
        let spec = CombSubspaceSpec::full(&KString::new(2, vec![0; 9]).unwrap(), vec![set(3, &[1, 3])]).unwrap();
        assert!(verify_subspace_in_set(&e, &spec));
        e.remove(&[1, 0, 1, 0, 0, 0, 1, 0, 1]);
        assert!(!verify_subspace_in_set(&e, &spec));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = CombSubspaceSpec::full(
            &KString::new(3, vec![2, 0, 1, 1, 0, 2, 0, 0, 1]).unwrap(),
            vec![set(3, &[2]), set(3, &[1, 3])],
        )
        .unwrap();
        let text = spec.to_json();
        assert_eq!(CombSubspaceSpec::from_json(&text).unwrap(), spec);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["N"], 3);
        assert_eq!(v["alphas"], serde_json::json!([[2], [1, 3]]));
    }

    #[test]
    fn demo_on_dense_random_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = KSet::random(2, 9, 480, &mut rng).unwrap();
        let demo = composition_demo(&e, 1, 0.5f64).unwrap().expect("dense set composes");
        assert!(demo.verified);
        assert_eq!(demo.product.dim(), 2);
        assert_eq!(demo.sigma_candidates, 1);
    }

    #[test]
    fn demo_on_full_universe_k3() {
        let e = KSet::universe(3, 9).unwrap();
        let demo = composition_demo(&e, 2, Rational::new(1, 2)).unwrap().unwrap();
        assert!(demo.verified);
        assert_eq!(demo.sigma_support, demo.good_labels);
    }
}
