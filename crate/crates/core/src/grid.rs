//! Elements of F₂^{n²} viewed as n×n bit grids.
//!
//! Cell `(x, y)` is 1-based: `x` is the row (increasing downward), `y` the
//! column (increasing rightward). It lives at bit `(x-1)*n + (y-1)` of a
//! row-major, little-endian word array.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{BitAnd, BitXor, BitXorAssign};
use std::str::FromStr;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

/// Largest supported grid side. Index sets are stored as a `u64` mask.
pub const MAX_SIDE: usize = 64;

type Words = SmallVec<[u64; 2]>;

fn words_for(n: usize) -> usize {
    (n * n).div_ceil(64)
}

fn check_side(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SIDE {
        return Err(Error::UnsupportedSize {
            n,
            reason: format!("grid side must lie in 1..={MAX_SIDE}"),
        });
    }
    Ok(())
}

fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// A subset of `{1, …, n}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    n: usize,
    mask: u64,
}

impl IndexSet {
    pub fn empty(n: usize) -> Result<Self> {
        check_side(n)?;
        Ok(IndexSet { n, mask: 0 })
    }

    pub fn full(n: usize) -> Result<Self> {
        check_side(n)?;
        Ok(IndexSet {
            n,
            mask: low_mask(n),
        })
    }

    /// Builds the set from 1-based members.
    pub fn from_members<I: IntoIterator<Item = usize>>(n: usize, members: I) -> Result<Self> {
        let mut set = IndexSet::empty(n)?;
        for i in members {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            set.mask |= 1 << (i - 1);
        }
        Ok(set)
    }

    /// Bit `i-1` of `mask` encodes membership of `i`.
    pub fn from_mask(n: usize, mask: u64) -> Result<Self> {
        check_side(n)?;
        if mask & !low_mask(n) != 0 {
            return Err(Error::IndexOutOfRange {
                index: 64 - mask.leading_zeros() as usize,
                n,
            });
        }
        Ok(IndexSet { n, mask })
    }

    pub fn singleton(n: usize, i: usize) -> Result<Self> {
        IndexSet::from_members(n, [i])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && i <= self.n && self.mask >> (i - 1) & 1 == 1
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&i| self.contains(i))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.members().collect()
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.mask & other.mask == 0
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            n: self.n,
            mask: self.mask | other.mask,
        }
    }

    /// All nonempty subsets of `{1, …, n}`, in increasing mask order.
    pub fn nonempty_subsets(n: usize) -> impl Iterator<Item = IndexSet> {
        assert!(n < 64, "subset enumeration needs n < 64");
        (1u64..1 << n).map(move |mask| IndexSet { n, mask })
    }

    /// All subsets (including the empty one) of this set.
    pub fn subsets(&self) -> impl Iterator<Item = IndexSet> + '_ {
        // Standard submask walk, emitted in increasing order.
        let full = self.mask;
        let mut subs: Vec<u64> = Vec::with_capacity(1 << self.len());
        let mut s = 0u64;
        loop {
            subs.push(s);
            if s == full {
                break;
            }
            s = (s.wrapping_sub(full)) & full;
        }
        subs.into_iter().map(move |mask| IndexSet { n: self.n, mask })
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_vec())
    }
}

/// An element of F₂^{n²}: words, difference sets and wildcard shapes alike.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GridVector {
    n: usize,
    words: Words,
}

impl GridVector {
    pub fn zero(n: usize) -> Result<Self> {
        check_side(n)?;
        Ok(GridVector {
            n,
            words: smallvec![0; words_for(n)],
        })
    }

    pub fn ones(n: usize) -> Result<Self> {
        let full = IndexSet::full(n)?;
        product_vector(&full, &full)
    }

    pub fn from_cells<I: IntoIterator<Item = (usize, usize)>>(n: usize, cells: I) -> Result<Self> {
        let mut v = GridVector::zero(n)?;
        for (x, y) in cells {
            v.check_cell(x, y)?;
            v.flip(x, y);
        }
        Ok(v)
    }

    /// Inverse of [`GridVector::index`]; valid when `n² ≤ 64`.
    pub fn from_index(n: usize, index: u64) -> Result<Self> {
        check_side(n)?;
        if n * n > 64 {
            return Err(Error::UnsupportedSize {
                n,
                reason: "integer indexing needs n² ≤ 64".into(),
            });
        }
        if index & !low_mask(n * n) != 0 {
            return Err(Error::InvalidArgument(format!(
                "index {index} does not fit in {} bits",
                n * n
            )));
        }
        Ok(GridVector {
            n,
            words: smallvec![index],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The vector as an integer (cell `(1,1)` is the least significant bit),
    /// available when `n² ≤ 64`.
    pub fn index(&self) -> Option<u64> {
        (self.n * self.n <= 64).then(|| self.words[0])
    }

    fn check_cell(&self, x: usize, y: usize) -> Result<()> {
        for c in [x, y] {
            if c == 0 || c > self.n {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    n: self.n,
                });
            }
        }
        Ok(())
    }

    fn bit(&self, x: usize, y: usize) -> usize {
        (x - 1) * self.n + (y - 1)
    }

    /// Panics when the cell is out of range.
    pub fn get(&self, x: usize, y: usize) -> bool {
        assert!(x >= 1 && y >= 1 && x <= self.n && y <= self.n, "cell out of range");
        let b = self.bit(x, y);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        if self.get(x, y) != value {
            self.flip(x, y);
        }
    }

    pub fn flip(&mut self, x: usize, y: usize) {
        let b = self.bit(x, y);
        self.words[b / 64] ^= 1 << (b % 64);
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Set cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (1..=n)
            .flat_map(move |x| (1..=n).map(move |y| (x, y)))
            .filter(move |&(x, y)| self.get(x, y))
    }

    /// Row `x` as a column mask (bit `y-1` for column `y`).
    pub fn row_mask(&self, x: usize) -> u64 {
        let start = (x - 1) * self.n;
        let (w, off) = (start / 64, start % 64);
        let mut bits = self.words[w] >> off;
        if off + self.n > 64 && w + 1 < self.words.len() {
            bits |= self.words[w + 1] << (64 - off);
        }
        bits & low_mask(self.n)
    }

    fn or_row_mask(&mut self, x: usize, mask: u64) {
        let start = (x - 1) * self.n;
        let (w, off) = (start / 64, start % 64);
        self.words[w] |= mask << off;
        if off + self.n > 64 {
            self.words[w + 1] |= mask >> (64 - off);
        }
    }

    /// `{x : row x is nonzero}`.
    pub fn row_support(&self) -> IndexSet {
        let mask = (1..=self.n)
            .filter(|&x| self.row_mask(x) != 0)
            .fold(0u64, |m, x| m | 1 << (x - 1));
        IndexSet { n: self.n, mask }
    }

    /// `{y : column y is nonzero}`.
    pub fn col_support(&self) -> IndexSet {
        let mask = (1..=self.n).fold(0u64, |m, x| m | self.row_mask(x));
        IndexSet { n: self.n, mask }
    }

    /// Symmetric difference, checking that both grids have the same side.
    pub fn try_xor(&self, other: &GridVector) -> Result<GridVector> {
        self.same_side(other)?;
        Ok(self ^ other)
    }

    pub fn try_and(&self, other: &GridVector) -> Result<GridVector> {
        self.same_side(other)?;
        Ok(self & other)
    }

    pub fn same_side(&self, other: &GridVector) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// True when every set cell of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &GridVector) -> bool {
        self.n == other.n && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint_from(&self, other: &GridVector) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Fixed-width lowercase hex, most significant nibble first.
    pub fn to_hex(&self) -> String {
        let nibbles = (self.n * self.n).div_ceil(4);
        let mut out = String::with_capacity(nibbles);
        for i in (0..nibbles).rev() {
            let b = i * 4;
            let d = (self.words[b / 64] >> (b % 64)) & 0xf;
            out.push(char::from_digit(d as u32, 16).unwrap());
        }
        out
    }
}

impl<'a> BitXor<&'a GridVector> for &'a GridVector {
    type Output = GridVector;

    /// Panics on a side mismatch; use [`GridVector::try_xor`] for checked addition.
    fn bitxor(self, rhs: &'a GridVector) -> GridVector {
        assert_eq!(self.n, rhs.n, "grid side mismatch");
        let words = self.words.iter().zip(&rhs.words).map(|(a, b)| a ^ b).collect();
        GridVector { n: self.n, words }
    }
}

impl BitXorAssign<&GridVector> for GridVector {
    fn bitxor_assign(&mut self, rhs: &GridVector) {
        assert_eq!(self.n, rhs.n, "grid side mismatch");
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
    }
}

impl<'a> BitAnd<&'a GridVector> for &'a GridVector {
    type Output = GridVector;

    fn bitand(self, rhs: &'a GridVector) -> GridVector {
        assert_eq!(self.n, rhs.n, "grid side mismatch");
        let words = self.words.iter().zip(&rhs.words).map(|(a, b)| a & b).collect();
        GridVector { n: self.n, words }
    }
}

/// Canonical order: by side, then as an unsigned integer with cell `(1,1)`
/// as the least significant bit.
impl Ord for GridVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for GridVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// F₂ addition (symmetric difference of supports).
pub fn xor_add(a: &GridVector, b: &GridVector) -> Result<GridVector> {
    a.try_xor(b)
}

/// Indicator of `γ₁ × γ₂`.
pub fn product_vector(gamma1: &IndexSet, gamma2: &IndexSet) -> Result<GridVector> {
    if gamma1.n != gamma2.n {
        return Err(Error::DimensionMismatch {
            expected: gamma1.n,
            found: gamma2.n,
        });
    }
    let mut v = GridVector::zero(gamma1.n)?;
    if gamma2.mask != 0 {
        for x in gamma1.members() {
            v.or_row_mask(x, gamma2.mask);
        }
    }
    Ok(v)
}

/// Indicator of `γ × γ`.
pub fn square_vector(gamma: &IndexSet) -> GridVector {
    product_vector(gamma, gamma).expect("same side")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeKind {
    Zero,
    Square,
    Rect,
    Other,
}

impl ShapeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeKind::Zero => "Zero",
            ShapeKind::Square => "Square",
            ShapeKind::Rect => "Rect",
            ShapeKind::Other => "Other",
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Zero" => Ok(ShapeKind::Zero),
            "Square" => Ok(ShapeKind::Square),
            "Rect" => Ok(ShapeKind::Rect),
            "Other" => Ok(ShapeKind::Other),
            _ => Err(Error::InvalidArgument(format!("unknown shape kind {s:?}"))),
        }
    }
}

/// Shape of a difference set. `Square(γ)` is never reported as `Rect(γ, γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Zero,
    Square(IndexSet),
    Rect(IndexSet, IndexSet),
    Other,
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Zero => ShapeKind::Zero,
            Shape::Square(_) => ShapeKind::Square,
            Shape::Rect(..) => ShapeKind::Rect,
            Shape::Other => ShapeKind::Other,
        }
    }

    /// Row support for product shapes.
    pub fn gamma1(&self) -> Option<IndexSet> {
        match *self {
            Shape::Square(g) | Shape::Rect(g, _) => Some(g),
            _ => None,
        }
    }

    /// Column support for product shapes.
    pub fn gamma2(&self) -> Option<IndexSet> {
        match *self {
            Shape::Square(g) | Shape::Rect(_, g) => Some(g),
            _ => None,
        }
    }

    /// The grid this shape denotes, when it is a product.
    pub fn to_vector(&self, n: usize) -> Result<GridVector> {
        match *self {
            Shape::Zero => GridVector::zero(n),
            Shape::Square(g) => Ok(square_vector(&g)),
            Shape::Rect(a, b) => product_vector(&a, &b),
            Shape::Other => Err(Error::InvalidArgument(
                "an Other shape has no product form".into(),
            )),
        }
    }

    /// Rebuilds a product shape from its kind and supports, enforcing the
    /// kind invariants.
    pub fn from_parts(kind: ShapeKind, gamma1: IndexSet, gamma2: IndexSet) -> Result<Shape> {
        match kind {
            ShapeKind::Zero => Ok(Shape::Zero),
            ShapeKind::Other => Ok(Shape::Other),
            ShapeKind::Square if gamma1 == gamma2 && !gamma1.is_empty() => Ok(Shape::Square(gamma1)),
            ShapeKind::Rect if gamma1 != gamma2 && !gamma1.is_empty() && !gamma2.is_empty() => {
                Ok(Shape::Rect(gamma1, gamma2))
            }
            _ => Err(Error::InvalidArgument(format!(
                "supports {gamma1:?} x {gamma2:?} are inconsistent with kind {}",
                kind.as_str()
            ))),
        }
    }
}

/// Decides whether `v` is zero, a square `γ×γ`, a rectangle `γ₁×γ₂`, or neither.
pub fn classify_shape(v: &GridVector) -> Shape {
    if v.is_zero() {
        return Shape::Zero;
    }
    let rows = v.row_support();
    let cols = v.col_support();
    // v = R × C exactly when every nonzero row equals C.
    let is_product = rows.members().all(|x| v.row_mask(x) == cols.mask);
    if !is_product {
        Shape::Other
    } else if rows == cols {
        Shape::Square(rows)
    } else {
        Shape::Rect(rows, cols)
    }
}

/// Parses `n` newline-terminated rows of `n` characters from `{0, 1}`.
/// The final newline may be omitted.
pub fn parse_grid(text: &str) -> Result<GridVector> {
    if text.is_empty() {
        return Err(Error::parse(1, 1, "empty input"));
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines: Vec<&str> = body.split('\n').collect();
    let n = lines.len();
    if n > MAX_SIDE {
        return Err(Error::parse(MAX_SIDE + 1, 1, format!("more than {MAX_SIDE} rows")));
    }
    let mut v = GridVector::zero(n)?;
    for (i, line) in lines.iter().enumerate() {
        let mut count = 0;
        for (j, ch) in line.chars().enumerate() {
            match ch {
                '0' => {}
                '1' if j < n => v.flip(i + 1, j + 1),
                '1' => {}
                _ => {
                    return Err(Error::parse(i + 1, j + 1, format!("unexpected character {ch:?}")));
                }
            }
            count += 1;
        }
        if count != n {
            return Err(Error::parse(
                i + 1,
                count.min(n) + 1,
                format!("row has {count} cells, expected {n}"),
            ));
        }
    }
    Ok(v)
}

/// Canonical text: one newline-terminated row per line, no padding.
pub fn format_grid(v: &GridVector) -> String {
    let mut out = String::with_capacity(v.n * (v.n + 1));
    for x in 1..=v.n {
        let row = v.row_mask(x);
        for y in 0..v.n {
            out.push(if row >> y & 1 == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

impl fmt::Display for GridVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_grid(self))
    }
}

impl fmt::Debug for GridVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GridVector(n={}, cells={:?})", self.n, self.cells().collect::<Vec<_>>())
    }
}

impl FromStr for GridVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_grid(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, m: &[usize]) -> IndexSet {
        IndexSet::from_members(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn self_inverse() {
        let a = GridVector::from_cells(3, [(1, 2), (3, 3)]).unwrap();
        assert!(xor_add(&a, &a).unwrap().is_zero());
    }

    #[test]
    fn disjoint_support_cancellation() {
        let a = GridVector::from_cells(2, [(1, 1)]).unwrap();
        let b = GridVector::from_cells(2, [(1, 1), (2, 2)]).unwrap();
        let c = xor_add(&a, &b).unwrap();
        assert_eq!(c, GridVector::from_cells(2, [(2, 2)]).unwrap());
    }

    #[test]
    fn pairwise_differences_compose() {
        let s1 = GridVector::from_cells(3, [(1, 1), (2, 3)]).unwrap();
        let s2 = GridVector::from_cells(3, [(2, 3), (3, 1), (3, 2)]).unwrap();
        let s3 = GridVector::from_cells(3, [(1, 2)]).unwrap();
        let d12 = xor_add(&s1, &s2).unwrap();
        let d13 = xor_add(&s1, &s3).unwrap();
        let d23 = xor_add(&s2, &s3).unwrap();
        assert_eq!(d12, xor_add(&d13, &d23).unwrap());
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = GridVector::zero(2).unwrap();
        let b = GridVector::zero(3).unwrap();
        assert_eq!(
            xor_add(&a, &b),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn products() {
        let v = product_vector(&IndexSet::empty(4).unwrap(), &set(4, &[1, 2])).unwrap();
        assert!(v.is_zero());
        let full = product_vector(&set(4, &[1, 2, 3, 4]), &set(4, &[1, 2, 3, 4])).unwrap();
        assert_eq!(full.popcount(), 16);
        let r = product_vector(&set(4, &[1]), &set(4, &[2, 3])).unwrap();
        assert_eq!(r.cells().collect::<Vec<_>>(), vec![(1, 2), (1, 3)]);
    }

    #[test]
    fn products_cross_word_boundaries() {
        // n = 9: rows straddle the 64-bit boundary.
        let g1 = set(9, &[1, 7, 8, 9]);
        let g2 = set(9, &[2, 5, 9]);
        let v = product_vector(&g1, &g2).unwrap();
        assert_eq!(v.popcount(), 12);
        for x in 1..=9 {
            for y in 1..=9 {
                assert_eq!(v.get(x, y), g1.contains(x) && g2.contains(y));
            }
        }
        assert_eq!(classify_shape(&v), Shape::Rect(g1, g2));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_shape(&GridVector::zero(3).unwrap()), Shape::Zero);
        let diag = GridVector::from_cells(2, [(1, 1), (2, 2)]).unwrap();
        assert_eq!(classify_shape(&diag), Shape::Other);
        let r = GridVector::from_cells(4, [(1, 2), (1, 3)]).unwrap();
        assert_eq!(classify_shape(&r), Shape::Rect(set(4, &[1]), set(4, &[2, 3])));
        let sq = square_vector(&set(5, &[2, 4]));
        assert_eq!(classify_shape(&sq), Shape::Square(set(5, &[2, 4])));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_grid("00\n00\n").unwrap(), GridVector::zero(2).unwrap());
        assert_eq!(
            parse_grid("10\n00\n").unwrap(),
            GridVector::from_cells(2, [(1, 1)]).unwrap()
        );
        let t = "0110\n1000\n0001\n1111\n";
        assert_eq!(format_grid(&parse_grid(t).unwrap()), t);
    }

    #[test]
    fn parse_errors_name_location() {
        assert!(matches!(parse_grid(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_grid("01\n0x\n"),
            Err(Error::Parse { line: 2, column: 2, .. })
        ));
        assert!(matches!(
            parse_grid("01\n011\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_grid("01\n0\n"), Err(Error::Parse { line: 2, column: 2, .. })));
    }

    #[test]
    fn index_round_trip_and_order() {
        let v = GridVector::from_index(3, 0b101_000_011).unwrap();
        assert_eq!(v.index(), Some(0b101_000_011));
        assert!(v.get(1, 1) && v.get(1, 2) && v.get(3, 1) && v.get(3, 3));
        let w = GridVector::from_index(3, 0b101_000_100).unwrap();
        assert!(v < w);
    }

    #[test]
    fn hex_is_fixed_width() {
        let v = GridVector::from_cells(3, [(3, 3)]).unwrap();
        assert_eq!(v.to_hex(), "100");
        assert_eq!(GridVector::zero(4).unwrap().to_hex(), "0000");
    }

    #[test]
    fn subsets_walk() {
        let g = set(5, &[1, 3, 4]);
        let subs: Vec<_> = g.subsets().map(|s| s.mask()).collect();
        assert_eq!(subs, vec![0, 1, 4, 5, 8, 9, 12, 13]);
    }
}
