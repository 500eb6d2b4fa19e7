//! GF(2) linear algebra over grid vectors.
//!
//! [`Basis`] keeps a fully reduced echelon form so that membership is one
//! pass of XORs. [`spiral_basis`] builds the `n² − 2` dimensional subspace
//! cut out by two parity functionals: the diagonal count and the strictly
//! upper-triangular count must both be even.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{format_grid, parse_grid, GridVector};
use crate::pointset::random_vector;

/// Largest rank accepted by [`SpanIter`].
pub const SPAN_RANK_LIMIT: usize = 30;

/// Echelon form of a list of grid vectors.
#[derive(Clone, Debug)]
pub struct Basis {
    n: usize,
    elements: Vec<GridVector>,
    // Each reduced row owns its pivot bit; no other row has it set.
    reduced: Vec<GridVector>,
    pivots: Vec<usize>,
}

fn lowest_bit(v: &GridVector) -> Option<usize> {
    v.words()
        .iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn has_bit(v: &GridVector, bit: usize) -> bool {
    v.words()[bit / 64] >> (bit % 64) & 1 == 1
}

/// Gaussian elimination over GF(2).
pub fn row_reduce(elements: &[GridVector]) -> Result<Basis> {
    let first = elements
        .first()
        .ok_or_else(|| Error::InvalidArgument("row_reduce needs at least one vector".into()))?;
    let mut basis = Basis::empty(first.n())?;
    for e in elements {
        basis.push(e.clone())?;
    }
    Ok(basis)
}

impl Basis {
    pub fn empty(n: usize) -> Result<Self> {
        GridVector::zero(n)?;
        Ok(Basis {
            n,
            elements: Vec::new(),
            reduced: Vec::new(),
            pivots: Vec::new(),
        })
    }

    /// Appends `v`; returns whether it was independent of the previous elements.
    pub fn push(&mut self, v: GridVector) -> Result<bool> {
        if v.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.n(),
            });
        }
        let r = self.residual(&v);
        self.elements.push(v);
        let Some(pivot) = lowest_bit(&r) else {
            return Ok(false);
        };
        for row in &mut self.reduced {
            if has_bit(row, pivot) {
                *row ^= &r;
            }
        }
        self.reduced.push(r);
        self.pivots.push(pivot);
        Ok(true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[GridVector] {
        &self.elements
    }

    pub fn reduced(&self) -> &[GridVector] {
        &self.reduced
    }

    /// Pivot positions as bit indices `(x-1)*n + (y-1)`.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn rank(&self) -> usize {
        self.reduced.len()
    }

    pub fn is_independent(&self) -> bool {
        self.rank() == self.elements.len()
    }

    /// What is left of `v` after eliminating every pivot.
    pub fn residual(&self, v: &GridVector) -> GridVector {
        let mut r = v.clone();
        for (row, &p) in self.reduced.iter().zip(&self.pivots) {
            if has_bit(&r, p) {
                r ^= row;
            }
        }
        r
    }

    pub fn contains(&self, v: &GridVector) -> bool {
        v.n() == self.n && self.residual(v).is_zero()
    }

    /// Gray-code walk over the span of the reduced rows.
    pub fn span(&self) -> Result<SpanIter> {
        SpanIter::new(self.n, self.reduced.clone())
    }
}

/// How a [`SubspaceHandle`] answers membership queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipMode {
    RowReduce,
    ParityKernel,
}

/// A subspace with a membership oracle. In `ParityKernel` mode the subspace
/// is the common kernel of the listed cell-set functionals.
#[derive(Clone, Debug)]
pub struct SubspaceHandle {
    basis: Basis,
    mode: MembershipMode,
    functionals: Vec<GridVector>,
}

impl SubspaceHandle {
    pub fn from_basis(basis: Basis) -> Self {
        SubspaceHandle {
            basis,
            mode: MembershipMode::RowReduce,
            functionals: Vec::new(),
        }
    }

    /// Attaches parity functionals after checking that their kernel equals
    /// the span: every basis vector is annihilated, the functionals are
    /// independent, and `rank + #functionals = n²`.
    pub fn with_parity_kernel(basis: Basis, functionals: Vec<GridVector>) -> Result<Self> {
        let cells = basis.n() * basis.n();
        if functionals.is_empty() {
            return Err(Error::Construction("no functionals given".into()));
        }
        for (i, e) in basis.elements().iter().enumerate() {
            if let Some(f) = functionals.iter().find(|f| parity(e, f)) {
                return Err(Error::Construction(format!(
                    "basis element {i} has odd weight on functional\n{f}"
                )));
            }
        }
        let fbasis = row_reduce(&functionals)?;
        if !fbasis.is_independent() {
            return Err(Error::Construction("parity functionals are dependent".into()));
        }
        if basis.rank() + functionals.len() != cells {
            return Err(Error::Construction(format!(
                "rank {} + {} functionals != {} cells",
                basis.rank(),
                functionals.len(),
                cells
            )));
        }
        Ok(SubspaceHandle {
            basis,
            mode: MembershipMode::ParityKernel,
            functionals,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn mode(&self) -> MembershipMode {
        self.mode
    }

    pub fn functionals(&self) -> &[GridVector] {
        &self.functionals
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn contains(&self, v: &GridVector) -> Result<bool> {
        if v.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: v.n(),
            });
        }
        Ok(match self.mode {
            MembershipMode::RowReduce => self.basis.contains(v),
            MembershipMode::ParityKernel => self.functionals.iter().all(|f| !parity(v, f)),
        })
    }

    pub fn contains_by_row_reduce(&self, v: &GridVector) -> bool {
        self.basis.contains(v)
    }

    pub fn span(&self) -> Result<SpanIter> {
        self.basis.span()
    }

    /// `{"n", "rank", "membership_mode", "basis": [grid text], "functionals": [grid text]}`.
    pub fn to_json(&self) -> String {
        let doc = HandleDoc {
            n: self.n(),
            rank: self.rank(),
            membership_mode: self.mode,
            basis: self.basis.elements().iter().map(format_grid).collect(),
            functionals: self.functionals.iter().map(format_grid).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("handle serializes")
    }

    /// Rebuilds the handle, re-running the parity-kernel validation when
    /// the header asks for it.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HandleDoc =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        let grids = |v: &[String]| v.iter().map(|t| parse_grid(t)).collect::<Result<Vec<_>>>();
        let mut basis = Basis::empty(doc.n)?;
        for e in grids(&doc.basis)? {
            basis.push(e)?;
        }
        if basis.rank() != doc.rank {
            return Err(Error::Construction(format!("header says rank {}, basis has {}", doc.rank, basis.rank())));
        }
        match doc.membership_mode {
            MembershipMode::RowReduce => Ok(SubspaceHandle::from_basis(basis)),
            MembershipMode::ParityKernel => SubspaceHandle::with_parity_kernel(basis, grids(&doc.functionals)?),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HandleDoc {
    n: usize,
    rank: usize,
    membership_mode: MembershipMode,
    basis: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    functionals: Vec<String>,
}

/// Odd number of common cells.
fn parity(v: &GridVector, f: &GridVector) -> bool {
    (v & f).popcount() % 2 == 1
}

/// Diagonal cells `(t, t)`.
pub fn diagonal_functional(n: usize) -> Result<GridVector> {
    GridVector::from_cells(n, (1..=n).map(|t| (t, t)))
}

/// Strictly upper-triangular cells `(x, y)` with `x < y`.
pub fn upper_functional(n: usize) -> Result<GridVector> {
    GridVector::from_cells(
        n,
        (1..=n).flat_map(|x| (x + 1..=n).map(move |y| (x, y))),
    )
}

/// The spiralling basis of `n² − 2` vectors:
///
/// * singletons on the strictly lower triangle;
/// * diagonal dominoes `{(t,t), (t+1,t+1)}`;
/// * upper-triangle steps `{(x,y), (x+1,y+1)}`, which chain each upper
///   diagonal together;
/// * boundary pairs joining consecutive upper diagonals, alternating between
///   column `n` (`{(x,n), (x+1,n)}` for `x = n−2, n−4, …`) and row 1
///   (`{(1,y), (1,y+1)}` for `y = 3, 5, …`).
///
/// Every element has even diagonal and even upper-triangle weight; the
/// construction fails loudly if the rank is not `n² − 2`.
pub fn spiral_basis(n: usize) -> Result<SubspaceHandle> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "spiral basis needs n >= 2, got {n}"
        )));
    }
    let mut elements = Vec::with_capacity(n * n - 2);
    let cells = |c: &[(usize, usize)]| GridVector::from_cells(n, c.iter().copied());

    for x in 1..=n {
        for y in 1..x {
            elements.push(cells(&[(x, y)])?);
        }
    }
    for t in 1..n {
        elements.push(cells(&[(t, t), (t + 1, t + 1)])?);
    }
    for x in 1..n {
        for y in x + 1..n {
            elements.push(cells(&[(x, y), (x + 1, y + 1)])?);
        }
    }
    // Upper diagonal j (cells with y - x = j) ends at (n-j, n) and starts at
    // (1, 1+j). Odd j joins j+1 along column n, even j along row 1.
    for j in 1..=n.saturating_sub(2) {
        if j % 2 == 1 {
            let x = n - j - 1;
            elements.push(cells(&[(x, n), (x + 1, n)])?);
        } else {
            let y = j + 1;
            elements.push(cells(&[(1, y), (1, y + 1)])?);
        }
    }

    if elements.len() != n * n - 2 {
        return Err(Error::Construction(format!(
            "spiral basis has {} elements, expected {}",
            elements.len(),
            n * n - 2
        )));
    }
    let basis = row_reduce(&elements)?;
    if !basis.is_independent() {
        return Err(Error::Construction(format!(
            "spiral basis has rank {} < {}",
            basis.rank(),
            elements.len()
        )));
    }
    SubspaceHandle::with_parity_kernel(basis, vec![diagonal_functional(n)?, upper_functional(n)?])
}

/// Even diagonal weight and even strictly-upper weight.
pub fn parity_membership(handle: &SubspaceHandle, v: &GridVector) -> Result<bool> {
    handle.contains(v)
}

/// Even total weight: the index-2 subspace of F₂^{n²}.
pub fn even_weight_membership(v: &GridVector) -> bool {
    v.popcount().is_multiple_of(2)
}

/// Gray-code enumeration of a span: `2^rank` elements, starting at zero,
/// each step XORing one generator.
#[derive(Clone, Debug)]
pub struct SpanIter {
    generators: Vec<GridVector>,
    current: GridVector,
    step: u64,
    total: u64,
}

impl SpanIter {
    /// `generators` must be independent for the walk to visit each element once.
    pub fn new(n: usize, generators: Vec<GridVector>) -> Result<Self> {
        if generators.len() > SPAN_RANK_LIMIT {
            return Err(Error::RankLimit {
                rank: generators.len(),
                limit: SPAN_RANK_LIMIT,
            });
        }
        let total = 1u64 << generators.len();
        Ok(SpanIter {
            generators,
            current: GridVector::zero(n)?,
            step: 0,
            total,
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

impl Iterator for SpanIter {
    type Item = GridVector;

    fn next(&mut self) -> Option<GridVector> {
        if self.step >= self.total {
            return None;
        }
        if self.step > 0 {
            let flip = self.step.trailing_zeros() as usize;
            self.current ^= &self.generators[flip];
        }
        self.step += 1;
        Some(self.current.clone())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.step) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SpanIter {}

/// Span enumeration for a handle.
pub fn span_enumerate(handle: &SubspaceHandle) -> Result<SpanIter> {
    handle.span()
}

/// `dim` independent vectors drawn uniformly (rejecting dependent draws),
/// fixed by `seed` (ChaCha8).
pub fn random_subspace(n: usize, dim: usize, seed: u64) -> Result<Vec<GridVector>> {
    GridVector::zero(n)?;
    if dim > n * n {
        return Err(Error::InvalidArgument(format!("dimension {dim} exceeds n² = {}", n * n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = Basis::empty(n)?;
    let mut out = Vec::with_capacity(dim);
    while out.len() < dim {
        let v = random_vector(n, &mut rng);
        if basis.push(v.clone())? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Grid-text blocks separated by blank lines.
pub fn format_basis(elements: &[GridVector]) -> String {
    elements
        .iter()
        .map(format_grid)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inverse of [`format_basis`]. Also reads any file of blank-line separated grids.
pub fn parse_basis(text: &str) -> Result<Vec<GridVector>> {
    let mut out = Vec::new();
    let mut block = String::new();
    let mut block_start = 1;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !block.is_empty() {
                out.push(parse_block(&block, block_start)?);
                block.clear();
            }
            block_start = i + 2;
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    if !block.is_empty() {
        out.push(parse_block(&block, block_start)?);
    }
    if let Some(first) = out.first() {
        let n = first.n();
        if let Some(bad) = out.iter().find(|v| v.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.n(),
            });
        }
    }
    Ok(out)
}

fn parse_block(block: &str, first_line: usize) -> Result<GridVector> {
    parse_grid(block).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line: line + first_line - 1,
            column,
            message,
        },
        other => other,
    })
}
