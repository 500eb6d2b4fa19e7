//! Largest subsets of {0,1}^{n²} with no two members differing by a
//! forbidden shape, i.e. independent sets of the Cayley graph of F₂^{n²}
//! generated by the forbidden differences.
//!
//! The Cayley graph splits into isomorphic components, the cosets of the
//! span of the connection set. The exact solver handles the component of 0
//! only, with 0 forced into the set (each component is vertex-transitive),
//! and translates the optimum to every coset.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{product_vector, square_vector, GridVector, IndexSet};
use crate::pointset::PointSet;

/// Materialized adjacency up to this many cells (512 vertices).
pub const MATERIALIZE_MAX_CELLS: usize = 9;
/// Oracle adjacency (and greedy search) up to this many cells.
pub const ORACLE_MAX_CELLS: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeFamily {
    SquareShapes,
    RectShapes,
    Custom,
}

/// Forbidden differences, kept sorted.
#[derive(Clone, Debug)]
pub struct CayleySpec {
    n: usize,
    family: ShapeFamily,
    connection: Vec<GridVector>,
}

impl CayleySpec {
    /// `{γ×γ : ∅ ≠ γ ⊆ [n]}`, `2ⁿ − 1` vectors.
    pub fn square_shapes(n: usize) -> Result<Self> {
        check_cells(n)?;
        let mut connection: Vec<GridVector> = IndexSet::nonempty_subsets(n).map(|g| square_vector(&g)).collect();
        connection.sort();
        Ok(CayleySpec { n, family: ShapeFamily::SquareShapes, connection })
    }

    /// `{γ₁×γ₂ : γ₁, γ₂ nonempty}`, squares included.
    pub fn rect_shapes(n: usize) -> Result<Self> {
        check_cells(n)?;
        let mut connection = Vec::new();
        for a in IndexSet::nonempty_subsets(n) {
            for b in IndexSet::nonempty_subsets(n) {
                connection.push(product_vector(&a, &b)?);
            }
        }
        connection.sort();
        connection.dedup();
        Ok(CayleySpec { n, family: ShapeFamily::RectShapes, connection })
    }

    pub fn custom(n: usize, mut connection: Vec<GridVector>) -> Result<Self> {
        check_cells(n)?;
        if let Some(bad) = connection.iter().find(|v| v.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.n() });
        }
        if connection.iter().any(GridVector::is_zero) {
            return Err(Error::InvalidArgument("the zero vector cannot be a connection".into()));
        }
        connection.sort();
        connection.dedup();
        Ok(CayleySpec { n, family: ShapeFamily::Custom, connection })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> ShapeFamily {
        self.family
    }

    pub fn connection(&self) -> &[GridVector] {
        &self.connection
    }

    fn masks(&self) -> Vec<u64> {
        self.connection.iter().map(|v| v.index().unwrap()).collect()
    }
}

fn check_cells(n: usize) -> Result<()> {
    if n == 0 || n * n > ORACLE_MAX_CELLS {
        return Err(Error::UnsupportedSize {
            n,
            reason: format!("Cayley graphs are limited to n² ≤ {ORACLE_MAX_CELLS}"),
        });
    }
    Ok(())
}

/// Dense bitset over a small vertex range.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn and_not(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }
}

/// Cayley graph on all `2^{n²}` vectors; `u ~ v` iff `u ⊕ v` is a connection.
#[derive(Clone, Debug)]
pub struct CayleyGraph {
    n: usize,
    masks: Vec<u64>,
    adjacency: Option<Vec<Bits>>,
}

pub fn build_cayley(spec: &CayleySpec) -> Result<CayleyGraph> {
    let masks = spec.masks();
    let cells = spec.n * spec.n;
    let adjacency = (cells <= MATERIALIZE_MAX_CELLS).then(|| {
        let total = 1usize << cells;
        (0..total)
            .map(|u| {
                let mut row = Bits::empty(total);
                for &c in &masks {
                    row.insert(u ^ c as usize);
                }
                row
            })
            .collect()
    });
    Ok(CayleyGraph { n: spec.n, masks, adjacency })
}

impl CayleyGraph {
    pub fn vertex_count(&self) -> u64 {
        1 << (self.n * self.n)
    }

    pub fn degree(&self) -> usize {
        self.masks.len()
    }

    pub fn is_materialized(&self) -> bool {
        self.adjacency.is_some()
    }

    pub fn adjacent(&self, u: u64, v: u64) -> bool {
        match &self.adjacency {
            Some(adj) => adj[u as usize].contains(v as usize),
            None => self.masks.contains(&(u ^ v)),
        }
    }

    pub fn neighbors(&self, u: u64) -> impl Iterator<Item = u64> + '_ {
        self.masks.iter().map(move |&c| u ^ c)
    }
}

/// Best avoiding set found, with its provenance.
#[derive(Clone, Debug)]
pub struct ExtremalResult {
    pub n: usize,
    pub family: ShapeFamily,
    pub best_size: u64,
    pub witness: PointSet,
    /// A matching upper bound was certified by exhausting the search.
    pub exact: bool,
    pub bound_method: String,
    /// Branch-and-bound nodes (exact) or vertices scanned (greedy).
    pub trace_len: u64,
}

impl ExtremalResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "family": self.family,
            "best_size": self.best_size,
            "exact": self.exact,
            "bound_method": self.bound_method,
            "trace_len": self.trace_len,
            "witness": self.witness.members().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        })
    }
}

/// No two members of `witness` differ by a connection vector. Each member
/// is translated by every connection vector and probed, which covers every
/// pair in `|witness|·|connection|` lookups.
pub fn verify_avoiding(spec: &CayleySpec, witness: &PointSet) -> bool {
    if witness.n() != spec.n {
        return false;
    }
    witness
        .members()
        .iter()
        .all(|a| spec.connection.iter().all(|c| !witness.contains(&(a ^ c))))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOptions {
    /// Give up (with `exact = false`) after this long.
    pub time_limit: Option<Duration>,
}

const EXACT_MAX_SIDE: usize = 3;

/// Maximum avoiding set by branch and bound (`n ≤ 3`).
pub fn max_avoiding_exact(spec: &CayleySpec, opts: ExactOptions) -> Result<ExtremalResult> {
    if spec.n > EXACT_MAX_SIDE {
        return Err(Error::UnsupportedSize {
            n: spec.n,
            reason: format!("exact search is limited to n ≤ {EXACT_MAX_SIDE}"),
        });
    }
    let graph = build_cayley(spec)?;
    let total = graph.vertex_count();

    // Component of 0: the span of the connection set.
    let mut comp = vec![0u64];
    let mut seen = vec![false; total as usize];
    seen[0] = true;
    let mut queue = VecDeque::from([0u64]);
    while let Some(u) = queue.pop_front() {
        for v in graph.neighbors(u) {
            if !seen[v as usize] {
                seen[v as usize] = true;
                comp.push(v);
                queue.push_back(v);
            }
        }
    }
    comp.sort_unstable();
    let local = |v: u64| comp.binary_search(&v).unwrap();
    let size = comp.len();
    let adj: Vec<Bits> = comp
        .iter()
        .map(|&u| {
            let mut row = Bits::empty(size);
            for v in graph.neighbors(u) {
                row.insert(local(v));
            }
            row
        })
        .collect();

    let deadline = opts.time_limit.map(|d| Instant::now() + d);
    let mut solver = Solver {
        adj: &adj,
        best: greedy_local(&adj),
        nodes: 0,
        deadline,
        timed_out: false,
    };
    // Root 0 (local index 0) is forced in.
    let mut cand = Bits::empty(size);
    for i in 1..size {
        cand.insert(i);
    }
    let cand = cand.and_not(&adj[0]);
    let mut current = vec![0usize];
    if current.len() > solver.best.len() {
        solver.best = current.clone();
    }
    solver.expand(&mut current, cand);
    let exact = !solver.timed_out;

    // Translate to every coset.
    let mut covered = vec![false; total as usize];
    let mut members = Vec::new();
    for rep in 0..total {
        if covered[rep as usize] {
            continue;
        }
        for &c in &comp {
            covered[(rep ^ c) as usize] = true;
        }
        members.extend(solver.best.iter().map(|&i| rep ^ comp[i]));
    }
    let witness = PointSet::new(
        spec.n,
        members.into_iter().map(|i| GridVector::from_index(spec.n, i).unwrap()),
    )?;
    if !verify_avoiding(spec, &witness) {
        return Err(Error::Construction("exact witness failed re-verification".into()));
    }
    Ok(ExtremalResult {
        n: spec.n,
        family: spec.family,
        best_size: witness.len() as u64,
        witness,
        exact,
        bound_method: format!(
            "branch and bound with greedy clique-cover bound on the component of 0 ({size} vertices, root fixed), translated to {} cosets",
            total as usize / size
        ),
        trace_len: solver.nodes,
    })
}

struct Solver<'a> {
    adj: &'a [Bits],
    best: Vec<usize>,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Solver<'_> {
    /// Greedy cover of `cand` by cliques of the graph. Returns vertices in
    /// cover order with the running clique count; an independent set meets
    /// each clique at most once.
    fn cover(&self, cand: &Bits) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::new();
        let mut bounds = Vec::new();
        let mut left = cand.clone();
        let mut cliques = 0;
        while !left.is_empty() {
            cliques += 1;
            let mut q = left.clone();
            while let Some(v) = q.first() {
                left.remove(v);
                q.remove(v);
                q = q.and(&self.adj[v]);
                order.push(v);
                bounds.push(cliques);
            }
        }
        (order, bounds)
    }

    fn expand(&mut self, current: &mut Vec<usize>, mut cand: Bits) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() > d {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return;
        }
        let (order, bounds) = self.cover(&cand);
        for idx in (0..order.len()).rev() {
            if current.len() + bounds[idx] <= self.best.len() {
                return;
            }
            let v = order[idx];
            current.push(v);
            let mut next = cand.and_not(&self.adj[v]);
            next.remove(v);
            if next.is_empty() {
                if current.len() > self.best.len() {
                    self.best = current.clone();
                }
            } else {
                self.expand(current, next);
            }
            current.pop();
            cand.remove(v);
            if self.timed_out {
                return;
            }
        }
    }
}

fn greedy_local(adj: &[Bits]) -> Vec<usize> {
    let mut blocked = Bits::empty(adj.len());
    let mut chosen = Vec::new();
    for (v, row) in adj.iter().enumerate() {
        if !blocked.contains(v) {
            chosen.push(v);
            blocked.insert(v);
            for (w, word) in row.0.iter().enumerate() {
                blocked.0[w] |= word;
            }
        }
    }
    chosen
}

/// Randomized greedy: scan all vertices in a seeded random order and keep
/// every vertex with no chosen neighbour. `warm` (which must itself avoid
/// the connection set) is placed first. The result is a maximal
/// independent set, hence of size at least `2^{n²} / (|connection| + 1)`.
pub fn avoiding_greedy(spec: &CayleySpec, seed: u64, warm: Option<&PointSet>) -> Result<ExtremalResult> {
    let graph = build_cayley(spec)?;
    let total = graph.vertex_count() as usize;
    let mut chosen = Bits::empty(total);
    let mut blocked = Bits::empty(total);
    let take = |v: u64, chosen: &mut Bits, blocked: &mut Bits| {
        chosen.insert(v as usize);
        blocked.insert(v as usize);
        for w in graph.neighbors(v) {
            blocked.insert(w as usize);
        }
    };
    if let Some(w) = warm {
        if w.n() != spec.n {
            return Err(Error::DimensionMismatch { expected: spec.n, found: w.n() });
        }
        if !verify_avoiding(spec, w) {
            return Err(Error::InvalidArgument("warm start set contains a forbidden difference".into()));
        }
        for v in w.members() {
            take(v.index().unwrap(), &mut chosen, &mut blocked);
        }
    }
    let mut order: Vec<u32> = (0..total as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for &v in &order {
        if !blocked.contains(v as usize) {
            take(v as u64, &mut chosen, &mut blocked);
        }
    }
    let witness = PointSet::new(
        spec.n,
        (0..total as u64)
            .filter(|&v| chosen.contains(v as usize))
            .map(|v| GridVector::from_index(spec.n, v).unwrap()),
    )?;
    Ok(ExtremalResult {
        n: spec.n,
        family: spec.family,
        best_size: witness.len() as u64,
        witness,
        exact: false,
        bound_method: format!(
            "randomized greedy (seed {seed}{})",
            if warm.is_some() { ", warm start" } else { "" }
        ),
        trace_len: total as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::SetSource;

    #[test]
    fn cayley_degrees() {
        let g = build_cayley(&CayleySpec::square_shapes(2).unwrap()).unwrap();
        assert_eq!(g.vertex_count(), 16);
        assert_eq!(g.degree(), 3);
        let g = build_cayley(&CayleySpec::square_shapes(3).unwrap()).unwrap();
        assert_eq!(g.vertex_count(), 512);
        assert_eq!(g.degree(), 7);
        assert!(g.is_materialized());
        for u in 0..512 {
            for v in g.neighbors(u) {
                assert!(g.adjacent(v, u));
            }
        }
        assert!(!build_cayley(&CayleySpec::square_shapes(4).unwrap()).unwrap().is_materialized());
    }

    #[test]
    fn n2_connection_is_three_squares() {
        let spec = CayleySpec::square_shapes(2).unwrap();
        let expect = [
            GridVector::from_cells(2, [(1, 1)]).unwrap(),
            GridVector::from_cells(2, [(2, 2)]).unwrap(),
            GridVector::ones(2).unwrap(),
        ];
        for e in &expect {
            assert!(spec.connection().contains(e));
        }
    }

    #[test]
    fn custom_rejects_zero() {
        assert!(CayleySpec::custom(2, vec![GridVector::zero(2).unwrap()]).is_err());
        assert_eq!(CayleySpec::rect_shapes(2).unwrap().connection().len(), 9);
    }

    #[test]
    fn n1_is_one() {
        let r = max_avoiding_exact(&CayleySpec::square_shapes(1).unwrap(), ExactOptions::default()).unwrap();
        assert_eq!(r.best_size, 1);
        assert!(r.exact);
    }

    #[test]
    fn timeout_downgrades() {
        let r = max_avoiding_exact(
            &CayleySpec::square_shapes(3).unwrap(),
            ExactOptions { time_limit: Some(Duration::ZERO) },
        )
        .unwrap();
        assert!(verify_avoiding(&CayleySpec::square_shapes(3).unwrap(), &r.witness));
        // A zero budget may still finish before the first clock check.
        assert!(r.best_size > 0);
    }

    #[test]
    fn greedy_is_deterministic_and_maximal() {
        let spec = CayleySpec::square_shapes(3).unwrap();
        let a = avoiding_greedy(&spec, 9, None).unwrap();
        let b = avoiding_greedy(&spec, 9, None).unwrap();
        assert_eq!(a.witness.members(), b.witness.members());
        assert!(verify_avoiding(&spec, &a.witness));
        assert!(a.best_size * 8 >= 512);
    }

    #[test]
    fn spiral_warm_start_validity() {
        let spec3 = CayleySpec::square_shapes(3).unwrap();
        let span3 = SetSource::Spiral { n: 3 }.build().unwrap();
        assert!(verify_avoiding(&spec3, &span3));
        let r = avoiding_greedy(&spec3, 1, Some(&span3)).unwrap();
        assert!(r.best_size >= 128);

        let spec4 = CayleySpec::square_shapes(4).unwrap();
        let span4 = SetSource::Spiral { n: 4 }.build().unwrap();
        assert!(!verify_avoiding(&spec4, &span4));
        assert!(avoiding_greedy(&spec4, 1, Some(&span4)).is_err());
    }

    #[test]
    fn json_lists_witness() {
        let r = max_avoiding_exact(&CayleySpec::square_shapes(1).unwrap(), ExactOptions::default()).unwrap();
        let v = r.to_json_value();
        assert_eq!(v["best_size"], 1);
        assert_eq!(v["family"], "SquareShapes");
        assert_eq!(v["witness"].as_array().unwrap().len(), 1);
    }
}
