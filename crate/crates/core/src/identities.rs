//! Cancellation identities for families of squares and representation
//! counts of pairwise sums.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{square_vector, GridVector, IndexSet};
use crate::mdqhj::merge_counts;

/// XOR of `a × a` over all nonempty `a ⊆ γ`.
///
/// Zero for `|γ| ≥ 3`; the two off-diagonal cells of `γ×γ` for `|γ| = 2`;
/// the single diagonal cell for `|γ| = 1`.
pub fn powerset_square_sum(gamma: &IndexSet) -> Result<GridVector> {
    if gamma.is_empty() {
        return Err(Error::InvalidArgument("gamma must be nonempty".into()));
    }
    let mut acc = GridVector::zero(gamma.n())?;
    for a in gamma.subsets().filter(|a| !a.is_empty()) {
        acc ^= &square_vector(&a);
    }
    Ok(acc)
}

/// XOR of `(a ∪ γ₂) × (a ∪ γ₂)` over all `a ⊆ γ₁`, empty set included,
/// with the number of summands (`2^{|γ₁|}`).
pub fn shifted_powerset_sum(gamma1: &IndexSet, gamma2: &IndexSet) -> Result<(GridVector, u64)> {
    if gamma1.n() != gamma2.n() {
        return Err(Error::DimensionMismatch {
            expected: gamma1.n(),
            found: gamma2.n(),
        });
    }
    if !gamma1.is_disjoint(gamma2) {
        return Err(Error::InvalidArgument(format!(
            "{gamma1:?} and {gamma2:?} must be disjoint"
        )));
    }
    let mut acc = GridVector::zero(gamma1.n())?;
    let mut count = 0;
    for a in gamma1.subsets() {
        acc ^= &square_vector(&a.union(gamma2));
        count += 1;
    }
    Ok((acc, count))
}

/// Number of nonempty `a ⊆ γ` containing a fixed `i ∈ γ`, and containing a
/// fixed pair `i ≠ j` (`None` when `|γ| < 2`).
pub fn cell_multiplicities(size: usize) -> Result<(u64, Option<u64>)> {
    if size == 0 || size > 63 {
        return Err(Error::InvalidArgument(format!(
            "|gamma| must lie in 1..=63, got {size}"
        )));
    }
    let diag = 1u64 << (size - 1);
    let off = (size >= 2).then(|| 1u64 << (size - 2));
    Ok((diag, off))
}

/// The residual [`powerset_square_sum`] must produce, predicted from the
/// cell multiplicities: a cell survives iff it is covered an odd number of times.
pub fn predicted_powerset_residual(gamma: &IndexSet) -> Result<GridVector> {
    let (diag, off) = cell_multiplicities(gamma.len())?;
    let mut v = GridVector::zero(gamma.n())?;
    for x in gamma.members() {
        for y in gamma.members() {
            let odd = if x == y {
                diag % 2 == 1
            } else {
                off.is_some_and(|c| c % 2 == 1)
            };
            if odd {
                v.flip(x, y);
            }
        }
    }
    Ok(v)
}

/// `r(γ)` for every pairwise sum of a list of distinct vectors, with the
/// three counting relations evaluated.
#[derive(Clone, Debug, Serialize)]
pub struct RepCountTable {
    /// Number of input vectors.
    pub m: u64,
    #[serde(skip)]
    pub counts: BTreeMap<GridVector, u64>,
    pub sum: u64,
    pub pairs: u64,
    pub max_r: u64,
    pub max_allowed: u64,
    /// `Σ_γ 4·C(r(γ), 2)`.
    pub triple_lhs: u128,
    /// `3·C(M, 3)`.
    pub triple_rhs: u128,
}

impl RepCountTable {
    /// `Σ r(γ) = C(M, 2)`.
    pub fn sum_ok(&self) -> bool {
        self.sum == self.pairs
    }

    /// `r(γ) ≤ ⌊M/2⌋` for all γ.
    pub fn max_ok(&self) -> bool {
        self.max_r <= self.max_allowed
    }

    pub fn triple_ok(&self) -> bool {
        self.triple_lhs <= self.triple_rhs
    }

    pub fn all_ok(&self) -> bool {
        self.sum_ok() && self.max_ok() && self.triple_ok()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.sum_ok() {
            v.push(format!("sum of r = {} != C(M,2) = {}", self.sum, self.pairs));
        }
        if !self.max_ok() {
            v.push(format!("max r = {} > floor(M/2) = {}", self.max_r, self.max_allowed));
        }
        if !self.triple_ok() {
            v.push(format!(
                "sum 4*C(r,2) = {} > 3*C(M,3) = {}",
                self.triple_lhs, self.triple_rhs
            ));
        }
        v
    }

    /// CSV: `gamma,r` per sum (gamma as fixed-width hex of the grid bits),
    /// then a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,r\n");
        for (g, r) in &self.counts {
            out.push_str(&format!("{},{}\n", g.to_hex(), r));
        }
        out.push_str(&format!(
            "summary,m={};sum={};pairs={};max_r={};max_allowed={};triple_lhs={};triple_rhs={};sum_ok={};max_ok={};triple_ok={}\n",
            self.m,
            self.sum,
            self.pairs,
            self.max_r,
            self.max_allowed,
            self.triple_lhs,
            self.triple_rhs,
            self.sum_ok(),
            self.max_ok(),
            self.triple_ok()
        ));
        out
    }
}

fn choose(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Counts, for every sum `γ = aᵢ ⊕ aⱼ` (`i < j`), how many unordered pairs produce it.
pub fn representation_counts(elements: &[GridVector]) -> Result<RepCountTable> {
    if let Some(first) = elements.first() {
        if let Some(bad) = elements.iter().find(|v| v.n() != first.n()) {
            return Err(Error::DimensionMismatch {
                expected: first.n(),
                found: bad.n(),
            });
        }
    }
    let distinct: BTreeSet<&GridVector> = elements.iter().collect();
    if distinct.len() != elements.len() {
        return Err(Error::InvalidArgument("elements must be distinct".into()));
    }
    let counts = (0..elements.len())
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<GridVector, u64>, i| {
            for b in &elements[i + 1..] {
                *acc.entry(&elements[i] ^ b).or_default() += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, merge_counts);
    let m = elements.len() as u64;
    let triple_lhs = counts.values().map(|&r| 4 * choose(r as u128, 2)).sum();
    Ok(RepCountTable {
        m,
        sum: counts.values().sum(),
        pairs: choose(m as u128, 2) as u64,
        max_r: counts.values().copied().max().unwrap_or(0),
        max_allowed: m / 2,
        triple_lhs,
        triple_rhs: 3 * choose(m as u128, 3),
        counts,
    })
}
