//! Explicit subsets of {0,1}^{n²} and the recipes that build them.

use std::collections::HashSet;
use std::path::PathBuf;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridVector;
use crate::scalar::Scalar;
use crate::subspace::{parse_basis, spiral_basis};

/// Up to this many cells the membership index is a bit table over the universe.
pub const TABLE_MAX_CELLS: usize = 25;

/// Refuse to materialize sets larger than this.
pub const MATERIALIZE_LIMIT: u64 = 1 << 22;

#[derive(Clone, Debug)]
enum Membership {
    Table(Vec<u64>),
    Hash(HashSet<GridVector>),
}

/// A set of grid vectors with exact membership. Members are kept sorted in
/// canonical order and deduplicated.
#[derive(Clone, Debug)]
pub struct PointSet {
    n: usize,
    members: Vec<GridVector>,
    index: Membership,
}

impl PointSet {
    pub fn new<I: IntoIterator<Item = GridVector>>(n: usize, members: I) -> Result<Self> {
        GridVector::zero(n)?;
        let mut members: Vec<GridVector> = members.into_iter().collect();
        if let Some(bad) = members.iter().find(|v| v.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.n(),
            });
        }
        members.sort_unstable();
        members.dedup();
        let index = if n * n <= TABLE_MAX_CELLS {
            let mut table = vec![0u64; (1usize << (n * n)).div_ceil(64)];
            for m in &members {
                let i = m.index().unwrap() as usize;
                table[i / 64] |= 1 << (i % 64);
            }
            Membership::Table(table)
        } else {
            Membership::Hash(members.iter().cloned().collect())
        };
        Ok(PointSet { n, members, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in canonical order.
    pub fn members(&self) -> &[GridVector] {
        &self.members
    }

    pub fn contains(&self, v: &GridVector) -> bool {
        if v.n() != self.n {
            return false;
        }
        match &self.index {
            Membership::Table(t) => {
                let i = v.index().unwrap() as usize;
                t[i / 64] >> (i % 64) & 1 == 1
            }
            Membership::Hash(h) => h.contains(v),
        }
    }

    /// `|S| / 2^{n²}`. Exact for `n² ≤ 127`; beyond that the ratio is
    /// formed in `f64` and the integer part of `|S|` is all that matters.
    pub fn density<T: Scalar>(&self) -> T {
        let cells = self.n * self.n;
        if cells <= 127 {
            T::from_ratio(self.len() as u128, 1u128 << cells)
        } else {
            let scaled = self.len() as f64 / 2f64.powi(cells as i32 - 100);
            T::from_ratio(scaled as u128, 1u128 << 100)
        }
    }
}

/// A reproducible recipe for a point set. Certificates carry one so that
/// verification can rebuild the searched set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSource {
    Full { n: usize },
    Spiral { n: usize },
    EvenWeight { n: usize },
    OddWeight { n: usize },
    Random { n: usize, size: u64, seed: u64 },
    File { path: PathBuf },
}

impl SetSource {
    pub fn build(&self) -> Result<PointSet> {
        match *self {
            SetSource::Full { n } => {
                let total = universe_size(n)?;
                PointSet::new(n, (0..total).map(|i| GridVector::from_index(n, i).unwrap()))
            }
            SetSource::Spiral { n } => {
                let h = spiral_basis(n)?;
                guard(n, 1u64 << h.rank().min(63))?;
                PointSet::new(n, h.span()?)
            }
            SetSource::EvenWeight { n } | SetSource::OddWeight { n } => {
                let total = universe_size(n)?;
                guard(n, total / 2)?;
                let want = u32::from(matches!(self, SetSource::OddWeight { .. }));
                PointSet::new(
                    n,
                    (0..total)
                        .filter(|i| i.count_ones() % 2 == want)
                        .map(|i| GridVector::from_index(n, i).unwrap()),
                )
            }
            SetSource::Random { n, size, seed } => random_set(n, size, seed),
            SetSource::File { ref path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))
                })?;
                let members = parse_basis(&text)?;
                let n = members
                    .first()
                    .map(GridVector::n)
                    .ok_or_else(|| Error::InvalidArgument(format!("{} holds no grids", path.display())))?;
                PointSet::new(n, members)
            }
        }
    }
}

fn guard(n: usize, size: u64) -> Result<()> {
    if size > MATERIALIZE_LIMIT {
        return Err(Error::UnsupportedSize {
            n,
            reason: format!("set of {size} elements exceeds the {MATERIALIZE_LIMIT} limit"),
        });
    }
    Ok(())
}

fn universe_size(n: usize) -> Result<u64> {
    GridVector::zero(n)?;
    if n * n > TABLE_MAX_CELLS {
        return Err(Error::UnsupportedSize {
            n,
            reason: "the full universe can only be listed for n ≤ 5".into(),
        });
    }
    let total = 1u64 << (n * n);
    guard(n, total)?;
    Ok(total)
}

/// `size` distinct uniformly random vectors, fixed by `seed` (ChaCha8).
pub fn random_set(n: usize, size: u64, seed: u64) -> Result<PointSet> {
    guard(n, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = n * n;
    GridVector::zero(n)?;
    if cells <= TABLE_MAX_CELLS {
        let total = 1usize << cells;
        if size as usize > total {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {size} distinct vectors from a universe of {total}"
            )));
        }
        let picks = index::sample(&mut rng, total, size as usize);
        PointSet::new(n, picks.into_iter().map(|i| GridVector::from_index(n, i as u64).unwrap()))
    } else {
        let mut seen = HashSet::with_capacity(size as usize);
        while (seen.len() as u64) < size {
            seen.insert(random_vector(n, &mut rng));
        }
        PointSet::new(n, seen)
    }
}

pub(crate) fn random_vector<R: Rng>(n: usize, rng: &mut R) -> GridVector {
    let mut v = GridVector::zero(n).expect("valid side");
    for x in 1..=n {
        for y in 1..=n {
            if rng.gen::<bool>() {
                v.flip(x, y);
            }
        }
    }
    v
}
