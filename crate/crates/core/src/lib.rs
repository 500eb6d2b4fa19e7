//! Square and rectangle differences between words of `{0,1}^{n×n}`, the
//! setting of the quadratic density Hales–Jewett problem.
//!
//! Words of `{0,1}^{n²}` are [`GridVector`]s, and their differences are
//! classified as squares `γ×γ`, rectangles `γ₁×γ₂`, or neither. The crate
//! provides:
//!
//! * [`subspace`]: GF(2) elimination, the index-4 "spiral" subspace whose
//!   square members all have `|γ| ≡ 0 (mod 4)`, and Gray-code span walks;
//! * [`search`]: the slab pigeonhole for rectangular difference pairs,
//!   square-pair and combinatorial-line search, and checkable certificates;
//! * [`identities`]: cancellation of square families over power sets and
//!   representation counts of pairwise sums;
//! * [`mdqhj`]: slice decompositions, good labels and product composition
//!   of square-wildcard combinatorial subspaces over `[k]^{N²}`;
//! * [`extremal`]: exact and greedy independent sets of the Cayley graph
//!   whose edges are forbidden square differences.
//!
//! Densities and thresholds are generic over [`Scalar`]; [`Density`] and
//! [`Rational`] are the two concrete choices used throughout.

pub mod error;
pub mod extremal;
pub mod grid;
pub mod identities;
pub mod mdqhj;
pub mod pointset;
pub mod scalar;
pub mod search;
pub mod subspace;

pub use error::{Error, Result};
pub use grid::{classify_shape, format_grid, parse_grid, product_vector, square_vector, xor_add, GridVector, IndexSet, Shape, ShapeKind};
pub use pointset::{PointSet, SetSource};
pub use scalar::Scalar;
pub use search::{find_line, find_rect_pair, find_square_pairs, verify_certificate, Certificate, CertificateKind};
pub use subspace::{even_weight_membership, parity_membership, random_subspace, row_reduce, span_enumerate, spiral_basis, Basis, SubspaceHandle};

/// Floating-point density.
pub type Density = f64;

/// Exact density, for threshold comparisons that must not round.
pub type Rational = num_rational::Ratio<i128>;
