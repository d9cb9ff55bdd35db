//! Exact group-ring arithmetic and the combinatorics of three-term zero
//! divisors: cancellation structures, relation extraction, realizability
//! checks and exhaustive small-support scans.

pub mod algebra;
pub mod cancellation;
pub mod exec;
pub mod groups;
pub mod linalg;
pub mod scalars;
pub mod search;
pub mod selftest;
pub(crate) mod text;
pub mod wordeq;

pub use algebra::{AlgebraElement, AlgebraError, SupportTriple};
pub use cancellation::{CancellationStructure, Perm};
pub use groups::{eval_word, FormalWord, GroupElement, GroupSpec};
pub use scalars::{FieldSpec, Scalar};
pub use text::ParseError;
pub use wordeq::{decide, Verdict};
