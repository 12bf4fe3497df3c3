//! Correlated Bernoulli graph pairs: the alignment-strength family of
//! estimators, balancing over disagreement classes, exact moment oracles,
//! and the Kronecker-product machinery behind completeness and unbiasedness.

pub mod balance;
pub mod error;
pub mod experiment;
pub mod linsys;
pub mod model;
pub mod mt;
pub mod numeric;
pub mod oracle;
pub mod statistic;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{cell_probs, point_probability, sample_pair, EdgeCellProbs, GraphPair, ModelParams};
pub use oracle::{exact_moments, AlignmentReport, ExactMoments};
pub use statistic::{Builtin, Statistic};
pub use stats::{DisagreementVector, Ternary};
