//! Meta-structure discovery for heterogeneous information networks.
//!
//! Candidate structures are grown and pruned by three edit operations,
//! described to language-model agents as nested-clause sentences, scored by
//! a deterministic commuting-matrix evaluator, and evolved by elimination and
//! fitness-proportional reproduction.

pub mod agents;
pub mod evaluator;
pub mod evolution;
pub mod grammar;
pub mod hin;
pub mod metastructure;
pub mod metrics;
pub mod mutations;
pub mod sparse;
pub mod synthetic;
pub mod toy;

pub use evaluator::{EvalError, EvalResult, Evaluator, MetricKind};
pub use hin::{HinGraph, Schema, SplitTag};
pub use metastructure::{CanonicalKey, MetaPath, MetaStructure};
