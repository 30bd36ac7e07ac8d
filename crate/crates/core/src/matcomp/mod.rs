//! Matrix completion with a nuclear-norm constraint.
//!
//! Users and items form the two sides of the block embedding; the solver
//! runs on the trace-`t` spectahedron of order `m + n` but never forms the
//! matrix. Iterates live in a [`PredictionStore`] holding only the entries
//! that are trained on or evaluated, and gradients are bipartite operators
//! with one nonzero per training rating. Each step costs a few sparse
//! matrix-vector products plus a pass over the stored entries.
//!
//! A related heuristic is Funk's incremental SVD, which updates factors by
//! stochastic steps on single ratings; it is not implemented here.

mod complete;
mod data;
mod store;

pub use complete::{
    complete, complete_preset, test_predictions, zero_baseline, CompletionConfig, CompletionOutcome, CompletionStart,
    Preset, StepMetrics,
};
pub use data::{
    load_movielens, metrics, normalize_means, split_train_test, DataFormat, Normalizer, Rating, RatingDataset,
    SplitPolicy,
};
pub use store::{closed_form_alpha, closed_form_alpha_raw, PredictionStore, SquaredLoss};
