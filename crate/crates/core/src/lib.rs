//! Place embeddings learned from taxi trips.
//!
//! Trips are snapped to places, turned into (center, context) pairs by the
//! Trip or OD context model, and trained with skip-gram negative sampling.
//! Spatial-context baselines and the evaluation metrics live alongside.

pub mod baselines;
pub mod cli;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod pairs;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod trainer;
