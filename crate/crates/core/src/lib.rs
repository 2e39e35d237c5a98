//! Retrieval-augmented construction-schedule toolkit.
//!
//! - [`schedule`]: typed schedules, ingestion and validation
//! - [`graph`]: dependency graph and structural analytics
//! - [`sampler`]: first-order / hierarchical / sequential context bundles
//! - [`knowledge`]: term and chunk stores with similarity retrieval
//! - [`prompts`]: rule and task prompt assembly
//! - [`gateway`]: chat-completion access, transcripts and mock backends
//! - [`eval`]: masked evaluation environment, scoring and preference pairs
//! - [`alignment`]: SFT / preference losses, a logistic preference scorer
//!   and context-length statistics
//! - [`synth`]: seeded synthetic schedules and attribute matrices

pub mod alignment;
pub mod eval;
pub mod gateway;
pub mod graph;
pub mod knowledge;
pub mod prompts;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod synth;
pub mod text;
