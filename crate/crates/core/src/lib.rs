//! Offline machinery for local-life-service language models: benchmark
//! construction, instruction-data synthesis, multiple-choice evaluation and
//! expert-agent workflows.

pub mod digest;
pub mod platform;
pub mod rng;
pub mod gateway;
pub mod prompts;
pub mod manifest;
pub mod synthesis;
pub mod benchmark;
pub mod eval;
pub mod workflows;
pub mod simulate;
pub mod fixtures;
