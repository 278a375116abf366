//! Synthetic graph tasks, graph textualization, instruction-corpus assembly
//! and scoring.

pub mod graph;
pub mod numfmt;
pub mod seed;
pub mod synth;
pub mod task;
pub mod text;
pub mod augment;
pub mod dataset;
pub mod eval;
pub mod sample;
pub mod suite;
