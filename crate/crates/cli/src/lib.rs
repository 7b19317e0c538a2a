//! Batch front-end: parse scene files, dispatch constructions, emit
//! verification reports with deterministic output.

pub mod engine;
pub mod report;
pub mod scene;
