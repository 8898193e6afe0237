//! Collaborative clip-art drawing game: a teller describes a hidden scene and a
//! drawer reconstructs it on an initially empty canvas.

pub mod agents;
pub mod cli;
pub mod dataset;
pub mod engine;
pub mod eval;
pub mod fingerprint;
pub mod library;
pub mod metric;
pub mod neural;
pub mod scene;
pub mod service;
