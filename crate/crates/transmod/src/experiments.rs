//! Experiment runners (placeholder).
