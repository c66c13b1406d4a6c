//! Analytic admissible-function certificates (placeholder).
