//! Circle-domain uniformizer (placeholder).
