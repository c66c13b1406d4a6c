//! SVG rendering (placeholder).
