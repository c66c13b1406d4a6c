//! Discrete conformal and transboundary modulus of curve families in
//! multiply connected planar domains.
//!
//! The crate provides:
//! - planar component geometry and explicit domain generators
//!   ([`geometry`], [`domains`]),
//! - a node-weighted quotient-grid discretization in which every bounded
//!   complementary component collapses to a single super-node
//!   ([`quotient`]),
//! - a convex quadratic modulus solver with shortest-path constraint
//!   generation and dual lower-bound certificates ([`modulus`]),
//! - analytic admissible-function certificates evaluated in log-domain
//!   arithmetic ([`certificates`]),
//! - a circle-domain uniformizer built from a geodesic-style numerical
//!   Riemann mapper ([`uniformizer`]),
//! - experiment runners and reporting used by the CLI ([`experiments`]).

pub mod certificates;
pub mod domains;
pub mod experiments;
pub mod geometry;
pub mod logdomain;
pub mod modulus;
pub mod quotient;
pub mod render;
pub mod uniformizer;

pub use domains::{Domain, DomainKind, Schedule};
pub use geometry::{Component, Point2, Shape, Window};
pub use modulus::{ModulusResult, SolveOptions, SolveStatus};
pub use quotient::{CurveFamilySpec, Density, NodeSet, QuotientGraph};
