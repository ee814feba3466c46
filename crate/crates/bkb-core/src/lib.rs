//! Belief-revision engine for Bayesian knowledge bases.
//!
//! The crate is organized around a pipeline: parse and validate a knowledge
//! graph ([`model`]), compute an admissible cost table per strongly connected
//! component via linear programming ([`heuristic`] on top of [`lp`]), run
//! best-first search over cuts for the k lightest inferences ([`search`]),
//! and cross-check everything against a brute-force enumerator ([`oracle`]).
//! [`gen`] produces seeded random instances for benchmarks and tests.

pub mod gen;
pub mod heuristic;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod search;
