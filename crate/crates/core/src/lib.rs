//! Numerical laboratory for the signed random combinatorial matrix ensemble:
//! `n x n` matrices over `{-1, 0, 1}` whose rows are independent and uniform
//! over vectors with exactly `d` nonzero coordinates (default `d = n/2`).
//!
//! The crate is split along the objects being studied:
//!
//! * [`ensemble`] samples rows and matrices from reproducible, splittable streams.
//! * [`linalg`] computes singular values, distances to row spans and exact ranks.
//! * [`geometry`] holds the vector taxonomy (sparse / compressible /
//!   almost-constant), difference vectors and small epsilon-nets.
//! * [`clcd`] scans the combinatorial least common denominator with a
//!   Lipschitz certificate.
//! * [`smallball`] computes the law of `W_v = <xi, v>` exactly or by sampling and
//!   evaluates its Levy concentration function.
//! * [`experiments`] runs seeded Monte Carlo experiments and persists results.
//! * [`verify`] bundles the invariant suites used by the `verify` subcommand.

pub mod clcd;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod smallball;
pub mod verify;

pub use error::{Error, Result};
