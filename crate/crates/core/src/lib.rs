//! Numerical laboratory for intermittent interval maps.
//!
//! The crate covers the Manneville-Pomeau family `T(x) = x(1 + 2^a x^a)` on
//! `[0, 1/2)`, `2x - 1` on `[1/2, 1]`, its first-return map to `Y = [1/2, 1]`,
//! Ulam discretisations of the transfer operator, the renewal sequence
//! `u_n = Leb{y in Y : T^n y in Y}` and Monte-Carlo statistics of Li-Yorke
//! tuples under the product map.

pub mod error;
pub mod fit;
pub mod inducing;
pub mod maps;
pub mod rng;
pub mod renewal;
pub mod root;
pub mod transfer;
pub mod tuples;

pub use error::{Error, Result};
pub use maps::{Branch, Formula, MapKind, MapSpec, Metric};
