//! Exact-size random generation for supercritical composition schemes.
//!
//! A composition scheme `C = D x A o B` assembles an object of size `n` from
//! a core object of `A` (drawn at its exact core-size `k`) whose atoms are
//! substituted by components of `B`. Running a Boltzmann sampler for `B` at
//! the singularity of `C` until the drawn sizes sum to exactly `n` ("leap"
//! trials) gives an exact-size sampler whose output law is asymptotically
//! uniform; a Bernoulli rejection step on the core-size sharpens the
//! convergence rate. This crate implements those generators for Motzkin and
//! Schroder walks, rooted unordered (Polya) trees, unordered binary
//! (phylogenetic) trees, and k-ary / Schroder mobiles, together with an
//! exact-rational analytics layer that computes the distortion factors and
//! total-variation distances of the sampled laws.
//!
//! Start with [`scheme::SchemeSpec`] and [`leap::leap_sample`], or run the
//! `leapgen` binary. The `examples/` directory has one runnable program per
//! capability.

pub mod boltzmann;
pub mod campaign;
pub mod core_samplers;
pub mod error;
pub mod exact;
pub mod leap;
pub mod objects;
pub mod rng;
pub mod scheme;
pub mod series;

pub use error::{Error, Result};
