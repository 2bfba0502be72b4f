//! Lattice sieving factorization with tree tensor network sampling.
//!
//! The pipeline maps factoring a semiprime N to a family of closest vector
//! problems on N-related lattices, harvests smooth relation pairs from
//! low-energy roundings of Babai's solution (enumerated exactly or sampled
//! from a tree tensor network state), and recovers the prime factors through
//! a GF(2) congruence-of-squares step.
//!
//! Modules follow the phases of the pipeline:
//!
//! * [`numtheory`] — primes, smoothness decompositions, modular arithmetic,
//!   RSA test-key generation.
//! * [`lattice`] — CVP instance construction, exact-arithmetic LLL reduction
//!   and Babai's nearest plane.
//! * [`qubo`] — the diagonal spin-glass encoding of the rounding search and
//!   an exact low-energy enumerator.
//! * [`ttn`] — binary tree tensor network states: variational ground-state
//!   sweeps and distinct-state sampling.
//! * [`sieve`] — per-CVP collection of smooth relation pairs.
//! * [`congruence`] — GF(2) kernel processing and factor extraction.
//! * [`driver`] — orchestration, hyperparameter policies, cost/scaling
//!   models, experiment harness.

pub mod congruence;
pub mod driver;
pub mod error;
pub mod fixedpoint;
pub mod lattice;
pub mod numtheory;
pub mod qubo;
pub mod rng;
pub mod sieve;
pub mod ttn;

pub use error::{Error, Result};
