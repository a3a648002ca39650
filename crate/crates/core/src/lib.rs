//! Random walks in sparse random environments and the disordered pinning model.
//!
//! The numerical core ([`environment`], [`walk`], [`pinning`]) is generic over
//! the floating point type through [`Scalar`]; the `*64` aliases below fix it to
//! `f64`, which is what the experiment drivers and the CLI use.
//!
//! The central object tying the two halves together is the identity
//!
//! ```text
//!   E_tau [ expected visits to 0 of the walk in potential V(tau, omega; beta, h, f) ]
//!       = sum_{n >= 0} Z_n(omega; beta, h) e^{-f n}
//! ```
//!
//! where the left side is driven by [`walk`] and the right side by [`pinning`].
//! [`experiments::verify_key_relation`] checks it by running both pipelines on a
//! shared disorder sequence.

pub mod environment;
pub mod error;
pub mod experiments;
pub mod pinning;
pub mod rng;
pub mod scalar;
pub mod walk;

pub use environment::{DisorderSpec, KernelKind, RenewalKernel, SparseEnvironment};
pub use error::{Error, Result};
pub use pinning::{GrandCanonicalReport, HomogeneousSolution, PartitionTable, Relevance, Verdict};
pub use scalar::Scalar;
pub use walk::{McEstimate, Potential, WalkParams};

pub type DisorderSpec64 = DisorderSpec<f64>;
pub type RenewalKernel64 = RenewalKernel<f64>;
pub type SparseEnvironment64 = SparseEnvironment<f64>;
pub type WalkParams64 = WalkParams<f64>;
pub type Potential64 = Potential<f64>;
pub type PartitionTable64 = PartitionTable<f64>;
pub type GrandCanonicalReport64 = GrandCanonicalReport<f64>;
pub type HomogeneousSolution64 = HomogeneousSolution<f64>;

pub type DisorderSpec32 = DisorderSpec<f32>;
pub type RenewalKernel32 = RenewalKernel<f32>;
pub type Potential32 = Potential<f32>;
pub type PartitionTable32 = PartitionTable<f32>;
