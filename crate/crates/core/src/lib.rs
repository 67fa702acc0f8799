//! Learnable quantum transcoding on a classical simulator.
//!
//! A unit latent vector is packed into a lower-triangular factor `L`, turned
//! into the density matrix `rho = L L^H`, sent through a depolarizing channel
//! and read back as expectation values of unit Hilbert-Schmidt observables.
//! Around that core sit a small trainable codec, a classical-shadow estimator
//! for the readout, a QPIE amplitude-encoding baseline and the metrics used to
//! compare them.

pub mod baseline;
pub mod bloch;
pub mod channel;
pub mod checkpoint;
pub mod cli;
pub mod codec;
pub mod dataset;
pub mod encode;
pub mod error;
pub mod metrics;
pub mod qcore;
pub mod readout;
pub mod shadows;

pub use error::{Error, Result};
pub use qcore::{ComplexMatrix, DensityMatrix, HermitianParams, C64};
