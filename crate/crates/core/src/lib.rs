//! Randomized-measurement post-processing for operator entanglement.
//!
//! * [`linop`]: dense complex linear algebra on qubit registers.
//! * [`oe_exact`]: exact operator Schmidt spectra, OE and symmetry-resolved OE.
//! * [`quench`]: exact small-chain dynamics, noise and Born-rule sampling.
//! * [`shadows`]: classical and batch shadows, multi-copy estimators.
//! * [`ffchain`]: free-fermion correlation-matrix OE and quasiparticle predictions.
//! * [`bounds`]: variance and sample-complexity bounds, Monte-Carlo error sweeps.
//! * [`dataset`]: JSONL measurement datasets.

// Negated float comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod ffchain;
pub mod linop;
pub mod oe_exact;
pub mod quench;
pub mod rng;
pub mod shadows;
pub mod states;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linop::{ComplexMatrix, ComplexVector, QubitRegister};
