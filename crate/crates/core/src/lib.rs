//! Binary-signalling opinion dynamics.
//!
//! Agents hold one of finitely many spin states; a speaker emits message A
//! or B and the listener updates through one of two column-stochastic
//! transition matrices. This crate provides:
//!
//! * [`system`]: signalling systems, macrostates and canonical builders,
//! * [`order`]: partial orders on spin states and cone membership,
//! * [`monotonicity`]: sufficient-condition certificates and sampled falsifiers,
//! * [`complete`]: the complete-graph mean-field ODE and its analysis,
//! * [`sparse`]: the pairwise link-based ODE for sparse random graphs,
//! * [`abm`]: an agent-based Monte Carlo simulator.

// parameter checks are written as `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abm;
pub mod complete;
pub mod error;
pub mod format;
pub mod lp;
pub mod monotonicity;
pub mod ode;
pub mod order;
pub mod sample;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};
pub use order::{Comparison, Cone, GeneratorSet, OrderDocument, PartialOrder, DEFAULT_MAX_K};
pub use system::{
    make_counterexample, make_kng, make_long, LinkIndex, LinkMacrostate, Macrostate, Message,
    PairMatrix, SignallingSystem, SpinSpace, SystemDocument,
};
