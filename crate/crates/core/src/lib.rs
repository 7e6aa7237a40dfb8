//! Persistency of excitation, the fundamental lemma and counterexamples to
//! universality for discrete-time linear systems.
//!
//! An input `u` is universal for depth `L` and state dimension `n` when the
//! data it generates on every controllable system spans the system's
//! depth-`L` behavior. That happens exactly when `u` is persistently exciting
//! of order `n + L`; otherwise [`adversary::construct_certificate`] builds a
//! controllable system and an initial state for which it fails.
//!
//! With the default `parallel` feature, the data-parallel loops (including
//! the Monte Carlo harnesses in [`trials`]) run on rayon; pass
//! [`Execution::Sequential`] (or build without the feature) to run them on
//! the calling thread. Results do not depend on the choice.

// `!(x <= tol)` is deliberate throughout: a NaN residual must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod exec;
pub mod lemma;
pub mod lti;
pub mod numkit;
pub mod rowmajor;
pub mod signals;
pub mod trials;

pub use error::{Error, Result};
pub use exec::Execution;
pub use signals::Signal;
