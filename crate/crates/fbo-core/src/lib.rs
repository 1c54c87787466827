//! Feedback-based optimization (FBO) control toolkit.
//!
//! Provides the three controller families — baseline FBO, estimator-enhanced
//! FBO designed on the full plant model, and estimator-enhanced FBO designed
//! on a singular-perturbation reduced model — together with the dense
//! linear-algebra kernel, LQE gain design, closed-loop simulation, and the
//! verification oracles needed to audit stability and steady-state optimality
//! claims numerically.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the CLI
//! live in the companion `fbo-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bench;
pub mod controller;
pub mod densemat;
pub mod estimator;
pub mod objective;
pub mod plant;
pub mod sim;
pub mod verify;

mod mathx;

pub use densemat::{Matrix, MatrixError};
