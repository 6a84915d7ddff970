//! Lyapunov exponents of products of large random matrices.
//!
//! The product B_N = A_N ... A_1 of iid random matrices grows exponentially,
//! and the growth rates of its singular values are the Lyapunov exponents
//! gamma_1 >= ... >= gamma_n. This crate estimates them by renormalized
//! chains that never form B_N itself:
//!
//! * [`chain::top_exponent`]: normalized vector iteration for gamma_1.
//! * [`chain::second_exponent_pair`]: parallelogram-area growth of a vector
//!   pair for gamma_1 + gamma_2.
//! * [`chain::spectrum_qr`]: orthonormal-frame (QR) iteration for the k
//!   leading exponents.
//! * [`chain::least_exponent_distance`]: hyperplane-distance recursion for
//!   gamma_n.
//!
//! Estimates come with standard errors, per-step increments on request, and
//! explicit death reporting for discrete ensembles whose products can hit
//! exact rank collapses. Closed-form reference spectra (the Gaussian
//! digamma spectrum, the weak-coupling symplectic formula) live in
//! [`stats`], together with a Monte-Carlo tail harness; [`structure`] holds
//! the arithmetic diagnostics (least common denominators and small-ball
//! probabilities) that explain when discrete ensembles behave like
//! continuous ones.
//!
//! Randomness is counter-based and fully specified by `(seed, stream_id)`
//! ([`rng::RngStream`]), so every result in this crate is bitwise
//! reproducible on any machine and worker count.
//!
//! The `lyapsim` binary drives all of this from TOML configs ([`config`],
//! [`runner`]).

pub mod chain;
pub mod config;
pub mod ensembles;
pub mod error;
mod linalg;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod structure;

pub use chain::{
    least_exponent_distance, orthocomplement_vector, second_exponent_pair, spectrum_qr,
    top_exponent, wedge_volume_2, ChainConfig, ExponentEstimate,
};
pub use ensembles::{EnsembleSpec, Family, ShiftParams, SymplecticParams};
pub use error::{Error, Result};
pub use rng::{RngStream, RNG_ALGORITHM};
pub use stats::{
    digamma, newman_exponents, ssb_exponent, tail_curve, EstimatorKind, TailCurve,
};
pub use structure::{
    joint_lcd, lcd, lcd_net, membership_s, small_ball_estimate, LcdQuery, LcdResult,
};
