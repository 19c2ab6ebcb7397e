//! Robust-on-average training and PAC-Bayes certificates for Gaussian
//! majority votes of small neural networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffnet`]: feed-forward networks with reverse-mode gradients and Adam.
//! - [`posterior`]: isotropic Gaussians over weights, KL, Monte Carlo votes.
//! - [`attacks`]: ℓ∞ perturbation generators (FGSM, IFGSM, PGD and the
//!   uniform-offset variants).
//! - [`risks`]: empirical averaged / averaged-max risks and their linear surrogates.
//! - [`bounds`]: binary kl, kl inversion and the three certificates.
//! - [`trainer`]: two-step prior/posterior training.
//! - [`oracle`]: exact computations on finite worlds.
//! - [`data`]: MNIST IDX parsing, binary pairs, splits and a synthetic task.

pub mod attacks;
pub mod bounds;
pub mod data;
pub mod diffnet;
pub mod error;
pub mod oracle;
pub mod posterior;
pub mod risks;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
