//! Generative adversarial training phrased as a finite two-player zero-sum
//! game between a generator and a classifier, solved with Parallel Nash
//! Memory over resource-bounded best-response oracles.
//!
//! The crate is organised bottom-up:
//!
//! - [`matrix_game`]: exact zero-sum matrix games (LP solver, best responses,
//!   exploitability).
//! - [`neural`]: a small MLP engine with reverse-mode gradients and Adam/SGD.
//! - [`synth`]: 2-D Gaussian mixtures used as ground-truth data.
//! - [`gang`]: measuring functions and Monte Carlo estimates of the game payoffs.
//! - [`rbbr`]: gradient-trained best-response oracles against network mixtures.
//! - [`pnm`]: the Parallel Nash Memory loop, for exact matrix oracles and for
//!   neural oracles.
//! - [`baseline`]: a standard alternating GAN loop used as the control.
//! - [`eval`]: mode coverage, classifier surfaces and report emission.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod gang;
pub mod matrix_game;
pub mod neural;
pub mod pnm;
pub mod rbbr;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use gang::{GangSpec, MeasuringFn, MixedNetStrategy};
pub use matrix_game::{MixedStrategy, PayoffMatrix, Player, SolveResult};
pub use neural::{Activation, MlpSpec, NetworkParams, OptimizerConfig, OptimizerKind};
pub use pnm::{OracleKind, PnmConfig, PnmState};
pub use synth::{GaussianMixture, NoiseDist};
