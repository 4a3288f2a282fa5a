//! Optimal stopping game between a continuously observing player and a
//! player who can only act at Poisson observation times, driven by a
//! spectrally positive Lévy process with exponential jumps.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod levy_model;
pub mod montecarlo;
pub mod numeric;
pub mod rewards;
pub mod scale;

pub use equilibrium::{Equilibrium, GameSpec};
pub use error::{Error, Result};
pub use levy_model::{LevyModel, RootSet, VariationClass};
pub use rewards::{GameRewards, Level, Player, Put, Reward};
pub use scale::ScaleSet;
