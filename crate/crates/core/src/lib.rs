//! Exact limit distributions of Birkhoff deviations for the truncated
//! doubling ("flat spot") family of circle maps, with a Monte Carlo
//! cross-check and Q-Gaussian comparison tools.

pub mod cli;
pub mod density;
pub mod dynamics;
pub mod exact;
pub mod montecarlo;
pub mod plot;
pub mod qgaussian;
pub mod rational;
pub mod verify;

pub use exact::{
    farey_enumerate, interval_i, t_of, upper_string, BitString, Interval, RotationFraction,
};
pub use rational::{rat, Rational};
