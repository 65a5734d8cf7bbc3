//! Core library for a two-subpopulation SIQS epidemic on activity-driven
//! temporal networks: an exact event-driven Markov simulator, mean-field
//! ODE systems, closed-form threshold analysis, and Monte Carlo threshold
//! estimation.
//!
//! The population is split into vaccinated and non-vaccinated individuals.
//! Each individual activates via a unit-rate Poisson clock and contacts a
//! partner chosen with homophily bias `theta`; infectious individuals may
//! refrain from contact with a group-level responsibility probability.
//! Testing moves infectious individuals into quarantine, where they form
//! no contacts.

pub mod engine;
pub mod estimator;
pub mod exec;
pub mod meanfield;
pub mod netgen;
pub mod params;
pub mod spectral;
pub mod trajectory;

pub use engine::{EngineState, Health, Population};
pub use netgen::Backbone;
pub use params::{Group, ModelParams, PopulationSplit};
pub use trajectory::Trajectory;
