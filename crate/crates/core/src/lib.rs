//! Transient simulation and current-signature analysis of three-phase
//! squirrel-cage induction motors with air-gap eccentricity and broken rotor
//! bars, using closed-form inductances from winding-function theory.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod inductance;
pub mod ode;
pub mod pipeline;
pub mod quadrature;
pub mod record;
pub mod spectrum;
pub mod winding;

pub use error::{Error, Result};
