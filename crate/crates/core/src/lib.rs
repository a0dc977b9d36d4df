//! Cahn–Hilliard dynamics with a nonlinear Onsager mobility on a rectangular box.
//!
//! The core is generic over the scalar type; `f64` aliases are provided below.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod harness;
pub mod linstab;
pub mod manifold;
pub mod params;
pub mod scalar;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PhysicalParams64 = params::PhysicalParams<f64>;
pub type DomainSpec64 = params::DomainSpec<f64>;
pub type MobilitySpec64 = params::MobilitySpec<f64>;
pub type SpectralField64 = spectral::SpectralField<f64>;
pub type GridField64 = spectral::GridField<f64>;
pub type ReducedSystem64 = manifold::ReducedSystem<f64>;
pub type TransitionReport64 = classifier::TransitionReport<f64>;
pub type SimState64 = simulator::SimState<f64>;
pub type StepConfig64 = simulator::StepConfig<f64>;
