//! Simulation and analysis toolkit for reconfigurable continuously-coupled
//! 3D waveguide interferometers.
//!
//! * [`lattice`] and [`evolution`] turn a randomly modulated triangular
//!   waveguide array plus heater settings into the circuit unitary.
//! * [`interference`] computes exact multi-photon output statistics and
//!   samples from them, including the four-photon SPDC source mixture.
//! * [`reconstruction`] simulates two-photon HOM scans and recovers a
//!   submatrix of the circuit from them.
//! * [`validation`] scores sample streams with likelihood-ratio counters.
//! * [`haarstats`] compares circuits to the Haar ensemble.
//! * [`footprint`] evaluates interferometer length scaling laws.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod exec;
pub mod footprint;
pub mod haarstats;
pub mod interference;
pub mod lattice;
pub mod linalg;
pub mod optim;
pub mod reconstruction;
pub mod rng;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{CMatrix, HermitianMatrix, UnitaryMatrix};
