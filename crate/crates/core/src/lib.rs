//! Simulation and recovery of a multi-port device under test probed through a
//! programmable fixture: an over-the-air coupling network cascaded with a
//! tunable load network whose configuration supplies measurement diversity.
//!
//! The library covers the full pipeline: scattering-matrix composition
//! ([`network`]), load-network synthesis and configuration series ([`tln`]),
//! measurement simulation ([`campaign`]), gradient-descent recovery of the
//! DUT ([`estimator`]), identifiability analysis ([`diagnostics`]), and file
//! interchange ([`io`]).

pub mod campaign;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod io;
pub mod network;
pub mod tln;

pub use error::{Error, Result};
pub use network::{C64, CMatrix, PFRealization, PortPartition, ScatteringMatrix, Tolerances};
