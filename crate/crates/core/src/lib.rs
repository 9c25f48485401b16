//! Resilient-memory workbench: a ChipKill Reed–Solomon codec with a
//! decoupled detect/correct flow, fault-coverage and lifetime Monte Carlo
//! engines, DIMM reconfiguration for device-level failures, and a
//! trace-driven DRAM timing model for write-only slow ECC chips.

pub mod error;
pub mod gf256;
pub mod rng;
pub mod rs_codec;
pub mod ondie_ecc;
pub mod fault_model;
pub mod coverage_mc;
pub mod dimm_topology;
pub mod timing_sim;
pub mod lifetime_mc;

pub use error::{Error, Result};
pub use gf256::FieldElement;
