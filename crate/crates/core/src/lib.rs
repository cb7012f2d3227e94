//! System-level simulator and optimization engine for MBSFN area formation
//! in 5G NR TDD deployments, with device-to-device (D2D) relaying of the
//! multicast content towards users excluded from the MBSFN transmission.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] builds the hexagonal synchronization area and drops users.
//! * [`radio`] holds the link budget, SINR models and the CQI/rate tables.
//! * [`frame`] holds the TDD frame configurations and the bandwidth/RB table.
//! * [`formation`] is the area-formation engine (D2D-MAF and the SCF baseline).
//! * [`delivery`] walks TDD frames to deliver a content and measures it.
//! * [`harness`] runs Monte-Carlo scenarios and writes CSV/SVG results.

pub mod delivery;
pub mod error;
pub mod formation;
pub mod frame;
pub mod harness;
pub mod radio;
pub mod topology;

pub use error::{Error, Result};
