//! TDD frame configurations and the numerology-0 carrier grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SUBFRAMES_PER_FRAME: usize = 10;
pub const FRAME_DURATION_S: f64 = 0.010;
pub const SUBFRAME_DURATION_S: f64 = 0.001;
pub const TDD_CONFIG_COUNT: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubframeKind {
    Downlink,
    Uplink,
    Special,
}

impl SubframeKind {
    pub fn letter(self) -> char {
        match self {
            SubframeKind::Downlink => 'D',
            SubframeKind::Uplink => 'U',
            SubframeKind::Special => 'S',
        }
    }
}

use SubframeKind::{Downlink as D, Special as S, Uplink as U};

const PATTERNS: [[SubframeKind; SUBFRAMES_PER_FRAME]; TDD_CONFIG_COUNT as usize] = [
    [D, S, U, U, U, D, S, U, U, U],
    [D, S, U, U, D, D, S, U, U, D],
    [D, S, U, D, D, D, S, U, D, D],
    [D, S, U, U, U, D, D, D, D, D],
    [D, S, U, U, D, D, D, D, D, D],
    [D, S, U, D, D, D, D, D, D, D],
    [D, S, U, U, U, D, S, U, U, D],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TddConfiguration {
    pub index: u8,
    pub pattern: [SubframeKind; SUBFRAMES_PER_FRAME],
}

impl TddConfiguration {
    pub fn n_downlink(&self) -> u32 {
        self.count(SubframeKind::Downlink)
    }

    pub fn n_uplink(&self) -> u32 {
        self.count(SubframeKind::Uplink)
    }

    pub fn n_special(&self) -> u32 {
        self.count(SubframeKind::Special)
    }

    fn count(&self, kind: SubframeKind) -> u32 {
        self.pattern.iter().filter(|k| **k == kind).count() as u32
    }

    /// Positions within the frame of the downlink subframes.
    pub fn downlink_positions(&self) -> Vec<usize> {
        self.pattern
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == SubframeKind::Downlink)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn kind_at(&self, subframe: u64) -> SubframeKind {
        self.pattern[(subframe % SUBFRAMES_PER_FRAME as u64) as usize]
    }
}

impl fmt::Display for TddConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.pattern.iter().map(|k| k.letter()).collect();
        write!(f, "TDD#{} {s}", self.index)
    }
}

pub fn tdd_config(index: u8) -> Result<TddConfiguration> {
    match PATTERNS.get(usize::from(index)) {
        Some(pattern) => Ok(TddConfiguration {
            index,
            pattern: *pattern,
        }),
        None => invalid(format!("TDD configuration index must be 0..=6, got {index}")),
    }
}

/// Returns `(n_d, n_u, n_s)`.
pub fn subframe_counts(cfg: &TddConfiguration) -> (u32, u32, u32) {
    (cfg.n_downlink(), cfg.n_uplink(), cfg.n_special())
}

/// Transmission bandwidth configuration for 15 kHz SCS.
const RB_TABLE: [(u32, u32); 8] = [
    (5, 25),
    (10, 52),
    (15, 79),
    (20, 106),
    (25, 133),
    (30, 160),
    (40, 216),
    (50, 270),
];

pub const SUPPORTED_BANDWIDTHS_MHZ: [u32; 8] = [5, 10, 15, 20, 25, 30, 40, 50];

pub fn rb_count(bandwidth_mhz: u32) -> Result<u32> {
    RB_TABLE
        .iter()
        .find(|(bw, _)| *bw == bandwidth_mhz)
        .map(|(_, n)| *n)
        .map_or_else(
            || invalid(format!("unsupported bandwidth {bandwidth_mhz} MHz for numerology 0")),
            Ok,
        )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierGrid {
    pub bandwidth_mhz: u32,
    pub numerology: u8,
    pub scs_khz: u32,
    pub n_rb: u32,
    pub tti_ms: u32,
}

impl CarrierGrid {
    pub fn new(bandwidth_mhz: u32) -> Result<Self> {
        Self::with_numerology(bandwidth_mhz, 0)
    }

    pub fn with_numerology(bandwidth_mhz: u32, numerology: u8) -> Result<Self> {
        if numerology != 0 {
            return invalid(format!("only numerology 0 is supported, got {numerology}"));
        }
        Ok(Self {
            bandwidth_mhz,
            numerology,
            scs_khz: 15,
            n_rb: rb_count(bandwidth_mhz)?,
            tti_ms: 1,
        })
    }

    /// RBs available per downlink subframe.
    pub fn n_rb_dl(&self) -> u32 {
        self.n_rb
    }

    /// RBs available per uplink subframe (same carrier under TDD).
    pub fn n_rb_ul(&self) -> u32 {
        self.n_rb
    }
}
