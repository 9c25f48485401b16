//! Per-chip on-die single-error-correcting code.
//!
//! Each chip's 64-bit contribution to a cacheline (4 pins × 16 beats) is
//! protected by a Hamming(71,64) code: data bit `i` maps to the `i`-th
//! 7-bit value that is not a power of two, and check bit `k` to `1 << k`.

use serde::{Deserialize, Serialize};

pub const CHECK_BITS: u32 = 7;
pub const STORED_BITS: u32 = 64 + CHECK_BITS;

const fn build_columns() -> [u8; 64] {
    let mut cols = [0u8; 64];
    let mut v: u32 = 3;
    let mut i = 0;
    while i < 64 {
        if v & (v - 1) != 0 {
            cols[i] = v as u8;
            i += 1;
        }
        v += 1;
    }
    cols
}

const fn build_lookup() -> [i8; 128] {
    let cols = build_columns();
    let mut lut = [-1i8; 128];
    let mut i = 0;
    while i < 64 {
        lut[cols[i] as usize] = i as i8;
        i += 1;
    }
    lut
}

static COLUMNS: [u8; 64] = build_columns();
static LOOKUP: [i8; 128] = build_lookup();

/// Parity-check column of payload bit `bit`.
pub fn column(bit: u32) -> u8 {
    COLUMNS[bit as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ChipSlice {
    pub bits: u64,
    pub check_bits: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OnDieOutcome {
    Clean,
    CorrectedSingle,
    FlaggedErasure,
}

/// How the on-die stage decides a chip's outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum OnDieMode {
    /// Outcome follows the injected fault severity: one bit is corrected,
    /// two or more bits (or a whole-chip fault) flag the chip as an erasure.
    #[default]
    Marker,
    /// Outcome follows the Hamming syndrome, including SEC miscorrections.
    Physical,
}

fn check_of(bits: u64) -> u8 {
    let mut acc = 0u8;
    let mut rest = bits;
    while rest != 0 {
        let b = rest.trailing_zeros();
        acc ^= COLUMNS[b as usize];
        rest &= rest - 1;
    }
    acc
}

pub fn ondie_encode(bits: u64) -> ChipSlice {
    ChipSlice { bits, check_bits: check_of(bits) }
}

pub fn ondie_decode(slice: ChipSlice) -> (u64, OnDieOutcome) {
    let syndrome = (slice.check_bits ^ check_of(slice.bits)) & 0x7F;
    if syndrome == 0 {
        return (slice.bits, OnDieOutcome::Clean);
    }
    if syndrome.is_power_of_two() {
        // error confined to a check bit
        return (slice.bits, OnDieOutcome::CorrectedSingle);
    }
    match LOOKUP[syndrome as usize] {
        b if b >= 0 => (slice.bits ^ (1u64 << b), OnDieOutcome::CorrectedSingle),
        _ => (slice.bits, OnDieOutcome::FlaggedErasure),
    }
}

/// Severity of the faults injected into one chip, as seen by the marker model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct FaultSeverity {
    pub flipped_bits: u32,
    pub whole_chip: bool,
}

impl FaultSeverity {
    pub fn is_multi_bit(self) -> bool {
        self.whole_chip || self.flipped_bits >= 2
    }
}

/// On-die decode under `mode`; the marker mode overrides the syndrome
/// verdict for multi-bit faults.
pub fn ondie_decode_with(slice: ChipSlice, severity: FaultSeverity, mode: OnDieMode) -> (u64, OnDieOutcome) {
    match mode {
        OnDieMode::Marker if severity.is_multi_bit() => (slice.bits, OnDieOutcome::FlaggedErasure),
        _ => ondie_decode(slice),
    }
}
