//! Transfer blocks and fault scenarios.
//!
//! A 64-byte cacheline moves in 16 beats; each ×4 chip contributes 64 bits,
//! and every pair of beats forms one 8-bit symbol per chip. The block is
//! stored as one 64-bit slice per chip, where codeword `w` owns bits
//! `[8w, 8w + 8)` of every slice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf256::FieldElement as Fe;
use crate::ondie_ecc::FaultSeverity;
use crate::rng::SimRng;
use crate::rs_codec::{self, Codeword, EvalPoints, DATA_SYMBOLS, MAX_CHIPS};

pub const CODEWORDS_PER_BLOCK: usize = 8;
pub const SLICE_BITS: u32 = 64;
/// Chip columns faults are drawn from: 8 data chips plus `p_0` and `p_1`.
pub const DEFAULT_FAULT_CHIPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransferBlock {
    slices: [u64; MAX_CHIPS],
    num_checks: u8,
}

impl TransferBlock {
    /// Encodes 64 data bytes; byte `8w + c` is data chip `c`'s symbol in codeword `w`.
    pub fn encode(data: &[u8; 64], points: &EvalPoints, num_checks: usize) -> Result<Self> {
        let mut block = Self { slices: [0; MAX_CHIPS], num_checks: num_checks as u8 };
        for w in 0..CODEWORDS_PER_BLOCK {
            let mut symbols = [Fe::ZERO; DATA_SYMBOLS];
            for (c, s) in symbols.iter_mut().enumerate() {
                *s = Fe::new(data[w * DATA_SYMBOLS + c]);
            }
            let cw = rs_codec::encode(&symbols, points, num_checks)?;
            block.store_codeword(w, &cw);
        }
        Ok(block)
    }

    pub fn random(rng: &mut SimRng, points: &EvalPoints, num_checks: usize) -> Result<Self> {
        let mut data = [0u8; 64];
        for chunk in data.chunks_mut(8) {
            chunk.copy_from_slice(&rng.next_u64().to_le_bytes());
        }
        Self::encode(&data, points, num_checks)
    }

    #[inline]
    pub fn num_checks(&self) -> usize {
        self.num_checks as usize
    }

    #[inline]
    pub fn num_chips(&self) -> usize {
        DATA_SYMBOLS + self.num_checks()
    }

    #[inline]
    pub fn slice(&self, chip: usize) -> u64 {
        self.slices[chip]
    }

    #[inline]
    pub fn set_slice(&mut self, chip: usize, bits: u64) {
        self.slices[chip] = bits;
    }

    #[inline]
    pub fn xor_slice(&mut self, chip: usize, mask: u64) {
        self.slices[chip] ^= mask;
    }

    #[inline]
    pub fn symbol(&self, codeword: usize, chip: usize) -> Fe {
        Fe::new((self.slices[chip] >> (8 * codeword)) as u8)
    }

    pub fn codeword(&self, w: usize) -> Codeword {
        let mut data = [Fe::ZERO; DATA_SYMBOLS];
        for (c, d) in data.iter_mut().enumerate() {
            *d = self.symbol(w, c);
        }
        let checks: Vec<Fe> = (0..self.num_checks()).map(|k| self.symbol(w, DATA_SYMBOLS + k)).collect();
        Codeword::from_parts(data, &checks).expect("block has 2 or 3 checks")
    }

    pub fn store_codeword(&mut self, w: usize, cw: &Codeword) {
        let shift = 8 * w;
        for chip in 0..self.num_chips() {
            let v = cw.symbol(chip).value() as u64;
            self.slices[chip] = (self.slices[chip] & !(0xFFu64 << shift)) | (v << shift);
        }
    }

    pub fn data_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        for w in 0..CODEWORDS_PER_BLOCK {
            for c in 0..DATA_SYMBOLS {
                out[w * DATA_SYMBOLS + c] = self.symbol(w, c).value();
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultClass {
    Sbf,
    Dbf,
    Scf,
}

impl FaultClass {
    pub fn label(self) -> &'static str {
        match self {
            FaultClass::Sbf => "SBF",
            FaultClass::Dbf => "DBF",
            FaultClass::Scf => "SCF",
        }
    }
}

/// A scenario label such as `SBF+SCF`: fault classes in placement order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioKind(pub Vec<FaultClass>);

/// The ten fault scenarios of the coverage table, in row order.
pub const TABLE_SCENARIOS: [&str; 10] = [
    "SBF",
    "SBF+SBF",
    "DBF",
    "SCF",
    "SBF+SBF+SBF",
    "DBF+DBF",
    "DBF+DBF+DBF",
    "SBF+SCF",
    "DBF+SCF",
    "SCF+SCF",
];

impl ScenarioKind {
    pub fn classes(&self) -> &[FaultClass] {
        &self.0
    }

    pub fn table() -> Vec<ScenarioKind> {
        TABLE_SCENARIOS.iter().map(|s| s.parse().expect("valid label")).collect()
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for part in s.trim().split('+') {
            let class = match part.trim().to_ascii_uppercase().as_str() {
                "SBF" => FaultClass::Sbf,
                "DBF" => FaultClass::Dbf,
                "SCF" => FaultClass::Scf,
                other => return Err(Error::config(format!("unknown fault kind '{other}' in scenario '{s}'"))),
            };
            classes.push(class);
        }
        if classes.is_empty() {
            return Err(Error::config("empty scenario"));
        }
        Ok(ScenarioKind(classes))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.0.iter().map(|c| c.label()).collect();
        f.write_str(&labels.join("+"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultDescriptor {
    Sbf { chip: usize, bit: u32 },
    Dbf { chip: usize, bits: [u32; 2] },
    Scf { chip: usize, mask: u64 },
}

impl FaultDescriptor {
    pub fn chip(&self) -> usize {
        match *self {
            FaultDescriptor::Sbf { chip, .. } | FaultDescriptor::Dbf { chip, .. } | FaultDescriptor::Scf { chip, .. } => chip,
        }
    }

    pub fn class(&self) -> FaultClass {
        match self {
            FaultDescriptor::Sbf { .. } => FaultClass::Sbf,
            FaultDescriptor::Dbf { .. } => FaultClass::Dbf,
            FaultDescriptor::Scf { .. } => FaultClass::Scf,
        }
    }

    pub fn mask(&self) -> u64 {
        match *self {
            FaultDescriptor::Sbf { bit, .. } => 1u64 << bit,
            FaultDescriptor::Dbf { bits, .. } => (1u64 << bits[0]) | (1u64 << bits[1]),
            FaultDescriptor::Scf { mask, .. } => mask,
        }
    }

    pub fn severity(&self) -> FaultSeverity {
        match self {
            FaultDescriptor::Sbf { .. } => FaultSeverity { flipped_bits: 1, whole_chip: false },
            FaultDescriptor::Dbf { .. } => FaultSeverity { flipped_bits: 2, whole_chip: false },
            FaultDescriptor::Scf { mask, .. } => FaultSeverity { flipped_bits: mask.count_ones(), whole_chip: true },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultScenario {
    pub faults: Vec<FaultDescriptor>,
}

impl FaultScenario {
    pub fn new(faults: Vec<FaultDescriptor>) -> Result<Self> {
        let s = Self { faults };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.faults.iter().enumerate() {
            if self.faults[..i].iter().any(|g| g.chip() == f.chip()) {
                return Err(Error::domain(format!("two faults target chip {}", f.chip())));
            }
            match *f {
                FaultDescriptor::Sbf { bit, .. } if bit >= SLICE_BITS => {
                    return Err(Error::domain(format!("bit {bit} outside the 64-bit slice")));
                }
                FaultDescriptor::Dbf { bits, .. } if bits[0] == bits[1] || bits.iter().any(|&b| b >= SLICE_BITS) => {
                    return Err(Error::domain(format!("invalid double-bit pair {bits:?}")));
                }
                FaultDescriptor::Scf { mask: 0, .. } => return Err(Error::domain("chip fault with zero mask")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Per-chip XOR mask over `num_chips` chips.
    pub fn chip_masks(&self) -> [u64; MAX_CHIPS] {
        let mut masks = [0u64; MAX_CHIPS];
        for f in &self.faults {
            masks[f.chip()] ^= f.mask();
        }
        masks
    }
}

/// Distribution of whole-chip error symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ScfSampling {
    /// Every symbol error uniform over 1..=255.
    #[default]
    NonzeroSymbols,
    /// Every symbol uniform over 0..=255; an all-zero mask is redrawn.
    UniformSymbols,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub fault_chips: usize,
    pub scf: ScfSampling,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { fault_chips: DEFAULT_FAULT_CHIPS, scf: ScfSampling::default() }
    }
}

pub fn sample_scenario(kind: &ScenarioKind, rng: &mut SimRng, cfg: &SamplerConfig) -> Result<FaultScenario> {
    let n = kind.classes().len();
    if n > cfg.fault_chips {
        return Err(Error::config(format!("{n} faults need distinct chips but only {} exist", cfg.fault_chips)));
    }
    let chips = rng.distinct(cfg.fault_chips as u64, n);
    let faults = kind
        .classes()
        .iter()
        .zip(chips)
        .map(|(&class, chip)| sample_fault(class, chip as usize, rng, cfg.scf))
        .collect();
    Ok(FaultScenario { faults })
}

pub fn sample_fault(class: FaultClass, chip: usize, rng: &mut SimRng, scf: ScfSampling) -> FaultDescriptor {
    match class {
        FaultClass::Sbf => FaultDescriptor::Sbf { chip, bit: rng.below(SLICE_BITS as u64) as u32 },
        FaultClass::Dbf => {
            let b = rng.distinct(SLICE_BITS as u64, 2);
            FaultDescriptor::Dbf { chip, bits: [b[0] as u32, b[1] as u32] }
        }
        FaultClass::Scf => FaultDescriptor::Scf { chip, mask: sample_scf_mask(rng, scf) },
    }
}

fn sample_scf_mask(rng: &mut SimRng, scf: ScfSampling) -> u64 {
    loop {
        let mut mask = 0u64;
        for w in 0..CODEWORDS_PER_BLOCK {
            let sym = match scf {
                ScfSampling::NonzeroSymbols => rng.range(1, 256),
                ScfSampling::UniformSymbols => rng.below(256),
            };
            mask |= sym << (8 * w);
        }
        if mask != 0 {
            return mask;
        }
    }
}

pub fn apply(block: &TransferBlock, scenario: &FaultScenario) -> TransferBlock {
    let mut out = *block;
    for f in &scenario.faults {
        out.xor_slice(f.chip(), f.mask());
    }
    out
}
