//! Lifetime failure probability under accumulating permanent faults.
//!
//! Every chip column of a rank receives Poisson fault arrivals per class.
//! All faults of a trial land in one representative transfer block, so the
//! model is the worst case where every fault overlaps the same cacheline.
//! After each arrival the accumulated state is decoded with the coverage
//! decoders; a trial's DUE (SDC) time is the first arrival after which the
//! state classifies as DUE (SDC). A DUE ends the trial. An SDC is silent,
//! so the trial keeps running and may still reach DUE later.
//!
//! The enhanced ChipKill variants model codeword doubling only by its effect
//! on escapes: an SDC classification becomes a DUE with probability 1/2.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage_mc::{self, BlockOutcome, CoverageConfig, RetirementState};
use crate::error::{Error, Result};
use crate::fault_model::{self, FaultClass, FaultDescriptor, ScfSampling, TransferBlock, CODEWORDS_PER_BLOCK};
use crate::rng::{domain, SimRng};
use crate::rs_codec;

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Per-device FIT (failures per 10⁹ device-hours) for each fault class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRates {
    pub sbf: f64,
    pub dbf: f64,
    pub scf: f64,
}

impl Default for FitRates {
    /// Permanent plus transient rates from a DDR3 field study:
    /// single-bit faults, single-word faults, and column/row/bank faults.
    fn default() -> Self {
        Self { sbf: 32.8, dbf: 1.7, scf: 26.2 }
    }
}

impl FitRates {
    fn get(&self, class: FaultClass) -> f64 {
        match class {
            FaultClass::Sbf => self.sbf,
            FaultClass::Dbf => self.dbf,
            FaultClass::Scf => self.scf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LifetimeScheme {
    ChipKill,
    EnhancedChipKill,
    ScremeFramework,
    ScremeEnhanced,
}

impl LifetimeScheme {
    pub const ALL: [LifetimeScheme; 4] = [
        LifetimeScheme::ChipKill,
        LifetimeScheme::EnhancedChipKill,
        LifetimeScheme::ScremeFramework,
        LifetimeScheme::ScremeEnhanced,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LifetimeScheme::ChipKill => "ChipKill",
            LifetimeScheme::EnhancedChipKill => "EnhancedChipKill",
            LifetimeScheme::ScremeFramework => "ScremeFramework",
            LifetimeScheme::ScremeEnhanced => "ScremeFramework+Enhanced",
        }
    }

    fn enhanced(self) -> bool {
        matches!(self, LifetimeScheme::EnhancedChipKill | LifetimeScheme::ScremeEnhanced)
    }

    fn retires(self) -> bool {
        matches!(self, LifetimeScheme::ScremeFramework | LifetimeScheme::ScremeEnhanced)
    }
}

impl fmt::Display for LifetimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LifetimeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        LifetimeScheme::ALL
            .into_iter()
            .find(|k| {
                let l: String = k.label().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
                l.to_ascii_lowercase() == norm
            })
            .or(match norm.as_str() {
                "ck" | "baseline" => Some(LifetimeScheme::ChipKill),
                "screme" => Some(LifetimeScheme::ScremeFramework),
                "enhanced" => Some(LifetimeScheme::EnhancedChipKill),
                _ => None,
            })
            .ok_or_else(|| Error::config(format!("unknown lifetime scheme '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeConfig {
    /// Chip columns that receive faults (data chips first, then checks).
    pub chips_per_module: usize,
    pub fit: FitRates,
    pub mission_hours: f64,
    pub time_samples: usize,
    pub scheme: LifetimeScheme,
    pub fit_multiplier: f64,
    /// Chips carrying a whole-chip fault from time zero.
    pub pre_failed_chips: usize,
    pub coverage: CoverageConfig,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            chips_per_module: 10,
            fit: FitRates::default(),
            mission_hours: 7.0 * HOURS_PER_YEAR,
            time_samples: 7,
            scheme: LifetimeScheme::ChipKill,
            fit_multiplier: 1.0,
            pre_failed_chips: 0,
            coverage: CoverageConfig::default(),
        }
    }
}

impl LifetimeConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.fit.sbf, self.fit.dbf, self.fit.scf, self.fit_multiplier];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::config("FIT rates and multiplier must be finite and non-negative"));
        }
        if !(1..=10).contains(&self.chips_per_module) {
            return Err(Error::config(format!("chips_per_module must be in 1..=10, got {}", self.chips_per_module)));
        }
        if !(self.mission_hours.is_finite() && self.mission_hours > 0.0) {
            return Err(Error::config("mission_hours must be positive"));
        }
        if self.time_samples == 0 {
            return Err(Error::config("time_samples must be at least 1"));
        }
        if self.pre_failed_chips > self.chips_per_module {
            return Err(Error::config("more pre-failed chips than chips"));
        }
        Ok(())
    }

    /// Sample instants, evenly spaced and ending at the mission time.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.time_samples;
        (1..=n).map(|i| self.mission_hours * i as f64 / n as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time_hours: f64,
    pub due_prob: f64,
    pub sdc_prob: f64,
    pub due_stderr: f64,
    pub sdc_stderr: f64,
}

impl CurvePoint {
    pub fn stderr(&self) -> f64 {
        self.due_stderr.max(self.sdc_stderr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeCurve {
    pub scheme: LifetimeScheme,
    pub trials: u64,
    pub points: Vec<CurvePoint>,
}

impl LifetimeCurve {
    pub fn final_point(&self) -> &CurvePoint {
        self.points.last().expect("at least one sample")
    }
}

/// First-passage times of one trial, in hours.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialHistory {
    pub first_due: Option<f64>,
    pub first_sdc: Option<f64>,
    pub faults: usize,
}

#[derive(Clone, Copy, Debug)]
struct Arrival {
    time: f64,
    fault: FaultDescriptor,
}

/// Fault arrivals of one trial; identical for every scheme.
fn arrivals(cfg: &LifetimeConfig, trial: u64, seed: u64) -> (Vec<usize>, Vec<Arrival>) {
    let mut rng = SimRng::for_stream(seed, domain::LIFETIME, trial);
    let pre: Vec<usize> = rng
        .distinct(cfg.chips_per_module as u64, cfg.pre_failed_chips)
        .into_iter()
        .map(|c| c as usize)
        .collect();
    let mut out = Vec::new();
    for chip in 0..cfg.chips_per_module {
        for class in [FaultClass::Sbf, FaultClass::Dbf, FaultClass::Scf] {
            let rate = cfg.fit.get(class) * cfg.fit_multiplier * 1e-9;
            let mut t = 0.0;
            loop {
                t += rng.exponential(rate);
                if t > cfg.mission_hours {
                    break;
                }
                out.push(Arrival { time: t, fault: fault_model::sample_fault(class, chip, &mut rng, cfg.coverage.sampler.scf) });
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    (pre, out)
}

fn clean_block(cfg: &LifetimeConfig, trial: u64, seed: u64) -> TransferBlock {
    let mut rng = SimRng::for_stream(seed, domain::BLOCK_DATA, trial);
    TransferBlock::random(&mut rng, &cfg.coverage.points, 2).expect("two checks")
}

enum State {
    Plain { clean: TransferBlock, current: TransferBlock },
    Retiring(RetirementState),
}

impl State {
    fn add(&mut self, f: &FaultDescriptor, cfg: &CoverageConfig) {
        match self {
            State::Plain { current, .. } => current.xor_slice(f.chip(), f.mask()),
            State::Retiring(s) => s.add_fault(f.chip(), f.mask(), f.severity(), cfg),
        }
    }

    fn classify(&self, cfg: &CoverageConfig) -> BlockOutcome {
        match self {
            State::Plain { clean, current } => {
                let results: Vec<_> = (0..CODEWORDS_PER_BLOCK)
                    .map(|w| rs_codec::decode_ssc(&current.codeword(w), &cfg.points).expect("two checks"))
                    .collect();
                coverage_mc::classify(clean, &results)
            }
            State::Retiring(s) => coverage_mc::classify(s.clean(), &s.decode(cfg)),
        }
    }
}

pub fn run_lifetime_trial(cfg: &LifetimeConfig, trial: u64, seed: u64) -> TrialHistory {
    let (pre, events) = arrivals(cfg, trial, seed);
    let clean = clean_block(cfg, trial, seed);
    let cov = &cfg.coverage;
    let mut state = if cfg.scheme.retires() {
        State::Retiring(RetirementState::new(clean, cov.spare_chips))
    } else {
        State::Plain { clean, current: clean }
    };
    let mut coin = SimRng::for_stream(seed, domain::LIFETIME_COIN, trial);
    let mut pre_rng = SimRng::for_stream(seed, domain::FAULTS, trial);
    let mut hist = TrialHistory { faults: events.len(), ..TrialHistory::default() };

    let pre_faults: Vec<Arrival> = pre
        .iter()
        .map(|&chip| Arrival {
            time: 0.0,
            fault: fault_model::sample_fault(FaultClass::Scf, chip, &mut pre_rng, ScfSampling::NonzeroSymbols),
        })
        .collect();
    for a in pre_faults.iter().chain(events.iter()) {
        state.add(&a.fault, cov);
        let mut outcome = state.classify(cov);
        // one draw per evaluation keeps the coin stream aligned across schemes
        let heads = coin.bernoulli(0.5);
        if outcome == BlockOutcome::Sdc && cfg.scheme.enhanced() && heads {
            outcome = BlockOutcome::Due;
        }
        match outcome {
            BlockOutcome::Due => {
                hist.first_due = Some(a.time);
                break;
            }
            BlockOutcome::Sdc if hist.first_sdc.is_none() => hist.first_sdc = Some(a.time),
            _ => {}
        }
    }
    hist
}

pub fn run_lifetime(cfg: &LifetimeConfig, trials: u64, seed: u64) -> Result<LifetimeCurve> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let times = cfg.sample_times();
    let zero = || (vec![0u64; times.len()], vec![0u64; times.len()]);
    let (due, sdc) = (0..trials)
        .into_par_iter()
        .map(|t| run_lifetime_trial(cfg, t, seed))
        .fold(zero, |(mut due, mut sdc), h| {
            for (i, &t) in times.iter().enumerate() {
                due[i] += h.first_due.is_some_and(|x| x <= t) as u64;
                sdc[i] += h.first_sdc.is_some_and(|x| x <= t) as u64;
            }
            (due, sdc)
        })
        .reduce(zero, |a, b| {
            (a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(), a.1.iter().zip(&b.1).map(|(x, y)| x + y).collect())
        });
    let n = trials as f64;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let points = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (pd, ps) = (due[i] as f64 / n, sdc[i] as f64 / n);
            CurvePoint { time_hours: t, due_prob: pd, sdc_prob: ps, due_stderr: se(pd), sdc_stderr: se(ps) }
        })
        .collect();
    Ok(LifetimeCurve { scheme: cfg.scheme, trials, points })
}
