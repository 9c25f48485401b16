//! `section.key = value` experiment configuration.
//!
//! One setting per line. `#` starts a comment, blank lines are ignored,
//! and the global keys `seed`, `out` and `format` take no section. Lists
//! are comma separated. Every key must appear in [`KNOWN_KEYS`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use screme_core::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "format",
    "coverage.scenarios",
    "coverage.schemes",
    "coverage.trials",
    "coverage.spare_chips",
    "coverage.scf_sampling",
    "coverage.ondie_mode",
    "coverage.beta_log",
    "timing.trace",
    "timing.profile",
    "timing.length",
    "timing.read_fraction",
    "timing.locality",
    "timing.footprint_rows",
    "timing.arrival_rate",
    "timing.ratios",
    "timing.error_rates",
    "timing.error_ratio",
    "timing.plans",
    "timing.failed_row",
    "timing.frame_threshold",
    "timing.buffer_latency",
    "timing.cl",
    "timing.rcd",
    "timing.rp",
    "timing.ras",
    "timing.ccd_s",
    "timing.ccd_l",
    "timing.ccd_l_wr",
    "timing.burst",
    "timing.cwl",
    "timing.wr",
    "timing.wtr_s",
    "timing.wtr_l",
    "timing.rtw",
    "timing.rtp",
    "timing.rank_switch",
    "timing.write_queue",
    "timing.read_queue",
    "timing.drain_high",
    "timing.drain_low",
    "lifetime.schemes",
    "lifetime.trials",
    "lifetime.chips_per_module",
    "lifetime.fit_sbf",
    "lifetime.fit_dbf",
    "lifetime.fit_scf",
    "lifetime.fit_multiplier",
    "lifetime.mission_hours",
    "lifetime.time_samples",
    "lifetime.pre_failed_chips",
    "lifetime.spare_chips",
    "topology.initial",
    "topology.wo_ratio",
    "topology.split_parity",
    "topology.events",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(format!("line {line_no}: expected 'section.key = value'")));
            };
            let key = k.trim().to_ascii_lowercase();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("line {line_no}: unknown key '{}'", k.trim())));
            }
            if entries.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
                return Err(Error::config(format!("line {line_no}: duplicate key '{key}'")));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KNOWN_KEYS.contains(&key));
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn has_any(&self, keys: &[&str]) -> bool {
        keys.iter().any(|k| self.entries.contains_key(*k))
    }

    fn err(&self, key: &str, msg: impl Display) -> Error {
        match self.entries.get(key) {
            Some((_, line)) if *line > 0 => Error::config(format!("line {line}: {key}: {msg}")),
            _ => Error::config(format!("{key}: {msg}")),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("'{v}': {e}"))),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(self.err(key, "empty list"));
        }
        items
            .into_iter()
            .map(|s| s.parse().map_err(|e| self.err(key, format!("'{s}': {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Canonical `key = value` text, one line per key in sorted order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, (v, _))| format!("{k} = {v}\n")).collect()
    }
}
