//! Trace records, the text trace format, and the synthetic generator.
//!
//! One record per line: `<arrival_cycle> <R|W> <hex_address>`, with `#`
//! starting a comment. Records must be sorted by arrival cycle.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReqKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemRequest {
    pub arrival: u64,
    pub kind: ReqKind,
    pub addr: u64,
}

pub fn parse_trace(text: &str) -> Result<Vec<MemRequest>> {
    let mut out = Vec::new();
    let mut last = 0u64;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |m: String| Error::TraceParse { line: line_no, message: m };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let arrival: u64 = fields[0].parse().map_err(|_| err(format!("bad cycle '{}'", fields[0])))?;
        let kind = match fields[1] {
            "R" | "r" => ReqKind::Read,
            "W" | "w" => ReqKind::Write,
            other => return Err(err(format!("bad request kind '{other}'"))),
        };
        let hex = fields[2].trim_start_matches("0x").trim_start_matches("0X");
        let addr = u64::from_str_radix(hex, 16).map_err(|_| err(format!("bad address '{}'", fields[2])))?;
        if arrival < last {
            return Err(err(format!("arrival {arrival} before previous {last}")));
        }
        last = arrival;
        out.push(MemRequest { arrival, kind, addr });
    }
    Ok(out)
}

pub fn format_trace(trace: &[MemRequest]) -> String {
    let mut s = String::with_capacity(trace.len() * 24);
    for r in trace {
        let k = if r.kind == ReqKind::Read { 'R' } else { 'W' };
        let _ = writeln!(s, "{} {} 0x{:x}", r.arrival, k, r.addr);
    }
    s
}

/// Knobs of the synthetic trace generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceProfile {
    pub read_fraction: f64,
    /// Probability that a request continues in the previous request's row.
    pub locality: f64,
    /// Distinct DRAM rows touched.
    pub footprint_rows: u64,
    /// Mean requests per cycle.
    pub arrival_rate: f64,
    pub length: usize,
}

impl Default for TraceProfile {
    fn default() -> Self {
        Self { read_fraction: 0.75, locality: 0.5, footprint_rows: 1 << 16, arrival_rate: 0.25, length: 100_000 }
    }
}

impl TraceProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return Err(Error::config(format!("read fraction {} outside [0, 1]", self.read_fraction)));
        }
        if !(0.0..=1.0).contains(&self.locality) {
            return Err(Error::config(format!("locality {} outside [0, 1]", self.locality)));
        }
        if self.footprint_rows == 0 || self.footprint_rows > 1 << 40 {
            return Err(Error::config("footprint must be between 1 and 2^40 rows"));
        }
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::config("arrival rate must be positive"));
        }
        Ok(())
    }
}

const LINES_PER_ROW: u64 = 128;

pub fn generate_trace(profile: &TraceProfile, seed: u64) -> Result<Vec<MemRequest>> {
    profile.validate()?;
    let mut rng = SimRng::for_stream(seed, domain::TRACE, 0);
    let mut out = Vec::with_capacity(profile.length);
    let mut clock = 0.0f64;
    let mut row = rng.below(profile.footprint_rows);
    let mut col = rng.below(LINES_PER_ROW);
    for i in 0..profile.length {
        clock += rng.exponential(profile.arrival_rate);
        if i > 0 {
            if rng.bernoulli(profile.locality) {
                col = (col + 1) % LINES_PER_ROW;
            } else {
                row = rng.below(profile.footprint_rows);
                col = rng.below(LINES_PER_ROW);
            }
        }
        let kind = if rng.bernoulli(profile.read_fraction) { ReqKind::Read } else { ReqKind::Write };
        out.push(MemRequest { arrival: clock as u64, kind, addr: (row * LINES_PER_ROW + col) << 6 });
    }
    Ok(out)
}

/// Synthetic memory-intensive workloads used for the timing experiments.
pub fn bundled_suite(length: usize) -> Vec<(&'static str, TraceProfile)> {
    let p = |read_fraction, locality, footprint_rows, arrival_rate| TraceProfile {
        read_fraction,
        locality,
        footprint_rows,
        arrival_rate,
        length,
    };
    vec![
        ("stream", p(0.80, 0.90, 1 << 14, 0.20)),
        ("random", p(0.75, 0.05, 1 << 20, 0.20)),
        ("mixed", p(0.85, 0.50, 1 << 16, 0.20)),
        ("graph", p(0.90, 0.20, 1 << 18, 0.20)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let t = parse_trace("# header\n0 R 0x40\n\n5 W 1f80 # tail\n5 r 0X0\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0], MemRequest { arrival: 0, kind: ReqKind::Read, addr: 0x40 });
        assert_eq!(t[1], MemRequest { arrival: 5, kind: ReqKind::Write, addr: 0x1f80 });
        assert_eq!(parse_trace(&format_trace(&t)).unwrap(), t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [("0 R 0\n1 X 0\n", 2), ("0 R zz\n", 1), ("5 R 0\n# c\n4 W 0\n", 3), ("1 R\n", 1)] {
            match parse_trace(text) {
                Err(Error::TraceParse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn all_reads_profile_has_no_writes() {
        let t = generate_trace(&TraceProfile { read_fraction: 1.0, ..Default::default() }, 1).unwrap();
        assert!(t.iter().all(|r| r.kind == ReqKind::Read));
        assert!(t.windows(2).all(|w| w[0].arrival <= w[1].arrival));
    }

    #[test]
    fn write_share_concentrates() {
        let prof = TraceProfile { read_fraction: 0.67, length: 1_000_000, ..Default::default() };
        let t = generate_trace(&prof, 3).unwrap();
        let w = t.iter().filter(|r| r.kind == ReqKind::Write).count() as f64 / t.len() as f64;
        assert!((w - 0.33).abs() < 0.01, "{w}");
    }

    #[test]
    fn generation_is_deterministic() {
        let p = TraceProfile { length: 1000, ..Default::default() };
        assert_eq!(generate_trace(&p, 9).unwrap(), generate_trace(&p, 9).unwrap());
        assert_ne!(generate_trace(&p, 9).unwrap(), generate_trace(&p, 10).unwrap());
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(generate_trace(&TraceProfile { read_fraction: 1.5, ..Default::default() }, 0).is_err());
        assert!(generate_trace(&TraceProfile { footprint_rows: 0, ..Default::default() }, 0).is_err());
        assert!(generate_trace(&TraceProfile { arrival_rate: 0.0, ..Default::default() }, 0).is_err());
    }
}
