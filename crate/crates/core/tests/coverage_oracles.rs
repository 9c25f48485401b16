//! Exact enumeration oracles for the baseline coverage rows.
//!
//! SSC decoding is linear, so the outcome of a codeword depends only on its
//! error pattern. The oracles below enumerate every pattern with their own
//! field arithmetic and locator search and compare against the Monte Carlo.

use screme_core::coverage_mc::{run_coverage, CoverageConfig, CoverageRow, Scheme};
use screme_core::fault_model::ScenarioKind;
use screme_core::rs_codec::EvalPoints;

fn gmul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1D;
        }
        b >>= 1;
    }
    p
}

fn gpow(a: u8, e: usize) -> u8 {
    (0..e).fold(1, |acc, _| gmul(acc, a))
}

fn ginv(a: u8) -> u8 {
    (1..=255u8).find(|&b| gmul(a, b) == 1).unwrap()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Cw {
    Ok,
    Due,
    Wrong,
}

struct Oracle {
    x0: u8,
    x1: u8,
}

impl Oracle {
    fn new() -> Self {
        let p = EvalPoints::default();
        Self { x0: p.x(0).value(), x1: p.x(1).value() }
    }

    /// SSC outcome for errors `(chip, value)` on distinct chips 0..10.
    fn ssc(&self, errs: &[(usize, u8)]) -> Cw {
        let (mut s0, mut s1) = (0u8, 0u8);
        let mut data_err = [0u8; 8];
        for &(c, e) in errs {
            match c {
                8 => s0 ^= e,
                9 => s1 ^= e,
                _ => {
                    s0 ^= gmul(e, gpow(self.x0, c));
                    s1 ^= gmul(e, gpow(self.x1, c));
                    data_err[c] ^= e;
                }
            }
        }
        let mut fix = [0u8; 8];
        match (s0, s1) {
            (0, 0) | (_, 0) | (0, _) => {}
            _ => {
                let hit = (0..8).find(|&i| gmul(s0, gpow(self.x1, i)) == gmul(s1, gpow(self.x0, i)));
                match hit {
                    Some(i) => fix[i] = gmul(s0, ginv(gpow(self.x0, i))),
                    None => return Cw::Due,
                }
            }
        }
        if (0..8).all(|i| data_err[i] == fix[i]) {
            Cw::Ok
        } else {
            Cw::Wrong
        }
    }

    /// Detect phase: data and p0 only; a nonzero S0 flags.
    fn detect(&self, errs: &[(usize, u8)]) -> Cw {
        let mut s0 = 0u8;
        let mut data = false;
        for &(c, e) in errs {
            match c {
                8 => s0 ^= e,
                9 => {}
                _ => {
                    s0 ^= gmul(e, gpow(self.x0, c));
                    data = true;
                }
            }
        }
        match (s0, data) {
            (0, true) => Cw::Wrong,
            (0, false) => Cw::Ok,
            _ => Cw::Due,
        }
    }
}

/// (dce, due, sdc) fractions.
type Split = (f64, f64, f64);

fn within(row: &CoverageRow, exact: Split, sigmas: f64) {
    let n = row.trials as f64;
    for (got, p, name) in [(row.dce, exact.0, "DCE"), (row.due, exact.1, "DUE"), (row.sdc, exact.2, "SDC")] {
        let se = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
        let f = got as f64 / n;
        assert!((f - p).abs() <= sigmas * se, "{} {} {name}: MC {f:.6} vs exact {p:.6}", row.scenario, row.scheme);
    }
}

fn mc(label: &str, scheme: Scheme, trials: u64) -> CoverageRow {
    run_coverage(&label.parse::<ScenarioKind>().unwrap(), scheme, trials, 11, &CoverageConfig::default()).unwrap()
}

fn sbf_pair_exact(o: &Oracle, f: impl Fn(&Oracle, &[(usize, u8)]) -> Cw) -> Split {
    // different codewords (7/8): two single errors, never wrong under SSC
    let (mut due, mut wrong, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..10 {
        for b in (0..10).filter(|&b| b != a) {
            for ba in 0..8 {
                for bb in 0..8 {
                    n += 1.0;
                    match f(o, &[(a, 1 << ba), (b, 1 << bb)]) {
                        Cw::Due => due += 1.0,
                        Cw::Wrong => wrong += 1.0,
                        Cw::Ok => {}
                    }
                }
            }
        }
    }
    (due / n / 8.0, wrong / n / 8.0, 0.0)
}

#[test]
fn sbf_pair_matches_enumeration() {
    let o = Oracle::new();
    let (due, sdc, _) = sbf_pair_exact(&o, Oracle::ssc);
    assert!((sdc - 0.003863).abs() < 2e-6, "{sdc}");
    within(&mc("SBF+SBF", Scheme::ChipKillOnly, 200_000), (1.0 - due - sdc, due, sdc), 4.5);
}

#[test]
fn detect_phase_sbf_pair_matches_enumeration() {
    let o = Oracle::new();
    let (_, sdc, _) = sbf_pair_exact(&o, Oracle::detect);
    assert!((sdc - 0.000521).abs() < 2e-6, "{sdc}");
    let row = mc("SBF+SBF", Scheme::DecoupledDetectPhase, 400_000);
    let n = row.trials as f64;
    assert!((row.sdc as f64 / n - sdc).abs() <= 4.5 * (sdc / n).sqrt(), "{}", row.sdc);
}

#[test]
fn sbf_scf_matches_enumeration() {
    let o = Oracle::new();
    let (mut due, mut wrong, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..10 {
        for c in (0..10).filter(|&c| c != a) {
            for bit in 0..8 {
                for e in 1..=255u8 {
                    n += 1.0;
                    match o.ssc(&[(a, 1 << bit), (c, e)]) {
                        Cw::Due => due += 1.0,
                        Cw::Wrong => wrong += 1.0,
                        Cw::Ok => {}
                    }
                }
            }
        }
    }
    let (due, sdc) = (due / n, wrong / n);
    // close to the 8/255 rule of thumb
    assert!((sdc - 8.0 / 255.0).abs() < 0.002, "{sdc}");
    within(&mc("SBF+SCF", Scheme::ChipKillOnly, 200_000), (1.0 - due - sdc, due, sdc), 4.5);
}

#[test]
fn scf_pair_matches_enumeration() {
    let o = Oracle::new();
    let (mut due_sum, mut sdc_sum, mut pairs) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..10 {
        for b in (a + 1)..10 {
            let (mut d, mut w) = (0.0f64, 0.0f64);
            for ea in 1..=255u8 {
                for eb in 1..=255u8 {
                    match o.ssc(&[(a, ea), (b, eb)]) {
                        Cw::Due => d += 1.0,
                        Cw::Wrong => w += 1.0,
                        Cw::Ok => {}
                    }
                }
            }
            let (pd, pw) = (d / 65025.0, w / 65025.0);
            let p_ok = 1.0 - pd - pw;
            // eight independent codewords; any wrong one makes the block SDC
            sdc_sum += 1.0 - (1.0 - pw).powi(8);
            due_sum += (1.0 - pw).powi(8) - p_ok.powi(8);
            pairs += 1.0;
        }
    }
    let (due, sdc) = (due_sum / pairs, sdc_sum / pairs);
    assert!((sdc - (1.0 - (247.0f64 / 255.0).powi(8))).abs() < 0.005, "{sdc}");
    within(&mc("SCF+SCF", Scheme::ChipKillOnly, 100_000), (1.0 - due - sdc, due, sdc), 4.5);
}

#[test]
fn dbf_pair_dce_closed_form() {
    // a DBF touches one codeword w.p. 7/63 and two w.p. 56/63; DCE iff the
    // two chips' codeword sets are disjoint
    let (p1, p2) = (7.0f64 / 63.0, 56.0 / 63.0);
    let dce = p1 * p1 * (7.0 / 8.0) + 2.0 * p1 * p2 * (6.0 / 8.0) + p2 * p2 * (15.0 / 28.0);
    assert!((dce - 0.5822).abs() < 1e-4, "{dce}");
    let row = mc("DBF+DBF", Scheme::ChipKillOnly, 200_000);
    let n = row.trials as f64;
    assert!((row.dce as f64 / n - dce).abs() < 4.5 * (dce * (1.0 - dce) / n).sqrt());
}

#[test]
fn sbf_triple_dce_closed_form() {
    // all three bits in distinct codewords
    let dce = 7.0 / 8.0 * 6.0 / 8.0;
    let row = mc("SBF+SBF+SBF", Scheme::ChipKillOnly, 200_000);
    let n = row.trials as f64;
    assert!((row.dce as f64 / n - dce).abs() < 4.5 * (dce * (1.0 - dce) / n).sqrt());
}

#[test]
fn single_faults_are_always_corrected() {
    for label in ["SBF", "DBF", "SCF"] {
        for scheme in [Scheme::ChipKillOnly, Scheme::DecoupledCorrectPhase, Scheme::Dddc, Scheme::ScremeFramework] {
            let row = mc(label, scheme, 20_000);
            assert_eq!(row.dce, row.trials, "{label} {scheme}");
        }
    }
}
