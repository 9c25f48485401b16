//! Acceptance suite. Runs as a plain binary so the PASS/FAIL lines always
//! reach the test log; exits nonzero if any criterion fails.

use std::time::Instant;

use screme_core::coverage_mc::{compare_decoupled, run_coverage, CoverageConfig, Scheme};
use screme_core::dimm_topology::{DimmTopology, RankPlan};
use screme_core::fault_model::ScenarioKind;
use screme_core::gf256::{self, FieldElement as Fe};
use screme_core::lifetime_mc::{run_lifetime, LifetimeConfig, LifetimeCurve, LifetimeScheme};
use screme_core::rng::SimRng;
use screme_core::rs_codec::{
    decode_dsd_ssc, decode_ssc, decode_with_erasures, encode, DecodeKind, ErasurePolicy, EvalPoints, DATA_SYMBOLS,
};
use screme_core::timing_sim::{bundled_suite, generate_trace, simulate, simulate_with_errors, TimingParams};

const SEED: u64 = 1;

type Criterion = fn(&mut Check);

/// Collects failed checks and informational lines for one criterion.
#[derive(Default)]
struct Check {
    fails: Vec<String>,
    info: Vec<String>,
}

impl Check {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.fails.push(what.into());
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.info.push(format!("{what}: {got:.4} (target {want} ± {tol})"));
        self.expect((got - want).abs() <= tol, format!("{what}: {got:.4} outside {want} ± {tol}"));
    }

    fn exact(&mut self, what: &str, got: f64, want: f64) {
        self.expect(got == want, format!("{what}: {got} != {want}"));
    }
}

fn kind(label: &str) -> ScenarioKind {
    label.parse().expect("scenario label")
}

fn c1_chipkill_rows(c: &mut Check) {
    let cfg = CoverageConfig::default();
    let row = |label: &str| run_coverage(&kind(label), Scheme::ChipKillOnly, 1_000_000, SEED, &cfg).unwrap();
    for label in ["SBF", "DBF", "SCF"] {
        c.exact(&format!("{label} DCE%"), row(label).dce_pct(), 100.0);
    }
    let r = row("SBF+SBF");
    c.near("SBF+SBF DCE%", r.dce_pct(), 87.507, 0.15);
    c.near("SBF+SBF SDC%", r.sdc_pct(), 0.392, 0.05);
    let r = row("SBF+SBF+SBF");
    c.near("SBF+SBF+SBF DCE%", r.dce_pct(), 65.625, 0.2);
    c.near("SBF+SBF+SBF SDC%", r.sdc_pct(), 1.072, 0.1);
    c.near("SBF+SCF SDC%", row("SBF+SCF").sdc_pct(), 3.137, 0.1);
    c.near("SCF+SCF SDC%", row("SCF+SCF").sdc_pct(), 22.508, 0.3);
}

fn c2_decoupled(c: &mut Check) {
    let cfg = CoverageConfig::default();
    let det = run_coverage(&kind("SBF+SBF"), Scheme::DecoupledDetectPhase, 1_000_000, SEED, &cfg).unwrap();
    c.near("detect-phase SBF+SBF SDC%", det.sdc_pct(), 0.049, 0.02);
    for k in ScenarioKind::table() {
        let a = compare_decoupled(&k, 1_000_000, SEED, &cfg).unwrap();
        c.expect(a.flagged_mismatches == 0, format!("{k}: {} flagged trials disagree with baseline", a.flagged_mismatches));
        c.expect(a.detect_sdc <= a.correct_sdc, format!("{k}: detect SDC {} > correct SDC {}", a.detect_sdc, a.correct_sdc));
        c.info.push(format!("{k}: flagged {} / {}, SDC detect {} <= correct {}", a.flagged, a.trials, a.detect_sdc, a.correct_sdc));
    }
}

fn c3_erasure_columns(c: &mut Check) {
    let cfg = CoverageConfig::default();
    // scenarios where on-die flags two or more chips and ChipKill alone is left with DUE
    let ondie_due = ["DBF+DBF", "DBF+DBF+DBF", "DBF+SCF", "SCF+SCF"];
    for k in ScenarioKind::table() {
        let label = k.to_string();
        for scheme in [Scheme::ChipKillWithOnDie, Scheme::Dddc, Scheme::ScremeFramework] {
            let r = run_coverage(&k, scheme, 100_000, SEED, &cfg).unwrap();
            let want_due = scheme == Scheme::ChipKillWithOnDie && ondie_due.contains(&label.as_str());
            let (dce, due) = if want_due { (0, r.trials) } else { (r.trials, 0) };
            c.expect(r.dce == dce && r.due == due && r.sdc == 0, format!("{label} {scheme}: {}/{}/{}", r.dce, r.due, r.sdc));
        }
    }
}

fn c4_dbf_pair(c: &mut Check) {
    let r = run_coverage(&kind("DBF+DBF"), Scheme::ChipKillOnly, 1_000_000, SEED, &CoverageConfig::default()).unwrap();
    c.near("DBF+DBF DCE fraction", r.dce as f64 / r.trials as f64, 0.5822, 0.003);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dbf.cfg");
    std::fs::write(&cfg, "coverage.scenarios = DBF+DBF\ncoverage.schemes = ChipKillOnly\n").unwrap();
    let code = screme_cli::run_with(["screme", "coverage", "--trials", "1000", "--config", cfg.to_str().unwrap()], &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    c.expect(code == 0, "coverage command failed");
    c.expect(text.lines().any(|l| l.starts_with("# note:") && l.contains("46.875")), "report lacks the DBF+DBF discrepancy note");
}

fn c5_timing(c: &mut Check) {
    let p = TimingParams::default();
    let base = DimmTopology::baseline();
    let ideal = RankPlan::identity();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = bundled_suite(1_000_000)
            .into_iter()
            .map(|(name, prof)| {
                let (p, base, ideal) = (&p, &base, &ideal);
                s.spawn(move || {
                    let trace = generate_trace(&prof, SEED).unwrap();
                    let reference = simulate(&trace, p, base, ideal).unwrap();
                    let ratios: Vec<(f64, f64)> = [0.5, 0.375, 0.25, 0.125]
                        .iter()
                        .map(|&r| (r, simulate(&trace, p, &base.apply_screme_wo(r).unwrap(), ideal).unwrap().slowdown(&reference)))
                        .collect();
                    let topo = base.apply_screme_wo(0.5).unwrap();
                    let errs: Vec<f64> = [1e-6, 1e-3]
                        .iter()
                        .map(|&e| simulate_with_errors(&trace, p, &topo, ideal, e, SEED).unwrap().slowdown(&reference))
                        .collect();
                    let th = |plan: &RankPlan| simulate(&trace, p, base, plan).unwrap().throughput;
                    let plans = (th(&RankPlan::half_rank()), th(&RankPlan::for_failed_rows(&[0]).unwrap()), reference.throughput);
                    (name, ratios, errs, plans)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (name, ratios, errs, (half, reorg, ideal)) in results {
        let s = |r: f64| ratios.iter().find(|x| x.0 == r).unwrap().1;
        c.expect(s(0.5) < 1.001, format!("{name}: ratio 0.5 slowdown {}", s(0.5)));
        c.expect(s(0.375) <= 1.05, format!("{name}: ratio 0.375 slowdown {}", s(0.375)));
        let chain = [1.0].into_iter().chain(ratios.iter().map(|x| x.1)).collect::<Vec<_>>();
        c.expect(chain.windows(2).all(|w| w[1] >= w[0]), format!("{name}: slowdown not monotone {chain:?}"));
        c.expect(errs[0] < 1.001, format!("{name}: error rate 1e-6 slowdown {}", errs[0]));
        c.expect(errs[1] > errs[0], format!("{name}: error rate 1e-3 slowdown {} not above {}", errs[1], errs[0]));
        c.expect(half < reorg && reorg <= ideal, format!("{name}: throughput {half} / {reorg} / {ideal}"));
        c.info.push(format!(
            "{name}: slowdown r0.5 {:.5} r0.375 {:.5} r0.25 {:.5}; err 1e-6 {:.5} 1e-3 {:.5}; throughput half {half:.1} reorg {reorg:.1} ideal {ideal:.1}",
            s(0.5),
            s(0.375),
            s(0.25),
            errs[0],
            errs[1]
        ));
    }
}

fn random_data(rng: &mut SimRng) -> [Fe; DATA_SYMBOLS] {
    std::array::from_fn(|_| Fe::new(rng.below(256) as u8))
}

fn c6_codec(c: &mut Check) {
    let p = EvalPoints::default();
    let mut rng = SimRng::new(SEED);

    // every position and magnitude of a single symbol error
    let mut single_fail = 0;
    for chip in 0..10 {
        for e in 1..=255u8 {
            let data = random_data(&mut rng);
            let mut cw = encode(&data, &p, 2).unwrap();
            cw.inject(chip, Fe::new(e));
            if decode_ssc(&cw, &p).unwrap().data != Some(data) {
                single_fail += 1;
            }
        }
    }
    c.expect(single_fail == 0, format!("{single_fail} single-symbol errors not corrected"));

    // all double errors over all 11 positions; linearity makes one data word enough
    let data = random_data(&mut rng);
    let clean = encode(&data, &p, 3).unwrap();
    let mut miscorrected = 0u64;
    let mut swept = 0u64;
    for a in 0..11 {
        for b in (a + 1)..11 {
            for ea in 1..=255u8 {
                for eb in 1..=255u8 {
                    let mut cw = clean;
                    cw.inject(a, Fe::new(ea));
                    cw.inject(b, Fe::new(eb));
                    swept += 1;
                    if decode_dsd_ssc(&cw, &p).unwrap().kind != DecodeKind::Uncorrectable {
                        miscorrected += 1;
                    }
                }
            }
        }
    }
    c.expect(miscorrected == 0, format!("DSD-SSC: {miscorrected} of {swept} double errors not flagged"));
    c.info.push(format!("DSD-SSC double-error sweep: {swept} patterns"));

    // erasure capability: 1 erasure with 2 checks, 2 with 3 checks, rejected beyond
    let mut erasure_fail = Vec::new();
    for checks in [2usize, 3] {
        let cap = ErasurePolicy::Guarded.capacity(checks);
        if cap != checks - 1 {
            erasure_fail.push(format!("capacity({checks}) = {cap}"));
        }
        for _ in 0..2000 {
            let data = random_data(&mut rng);
            let mut cw = encode(&data, &p, checks).unwrap();
            let chips: Vec<usize> = rng.distinct((8 + checks) as u64, cap + 1).into_iter().map(|c| c as usize).collect();
            for &ch in &chips {
                cw.inject(ch, Fe::new(rng.range(1, 256) as u8));
            }
            if decode_with_erasures(&cw, &p, &chips[..cap], ErasurePolicy::Guarded).unwrap().kind != DecodeKind::Uncorrectable {
                // cap erasures plus an unknown error must not be silently accepted
                erasure_fail.push(format!("{checks} checks: erasures {:?} + unknown error accepted", &chips[..cap]));
                break;
            }
            let mut only = encode(&data, &p, checks).unwrap();
            for &ch in &chips[..cap] {
                only.inject(ch, Fe::new(rng.range(1, 256) as u8));
            }
            if decode_with_erasures(&only, &p, &chips[..cap], ErasurePolicy::Guarded).unwrap().data != Some(data) {
                erasure_fail.push(format!("{checks} checks: {cap} erasures not recovered"));
                break;
            }
            if decode_with_erasures(&cw, &p, &chips, ErasurePolicy::Guarded).unwrap().kind != DecodeKind::Uncorrectable {
                erasure_fail.push(format!("{checks} checks: {} erasures accepted", cap + 1));
                break;
            }
        }
    }
    c.expect(erasure_fail.is_empty(), erasure_fail.join("; "));

    // field laws, with multiplication checked against shift-and-add
    let slow_mul = |mut a: u8, mut b: u8| {
        let mut r = 0u8;
        while b != 0 {
            if b & 1 == 1 {
                r ^= a;
            }
            a = (a << 1) ^ if a & 0x80 != 0 { 0x1D } else { 0 };
            b >>= 1;
        }
        r
    };
    let mut law_fail = 0;
    for _ in 0..100_000 {
        let (x, y, z) = (rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8);
        let (a, b, cc) = (Fe::new(x), Fe::new(y), Fe::new(z));
        let ok = (a * b) * cc == a * (b * cc)
            && a * b == b * a
            && (a + b) + cc == a + (b + cc)
            && a * (b + cc) == a * b + a * cc
            && a + a == Fe::new(0)
            && a * Fe::new(1) == a
            && (a * b).value() == slow_mul(x, y)
            && (x == 0 || (a * gf256::inv(a).unwrap() == Fe::new(1) && gf256::div(a * b, a).unwrap() == b));
        if !ok {
            law_fail += 1;
        }
    }
    c.expect(law_fail == 0, format!("{law_fail} random triples violate a field law"));
}

fn curve(scheme: LifetimeScheme, mult: f64, pre: usize) -> LifetimeCurve {
    let cfg = LifetimeConfig { scheme, fit_multiplier: mult, pre_failed_chips: pre, ..LifetimeConfig::default() };
    run_lifetime(&cfg, 10_000, SEED).unwrap()
}

fn c7_lifetime(c: &mut Check) {
    let mut curves = Vec::new();
    for (mult, pre) in [(1.0, 0), (1.0, 1), (10.0, 1)] {
        let set: Vec<LifetimeCurve> = LifetimeScheme::ALL.iter().map(|&s| curve(s, mult, pre)).collect();
        for cv in &set {
            let mono = cv.points.windows(2).all(|w| w[1].due_prob >= w[0].due_prob && w[1].sdc_prob >= w[0].sdc_prob);
            c.expect(mono, format!("{} ({mult}x, {pre} pre-failed): curve not monotone", cv.scheme));
        }
        let (ck, sc) = (&set[0], &set[2]);
        for (a, b) in ck.points.iter().zip(&sc.points) {
            c.expect(
                b.due_prob <= a.due_prob,
                format!("{mult}x, {pre} pre-failed, t={}: SCREME DUE {} > ChipKill DUE {}", a.time_hours, b.due_prob, a.due_prob),
            );
        }
        c.info.push(format!(
            "{mult}x FIT, {pre} pre-failed: final DUE {}",
            set.iter().map(|cv| format!("{} {:.4}", cv.scheme, cv.final_point().due_prob)).collect::<Vec<_>>().join(", ")
        ));
        curves.push(set);
    }
    let (clean, prefailed, high) = (&curves[0], &curves[1], &curves[2]);
    for (a, b) in clean[0].points.iter().zip(&prefailed[0].points).skip(1) {
        c.expect(b.due_prob > a.due_prob, format!("t={}: pre-failed chip does not raise ChipKill DUE", a.time_hours));
    }
    let (ck, sc) = (prefailed[0].final_point().due_prob, prefailed[2].final_point().due_prob);
    c.expect(sc < ck, format!("pre-failed chip: SCREME final DUE {sc} not below ChipKill {ck}"));
    // 10x FIT pushes every scheme's DUE up from the 1x level
    for (lo, hi) in prefailed.iter().zip(high) {
        let (a, b) = (lo.final_point().due_prob, hi.final_point().due_prob);
        c.expect(b > a, format!("{}: 10x FIT final DUE {b} not above 1x {a}", lo.scheme));
    }
}

fn c8_determinism(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let topo_cfg = dir.path().join("t.cfg");
    std::fs::write(&topo_cfg, "topology.wo_ratio = 0.5\ntopology.events = chip:0:3, control:2\n").unwrap();
    let topo_cfg = topo_cfg.to_str().unwrap();
    let runs: [&[&str]; 8] = [
        &["coverage", "--trials", "20000", "--seed", "3"],
        &["coverage", "--trials", "20000", "--seed", "3", "--format", "json"],
        &["timing", "--trials", "20000", "--seed", "3"],
        &["timing", "--trials", "20000", "--seed", "3", "--format", "json"],
        &["lifetime", "--trials", "5000", "--seed", "3"],
        &["lifetime", "--trials", "5000", "--seed", "3", "--format", "json"],
        &["topology", "--config", topo_cfg],
        &["topology", "--config", topo_cfg, "--format", "json"],
    ];
    for args in runs {
        let once = || {
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = screme_cli::run_with(std::iter::once("screme").chain(args.iter().copied()), &mut out, &mut err);
            (code, out)
        };
        let (a, b) = (once(), once());
        c.expect(a.0 == 0 && b.0 == 0, format!("{args:?}: exit codes {} {}", a.0, b.0));
        c.expect(a.1 == b.1 && !a.1.is_empty(), format!("{args:?}: outputs differ"));
    }
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("C1 ChipKill-only analytic rows (1e6 trials)", c1_chipkill_rows),
        ("C2 decoupled detect/correct phases (1e6 trials)", c2_decoupled),
        ("C3 on-die, DDDC and SCREME columns exact (1e5 trials)", c3_erasure_columns),
        ("C4 DBF+DBF closed form and discrepancy note", c4_dbf_pair),
        ("C5 timing properties on the bundled suite (1e6 requests)", c5_timing),
        ("C6 codec property suite", c6_codec),
        ("C7 lifetime orderings (1e4 trials)", c7_lifetime),
        ("C8 byte-identical reruns of every subcommand", c8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let mut c = Check::default();
        f(&mut c);
        let verdict = if c.fails.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} {name} [{:.1}s]", start.elapsed().as_secs_f64());
        for line in &c.info {
            println!("     {line}");
        }
        for line in &c.fails {
            println!("     failed: {line}");
        }
        failed += !c.fails.is_empty() as usize;
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
