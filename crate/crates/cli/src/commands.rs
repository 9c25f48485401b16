use std::collections::BTreeSet;

use serde_json::{json, Value};

use screme_core::coverage_mc::{self, CoverageConfig, CoverageRow, Scheme};
use screme_core::dimm_topology::{DimmTopology, FailureEvent, RankPlan};
use screme_core::fault_model::{ScenarioKind, ScfSampling};
use screme_core::lifetime_mc::{self, LifetimeConfig, LifetimeCurve, LifetimeScheme};
use screme_core::ondie_ecc::OnDieMode;
use screme_core::rs_codec::EvalPoints;
use screme_core::timing_sim::{self, MemRequest, SimReport, TimingParams, TraceProfile};

use crate::{Failure, Format, Run};

type CmdResult = Result<String, Failure>;

fn csv_text(header: &[&str], rows: &[Vec<String>], comments: &[String]) -> CmdResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Failure::new(1, format!("csv: {e}"));
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(r).map_err(internal)?;
    }
    let mut text = String::from_utf8(w.into_inner().map_err(|e| Failure::new(1, e.to_string()))?).expect("utf-8 fields");
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    Ok(text)
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn coverage_config(run: &Run) -> Result<CoverageConfig, Failure> {
    let c = &run.config;
    let mut cfg = CoverageConfig::default();
    if let Some(l) = c.get::<i64>("coverage.beta_log")? {
        cfg.points = EvalPoints::from_beta_log(l)?;
    }
    cfg.spare_chips = c.get_or("coverage.spare_chips", cfg.spare_chips)?;
    if let Some(v) = c.raw("coverage.scf_sampling") {
        cfg.sampler.scf = match v.to_ascii_lowercase().as_str() {
            "nonzero" => ScfSampling::NonzeroSymbols,
            "uniform" => ScfSampling::UniformSymbols,
            _ => return Err(Failure::config(format!("coverage.scf_sampling: '{v}' (nonzero or uniform)"))),
        };
    }
    if let Some(v) = c.raw("coverage.ondie_mode") {
        cfg.ondie_mode = match v.to_ascii_lowercase().as_str() {
            "marker" => OnDieMode::Marker,
            "physical" => OnDieMode::Physical,
            _ => return Err(Failure::config(format!("coverage.ondie_mode: '{v}' (marker or physical)"))),
        };
    }
    Ok(cfg)
}

pub fn coverage(run: &Run) -> CmdResult {
    let c = &run.config;
    let scenarios = c.list::<ScenarioKind>("coverage.scenarios")?.unwrap_or_else(ScenarioKind::table);
    let schemes = c.list::<Scheme>("coverage.schemes")?.unwrap_or_else(|| Scheme::ALL.to_vec());
    let trials = match run.trials {
        Some(t) => t,
        None => c.get_or("coverage.trials", 100_000u64)?,
    };
    if trials == 0 {
        return Err(Failure::config("coverage.trials must be at least 1"));
    }
    let cfg = coverage_config(run)?;

    let mut rows: Vec<CoverageRow> = Vec::new();
    let mut notes = Vec::new();
    for kind in &scenarios {
        for &scheme in &schemes {
            rows.push(coverage_mc::run_coverage(kind, scheme, trials, run.seed, &cfg)?);
            if let Some(n) = coverage_mc::reference_note(kind, scheme) {
                if !notes.contains(&n) {
                    notes.push(n);
                }
            }
        }
    }
    match run.format {
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.scenario.clone(),
                        r.scheme.to_string(),
                        r.trials.to_string(),
                        format!("{:.3}", r.dce_pct()),
                        format!("{:.3}", r.due_pct()),
                        format!("{:.3}", r.sdc_pct()),
                        format!("{:.4}", r.stderr_pct()),
                    ]
                })
                .collect();
            let comments: Vec<String> = notes.iter().map(|n| format!("note: {n}")).collect();
            csv_text(&["scenario", "scheme", "trials", "dce_pct", "due_pct", "sdc_pct", "stderr_pct"], &body, &comments)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "scenario": r.scenario,
                        "scheme": r.scheme.to_string(),
                        "trials": r.trials,
                        "dce": r.dce, "due": r.due, "sdc": r.sdc,
                        "dce_pct": r.dce_pct(), "due_pct": r.due_pct(), "sdc_pct": r.sdc_pct(),
                        "stderr_pct": r.stderr_pct(),
                    })
                })
                .collect();
            Ok(json_text(&json!({ "seed": run.seed, "rows": rows, "notes": notes })))
        }
    }
}

fn timing_params(run: &Run) -> Result<TimingParams, Failure> {
    let c = &run.config;
    let mut p = TimingParams::default();
    let fields: [(&str, &mut u64); 15] = [
        ("timing.cl", &mut p.cl),
        ("timing.rcd", &mut p.rcd),
        ("timing.rp", &mut p.rp),
        ("timing.ras", &mut p.ras),
        ("timing.ccd_s", &mut p.ccd_s),
        ("timing.ccd_l", &mut p.ccd_l),
        ("timing.ccd_l_wr", &mut p.ccd_l_wr),
        ("timing.burst", &mut p.burst),
        ("timing.cwl", &mut p.cwl),
        ("timing.wr", &mut p.wr),
        ("timing.wtr_s", &mut p.wtr_s),
        ("timing.wtr_l", &mut p.wtr_l),
        ("timing.rtw", &mut p.rtw),
        ("timing.rtp", &mut p.rtp),
        ("timing.rank_switch", &mut p.rank_switch),
    ];
    for (k, f) in fields {
        if let Some(v) = c.get(k)? {
            *f = v;
        }
    }
    let sizes: [(&str, &mut usize); 4] = [
        ("timing.write_queue", &mut p.write_queue_capacity),
        ("timing.read_queue", &mut p.read_queue_capacity),
        ("timing.drain_high", &mut p.drain_high),
        ("timing.drain_low", &mut p.drain_low),
    ];
    for (k, f) in sizes {
        if let Some(v) = c.get(k)? {
            *f = v;
        }
    }
    p.validate()?;
    Ok(p)
}

const PROFILE_KEYS: [&str; 4] = ["timing.read_fraction", "timing.locality", "timing.footprint_rows", "timing.arrival_rate"];

fn timing_traces(run: &Run) -> Result<Vec<(String, Vec<MemRequest>)>, Failure> {
    let c = &run.config;
    if let Some(path) = c.raw("timing.trace") {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::trace(format!("cannot read trace {path}: {e}")))?;
        let trace = timing_sim::parse_trace(&text)?;
        let name = std::path::Path::new(path).file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
        return Ok(vec![(name, trace)]);
    }
    let length = match run.trials {
        Some(t) => t as usize,
        None => c.get_or("timing.length", 100_000usize)?,
    };
    let suite = timing_sim::bundled_suite(length);
    let name = c.raw("timing.profile").unwrap_or(if c.has_any(&PROFILE_KEYS) { "custom" } else { "suite" });
    let mut chosen: Vec<(String, TraceProfile)> = match name.to_ascii_lowercase().as_str() {
        "suite" => suite.into_iter().map(|(n, p)| (n.to_string(), p)).collect(),
        "custom" => vec![("custom".into(), TraceProfile { length, ..TraceProfile::default() })],
        other => match suite.into_iter().find(|(n, _)| *n == other) {
            Some((n, p)) => vec![(n.to_string(), p)],
            None => return Err(Failure::config(format!("timing.profile: unknown profile '{name}'"))),
        },
    };
    for (_, p) in chosen.iter_mut() {
        p.read_fraction = c.get_or("timing.read_fraction", p.read_fraction)?;
        p.locality = c.get_or("timing.locality", p.locality)?;
        p.footprint_rows = c.get_or("timing.footprint_rows", p.footprint_rows)?;
        p.arrival_rate = c.get_or("timing.arrival_rate", p.arrival_rate)?;
    }
    chosen
        .into_iter()
        .map(|(n, p)| Ok((n, timing_sim::generate_trace(&p, run.seed)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PlanKind {
    Ideal,
    Reorganized,
    HalfRank,
}

impl std::str::FromStr for PlanKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "ideal" => Ok(PlanKind::Ideal),
            "reorganized" | "reorganised" | "reorg" => Ok(PlanKind::Reorganized),
            "half-rank" | "halfrank" | "half" => Ok(PlanKind::HalfRank),
            _ => Err(format!("unknown rank plan '{s}' (ideal, reorganized, half-rank)")),
        }
    }
}

impl PlanKind {
    fn label(self) -> &'static str {
        match self {
            PlanKind::Ideal => "ideal",
            PlanKind::Reorganized => "reorganized",
            PlanKind::HalfRank => "half-rank",
        }
    }
}

struct TimingRow {
    trace: String,
    sweep: &'static str,
    setting: String,
    report: SimReport,
    slowdown: f64,
}

pub fn timing(run: &Run) -> CmdResult {
    let c = &run.config;
    let params = timing_params(run)?;
    let mut base = DimmTopology::baseline();
    if let Some(b) = c.get::<u32>("timing.buffer_latency")? {
        base.buffer_latency = b;
    }
    let ratios = c.list::<f64>("timing.ratios")?.unwrap_or_else(|| vec![1.0, 0.5, 0.375]);
    let error_rates = c.list::<f64>("timing.error_rates")?.unwrap_or_default();
    let error_ratio = c.get_or("timing.error_ratio", 0.5f64)?;
    let plans = c.list::<PlanKind>("timing.plans")?.unwrap_or_else(|| vec![PlanKind::Ideal, PlanKind::Reorganized, PlanKind::HalfRank]);
    let failed_row = c.get_or("timing.failed_row", 0usize)?;
    let threshold = c.get_or("timing.frame_threshold", 1.0f64)?;
    let traces = timing_traces(run)?;

    let identity = RankPlan::identity();
    let mut rows = Vec::new();
    for (name, trace) in &traces {
        let reference = timing_sim::simulate(trace, &params, &base, &identity)?;
        for &r in &ratios {
            let topo = base.apply_screme_wo(r)?;
            let rep = timing_sim::simulate(trace, &params, &topo, &identity)?;
            let slowdown = rep.slowdown(&reference);
            rows.push(TimingRow { trace: name.clone(), sweep: "ratio", setting: format!("{r}"), report: rep, slowdown });
        }
        if !error_rates.is_empty() {
            let topo = base.apply_screme_wo(error_ratio)?;
            for &e in &error_rates {
                let rep = timing_sim::simulate_with_errors(trace, &params, &topo, &identity, e, run.seed)?;
                let slowdown = rep.slowdown(&reference);
                rows.push(TimingRow { trace: name.clone(), sweep: "error_rate", setting: format!("{e:e}"), report: rep, slowdown });
            }
        }
        for &k in &plans {
            let plan = match k {
                PlanKind::Ideal => identity.clone(),
                PlanKind::Reorganized => RankPlan::for_failed_rows(&[failed_row])?,
                PlanKind::HalfRank => RankPlan::half_rank(),
            };
            let rep = timing_sim::simulate(trace, &params, &base, &plan)?;
            let slowdown = rep.slowdown(&reference);
            rows.push(TimingRow { trace: name.clone(), sweep: "plan", setting: k.label().into(), report: rep, slowdown });
        }
    }

    match run.format {
        Format::Csv => {
            let header = [
                "trace", "sweep", "setting", "total_cycles", "reads", "writes", "mean_read_latency", "max_read_latency",
                "throughput", "slowdown", "stall_cycles", "flagged_reads", "frames", "frame_p50", "frames_below_threshold",
            ];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|t| {
                    let r = &t.report;
                    let f = timing_sim::frame_statistics(r, threshold);
                    vec![
                        t.trace.clone(),
                        t.sweep.into(),
                        t.setting.clone(),
                        r.total_cycles.to_string(),
                        r.reads.to_string(),
                        r.writes.to_string(),
                        format!("{:.3}", r.read_latency.mean),
                        r.read_latency.max.to_string(),
                        format!("{:.4}", r.throughput),
                        format!("{:.6}", t.slowdown),
                        r.stall_cycles.to_string(),
                        r.flagged_reads.to_string(),
                        f.frames.to_string(),
                        format!("{:.4}", f.p50),
                        format!("{:.4}", f.below_threshold),
                    ]
                })
                .collect();
            let comments = vec![format!("frame threshold {threshold}; throughput in requests per 1000 cycles")];
            csv_text(&header, &body, &comments)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|t| {
                    let r = &t.report;
                    json!({
                        "trace": t.trace,
                        "sweep": t.sweep,
                        "setting": t.setting,
                        "slowdown": t.slowdown,
                        "total_cycles": r.total_cycles,
                        "reads": r.reads,
                        "writes": r.writes,
                        "read_latency": r.read_latency,
                        "throughput": r.throughput,
                        "ecc_lane_utilization": r.ecc_lane_utilization,
                        "stall_cycles": r.stall_cycles,
                        "flagged_reads": r.flagged_reads,
                        "row_hits": r.row_hits,
                        "max_write_queue": r.max_write_queue,
                        "frame_statistics": timing_sim::frame_statistics(r, threshold),
                    })
                })
                .collect();
            Ok(json_text(&json!({ "seed": run.seed, "params": params, "rows": rows })))
        }
    }
}

pub fn lifetime(run: &Run) -> CmdResult {
    let c = &run.config;
    let schemes = c.list::<LifetimeScheme>("lifetime.schemes")?.unwrap_or_else(|| LifetimeScheme::ALL.to_vec());
    let trials = match run.trials {
        Some(t) => t,
        None => c.get_or("lifetime.trials", 10_000u64)?,
    };
    let mut base = LifetimeConfig::default();
    base.chips_per_module = c.get_or("lifetime.chips_per_module", base.chips_per_module)?;
    base.fit.sbf = c.get_or("lifetime.fit_sbf", base.fit.sbf)?;
    base.fit.dbf = c.get_or("lifetime.fit_dbf", base.fit.dbf)?;
    base.fit.scf = c.get_or("lifetime.fit_scf", base.fit.scf)?;
    base.fit_multiplier = c.get_or("lifetime.fit_multiplier", base.fit_multiplier)?;
    base.mission_hours = c.get_or("lifetime.mission_hours", base.mission_hours)?;
    base.time_samples = c.get_or("lifetime.time_samples", base.time_samples)?;
    base.pre_failed_chips = c.get_or("lifetime.pre_failed_chips", base.pre_failed_chips)?;
    base.coverage.spare_chips = c.get_or("lifetime.spare_chips", base.coverage.spare_chips)?;

    let curves: Vec<LifetimeCurve> = schemes
        .iter()
        .map(|&scheme| lifetime_mc::run_lifetime(&LifetimeConfig { scheme, ..base.clone() }, trials, run.seed))
        .collect::<Result<_, _>>()?;

    match run.format {
        Format::Csv => {
            let mut body = Vec::new();
            for curve in &curves {
                for p in &curve.points {
                    body.push(vec![
                        format!("{:.1}", p.time_hours),
                        curve.scheme.to_string(),
                        format!("{:.6}", p.due_prob),
                        format!("{:.6}", p.sdc_prob),
                        format!("{:.6}", p.stderr()),
                    ]);
                }
            }
            csv_text(&["time_hours", "scheme", "due_prob", "sdc_prob", "stderr"], &body, &[])
        }
        Format::Json => Ok(json_text(&json!({ "seed": run.seed, "config": base, "curves": curves }))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum TopologyStep {
    Event(FailureEvent),
    Scalable { row: usize, col: usize },
}

fn parse_step(s: &str) -> Result<TopologyStep, Failure> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let bad = || Failure::config(format!("topology.events: bad event '{s}' (chip:R:C, wire:C:P, control:R, scalable:R:C)"));
    let num = |i: usize| -> Result<usize, Failure> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
    let step = match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
        ("chip", 3) => TopologyStep::Event(FailureEvent::SingleChip { row: num(1)?, col: num(2)? }),
        ("wire", 3) => TopologyStep::Event(FailureEvent::DataWirePair { col: num(1)?, pair: num(2)? }),
        ("control", 2) => TopologyStep::Event(FailureEvent::ControlWire { row: num(1)? }),
        ("scalable", 3) => TopologyStep::Scalable { row: num(1)?, col: num(2)? },
        _ => return Err(bad()),
    };
    Ok(step)
}

pub fn topology(run: &Run) -> CmdResult {
    let c = &run.config;
    let mut t = match c.raw("topology.initial") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read topology {path}: {e}")))?;
            DimmTopology::from_json(&text)?
        }
        None => DimmTopology::baseline(),
    };
    if let Some(r) = c.get::<f64>("topology.wo_ratio")? {
        t = if c.get_or("topology.split_parity", false)? { t.apply_screme_wo_split(r)? } else { t.apply_screme_wo(r)? };
    }
    let steps: Vec<TopologyStep> = match c.raw("topology.events") {
        Some(v) => v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_step).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let mut plan: Option<RankPlan> = None;
    for step in steps {
        match step {
            TopologyStep::Event(e) => {
                let (next, p) = t.apply_event(e)?;
                t = next;
                if p.is_some() {
                    plan = p;
                }
            }
            TopologyStep::Scalable { row, col } => t = t.apply_framework_scalable(row, col)?,
        }
    }
    let violations = t.validate();
    let plan = plan.unwrap_or_else(RankPlan::identity);
    let plan_text = plan.to_string();

    match run.format {
        Format::Json => Ok(json_text(&json!({
            "topology": t,
            "write_only_ratio": t.write_only_ratio(),
            "rank_plan": plan,
            "rank_plan_text": plan_text.lines().collect::<Vec<_>>(),
            "violations": violations,
        }))),
        Format::Csv => {
            let mut body = Vec::new();
            for (r, row) in t.chips.iter().enumerate() {
                for (col, chip) in row.iter().enumerate() {
                    body.push(vec![
                        r.to_string(),
                        col.to_string(),
                        format!("{:?}", chip.role),
                        chip.io_width.bits().to_string(),
                        format!("{}", chip.speed_ratio),
                        chip.on_read_path.to_string(),
                        chip.lane.map_or(String::new(), |l| l.to_string()),
                    ]);
                }
            }
            let mut comments: Vec<String> = vec![format!("mode: {:?}", t.mode), format!("num_checks: {}", t.num_checks)];
            let failed: BTreeSet<usize> = t.failed_rows().into_iter().collect();
            if !failed.is_empty() {
                comments.push(format!("failed rows: {failed:?}"));
            }
            comments.extend(plan_text.lines().map(|l| format!("plan: {l}")));
            for (i, s) in t.spares.iter().enumerate() {
                comments.push(format!("spare {i}: {:?} x{} capacity {} assigned {:?}", s.role, s.io_width.bits(), s.capacity, s.assigned));
            }
            if violations.is_empty() {
                comments.push("validate: ok".into());
            } else {
                comments.extend(violations.iter().map(|v| format!("violation: {v}")));
            }
            csv_text(&["row", "col", "role", "io_bits", "speed_ratio", "on_read_path", "lane"], &body, &comments)
        }
    }
}
