//! Request-level DRAM timing model.
//!
//! Per-bank state machines (open row, ACT/PRE readiness), FR-FCFS selection
//! with an open-page policy, watermark-driven write drain, bank-group-aware
//! column spacing and a shared data bus. Column commands issue in the order
//! requests are selected; row activation may overlap earlier transfers.
//!
//! When the topology has write-only parity chips slower than the channel,
//! the data buffer hands each write's parity burst to the slow chip, which
//! needs `burst / ratio` cycles per burst. A frame of back-to-back writes
//! therefore leaves it busy until `start + (t1 - start) / ratio +
//! buffer_latency`; gaps between writes let it catch up. The next write
//! frame cannot put data on the bus before the slow chip is done; the bus
//! idles meanwhile.

mod trace;

pub use trace::{bundled_suite, format_trace, generate_trace, parse_trace, MemRequest, ReqKind, TraceProfile};

use serde::{Deserialize, Serialize};

use crate::dimm_topology::{DimmTopology, RankPlan, BANKS, CHANNEL_BITS};
use crate::error::{Error, Result};
use crate::rng::{domain, SimRng};

/// Timing parameters in controller cycles (one cycle = two beats).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub cl: u64,
    pub rcd: u64,
    pub rp: u64,
    pub ras: u64,
    pub ccd_s: u64,
    pub ccd_l: u64,
    pub ccd_l_wr: u64,
    pub burst: u64,
    pub cwl: u64,
    pub wr: u64,
    pub wtr_s: u64,
    pub wtr_l: u64,
    pub rtw: u64,
    pub rtp: u64,
    pub rank_switch: u64,
    pub write_queue_capacity: usize,
    pub read_queue_capacity: usize,
    pub drain_high: usize,
    pub drain_low: usize,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            cl: 44,
            rcd: 44,
            rp: 44,
            ras: 81,
            ccd_s: 8,
            ccd_l: 16,
            ccd_l_wr: 64,
            burst: 8,
            cwl: 42,
            wr: 48,
            wtr_s: 4,
            wtr_l: 16,
            rtw: 8,
            rtp: 12,
            rank_switch: 2,
            write_queue_capacity: 32,
            read_queue_capacity: 64,
            drain_high: 28,
            drain_low: 8,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        let cycles = [
            ("cl", self.cl),
            ("rcd", self.rcd),
            ("rp", self.rp),
            ("ras", self.ras),
            ("ccd_s", self.ccd_s),
            ("ccd_l", self.ccd_l),
            ("ccd_l_wr", self.ccd_l_wr),
            ("burst", self.burst),
            ("cwl", self.cwl),
            ("wr", self.wr),
            ("wtr_s", self.wtr_s),
            ("wtr_l", self.wtr_l),
            ("rtw", self.rtw),
            ("rtp", self.rtp),
        ];
        if let Some((name, _)) = cycles.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("timing parameter {name} must be positive")));
        }
        if self.write_queue_capacity == 0 || self.read_queue_capacity == 0 {
            return Err(Error::config("queue capacities must be positive"));
        }
        if !(self.drain_low < self.drain_high && self.drain_high <= self.write_queue_capacity) {
            return Err(Error::config("need drain_low < drain_high <= write queue capacity"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub rank: usize,
    pub bank_group: u32,
    pub bank: u32,
    pub row: u64,
    pub col: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankGeometry {
    pub banks: u32,
    pub width_bits: u32,
}

/// Physical-address decoder for a rank plan.
///
/// `line = addr >> 6`; 7 column bits, then 5 bank bits, then the rank
/// (`rest % ranks`) and the row. The bank index is XORed with the low row
/// bits; ranks with fewer banks fold the surplus bank bits into the row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressMap {
    pub ranks: Vec<RankGeometry>,
}

impl AddressMap {
    pub fn from_plan(plan: &RankPlan) -> Result<Self> {
        if plan.ranks.is_empty() {
            return Err(Error::config("rank plan has no ranks"));
        }
        let ranks = plan
            .ranks
            .iter()
            .map(|r| RankGeometry { banks: r.banks(), width_bits: r.width_bits() })
            .collect::<Vec<_>>();
        if let Some(r) = ranks.iter().find(|r| !r.banks.is_power_of_two() || r.banks < 4 || r.banks > BANKS || r.width_bits == 0) {
            return Err(Error::config(format!("unsupported rank geometry {r:?}")));
        }
        Ok(Self { ranks })
    }

    pub fn map(&self, addr: u64) -> Location {
        let line = addr >> 6;
        let col = (line & 0x7F) as u32;
        let rest = line >> 7;
        let bank_bits = (rest & (BANKS as u64 - 1)) as u32;
        let rest = rest >> BANKS.trailing_zeros();
        let n = self.ranks.len() as u64;
        let rank = (rest % n) as usize;
        let row = rest / n;
        let mixed = bank_bits ^ (row as u32 & (BANKS - 1));
        let nb = self.ranks[rank].banks;
        let bank = mixed % nb;
        let row = row * (BANKS / nb) as u64 + (mixed / nb) as u64;
        Location { rank, bank_group: bank % (nb / 4), bank, row, col }
    }
}

/// One write frame and the read frame that followed it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub write_start: u64,
    pub t1: u64,
    pub t1_slow: u64,
    pub t2: u64,
    pub stall: u64,
}

impl FrameRecord {
    /// Read frame length normalized to the write frame.
    pub fn normalized_read_frame(&self) -> f64 {
        let w = (self.t1 - self.write_start).max(1) as f64;
        (self.t2 - self.t1) as f64 / w
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean: f64,
    pub min: u64,
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
    pub max: u64,
}

impl LatencyStats {
    fn from_samples(mut v: Vec<u64>) -> Self {
        if v.is_empty() {
            return Self::default();
        }
        v.sort_unstable();
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        Self {
            count: v.len() as u64,
            mean: v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64,
            min: v[0],
            p50: q(0.5),
            p95: q(0.95),
            p99: q(0.99),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub total_cycles: u64,
    pub reads: u64,
    pub writes: u64,
    pub read_latency: LatencyStats,
    /// Retired requests per thousand cycles.
    pub throughput: f64,
    /// Busy fraction of the parity lane.
    pub ecc_lane_utilization: f64,
    pub stall_cycles: u64,
    pub flagged_reads: u64,
    /// Requests served from an already open row.
    pub row_hits: u64,
    pub max_write_queue: usize,
    pub frames: Vec<FrameRecord>,
}

impl SimReport {
    pub fn slowdown(&self, reference: &SimReport) -> f64 {
        self.total_cycles as f64 / reference.total_cycles as f64
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    arrival: u64,
    enqueued: u64,
    kind: ReqKind,
    loc: Location,
    flagged: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct Bank {
    open_row: Option<u64>,
    col_ready: u64,
    pre_ready: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct RankState {
    last_col: Option<(u64, u32, ReqKind)>,
    last_write_end: Option<(u64, u32)>,
}

struct Engine<'a> {
    p: &'a TimingParams,
    map: AddressMap,
    slow_ratio: Option<f64>,
    fetch_penalty: u64,
    buffer_latency: u64,
    banks: Vec<Vec<Bank>>,
    ranks: Vec<RankState>,
    bus_free: u64,
    bus_last: Option<(usize, ReqKind)>,
    slow_busy_until: u64,
    /// When the slow chip finishes the parity bursts handed to it so far.
    slow_free: f64,
    now: u64,
    writing: bool,
    rq: Vec<Pending>,
    wq: Vec<Pending>,
    cur_write: Option<(u64, u64)>,
    closed_write: Option<(u64, u64, u64)>,
    last_read_end: Option<u64>,
    frames: Vec<FrameRecord>,
    latencies: Vec<u64>,
    finish: u64,
    writes_done: u64,
    ecc_busy: f64,
    stall_cycles: u64,
    flagged: u64,
    row_hits: u64,
    max_wq: usize,
    /// Back-pressure and stalls delay every later request by the same amount.
    shift: u64,
}

impl<'a> Engine<'a> {
    fn new(p: &'a TimingParams, topology: &DimmTopology, plan: &RankPlan) -> Result<Self> {
        p.validate()?;
        let map = AddressMap::from_plan(plan)?;
        let ratio = topology.write_only_ratio();
        let buffer_latency = topology.buffer_latency as u64;
        let r = ratio.unwrap_or(1.0);
        let fetch_penalty = (p.burst as f64 / r).ceil() as u64 + p.cl + buffer_latency;
        Ok(Self {
            p,
            banks: map.ranks.iter().map(|g| vec![Bank::default(); g.banks as usize]).collect(),
            ranks: vec![RankState::default(); map.ranks.len()],
            map,
            slow_ratio: ratio.filter(|&r| r < 1.0),
            fetch_penalty,
            buffer_latency,
            bus_free: 0,
            bus_last: None,
            slow_busy_until: 0,
            slow_free: 0.0,
            now: 0,
            writing: false,
            rq: Vec::new(),
            wq: Vec::new(),
            cur_write: None,
            closed_write: None,
            last_read_end: None,
            frames: Vec::new(),
            latencies: Vec::new(),
            finish: 0,
            writes_done: 0,
            ecc_busy: 0.0,
            stall_cycles: 0,
            flagged: 0,
            row_hits: 0,
            max_wq: 0,
            shift: 0,
        })
    }

    fn burst_of(&self, rank: usize) -> u64 {
        self.p.burst * (CHANNEL_BITS / self.map.ranks[rank].width_bits) as u64
    }

    /// Earliest (act, column, data start) for `r` given committed state.
    fn plan(&self, r: &Pending) -> (Option<u64>, u64, u64) {
        let p = self.p;
        let loc = r.loc;
        let bank = &self.banks[loc.rank][loc.bank as usize];
        let (act, col_min) = match bank.open_row {
            Some(row) if row == loc.row => (None, bank.col_ready),
            Some(_) => {
                let pre = r.enqueued.max(bank.pre_ready);
                let act = pre + p.rp;
                (Some(act), act + p.rcd)
            }
            None => {
                let act = r.enqueued.max(bank.pre_ready);
                (Some(act), act + p.rcd)
            }
        };
        let mut col = col_min.max(self.now).max(r.enqueued);
        let rs = &self.ranks[loc.rank];
        if let Some((t, g, k)) = rs.last_col {
            let gap = match (g == loc.bank_group, k, r.kind) {
                (true, ReqKind::Write, ReqKind::Write) => p.ccd_l_wr,
                (true, _, _) => p.ccd_l,
                (false, _, _) => p.ccd_s,
            };
            col = col.max(t + gap);
        }
        if r.kind == ReqKind::Read {
            if let Some((end, g)) = rs.last_write_end {
                col = col.max(end + if g == loc.bank_group { p.wtr_l } else { p.wtr_s });
            }
        }
        let lat = if r.kind == ReqKind::Read { p.cl } else { p.cwl };
        let mut bus_ready = self.bus_free;
        if let Some((rank, kind)) = self.bus_last {
            if rank != loc.rank {
                bus_ready += p.rank_switch;
            }
            if kind == ReqKind::Read && r.kind == ReqKind::Write {
                bus_ready += p.rtw;
            }
        }
        let data = (col + lat).max(bus_ready);
        (act, data - lat, data)
    }

    fn is_hit(&self, r: &Pending) -> bool {
        self.banks[r.loc.rank][r.loc.bank as usize].open_row == Some(r.loc.row)
    }

    /// First-ready selection: the request whose data can start earliest,
    /// row hits winning ties, then age. A miss never closes a row that
    /// still has queued hits.
    fn pick(&self, q: &[Pending]) -> usize {
        let mut hit_banks = vec![0u32; self.banks.len()];
        for r in q.iter().filter(|r| self.is_hit(r)) {
            hit_banks[r.loc.rank] |= 1 << r.loc.bank;
        }
        let mut best: Option<(u64, bool, usize)> = None;
        for (i, r) in q.iter().enumerate() {
            let hit = self.is_hit(r);
            if !hit && hit_banks[r.loc.rank] & (1 << r.loc.bank) != 0 {
                continue;
            }
            let (_, _, data) = self.plan(r);
            let key = (data, !hit, i);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        best.map_or(0, |b| b.2)
    }

    fn commit(&mut self, r: Pending) {
        let p = self.p;
        let (mut act, mut col, mut data) = self.plan(&r);
        if r.kind == ReqKind::Write && self.cur_write.is_none() && self.slow_ratio.is_some() && self.slow_busy_until > data {
            let d = self.slow_busy_until - data;
            self.freeze(d);
            self.stall_cycles += d;
            (act, col, data) = self.plan(&r);
        }
        let loc = r.loc;
        let burst = self.burst_of(loc.rank);
        let end = data + burst;

        self.row_hits += act.is_none() as u64;
        let bank = &mut self.banks[loc.rank][loc.bank as usize];
        if let Some(a) = act {
            bank.open_row = Some(loc.row);
            bank.col_ready = a + p.rcd;
            bank.pre_ready = a + p.ras;
        }
        bank.pre_ready = bank.pre_ready.max(match r.kind {
            ReqKind::Read => col + p.rtp,
            ReqKind::Write => end + p.wr,
        });
        let rs = &mut self.ranks[loc.rank];
        rs.last_col = Some((col, loc.bank_group, r.kind));
        if r.kind == ReqKind::Write {
            rs.last_write_end = Some((end, loc.bank_group));
        }
        self.now = col;
        self.bus_last = Some((loc.rank, r.kind));

        match r.kind {
            ReqKind::Read => {
                if let Some((start, t1)) = self.cur_write.take() {
                    let t1_slow = match self.slow_ratio {
                        Some(_) => self.slow_free.ceil() as u64 + self.buffer_latency,
                        None => t1,
                    };
                    self.slow_busy_until = t1_slow;
                    self.closed_write = Some((start, t1, t1_slow));
                    self.last_read_end = None;
                }
                let mut done = end;
                if r.flagged {
                    done += self.fetch_penalty;
                    self.flagged += 1;
                    self.freeze(self.fetch_penalty);
                    self.ecc_busy += burst as f64 / self.slow_ratio.unwrap_or(1.0);
                } else if self.slow_ratio.is_none() {
                    self.ecc_busy += burst as f64;
                }
                self.bus_free = done;
                self.last_read_end = Some(end);
                self.latencies.push(done - r.arrival);
                self.finish = self.finish.max(done);
            }
            ReqKind::Write => {
                match self.cur_write.as_mut() {
                    Some(f) => f.1 = end,
                    None => {
                        self.close_frame();
                        self.cur_write = Some((data, end));
                    }
                }
                if let Some(ratio) = self.slow_ratio {
                    // the data buffer queues parity while the slow chip catches up
                    self.slow_free = self.slow_free.max(data as f64) + burst as f64 / ratio;
                }
                self.ecc_busy += burst as f64 / self.slow_ratio.unwrap_or(1.0);
                self.bus_free = end;
                self.writes_done += 1;
                self.finish = self.finish.max(end);
            }
        }
    }

    /// Holds the whole channel, front end included, for `d` cycles.
    fn freeze(&mut self, d: u64) {
        self.now += d;
        self.bus_free += d;
        self.shift += d;
        for bank in self.banks.iter_mut().flatten() {
            bank.col_ready += d;
            bank.pre_ready += d;
        }
        for rs in &mut self.ranks {
            if let Some(c) = rs.last_col.as_mut() {
                c.0 += d;
            }
            if let Some(w) = rs.last_write_end.as_mut() {
                w.0 += d;
            }
        }
        for r in self.rq.iter_mut().chain(self.wq.iter_mut()) {
            r.enqueued += d;
        }
    }

    /// Records the previous alternation once the next write frame starts.
    fn close_frame(&mut self) {
        if let Some((start, t1, t1_slow)) = self.closed_write.take() {
            let t2 = self.last_read_end.unwrap_or(t1).max(t1);
            let stall = t1_slow.saturating_sub(t2);
            self.frames.push(FrameRecord { write_start: start, t1, t1_slow, t2, stall });
        }
    }

    fn update_mode(&mut self) {
        let p = self.p;
        if self.writing {
            if self.wq.is_empty() || (self.wq.len() <= p.drain_low && !self.rq.is_empty()) {
                self.writing = false;
            }
        } else if self.wq.len() >= p.drain_high || (self.rq.is_empty() && !self.wq.is_empty()) {
            self.writing = true;
        }
    }

    fn run(mut self, trace: &[MemRequest], flags: impl Fn(usize) -> bool) -> SimReport {
        let mut next = 0usize;
        let mut read_index = 0usize;
        let mut blocked = false;
        loop {
            while next < trace.len() && trace[next].arrival + self.shift <= self.now {
                let t = trace[next];
                let (q, cap) = match t.kind {
                    ReqKind::Read => (&self.rq, self.p.read_queue_capacity),
                    ReqKind::Write => (&self.wq, self.p.write_queue_capacity),
                };
                if q.len() >= cap {
                    blocked = true;
                    break;
                }
                if blocked {
                    // enters as soon as its queue has a slot
                    self.shift = self.now - t.arrival;
                    blocked = false;
                }
                let issued = t.arrival + self.shift;
                let flagged = t.kind == ReqKind::Read && {
                    read_index += 1;
                    flags(read_index - 1)
                };
                let pend = Pending { arrival: issued, enqueued: issued, kind: t.kind, loc: self.map.map(t.addr), flagged };
                match t.kind {
                    ReqKind::Read => self.rq.push(pend),
                    ReqKind::Write => self.wq.push(pend),
                }
                next += 1;
            }
            self.max_wq = self.max_wq.max(self.wq.len());
            self.update_mode();
            let q = if self.writing { &self.wq } else { &self.rq };
            if q.is_empty() {
                if self.rq.is_empty() && self.wq.is_empty() {
                    if next >= trace.len() {
                        break;
                    }
                    self.now = self.now.max(trace[next].arrival + self.shift);
                    continue;
                }
                // only the other queue has work
                self.writing = !self.writing;
                continue;
            }
            let i = self.pick(q);
            let r = if self.writing { self.wq.remove(i) } else { self.rq.remove(i) };
            self.commit(r);
        }
        self.close_frame();
        let total = self.finish.max(1);
        let reads = self.latencies.len() as u64;
        SimReport {
            total_cycles: self.finish,
            reads,
            writes: self.writes_done,
            read_latency: LatencyStats::from_samples(self.latencies),
            throughput: (reads + self.writes_done) as f64 * 1000.0 / total as f64,
            ecc_lane_utilization: (self.ecc_busy / total as f64).min(1.0),
            stall_cycles: self.stall_cycles,
            flagged_reads: self.flagged,
            row_hits: self.row_hits,
            max_write_queue: self.max_wq,
            frames: self.frames,
        }
    }
}

fn check_sorted(trace: &[MemRequest]) -> Result<()> {
    match trace.windows(2).position(|w| w[1].arrival < w[0].arrival) {
        Some(i) => Err(Error::TraceParse { line: i + 2, message: "trace not sorted by arrival cycle".into() }),
        None => Ok(()),
    }
}

pub fn simulate(trace: &[MemRequest], params: &TimingParams, topology: &DimmTopology, plan: &RankPlan) -> Result<SimReport> {
    check_sorted(trace)?;
    Ok(Engine::new(params, topology, plan)?.run(trace, |_| false))
}

/// Like [`simulate`], but each read is flagged by the detect phase with
/// probability `block_error_rate` and pays a parity fetch from the write-only chip.
pub fn simulate_with_errors(
    trace: &[MemRequest],
    params: &TimingParams,
    topology: &DimmTopology,
    plan: &RankPlan,
    block_error_rate: f64,
    seed: u64,
) -> Result<SimReport> {
    if !(0.0..=1.0).contains(&block_error_rate) {
        return Err(Error::config(format!("block error rate {block_error_rate} outside [0, 1]")));
    }
    check_sorted(trace)?;
    let engine = Engine::new(params, topology, plan)?;
    Ok(engine.run(trace, |i| SimRng::for_stream(seed, domain::TIMING_ERRORS, i as u64).bernoulli(block_error_rate)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frames: usize,
    pub mean: f64,
    pub min: f64,
    pub p50: f64,
    pub max: f64,
    pub threshold: f64,
    /// Fraction of alternations whose normalized read frame is below `threshold`.
    pub below_threshold: f64,
}

/// Distribution of `(t2 - t1) / (t1 - write_start)` over all alternations.
pub fn frame_statistics(report: &SimReport, threshold: f64) -> FrameSummary {
    let mut v: Vec<f64> = report.frames.iter().map(FrameRecord::normalized_read_frame).collect();
    if v.is_empty() {
        return FrameSummary { threshold, ..Default::default() };
    }
    v.sort_by(f64::total_cmp);
    FrameSummary {
        frames: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
        p50: v[(v.len() - 1) / 2],
        max: v[v.len() - 1],
        threshold,
        below_threshold: v.iter().filter(|&&x| x < threshold).count() as f64 / v.len() as f64,
    }
}
