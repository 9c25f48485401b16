//! DIMM layout and device-level failure reconfiguration.
//!
//! The module is a 4 × 10 grid of ×4 chips. Rows and columns are 0-based
//! here (row 0 is "Row1", column 9 the last ECC column). Columns 0..8 carry
//! data lanes, columns 8 and 9 carry the two check symbols. All rows share a
//! column's four data wires (pair `p` is wires `2p` and `2p + 1`); each row
//! has its own control wire.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROWS: usize = 4;
pub const COLS: usize = 10;
pub const DATA_COLS: usize = 8;
pub const WIRE_PAIRS: usize = 2;
pub const WIRES_PER_COL: usize = 4;
pub const CHANNEL_BITS: u32 = 40;
pub const DATA_BITS: u32 = 32;
pub const BANKS: u32 = 32;
pub const DEFAULT_BUFFER_LATENCY: u32 = 4;
pub const DEFAULT_SLOW_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChipRole {
    Data,
    Ecc,
    WriteOnlyEcc,
    Spare,
    Retired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IoWidth {
    X2,
    X4,
    X8,
}

impl IoWidth {
    pub fn bits(self) -> u32 {
        match self {
            IoWidth::X2 => 2,
            IoWidth::X4 => 4,
            IoWidth::X8 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chip {
    pub role: ChipRole,
    pub io_width: IoWidth,
    /// Transfer rate relative to the channel; 0.5 is a 3200 MT/s part on 6400 MT/s.
    pub speed_ratio: f64,
    /// Storage relative to a regular chip.
    pub capacity: f64,
    /// Whether the chip drives data onto the read path.
    pub on_read_path: bool,
    /// Data lane (0..8) carried by the chip, if it holds data.
    pub lane: Option<usize>,
}

impl Chip {
    fn regular(col: usize) -> Self {
        let data = col < DATA_COLS;
        Self {
            role: if data { ChipRole::Data } else { ChipRole::Ecc },
            io_width: IoWidth::X4,
            speed_ratio: 1.0,
            capacity: 1.0,
            on_read_path: true,
            lane: data.then_some(col),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpareChip {
    pub capacity: f64,
    pub io_width: IoWidth,
    /// `(row, col)` slot the spare serves once activated.
    pub assigned: Option<(usize, usize)>,
    pub role: ChipRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyMode {
    Baseline,
    ScremeWo,
    IoCol,
    IoRow,
    FrameworkReplace,
    FrameworkScalableEcc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureEvent {
    SingleChip { row: usize, col: usize },
    DataWirePair { col: usize, pair: usize },
    ControlWire { row: usize },
}

impl FailureEvent {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FailureEvent::SingleChip { row, col } => row < ROWS && col < COLS,
            FailureEvent::DataWirePair { col, pair } => col < COLS && pair < WIRE_PAIRS,
            FailureEvent::ControlWire { row } => row < ROWS,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("failure event out of range: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimmTopology {
    pub chips: Vec<Vec<Chip>>,
    /// `data_wires[col][wire]` is true while the wire is healthy.
    pub data_wires: Vec<[bool; WIRES_PER_COL]>,
    pub control_wires: [bool; ROWS],
    pub spares: Vec<SpareChip>,
    pub mode: TopologyMode,
    pub num_checks: usize,
    pub buffer_latency: u32,
}

impl Default for DimmTopology {
    fn default() -> Self {
        Self::baseline()
    }
}

impl DimmTopology {
    /// Healthy module with four half-density ×2 spares.
    pub fn baseline() -> Self {
        let spare = SpareChip { capacity: 0.5, io_width: IoWidth::X2, assigned: None, role: ChipRole::Spare };
        Self {
            chips: (0..ROWS).map(|_| (0..COLS).map(Chip::regular).collect()).collect(),
            data_wires: vec![[true; WIRES_PER_COL]; COLS],
            control_wires: [true; ROWS],
            spares: vec![spare; 4],
            mode: TopologyMode::Baseline,
            num_checks: 2,
            buffer_latency: DEFAULT_BUFFER_LATENCY,
        }
    }

    pub fn with_spares(mut self, spares: Vec<SpareChip>) -> Self {
        self.spares = spares;
        self
    }

    pub fn chip(&self, row: usize, col: usize) -> &Chip {
        &self.chips[row][col]
    }

    pub fn healthy_wire_bits(&self, col: usize) -> u32 {
        self.data_wires[col].iter().filter(|&&w| w).count() as u32
    }

    pub fn pair_healthy(&self, col: usize, pair: usize) -> bool {
        self.data_wires[col][2 * pair] && self.data_wires[col][2 * pair + 1]
    }

    pub fn failed_wire_pairs(&self) -> usize {
        (0..COLS).map(|c| (0..WIRE_PAIRS).filter(|&p| !self.pair_healthy(c, p)).count()).sum()
    }

    pub fn failed_rows(&self) -> Vec<usize> {
        (0..ROWS).filter(|&r| !self.control_wires[r]).collect()
    }

    /// Read-path width of `row` in bits (data plus readable parity).
    pub fn read_width(&self, row: usize) -> u32 {
        let chips: u32 = self.chips[row].iter().filter(|c| c.on_read_path).map(|c| c.io_width.bits()).sum();
        let spares: u32 = self
            .spares
            .iter()
            .filter(|s| s.assigned.map(|(r, _)| r) == Some(row) && s.role == ChipRole::Ecc)
            .map(|s| s.io_width.bits())
            .sum();
        chips + spares
    }

    /// Slowest effective write rate among write-only parity devices.
    ///
    /// A ×2 device moving a ×4 lane's worth of parity counts as half speed.
    pub fn write_only_ratio(&self) -> Option<f64> {
        let chips = self.chips.iter().flatten().filter(|c| c.role == ChipRole::WriteOnlyEcc).map(|c| (c.speed_ratio, c.io_width));
        let spares = self.spares.iter().filter(|s| s.role == ChipRole::WriteOnlyEcc).map(|s| (1.0, s.io_width));
        chips
            .chain(spares)
            .map(|(speed, w)| speed * (w.bits().min(4) as f64 / 4.0))
            .reduce(f64::min)
    }

    /// Empty iff every structural invariant holds.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.chips.len() != ROWS || self.chips.iter().any(|r| r.len() != COLS) || self.data_wires.len() != COLS {
            v.push(format!("grid must be {ROWS}x{COLS}"));
            return v;
        }
        for row in 0..ROWS {
            let mut lanes = [0u32; DATA_COLS];
            let mut data_bits = 0;
            for col in 0..COLS {
                let c = &self.chips[row][col];
                let at = format!("chip (row {}, col {})", row + 1, col + 1);
                if c.role == ChipRole::WriteOnlyEcc && c.on_read_path {
                    v.push(format!("{at}: write-only ECC chip on a read path"));
                }
                if matches!(c.role, ChipRole::Retired | ChipRole::Spare) && c.on_read_path {
                    v.push(format!("{at}: inactive chip on a read path"));
                }
                if matches!(c.role, ChipRole::Data | ChipRole::Ecc) && !c.on_read_path {
                    v.push(format!("{at}: {:?} chip missing from the read path", c.role));
                }
                if c.role != ChipRole::Retired && c.io_width.bits() > self.healthy_wire_bits(col) {
                    v.push(format!(
                        "{at}: width {} exceeds {} healthy wires",
                        c.io_width.bits(),
                        self.healthy_wire_bits(col)
                    ));
                }
                if !(c.speed_ratio > 0.0 && c.speed_ratio <= 1.0) {
                    v.push(format!("{at}: speed ratio {} outside (0, 1]", c.speed_ratio));
                }
                match (c.role, c.lane) {
                    (ChipRole::Data, Some(l)) if l < DATA_COLS => {
                        lanes[l] += 1;
                        data_bits += c.io_width.bits();
                    }
                    (ChipRole::Data, _) => v.push(format!("{at}: data chip without a lane")),
                    (_, Some(_)) => v.push(format!("{at}: non-data chip carries a lane")),
                    _ => {}
                }
            }
            if data_bits != DATA_BITS {
                v.push(format!("row {}: data read width {data_bits} != {DATA_BITS}", row + 1));
            }
            for (l, &n) in lanes.iter().enumerate() {
                if n != 1 {
                    v.push(format!("row {}: data lane {l} served by {n} chips", row + 1));
                }
            }
        }
        for (i, s) in self.spares.iter().enumerate() {
            match (s.role, s.assigned) {
                (ChipRole::Spare, None) => {}
                (ChipRole::Spare, Some(_)) => v.push(format!("spare {i}: idle spare with an assignment")),
                (_, None) => v.push(format!("spare {i}: active spare without a slot")),
                (_, Some((r, c))) if r >= ROWS || c >= COLS => v.push(format!("spare {i}: slot out of range")),
                _ => {}
            }
        }
        if !(2..=3).contains(&self.num_checks) {
            v.push(format!("check count {} not in 2..=3", self.num_checks));
        }
        v
    }

    fn checked(self, what: &str) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::Infeasible { reason: format!("{what} leaves an invalid topology"), violations })
        }
    }

    /// Turns the last ECC column into write-only parity at `speed_ratio`.
    pub fn apply_screme_wo(&self, speed_ratio: f64) -> Result<Self> {
        if !(speed_ratio > 0.0 && speed_ratio <= 1.0) {
            return Err(Error::config(format!("speed ratio {speed_ratio} outside (0, 1]")));
        }
        let mut t = self.clone();
        for row in t.chips.iter_mut() {
            let c = &mut row[COLS - 1];
            match c.role {
                ChipRole::Ecc | ChipRole::WriteOnlyEcc => {
                    c.role = ChipRole::WriteOnlyEcc;
                    c.on_read_path = false;
                    c.speed_ratio = speed_ratio;
                }
                other => return Err(Error::infeasible(format!("column {COLS} holds a {other:?} chip, not ECC"))),
            }
        }
        t.mode = TopologyMode::ScremeWo;
        t.checked("write-only ECC")
    }

    /// Split-parity variant: the last ECC column keeps two bits, and one
    /// idle spare per row stores the other two; both are write-only.
    pub fn apply_screme_wo_split(&self, speed_ratio: f64) -> Result<Self> {
        let mut t = self.apply_screme_wo(speed_ratio)?;
        let idle: Vec<usize> = (0..t.spares.len()).filter(|&i| t.spares[i].role == ChipRole::Spare).collect();
        if idle.len() < ROWS {
            return Err(Error::Infeasible {
                reason: "split parity needs one idle spare per row".into(),
                violations: vec![format!("short by {} spares", ROWS - idle.len())],
            });
        }
        for (row, &i) in idle.iter().take(ROWS).enumerate() {
            t.chips[row][COLS - 1].io_width = IoWidth::X2;
            let s = &mut t.spares[i];
            s.role = ChipRole::WriteOnlyEcc;
            s.io_width = IoWidth::X2;
            s.assigned = Some((row, COLS - 1));
        }
        t.checked("split write-only ECC")
    }

    fn last_read_ecc_col(&self) -> Option<usize> {
        (DATA_COLS..COLS).rev().find(|&c| (0..ROWS).all(|r| self.chips[r][c].role == ChipRole::Ecc))
    }

    /// Tolerates a failed data-wire pair by moving the column's lane onto
    /// the last readable ECC column and demoting the column to ×2 write-only parity.
    pub fn apply_io_col(&self, event: FailureEvent) -> Result<Self> {
        let FailureEvent::DataWirePair { col, pair } = event else {
            return Err(Error::config("column reconfiguration needs a data-wire-pair failure"));
        };
        event.validate()?;
        let mut t = self.clone();
        t.data_wires[col][2 * pair] = false;
        t.data_wires[col][2 * pair + 1] = false;
        if t.failed_wire_pairs() > 2 {
            return Err(Error::Infeasible {
                reason: "more than two failed data-wire pairs".into(),
                violations: vec![format!("{} failed pairs", t.failed_wire_pairs())],
            });
        }
        if t.healthy_wire_bits(col) == 0 {
            return Err(Error::Infeasible {
                reason: format!("column {} has no healthy wires", col + 1),
                violations: vec![format!("column {}: 0 healthy wires", col + 1)],
            });
        }
        let already_parity = (0..ROWS).all(|r| matches!(t.chips[r][col].role, ChipRole::Ecc | ChipRole::WriteOnlyEcc));
        if !already_parity {
            let Some(ecc) = t.last_read_ecc_col() else {
                return Err(Error::infeasible("no readable ECC column left to take over the lane"));
            };
            for r in 0..ROWS {
                let lane = t.chips[r][col].lane;
                let e = &mut t.chips[r][ecc];
                e.role = ChipRole::Data;
                e.lane = lane;
                e.on_read_path = true;
            }
        }
        for r in 0..ROWS {
            let c = &mut t.chips[r][col];
            c.role = ChipRole::WriteOnlyEcc;
            c.lane = None;
            c.on_read_path = false;
            c.io_width = IoWidth::X2;
        }
        t.mode = TopologyMode::IoCol;
        t.checked("column reconfiguration")
    }

    /// Records a control-wire failure and returns the rank plan over the surviving rows.
    pub fn apply_io_row(&self, event: FailureEvent) -> Result<(Self, RankPlan)> {
        let FailureEvent::ControlWire { row } = event else {
            return Err(Error::config("row reconfiguration needs a control-wire failure"));
        };
        event.validate()?;
        let mut t = self.clone();
        t.control_wires[row] = false;
        t.mode = TopologyMode::IoRow;
        let plan = RankPlan::for_failed_rows(&t.failed_rows())?;
        Ok((t.checked("row reconfiguration")?, plan))
    }

    /// Chip-replacement mode: retires a failed chip onto spares.
    pub fn apply_framework_replace(&self, event: FailureEvent) -> Result<Self> {
        let FailureEvent::SingleChip { row, col } = event else {
            return Err(Error::config("chip replacement needs a single-chip failure"));
        };
        event.validate()?;
        let mut t = self.clone();
        let need = t.chips[row][col].capacity;
        let mut picked = Vec::new();
        let mut have = 0.0;
        for (i, s) in t.spares.iter().enumerate() {
            if have >= need {
                break;
            }
            if s.role == ChipRole::Spare {
                picked.push(i);
                have += s.capacity;
            }
        }
        if have < need {
            return Err(Error::Infeasible {
                reason: "insufficient spare capacity".into(),
                violations: vec![format!("shortfall {:.3} chip capacities", need - have)],
            });
        }
        // the failed column turns into a parity column in every row
        if t.chips[row][col].role == ChipRole::Data {
            let Some(ecc) = t.last_read_ecc_col() else {
                return Err(Error::infeasible("no readable ECC column to swap with"));
            };
            for r in 0..ROWS {
                let lane = t.chips[r][col].lane.take();
                let e = &mut t.chips[r][ecc];
                e.role = ChipRole::Data;
                e.lane = lane;
                t.chips[r][col].role = ChipRole::Ecc;
            }
        }
        let failed = &mut t.chips[row][col];
        failed.role = ChipRole::Retired;
        failed.on_read_path = false;
        for &i in &picked {
            let s = &mut t.spares[i];
            s.role = ChipRole::Ecc;
            s.assigned = Some((row, col));
        }
        let peer = row ^ 1;
        let b = &mut t.chips[peer][col];
        b.role = ChipRole::WriteOnlyEcc;
        b.on_read_path = false;
        b.io_width = IoWidth::X2;
        t.mode = TopologyMode::FrameworkReplace;
        t.checked("chip replacement")
    }

    /// Scalable-ECC mode: narrows an ECC chip to ×2 and gives the freed width
    /// to a spare; both store parity and the codec gains a third check.
    pub fn apply_framework_scalable(&self, row: usize, col: usize) -> Result<Self> {
        FailureEvent::SingleChip { row, col }.validate()?;
        let mut t = self.clone();
        if !matches!(t.chips[row][col].role, ChipRole::Ecc | ChipRole::WriteOnlyEcc) {
            return Err(Error::config(format!("chip (row {}, col {}) is not an ECC chip", row + 1, col + 1)));
        }
        let Some(i) = t.spares.iter().position(|s| s.role == ChipRole::Spare) else {
            return Err(Error::Infeasible { reason: "no idle spare".into(), violations: vec!["shortfall 1 spare".into()] });
        };
        let c = &mut t.chips[row][col];
        c.role = ChipRole::WriteOnlyEcc;
        c.on_read_path = false;
        c.io_width = IoWidth::X2;
        let s = &mut t.spares[i];
        s.role = ChipRole::WriteOnlyEcc;
        s.io_width = IoWidth::X2;
        s.assigned = Some((row, col));
        t.num_checks = 3;
        t.mode = TopologyMode::FrameworkScalableEcc;
        t.checked("scalable ECC")
    }

    /// Applies one failure event with the matching reconfiguration.
    pub fn apply_event(&self, event: FailureEvent) -> Result<(Self, Option<RankPlan>)> {
        match event {
            FailureEvent::SingleChip { .. } => Ok((self.apply_framework_replace(event)?, None)),
            FailureEvent::DataWirePair { .. } => Ok((self.apply_io_col(event)?, None)),
            FailureEvent::ControlWire { .. } => {
                let (t, p) = self.apply_io_row(event)?;
                Ok((t, Some(p)))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config(format!("topology: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IoHalf {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankRange {
    pub first: u32,
    pub last: u32,
}

impl BankRange {
    pub const ALL: BankRange = BankRange { first: 0, last: BANKS - 1 };
    pub const LOW: BankRange = BankRange { first: 0, last: BANKS / 2 - 1 };
    pub const HIGH: BankRange = BankRange { first: BANKS / 2, last: BANKS - 1 };

    pub fn len(&self) -> u32 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, o: &BankRange) -> bool {
        self.first <= o.last && o.first <= self.last
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankMember {
    pub row: usize,
    pub banks: BankRange,
    pub half: IoHalf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalRank {
    pub members: Vec<RankMember>,
}

impl LogicalRank {
    /// Channel bits driven by the rank; each member supplies one half.
    pub fn width_bits(&self) -> u32 {
        let left = self.members.iter().any(|m| m.half == IoHalf::Left);
        let right = self.members.iter().any(|m| m.half == IoHalf::Right);
        (left as u32 + right as u32) * CHANNEL_BITS / 2
    }

    /// Banks addressable in the rank.
    pub fn banks(&self) -> u32 {
        self.members.iter().map(|m| m.banks.len()).min().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPlan {
    pub ranks: Vec<LogicalRank>,
}

impl RankPlan {
    fn pair(a: RankMember, b: RankMember) -> LogicalRank {
        LogicalRank { members: vec![a, b] }
    }

    fn member(row: usize, banks: BankRange, half: IoHalf) -> RankMember {
        RankMember { row, banks, half }
    }

    /// Two standard ranks: rows 0+1 and rows 2+3.
    pub fn identity() -> Self {
        use IoHalf::*;
        Self {
            ranks: vec![
                Self::pair(Self::member(0, BankRange::ALL, Left), Self::member(1, BankRange::ALL, Right)),
                Self::pair(Self::member(2, BankRange::ALL, Left), Self::member(3, BankRange::ALL, Right)),
            ],
        }
    }

    /// Plan after losing `failed` rows.
    pub fn for_failed_rows(failed: &[usize]) -> Result<Self> {
        use IoHalf::*;
        let s: Vec<usize> = (0..ROWS).filter(|r| !failed.contains(r)).collect();
        let plan = match s.len() {
            4 => Self::identity(),
            3 => Self {
                ranks: vec![
                    Self::pair(Self::member(s[0], BankRange::LOW, Left), Self::member(s[1], BankRange::LOW, Right)),
                    Self::pair(Self::member(s[0], BankRange::HIGH, Right), Self::member(s[2], BankRange::LOW, Left)),
                    Self::pair(Self::member(s[1], BankRange::HIGH, Left), Self::member(s[2], BankRange::HIGH, Right)),
                ],
            },
            2 => Self { ranks: vec![Self::pair(Self::member(s[0], BankRange::ALL, Left), Self::member(s[1], BankRange::ALL, Right))] },
            _ => {
                return Err(Error::Infeasible {
                    reason: format!("{} failed rows cannot be reorganized", failed.len()),
                    violations: failed.iter().map(|r| format!("row {} control wire failed", r + 1)).collect(),
                })
            }
        };
        Ok(plan)
    }

    /// Degraded plan without reorganization: row 0 lost, row 1 runs alone at half width.
    pub fn half_rank() -> Self {
        use IoHalf::*;
        Self {
            ranks: vec![
                LogicalRank { members: vec![Self::member(1, BankRange::ALL, Right)] },
                Self::pair(Self::member(2, BankRange::ALL, Left), Self::member(3, BankRange::ALL, Right)),
            ],
        }
    }

    /// Capacity of each rank relative to a standard two-row rank.
    pub fn capacities(&self) -> Vec<f64> {
        self.ranks
            .iter()
            .map(|r| r.members.iter().map(|m| m.banks.len() as f64).sum::<f64>() / (2 * BANKS) as f64)
            .collect()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (i, r) in self.ranks.iter().enumerate() {
            if r.width_bits() != CHANNEL_BITS {
                v.push(format!("rank {i}: width {} != {CHANNEL_BITS}", r.width_bits()));
            }
        }
        let all: Vec<&RankMember> = self.ranks.iter().flat_map(|r| &r.members).collect();
        for (i, a) in all.iter().enumerate() {
            if a.row >= ROWS {
                v.push(format!("member row {} out of range", a.row + 1));
            }
            for b in &all[i + 1..] {
                if a.row == b.row && a.banks.overlaps(&b.banks) {
                    v.push(format!("row {} banks {}-{} assigned twice", a.row + 1, a.banks.first.max(b.banks.first), a.banks.last.min(b.banks.last)));
                }
            }
        }
        v
    }
}

impl fmt::Display for RankPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.ranks.iter().enumerate() {
            write!(f, "rank {}:", (b'A' + i as u8) as char)?;
            for m in &r.members {
                write!(f, " Row{}[banks {}-{}, {:?}]", m.row + 1, m.banks.first, m.banks.last, m.half)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
