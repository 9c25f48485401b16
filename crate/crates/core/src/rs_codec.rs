//! ChipKill-class Reed–Solomon codec over GF(2^8).
//!
//! A codeword holds one 8-bit symbol per chip: data symbols `a_0..a_7`
//! (chips 0..7) and two or three check symbols `p_0, p_1[, p_2]` (chips 8,
//! 9, 10). Check `k` is the evaluation `p_k = Σ a_i · x_k^i`, so the
//! syndrome of a received word is `S_k = Σ â_i · x_k^i + p̂_k`.
//!
//! Viewed as a parity-check matrix, data chip `j` has column
//! `(x_0^j, x_1^j, x_2^j)` and check chip `8 + k` has the unit column `e_k`.
//! With the default points `x_k = β^(k+1)`, `β = α^72`, any two columns are
//! independent for two checks and any three for three checks, so the codes
//! have minimum distance 3 and 4 respectively.

use crate::error::{Error, Result};
use crate::gf256::{self, FieldElement as Fe};

pub const DATA_SYMBOLS: usize = 8;
pub const MAX_CHECKS: usize = 3;
pub const MAX_CHIPS: usize = DATA_SYMBOLS + MAX_CHECKS;

/// Chip index of check symbol `k`.
#[inline]
pub const fn check_chip(k: usize) -> usize {
    DATA_SYMBOLS + k
}

/// Evaluation points of the check equations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPoints {
    points: [Fe; MAX_CHECKS],
    /// `powers[k][i] = x_k^i`
    powers: [[Fe; DATA_SYMBOLS]; MAX_CHECKS],
    /// `inv_x0_powers[i] = x_0^(-i)`
    inv_x0_powers: [Fe; DATA_SYMBOLS],
    /// Maps `(x_1/x_0)^j` back to `j`.
    locator: [Option<u8>; 256],
}

impl EvalPoints {
    /// Exponent of the default base β = α^72.
    pub const DEFAULT_BETA_LOG: i64 = 72;

    pub fn new(x0: Fe, x1: Fe, x2: Fe) -> Result<Self> {
        let points = [x0, x1, x2];
        if points.iter().any(|p| p.is_zero()) {
            return Err(Error::config("evaluation points must be nonzero"));
        }
        if x0 == x1 || x0 == x2 || x1 == x2 {
            return Err(Error::config("evaluation points must be pairwise distinct"));
        }
        let mut powers = [[Fe::ONE; DATA_SYMBOLS]; MAX_CHECKS];
        for (k, row) in powers.iter_mut().enumerate() {
            for i in 1..DATA_SYMBOLS {
                row[i] = row[i - 1] * points[k];
            }
        }
        let x0_inv = gf256::inv(x0)?;
        let mut inv_x0_powers = [Fe::ONE; DATA_SYMBOLS];
        for i in 1..DATA_SYMBOLS {
            inv_x0_powers[i] = inv_x0_powers[i - 1] * x0_inv;
        }
        let mut locator = [None; 256];
        for j in 0..DATA_SYMBOLS {
            let ratio = powers[1][j] * inv_x0_powers[j];
            if locator[ratio.value() as usize].is_some() {
                return Err(Error::config(format!(
                    "locators (x1/x0)^j are not distinct for j < {DATA_SYMBOLS}"
                )));
            }
            locator[ratio.value() as usize] = Some(j as u8);
        }
        let pts = Self { points, powers, inv_x0_powers, locator };
        if !pts.columns_independent() {
            return Err(Error::config("three-check parity matrix is not distance 4"));
        }
        Ok(pts)
    }

    /// `x_k = β^(k+1)` with `β = α^beta_log`.
    pub fn from_beta_log(beta_log: i64) -> Result<Self> {
        Self::new(
            Fe::alpha_pow(beta_log),
            Fe::alpha_pow(2 * beta_log),
            Fe::alpha_pow(3 * beta_log),
        )
    }

    #[inline]
    pub fn x(&self, k: usize) -> Fe {
        self.points[k]
    }

    #[inline]
    pub fn power(&self, k: usize, i: usize) -> Fe {
        self.powers[k][i]
    }

    /// Parity-check column of `chip` restricted to the first `num_checks` rows.
    pub fn column(&self, chip: usize, num_checks: usize) -> [Fe; MAX_CHECKS] {
        let mut col = [Fe::ZERO; MAX_CHECKS];
        if chip < DATA_SYMBOLS {
            for (k, c) in col.iter_mut().enumerate().take(num_checks) {
                *c = self.powers[k][chip];
            }
        } else {
            col[chip - DATA_SYMBOLS] = Fe::ONE;
        }
        col
    }

    /// Data position whose locator `(x_1/x_0)^j` equals `ratio`.
    #[inline]
    pub fn locate(&self, ratio: Fe) -> Option<usize> {
        self.locator[ratio.value() as usize].map(usize::from)
    }

    fn columns_independent(&self) -> bool {
        let cols: Vec<[Fe; 3]> = (0..MAX_CHIPS).map(|c| self.column(c, 3)).collect();
        for a in 0..MAX_CHIPS {
            for b in a + 1..MAX_CHIPS {
                for c in b + 1..MAX_CHIPS {
                    if det3(cols[a], cols[b], cols[c]).is_zero() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Default for EvalPoints {
    fn default() -> Self {
        Self::from_beta_log(Self::DEFAULT_BETA_LOG).expect("default evaluation points are valid")
    }
}

fn det3(a: [Fe; 3], b: [Fe; 3], c: [Fe; 3]) -> Fe {
    a[0] * (b[1] * c[2] + b[2] * c[1]) + a[1] * (b[0] * c[2] + b[2] * c[0]) + a[2] * (b[0] * c[1] + b[1] * c[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Codeword {
    pub data: [Fe; DATA_SYMBOLS],
    pub checks: [Fe; MAX_CHECKS],
    num_checks: u8,
}

impl Codeword {
    pub fn from_parts(data: [Fe; DATA_SYMBOLS], checks: &[Fe]) -> Result<Self> {
        validate_checks(checks.len())?;
        let mut c = [Fe::ZERO; MAX_CHECKS];
        c[..checks.len()].copy_from_slice(checks);
        Ok(Self { data, checks: c, num_checks: checks.len() as u8 })
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
    pub fn symbol(&self, chip: usize) -> Fe {
        if chip < DATA_SYMBOLS {
            self.data[chip]
        } else {
            self.checks[chip - DATA_SYMBOLS]
        }
    }

    #[inline]
    pub fn set_symbol(&mut self, chip: usize, v: Fe) {
        if chip < DATA_SYMBOLS {
            self.data[chip] = v;
        } else {
            self.checks[chip - DATA_SYMBOLS] = v;
        }
    }

    /// XORs `e` into the symbol of `chip`.
    #[inline]
    pub fn inject(&mut self, chip: usize, e: Fe) {
        let v = self.symbol(chip) + e;
        self.set_symbol(chip, v);
    }
}

fn validate_checks(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::config(format!("number of check symbols must be 2 or 3, got {n}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SymbolFix {
    pub chip: usize,
    pub error: Fe,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeKind {
    Clean,
    Corrected { chip: usize, error: Fe },
    /// Erasure decoding solved for several symbols at once.
    Recovered(Vec<SymbolFix>),
    Uncorrectable,
    /// Detect phase flagged the word; correction has not run.
    PhaseOneFlag,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    pub kind: DecodeKind,
    /// Delivered data; `None` when nothing could be delivered.
    pub data: Option<[Fe; DATA_SYMBOLS]>,
}

impl DecodeResult {
    fn clean(cw: &Codeword) -> Self {
        Self { kind: DecodeKind::Clean, data: Some(cw.data) }
    }

    fn uncorrectable() -> Self {
        Self { kind: DecodeKind::Uncorrectable, data: None }
    }

    pub fn is_uncorrectable(&self) -> bool {
        matches!(self.kind, DecodeKind::Uncorrectable | DecodeKind::PhaseOneFlag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Detection {
    Pass,
    Flag,
}

/// How many erasures a decoder may take on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ErasurePolicy {
    /// Keep one check symbol for detection: at most `checks - 1` erasures.
    #[default]
    Guarded,
    /// Spend every check symbol on erasures (assumes no further errors).
    Exhaustive,
}

impl ErasurePolicy {
    pub fn capacity(self, num_checks: usize) -> usize {
        match self {
            ErasurePolicy::Guarded => num_checks - 1,
            ErasurePolicy::Exhaustive => num_checks,
        }
    }
}

pub fn encode(data: &[Fe; DATA_SYMBOLS], points: &EvalPoints, num_checks: usize) -> Result<Codeword> {
    validate_checks(num_checks)?;
    let mut checks = [Fe::ZERO; MAX_CHECKS];
    for (k, p) in checks.iter_mut().enumerate().take(num_checks) {
        *p = eval(data, points, k);
    }
    Ok(Codeword { data: *data, checks, num_checks: num_checks as u8 })
}

#[inline]
fn eval(data: &[Fe; DATA_SYMBOLS], points: &EvalPoints, k: usize) -> Fe {
    let mut acc = Fe::ZERO;
    for (i, a) in data.iter().enumerate() {
        acc += *a * points.power(k, i);
    }
    acc
}

/// `S_k` for each check present in `received`.
pub fn syndromes(received: &Codeword, points: &EvalPoints) -> Vec<Fe> {
    let s = syndrome_array(received, points);
    s[..received.num_checks()].to_vec()
}

#[inline]
fn syndrome_array(received: &Codeword, points: &EvalPoints) -> [Fe; MAX_CHECKS] {
    let mut s = [Fe::ZERO; MAX_CHECKS];
    for (k, sk) in s.iter_mut().enumerate().take(received.num_checks()) {
        *sk = eval(&received.data, points, k) + received.checks[k];
    }
    s
}

/// Single-symbol-correcting decode with two check symbols.
///
/// A zero `S_1` with nonzero `S_0` is blamed on `p_0` and the mirror case on
/// `p_1` (the nearest codeword for a check-symbol-only syndrome).
pub fn decode_ssc(received: &Codeword, points: &EvalPoints) -> Result<DecodeResult> {
    if received.num_checks() != 2 {
        return Err(Error::config("decode_ssc needs exactly two check symbols"));
    }
    Ok(ssc_from_syndromes(received, points, syndrome_array(received, points)))
}

fn ssc_from_syndromes(received: &Codeword, points: &EvalPoints, s: [Fe; MAX_CHECKS]) -> DecodeResult {
    let (s0, s1) = (s[0], s[1]);
    match (s0.is_zero(), s1.is_zero()) {
        (true, true) => DecodeResult::clean(received),
        (false, true) => DecodeResult {
            kind: DecodeKind::Corrected { chip: check_chip(0), error: s0 },
            data: Some(received.data),
        },
        (true, false) => DecodeResult {
            kind: DecodeKind::Corrected { chip: check_chip(1), error: s1 },
            data: Some(received.data),
        },
        (false, false) => {
            // s0 is nonzero here
            let ratio = gf256::div(s1, s0).expect("nonzero s0");
            match points.locate(ratio) {
                Some(j) => {
                    let e = s0 * points.inv_x0_powers[j];
                    let mut data = received.data;
                    data[j] += e;
                    DecodeResult { kind: DecodeKind::Corrected { chip: j, error: e }, data: Some(data) }
                }
                None => DecodeResult::uncorrectable(),
            }
        }
    }
}

/// Detection using only the data symbols and `p_0`; `p_1` is never read.
pub fn detect_phase(data: &[Fe; DATA_SYMBOLS], p0: Fe, points: &EvalPoints) -> Detection {
    if (eval(data, points, 0) + p0).is_zero() {
        Detection::Pass
    } else {
        Detection::Flag
    }
}

/// Decoupled decode: detect with `p_0`, fetch the full word only on a flag.
///
/// `fetch_full` supplies the complete codeword (data plus every check
/// symbol) and is called at most once.
pub fn decode_decoupled_lazy<F>(
    data: &[Fe; DATA_SYMBOLS],
    p0: Fe,
    points: &EvalPoints,
    fetch_full: F,
) -> Result<DecodeResult>
where
    F: FnOnce() -> Codeword,
{
    match detect_phase(data, p0, points) {
        Detection::Pass => Ok(DecodeResult { kind: DecodeKind::Clean, data: Some(*data) }),
        Detection::Flag => decode_ssc(&fetch_full(), points),
    }
}

pub fn decode_decoupled(received: &Codeword, points: &EvalPoints) -> Result<DecodeResult> {
    decode_decoupled_lazy(&received.data, received.checks[0], points, || *received)
}

/// Double-symbol-detecting, single-symbol-correcting decode with three checks.
pub fn decode_dsd_ssc(received: &Codeword, points: &EvalPoints) -> Result<DecodeResult> {
    if received.num_checks() != 3 {
        return Err(Error::config("decode_dsd_ssc needs exactly three check symbols"));
    }
    Ok(dsd_from_syndromes(received, points, syndrome_array(received, points)))
}

fn dsd_from_syndromes(received: &Codeword, points: &EvalPoints, s: [Fe; MAX_CHECKS]) -> DecodeResult {
    let nonzero: Vec<usize> = (0..3).filter(|&k| !s[k].is_zero()).collect();
    match nonzero.as_slice() {
        [] => DecodeResult::clean(received),
        [k] => DecodeResult {
            kind: DecodeKind::Corrected { chip: check_chip(*k), error: s[*k] },
            data: Some(received.data),
        },
        _ if s[0].is_zero() => DecodeResult::uncorrectable(),
        _ => {
            let s0_inv = gf256::inv(s[0]).expect("nonzero s0");
            let Some(j) = points.locate(s[1] * s0_inv) else {
                return DecodeResult::uncorrectable();
            };
            let e = s[0] * points.inv_x0_powers[j];
            if e * points.power(2, j) != s[2] {
                return DecodeResult::uncorrectable();
            }
            let mut data = received.data;
            data[j] += e;
            DecodeResult { kind: DecodeKind::Corrected { chip: j, error: e }, data: Some(data) }
        }
    }
}

/// Decode with known-bad symbol positions.
///
/// Erased symbols are solved for from the check equations. Check symbols
/// left over beyond the erasures are used to correct one further unknown
/// error when at least two remain, otherwise to verify the solution.
pub fn decode_with_erasures(
    received: &Codeword,
    points: &EvalPoints,
    erased: &[usize],
    policy: ErasurePolicy,
) -> Result<DecodeResult> {
    let r = received.num_checks();
    let n = received.num_chips();
    if let Some(&bad) = erased.iter().find(|&&c| c >= n) {
        return Err(Error::domain(format!("erased chip {bad} out of range 0..{n}")));
    }
    let mut erased: Vec<usize> = erased.to_vec();
    erased.sort_unstable();
    erased.dedup();
    if erased.is_empty() {
        return match r {
            2 => decode_ssc(received, points),
            _ => decode_dsd_ssc(received, points),
        };
    }
    if erased.len() > policy.capacity(r) {
        return Ok(DecodeResult::uncorrectable());
    }
    let s = syndrome_array(received, points);
    if s[..r].iter().all(|v| v.is_zero()) {
        return Ok(DecodeResult::clean(received));
    }
    if let Some(fixes) = solve_support(points, r, &s, &erased) {
        return Ok(apply_fixes(received, fixes));
    }
    if r - erased.len() >= 2 {
        let mut support = erased.clone();
        support.push(0);
        for c in (0..n).filter(|c| !erased.contains(c)) {
            *support.last_mut().unwrap() = c;
            if let Some(fixes) = solve_support(points, r, &s, &support) {
                if !fixes.last().unwrap().error.is_zero() {
                    return Ok(apply_fixes(received, fixes));
                }
            }
        }
    }
    Ok(DecodeResult::uncorrectable())
}

fn apply_fixes(received: &Codeword, fixes: Vec<SymbolFix>) -> DecodeResult {
    let mut data = received.data;
    for f in &fixes {
        if f.chip < DATA_SYMBOLS {
            data[f.chip] += f.error;
        }
    }
    DecodeResult { kind: DecodeKind::Recovered(fixes), data: Some(data) }
}

/// Solves `H_support · v = s` over the first `r` rows; `None` if inconsistent.
fn solve_support(points: &EvalPoints, r: usize, s: &[Fe; MAX_CHECKS], support: &[usize]) -> Option<Vec<SymbolFix>> {
    let m = support.len();
    debug_assert!(m <= r);
    // augmented r x (m + 1)
    let mut a = [[Fe::ZERO; MAX_CHECKS + 1]; MAX_CHECKS];
    for (j, &chip) in support.iter().enumerate() {
        let col = points.column(chip, r);
        for k in 0..r {
            a[k][j] = col[k];
        }
    }
    for k in 0..r {
        a[k][m] = s[k];
    }
    let mut row = 0;
    let mut pivots = [usize::MAX; MAX_CHECKS + 1];
    for col in 0..m {
        let p = (row..r).find(|&k| !a[k][col].is_zero())?;
        a.swap(row, p);
        let inv = gf256::inv(a[row][col]).ok()?;
        for j in 0..=m {
            a[row][j] *= inv;
        }
        for k in 0..r {
            if k != row && !a[k][col].is_zero() {
                let f = a[k][col];
                for j in 0..=m {
                    let t = f * a[row][j];
                    a[k][j] += t;
                }
            }
        }
        pivots[col] = row;
        row += 1;
    }
    if (row..r).any(|k| !a[k][m].is_zero()) {
        return None;
    }
    Some(
        support
            .iter()
            .enumerate()
            .map(|(j, &chip)| SymbolFix { chip, error: a[pivots[j]][m] })
            .collect(),
    )
}
