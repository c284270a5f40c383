//! The S-maup statistic `M(rho, theta)`, its critical values, the hypothesis
//! test and the minimum-safe-k scan.
//!
//! `M = L(θ) / (1 + η(θ) e^{τ(θ) ρ})` with
//!
//! * `L(θ) = 1 / (1 + e^{b + m θ})`, the ceiling at aggregation ratio θ,
//! * `η(θ) = p θ^a`, where along ρ the decline starts,
//! * `τ(θ) = β0 + β1 θ`, how fast it declines.
//!
//! Values near 1 mean the variable is very sensitive to aggregation. H0 (no
//! sensitivity) is rejected when `M` exceeds the critical value for the
//! variable's `(rho, N)` cell.

use std::ops::RangeInclusive;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sar::{estimate_rho, AreaVariable};
use crate::stats;
use crate::weights::SpatialWeights;

/// Embedded critical-value asset, `rho,n,alpha,value`.
pub const CRITICAL_VALUES_CSV: &str = include_str!("../data/critical_values_v1.csv");
pub const CRITICAL_VALUES_VERSION: &str = "1";

pub const RHO_GRID: [f64; 9] = [-0.9, -0.7, -0.5, -0.3, 0.0, 0.3, 0.5, 0.7, 0.9];
pub const N_GRID: [usize; 6] = [25, 100, 225, 400, 625, 900];

/// Calibrated constants of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmaupParams {
    pub b: f64,
    pub m: f64,
    pub p: f64,
    pub a: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl Default for SmaupParams {
    fn default() -> Self {
        Self { b: -2.188, m: 7.031, p: 0.516, a: 1.287, beta0: 5.319, beta1: -5.532 }
    }
}

impl SmaupParams {
    /// Ceiling `L(θ) = 1 / (1 + e^{b + mθ})`.
    pub fn l_of_theta(&self, theta: f64) -> f64 {
        1.0 / (1.0 + (self.b + self.m * theta).exp())
    }

    /// `η(θ) = p θ^a`.
    pub fn eta_of_theta(&self, theta: f64) -> f64 {
        self.p * theta.powf(self.a)
    }

    /// `τ(θ) = β0 + β1 θ`.
    pub fn tau_of_theta(&self, theta: f64) -> f64 {
        self.beta0 + self.beta1 * theta
    }

    pub fn m_statistic(&self, rho: f64, theta: f64) -> f64 {
        debug_assert!(theta > 0.0 && theta <= 1.0, "theta = {theta}");
        self.l_of_theta(theta) / (1.0 + self.eta_of_theta(theta) * (self.tau_of_theta(theta) * rho).exp())
    }
}

/// `M(rho, theta)` for the given constants.
pub fn m_statistic(rho: f64, theta: f64, params: &SmaupParams) -> f64 {
    params.m_statistic(rho, theta)
}

/// Significance levels with tabulated critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Level {
    P01,
    P05,
    P10,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::P01, Level::P05, Level::P10];

    pub fn alpha(self) -> f64 {
        match self {
            Level::P01 => 0.01,
            Level::P05 => 0.05,
            Level::P10 => 0.1,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<f64> for Level {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        Level::ALL
            .into_iter()
            .find(|l| (l.alpha() - alpha).abs() < 1e-12)
            .ok_or(Error::InvalidLevel(alpha))
    }
}

impl From<Level> for f64 {
    fn from(l: Level) -> f64 {
        l.alpha()
    }
}

/// How a `(rho, N)` pair off the grid is mapped onto the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lookup {
    /// Closest grid cell (rho ties toward 0, N clamped to the grid).
    #[default]
    Nearest,
    /// Bilinear in (rho, N) between surrounding grid cells, clamped.
    Bilinear,
}

/// Critical values over the rho x N x alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    values: [[[f64; 3]; 6]; 9],
}

impl CriticalValueTable {
    /// The table shipped with the crate.
    pub fn embedded() -> &'static CriticalValueTable {
        static TABLE: OnceLock<CriticalValueTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CriticalValueTable::from_csv_str(CRITICAL_VALUES_CSV).expect("embedded critical values are valid")
        })
    }

    /// Parses `rho,n,alpha,value` rows; every grid cell must appear exactly
    /// once and the values must not increase with alpha.
    pub fn from_csv_str(content: &str) -> Result<Self> {
        let mut values = [[[f64::NAN; 3]; 6]; 9];
        for (idx, raw) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("rho") {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err("expected rho,n,alpha,value".into()));
            }
            let rho: f64 = fields[0].parse().map_err(|_| err(format!("bad rho `{}`", fields[0])))?;
            let n: usize = fields[1].parse().map_err(|_| err(format!("bad n `{}`", fields[1])))?;
            let alpha: f64 = fields[2].parse().map_err(|_| err(format!("bad alpha `{}`", fields[2])))?;
            let value: f64 = fields[3].parse().map_err(|_| err(format!("bad value `{}`", fields[3])))?;
            let ri = RHO_GRID
                .iter()
                .position(|&g| (g - rho).abs() < 1e-9)
                .ok_or_else(|| err(format!("rho {rho} is not on the grid")))?;
            let ni = N_GRID.iter().position(|&g| g == n).ok_or_else(|| err(format!("n {n} is not on the grid")))?;
            let li = Level::try_from(alpha).map_err(|_| err(format!("alpha {alpha} is not tabulated")))?.index();
            if !values[ri][ni][li].is_nan() {
                return Err(err(format!("duplicate cell rho={rho}, n={n}, alpha={alpha}")));
            }
            values[ri][ni][li] = value;
        }
        for (ri, rho) in RHO_GRID.iter().enumerate() {
            for (ni, n) in N_GRID.iter().enumerate() {
                let cell = values[ri][ni];
                if cell.iter().any(|v| v.is_nan()) {
                    return Err(Error::Parse { line: 0, message: format!("missing cell rho={rho}, n={n}") });
                }
                if !(cell[0] >= cell[1] && cell[1] >= cell[2]) {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("critical values at rho={rho}, n={n} increase with alpha"),
                    });
                }
            }
        }
        Ok(Self { values })
    }

    /// Value at an exact grid cell.
    pub fn get(&self, rho_index: usize, n_index: usize, level: Level) -> f64 {
        self.values[rho_index][n_index][level.index()]
    }

    pub fn lookup(&self, n: usize, rho: f64, level: Level, mode: Lookup) -> f64 {
        match mode {
            Lookup::Nearest => self.get(snap_rho(rho), snap_n(n), level),
            Lookup::Bilinear => {
                let (r0, r1, tr) = bracket(&RHO_GRID, rho);
                let n_grid = N_GRID.map(|v| v as f64);
                let (n0, n1, tn) = bracket(&n_grid, n as f64);
                let at = |ri, ni| self.get(ri, ni, level);
                let low = at(r0, n0) * (1.0 - tn) + at(r0, n1) * tn;
                let high = at(r1, n0) * (1.0 - tn) + at(r1, n1) * tn;
                low * (1.0 - tr) + high * tr
            }
        }
    }

    /// `rho,n,alpha,value` CSV, rows in rho, alpha, n order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("rho,n,alpha,value\n");
        for (ri, rho) in RHO_GRID.iter().enumerate() {
            for level in Level::ALL {
                for (ni, n) in N_GRID.iter().enumerate() {
                    out.push_str(&format!("{rho:.1},{n},{},{:.5}\n", level.alpha(), self.get(ri, ni, level)));
                }
            }
        }
        out
    }
}

/// Index of the rho grid value closest to `rho`; equidistant pairs resolve
/// toward 0.
fn snap_rho(rho: f64) -> usize {
    let mut best = 0;
    for (i, g) in RHO_GRID.iter().enumerate() {
        let d = (g - rho).abs();
        let best_d = (RHO_GRID[best] - rho).abs();
        if d < best_d - 1e-9 || ((d - best_d).abs() <= 1e-9 && g.abs() < RHO_GRID[best].abs()) {
            best = i;
        }
    }
    best
}

fn snap_n(n: usize) -> usize {
    let mut best = 0;
    for (i, g) in N_GRID.iter().enumerate() {
        if g.abs_diff(n) < N_GRID[best].abs_diff(n) {
            best = i;
        }
    }
    best
}

/// Surrounding grid indices and the interpolation weight of the upper one.
fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return (0, 0, 0.0);
    }
    if x >= grid[last] {
        return (last, last, 0.0);
    }
    let hi = grid.partition_point(|&g| g <= x).min(last);
    let lo = hi - 1;
    (lo, hi, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

/// Tabulated critical value `M_{alpha; rho, N}` with nearest-cell lookup.
pub fn critical_value(n: usize, rho: f64, alpha: f64) -> Result<f64> {
    let level = Level::try_from(alpha)?;
    Ok(CriticalValueTable::embedded().lookup(n, rho, level, Lookup::Nearest))
}

/// Sorted S-maup values simulated under H0 for one `(N, rho)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NullFile", into = "NullFile")]
pub struct NullDistribution {
    pub n: usize,
    pub rho: f64,
    pub replicates: usize,
    pub r_aggregations: usize,
    pub seed: u64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NullFile {
    n: usize,
    rho: f64,
    replicates: usize,
    #[serde(default = "default_r")]
    r_aggregations: usize,
    seed: u64,
    values: Vec<f64>,
}

fn default_r() -> usize {
    30
}

impl NullDistribution {
    /// Sorts `values`; `replicates` is their count.
    pub fn new(n: usize, rho: f64, r_aggregations: usize, seed: u64, mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { needed: 1, actual: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("null values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { n, rho, replicates: values.len(), r_aggregations, seed, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of null values strictly above `m`.
    pub fn pseudo_p(&self, m: f64) -> f64 {
        stats::pseudo_p(&self.values, m).expect("null distribution is never empty")
    }

    /// The `(1 - alpha)` percentile, i.e. the empirical critical value.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        stats::percentile(&self.values, 100.0 * (1.0 - alpha))
    }
}

impl TryFrom<NullFile> for NullDistribution {
    type Error = Error;

    fn try_from(f: NullFile) -> Result<Self> {
        if f.values.len() != f.replicates {
            return Err(Error::InvalidParameter(format!(
                "null file lists {} values but replicates = {}",
                f.values.len(),
                f.replicates
            )));
        }
        if f.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("null values are not sorted ascending".into()));
        }
        Self::new(f.n, f.rho, f.r_aggregations, f.seed, f.values)
    }
}

impl From<NullDistribution> for NullFile {
    fn from(d: NullDistribution) -> Self {
        Self {
            n: d.n,
            rho: d.rho,
            replicates: d.replicates,
            r_aggregations: d.r_aggregations,
            seed: d.seed,
            values: d.values,
        }
    }
}

/// Options for [`smaup_test`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TestOptions<'a> {
    /// Level used by [`SmaupResult::rejected`]; all three levels are always
    /// evaluated.
    pub level: Option<Level>,
    /// Use this rho instead of the ML estimate.
    pub rho_override: Option<f64>,
    pub null: Option<&'a NullDistribution>,
    pub params: SmaupParams,
    pub lookup: Lookup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub alpha: Level,
    pub critical_value: f64,
    /// `M > critical_value`.
    pub reject: bool,
    /// `pseudo_p < alpha`, when a null distribution was supplied.
    pub reject_pseudo_p: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmaupResult {
    pub m_value: f64,
    pub theta: f64,
    pub rho_used: f64,
    pub rho_estimated: bool,
    pub n: usize,
    pub k: usize,
    pub level: Level,
    pub decisions: Vec<LevelDecision>,
    pub pseudo_p: Option<f64>,
    pub lookup: Lookup,
    pub params: SmaupParams,
    pub version: String,
}

impl SmaupResult {
    pub fn decision(&self, level: Level) -> &LevelDecision {
        &self.decisions[level.index()]
    }

    pub fn critical_value(&self, level: Level) -> f64 {
        self.decision(level).critical_value
    }

    /// Critical-value decision at the configured level.
    pub fn rejected(&self) -> bool {
        self.decision(self.level).reject
    }

    /// Decision at `level` on the given basis.
    pub fn rejects(&self, level: Level, basis: DecisionBasis) -> bool {
        let d = self.decision(level);
        match basis {
            DecisionBasis::CriticalValue => d.reject,
            DecisionBasis::PseudoP => d.reject_pseudo_p.unwrap_or(d.reject),
        }
    }

    /// `***`, `**`, `*` or empty for rejection at 0.01 / 0.05 / 0.1.
    pub fn stars(&self, basis: DecisionBasis) -> &'static str {
        if self.rejects(Level::P01, basis) {
            "***"
        } else if self.rejects(Level::P05, basis) {
            "**"
        } else if self.rejects(Level::P10, basis) {
            "*"
        } else {
            ""
        }
    }
}

/// What a rejection is judged on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionBasis {
    #[default]
    CriticalValue,
    /// Pseudo p-value against a supplied null distribution; falls back to the
    /// critical value when none was given.
    PseudoP,
}

/// Tests H0 "y is not significantly affected by the MAUP" when its `n`
/// areas are aggregated into `k` regions.
pub fn smaup_test(y: &AreaVariable, w: &SpatialWeights, k: usize, opts: &TestOptions) -> Result<SmaupResult> {
    y.check_len(w)?;
    let n = w.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let (rho, estimated) = resolve_rho(y, w, opts)?;
    Ok(evaluate(n, k, rho, estimated, opts))
}

fn resolve_rho(y: &AreaVariable, w: &SpatialWeights, opts: &TestOptions) -> Result<(f64, bool)> {
    match opts.rho_override {
        Some(rho) if rho.abs() < 1.0 => Ok((rho, false)),
        Some(rho) => Err(Error::InvalidParameter(format!("|rho| must be below 1, got {rho}"))),
        None => Ok((estimate_rho(w, y)?, true)),
    }
}

/// The test for a known rho, without touching the data.
pub fn evaluate(n: usize, k: usize, rho: f64, rho_estimated: bool, opts: &TestOptions) -> SmaupResult {
    let theta = k as f64 / n as f64;
    let m_value = opts.params.m_statistic(rho, theta);
    let pseudo_p = opts.null.map(|d| d.pseudo_p(m_value));
    let table = CriticalValueTable::embedded();
    let decisions = Level::ALL
        .into_iter()
        .map(|level| {
            let critical_value = table.lookup(n, rho, level, opts.lookup);
            LevelDecision {
                alpha: level,
                critical_value,
                reject: m_value > critical_value,
                reject_pseudo_p: pseudo_p.map(|p| p < level.alpha()),
            }
        })
        .collect();
    SmaupResult {
        m_value,
        theta,
        rho_used: rho,
        rho_estimated,
        n,
        k,
        level: opts.level.unwrap_or(Level::P05),
        decisions,
        pseudo_p,
        lookup: opts.lookup,
        params: opts.params,
        version: crate::VERSION.to_string(),
    }
}

/// Outcome of a minimum-safe-k scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeK {
    /// Smallest k reached before the first rejection.
    Safe(usize),
    /// The largest k in range already rejects.
    NoSafeK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScan {
    /// One result per k, descending.
    pub rows: Vec<SmaupResult>,
    pub verdict: SafeK,
}

/// Evaluates the test at every k in `k_range` (descending) and derives the
/// safe-k verdict: scanning down from the top, the answer is the last k
/// before the first rejection.
pub fn scan_k(
    y: &AreaVariable,
    w: &SpatialWeights,
    level: Level,
    k_range: RangeInclusive<usize>,
    basis: DecisionBasis,
    opts: &TestOptions,
) -> Result<KScan> {
    y.check_len(w)?;
    let n = w.n();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || hi > n || lo > hi {
        return Err(Error::InvalidParameter(format!("k range {lo}..={hi} must lie within 1..={n}")));
    }
    let (rho, estimated) = resolve_rho(y, w, opts)?;
    let rows: Vec<SmaupResult> = (lo..=hi).rev().map(|k| evaluate(n, k, rho, estimated, opts)).collect();
    let mut verdict = SafeK::Safe(lo);
    let mut last_ok = None;
    for row in &rows {
        if row.rejects(level, basis) {
            verdict = last_ok.map_or(SafeK::NoSafeK, SafeK::Safe);
            break;
        }
        last_ok = Some(row.k);
    }
    Ok(KScan { rows, verdict })
}

/// Smallest k in `k_range` the variable can be aggregated to before the
/// test starts rejecting at `level`, scanning down from the top of the range.
pub fn min_safe_k(
    y: &AreaVariable,
    w: &SpatialWeights,
    level: Level,
    k_range: RangeInclusive<usize>,
    opts: &TestOptions,
) -> Result<SafeK> {
    let basis = if opts.null.is_some() { DecisionBasis::PseudoP } else { DecisionBasis::CriticalValue };
    Ok(scan_k(y, w, level, k_range, basis, opts)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_functions() {
        let p = SmaupParams::default();
        assert!((p.l_of_theta(1e-12) - 0.899_166_719_283_618_4).abs() < 1e-11);
        assert!((p.l_of_theta(0.4) - 0.348_781_402_727_662_6).abs() < 1e-14);
        assert_eq!(p.eta_of_theta(1.0), 0.516);
        assert!((p.eta_of_theta(0.5) - 0.211_457_988_770_479_4).abs() < 1e-14);
        assert!((p.tau_of_theta(0.5) - 2.553).abs() < 1e-12);
        assert_eq!(p.tau_of_theta(0.0), 5.319);
        assert!(p.tau_of_theta(0.961_496_746_203_904_5).abs() < 1e-12);
    }

    #[test]
    fn monotone_components() {
        let p = SmaupParams::default();
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        assert!(grid.windows(2).all(|w| p.l_of_theta(w[0]) > p.l_of_theta(w[1])));
        assert!(grid.windows(2).all(|w| p.eta_of_theta(w[0]) < p.eta_of_theta(w[1])));
    }

    #[test]
    fn statistic_examples() {
        let p = SmaupParams::default();
        assert!((p.m_statistic(0.0, 0.5) - 0.172_992_540_516_870_77).abs() < 1e-14);
        assert!((p.m_statistic(0.9, 0.5) - 0.067_511_153_006_983_99).abs() < 1e-14);
        assert!((p.m_statistic(-0.9, 0.5) - 0.205_212_561_499_921_3).abs() < 1e-14);
    }

    #[test]
    fn table_lookups() {
        assert_eq!(critical_value(100, 0.0, 0.05).unwrap(), 0.15746);
        assert_eq!(critical_value(1000, 0.007, 0.05).unwrap(), 0.05234);
        assert_eq!(critical_value(25, -0.9, 0.01).unwrap(), 0.83702);
        assert!(matches!(critical_value(100, 0.0, 0.2), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn rho_snapping() {
        assert_eq!(RHO_GRID[snap_rho(0.8)], 0.7);
        assert_eq!(RHO_GRID[snap_rho(-0.8)], -0.7);
        assert_eq!(RHO_GRID[snap_rho(0.15)], 0.0);
        assert_eq!(RHO_GRID[snap_rho(-0.15)], 0.0);
        assert_eq!(RHO_GRID[snap_rho(0.16)], 0.3);
        assert_eq!(RHO_GRID[snap_rho(0.99)], 0.9);
        assert_eq!(RHO_GRID[snap_rho(-0.634)], -0.7);
        assert_eq!(N_GRID[snap_n(1)], 25);
        assert_eq!(N_GRID[snap_n(62)], 25);
        assert_eq!(N_GRID[snap_n(63)], 100);
        assert_eq!(N_GRID[snap_n(5000)], 900);
    }

    #[test]
    fn bilinear_hits_grid_points_and_interpolates() {
        let t = CriticalValueTable::embedded();
        assert_eq!(t.lookup(100, 0.0, Level::P05, Lookup::Bilinear), 0.15746);
        let mid = t.lookup(100, 0.15, Level::P05, Lookup::Bilinear);
        assert!((mid - 0.5 * (0.15746 + 0.21088)).abs() < 1e-12);
        assert_eq!(t.lookup(5000, 0.95, Level::P10, Lookup::Bilinear), 0.22411);
    }

    #[test]
    fn export_matches_asset() {
        assert_eq!(CriticalValueTable::embedded().to_csv_string(), CRITICAL_VALUES_CSV);
    }

    #[test]
    fn table_rejects_alpha_inversion() {
        let bad = CRITICAL_VALUES_CSV.replace("-0.9,25,0.1,0.69331", "-0.9,25,0.1,0.9");
        assert!(CriticalValueTable::from_csv_str(&bad).is_err());
        let missing: String = CRITICAL_VALUES_CSV.lines().skip(2).map(|l| format!("{l}\n")).collect();
        assert!(CriticalValueTable::from_csv_str(&missing).is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!(Level::try_from(0.05).unwrap(), Level::P05);
        assert!(Level::try_from(0.02).is_err());
    }

    #[test]
    fn full_resolution_never_rejects() {
        let opts = TestOptions { rho_override: Some(0.0), ..Default::default() };
        for n in [25, 100, 400, 900, 1000] {
            let r = evaluate(n, n, 0.0, false, &opts);
            assert!((r.m_value - 0.005_159_437_359_667_936).abs() < 1e-15);
            assert!(r.decisions.iter().all(|d| !d.reject));
        }
    }

    #[test]
    fn pseudo_p_from_null() {
        let null = NullDistribution::new(100, 0.0, 30, 1, vec![0.4, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!(null.values(), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(null.pseudo_p(0.25), 0.5);
        let json = serde_json::to_string(&null).unwrap();
        assert_eq!(serde_json::from_str::<NullDistribution>(&json).unwrap(), null);
        let unsorted = r#"{"n":4,"rho":0,"replicates":2,"seed":0,"values":[0.2,0.1]}"#;
        assert!(serde_json::from_str::<NullDistribution>(unsorted).is_err());
        let short = r#"{"n":4,"rho":0,"replicates":3,"seed":0,"values":[0.1,0.2]}"#;
        assert!(serde_json::from_str::<NullDistribution>(short).is_err());
    }

    #[test]
    fn stars_follow_levels() {
        let null = NullDistribution::new(100, 0.0, 30, 0, (0..1000).map(|i| i as f64 / 1000.0).collect()).unwrap();
        let opts = TestOptions { null: Some(&null), ..Default::default() };
        // theta = 0.1 at rho = 0 gives M ~ 0.794: pseudo-p = 0.205
        let r = evaluate(100, 10, 0.0, false, &opts);
        assert_eq!(r.stars(DecisionBasis::CriticalValue), "***");
        assert_eq!(r.stars(DecisionBasis::PseudoP), "");
        assert!((r.pseudo_p.unwrap() - 0.205).abs() < 1e-12);
    }
}
