//! Monte Carlo harnesses: aggregation effects on mean and variance, null
//! distributions of the statistic, and its power and size.
//!
//! Work is split into independent units (one per instance). Every random
//! stream of a unit is derived from the master seed by the unit's position,
//! and results are merged in unit order, so a report is bitwise identical
//! for any worker count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{try_map_indexed, Workers};
use crate::regionalize::{aggregate_values, random_regions};
use crate::sar::{estimate_rho, generate_sar, generate_with_target_rho, AreaVariable, SarSpec};
use crate::seeds::SeedKey;
use crate::statistic::{CriticalValueTable, Level, Lookup, NullDistribution, SmaupParams};
use crate::stats::{self, levene_test, levene_test_with, welch_t_test, Center};
use crate::weights::SpatialWeights;

/// Level of the Levene tests inside the acceptance filters.
pub const LEVENE_ALPHA: f64 = 0.05;

/// Consecutive failed k draws on one field before the field is redrawn.
pub const MAX_K_REDRAWS: usize = 50;

/// Attempts without an acceptance (rate below 1e-4) before a stall is
/// declared.
pub const STALL_WINDOW: usize = 10_000;

const TAG_NULL: u64 = 1;
const TAG_POWER: u64 = 2;
const TAG_SIZE: u64 = 3;
const TAG_EFFECTS: u64 = 4;

/// Which Levene outcomes make an instance acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// No aggregation differs in variance (H0 holds): null and size runs.
    NoRejection,
    /// Every aggregation differs in variance (H1 holds): power runs.
    AllRejected,
}

impl Acceptance {
    pub fn accepts(self, rejections: usize, r: usize) -> bool {
        match self {
            Acceptance::NoRejection => rejections == 0,
            Acceptance::AllRejected => rejections == r,
        }
    }
}

/// Shared settings of the accept/reject instance recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    /// Random aggregations per instance.
    pub r: usize,
    pub levene_alpha: f64,
    pub levene_center: Center,
    pub max_k_redraws: usize,
    pub stall_window: usize,
    /// Use the generating rho in the statistic instead of re-estimating it.
    pub reuse_rho: bool,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            r: 30,
            levene_alpha: LEVENE_ALPHA,
            levene_center: Center::Mean,
            max_k_redraws: MAX_K_REDRAWS,
            stall_window: STALL_WINDOW,
            reuse_rho: false,
        }
    }
}

/// Admissible k for an instance on `n` areas: `0.1 n < k < n`.
pub fn k_bounds(n: usize) -> Result<(usize, usize)> {
    let lo = n / 10 + 1;
    let hi = n.saturating_sub(1);
    if lo > hi || hi < 2 {
        return Err(Error::InvalidParameter(format!("no integer k with 0.1*{n} < k < {n}")));
    }
    Ok((lo.max(2), hi))
}

/// Counts Levene rejections between `y` and `r` random aggregations into
/// `k` regions. With `stop` set, counting ends once the verdict for that
/// acceptance rule is settled.
pub fn levene_rejections(
    w: &SpatialWeights,
    y: &AreaVariable,
    k: usize,
    recipe: &Recipe,
    key: SeedKey,
    stop: Option<Acceptance>,
) -> Result<usize> {
    let mut rejections = 0;
    for rep in 0..recipe.r {
        let regions = random_regions(w, k, &mut key.child(rep as u64).rng())?;
        let agg = aggregate_values(y.values(), regions.assignment(), k)?;
        let rejected = levene_test_with(&[y.values(), &agg.region_means], recipe.levene_center)?
            .rejects(recipe.levene_alpha);
        rejections += usize::from(rejected);
        match stop {
            Some(Acceptance::NoRejection) if rejected => break,
            Some(Acceptance::AllRejected) if !rejected => break,
            _ => {}
        }
    }
    Ok(rejections)
}

/// One accepted instance of the recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub y: AreaVariable,
    pub k: usize,
    pub rho_hat: f64,
    pub m_value: f64,
    pub attempts: usize,
}

/// Draws SAR fields at `rho` and random k until one `(field, k)` passes the
/// acceptance rule. A rejected k is redrawn on the same field; after
/// `max_k_redraws` failures the field is redrawn too.
pub fn draw_instance(
    w: &SpatialWeights,
    rho: f64,
    acceptance: Acceptance,
    recipe: &Recipe,
    params: &SmaupParams,
    key: SeedKey,
) -> Result<Instance> {
    let n = w.n();
    let (k_lo, k_hi) = k_bounds(n)?;
    let mut attempts = 0;
    for field in 0u64.. {
        let field_key = key.child(field);
        let y = generate_sar(w, &SarSpec::new(rho, field_key.child(0).seed())?)?;
        for redraw in 0..recipe.max_k_redraws {
            let attempt_key = field_key.child(1 + redraw as u64);
            let k = rand::Rng::random_range(&mut attempt_key.child(0).rng(), k_lo..=k_hi);
            let rejections = levene_rejections(w, &y, k, recipe, attempt_key.child(1), Some(acceptance))?;
            attempts += 1;
            if acceptance.accepts(rejections, recipe.r) {
                let rho_hat = if recipe.reuse_rho { rho } else { estimate_rho(w, &y)? };
                let m_value = params.m_statistic(rho_hat, k as f64 / n as f64);
                return Ok(Instance { y, k, rho_hat, m_value, attempts });
            }
            if attempts >= recipe.stall_window {
                return Err(Error::Stall { rate: 0.0, window: recipe.stall_window });
            }
        }
    }
    unreachable!("field loop is unbounded")
}

/// Settings for [`generate_null`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub rho: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub recipe: Recipe,
}

/// Simulates the statistic under H0 for the areas of `w` at `rho`.
pub fn generate_null(w: &SpatialWeights, config: &NullConfig, workers: Workers) -> Result<NullDistribution> {
    if config.replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be at least 1".into()));
    }
    SarSpec::new(config.rho, 0)?;
    let params = SmaupParams::default();
    let key = SeedKey::new(config.master_seed).child(TAG_NULL);
    let values = try_map_indexed(config.replicates, workers, |i| {
        draw_instance(w, config.rho, Acceptance::NoRejection, &config.recipe, &params, key.child(i as u64))
            .map(|inst| inst.m_value)
    })?;
    NullDistribution::new(w.n(), config.rho, config.recipe.r, config.master_seed, values)
}

/// Settings shared by power and size runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSizeConfig {
    /// Numbers of areas; each must be a perfect square (square rook lattice).
    pub ns: Vec<usize>,
    pub rhos: Vec<f64>,
    pub instances: usize,
    /// One of 0.01, 0.05, 0.1; `alpha <= 0` never rejects and `alpha >= 1`
    /// always does.
    pub alpha: f64,
    pub master_seed: u64,
    pub recipe: Recipe,
    pub lookup: Lookup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSizeCell {
    pub n: usize,
    pub rho: f64,
    pub instances: usize,
    pub rejections: usize,
    pub proportion: f64,
    pub mean_attempts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSizeReport {
    /// `power` or `size`.
    pub kind: String,
    pub config: PowerSizeConfig,
    pub cells: Vec<PowerSizeCell>,
    pub version: String,
}

impl PowerSizeReport {
    pub fn cell(&self, n: usize, rho: f64) -> Option<&PowerSizeCell> {
        self.cells.iter().find(|c| c.n == n && c.rho == rho)
    }

    /// Long format `rho,k_or_N,metric,value`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("rho,k_or_N,metric,value\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}\n", c.rho, c.n, self.kind, c.proportion));
            out.push_str(&format!("{},{},instances,{}\n", c.rho, c.n, c.instances));
            out.push_str(&format!("{},{},mean_attempts,{}\n", c.rho, c.n, c.mean_attempts));
        }
        out
    }
}

/// Threshold `M` must exceed to reject at `alpha`.
fn rejection_threshold(n: usize, rho: f64, alpha: f64, lookup: Lookup) -> Result<f64> {
    if alpha <= 0.0 {
        return Ok(f64::INFINITY);
    }
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    let level = Level::try_from(alpha)?;
    Ok(CriticalValueTable::embedded().lookup(n, rho, level, lookup))
}

/// Fraction of H1 instances (every aggregation changes the variance) on
/// which the S-maup test rejects.
pub fn power_experiment(config: &PowerSizeConfig, workers: Workers) -> Result<PowerSizeReport> {
    run_power_size(config, workers, Acceptance::AllRejected, TAG_POWER, "power")
}

/// Fraction of H0 instances (no aggregation changes the variance) on which
/// the S-maup test rejects.
pub fn size_experiment(config: &PowerSizeConfig, workers: Workers) -> Result<PowerSizeReport> {
    run_power_size(config, workers, Acceptance::NoRejection, TAG_SIZE, "size")
}

fn run_power_size(
    config: &PowerSizeConfig,
    workers: Workers,
    acceptance: Acceptance,
    tag: u64,
    kind: &str,
) -> Result<PowerSizeReport> {
    if config.instances == 0 {
        return Err(Error::InvalidParameter("instances must be at least 1".into()));
    }
    if !(config.alpha <= 0.0 || config.alpha >= 1.0) {
        Level::try_from(config.alpha)?;
    }
    for &rho in &config.rhos {
        SarSpec::new(rho, 0)?;
    }
    let lattices = config.ns.iter().map(|&n| SpatialWeights::square_lattice(n)).collect::<Result<Vec<_>>>()?;
    let params = SmaupParams::default();
    let key = SeedKey::new(config.master_seed).child(tag);
    let per_cell = config.instances;
    let cells = config.ns.len() * config.rhos.len();

    let outcomes = try_map_indexed(cells * per_cell, workers, |unit| {
        let (cell, instance) = (unit / per_cell, unit % per_cell);
        let (ni, ri) = (cell / config.rhos.len(), cell % config.rhos.len());
        let w = &lattices[ni];
        let inst = draw_instance(
            w,
            config.rhos[ri],
            acceptance,
            &config.recipe,
            &params,
            key.child(cell as u64).child(instance as u64),
        )?;
        let threshold = rejection_threshold(w.n(), inst.rho_hat, config.alpha, config.lookup)?;
        Ok::<_, Error>((inst.m_value > threshold, inst.attempts))
    })?;

    let cells = outcomes
        .chunks(per_cell)
        .enumerate()
        .map(|(cell, chunk)| {
            let rejections = chunk.iter().filter(|(r, _)| *r).count();
            PowerSizeCell {
                n: config.ns[cell / config.rhos.len()],
                rho: config.rhos[cell % config.rhos.len()],
                instances: per_cell,
                rejections,
                proportion: rejections as f64 / per_cell as f64,
                mean_attempts: chunk.iter().map(|(_, a)| *a as f64).sum::<f64>() / per_cell as f64,
            }
        })
        .collect();
    Ok(PowerSizeReport { kind: kind.into(), config: config.clone(), cells, version: crate::VERSION.into() })
}

/// How the per-rho fields of one effects instance relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// Every rho reuses the values of one base field, spatially rearranged
    /// to the target rho, so only the spatial pattern changes.
    #[default]
    Isolation,
    /// An independent SAR draw per rho.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsConfig {
    /// Numbers of areas (square lattices).
    pub ns: Vec<usize>,
    pub rhos: Vec<f64>,
    /// Region counts per number of areas.
    pub ks: BTreeMap<usize, Vec<usize>>,
    pub instances: usize,
    pub r: usize,
    pub mode: RhoMode,
    /// Rho of the shared base field in isolation mode.
    pub base_rho: f64,
    pub window: f64,
    pub max_retries: usize,
    pub test_alpha: f64,
    pub master_seed: u64,
}

impl EffectsConfig {
    /// The full grid: six lattice sizes, nine rhos, 50 instances, r = 30.
    pub fn full_grid(master_seed: u64) -> Self {
        let ks = BTreeMap::from([
            (25, vec![3, 5, 10, 13, 15, 18, 20, 22, 24]),
            (100, vec![2, 4, 7, 12, 25, 40, 53, 67, 80, 90, 99]),
            (225, vec![3, 5, 10, 15, 30, 60, 90, 120, 150, 180, 200, 220]),
            (400, vec![4, 9, 18, 26, 50, 110, 160, 213, 267, 320, 360, 396]),
            (625, vec![4, 6, 14, 27, 43, 80, 170, 250, 333, 417, 500, 563, 618]),
            (900, vec![4, 9, 20, 40, 60, 120, 240, 360, 480, 600, 720, 810, 890]),
        ]);
        Self {
            ns: ks.keys().copied().collect(),
            rhos: crate::statistic::RHO_GRID.to_vec(),
            ks,
            instances: 50,
            r: 30,
            mode: RhoMode::Isolation,
            base_rho: 0.9,
            window: 0.5,
            max_retries: 200,
            test_alpha: 0.05,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsCell {
    pub n: usize,
    pub rho: f64,
    pub k: usize,
    /// RCM̄ per instance (divisor `|μ_o|`).
    pub rcm_bar: Vec<f64>,
    /// RCV̄ per instance.
    pub rcv_bar: Vec<f64>,
    /// Share of all `instances * r` Welch t-tests rejecting at `test_alpha`.
    pub t_reject: f64,
    /// Share of all `instances * r` Levene tests rejecting at `test_alpha`.
    pub levene_reject: f64,
}

impl EffectsCell {
    pub fn mean_rcv_bar(&self) -> f64 {
        self.rcv_bar.iter().sum::<f64>() / self.rcv_bar.len() as f64
    }

    pub fn mean_rcm_bar(&self) -> f64 {
        self.rcm_bar.iter().sum::<f64>() / self.rcm_bar.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsSummary {
    pub config: EffectsConfig,
    pub cells: Vec<EffectsCell>,
    /// `(n, k)` pairs dropped because k was outside `2..=n`.
    pub skipped: Vec<(usize, usize)>,
    /// RCM is reported relative to `|μ_o|` because SAR fields have mean ~0.
    pub rcm_denominator: String,
    pub version: String,
}

impl EffectsSummary {
    pub fn cell(&self, n: usize, rho: f64, k: usize) -> Option<&EffectsCell> {
        self.cells.iter().find(|c| c.n == n && c.rho == rho && c.k == k)
    }

    /// Long format `rho,k_or_N,metric,value`; metrics are prefixed with the
    /// number of areas, e.g. `n100:rcv_bar_mean`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("rho,k_or_N,metric,value\n");
        for c in &self.cells {
            let mut row = |metric: String, value: f64| {
                out.push_str(&format!("{},{},n{}:{},{}\n", c.rho, c.k, c.n, metric, value));
            };
            row("rcm_bar_mean".into(), c.mean_rcm_bar());
            row("rcv_bar_mean".into(), c.mean_rcv_bar());
            row("t_reject".into(), c.t_reject);
            row("levene_reject".into(), c.levene_reject);
            for (i, v) in c.rcm_bar.iter().enumerate() {
                row(format!("rcm_bar[{i}]"), *v);
            }
            for (i, v) in c.rcv_bar.iter().enumerate() {
                row(format!("rcv_bar[{i}]"), *v);
            }
        }
        out
    }
}

struct RepeatTotals {
    rcm_bar: f64,
    rcv_bar: f64,
    t_rejections: usize,
    levene_rejections: usize,
}

/// Aggregation effects on the mean and variance over a grid of
/// `(N, rho, k)` cells.
///
/// For each instance and rho a field is produced (shared-values
/// rearrangement in [`RhoMode::Isolation`]), aggregated `r` times into k
/// regions, and summarized by RCM̄, RCV̄ and the t / Levene rejection counts.
pub fn effects_experiment(config: &EffectsConfig, workers: Workers) -> Result<EffectsSummary> {
    if config.instances == 0 || config.r == 0 {
        return Err(Error::InvalidParameter("instances and r must be at least 1".into()));
    }
    SarSpec::new(config.base_rho, 0)?;
    for &rho in &config.rhos {
        SarSpec::new(rho, 0)?;
    }
    let mut skipped = Vec::new();
    let mut valid_ks = Vec::with_capacity(config.ns.len());
    for &n in &config.ns {
        let ks = config.ks.get(&n).cloned().unwrap_or_default();
        let (ok, bad): (Vec<usize>, Vec<usize>) = ks.into_iter().partition(|&k| (2..=n).contains(&k));
        skipped.extend(bad.into_iter().map(|k| (n, k)));
        valid_ks.push(ok);
    }
    let lattices = config.ns.iter().map(|&n| SpatialWeights::square_lattice(n)).collect::<Result<Vec<_>>>()?;
    let root = SeedKey::new(config.master_seed).child(TAG_EFFECTS);
    let nr = config.rhos.len();
    let units = config.ns.len() * config.instances * nr;

    // unit = ((ni * instances) + instance) * nr + ri
    let results = try_map_indexed(units, workers, |unit| {
        let ri = unit % nr;
        let instance = (unit / nr) % config.instances;
        let ni = unit / (nr * config.instances);
        let w = &lattices[ni];
        let inst_key = root.child(ni as u64).child(instance as u64);
        let rho = config.rhos[ri];
        let y = match config.mode {
            RhoMode::Independent => generate_sar(w, &SarSpec::new(rho, inst_key.child(1).child(ri as u64).seed())?)?,
            RhoMode::Isolation => {
                let base = generate_sar(w, &SarSpec::new(config.base_rho, inst_key.child(0).seed())?)?;
                if rho == config.base_rho {
                    base
                } else {
                    let seed = inst_key.child(1).child(ri as u64).seed();
                    generate_with_target_rho(w, &base, rho, config.window, config.max_retries, seed)?.variable
                }
            }
        };
        valid_ks[ni]
            .iter()
            .enumerate()
            .map(|(ki, &k)| effects_repeats(w, &y, k, config, inst_key.child(2).child(ri as u64).child(ki as u64)))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut cells = Vec::new();
    let tests = (config.instances * config.r) as f64;
    for (ni, &n) in config.ns.iter().enumerate() {
        for (ri, &rho) in config.rhos.iter().enumerate() {
            for (ki, &k) in valid_ks[ni].iter().enumerate() {
                let per_instance: Vec<&RepeatTotals> = (0..config.instances)
                    .map(|i| &results[(ni * config.instances + i) * nr + ri][ki])
                    .collect();
                cells.push(EffectsCell {
                    n,
                    rho,
                    k,
                    rcm_bar: per_instance.iter().map(|t| t.rcm_bar).collect(),
                    rcv_bar: per_instance.iter().map(|t| t.rcv_bar).collect(),
                    t_reject: per_instance.iter().map(|t| t.t_rejections).sum::<usize>() as f64 / tests,
                    levene_reject: per_instance.iter().map(|t| t.levene_rejections).sum::<usize>() as f64 / tests,
                });
            }
        }
    }
    Ok(EffectsSummary {
        config: config.clone(),
        cells,
        skipped,
        rcm_denominator: "abs(mu_o)".into(),
        version: crate::VERSION.into(),
    })
}

fn effects_repeats(
    w: &SpatialWeights,
    y: &AreaVariable,
    k: usize,
    config: &EffectsConfig,
    key: SeedKey,
) -> Result<RepeatTotals> {
    let mut rcms = Vec::with_capacity(config.r);
    let mut rcvs = Vec::with_capacity(config.r);
    let mut t_rejections = 0;
    let mut levene_rejections = 0;
    for rep in 0..config.r {
        let regions = random_regions(w, k, &mut key.child(rep as u64).rng())?;
        let agg = aggregate_values(y.values(), regions.assignment(), k)?;
        rcms.push(stats::rcm_abs(y.values(), &agg.region_means)?);
        rcvs.push(stats::rcv(y.values(), &agg.region_means)?);
        t_rejections += usize::from(welch_t_test(y.values(), &agg.region_means)?.rejects(config.test_alpha));
        levene_rejections += usize::from(levene_test(y.values(), &agg.region_means)?.rejects(config.test_alpha));
    }
    Ok(RepeatTotals {
        rcm_bar: stats::mean_over_repeats(&rcms)?,
        rcv_bar: stats::mean_over_repeats(&rcvs)?,
        t_rejections,
        levene_rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_bounds_are_strict() {
        assert_eq!(k_bounds(100).unwrap(), (11, 99));
        assert_eq!(k_bounds(25).unwrap(), (3, 24));
        assert_eq!(k_bounds(900).unwrap(), (91, 899));
        assert!(k_bounds(2).is_err());
    }

    #[test]
    fn single_replicate_null() {
        let w = SpatialWeights::lattice_rook(5, 5).unwrap();
        let cfg = NullConfig { rho: 0.0, replicates: 1, master_seed: 9, recipe: Recipe::default() };
        let null = generate_null(&w, &cfg, Workers::single()).unwrap();
        assert_eq!(null.values().len(), 1);
        assert!(null.values()[0] > 0.0 && null.values()[0] < 1.0);
    }

    #[test]
    fn impossible_acceptance_stalls() {
        let w = SpatialWeights::lattice_rook(5, 5).unwrap();
        // Levene never rejects at alpha 0, so AllRejected can never accept
        let recipe = Recipe { levene_alpha: 0.0, stall_window: 20, r: 2, ..Recipe::default() };
        let err = draw_instance(&w, 0.0, Acceptance::AllRejected, &recipe, &SmaupParams::default(), SeedKey::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::Stall { window: 20, .. }));
    }

    #[test]
    fn degenerate_alphas() {
        let base = PowerSizeConfig {
            ns: vec![100],
            rhos: vec![0.0],
            instances: 3,
            alpha: 1.0,
            master_seed: 3,
            recipe: Recipe::default(),
            lookup: Lookup::Nearest,
        };
        let power = power_experiment(&base, Workers::single()).unwrap();
        assert_eq!(power.cells[0].proportion, 1.0);
        let size = size_experiment(&PowerSizeConfig { alpha: 0.0, ..base.clone() }, Workers::single()).unwrap();
        assert_eq!(size.cells[0].proportion, 0.0);
        assert!(matches!(
            size_experiment(&PowerSizeConfig { alpha: 0.2, ..base }, Workers::single()),
            Err(Error::InvalidLevel(_))
        ));
    }

    #[test]
    fn infeasible_k_is_skipped() {
        let cfg = EffectsConfig {
            ns: vec![25],
            rhos: vec![0.0],
            ks: BTreeMap::from([(25, vec![5, 30])]),
            instances: 2,
            r: 3,
            mode: RhoMode::Independent,
            base_rho: 0.9,
            window: 0.5,
            max_retries: 50,
            test_alpha: 0.05,
            master_seed: 1,
        };
        let summary = effects_experiment(&cfg, Workers::single()).unwrap();
        assert_eq!(summary.skipped, vec![(25, 30)]);
        assert_eq!(summary.cells.len(), 1);
        assert_eq!(summary.cells[0].rcv_bar.len(), 2);
    }
}
