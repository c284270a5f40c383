//! Random contiguous aggregation of areas into regions by seeded region
//! growing, and mean aggregation of area attributes.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sar::AreaVariable;
use crate::weights::SpatialWeights;

const UNASSIGNED: usize = usize::MAX;

/// Partition of `n` areas into `k` labelled regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regionalization {
    assignment: Vec<usize>,
    k: usize,
}

impl Regionalization {
    /// Checks labels lie in `0..k` and no region is empty. Contiguity needs
    /// the weights; see [`Self::is_contiguous`].
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0usize; k];
        for (area, &label) in assignment.iter().enumerate() {
            if label >= k {
                return Err(Error::CorruptPartition(format!("area {area} has label {label}, k = {k}")));
            }
            sizes[label] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::CorruptPartition(format!("region {empty} is empty")));
        }
        Ok(Self { assignment, k })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Aggregation ratio k / n.
    pub fn theta(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    /// True when every region induces a connected subgraph of `w`.
    pub fn is_contiguous(&self, w: &SpatialWeights) -> bool {
        if w.n() != self.n() {
            return false;
        }
        let mut seen = vec![false; self.n()];
        let mut regions_found = 0;
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            regions_found += 1;
            let label = self.assignment[start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &j in w.neighbors(i) {
                    if !seen[j] && self.assignment[j] == label {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        // one component per label iff every region is connected
        regions_found == self.k
    }

    /// `area_id,region_id` CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("area_id,region_id\n");
        for (area, region) in self.assignment.iter().enumerate() {
            let _ = writeln!(out, "{area},{region}");
        }
        out
    }

    /// Reads the CSV written by [`Self::to_csv_string`]; `k` is inferred as
    /// the largest label plus one.
    pub fn from_csv_str(content: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.replace(' ', "") == "area_id,region_id" {
                continue;
            }
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("`{}` is not a non-negative integer", s.trim()),
                })
            };
            let (a, r) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse { line: idx + 1, message: "expected `area_id,region_id`".into() })?;
            pairs.push((idx + 1, parse(a)?, parse(r)?));
        }
        let n = pairs.len();
        let mut assignment = vec![UNASSIGNED; n];
        for (line, area, region) in pairs {
            if area >= n || assignment[area] != UNASSIGNED {
                return Err(Error::Parse { line, message: format!("area id {area} is duplicated or out of range") });
            }
            assignment[area] = region;
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        Self::new(assignment, k)
    }
}

/// Grows `k` contiguous regions from `k` distinct random seed areas.
///
/// At each step a region is picked uniformly among those that still touch
/// an unassigned area, and one of its unassigned neighbours (uniformly) joins
/// it. Deterministic for a given `rng` state.
pub fn random_regions<R: Rng + ?Sized>(w: &SpatialWeights, k: usize, rng: &mut R) -> Result<Regionalization> {
    let n = w.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if !w.is_connected() {
        return Err(Error::ContiguityImpossible);
    }

    let mut assignment = vec![UNASSIGNED; n];
    let mut frontiers: Vec<Vec<usize>> = Vec::with_capacity(k);
    for (label, area) in sample(rng, n, k).into_iter().enumerate() {
        assignment[area] = label;
        frontiers.push(Vec::new());
    }
    for (area, &label) in assignment.iter().enumerate() {
        if label != UNASSIGNED {
            for &j in w.neighbors(area) {
                push_unique(&mut frontiers[label], j);
            }
        }
    }

    let mut remaining = n - k;
    let mut active: Vec<usize> = (0..k).collect();
    while remaining > 0 && !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let label = active[slot];
        let frontier = &mut frontiers[label];
        // entries go stale once another region claims them
        let picked = loop {
            if frontier.is_empty() {
                break None;
            }
            let pos = rng.random_range(0..frontier.len());
            let area = frontier.swap_remove(pos);
            if assignment[area] == UNASSIGNED {
                break Some(area);
            }
        };
        match picked {
            None => {
                active.swap_remove(slot);
            }
            Some(area) => {
                assignment[area] = label;
                remaining -= 1;
                for &j in w.neighbors(area) {
                    if assignment[j] == UNASSIGNED {
                        push_unique(&mut frontiers[label], j);
                    }
                }
            }
        }
    }

    if remaining > 0 {
        absorb_stranded(w, &mut assignment, rng);
    }
    let regions = Regionalization { assignment, k };
    debug_assert!(regions.is_contiguous(w));
    Ok(regions)
}

fn push_unique(frontier: &mut Vec<usize>, area: usize) {
    if !frontier.contains(&area) {
        frontier.push(area);
    }
}

/// Hands every unassigned area to a random adjacent region. Unreachable on
/// a connected graph; kept for weights variants that break that guarantee.
fn absorb_stranded<R: Rng + ?Sized>(w: &SpatialWeights, assignment: &mut [usize], rng: &mut R) {
    loop {
        let mut progressed = false;
        let mut any_left = false;
        for area in 0..assignment.len() {
            if assignment[area] != UNASSIGNED {
                continue;
            }
            let labels: Vec<usize> =
                w.neighbors(area).iter().map(|&j| assignment[j]).filter(|&l| l != UNASSIGNED).collect();
            if labels.is_empty() {
                any_left = true;
            } else {
                assignment[area] = labels[rng.random_range(0..labels.len())];
                progressed = true;
            }
        }
        if !any_left || !progressed {
            break;
        }
    }
}

/// Region means of an area variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedVariable {
    pub region_means: Vec<f64>,
    pub region_sizes: Vec<usize>,
}

/// Unweighted mean of `y` within each region.
pub fn aggregate_mean(y: &AreaVariable, regions: &Regionalization) -> Result<AggregatedVariable> {
    aggregate_values(y.values(), regions.assignment(), regions.k())
}

pub(crate) fn aggregate_values(y: &[f64], assignment: &[usize], k: usize) -> Result<AggregatedVariable> {
    if y.len() != assignment.len() {
        return Err(Error::Shape { expected: assignment.len(), actual: y.len() });
    }
    let mut sums = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for (area, (&v, &label)) in y.iter().zip(assignment).enumerate() {
        if label >= k {
            return Err(Error::CorruptPartition(format!("area {area} has label {label}, k = {k}")));
        }
        sums[label] += v;
        sizes[label] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::CorruptPartition(format!("region {empty} is empty")));
    }
    let region_means = sums.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect();
    Ok(AggregatedVariable { region_means, region_sizes: sizes })
}
