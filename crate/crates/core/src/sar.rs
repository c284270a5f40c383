//! SAR random fields, maximum-likelihood rho estimation and rank-matching
//! permutation towards a target rho.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::SeedKey;
use crate::weights::SpatialWeights;

/// Largest system solved by dense LU; bigger ones iterate on the sparse rows.
pub const DENSE_SOLVE_LIMIT: usize = 2500;

/// Search interval for the ML estimate of rho.
pub const RHO_SEARCH_BOUND: f64 = 0.999;

/// Golden-section stopping width.
pub const RHO_TOLERANCE: f64 = 1e-6;

/// A real-valued attribute over the areas of a weights object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AreaVariable {
    values: Vec<f64>,
}

impl AreaVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Builds a variable and checks it has one value per area of `w`.
    pub fn on(w: &SpatialWeights, values: Vec<f64>) -> Result<Self> {
        let var = Self::new(values)?;
        var.check_len(w)?;
        Ok(var)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_len(&self, w: &SpatialWeights) -> Result<()> {
        if self.len() != w.n() {
            return Err(Error::Shape { expected: w.n(), actual: self.len() });
        }
        Ok(())
    }

    /// Reads a single-column CSV, optionally headed `value`. Lines starting
    /// with `#` are skipped.
    pub fn from_csv_str(content: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut seen_data = false;
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_data && line.eq_ignore_ascii_case("value") {
                seen_data = true;
                continue;
            }
            seen_data = true;
            let v: f64 = line.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("`{line}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: idx + 1, message: "value is not finite".into() });
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Parse { line: 0, message: "no values".into() });
        }
        Self::new(values)
    }

    /// CSV with a `value` header. Values use the shortest round-tripping
    /// representation.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("value\n");
        for v in &self.values {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }
}

impl TryFrom<Vec<f64>> for AreaVariable {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<AreaVariable> for Vec<f64> {
    fn from(v: AreaVariable) -> Self {
        v.values
    }
}

/// Generation parameters for one SAR draw with standard-normal innovations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarSpec {
    pub rho: f64,
    pub seed: u64,
}

impl SarSpec {
    pub fn new(rho: f64, seed: u64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!("|rho| must be below 1, got {rho}")));
        }
        Ok(Self { rho, seed })
    }
}

/// Draws `y` solving `(I - rho W) y = e` with `e` i.i.d. standard normal.
///
/// Identical `(w, spec)` give bitwise-identical output.
pub fn generate_sar(w: &SpatialWeights, spec: &SarSpec) -> Result<AreaVariable> {
    let spec = SarSpec::new(spec.rho, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eps: Vec<f64> = (0..w.n()).map(|_| StandardNormal.sample(&mut rng)).collect();
    if spec.rho == 0.0 {
        return AreaVariable::new(eps);
    }
    let contraction = spec.rho.abs() * w.max_row_sum();
    if !w.is_standardized() && contraction >= 1.0 {
        return Err(Error::Singular { rho: spec.rho });
    }
    let y = if w.n() > DENSE_SOLVE_LIMIT && contraction < 1.0 {
        solve_fixed_point(w, spec.rho, &eps)
    } else {
        solve_dense(w, spec.rho, eps)?
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { rho: spec.rho });
    }
    AreaVariable::new(y)
}

fn solve_dense(w: &SpatialWeights, rho: f64, eps: Vec<f64>) -> Result<Vec<f64>> {
    let n = w.n();
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for (&j, &wij) in w.neighbors(i).iter().zip(w.weights_row(i)) {
            a[(i, j)] -= rho * wij;
        }
    }
    let b = DVector::from_vec(eps);
    let y = a.lu().solve(&b).ok_or(Error::Singular { rho })?;
    Ok(y.as_slice().to_vec())
}

/// Iterates `y <- e + rho W y`; converges geometrically when `|rho| * max
/// row sum < 1`.
fn solve_fixed_point(w: &SpatialWeights, rho: f64, eps: &[f64]) -> Vec<f64> {
    let mut y = eps.to_vec();
    for _ in 0..100_000 {
        let lag = w.lag(&y);
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..y.len() {
            let next = eps[i] + rho * lag[i];
            delta = delta.max((next - y[i]).abs());
            scale = scale.max(next.abs());
            y[i] = next;
        }
        if delta <= 1e-15 * scale.max(1.0) {
            break;
        }
    }
    y
}

/// Concentrated SAR log-likelihood of `y` (with a constant mean term) as a
/// function of rho.
///
/// `log L(rho) = -n/2 (ln 2π + 1) - n/2 ln(e'e / n) + Σ ln(1 - rho λ_i)`
/// where `e` is the demeaned `y - rho W y` and `λ_i` are the eigenvalues of W.
#[derive(Debug, Clone)]
pub struct SarLikelihood<'w> {
    eigenvalues: &'w [f64],
    n: f64,
    yy: f64,
    y_wy: f64,
    wy_wy: f64,
}

impl<'w> SarLikelihood<'w> {
    pub fn new(w: &'w SpatialWeights, y: &AreaVariable) -> Result<Self> {
        y.check_len(w)?;
        let n = y.len();
        if n < 10 {
            return Err(Error::InsufficientData { needed: 10, actual: n });
        }
        let centered = demean(y.values());
        let lag = demean(&w.lag(y.values()));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, z)| x * z).sum::<f64>();
        let yy = dot(&centered, &centered);
        let scale = y.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if yy <= f64::EPSILON * f64::EPSILON * scale * scale * n as f64 {
            return Err(Error::DegenerateInput("variable is constant".into()));
        }
        Ok(Self {
            eigenvalues: w.eigenvalues(),
            n: n as f64,
            yy,
            y_wy: dot(&centered, &lag),
            wy_wy: dot(&lag, &lag),
        })
    }

    /// Open interval of rho on which `I - rho W` stays positive.
    pub fn bounds(&self) -> (f64, f64) {
        let lo_eig = self.eigenvalues.first().copied().unwrap_or(0.0);
        let hi_eig = self.eigenvalues.last().copied().unwrap_or(0.0);
        let mut lo = -RHO_SEARCH_BOUND;
        let mut hi = RHO_SEARCH_BOUND;
        if hi_eig > 0.0 {
            hi = hi.min(1.0 / hi_eig - 1e-9);
        }
        if lo_eig < 0.0 {
            lo = lo.max(1.0 / lo_eig + 1e-9);
        }
        (lo, hi)
    }

    pub fn log_likelihood(&self, rho: f64) -> f64 {
        let sse = self.yy - 2.0 * rho * self.y_wy + rho * rho * self.wy_wy;
        let log_det: f64 = self.eigenvalues.iter().map(|l| (1.0 - rho * l).ln()).sum();
        -0.5 * self.n * ((2.0 * std::f64::consts::PI).ln() + 1.0) - 0.5 * self.n * (sse / self.n).ln() + log_det
    }

    /// Golden-section maximization over [`Self::bounds`].
    pub fn maximize(&self) -> Result<f64> {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let (mut a, mut b) = self.bounds();
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.log_likelihood(c);
        let mut fd = self.log_likelihood(d);
        while b - a > RHO_TOLERANCE {
            if !fc.is_finite() || !fd.is_finite() {
                return Err(Error::DegenerateInput("log-likelihood is not finite".into()));
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.log_likelihood(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.log_likelihood(d);
            }
        }
        let rho = 0.5 * (a + b);
        if !self.log_likelihood(rho).is_finite() {
            return Err(Error::DegenerateInput("log-likelihood is not finite".into()));
        }
        Ok(rho)
    }
}

fn demean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Maximum-likelihood estimate of the SAR parameter of `y` on `w`.
///
/// Needs at least 10 areas. The eigenvalues of W are computed on first use
/// and cached on the weights object.
pub fn estimate_rho(w: &SpatialWeights, y: &AreaVariable) -> Result<f64> {
    SarLikelihood::new(w, y)?.maximize()
}

/// Rearranges the values of `source` so their rank order follows
/// `reference`: the largest value goes where `reference` is largest, and so
/// on. Ties in `reference` are broken by area index.
pub fn rank_permute(source: &AreaVariable, reference: &AreaVariable) -> Result<AreaVariable> {
    if source.len() != reference.len() {
        return Err(Error::Shape { expected: reference.len(), actual: source.len() });
    }
    let mut sorted = source.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let x = reference.values();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    let mut out = vec![0.0; x.len()];
    for (rank, &area) in order.iter().enumerate() {
        out[area] = sorted[rank];
    }
    Ok(AreaVariable { values: out })
}

/// A rank-permuted variable that hit its rho window.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetedVariable {
    pub variable: AreaVariable,
    pub estimated_rho: f64,
    /// Attempts used, counting the successful one.
    pub attempts: usize,
}

/// Spatially redistributes `base` until its estimated rho falls inside
/// `(target - window, target + window)`.
///
/// Each attempt draws a reference SAR field at `target` and rank-permutes
/// `base` onto it, so the output always holds exactly the values of `base`.
pub fn generate_with_target_rho(
    w: &SpatialWeights,
    base: &AreaVariable,
    target: f64,
    window: f64,
    max_retries: usize,
    seed: u64,
) -> Result<TargetedVariable> {
    base.check_len(w)?;
    if !target.is_finite() || target.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!("|target| must be below 1, got {target}")));
    }
    if window.is_nan() || window <= 0.0 {
        return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
    }
    if max_retries == 0 {
        return Err(Error::InvalidParameter("max_retries must be at least 1".into()));
    }
    let key = SeedKey::new(seed);
    let mut best: Option<TargetedVariable> = None;
    for attempt in 0..max_retries {
        let reference = generate_sar(w, &SarSpec { rho: target, seed: key.child(attempt as u64).seed() })?;
        let variable = rank_permute(base, &reference)?;
        let estimated_rho = estimate_rho(w, &variable)?;
        let candidate = TargetedVariable { variable, estimated_rho, attempts: attempt + 1 };
        if (estimated_rho - target).abs() < window {
            return Ok(candidate);
        }
        let closer = best
            .as_ref()
            .is_none_or(|b| (estimated_rho - target).abs() < (b.estimated_rho - target).abs());
        if closer {
            best = Some(candidate);
        }
    }
    let mut best = best.expect("at least one attempt ran");
    best.attempts = max_retries;
    Err(Error::RetryExhausted { attempts: max_retries, best: Box::new(best) })
}
