//! Descriptive moments, relative-change measures, the two-sample tests used
//! by the experiments, percentiles and empirical pseudo p-values.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Levels reported in every [`TestOutcome`].
pub const REPORTED_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub mean: f64,
    /// Sample variance, divisor `len - 1`.
    pub variance: f64,
}

pub fn mean(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InsufficientData { needed: 1, actual: 0 });
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

/// Two-pass sample variance (divisor `len - 1`).
pub fn variance(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, actual: x.len() });
    }
    let m = mean(x)?;
    Ok(x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64)
}

pub fn descriptives(x: &[f64]) -> Result<Descriptives> {
    Ok(Descriptives { mean: mean(x)?, variance: variance(x)? })
}

/// Relative change in the mean, `|μ_o - μ_ag| / μ_o`.
///
/// The divisor is the signed original mean, so the result is negative when
/// `μ_o < 0`; see [`rcm_abs`] for the form used on zero-mean fields.
pub fn rcm(original: &[f64], aggregated: &[f64]) -> Result<f64> {
    let mu_o = mean(original)?;
    if mu_o == 0.0 {
        return Err(Error::UndefinedRatio("original mean"));
    }
    Ok((mu_o - mean(aggregated)?).abs() / mu_o)
}

/// [`rcm`] with `|μ_o|` as divisor; always nonnegative.
pub fn rcm_abs(original: &[f64], aggregated: &[f64]) -> Result<f64> {
    let mu_o = mean(original)?;
    if mu_o == 0.0 {
        return Err(Error::UndefinedRatio("original mean"));
    }
    Ok((mu_o - mean(aggregated)?).abs() / mu_o.abs())
}

/// Relative change in the variance, `|σ²_o - σ²_ag| / σ²_o`.
pub fn rcv(original: &[f64], aggregated: &[f64]) -> Result<f64> {
    let var_o = variance(original)?;
    if var_o == 0.0 {
        return Err(Error::UndefinedRatio("original variance"));
    }
    Ok((var_o - variance(aggregated)?).abs() / var_o)
}

/// Average of per-repeat values (RCM̄ / RCV̄).
pub fn mean_over_repeats(values: &[f64]) -> Result<f64> {
    mean(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// `(α, p < α)` for each of [`REPORTED_LEVELS`].
    pub rejected_at: Vec<(f64, bool)>,
}

impl TestOutcome {
    fn new(statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        let rejected_at = REPORTED_LEVELS.iter().map(|&a| (a, p_value < a)).collect();
        Self { statistic, p_value, rejected_at }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    let da = descriptives(a)?;
    let db = descriptives(b)?;
    if !da.variance.is_finite() || !db.variance.is_finite() {
        return Err(Error::DegenerateSample("non-finite variance".into()));
    }
    if da.variance == 0.0 && db.variance == 0.0 {
        return Err(Error::DegenerateSample("both samples are constant".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (da.variance / na, db.variance / nb);
    let t = (da.mean - db.mean) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    Ok(TestOutcome::new(t, 2.0 * dist.sf(t.abs())))
}

/// Group centre used by the Levene test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    /// Original Levene test.
    #[default]
    Mean,
    /// Brown–Forsythe variant.
    Median,
}

/// Two-sample Levene test for equal variances with mean centring.
pub fn levene_test(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    levene_test_with(&[a, b], Center::Mean)
}

/// Levene test over any number of groups: a one-way ANOVA F on the absolute
/// deviations from each group's centre, with `(g - 1, N - g)` degrees of
/// freedom.
pub fn levene_test_with(groups: &[&[f64]], center: Center) -> Result<TestOutcome> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, actual: groups.len() });
    }
    let mut deviations = Vec::with_capacity(groups.len());
    for g in groups {
        if g.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, actual: g.len() });
        }
        let c = match center {
            Center::Mean => mean(g)?,
            Center::Median => median(g),
        };
        deviations.push(g.iter().map(|v| (v - c).abs()).collect::<Vec<f64>>());
    }
    let total: usize = deviations.iter().map(Vec::len).sum();
    let grand = deviations.iter().flatten().sum::<f64>() / total as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for z in &deviations {
        let zbar = z.iter().sum::<f64>() / z.len() as f64;
        between += z.len() as f64 * (zbar - grand).powi(2);
        within += z.iter().map(|v| (v - zbar).powi(2)).sum::<f64>();
    }
    if within == 0.0 {
        return Err(Error::DegenerateSample("absolute deviations are constant within every group".into()));
    }
    let df1 = (groups.len() - 1) as f64;
    let df2 = (total - groups.len()) as f64;
    let f = (between / df1) / (within / df2);
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    Ok(TestOutcome::new(f, dist.sf(f)))
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

/// Fraction of `null_values` strictly greater than `m`. `null_values` must be
/// sorted ascending.
pub fn pseudo_p(null_values: &[f64], m: f64) -> Result<f64> {
    if null_values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, actual: 0 });
    }
    let at_most = null_values.partition_point(|&v| v <= m);
    Ok((null_values.len() - at_most) as f64 / null_values.len() as f64)
}

/// Percentile of sorted data with linear interpolation between order
/// statistics (`q` in `[0, 100]`).
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InsufficientData { needed: 1, actual: 0 });
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("percentile {q} outside [0, 100]")));
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}
