//! Rank tests, proportion tests, effect sizes and simple regression.

pub mod rank;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

pub use rank::{mann_whitney_u, wilcoxon_signed_rank};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MannWhitneyExact,
    MannWhitneyNormal,
    WilcoxonExact,
    WilcoxonNormal,
    TwoProportionZ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub method: Method,
}

pub(crate) fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Two-sided p-value of a standard normal deviate.
pub fn normal_two_sided(z: f64) -> f64 {
    (2.0 * std_normal().sf(z.abs())).clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n − 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Standardized mean difference `(mean(x) − mean(y)) / pooled sd`.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::Input("each sample needs at least 2 values".into()));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled = ((n1 - 1.0) * variance(x) + (n2 - 1.0) * variance(y)) / (n1 + n2 - 2.0);
    if !(pooled > 0.0) {
        return Err(StatsError::Degenerate("pooled standard deviation is zero".into()));
    }
    Ok((mean(x) - mean(y)) / pooled.sqrt())
}

/// Cohen's h between two proportions.
pub fn cohens_h(p1: f64, p2: f64) -> f64 {
    2.0 * (p1.sqrt().asin() - p2.sqrt().asin())
}

/// Pooled two-proportion z test on observed proportions `p1`, `p2` from
/// groups of size `n1`, `n2`. Effect size is Cohen's h.
pub fn two_proportion_z_props(p1: f64, n1: f64, p2: f64, n2: f64) -> Result<TestResult, StatsError> {
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(StatsError::Input("group sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
        return Err(StatsError::Input("proportions must lie in [0, 1]".into()));
    }
    let pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    let z = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
    Ok(TestResult {
        statistic: z,
        p_value: normal_two_sided(z),
        effect_size: Some(cohens_h(p1, p2)),
        method: Method::TwoProportionZ,
    })
}

/// Pooled two-proportion z test on counts: `k1` of `n1` against `k2` of `n2`.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::Input("group sizes must be at least 1".into()));
    }
    if k1 > n1 || k2 > n2 {
        return Err(StatsError::Input("successes exceed trials".into()));
    }
    two_proportion_z_props(k1 as f64 / n1 as f64, n1 as f64, k2 as f64 / n2 as f64, n2 as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinReg {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation.
    pub r: f64,
    /// Two-sided, from `t = r·sqrt((n−2)/(1−r²))` on n − 2 degrees of freedom.
    pub p: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn linreg(x: &[f64], y: &[f64]) -> Result<LinReg, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Input(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::Input("need at least 3 points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(StatsError::Input("x is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(syy > 0.0) {
        return Ok(LinReg { slope: 0.0, intercept: my, r: 0.0, p: 1.0, n });
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| StatsError::Input(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(LinReg { slope, intercept, r, p, n })
}
