//! Mann-Whitney U and Wilcoxon signed-rank tests, exact or normal-approximated.

use super::{cohens_d, normal_two_sided, Method, StatsError, TestResult};

/// Largest `n·m` for which the exact Mann-Whitney distribution is used.
pub const MW_EXACT_MAX_CELLS: usize = 10_000;
/// Largest number of non-zero differences for the exact signed-rank distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Average ranks (1-based) and the sizes of tie groups larger than one.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Null frequencies of U for samples of size `n` and `m`, normalized to
/// probabilities. Built as the Gaussian binomial coefficient [n+m choose n].
fn mw_null_pmf(n: usize, m: usize) -> Vec<f64> {
    let top = n * m;
    let mut c = vec![0.0f64; top + 1];
    c[0] = 1.0;
    for i in 1..=n {
        let up = m + i;
        for k in (up..=top).rev() {
            c[k] -= c[k - up];
        }
        for k in i..=top {
            c[k] += c[k - i];
        }
    }
    let total: f64 = c.iter().sum();
    c.iter().map(|v| (v / total).max(0.0)).collect()
}

/// Two-sample rank-sum test. The statistic is `U` for `x`; the effect size is
/// Cohen's d of `x` against `y` when defined.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Input("both samples must be non-empty".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::Input("samples must be finite".into()));
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let r1: f64 = ranks[..n].iter().sum();
    let nf = n as f64;
    let mf = m as f64;
    let u = r1 - nf * (nf + 1.0) / 2.0;
    let cells = n * m;
    let effect_size = cohens_d(x, y).ok();

    if ties.is_empty() && cells <= MW_EXACT_MAX_CELLS {
        let pmf = mw_null_pmf(n, m);
        let lower = u.min(cells as f64 - u).round() as usize;
        let tail: f64 = pmf[..=lower].iter().sum();
        return Ok(TestResult {
            statistic: u,
            p_value: (2.0 * tail).min(1.0),
            effect_size,
            method: Method::MannWhitneyExact,
        });
    }

    let big_n = nf + mf;
    let mu = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term(&ties) / (big_n * (big_n - 1.0)));
    let p_value = if var > 0.0 {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        normal_two_sided(z)
    } else {
        1.0
    };
    Ok(TestResult { statistic: u, p_value, effect_size, method: Method::MannWhitneyNormal })
}

/// Null probabilities of the signed-rank sum V over `n` untied ranks.
fn signed_rank_null_pmf(n: usize) -> Vec<f64> {
    let top = n * (n + 1) / 2;
    let mut c = vec![0.0f64; top + 1];
    c[0] = 1.0;
    for k in 1..=n {
        for s in (k..=top).rev() {
            c[s] += c[s - k];
        }
    }
    let total = 2f64.powi(n as i32);
    c.iter().map(|v| v / total).collect()
}

/// One-sample signed-rank test of `x` against location `mu0`. Zero
/// differences are dropped. The statistic is V, the positive rank sum.
pub fn wilcoxon_signed_rank(x: &[f64], mu0: f64) -> Result<TestResult, StatsError> {
    if x.iter().any(|v| !v.is_finite()) || !mu0.is_finite() {
        return Err(StatsError::Input("values must be finite".into()));
    }
    let d: Vec<f64> = x.iter().map(|v| v - mu0).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::Degenerate("every difference is zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let v: f64 = d.iter().zip(&ranks).filter(|(di, _)| **di > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let top = nf * (nf + 1.0) / 2.0;

    if ties.is_empty() && n <= WILCOXON_EXACT_MAX_N {
        let pmf = signed_rank_null_pmf(n);
        let lower = v.min(top - v).round() as usize;
        let tail: f64 = pmf[..=lower].iter().sum();
        return Ok(TestResult {
            statistic: v,
            p_value: (2.0 * tail).min(1.0),
            effect_size: None,
            method: Method::WilcoxonExact,
        });
    }

    let mu = top / 2.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    let p_value = if var > 0.0 {
        let z = ((v - mu).abs() - 0.5).max(0.0) / var.sqrt();
        normal_two_sided(z)
    } else {
        1.0
    };
    Ok(TestResult { statistic: v, p_value, effect_size: None, method: Method::WilcoxonNormal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.method, Method::MannWhitneyExact);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn swapped_samples_mirror_u() {
        let x = [1.5, 3.2, 0.4, 8.0];
        let y = [2.2, 5.1, 7.7, 9.9, 4.4];
        let a = mann_whitney_u(&x, &y).unwrap();
        let b = mann_whitney_u(&y, &x).unwrap();
        assert_eq!(a.statistic + b.statistic, 20.0);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn full_ties_give_p_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&x, &x).unwrap();
        assert_eq!(r.method, Method::MannWhitneyNormal);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_pmf_matches_known_counts() {
        // [10 choose 5]_q: 1,1,2,3,5,7,9,11,14,16,18,19,20,20,...
        let pmf = mw_null_pmf(5, 5);
        let counts: Vec<f64> = pmf.iter().map(|p| (p * 252.0).round()).collect();
        assert_eq!(&counts[..14], &[1., 1., 2., 3., 5., 7., 9., 11., 14., 16., 18., 19., 20., 20.]);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_positive_signed_ranks() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&x, 0.0).unwrap();
        assert_eq!(r.statistic, 55.0);
        assert_eq!(r.method, Method::WilcoxonExact);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_sample_is_null() {
        let x = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        assert!(wilcoxon_signed_rank(&x, 0.0).unwrap().p_value > 0.9);
        assert!(matches!(wilcoxon_signed_rank(&[2.0, 2.0], 2.0), Err(StatsError::Degenerate(_))));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(mann_whitney_u(&[], &[1.0]), Err(StatsError::Input(_))));
    }
}
