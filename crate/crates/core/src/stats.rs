//! Test statistics and the report record they produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Outcome of one statistical or exact check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub reference: f64,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
    /// Threshold the pass decision compares against, in the units of `criterion`.
    pub threshold: f64,
    pub criterion: String,
    pub pass: bool,
    pub n: u64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, reference: f64) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            reference,
            std_error: None,
            p_value: None,
            threshold: 0.0,
            criterion: String::new(),
            pass: false,
            n: 0,
            seed: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// One line: `PASS name: statistic vs reference (criterion)`.
    pub fn summary(&self) -> String {
        format!(
            "{} {}: {:.6} vs {:.6} ({}; n = {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.reference,
            self.criterion,
            self.n
        )
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * n.sf(z.abs())).min(1.0)
}

fn chi2_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive degrees of freedom").sf(stat)
}

/// Mean `statistic` (standard error `se`) against `reference`: passes within `k` standard errors.
pub fn within_standard_errors(name: &str, statistic: f64, se: f64, reference: f64, k: f64, n: u64) -> TestReport {
    let diff = (statistic - reference).abs();
    let pass = if se > 0.0 { diff <= k * se } else { diff == 0.0 };
    let mut r = TestReport::new(name, statistic, reference);
    r.std_error = Some(se);
    r.p_value = (se > 0.0).then(|| normal_two_sided_p(diff / se));
    r.threshold = k;
    r.criterion = format!("|statistic - reference| <= {k} SE");
    r.pass = pass;
    r.n = n;
    r
}

/// Two independent means compared within `k` combined standard errors.
pub fn two_mean_test(name: &str, a: (f64, f64), b: (f64, f64), k: f64, n: u64) -> TestReport {
    let se = (a.1 * a.1 + b.1 * b.1).sqrt();
    let mut r = within_standard_errors(name, a.0, se, b.0, k, n);
    r.criterion = format!("|mean_a - mean_b| <= {k} combined SE");
    r
}

/// Z-test of the mean against `expected_mean` plus a dispersion test of
/// `sum (x - mean)^2 / mean` against chi-square with `n - 1` degrees of freedom.
/// Passes when both two-sided p-values exceed `alpha`.
pub fn poisson_count_test(counts: &[u64], expected_mean: f64, alpha: f64) -> TestReport {
    let n = counts.len() as u64;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, _) = mean_and_se(&values);
    let mut r = TestReport::new("poisson_count", mean, expected_mean);
    r.n = n;
    r.threshold = alpha;
    r.criterion = format!("mean z-test and dispersion test both p > {alpha}");
    if n == 0 {
        r.pass = false;
        return r;
    }
    if expected_mean <= 0.0 {
        r.pass = counts.iter().all(|&c| c == 0);
        r.p_value = Some(if r.pass { 1.0 } else { 0.0 });
        r.std_error = Some(0.0);
        return r;
    }
    let se = (expected_mean / n as f64).sqrt();
    let z = (mean - expected_mean) / se;
    let p_mean = normal_two_sided_p(z);
    let (p_disp, ratio) = if mean > 0.0 && n > 1 {
        let d = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / mean;
        let df = (n - 1) as f64;
        let upper = chi2_sf(d, df);
        ((2.0 * upper.min(1.0 - upper)).min(1.0), d / df)
    } else {
        // no spread to measure: nothing speaks against Poisson dispersion
        (1.0, 0.0)
    };
    r.std_error = Some(se);
    r.p_value = Some(p_mean.min(p_disp));
    r.pass = p_mean > alpha && p_disp > alpha;
    r.detail("z", z)
        .detail("p_mean", p_mean)
        .detail("dispersion_ratio", ratio)
        .detail("p_dispersion", p_disp)
}

/// Probability vector of a histogram; all zeros when the histogram is empty.
pub fn normalize(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Half the L1 distance between two probability vectors on the same support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions on different supports");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Default TV threshold `3 sqrt(|support| / n)`.
pub fn default_tv_threshold(support: usize, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    3.0 * (support as f64 / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `observed` counts to probabilities `expected`.
/// Cells with zero expected probability must be empty, else p = 0.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        if p <= 0.0 {
            if o > 0 {
                return ChiSquareResult { statistic: f64::INFINITY, df: 0.0, p_value: 0.0 };
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = cells.saturating_sub(1) as f64;
    ChiSquareResult { statistic: stat, df, p_value: chi2_sf(stat, df) }
}

/// Pearson homogeneity test of two histograms over the same bins; bins empty in both are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    if na == 0 || nb == 0 {
        return ChiSquareResult { statistic: 0.0, df: 0.0, p_value: 1.0 };
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        for (obs, row) in [(x, na), (y, nb)] {
            let e = row as f64 * col / n;
            stat += (obs as f64 - e).powi(2) / e;
        }
        cells += 1;
    }
    let df = cells.saturating_sub(1) as f64;
    ChiSquareResult { statistic: stat, df, p_value: chi2_sf(stat, df) }
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    if a.is_empty() || b.is_empty() {
        return (0.0, 1.0);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_sf(lambda))
}
