//! Report bundles comparing constructions, rules and time directions.

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleStats, WindowStats};
use crate::error::{Error, Result};
use crate::sample::Construction;
use crate::seed::SeedScheme;
use crate::stats::{
    chi_square_homogeneity, default_tv_threshold, normalize, poisson_count_test, tv_distance, two_mean_test,
    within_standard_errors, TestReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Significance for p-value based checks.
    pub alpha: f64,
    /// Mean comparisons pass within this many standard errors.
    pub mean_se: f64,
    /// Per-site occupation means pass within this many standard errors.
    pub occupation_se: f64,
    /// Fixed TV bound; `None` uses `3 sqrt(|support| / n)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv: Option<f64>,
    /// Relative tolerance on the occupation slope.
    pub slope_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            alpha: 0.01,
            mean_se: 3.0,
            occupation_se: 4.0,
            tv: None,
            slope_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub name: String,
    pub master_seed: u64,
    pub pass: bool,
    pub reports: Vec<TestReport>,
}

impl ReportBundle {
    pub fn new(name: impl Into<String>, master_seed: u64, reports: Vec<TestReport>) -> Self {
        let reports: Vec<TestReport> = reports.into_iter().map(|r| r.with_seed(master_seed)).collect();
        ReportBundle {
            name: name.into(),
            master_seed,
            pass: reports.iter().all(|r| r.pass),
            reports,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestReport> {
        self.reports.iter().filter(|r| !r.pass)
    }
}

/// TV distance between an entrance histogram and a reference law; vacuous for an empty histogram.
pub fn tv_report(name: &str, hits: &[u64], reference: &[f64], threshold: Option<f64>) -> TestReport {
    let n: u64 = hits.iter().sum();
    let thr = threshold.unwrap_or_else(|| default_tv_threshold(hits.len(), n));
    let tv = if n == 0 { 0.0 } else { tv_distance(&normalize(hits), reference) };
    let mut r = TestReport::new(name, tv, 0.0);
    r.threshold = thr;
    r.criterion = if n == 0 { "vacuous: no trajectories".into() } else { format!("TV <= {thr:.4}") };
    r.pass = tv <= thr;
    r.n = n;
    r
}

fn two_tv_report(name: &str, a: &[u64], b: &[u64], threshold: Option<f64>) -> TestReport {
    let (na, nb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    let n = na.min(nb);
    let thr = threshold.unwrap_or_else(|| default_tv_threshold(a.len(), n));
    let vacuous = na == 0 || nb == 0;
    let tv = if vacuous { 0.0 } else { tv_distance(&normalize(a), &normalize(b)) };
    let mut r = TestReport::new(name, tv, 0.0);
    r.threshold = thr;
    r.criterion = if vacuous { "vacuous: an empty histogram".into() } else { format!("TV <= {thr:.4}") };
    r.pass = tv <= thr;
    r.n = n;
    r.detail("n_a", na as f64).detail("n_b", nb as f64)
}

fn chi_report(name: &str, a: &[u64], b: &[u64], alpha: f64) -> TestReport {
    let c = chi_square_homogeneity(a, b);
    let mut r = TestReport::new(name, c.statistic, c.df);
    r.p_value = Some(c.p_value);
    r.threshold = alpha;
    r.criterion = format!("chi-square homogeneity p > {alpha}");
    r.pass = c.p_value > alpha;
    r.n = a.iter().chain(b).sum();
    r
}

/// Count mean within `mean_se` null standard errors of `level * cap(K)`, plus the Poisson dispersion test.
pub fn count_reports(label: &str, stats: &WindowStats, expected: f64, th: &Thresholds) -> Vec<TestReport> {
    let n = stats.counts.len() as u64;
    let (mean, sample_se) = stats.count_mean();
    let null_se = if n > 0 { (expected / n as f64).sqrt() } else { 0.0 };
    let mut mean_report =
        within_standard_errors(&format!("{label}.count_mean"), mean, null_se.max(sample_se), expected, th.mean_se, n);
    mean_report = mean_report.detail("sample_se", sample_se).detail("poisson_se", null_se);
    let mut disp = poisson_count_test(&stats.counts, expected, th.alpha);
    disp.name = format!("{label}.poisson_counts");
    vec![mean_report, disp]
}

fn hard_zero(name: &str, count: u64, n: u64) -> TestReport {
    let mut r = TestReport::new(name, count as f64, 0.0);
    r.criterion = "exactly zero".into();
    r.pass = count == 0;
    r.n = n;
    r
}

/// Statistics two ensembles of the same window must share: count means, entrance law, exit law.
pub fn cross_reports(label: &str, a: &WindowStats, b: &WindowStats, th: &Thresholds) -> Vec<TestReport> {
    let n = a.counts.len().min(b.counts.len()) as u64;
    vec![
        two_mean_test(&format!("{label}.count_means"), a.count_mean(), b.count_mean(), th.mean_se, n),
        two_tv_report(&format!("{label}.entrance_tv"), &a.hits, &b.hits, th.tv),
        chi_report(&format!("{label}.exit_law"), &a.exits, &b.exits, th.alpha),
    ]
}

/// Full comparison of two ensembles over the same window at the same level,
/// given the solver's capacity and normalized equilibrium measure.
pub fn compare_ensembles(
    a: &EnsembleStats,
    b: &EnsembleStats,
    capacity: f64,
    measure: &[f64],
    th: &Thresholds,
) -> Result<ReportBundle> {
    if a.window != b.window || measure.len() != a.window.len() {
        return Err(Error::config("compare", "ensembles are over different windows"));
    }
    let expected = a.level * capacity;
    let mut reports = Vec::new();
    for s in [a, b] {
        let label = s.construction.as_str();
        reports.extend(count_reports(label, &s.forward, expected, th));
        reports.push(tv_report(&format!("{label}.entrance_vs_equilibrium"), &s.forward.hits, measure, th.tv));
        reports.push(hard_zero(
            &format!("{label}.pre_entrance_visits"),
            s.forward.pre_entrance_violations,
            s.forward.trajectories(),
        ));
        reports.push(hard_zero(&format!("{label}.support_lemma"), s.support_violations, s.forward.trajectories()));
    }
    let pair = format!("{}_vs_{}", a.construction, b.construction);
    reports.extend(cross_reports(&pair, &a.forward, &b.forward, th));
    Ok(ReportBundle::new(format!("compare {pair}"), a.master_seed, reports))
}

/// Runs both constructions on independent seed families and compares them.
#[allow(clippy::too_many_arguments)]
pub fn compare_constructions(
    a: &dyn Construction,
    b: &dyn Construction,
    level: f64,
    capacity: f64,
    measure: &[f64],
    seeds: &SeedScheme,
    opts: &EnsembleOptions,
    th: &Thresholds,
) -> Result<(ReportBundle, EnsembleStats, EnsembleStats)> {
    let sa = run_ensemble(a, level, &seeds.fork(1), opts)?;
    let sb = run_ensemble(b, level, &seeds.fork(2), opts)?;
    let mut bundle = compare_ensembles(&sa, &sb, capacity, measure, th)?;
    bundle.master_seed = seeds.master_seed;
    for r in &mut bundle.reports {
        r.seed = Some(seeds.master_seed);
    }
    Ok((bundle, sa, sb))
}

/// Original against time-reversed statistics of one ensemble.
pub fn time_reversal_test(stats: &EnsembleStats, th: &Thresholds) -> Result<ReportBundle> {
    let rev = stats
        .reversed
        .as_ref()
        .ok_or_else(|| Error::config("reversal", "ensemble was run without reversed statistics"))?;
    let label = format!("{}.reversal", stats.construction);
    let mut reports = cross_reports(&label, &stats.forward, rev, th);
    let same_occupation = stats.forward.visits_sum == rev.visits_sum;
    let mut occ = TestReport::new(format!("{label}.occupation"), f64::from(u8::from(same_occupation)), 1.0);
    occ.criterion = "identical visit totals".into();
    occ.pass = same_occupation;
    occ.n = stats.forward.trajectories();
    reports.push(occ);
    reports.push(hard_zero(&format!("{label}.pre_entrance_visits"), rev.pre_entrance_violations, rev.trajectories()));
    Ok(ReportBundle::new(label, stats.master_seed, reports))
}

/// Every observed site's mean visits within `occupation_se` standard errors of the level.
pub fn occupation_identity_check(stats: &EnsembleStats, th: &Thresholds) -> TestReport {
    let means = stats.forward.visit_means();
    let level = stats.level;
    let mut worst = 0.0f64;
    let mut exact_fail = false;
    for &(m, se) in &means {
        if se > 0.0 {
            worst = worst.max((m - level).abs() / se);
        } else if m != level {
            exact_fail = true;
        }
    }
    let pooled = if means.is_empty() { 0.0 } else { means.iter().map(|m| m.0).sum::<f64>() / means.len() as f64 };
    let mut r = TestReport::new(format!("{}.occupation_identity", stats.construction), worst, 0.0);
    r.threshold = th.occupation_se;
    r.criterion = format!("max over sites |mean - u| / SE <= {}", th.occupation_se);
    r.pass = !exact_fail && worst <= th.occupation_se;
    r.n = stats.runs;
    r.detail("level", level).detail("pooled_mean", pooled).detail("sites", means.len() as f64)
}

/// Pooled mean visits per site and its standard error from per-site errors, assuming
/// at most perfect positive correlation between sites.
fn pooled_visits(stats: &EnsembleStats) -> (f64, f64) {
    let m = stats.forward.visit_means();
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let k = m.len() as f64;
    let mean = m.iter().map(|x| x.0).sum::<f64>() / k;
    let se = m.iter().map(|x| x.1).sum::<f64>() / k;
    (mean, se)
}

/// Slope of pooled mean visits between two levels against the identity slope 1.
pub fn occupation_linearity(low: &EnsembleStats, high: &EnsembleStats, th: &Thresholds) -> TestReport {
    let (m1, s1) = pooled_visits(low);
    let (m2, s2) = pooled_visits(high);
    let du = high.level - low.level;
    let slope = if du != 0.0 { (m2 - m1) / du } else { f64::NAN };
    let se = (s1 * s1 + s2 * s2).sqrt() / du.abs();
    let mut r = TestReport::new(format!("{}.occupation_slope", low.construction), slope, 1.0);
    r.std_error = Some(se);
    r.threshold = th.slope_tolerance;
    r.criterion = format!("|slope - 1| <= {}", th.slope_tolerance);
    r.pass = (slope - 1.0).abs() <= th.slope_tolerance;
    r.n = low.runs.min(high.runs);
    r.detail("level_low", low.level).detail("level_high", high.level).detail("mean_low", m1).detail("mean_high", m2)
}
