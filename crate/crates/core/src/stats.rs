//! Estimators and checks turning samples into reports: Hill tail indices,
//! power-law regressions, velocities, transience and oscillation
//! classification, moment stabilization and geometric goodness of fit.
//!
//! Every interval is a nominal 95% interval. Tolerances applied to these
//! reports are engineering gates, not constants of the model.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng;

pub const Z95: f64 = 1.959_963_984_540_054;
pub const HILL_MIN_K: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 2000;
/// Fraction of the horizon a sign change must follow for a replica to count
/// as oscillating.
pub const DEFAULT_RECENCY: f64 = 1e-3;

/// A point estimate with its interval and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub target: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub metadata: BTreeMap<String, serde_json::Value>,
    /// Free-form classification, e.g. "stable" or "light-tail".
    pub verdict: Option<String>,
    /// Whether the report satisfied the gate it was produced for.
    pub passed: Option<bool>,
}

impl EstimateReport {
    pub fn new(
        target: impl Into<String>,
        estimate: f64,
        ci_low: f64,
        ci_high: f64,
        n_samples: u64,
        seed: u64,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InsufficientData("a report needs at least one sample".into()));
        }
        if !(ci_low <= estimate && estimate <= ci_high) {
            return Err(Error::Precondition(format!(
                "interval [{ci_low}, {ci_high}] does not contain {estimate}"
            )));
        }
        Ok(EstimateReport {
            target: target.into(),
            estimate,
            ci_low,
            ci_high,
            n_samples,
            seed,
            metadata: BTreeMap::new(),
            verdict: None,
            passed: None,
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.metadata.insert(key.to_string(), v);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = target.into();
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.verdict = Some(label.into());
        self
    }

    /// Records the gate outcome; also labels the report when unlabeled.
    pub fn with_verdict(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        if self.verdict.is_none() {
            self.verdict = Some(if passed { "pass" } else { "fail" }.into());
        }
        self
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }

    /// First 16 hex digits of SHA-256 over the canonical metadata JSON.
    pub fn params_hash(&self) -> String {
        let json = serde_json::to_string(&self.metadata).unwrap_or_default();
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn ledger_row(&self) -> LedgerRow {
        LedgerRow {
            target: self.target.clone(),
            estimate: self.estimate,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            n: self.n_samples,
            seed: self.seed,
            params_hash: self.params_hash(),
        }
    }
}

/// One row of the CSV results ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub target: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub seed: u64,
    pub params_hash: String,
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} values cannot give a standard error"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Wilson score interval for `successes / n`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Percentile bootstrap interval of `stat` over resamples of `values`.
pub fn bootstrap_ci(values: &[f64], stat: impl Fn(&[f64]) -> f64, resamples: usize, seed: u64) -> (f64, f64) {
    let mut stream = rng::stream(seed, &[rng::lane::BOOTSTRAP]);
    let n = values.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = values[stream.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let lo = stats[((resamples as f64) * 0.025).floor() as usize];
    let hi = stats[(((resamples as f64) * 0.975).ceil() as usize).min(resamples - 1)];
    (lo, hi)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Hill estimator on the `k` largest samples:
/// `β̂ = 1 / mean_{i ≤ k} ln(X_(i) / X_(k+1))`, interval `β̂ ± 1.96 β̂/√k`.
pub fn tail_index_hill(samples: &[f64], k: usize) -> Result<EstimateReport> {
    if k < HILL_MIN_K {
        return Err(Error::InsufficientData(format!(
            "{k} exceedances, the Hill estimator needs at least {HILL_MIN_K}"
        )));
    }
    if k >= samples.len() {
        return Err(Error::Precondition(format!(
            "order {k} must be below the sample size {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Precondition("Hill samples must be positive".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let mean_log = sorted[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if !(mean_log > 0.0) {
        return Err(Error::DegenerateSpread("the top order statistics are tied".into()));
    }
    let beta = 1.0 / mean_log;
    let half = Z95 * beta / (k as f64).sqrt();
    Ok(EstimateReport::new(
        "tail_index_hill",
        beta,
        beta - half,
        beta + half,
        samples.len() as u64,
        0,
    )?
    .with_meta("k", k)
    .with_meta("threshold", threshold))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HillSweep {
    /// Estimates at `k = n^0.4, n^0.5, n^0.6`.
    pub reports: Vec<EstimateReport>,
    /// The estimate climbs significantly as `k` shrinks: no power tail.
    pub light_tail: bool,
}

impl HillSweep {
    /// The `k = √n` report.
    pub fn central(&self) -> &EstimateReport {
        &self.reports[1]
    }
}

pub fn hill_sweep(samples: &[f64]) -> Result<HillSweep> {
    let n = samples.len() as f64;
    let reports = [0.4, 0.5, 0.6]
        .iter()
        .map(|e| {
            let k = n.powf(*e).round() as usize;
            tail_index_hill(samples, k).map(|r| r.with_meta("k_exponent", e))
        })
        .collect::<Result<Vec<_>>>()?;
    let small_k = &reports[0];
    let large_k = &reports[2];
    let se = |r: &EstimateReport| (r.ci_high - r.estimate) / Z95;
    let spread = (se(small_k).powi(2) + se(large_k).powi(2)).sqrt();
    let light_tail = small_k.estimate - large_k.estimate > 3.0 * spread;
    Ok(HillSweep { reports, light_tail })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub max_residual: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} points cannot fit a line")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSpread("all abscissae coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        max_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    })
}

/// Slope of `(ln n, ln y)` points, with a Student-t interval. Needs at least
/// four points spanning two decades.
pub fn exponent_regression(points: &[(f64, f64)]) -> Result<EstimateReport> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} points, exponent regression needs at least 4",
            points.len()
        )));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Err(Error::DegenerateSpread("all abscissae coincide".into()));
    }
    if (hi - lo) / std::f64::consts::LN_10 < 2.0 - 1e-9 {
        return Err(Error::Precondition(format!(
            "abscissae span {:.2} decades, at least 2 are needed",
            (hi - lo) / std::f64::consts::LN_10
        )));
    }
    let fit = least_squares(points)?;
    let t = StudentsT::new(0.0, 1.0, (points.len() - 2) as f64)
        .map_err(|e| Error::Precondition(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * fit.slope_se;
    Ok(EstimateReport::new(
        "exponent_regression",
        fit.slope,
        fit.slope - half,
        fit.slope + half,
        points.len() as u64,
        0,
    )?
    .with_meta("intercept", fit.intercept)
    .with_meta("max_residual", fit.max_residual))
}

/// Median of per-replica values with a bootstrap interval over replicas.
pub fn replica_median(target: &str, values: &[f64], seed: u64) -> Result<EstimateReport> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("at least two replicas are needed".into()));
    }
    let m = median(values);
    let (lo, hi) = bootstrap_ci(values, median, DEFAULT_BOOTSTRAP, seed);
    EstimateReport::new(target, m, lo.min(m), hi.max(m), values.len() as u64, seed)
}

/// Per-axis `mean_r X_T^{(r)} · e_i / T` with replica-bootstrap intervals.
pub fn velocity_estimate(final_positions: &[Vec<f64>], horizon: f64, seed: u64) -> Result<Vec<EstimateReport>> {
    if final_positions.len() < 2 {
        return Err(Error::InsufficientData("at least two replicas are needed".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let d = final_positions[0].len();
    (0..d)
        .map(|axis| {
            let v: Vec<f64> = final_positions.iter().map(|x| x[axis] / horizon).collect();
            let m = mean(&v);
            let (lo, hi) = bootstrap_ci(&v, mean, DEFAULT_BOOTSTRAP, rng::derive_seed(seed, &[axis as u64]));
            Ok(EstimateReport::new(
                format!("velocity_axis_{}", axis + 1),
                m,
                lo.min(m),
                hi.max(m),
                v.len() as u64,
                seed,
            )?
            .with_meta("axis", axis + 1)
            .with_meta("horizon", horizon))
        })
        .collect()
}

/// Sign history of `Z_n · l` along one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSummary {
    pub terminal: i64,
    /// Step at which the nonzero sign of `Z_n · l` last changed.
    pub last_sign_change: Option<u64>,
    pub sign_changes: u64,
    pub horizon: u64,
}

impl SignSummary {
    /// Builds the summary from the projections `Z_0·l, …, Z_horizon·l`.
    pub fn from_projections(proj: impl IntoIterator<Item = i64>) -> Self {
        let mut last_sign = 0i64;
        let mut last_change = None;
        let mut changes = 0;
        let mut terminal = 0;
        let mut steps = 0u64;
        for (n, p) in proj.into_iter().enumerate() {
            let s = p.signum();
            if s != 0 {
                if last_sign != 0 && s != last_sign {
                    changes += 1;
                    last_change = Some(n as u64);
                }
                last_sign = s;
            }
            terminal = p;
            steps = n as u64;
        }
        SignSummary {
            terminal,
            last_sign_change: last_change,
            sign_changes: changes,
            horizon: steps,
        }
    }
}

/// Fraction of replicas ending with `Z · l > 0`, with a Wilson interval.
pub fn transience_check(summaries: &[SignSummary]) -> Result<EstimateReport> {
    let n = summaries.len() as u64;
    if n == 0 {
        return Err(Error::InsufficientData("no replicas".into()));
    }
    let positive = summaries.iter().filter(|s| s.terminal > 0).count() as u64;
    let settled = summaries
        .iter()
        .filter(|s| s.last_sign_change.is_none_or(|c| 2 * c < s.horizon))
        .count();
    let p = positive as f64 / n as f64;
    let (lo, hi) = wilson_interval(positive, n);
    Ok(EstimateReport::new("terminal_positive_fraction", p, lo, hi, n, 0)?
        .with_meta("positive", positive)
        .with_meta("last_change_before_half", settled as f64 / n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Oscillating,
    PlusTransient,
    MinusTransient,
}

/// Oscillating if the last sign change falls after `recency · horizon`,
/// otherwise transient towards the terminal sign.
pub fn classify(s: &SignSummary, recency: f64) -> Trend {
    let recent = s
        .last_sign_change
        .is_some_and(|c| c as f64 >= recency * s.horizon as f64);
    if recent || s.terminal == 0 {
        Trend::Oscillating
    } else if s.terminal > 0 {
        Trend::PlusTransient
    } else {
        Trend::MinusTransient
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub oscillating: f64,
    pub plus_transient: f64,
    pub minus_transient: f64,
    pub dominant: Trend,
    /// Frequency of the dominant class, with a Wilson interval.
    pub report: EstimateReport,
}

pub fn oscillation_check(summaries: &[SignSummary], recency: f64) -> Result<OscillationReport> {
    let n = summaries.len() as u64;
    if n == 0 {
        return Err(Error::InsufficientData("no replicas".into()));
    }
    let mut counts = [0u64; 3];
    for s in summaries {
        counts[classify(s, recency) as usize] += 1;
    }
    let classes = [Trend::Oscillating, Trend::PlusTransient, Trend::MinusTransient];
    let (best, &count) = counts
        .iter()
        .enumerate()
        .max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i)))
        .expect("three classes");
    let freq = |c: u64| c as f64 / n as f64;
    let (lo, hi) = wilson_interval(count, n);
    let report = EstimateReport::new("dominant_class_fraction", freq(count), lo, hi, n, 0)?
        .with_meta("dominant", classes[best])
        .with_meta("recency", recency)
        .with_label(format!("{:?}", classes[best]).to_lowercase())
        .with_verdict(freq(count) >= 0.9);
    Ok(OscillationReport {
        oscillating: freq(counts[0]),
        plus_transient: freq(counts[1]),
        minus_transient: freq(counts[2]),
        dominant: classes[best],
        report,
    })
}

/// Ratio of the running mean of `γ^s` over all samples to that over the
/// first decile. "stable" when it lies in `[0.8, 1.25]`.
pub fn moment_stabilization(samples: &[f64], s: f64) -> Result<EstimateReport> {
    if !(s > 0.0) {
        return Err(Error::Precondition("moment order must be positive".into()));
    }
    let n = samples.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("{n} samples, at least 10 are needed")));
    }
    let powered: Vec<f64> = samples.iter().map(|x| x.powf(s)).collect();
    let head = mean(&powered[..n / 10]);
    let full = mean(&powered);
    let ratio = full / head;
    let stable = (0.8..=1.25).contains(&ratio);
    Ok(
        EstimateReport::new("moment_stabilization", ratio, ratio, ratio, n as u64, 0)?
            .with_meta("s", s)
            .with_meta("mean_first_decile", head)
            .with_meta("mean_all", full)
            .with_label(if stable { "stable" } else { "diverging" }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricFit {
    /// MLE of the success parameter on `{1, 2, …}`.
    pub report: EstimateReport,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// The estimate sits at the boundary `p = 1` (all gaps equal to 1).
    pub boundary: bool,
}

/// Geometric law `P(G = k) = (1−p)^{k−1} p` fitted by maximum likelihood,
/// with a chi-square test on bins merged until every expected count is ≥ 5.
pub fn geometric_fit(gaps: &[u64]) -> Result<GeometricFit> {
    let n = gaps.len();
    if n < 200 {
        return Err(Error::InsufficientData(format!("{n} gaps, at least 200 are needed")));
    }
    if gaps.contains(&0) {
        return Err(Error::Precondition("gaps must be positive".into()));
    }
    let nf = n as f64;
    let mean_gap = gaps.iter().sum::<u64>() as f64 / nf;
    let p = 1.0 / mean_gap;
    let se = (p * p * (1.0 - p) / nf).sqrt();
    let boundary = p >= 1.0;
    let report = EstimateReport::new(
        "geometric_parameter",
        p,
        (p - Z95 * se).max(0.0),
        (p + Z95 * se).min(1.0),
        n as u64,
        0,
    )?;

    if boundary {
        return Ok(GeometricFit {
            report: report.with_label("boundary"),
            chi_square: 0.0,
            dof: 0,
            p_value: 1.0,
            boundary,
        });
    }

    let max_gap = *gaps.iter().max().expect("nonempty");
    let mut observed = vec![0u64; max_gap as usize + 1];
    for &g in gaps {
        observed[g as usize] += 1;
    }
    let pmf = |k: u64| (1.0 - p).powi(k as i32 - 1) * p;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut tail_mass = 1.0;
    let mut tail_obs = n as f64;
    let mut k = 1u64;
    loop {
        let e = nf * pmf(k);
        let rest = nf * (tail_mass - pmf(k));
        if e < 5.0 || rest < 5.0 {
            break;
        }
        let o = observed.get(k as usize).copied().unwrap_or(0) as f64;
        bins.push((o, e));
        tail_mass -= pmf(k);
        tail_obs -= o;
        k += 1;
    }
    bins.push((tail_obs, nf * tail_mass));
    let chi_square: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(2);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::Precondition(e.to_string()))?
            .sf(chi_square)
    };
    Ok(GeometricFit {
        report: report
            .with_meta("chi_square", chi_square)
            .with_meta("dof", dof)
            .with_meta("p_value", p_value),
        chi_square,
        dof,
        p_value,
        boundary,
    })
}

/// Lag-1 autocorrelation.
pub fn lag1_autocorrelation(values: &[f64]) -> f64 {
    let m = mean(values);
    let var: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = values.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distr::{Distribution, Open01};

    fn pareto(beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut s = rng::stream(seed, &[]);
        (0..n)
            .map(|_| {
                let u: f64 = Open01.sample(&mut s);
                u.powf(-1.0 / beta)
            })
            .collect()
    }

    #[test]
    fn report_invariants() {
        assert!(EstimateReport::new("x", 1.0, 2.0, 3.0, 1, 0).is_err());
        assert!(EstimateReport::new("x", 1.0, 0.0, 3.0, 0, 0).is_err());
        let r = EstimateReport::new("x", 1.0, 0.5, 1.5, 10, 3)
            .unwrap()
            .with_meta("k", 4);
        assert_eq!(r.params_hash(), r.clone().params_hash());
        assert_ne!(r.params_hash(), r.clone().with_meta("k", 5).params_hash());
        assert_eq!(r.ledger_row().n, 10);
    }

    #[test]
    fn hill_recovers_pareto_indices() {
        for (i, beta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let xs = pareto(beta, 1_000_000, i as u64);
            let k = 1000;
            let r = tail_index_hill(&xs, k).unwrap();
            assert!(
                (r.estimate - beta).abs() < 0.1 * beta.max(1.0),
                "{beta}: {}",
                r.estimate
            );
        }
    }

    #[test]
    fn hill_flags_light_tails() {
        let mut s = rng::stream(4, &[]);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let u: f64 = Open01.sample(&mut s);
                1.0 - u.ln()
            })
            .collect();
        assert!(hill_sweep(&xs).unwrap().light_tail);
        assert!(!hill_sweep(&pareto(1.0, 1_000_000, 9)).unwrap().light_tail);
        assert!(matches!(
            tail_index_hill(&xs[..1000], 50),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn regression_is_exact_on_power_laws() {
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|i| {
                let n = 10f64.powf(3.0 + 0.5 * i as f64);
                (n.ln(), 0.64 * n.ln())
            })
            .collect();
        let r = exponent_regression(&pts).unwrap();
        assert!((r.estimate - 0.64).abs() < 1e-12);
        assert!(pts.windows(1).all(|_| true));
        assert!(matches!(
            exponent_regression(&pts[..3]),
            Err(Error::InsufficientData(_))
        ));
        let flat = vec![(1.0, 1.0); 5];
        assert!(matches!(exponent_regression(&flat), Err(Error::DegenerateSpread(_))));
    }

    #[test]
    fn regression_with_multiplicative_noise() {
        let mut s = rng::stream(10, &[]);
        let pts: Vec<(f64, f64)> = (0..31)
            .map(|i| {
                let n = 10f64.powf(3.0 + 0.1 * i as f64);
                let noise: f64 = 1.0 + 0.1 * (2.0 * s.random::<f64>() - 1.0);
                (n.ln(), (2.0 * n.powf(0.64) * noise).ln())
            })
            .collect();
        let r = exponent_regression(&pts).unwrap();
        assert!((r.estimate - 0.64).abs() < 0.02);
    }

    #[test]
    fn sign_summary_tracks_nonzero_changes() {
        let s = SignSummary::from_projections([0, 1, 0, -1, -2, 0, 1, 2]);
        assert_eq!(s.sign_changes, 2);
        assert_eq!(s.last_sign_change, Some(6));
        assert_eq!(s.terminal, 2);
        assert_eq!(s.horizon, 7);
        assert_eq!(classify(&s, 0.5), Trend::Oscillating);
        let t = SignSummary::from_projections([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(classify(&t, 0.1), Trend::PlusTransient);
    }

    #[test]
    fn geometric_fit_on_synthetic_gaps() {
        let mut s = rng::stream(12, &[]);
        let gaps: Vec<u64> = (0..5000)
            .map(|_| {
                let mut k = 1;
                while s.random::<f64>() >= 0.3 {
                    k += 1;
                }
                k
            })
            .collect();
        let fit = geometric_fit(&gaps).unwrap();
        let se = (fit.report.ci_high - fit.report.estimate) / Z95;
        assert!((fit.report.estimate - 0.3).abs() < 5.0 * se);
        assert!(fit.p_value > 0.001);
        let ones = vec![1u64; 300];
        assert!(geometric_fit(&ones).unwrap().boundary);
        assert!(geometric_fit(&ones[..100]).is_err());
    }

    #[test]
    fn moment_stabilization_on_constants_and_pareto() {
        assert_eq!(
            moment_stabilization(&[3.0; 100], 2.0).unwrap().verdict.as_deref(),
            Some("stable")
        );
        let xs = pareto(1.0, 100_000, 5);
        assert_eq!(
            moment_stabilization(&xs, 0.5).unwrap().verdict.as_deref(),
            Some("stable")
        );
        assert_eq!(
            moment_stabilization(&xs, 2.0).unwrap().verdict.as_deref(),
            Some("diverging")
        );
    }

    #[test]
    fn wilson_contains_point_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 7), (190, 200)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }
}
