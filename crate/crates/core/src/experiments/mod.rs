//! Named experiments. Each takes a typed configuration whose defaults are
//! the acceptance settings and returns an [`Outcome`] holding its gates,
//! estimate reports, plot series and tables.

mod accelerated;
mod lattice_walks;
mod sampling;
mod torus_checks;

use std::collections::BTreeMap;

use serde::de::Deserializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accel::{GammaMethod, DEFAULT_NODE_BUDGET};
use crate::cuts::CutResult;
use crate::env::Weights;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::EstimateReport;

pub use accelerated::{excursions, velocity, ExcursionsConfig, VelocityConfig};
pub use lattice_walks::{
    exponent, gamma_tail, renewals, theta_tail, transience, ExponentConfig, GammaTailConfig, RenewalsConfig,
    ThetaTailConfig, TransienceConfig,
};
pub use sampling::{
    exponents_table, gamma_identity, kappa_tables, sampler_moments, ExponentsTable, GammaIdentityConfig,
    KappaTablesConfig, SamplerMomentsConfig,
};
pub use torus_checks::{lp_trend, reversal_check, torus_density, LpTrendConfig, ReversalConfig, TorusDensityConfig};

/// Registered experiment names.
pub const EXPERIMENTS: [&str; 12] = [
    "sampler-moments",
    "gamma-identity",
    "kappa-tables",
    "torus-density",
    "reversal-check",
    "theta-tail",
    "gamma-tail",
    "transience",
    "velocity",
    "exponent",
    "excursions",
    "renewals",
];

/// One pass/fail gate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// The condition `value` must satisfy, in words.
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, requirement: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            value,
            requirement: requirement.into(),
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, format!("<= {bound:e}"), value <= bound)
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, format!("< {bound}"), value < bound)
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Check::new(name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value))
    }
}

/// A two-column data series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x: &str, y: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            columns: [x.into(), y.into()],
            points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub reports: Vec<EstimateReport>,
    #[serde(skip)]
    pub series: Vec<Series>,
    pub tables: BTreeMap<String, serde_json::Value>,
}

impl Outcome {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Outcome {
            experiment: experiment.into(),
            seed,
            checks: Vec::new(),
            reports: Vec::new(),
            series: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn report(&mut self, r: EstimateReport) {
        self.reports.push(r);
    }

    pub fn table(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.tables.insert(key.into(), v);
    }

    /// Records a cut with its sites written as `d` coordinates.
    pub fn cut_table(&mut self, key: &str, cut: &CutResult<f64>, d: usize) {
        self.table(
            key,
            CutTable {
                value: cut.value,
                k_vertices: cut.argmin_set.iter().map(|x| x.to_vec(d)).collect(),
                cut_edges: cut.cut_edges.iter().map(|(x, dir)| (x.to_vec(d), *dir)).collect(),
            },
        );
    }

    /// Folds another outcome's gates, reports, series and tables into this one.
    pub fn absorb(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.reports.extend(other.reports);
        self.series.extend(other.series);
        self.tables.extend(other.tables);
    }
}

/// Dirichlet weights as configured: dimension and the 2d entries.
#[derive(Serialize)]
struct CutTable {
    value: f64,
    k_vertices: Vec<Vec<i32>>,
    cut_edges: Vec<(Vec<i32>, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub d: usize,
    pub alpha: Vec<f64>,
}

impl WeightsConfig {
    pub fn new(d: usize, alpha: &[f64]) -> Self {
        WeightsConfig {
            d,
            alpha: alpha.to_vec(),
        }
    }

    pub fn weights(&self) -> Result<Weights<f64>> {
        Weights::new(self.d, self.alpha.clone())
    }
}

/// How the experiment obtains γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaChoice {
    Exact,
    MonteCarlo,
}

impl GammaChoice {
    pub fn method(self, seed: u64) -> GammaMethod {
        match self {
            GammaChoice::Exact => GammaMethod::Exact {
                budget: DEFAULT_NODE_BUDGET,
            },
            GammaChoice::MonteCarlo => GammaMethod::MonteCarlo {
                seed: rng::derive_seed(seed, &[rng::lane::GAMMA_MC]),
            },
        }
    }
}

/// A fully configured experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentConfig {
    SamplerMoments(SamplerMomentsConfig),
    GammaIdentity(GammaIdentityConfig),
    KappaTables(KappaTablesConfig),
    TorusDensity(TorusDensityConfig),
    ReversalCheck(ReversalConfig),
    ThetaTail(ThetaTailConfig),
    GammaTail(GammaTailConfig),
    Transience(TransienceConfig),
    Velocity(VelocityConfig),
    Exponent(ExponentConfig),
    Excursions(ExcursionsConfig),
    Renewals(RenewalsConfig),
}

impl ExperimentConfig {
    /// The default configuration of experiment `name`.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "sampler-moments" => Self::SamplerMoments(Default::default()),
            "gamma-identity" => Self::GammaIdentity(Default::default()),
            "kappa-tables" => Self::KappaTables(Default::default()),
            "torus-density" => Self::TorusDensity(Default::default()),
            "reversal-check" => Self::ReversalCheck(Default::default()),
            "theta-tail" => Self::ThetaTail(Default::default()),
            "gamma-tail" => Self::GammaTail(Default::default()),
            "transience" => Self::Transience(Default::default()),
            "velocity" => Self::Velocity(Default::default()),
            "exponent" => Self::Exponent(Default::default()),
            "excursions" => Self::Excursions(Default::default()),
            "renewals" => Self::Renewals(Default::default()),
            other => return Err(unknown(other)),
        })
    }

    /// Parses the configuration section of experiment `name`; missing keys
    /// keep their defaults.
    pub fn from_section<'de, D: Deserializer<'de>>(name: &str, section: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match name {
            "sampler-moments" => Self::SamplerMoments(Deserialize::deserialize(section)?),
            "gamma-identity" => Self::GammaIdentity(Deserialize::deserialize(section)?),
            "kappa-tables" => Self::KappaTables(Deserialize::deserialize(section)?),
            "torus-density" => Self::TorusDensity(Deserialize::deserialize(section)?),
            "reversal-check" => Self::ReversalCheck(Deserialize::deserialize(section)?),
            "theta-tail" => Self::ThetaTail(Deserialize::deserialize(section)?),
            "gamma-tail" => Self::GammaTail(Deserialize::deserialize(section)?),
            "transience" => Self::Transience(Deserialize::deserialize(section)?),
            "velocity" => Self::Velocity(Deserialize::deserialize(section)?),
            "exponent" => Self::Exponent(Deserialize::deserialize(section)?),
            "excursions" => Self::Excursions(Deserialize::deserialize(section)?),
            "renewals" => Self::Renewals(Deserialize::deserialize(section)?),
            other => return Err(D::Error::custom(unknown(other))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SamplerMoments(_) => "sampler-moments",
            Self::GammaIdentity(_) => "gamma-identity",
            Self::KappaTables(_) => "kappa-tables",
            Self::TorusDensity(_) => "torus-density",
            Self::ReversalCheck(_) => "reversal-check",
            Self::ThetaTail(_) => "theta-tail",
            Self::GammaTail(_) => "gamma-tail",
            Self::Transience(_) => "transience",
            Self::Velocity(_) => "velocity",
            Self::Exponent(_) => "exponent",
            Self::Excursions(_) => "excursions",
            Self::Renewals(_) => "renewals",
        }
    }

    /// Overrides the main sample count: draws, environments, walks or
    /// replicas depending on the experiment.
    pub fn set_replicas(&mut self, n: u64) {
        match self {
            Self::SamplerMoments(c) => c.draws = n,
            Self::GammaIdentity(c) => c.environments = n,
            Self::KappaTables(_) => {}
            Self::TorusDensity(c) => c.environments = n,
            Self::ReversalCheck(c) => c.environments = n,
            Self::ThetaTail(c) => c.walks = n,
            Self::GammaTail(c) => c.samples = n,
            Self::Transience(c) => c.replicas = n,
            Self::Velocity(c) => c.replicas = n,
            Self::Exponent(c) => c.replicas = n,
            Self::Excursions(c) => c.replicas = n,
            Self::Renewals(c) => c.replicas = n,
        }
    }

    /// First 16 hex digits of SHA-256 over the configuration JSON.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Runs the experiment; every report carries the configuration hash.
    pub fn run(&self, seed: u64) -> Result<Outcome> {
        let mut out = self.dispatch(seed)?;
        let hash = serde_json::Value::String(self.config_hash());
        for r in &mut out.reports {
            r.metadata.insert("config_hash".into(), hash.clone());
        }
        Ok(out)
    }

    fn dispatch(&self, seed: u64) -> Result<Outcome> {
        match self {
            Self::SamplerMoments(c) => sampler_moments(c, seed),
            Self::GammaIdentity(c) => gamma_identity(c, seed),
            Self::KappaTables(c) => kappa_tables(c, seed),
            Self::TorusDensity(c) => {
                let mut out = torus_density(c, seed)?;
                if let Some(lp) = &c.lp {
                    out.absorb(lp_trend(lp, seed)?);
                }
                Ok(out)
            }
            Self::ReversalCheck(c) => reversal_check(c, seed),
            Self::ThetaTail(c) => theta_tail(c, seed),
            Self::GammaTail(c) => gamma_tail(c, seed),
            Self::Transience(c) => transience(c, seed),
            Self::Velocity(c) => velocity(c, seed),
            Self::Exponent(c) => exponent(c, seed),
            Self::Excursions(c) => excursions(c, seed),
            Self::Renewals(c) => renewals(c, seed),
        }
    }
}

fn unknown(name: &str) -> Error {
    Error::Config(format!(
        "unknown experiment {name:?}; expected one of {}",
        EXPERIMENTS.join(", ")
    ))
}

/// `n` points from `lo` to `hi`, evenly spaced in log scale.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_round_trips() {
        for name in EXPERIMENTS {
            assert_eq!(ExperimentConfig::default_for(name).unwrap().name(), name);
        }
        assert!(ExperimentConfig::default_for("nope").is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = geometric_grid(1e3, 1e6, 16);
        assert_eq!(g.len(), 16);
        assert!((g[0] - 1e3).abs() < 1e-9 && (g[15] - 1e6).abs() < 1e-6);
    }
}
