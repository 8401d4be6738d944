//! Simulation scenarios: networks, repeated RDS samples, fits, estimates,
//! bootstrap intervals and their aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{bonferroni_mse_compare, summarize_errors, Comparison};
use crate::bootstrap::{bootstrap, BootstrapConfig, BootstrapMethod};
use crate::error::{Error, Result};
use crate::estimators::{
    Estimation, EstimatorKind, HomogeneousPolicy, RecruitmentFits, WeightSource,
};
use crate::inference::{fit_dr, fit_mdr, FitOptions};
use crate::netgen::{estimate_tau, HomophilyLevel, PopulationRecipe, DEFAULT_TAU_THRESHOLD};
use crate::population::Population;
use crate::recruitment::{scenario_covariates, MdrLevel, RecruitmentModel};
use crate::rng::{derive_seed, from_seed};
use crate::sampler::{run_rds, RdsSample, SamplingDesign};

pub const DESK_NETWORKS: usize = 5;
pub const DESK_SAMPLES: usize = 40;
pub const FULL_NETWORKS: usize = 15;
pub const FULL_SAMPLES: usize = 80;

/// Bootstrap settings for a scenario; each estimator uses its paired resampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBootstrap {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_replicates() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.05
}
fn default_networks() -> usize {
    DESK_NETWORKS
}
fn default_samples() -> usize {
    DESK_SAMPLES
}
fn default_population() -> usize {
    1000
}
fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::TABLE.to_vec()
}
fn default_failure_rate() -> f64 {
    0.2
}

impl Default for ScenarioBootstrap {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub homophily_level: HomophilyLevel,
    pub mdr_level: MdrLevel,
    #[serde(default = "default_networks")]
    pub networks: usize,
    #[serde(default = "default_samples")]
    pub samples_per_network: usize,
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default)]
    pub design: SamplingDesign,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<ScenarioBootstrap>,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub homogeneous_policy: HomogeneousPolicy,
    /// Share of failed units above which the cell is abandoned.
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
}

impl ScenarioConfig {
    pub fn new(homophily_level: HomophilyLevel, mdr_level: MdrLevel, root_seed: u64) -> Self {
        Self {
            homophily_level,
            mdr_level,
            networks: DESK_NETWORKS,
            samples_per_network: DESK_SAMPLES,
            population_size: default_population(),
            design: SamplingDesign::default(),
            estimators: default_estimators(),
            bootstrap: None,
            root_seed,
            homogeneous_policy: HomogeneousPolicy::default(),
            max_failure_rate: default_failure_rate(),
        }
    }

    pub fn full_scale(mut self) -> Self {
        self.networks = FULL_NETWORKS;
        self.samples_per_network = FULL_SAMPLES;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks == 0 || self.samples_per_network == 0 {
            return Err(Error::Config(
                "networks and samples_per_network must be at least 1".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config("max_failure_rate must lie in [0, 1]".into()));
        }
        if let Some(b) = &self.bootstrap {
            BootstrapConfig {
                method: BootstrapMethod::Nb,
                replicates: b.replicates,
                alpha: b.alpha,
                rng_seed: 0,
                coupons: None,
            }
            .validate()?;
        }
        self.design.validate()?;
        if self.design.n_target > self.population_size {
            return Err(Error::Config(format!(
                "sample size {} exceeds population size {}",
                self.design.n_target, self.population_size
            )));
        }
        Ok(())
    }

    /// Position 1..=9 in the homophily-major grid of scenarios.
    pub fn scenario_number(&self) -> usize {
        scenario_number(self.homophily_level, self.mdr_level)
    }
}

const LEVELS: [(HomophilyLevel, MdrLevel); 9] = [
    (HomophilyLevel::None, MdrLevel::None),
    (HomophilyLevel::None, MdrLevel::Moderate),
    (HomophilyLevel::None, MdrLevel::High),
    (HomophilyLevel::Moderate, MdrLevel::None),
    (HomophilyLevel::Moderate, MdrLevel::Moderate),
    (HomophilyLevel::Moderate, MdrLevel::High),
    (HomophilyLevel::High, MdrLevel::None),
    (HomophilyLevel::High, MdrLevel::Moderate),
    (HomophilyLevel::High, MdrLevel::High),
];

pub fn scenario_number(h: HomophilyLevel, m: MdrLevel) -> usize {
    LEVELS
        .iter()
        .position(|&l| l == (h, m))
        .expect("every level pair is listed")
        + 1
}

/// The nine scenario cells with seeds derived from `root_seed`.
pub fn all_scenarios(root_seed: u64) -> Vec<ScenarioConfig> {
    LEVELS
        .iter()
        .enumerate()
        .map(|(k, &(h, m))| ScenarioConfig::new(h, m, derive_seed(root_seed, k as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub index: usize,
    pub true_prevalence: f64,
    pub mean_degree: f64,
    pub tau: Option<f64>,
}

/// One sample's estimates and intervals, aligned with the configured estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTrace {
    pub network: usize,
    pub sample: usize,
    pub truth: f64,
    pub estimates: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<Option<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dr_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdr_beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub estimator: EstimatorKind,
    pub bias: Option<f64>,
    pub sd: Option<f64>,
    pub rmse: Option<f64>,
    pub coverage: Option<f64>,
    pub undefined_rate: f64,
    pub defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: usize,
    pub config: ScenarioConfig,
    pub networks: Vec<NetworkSummary>,
    pub units: usize,
    pub failed_units: usize,
    pub failures: Vec<String>,
    pub estimators: Vec<EstimatorResult>,
    pub comparison: Option<Comparison>,
    pub traces: Vec<UnitTrace>,
}

impl ScenarioResult {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorResult> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

fn network_seed(config: &ScenarioConfig, net: usize) -> u64 {
    derive_seed(config.root_seed, net as u64)
}

fn sample_seed(config: &ScenarioConfig, net: usize, s: usize) -> u64 {
    derive_seed(network_seed(config, net), 1 + s as u64)
}

/// Draws the population of network `net` for a scenario.
pub fn scenario_population(config: &ScenarioConfig, net: usize) -> Result<Population> {
    PopulationRecipe::new(
        config.population_size,
        config.homophily_level.ergm(),
        derive_seed(network_seed(config, net), 0),
    )
    .draw()
}

/// Recruitment fits used by the scenario estimators: DR on the outcome and
/// MDR on the four scenario covariates.
pub fn scenario_fits(sample: &RdsSample, notes: &mut Vec<String>) -> RecruitmentFits {
    let mut fits = RecruitmentFits {
        dr_attr: "z".into(),
        mdr_specs: scenario_covariates(),
        ..RecruitmentFits::default()
    };
    match fit_dr(sample, "z") {
        Ok(f) if f.phi_hat.is_some_and(f64::is_finite) => fits.dr_phi = f.phi_hat,
        Ok(_) => notes.push("dr fit: non-finite phi".into()),
        Err(e) => notes.push(format!("dr fit: {e}")),
    }
    let options = FitOptions {
        standardize: true,
        ..FitOptions::default()
    };
    match fit_mdr(sample, &fits.mdr_specs, &options) {
        Ok(f) if f.beta_hat.iter().all(|b| b.is_finite()) => {
            if !f.converged {
                notes.push("mdr fit: not converged".into());
            }
            fits.mdr_beta = Some(f.beta_hat);
        }
        Ok(_) => notes.push("mdr fit: non-finite coefficients".into()),
        Err(e) => notes.push(format!("mdr fit: {e}")),
    }
    fits
}

fn run_unit(
    config: &ScenarioConfig,
    pop: &Population,
    truth: f64,
    net: usize,
    s: usize,
) -> Result<UnitTrace> {
    let seed = sample_seed(config, net, s);
    let model = RecruitmentModel::Mdr(config.mdr_level.model());
    let sample = run_rds(pop, &model, &config.design, &mut from_seed(seed))?;
    let mut notes = Vec::new();
    let fits = scenario_fits(&sample, &mut notes);
    let est = Estimation::new(&sample, &fits, config.homogeneous_policy)?;
    let estimates: Vec<Option<f64>> = config
        .estimators
        .iter()
        .map(|&k| est.estimate(k).ok())
        .collect();

    let mut intervals = Vec::new();
    if let Some(b) = &config.bootstrap {
        intervals = vec![None; config.estimators.len()];
        let mut methods: Vec<BootstrapMethod> = config
            .estimators
            .iter()
            .map(|&k| BootstrapMethod::default_for(k))
            .collect();
        methods.sort_by_key(|m| m.label());
        methods.dedup();
        for (mi, method) in methods.into_iter().enumerate() {
            let idx: Vec<usize> = (0..config.estimators.len())
                .filter(|&k| BootstrapMethod::default_for(config.estimators[k]) == method)
                .collect();
            let kinds: Vec<EstimatorKind> = idx.iter().map(|&k| config.estimators[k]).collect();
            let points: Vec<Option<f64>> = idx.iter().map(|&k| estimates[k]).collect();
            let missing_fit = kinds.iter().any(|k| match k.weight_source() {
                WeightSource::DrStationary => fits.dr_phi.is_none(),
                WeightSource::MdrStationary => fits.mdr_beta.is_none(),
                WeightSource::Degree => false,
            }) || (method == BootstrapMethod::Dr && fits.dr_phi.is_none());
            if missing_fit {
                continue;
            }
            let bc = BootstrapConfig {
                method,
                replicates: b.replicates,
                alpha: b.alpha,
                rng_seed: derive_seed(seed, 1 + mi as u64),
                coupons: Some(config.design.coupons),
            };
            match bootstrap(
                &sample,
                &fits,
                &kinds,
                &points,
                &bc,
                config.homogeneous_policy,
            ) {
                Ok(reports) => {
                    for (&k, r) in idx.iter().zip(reports) {
                        intervals[k] = r.ci;
                    }
                }
                Err(e) => notes.push(format!("{} bootstrap: {e}", method.label())),
            }
        }
    }
    Ok(UnitTrace {
        network: net,
        sample: s,
        truth,
        estimates,
        intervals,
        dr_phi: fits.dr_phi,
        mdr_beta: fits.mdr_beta,
        notes,
    })
}

/// Runs one scenario cell. Units run in parallel; results are assembled
/// in (network, sample) order, so the output depends only on the config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let pops: Vec<Population> = (0..config.networks)
        .into_par_iter()
        .map(|net| scenario_population(config, net))
        .collect::<Result<Vec<_>>>()?;
    let networks: Vec<NetworkSummary> = pops
        .par_iter()
        .enumerate()
        .map(|(index, p)| NetworkSummary {
            index,
            true_prevalence: p.true_prevalence(),
            mean_degree: p.mean_degree(),
            tau: estimate_tau(p, DEFAULT_TAU_THRESHOLD).ok(),
        })
        .collect();

    let units: Vec<(usize, usize)> = (0..config.networks)
        .flat_map(|n| (0..config.samples_per_network).map(move |s| (n, s)))
        .collect();
    let outcomes: Vec<Result<UnitTrace>> = units
        .par_iter()
        .map(|&(n, s)| run_unit(config, &pops[n], networks[n].true_prevalence, n, s))
        .collect();

    let mut traces = Vec::with_capacity(units.len());
    let mut failures = Vec::new();
    for (&(n, s), o) in units.iter().zip(outcomes) {
        match o {
            Ok(t) => traces.push(t),
            Err(e) => failures.push(format!("network {n} sample {s}: {e}")),
        }
    }
    if failures.len() as f64 > config.max_failure_rate * units.len() as f64 {
        return Err(Error::Method(format!(
            "scenario {} aborted: {} of {} units failed; first: {}",
            config.scenario_number(),
            failures.len(),
            units.len(),
            failures[0]
        )));
    }

    let estimators = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, &kind)| summarize_estimator(kind, k, &traces))
        .collect();
    let comparison = compare(config, &traces);
    Ok(ScenarioResult {
        scenario: config.scenario_number(),
        config: config.clone(),
        networks,
        units: units.len(),
        failed_units: failures.len(),
        failures,
        estimators,
        comparison,
        traces,
    })
}

fn summarize_estimator(kind: EstimatorKind, k: usize, traces: &[UnitTrace]) -> EstimatorResult {
    let errors: Vec<f64> = traces
        .iter()
        .filter_map(|t| t.estimates[k].map(|e| e - t.truth))
        .collect();
    let summary = summarize_errors(&errors);
    let intervals: Vec<([f64; 2], f64)> = traces
        .iter()
        .filter_map(|t| {
            t.intervals
                .get(k)
                .copied()
                .flatten()
                .map(|ci| (ci, t.truth))
        })
        .collect();
    let coverage = (!intervals.is_empty()).then(|| {
        intervals
            .iter()
            .filter(|(ci, truth)| ci[0] <= *truth && *truth <= ci[1])
            .count() as f64
            / intervals.len() as f64
    });
    EstimatorResult {
        estimator: kind,
        bias: summary.map(|s| s.bias),
        sd: summary.map(|s| s.sd),
        rmse: summary.map(|s| s.rmse),
        coverage,
        undefined_rate: if traces.is_empty() {
            0.0
        } else {
            1.0 - errors.len() as f64 / traces.len() as f64
        },
        defined: errors.len(),
    }
}

/// Squared-error comparison over the samples where every estimator is defined.
fn compare(config: &ScenarioConfig, traces: &[UnitTrace]) -> Option<Comparison> {
    let complete: Vec<&UnitTrace> = traces
        .iter()
        .filter(|t| t.estimates.iter().all(Option::is_some))
        .collect();
    let series: Vec<(String, Vec<f64>)> = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            (
                kind.label().to_string(),
                complete
                    .iter()
                    .map(|t| (t.estimates[k].expect("complete") - t.truth).powi(2))
                    .collect(),
            )
        })
        .collect();
    bonferroni_mse_compare(&series, 0.05).ok()
}

/// Statistic laid out in the wide tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Rmse,
    Sd,
    Bias,
    Coverage,
}

impl TableMetric {
    fn pick(self, r: &EstimatorResult) -> Option<f64> {
        match self {
            TableMetric::Rmse => r.rmse,
            TableMetric::Sd => r.sd,
            TableMetric::Bias => r.bias,
            TableMetric::Coverage => r.coverage,
        }
    }
}

/// Column order of the published tables.
pub const TABLE_COLUMNS: [EstimatorKind; 6] = [
    EstimatorKind::Vh,
    EstimatorKind::DrIi,
    EstimatorKind::MdrIi,
    EstimatorKind::Lu,
    EstimatorKind::DrEgo,
    EstimatorKind::MdrEgo,
];

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// One row per scenario, one column per estimator.
pub fn wide_table_csv(results: &[ScenarioResult], metric: TableMetric) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario".to_string(), "homophily".into(), "mdr".into()];
    header.extend(TABLE_COLUMNS.iter().map(|k| k.label().to_string()));
    if metric == TableMetric::Rmse {
        header.push("best".into());
        header.push("indistinguishable".into());
    }
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![
            r.scenario.to_string(),
            r.config.homophily_level.label().into(),
            r.config.mdr_level.label().into(),
        ];
        row.extend(
            TABLE_COLUMNS
                .iter()
                .map(|&k| fmt(r.estimator(k).and_then(|e| metric.pick(e)))),
        );
        if metric == TableMetric::Rmse {
            let (best, same) = match &r.comparison {
                Some(c) => (
                    c.best().name.clone(),
                    c.rows
                        .iter()
                        .filter(|x| x.indistinguishable && !x.best)
                        .map(|x| x.name.as_str())
                        .collect::<Vec<_>>()
                        .join(" "),
                ),
                None => (String::new(), String::new()),
            };
            row.push(best);
            row.push(same);
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Long format: one row per scenario and estimator.
pub fn summary_csv(results: &[ScenarioResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "homophily",
        "mdr",
        "estimator",
        "bias",
        "sd",
        "rmse",
        "coverage",
        "undefined_rate",
        "defined",
    ])?;
    for r in results {
        for e in &r.estimators {
            w.write_record([
                r.scenario.to_string(),
                r.config.homophily_level.label().into(),
                r.config.mdr_level.label().into(),
                e.estimator.label().into(),
                fmt(e.bias),
                fmt(e.sd),
                fmt(e.rmse),
                fmt(e.coverage),
                format!("{:.4}", e.undefined_rate),
                e.defined.to_string(),
            ])?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(h: HomophilyLevel, m: MdrLevel) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(h, m, 11);
        c.networks = 1;
        c.samples_per_network = 3;
        c.design.n_target = 80;
        c
    }

    #[test]
    fn numbering_is_homophily_major() {
        assert_eq!(scenario_number(HomophilyLevel::None, MdrLevel::High), 3);
        assert_eq!(
            scenario_number(HomophilyLevel::Moderate, MdrLevel::Moderate),
            5
        );
        assert_eq!(scenario_number(HomophilyLevel::High, MdrLevel::High), 9);
        assert_eq!(all_scenarios(1).len(), 9);
    }

    #[test]
    fn zero_samples_is_config_error() {
        let mut c = small(HomophilyLevel::None, MdrLevel::None);
        c.samples_per_network = 0;
        assert!(matches!(run_scenario(&c), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let c: ScenarioConfig =
            serde_json::from_str(r#"{"homophily_level":"high","mdr_level":"moderate"}"#).unwrap();
        assert_eq!(
            (c.networks, c.samples_per_network),
            (DESK_NETWORKS, DESK_SAMPLES)
        );
        assert_eq!(c.estimators, EstimatorKind::TABLE.to_vec());
        assert!(serde_json::from_str::<ScenarioConfig>(
            r#"{"homophily_level":"high","mdr_level":"high","x":1}"#
        )
        .is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_decomposes() {
        let c = small(HomophilyLevel::None, MdrLevel::Moderate);
        let a = run_scenario(&c).unwrap();
        let b = run_scenario(&c).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.units, 3);
        for e in &a.estimators {
            let (bias, sd, rmse) = (e.bias.unwrap(), e.sd.unwrap(), e.rmse.unwrap());
            assert!((rmse * rmse - bias * bias - sd * sd).abs() < 1e-9);
        }
        let table = wide_table_csv(&[a], TableMetric::Rmse).unwrap();
        assert!(table.starts_with("scenario,homophily,mdr,vh,dr-ii,mdr-ii,lu,dr-ego,mdr-ego"));
    }
}
