//! Maximum-likelihood estimation of recruitment coefficients.
//!
//! Each recruiter contributes one softmax choice per recruit, with the
//! choice set given by the recruiter's reported alters. Recruits are linked
//! to their alter row through `Alter::member`; when no alter row is linked
//! the recruit's own record stands in for it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{maximize, OptimMethod, OptimOptions};
use crate::recruitment::{validate_covariates, Attributes, CovariateSpec};
use crate::sampler::{Member, RdsSample};

/// One recruiter's choice problem: covariates of every reported alter and
/// of each realised recruit.
#[derive(Debug, Clone)]
struct ChoiceSet {
    recruiter: usize,
    alters: Vec<Vec<f64>>,
    /// `(recruit, covariates)` for every realised recruit.
    chosen: Vec<(usize, Vec<f64>)>,
    /// Sum of the recruits' covariate vectors.
    chosen_sum: Vec<f64>,
    recruits: usize,
}

fn sum_rows<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, k: usize) -> Vec<f64> {
    rows.fold(vec![0.0; k], |mut acc, x| {
        for (a, v) in acc.iter_mut().zip(x) {
            *a += v;
        }
        acc
    })
}

/// Likelihood terms compiled from a sample.
#[derive(Debug, Clone)]
pub struct RecruitmentData {
    names: Vec<String>,
    sets: Vec<ChoiceSet>,
    scale: Vec<f64>,
}

fn covariates_for(
    specs: &[CovariateSpec],
    ego: &dyn Attributes,
    alter: &dyn Attributes,
) -> Result<Vec<f64>> {
    let tables = BTreeMap::new();
    specs.iter().map(|c| c.value(ego, alter, &tables)).collect()
}

impl RecruitmentData {
    pub fn compile(sample: &RdsSample, specs: &[CovariateSpec]) -> Result<Self> {
        validate_covariates(specs)?;
        let recruits = sample.recruits();
        let mut sets = Vec::new();
        for (i, kids) in recruits.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let ego = &sample.members[i];
            if !ego.has_ego_report() {
                return Err(Error::Data(format!(
                    "recruiter `{}` of member `{}` has no ego-network report",
                    ego.id, sample.members[kids[0]].id
                )));
            }
            let alters = ego
                .alters
                .iter()
                .map(|a| covariates_for(specs, ego, a))
                .collect::<Result<Vec<_>>>()?;
            let chosen = kids
                .iter()
                .map(|&k| {
                    let x = match ego.alters.iter().find(|a| a.member == Some(k)) {
                        Some(a) => covariates_for(specs, ego, a)?,
                        None => covariates_for(specs, ego, &sample.members[k] as &Member)?,
                    };
                    Ok((k, x))
                })
                .collect::<Result<Vec<_>>>()?;
            let chosen_sum = sum_rows(chosen.iter().map(|c| &c.1), specs.len());
            sets.push(ChoiceSet {
                recruiter: i,
                alters,
                chosen,
                chosen_sum,
                recruits: kids.len(),
            });
        }
        if sets.is_empty() {
            return Err(Error::Data("sample has no recruits".into()));
        }
        Ok(Self {
            names: specs.iter().map(|c| c.name.clone()).collect(),
            sets,
            scale: vec![1.0; specs.len()],
        })
    }

    /// Likelihood terms of a resampled recruitment forest: one choice set per
    /// `(recruiter, retained recruits)` cluster, repeated clusters included.
    pub fn restrict(&self, clusters: &[(usize, Vec<usize>)]) -> Result<Self> {
        let k = self.dimension();
        let sets = clusters
            .iter()
            .map(|(r, kids)| {
                let base = self
                    .sets
                    .iter()
                    .find(|s| s.recruiter == *r)
                    .ok_or_else(|| Error::Data(format!("member {r} recruited nobody")))?;
                let chosen: Vec<(usize, Vec<f64>)> = base
                    .chosen
                    .iter()
                    .filter(|c| kids.contains(&c.0))
                    .cloned()
                    .collect();
                if chosen.len() != kids.len() {
                    return Err(Error::Data(format!(
                        "cluster of member {r} lists a member it did not recruit"
                    )));
                }
                let chosen_sum = sum_rows(chosen.iter().map(|c| &c.1), k);
                Ok(ChoiceSet {
                    recruiter: *r,
                    alters: base.alters.clone(),
                    recruits: chosen.len(),
                    chosen,
                    chosen_sum,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if sets.iter().all(|s| s.recruits == 0) {
            return Err(Error::Data("resampled forest has no recruits".into()));
        }
        Ok(Self {
            names: self.names.clone(),
            sets,
            scale: self.scale.clone(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn recruit_count(&self) -> usize {
        self.sets.iter().map(|s| s.recruits).sum()
    }

    /// Log-likelihood and gradient at `beta` (on the original covariate scale).
    pub fn evaluate(&self, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if beta.len() != self.dimension() {
            return Err(Error::Config(format!(
                "beta has {} entries, expected {}",
                beta.len(),
                self.dimension()
            )));
        }
        let k = self.dimension();
        let mut ll = 0.0;
        let mut grad = vec![0.0; k];
        let mut logs = Vec::new();
        for set in &self.sets {
            logs.clear();
            logs.extend(
                set.alters
                    .iter()
                    .map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()),
            );
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            let mut mean = vec![0.0; k];
            for (x, &l) in set.alters.iter().zip(&logs) {
                let w = (l - max).exp();
                total += w;
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += w * v;
                }
            }
            let lse = max + total.ln();
            let n = set.recruits as f64;
            ll += set
                .chosen_sum
                .iter()
                .zip(beta)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                - n * lse;
            for ((g, s), m) in grad.iter_mut().zip(&set.chosen_sum).zip(&mean) {
                *g += s - n * m / total;
            }
        }
        Ok((ll, grad))
    }

    /// Covariates with no variation inside any recruiter's choice set.
    pub fn identifiability_warnings(&self) -> Vec<String> {
        (0..self.dimension())
            .filter(|&c| {
                self.sets.iter().all(|s| {
                    let first = s.alters[0][c];
                    s.alters.iter().all(|x| x[c] == first) && s.chosen_sum[c] == first * s.recruits as f64
                })
            })
            .map(|c| format!("covariate `{}` does not vary within any recruiter's alters; coefficient not identifiable", self.names[c]))
            .collect()
    }

    /// Rescales every covariate column to unit standard deviation over all
    /// alter rows; constant columns are left alone.
    fn standardized(&self) -> Self {
        let k = self.dimension();
        let rows: Vec<&Vec<f64>> = self.sets.iter().flat_map(|s| s.alters.iter()).collect();
        let m = rows.len() as f64;
        let scale: Vec<f64> = (0..k)
            .map(|c| {
                let mean = rows.iter().map(|r| r[c]).sum::<f64>() / m;
                let sd = (rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / m).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let rescale = |x: &Vec<f64>| x.iter().zip(&scale).map(|(v, s)| v / s).collect::<Vec<_>>();
        Self {
            names: self.names.clone(),
            sets: self
                .sets
                .iter()
                .map(|s| ChoiceSet {
                    recruiter: s.recruiter,
                    alters: s.alters.iter().map(rescale).collect(),
                    chosen: s.chosen.iter().map(|(k, x)| (*k, rescale(x))).collect(),
                    chosen_sum: rescale(&s.chosen_sum),
                    recruits: s.recruits,
                })
                .collect(),
            scale,
        }
    }
}

pub fn log_likelihood(sample: &RdsSample, specs: &[CovariateSpec], beta: &[f64]) -> Result<f64> {
    Ok(RecruitmentData::compile(sample, specs)?.evaluate(beta)?.0)
}

pub fn log_likelihood_gradient(
    sample: &RdsSample,
    specs: &[CovariateSpec],
    beta: &[f64],
) -> Result<Vec<f64>> {
    Ok(RecruitmentData::compile(sample, specs)?.evaluate(beta)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub covariates: Vec<String>,
    pub beta_hat: Vec<f64>,
    /// `exp(beta_hat[0])` for one-covariate DR fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_hat: Option<f64>,
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub identifiability_warnings: Vec<String>,
    pub method: OptimMethod,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub init: Option<Vec<f64>>,
    pub standardize: bool,
    pub optim: OptimOptions,
}

pub fn fit_mdr(
    sample: &RdsSample,
    specs: &[CovariateSpec],
    options: &FitOptions,
) -> Result<FitResult> {
    let data = RecruitmentData::compile(sample, specs)?;
    fit_compiled(&data, options)
}

/// Fits already compiled likelihood terms.
pub fn fit_compiled(data: &RecruitmentData, options: &FitOptions) -> Result<FitResult> {
    let k = data.dimension();
    let init = options.init.clone().unwrap_or_else(|| vec![0.0; k]);
    if init.len() != k {
        return Err(Error::Config(format!(
            "initial beta has {} entries, expected {k}",
            init.len()
        )));
    }
    let working = if options.standardize {
        data.standardized()
    } else {
        data.clone()
    };
    let start: Vec<f64> = init
        .iter()
        .zip(&working.scale)
        .map(|(b, s)| b * s)
        .collect();
    let r = maximize(|b| working.evaluate(b), &start, &options.optim)?;
    let beta_hat: Vec<f64> = r.x.iter().zip(&working.scale).map(|(b, s)| b / s).collect();
    let (log_lik, gradient) = data.evaluate(&beta_hat)?;
    Ok(FitResult {
        covariates: data.names.clone(),
        beta_hat,
        phi_hat: None,
        log_lik,
        converged: r.converged,
        iterations: r.iterations,
        gradient_norm: gradient.iter().fold(0.0, |m, g: &f64| m.max(g.abs())),
        identifiability_warnings: data.identifiability_warnings(),
        method: r.method,
    })
}

/// DR fit: one node covariate `attr`, reported as `phi = exp(beta)`.
pub fn fit_dr(sample: &RdsSample, attr: &str) -> Result<FitResult> {
    for m in &sample.members {
        let values = std::iter::once(m.attr(attr)).chain(m.alters.iter().map(|a| a.attr(attr)));
        for v in values {
            match v {
                Some(x) if x == 0.0 || x == 1.0 => {}
                Some(x) => {
                    return Err(Error::Data(format!(
                        "attribute `{attr}` is not binary ({x}) for member `{}`",
                        m.id
                    )))
                }
                None => return Err(Error::UnknownAttribute(attr.to_string())),
            }
        }
    }
    let mut fit = fit_mdr(
        sample,
        &[CovariateSpec::recruit_attr(attr, attr)],
        &FitOptions::default(),
    )?;
    fit.phi_hat = Some(fit.beta_hat[0].exp());
    Ok(fit)
}

/// Per-member covariates needed for stationary weights: the member's own
/// node covariates and the covariates of every reported alter.
#[derive(Debug, Clone)]
pub struct WeightDesign {
    own: Vec<Vec<f64>>,
    alters: Vec<Vec<Vec<f64>>>,
    k1: usize,
}

impl WeightDesign {
    pub fn compile(sample: &RdsSample, specs: &[CovariateSpec]) -> Result<Self> {
        validate_covariates(specs)?;
        let k1 = specs.iter().take_while(|c| c.is_node()).count();
        let mut own = Vec::with_capacity(sample.len());
        let mut alters = Vec::with_capacity(sample.len());
        for m in &sample.members {
            if !m.has_ego_report() {
                return Err(Error::Weight(format!(
                    "member `{}` has no ego-network report",
                    m.id
                )));
            }
            own.push(
                specs[..k1]
                    .iter()
                    .map(|c| c.node_value(m))
                    .collect::<Result<Vec<_>>>()?,
            );
            alters.push(
                m.alters
                    .iter()
                    .map(|a| covariates_for(specs, m, a))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(Self { own, alters, k1 })
    }

    /// `ln sum_l exp(x_il'beta + r_i'alpha)` for every member.
    pub fn log_weights(&self, beta: &[f64]) -> Vec<f64> {
        let alpha = &beta[..self.k1];
        self.own
            .iter()
            .zip(&self.alters)
            .map(|(r, xs)| {
                let base: f64 = r.iter().zip(alpha).map(|(x, a)| x * a).sum();
                let logs: Vec<f64> = xs
                    .iter()
                    .map(|x| x.iter().zip(beta).map(|(v, b)| v * b).sum())
                    .collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                base + max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
            })
            .collect()
    }
}

/// Per-member log of `sum_l exp(x_il'beta + r_i'alpha)` over the member's
/// reported alters, where `r_i` are the member's own node covariates.
pub fn member_log_weights(
    sample: &RdsSample,
    specs: &[CovariateSpec],
    beta: &[f64],
) -> Result<Vec<f64>> {
    if beta.len() != specs.len() {
        return Err(Error::Config(format!(
            "beta has {} entries for {} covariates",
            beta.len(),
            specs.len()
        )));
    }
    Ok(WeightDesign::compile(sample, specs)?.log_weights(beta))
}
