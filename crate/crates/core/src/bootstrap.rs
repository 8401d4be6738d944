//! Bootstrap variance estimation.
//!
//! Three Markov-chain resamplers (Salganik, Lu, DR) draw chains of sample
//! members with replacement; the neighbourhood bootstraps resample
//! recruiters together with their recruits. A replicate is a multiset of
//! sample indices plus, for the neighbourhood variants, its recruiter
//! clusters so that recruitment coefficients can be refitted.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    ego_units, ii_units, EstimationFrame, EstimatorKind, HomogeneousPolicy, RecruitmentFits,
    WeightSource, Weights,
};
use crate::inference::{fit_compiled, FitOptions, RecruitmentData, WeightDesign};
use crate::optim::OptimOptions;
use crate::recruitment::Attributes;
use crate::rng::{stream, StreamRng};
use crate::sampler::RdsSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMethod {
    Salganik,
    Lu,
    Dr,
    Nb,
    NbFixed,
}

impl BootstrapMethod {
    pub fn label(self) -> &'static str {
        match self {
            BootstrapMethod::Salganik => "salganik",
            BootstrapMethod::Lu => "lu",
            BootstrapMethod::Dr => "dr",
            BootstrapMethod::Nb => "nb",
            BootstrapMethod::NbFixed => "nb-fixed",
        }
    }

    /// Resampler paired with each estimator in the scenario study.
    pub fn default_for(kind: EstimatorKind) -> Self {
        match kind {
            EstimatorKind::Vh | EstimatorKind::Sh => BootstrapMethod::Salganik,
            EstimatorKind::Lu => BootstrapMethod::Lu,
            EstimatorKind::DrIi | EstimatorKind::DrEgo => BootstrapMethod::Dr,
            EstimatorKind::MdrIi | EstimatorKind::MdrEgo => BootstrapMethod::NbFixed,
        }
    }

    fn keeps_clusters(self) -> bool {
        matches!(self, BootstrapMethod::Nb | BootstrapMethod::NbFixed)
    }
}

impl std::str::FromStr for BootstrapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BootstrapMethod::Salganik,
            BootstrapMethod::Lu,
            BootstrapMethod::Dr,
            BootstrapMethod::Nb,
            BootstrapMethod::NbFixed,
        ]
        .into_iter()
        .find(|m| m.label() == s)
        .ok_or_else(|| Error::Config(format!("unknown bootstrap method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub method: BootstrapMethod,
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Coupons per recruiter for the fixed-size neighbourhood bootstrap;
    /// defaults to the largest observed number of recruits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupons: Option<usize>,
}

fn default_alpha() -> f64 {
    0.05
}

impl BootstrapConfig {
    pub fn new(method: BootstrapMethod, replicates: usize, rng_seed: u64) -> Self {
        Self {
            method,
            replicates,
            alpha: 0.05,
            rng_seed,
            coupons: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "need at least 2 replicates, got {}",
                self.replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A recruiter drawn into a neighbourhood replicate with its retained recruits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub recruiter: usize,
    pub children: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        1 + self.children.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replicate {
    /// Sample indices, with repetition.
    pub members: Vec<usize>,
    /// Recruiter clusters (neighbourhood bootstraps only).
    pub clusters: Vec<Cluster>,
}

impl Replicate {
    fn from_clusters(clusters: Vec<Cluster>) -> Self {
        let members = clusters
            .iter()
            .flat_map(|c| std::iter::once(c.recruiter).chain(c.children.iter().copied()))
            .collect();
        Self { members, clusters }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Replicates plus the number of restarted draws.
#[derive(Debug, Clone)]
pub struct ReplicateSet {
    pub replicates: Vec<Replicate>,
    pub restarts: usize,
}

const MAX_ATTEMPTS: usize = 100;

fn pick<R: Rng + ?Sized>(items: &[usize], rng: &mut R) -> usize {
    items[rng.random_range(0..items.len())]
}

fn check_size(sample: &RdsSample) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::Method("empty sample".into()));
    }
    Ok(())
}

/// Chain that starts at a uniformly chosen member and moves from a member
/// with outcome `k` to a uniformly chosen member of `pools[k]`.
fn salganik_chain<R: Rng + ?Sized>(
    n: usize,
    z: &[u8],
    pools: &[Vec<usize>; 2],
    rng: &mut R,
) -> Option<Vec<usize>> {
    let mut cur = rng.random_range(0..n);
    let mut out = Vec::with_capacity(n);
    out.push(cur);
    while out.len() < n {
        let pool = &pools[z[cur] as usize];
        if pool.is_empty() {
            return None;
        }
        cur = pick(pool, rng);
        out.push(cur);
    }
    Some(out)
}

/// Members split by the outcome of their recruiter.
pub fn recruiter_status_pools(sample: &RdsSample) -> [Vec<usize>; 2] {
    let mut pools = [Vec::new(), Vec::new()];
    for (r, k) in sample.pairs() {
        pools[sample.members[r].z as usize].push(k);
    }
    pools
}

/// Two-state chain over groups: from group `k`, move to group `l` with
/// probability `matrix[k][l]`, then pick a member of `l` uniformly.
fn group_chain<R: Rng + ?Sized>(
    n: usize,
    groups: &[Vec<usize>; 2],
    label: &[u8],
    matrix: [[f64; 2]; 2],
    rng: &mut R,
) -> Vec<usize> {
    let mut cur = rng.random_range(0..n);
    let mut out = Vec::with_capacity(n);
    out.push(cur);
    while out.len() < n {
        let k = label[cur] as usize;
        let l = if rng.random::<f64>() < matrix[k][0] {
            0
        } else {
            1
        };
        cur = pick(&groups[l], rng);
        out.push(cur);
    }
    out
}

fn split_by(label: &[u8]) -> [Vec<usize>; 2] {
    let mut g = [Vec::new(), Vec::new()];
    for (i, &l) in label.iter().enumerate() {
        g[l as usize].push(i);
    }
    g
}

/// Group transition matrix of the Lu bootstrap: ego-network cross-group
/// proportions, with moves into an unsampled group suppressed.
pub fn lu_matrix(sample: &RdsSample) -> Result<[[f64; 2]; 2]> {
    let frame = EstimationFrame::new(sample)?;
    let mut a = [0.0; 2];
    let mut b = [0.0; 2];
    let mut count = [0usize; 2];
    for i in 0..frame.len() {
        let counts = frame.alter_z[i]
            .ok_or_else(|| Error::Method(format!("member {i} has no ego-network report")))?;
        let k = frame.z[i] as usize;
        a[k] += counts[1 - k] / frame.degree[i];
        b[k] += 1.0;
        count[k] += 1;
    }
    let mut m = [[0.0; 2]; 2];
    for k in 0..2 {
        if count[k] == 0 {
            m[k][k] = 1.0;
            continue;
        }
        let cross = if count[1 - k] == 0 { 0.0 } else { a[k] / b[k] };
        m[k][1 - k] = cross;
        m[k][k] = 1.0 - cross;
    }
    Ok(m)
}

/// Group transition matrix of the DR bootstrap: reported tie counts between
/// the `attr` groups, scaled by `phi` towards group 1 and row-normalised.
pub fn dr_matrix(sample: &RdsSample, attr: &str, phi: f64) -> Result<[[f64; 2]; 2]> {
    let mut ties = [[0.0f64; 2]; 2];
    let mut present = [false; 2];
    for m in &sample.members {
        let u = binary_attr(m, attr)?;
        present[u] = true;
        if !m.has_ego_report() {
            return Err(Error::Method(format!(
                "member `{}` has no ego-network report",
                m.id
            )));
        }
        for a in &m.alters {
            let v = a
                .attr(attr)
                .ok_or_else(|| Error::Method(format!("alter attribute `{attr}` missing")))?;
            ties[u][usize::from(v == 1.0)] += 1.0;
        }
    }
    if !(present[0] && present[1]) {
        return Err(Error::Method(format!(
            "one `{attr}` group is absent from the sample"
        )));
    }
    let mut m = [[0.0; 2]; 2];
    for k in 0..2 {
        let row = [ties[k][0], phi * ties[k][1]];
        let total = row[0] + row[1];
        if !(total > 0.0) {
            return Err(Error::Method(format!(
                "no reported ties from `{attr}` group {k}"
            )));
        }
        m[k] = [row[0] / total, row[1] / total];
    }
    Ok(m)
}

fn binary_attr(m: &crate::sampler::Member, attr: &str) -> Result<usize> {
    match m.attr(attr) {
        Some(v) if v == 0.0 || v == 1.0 => Ok(v as usize),
        other => Err(Error::Method(format!(
            "attribute `{attr}` of `{}` is not binary ({other:?})",
            m.id
        ))),
    }
}

/// Recruiters (members with at least one recruit) and everyone's recruits.
fn recruiter_structure(sample: &RdsSample) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let recruits = sample.recruits();
    let recruiters: Vec<usize> = (0..sample.len())
        .filter(|&i| !recruits[i].is_empty())
        .collect();
    if recruiters.is_empty() {
        return Err(Error::Method("sample has no recruiters".into()));
    }
    Ok((recruiters, recruits))
}

fn cluster_of(r: usize, recruits: &[Vec<usize>]) -> Cluster {
    Cluster {
        recruiter: r,
        children: recruits[r].clone(),
    }
}

/// Neighbourhood replicate: as many recruiters as the sample has, drawn
/// with replacement, each with all of its recruits.
pub fn nb_replicate<R: Rng + ?Sized>(
    recruiters: &[usize],
    recruits: &[Vec<usize>],
    rng: &mut R,
) -> Replicate {
    Replicate::from_clusters(
        (0..recruiters.len())
            .map(|_| cluster_of(pick(recruiters, rng), recruits))
            .collect(),
    )
}

/// Number of recruiters initially drawn by the fixed-size neighbourhood bootstrap.
pub fn initial_recruiters(n: usize, coupons: usize) -> usize {
    n.div_ceil(1 + coupons)
}

/// Fixed-size neighbourhood replicate. Draws `ceil(n / (1 + c))` clusters,
/// adds clusters while short, then trims the excess by pruning single
/// recruits from clusters that keep at least one, or by dropping whole
/// clusters no larger than the remaining excess. Returns `None` when the
/// excess cannot be trimmed.
pub fn nb_fixed_attempt<R: Rng + ?Sized>(
    recruiters: &[usize],
    recruits: &[Vec<usize>],
    n: usize,
    coupons: usize,
    rng: &mut R,
) -> Option<Replicate> {
    let mut clusters: Vec<Cluster> = (0..initial_recruiters(n, coupons))
        .map(|_| cluster_of(pick(recruiters, rng), recruits))
        .collect();
    let mut size: usize = clusters.iter().map(Cluster::size).sum();
    while size < n {
        let k = (n - size).div_ceil(1 + coupons);
        for _ in 0..k {
            let c = cluster_of(pick(recruiters, rng), recruits);
            size += c.size();
            clusters.push(c);
        }
    }
    let mut excess = size - n;
    while excess > 0 {
        let prunable: Vec<(usize, usize)> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.children.len() >= 2)
            .flat_map(|(ci, c)| (0..c.children.len()).map(move |j| (ci, j)))
            .collect();
        if !prunable.is_empty() {
            let (ci, j) = prunable[rng.random_range(0..prunable.len())];
            clusters[ci].children.remove(j);
            excess -= 1;
            continue;
        }
        let removable: Vec<usize> = (0..clusters.len())
            .filter(|&ci| clusters[ci].size() <= excess)
            .collect();
        if removable.is_empty() {
            return None;
        }
        let ci = removable[rng.random_range(0..removable.len())];
        excess -= clusters.remove(ci).size();
    }
    Some(Replicate::from_clusters(clusters))
}

/// Largest number of recruits of any member.
pub fn observed_coupons(sample: &RdsSample) -> usize {
    sample.recruits().iter().map(Vec::len).max().unwrap_or(0)
}

/// Draws `config.replicates` replicates; replicate `b` uses its own stream.
pub fn draw_replicates(
    sample: &RdsSample,
    config: &BootstrapConfig,
    fits: &RecruitmentFits,
) -> Result<ReplicateSet> {
    config.validate()?;
    check_size(sample)?;
    let n = sample.len();
    let b_count = config.replicates;
    let rng_for = |b: usize| -> StreamRng { stream(config.rng_seed, b as u64) };

    let drawn: Vec<Result<(Replicate, usize)>> = match config.method {
        BootstrapMethod::Salganik => {
            let z: Vec<u8> = sample.members.iter().map(|m| m.z).collect();
            let pools = recruiter_status_pools(sample);
            (0..b_count)
                .into_par_iter()
                .map(|b| {
                    let mut rng = rng_for(b);
                    for attempt in 0..MAX_ATTEMPTS {
                        if let Some(members) = salganik_chain(n, &z, &pools, &mut rng) {
                            return Ok((
                                Replicate {
                                    members,
                                    clusters: vec![],
                                },
                                attempt,
                            ));
                        }
                    }
                    Err(Error::Method(
                        "Salganik chain keeps reaching an empty recruiter class".into(),
                    ))
                })
                .collect()
        }
        BootstrapMethod::Lu | BootstrapMethod::Dr => {
            let (label, matrix) = if config.method == BootstrapMethod::Lu {
                (
                    sample.members.iter().map(|m| m.z).collect::<Vec<u8>>(),
                    lu_matrix(sample)?,
                )
            } else {
                let phi = fits
                    .dr_phi
                    .ok_or_else(|| Error::Config("DR bootstrap needs a fitted phi".into()))?;
                let label = sample
                    .members
                    .iter()
                    .map(|m| binary_attr(m, &fits.dr_attr).map(|u| u as u8))
                    .collect::<Result<Vec<u8>>>()?;
                (label, dr_matrix(sample, &fits.dr_attr, phi)?)
            };
            let groups = split_by(&label);
            (0..b_count)
                .into_par_iter()
                .map(|b| {
                    Ok((
                        Replicate {
                            members: group_chain(n, &groups, &label, matrix, &mut rng_for(b)),
                            clusters: vec![],
                        },
                        0,
                    ))
                })
                .collect()
        }
        BootstrapMethod::Nb => {
            let (recruiters, recruits) = recruiter_structure(sample)?;
            (0..b_count)
                .into_par_iter()
                .map(|b| Ok((nb_replicate(&recruiters, &recruits, &mut rng_for(b)), 0)))
                .collect()
        }
        BootstrapMethod::NbFixed => {
            let (recruiters, recruits) = recruiter_structure(sample)?;
            let coupons = config
                .coupons
                .unwrap_or_else(|| observed_coupons(sample))
                .max(1);
            (0..b_count)
                .into_par_iter()
                .map(|b| {
                    let mut rng = rng_for(b);
                    for attempt in 0..MAX_ATTEMPTS {
                        if let Some(r) =
                            nb_fixed_attempt(&recruiters, &recruits, n, coupons, &mut rng)
                        {
                            return Ok((r, attempt));
                        }
                    }
                    Err(Error::Replicate(MAX_ATTEMPTS))
                })
                .collect()
        }
    };
    let mut replicates = Vec::with_capacity(b_count);
    let mut restarts = 0;
    for d in drawn {
        let (r, extra) = d?;
        restarts += extra;
        replicates.push(r);
    }
    if config.method == BootstrapMethod::Salganik && 2 * restarts > b_count {
        return Err(Error::Method(format!(
            "{restarts} restarts for {b_count} Salganik replicates"
        )));
    }
    Ok(ReplicateSet {
        replicates,
        restarts,
    })
}

/// Bootstrap standard error and normal-quantile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when either bound was clamped to [0, 1].
    pub clamped: bool,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Standard deviation (n - 1 denominator) of the replicate estimates and
/// `point +/- z_{1 - alpha/2} se`, clamped to [0, 1].
pub fn normal_ci(estimates: &[f64], point: f64, alpha: f64) -> Result<Interval> {
    if estimates.len() < 2 {
        return Err(Error::Variance(format!(
            "{} defined replicate estimates; need at least 2",
            estimates.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let se = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let q = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let (lo, hi) = (point - q * se, point + q * se);
    let clamped = lo < 0.0 || hi > 1.0;
    Ok(Interval {
        se,
        lo: lo.max(0.0),
        hi: hi.min(1.0),
        clamped,
    })
}

/// Outcome of bootstrapping one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub estimator: EstimatorKind,
    pub method: BootstrapMethod,
    pub replicates: usize,
    pub point: Option<f64>,
    pub se: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub clamped: bool,
    pub undefined_replicates: usize,
    pub refit_failures: usize,
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-replicate estimates, with `None` for undefined replicates and
/// refit failures counted separately.
pub struct ReplicateEstimates {
    pub values: Vec<Option<f64>>,
    pub refit_failures: usize,
}

/// Evaluates the estimators of `kinds` on every replicate. MDR estimators
/// on neighbourhood replicates refit the coefficients per replicate,
/// starting from the full-sample fit.
pub fn evaluate_replicates(
    sample: &RdsSample,
    fits: &RecruitmentFits,
    kinds: &[EstimatorKind],
    set: &ReplicateSet,
    method: BootstrapMethod,
    policy: HomogeneousPolicy,
) -> Result<Vec<ReplicateEstimates>> {
    let frame = EstimationFrame::new(sample)?;
    let needs = |s: WeightSource| kinds.iter().any(|k| k.weight_source() == s);
    let degree = Weights::degree(sample)?.values;
    let dr = if needs(WeightSource::DrStationary) {
        let phi = fits
            .dr_phi
            .ok_or_else(|| Error::Config("DR estimator needs a fitted phi".into()))?;
        Some(Weights::dr(sample, &fits.dr_attr, phi)?.values)
    } else {
        None
    };
    let mdr = if needs(WeightSource::MdrStationary) {
        let beta = fits
            .mdr_beta
            .clone()
            .ok_or_else(|| Error::Config("MDR estimator needs fitted coefficients".into()))?;
        let design = WeightDesign::compile(sample, &fits.mdr_specs)?;
        let data = if method.keeps_clusters() {
            Some(RecruitmentData::compile(sample, &fits.mdr_specs)?)
        } else {
            None
        };
        Some((beta, design, data))
    } else {
        None
    };
    let refit_options = FitOptions {
        init: mdr.as_ref().map(|m| m.0.clone()),
        standardize: false,
        optim: OptimOptions {
            max_iterations: 200,
            ..OptimOptions::default()
        },
    };

    let evaluate = |rep: &Replicate| -> (Vec<Option<f64>>, bool) {
        let mut refit_failed = false;
        let mdr_weights: Option<Vec<f64>> = mdr.as_ref().and_then(|(beta, design, data)| {
            let beta_b = match data {
                Some(data) => {
                    let clusters: Vec<(usize, Vec<usize>)> = rep
                        .clusters
                        .iter()
                        .map(|c| (c.recruiter, c.children.clone()))
                        .collect();
                    match data
                        .restrict(&clusters)
                        .and_then(|d| fit_compiled(&d, &refit_options))
                    {
                        Ok(f) if f.beta_hat.iter().all(|b| b.is_finite()) => f.beta_hat,
                        _ => {
                            refit_failed = true;
                            return None;
                        }
                    }
                }
                None => beta.clone(),
            };
            Weights::from_log_weights(&design.log_weights(&beta_b), WeightSource::MdrStationary)
                .ok()
                .map(|w| w.values)
        });
        let values = kinds
            .iter()
            .map(|&kind| {
                let w = match kind.weight_source() {
                    WeightSource::Degree => Some(&degree),
                    WeightSource::DrStationary => dr.as_ref(),
                    WeightSource::MdrStationary => mdr_weights.as_ref(),
                }?;
                let r = if kind == EstimatorKind::Sh {
                    return None;
                } else if kind.is_ego() {
                    ego_units(&frame, w, &rep.members, policy)
                } else {
                    ii_units(&frame, w, &rep.members)
                };
                r.ok()
            })
            .collect();
        (values, refit_failed)
    };

    let per_rep: Vec<(Vec<Option<f64>>, bool)> = set.replicates.par_iter().map(evaluate).collect();
    let refit_failures = per_rep.iter().filter(|r| r.1).count();
    Ok((0..kinds.len())
        .map(|k| ReplicateEstimates {
            values: per_rep.iter().map(|r| r.0[k]).collect(),
            refit_failures,
        })
        .collect())
}

/// Full bootstrap for a set of estimators sharing one resampling method.
pub fn bootstrap(
    sample: &RdsSample,
    fits: &RecruitmentFits,
    kinds: &[EstimatorKind],
    points: &[Option<f64>],
    config: &BootstrapConfig,
    policy: HomogeneousPolicy,
) -> Result<Vec<BootstrapReport>> {
    let set = draw_replicates(sample, config, fits)?;
    let estimates = evaluate_replicates(sample, fits, kinds, &set, config.method, policy)?;
    Ok(kinds
        .iter()
        .zip(points)
        .zip(estimates)
        .map(|((&kind, &point), est)| {
            let defined: Vec<f64> = est.values.iter().flatten().copied().collect();
            let undefined = est.values.len()
                - defined.len()
                - if kind.weight_source() == WeightSource::MdrStationary {
                    est.refit_failures
                } else {
                    0
                };
            let refit_failures = if kind.weight_source() == WeightSource::MdrStationary {
                est.refit_failures
            } else {
                0
            };
            let mut report = BootstrapReport {
                estimator: kind,
                method: config.method,
                replicates: config.replicates,
                point,
                se: None,
                ci: None,
                clamped: false,
                undefined_replicates: undefined,
                refit_failures,
                restarts: set.restarts,
                error: None,
            };
            match point
                .ok_or_else(|| Error::Undefined("point estimate undefined".into()))
                .and_then(|p| normal_ci(&defined, p, config.alpha))
            {
                Ok(iv) => {
                    report.se = Some(iv.se);
                    report.ci = Some([iv.lo, iv.hi]);
                    report.clamped = iv.clamped;
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            report
        })
        .collect())
}

/// Checks a fixed-size replicate: exact size and every cluster keeps a recruit.
pub fn audit_fixed_replicate(rep: &Replicate, n: usize) -> bool {
    rep.len() == n && rep.clusters.iter().all(|c| !c.children.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use crate::sampler::{Alter, Member};
    use std::collections::BTreeMap;

    fn sample(spec: &[(u8, Option<usize>, &[u8])]) -> RdsSample {
        let mut members: Vec<Member> = Vec::new();
        for (k, &(z, recruiter, alters)) in spec.iter().enumerate() {
            let wave = recruiter.map(|r| members[r].wave + 1).unwrap_or(0);
            members.push(Member {
                id: format!("m{k}"),
                node: None,
                recruiter,
                wave,
                degree: alters.len(),
                z,
                values: BTreeMap::new(),
                alters: alters
                    .iter()
                    .map(|&a| Alter {
                        member: None,
                        values: BTreeMap::from([("z".to_string(), f64::from(a))]),
                    })
                    .collect(),
            });
        }
        RdsSample::new(members).unwrap()
    }

    /// Binary recruitment tree with alternating outcomes.
    fn tree(n: usize) -> RdsSample {
        let spec: Vec<(u8, Option<usize>, &[u8])> = (0..n)
            .map(|k| {
                (
                    (k % 2) as u8,
                    if k == 0 { None } else { Some((k - 1) / 2) },
                    &[0u8, 1, 1][..],
                )
            })
            .collect();
        sample(&spec)
    }

    #[test]
    fn ci_hand_values() {
        let iv = normal_ci(&[0.4, 0.5, 0.6], 0.5, 0.05).unwrap();
        assert!((iv.se - 0.1).abs() < 1e-12);
        assert!((iv.lo - 0.304).abs() < 1e-3 && (iv.hi - 0.696).abs() < 1e-3);
        assert!((Normal::standard().inverse_cdf(0.975) - 1.959964).abs() < 1e-6);
        let flat = normal_ci(&[0.3; 5], 0.3, 0.05).unwrap();
        assert_eq!((flat.se, flat.lo, flat.hi), (0.0, 0.3, 0.3));
        assert!(normal_ci(&[0.3], 0.3, 0.05).is_err());
        let clamped = normal_ci(&[0.0, 0.2], 0.05, 0.05).unwrap();
        assert!(clamped.clamped && clamped.lo == 0.0);
    }

    #[test]
    fn initial_recruiter_count() {
        assert_eq!(initial_recruiters(200, 2), 67);
        assert_eq!(initial_recruiters(9, 2), 3);
    }

    #[test]
    fn fixed_replicates_pass_audit() {
        let s = tree(40);
        let (recruiters, recruits) = recruiter_structure(&s).unwrap();
        let mut rng = from_seed(8);
        for _ in 0..500 {
            let r = (0..MAX_ATTEMPTS)
                .find_map(|_| nb_fixed_attempt(&recruiters, &recruits, 40, 2, &mut rng))
                .unwrap();
            assert!(audit_fixed_replicate(&r, 40));
        }
    }

    #[test]
    fn full_tree_needs_no_trimming() {
        // 1 + 2 + 4 = 7 members? use 3 recruiters each with 2 recruits: n = 9
        let s = sample(&[
            (0, None, &[0]),
            (0, Some(0), &[0]),
            (0, Some(0), &[0]),
            (0, None, &[0]),
            (0, Some(3), &[0]),
            (0, Some(3), &[0]),
            (0, None, &[0]),
            (0, Some(6), &[0]),
            (0, Some(6), &[0]),
        ]);
        let (recruiters, recruits) = recruiter_structure(&s).unwrap();
        let r = nb_fixed_attempt(&recruiters, &recruits, 9, 2, &mut from_seed(1)).unwrap();
        assert_eq!(r.clusters.len(), 3);
        assert!(r.clusters.iter().all(|c| c.children.len() == 2));
    }

    #[test]
    fn single_recruiter_nb_is_constant() {
        let s = sample(&[(1, None, &[0]), (0, Some(0), &[1]), (1, Some(0), &[1])]);
        let (recruiters, recruits) = recruiter_structure(&s).unwrap();
        let mut rng = from_seed(2);
        let first = nb_replicate(&recruiters, &recruits, &mut rng);
        for _ in 0..20 {
            assert_eq!(nb_replicate(&recruiters, &recruits, &mut rng), first);
        }
    }

    #[test]
    fn lu_matrix_rows_sum_to_one() {
        let s = tree(15);
        let m = lu_matrix(&s).unwrap();
        for row in m {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dr_matrix_hand_counts() {
        // u=0 member reports alters (0,1,1); u=1 member reports (0,0)
        let s = sample(&[(0, None, &[0, 1, 1]), (1, Some(0), &[0, 0])]);
        let m = dr_matrix(&s, "z", 1.0).unwrap();
        assert_eq!(m, [[1.0 / 3.0, 2.0 / 3.0], [1.0, 0.0]]);
        let m = dr_matrix(&s, "z", 2.0).unwrap();
        assert_eq!(m[0], [1.0 / 5.0, 4.0 / 5.0]);
    }

    #[test]
    fn salganik_constant_sample_has_zero_variance() {
        let s = sample(&[
            (1, None, &[1, 1]),
            (1, Some(0), &[1]),
            (1, Some(0), &[1]),
            (1, Some(1), &[1]),
        ]);
        let fits = RecruitmentFits::default();
        let config = BootstrapConfig::new(BootstrapMethod::Salganik, 50, 3);
        let reports = bootstrap(
            &s,
            &fits,
            &[EstimatorKind::Vh],
            &[Some(1.0)],
            &config,
            HomogeneousPolicy::Undefined,
        )
        .unwrap();
        assert_eq!(reports[0].se, Some(0.0));
    }

    #[test]
    fn replicates_are_reproducible() {
        let s = tree(31);
        let fits = RecruitmentFits::default();
        for method in [
            BootstrapMethod::Salganik,
            BootstrapMethod::Lu,
            BootstrapMethod::Nb,
            BootstrapMethod::NbFixed,
        ] {
            let config = BootstrapConfig::new(method, 20, 99);
            let a = draw_replicates(&s, &config, &fits).unwrap();
            let b = draw_replicates(&s, &config, &fits).unwrap();
            assert_eq!(a.replicates, b.replicates);
        }
    }
}
