//! Prevalence estimators.
//!
//! Every estimator is a ratio of weighted sums, so weights are only needed
//! up to a constant. The estimators are evaluated over a multiset of sample
//! indices ("units"), which lets bootstrap replicates reuse the per-member
//! quantities of the original sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::member_log_weights;
use crate::recruitment::{Attributes, CovariateSpec};
use crate::sampler::RdsSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    Degree,
    DrStationary,
    MdrStationary,
}

/// Per-member sampling weights `pi_i`, known up to a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub values: Vec<f64>,
    pub source: WeightSource,
}

impl Weights {
    pub fn new(values: Vec<f64>, source: WeightSource) -> Result<Self> {
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Weight(format!(
                "weight of member {i} is {w}; weights must be positive"
            )));
        }
        Ok(Self { values, source })
    }

    pub fn degree(sample: &RdsSample) -> Result<Self> {
        Self::new(
            sample.members.iter().map(|m| m.degree as f64).collect(),
            WeightSource::Degree,
        )
    }

    /// `phi^{u_i} (phi d_i1 + d_i0)` with alter counts on the binary attribute `attr`.
    pub fn dr(sample: &RdsSample, attr: &str, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Weight(format!("phi must be positive, got {phi}")));
        }
        let values = sample
            .members
            .iter()
            .map(|m| {
                let u = binary(m.attr(attr), attr, &m.id)?;
                let [d0, d1] = alter_counts(m.id.as_str(), &m.alters, attr)?;
                Ok(phi.powi(u as i32) * (phi * d1 + d0))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(values, WeightSource::DrStationary)
    }

    /// `sum_l exp(x_il'beta + r_i'alpha)` over each member's reported alters.
    pub fn mdr(sample: &RdsSample, specs: &[CovariateSpec], beta: &[f64]) -> Result<Self> {
        Self::from_log_weights(
            &member_log_weights(sample, specs, beta)?,
            WeightSource::MdrStationary,
        )
    }

    pub fn from_log_weights(logs: &[f64], source: WeightSource) -> Result<Self> {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Weight("log weights are not finite".into()));
        }
        Self::new(logs.iter().map(|l| (l - max).exp()).collect(), source)
    }
}

fn binary(v: Option<f64>, attr: &str, id: &str) -> Result<u8> {
    match v {
        Some(0.0) => Ok(0),
        Some(1.0) => Ok(1),
        Some(x) => Err(Error::Data(format!(
            "attribute `{attr}` of `{id}` is not binary ({x})"
        ))),
        None => Err(Error::Data(format!(
            "attribute `{attr}` missing for `{id}`"
        ))),
    }
}

fn alter_counts(id: &str, alters: &[crate::sampler::Alter], attr: &str) -> Result<[f64; 2]> {
    if alters.is_empty() {
        return Err(Error::Data(format!(
            "member `{id}` has no ego-network report"
        )));
    }
    let mut counts = [0.0; 2];
    for a in alters {
        counts[binary(a.attr(attr), attr, id)? as usize] += 1.0;
    }
    Ok(counts)
}

/// How the alter outcome counts were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataMode {
    /// Full neighbour lists of a simulated network.
    Network,
    /// Participants' ego-network reports.
    EgoReport,
}

/// What to do when a sample contains only one outcome group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomogeneousPolicy {
    #[default]
    Undefined,
    /// Return the limit: 0 when nobody sampled has the trait, 1 when everybody does.
    Limit,
}

/// Per-member quantities shared by all estimators.
#[derive(Debug, Clone)]
pub struct EstimationFrame {
    pub z: Vec<u8>,
    pub degree: Vec<f64>,
    /// `[d_i0, d_i1]`: alters by outcome, when an ego report exists.
    pub alter_z: Vec<Option<[f64; 2]>>,
    pub mode: DataMode,
}

impl EstimationFrame {
    pub fn new(sample: &RdsSample) -> Result<Self> {
        let alter_z = sample
            .members
            .iter()
            .map(|m| {
                if m.has_ego_report() {
                    alter_counts(&m.id, &m.alters, "z").map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            z: sample.members.iter().map(|m| m.z).collect(),
            degree: sample.members.iter().map(|m| m.degree as f64).collect(),
            alter_z,
            mode: if sample.members.iter().all(|m| m.node.is_some()) {
                DataMode::Network
            } else {
                DataMode::EgoReport
            },
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn all_units(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Cross-group mixing and mean degrees feeding the composition formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingStats {
    pub c01: f64,
    pub c10: f64,
    pub d0: f64,
    pub d1: f64,
}

impl MixingStats {
    /// `C01 D0 / (C01 D0 + C10 D1)`.
    pub fn prevalence(&self) -> Result<f64> {
        let (a, b) = (self.c01 * self.d0, self.c10 * self.d1);
        if !(a + b > 0.0) {
            return Err(Error::Undefined(
                "no cross-group ties or recruitments".into(),
            ));
        }
        Ok(a / (a + b))
    }
}

/// `sum v_i / pi_i / sum 1 / pi_i` over `units`.
pub fn hajek_units(values: &[f64], weights: &[f64], units: &[usize]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in units {
        if !(weights[i] > 0.0) {
            return Err(Error::Weight(format!(
                "weight of member {i} is {}",
                weights[i]
            )));
        }
        num += values[i] / weights[i];
        den += 1.0 / weights[i];
    }
    if !(den > 0.0) {
        return Err(Error::Undefined("no units".into()));
    }
    Ok(num / den)
}

pub fn hajek(values: &[f64], weights: &Weights) -> Result<f64> {
    let units: Vec<usize> = (0..values.len()).collect();
    hajek_units(values, &weights.values, &units)
}

/// Inverse-probability outcome mean over `units`.
pub fn ii_units(frame: &EstimationFrame, weights: &[f64], units: &[usize]) -> Result<f64> {
    let z: Vec<f64> = frame.z.iter().map(|&z| f64::from(z)).collect();
    hajek_units(&z, weights, units)
}

/// Group sums `A_k = sum_{z=k} d_i(1-k) / pi_i` and `N_k = sum_{z=k} 1 / pi_i`,
/// together with `B_k = sum_{z=k} d_i / pi_i`.
struct EgoSums {
    a: [f64; 2],
    b: [f64; 2],
    n: [f64; 2],
}

fn ego_sums(frame: &EstimationFrame, weights: &[f64], units: &[usize]) -> Result<EgoSums> {
    let mut s = EgoSums {
        a: [0.0; 2],
        b: [0.0; 2],
        n: [0.0; 2],
    };
    for &i in units {
        let counts = frame.alter_z[i]
            .ok_or_else(|| Error::Data(format!("member {i} has no alter outcome counts")))?;
        let k = frame.z[i] as usize;
        let w = 1.0 / weights[i];
        s.a[k] += counts[1 - k] * w;
        s.b[k] += frame.degree[i] * w;
        s.n[k] += w;
    }
    Ok(s)
}

fn homogeneous(n: [f64; 2], policy: HomogeneousPolicy) -> Option<Result<f64>> {
    let missing = match (n[0] > 0.0, n[1] > 0.0) {
        (true, true) => return None,
        (false, false) => return Some(Err(Error::Undefined("no units".into()))),
        (true, false) => 0.0,
        (false, true) => 1.0,
    };
    Some(match policy {
        HomogeneousPolicy::Limit => Ok(missing),
        HomogeneousPolicy::Undefined => {
            Err(Error::Undefined("only one outcome group sampled".into()))
        }
    })
}

/// Ego-network mixing estimates with weights `pi`.
pub fn ego_mixing_units(
    frame: &EstimationFrame,
    weights: &[f64],
    units: &[usize],
) -> Result<MixingStats> {
    let s = ego_sums(frame, weights, units)?;
    if s.n[0] == 0.0 || s.n[1] == 0.0 {
        return Err(Error::Undefined("only one outcome group sampled".into()));
    }
    Ok(MixingStats {
        c01: s.a[0] / s.b[0],
        c10: s.a[1] / s.b[1],
        d0: s.b[0] / s.n[0],
        d1: s.b[1] / s.n[1],
    })
}

/// Composition estimator with ego-network mixing estimates.
pub fn ego_units(
    frame: &EstimationFrame,
    weights: &[f64],
    units: &[usize],
    policy: HomogeneousPolicy,
) -> Result<f64> {
    let s = ego_sums(frame, weights, units)?;
    if let Some(r) = homogeneous(s.n, policy) {
        return r;
    }
    let (p0, p1) = (s.a[0] / s.n[0], s.a[1] / s.n[1]);
    if !(p0 + p1 > 0.0) {
        return Err(Error::Undefined("no cross-group ties reported".into()));
    }
    Ok(p0 / (p0 + p1))
}

/// Scaling constant linking the ego and inverse-probability estimators:
/// `sum z_i d_i0 / pi_i / sum (1 - z_i) d_i1 / pi_i`.
pub fn result2_constant_units(
    frame: &EstimationFrame,
    weights: &[f64],
    units: &[usize],
) -> Result<f64> {
    let s = ego_sums(frame, weights, units)?;
    if !(s.a[0] > 0.0) {
        return Err(Error::Undefined(
            "no cross-group ties reported by the untreated group".into(),
        ));
    }
    Ok(s.a[1] / s.a[0])
}

pub fn result2_constant(sample: &RdsSample, weights: &Weights) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    result2_constant_units(&frame, &weights.values, &frame.all_units())
}

pub fn vh(sample: &RdsSample) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ii_units(&frame, &Weights::degree(sample)?.values, &frame.all_units())
}

/// Recruitment-based mixing estimates.
pub fn sh_mixing(sample: &RdsSample) -> Result<MixingStats> {
    let mut from = [0.0f64; 2];
    let mut cross = [0.0f64; 2];
    for (r, k) in sample.pairs() {
        let zr = sample.members[r].z as usize;
        from[zr] += 1.0;
        if sample.members[k].z as usize != zr {
            cross[zr] += 1.0;
        }
    }
    let mut d = [0.0; 2];
    for g in 0..2 {
        let group: Vec<f64> = sample
            .members
            .iter()
            .filter(|m| m.z as usize == g)
            .map(|m| m.degree as f64)
            .collect();
        if group.is_empty() {
            return Err(Error::Undefined(format!("no sampled members with z = {g}")));
        }
        d[g] = group.len() as f64 / group.iter().map(|x| 1.0 / x).sum::<f64>();
        if from[g] == 0.0 {
            return Err(Error::Undefined(format!(
                "no recruitments from members with z = {g}"
            )));
        }
    }
    Ok(MixingStats {
        c01: cross[0] / from[0],
        c10: cross[1] / from[1],
        d0: d[0],
        d1: d[1],
    })
}

pub fn sh(sample: &RdsSample, policy: HomogeneousPolicy) -> Result<f64> {
    let n1 = sample.members.iter().filter(|m| m.z == 1).count() as f64;
    if let Some(r) = homogeneous([sample.len() as f64 - n1, n1], policy) {
        return r;
    }
    sh_mixing(sample)?.prevalence()
}

pub fn lu(sample: &RdsSample) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ego_units(
        &frame,
        &Weights::degree(sample)?.values,
        &frame.all_units(),
        HomogeneousPolicy::Undefined,
    )
}

pub fn dr_ii(sample: &RdsSample, attr: &str, phi: f64) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ii_units(
        &frame,
        &Weights::dr(sample, attr, phi)?.values,
        &frame.all_units(),
    )
}

pub fn dr_ego(sample: &RdsSample, attr: &str, phi: f64) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ego_units(
        &frame,
        &Weights::dr(sample, attr, phi)?.values,
        &frame.all_units(),
        HomogeneousPolicy::Undefined,
    )
}

pub fn mdr_ii(sample: &RdsSample, specs: &[CovariateSpec], beta: &[f64]) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ii_units(
        &frame,
        &Weights::mdr(sample, specs, beta)?.values,
        &frame.all_units(),
    )
}

pub fn mdr_ego(sample: &RdsSample, specs: &[CovariateSpec], beta: &[f64]) -> Result<f64> {
    let frame = EstimationFrame::new(sample)?;
    ego_units(
        &frame,
        &Weights::mdr(sample, specs, beta)?.values,
        &frame.all_units(),
        HomogeneousPolicy::Undefined,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Vh,
    Sh,
    Lu,
    DrIi,
    DrEgo,
    MdrIi,
    MdrEgo,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Vh,
        EstimatorKind::Sh,
        EstimatorKind::Lu,
        EstimatorKind::DrIi,
        EstimatorKind::DrEgo,
        EstimatorKind::MdrIi,
        EstimatorKind::MdrEgo,
    ];

    /// The six estimators compared in the scenario tables.
    pub const TABLE: [EstimatorKind; 6] = [
        EstimatorKind::Vh,
        EstimatorKind::Lu,
        EstimatorKind::DrIi,
        EstimatorKind::DrEgo,
        EstimatorKind::MdrIi,
        EstimatorKind::MdrEgo,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Vh => "vh",
            EstimatorKind::Sh => "sh",
            EstimatorKind::Lu => "lu",
            EstimatorKind::DrIi => "dr-ii",
            EstimatorKind::DrEgo => "dr-ego",
            EstimatorKind::MdrIi => "mdr-ii",
            EstimatorKind::MdrEgo => "mdr-ego",
        }
    }

    pub fn weight_source(self) -> WeightSource {
        match self {
            EstimatorKind::Vh | EstimatorKind::Sh | EstimatorKind::Lu => WeightSource::Degree,
            EstimatorKind::DrIi | EstimatorKind::DrEgo => WeightSource::DrStationary,
            EstimatorKind::MdrIi | EstimatorKind::MdrEgo => WeightSource::MdrStationary,
        }
    }

    pub fn is_ego(self) -> bool {
        matches!(
            self,
            EstimatorKind::Lu | EstimatorKind::DrEgo | EstimatorKind::MdrEgo
        )
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }
}

/// Fitted recruitment parameters needed by the DR and MDR estimators.
#[derive(Debug, Clone, Default)]
pub struct RecruitmentFits {
    pub dr_attr: String,
    pub dr_phi: Option<f64>,
    pub mdr_specs: Vec<CovariateSpec>,
    pub mdr_beta: Option<Vec<f64>>,
}

/// Point estimates for one sample, sharing weight computations.
pub struct Estimation<'a> {
    sample: &'a RdsSample,
    frame: EstimationFrame,
    fits: &'a RecruitmentFits,
    policy: HomogeneousPolicy,
}

impl<'a> Estimation<'a> {
    pub fn new(
        sample: &'a RdsSample,
        fits: &'a RecruitmentFits,
        policy: HomogeneousPolicy,
    ) -> Result<Self> {
        Ok(Self {
            sample,
            frame: EstimationFrame::new(sample)?,
            fits,
            policy,
        })
    }

    pub fn frame(&self) -> &EstimationFrame {
        &self.frame
    }

    pub fn weights(&self, source: WeightSource) -> Result<Weights> {
        match source {
            WeightSource::Degree => Weights::degree(self.sample),
            WeightSource::DrStationary => {
                let phi = self
                    .fits
                    .dr_phi
                    .ok_or_else(|| Error::Config("DR estimator needs a fitted phi".into()))?;
                Weights::dr(self.sample, &self.fits.dr_attr, phi)
            }
            WeightSource::MdrStationary => {
                let beta = self.fits.mdr_beta.as_ref().ok_or_else(|| {
                    Error::Config("MDR estimator needs fitted coefficients".into())
                })?;
                Weights::mdr(self.sample, &self.fits.mdr_specs, beta)
            }
        }
    }

    pub fn estimate(&self, kind: EstimatorKind) -> Result<f64> {
        if kind == EstimatorKind::Sh {
            return sh(self.sample, self.policy);
        }
        let w = self.weights(kind.weight_source())?;
        let units = self.frame.all_units();
        if kind.is_ego() {
            ego_units(&self.frame, &w.values, &units, self.policy)
        } else {
            ii_units(&self.frame, &w.values, &units)
        }
    }
}

/// One estimator's result, serialisable for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub estimate: Option<f64>,
    pub weight_source: WeightSource,
    pub data_mode: DataMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}
