//! Recruitment models (random, DR, MDR), their transition rows and
//! stationary distributions, and the network-level MDR strength metric.
//!
//! Random and DR recruitment are evaluated as special cases of the MDR
//! softmax: random recruitment has no covariates, DR has one node covariate
//! with coefficient `ln(phi)`.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, TieTable};

/// Read access to named numeric attributes of a node, a sample member or a
/// reported alter.
pub trait Attributes {
    fn attr(&self, name: &str) -> Option<f64>;

    /// Population index, when the record is tied to a known network node.
    fn node_index(&self) -> Option<usize> {
        None
    }
}

/// A population node seen through [`Attributes`].
#[derive(Clone, Copy)]
pub struct NodeRef<'a> {
    pub pop: &'a Population,
    pub index: usize,
}

impl Attributes for NodeRef<'_> {
    fn attr(&self, name: &str) -> Option<f64> {
        self.pop.value(self.index, name)
    }

    fn node_index(&self) -> Option<usize> {
        Some(self.index)
    }
}

impl Attributes for BTreeMap<String, f64> {
    fn attr(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

/// Built-in covariate catalogue. The first two kinds describe the
/// potential recruit only; the rest are symmetric functions of the dyad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Covariate {
    AttributeOfRecruit {
        attr: String,
    },
    ProductOfRecruitAttributes {
        attrs: Vec<String>,
    },
    AbsAgeDifference {
        #[serde(default = "age_attr")]
        attr: String,
    },
    IndicatorSameAttribute {
        attr: String,
    },
    CustomTable {
        table: String,
    },
}

fn age_attr() -> String {
    "age".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(flatten)]
    pub covariate: Covariate,
}

impl CovariateSpec {
    pub fn recruit_attr(name: &str, attr: &str) -> Self {
        Self {
            name: name.into(),
            covariate: Covariate::AttributeOfRecruit { attr: attr.into() },
        }
    }

    pub fn recruit_product(name: &str, attrs: &[&str]) -> Self {
        Self {
            name: name.into(),
            covariate: Covariate::ProductOfRecruitAttributes {
                attrs: attrs.iter().map(|a| a.to_string()).collect(),
            },
        }
    }

    pub fn abs_difference(name: &str, attr: &str) -> Self {
        Self {
            name: name.into(),
            covariate: Covariate::AbsAgeDifference { attr: attr.into() },
        }
    }

    pub fn same_attr(name: &str, attr: &str) -> Self {
        Self {
            name: name.into(),
            covariate: Covariate::IndicatorSameAttribute { attr: attr.into() },
        }
    }

    pub fn custom_table(name: &str, table: &str) -> Self {
        Self {
            name: name.into(),
            covariate: Covariate::CustomTable {
                table: table.into(),
            },
        }
    }

    /// Node covariates depend on the potential recruit alone.
    pub fn is_node(&self) -> bool {
        matches!(
            self.covariate,
            Covariate::AttributeOfRecruit { .. } | Covariate::ProductOfRecruitAttributes { .. }
        )
    }

    /// Attributes this covariate reads from nodes or alter records.
    pub fn attributes(&self) -> Vec<&str> {
        match &self.covariate {
            Covariate::AttributeOfRecruit { attr }
            | Covariate::AbsAgeDifference { attr }
            | Covariate::IndicatorSameAttribute { attr } => vec![attr.as_str()],
            Covariate::ProductOfRecruitAttributes { attrs } => {
                attrs.iter().map(String::as_str).collect()
            }
            Covariate::CustomTable { .. } => vec![],
        }
    }

    /// Value for a single node (node covariates only).
    pub fn node_value(&self, node: &dyn Attributes) -> Result<f64> {
        let get = |a: &str| {
            node.attr(a)
                .ok_or_else(|| Error::UnknownAttribute(a.to_string()))
        };
        match &self.covariate {
            Covariate::AttributeOfRecruit { attr } => get(attr),
            Covariate::ProductOfRecruitAttributes { attrs } => {
                attrs.iter().try_fold(1.0, |acc, a| Ok(acc * get(a)?))
            }
            _ => Err(Error::Config(format!(
                "covariate `{}` is not a node covariate",
                self.name
            ))),
        }
    }

    /// Value of the covariate for recruiter `ego` and potential recruit `alter`.
    pub fn value(
        &self,
        ego: &dyn Attributes,
        alter: &dyn Attributes,
        tables: &BTreeMap<String, TieTable>,
    ) -> Result<f64> {
        let get = |who: &dyn Attributes, a: &str| {
            who.attr(a)
                .ok_or_else(|| Error::UnknownAttribute(a.to_string()))
        };
        match &self.covariate {
            Covariate::AttributeOfRecruit { .. } | Covariate::ProductOfRecruitAttributes { .. } => {
                self.node_value(alter)
            }
            Covariate::AbsAgeDifference { attr } => Ok((get(ego, attr)? - get(alter, attr)?).abs()),
            Covariate::IndicatorSameAttribute { attr } => {
                Ok(f64::from(u8::from(get(ego, attr)? == get(alter, attr)?)))
            }
            Covariate::CustomTable { table } => {
                if let (Some(i), Some(j), Some(t)) =
                    (ego.node_index(), alter.node_index(), tables.get(table))
                {
                    return Ok(t.get(i, j));
                }
                alter.attr(table).ok_or_else(|| {
                    Error::Data(format!(
                        "tie value `{table}` unavailable for covariate `{}`",
                        self.name
                    ))
                })
            }
        }
    }
}

/// Covariate list plus coefficients. Node covariates come first, so the
/// node coefficients form a prefix of `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdrModel {
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub beta: Vec<f64>,
}

impl MdrModel {
    pub fn new(covariates: Vec<CovariateSpec>, beta: Vec<f64>) -> Result<Self> {
        let m = Self { covariates, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        validate_covariates(&self.covariates)?;
        if self.beta.len() != self.covariates.len() {
            return Err(Error::Config(format!(
                "beta has {} entries for {} covariates",
                self.beta.len(),
                self.covariates.len()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta must be finite".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.covariates.iter().take_while(|c| c.is_node()).count()
    }

    /// Coefficients of the node covariates.
    pub fn alpha(&self) -> &[f64] {
        &self.beta[..self.node_count()]
    }

    /// Coefficients of the tie covariates.
    pub fn gamma(&self) -> &[f64] {
        &self.beta[self.node_count()..]
    }
}

/// Checks names are unique and node covariates precede tie covariates.
pub fn validate_covariates(covariates: &[CovariateSpec]) -> Result<()> {
    let k1 = covariates.iter().take_while(|c| c.is_node()).count();
    if covariates[k1..].iter().any(CovariateSpec::is_node) {
        return Err(Error::Config(
            "node covariates must precede tie covariates".into(),
        ));
    }
    let mut names: Vec<&str> = covariates.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("covariate names must be unique".into()));
    }
    Ok(())
}

/// Between-group differential recruitment on a binary attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrModel {
    pub attr: String,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RecruitmentModel {
    Random,
    Dr(DrModel),
    Mdr(MdrModel),
}

impl RecruitmentModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RecruitmentModel::Random => Ok(()),
            RecruitmentModel::Dr(dr) if !(dr.phi > 0.0 && dr.phi.is_finite()) => Err(
                Error::Config(format!("phi must be positive, got {}", dr.phi)),
            ),
            RecruitmentModel::Dr(_) => Ok(()),
            RecruitmentModel::Mdr(m) => m.validate(),
        }
    }

    /// The equivalent MDR parameterisation.
    pub fn as_mdr(&self) -> Cow<'_, MdrModel> {
        match self {
            RecruitmentModel::Random => Cow::Owned(MdrModel {
                covariates: vec![],
                beta: vec![],
            }),
            RecruitmentModel::Dr(dr) => Cow::Owned(MdrModel {
                covariates: vec![CovariateSpec::recruit_attr(&dr.attr, &dr.attr)],
                beta: vec![dr.phi.ln()],
            }),
            RecruitmentModel::Mdr(m) => Cow::Borrowed(m),
        }
    }
}

/// Scenario MDR strength levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdrLevel {
    None,
    Moderate,
    High,
}

impl MdrLevel {
    /// Coefficients for (recruit age, recruit outcome, age x outcome, age gap).
    pub fn beta(self) -> [f64; 4] {
        match self {
            MdrLevel::None => [0.0, 0.0, 0.0, 0.0],
            MdrLevel::Moderate => [0.126, 0.064, 0.010, -0.017],
            MdrLevel::High => [0.230, 0.031, 0.018, -0.003],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MdrLevel::None => "none",
            MdrLevel::Moderate => "moderate",
            MdrLevel::High => "high",
        }
    }

    pub fn model(self) -> MdrModel {
        MdrModel {
            covariates: scenario_covariates(),
            beta: self.beta().to_vec(),
        }
    }
}

/// Recruit age, recruit outcome, their product, and absolute age difference.
pub fn scenario_covariates() -> Vec<CovariateSpec> {
    vec![
        CovariateSpec::recruit_attr("age", "age"),
        CovariateSpec::recruit_attr("z", "z"),
        CovariateSpec::recruit_product("age_z", &["age", "z"]),
        CovariateSpec::abs_difference("age_gap", "age"),
    ]
}

/// Covariate vector `x_ij` for recruiter `i` and potential recruit `j`.
pub fn covariate_vector(
    pop: &Population,
    model: &MdrModel,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    for idx in [i, j] {
        if idx >= pop.n() {
            return Err(Error::Index {
                index: idx,
                n: pop.n(),
            });
        }
    }
    if i == j {
        return Err(Error::Data(format!(
            "covariate vector needs distinct nodes, got {i} twice"
        )));
    }
    let ego = NodeRef { pop, index: i };
    let alter = NodeRef { pop, index: j };
    model
        .covariates
        .iter()
        .map(|c| c.value(&ego, &alter, pop.tie_tables()))
        .collect()
}

/// Log-scale recruitment scores `x_ij'beta` for every neighbour `j` of `i`,
/// aligned with `pop.neighbors(i)`.
fn row_scores(pop: &Population, model: &MdrModel, i: usize) -> Result<Vec<f64>> {
    let ego = NodeRef { pop, index: i };
    pop.neighbors(i)
        .iter()
        .map(|&j| {
            let alter = NodeRef { pop, index: j };
            model
                .covariates
                .iter()
                .zip(&model.beta)
                .try_fold(0.0, |acc, (c, b)| {
                    Ok(acc + b * c.value(&ego, &alter, pop.tie_tables())?)
                })
        })
        .collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Recruitment probabilities from one node. `stalled` is set when every
/// neighbour is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub probabilities: Vec<(usize, f64)>,
    pub stalled: bool,
}

fn softmax_row(
    neighbors: &[usize],
    scores: &[f64],
    exclude: &dyn Fn(usize) -> bool,
) -> TransitionRow {
    let (nodes, logs): (Vec<usize>, Vec<f64>) = neighbors
        .iter()
        .zip(scores)
        .filter(|(j, _)| !exclude(**j))
        .map(|(&j, &s)| (j, s))
        .unzip();
    if nodes.is_empty() {
        return TransitionRow {
            probabilities: vec![],
            stalled: true,
        };
    }
    let lse = log_sum_exp(&logs);
    TransitionRow {
        probabilities: nodes
            .into_iter()
            .zip(logs)
            .map(|(j, s)| (j, (s - lse).exp()))
            .collect(),
        stalled: false,
    }
}

/// Transition probabilities from `i` over neighbours not in `exclude`.
pub fn transition_row(
    pop: &Population,
    model: &RecruitmentModel,
    i: usize,
    exclude: &dyn Fn(usize) -> bool,
) -> Result<TransitionRow> {
    if i >= pop.n() {
        return Err(Error::Index {
            index: i,
            n: pop.n(),
        });
    }
    let mdr = model.as_mdr();
    mdr.validate()?;
    let scores = row_scores(pop, &mdr, i)?;
    Ok(softmax_row(pop.neighbors(i), &scores, exclude))
}

/// Unnormalised stationary weights. Entries are `exp(log weight - log_scale)`;
/// `kappa` is their sum, so `weights[i] / kappa` is the stationary probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub weights: Vec<f64>,
    pub log_scale: f64,
    pub kappa: f64,
    /// False when the network has several components; the distribution is
    /// then one of many stationary distributions.
    pub connected: bool,
}

impl Stationary {
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.kappa).collect()
    }
}

/// A population with every directed recruitment score precomputed.
pub struct ScoredNetwork<'a> {
    pop: &'a Population,
    node_scores: Vec<f64>,
    scores: Vec<Vec<f64>>,
}

impl<'a> ScoredNetwork<'a> {
    pub fn new(pop: &'a Population, model: &RecruitmentModel) -> Result<Self> {
        model.validate()?;
        let mdr = model.as_mdr();
        let k1 = mdr.node_count();
        let node_scores = (0..pop.n())
            .map(|i| {
                let node = NodeRef { pop, index: i };
                mdr.covariates[..k1]
                    .iter()
                    .zip(mdr.alpha())
                    .try_fold(0.0, |acc, (c, a)| Ok(acc + a * c.node_value(&node)?))
            })
            .collect::<Result<Vec<f64>>>()?;
        let scores = (0..pop.n())
            .map(|i| row_scores(pop, &mdr, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pop,
            node_scores,
            scores,
        })
    }

    pub fn population(&self) -> &Population {
        self.pop
    }

    /// Scores `x_ij'beta` aligned with the neighbours of `i`.
    pub fn scores(&self, i: usize) -> &[f64] {
        &self.scores[i]
    }

    pub fn row(&self, i: usize, exclude: &dyn Fn(usize) -> bool) -> TransitionRow {
        softmax_row(self.pop.neighbors(i), &self.scores[i], exclude)
    }

    /// Closed-form stationary weights `sum_j y_ij exp(x_ij'beta + r_i'alpha)`.
    pub fn stationary(&self) -> Result<Stationary> {
        let n = self.pop.n();
        if let Some(i) = (0..n).find(|&i| self.pop.neighbors(i).is_empty()) {
            return Err(Error::Data(format!(
                "node {i} is isolated; stationary distribution undefined"
            )));
        }
        // weight_i = exp(a_i + m_i - G) * sum_j exp(s_ij - m_i), with m_i the row max.
        let row_max: Vec<f64> = self
            .scores
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let log_scale = (0..n)
            .map(|i| self.node_scores[i] + row_max[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let inner: f64 = self.scores[i].iter().map(|s| (s - row_max[i]).exp()).sum();
                (self.node_scores[i] + row_max[i] - log_scale).exp() * inner
            })
            .collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite stationary weight".into()));
        }
        let kappa = weights.iter().sum();
        Ok(Stationary {
            weights,
            log_scale,
            kappa,
            connected: self.pop.component_count() == 1,
        })
    }

    /// Network average of the per-node recruitment imbalance.
    pub fn phi_mdr(&self) -> f64 {
        let n = self.pop.n();
        if n == 0 {
            return 1.0;
        }
        (0..n)
            .map(|i| phi_from_log_weights(&self.scores[i]))
            .sum::<f64>()
            / n as f64
    }
}

pub fn stationary(pop: &Population, model: &RecruitmentModel) -> Result<Stationary> {
    ScoredNetwork::new(pop, model)?.stationary()
}

pub fn phi_mdr(pop: &Population, model: &RecruitmentModel) -> Result<f64> {
    Ok(ScoredNetwork::new(pop, model)?.phi_mdr())
}

/// Mean of the ratios `P_k / P_j >= 1` over ordered pairs `k != j`; 1 for
/// fewer than two alternatives.
pub fn phi_from_probabilities(probabilities: &[f64]) -> f64 {
    imbalance(probabilities.len(), |k, j| {
        probabilities[k] / probabilities[j]
    })
}

/// As [`phi_from_probabilities`], from log-scale scores.
pub fn phi_from_log_weights(scores: &[f64]) -> f64 {
    imbalance(scores.len(), |k, j| (scores[k] - scores[j]).exp())
}

fn imbalance(d: usize, ratio: impl Fn(usize, usize) -> f64) -> f64 {
    if d <= 1 {
        return 1.0;
    }
    let (mut total, mut count) = (0.0, 0usize);
    for k in 0..d {
        for j in 0..d {
            if k == j {
                continue;
            }
            let r = ratio(k, j);
            if r >= 1.0 {
                total += r;
                count += 1;
            }
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::AttrColumn;

    /// Recruiter A with potential recruits B (edu 1, age gap 5) and C (edu 0, gap 10).
    fn figure_network() -> Population {
        Population::from_edges(vec![30.0, 35.0, 40.0], vec![0, 0, 0], &[(0, 1), (0, 2)])
            .unwrap()
            .with_attr("edu", AttrColumn::Numeric(vec![0.0, 1.0, 0.0]))
            .unwrap()
    }

    fn figure_model() -> RecruitmentModel {
        RecruitmentModel::Mdr(
            MdrModel::new(
                vec![
                    CovariateSpec::recruit_attr("edu", "edu"),
                    CovariateSpec::abs_difference("age_gap", "age"),
                ],
                vec![0.5, -0.14],
            )
            .unwrap(),
        )
    }

    #[test]
    fn figure_covariates_and_ratio() {
        let pop = figure_network();
        let RecruitmentModel::Mdr(m) = figure_model() else {
            unreachable!()
        };
        assert_eq!(covariate_vector(&pop, &m, 0, 1).unwrap(), vec![1.0, 5.0]);
        assert_eq!(covariate_vector(&pop, &m, 0, 2).unwrap(), vec![0.0, 10.0]);
        // tie component is symmetric, node component follows the recruit
        assert_eq!(covariate_vector(&pop, &m, 1, 0).unwrap(), vec![0.0, 5.0]);
        let row = transition_row(&pop, &figure_model(), 0, &|_| false).unwrap();
        let p: BTreeMap<usize, f64> = row.probabilities.into_iter().collect();
        assert!((p[&1] / p[&2] - 1.2f64.exp()).abs() < 1e-12);
        assert!((p[&1] / p[&2] - 3.3201).abs() < 1e-3);
        assert!(covariate_vector(&pop, &m, 1, 1).is_err());
    }

    #[test]
    fn zero_beta_is_uniform() {
        let pop = Population::from_edges(
            vec![20.0, 30.0, 40.0, 50.0],
            vec![0, 1, 0, 1],
            &[(0, 1), (0, 2), (0, 3)],
        )
        .unwrap();
        let model = RecruitmentModel::Mdr(MdrLevel::None.model());
        let row = transition_row(&pop, &model, 0, &|_| false).unwrap();
        for (_, p) in row.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dr_row_by_hand() {
        let pop =
            Population::from_edges(vec![20.0; 4], vec![0, 1, 0, 0], &[(0, 1), (0, 2), (0, 3)])
                .unwrap();
        let model = RecruitmentModel::Dr(DrModel {
            attr: "z".into(),
            phi: 2.0,
        });
        let row = transition_row(&pop, &model, 0, &|_| false).unwrap();
        let probs: Vec<f64> = row.probabilities.iter().map(|p| p.1).collect();
        for (got, want) in probs.iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn exclusion_renormalises_and_stalls() {
        let pop = Population::from_edges(vec![20.0; 3], vec![0; 3], &[(0, 1), (0, 2)]).unwrap();
        let row = transition_row(&pop, &RecruitmentModel::Random, 0, &|j| j == 1).unwrap();
        assert_eq!(row.probabilities, vec![(2, 1.0)]);
        let row = transition_row(&pop, &RecruitmentModel::Random, 0, &|_| true).unwrap();
        assert!(row.stalled && row.probabilities.is_empty());
    }

    #[test]
    fn zero_beta_weights_are_degrees() {
        let pop = Population::from_edges(
            vec![20.0, 30.0, 40.0, 50.0],
            vec![0, 1, 0, 1],
            &[(0, 1), (0, 2), (0, 3), (1, 2)],
        )
        .unwrap();
        let s = stationary(&pop, &RecruitmentModel::Mdr(MdrLevel::None.model())).unwrap();
        assert_eq!(s.weights, vec![3.0, 2.0, 2.0, 1.0]);
        assert_eq!(s.kappa, 8.0);
        assert!(s.connected);
    }

    #[test]
    fn isolated_node_has_no_stationary() {
        let pop = Population::from_edges(vec![20.0; 3], vec![0; 3], &[(0, 1)]).unwrap();
        assert!(stationary(&pop, &RecruitmentModel::Random).is_err());
    }

    #[test]
    fn phi_worked_example() {
        let phi = phi_from_probabilities(&[0.6, 0.3, 0.1]);
        assert!((phi - 11.0 / 3.0).abs() < 1e-9);
        let logs: Vec<f64> = [0.6f64, 0.3, 0.1].iter().map(|p| p.ln()).collect();
        assert!((phi_from_log_weights(&logs) - 3.6667).abs() < 1e-4);
        assert_eq!(phi_from_probabilities(&[1.0]), 1.0);
        assert_eq!(phi_from_probabilities(&[0.25; 4]), 1.0);
    }

    #[test]
    fn model_validation() {
        let bad = MdrModel::new(
            vec![
                CovariateSpec::abs_difference("gap", "age"),
                CovariateSpec::recruit_attr("age", "age"),
            ],
            vec![0.0, 0.0],
        );
        assert!(bad.is_err());
        assert!(MdrModel::new(scenario_covariates(), vec![0.0]).is_err());
        let m = MdrLevel::Moderate.model();
        assert_eq!(m.alpha(), &[0.126, 0.064, 0.010]);
        assert_eq!(m.gamma(), &[-0.017]);
    }

    #[test]
    fn model_json_shape() {
        let m = MdrLevel::High.model();
        let json = serde_json::to_string(&RecruitmentModel::Mdr(m.clone())).unwrap();
        assert!(json.contains("\"kind\":\"attribute-of-recruit\""));
        assert!(json.contains("\"kind\":\"abs-age-difference\""));
        let back: RecruitmentModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, RecruitmentModel::Mdr(m));
    }

    #[test]
    fn custom_table_values() {
        let mut t = TieTable::new();
        t.insert(0, 1, 3.0).unwrap();
        let pop = Population::from_edges(vec![20.0; 3], vec![0; 3], &[(0, 1), (0, 2)])
            .unwrap()
            .with_tie_table("meet", t)
            .unwrap();
        let m =
            MdrModel::new(vec![CovariateSpec::custom_table("meet", "meet")], vec![1.0]).unwrap();
        assert_eq!(covariate_vector(&pop, &m, 1, 0).unwrap(), vec![3.0]);
        assert_eq!(covariate_vector(&pop, &m, 0, 2).unwrap(), vec![0.0]);
    }
}
