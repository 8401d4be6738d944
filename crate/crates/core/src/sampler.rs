//! Respondent-driven sampling over a simulated population.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;
use crate::recruitment::{Attributes, RecruitmentModel, ScoredNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRule {
    Stationary,
    Uniform,
    Fixed(Vec<usize>),
}

/// What to do when every active recruiter has run out of unsampled neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StallRule {
    ReplaceSeed,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingDesign {
    pub n_target: usize,
    pub n_seeds: usize,
    pub coupons: usize,
    pub seed_rule: SeedRule,
    pub stall_rule: StallRule,
}

impl Default for SamplingDesign {
    fn default() -> Self {
        Self {
            n_target: 200,
            n_seeds: 7,
            coupons: 2,
            seed_rule: SeedRule::Stationary,
            stall_rule: StallRule::ReplaceSeed,
        }
    }
}

impl SamplingDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 || self.coupons == 0 {
            return Err(Error::Design(
                "need at least one seed and one coupon".into(),
            ));
        }
        if self.n_seeds > self.n_target {
            return Err(Error::Design(format!(
                "{} seeds exceed target size {}",
                self.n_seeds, self.n_target
            )));
        }
        if let SeedRule::Fixed(ids) = &self.seed_rule {
            if ids.len() != self.n_seeds {
                return Err(Error::Design(format!(
                    "{} fixed seeds listed, n_seeds is {}",
                    ids.len(),
                    self.n_seeds
                )));
            }
        }
        Ok(())
    }
}

/// One reported neighbour of a sample member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alter {
    /// Sample index of this alter when it is the member's recruiter or recruit.
    pub member: Option<usize>,
    pub values: BTreeMap<String, f64>,
}

impl Attributes for Alter {
    fn attr(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    /// Population index for simulated samples.
    pub node: Option<usize>,
    /// Sample index of the recruiter; `None` for seeds.
    pub recruiter: Option<usize>,
    pub wave: usize,
    pub degree: usize,
    pub z: u8,
    pub values: BTreeMap<String, f64>,
    /// Ego-network report; empty when the member gave none.
    pub alters: Vec<Alter>,
}

impl Member {
    pub fn is_seed(&self) -> bool {
        self.recruiter.is_none()
    }

    pub fn has_ego_report(&self) -> bool {
        !self.alters.is_empty()
    }
}

impl Attributes for Member {
    fn attr(&self, name: &str) -> Option<f64> {
        match name {
            "z" => Some(f64::from(self.z)),
            "degree" => Some(self.degree as f64),
            _ => self.values.get(name).copied(),
        }
    }

    fn node_index(&self) -> Option<usize> {
        self.node
    }
}

/// Members in recruitment order; every recruiter precedes its recruits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdsSample {
    pub members: Vec<Member>,
}

impl RdsSample {
    pub fn new(members: Vec<Member>) -> Result<Self> {
        let s = Self { members };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, m) in self.members.iter().enumerate() {
            if let Some(r) = m.recruiter {
                if r >= k {
                    return Err(Error::Data(format!(
                        "member {} appears before its recruiter",
                        m.id
                    )));
                }
                if m.wave != self.members[r].wave + 1 {
                    return Err(Error::Data(format!(
                        "member {} has inconsistent wave {}",
                        m.id, m.wave
                    )));
                }
            } else if m.wave != 0 {
                return Err(Error::Data(format!("seed {} has wave {}", m.id, m.wave)));
            }
            if m.z > 1 {
                return Err(Error::Data(format!(
                    "member {} has non-binary outcome {}",
                    m.id, m.z
                )));
            }
            if m.degree == 0 {
                return Err(Error::Data(format!("member {} reports degree 0", m.id)));
            }
            if m.has_ego_report() && m.alters.len() != m.degree {
                return Err(Error::Data(format!(
                    "member {} reports {} alters for degree {}",
                    m.id,
                    m.alters.len(),
                    m.degree
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sample indices of the recruits of every member.
    pub fn recruits(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.members.len()];
        for (k, m) in self.members.iter().enumerate() {
            if let Some(r) = m.recruiter {
                out[r].push(k);
            }
        }
        out
    }

    /// `(recruiter, recruit)` pairs in sample order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(k, m)| m.recruiter.map(|r| (r, k)))
            .collect()
    }

    pub fn seed_count(&self) -> usize {
        self.members.iter().filter(|m| m.is_seed()).count()
    }

    pub fn has_ego_reports(&self) -> bool {
        self.members.iter().all(Member::has_ego_report)
    }
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(k);
            if u < acc {
                return last;
            }
        }
    }
    last
}

/// `k` distinct seeds drawn sequentially with probability proportional to
/// the stationary weights of the recruitment model.
pub fn draw_seeds<R: Rng + ?Sized>(
    pop: &Population,
    model: &RecruitmentModel,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let scored = ScoredNetwork::new(pop, model)?;
    let weights = scored.stationary()?.weights;
    draw_weighted_distinct(weights, k, rng)
}

fn draw_weighted_distinct<R: Rng + ?Sized>(
    mut weights: Vec<f64>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k > weights.len() {
        return Err(Error::Design(format!(
            "cannot draw {k} seeds from {} nodes",
            weights.len()
        )));
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let i =
            pick_weighted(&weights, rng).ok_or_else(|| Error::Design("no eligible seed".into()))?;
        weights[i] = 0.0;
        out.push(i);
    }
    Ok(out)
}

/// Draws an RDS sample: seeds, then breadth-first waves in which each member
/// hands out up to `coupons` coupons to distinct unsampled neighbours.
pub fn run_rds<R: Rng + ?Sized>(
    pop: &Population,
    model: &RecruitmentModel,
    design: &SamplingDesign,
    rng: &mut R,
) -> Result<RdsSample> {
    design.validate()?;
    if design.n_target > pop.n() {
        return Err(Error::Design(format!(
            "target size {} exceeds population of {}",
            design.n_target,
            pop.n()
        )));
    }
    let scored = ScoredNetwork::new(pop, model)?;
    let seed_weights = match &design.seed_rule {
        SeedRule::Stationary => scored.stationary()?.weights,
        _ => vec![1.0; pop.n()],
    };
    let seeds = match &design.seed_rule {
        SeedRule::Fixed(ids) => {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return Err(Error::Design("fixed seeds must be distinct".into()));
            }
            if let Some(&bad) = ids.iter().find(|&&i| i >= pop.n()) {
                return Err(Error::Index {
                    index: bad,
                    n: pop.n(),
                });
            }
            ids.clone()
        }
        _ => draw_weighted_distinct(seed_weights.clone(), design.n_seeds, rng)?,
    };

    let mut sampled = vec![false; pop.n()];
    // (node, recruiter sample index, wave)
    let mut order: Vec<(usize, Option<usize>, usize)> = Vec::with_capacity(design.n_target);
    let mut queue = VecDeque::new();
    for s in seeds {
        sampled[s] = true;
        queue.push_back(order.len());
        order.push((s, None, 0));
    }

    while order.len() < design.n_target {
        let Some(k) = queue.pop_front() else {
            if design.stall_rule == StallRule::Abort {
                return Err(Error::Stall {
                    achieved: order.len(),
                    target: design.n_target,
                });
            }
            let eligible: Vec<f64> = seed_weights
                .iter()
                .enumerate()
                .map(|(i, &w)| if sampled[i] { 0.0 } else { w })
                .collect();
            let s = pick_weighted(&eligible, rng).ok_or(Error::Stall {
                achieved: order.len(),
                target: design.n_target,
            })?;
            sampled[s] = true;
            queue.push_back(order.len());
            order.push((s, None, 0));
            continue;
        };
        let (i, _, wave) = order[k];
        for _ in 0..design.coupons {
            if order.len() == design.n_target {
                break;
            }
            let row = scored.row(i, &|j| sampled[j]);
            if row.stalled {
                break;
            }
            let probs: Vec<f64> = row.probabilities.iter().map(|p| p.1).collect();
            let pick = pick_weighted(&probs, rng).expect("non-empty row has positive mass");
            let j = row.probabilities[pick].0;
            sampled[j] = true;
            queue.push_back(order.len());
            order.push((j, Some(k), wave + 1));
        }
    }

    Ok(build_sample(pop, &order))
}

fn node_values(pop: &Population, i: usize) -> BTreeMap<String, f64> {
    let mut values = BTreeMap::new();
    values.insert("age".to_string(), pop.ages()[i]);
    values.insert("z".to_string(), f64::from(pop.infection()[i]));
    for (name, col) in pop.attrs() {
        values.insert(name.clone(), col.value(i));
    }
    values
}

fn build_sample(pop: &Population, order: &[(usize, Option<usize>, usize)]) -> RdsSample {
    let index_of: BTreeMap<usize, usize> =
        order.iter().enumerate().map(|(k, o)| (o.0, k)).collect();
    let mut linked: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for (k, &(_, r, _)) in order.iter().enumerate() {
        if let Some(r) = r {
            linked[k].push(r);
            linked[r].push(k);
        }
    }
    let members = order
        .iter()
        .enumerate()
        .map(|(k, &(i, recruiter, wave))| {
            let alters = pop
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let mut values = node_values(pop, j);
                    for (name, table) in pop.tie_tables() {
                        values.insert(name.clone(), table.get(i, j));
                    }
                    let member = index_of.get(&j).copied().filter(|m| linked[k].contains(m));
                    Alter { member, values }
                })
                .collect();
            Member {
                id: pop.ids()[i].clone(),
                node: Some(i),
                recruiter,
                wave,
                degree: pop.neighbors(i).len(),
                z: pop.infection()[i],
                values: {
                    let mut v = node_values(pop, i);
                    v.remove("z");
                    v
                },
                alters,
            }
        })
        .collect();
    RdsSample { members }
}
