//! Survey ingestion: repairs aggregated degree reports and rebuilds
//! per-contact covariates so the recruitment models can be fitted.
//!
//! Respondents report a total degree, degree by gender and degree by age
//! group. The binary attribute is `gender` (1 = male) and doubles as the
//! outcome `z`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{Alter, Member, RdsSample};

/// Lower bounds of the age groups; the last group is open-ended.
pub const AGE_GROUP_LOWER: [f64; 14] = [
    18.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0,
];

pub const DEFAULT_AGE_CAP: f64 = 90.0;
pub const DEFAULT_SAME_GROUP_PROB: f64 = 0.62;

/// Column name of each age group in raw survey files.
pub fn age_group_column(g: usize) -> String {
    match AGE_GROUP_LOWER.get(g + 1) {
        Some(next) => format!("age_{}_{}", AGE_GROUP_LOWER[g], next - 1.0),
        None => format!("age_{}_plus", AGE_GROUP_LOWER[g]),
    }
}

/// Index of the age group containing `age`; ages below 18 fall in the first group.
pub fn age_group_of(age: f64) -> usize {
    AGE_GROUP_LOWER
        .iter()
        .rposition(|&lo| age >= lo)
        .unwrap_or(0)
}

/// Distance in years between two groups' lower bounds, 1 within a group.
pub fn group_distance(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        (AGE_GROUP_LOWER[a] - AGE_GROUP_LOWER[b]).abs()
    }
}

/// A respondent's three degree measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub total: u32,
    /// `[non-male, male]`
    pub by_gender: [u32; 2],
    pub by_age: Vec<u32>,
}

impl DegreeReport {
    pub fn gender_total(&self) -> u32 {
        self.by_gender.iter().sum()
    }

    pub fn age_total(&self) -> u32 {
        self.by_age.iter().sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.gender_total() && self.total == self.age_total()
    }
}

/// One row of a raw survey file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRespondent {
    pub id: String,
    pub recruiter_id: Option<String>,
    pub gender: Option<u8>,
    pub age: f64,
    pub report: DegreeReport,
}

/// Fills gaps in a binary attribute from a neighbour in the recruitment
/// tree: the recruiter when observed, otherwise the first observed recruit.
/// The neighbour's value is copied with probability `same_prob` and
/// flipped otherwise.
pub fn impute_binary<R: Rng + ?Sized>(
    values: &[Option<u8>],
    recruiter: &[Option<usize>],
    same_prob: f64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    if values.len() != recruiter.len() {
        return Err(Error::Data(
            "values and recruiter links differ in length".into(),
        ));
    }
    if !(0.0..=1.0).contains(&same_prob) {
        return Err(Error::Config(format!(
            "same-group probability must lie in [0, 1], got {same_prob}"
        )));
    }
    (0..values.len())
        .map(|i| {
            if let Some(v) = values[i] {
                return Ok(v);
            }
            let from_recruiter = recruiter[i].and_then(|r| values[r]);
            let from_recruit = || {
                (0..values.len())
                    .find(|&k| recruiter[k] == Some(i) && values[k].is_some())
                    .and_then(|k| values[k])
            };
            let neighbour = from_recruiter
                .or_else(from_recruit)
                .ok_or_else(|| Error::Repair {
                    member: i.to_string(),
                    reason: "no observed recruiter or recruit to impute from".into(),
                })?;
            Ok(if rng.random::<f64>() < same_prob {
                neighbour
            } else {
                1 - neighbour
            })
        })
        .collect()
}

/// Share of recruiter-recruit pairs, both observed, with equal values.
pub fn same_group_rate(values: &[Option<u8>], recruiter: &[Option<usize>]) -> Option<f64> {
    let pairs: Vec<bool> = (0..values.len())
        .filter_map(|k| Some(values[recruiter[k]?]? == values[k]?))
        .collect();
    (!pairs.is_empty()).then(|| pairs.iter().filter(|&&s| s).count() as f64 / pairs.len() as f64)
}

/// What the degree repair needs to know about a respondent.
#[derive(Debug, Clone)]
pub struct ReconcileContext<'a> {
    pub id: &'a str,
    pub own_group: usize,
    pub own_gender: u8,
    /// Recruiter (if any) plus recruits.
    pub activity: u32,
    /// Relative frequency of each age group.
    pub group_freq: &'a [f64],
    pub same_gender_prob: f64,
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
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
                break;
            }
        }
    }
    last
}

/// Most frequent of the three measures; with no agreement the total wins.
fn majority(total: u32, gender: u32, age: u32) -> u32 {
    if gender == age && total != gender {
        gender
    } else {
        total
    }
}

/// Makes the three degree measures agree. The total is raised to the
/// observed recruitment activity, the majority measure is taken as true,
/// and age-group and gender counts are moved to it one contact at a time.
pub fn reconcile_degrees<R: Rng + ?Sized>(
    report: &DegreeReport,
    ctx: &ReconcileContext,
    rng: &mut R,
) -> Result<DegreeReport> {
    let groups = AGE_GROUP_LOWER.len();
    let repair_err = |reason: String| Error::Repair {
        member: ctx.id.to_string(),
        reason,
    };
    if report.by_age.len() != groups || ctx.group_freq.len() != groups {
        return Err(repair_err(format!("expected {groups} age groups")));
    }
    if ctx.own_gender > 1 || ctx.own_group >= groups {
        return Err(repair_err("invalid own gender or age group".into()));
    }
    let raised = report.total.max(ctx.activity);
    let truth = majority(raised, report.gender_total(), report.age_total()).max(ctx.activity);
    let mut out = DegreeReport {
        total: truth,
        by_gender: report.by_gender,
        by_age: report.by_age.clone(),
    };

    let add_weight: Vec<f64> = (0..groups)
        .map(|g| {
            let f = ctx.group_freq[g];
            if f > 0.0 {
                1.0 / (group_distance(ctx.own_group, g) * f)
            } else {
                0.0
            }
        })
        .collect();
    while out.age_total() < truth {
        let g = draw_index(&add_weight, rng)
            .ok_or_else(|| repair_err("no age group can receive contacts".into()))?;
        out.by_age[g] += 1;
    }
    while out.age_total() > truth {
        let weights: Vec<f64> = (0..groups)
            .map(|g| {
                if out.by_age[g] > 0 && add_weight[g] > 0.0 {
                    1.0 / add_weight[g]
                } else {
                    0.0
                }
            })
            .collect();
        let g = draw_index(&weights, rng)
            .or_else(|| {
                let nonzero: Vec<usize> = (0..groups).filter(|&g| out.by_age[g] > 0).collect();
                (!nonzero.is_empty()).then(|| nonzero[rng.random_range(0..nonzero.len())])
            })
            .expect("a positive total has a non-empty group");
        out.by_age[g] -= 1;
    }

    let same = ctx.own_gender as usize;
    while out.gender_total() < truth {
        let g = if rng.random::<f64>() < ctx.same_gender_prob {
            same
        } else {
            1 - same
        };
        out.by_gender[g] += 1;
    }
    while out.gender_total() > truth {
        let mut g = if rng.random::<f64>() < ctx.same_gender_prob {
            1 - same
        } else {
            same
        };
        if out.by_gender[g] == 0 {
            g = 1 - g;
        }
        out.by_gender[g] -= 1;
    }
    debug_assert!(out.is_consistent());
    Ok(out)
}

/// A sampled contact whose attributes are known: the recruiter or a recruit.
#[derive(Debug, Clone, Copy)]
pub struct KnownContact {
    pub member: usize,
    pub age: f64,
    pub gender: u8,
}

fn alter_values(age: f64, gender: u8) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("age".to_string(), age),
        ("gender".to_string(), f64::from(gender)),
        ("z".to_string(), f64::from(gender)),
    ])
}

/// One alter per counted contact. Known contacts fill their own age-group
/// and gender cells while room remains; the rest get ages uniform within
/// their group (the open group capped at `age_cap`) and a random
/// assignment of the remaining gender labels.
pub fn reconstruct_alters<R: Rng + ?Sized>(
    report: &DegreeReport,
    known: &[KnownContact],
    age_cap: f64,
    rng: &mut R,
) -> Result<Vec<Alter>> {
    let last = AGE_GROUP_LOWER.len() - 1;
    if !report.is_consistent() || report.by_age.len() != AGE_GROUP_LOWER.len() {
        return Err(Error::Repair {
            member: String::new(),
            reason: "degree measures disagree".into(),
        });
    }
    if !(age_cap > AGE_GROUP_LOWER[last]) {
        return Err(Error::Config(format!(
            "age cap {age_cap} must exceed {}",
            AGE_GROUP_LOWER[last]
        )));
    }
    let mut by_age = report.by_age.clone();
    let mut by_gender = report.by_gender;
    let mut alters = Vec::with_capacity(report.total as usize);
    for c in known {
        let g = age_group_of(c.age);
        if by_age[g] > 0 && by_gender[c.gender as usize] > 0 {
            by_age[g] -= 1;
            by_gender[c.gender as usize] -= 1;
            alters.push(Alter {
                member: Some(c.member),
                values: alter_values(c.age, c.gender),
            });
        }
    }
    let mut genders: Vec<u8> = std::iter::repeat_n(0u8, by_gender[0] as usize)
        .chain(std::iter::repeat_n(1u8, by_gender[1] as usize))
        .collect();
    genders.shuffle(rng);
    let mut labels = genders.into_iter();
    for (g, &count) in by_age.iter().enumerate() {
        let lo = AGE_GROUP_LOWER[g];
        let hi = AGE_GROUP_LOWER.get(g + 1).copied().unwrap_or(age_cap);
        for _ in 0..count {
            let age = rng.random_range(lo..hi);
            let gender = labels.next().expect("gender and age totals agree");
            alters.push(Alter {
                member: None,
                values: alter_values(age, gender),
            });
        }
    }
    Ok(alters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestOptions {
    /// Probability used for gender imputation and repairs; estimated from
    /// recruiter-recruit pairs when absent.
    #[serde(default)]
    pub same_group_prob: Option<f64>,
    #[serde(default = "default_cap")]
    pub age_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_AGE_CAP
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            same_group_prob: None,
            age_cap: DEFAULT_AGE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRepair {
    pub id: String,
    pub before: DegreeReport,
    pub after: DegreeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairAudit {
    pub members: usize,
    pub same_group_prob: f64,
    pub imputed: Vec<String>,
    pub modified_count: usize,
    pub modified: Vec<MemberRepair>,
    /// Members whose three measures agree after repair.
    pub consistent_count: usize,
    pub linked_alters: usize,
}

/// Repairs a raw survey and returns an estimation-ready sample in wave order.
pub fn ingest<R: Rng + ?Sized>(
    raw: &[RawRespondent],
    options: &IngestOptions,
    rng: &mut R,
) -> Result<(RdsSample, RepairAudit)> {
    if raw.is_empty() {
        return Err(Error::Data("survey has no respondents".into()));
    }
    let ids: Vec<String> = raw.iter().map(|r| r.id.clone()).collect();
    let index: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    if index.len() != ids.len() {
        return Err(Error::Data("duplicate respondent id".into()));
    }
    let recruiter: Vec<Option<usize>> = raw
        .iter()
        .map(|r| match &r.recruiter_id {
            None => Ok(None),
            Some(id) => index
                .get(id.as_str())
                .copied()
                .map(Some)
                .ok_or_else(|| Error::Data(format!("unknown recruiter `{id}`"))),
        })
        .collect::<Result<_>>()?;
    let (wave, order, position) = crate::io::recruitment_order(&ids, &recruiter)?;

    let observed: Vec<Option<u8>> = raw.iter().map(|r| r.gender).collect();
    let p = match options.same_group_prob {
        Some(p) => p,
        None => same_group_rate(&observed, &recruiter).unwrap_or(DEFAULT_SAME_GROUP_PROB),
    };
    let gender = impute_binary(&observed, &recruiter, p, rng).map_err(|e| match e {
        Error::Repair { member, reason } => Error::Repair {
            member: ids[member.parse::<usize>().unwrap_or(0)].clone(),
            reason,
        },
        other => other,
    })?;
    let imputed: Vec<String> = (0..raw.len())
        .filter(|&k| observed[k].is_none())
        .map(|k| ids[k].clone())
        .collect();

    let groups: Vec<usize> = raw.iter().map(|r| age_group_of(r.age)).collect();
    let mut group_freq = vec![0.0; AGE_GROUP_LOWER.len()];
    for &g in &groups {
        group_freq[g] += 1.0 / raw.len() as f64;
    }
    let mut recruits: Vec<Vec<usize>> = vec![Vec::new(); raw.len()];
    for (k, r) in recruiter.iter().enumerate() {
        if let Some(r) = r {
            recruits[*r].push(k);
        }
    }

    let mut modified = Vec::new();
    let mut members: Vec<Option<Member>> = vec![None; raw.len()];
    let mut linked_alters = 0;
    let mut consistent_count = 0;
    for &k in &order {
        let r = &raw[k];
        let activity = (recruits[k].len() + usize::from(recruiter[k].is_some())) as u32;
        let ctx = ReconcileContext {
            id: &r.id,
            own_group: groups[k],
            own_gender: gender[k],
            activity,
            group_freq: &group_freq,
            same_gender_prob: p,
        };
        let report = reconcile_degrees(&r.report, &ctx, rng)?;
        if report != r.report {
            modified.push(MemberRepair {
                id: r.id.clone(),
                before: r.report.clone(),
                after: report.clone(),
            });
        }
        consistent_count += usize::from(report.is_consistent());
        let known: Vec<KnownContact> = recruiter[k]
            .iter()
            .chain(&recruits[k])
            .map(|&c| KnownContact {
                member: position[c],
                age: raw[c].age,
                gender: gender[c],
            })
            .collect();
        let alters =
            reconstruct_alters(&report, &known, options.age_cap, rng).map_err(|e| match e {
                Error::Repair { reason, .. } => Error::Repair {
                    member: r.id.clone(),
                    reason,
                },
                other => other,
            })?;
        linked_alters += alters.iter().filter(|a| a.member.is_some()).count();
        members[position[k]] = Some(Member {
            id: r.id.clone(),
            node: None,
            recruiter: recruiter[k].map(|x| position[x]),
            wave: wave[k],
            degree: report.total as usize,
            z: gender[k],
            values: BTreeMap::from([
                ("age".to_string(), r.age),
                ("gender".to_string(), f64::from(gender[k])),
            ]),
            alters,
        });
    }
    let sample = RdsSample::new(
        members
            .into_iter()
            .map(|m| m.expect("every position filled"))
            .collect(),
    )?;
    let audit = RepairAudit {
        members: raw.len(),
        same_group_prob: p,
        imputed,
        modified_count: modified.len(),
        modified,
        consistent_count,
        linked_alters,
    };
    Ok((sample, audit))
}

/// Perturbation of the ego reports that strengthens recruitment effects:
/// a share of each member's non-recruited contacts is relabelled non-male
/// and every non-recruited contact's age moves towards the member's age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityTransform {
    #[serde(default = "default_share")]
    pub non_male_share: f64,
    #[serde(default = "default_shift")]
    pub age_shift: f64,
}

fn default_share() -> f64 {
    0.7
}
fn default_shift() -> f64 {
    3.0
}

impl Default for SensitivityTransform {
    fn default() -> Self {
        Self {
            non_male_share: default_share(),
            age_shift: default_shift(),
        }
    }
}

/// Applies the transform. Contacts linked to sample members are left as
/// they are; age gaps smaller than the shift collapse to zero.
pub fn sensitivity_transform<R: Rng + ?Sized>(
    sample: &RdsSample,
    t: &SensitivityTransform,
    rng: &mut R,
) -> Result<RdsSample> {
    if !(0.0..=1.0).contains(&t.non_male_share) || !(t.age_shift >= 0.0) {
        return Err(Error::Config(
            "non_male_share must lie in [0, 1] and age_shift be non-negative".into(),
        ));
    }
    let mut out = sample.clone();
    for m in &mut out.members {
        let own_age = m
            .values
            .get("age")
            .copied()
            .ok_or_else(|| Error::UnknownAttribute("age".into()))?;
        let free: Vec<usize> = (0..m.alters.len())
            .filter(|&a| m.alters[a].member.is_none())
            .collect();
        let non_male = (t.non_male_share * free.len() as f64).round() as usize;
        let mut labels: Vec<u8> = std::iter::repeat_n(0u8, non_male)
            .chain(std::iter::repeat_n(1u8, free.len() - non_male))
            .collect();
        labels.shuffle(rng);
        for (&a, g) in free.iter().zip(labels) {
            let values = &mut m.alters[a].values;
            values.insert("gender".into(), f64::from(g));
            values.insert("z".into(), f64::from(g));
            if let Some(age) = values.get_mut("age") {
                let gap = *age - own_age;
                *age = own_age + gap.signum() * (gap.abs() - t.age_shift).max(0.0);
            }
        }
    }
    out.validate()?;
    Ok(out)
}
