//! Synthetic populations: Gamma ages, a logistic outcome model and an
//! independent-dyad ERGM with an age-difference homophily term.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;
use crate::rng::StreamRng;

pub const MAX_GENERATION_ATTEMPTS: usize = 1000;
pub const DEFAULT_TAU_THRESHOLD: f64 = 5.0;

pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Edge (`eta1`) and absolute-age-difference (`eta2`) coefficients, log-odds scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgmParams {
    pub eta1: f64,
    pub eta2: f64,
}

impl ErgmParams {
    pub fn tie_probability(&self, age_gap: f64) -> f64 {
        expit(self.eta1 + self.eta2 * age_gap)
    }
}

/// Homophily levels of the simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomophilyLevel {
    None,
    Moderate,
    High,
}

impl HomophilyLevel {
    pub fn ergm(self) -> ErgmParams {
        match self {
            HomophilyLevel::None => ErgmParams {
                eta1: -4.41,
                eta2: 0.0,
            },
            HomophilyLevel::Moderate => ErgmParams {
                eta1: -3.60,
                eta2: -0.19,
            },
            HomophilyLevel::High => ErgmParams {
                eta1: -3.27,
                eta2: -0.28,
            },
        }
    }

    pub fn target_tau(self) -> f64 {
        match self {
            HomophilyLevel::None => 1.0,
            HomophilyLevel::Moderate => 3.2,
            HomophilyLevel::High => 5.1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HomophilyLevel::None => "none",
            HomophilyLevel::Moderate => "moderate",
            HomophilyLevel::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationRecipe {
    pub n: usize,
    #[serde(default = "default_shape")]
    pub age_shape: f64,
    #[serde(default = "default_rate")]
    pub age_rate: f64,
    #[serde(default = "default_intercept")]
    pub logit_intercept: f64,
    #[serde(default = "default_slope")]
    pub logit_slope: f64,
    pub ergm: ErgmParams,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_shape() -> f64 {
    26.0
}
fn default_rate() -> f64 {
    1.0
}
fn default_intercept() -> f64 {
    -4.0
}
fn default_slope() -> f64 {
    0.09
}

impl PopulationRecipe {
    pub fn new(n: usize, ergm: ErgmParams, rng_seed: u64) -> Self {
        Self {
            n,
            age_shape: default_shape(),
            age_rate: default_rate(),
            logit_intercept: default_intercept(),
            logit_slope: default_slope(),
            ergm,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "population size must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.age_shape > 0.0 && self.age_shape.is_finite())
            || !(self.age_rate > 0.0 && self.age_rate.is_finite())
        {
            return Err(Error::Config("age shape and rate must be positive".into()));
        }
        let finite = [
            self.logit_intercept,
            self.logit_slope,
            self.ergm.eta1,
            self.ergm.eta2,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("recipe coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Probability of a positive outcome at the given age, before any ties.
    pub fn outcome_probability(&self, age: f64) -> f64 {
        expit(self.logit_intercept + self.logit_slope * age)
    }

    /// Draws a population with the generator seeded from `rng_seed`.
    pub fn draw(&self) -> Result<Population> {
        draw_population(self, &mut StreamRng::seed_from_u64(self.rng_seed))
    }
}

/// Draws ages, outcomes and ties. Realizations with isolated nodes are
/// discarded and redrawn in full, up to [`MAX_GENERATION_ATTEMPTS`].
pub fn draw_population<R: Rng + ?Sized>(
    recipe: &PopulationRecipe,
    rng: &mut R,
) -> Result<Population> {
    recipe.validate()?;
    let gamma = Gamma::new(recipe.age_shape, 1.0 / recipe.age_rate)
        .map_err(|e| Error::Config(format!("age distribution: {e}")))?;
    let n = recipe.n;
    let mut isolated = 0;
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let ages: Vec<f64> = (0..n)
            .map(|_| loop {
                let a: f64 = gamma.sample(rng);
                if a > 0.0 {
                    break a;
                }
            })
            .collect();
        let infection: Vec<u8> = ages
            .iter()
            .map(|&a| u8::from(rng.random::<f64>() < recipe.outcome_probability(a)))
            .collect();
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let p = recipe.ergm.tie_probability((ages[i] - ages[j]).abs());
                if rng.random::<f64>() < p {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        isolated = neighbors.iter().filter(|r| r.is_empty()).count();
        if isolated == 0 {
            return Population::from_neighbor_lists(ages, infection, neighbors);
        }
    }
    Err(Error::Generation {
        attempts: MAX_GENERATION_ATTEMPTS,
        reason: format!("last realization had {isolated} isolated nodes"),
    })
}

/// Empirical homophily ratio: tie frequency among dyads whose age gap is at
/// most `threshold` over the frequency among the remaining dyads.
/// Returns `f64::INFINITY` when the far class has no ties.
pub fn estimate_tau(pop: &Population, threshold: f64) -> Result<f64> {
    let ages = pop.ages();
    let n = pop.n();
    let mut near_dyads = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (ages[i] - ages[j]).abs() <= threshold {
                near_dyads += 1;
            }
        }
    }
    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let far_dyads = total - near_dyads;
    if near_dyads == 0 || far_dyads == 0 {
        return Err(Error::Undefined(format!(
            "tau needs both dyad classes; near = {near_dyads}, far = {far_dyads}"
        )));
    }
    let (mut near_ties, mut far_ties) = (0u64, 0u64);
    for (i, j) in pop.edges() {
        if (ages[i] - ages[j]).abs() <= threshold {
            near_ties += 1;
        } else {
            far_ties += 1;
        }
    }
    let near = near_ties as f64 / near_dyads as f64;
    let far = far_ties as f64 / far_dyads as f64;
    if far == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(near / far)
}

const MAX_CALIBRATION_PAIRS: usize = 1_000_000;
const CALIBRATION_SEED: u64 = 0x7a75_0001;
const SEARCH_LOW: f64 = -20.0;
const SEARCH_HIGH: f64 = 0.0;

/// Age-pair sample used for the analytic expectations: all pairs when there
/// are at most a million, otherwise a million random distinct-index pairs.
struct PairGaps {
    gaps: Vec<f64>,
    near: Vec<bool>,
    n_near: usize,
    population: f64,
}

impl PairGaps {
    fn new(ages: &[f64], threshold: f64) -> Self {
        let n = ages.len();
        let all = n * n.saturating_sub(1) / 2;
        let mut gaps = Vec::with_capacity(all.min(MAX_CALIBRATION_PAIRS));
        if all <= MAX_CALIBRATION_PAIRS {
            for i in 0..n {
                for j in i + 1..n {
                    gaps.push((ages[i] - ages[j]).abs());
                }
            }
        } else {
            let mut rng = StreamRng::seed_from_u64(CALIBRATION_SEED);
            while gaps.len() < MAX_CALIBRATION_PAIRS {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i != j {
                    gaps.push((ages[i] - ages[j]).abs());
                }
            }
        }
        let near: Vec<bool> = gaps.iter().map(|&g| g <= threshold).collect();
        let n_near = near.iter().filter(|&&b| b).count();
        Self {
            gaps,
            near,
            n_near,
            population: n as f64,
        }
    }

    fn mean_degree(&self, eta: ErgmParams) -> (f64, f64) {
        let (mut p, mut dp) = (0.0, 0.0);
        for &g in &self.gaps {
            let q = eta.tie_probability(g);
            p += q;
            dp += q * (1.0 - q);
        }
        let scale = (self.population - 1.0) / self.gaps.len() as f64;
        (p * scale, dp * scale)
    }

    fn tau(&self, eta: ErgmParams) -> f64 {
        if eta.eta2 == 0.0 {
            return 1.0;
        }
        let (mut near, mut far) = (0.0, 0.0);
        for (&g, &is_near) in self.gaps.iter().zip(&self.near) {
            let q = eta.tie_probability(g);
            if is_near {
                near += q;
            } else {
                far += q;
            }
        }
        let n_far = self.gaps.len() - self.n_near;
        (near / self.n_near as f64) / (far / n_far as f64)
    }

    /// Edge coefficient reaching the target mean degree for fixed `eta2`.
    fn solve_eta1(&self, eta2: f64, target: f64) -> Option<f64> {
        let at = |eta1: f64| self.mean_degree(ErgmParams { eta1, eta2 });
        let (mut lo, mut hi) = (SEARCH_LOW, SEARCH_HIGH);
        if at(lo).0 > target || at(hi).0 < target {
            return None;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (d, slope) = at(x);
            if (d - target).abs() <= 1e-10 * target {
                return Some(x);
            }
            if d < target {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - (d - target) / slope;
            x = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-13 {
                break;
            }
        }
        Some(x)
    }
}

/// Finds `eta` whose analytic mean degree and homophily ratio over the
/// empirical age-pair distribution match the targets within 1%.
pub fn calibrate_eta(target_tau: f64, target_mean_degree: f64, ages: &[f64]) -> Result<ErgmParams> {
    calibrate_eta_with_threshold(target_tau, target_mean_degree, ages, DEFAULT_TAU_THRESHOLD)
}

pub fn calibrate_eta_with_threshold(
    target_tau: f64,
    target_mean_degree: f64,
    ages: &[f64],
    threshold: f64,
) -> Result<ErgmParams> {
    if !(target_tau >= 1.0) || !target_tau.is_finite() {
        return Err(Error::Config(format!(
            "target tau must be >= 1, got {target_tau}"
        )));
    }
    if !(target_mean_degree > 0.0) || !target_mean_degree.is_finite() {
        return Err(Error::Config(format!(
            "target mean degree must be positive, got {target_mean_degree}"
        )));
    }
    if ages.len() < 3 {
        return Err(Error::Config("calibration needs at least 3 ages".into()));
    }
    let pairs = PairGaps::new(ages, threshold);
    if pairs.n_near == 0 || pairs.n_near == pairs.gaps.len() {
        return Err(Error::Calibration(
            "age sample does not contain both dyad classes".into(),
        ));
    }
    let no_solution = || {
        Error::Calibration(format!(
        "no eta in [{SEARCH_LOW}, {SEARCH_HIGH}]^2 reaches tau = {target_tau}, mean degree = {target_mean_degree}"
    ))
    };

    if target_tau == 1.0 {
        let eta1 = pairs
            .solve_eta1(0.0, target_mean_degree)
            .ok_or_else(no_solution)?;
        return Ok(ErgmParams { eta1, eta2: 0.0 });
    }

    // tau grows as eta2 decreases; infeasible inner solves sit at the strong end.
    let tau_at = |eta2: f64| -> Option<(f64, f64)> {
        let eta1 = pairs.solve_eta1(eta2, target_mean_degree)?;
        Some((eta1, pairs.tau(ErgmParams { eta1, eta2 })))
    };
    let (mut strong, mut weak) = (SEARCH_LOW, SEARCH_HIGH);
    let mut best: Option<ErgmParams> = None;
    for _ in 0..100 {
        let mid = 0.5 * (strong + weak);
        match tau_at(mid) {
            Some((eta1, tau)) => {
                best = Some(ErgmParams { eta1, eta2: mid });
                if tau > target_tau {
                    strong = mid;
                } else {
                    weak = mid;
                }
                if ((tau - target_tau) / target_tau).abs() < 1e-9 {
                    break;
                }
            }
            None => strong = mid,
        }
        if weak - strong < 1e-12 {
            break;
        }
    }
    let eta = best.ok_or_else(no_solution)?;
    let (degree, _) = pairs.mean_degree(eta);
    let tau = pairs.tau(eta);
    if ((degree - target_mean_degree) / target_mean_degree).abs() > 0.01
        || ((tau - target_tau) / target_tau).abs() > 0.01
    {
        return Err(no_solution());
    }
    Ok(eta)
}

/// Analytic homophily ratio and mean degree of `eta` over an age sample.
pub fn analytic_targets(eta: ErgmParams, ages: &[f64], threshold: f64) -> (f64, f64) {
    let pairs = PairGaps::new(ages, threshold);
    (pairs.tau(eta), pairs.mean_degree(eta).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn outcome_probability_at_twenty() {
        let r = PopulationRecipe::new(10, HomophilyLevel::None.ergm(), 0);
        assert!((r.outcome_probability(20.0) - 0.0997).abs() < 1e-4);
    }

    #[test]
    fn null_dyad_probability() {
        let p = HomophilyLevel::None.ergm().tie_probability(7.0);
        assert!((p - 0.012009).abs() < 1e-5);
        assert!((p * 999.0 - 11.997).abs() < 0.01);
    }

    #[test]
    fn hopeless_density_fails() {
        let r = PopulationRecipe::new(
            30,
            ErgmParams {
                eta1: -50.0,
                eta2: 0.0,
            },
            1,
        );
        match draw_population(&r, &mut from_seed(1)) {
            Err(Error::Generation { attempts, .. }) => {
                assert_eq!(attempts, MAX_GENERATION_ATTEMPTS)
            }
            other => panic!("expected generation error, got {other:?}"),
        }
    }

    #[test]
    fn tau_of_complete_graph_is_one() {
        let ages = vec![20.0, 22.0, 30.0, 41.0];
        let edges: Vec<_> = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .collect();
        let p = Population::from_edges(ages, vec![0; 4], &edges).unwrap();
        assert_eq!(estimate_tau(&p, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn tau_needs_both_classes() {
        let p = Population::from_edges(vec![20.0, 21.0, 22.0], vec![0; 3], &[(0, 1)]).unwrap();
        assert!(estimate_tau(&p, 5.0).is_err());
        let far = Population::from_edges(vec![20.0, 21.0, 40.0], vec![0; 3], &[(0, 1)]).unwrap();
        assert_eq!(estimate_tau(&far, 5.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn calibrate_null_target() {
        let mut rng = from_seed(3);
        let g = Gamma::new(26.0, 1.0).unwrap();
        let ages: Vec<f64> = (0..1000).map(|_| g.sample(&mut rng)).collect();
        let eta = calibrate_eta(1.0, 12.0, &ages).unwrap();
        assert_eq!(eta.eta2, 0.0);
        assert!((eta.eta1 + 4.41).abs() < 0.01, "{eta:?}");
        assert_eq!(analytic_targets(eta, &ages, 5.0).0, 1.0);
    }

    #[test]
    fn calibrate_rejects_bad_targets() {
        assert!(calibrate_eta(0.5, 12.0, &[20.0, 25.0, 30.0]).is_err());
        assert!(calibrate_eta(2.0, -1.0, &[20.0, 25.0, 30.0]).is_err());
    }
}
