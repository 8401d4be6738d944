use rdsmdr::bootstrap::{
    bootstrap, dr_matrix, draw_replicates, lu_matrix, BootstrapConfig, BootstrapMethod,
};
use rdsmdr::estimators::{EstimatorKind, HomogeneousPolicy, RecruitmentFits};
use rdsmdr::inference::{fit_dr, fit_mdr, FitOptions};
use rdsmdr::netgen::{HomophilyLevel, PopulationRecipe};
use rdsmdr::recruitment::{scenario_covariates, MdrLevel, RecruitmentModel};
use rdsmdr::rng::from_seed;
use rdsmdr::sampler::{run_rds, RdsSample, SamplingDesign};

fn sample(seed: u64) -> RdsSample {
    let pop = PopulationRecipe::new(1000, HomophilyLevel::Moderate.ergm(), seed)
        .draw()
        .unwrap();
    run_rds(
        &pop,
        &RecruitmentModel::Mdr(MdrLevel::High.model()),
        &SamplingDesign::default(),
        &mut from_seed(seed + 1),
    )
    .unwrap()
}

/// Empirical `P(next in group 1 | current in group k)` over consecutive replicate members.
fn chain_frequencies(members: &[Vec<usize>], label: &[u8]) -> [f64; 2] {
    let mut hits = [0.0; 2];
    let mut total = [0.0; 2];
    for m in members {
        for w in m.windows(2) {
            let k = label[w[0]] as usize;
            total[k] += 1.0;
            hits[k] += f64::from(label[w[1]]);
        }
    }
    [hits[0] / total[0], hits[1] / total[1]]
}

fn replicate_members(
    s: &RdsSample,
    config: &BootstrapConfig,
    fits: &RecruitmentFits,
) -> Vec<Vec<usize>> {
    draw_replicates(s, config, fits)
        .unwrap()
        .replicates
        .into_iter()
        .map(|r| r.members)
        .collect()
}

#[test]
fn salganik_chain_follows_recruitment_proportions() {
    let s = sample(11);
    let z: Vec<u8> = s.members.iter().map(|m| m.z).collect();
    let mut oracle = [[0.0; 2]; 2];
    for m in &s.members {
        if let Some(r) = m.recruiter {
            oracle[z[r] as usize][m.z as usize] += 1.0;
        }
    }
    let expected = [
        oracle[0][1] / (oracle[0][0] + oracle[0][1]),
        oracle[1][1] / (oracle[1][0] + oracle[1][1]),
    ];
    let config = BootstrapConfig::new(BootstrapMethod::Salganik, 2000, 3);
    let got = chain_frequencies(
        &replicate_members(&s, &config, &RecruitmentFits::default()),
        &z,
    );
    for k in 0..2 {
        assert!(
            (got[k] - expected[k]).abs() < 0.01,
            "group {k}: {} vs {}",
            got[k],
            expected[k]
        );
    }
}

#[test]
fn lu_chain_follows_ego_mixing() {
    let s = sample(21);
    let z: Vec<u8> = s.members.iter().map(|m| m.z).collect();
    let mut cross = [0.0; 2];
    let mut count = [0.0; 2];
    for m in &s.members {
        let k = m.z as usize;
        let other = m
            .alters
            .iter()
            .filter(|a| a.values["z"] as usize != k)
            .count() as f64;
        cross[k] += other / m.degree as f64;
        count[k] += 1.0;
    }
    let expected = [cross[0] / count[0], 1.0 - cross[1] / count[1]];
    let m = lu_matrix(&s).unwrap();
    assert!((m[0][1] - expected[0]).abs() < 1e-12 && (m[1][1] - expected[1]).abs() < 1e-12);
    let config = BootstrapConfig::new(BootstrapMethod::Lu, 2000, 4);
    let got = chain_frequencies(
        &replicate_members(&s, &config, &RecruitmentFits::default()),
        &z,
    );
    for k in 0..2 {
        assert!(
            (got[k] - expected[k]).abs() < 0.01,
            "group {k}: {} vs {}",
            got[k],
            expected[k]
        );
    }
}

#[test]
fn dr_chain_follows_scaled_tie_counts() {
    let s = sample(31);
    let phi = fit_dr(&s, "z").unwrap().phi_hat.unwrap();
    let z: Vec<u8> = s.members.iter().map(|m| m.z).collect();
    let mut ties = [[0.0; 2]; 2];
    for m in &s.members {
        for a in &m.alters {
            ties[m.z as usize][a.values["z"] as usize] += 1.0;
        }
    }
    let expected: Vec<f64> = (0..2)
        .map(|k| phi * ties[k][1] / (ties[k][0] + phi * ties[k][1]))
        .collect();
    let m = dr_matrix(&s, "z", phi).unwrap();
    assert!((m[0][1] - expected[0]).abs() < 1e-12 && (m[1][1] - expected[1]).abs() < 1e-12);
    let fits = RecruitmentFits {
        dr_attr: "z".into(),
        dr_phi: Some(phi),
        ..Default::default()
    };
    let config = BootstrapConfig::new(BootstrapMethod::Dr, 2000, 5);
    let got = chain_frequencies(&replicate_members(&s, &config, &fits), &z);
    for k in 0..2 {
        assert!(
            (got[k] - expected[k]).abs() < 0.01,
            "group {k}: {} vs {}",
            got[k],
            expected[k]
        );
    }
}

#[test]
fn neighbourhood_replicates_have_expected_mean_size() {
    let s = sample(41);
    let recruits = s.recruits();
    let recruiters: Vec<usize> = (0..s.len()).filter(|&i| !recruits[i].is_empty()).collect();
    // Each draw is a uniform recruiter plus its recruits; every non-seed is someone's recruit.
    let expected = recruiters.len() as f64 + (s.len() - s.seed_count()) as f64;
    let config = BootstrapConfig::new(BootstrapMethod::Nb, 4000, 6);
    let set = draw_replicates(&s, &config, &RecruitmentFits::default()).unwrap();
    let mean = set.replicates.iter().map(|r| r.len() as f64).sum::<f64>() / 4000.0;
    assert!(
        (mean - expected).abs() / expected < 0.01,
        "{mean} vs {expected}"
    );
    for r in &set.replicates {
        assert_eq!(r.clusters.len(), recruiters.len());
    }
}

#[test]
fn mdr_refit_varies_across_fixed_size_replicates() {
    let s = sample(51);
    let specs = scenario_covariates();
    let fit = fit_mdr(
        &s,
        &specs,
        &FitOptions {
            standardize: true,
            ..Default::default()
        },
    )
    .unwrap();
    let fits = RecruitmentFits {
        mdr_specs: specs,
        mdr_beta: Some(fit.beta_hat.clone()),
        ..Default::default()
    };
    let config = BootstrapConfig {
        coupons: Some(2),
        ..BootstrapConfig::new(BootstrapMethod::NbFixed, 60, 7)
    };
    let point = rdsmdr::estimators::mdr_ego(&s, &fits.mdr_specs, &fit.beta_hat).unwrap();
    let reports = bootstrap(
        &s,
        &fits,
        &[EstimatorKind::MdrEgo],
        &[Some(point)],
        &config,
        HomogeneousPolicy::Undefined,
    )
    .unwrap();
    let r = &reports[0];
    assert!(r.error.is_none(), "{:?}", r.error);
    assert!(r.se.unwrap() > 0.0);
    assert!(r.refit_failures < 6);
    let [lo, hi] = r.ci.unwrap();
    assert!(lo <= point && point <= hi);
}

#[test]
fn replicates_depend_only_on_seed() {
    let s = sample(61);
    for method in [
        BootstrapMethod::Salganik,
        BootstrapMethod::Lu,
        BootstrapMethod::Nb,
        BootstrapMethod::NbFixed,
    ] {
        let config = BootstrapConfig::new(method, 50, 8);
        let a = draw_replicates(&s, &config, &RecruitmentFits::default()).unwrap();
        let b = draw_replicates(&s, &config, &RecruitmentFits::default()).unwrap();
        assert_eq!(a.replicates, b.replicates, "{}", method.label());
        let other = draw_replicates(
            &s,
            &BootstrapConfig::new(method, 50, 9),
            &RecruitmentFits::default(),
        )
        .unwrap();
        assert_ne!(a.replicates, other.replicates, "{}", method.label());
    }
}
