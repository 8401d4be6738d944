use proptest::prelude::*;
use rdsmdr::bootstrap::{audit_fixed_replicate, nb_fixed_attempt, normal_ci};
use rdsmdr::estimators::hajek_units;
use rdsmdr::harness::summarize_errors;
use rdsmdr::io::{
    parse_sample_csv, read_population, write_edges_csv, write_nodes_csv, write_sample_csv,
};
use rdsmdr::population::Population;
use rdsmdr::recruitment::{stationary, CovariateSpec, MdrModel, RecruitmentModel};
use rdsmdr::rng::from_seed;
use rdsmdr::sampler::{run_rds, SamplingDesign};

/// Connected graph: node `i > 0` ties to `parents[i]`, plus the listed extra pairs.
fn graph(
    n: usize,
    parents: &[usize],
    extra: &[(usize, usize)],
    ages: &[f64],
    z: &[u8],
) -> Population {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (parents[i] % i, i)).collect();
    for &(a, b) in extra {
        let (a, b) = (a % n, b % n);
        if a != b
            && !edges.contains(&(a.min(b), a.max(b)))
            && !edges.contains(&(a.max(b), a.min(b)))
        {
            edges.push((a.min(b), a.max(b)));
        }
    }
    Population::from_edges(ages[..n].to_vec(), z[..n].to_vec(), &edges).unwrap()
}

prop_compose! {
    fn arb_graph()(n in 3usize..30)(
        n in Just(n),
        parents in prop::collection::vec(0usize..1000, n),
        extra in prop::collection::vec((0usize..1000, 0usize..1000), 0..40),
        ages in prop::collection::vec(18.0f64..80.0, n),
        z in prop::collection::vec(0u8..2, n),
    ) -> Population {
        graph(n, &parents, &extra, &ages, &z)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hajek_is_scale_invariant(
        values in prop::collection::vec(0u8..2, 1..50),
        weights in prop::collection::vec(0.01f64..10.0, 50),
        scale in 1e-6f64..1e6,
    ) {
        let vals: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let units: Vec<usize> = (0..vals.len()).collect();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let a = hajek_units(&vals, &weights, &units).unwrap();
        let b = hajek_units(&vals, &scaled, &units).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn stationary_is_a_distribution(pop in arb_graph(), b0 in -1.0f64..1.0, b1 in -0.1f64..0.1) {
        let model = RecruitmentModel::Mdr(
            MdrModel::new(vec![CovariateSpec::recruit_attr("z", "z"), CovariateSpec::abs_difference("gap", "age")], vec![b0, b1]).unwrap(),
        );
        let p = stationary(&pop, &model).unwrap().probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn cross_group_ties_are_reciprocal(pop in arb_graph()) {
        let z = pop.infection();
        let mut counts = [0u64; 2];
        for i in 0..pop.n() {
            for &j in pop.neighbors(i) {
                if z[i] != z[j] {
                    counts[z[i] as usize] += 1;
                }
            }
        }
        prop_assert_eq!(counts[0], counts[1]);
        prop_assert_eq!(pop.cross_group_ties(), (counts[0], counts[1]));
    }

    #[test]
    fn fixed_size_replicates_pass_audit(
        parents in prop::collection::vec(0usize..1000, 10..120),
        coupons in 1usize..4,
        seed in any::<u64>(),
    ) {
        // Recruitment forest: member i is recruited by an earlier member, or is a seed.
        let n = parents.len();
        let mut recruits = vec![Vec::new(); n];
        for i in 1..n {
            let p = parents[i] % (i + 1);
            if p < i && recruits[p].len() < coupons {
                recruits[p].push(i);
            }
        }
        let recruiters: Vec<usize> = (0..n).filter(|&i| !recruits[i].is_empty()).collect();
        prop_assume!(!recruiters.is_empty());
        let mut rng = from_seed(seed);
        for _ in 0..20 {
            if let Some(r) = nb_fixed_attempt(&recruiters, &recruits, n, coupons, &mut rng) {
                prop_assert!(audit_fixed_replicate(&r, n));
                for c in &r.clusters {
                    prop_assert!(c.children.iter().all(|k| recruits[c.recruiter].contains(k)));
                }
            }
        }
    }

    #[test]
    fn rmse_decomposes(errors in prop::collection::vec(-1.0f64..1.0, 1..200)) {
        let s = summarize_errors(&errors).unwrap();
        prop_assert!((s.rmse.powi(2) - s.bias.powi(2) - s.sd.powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn normal_interval_brackets_point(estimates in prop::collection::vec(0.0f64..1.0, 2..100), point in 0.0f64..1.0) {
        let iv = normal_ci(&estimates, point, 0.05).unwrap();
        prop_assert!(0.0 <= iv.lo && iv.lo <= point && point <= iv.hi && iv.hi <= 1.0);
    }

    #[test]
    fn population_csv_round_trip(pop in arb_graph()) {
        let back = read_population(&write_nodes_csv(&pop).unwrap(), &write_edges_csv(&pop).unwrap()).unwrap();
        prop_assert_eq!(back.n(), pop.n());
        prop_assert_eq!(back.infection(), pop.infection());
        prop_assert_eq!(back.ages(), pop.ages());
        for i in 0..pop.n() {
            let mut a = back.neighbors(i).to_vec();
            let mut b = pop.neighbors(i).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sample_csv_round_trip(pop in arb_graph(), seed in any::<u64>()) {
        let design = SamplingDesign { n_target: pop.n().min(8), n_seeds: 1, ..SamplingDesign::default() };
        let s = run_rds(&pop, &RecruitmentModel::Random, &design, &mut from_seed(seed)).unwrap();
        let (members, alters) = write_sample_csv(&s).unwrap();
        let back = parse_sample_csv(&members, Some(&alters)).unwrap();
        prop_assert_eq!(back.len(), s.len());
        for (x, y) in back.members.iter().zip(&s.members) {
            prop_assert_eq!((&x.id, x.recruiter, x.wave, x.degree, x.z), (&y.id, y.recruiter, y.wave, y.degree, y.z));
            prop_assert_eq!(&x.alters, &y.alters);
        }
    }
}
