//! Replays the fuzz corpus seeds through the parser entry points.

use std::fs;
use std::path::{Path, PathBuf};

use rdsmdr::bootstrap::BootstrapConfig;
use rdsmdr::harness::{ingest, IngestOptions, ScenarioConfig};
use rdsmdr::io::{
    from_json, parse_edges_csv, parse_nodes_csv, parse_sample_csv, parse_survey_csv,
    parse_tie_table_csv, read_population,
};
use rdsmdr::netgen::PopulationRecipe;
use rdsmdr::recruitment::RecruitmentModel;
use rdsmdr::rng::from_seed;
use rdsmdr::sampler::SamplingDesign;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.clone(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn name(p: &Path) -> &str {
    p.file_name().unwrap().to_str().unwrap()
}

#[test]
fn node_seeds() {
    for (p, text) in seeds("parse_nodes_csv") {
        assert_eq!(
            parse_nodes_csv(&text).is_ok(),
            name(&p) != "missing_z.csv",
            "{}",
            p.display()
        );
    }
}

#[test]
fn edge_seeds() {
    for (p, text) in seeds("parse_edges_csv") {
        match text.split_once('\0') {
            Some((nodes, edges)) => {
                assert_eq!(read_population(nodes, edges).unwrap().edge_count(), 2)
            }
            None => assert_eq!(parse_edges_csv(&text).unwrap().len(), 2, "{}", p.display()),
        }
    }
}

#[test]
fn tie_table_seeds() {
    let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    for (p, text) in seeds("parse_tie_table_csv") {
        assert_eq!(
            parse_tie_table_csv(&text, &ids).is_ok(),
            name(&p) == "symmetric.csv",
            "{}",
            p.display()
        );
    }
}

#[test]
fn sample_seeds() {
    for (p, text) in seeds("parse_sample_csv") {
        let parsed = match text.split_once('\0') {
            Some((m, a)) => parse_sample_csv(m, Some(a)),
            None => parse_sample_csv(&text, None),
        };
        let s = parsed.unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(s
            .members
            .iter()
            .enumerate()
            .all(|(i, m)| m.recruiter.is_none_or(|r| r < i)));
    }
}

#[test]
fn survey_seeds() {
    for (p, text) in seeds("parse_survey_csv") {
        let raw = parse_survey_csv(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let (sample, audit) = ingest(&raw, &IngestOptions::default(), &mut from_seed(0)).unwrap();
        assert_eq!(sample.len(), raw.len());
        assert_eq!(
            audit.modified_count > 0,
            name(&p) == "needs_repair.csv",
            "{}",
            p.display()
        );
    }
}

#[test]
fn json_seeds() {
    for (p, text) in seeds("json_configs") {
        let parsed = [
            from_json::<ScenarioConfig>(&text).is_ok(),
            from_json::<BootstrapConfig>(&text).is_ok(),
            from_json::<SamplingDesign>(&text).is_ok(),
            from_json::<RecruitmentModel>(&text).is_ok(),
            from_json::<PopulationRecipe>(&text).is_ok(),
            from_json::<IngestOptions>(&text).is_ok(),
        ];
        assert!(
            parsed.iter().any(|&ok| ok),
            "{} parses as no config type",
            p.display()
        );
    }
}
