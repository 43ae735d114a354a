use std::path::{Path, PathBuf};

use moqd_bench::config::load_config;
use moqd_core::neuro::Td3Config;
use moqd_core::{AlgorithmConfig, AlgorithmId, EnvConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn presets(sub: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(configs_dir().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn pointwalker_presets_match_the_built_in_defaults() {
    let files = presets("pointwalker");
    assert_eq!(files.len(), 9);
    for f in files {
        let cfg = load_config(&f).unwrap();
        let mut expected = AlgorithmConfig::new(cfg.algorithm, EnvConfig::pointwalker());
        expected.pg_objectives = cfg.pg_objectives.clone();
        assert_eq!(cfg, expected, "{}", f.display());
        assert_eq!(cfg.td3, Td3Config::desk());
    }
}

#[test]
fn bisphere_presets_parse() {
    for f in presets("bisphere") {
        let cfg = load_config(&f).unwrap();
        assert!(!cfg.algorithm.uses_policy_gradients(), "{}", f.display());
        assert_eq!(cfg.iterations, 100);
        assert_eq!(cfg.archive.num_centroids, 32);
    }
}

#[test]
fn full_scale_preset() {
    let cfg = load_config(&configs_dir().join("full_scale.toml")).unwrap();
    assert_eq!(cfg.algorithm, AlgorithmId::MomePgx);
    assert_eq!(cfg.td3, Td3Config::full_scale());
    assert_eq!(cfg.iterations * cfg.batch_size, 1_024_000);
    assert_eq!((cfg.archive.num_centroids, cfg.archive.max_front_size), (128, 50));
}
