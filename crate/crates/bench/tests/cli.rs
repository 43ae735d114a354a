use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn moqd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moqd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const MOME_WALKER: &str = r#"
algorithm = "mome"
iterations = 2
batch_size = 8

[archive]
num_centroids = 8
max_front_size = 4
cvt_samples = 2000

[env]
kind = "pointwalker"
episode_length = 20
policy_hidden = [8]
"#;

const MOME_SPHERE: &str = r#"
algorithm = "mome"
iterations = 5
batch_size = 8

[archive]
num_centroids = 8
max_front_size = 4
cvt_samples = 2000

[env]
kind = "bisphere"
"#;

#[test]
fn run_writes_the_four_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", MOME_WALKER);
    let out = tmp.path().join("run");
    let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "3", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "archive.jsonl", "manifest.json", "config.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("evals,moqd_score,global_hv,max_sum,coverage,seconds"));
    assert_eq!(lines.count(), 3);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["algorithm"], "mome");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    // the saved config reruns to the same metrics
    let out2 = tmp.path().join("rerun");
    let o = moqd(&["run", "--config", path_str(&out.join("config.toml")), "--seed", "3", "--out", path_str(&out2)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(metrics, fs::read_to_string(out2.join("metrics.csv")).unwrap());
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", MOME_SPHERE);
    let read = |d: &str| {
        let out = tmp.path().join(d);
        let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "11", "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0));
        (fs::read(out.join("metrics.csv")).unwrap(), fs::read(out.join("archive.jsonl")).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &MOME_SPHERE.replace("\"mome\"", "\"mome_pgxx\""));
    let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "0", "--out", path_str(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("algorithm"), "{err}");

    let cfg = write_config(tmp.path(), "bad2.toml", &MOME_SPHERE.replace("num_centroids", "num_centroidz"));
    let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "0", "--out", path_str(&tmp.path().join("y"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("archive"));

    let o = moqd(&["run", "--config", path_str(&tmp.path().join("missing.toml")), "--seed", "0", "--out", "z"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(moqd(&[]).status.code(), Some(2));
    assert_eq!(moqd(&["run", "--seed", "x"]).status.code(), Some(2));
    assert_eq!(moqd(&["plot", "--kind", "bars", "--out", "a.svg", "b"]).status.code(), Some(2));
    assert_eq!(moqd(&["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_1() {
    // PG variants need an MDP: this is a config error, not a crash
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "pg.toml", &MOME_SPHERE.replace("\"mome\"", "\"mome_pgx\""));
    let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "0", "--out", path_str(&tmp.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
    // an output path under a regular file cannot be created
    let blocker = write_config(tmp.path(), "file", "");
    let cfg = write_config(tmp.path(), "ok.toml", MOME_SPHERE);
    let o = moqd(&["run", "--config", path_str(&cfg), "--seed", "0", "--out", path_str(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(1));
}

fn make_group(root: &Path, name: &str, body: &str, seeds: &[u64]) -> PathBuf {
    let cfg = write_config(root, &format!("{name}.toml"), body);
    let group = root.join(name);
    for s in seeds {
        let out = group.join(format!("seed{s}"));
        let o = moqd(&["run", "--config", path_str(&cfg), "--seed", &s.to_string(), "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    group
}

#[test]
fn plot_compare_and_tessellate() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let seeds = [0, 1, 2, 3, 4];
    let a = make_group(root, "mome", MOME_SPHERE, &seeds);
    let b = make_group(root, "nsga2", &MOME_SPHERE.replace("\"mome\"", "\"nsga2\""), &seeds);

    let svg = root.join("plots/curves.svg");
    let o = moqd(&["plot", "--kind", "curves", "--out", path_str(&svg), path_str(&a), path_str(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("mome") && text.contains("nsga2"));
    assert_eq!(text.matches("class=\"iqr\"").count(), 2);

    let heat = root.join("heat.svg");
    let o = moqd(&["plot", "--kind", "archive", "--out", path_str(&heat), path_str(&a.join("seed0"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&heat).unwrap().matches("class=\"cell ").count(), 8);

    let csv = root.join("cmp.csv");
    let o = moqd(&["compare", "--metric", "moqd_score", "--csv", path_str(&csv), path_str(&a), path_str(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("mome vs nsga2"), "{report}");
    assert!(fs::read_to_string(&csv).unwrap().starts_with("kind,a,b"));

    let o = moqd(&["compare", "--metric", "hv", path_str(&a)]);
    assert_eq!(o.status.code(), Some(2));

    // a group missing one seed cannot be paired
    fs::remove_dir_all(b.join("seed4")).unwrap();
    let o = moqd(&["compare", "--metric", "moqd_score", path_str(&a), path_str(&b)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[4]"));

    // a foreign metrics file is a schema error
    fs::write(b.join("seed0/metrics.csv"), "step,score\n1,2\n").unwrap();
    let o = moqd(&["plot", "--kind", "curves", "--out", path_str(&svg), path_str(&b)]);
    assert_eq!(o.status.code(), Some(2));

    let empty = root.join("empty/archive.jsonl");
    let cfg = write_config(root, "t.toml", MOME_SPHERE);
    let o = moqd(&["tessellate", "--config", path_str(&cfg), "--out", path_str(&empty)]);
    assert_eq!(o.status.code(), Some(0));
    let archive = moqd_core::MoqdArchive::read_snapshot(std::io::BufReader::new(fs::File::open(&empty).unwrap())).unwrap();
    assert_eq!(archive.centroids().len(), 8);
    assert!(archive.is_empty());
}
