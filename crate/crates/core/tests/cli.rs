use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_basinscope"));
    c.env("RUST_LOG", "warn");
    c
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

fn write_config(dir: &Path, extra_model: &str) -> PathBuf {
    let text = format!(
        "name = \"cli\"\nruns = 30\nsplit_seeds = [100, 102]\nchunk_size = 10\noutput_dir = \"out\"\n\n\
         [dataset]\nkind = \"breast_cancer\"\npath = \"{}\"\n\n\
         [model]\nclass = \"logreg\"\nregularization = \"varied\"\nc_min = 0.01\nc_max = 100.0\n{extra_model}",
        data("wdbc.csv").display()
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["run", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["run"])), 1);
    assert_eq!(code(&run(&["run", "--config", "x.toml", "--bogus"])), 1);
    assert_eq!(code(&run(&["run", "--config", "/nonexistent/x.toml"])), 1);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "unknown_key = 3\n");
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = write_config(dir.path(), "");
    assert_eq!(code(&run(&["run", "--config", cfg.to_str().unwrap(), "--runs", "1"])), 1);
}

#[test]
fn missing_dataset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("wdbc.csv", "absent.csv");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(code(&run(&["run", "--config", cfg.to_str().unwrap()])), 2);
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn run_analyze_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");

    let o = run(&["run", "--config", cfg, "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read(&out.join("report.json"));
    for f in ["tables/split_table.csv", "tables/cluster_table.csv", "figures/split100_clusters.svg", "figures/universal.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let chunks: Vec<_> = std::fs::read_dir(out.join("chunks")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(chunks.iter().filter(|p| p.extension().is_some_and(|e| e == "jsonl")).count(), 6);
    assert_eq!(chunks.iter().filter(|p| p.to_string_lossy().ends_with(".meta.json")).count(), 6);

    assert_eq!(code(&run(&["analyze", "--config", cfg])), 0);
    assert_eq!(read(&out.join("report.json")), report);

    let svg = read(&out.join("figures/split100_accuracy.svg"));
    std::fs::remove_dir_all(out.join("figures")).unwrap();
    assert_eq!(code(&run(&["report", "--output", out.to_str().unwrap()])), 0);
    assert_eq!(read(&out.join("figures/split100_accuracy.svg")), svg);

    // a missing chunk is a gap, and resuming fills exactly that gap
    let victim = out.join("chunks/split102_chunk10-19.jsonl");
    std::fs::remove_file(&victim).unwrap();
    let o = run(&["analyze", "--config", cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing runs 10, 11"));
    assert_eq!(code(&run(&["run", "--config", cfg, "--resume"])), 0);
    assert_eq!(read(&out.join("report.json")), report);
}

#[test]
fn overrides_and_env_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let alt = dir.path().join("alt");
    let o = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--splits", "104", "--runs", "12"])
        .args(["--output", alt.to_str().unwrap()])
        .env("BASINSCOPE_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(alt.join("chunks/split104_chunk10-11.jsonl").exists());
    let table = String::from_utf8(read(&alt.join("tables/split_table.csv"))).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("104,12,"));
}

#[test]
fn tampered_records_fail_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["run", "--config", cfg])), 0);
    // scaling every importance vector leaves the clustering alone but the
    // retrained representatives no longer reproduce their records
    let chunks = dir.path().join("out/chunks");
    for entry in std::fs::read_dir(&chunks).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "jsonl") {
            let text = String::from_utf8(read(&p)).unwrap();
            let lines: Vec<String> = text
                .lines()
                .map(|l| {
                    let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                    for x in v["e"].as_array_mut().unwrap() {
                        *x = serde_json::json!(x.as_f64().unwrap() * (1.0 + 1e-6));
                    }
                    v.to_string()
                })
                .collect();
            std::fs::write(&p, lines.join("\n") + "\n").unwrap();
        }
    }
    let o = run(&["analyze", "--config", cfg]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not reproduce"));
}

#[test]
fn corrupt_chunk_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["run", "--config", cfg, "--splits", "100"])), 0);
    std::fs::write(dir.path().join("out/chunks/split100_chunk0-9.jsonl"), "{not json\n").unwrap();
    let o = run(&["analyze", "--config", cfg, "--splits", "100"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}
