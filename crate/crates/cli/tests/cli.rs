use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npcluster"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn error_line(out: &Output) -> Vec<String> {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with("error\t")).unwrap_or_else(|| panic!("no error line in {text:?}"));
    line.split('\t').map(str::to_string).collect()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["synth", "cluster", "density", "dbs", "anova", "agree", "temporal", "correlate"] {
        assert!(text.contains(sub), "{sub} missing from help");
        assert!(run(dir.path(), &[sub, "--help"]).status.success());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["bogus"],
        vec!["cluster"],
        vec!["cluster", "--catalog", "x.csv", "--out", "o", "--alpha-levels", "many"],
        vec!["synth", "--out", "o", "--patches", "1", "--no-patches"],
    ] {
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let fields = error_line(&out);
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[1], "usage");
    }
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["cluster", "--catalog", "missing.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)[1], "io");

    fs::write(dir.path().join("two.csv"), "lon,lat,mag,time\n-72,-36,3,2010-03-01\n-71,-35,3,2010-03-02\n").unwrap();
    let out = run(dir.path(), &["cluster", "--catalog", "two.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)[1], "too-few");

    fs::write(dir.path().join("bad.csv"), "lon,lat,mag,time\n-72,-36,3,2010-03-01\n-71,oops,3,2010-03-02\n").unwrap();
    let out = run(dir.path(), &["cluster", "--catalog", "bad.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)[1], "parse");
}

#[test]
fn synth_then_cluster_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "--out", "s", "--blobs", "3", "--n", "300", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["catalog.csv", "labels.csv", "centers.csv", "slip.csv", "trench.txt", "config.json"] {
        assert!(dir.path().join("s").join(f).is_file(), "{f}");
    }
    let out = run(dir.path(), &["cluster", "--catalog", "s/catalog.csv", "--out", "c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["partition.csv", "tree.csv", "mode_function.csv", "cores.csv", "edges.csv", "config.json"] {
        assert!(dir.path().join("c").join(f).is_file(), "{f}");
    }
    let partition = fs::read_to_string(dir.path().join("c/partition.csv")).unwrap();
    assert_eq!(partition.lines().count(), 301);
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c/config.json")).unwrap()).unwrap();
    assert_eq!(config["args"]["command"]["subcommand"], "cluster");
}
