//! End-to-end tests of the command-line front end.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smoothing-lab"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn schema_dump_documents_columns() {
    let out = bin().arg("--schema").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for column in ["max_ratio", "sup_quotient", "rel_diff", "constant", "growth"] {
        assert!(text.contains(column), "missing column doc: {column}");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin().arg("validate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "[params]\nn = 2\ngamma = fast\nalpha = 1.8\n");
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn validate_rejection_names_the_strict_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.cfg");
    write(
        &cfg,
        "[params]\nn = 3\ngamma = 2.0\nalpha = 2.0\nbeta = 1.0\n",
    );
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpha > beta + (n-1)/2 = 2"), "{err}");
    assert!(err.contains("strict"), "{err}");
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("REJECTED"));

    // The admissible sibling passes with s = 0.
    write(
        &cfg,
        "[params]\nn = 2\ngamma = 2.0\nalpha = 2.0\nbeta = 1.0\n",
    );
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("ADMISSIBLE"));
    assert!(report.contains("0.0000000000000000e0"));
}

#[test]
fn sigma_hat_reports_total_measure_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    write(&cfg, "[sigma]\nn = 3\nradii = 0,1,3.141592653589793\n");
    let out = bin()
        .arg("sigma-hat")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let first_row = csv.lines().nth(1).unwrap();
    assert!(first_row.starts_with("0,"));
    assert!(first_row.contains("1.2566370614359172e1"), "{first_row}");
    // Near-zero at |x| = π.
    let last = csv.lines().nth(3).unwrap();
    let value: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(value.abs() < 1e-10);
}

#[test]
fn ks_norm_indicator_anchor_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.cfg");
    write(
        &cfg,
        "[grid]\ndim = 1\npoints_per_axis = 64\nhalf_width = 2.0\n\n\
         [weight]\nid = indicator:lo=0,side=1\n\n[ks]\nalpha = 0.5\ncells = 256\n",
    );
    let out = bin()
        .arg("ks-norm")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    let ks: f64 = parsed["constants"][0]["value"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!((ks - 8.0 / 3.0).abs() / (8.0 / 3.0) < 0.01, "ks = {ks}");
}

#[test]
fn remaining_commands_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, cfg_text: &str, expect: i32| -> String {
        let cfg = dir.path().join(format!("{name}.cfg"));
        write(&cfg, cfg_text);
        let out_dir = dir.path().join(name);
        let out = bin()
            .arg(name)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(expect),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read_to_string(out_dir.join("report.json")).unwrap()
    };

    let r = run(
        "decay-check",
        "[sigma]\nn = 2\nradii = 10,20,40\n",
        0,
    );
    assert!(r.contains("STABLE"));

    let r = run(
        "mc-norm",
        "[grid]\ndim = 2\npoints_per_axis = 16\nhalf_width = 2.0\n\n\
         [weight]\nid = uniform:c=1\n\n\
         [mc]\nalpha = 0.8\np = 1.0\ncenters = 3\nextent = 0.5\nradii = 0.5,1.0\n",
        0,
    );
    assert!(r.contains("mc_norm"));

    let r = run(
        "restriction-norm",
        "[grid]\ndim = 2\npoints_per_axis = 16\nhalf_width = 2.0\n\n\
         [params]\nalpha = 1.8\nbeta = 1.0\n\n[weight]\nid = bump:c=0,w=0.8,A=1\n\n\
         [rule]\ndegree = 16\n",
        0,
    );
    assert!(r.contains("normalized"));

    let r = run(
        "equivalence-check",
        "[grid]\ndim = 2\npoints_per_axis = 16\nhalf_width = 2.0\n\n\
         [params]\nalpha = 1.8\nbeta = 1.0\n\n[weight]\nid = uniform:c=1\n\n\
         [rule]\ndegree = 32\n",
        0,
    );
    assert!(r.contains("EQUIVALENT"));

    let r = run(
        "dyadic-pieces",
        "[grid]\ndim = 2\npoints_per_axis = 32\nhalf_width = 8.0\n\n\
         [params]\nalpha = 1.8\nbeta = 1.0\n\n[weight]\nid = power:a=1.8\n\n\
         [pieces]\nj_min = 2\nj_max = 2\n",
        0,
    );
    assert!(r.contains("slope_unweighted"));

    let r = run(
        "scan",
        "[grid]\ndim = 2\npoints_per_axis = 16\nhalf_width = 2.0\n\n\
         [params]\nalpha = 1.8\nbeta = 1.0\n\n[weight]\nid = bump:c=0,w=0.8,A=1\n\n\
         [evolution]\nt = 1.0\nnodes = 16\n\n\
         [family]\ncount = 1\nsigma_x = 0.28\n\n\
         [scan]\naxes = rule\nlevels = 3\nobservable = extension\n",
        0,
    );
    assert!(r.contains("verdict"));
}

fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("timestamp_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn repeated_runs_are_byte_identical_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.cfg");
    write(
        &cfg,
        "[grid]\ndim = 2\npoints_per_axis = 32\nhalf_width = 10.0\n\n\
         [params]\ngamma = 2.0\nalpha = 1.8\nbeta = 1.0\n\n\
         [weight]\nids = bump:c=0,w=1,A=1; power:a=1.8\n\n\
         [evolution]\nt = 0.5\nnodes = 32\n\n\
         [family]\ncount = 3\nmodes = 4\nrho_min = 0.75\nrho_max = 1.5\nsigma_x = 1.4\n",
    );
    let run = |sub: &str| {
        let out = bin()
            .arg("verify-smoothing")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(sub))
            .arg("--seed")
            .arg("42")
            .arg("--threads")
            .arg("2")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(dir.path().join(sub).join("report.json")).unwrap(),
            std::fs::read_to_string(dir.path().join(sub).join("report.csv")).unwrap(),
        )
    };
    let (json_a, csv_a) = run("a");
    let (json_b, csv_b) = run("b");
    assert_eq!(strip_timestamp(&json_a), strip_timestamp(&json_b));
    assert_eq!(csv_a, csv_b);
    assert!(json_a.contains("max_smoothing_ratio"));
}
