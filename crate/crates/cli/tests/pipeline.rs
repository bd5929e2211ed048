use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdx_itr::formats::read_artifact;
use pdx_itr::pipeline::{Manifest, RuleArtifact, MANIFEST_FORMAT, RULE_FORMAT};
use pdx_itr::report::{CellReport, REPORTS_FORMAT};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pdx-itr"));
    c.env_remove("PDXITR_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) -> PathBuf {
    let out = run(&["simulate", "--lines", "40", "--out", s(dir), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("config.toml")
}

fn with_l_sup(config: &Path, l_sup: &str) -> PathBuf {
    let text = std::fs::read_to_string(config)
        .unwrap()
        .replace("l_sup = [5]", &format!("l_sup = {l_sup}"));
    let p = config.with_file_name("custom.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_then_run_produces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate(dir.path());
    let out = run(&["run", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("results");
    let cells: Vec<CellReport> = read_artifact(&res.join("reports.json"), REPORTS_FORMAT).unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c.report.is_some()));
    let csv = std::fs::read_to_string(res.join("reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let manifest: Manifest = read_artifact(&res.join("manifest.json"), MANIFEST_FORMAT).unwrap();
    assert_eq!(manifest.cells.len(), 2);
    for o in &manifest.outputs {
        assert!(res.join(o).is_file(), "{o:?}");
    }

    // a saved rule scores the lines it was trained on
    let rule_path = res.join("rules/neg_bar__ql1__lsup-5.json");
    let rule: RuleArtifact = read_artifact(&rule_path, RULE_FORMAT).unwrap();
    let rec = run(&[
        "recommend",
        "--rule",
        s(&rule_path),
        "--features",
        s(&dir.path().join("features.tsv")),
    ]);
    assert!(rec.status.success());
    let text = String::from_utf8(rec.stdout).unwrap();
    assert_eq!(text.lines().count(), 41);
    let fm = pdx_itr::io::read_features(&dir.path().join("features.tsv")).unwrap();
    let direct = rule.recommend(&fm).unwrap();
    for (line, (id, names)) in text.lines().skip(1).zip(&direct) {
        assert_eq!(line, format!("{id}\t{}", names.join(",")));
    }
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_l_sup(&simulate(dir.path()), "[3, 5]");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        run(&["evaluate", "--config", s(&cfg), "--out", s(&a), "--workers", "1"])
            .status
            .success()
    );
    assert!(
        run(&["evaluate", "--config", s(&cfg), "--out", s(&b), "--workers", "4"])
            .status
            .success()
    );
    for f in [
        "reports.csv",
        "reports.json",
        "plot_p_opt_by_method.csv",
        "plot_p_opt_by_lsup.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn too_many_screened_genes_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_l_sup(&simulate(dir.path()), "[50]");
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("L_sup = 50") && err.contains("only 10 genes"), "{err}");
}

#[test]
fn failed_cells_are_recorded_and_others_kept() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate(dir.path());
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#"{ name = "lasso" }"#, r#"{ name = "sl4" }"#)
        + "\n[superlearner]\nc2 = 40\niterations = 50\n";
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let res = dir.path().join("results");
    let manifest: Manifest = read_artifact(&res.join("manifest.json"), MANIFEST_FORMAT).unwrap();
    let status: Vec<&str> = manifest.cells.iter().map(|c| c.status.as_str()).collect();
    assert_eq!(status, ["ok", "failed"]);
    assert!(res.join("rules/neg_bar__ql1__lsup-5.json").is_file());
    let csv = std::fs::read_to_string(res.join("reports.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",failed,"));
}

#[test]
fn raw_measurements_with_latent_and_smoothed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate(dir.path());
    // caliper measurements derived from the simulated responses
    let resp = std::fs::read_to_string(dir.path().join("responses.tsv")).unwrap();
    let mut raw = String::from("line_id\ttreatment\tday\tmajor_mm\tminor_mm\n");
    for row in resp.lines().skip(1) {
        let f: Vec<&str> = row.split('\t').collect();
        let y: f64 = f[2].parse().unwrap();
        for (day, scale) in [
            (0.0, 1.0),
            (7.0, 1.0 - 0.1 * y),
            (14.0, 1.0 - 0.2 * y),
            (21.0, 1.0 - 0.15 * y),
        ] {
            let minor = 8.0 * f64::max(scale, 0.2).cbrt();
            raw.push_str(&format!("{}\t{}\t{day}\t{}\t{minor}\n", f[0], f[1], minor * 1.25));
        }
    }
    std::fs::write(dir.path().join("responses.tsv"), raw).unwrap();
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace(
            r#"methods = [{ name = "ql1" }, { name = "lasso" }]"#,
            r#"methods = [{ name = "ql1", dae = true }, { name = "rf", smoothed = true }]
responses = ["neg_bar", "log_ttd"]"#,
        )
        .replace(r#"responses = ["neg_bar"]"#, "")
        + "\n[autoencoder]\nepochs = 30\nbottleneck_grid = [2]\n\n[forest]\nn_trees = 20\n";
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["run", "--config", s(&cfg), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("results");
    let cells: Vec<CellReport> = read_artifact(&res.join("reports.json"), REPORTS_FORMAT).unwrap();
    let ids: Vec<&str> = cells.iter().map(|c| c.cell.as_str()).collect();
    assert_eq!(
        ids,
        [
            "neg_bar__ql1_dae__lsup-all",
            "neg_bar__rf_smoothed__lsup-5",
            "log_ttd__ql1_dae__lsup-all",
            "log_ttd__rf_smoothed__lsup-5"
        ]
    );
    // the latent rule carries its encoder and reads raw features
    let rule = res.join("rules/neg_bar__ql1_dae__lsup-all.json");
    let rec = run(&[
        "recommend",
        "--rule",
        s(&rule),
        "--features",
        s(&dir.path().join("features.tsv")),
    ]);
    assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
}

#[test]
fn bad_input_row_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate(dir.path());
    let f = dir.path().join("features.tsv");
    let mut text = std::fs::read_to_string(&f).unwrap();
    text = text.replacen("\t5.", "\tfive", 1);
    std::fs::write(&f, text).unwrap();
    let out = run(&["evaluate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("features.tsv:2:"), "{err}");
}
