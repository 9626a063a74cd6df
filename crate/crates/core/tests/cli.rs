use std::fs;
use std::path::{Path, PathBuf};

use chaoscert::cli::{execute, run, Cli, EXIT_CONSISTENCY, EXIT_INPUT, EXIT_OK};
use chaoscert::corpus::random_kernel;
use chaoscert::chaos::exact_covariance;
use chaoscert::io::{write_expansion, write_operator};
use chaoscert::mc::shard_rng;
use chaoscert::operator::{OperatorMatrix, Truncation};
use chaoscert::tensor::ChaosExpansion;
use clap::Parser;
use serde_json::Value;
use tempfile::TempDir;

fn two_order_case(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = shard_rng(5, 0);
    let f = ChaosExpansion::from_kernels(
        Truncation::new(3, 2).unwrap(),
        [random_kernel(1, 3, 2, &mut rng).unwrap().scale(0.8), random_kernel(2, 3, 2, &mut rng).unwrap().scale(0.6)],
    )
    .unwrap();
    let (fp, tp) = (dir.join("f.json"), dir.join("t.json"));
    write_expansion(&fp, &f).unwrap();
    write_operator(&tp, &exact_covariance(&f)).unwrap();
    (fp, tp)
}

fn args<'a>(out: &'a Path, rest: &[&'a str]) -> Vec<String> {
    let mut v = vec!["chaoscert".to_string(), "--out".into(), out.display().to_string()];
    v.extend(rest.iter().map(|s| s.to_string()));
    v
}

fn read_report(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn certify_writes_report_and_table() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let out = tmp.path().join("out");
    let cli = Cli::parse_from(args(&out, &["certify", "--expansion", f.to_str().unwrap(), "--target", t.to_str().unwrap()]));
    let s = execute(&cli).unwrap();
    assert_eq!(s.exit_code, EXIT_OK);
    assert!(!s.reused);
    let report = read_report(&s.report_path);
    assert_eq!(report["config"]["command"], "certify");
    let bound = report["result"]["bound"].as_f64().unwrap();
    assert!(bound.is_finite() && bound > 0.0);
    let csv = out.join(format!("{}.csv", s.config.stem()));
    assert!(fs::read_to_string(csv).unwrap().lines().count() > 1);
}

#[test]
fn rerun_leaves_existing_report_unchanged() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let out = tmp.path().join("out");
    let a = args(&out, &["certify", "--expansion", f.to_str().unwrap(), "--target", t.to_str().unwrap()]);
    let first = execute(&Cli::parse_from(&a)).unwrap();
    let before = fs::read(&first.report_path).unwrap();
    let second = execute(&Cli::parse_from(&a)).unwrap();
    assert!(second.reused);
    assert!(second.written.is_empty());
    assert_eq!(first.report_path, second.report_path);
    assert_eq!(before, fs::read(&second.report_path).unwrap());
}

#[test]
fn output_directory_does_not_change_the_name() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let rest = ["certify", "--expansion", f.to_str().unwrap(), "--target", t.to_str().unwrap()];
    let a = execute(&Cli::parse_from(args(&tmp.path().join("a"), &rest))).unwrap();
    let b = execute(&Cli::parse_from(args(&tmp.path().join("b"), &rest))).unwrap();
    assert_eq!(a.config.stem(), b.config.stem());
    let mut seeded = args(&tmp.path().join("c"), &rest);
    seeded.splice(1..1, ["--seed".to_string(), "9".to_string()]);
    assert_ne!(a.config.stem(), execute(&Cli::parse_from(seeded)).unwrap().config.stem());
}

#[test]
fn config_file_matches_flags() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let cfg = tmp.path().join("run.json");
    let body = serde_json::json!({
        "seed": 4,
        "certify": { "expansion": f, "target": t, "m-grid": [1, 2] }
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let out = tmp.path().join("out");
    let from_file = execute(&Cli::parse_from(args(&out, &["--config", cfg.to_str().unwrap(), "certify"]))).unwrap();
    let from_flags = execute(&Cli::parse_from(args(
        &out,
        &["--seed", "4", "certify", "--expansion", f.to_str().unwrap(), "--target", t.to_str().unwrap(), "--m-grid", "1,2"],
    )))
    .unwrap();
    assert_eq!(from_file.config.stem(), from_flags.config.stem());
    assert!(from_flags.reused);
}

#[test]
fn malformed_input_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let (_, t) = two_order_case(tmp.path());
    let out = tmp.path().join("out");
    let code = run(args(&out, &["certify", "--expansion", bad.to_str().unwrap(), "--target", t.to_str().unwrap()]));
    assert_eq!(code, EXIT_INPUT);
    assert!(!out.exists());
    assert_eq!(run(args(&out, &["certify", "--no-such-flag"])), EXIT_INPUT);
    assert_eq!(run(args(&out, &["gallery", "--case", "nope"])), EXIT_INPUT);
    assert!(!out.exists());
}

#[test]
fn zero_samples_and_negative_sigma_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let out = tmp.path().join("out");
    let (fs_, ts) = (f.to_str().unwrap(), t.to_str().unwrap());
    assert_eq!(run(args(&out, &["--samples", "0", "validate", "--expansion", fs_, "--target", ts])), EXIT_INPUT);
    assert_eq!(
        run(args(&out, &["--samples", "100", "validate", "--expansion", fs_, "--target", ts, "--sigma-factor", "-1"])),
        EXIT_INPUT
    );
    assert!(!out.exists());
}

#[test]
fn dimension_mismatch_exits_3() {
    let tmp = TempDir::new().unwrap();
    let (f, _) = two_order_case(tmp.path());
    let t3 = tmp.path().join("t3.json");
    write_operator(&t3, &OperatorMatrix::identity(3)).unwrap();
    let out = tmp.path().join("out");
    let code = run(args(&out, &["certify", "--expansion", f.to_str().unwrap(), "--target", t3.to_str().unwrap()]));
    assert_eq!(code, EXIT_CONSISTENCY);
    assert!(!out.exists());
}

#[test]
fn gaussian_pair_certificate() {
    let tmp = TempDir::new().unwrap();
    let (c1, c2) = (tmp.path().join("c1.json"), tmp.path().join("c2.json"));
    write_operator(&c1, &OperatorMatrix::from_diagonal(&[1.0, 0.0]).unwrap()).unwrap();
    write_operator(&c2, &OperatorMatrix::from_diagonal(&[0.0, 1.0]).unwrap()).unwrap();
    let out = tmp.path().join("out");
    let s = execute(&Cli::parse_from(args(&out, &["certify", "--covariance", c1.to_str().unwrap(), "--target", c2.to_str().unwrap()])))
        .unwrap();
    let r = read_report(&s.report_path);
    assert_eq!(r["result"]["bound"].as_f64().unwrap(), 1.0);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn validate_small_case_passes() {
    let tmp = TempDir::new().unwrap();
    let (f, t) = two_order_case(tmp.path());
    let out = tmp.path().join("out");
    let s = execute(&Cli::parse_from(args(
        &out,
        &["--samples", "20000", "--shards", "2", "validate", "--expansion", f.to_str().unwrap(), "--target", t.to_str().unwrap()],
    )))
    .unwrap();
    assert_eq!(s.exit_code, EXIT_OK, "{:?}", s.message);
    let r = read_report(&s.report_path);
    assert_eq!(r["result"]["pass"], true);
    assert_eq!(r["result"]["covariance_mismatch_flagged"], false);
}

#[test]
fn gallery_and_corpus_write_their_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let g = execute(&Cli::parse_from(args(&out, &["gallery", "--case", "degenerate-pair"]))).unwrap();
    assert_eq!(g.exit_code, EXIT_OK);
    assert!(g.written.iter().any(|p| p.ends_with("claims.json")));
    let c = execute(&Cli::parse_from(args(&out, &["corpus", "--count", "4", "--scalar-count", "3"]))).unwrap();
    assert_eq!(c.exit_code, EXIT_OK);
    let jsons = c.written.iter().filter(|p| p.extension().is_some_and(|e| e == "json")).count();
    assert!(jsons >= 4 * 2 + 3);
}

#[test]
fn krr_and_plot() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let k = execute(&Cli::parse_from(args(&out, &["krr", "--n-grid", "10,100"]))).unwrap();
    assert_eq!(k.exit_code, EXIT_OK);
    let p = execute(&Cli::parse_from(args(&out, &["plot", "--reports", k.report_path.to_str().unwrap()]))).unwrap();
    assert_eq!(p.exit_code, EXIT_OK);
    assert!(p.written.iter().any(|w| w.extension().is_some_and(|e| e == "svg")));
}
