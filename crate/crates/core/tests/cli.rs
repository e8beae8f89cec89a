//! End-to-end tests of the `pdnf` binary.

use std::path::Path;
use std::process::{Command, Output};

use pdnf::io::parse_system;
use pdnf::scalar::ExactComplex;
use pdnf::series::{MultiIndex, TermKey};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdnf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const EXAMPLE: &str = "\
n = 2
mode = exact
degree = 5
period = 2pi
lambda = i, 0
sigma = 0
term 1 | 0 2 | 0 | 1
";

#[test]
fn normalize_emits_the_expected_transform() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    let out = run(&["normalize", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let phi = parse_system(Path::new(&input.replace(".txt", ".phi"))).unwrap();
    let sys = phi.exact_system.expect("exact transform file");
    let key = TermKey::new(MultiIndex(vec![0, 2]), 0);
    assert_eq!(sys.nonlinear.comps[0].coeff(&key), Some(&ExactComplex::i()));
    assert_eq!(sys.nonlinear.comps[0].num_terms(), 1);
    assert_eq!(sys.nonlinear.comps[1].num_terms(), 0);

    let g = parse_system(Path::new(&input.replace(".txt", ".g"))).unwrap();
    assert!(g.exact_system.unwrap().nonlinear.is_zero());

    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("status = ok"));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    for sub in ["resonance", "lattice"] {
        let a = run(&[sub, &input]);
        let b = run(&[sub, &input]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{sub} report not reproducible");
    }
    let a = run(&["normalize", &input]);
    let b = run(&["normalize", &input]);
    assert_eq!(a.stdout, b.stdout);
    let phi = std::fs::read(input.replace(".txt", ".phi")).unwrap();
    run(&["normalize", &input]);
    assert_eq!(phi, std::fs::read(input.replace(".txt", ".phi")).unwrap());
}

#[test]
fn parse_errors_exit_with_one_and_a_footer() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.txt", "n = 2\nmode = exact\nnonsense\n");
    let out = run(&["normalize", &input]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("status = error"));
    assert!(report.contains("error = E_PARSE"));
    assert!(report.contains("message = "));
}

#[test]
fn missing_file_is_a_validation_error() {
    let out = run(&["normalize", "/nonexistent/system.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_flag_redirects_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    let report_path = dir.path().join("report.txt");
    let out = run(&[
        "lattice",
        &input,
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(&report_path).unwrap();
    assert!(body.contains("R_lambda = 2"));
    assert!(body.contains("status = ok"));
}

#[test]
fn failing_verify_verdict_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    // a deliberately wrong normalization: zero transform, wrong normal form
    let zero_phi = write(
        dir.path(),
        "zero.phi",
        "n = 2\nmode = exact\ndegree = 5\nperiod = 2pi\nlambda = i, 0\nsigma = 0\n",
    );
    let wrong_g = write(
        dir.path(),
        "wrong.g",
        "n = 2\nmode = exact\ndegree = 5\nperiod = 2pi\nlambda = i, 0\nsigma = 0\n\
         term 1 | 0 2 | 1 | 1\n",
    );
    let out = run(&["verify", &input, "--phi", &zero_phi, "--g", &wrong_g]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("verdict: fail"), "{report}");
    assert!(report.contains("status = ok"));
}

#[test]
fn correct_normalization_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    assert!(run(&["normalize", &input]).status.success());
    let out = run(&[
        "verify",
        &input,
        "--phi",
        &input.replace(".txt", ".phi"),
        "--g",
        &input.replace(".txt", ".g"),
    ]);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("verdict: pass"), "{report}");
}

#[test]
fn floquet_reduces_the_planar_limit_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "cycle.txt",
        "n = 2\nmode = approx\ndegree = 4\nperiod = 2pi\n\
         field 1 | 1 0 | 1\nfield 1 | 0 1 | -1\nfield 1 | 3 0 | -1\nfield 1 | 1 2 | -1\n\
         field 2 | 1 0 | 1\nfield 2 | 0 1 | 1\nfield 2 | 2 1 | -1\nfield 2 | 0 3 | -1\n\
         seed 1.1 0.0\nseed_period = 6.2\n",
    );
    let out = run(&["floquet", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("period = 6.283185307"), "{report}");
    assert!(report.contains("status = ok"));
    let reduced = parse_system(Path::new(&input.replace(".txt", ".reduced"))).unwrap();
    assert!(reduced.approx_system.is_some());
}

#[test]
fn mode_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "sys.txt", EXAMPLE);
    let out = run(&["normalize", &input, "--mode", "approx"]);
    assert_eq!(out.status.code(), Some(1));
}
