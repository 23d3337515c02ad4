//! Black-box tests of the `ivasim` binary: exit codes, golden outputs,
//! determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ivasim")
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn data_args(dir: &Path) -> Vec<String> {
    vec![
        "--households".into(),
        dir.join("households.csv").display().to_string(),
        "--expenditures".into(),
        dir.join("expenditures.csv").display().to_string(),
        "--rates".into(),
        dir.join("rates.csv").display().to_string(),
    ]
}

fn run(args: &[String]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should run")
}

fn assert_trees_equal(actual: &Path, expected: &Path) {
    let mut expected_files: Vec<PathBuf> = walk(expected);
    expected_files.sort();
    assert!(!expected_files.is_empty(), "no golden files in {expected:?}");
    for file in expected_files {
        let rel = file.strip_prefix(expected).unwrap();
        let got = actual.join(rel);
        let want_bytes = fs::read(&file).unwrap();
        let got_bytes =
            fs::read(&got).unwrap_or_else(|_| panic!("missing output file {got:?}"));
        assert_eq!(
            got_bytes,
            want_bytes,
            "output {rel:?} differs from the golden copy"
        );
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

#[test]
fn validate_passes_on_the_fixture() {
    let out = run(&{
        let mut a = vec!["validate".to_string()];
        a.extend(data_args(&fixtures()));
        a
    });
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("errors: 0"));
    assert!(stdout.contains("household_rows: 40"));
}

#[test]
fn validate_reports_unknown_item_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["households.csv", "rates.csv"] {
        fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
    }
    let mut exp = fs::read_to_string(fixtures().join("expenditures.csv")).unwrap();
    exp.push_str("1,X999,5.0,0.0\n");
    fs::write(dir.path().join("expenditures.csv"), exp).unwrap();

    let out = run(&{
        let mut a = vec!["validate".to_string()];
        a.extend(data_args(dir.path()));
        a
    });
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("UnknownItemCode"), "stdout: {stdout}");
    assert!(stdout.contains("X999"));
}

#[test]
fn validate_fails_on_empty_file_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["expenditures.csv", "rates.csv"] {
        fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
    }
    fs::write(
        dir.path().join("households.csv"),
        "household_id,weight,size,income_monetary,income_nonmonetary\n",
    )
    .unwrap();
    let out = run(&{
        let mut a = vec!["validate".to_string()];
        a.extend(data_args(dir.path()));
        a
    });
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("EmptyInput"));
}

#[test]
fn baseline_matches_goldens_and_reruns_identically() {
    let run_once = || {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().join("baseline");
        let mut args = vec!["baseline".to_string()];
        args.extend(data_args(&fixtures()));
        args.extend([
            "--out".to_string(),
            out_dir.display().to_string(),
            "--z-sweep".to_string(),
            "0,0.5,1".to_string(),
        ]);
        let out = run(&args);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let mut contents: Vec<(PathBuf, Vec<u8>)> = walk(&out_dir)
            .into_iter()
            .map(|p| {
                let rel = p.strip_prefix(&out_dir).unwrap().to_path_buf();
                let bytes = fs::read(&p).unwrap();
                (rel, bytes)
            })
            .collect();
        contents.sort();
        assert_trees_equal(&out_dir, &golden().join("baseline"));
        contents
    };
    let first = run_once();
    let second = run_once();
    assert_eq!(first, second, "baseline reruns must be byte-identical");
}

#[test]
fn simulate_matches_goldens_and_solution_rechecks() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let mut args = vec!["simulate".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--scenario".to_string(),
        scenarios().join("reform1.cfg").display().to_string(),
        "--scenario".to_string(),
        scenarios().join("reform3.cfg").display().to_string(),
        "--out".to_string(),
        out_dir.display().to_string(),
    ]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("reform1").is_dir());
    assert!(out_dir.join("reform3").is_dir());
    assert_trees_equal(&out_dir, &golden().join("sim"));

    // recheck neutrality with the engine at the rate printed in solution.csv
    let solution = fs::read_to_string(out_dir.join("reform3/solution.csv")).unwrap();
    let fields: Vec<&str> = solution.lines().nth(1).unwrap().split(',').collect();
    let rate: f64 = fields[1].parse().unwrap();
    let schedule =
        ivasim_core::RateSchedule::from_csv_path(&fixtures().join("rates.csv")).unwrap();
    let set = ivasim_core::load_microdata(
        &fixtures().join("households.csv"),
        &fixtures().join("expenditures.csv"),
        &schedule,
    )
    .unwrap();
    let scenario = ivasim_core::load_scenario(&scenarios().join("reform3.cfg")).unwrap();
    let compiled = ivasim_core::compile(&scenario, &schedule).unwrap();
    let target = ivasim_core::baseline_revenue(&set, &schedule);
    let revenue = ivasim_core::net_revenue(&set, &schedule, &compiled, rate);
    // the printed rate is truncated to 6 decimals; a small slack on top of
    // the solver tolerance covers that
    assert!(
        (revenue - target).abs() <= 1e-5 * target,
        "residual {} too large",
        (revenue - target).abs() / target
    );
}

#[test]
fn simulate_skips_solve_for_fixed_rate_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fixed.cfg");
    fs::write(
        &cfg,
        r#"
standard_rate = 0.25

[[classes]]
name = "standard"
kind = "multiplier"
value = 1.0
selector = "default"

[[classes]]
name = "domestic_services"
kind = "excluded"
selector = "tag:domestic_service"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("sim");
    let mut args = vec!["simulate".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--scenario".to_string(),
        cfg.display().to_string(),
        "--out".to_string(),
        out_dir.display().to_string(),
    ]);
    let out = run(&args);
    assert!(out.status.success());
    let solution = fs::read_to_string(out_dir.join("fixed/solution.csv")).unwrap();
    let line = solution.lines().nth(1).unwrap();
    assert!(line.starts_with("fixed,0.250000,false,"), "line: {line}");
}

#[test]
fn unsolvable_scenario_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stuck.cfg");
    // the only taxed items are domestic services, whose base is zero, so
    // revenue is stuck at zero and the baseline target cannot be reached
    fs::write(
        &cfg,
        r#"
standard_rate = "solve"

[[classes]]
name = "standard"
kind = "multiplier"
value = 1.0
selector = "tag:domestic_service"

[[classes]]
name = "rest"
kind = "excluded"
selector = "default"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("sim");
    let mut args = vec!["simulate".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--scenario".to_string(),
        cfg.display().to_string(),
        "--out".to_string(),
        out_dir.display().to_string(),
    ]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
}

#[test]
fn decompose_matches_goldens_with_expected_signs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("dec");
    let mut args = vec!["decompose".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--scenario".to_string(),
        scenarios().join("reform3.cfg").display().to_string(),
        "--out".to_string(),
        out_dir.display().to_string(),
    ]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_trees_equal(&out_dir, &golden().join("dec"));

    let text = fs::read_to_string(out_dir.join("decomposition.csv")).unwrap();
    let delta_of = |variant: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(variant))
            .unwrap_or_else(|| panic!("{variant} missing"))
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(delta_of("full_scenario"), 0.0);
    assert!(delta_of("without_zero_basket") < 0.0);
    assert!(delta_of("without_selective") > 0.0);
}

#[test]
fn markdown_format_renders_the_same_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("baseline_md");
    let mut args = vec!["baseline".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--out".to_string(),
        out_dir.display().to_string(),
        "--format".to_string(),
        "markdown".to_string(),
    ]);
    let out = run(&args);
    assert!(out.status.success());
    let shares = fs::read_to_string(out_dir.join("budget_shares.md")).unwrap();
    assert!(shares.starts_with("### "));
    assert!(shares.contains("basic_food_basket |"));
}

#[test]
fn synth_output_validates_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = run(&[
        "synth".to_string(),
        "--n".to_string(),
        "25".to_string(),
        "--seed".to_string(),
        "3".to_string(),
        "--out".to_string(),
        data.display().to_string(),
    ]);
    assert!(out.status.success());
    let check = run(&{
        let mut a = vec!["validate".to_string()];
        a.extend(data_args(&data));
        a
    });
    assert!(check.status.success());
}

#[test]
fn unwritable_output_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let mut args = vec!["baseline".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--out".to_string(),
        blocker.join("sub").display().to_string(),
    ]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stamp_flag_adds_a_header_line() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("stamped");
    let mut args = vec!["baseline".to_string()];
    args.extend(data_args(&fixtures()));
    args.extend([
        "--out".to_string(),
        out_dir.display().to_string(),
        "--stamp".to_string(),
    ]);
    assert!(run(&args).status.success());
    let text = fs::read_to_string(out_dir.join("rates_summary.csv")).unwrap();
    assert!(text.starts_with("# generated_unix: "));
}
