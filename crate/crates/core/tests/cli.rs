use std::fs;
use std::path::Path;

use rocpca::bench::{generate, SyntheticSpec};
use rocpca::cli::io::read_matrix;
use rocpca::cli::run;
use rocpca::config::SolverConfig;
use rocpca::frame::{pc_affinity, DataMatrix, OrthonormalFrame};
use rocpca::solver::{fit, Problem};

fn rocpca(args: &[&str]) -> i32 {
    run(std::iter::once("rocpca").chain(args.iter().copied()))
}

fn simulate_into(dir: &Path) {
    let out = dir.to_str().unwrap();
    let code = rocpca(&[
        "simulate", "--n", "60", "--p", "8", "--rank", "3", "--d", "20,15,10", "--sigma2", "1", "--outliers", "4",
        "--leverage", "8", "--seed", "3", "--out", out,
    ]);
    assert_eq!(code, 0);
}

fn summary_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("{key} missing from {text}"))
}

#[test]
fn missing_input_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(rocpca(&["fit", missing.to_str().unwrap(), "--rank", "2", "--q", "1"]), 2);
    let err = read_matrix(&missing).unwrap_err().to_string();
    assert!(err.contains("absent.csv"), "{err}");
}

#[test]
fn malformed_csv_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2,3\n4,oops,6\n").unwrap();
    assert_eq!(rocpca(&["fit", path.to_str().unwrap(), "--rank", "1", "--q", "0"]), 2);
    let err = read_matrix(&path).unwrap_err().to_string();
    assert!(err.contains("row 2") && err.contains("column 2"), "{err}");
}

#[test]
fn configuration_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path());
    let x = dir.path().join("x.csv");
    let x = x.to_str().unwrap();
    assert_eq!(rocpca(&["bench", "nosuch"]), 3);
    assert_eq!(rocpca(&["fit", x, "--rank", "0", "--q", "2"]), 3);
    assert_eq!(rocpca(&["fit", x, "--rank", "3"]), 3);
    assert_eq!(rocpca(&["fit", x, "--rank", "3", "--q", "2", "--mode", "column"]), 3);
    assert_eq!(rocpca(&["fit", x, "--q", "2"]), 3);
    assert_eq!(rocpca(&["no-such-command"]), 3);

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "rank = 3\nunknown_key = 1\n").unwrap();
    assert_eq!(rocpca(&["--config", cfg.to_str().unwrap(), "fit", x, "--q", "2"]), 3);
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate_into(a.path());
    simulate_into(b.path());
    for name in ["x.csv", "truth_v.csv", "truth_vperp.csv", "truth_s.csv", "outlier_index.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn simulate_then_fit_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path());
    let x_path = dir.path().join("x.csv");
    let truth_path = dir.path().join("truth_v.csv");
    let out = dir.path().join("fit");
    let code = rocpca(&[
        "--threads", "2", "fit", x_path.to_str().unwrap(), "--rank", "3", "--q", "4", "--seed", "9",
        "--truth", truth_path.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let spec = SyntheticSpec::rows(60, 8, vec![20.0, 15.0, 10.0], 1.0, 4, 8.0).with_seed(3);
    let (x, truth) = generate(&spec).unwrap();
    assert_eq!(&read_matrix(&x_path).unwrap(), x.values());
    let result = fit(&Problem::new(x, SolverConfig::new(3).with_q(4).with_seed(9)).unwrap()).unwrap();
    let expected = pc_affinity(&result.v_hat, &truth.v_star).unwrap();
    let reported: f64 = summary_value(&out.join("summary.txt"), "affinity").parse().unwrap();
    assert_eq!(reported, expected);
    assert_eq!(&read_matrix(&out.join("v_hat.csv")).unwrap(), result.v_hat.as_matrix());

    let flagged = fs::read_to_string(out.join("outliers.csv")).unwrap();
    let rows: Vec<usize> = flagged.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    let expected_rows: Vec<usize> = result.flagged().rows().iter().map(|r| r + 1).collect();
    assert_eq!(rows, expected_rows);
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path());
    let x = dir.path().join("x.csv");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# fit settings\nrank = 3\nq = 50\nmax_outer = 40\n").unwrap();
    let out = dir.path().join("fit");
    let code = rocpca(&[
        "--config", cfg.to_str().unwrap(), "fit", x.to_str().unwrap(), "--q", "4", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(summary_value(&out.join("summary.txt"), "flagged"), "4");
}

#[test]
fn zero_budget_on_clean_data_recovers_the_subspace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let code = rocpca(&[
        "simulate", "--n", "50", "--p", "6", "--rank", "2", "--d", "10,5", "--sigma2", "0.01", "--seed", "1",
        "--out", d,
    ]);
    assert_eq!(code, 0);
    let x = DataMatrix::new(read_matrix(&dir.path().join("x.csv")).unwrap()).unwrap();
    let truth = OrthonormalFrame::new(read_matrix(&dir.path().join("truth_v.csv")).unwrap()).unwrap();
    let out = dir.path().join("fit");
    let code = rocpca(&[
        "fit", dir.path().join("x.csv").to_str().unwrap(), "--rank", "2", "--q", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v_hat = OrthonormalFrame::new(read_matrix(&out.join("v_hat.csv")).unwrap()).unwrap();
    assert!(pc_affinity(&v_hat, &truth).unwrap() > 99.0);
    assert_eq!(fs::read_to_string(out.join("outliers.csv")).unwrap().trim(), "row");
    assert_eq!(x.n(), 50);
}

#[test]
fn batch_fit_and_pitfall_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path());
    let x = dir.path().join("x.csv");
    let out = dir.path().join("batch");
    let code = rocpca(&[
        "batch-fit", x.to_str().unwrap(), "--rank", "3", "--q", "4", "--plan", "2,3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(summary_value(&out.join("summary.txt"), "plan"), "2,3");
    assert_eq!(
        rocpca(&["batch-fit", x.to_str().unwrap(), "--rank", "3", "--q", "4", "--plan", "2,2", "--out", out.to_str().unwrap()]),
        3
    );
    assert_eq!(rocpca(&["pitfall", "--p", "101"]), 0);
}

#[test]
fn bench_writes_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pitfall.md");
    assert_eq!(rocpca(&["bench", "pitfall", "--format", "markdown", "--out", out.to_str().unwrap()]), 0);
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with('|'), "{text}");
    assert_eq!(rocpca(&["bench", "pitfall", "--format", "xml"]), 3);
}
