use std::fs;
use std::process::Command;

use proptest::prelude::*;
use screenkit::solver::{solve, SolveOptions};
use screenkit::{DesignMatrix, GroupStructure, LossModel, PenaltyModel, Problem};
use screenkit_cli::dataset::{load_libsvm, make_synthetic, parse_libsvm, write_libsvm, Dataset};
use serde_json::Value;

fn screenkit(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_screenkit"))
        .args(args)
        .env_remove("SCREENKIT_THREADS")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn sparse_rows() -> impl Strategy<Value = Vec<(f64, Vec<(usize, f64)>)>> {
    let row = (-5.0f64..5.0, prop::collection::btree_map(0usize..12, -1e6f64..1e6, 0..6));
    prop::collection::vec(row.prop_map(|(y, m)| (y, m.into_iter().collect())), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn libsvm_round_trip(rows in sparse_rows()) {
        let text: String = rows
            .iter()
            .map(|(y, entries)| {
                let feats: Vec<String> = entries.iter().map(|(j, v)| format!("{}:{}", j + 1, v)).collect();
                format!("{} {}\n", y, feats.join(" "))
            })
            .collect();
        let first = parse_libsvm(text.as_bytes(), "mem").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.svm");
        write_libsvm(&first, &path).unwrap();
        let second = load_libsvm(&path).unwrap();
        prop_assert_eq!(&first.x, &second.x);
        prop_assert_eq!(&first.y, &second.y);
        prop_assert_eq!(first.x.nnz(), rows.iter().map(|r| r.1.len()).sum::<usize>());
    }
}

#[test]
fn csv_input_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_synthetic(30, 8, 3, 10.0, 4).unwrap().data;
    let mut text = String::from("f1,f2,f3,f4,f5,f6,f7,f8,target\n");
    let dense = data.x.to_row_major();
    for i in 0..30 {
        let row: Vec<String> = dense[i * 8..(i + 1) * 8].iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{},{}\n", row.join(","), data.y[i]));
    }
    let path = dir.path().join("d.csv");
    fs::write(&path, text).unwrap();
    let (code, stdout, err) = screenkit(&["solve", "--data", path.to_str().unwrap(), "--target", "target", "--eps", "1e-8"]);
    assert_eq!(code, 0, "{err}");
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["rule"], "dynamic_gap");

    let (code, _, _) = screenkit(&["solve", "--data", path.to_str().unwrap(), "--target", "nope"]);
    assert_eq!(code, 2);
}

#[test]
fn path_writes_one_trace_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path");
    let (code, stdout, err) = screenkit(&[
        "path", "--synthetic", "40,80,5", "--n-lambdas", "5", "--min-ratio", "0.05", "--eps", "1e-8",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let summary: Vec<Value> = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary.len(), 5);
    assert_eq!(summary[0]["lambda_ratio"].as_f64(), Some(1.0));
    assert!((summary[4]["lambda_ratio"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    for t in 0..5 {
        let trace = fs::read_to_string(out.join(format!("trace_{t:03}.csv"))).unwrap();
        assert!(trace.starts_with("epoch,primal,dual,gap,radius,n_screened,ms\n"));
    }
    assert!(out.join("summary.json").exists());
}

#[test]
fn identify_reports_a_nondegenerate_instance() {
    let (code, stdout, err) = screenkit(&["identify", "--synthetic", "40,80,5", "--seed", "2"]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["delta_z"].as_f64().unwrap() > 0.0);
    assert!(report["k0_measured"].is_u64());
    assert!(report["k0_radius"].is_u64());
    assert_eq!(report["identified_after_radius"], true);

    let (code, stdout, err) = screenkit(&["identify", "--synthetic", "40,80,5", "--seed", "2", "--penalty", "enet"]);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["k0_bound_linear"].is_f64());
}

#[test]
fn thread_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_screenkit"))
        .args(["bench", "--synthetic", "20,10,2", "--eps", "1e-4"])
        .env("SCREENKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn box_penalty_reports_no_ratio() {
    let (code, stdout, err) = screenkit(&["solve", "--synthetic", "20,10,2", "--penalty", "box", "--lower=-0.5", "--upper=0.5"]);
    assert_eq!(code, 0, "{err}");
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert!(summary["lambda_ratio"].is_null());
    let (code, _, _) = screenkit(&["path", "--synthetic", "20,10,2", "--penalty", "box"]);
    assert_eq!(code, 1);
}

#[test]
fn pure_noise_is_fully_screened_above_lambda_max() {
    let Dataset { x, y, .. } = make_synthetic(30, 50, 0, 1.0, 8).unwrap().data;
    let groups = GroupStructure::singletons(&x);
    let loss = LossModel::quadratic(y);
    let unit = Problem::new(&x, &groups, &loss, PenaltyModel::l1(1.0).unwrap()).unwrap();
    let lmax = unit.lambda_max().unwrap();
    let problem = unit.with_penalty(PenaltyModel::l1(1.01 * lmax).unwrap()).unwrap();
    let (sol, _) = solve(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(sol.epochs, 0);
    assert_eq!(sol.state.n_safe(), 50);
    assert!(sol.beta.iter().all(|b| *b == 0.0));
}

#[test]
fn written_matrix_is_sparse_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let x = DesignMatrix::from_rows(&[vec![0.0, 2.5], vec![-1.0, 0.0]]).unwrap();
    let data = Dataset::new(x, vec![1.0, -1.0], "mem").unwrap();
    let path = dir.path().join("s.svm");
    write_libsvm(&data, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "1 2:2.5\n-1 1:-1\n");
    let back = load_libsvm(&path).unwrap();
    assert!(back.x.is_sparse());
    assert_eq!(back.x.to_row_major(), data.x.to_row_major());
}
