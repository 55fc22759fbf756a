use std::path::Path;
use std::process::{Command, Output};

use seqgauss::covest::qhat;
use seqgauss::harness::read_matrix;
use seqgauss::inference::{stat_cusum, stat_seq};
use seqgauss::procmodel::{gen_path, InnovationStream, KernelSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_seqgauss"));
    c.env_remove("SEQGAUSS_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn kernels() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/kernels"))
}

#[test]
fn rates_example() {
    assert_eq!(stdout(&["rates", "--q", "4", "--beta", "5"]), "chi=0.1\nxi=0.1\n");
    let text = stdout(&["rates", "--q", "4", "--beta", "3", "--n", "1024", "--d", "4"]);
    assert!(text.contains("block_chi=4\n"), "{text}");
}

#[test]
fn exit_codes() {
    let o = run(&["rates", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["rates", "--q", "1.5", "--beta", "3"]).status.code(), Some(1));
    assert_eq!(run(&["test", "--input", "/nonexistent/x.csv"]).status.code(), Some(1));
    let o = run(&["verify-coupling", "--sigma1", "[[1,0],[0,-1]]", "--sigma2", "[[1,0],[0,1]]"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_kernel_file_is_reproducible() {
    let k = kernels().join("ma1.json");
    let k = k.to_str().unwrap();
    let a = stdout(&["simulate", "--kernel", k, "--n", "100", "--seed", "7"]);
    let b = stdout(&["simulate", "--kernel", k, "--n", "100", "--seed", "7"]);
    let c = stdout(&["simulate", "--kernel", k, "--n", "100", "--seed", "8"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 100);
}

#[test]
fn seed_env_var_is_the_default() {
    let flag = stdout(&["simulate", "--kernel", "iid", "--n", "20", "--seed", "42"]);
    let env = bin().args(["simulate", "--kernel", "iid", "--n", "20"]).env("SEQGAUSS_SEED", "42").output().unwrap();
    assert_eq!(flag.as_bytes(), env.stdout.as_slice());
    let bad = bin().args(["simulate", "--kernel", "iid", "--n", "20"]).env("SEQGAUSS_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn csv_round_trip_matches_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let p = path.to_str().unwrap();
    stdout(&["simulate", "--kernel", "lipschitz", "--n", "300", "--d", "3", "--seed", "11", "--header", "--output", p]);
    let from_file = read_matrix(&path).unwrap();
    let spec = KernelSpec::from_file(&kernels().join("lipschitz.json")).unwrap().with_shape(300, 3).unwrap();
    let direct = gen_path(spec.build().unwrap().as_ref(), 300, &InnovationStream::new(11)).unwrap();
    assert!((stat_seq(&from_file) - stat_seq(&direct)).abs() <= 1e-12);
    assert!((stat_cusum(&from_file) - stat_cusum(&direct)).abs() <= 1e-12);
    let qa = qhat(&from_file, 7).unwrap();
    let qb = qhat(&direct, 7).unwrap();
    assert!(qa.at(300).sub(qb.at(300)).frobenius() <= 1e-12 * qb.at(300).frobenius());
}

#[test]
fn test_and_calibrate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let cov = dir.path().join("cov.json");
    let (xs, cs) = (x.to_str().unwrap(), cov.to_str().unwrap());
    stdout(&["simulate", "--kernel", "ma1", "--n", "200", "--d", "2", "--seed", "3", "--output", xs]);
    let report: serde_json::Value =
        serde_json::from_str(&stdout(&["test", "--input", xs, "--stat", "cusum", "--alpha", "0.1", "--seed", "1"]))
            .unwrap();
    assert!(report["reject"].is_boolean());
    assert_eq!(report["seed"], 1);
    assert_eq!(report["statistic"], "cusum");
    stdout(&["estimate-cov", "--input", xs, "--output", cs]);
    let cal: serde_json::Value =
        serde_json::from_str(&stdout(&["calibrate", "--cov", cs, "--mc", "400", "--seed", "2"])).unwrap();
    assert!(cal["quantile"].as_f64().unwrap() > 0.0);
    assert_eq!(cal["mc_reps"], 400);
}

#[test]
fn verify_coupling_swapped_diagonal() {
    let out = stdout(&["verify-coupling", "--sigma1", "[[2,0],[0,1]]", "--sigma2", "[[1,0],[0,2]]", "--seed", "4"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["expected_sq_distance"], 2.0);
    assert!(v["relative_distance_error"].as_f64().unwrap() < 0.03);
    assert!(v["target_cov_relative_error"].as_f64().unwrap() < 0.03);
}

#[test]
fn experiment_writes_report_and_tidy_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(kernels().join("ma1.json"), dir.path().join("k.json")).unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"experiment": "qhat-scaling", "kernel": "k.json", "grid": [{"n": 128, "d": 1}, {"n": 256, "d": 1}],
            "replications": 12, "seed": 8, "tidy_output": "tidy.csv"}"#,
    )
    .unwrap();
    let out = stdout(&["--jobs", "2", "experiment", "--spec", spec.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
    assert!(v["formula"].as_str().unwrap().contains("Qhat"));
    let tidy = std::fs::read_to_string(dir.path().join("tidy.csv")).unwrap();
    assert_eq!(tidy.lines().count(), 1 + 2 * 12);
    let again = stdout(&["experiment", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out, again);
}

#[test]
fn shipped_specs_and_kernels_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    for entry in std::fs::read_dir(root.join("experiments")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let spec = seqgauss::harness::ExperimentSpec::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
            spec.validate().unwrap();
            if let Some(k) = &spec.kernel {
                k.resolve(path.parent()).unwrap();
            }
        }
    }
    for entry in std::fs::read_dir(kernels()).unwrap() {
        let spec = KernelSpec::from_file(&entry.unwrap().path()).unwrap();
        spec.build().unwrap();
    }
}
