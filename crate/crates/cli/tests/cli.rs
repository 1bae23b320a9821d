use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use selinf::linalg::{Matrix, Vector};
use selinf::mle::infer;
use selinf::queries::{build_target, kkt, solve_randomized_lasso, Dataset, RandomizationSpec, TargetKind};
use selinf::rng;
use selinf::simulation::lambda_theory;
use serde_json::Value;

fn selinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selinf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

/// Design with two strong signals, written with round-trip float formatting.
fn synthetic(n: usize, p: usize, seed: u64) -> (Matrix, Vector) {
    let mut g = rng::stream(seed, 0);
    let x = Matrix::from_fn(n, p, |_, _| rng::std_normal(&mut g)) / (n as f64).sqrt();
    let mut coef = Vector::zeros(p);
    coef[1] = 8.0;
    coef[3] = -6.0;
    let y = &x * coef + rng::std_normal_vec(&mut g, n);
    (x, y)
}

fn write_csv(dir: &Path, x: &Matrix, y: &Vector) -> PathBuf {
    let mut s = (0..x.ncols()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    s.push_str(",resp\n");
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            s.push_str(&format!("{},", x[(i, j)]));
        }
        s.push_str(&format!("{}\n", y[i]));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn validator(name: &str) -> jsonschema::Validator {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let load = |f: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(dir.join(f)).unwrap()).unwrap() };
    let manifest = jsonschema::Resource::from_contents(load("manifest.schema.json")).unwrap();
    jsonschema::options()
        .with_resource("https://selinf.example/schemas/manifest.schema.json", manifest)
        .build(&load(name))
        .unwrap()
}

fn assert_valid(schema: &str, doc: &Value) {
    let v = validator(schema);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

#[test]
fn infer_matches_library_pipeline_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = synthetic(80, 8, 11);
    let csv = write_csv(dir.path(), &x, &y);
    let out = selinf(&[
        "infer", "--data", csv.to_str().unwrap(), "--response", "resp", "--no-standardize", "--seed", "5",
    ]);
    let report = stdout_json(&out);

    let data = Dataset::with_estimated_sigma2(x, y).unwrap();
    let lambda = lambda_theory(&data.x, data.sigma2, 500, &mut rng::stream(5, 0)).unwrap();
    let rand = RandomizationSpec::isotropic(8, 0.5 * data.sigma2, rng::derive_seed(5, 1)).unwrap();
    let outcome = solve_randomized_lasso(&data, &rand, lambda, 1.0 / 80f64.sqrt()).unwrap();
    let target = build_target(&data, &outcome.active, TargetKind::Partial).unwrap();
    let k = kkt(&data, &outcome, &target).unwrap();
    let lib = infer(&target, &k, &rand.cov, 0.1).unwrap();

    assert_eq!(report["lambda"].as_f64(), Some(lambda));
    assert_eq!(report["sigma2"].as_f64(), Some(data.sigma2));
    let sel = report["selected"].as_array().unwrap();
    assert_eq!(sel.len(), lib.dim());
    for (i, s) in sel.iter().enumerate() {
        assert_eq!(s["column"].as_u64(), Some(lib.active[i] as u64));
        assert_eq!(s["estimate"].as_f64(), Some(lib.mle[i]));
        assert_eq!(s["std_error"].as_f64(), Some(lib.std_errors[i]));
        assert_eq!(s["p_value"].as_f64(), Some(lib.pvalues[i]));
        assert_eq!(s["lower"].as_f64(), Some(lib.intervals[i].0));
        assert_eq!(s["upper"].as_f64(), Some(lib.intervals[i].1));
    }
    assert!(lib.active.contains(&1) && lib.active.contains(&3));
}

#[test]
fn every_query_kind_produces_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = synthetic(120, 10, 3);
    let csv = write_csv(dir.path(), &x, &y);
    for query in ["lasso", "screening", "slope", "lasso2", "ms-slope"] {
        let out = selinf(&["infer", "--data", csv.to_str().unwrap(), "--response", "resp", "--query", query]);
        let report = stdout_json(&out);
        assert_valid("infer.schema.json", &report);
        assert_eq!(report["manifest"]["config"]["query"], query);
        for s in report["selected"].as_array().unwrap() {
            assert!(s["lower"].as_f64().unwrap() < s["upper"].as_f64().unwrap());
        }
    }
    let full = selinf(&["infer", "--data", csv.to_str().unwrap(), "--response", "resp", "--target", "full", "--lambda", "cv.1se"]);
    assert_valid("infer.schema.json", &stdout_json(&full));
}

#[test]
fn infer_writes_identical_bytes_on_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = synthetic(60, 6, 8);
    let csv = write_csv(dir.path(), &x, &y);
    let run = |out: &str| {
        let path = dir.path().join(out);
        let o = selinf(&[
            "infer", "--data", csv.to_str().unwrap(), "--response", "resp", "--query", "lasso2",
            "--lambda", "cv.min", "--output", path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("a.json");
    let b = run("b.json");
    let strip = |v: Vec<u8>| {
        let mut j: Value = serde_json::from_slice(&v).unwrap();
        j["manifest"]["outputs"] = Value::Null;
        j
    };
    assert_eq!(strip(a.clone()), strip(b));
    assert_eq!(a, run("a.json"));
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = synthetic(30, 4, 1);
    let csv = write_csv(dir.path(), &x, &y);
    let c = csv.to_str().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,resp\n1,2\n3,oops\n").unwrap();
    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "a,b,c,resp\n1,2,3,1\n2,1,0,2\n0,5,1,3\n").unwrap();

    let cases: Vec<Vec<&str>> = vec![
        vec!["infer", "--data", c, "--response", "missing"],
        vec!["infer", "--data", bad.to_str().unwrap(), "--response", "resp"],
        vec!["infer", "--data", wide.to_str().unwrap(), "--response", "resp", "--target", "full", "--sigma2", "1"],
        vec!["infer", "--data", "/nonexistent.csv", "--response", "resp"],
        vec!["infer", "--data", c, "--response", "resp", "--lambda", "-3"],
        vec!["infer", "--data", c, "--response", "resp", "--query", "ms-slope", "--target", "full"],
        vec!["pivot-check", "--beta", "1.5", "--draws", "0"],
        vec!["simulate", "--out-dir", dir.path().to_str().unwrap(), "--rho", "1.5"],
        vec!["no-such-command"],
    ];
    for args in cases {
        let out = selinf(&args);
        assert_eq!(out.status.code(), Some(64), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(selinf(&["--help"]).status.code(), Some(0));
}

#[test]
fn empty_selection_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = synthetic(40, 5, 2);
    let csv = write_csv(dir.path(), &x, &y);
    let out = selinf(&["infer", "--data", csv.to_str().unwrap(), "--response", "resp", "--lambda", "1e6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty selection"));
}

#[test]
fn simulate_outputs_validate_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"n": 80, "p": 12, "reps": 20, "snr_grid": [0.5, 2.0], "seed": 4}"#).unwrap();
    let run = |threads: &str| {
        let out_dir = dir.path().join("out");
        let o = Command::new(env!("CARGO_BIN_EXE_selinf"))
            .args(["simulate", "--config", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "--method", "two-lasso"])
            .env("SELINF_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(out_dir.join("summary.json")).unwrap(),
            std::fs::read_to_string(out_dir.join("summary_long.csv")).unwrap(),
        )
    };
    let (json, csv) = run("1");
    assert_eq!((json.clone(), csv.clone()), run("2"));

    let doc: Value = serde_json::from_slice(&json).unwrap();
    assert_valid("simulate.schema.json", &doc);
    assert_eq!(doc["summary"]["config"]["method"], "two_lasso");
    assert_eq!(doc["summary"]["config"]["n"], 80);

    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("snr,metric,method,target,value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 5));
    // Multi-query runs have no single randomized-lasso comparator.
    assert!(rows.iter().any(|r| r[2] == "randomized_lasso" && r[4] == "NA"));
    assert!(rows.iter().any(|r| r[0] == "0.5" && r[1] == "coverage" && r[2] == "mle"));
}

#[test]
fn pivot_check_reports_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let ecdf = dir.path().join("ecdf.csv");
    let args = ["pivot-check", "--beta", "1.5", "--draws", "10000", "--seed", "3", "--out", ecdf.to_str().unwrap()];
    let first = selinf(&args);
    let report = stdout_json(&first);
    assert_valid("pivot_check.schema.json", &report);
    let pvalue = report["ks_pvalue"].as_f64().unwrap();
    assert_eq!(report["passes"].as_bool(), Some(pvalue > 0.01));
    assert!(report["ks_statistic"].as_f64().unwrap() < 0.03);
    let table = std::fs::read_to_string(&ecdf).unwrap();
    assert_eq!(table.lines().count(), 10_001);
    assert_eq!(table.lines().last().unwrap().split(',').nth(1), Some("1"));

    let second = selinf(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(table, std::fs::read_to_string(&ecdf).unwrap());

    let rare = stdout_json(&selinf(&["pivot-check", "--beta", "-3", "--draws", "2000"]));
    assert!(rare["attempts"].as_u64().unwrap() > 2000);
}
