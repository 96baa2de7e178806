use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lgm::data::{load_table, DataTable};
use lgm::datasets::{scotland, scotland_spec};
use lgm::marginals::Marginal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn lgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgm"))
        .args(args)
        .output()
        .unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn lm_files(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut csv = String::from("y,x\n");
    for _ in 0..100 {
        let x: f64 = rng.sample(StandardNormal);
        let y = -2.0 + 1.5 * x + 0.5 * rng.sample::<f64, _>(StandardNormal);
        csv += &format!("{y},{x}\n");
    }
    let (m, d) = (dir.join("model.json"), dir.join("data.csv"));
    write(
        &m,
        r#"{"response":"y","fixed":["1","x"],"control":{"compute":{"return_marginals":true,"config":true,"dic":true,"cpo":true}}}"#,
    );
    write(&d, &csv);
    (m, d)
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn fit_writes_summaries_that_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let (m, d) = lm_files(dir.path());
    let out = dir.path().join("out");
    let o = lgm(&[
        "fit",
        "--model",
        m.to_str().unwrap(),
        "--data",
        d.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--samples",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fixed = load_table(&out.join("summary_fixed.csv")).unwrap();
    assert_eq!(fixed.text_column("name").unwrap(), ["(Intercept)", "x"]);
    assert_eq!(
        fixed.names(),
        [
            "name",
            "mean",
            "sd",
            "0.025quant",
            "0.5quant",
            "0.975quant",
            "mode",
            "kld"
        ]
    );
    assert!((fixed.column("mean").unwrap()[1] - 1.5).abs() < 0.2);
    for f in csv_files(&out) {
        load_table(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
    for name in [
        "summary_random.csv",
        "summary_hyperpar.csv",
        "summary_fitted.csv",
        "grid.csv",
        "cpo.csv",
        "samples.csv",
        "hyperpar_samples.csv",
        "diagnostics.json",
        "run_manifest.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(load_table(&out.join("samples.csv")).unwrap().n_rows(), 50);
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert!(diag["mlik"].as_f64().unwrap().is_finite());
    assert!(diag["dic"]["dic"].as_f64().unwrap().is_finite());
    assert!(Marginal::read_path(&out.join("marginals/fixed._Intercept_.csv")).is_ok());
}

#[test]
fn missing_data_flag_is_a_usage_error() {
    let o = lgm(&["fit", "--model", "m.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--data"));
}

#[test]
fn invalid_model_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let (_, d) = lm_files(dir.path());
    let m = dir.path().join("bad.json");
    write(
        &m,
        r#"{"response":"y","fixed":["1","x"],"family":"weibull"}"#,
    );
    let o = lgm(&[
        "fit",
        "--model",
        m.to_str().unwrap(),
        "--data",
        d.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family"));
}

#[test]
fn failed_fit_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let (_, d) = lm_files(dir.path());
    let m = dir.path().join("m.json");
    write(
        &m,
        r#"{"response":"y","fixed":["1","x"],"control":{"inla":{"max_iter":1}}}"#,
    );
    let out = dir.path().join("out");
    let o = lgm(&[
        "fit",
        "--model",
        m.to_str().unwrap(),
        "--data",
        d.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-safe",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode search"));
}

fn symmetric_marginal(dir: &Path) -> PathBuf {
    let p = dir.join("m.csv");
    let m = Marginal::gaussian(0.0, 1.0, 101, 8.0).unwrap();
    m.write_csv(std::fs::File::create(&p).unwrap()).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn marginal_queries_print_plain_values() {
    let dir = tempfile::tempdir().unwrap();
    let f = symmetric_marginal(dir.path());
    let f = f.to_str().unwrap();

    let p: f64 = stdout(&lgm(&["marginal", "p", "--at", "0", f]))
        .trim()
        .parse()
        .unwrap();
    assert!((p - 0.5).abs() < 1e-9);

    let hpd = stdout(&lgm(&["marginal", "hpd", "--level", "0.95", f]));
    let v: Vec<f64> = hpd.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(v.len(), 2);
    assert!(
        (v[0] + 1.96).abs() < 0.01 && (v[1] - 1.96).abs() < 0.01,
        "{hpd}"
    );

    let z = stdout(&lgm(&["marginal", "z", f]));
    let labels: Vec<&str> = z
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(
        labels,
        ["mean", "sd", "0.025quant", "0.5quant", "0.975quant"]
    );

    let q = stdout(&lgm(&["marginal", "q", "--prob", "0.025,0.975", f]));
    assert_eq!(q.lines().count(), 2);
    let d = stdout(&lgm(&["marginal", "d", "--at", "-1,0,1", f]));
    assert_eq!(d.lines().count(), 3);
    assert_eq!(
        stdout(&lgm(&["marginal", "r", "--n", "7", f]))
            .lines()
            .count(),
        7
    );
    let m: f64 = stdout(&lgm(&["marginal", "m", f])).trim().parse().unwrap();
    assert!(m.abs() < 1e-6);
    let e: f64 = stdout(&lgm(&["marginal", "e", "--transform", "exp", f]))
        .trim()
        .parse()
        .unwrap();
    assert!((e - 0.5f64.exp()).abs() < 1e-3, "{e}");

    let t = dir.path().join("t.csv");
    std::fs::write(
        &t,
        stdout(&lgm(&["marginal", "t", "--transform", "exp", f])),
    )
    .unwrap();
    let lognormal = Marginal::read_path(&t).unwrap();
    assert!((lognormal.qmarginal(0.5).unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn malformed_marginal_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    write(&f, "x,density\n0,1,2\n");
    let o = lgm(&["marginal", "z", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("model.json");
    write(&m, &scotland_spec().to_json());
    let d = dir.path().join("data.csv");
    let data: DataTable = scotland();
    data.write_csv(std::fs::File::create(&d).unwrap(), 17)
        .unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("out{threads}"));
        let o = lgm(&[
            "fit",
            "--model",
            m.to_str().unwrap(),
            "--data",
            d.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--samples",
            "500",
            "--seed",
            "3",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("1"), run("8"));
    let files = csv_files(&a);
    assert!(files.len() > 100);
    for f in files.iter().chain([&a.join("diagnostics.json")]) {
        let rel = f.strip_prefix(&a).unwrap();
        assert_eq!(
            std::fs::read(f).unwrap(),
            std::fs::read(b.join(rel)).unwrap(),
            "{}",
            rel.display()
        );
    }
}
