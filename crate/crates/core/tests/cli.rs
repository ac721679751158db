use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use proptest::prelude::*;
use sigclust::io::{
    filter_variables, load_matrix, parse_report, write_matrix, Orientation, ReportDocument,
};
use sigclust::DataMatrix;
use tempfile::TempDir;

fn sigclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigclust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn wavy(d: usize, n: usize) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(d, n, |i, j| {
        ((i * 37 + j * 11) % 17) as f64 * 0.3 - 2.0 + if j % 2 == 0 && i < 3 { 4.0 } else { 0.0 }
    }))
    .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn test_command_writes_reports() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("x.csv");
    write_matrix(&input, &wavy(12, 10)).unwrap();
    let out = dir.path().join("out");
    let o = sigclust(&[
        "test",
        input.to_str().unwrap(),
        "--method",
        "hard",
        "--nsim",
        "150",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let p_line = stdout
        .lines()
        .find(|l| l.starts_with("p empirical"))
        .unwrap();
    let digits: String = p_line
        .split_whitespace()
        .last()
        .unwrap()
        .chars()
        .filter(char::is_ascii_digit)
        .collect();
    assert!(digits.trim_start_matches('0').len() >= 6, "{p_line}");

    let null_rows = fs::read_to_string(out.join("null_cis.csv")).unwrap();
    assert_eq!(null_rows.lines().count(), 151);
    let ecdf = fs::read_to_string(out.join("ecdf.csv")).unwrap();
    assert!(ecdf.lines().last().unwrap().ends_with(",1"));

    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let doc = parse_report(&text).unwrap();
    assert_eq!(doc.report.n_sim, 150);
    assert_eq!(doc.config.seed, 3);
    assert!(doc.flags.is_empty());
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn reports_match_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("x.csv");
    write_matrix(&input, &wavy(40, 12)).unwrap();
    let run = |workers: &str, out: &str| {
        let out = dir.path().join(out);
        let o = sigclust(&[
            "test",
            input.to_str().unwrap(),
            "--method",
            "combined",
            "--nsim",
            "100",
            "--seed",
            "17",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let doc = parse_report(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        doc.to_json(false).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_eq!(a, run("8", "c"));
    assert!(!a.contains("timing_seconds"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| sigclust(args).status.code().unwrap();

    let bad = write(d, "bad.csv", "1,2,3\n4,5,abc\n");
    assert_eq!(code(&["test", &bad]), 3);
    let nan = write(d, "nan.csv", "1,2,3\n4,NaN,6\n");
    assert_eq!(code(&["test", &nan]), 4);
    let flat = write(d, "flat.csv", "2,2,2\n2,2,2\n");
    assert_eq!(code(&["test", &flat]), 5);
    assert_eq!(code(&["test", d.join("missing.csv").to_str().unwrap()]), 6);

    let ok = write(d, "ok.csv", "1,2,3,4\n2,1,4,3\n0,5,1,2\n");
    let labels = write(d, "labels.txt", "1\n2\n");
    assert_eq!(
        code(&["test", &ok, "--labels", &labels, "--nsim", "100"]),
        7
    );
    assert_eq!(code(&["test", &ok, "--filter-top-k", "9"]), 7);
    assert_eq!(code(&["test", &ok, "--nsim", "10"]), 7);
}

#[test]
fn spectrum_and_tci_commands() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("x.csv");
    write_matrix(&input, &wavy(6, 9)).unwrap();
    let o = sigclust(&["spectrum", input.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sigma_n_sq="));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let spec = write(dir.path(), "spec.txt", "3\n");
    let o = sigclust(&["tci", &spec]);
    let v: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((v - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-6);
}

#[test]
fn simulate_command_writes_summaries() {
    let dir = TempDir::new().unwrap();
    let scen = write(
        dir.path(),
        "grid.tsv",
        "# small grid\nv\tw\td\tn\ta\tmode\treps\tn_sim\n10\t1\t30\t10\t0\tnone\t2\t100\n1\t0\t30\t10\t2\tall\t2\t100\n",
    );
    let out = dir.path().join("sim");
    let o = sigclust(&[
        "simulate",
        "--scenario",
        &scen,
        "--methods",
        "sample,hard",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("v,w,d,n,a,mode,reps,n_sim,sample_mean"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["scenarios"].as_array().unwrap().len(), 2);
}

#[test]
fn observations_in_rows_transposes() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "m.csv", "1,2\n3,4\n5,6\n");
    let m = load_matrix(&p, Orientation::ObservationsInRows).unwrap();
    assert_eq!((m.d(), m.n()), (2, 3));
}

#[test]
fn filter_to_four_thousand_genes() {
    let x = DataMatrix::new(DMatrix::from_fn(5000, 6, |i, j| {
        10.0 + ((i * 7 + j * 3) % 11) as f64 * (1.0 + i as f64 / 5000.0)
    }))
    .unwrap();
    let f = filter_variables(&x, 4000).unwrap();
    assert_eq!((f.d(), f.n()), (4000, 6));
}

#[test]
fn report_document_round_trips() {
    use sigclust::io::RunManifest;
    use sigclust::{run_test, Method, TestConfig};
    let r = run_test(&wavy(8, 8), &TestConfig::new(Method::Soft).with_n_sim(100)).unwrap();
    let manifest = RunManifest {
        input: "x.csv".into(),
        orientation: Orientation::VariablesInRows,
        method: "soft".into(),
        n_sim: 100,
        seed: 0,
        labels: None,
        filter_top_k: None,
        out_dir: Default::default(),
        workers: None,
    };
    let doc = ReportDocument::new(r, manifest);
    let back = parse_report(&doc.to_json(true).unwrap()).unwrap();
    assert_eq!(back, doc);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn write_then_read_is_exact(vals in prop::collection::vec(-1e6f64..1e6, 12)) {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("m.csv");
        let x = DataMatrix::from_column_slice(3, 4, &vals).unwrap();
        write_matrix(&p, &x).unwrap();
        prop_assert_eq!(load_matrix(&p, Orientation::VariablesInRows).unwrap(), x);
    }
}
