//! End-to-end runs of the `compdet` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "n=30",
    "--set",
    "k_values=[5,10,15]",
    "--set",
    "m_locations=150",
    "--set",
    "trials=4",
    "--set",
    r#"dictionary={"source":"synthetic","priors":[0.1,0.2,0.3,0.4],"d_min":0.1,"seed":5}"#,
    "--set",
    r#"alpha_law={"kind":"uniform_scaled","low":2,"high":4}"#,
    "--set",
    r#"anomaly={"count":15,"distance":0.5}"#,
    "--set",
    r#"detector.eta={"kind":"quantiles","points":11}"#,
];

fn compdet(args: &[&str], extra: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_compdet"));
    cmd.args(args).args(extra);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().expect("spawn compdet")
}

fn run_ok(out: &Path, extra: &[&str]) {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = compdet(&args, extra, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("{col}={:?}", row[col]))
}

#[test]
fn same_seed_same_bytes_regardless_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in ["dsd", "asd", "roc"] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let dir = tmp.path().join(format!("{mode}-{threads}"));
            let mut args = vec!["run", "--out", dir.to_str().unwrap(), "--seed", "9"];
            args.extend_from_slice(SMALL);
            let o = compdet(&args, &["--set", &format!("mode={mode}")], Some(threads));
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            outputs.push(csv_files(&dir));
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "mode {mode}");
    }
    let other = tmp.path().join("other");
    run_ok(&other, &["--seed", "10"]);
    assert_ne!(csv_files(&other)["dsd_trials.csv"], csv_files(&tmp.path().join("dsd-1"))["dsd_trials.csv"]);
}

#[test]
fn metadata_sidecar_records_run() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &[]);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["n"], 30);
    assert!(meta["unix_time"].as_u64().unwrap() > 0);
    assert_eq!(meta["files"].as_array().unwrap().len(), 2);
}

#[test]
fn dsd_aggregates_are_trial_means() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &[]);
    let trials = read_table(&tmp.path().join("dsd_trials.csv"));
    let agg = read_table(&tmp.path().join("dsd_aggregate.csv"));
    assert_eq!(agg.len(), 3 * 5 * 5);
    for a in &agg {
        let group: Vec<_> = trials
            .iter()
            .filter(|t| ["method", "alpha_mode", "K", "target_j"].iter().all(|c| t[*c] == a[*c]))
            .collect();
        assert_eq!(group.len(), 4);
        let defined: Vec<f64> = group.iter().filter(|t| !t["empirical_pfdr"].is_empty()).map(|t| num(t, "empirical_pfdr")).collect();
        assert_eq!(num(a, "trials_defined") as usize, defined.len());
        if !defined.is_empty() {
            let mean = defined.iter().sum::<f64>() / defined.len() as f64;
            assert!((num(a, "pfdr_mean") - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
        let bound = group.iter().map(|t| num(t, "bound_value")).sum::<f64>() / 4.0;
        assert!((num(a, "bound_mean") - bound).abs() <= 1e-12);
    }
}

#[test]
fn asd_and_roc_aggregates_are_trial_means() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &["--set", "mode=asd"]);
    let runs = read_table(&tmp.path().join("asd_runs.csv"));
    for a in read_table(&tmp.path().join("asd_aggregate.csv")) {
        let g: Vec<_> = runs
            .iter()
            .filter(|r| ["method", "alpha_mode", "K", "delta"].iter().all(|c| r[*c] == a[*c]))
            .collect();
        for col in ["fdr", "fnr", "pd", "pf"] {
            let mean = g.iter().map(|r| num(r, col)).sum::<f64>() / g.len() as f64;
            assert!((num(&a, &format!("{col}_mean")) - mean).abs() <= 1e-12);
        }
    }
    run_ok(tmp.path(), &["--set", "mode=roc"]);
    let rows = read_table(&tmp.path().join("roc_trials.csv"));
    for c in read_table(&tmp.path().join("roc_curves.csv")) {
        let g: Vec<_> = rows
            .iter()
            .filter(|r| ["method", "alpha_mode", "K", "point"].iter().all(|k| r[*k] == c[*k]))
            .collect();
        assert_eq!(g.len(), 4);
        let mean = g.iter().map(|r| num(r, "pd")).sum::<f64>() / 4.0;
        assert!((num(&c, "pd_mean") - mean).abs() <= 1e-12);
    }
}

/// `(1/p_min)[((1-p_max)/(1-p_min))(1 + a^2 d^2/4K)^{K/2} - 1/p_min]^{-1}`
/// plus `2(1-p_max)/e^2 exp(-(K+N) e^2 / 2)`, clamped; 1 when the bracket is
/// not positive.
fn bound_formula(k: f64, n: f64, a: f64, d: f64, pmin: f64, pmax: f64, e: f64) -> f64 {
    let growth = (1.0 + a * a * d * d / (4.0 * k)).powf(k / 2.0);
    let bracket = (1.0 - pmax) / (1.0 - pmin) * growth - 1.0 / pmin;
    if bracket <= 0.0 {
        return 1.0;
    }
    let v = 1.0 / (pmin * bracket) + 2.0 * (1.0 - pmax) / (e * e) * (-(k + n) * e * e / 2.0).exp();
    v.clamp(0.0, 1.0)
}

fn k_condition(k: f64, a: f64, d: f64, pmin: f64, pmax: f64) -> bool {
    k > 2.0 * (2.0 * (1.0 - pmin) / (pmin * (1.0 - pmax))).ln() / (1.0 + a * a * d * d / (4.0 * k)).ln()
}

#[test]
fn bounds_table_matches_formulas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compdet(
        &["run", "--out", tmp.path().to_str().unwrap(), "--set", "mode=bounds", "--set", "k_values=[10,40,106]"],
        &["--set", "bounds.alpha_min=[20,100,400]", "--set", "detector.bound_epsilon=0.3"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_table(&tmp.path().join("bounds.csv"));
    assert_eq!(rows.len(), 3 * 3 * 2 * 3);
    for r in &rows {
        let (k, n, a, d) = (num(r, "K"), num(r, "N"), num(r, "alpha_min"), num(r, "d_min"));
        let (pmin, pmax, e) = (num(r, "p_min"), num(r, "p_max"), num(r, "epsilon"));
        let expected = bound_formula(k, n, a, d, pmin, pmax, e);
        assert!((num(r, "achievable_bound") - expected).abs() <= 1e-10 * expected.max(1e-300), "{r:?}");
        assert_eq!(r["k_bound"] == "true", k_condition(k, a, d, pmin, pmax));
        let pe = ((1.0 - pmin) / pmin * (1.0 + a * a * d * d / (4.0 * k)).powf(-k / 2.0)).min(1.0);
        assert!((num(r, "pe_bound") - pe).abs() <= 1e-10 * pe.max(1e-300));
        match r["min_measurements"].as_str() {
            "" => assert!(!k_condition(1e7, a, d, pmin, pmax)),
            s => {
                let km: f64 = s.parse().unwrap();
                assert!(k_condition(km, a, d, pmin, pmax));
                assert!(km == 1.0 || !k_condition(km - 1.0, a, d, pmin, pmax));
            }
        }
    }
}

fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

#[test]
fn emit_plots_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &[]);
    run_ok(tmp.path(), &["--set", "mode=roc"]);
    let plots = tmp.path().join("plots");
    let o = compdet(
        &["emit-plots", "--reports", tmp.path().to_str().unwrap(), "--out", plots.to_str().unwrap()],
        &[],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let agg = read_table(&tmp.path().join("dsd_aggregate.csv"));
    let series = read_table(&plots.join("plot_dsd_pfdr.csv"));
    let worst: Vec<_> = agg.iter().filter(|a| a["target_j"] == "worst").collect();
    assert_eq!(series.len(), worst.len());
    for s in &series {
        let a = worst
            .iter()
            .find(|a| ["method", "alpha_mode", "K"].iter().all(|k| a[*k] == s[*k]))
            .expect("matching aggregate row");
        if !a["pfdr_mean"].is_empty() {
            assert_eq!(sig15(num(s, "worst_case_pfdr_mean")), sig15(num(a, "pfdr_mean")));
        }
        assert_eq!(sig15(num(s, "bound")), sig15(num(a, "bound_mean")));
    }

    let curves = read_table(&tmp.path().join("roc_curves.csv"));
    let pseudo = read_table(&plots.join("plot_pseudo_roc.csv"));
    assert_eq!(pseudo.len(), curves.len());
    for p in &pseudo {
        let c = curves
            .iter()
            .find(|c| ["method", "alpha_mode", "K", "threshold"].iter().all(|k| c[*k] == p[*k]))
            .expect("matching curve point");
        assert_eq!(sig15(num(p, "fdr")), sig15(num(c, "fdr_mean")));
        assert_eq!(sig15(num(p, "one_minus_fnr")), sig15(1.0 - num(c, "fnr_mean")));
    }
}

#[test]
fn emit_plots_without_reports_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compdet(&["emit-plots", "--out", tmp.path().to_str().unwrap()], &[], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_columns_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("dsd_aggregate.csv"), "method,K\ndesigned_phi,5\n").unwrap();
    let o = compdet(&["emit-plots", "--out", tmp.path().to_str().unwrap()], &[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = compdet(&["run", "--out", out, "--set", "trials=0"], &[], None);
    assert_eq!(o.status.code(), Some(2));
    let o = compdet(&["run", "--out", out, "--set", "no_such_field=1"], &[], None);
    assert_eq!(o.status.code(), Some(2));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = compdet(&["run", "--out", out, "--config", bad.to_str().unwrap()], &[], None);
    assert_eq!(o.status.code(), Some(2));

    let mut args = vec!["run", "--out", out];
    args.extend_from_slice(SMALL);
    let o = compdet(&args, &["--set", "background.lambda_max=10"], None);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lambda_max") && err.contains("tolerance"), "{err}");
}

#[test]
fn gen_dict_and_file_source() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let mut args = vec!["gen-dict", "--out", out];
    args.extend_from_slice(SMALL);
    let o = compdet(&args, &[], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dict_path = tmp.path().join("dictionary.json");
    let dict = compdet::model::Dictionary::load(&dict_path).unwrap();
    assert_eq!((dict.len(), dict.dim()), (4, 30));
    assert!((dict.stats().unwrap().d_min - 0.1).abs() < 1e-9);

    let synth = tmp.path().join("synth");
    let file = tmp.path().join("file");
    run_ok(&synth, &[]);
    let source = format!(r#"dictionary={{"source":"file","path":{:?}}}"#, dict_path.to_str().unwrap());
    run_ok(&file, &["--set", &source]);
    assert_eq!(csv_files(&synth), csv_files(&file));
}

#[test]
fn verify_exports_plans() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let mut args = vec!["verify", "--out", out];
    args.extend_from_slice(SMALL);
    let o = compdet(&args, &[], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("-> ok").count(), 3, "{stdout}");
    let plan: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("plan_K10.json")).unwrap()).unwrap();
    assert_eq!(plan["k"], 10);
    assert_eq!(plan["n"], 30);
}
