//! End-to-end acceptance run over the shipped presets.
//!
//! Prints one PASS/FAIL line per criterion; run with `--nocapture` to see
//! them. Numbers are compared against independently computed constants
//! where one exists.

use std::time::{Duration, Instant};

use mixlimit::rng::Stream;
use mixlimit::zorich::{Iet, QuadraticSurd, RauzyState};
use mixlimit_cli::{load_config, run_config, ExperimentConfig, RunResult};
use serde_json::Value;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn preset(name: &str) -> ExperimentConfig {
    load_config(&format!("preset/{name}")).unwrap()
}

fn run(name: &str) -> RunResult {
    run_config(&preset(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn section<'a>(doc: &'a Value, name: &str) -> &'a Value {
    doc["sections"].as_array().unwrap().iter().find(|s| s["hypothesis"] == name).unwrap()
}

fn check<'a>(doc: &'a Value, name: &str) -> &'a Value {
    doc["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

fn budget_ok(reports: &Value) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for r in reports.as_array().unwrap() {
        let dev = num(&r["deviation"]);
        let limit = 0.02_f64.max(5.0 * num(&r["std_error"]));
        ok &= dev <= limit && r["pass"] == true;
        worst = worst.max(dev);
    }
    (ok, worst)
}

fn identities() -> (bool, String) {
    let res = run("c01_identities");
    let list = res.document.results["identities"].as_array().unwrap().clone();
    let expected = [
        ("cocycle_identity", 1e-9),
        ("exterior_determinant", 1e-8),
        ("renormalization_transparency", 1e-8),
        ("time_reversal", 1e-9),
    ];
    let mut ok = res.document.pass;
    let mut detail = Vec::new();
    for (name, tol) in expected {
        let Some(entry) = list.iter().find(|e| e["name"] == name) else {
            return (false, format!("{name} missing"));
        };
        let err = num(&entry["max_error"]);
        ok &= err <= tol;
        detail.push(format!("{name}={err:.1e}"));
    }
    let triples = list.iter().find(|e| e["name"] == "cocycle_identity").unwrap();
    ok &= triples["n_checked"] == 1000;
    (ok, detail.join(" "))
}

fn dirac() -> (bool, String) {
    let res = run("c02_dirac_dlt");
    let last = res.document.results["interval"].as_array().unwrap().last().unwrap().clone();
    let outside = 1.0 - num(&last["estimate"]);
    let ok = last["N"] == 10_000 && last["n_samples"] == 10_000 && outside <= 0.02 && res.document.pass;
    (ok, format!("mass outside (-0.05, 0.05) = {outside:.4}"))
}

fn clt() -> (bool, String) {
    let res = run("c03_plain_clt");
    let last = res.document.results["ks"].as_array().unwrap().last().unwrap().clone();
    let ks = num(&last["estimate"]);
    let ok = last["N"] == 10_000 && last["n_samples"] == 100_000 && ks <= 0.02 && res.document.pass;
    (ok, format!("ks = {ks:.4}"))
}

fn conditional() -> (bool, String) {
    let res = run("c04_conditional");
    let mass = num(&res.document.results["event_a_mass"]);
    let (ok, worst) = budget_ok(&res.document.results["reports"]);
    (ok && mass == 0.5 && res.document.pass, format!("mu(A) = {mass}, deviation = {worst:.2e}"))
}

fn mixing_dlt() -> (bool, String) {
    let res = run("c05_mixing_dlt");
    let reports = &res.document.results["reports"];
    let (ok, worst) = budget_ok(reports);
    let r = &reports[0];
    let ok = ok && r["N"] == 2000 && r["n_samples"] == 1_000_000 && res.document.pass;
    (ok, format!("deviation = {worst:.2e}"))
}

fn mixing_correlation() -> (bool, String) {
    let res = run("c06_mixing_correlation");
    let mut ok = res.document.pass;
    let mut detail = Vec::new();
    for r in res.document.results["reports"].as_array().unwrap() {
        let dev = (num(&r["estimate"]) - 0.25).abs();
        ok &= dev <= 0.005 && r["n_samples"] == 1_000_000;
        detail.push(format!("N={}: {dev:.1e}", r["N"]));
    }
    let ns: Vec<u64> =
        res.document.results["reports"].as_array().unwrap().iter().map(|r| r["N"].as_u64().unwrap()).collect();
    (ok && ns == [25, 50], detail.join(" "))
}

fn hypotheses() -> (bool, String) {
    let contraction = run("c07_contraction");
    let c = section(&contraction.document.results, "contracting_pair");
    let slope = num(&c["summary"]["slope"]);
    let expected = ((3.0 - 5f64.sqrt()) / 2.0).ln();
    let rel = ((slope - expected) / expected).abs();
    let mut ok = c["status"] == "pass" && rel <= 0.05;
    let splitting = run("c07_splitting");
    let mut detail = vec![format!("slope rel error = {rel:.1e}")];
    for name in ["simple_dominated_splitting", "strong_dominated_splitting"] {
        let s = &section(&splitting.document.results, name)["summary"];
        let growth = num(&s["worst_final_decade_growth"]);
        ok &= s["n_directions"] == 100 && s["n_max"] == 10_000 && growth < 0.01;
        detail.push(format!("{name} growth = {growth:.1e}"));
    }
    (ok && contraction.document.pass && splitting.document.pass, detail.join(" "))
}

fn spectra() -> (bool, String) {
    let diag = run("c08_diag");
    let diag_exp: Vec<f64> =
        diag.document.results["estimate"]["exponents"].as_array().unwrap().iter().map(num).collect();
    let diag_err = diag_exp.iter().zip([3f64.ln(), 0.0, -(3f64.ln())]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let cat = run("c08_catmap");
    let lambda = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let cat_exp: Vec<f64> = cat.document.results["estimate"]["exponents"].as_array().unwrap().iter().map(num).collect();
    let cat_err = (cat_exp[0] - lambda).abs().max((cat_exp[1] + lambda).abs());

    let shear = run("c08_shear");
    let sum = check(&shear.document.results, "abs_sum");
    let sum_ok = num(&sum["value"]) <= num(&sum["limit"]);
    let ok =
        diag_err <= 1e-9 && cat_err <= 1e-6 && sum_ok && diag.document.pass && cat.document.pass && shear.document.pass;
    (ok, format!("diag error = {diag_err:.1e}, cat error = {cat_err:.1e}, |sum| = {:.1e}", num(&sum["value"])))
}

/// Partial quotients of `(p + sqrt d) / q` by the integer recurrence.
fn continued_fraction(mut p: i64, mut q: i64, d: i64, count: usize) -> Vec<u64> {
    let s = (d as f64).sqrt().floor() as i64;
    (0..count)
        .map(|_| {
            let a = (p + s) / q;
            p = a * q - p;
            q = (d - p * p) / q;
            a as u64
        })
        .collect()
}

fn rotation_runs(r: &QuadraticSurd, count: usize) -> Vec<u64> {
    let one = QuadraticSurd::integer(1);
    let total = one.add(r);
    let iet = Iet::new(&[2, 1], vec![r.div(&total), one.div(&total)]).unwrap();
    let mut st = RauzyState::new(iet);
    (0..count).map(|_| st.zorich_step().unwrap().run_length).collect()
}

fn zorich() -> (bool, String) {
    let mut s = Stream::from_seed(20).named("quadratic_irrationals");
    let mut matched = 0;
    let mut tried = 0;
    while tried < 20 {
        let d = 2 + (s.next_bits() % 5000) as i64;
        let root = (d as f64).sqrt().floor() as i64;
        if root * root == d {
            continue;
        }
        let p = 1 + (s.next_bits() % root as u64) as i64;
        let qs: Vec<i64> = (root - p + 1..=root + p).filter(|q| (d - p * p) % q == 0).collect();
        if qs.is_empty() {
            continue;
        }
        let q = qs[(s.next_bits() % qs.len() as u64) as usize];
        tried += 1;
        let r = QuadraticSurd::new(p, 1, q, d as u64).unwrap();
        if rotation_runs(&r, 30) == continued_fraction(p, q, d, 30) {
            matched += 1;
        }
    }

    let first = run("c09_zorich");
    let mut cfg = preset("c09_zorich");
    cfg.seed += 1;
    let second = run_config(&cfg, None).unwrap();
    let est = |r: &RunResult, key: &str| -> Vec<f64> {
        r.document.results["estimate"][key].as_array().unwrap().iter().map(num).collect()
    };
    let (e1, s1, e2, s2) = (
        est(&first, "exponents"),
        est(&first, "standard_errors"),
        est(&second, "exponents"),
        est(&second, "standard_errors"),
    );
    let across_seeds = (0..e1.len()).map(|i| (e1[i] - e2[i]).abs() / s1[i].hypot(s2[i])).fold(0.0, f64::max);
    let d = e1.len();
    let pairs = (0..d / 2).map(|i| (e1[i] + e1[d - 1 - i]).abs() / s1[i].hypot(s1[d - 1 - i])).fold(0.0, f64::max);
    let gap = (e1[0] - e1[1]) / s1[0].hypot(s1[1]);
    let ok = matched == 20
        && d == 4
        && pairs <= 3.0
        && gap > 5.0
        && across_seeds <= 3.0
        && first.document.pass
        && second.document.pass;
    (
        ok,
        format!("{matched}/20 quotient runs, pair asymmetry {pairs:.2} SE, gap {gap:.0} SE, seeds differ by {across_seeds:.2} SE"),
    )
}

fn determinism() -> (bool, String) {
    let names =
        ["c01_identities", "c04_conditional", "c06_mixing_correlation", "c07_splitting", "c08_shear", "c09_zorich"];
    let mut differing = Vec::new();
    for name in names {
        let cfg = preset(name);
        let one = run_config(&cfg, Some(1)).unwrap();
        let three = run_config(&cfg, Some(3)).unwrap();
        if one.document.to_json() != three.document.to_json() || one.samples_csv() != three.samples_csv() {
            differing.push(name);
        }
    }
    (differing.is_empty(), format!("{} presets compared at 1 and 3 workers, differing: {differing:?}", names.len()))
}

type Criterion = (u32, &'static str, Duration, fn() -> (bool, String));

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "exact identities", Duration::from_secs(1), identities),
        (2, "plain DLT, Dirac law", Duration::from_secs(120), dirac),
        (3, "plain CLT", Duration::from_secs(120), clt),
        (4, "conditional DLT", Duration::from_secs(180), conditional),
        (5, "mixing DLT", Duration::from_secs(600), mixing_dlt),
        (6, "mixing correlation", Duration::from_secs(120), mixing_correlation),
        (7, "hypothesis diagnostics", Duration::from_secs(300), hypotheses),
        (8, "spectrum checks", Duration::from_secs(600), spectra),
        (9, "Zorich surrogate", Duration::from_secs(600), zorich),
        (10, "determinism", Duration::from_secs(600), determinism),
    ];
    let mut verdicts = Vec::new();
    for (id, title, budget, f) in criteria {
        let start = Instant::now();
        let (ok, detail) = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let detail = if in_time { detail } else { format!("{detail}; over the {budget:?} budget") };
        verdicts.push(Verdict { id, title, pass: ok && in_time, detail, elapsed });
        let v = verdicts.last().unwrap();
        println!(
            "criterion {:>2} {:<24} {} ({:.1}s) {}",
            v.id,
            v.title,
            if v.pass { "PASS" } else { "FAIL" },
            v.elapsed.as_secs_f64(),
            v.detail
        );
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
