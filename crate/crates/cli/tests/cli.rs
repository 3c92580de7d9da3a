use std::path::Path;
use std::process::{Command, Output};

use ldpc_replica::dec::{dec_conditional_entropy, dec_forward_de, SolverConfig};
use ldpc_replica::ensemble::Ensemble;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ldpc-replica"));
    c.env_remove("LDPC_REPLICA_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn printed_value(stdout: &str) -> f64 {
    stdout.trim().parse().unwrap()
}

/// `(mean, std_err)` from the entropy line of `de`.
fn printed_entropy(stdout: &str) -> (f64, f64) {
    let line = stdout.lines().find(|l| l.starts_with("entropy:")).unwrap();
    let words: Vec<&str> = line.split_whitespace().collect();
    (words[1].parse().unwrap(), words[3].parse().unwrap())
}

#[test]
fn thresholds_for_3_6() {
    let dir = tempfile::tempdir().unwrap();
    let bp = ok(dir.path(), &["threshold", "--l", "3", "--r", "6", "--kind", "bp"]);
    assert_eq!(bp.trim().split('.').nth(1).unwrap().len(), 6);
    assert!((printed_value(&bp) - 0.56891).abs() < 5e-4, "{bp}");
    let map = ok(dir.path(), &["threshold", "--kind", "map", "--out", "map.json"]);
    assert!((printed_value(&map) - 0.63865).abs() < 5e-4, "{map}");
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "map.json")).unwrap();
    assert_eq!(manifest["command"]["name"], "threshold");
    assert_eq!(manifest["command"]["kind"], "map");
}

#[test]
fn map_threshold_of_5_10_is_below_shannon_limit() {
    let dir = tempfile::tempdir().unwrap();
    let v = printed_value(&ok(dir.path(), &["threshold", "--l", "5", "--r", "10", "--kind", "map"]));
    assert!(v < (1.0 + 17f64.sqrt()) / 8.0);
    assert!(v > 0.6386);
}

#[test]
fn curve_for_3_6_is_flat_then_rises_to_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["dec-curve", "--l", "3", "--r", "6", "--steps", "201", "--out", "c.csv"]);
    let text = read(dir.path(), "c.csv");
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(7).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 201);
    for r in &rows {
        if r[0] <= 0.635 {
            assert_eq!(r[6], 0.0, "{r:?}");
        }
        if r[0] >= 0.645 {
            assert!(r[6] > 0.0, "{r:?}");
        }
    }
    assert_eq!(rows[200][0], 1.0);
    assert!((rows[200][6] - 0.5).abs() < 1e-9);
    assert!(dir.path().join("c.plot.py").exists());
    assert!(dir.path().join("c.csv.manifest.json").exists());
}

#[test]
fn five_curves_and_ordered_onsets() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["dec-curve", "--l", "2,3,4,5,6", "--r", "4,6,8,10,12", "--steps", "1001", "--out", "f.csv"],
    );
    let onset = |l: usize, r: usize| -> f64 {
        read(dir.path(), &format!("f-{l}-{r}.csv"))
            .lines()
            .skip(1)
            .map(|line| line.split(',').map(|v| v.to_string()).collect::<Vec<_>>())
            .find(|f| f[6].parse::<f64>().unwrap() > 0.0)
            .map(|f| f[0].parse().unwrap())
            .unwrap()
    };
    let onsets: Vec<f64> = [(3, 6), (4, 8), (5, 10), (6, 12)]
        .iter()
        .map(|&(l, r)| onset(l, r))
        .collect();
    assert!(onsets.windows(2).all(|w| w[0] <= w[1]), "{onsets:?}");
    // The (2,4) curve rises from its BP threshold, well before the others.
    assert!(onset(2, 4) < onsets[0] - 0.03);
    let script = read(dir.path(), "f.plot.py");
    assert!(script.contains("f-6-12.csv") && script.contains("f.png"));
}

#[test]
fn single_step_curve_keeps_header() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["dec-curve", "--steps", "1", "--eps-start", "0.2", "--out", "one.csv"]);
    let text = read(dir.path(), "one.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "eps,e_fv,e_vf,e_Rv,e_Ls,h_nontrivial,h_reported,converged,iterations");
    assert!(lines[1].starts_with("0.2,"));
}

#[test]
fn de_on_bec_below_threshold_has_zero_entropy() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bec.json"),
        r#"{"outputs": ["0", "1", "*"], "W": [[0.7, 0, 0.3], [0, 0.7, 0.3]]}"#,
    )
    .unwrap();
    let out = ok(
        dir.path(),
        &["de", "--spec", "bec.json", "--pop-size", "5000", "--sweeps", "60", "--out", "s.csv"],
    );
    let (h, se) = printed_entropy(&out);
    assert!(h.abs() <= 3.0 * se + 1e-6, "{out}");
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "s.csv.meta.json")).unwrap();
    assert_eq!(meta["pop_size"], 5000);
    assert_eq!(read(dir.path(), "s.csv").lines().count(), 10_001);
}

#[test]
fn de_on_dec_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &["de", "--eps", "0.7", "--pop-size", "20000", "--sweeps", "100", "--out", "d.csv"],
    );
    let (h, se) = printed_entropy(&out);
    let e = Ensemble::new(3, 6).unwrap();
    let fp = dec_forward_de(&e, 0.7, &SolverConfig::default()).unwrap();
    let exact = dec_conditional_entropy(&e, 0.7, &fp);
    assert!((h - exact).abs() <= 3.0 * se, "{h} +- {se} vs {exact}");
    assert!(dir.path().join("d.psi.csv").exists());
    assert!(dir.path().join("d.psi_hat.csv").exists());
}

#[test]
fn malformed_spec_is_a_validation_error_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"outputs": ["0", "1"], "W": [[0.9, 0.1], [0.5, 0.4]]}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["de", "--spec", "bad.json", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("W[x=1]") && err.contains("0.9"), "{err}");
}

#[test]
fn simulation_separates_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |eps: &str, out: &str| {
        ok(
            dir.path(),
            &["simulate", "--eps", eps, "--n", "20000", "--trials", "4", "--out", out],
        );
        let text = read(dir.path(), out);
        let row: Vec<String> = text.lines().nth(1).unwrap().split(',').map(String::from).collect();
        row[3].parse::<f64>().unwrap()
    };
    assert!(sim("0.5", "a.csv") < 1e-3);
    assert!(sim("0.62", "b.csv") > 0.02);
    sim("0.62", "c.csv");
    assert_eq!(read(dir.path(), "b.csv"), read(dir.path(), "c.csv"));
}

#[test]
fn channel_check_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["channel-check", "--eps", "0.5"]);
    assert!(out.contains("class: intersymbol_interference"));
    assert!(out.contains("irreducible: true"));
    assert!(out.contains("frozen solution: false"));
    assert!(out.contains("witness: output * reaches state 0 from (x=0, s=0) and (x=0, s=1)"));
    assert!(out.contains("m_Ls: 0.500000, 0.500000"));

    std::fs::write(
        dir.path().join("bsc.json"),
        r#"{"outputs": ["0", "1"], "W": [[0.9, 0.1], [0.1, 0.9]]}"#,
    )
    .unwrap();
    let out = ok(dir.path(), &["channel-check", "--spec", "bsc.json"]);
    assert!(out.contains("class: finite_state_markov"));
    assert!(out.contains("frozen solution: false"));

    std::fs::write(
        dir.path().join("noiseless.json"),
        r#"{"outputs": ["0", "1"], "W": [[1, 0], [0, 1]]}"#,
    )
    .unwrap();
    let out = ok(dir.path(), &["channel-check", "--spec", "noiseless.json"]);
    assert!(out.contains("frozen solution: true"));

    // Gilbert-Elliott with g = 0.1, b = 0.3: stationary law (0.75, 0.25).
    let t = "[[0.9, 0.1], [0.3, 0.7]]";
    let v = format!("[[{t}, {t}], [{t}, {t}]]");
    let spec = format!(
        r#"{{"outputs": ["0", "1"], "states": ["good", "bad"],
            "W": [[[0.99, 0.01], [0.8, 0.2]], [[0.01, 0.99], [0.2, 0.8]]],
            "V": {v}, "V0": [0.5, 0.5]}}"#
    );
    std::fs::write(dir.path().join("ge.json"), spec).unwrap();
    let out = ok(dir.path(), &["channel-check", "--spec", "ge.json", "--out", "ge.manifest.json"]);
    assert!(out.contains("class: finite_state_markov"));
    assert!(out.contains("m_Ls: 0.750000, 0.250000"), "{out}");
    let m: serde_json::Value = serde_json::from_str(&read(dir.path(), "ge.manifest.json")).unwrap();
    assert_eq!(m["channel_spec"]["states"][1], "bad");
}

#[test]
fn replay_reproduces_outputs_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("z.json"),
        r#"{"outputs": ["0", "1"], "W": [[1, 0], [0.3, 0.7]]}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &["de", "--spec", "z.json", "--pop-size", "2000", "--sweeps", "20", "--mc-samples", "20000", "--out", "a.csv"],
    );
    // The replay must not need the spec file.
    std::fs::remove_file(dir.path().join("z.json")).unwrap();
    ok(dir.path(), &["replay", "a.csv.manifest.json", "--out", "b.csv"]);
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));

    ok(dir.path(), &["dec-curve", "--steps", "11", "--out", "c.csv"]);
    ok(dir.path(), &["replay", "c.csv.manifest.json", "--out", "d.csv"]);
    assert_eq!(read(dir.path(), "c.csv"), read(dir.path(), "d.csv"));

    ok(dir.path(), &["simulate", "--eps", "0.55", "--n", "600", "--trials", "3", "--out", "e.csv"]);
    ok(dir.path(), &["replay", "e.csv.manifest.json", "--out", "f.csv"]);
    assert_eq!(read(dir.path(), "e.csv"), read(dir.path(), "f.csv"));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["de", "--eps", "0.6", "--pop-size", "3000", "--sweeps", "10", "--mc-samples", "20000"];
    ok(dir.path(), &[&args[..], &["--out", "w1.csv", "--workers", "1"]].concat());
    let out = bin()
        .current_dir(dir.path())
        .env("LDPC_REPLICA_WORKERS", "3")
        .args(args)
        .args(["--out", "w3.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "w1.csv"), read(dir.path(), "w3.csv"));
    let m: serde_json::Value = serde_json::from_str(&read(dir.path(), "w3.csv.manifest.json")).unwrap();
    assert_eq!(m["workers"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["threshold", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["de", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["threshold", "--l", "3", "--r", "3"]).status.code(), Some(3));
    assert_eq!(
        run(dir.path(), &["dec-curve", "--eps-start", "0.5", "--eps-end", "0.4", "--out", "x.csv"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(dir.path(), &["channel-check", "--spec", "missing.json"]).status.code(),
        Some(5)
    );
    assert_eq!(
        run(dir.path(), &["dec-curve", "--steps", "3", "--out", "no/such/dir/x.csv"])
            .status
            .code(),
        Some(5)
    );
}
