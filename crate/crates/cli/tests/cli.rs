use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use marginal_core::io::read_results;
use marginal_core::TestStatus;

fn marginal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marginal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Three genes over eight arrays: g_shift sits far from 0, g_null is
/// centred, g_flat is constant.
const TOY: &str = "gene\ta1\ta2\ta3\ta4\ta5\ta6\ta7\ta8\n\
g_shift\t3.1\t2.9\t3.0\t3.2\t2.8\t3.05\t2.95\t3.1\n\
g_null\t0.3\t-0.4\t0.1\t-0.2\t0.25\t-0.1\t0.05\t-0.3\n\
g_flat\t1\t1\t1\t1\t1\t1\t1\t1\n";

#[test]
fn test_command_rejects_only_the_shifted_gene() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write(dir.path(), "toy.tsv", TOY);
    let out = dir.path().join("res.tsv");
    let o = marginal(&[
        "test",
        "--matrix",
        matrix.to_str().unwrap(),
        "--test",
        "mean",
        "--q",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_results(fs::read(&out).unwrap().as_slice()).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.gene_id.as_str()).collect();
    assert_eq!(ids, ["g_shift", "g_null", "g_flat"]);
    // mean-test p-value of g_shift, computed by hand, is far below 0.2 / 3
    assert!(rows[0].result.p_value < 0.2 / 3.0);
    assert!(rows[0].rejected);
    assert!(!rows[1].rejected);
    assert!(!rows[2].rejected);
    assert_eq!(rows[2].result.status, TestStatus::DegenerateVariance);
}

#[test]
fn results_round_trip_to_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write(dir.path(), "toy.csv", &TOY.replace('\t', ","));
    let o = marginal(&[
        "test",
        "--matrix",
        matrix.to_str().unwrap(),
        "--test",
        "signed-rank",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = read_results(text.as_bytes()).unwrap();
    for r in rows.iter().filter(|r| r.result.is_ok()) {
        let printed = format!("{:.11e}", r.result.p_value);
        let back: f64 = printed.parse().unwrap();
        assert!((back - r.result.p_value).abs() <= 1e-11 * r.result.p_value.abs());
    }
    assert!(text.starts_with("gene_id\tstatistic\tp_value\trejected\tstatus\n"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write(dir.path(), "toy.tsv", TOY);
    let labels = write(
        dir.path(),
        "labels.tsv",
        "a1\t1\na2\t1\na3\t1\na4\t1\na5\t2\na6\t2\na7\t2\na8\t2\n",
    );
    let m = matrix.to_str().unwrap();
    let l = labels.to_str().unwrap();
    // one-sample test with labels
    let o = marginal(&["test", "--matrix", m, "--labels", l, "--test", "mean"]);
    assert_eq!(o.status.code(), Some(1));
    // two-sample test without labels
    let o = marginal(&["test", "--matrix", m, "--test", "ks"]);
    assert_eq!(o.status.code(), Some(1));
    // unknown test name
    let o = marginal(&["test", "--matrix", m, "--test", "t-test"]);
    assert_eq!(o.status.code(), Some(1));
    // unknown model lists the valid ones
    let o = marginal(&[
        "simulate", "--model", "m7", "--n", "5", "--p", "10", "--tests", "mean",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("m1") && err.contains("m4"), "{err}");
}

#[test]
fn data_errors_exit_with_two_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.tsv",
        "gene\ta1\ta2\ng1\t1\t2\ng2\t3\tNaN\n",
    );
    let o = marginal(&["test", "--matrix", bad.to_str().unwrap(), "--test", "mean"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let matrix = write(dir.path(), "toy.tsv", TOY);
    let partial = write(dir.path(), "labels.tsv", "a1\t1\na2\t2\n");
    let o = marginal(&[
        "test",
        "--matrix",
        matrix.to_str().unwrap(),
        "--labels",
        partial.to_str().unwrap(),
        "--test",
        "wilcoxon",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("a3"));

    let neg = write(dir.path(), "neg.tsv", "gene\ta1\ta2\ng1\t1\t-2\n");
    let o = marginal(&[
        "test",
        "--matrix",
        neg.to_str().unwrap(),
        "--test",
        "mean",
        "--log2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn log2_is_applied_before_testing() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write(dir.path(), "raw.tsv", "gene\ta1\ta2\ta3\ng\t2\t8\t0.5\n");
    let logged = write(dir.path(), "log.tsv", "gene\ta1\ta2\ta3\ng\t1\t3\t-1\n");
    let a = marginal(&[
        "test",
        "--matrix",
        raw.to_str().unwrap(),
        "--test",
        "mean",
        "--log2",
    ]);
    let b = marginal(&[
        "test",
        "--matrix",
        logged.to_str().unwrap(),
        "--test",
        "mean",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn two_sample_test_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write(dir.path(), "toy.tsv", TOY);
    let labels = write(
        dir.path(),
        "labels.csv",
        "array,group\na1,1\na2,2\na3,1\na4,2\na5,1\na6,2\na7,1\na8,2\n",
    );
    for test in ["mean2", "median2", "wilcoxon", "ks", "cvm"] {
        let o = marginal(&[
            "test",
            "--matrix",
            matrix.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--test",
            test,
            "--granularity",
            "standard",
        ]);
        assert!(
            o.status.success(),
            "{test}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(read_results(stdout(&o).as_bytes()).unwrap().len(), 3);
    }
}

#[test]
fn simulate_is_reproducible_across_runs_and_threads() {
    let args = [
        "simulate",
        "--model",
        "m2",
        "--n",
        "10",
        "--p",
        "200",
        "--seed",
        "9",
        "--replicates",
        "1",
        "--tests",
        "mean,sign",
    ];
    let a = marginal(&args);
    let b = marginal(&args);
    let mut threaded = vec!["--threads", "3"];
    threaded.extend_from_slice(&args);
    let c = marginal(&threaded);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert!(stdout(&a)
        .starts_with("model\tn\tp\tq\treplicates\tmean_tot\tmean_pos\tmean_efdr\tsign_tot"));
}

#[test]
fn simulate_from_saved_config_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    let flags = marginal(&[
        "simulate",
        "--model",
        "m4",
        "--n1",
        "6",
        "--n2",
        "6",
        "--p",
        "150",
        "--seed",
        "4",
        "--replicates",
        "2",
        "--tests",
        "wilcoxon,ks",
        "--save-config",
        cfg.to_str().unwrap(),
    ]);
    assert!(
        flags.status.success(),
        "{}",
        String::from_utf8_lossy(&flags.stderr)
    );
    let text = fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("model = m4") && text.contains("n1 = 6"));
    let from_file = marginal(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--replicates",
        "2",
        "--tests",
        "wilcoxon,ks",
    ]);
    assert_eq!(flags.stdout, from_file.stdout);

    let mismatch = marginal(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--tests",
        "mean",
    ]);
    assert_eq!(mismatch.status.code(), Some(1));
}

#[test]
fn concordance_reports_tau_and_pvalues() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("gene");
    for i in 0..12 {
        text.push_str(&format!("\ta{i}"));
    }
    text.push('\n');
    // deterministic pseudo-data: a small linear congruential sequence
    let mut state: u64 = 12345;
    for g in 0..60 {
        text.push_str(&format!("g{g}"));
        for i in 0..12 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let shift = if g < 10 && i < 6 { 1.5 } else { 0.0 };
            text.push_str(&format!("\t{}", u + shift));
        }
        text.push('\n');
    }
    let matrix = write(dir.path(), "m.tsv", &text);
    let labels: String = (0..12)
        .map(|i| format!("a{i}\t{}\n", if i < 6 { 1 } else { 2 }))
        .collect();
    let labels = write(dir.path(), "l.tsv", &labels);
    let pv = dir.path().join("p.tsv");
    let o = marginal(&[
        "concordance",
        "--matrix",
        matrix.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--tests",
        "ks,ks,wilcoxon",
        "--pvalues",
        pv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "test_a\ttest_b\tgenes\ttau");
    assert_eq!(lines[1], "ks\tks\t60\t1.000000");
    assert_eq!(lines.len(), 4);
    let pvalues = fs::read_to_string(&pv).unwrap();
    assert!(pvalues.starts_with("gene_id\tks\tks\twilcoxon\n"));
    assert_eq!(pvalues.lines().count(), 61);
    // KS p-values are granular: far fewer distinct values than genes
    let distinct: std::collections::BTreeSet<&str> = pvalues
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap())
        .collect();
    assert!(distinct.len() < 20, "{}", distinct.len());

    let one = marginal(&[
        "concordance",
        "--matrix",
        matrix.to_str().unwrap(),
        "--tests",
        "mean",
    ]);
    assert_eq!(one.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let o = marginal(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}
