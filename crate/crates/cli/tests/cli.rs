use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lmgen_core::tree::parse_newick;

fn lmgen(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmgen"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(out: &'a str, key: &str) -> Vec<&'a str> {
    let prefix = format!("{key}=");
    out.split_whitespace()
        .filter_map(|w| w.strip_prefix(prefix.as_str()))
        .collect()
}

const QUARTET: &str = r#"{"nodes":[
 {"id":"root"},
 {"id":"X","parent":"root","rate":0.2,"family":"fx"},
 {"id":"Y","parent":"root","rate":0.2,"family":"fy"},
 {"id":"A","parent":"X","rate":0.2},{"id":"B","parent":"X","rate":0.2},
 {"id":"C","parent":"Y","rate":0.2},{"id":"D","parent":"Y","rate":0.2}],
 "vocab_size":8,"gene_count":160,"concentration":0.5}"#;

fn synth_quartet(dir: &Path) -> Output {
    fs::write(dir.join("spec.json"), QUARTET).unwrap();
    lmgen(
        &[
            "synth",
            "--spec",
            "spec.json",
            "--seed",
            "4",
            "--out",
            "syn",
        ],
        dir,
    )
}

fn corpus(dir: &Path) -> PathBuf {
    let lines: Vec<String> = (0..300)
        .map(|i| format!("Record {i} talks about rivers, hills and the quiet towns between them, number {i}."))
        .collect();
    let p = dir.join("corpus.txt");
    fs::write(&p, lines.join("\n")).unwrap();
    p
}

#[test]
fn genes_writes_requested_count_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let args = [
        "genes",
        "--corpus",
        "corpus.txt",
        "--count",
        "128",
        "--seed",
        "3",
        "--out",
        "a.jsonl",
    ];
    let o = lmgen(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(value(&out, "genes"), ["128"]);
    assert!(out.contains("length_histogram="));
    let first = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 128);

    let o = lmgen(&args, dir.path());
    assert!(o.status.success());
    assert_eq!(fs::read(dir.path().join("a.jsonl")).unwrap(), first);
}

#[test]
fn usage_and_io_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let zero = lmgen(
        &[
            "genes",
            "--corpus",
            "corpus.txt",
            "--count",
            "0",
            "--out",
            "x",
        ],
        dir.path(),
    );
    let missing = lmgen(
        &[
            "genes",
            "--corpus",
            "absent.txt",
            "--count",
            "4",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(zero.status.code(), Some(2));
    assert_eq!(missing.status.code(), Some(3));
    assert!(stdout(&missing).contains("class=io"));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn synth_quartet_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let o = synth_quartet(dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(
        stdout(&o).lines().any(|l| l == "rf_distance=0"),
        "{}",
        stdout(&o)
    );
    for f in [
        "roster.json",
        "truth.nwk",
        "tree.nwk",
        "tree.svg",
        "similarity.tsv",
        "genes.jsonl",
        "models/A.json",
    ] {
        assert!(dir.path().join("syn").join(f).exists(), "{f}");
    }
}

#[test]
fn probe_budget_cold_then_warm() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth_quartet(dir.path()).status.success());
    let d = dir.path();
    let args = [
        "probe",
        "--roster",
        "syn/roster.json",
        "--genes",
        "syn/genes.jsonl",
        "--probes",
        "32",
        "--cache-dir",
        "cache",
        "--out-dir",
        "prof",
        "--parallelism",
        "3",
        "A",
        "C",
    ];
    let cold = lmgen(&args, d);
    assert!(
        cold.status.success(),
        "{}",
        String::from_utf8_lossy(&cold.stderr)
    );
    assert_eq!(value(&stdout(&cold), "probes"), ["4096", "4096"]);
    let profile = fs::read(d.join("prof/A.profile.jsonl")).unwrap();

    let warm = lmgen(&args, d);
    assert!(warm.status.success());
    let out = stdout(&warm);
    assert_eq!(value(&out, "probes"), ["0", "0"]);
    assert_eq!(value(&out, "cache_hits"), ["4096", "4096"]);
    assert_eq!(fs::read(d.join("prof/A.profile.jsonl")).unwrap(), profile);
}

#[test]
fn config_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(synth_quartet(d).status.success());
    fs::write(
        d.join("run.json"),
        r#"{"roster":"syn/roster.json","genes":"syn/genes.jsonl","probes":2,"out_dir":"from-config"}"#,
    )
    .unwrap();
    let o = lmgen(&["probe", "--config", "run.json", "A"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "probes"), ["256"]);
    assert!(d.join("from-config/A.profile.jsonl").exists());

    let o = lmgen(
        &[
            "probe",
            "--config",
            "run.json",
            "--probes",
            "3",
            "--out-dir",
            "flagged",
            "A",
        ],
        d,
    );
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "probes"), ["384"]);
    assert!(d.join("flagged/A.profile.jsonl").exists());

    fs::write(
        d.join("bad.json"),
        r#"{"roster":"syn/roster.json","genes":"syn/genes.jsonl","probes":0}"#,
    )
    .unwrap();
    assert_eq!(
        lmgen(&["probe", "--config", "bad.json"], d).status.code(),
        Some(2)
    );
}

#[test]
fn dead_endpoint_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(synth_quartet(d).status.success());
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let roster = format!(
        r#"{{"models":[
          {{"id":"dead","family":"x","provider":"http","endpoint":"http://127.0.0.1:{port}/v1/completions"}},
          {{"id":"nokey","family":"x","provider":"http","endpoint":"http://127.0.0.1:{port}/","auth_env":"LMGEN_TEST_UNSET_KEY"}},
          {{"id":"A","family":"fx","provider":"synthetic","endpoint":"syn/models/A.json"}}]}}"#
    );
    fs::write(d.join("mixed.json"), roster).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lmgen"))
        .args([
            "probe",
            "--roster",
            "mixed.json",
            "--genes",
            "syn/genes.jsonl",
            "--probes",
            "2",
            "--out-dir",
            "p",
        ])
        .current_dir(d)
        .env_remove("LMGEN_TEST_UNSET_KEY")
        .output()
        .unwrap();
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(4), "{out}");
    assert!(out.contains("model=dead status=failed"), "{out}");
    assert!(out.contains("model=nokey status=failed"), "{out}");
    assert!(out.contains("LMGEN_TEST_UNSET_KEY"), "{out}");
    assert!(out.contains("model=A status=ok"), "{out}");
    assert!(d.join("p/A.profile.jsonl").exists());
    assert!(!d.join("p/dead.profile.jsonl").exists());
}

#[test]
fn busy_cache_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(synth_quartet(d).status.success());
    fs::create_dir_all(d.join("cache")).unwrap();
    let held = fs::File::create(d.join("cache/.lock")).unwrap();
    held.lock().unwrap();
    let o = lmgen(
        &[
            "probe",
            "--roster",
            "syn/roster.json",
            "--genes",
            "syn/genes.jsonl",
            "--probes",
            "1",
            "--cache-dir",
            "cache",
            "--out-dir",
            "p",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("in use"));
    drop(held);
}

#[test]
fn matrix_tree_contrast_pipeline_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(synth_quartet(d).status.success());
    let profiles: Vec<String> = ["A", "B", "C", "D"]
        .iter()
        .map(|m| format!("syn/profiles/{m}.profile.jsonl"))
        .collect();
    let before: Vec<Vec<u8>> = profiles
        .iter()
        .map(|p| fs::read(d.join(p)).unwrap())
        .collect();

    let mut args = vec!["matrix", "--out-dir", "m", "--profiles"];
    args.extend(profiles.iter().map(String::as_str));
    let o = lmgen(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "models"), ["4"]);
    let sim = fs::read(d.join("m/similarity.tsv")).unwrap();
    assert!(lmgen(&args, d).status.success());
    assert_eq!(fs::read(d.join("m/similarity.tsv")).unwrap(), sim);

    let o = lmgen(
        &[
            "tree",
            "--distance",
            "m/distance.tsv",
            "--layout",
            "rectangular",
            "--out",
            "m/t",
        ],
        d,
    );
    assert!(o.status.success());
    let svg = fs::read_to_string(d.join("m/t.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let mut args = vec![
        "contrast",
        "--lengths",
        "1,2,3,4",
        "--out",
        "m/contrast.tsv",
        "--profiles",
    ];
    args.extend(profiles.iter().map(String::as_str));
    let o = lmgen(&args, d);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "allele_chars").len(), 4);
    assert_eq!(
        fs::read_to_string(d.join("m/contrast.tsv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let mut args = vec!["contrast", "--lengths", "5", "--profiles"];
    args.extend(profiles.iter().map(String::as_str));
    assert_eq!(lmgen(&args, d).status.code(), Some(2));

    let after: Vec<Vec<u8>> = profiles
        .iter()
        .map(|p| fs::read(d.join(p)).unwrap())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn tree_on_additive_quartet_has_ab_cd_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // ((A:1,B:2):1,C:1,D:3)
    let tsv = "\tA\tB\tC\tD\nA\t0\t3\t3\t5\nB\t3\t0\t4\t6\nC\t3\t4\t0\t4\nD\t5\t6\t4\t0\n";
    fs::write(d.join("d.tsv"), tsv).unwrap();
    fs::write(
        d.join("colors.json"),
        r##"{"leaf_family":{"A":"f1","B":"f1","C":"f2","D":"f2"},"colors":{"f1":"#ff0000"}}"##,
    )
    .unwrap();
    let o = lmgen(
        &[
            "tree",
            "--distance",
            "d.tsv",
            "--colors",
            "colors.json",
            "--out",
            "q",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = parse_newick(fs::read_to_string(d.join("q.nwk")).unwrap().trim()).unwrap();
    let splits = t.splits();
    assert_eq!(splits.len(), 1);
    let side: Vec<&str> = splits[0].side.iter().map(String::as_str).collect();
    assert_eq!(side, ["C", "D"]);
    assert!((splits[0].length - 1.0).abs() < 1e-12);
    assert!(fs::read_to_string(d.join("q.svg"))
        .unwrap()
        .contains("#ff0000"));
}

fn write_similarity(d: &Path, n_fam: usize, per: usize) -> Vec<String> {
    let ids: Vec<String> = (0..n_fam)
        .flat_map(|f| (0..per).map(move |m| format!("f{f}m{m}")))
        .collect();
    let mut tsv = String::new();
    for id in &ids {
        tsv.push('\t');
        tsv.push_str(id);
    }
    tsv.push('\n');
    for (i, a) in ids.iter().enumerate() {
        tsv.push_str(a);
        for j in 0..ids.len() {
            let v = if i == j {
                1.0
            } else {
                0.3 + 0.5 / (1.0 + (i as f64 - j as f64).abs())
            };
            tsv.push_str(&format!("\t{v}"));
        }
        tsv.push('\n');
    }
    fs::write(d.join("s.tsv"), tsv).unwrap();
    ids
}

#[test]
fn predict_reports_correlation_and_undefined_status() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ids = write_similarity(d, 3, 4);
    let mut csv = String::from("model,family,bench,flat\n");
    for (i, id) in ids.iter().enumerate() {
        csv.push_str(&format!(
            "{id},{},{},0.5\n",
            &id[..2],
            0.2 + 0.05 * i as f64
        ));
    }
    fs::write(d.join("b.csv"), csv).unwrap();
    let common = [
        "predict",
        "--similarity",
        "s.tsv",
        "--benchmarks",
        "b.csv",
        "--components",
        "3",
        "--epochs",
        "500",
    ];

    let mut args = common.to_vec();
    args.extend(["--benchmark", "bench", "--out", "report.json"]);
    let o = lmgen(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(value(&out, "status"), ["ok"]);
    assert_eq!(value(&out, "family").len(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["predictions"].as_array().unwrap().len(), 12);

    let mut args = common.to_vec();
    args.extend(["--benchmark", "flat"]);
    let o = lmgen(&args, d);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(value(&out, "status"), ["undefined_correlation"]);
    assert_eq!(value(&out, "overall_r"), ["undefined"]);

    let mut args = common.to_vec();
    args.extend(["--benchmark", "missing"]);
    assert_eq!(lmgen(&args, d).status.code(), Some(2));

    let mut args = common.to_vec();
    args.extend(["--benchmark", "bench", "--learning-rate", "1.7e308"]);
    let o = lmgen(&args, d);
    assert_eq!(
        o.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(value(&stdout(&o), "class"), ["numerical"]);

    let mut args = common.to_vec();
    args.extend(["--benchmark", "bench", "--learning-rate", "0"]);
    assert_eq!(lmgen(&args, d).status.code(), Some(2));
}

#[test]
fn hyperscan_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(synth_quartet(d).status.success());
    let o = lmgen(
        &[
            "hyperscan",
            "--roster",
            "syn/roster.json",
            "--genes",
            "syn/genes.jsonl",
            "--grid",
            "8x4,16x4",
            "--replicates",
            "4",
            "--seed",
            "2",
            "--out",
            "scan.jsonl",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "kind"), ["variability"]);
    assert_eq!(
        fs::read_to_string(d.join("scan.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let o = lmgen(
        &[
            "hyperscan",
            "--roster",
            "syn/roster.json",
            "--genes",
            "syn/genes.jsonl",
            "--grid",
            "16x2,16x8",
            "--replicates",
            "4",
            "--oracle",
            "64x32",
            "--out",
            "oracle.jsonl",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "kind"), ["oracle_deviation"]);
    let too_big = lmgen(
        &[
            "hyperscan",
            "--roster",
            "syn/roster.json",
            "--genes",
            "syn/genes.jsonl",
            "--grid",
            "64x2",
            "--out",
            "x.jsonl",
        ],
        d,
    );
    assert_eq!(too_big.status.code(), Some(2));
}
