use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pathcost(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathcost"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.tsv"), "a\ta1\na\ta2\nb\tb1\nb\tb2\nc\tc1\n").unwrap();
    ok(pathcost(
        &["synth", "--hierarchy", "h.tsv", "--docs", "300", "--test-docs", "80", "--vocab", "60", "--min-len", "5", "--max-len", "20", "--concentration", "0.3", "--seed", "4", "--out", "data"],
        dir.path(),
    ));
    dir
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = workspace();
    let d = dir.path();
    for algo in ["pcnb", "pcem", "flat-nb", "flat-em", "td-nb", "td-em"] {
        let model = format!("{algo}.json");
        ok(pathcost(&["train", "--hierarchy", "h.tsv", "--train", "data/train.txt", "--algo", algo, "--out", &model], d));
        let preds = ok(pathcost(&["predict", "--model", &model, "--test", "data/test.txt"], d));
        let lines: Vec<&str> = preds.lines().collect();
        assert_eq!(lines.len(), 80);
        for l in lines {
            let (_, classes) = l.split_once('\t').unwrap();
            let parts: Vec<&str> = classes.split(',').collect();
            assert_eq!(parts.len(), 2, "{l}");
            assert!(parts[1].starts_with(parts[0]), "{l}");
        }
        let eval = ok(pathcost(&["eval", "--model", &model, "--test", "data/test.txt", "--per-class"], d));
        let micro: f64 = eval.lines().next().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&micro));
        assert!(eval.contains("class\tprecision\trecall\tf1"));
    }
}

#[test]
fn sweep_writes_reproducible_csv() {
    let dir = workspace();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["sweep", "--hierarchy", "h.tsv", "--train", "data/train.txt", "--test", "data/test.txt", "--algo", "pcnb,pcem,td-em", "--rates", "0.05,1", "--seeds", "0,1,2", "--max-iters", "8", "--out", out]
    };
    ok(pathcost(&args("r1"), d));
    ok(pathcost(&args("r2"), d));
    let agg = fs::read(d.join("r1/aggregate.csv")).unwrap();
    assert_eq!(agg, fs::read(d.join("r2/aggregate.csv")).unwrap());
    let runs = fs::read_to_string(d.join("r1/runs.csv")).unwrap();
    assert!(runs.starts_with("algorithm,rate,seed,micro_f1,macro_f1,iters,seconds\n"));
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 3);
    let agg = String::from_utf8(agg).unwrap();
    // full labels leave nothing for EM to add
    let row = |algo: &str| {
        agg.lines()
            .find(|l| l.starts_with(&format!("{algo},1,")))
            .unwrap()
            .split(',')
            .skip(3)
            .take(2)
            .collect::<Vec<_>>()
            .join(",")
    };
    assert_eq!(row("pcnb"), row("pcem"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r1/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(meta["config"]["em"]["max_iters"], 8);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = workspace();
    let d = dir.path();
    let cases: &[&[&str]] = &[
        &["train", "--hierarchy", "missing.tsv", "--train", "data/train.txt", "--out", "m.json"],
        &["train", "--hierarchy", "h.tsv", "--train", "data/train.txt", "--algo", "svm", "--out", "m.json"],
        &["sweep", "--hierarchy", "h.tsv", "--train", "data/train.txt", "--test", "data/test.txt", "--rates", "1.5"],
        &["sweep", "--hierarchy", "h.tsv", "--train", "data/train.txt", "--test", "data/test.txt", "--seeds", "1,1"],
        &["predict", "--model", "data/train.txt", "--test", "data/test.txt"],
        &["synth", "--hierarchy", "h.tsv", "--docs", "0", "--out", "x"],
    ];
    for args in cases {
        let out = pathcost(args, d);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
    fs::write(d.join("bad.txt"), "d1\ta1\tw0:x\n").unwrap();
    let out = pathcost(&["train", "--hierarchy", "h.tsv", "--train", "bad.txt", "--out", "m.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt:1:"));
}
