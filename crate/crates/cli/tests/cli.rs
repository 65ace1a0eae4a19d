use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const GENRES: [&str; 19] = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary", "Drama", "Fantasy",
    "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
];
const OCCUPATIONS: [&str; 4] = ["engineer", "other", "student", "writer"];

/// A small dataset in the 100K file layout, generated with a fixed LCG.
fn write_dataset(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let mut state: u64 = 12345;
    let mut next = move |m: u64| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    let mut users = String::new();
    for u in 1..=40 {
        let g = if u % 3 == 0 { "F" } else { "M" };
        users.push_str(&format!("{u}|{}|{g}|{}|0000{u}\n", 18 + u % 40, OCCUPATIONS[u % 4]));
    }
    let mut items = String::new();
    for i in 1..=60u64 {
        let date = if i == 7 { String::new() } else { format!("01-Jan-{}", 1915 + (i * 7) % 85) };
        let flags: Vec<&str> = (0..19).map(|g| if g as u64 == i % 19 || g as u64 == (i * 3) % 19 { "1" } else { "0" }).collect();
        items.push_str(&format!("{i}|Item {i}|{date}|||{}\n", flags.join("|")));
    }
    let mut data = String::new();
    for u in 1..=40u64 {
        for i in 1..=60u64 {
            if next(3) == 0 {
                let value = 1 + (u % 3 + i % 4 + next(3)).min(4);
                data.push_str(&format!("{u}\t{i}\t{value}\t{}\n", 880000000 + u * 100 + i));
            }
        }
    }
    fs::write(dir.join("u.user"), users).unwrap();
    fs::write(dir.join("u.item"), items).unwrap();
    fs::write(dir.join("u.data"), data).unwrap();
    let genre: String = GENRES.iter().enumerate().map(|(k, g)| format!("{g}|{k}\n")).collect();
    fs::write(dir.join("u.genre"), genre).unwrap();
    fs::write(dir.join("u.occupation"), OCCUPATIONS.join("\n") + "\n").unwrap();
}

fn metarec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metarec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data/ml-100k");
    write_dataset(&data);
    (tmp, data)
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn oracle_run_writes_outputs_and_is_deterministic() {
    let (tmp, _) = setup();
    let root = tmp.path();
    let a = metarec(&["run", "--experiment", "oracle", "--seed", "42", "--out", "a"], root);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    for f in ["report.json", "fig3.csv", "fig4.csv", "error_table.csv"] {
        assert!(root.join("a").join(f).exists(), "{f}");
    }
    assert!(!root.join("a/fig5.csv").exists());
    let fig3 = fs::read_to_string(root.join("a/fig3.csv")).unwrap();
    assert!(fig3.starts_with("algorithm,rmse\n"));
    assert_eq!(fig3.lines().count(), 11);

    let b = metarec(&["run", "--experiment", "oracle", "--seed", "42", "--out", "b"], root);
    assert!(b.status.success());
    for f in ["fig3.csv", "fig4.csv", "error_table.csv"] {
        assert_eq!(fs::read(root.join("a").join(f)).unwrap(), fs::read(root.join("b").join(f)).unwrap());
    }
    assert_eq!(without_timings(report(&root.join("a"))), without_timings(report(&root.join("b"))));
}

#[test]
fn warm_cache_gives_identical_numbers() {
    let (tmp, _) = setup();
    let root = tmp.path();
    let args = |out: &'static str| ["run", "--seed", "3", "--cache-dir", "cache", "--out", out];
    assert!(metarec(&args("cold"), root).status.success());
    assert!(metarec(&args("warm"), root).status.success());
    let (cold, warm) = (report(&root.join("cold")), report(&root.join("warm")));
    assert_eq!(cold["timings"]["predictors_from_cache"], 0);
    assert_eq!(warm["timings"]["predictors_from_cache"], 9);
    assert_eq!(without_timings(cold), without_timings(warm));
}

#[test]
fn meta_run_with_config_file() {
    let (tmp, _) = setup();
    let root = tmp.path();
    fs::write(root.join("run.toml"), "experiment = \"meta\"\nfolds = 3\nseed = 5\nlambda = 0.01\n").unwrap();
    let out = metarec(&["run", "--config", "run.toml", "--seed", "6", "--out", "m"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&root.join("m"));
    assert_eq!(r["experiment"], "meta_50_50_5fold");
    assert_eq!(r["seed"], 6);
    assert_eq!(r["meta"]["folds"], 3);
    let fig5 = fs::read_to_string(root.join("m/fig5.csv")).unwrap();
    assert!(fig5.starts_with("system,rmse\nmeta_learner,"));
}

#[test]
fn algorithm_subset() {
    let (tmp, _) = setup();
    let root = tmp.path();
    let out = metarec(&["run", "--algorithms", "svd,slope_one,baseline_only", "--out", "s"], root);
    assert!(out.status.success());
    let header = fs::read_to_string(root.join("s/error_table.csv")).unwrap();
    assert!(header.starts_with("user,item,true,svd,slope_one,baseline_only\n"));
}

#[test]
fn inspect_marks_the_best_algorithm() {
    let (tmp, _) = setup();
    let root = tmp.path();
    assert!(metarec(&["run", "--out", "o"], root).status.success());
    let out = metarec(&["inspect", "o/error_table.csv"], root);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().skip(1).all(|l| l.contains('*')));

    let out = metarec(&["inspect", "o/error_table.csv", "--rows", "2-3"], root);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn exit_codes() {
    let (tmp, _) = setup();
    let root = tmp.path();
    assert_eq!(metarec(&["inspect", "missing.csv"], root).status.code(), Some(2));
    assert_eq!(metarec(&["run", "--bogus"], root).status.code(), Some(1));
    assert_eq!(metarec(&["run", "--experiment", "both"], root).status.code(), Some(1));
    assert_eq!(metarec(&["run", "--dataset", "ml1m"], root).status.code(), Some(1));
    assert_eq!(metarec(&["run", "--algorithms", "svd,nope"], root).status.code(), Some(1));
    assert_eq!(metarec(&["run", "--data-dir", "nowhere"], root).status.code(), Some(2));

    fs::write(root.join("data/ml-100k/u.data"), "1\t1\t9\t0\n").unwrap();
    let out = metarec(&["run"], root);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("u.data:1"));
}

#[test]
fn schema_lists_columns() {
    let (tmp, _) = setup();
    let out = metarec(&["schema"], tmp.path());
    assert!(out.status.success());
    let cols: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cols = cols.as_array().unwrap();
    assert_eq!(cols.len(), 1 + 2 + 4 + 9 + 19 + 10);
    assert_eq!(cols[0]["name"], "age");
    assert_eq!(cols.last().unwrap()["name"], "item_median");
}
