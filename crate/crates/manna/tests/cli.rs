use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn manna(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manna")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_then_verify() {
    let dir = TempDir::new().unwrap();
    let eq = dir.path().join("eq.txt");
    let inst = data("good_and_bad.txt");
    let out = manna(&["solve", "--instance", path(&inst), "-o", path(&eq)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&eq).unwrap();
    assert!(text.contains("prices 1/2 -1\n"), "{text}");
    let out = manna(&["verify", "--instance", path(&inst), "--equilibrium", path(&eq)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).ends_with("equilibrium: yes\n"));
}

#[test]
fn verify_rejects_a_wrong_allocation() {
    let dir = TempDir::new().unwrap();
    let eq = dir.path().join("eq.txt");
    std::fs::write(&eq, "manna equilibrium\nagents 2\nitems 2\nprices 1/2 -1\nallocation\n0 1/4\n1 3/4\n").unwrap();
    let out = manna(&["verify", "--instance", path(&data("good_and_bad.txt")), "--equilibrium", path(&eq)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn malformed_input_exits_one_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "manna instance\nagents 2\nitems x\n").unwrap();
    let out = manna(&["solve", "--instance", path(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 7"));
}

#[test]
fn iteration_limit_exits_three() {
    let out = manna(&["solve", "--instance", path(&data("three_chores.txt")), "--max-iters", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn trace_lines() {
    let out = manna(&["solve", "--instance", path(&data("good_and_bad.txt")), "--trace"]);
    assert_eq!(code(&out), 0);
    let err = String::from_utf8(out.stderr).unwrap();
    let first = err.lines().next().unwrap();
    assert_eq!(first.split(", ").count(), 4, "{first}");
    assert!(first.starts_with("1, "));
}

#[test]
fn enumerate_counts() {
    let out = manna(&["enumerate", "--instance", path(&data("three_chores.txt"))]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("prices -1 -1/5 -1/10\n"), "{text}");
    assert!(text.trim_end().ends_with("count: 3"), "{text}");
    let out = manna(&["enumerate", "--instance", path(&data("three_chores.txt")), "--cap", "3"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gen_is_deterministic() {
    let a = manna(&["gen", "--n", "3", "--m", "2", "--segs", "2", "--seed", "5", "--trial", "1"]);
    let b = manna(&["gen", "--n", "3", "--m", "2", "--segs", "2", "--seed", "5", "--trial", "1"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("manna instance\nagents 3\nitems 2\n"));
}

#[test]
fn bench_csv_and_plot_data() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("out.csv");
    let args = ["bench", "--n", "2", "--m", "2", "--segs", "2", "--trials", "3", "--seed", "1", "--plot-data"];
    let out = manna(&[&args[..], &["--csv", path(&csv)]].concat());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("8,"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().contains("solved=3/3"));
    let again = manna(&args);
    assert!(stdout(&again).starts_with(&text));
}

#[test]
fn reduce_solve_extract() {
    let dir = TempDir::new().unwrap();
    let market = dir.path().join("market.txt");
    let eq = dir.path().join("eq.txt");
    let game = data("matching_pennies.txt");
    assert_eq!(code(&manna(&["reduce", "--game", path(&game), "-o", path(&market)])), 0);
    assert!(std::fs::read_to_string(&market).unwrap().starts_with("manna instance\nagents 38\nitems 6\n"));
    assert_eq!(code(&manna(&["solve", "--instance", path(&market), "-o", path(&eq)])), 0);
    let out = manna(&["extract", "--prices", path(&eq), "--n", "2", "--game", path(&game)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("alpha 1/2 (0.5000) 1/2 (0.5000)\n"), "{text}");
    assert!(text.ends_with("well-supported at 1/2: yes\n"));
}

#[test]
fn reduce_to_fisher() {
    let out = manna(&["reduce", "--game", path(&data("matching_pennies.txt")), "--fisher"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("setting ceei\n"));
    let endowment = text.split("endowment\n").nth(1).unwrap();
    assert!(endowment.lines().all(|l| l == "1/2 1/2 1/2 1/2 1/2 1/2"));
}
