use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use wlbmc::btor2::{parse, validate};

fn wlbmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlbmc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus() -> TempDir {
    let dir = TempDir::new().unwrap();
    let o = wlbmc(&["gen", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

fn path(dir: &Path, file: &str) -> String {
    dir.join(file).to_str().unwrap().to_string()
}

const NEVER_BAD: &str = "\
1 sort bitvec 1
2 sort bitvec 8
3 state 2 x
4 zero 2
5 init 2 3 4
6 next 2 3 3
7 one 2
8 eq 1 3 7
9 bad 8 never
";

#[test]
fn corpus_files_are_written() {
    let dir = corpus();
    for ext in ["s", "btor2", "json"] {
        assert!(dir.path().join(format!("multi-input-3.{ext}")).exists());
    }
    let text = std::fs::read_to_string(dir.path().join("division-by-zero.btor2")).unwrap();
    assert!(validate(&parse(&text).unwrap()).is_empty());
}

#[test]
fn bad_event_exits_one() {
    let dir = corpus();
    let o = wlbmc(&["check", &path(dir.path(), "division-by-zero.btor2"), "-array", "8", "-kmax", "40"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("k=15 bad=division-by-zero inputs=")), "{out}");
}

#[test]
fn cflobvdd_reports_the_same_event() {
    let dir = corpus();
    let model = path(dir.path(), "bad-exit-code.btor2");
    let roa = wlbmc(&["check", &model, "-array", "8", "-kmax", "40"]);
    let cf = wlbmc(&["check", &model, "-array", "8", "-kmax", "40", "-use-CFLOBVDD", "2"]);
    assert_eq!(code(&roa), 1);
    assert_eq!(stdout(&roa), stdout(&cf));
}

#[test]
fn no_event_exits_zero() {
    let dir = TempDir::new().unwrap();
    let model = path(dir.path(), "never.btor2");
    std::fs::write(&model, NEVER_BAD).unwrap();
    let o = wlbmc(&["check", &model, "-kmax", "5"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn missing_solver_exits_three() {
    let dir = corpus();
    let o = wlbmc(&["check", &path(dir.path(), "division-by-zero.btor2"), "-propagate", "0", "-kmax", "20", "--solver", ""]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_and_model_errors_exit_two() {
    assert_eq!(code(&wlbmc(&["check", "/nonexistent/model.btor2"])), 2);
    assert_eq!(code(&wlbmc(&["check", "--no-such-flag", "x"])), 2);
    let dir = TempDir::new().unwrap();
    let bad = path(dir.path(), "bad.btor2");
    std::fs::write(&bad, "1 sort bitvec 8\n2 add 1 7 8\n").unwrap();
    assert_eq!(code(&wlbmc(&["check", &bad])), 2);
}

#[test]
fn eval_prints_one_row_per_input() {
    let dir = corpus();
    let o = wlbmc(&["eval", &path(dir.path(), "division-by-zero.btor2"), "-kmax", "40"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "input\tleast_k\tbad");
    assert_eq!(lines.len(), 257);
    assert!(lines.contains(&"30\t15\tdivision-by-zero"));
    assert!(lines.contains(&"31\t-\t-"));
}

#[test]
fn json_report_goes_to_stdout() {
    let dir = corpus();
    let o = wlbmc(&["check", &path(dir.path(), "bad-exit-code.btor2"), "-array", "8", "-kmax", "40", "--json", "-"]);
    let out = stdout(&o);
    let json: serde_json::Value = serde_json::from_str(&out[out.find("\n{").unwrap()..]).unwrap();
    assert_eq!(json["solver_calls"], 0);
    assert_eq!(json["events"][0]["k"], 19);
}

#[test]
fn convert_and_unroll_write_valid_models() {
    let dir = corpus();
    let model = path(dir.path(), "division-by-zero.btor2");
    for args in [vec!["convert", &model, "-array", "8"], vec!["convert", &model, "--recursive-array"], vec!["unroll", &model, "-k", "3"]] {
        let o = wlbmc(&args);
        assert_eq!(code(&o), 0, "{args:?}");
        let m = parse(&stdout(&o)).unwrap();
        assert!(validate(&m).is_empty(), "{args:?}");
    }
}

#[test]
fn gen_from_assembly() {
    let dir = TempDir::new().unwrap();
    let src = path(dir.path(), "exit.s");
    std::fs::write(&src, "  addi a0, zero, 0\n  addi a7, zero, 93\n  ecall\n").unwrap();
    let o = wlbmc(&["gen", &src, "-bytestoread", "1", "-Pnosegfaults"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = path(dir.path(), "exit.btor2");
    let check = wlbmc(&["check", &model, "-kmax", "10", "-check-termination"]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
    assert!(stdout(&check).contains("terminated"), "{}", stdout(&check));
}

#[test]
fn bench_writes_the_tsv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b");
    let o = wlbmc(&[
        "bench",
        "--out",
        out.to_str().unwrap(),
        "--samples",
        "division-by-zero",
        "--modes",
        "roabvdd-p8,cflobvdd-p8",
        "--arrays",
        "8",
    ]);
    assert_eq!(code(&o), 0);
    let tsv = std::fs::read_to_string(out.join("bench.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "sample\tmode\tarray\truntime_s\tevents\tsolver_calls\tpeak_nodes");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("division-by-zero\troabvdd-p8\t8\t"));
}
