use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracdiff")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[problem]\nL = pi\nM = 64\nN = 8\nalphas = 0.8, 0.4\nq = 1\na = sin(x)\nT = 1\nK = 32\n";

#[test]
fn ml_prints_fifteen_digits_and_regime() {
    let o = run(&["ml", "1", "1", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "2.71828182845905 regime=closed-form");
    let o = run(&["ml", "2", "1", "-2.25"]);
    assert_eq!(stdout(&o).trim(), "0.0707372016677029 regime=series");
    let o = run(&["ml", "0.7", "1", "-5"]);
    assert!(stdout(&o).starts_with("0.0775693577647"));
}

#[test]
fn ml_complex_argument() {
    let o = run(&["ml", "1", "1", "0", "3.141592653589793"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields.len(), 3, "{text}");
    assert!((fields[0].parse::<f64>().unwrap() + 1.0).abs() < 1e-14);
    assert!(fields[1].parse::<f64>().unwrap().abs() < 1e-14);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["ml", "0", "1", "1"]).status.code(), Some(2));
    assert_eq!(run(&["ml", "0.5", "1"]).status.code(), Some(2));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
}

#[test]
fn strict_config_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let typo = write(tmp.path(), "typo.cfg", &format!("{SMALL}alpah = 0.3\n"));
    let section = write(tmp.path(), "section.cfg", &format!("{SMALL}[extras]\nfoo = 1\n"));
    let dup = write(tmp.path(), "dup.cfg", &format!("{SMALL}N = 4\n"));
    for cfg in [typo, section, dup] {
        let r = run(&["solve", "--config", &cfg, "--out", o]);
        assert_eq!(r.status.code(), Some(2), "{cfg}");
        assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
    }
}

#[test]
fn solve_writes_golden_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("o");
    let r = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(r.status.code(), Some(0));
    let sol = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut lines = sol.lines();
    assert_eq!(lines.next(), Some("t,x,u"));
    assert_eq!(sol.lines().count(), 1 + 33 * 65);
    assert!(lines.all(|l| l.split(',').count() == 3));
    let modes = std::fs::read_to_string(out.join("modes.csv")).unwrap();
    assert_eq!(modes.lines().next(), Some("t,n,c_n"));
    assert_eq!(modes.lines().count(), 1 + 33 * 8);
    let meta = std::fs::read_to_string(out.join("metadata.json")).unwrap();
    for key in ["\"tol\"", "\"modes\"", "\"time_nodes\"", "\"space_intervals\"", "\"windows\"", "\"diffs\""] {
        assert!(meta.contains(key), "{key} missing");
    }
}

#[test]
fn solve_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("single.cfg");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["solve", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(&["solve", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "4"]).status.code(), Some(0));
    for f in ["solution.csv", "modes.csv", "metadata.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn verify_decay_on_demo_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let r = run(&["verify", "--config", &config("demo.cfg"), "decay", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = stdout(&r);
    assert!(text.contains("passed=true"));
    assert!(text.lines().filter(|l| l.starts_with("check.")).all(|l| l.contains("=pass ")));
    assert!(out.join("decay_trace.csv").exists());
    assert!(out.join("report.txt").exists());
}

#[test]
fn verify_all_aggregates_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "[problem]\nL = pi\nM = 128\nN = 16\nalphas = 0.8, 0.4\nq = 1\na = x*(pi - x)\nT = 1\nK = 32\n\
                [verify]\ntheta = 0.5\nholder_steps = 16\nomega = 1, 2\n";
    let cfg = write(tmp.path(), "v.cfg", body);
    let out = tmp.path().join("v");
    let r = run(&["verify", "--config", &cfg, "all", "--out", out.to_str().unwrap()]);
    let text = stdout(&r);
    for section in ["decay.", "holder.", "sector.", "residual.", "wuc."] {
        assert!(text.lines().any(|l| l.starts_with(&format!("check.{section}"))), "{section} missing:\n{text}");
    }
    assert!(text.contains("passed=true"), "{text}");
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn compare_reports_all_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.cfg", "[problem]\nL = pi\nM = 64\nN = 8\nalphas = 0.6\na = x*(pi-x)\nT = 1\nK = 32\n");
    let out = tmp.path().join("c");
    let r = run(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
    let text = std::fs::read_to_string(out.join("compare.txt")).unwrap();
    assert!(text.contains("passed=true"));
}

#[test]
fn invert_prints_requested_times() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "i.cfg", SMALL);
    let out = tmp.path().join("i");
    let r = run(&["invert", "--config", &cfg, "--time", "0.5", "--time", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = stdout(&r);
    assert_eq!(text.lines().next(), Some("t,n,c_n"));
    assert_eq!(text.lines().count(), 1 + 2 * 8);
}
