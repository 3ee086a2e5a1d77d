mod common;

use std::collections::BTreeSet;
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use aggtl::checker::{check, Backend, CheckError, CheckSettings};
use aggtl::cltlb::translate;
use aggtl::formula::{desugar, parse_formula, to_pnf};
use aggtl::smt::{self, SmtError, SolverConfig, SolverStatus};
use aggtl::trace::expand;
use common::*;

fn fake_solver(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn settings_with(path: PathBuf, timeout: Duration) -> CheckSettings {
    CheckSettings {
        solver: SolverConfig {
            path,
            args: Vec::new(),
            timeout,
        },
        ..CheckSettings::default()
    }
}

fn count_example() -> (aggtl::Formula, aggtl::TimedWord) {
    let f = parse_formula("C[5]<3(p)").unwrap();
    let w = word(&[
        (0, &["p"]),
        (1, &["p"]),
        (2, &["q"]),
        (3, &["p"]),
        (4, &["q"]),
        (5, &["p"]),
        (6, &["p"]),
    ]);
    (f, w)
}

#[test]
fn timeout_yields_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let slow = fake_solver(dir.path(), "slow", "sleep 5\necho unsat");
    let (f, w) = count_example();
    let t = translate(&to_pnf(&desugar(&f))).unwrap();
    let cfg = SolverConfig {
        path: slow,
        args: Vec::new(),
        timeout: Duration::from_millis(300),
    };
    let out = smt::run(&smt::emit(&t, &expand(&w), 5), &cfg).unwrap();
    assert_eq!(out.status, SolverStatus::Unknown);
    assert!(out.wall < Duration::from_secs(3));
    assert!(matches!(
        smt::interpret(&out),
        Err(SmtError::NoVerdict {
            status: SolverStatus::Unknown,
            ..
        })
    ));
}

#[test]
fn crashing_solver_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let crash = fake_solver(dir.path(), "crash", "echo 'segfault' >&2\nexit 3");
    let (f, w) = count_example();
    let err = check(
        &f,
        &w,
        5,
        Backend::Smt,
        &settings_with(crash, Duration::from_secs(5)),
    )
    .unwrap_err();
    match err {
        CheckError::Smt(SmtError::NoVerdict { status, detail }) => {
            assert_eq!(status, SolverStatus::SolverError);
            assert_eq!(detail, "segfault");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_solver_is_reported() {
    let (f, w) = count_example();
    let err = check(
        &f,
        &w,
        5,
        Backend::Smt,
        &settings_with("/nonexistent/solver".into(), Duration::from_secs(1)),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        CheckError::Smt(SmtError::SolverUnavailable { .. })
    ));
    assert!(err.to_string().contains("counters backend"));
}

#[test]
fn canned_answers_map_to_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let (f, w) = count_example();
    let yes = fake_solver(dir.path(), "yes", "echo unsat");
    let no = fake_solver(dir.path(), "no", "echo sat");
    let s = |p| settings_with(p, Duration::from_secs(5));
    assert!(check(&f, &w, 5, Backend::Smt, &s(yes))
        .unwrap()
        .verdict
        .holds());
    assert!(!check(&f, &w, 5, Backend::Smt, &s(no))
        .unwrap()
        .verdict
        .holds());
}

#[test]
fn live_solver_decides_examples() {
    if !solver_available() {
        return;
    }
    let (f, w) = count_example();
    // p at 1, 3, 5 inside the window ending at 5.
    assert!(!smt_verdict(&f, &w, 5));
    assert!(smt_verdict(&f, &w, 2));
    let withdrawal_limit = parse_formula("G(logOff -> C[600]<=3(withdraw))").unwrap();
    let bad = word(&[
        (10, &["withdraw"]),
        (20, &["withdraw"]),
        (30, &["withdraw"]),
        (35, &["withdraw"]),
        (40, &["logOff"]),
    ]);
    assert!(!smt_verdict(&withdrawal_limit, &bad, 0));
}

#[test]
fn emission_is_deterministic() {
    let (f, w) = count_example();
    let d = expand(&w);
    let a = smt::emit(&translate(&to_pnf(&desugar(&f))).unwrap(), &d, 5);
    let b = smt::emit(&translate(&to_pnf(&desugar(&f))).unwrap(), &d, 5);
    assert_eq!(a.text, b.text);
}

#[test]
fn emission_matches_golden() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/count_window.smt2");
    let (f, w) = count_example();
    let script = smt::emit(&translate(&to_pnf(&desugar(&f))).unwrap(), &expand(&w), 5);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &script.text).unwrap();
    }
    assert_eq!(script.text, fs::read_to_string(&golden).unwrap());
}

/// Position suffixes of every declared symbol.
fn declared_positions(text: &str) -> Vec<(String, usize)> {
    text.lines()
        .filter_map(|l| l.strip_prefix("(declare-const "))
        .filter_map(|rest| rest.split_whitespace().next())
        .filter_map(|sym| {
            let (name, pos) = sym.rsplit_once('_')?;
            Some((name.to_owned(), pos.parse().ok()?))
        })
        .collect()
}

#[test]
fn symbols_stay_inside_the_bound() {
    let mut rng = rng(11);
    for _ in 0..40 {
        let (f, w, i) = random_triple(&mut rng, 3, 20);
        let d = expand(&w);
        let script = smt::emit(&translate(&to_pnf(&desugar(&f))).unwrap(), &d, i as usize);
        assert_eq!(script.bound, d.len());
        let positions = declared_positions(&script.text);
        assert!(!positions.is_empty());
        assert!(positions.iter().all(|(_, p)| *p < d.len()), "{f}");
    }
}

#[test]
fn silent_positions_are_pinned_false() {
    let w = word(&[(0, &["p"]), (4, &["q"])]);
    let f = parse_formula("C[3]>0(p) || q").unwrap();
    let text = smt::emit(&translate(&to_pnf(&desugar(&f))).unwrap(), &expand(&w), 0).text;
    let asserts: BTreeSet<&str> = text.lines().collect();
    for t in [1, 2, 3, 5] {
        assert!(
            asserts.contains(format!("(assert (not e_{t}))").as_str()),
            "e_{t}"
        );
        for atom in ["p", "q"] {
            assert!(
                asserts.contains(format!("(assert (not p_{atom}_{t}))").as_str()),
                "{atom}_{t}"
            );
        }
    }
    assert!(asserts.contains("(assert e_4)"));
    assert!(asserts.contains("(assert p_q_4)"));
}
