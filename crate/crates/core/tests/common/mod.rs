#![allow(dead_code)]

use std::sync::OnceLock;

use aggtl::checker::{compute_counters, eval_cltlb};
use aggtl::cltlb::{translate_with, TranslateOptions};
use aggtl::formula::{desugar, to_pnf, Formula};
use aggtl::oracle;
use aggtl::sample::{random_formula, random_word};
use aggtl::smt::{self, SmtScript, SolverConfig, SolverStatus};
use aggtl::trace::{expand, TimedWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn word(pairs: &[(u64, &[&str])]) -> TimedWord {
    TimedWord::from_pairs(pairs.iter().map(|(t, a)| (*t, a.iter().copied()))).unwrap()
}

/// Random formula, trace and instant inside the trace.
pub fn random_triple(
    rng: &mut ChaCha8Rng,
    depth: u32,
    max_horizon: u64,
) -> (Formula, TimedWord, u64) {
    let f = random_formula(rng, depth);
    let w = random_word(rng, max_horizon);
    let i = rng.gen_range(0..=w.last_timestamp());
    (f, w, i)
}

pub fn oracle_verdict(f: &Formula, w: &TimedWord, i: u64) -> bool {
    oracle::eval(f, &expand(w), i as usize).unwrap()
}

pub fn counters_verdict(f: &Formula, w: &TimedWord, i: u64, modulo: Option<u64>) -> bool {
    let d = expand(w);
    let t = translate_with(&to_pnf(&desugar(f)), TranslateOptions { modulo }).unwrap();
    let vals = compute_counters(&t, &d, false).unwrap();
    eval_cltlb(&t.goal, &d, &vals, i as usize)
}

pub fn smt_verdict(f: &Formula, w: &TimedWord, i: u64) -> bool {
    let d = expand(w);
    let t = translate_with(&to_pnf(&desugar(f)), TranslateOptions::default()).unwrap();
    let out = smt::run(&smt::emit(&t, &d, i as usize), &SolverConfig::default()).unwrap();
    smt::interpret(&out).unwrap_or_else(|e| panic!("{e} for {f} at {i}"))
}

/// Whether the default solver answers the `(and true false)` probe.
pub fn solver_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        let probe = SmtScript {
            text: "(set-logic QF_LIA)\n(assert (and true false))\n(check-sat)\n".into(),
            bound: 0,
            instant: 0,
        };
        let ok = matches!(
            smt::run(&probe, &SolverConfig::default()),
            Ok(o) if o.status == SolverStatus::Unsat
        );
        if !ok {
            eprintln!("note: no SMT solver found; solver-backed tests are skipped");
        }
        ok
    })
}
