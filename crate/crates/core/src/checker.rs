//! Counter backend: computes the unique counter valuation fixed by the
//! axioms in one forward and one backward pass, evaluates the goal over it,
//! and wires the three backends into a single check entry point.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant as Clock;

use serde::Serialize;
use thiserror::Error;

use crate::cltlb::{
    translate_with, ArithTerm, CltlbFormula, CounterRole, Join, LinExpr, PairCounter, Symbol,
    TranslateError, TranslateOptions, Translation,
};
use crate::formula::{desugar, to_pnf, Formula};
use crate::oracle::{self, OracleError};
use crate::smt::{self, SmtError, SolverConfig};
use crate::trace::{expand, AlternationError, DenseWord, TimedWord};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("instant {instant} is past the last timestamp {last}")]
    InstantOutOfRange { instant: u64, last: u64 },
    #[error(transparent)]
    Alternation(#[from] AlternationError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

impl From<OracleError> for CheckError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::OutOfRange { position, last } => CheckError::InstantOutOfRange {
                instant: position as u64,
                last: last as u64,
            },
            OracleError::Alternation(a) => CheckError::Alternation(a),
        }
    }
}

/// Counter values at every position of a dense word.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CounterValuation {
    len: usize,
    values: BTreeMap<String, Vec<i64>>,
}

impl CounterValuation {
    pub fn new(len: usize) -> Self {
        CounterValuation {
            len,
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, series: Vec<i64>) {
        assert_eq!(series.len(), self.len, "counter series length");
        self.values.insert(name.into(), series);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn series(&self, name: &str) -> Option<&[i64]> {
        self.values.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Value at `pos`; 0 before the origin, the last value past the end.
    pub fn get(&self, name: &str, pos: i64) -> i64 {
        if pos < 0 {
            return 0;
        }
        let series = self
            .values
            .get(name)
            .unwrap_or_else(|| panic!("unknown counter `{name}`"));
        series[(pos as usize).min(self.len - 1)]
    }

    pub fn term(&self, t: &ArithTerm, pos: usize) -> i64 {
        let pos = pos as i64;
        match t {
            ArithTerm::Const(c) => *c,
            ArithTerm::Counter(x) => self.get(x, pos),
            ArithTerm::Next(x) => self.get(x, pos + 1),
            ArithTerm::Prev(d, x) => self.get(x, pos - *d as i64),
        }
    }

    pub fn expr(&self, e: &LinExpr, pos: usize) -> i64 {
        e.0.iter().map(|(c, t)| c * self.term(t, pos)).sum()
    }

    /// `expr(e, t)` for every position `t`.
    pub fn column(&self, e: &LinExpr) -> Vec<i64> {
        let mut acc = vec![0i64; self.len];
        for (c, term) in &e.0 {
            let (name, shift) = match term {
                ArithTerm::Const(k) => {
                    acc.iter_mut().for_each(|v| *v += c * k);
                    continue;
                }
                ArithTerm::Counter(x) => (x, 0),
                ArithTerm::Next(x) => (x, 1),
                ArithTerm::Prev(d, x) => (x, -(*d as i64)),
            };
            let series = self
                .values
                .get(name)
                .unwrap_or_else(|| panic!("unknown counter `{name}`"));
            let last = self.len as i64 - 1;
            for (t, v) in acc.iter_mut().enumerate() {
                let pos = t as i64 + shift;
                if pos >= 0 {
                    *v += c * series[pos.min(last) as usize];
                }
            }
        }
        acc
    }
}

/// Counter valuation satisfying the axioms of `t` on `w`. With `lax` unset,
/// distance pairs must alternate; with it set, simultaneous start and end
/// while a pair is open are accepted as in the axioms.
pub fn compute_counters(
    t: &Translation,
    w: &DenseWord,
    lax: bool,
) -> Result<CounterValuation, AlternationError> {
    let len = w.len();
    let mut out = CounterValuation::new(len);
    for decl in &t.counters {
        match &decl.role {
            CounterRole::Count { atom } => {
                let mut v = vec![0i64; len];
                for p in 1..len {
                    let hit = w.is_valid(p - 1) && w.holds(atom, p - 1);
                    let next = v[p - 1] + i64::from(hit);
                    v[p] = match decl.modulo {
                        Some(m) => next % m as i64,
                        None => next,
                    };
                }
                out.insert(decl.name.clone(), v);
            }
            CounterRole::Pair {
                kind: PairCounter::Flag,
                start,
                end,
            } => {
                for (kind, series) in pair_series(w, start, end, lax)? {
                    out.insert(crate::cltlb::pair_counter(kind, start, end), series);
                }
            }
            CounterRole::Pair { .. } => {}
        }
    }
    Ok(out)
}

fn pair_series(
    w: &DenseWord,
    start: &str,
    end: &str,
    lax: bool,
) -> Result<[(PairCounter, Vec<i64>); 5], AlternationError> {
    let len = w.len();
    let (mut g, mut h, mut s, mut a) = (
        vec![0i64; len],
        vec![0i64; len],
        vec![0i64; len],
        vec![0i64; len],
    );
    let fail = |t: usize, reason: &str| AlternationError {
        start: start.to_owned(),
        end: end.to_owned(),
        timestamp: t as u64,
        reason: reason.to_owned(),
    };
    let closes = |t: usize| w.is_valid(t) && w.holds(end, t);
    for t in 0..len - 1 {
        let phi = w.is_valid(t) && w.holds(start, t);
        let psi = closes(t);
        let open = g[t] == 1;
        let (ng, nh, ns, na) = match (phi, psi) {
            (true, false) => {
                if open && !lax {
                    return Err(fail(t, "start while a pair is open"));
                }
                (1, h[t], s[t] + 1, a[t])
            }
            (false, true) => {
                if !open && !lax {
                    return Err(fail(t, "end without an open start"));
                }
                (0, h[t] + 1, s[t], s[t])
            }
            (true, true) => {
                if open && !lax {
                    return Err(fail(t, "start and end while a pair is open"));
                }
                (g[t], h[t] + 1, s[t], a[t])
            }
            (false, false) => (g[t], h[t], s[t] + g[t], a[t]),
        };
        g[t + 1] = ng;
        h[t + 1] = nh;
        s[t + 1] = ns;
        a[t + 1] = na;
    }
    // b is constant between closing positions and equals s at the next one.
    let mut b = vec![0i64; len];
    let mut pin = s[len - 1];
    for t in (0..len).rev() {
        if closes(t) {
            pin = s[t];
        }
        b[t] = pin;
    }
    Ok([
        (PairCounter::Flag, g),
        (PairCounter::Closed, h),
        (PairCounter::Running, s),
        (PairCounter::ClosedSum, a),
        (PairCounter::Lookahead, b),
    ])
}

/// Truth value of `f` at position `i` under the valuation `vals`.
pub fn eval_cltlb(f: &CltlbFormula, w: &DenseWord, vals: &CounterValuation, i: usize) -> bool {
    eval_cltlb_all(f, w, vals)[i]
}

/// Truth table of `f` over every position.
pub fn eval_cltlb_all(f: &CltlbFormula, w: &DenseWord, vals: &CounterValuation) -> Vec<bool> {
    Tables { w, vals }.table(f)
}

/// Whether every axiom of `t` holds at position 0.
pub fn axioms_hold(t: &Translation, w: &DenseWord, vals: &CounterValuation) -> bool {
    t.axioms
        .iter()
        .all(|ax| eval_cltlb(&ax.formula, w, vals, 0))
}

struct Tables<'a> {
    w: &'a DenseWord,
    vals: &'a CounterValuation,
}

impl Tables<'_> {
    fn table(&self, f: &CltlbFormula) -> Vec<bool> {
        let n = self.w.len();
        match f {
            CltlbFormula::Prop(s) => (0..n).map(|t| self.symbol(s, t)).collect(),
            CltlbFormula::NegProp(s) => (0..n).map(|t| !self.symbol(s, t)).collect(),
            CltlbFormula::Compare { lhs, rel, rhs } => {
                let (l, r) = (self.vals.column(lhs), self.vals.column(rhs));
                l.iter().zip(&r).map(|(x, y)| rel.holds(*x, *y)).collect()
            }
            CltlbFormula::And(a, b) => zip(self.table(a), self.table(b), |x, y| x && y),
            CltlbFormula::Or(a, b) => zip(self.table(a), self.table(b), |x, y| x || y),
            CltlbFormula::Not(a) => negated(self.table(a)),
            CltlbFormula::Until(iv, a, b) => {
                until(&self.table(a), &self.table(b), iv.lo(), iv.hi())
            }
            CltlbFormula::Since(iv, a, b) => {
                since(&self.table(a), &self.table(b), iv.lo(), iv.hi())
            }
            CltlbFormula::Release(iv, a, b) => negated(until(
                &negated(self.table(a)),
                &negated(self.table(b)),
                iv.lo(),
                iv.hi(),
            )),
            CltlbFormula::Trigger(iv, a, b) => negated(since(
                &negated(self.table(a)),
                &negated(self.table(b)),
                iv.lo(),
                iv.hi(),
            )),
            CltlbFormula::Next(a) => {
                let ta = self.table(a);
                (0..n).map(|t| t + 1 < n && ta[t + 1]).collect()
            }
            CltlbFormula::Yesterday { depth, weak, inner } => {
                let ti = self.table(inner);
                let d = *depth as usize;
                (0..n)
                    .map(|t| if t >= d { ti[t - d] } else { *weak })
                    .collect()
            }
            CltlbFormula::Stride {
                join,
                count,
                step,
                weak,
                inner,
            } => {
                let ti = self.table(inner);
                let (count, step) = (*count as usize, *step as usize);
                (0..n)
                    .map(|t| {
                        // Shifts past the origin all evaluate to `weak`.
                        let reachable = (t / step.max(1) + 1).min(count);
                        let mut values = (0..reachable).map(|m| ti[t - m * step]);
                        let rest = (reachable < count).then_some(*weak);
                        match join {
                            Join::And => values.all(|v| v) && rest.unwrap_or(true),
                            Join::Or => values.any(|v| v) || rest.unwrap_or(false),
                        }
                    })
                    .collect()
            }
            CltlbFormula::Globally(a) => {
                let ta = self.table(a);
                let mut out = vec![true; n];
                for t in (0..n.saturating_sub(1)).rev() {
                    out[t] = ta[t] && out[t + 1];
                }
                out
            }
            CltlbFormula::WeakUntil(a, b) => {
                let (ta, tb) = (self.table(a), self.table(b));
                let mut out = vec![false; n];
                for t in (0..n).rev() {
                    let later = if t + 1 < n { out[t + 1] } else { true };
                    out[t] = tb[t] || (ta[t] && later);
                }
                out
            }
            CltlbFormula::IfThenElse(c, a, b) => {
                let (tc, ta, tb) = (self.table(c), self.table(a), self.table(b));
                (0..n).map(|t| if tc[t] { ta[t] } else { tb[t] }).collect()
            }
        }
    }

    fn symbol(&self, s: &Symbol, t: usize) -> bool {
        match s {
            Symbol::Valid => self.w.is_valid(t),
            Symbol::Atom(a) => self.w.holds(a, t),
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

fn negated(v: Vec<bool>) -> Vec<bool> {
    v.into_iter().map(|x| !x).collect()
}

/// Linear-time bounded until over precomputed operand tables.
fn until(ta: &[bool], tb: &[bool], lo: u64, hi: Option<u64>) -> Vec<bool> {
    let n = ta.len();
    let mut next_fail = vec![n; n + 1];
    let mut next_b = vec![n; n + 1];
    for t in (0..n).rev() {
        next_fail[t] = if ta[t] { next_fail[t + 1] } else { t };
        next_b[t] = if tb[t] { t } else { next_b[t + 1] };
    }
    (0..n)
        .map(|i| {
            let from = i.saturating_add(lo as usize);
            if from >= n {
                return false;
            }
            let j = next_b[from];
            let limit = hi.map_or(n - 1, |h| i.saturating_add(h as usize).min(n - 1));
            j <= limit && j <= next_fail[i]
        })
        .collect()
}

/// Linear-time bounded since over precomputed operand tables.
fn since(ta: &[bool], tb: &[bool], lo: u64, hi: Option<u64>) -> Vec<bool> {
    let n = ta.len();
    // Shifted by one so that "none" is 0.
    let mut prev_fail = vec![0usize; n];
    let mut prev_b = vec![0usize; n];
    for t in 0..n {
        let (pf, pb) = if t == 0 {
            (0, 0)
        } else {
            (prev_fail[t - 1], prev_b[t - 1])
        };
        prev_fail[t] = if ta[t] { pf } else { t + 1 };
        prev_b[t] = if tb[t] { t + 1 } else { pb };
    }
    (0..n)
        .map(|i| {
            let Some(to) = i.checked_sub(lo as usize) else {
                return false;
            };
            let j = prev_b[to];
            if j == 0 {
                return false;
            }
            let limit = hi.map_or(0, |h| i.saturating_sub(h as usize)) + 1;
            j >= limit && j >= prev_fail[i]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Check pipeline

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Oracle,
    Counters,
    Smt,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Oracle, Backend::Counters, Backend::Smt];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::Counters => "counters",
            Backend::Smt => "smt",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckSettings {
    /// Accept distance pairs that do not alternate.
    pub lax: bool,
    /// Keep count counters modulo `kmax + 1`.
    pub modulo: Option<u64>,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub backend: Backend,
    pub instant: u64,
    pub wall_ms: f64,
    pub trace_instants: usize,
    pub dense_len: usize,
    pub counters: usize,
    pub formula_size: usize,
}

impl CheckReport {
    /// Single-line `key=value` form.
    pub fn record(&self) -> String {
        format!(
            "verdict={} backend={} instant={} wall_ms={:.3} trace_instants={} dense_len={} counters={} formula_size={}",
            self.verdict,
            self.backend,
            self.instant,
            self.wall_ms,
            self.trace_instants,
            self.dense_len,
            self.counters,
            self.formula_size
        )
    }
}

/// Decides whether `f` holds at timestamp `instant` of `trace`.
pub fn check(
    f: &Formula,
    trace: &TimedWord,
    instant: u64,
    backend: Backend,
    settings: &CheckSettings,
) -> Result<CheckReport, CheckError> {
    let last = trace.last_timestamp();
    if instant > last {
        return Err(CheckError::InstantOutOfRange { instant, last });
    }
    let clock = Clock::now();
    let w = expand(trace);
    let i = instant as usize;
    let (holds, counters) = match backend {
        Backend::Oracle => (oracle::eval(f, &w, i)?, 0),
        Backend::Counters => {
            let t = translate_with(
                &to_pnf(&desugar(f)),
                TranslateOptions {
                    modulo: settings.modulo,
                },
            )?;
            let vals = compute_counters(&t, &w, settings.lax)?;
            (eval_cltlb(&t.goal, &w, &vals, i), t.counters.len())
        }
        Backend::Smt => {
            let t = translate_with(
                &to_pnf(&desugar(f)),
                TranslateOptions {
                    modulo: settings.modulo,
                },
            )?;
            if !settings.lax {
                for (start, end) in f.dist_pairs() {
                    oracle::pair_instances(&w, &start, &end)?;
                }
            }
            let script = smt::emit(&t, &w, i);
            let outcome = smt::run(&script, &settings.solver)?;
            (smt::interpret(&outcome)?, t.counters.len())
        }
    };
    Ok(CheckReport {
        verdict: Verdict::from_bool(holds),
        backend,
        instant,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        trace_instants: trace.len(),
        dense_len: w.len(),
        counters,
        formula_size: f.size(),
    })
}
