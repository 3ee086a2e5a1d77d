//! Bounded SMT-LIB encoding of a translation over a fixed dense word, and a
//! runner for an external solver.
//!
//! The trace is asserted exactly, every composite subformula gets one boolean
//! per position, the axioms are asserted at position 0 and the goal is
//! asserted negated at the instant. `unsat` therefore means the formula holds.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write as _};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant as Clock};

use serde::Serialize;
use thiserror::Error;

use crate::cltlb::{ArithTerm, CltlbFormula, Join, LinExpr, Rel, Symbol, Translation};
use crate::trace::DenseWord;

pub const SOLVER_ENV: &str = "AGGTL_SOLVER";

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("solver `{path}` could not be started ({source}); install it, pass --solver, or use the counters backend")]
    SolverUnavailable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver returned no verdict ({status:?}): {detail}")]
    NoVerdict {
        status: SolverStatus,
        detail: String,
    },
}

#[derive(Debug, Clone)]
pub struct SmtScript {
    pub text: String,
    pub bound: usize,
    pub instant: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: std::env::var_os(SOLVER_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("z3")),
            args: Vec::new(),
            timeout: Duration::from_secs(60),
        }
    }
}

impl SolverConfig {
    /// Explicit path if given, else the environment variable, else `z3`.
    pub fn resolve(path: Option<PathBuf>, timeout: Duration) -> Self {
        let mut cfg = SolverConfig::default();
        if let Some(p) = path {
            cfg.path = p;
        }
        cfg.timeout = timeout;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    SolverError,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    pub output: String,
    pub stderr: String,
    pub wall: Duration,
}

/// `unsat` means the goal holds, `sat` that it is violated.
pub fn interpret(outcome: &SolverOutcome) -> Result<bool, SmtError> {
    match outcome.status {
        SolverStatus::Unsat => Ok(true),
        SolverStatus::Sat => Ok(false),
        status => Err(SmtError::NoVerdict {
            status,
            detail: outcome
                .output
                .lines()
                .chain(outcome.stderr.lines())
                .find(|l| !l.trim().is_empty())
                .unwrap_or("timed out or produced no output")
                .to_owned(),
        }),
    }
}

/// Status from the first token of solver output.
pub fn parse_status(output: &str) -> SolverStatus {
    match output.split_whitespace().next() {
        Some("sat") => SolverStatus::Sat,
        Some("unsat") => SolverStatus::Unsat,
        Some("unknown") => SolverStatus::Unknown,
        _ => SolverStatus::SolverError,
    }
}

pub fn run(script: &SmtScript, solver: &SolverConfig) -> Result<SolverOutcome, SmtError> {
    let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
    file.write_all(script.text.as_bytes())?;
    file.flush()?;
    let clock = Clock::now();
    let mut child = Command::new(&solver.path)
        .args(&solver.args)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SmtError::SolverUnavailable {
            path: solver.path.display().to_string(),
            source,
        })?;
    let stdout = drain(child.stdout.take().expect("piped stdout"));
    let stderr = drain(child.stderr.take().expect("piped stderr"));
    let mut pause = Duration::from_micros(200);
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if clock.elapsed() >= solver.timeout {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(10));
    };
    let wall = clock.elapsed();
    let output = stdout.join().expect("reader thread")?;
    let stderr = stderr.join().expect("reader thread")?;
    let status = match exit {
        None => SolverStatus::Unknown,
        Some(_) => parse_status(&output),
    };
    Ok(SolverOutcome {
        status,
        output,
        stderr,
        wall,
    })
}

fn drain(mut pipe: impl Read + Send + 'static) -> thread::JoinHandle<std::io::Result<String>> {
    thread::spawn(move || {
        let mut buf = String::new();
        pipe.read_to_string(&mut buf).map(|_| buf)
    })
}

/// Deterministic script for deciding the goal of `t` at position `instant`.
pub fn emit(t: &Translation, w: &DenseWord, instant: usize) -> SmtScript {
    let mut em = Emitter::assumptions(t, w, instant);
    em.out.push_str("; goal\n");
    let h = em.compile(&t.goal);
    let goal = em.at(&h, instant);
    em.assert(&format!("(not {goal})"));
    em.out.push_str("(check-sat)\n(exit)\n");
    SmtScript {
        text: em.out,
        bound: em.bound,
        instant,
    }
}

/// Trace, counter declarations and axioms only, with no goal and no
/// `(check-sat)`; callers append their own constraints.
pub fn emit_assumptions(t: &Translation, w: &DenseWord) -> SmtScript {
    let em = Emitter::assumptions(t, w, 0);
    SmtScript {
        text: em.out,
        bound: em.bound,
        instant: 0,
    }
}

/// SMT symbol of counter `name` at position `p`.
pub fn counter_symbol(name: &str, p: usize) -> String {
    counter_var(name, p)
}

fn lit(value: bool, var: String) -> String {
    if value {
        var
    } else {
        format!("(not {var})")
    }
}

fn counter_var(name: &str, p: usize) -> String {
    format!("c_{name}_{p}")
}

fn bool_lit(b: bool) -> String {
    (if b { "true" } else { "false" }).to_owned()
}

fn conj(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().unwrap_or_default(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn disj(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "false".into(),
        1 => parts.into_iter().next().unwrap_or_default(),
        _ => format!("(or {})", parts.join(" ")),
    }
}

/// Compiled subformula: rendered inline (leaves) or through per-position
/// auxiliary booleans.
enum Handle<'f> {
    Leaf(&'f CltlbFormula),
    Aux(usize),
}

struct Emitter {
    bound: usize,
    out: String,
    next_id: usize,
}

impl Emitter {
    fn assumptions(t: &Translation, w: &DenseWord, instant: usize) -> Emitter {
        let bound = w.len();
        let mut em = Emitter {
            bound,
            out: String::new(),
            next_id: 0,
        };
        let _ = writeln!(
            em.out,
            "; bounded trace check, {bound} positions, instant {instant}"
        );
        em.out.push_str("(set-logic QF_LIA)\n");

        let mut atoms: BTreeSet<String> = w.alphabet().map(str::to_owned).collect();
        atoms.extend(t.atoms());
        em.out.push_str("; trace\n");
        for p in 0..bound {
            let v = em.sym(&Symbol::Valid, p);
            em.declare(&v, "Bool");
            em.assert(&lit(w.is_valid(p), v));
            for a in &atoms {
                let name = em.sym(&Symbol::Atom(a.clone()), p);
                em.declare(&name, "Bool");
                em.assert(&lit(w.holds(a, p), name));
            }
        }

        em.out.push_str("; counters\n");
        for c in &t.counters {
            for p in 0..bound {
                em.declare(&counter_var(&c.name, p), "Int");
            }
        }

        for ax in &t.axioms {
            let _ = writeln!(em.out, "; axiom {} {}", ax.group, ax.label);
            let h = em.compile(&ax.formula);
            let root = em.at(&h, 0);
            em.assert(&root);
        }
        em
    }

    fn declare(&mut self, name: &str, sort: &str) {
        let _ = writeln!(self.out, "(declare-const {name} {sort})");
    }

    fn assert(&mut self, term: &str) {
        let _ = writeln!(self.out, "(assert {term})");
    }

    fn define(&mut self, name: &str, term: &str) {
        let _ = writeln!(self.out, "(define-fun {name} () Bool {term})");
    }

    fn sym(&self, s: &Symbol, p: usize) -> String {
        match s {
            Symbol::Valid => format!("e_{p}"),
            Symbol::Atom(a) => format!("p_{a}_{p}"),
        }
    }

    fn term(&self, t: &ArithTerm, p: usize) -> String {
        let read = |name: &str, pos: i64| {
            if pos < 0 {
                "0".to_owned()
            } else {
                counter_var(name, (pos as usize).min(self.bound - 1))
            }
        };
        let p = p as i64;
        match t {
            ArithTerm::Const(c) if *c < 0 => format!("(- {})", -c),
            ArithTerm::Const(c) => c.to_string(),
            ArithTerm::Counter(x) => read(x, p),
            ArithTerm::Next(x) => read(x, p + 1),
            ArithTerm::Prev(d, x) => read(x, p - *d as i64),
        }
    }

    fn expr(&self, e: &LinExpr, p: usize) -> String {
        let parts: Vec<String> =
            e.0.iter()
                .map(|(c, t)| {
                    let term = self.term(t, p);
                    match c {
                        1 => term,
                        -1 => format!("(- {term})"),
                        c if *c < 0 => format!("(* (- {}) {term})", -c),
                        c => format!("(* {c} {term})"),
                    }
                })
                .collect();
        match parts.len() {
            0 => "0".into(),
            1 => parts.into_iter().next().unwrap_or_default(),
            _ => format!("(+ {})", parts.join(" ")),
        }
    }

    fn aux(id: usize, p: usize) -> String {
        format!("n{id}_{p}")
    }

    /// The handle's value at position `p` as an SMT term.
    fn at(&self, h: &Handle<'_>, p: usize) -> String {
        match h {
            Handle::Aux(id) => Self::aux(*id, p),
            Handle::Leaf(f) => match f {
                CltlbFormula::Prop(s) => self.sym(s, p),
                CltlbFormula::NegProp(s) => format!("(not {})", self.sym(s, p)),
                CltlbFormula::Compare { lhs, rel, rhs } => {
                    let (l, r) = (self.expr(lhs, p), self.expr(rhs, p));
                    match rel {
                        Rel::Lt => format!("(< {l} {r})"),
                        Rel::Le => format!("(<= {l} {r})"),
                        Rel::Ge => format!("(>= {l} {r})"),
                        Rel::Gt => format!("(> {l} {r})"),
                        Rel::Eq => format!("(= {l} {r})"),
                        Rel::Ne => format!("(not (= {l} {r}))"),
                    }
                }
                _ => unreachable!("composite formulas are compiled to auxiliaries"),
            },
        }
    }

    /// Value at `p`, negated when `neg` is set.
    fn at_signed(&self, h: &Handle<'_>, p: usize, neg: bool) -> String {
        let v = self.at(h, p);
        if neg {
            format!("(not {v})")
        } else {
            v
        }
    }

    fn fresh(&mut self) -> usize {
        self.next_id += 1;
        self.next_id
    }

    fn compile<'f>(&mut self, f: &'f CltlbFormula) -> Handle<'f> {
        let b = self.bound;
        match f {
            CltlbFormula::Prop(_) | CltlbFormula::NegProp(_) | CltlbFormula::Compare { .. } => {
                Handle::Leaf(f)
            }
            CltlbFormula::And(x, y) | CltlbFormula::Or(x, y) => {
                let (hx, hy) = (self.compile(x), self.compile(y));
                let id = self.fresh();
                let op = if matches!(f, CltlbFormula::And(..)) {
                    "and"
                } else {
                    "or"
                };
                for p in 0..b {
                    let term = format!("({op} {} {})", self.at(&hx, p), self.at(&hy, p));
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Not(x) => {
                let hx = self.compile(x);
                let id = self.fresh();
                for p in 0..b {
                    let term = format!("(not {})", self.at(&hx, p));
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::IfThenElse(c, x, y) => {
                let (hc, hx, hy) = (self.compile(c), self.compile(x), self.compile(y));
                let id = self.fresh();
                for p in 0..b {
                    let term = format!(
                        "(ite {} {} {})",
                        self.at(&hc, p),
                        self.at(&hx, p),
                        self.at(&hy, p)
                    );
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Next(x) => {
                let hx = self.compile(x);
                let id = self.fresh();
                for p in 0..b {
                    let term = if p + 1 < b {
                        self.at(&hx, p + 1)
                    } else {
                        bool_lit(false)
                    };
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Yesterday { depth, weak, inner } => {
                let hx = self.compile(inner);
                let id = self.fresh();
                let d = *depth as usize;
                for p in 0..b {
                    let term = if p >= d {
                        self.at(&hx, p - d)
                    } else {
                        bool_lit(*weak)
                    };
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Stride {
                join,
                count,
                step,
                weak,
                inner,
            } => {
                let hx = self.compile(inner);
                let id = self.fresh();
                let (count, step) = (*count as usize, (*step as usize).max(1));
                for p in 0..b {
                    let reachable = (p / step + 1).min(count);
                    let mut parts: Vec<String> =
                        (0..reachable).map(|m| self.at(&hx, p - m * step)).collect();
                    if reachable < count {
                        parts.push(bool_lit(*weak));
                    }
                    let term = match join {
                        Join::And => conj(parts),
                        Join::Or => disj(parts),
                    };
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Globally(x) => {
                let hx = self.compile(x);
                let id = self.fresh();
                for p in (0..b).rev() {
                    let term = if p + 1 < b {
                        format!("(and {} {})", self.at(&hx, p), Self::aux(id, p + 1))
                    } else {
                        bool_lit(true)
                    };
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::WeakUntil(x, y) => {
                let (hx, hy) = (self.compile(x), self.compile(y));
                let id = self.fresh();
                for p in (0..b).rev() {
                    let later = if p + 1 < b {
                        Self::aux(id, p + 1)
                    } else {
                        bool_lit(true)
                    };
                    let term =
                        format!("(or {} (and {} {later}))", self.at(&hy, p), self.at(&hx, p));
                    self.define(&Self::aux(id, p), &term);
                }
                Handle::Aux(id)
            }
            CltlbFormula::Until(iv, x, y) | CltlbFormula::Release(iv, x, y) => {
                let neg = matches!(f, CltlbFormula::Release(..));
                let (hx, hy) = (self.compile(x), self.compile(y));
                self.until(&hx, &hy, iv.lo() as usize, iv.hi().map(|h| h as usize), neg)
            }
            CltlbFormula::Since(iv, x, y) | CltlbFormula::Trigger(iv, x, y) => {
                let neg = matches!(f, CltlbFormula::Trigger(..));
                let (hx, hy) = (self.compile(x), self.compile(y));
                self.since(&hx, &hy, iv.lo() as usize, iv.hi().map(|h| h as usize), neg)
            }
        }
    }

    /// Bounded until; with `neg` set, the dual release computed as the
    /// negated until of the negated operands.
    fn until(
        &mut self,
        hx: &Handle<'_>,
        hy: &Handle<'_>,
        lo: usize,
        hi: Option<usize>,
        neg: bool,
    ) -> Handle<'static> {
        let b = self.bound;
        // Unbounded suffix chain: chain_p = y_p | (x_p & chain_{p+1}).
        let chain = self.fresh();
        for p in (0..b).rev() {
            let y = self.at_signed(hy, p, neg);
            let term = if p + 1 < b {
                format!(
                    "(or {y} (and {} {}))",
                    self.at_signed(hx, p, neg),
                    Self::aux(chain, p + 1)
                )
            } else {
                y
            };
            self.define(&Self::aux(chain, p), &term);
        }
        let id = self.fresh();
        for p in 0..b {
            let from = p + lo;
            let value = if from >= b {
                bool_lit(false)
            } else {
                let mut parts: Vec<String> =
                    (p..from).map(|k| self.at_signed(hx, k, neg)).collect();
                let to = hi.map_or(b - 1, |h| (p + h).min(b - 1));
                if to == b - 1 {
                    parts.push(Self::aux(chain, from));
                } else {
                    let mut acc = self.at_signed(hy, to, neg);
                    for k in (from..to).rev() {
                        acc = format!(
                            "(or {} (and {} {acc}))",
                            self.at_signed(hy, k, neg),
                            self.at_signed(hx, k, neg)
                        );
                    }
                    parts.push(acc);
                }
                conj(parts)
            };
            let term = if neg { format!("(not {value})") } else { value };
            self.define(&Self::aux(id, p), &term);
        }
        Handle::Aux(id)
    }

    /// Bounded since; with `neg` set, the dual trigger.
    fn since(
        &mut self,
        hx: &Handle<'_>,
        hy: &Handle<'_>,
        lo: usize,
        hi: Option<usize>,
        neg: bool,
    ) -> Handle<'static> {
        let b = self.bound;
        // Unbounded prefix chain: chain_p = y_p | (x_p & chain_{p-1}).
        let chain = self.fresh();
        for p in 0..b {
            let y = self.at_signed(hy, p, neg);
            let term = if p > 0 {
                format!(
                    "(or {y} (and {} {}))",
                    self.at_signed(hx, p, neg),
                    Self::aux(chain, p - 1)
                )
            } else {
                y
            };
            self.define(&Self::aux(chain, p), &term);
        }
        let id = self.fresh();
        for p in 0..b {
            let value = match p.checked_sub(lo) {
                None => bool_lit(false),
                Some(to) => {
                    let mut parts: Vec<String> =
                        (to + 1..=p).map(|k| self.at_signed(hx, k, neg)).collect();
                    match hi.map(|h| p.saturating_sub(h)).filter(|&from| from > 0) {
                        None => parts.push(Self::aux(chain, to)),
                        Some(from) => {
                            let mut acc = self.at_signed(hy, from, neg);
                            for k in from + 1..=to {
                                acc = format!(
                                    "(or {} (and {} {acc}))",
                                    self.at_signed(hy, k, neg),
                                    self.at_signed(hx, k, neg)
                                );
                            }
                            parts.push(acc);
                        }
                    }
                    conj(parts)
                }
            };
            let term = if neg { format!("(not {value})") } else { value };
            self.define(&Self::aux(id, p), &term);
        }
        Handle::Aux(id)
    }
}
