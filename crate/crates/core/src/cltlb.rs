//! Past/future LTL with integer counters, and the translation of
//! positive-normal-form formulas into it.
//!
//! A translation is a goal formula plus axioms. The axioms hold at position 0
//! and pin the counter valuation; the goal is then evaluated at the instant
//! of interest. Counter reads before position 0 are 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{Aggregate, CmpOp, Interval, Pnf};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("distance modality needs two different atoms, got `{0}` twice")]
    SameDistAtoms(String),
    #[error("window {window} exceeds the modulo bound {kmax}")]
    WindowExceedsModulo { window: u64, kmax: u64 },
}

/// Propositional letter: the validity marker `e` or a trace atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Valid,
    Atom(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Valid => f.write_str("e"),
            Symbol::Atom(a) => f.write_str(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArithTerm {
    Const(i64),
    /// Value at the current position.
    Counter(String),
    /// Value at the next position.
    Next(String),
    /// Value `depth >= 1` positions back; 0 before the origin.
    Prev(u64, String),
}

impl ArithTerm {
    /// `Y^depth(x)`, collapsing depth 0 to the current value.
    pub fn back(depth: u64, name: &str) -> ArithTerm {
        if depth == 0 {
            ArithTerm::Counter(name.to_owned())
        } else {
            ArithTerm::Prev(depth, name.to_owned())
        }
    }

    pub fn counter(&self) -> Option<&str> {
        match self {
            ArithTerm::Const(_) => None,
            ArithTerm::Counter(x) | ArithTerm::Next(x) | ArithTerm::Prev(_, x) => Some(x),
        }
    }
}

impl fmt::Display for ArithTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithTerm::Const(c) => write!(f, "{c}"),
            ArithTerm::Counter(x) => f.write_str(x),
            ArithTerm::Next(x) => write!(f, "X({x})"),
            ArithTerm::Prev(d, x) => write!(f, "Y^{d}({x})"),
        }
    }
}

/// Integer linear combination of arithmetic terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LinExpr(pub Vec<(i64, ArithTerm)>);

impl LinExpr {
    pub fn term(t: ArithTerm) -> LinExpr {
        LinExpr(vec![(1, t)])
    }

    pub fn constant(c: i64) -> LinExpr {
        LinExpr(vec![(1, ArithTerm::Const(c))])
    }

    /// `a - b`.
    pub fn diff(a: ArithTerm, b: ArithTerm) -> LinExpr {
        LinExpr(vec![(1, a), (-1, b)])
    }

    pub fn plus(mut self, coeff: i64, t: ArithTerm) -> LinExpr {
        self.0.push((coeff, t));
        self
    }

    pub fn scaled(&self, k: i64) -> LinExpr {
        LinExpr(self.0.iter().map(|(c, t)| (c * k, t.clone())).collect())
    }

    pub fn terms(&self) -> impl Iterator<Item = &ArithTerm> {
        self.0.iter().map(|(_, t)| t)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        for (k, (c, t)) in self.0.iter().enumerate() {
            let (c, constant) = match t {
                ArithTerm::Const(v) => (c * v, true),
                _ => (*c, false),
            };
            let (sign, mag) = if c < 0 { ("-", -c) } else { ("+", c) };
            match (k, sign) {
                (0, "-") => f.write_str("-")?,
                (0, _) => {}
                _ => write!(f, " {sign} ")?,
            }
            if constant {
                write!(f, "{mag}")?;
            } else {
                if mag != 1 {
                    write!(f, "{mag}*")?;
                }
                write!(f, "{t}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
    Ne,
}

impl Rel {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Ge => a >= b,
            Rel::Gt => a > b,
            Rel::Eq => a == b,
            Rel::Ne => a != b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
            Rel::Ne => "!=",
        }
    }
}

impl From<CmpOp> for Rel {
    fn from(op: CmpOp) -> Rel {
        match op {
            CmpOp::Lt => Rel::Lt,
            CmpOp::Le => Rel::Le,
            CmpOp::Ge => Rel::Ge,
            CmpOp::Gt => Rel::Gt,
            CmpOp::Eq => Rel::Eq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Join {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CltlbFormula {
    Prop(Symbol),
    NegProp(Symbol),
    Compare {
        lhs: LinExpr,
        rel: Rel,
        rhs: LinExpr,
    },
    And(Box<CltlbFormula>, Box<CltlbFormula>),
    Or(Box<CltlbFormula>, Box<CltlbFormula>),
    Not(Box<CltlbFormula>),
    Until(Interval, Box<CltlbFormula>, Box<CltlbFormula>),
    Since(Interval, Box<CltlbFormula>, Box<CltlbFormula>),
    Release(Interval, Box<CltlbFormula>, Box<CltlbFormula>),
    Trigger(Interval, Box<CltlbFormula>, Box<CltlbFormula>),
    /// Strong next: false at the last position.
    Next(Box<CltlbFormula>),
    /// `inner` evaluated `depth` positions back; before the origin the value
    /// is `weak`.
    Yesterday {
        depth: u64,
        weak: bool,
        inner: Box<CltlbFormula>,
    },
    /// Conjunction or disjunction over `m` in `0..count` of
    /// `Yesterday { depth: m * step, weak, inner }`.
    Stride {
        join: Join,
        count: u64,
        step: u64,
        weak: bool,
        inner: Box<CltlbFormula>,
    },
    /// `inner` holds at every position that has a successor.
    Globally(Box<CltlbFormula>),
    WeakUntil(Box<CltlbFormula>, Box<CltlbFormula>),
    IfThenElse(Box<CltlbFormula>, Box<CltlbFormula>, Box<CltlbFormula>),
}

impl CltlbFormula {
    pub fn prop(s: Symbol) -> Self {
        CltlbFormula::Prop(s)
    }

    pub fn atom(a: &str) -> Self {
        CltlbFormula::Prop(Symbol::Atom(a.to_owned()))
    }

    pub fn not_atom(a: &str) -> Self {
        CltlbFormula::NegProp(Symbol::Atom(a.to_owned()))
    }

    pub fn valid() -> Self {
        CltlbFormula::Prop(Symbol::Valid)
    }

    pub fn invalid() -> Self {
        CltlbFormula::NegProp(Symbol::Valid)
    }

    pub fn cmp(lhs: LinExpr, rel: Rel, rhs: LinExpr) -> Self {
        CltlbFormula::Compare { lhs, rel, rhs }
    }

    pub fn and(a: Self, b: Self) -> Self {
        CltlbFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        CltlbFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn ite(c: Self, a: Self, b: Self) -> Self {
        CltlbFormula::IfThenElse(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn globally(f: Self) -> Self {
        CltlbFormula::Globally(Box::new(f))
    }

    pub fn next(f: Self) -> Self {
        CltlbFormula::Next(Box::new(f))
    }

    pub fn weak_until(a: Self, b: Self) -> Self {
        CltlbFormula::WeakUntil(Box::new(a), Box::new(b))
    }

    /// Left-nested conjunction; panics on an empty list.
    pub fn all(parts: impl IntoIterator<Item = Self>) -> Self {
        parts
            .into_iter()
            .reduce(CltlbFormula::and)
            .expect("conjunction of nothing")
    }

    /// Left-nested disjunction; panics on an empty list.
    pub fn any(parts: impl IntoIterator<Item = Self>) -> Self {
        parts
            .into_iter()
            .reduce(CltlbFormula::or)
            .expect("disjunction of nothing")
    }

    /// `Y^depth(inner)` with depth 0 collapsing to `inner`.
    pub fn back(depth: u64, weak: bool, inner: Self) -> Self {
        if depth == 0 {
            inner
        } else {
            CltlbFormula::Yesterday {
                depth,
                weak,
                inner: Box::new(inner),
            }
        }
    }

    /// Negation pushed through propositional structure.
    pub fn negate(&self) -> Self {
        match self {
            CltlbFormula::Prop(s) => CltlbFormula::NegProp(s.clone()),
            CltlbFormula::NegProp(s) => CltlbFormula::Prop(s.clone()),
            CltlbFormula::And(a, b) => CltlbFormula::or(a.negate(), b.negate()),
            CltlbFormula::Or(a, b) => CltlbFormula::and(a.negate(), b.negate()),
            CltlbFormula::Not(a) => (**a).clone(),
            other => CltlbFormula::Not(Box::new(other.clone())),
        }
    }

    /// `antecedent -> consequent` as a disjunction.
    pub fn implies(antecedent: Self, consequent: Self) -> Self {
        CltlbFormula::or(antecedent.negate(), consequent)
    }

    /// Node count; comparisons and exponents count as one node.
    pub fn size(&self) -> usize {
        match self {
            CltlbFormula::Prop(_) | CltlbFormula::NegProp(_) | CltlbFormula::Compare { .. } => 1,
            CltlbFormula::Not(a)
            | CltlbFormula::Next(a)
            | CltlbFormula::Globally(a)
            | CltlbFormula::Yesterday { inner: a, .. }
            | CltlbFormula::Stride { inner: a, .. } => 1 + a.size(),
            CltlbFormula::And(a, b)
            | CltlbFormula::Or(a, b)
            | CltlbFormula::Until(_, a, b)
            | CltlbFormula::Since(_, a, b)
            | CltlbFormula::Release(_, a, b)
            | CltlbFormula::Trigger(_, a, b)
            | CltlbFormula::WeakUntil(a, b) => 1 + a.size() + b.size(),
            CltlbFormula::IfThenElse(c, a, b) => 1 + c.size() + a.size() + b.size(),
        }
    }

    /// Replaces every `Stride` by its explicit conjunction or disjunction.
    pub fn unfold_strides(&self) -> Self {
        let b = |f: &CltlbFormula| Box::new(f.unfold_strides());
        match self {
            CltlbFormula::Prop(_) | CltlbFormula::NegProp(_) | CltlbFormula::Compare { .. } => {
                self.clone()
            }
            CltlbFormula::Stride {
                join,
                count,
                step,
                weak,
                inner,
            } => {
                let inner = inner.unfold_strides();
                let terms = (0..*count).map(|m| CltlbFormula::back(m * step, *weak, inner.clone()));
                match join {
                    Join::And => CltlbFormula::all(terms),
                    Join::Or => CltlbFormula::any(terms),
                }
            }
            CltlbFormula::Not(a) => CltlbFormula::Not(b(a)),
            CltlbFormula::Next(a) => CltlbFormula::Next(b(a)),
            CltlbFormula::Globally(a) => CltlbFormula::Globally(b(a)),
            CltlbFormula::Yesterday { depth, weak, inner } => CltlbFormula::Yesterday {
                depth: *depth,
                weak: *weak,
                inner: b(inner),
            },
            CltlbFormula::And(x, y) => CltlbFormula::And(b(x), b(y)),
            CltlbFormula::Or(x, y) => CltlbFormula::Or(b(x), b(y)),
            CltlbFormula::Until(i, x, y) => CltlbFormula::Until(*i, b(x), b(y)),
            CltlbFormula::Since(i, x, y) => CltlbFormula::Since(*i, b(x), b(y)),
            CltlbFormula::Release(i, x, y) => CltlbFormula::Release(*i, b(x), b(y)),
            CltlbFormula::Trigger(i, x, y) => CltlbFormula::Trigger(*i, b(x), b(y)),
            CltlbFormula::WeakUntil(x, y) => CltlbFormula::WeakUntil(b(x), b(y)),
            CltlbFormula::IfThenElse(c, x, y) => CltlbFormula::IfThenElse(b(c), b(x), b(y)),
        }
    }

    /// Trace atoms referenced by the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let CltlbFormula::Prop(Symbol::Atom(a)) | CltlbFormula::NegProp(Symbol::Atom(a)) = f
            {
                out.insert(a.clone());
            }
        });
        out
    }

    /// Counter names referenced by the formula.
    pub fn counters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let CltlbFormula::Compare { lhs, rhs, .. } = f {
                for t in lhs.terms().chain(rhs.terms()) {
                    if let Some(x) = t.counter() {
                        out.insert(x.to_owned());
                    }
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&CltlbFormula)) {
        f(self);
        match self {
            CltlbFormula::Prop(_) | CltlbFormula::NegProp(_) | CltlbFormula::Compare { .. } => {}
            CltlbFormula::Not(a)
            | CltlbFormula::Next(a)
            | CltlbFormula::Globally(a)
            | CltlbFormula::Yesterday { inner: a, .. }
            | CltlbFormula::Stride { inner: a, .. } => a.visit(f),
            CltlbFormula::And(a, b)
            | CltlbFormula::Or(a, b)
            | CltlbFormula::Until(_, a, b)
            | CltlbFormula::Since(_, a, b)
            | CltlbFormula::Release(_, a, b)
            | CltlbFormula::Trigger(_, a, b)
            | CltlbFormula::WeakUntil(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            CltlbFormula::IfThenElse(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

impl fmt::Display for CltlbFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let interval = |i: &Interval| {
            if i.is_unbounded() {
                String::new()
            } else {
                i.to_string()
            }
        };
        match self {
            CltlbFormula::Prop(s) => write!(f, "{s}"),
            CltlbFormula::NegProp(s) => write!(f, "!{s}"),
            CltlbFormula::Compare { lhs, rel, rhs } => write!(f, "{lhs} {} {rhs}", rel.symbol()),
            CltlbFormula::And(a, b) => write!(f, "({a} & {b})"),
            CltlbFormula::Or(a, b) => write!(f, "({a} | {b})"),
            CltlbFormula::Not(a) => write!(f, "!({a})"),
            CltlbFormula::Until(i, a, b) => write!(f, "(({a}) U{} ({b}))", interval(i)),
            CltlbFormula::Since(i, a, b) => write!(f, "(({a}) S{} ({b}))", interval(i)),
            CltlbFormula::Release(i, a, b) => write!(f, "(({a}) R{} ({b}))", interval(i)),
            CltlbFormula::Trigger(i, a, b) => write!(f, "(({a}) T{} ({b}))", interval(i)),
            CltlbFormula::Next(a) => write!(f, "X({a})"),
            CltlbFormula::Yesterday { depth, weak, inner } => {
                write!(f, "{}^{depth}({inner})", if *weak { "Z" } else { "Y" })
            }
            CltlbFormula::Stride {
                join,
                count,
                step,
                weak,
                inner,
            } => {
                let j = if *join == Join::And { "AND" } else { "OR" };
                let y = if *weak { "Z" } else { "Y" };
                write!(f, "{j}[m<{count}] {y}^(m*{step})({inner})")
            }
            CltlbFormula::Globally(a) => write!(f, "G({a})"),
            CltlbFormula::WeakUntil(a, b) => write!(f, "(({a}) W ({b}))"),
            CltlbFormula::IfThenElse(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Counters and axioms

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairCounter {
    /// 1 while a pair is open.
    Flag,
    /// Number of closed pairs.
    Closed,
    /// Total distance of closed pairs plus the elapsed part of the open one.
    Running,
    /// Total distance of closed pairs.
    ClosedSum,
    /// Running total at the next closing position.
    Lookahead,
}

impl PairCounter {
    pub const ALL: [PairCounter; 5] = [
        PairCounter::Flag,
        PairCounter::Closed,
        PairCounter::Running,
        PairCounter::ClosedSum,
        PairCounter::Lookahead,
    ];

    fn prefix(self) -> &'static str {
        match self {
            PairCounter::Flag => "g",
            PairCounter::Closed => "h",
            PairCounter::Running => "s",
            PairCounter::ClosedSum => "a",
            PairCounter::Lookahead => "b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CounterRole {
    /// Occurrences of `atom` strictly before the current position.
    Count { atom: String },
    Pair {
        kind: PairCounter,
        start: String,
        end: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CounterDecl {
    pub name: String,
    pub role: CounterRole,
    /// Values are kept modulo `modulo` when set.
    pub modulo: Option<u64>,
}

pub fn count_counter(atom: &str) -> String {
    format!("c_{atom}")
}

pub fn pair_counter(kind: PairCounter, start: &str, end: &str) -> String {
    format!("{}_{start}.{end}", kind.prefix())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    /// Counter group key: the counted atom or `start.end`.
    pub group: String,
    pub label: String,
    pub formula: CltlbFormula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub goal: CltlbFormula,
    pub axioms: Vec<Axiom>,
    pub counters: Vec<CounterDecl>,
}

impl Translation {
    pub fn counter(&self, name: &str) -> Option<&CounterDecl> {
        self.counters.iter().find(|c| c.name == name)
    }

    /// Trace atoms referenced by the goal or the axioms.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = self.goal.atoms();
        for ax in &self.axioms {
            out.extend(ax.formula.atoms());
        }
        out
    }
}

impl fmt::Display for Translation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "goal:")?;
        writeln!(f, "  {}", self.goal)?;
        if !self.counters.is_empty() {
            writeln!(f, "counters:")?;
            for c in &self.counters {
                match c.modulo {
                    Some(m) => writeln!(f, "  {} (mod {m})", c.name)?,
                    None => writeln!(f, "  {}", c.name)?,
                }
            }
        }
        if !self.axioms.is_empty() {
            writeln!(f, "axioms:")?;
            for ax in &self.axioms {
                writeln!(f, "  [{} {}] {}", ax.group, ax.label, ax.formula)?;
            }
        }
        Ok(())
    }
}

fn eq(lhs: LinExpr, rhs: LinExpr) -> CltlbFormula {
    CltlbFormula::cmp(lhs, Rel::Eq, rhs)
}

fn next(x: &str) -> ArithTerm {
    ArithTerm::Next(x.to_owned())
}

fn cur(x: &str) -> ArithTerm {
    ArithTerm::Counter(x.to_owned())
}

/// `X(x) = x + delta`.
fn step(x: &str, delta: i64) -> CltlbFormula {
    let rhs = LinExpr::term(cur(x));
    eq(
        LinExpr::term(next(x)),
        if delta == 0 {
            rhs
        } else {
            rhs.plus(delta, ArithTerm::Const(1))
        },
    )
}

/// `X(x) = y`.
fn next_is(x: &str, y: &str) -> CltlbFormula {
    eq(LinExpr::term(next(x)), LinExpr::term(cur(y)))
}

fn is_const(x: &str, c: i64) -> CltlbFormula {
    eq(LinExpr::term(cur(x)), LinExpr::constant(c))
}

/// Axioms fixing the occurrence counter of `atom`.
pub fn count_axioms(atom: &str) -> Vec<CltlbFormula> {
    let c = count_counter(atom);
    let occurs = CltlbFormula::and(CltlbFormula::valid(), CltlbFormula::atom(atom));
    vec![
        is_const(&c, 0),
        CltlbFormula::globally(CltlbFormula::implies(occurs.clone(), step(&c, 1))),
        CltlbFormula::globally(CltlbFormula::or(occurs, step(&c, 0))),
    ]
}

/// Counter axioms for the modulo encoding: the increment wraps to 0 after
/// `kmax`.
pub fn count_axioms_modulo(atom: &str, kmax: u64) -> Vec<CltlbFormula> {
    let c = count_counter(atom);
    let occurs = CltlbFormula::and(CltlbFormula::valid(), CltlbFormula::atom(atom));
    let wrap = CltlbFormula::ite(
        is_const(&c, kmax as i64),
        eq(LinExpr::term(next(&c)), LinExpr::constant(0)),
        step(&c, 1),
    );
    vec![
        is_const(&c, 0),
        CltlbFormula::globally(CltlbFormula::implies(occurs.clone(), wrap)),
        CltlbFormula::globally(CltlbFormula::or(occurs, step(&c, 0))),
    ]
}

/// Count goal: occurrences in the window `[i - window + 1, i]`.
pub fn translate_count(window: u64, op: CmpOp, bound: u64, atom: &str) -> CltlbFormula {
    let c = count_counter(atom);
    CltlbFormula::cmp(
        LinExpr::diff(next(&c), ArithTerm::back(window - 1, &c)),
        op.into(),
        LinExpr::constant(bound as i64),
    )
}

/// `x - y` corrected for a single wrap of a counter kept modulo `kmax + 1`,
/// compared with `rhs`.
pub fn modulo_window_compare(
    kmax: u64,
    x: ArithTerm,
    y: ArithTerm,
    rel: Rel,
    rhs: LinExpr,
) -> CltlbFormula {
    let diff = LinExpr::diff(x, y);
    let wrapped = diff.clone().plus(kmax as i64 + 1, ArithTerm::Const(1));
    CltlbFormula::ite(
        CltlbFormula::cmp(diff.clone(), Rel::Ge, LinExpr::constant(0)),
        CltlbFormula::cmp(diff, rel, rhs.clone()),
        CltlbFormula::cmp(wrapped, rel, rhs),
    )
}

/// Count goal over a counter kept modulo `kmax + 1`.
pub fn translate_count_modulo(
    window: u64,
    op: CmpOp,
    bound: u64,
    atom: &str,
    kmax: u64,
) -> Result<CltlbFormula, TranslateError> {
    if window > kmax {
        return Err(TranslateError::WindowExceedsModulo { window, kmax });
    }
    let c = count_counter(atom);
    Ok(modulo_window_compare(
        kmax,
        next(&c),
        ArithTerm::back(window - 1, &c),
        op.into(),
        LinExpr::constant(bound as i64),
    ))
}

/// Average over `window / sub` whole subintervals, as a count.
pub fn translate_avg(window: u64, sub: u64, op: CmpOp, bound: u64, atom: &str) -> CltlbFormula {
    let blocks = window / sub;
    translate_count(blocks * sub, op, bound * blocks, atom)
}

/// Maximum over subintervals, built from window counts shifted into the
/// past. Shifts reaching before the origin read an empty window, so the
/// shifted term defaults to whatever an empty count satisfies.
pub fn translate_max(window: u64, sub: u64, op: CmpOp, bound: u64, atom: &str) -> CltlbFormula {
    max_goal(window, sub, op, bound, &|w, op| {
        translate_count(w, op, bound, atom)
    })
}

fn max_goal(
    window: u64,
    sub: u64,
    op: CmpOp,
    bound: u64,
    count: &dyn Fn(u64, CmpOp) -> CltlbFormula,
) -> CltlbFormula {
    match op {
        CmpOp::Eq => CltlbFormula::and(
            max_goal(window, sub, CmpOp::Ge, bound, count),
            max_goal(window, sub, CmpOp::Le, bound, count),
        ),
        _ => {
            let join = if matches!(op, CmpOp::Lt | CmpOp::Le) {
                Join::And
            } else {
                Join::Or
            };
            let weak = op.holds(0, bound as i64);
            let blocks = window / sub;
            let tail = window % sub;
            let mut parts = Vec::new();
            if blocks > 0 {
                parts.push(CltlbFormula::Stride {
                    join,
                    count: blocks,
                    step: sub,
                    weak,
                    inner: Box::new(count(sub, op)),
                });
            }
            if tail > 0 {
                parts.push(CltlbFormula::back(blocks * sub, weak, count(tail, op)));
            }
            match join {
                Join::And => CltlbFormula::all(parts),
                Join::Or => CltlbFormula::any(parts),
            }
        }
    }
}

/// Axioms fixing the five pair counters of `(start, end)`, labelled A4..A9.
pub fn dist_axioms(start: &str, end: &str) -> Result<Vec<CltlbFormula>, TranslateError> {
    if start == end {
        return Err(TranslateError::SameDistAtoms(start.to_owned()));
    }
    let [g, h, s, a, b] = PairCounter::ALL.map(|k| pair_counter(k, start, end));
    let e = CltlbFormula::valid;
    let phi = || CltlbFormula::atom(start);
    let psi = || CltlbFormula::atom(end);
    let not_phi = || CltlbFormula::not_atom(start);
    let not_psi = || CltlbFormula::not_atom(end);
    let hold_b = || CltlbFormula::weak_until(next_is(&b, &b), CltlbFormula::and(e(), psi()));
    let init = CltlbFormula::all([
        is_const(&g, 0),
        is_const(&h, 0),
        is_const(&a, 0),
        is_const(&s, 0),
    ]);
    let open = CltlbFormula::globally(CltlbFormula::implies(
        CltlbFormula::all([e(), phi(), not_psi()]),
        CltlbFormula::all([
            eq(LinExpr::term(next(&g)), LinExpr::constant(1)),
            step(&s, 1),
            step(&h, 0),
            step(&a, 0),
        ]),
    ));
    let close = CltlbFormula::globally(CltlbFormula::implies(
        CltlbFormula::all([e(), psi(), not_phi()]),
        CltlbFormula::all([
            eq(LinExpr::term(next(&g)), LinExpr::constant(0)),
            step(&h, 1),
            next_is(&a, &s),
            step(&s, 0),
            eq(LinExpr::term(cur(&b)), LinExpr::term(cur(&s))),
            CltlbFormula::next(hold_b()),
        ]),
    ));
    let idle = CltlbFormula::globally(CltlbFormula::implies(
        CltlbFormula::or(
            CltlbFormula::invalid(),
            CltlbFormula::and(not_phi(), not_psi()),
        ),
        CltlbFormula::all([
            step(&g, 0),
            step(&h, 0),
            step(&a, 0),
            CltlbFormula::implies(is_const(&g, 1), step(&s, 1)),
            CltlbFormula::implies(is_const(&g, 0), step(&s, 0)),
        ]),
    ));
    let instant = CltlbFormula::globally(CltlbFormula::implies(
        CltlbFormula::all([e(), phi(), psi()]),
        CltlbFormula::all([
            step(&g, 0),
            step(&h, 1),
            step(&a, 0),
            step(&s, 0),
            CltlbFormula::next(hold_b()),
        ]),
    ));
    Ok(vec![init, hold_b(), open, close, idle, instant])
}

/// Distance goal. When a pair was open at the window's left edge, that pair
/// is excluded by measuring from its lookahead total; otherwise from the
/// closed total. A window with no closed pair is vacuously true; a
/// nonpositive denominator signals exactly that case.
pub fn translate_dist(window: u64, op: CmpOp, bound: u64, start: &str, end: &str) -> CltlbFormula {
    let [g, h, _, a, b] = PairCounter::ALL.map(|k| pair_counter(k, start, end));
    let left = window - 1;
    let rel: Rel = op.into();
    let n = bound as i64;
    let closed = LinExpr::diff(next(&h), ArithTerm::back(left, &h));
    let then_den = closed.clone().plus(-1, ArithTerm::Const(1));
    let nonpositive = |d: &LinExpr| CltlbFormula::cmp(d.clone(), Rel::Le, LinExpr::constant(0));
    let then_branch = CltlbFormula::or(
        nonpositive(&then_den),
        CltlbFormula::cmp(
            LinExpr::diff(next(&a), ArithTerm::back(left, &b)),
            rel,
            then_den.scaled(n),
        ),
    );
    let else_branch = CltlbFormula::or(
        nonpositive(&closed),
        CltlbFormula::cmp(
            LinExpr::diff(next(&a), ArithTerm::back(left, &a)),
            rel,
            closed.scaled(n),
        ),
    );
    CltlbFormula::ite(
        eq(
            LinExpr::term(ArithTerm::back(left, &g)),
            LinExpr::constant(1),
        ),
        then_branch,
        else_branch,
    )
}

// ---------------------------------------------------------------------------
// Whole-formula translation

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Keep count counters modulo `kmax + 1`; every window must be at most
    /// `kmax`.
    pub modulo: Option<u64>,
}

/// Translation with unbounded counters.
pub fn translate(f: &Pnf) -> Result<Translation, TranslateError> {
    translate_with(f, TranslateOptions::default())
}

pub fn translate_with(f: &Pnf, opts: TranslateOptions) -> Result<Translation, TranslateError> {
    let mut tr = Translator {
        opts,
        counters: BTreeMap::new(),
        axioms: BTreeMap::new(),
    };
    let goal = tr.formula(f)?;
    Ok(Translation {
        goal,
        axioms: tr.axioms.into_values().flatten().collect(),
        counters: tr.counters.into_values().collect(),
    })
}

struct Translator {
    opts: TranslateOptions,
    counters: BTreeMap<String, CounterDecl>,
    axioms: BTreeMap<String, Vec<Axiom>>,
}

impl Translator {
    fn formula(&mut self, f: &Pnf) -> Result<CltlbFormula, TranslateError> {
        let e = CltlbFormula::valid;
        let ne = CltlbFormula::invalid;
        Ok(match f {
            Pnf::Atom(p) => CltlbFormula::atom(p),
            Pnf::NegAtom(p) => CltlbFormula::not_atom(p),
            Pnf::And(a, b) => CltlbFormula::and(self.formula(a)?, self.formula(b)?),
            Pnf::Or(a, b) => CltlbFormula::or(self.formula(a)?, self.formula(b)?),
            Pnf::Until(i, a, b) => CltlbFormula::Until(
                *i,
                Box::new(CltlbFormula::or(ne(), self.formula(a)?)),
                Box::new(CltlbFormula::and(e(), self.formula(b)?)),
            ),
            Pnf::Since(i, a, b) => CltlbFormula::Since(
                *i,
                Box::new(CltlbFormula::or(ne(), self.formula(a)?)),
                Box::new(CltlbFormula::and(e(), self.formula(b)?)),
            ),
            Pnf::Release(i, a, b) => CltlbFormula::Release(
                *i,
                Box::new(CltlbFormula::and(e(), self.formula(a)?)),
                Box::new(CltlbFormula::or(ne(), self.formula(b)?)),
            ),
            Pnf::Trigger(i, a, b) => CltlbFormula::Trigger(
                *i,
                Box::new(CltlbFormula::and(e(), self.formula(a)?)),
                Box::new(CltlbFormula::or(ne(), self.formula(b)?)),
            ),
            Pnf::Agg(agg) => self.aggregate(agg)?,
            Pnf::NegAgg(agg) => CltlbFormula::Not(Box::new(self.aggregate(agg)?)),
        })
    }

    fn count_goal(
        &self,
        window: u64,
        op: CmpOp,
        bound: u64,
        atom: &str,
    ) -> Result<CltlbFormula, TranslateError> {
        match self.opts.modulo {
            Some(kmax) => translate_count_modulo(window, op, bound, atom, kmax),
            None => Ok(translate_count(window, op, bound, atom)),
        }
    }

    fn aggregate(&mut self, agg: &Aggregate) -> Result<CltlbFormula, TranslateError> {
        if let Some(kmax) = self.opts.modulo {
            if !matches!(agg, Aggregate::Dist { .. }) && agg.window() > kmax {
                return Err(TranslateError::WindowExceedsModulo {
                    window: agg.window(),
                    kmax,
                });
            }
        }
        match agg {
            Aggregate::Count {
                window,
                op,
                bound,
                atom,
            } => {
                self.require_count(atom);
                self.count_goal(*window, *op, *bound, atom)
            }
            Aggregate::Avg {
                window,
                sub,
                op,
                bound,
                atom,
            } => {
                self.require_count(atom);
                let blocks = window / sub;
                self.count_goal(blocks * sub, *op, bound * blocks, atom)
            }
            Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom,
            } => {
                self.require_count(atom);
                // Every window passed to the count is at most `window`, which
                // was checked against the modulo bound above.
                let count = |w: u64, op: CmpOp| {
                    self.count_goal(w, op, *bound, atom)
                        .expect("subwindow within the modulo bound")
                };
                Ok(max_goal(*window, *sub, *op, *bound, &count))
            }
            Aggregate::Dist {
                window,
                op,
                bound,
                start,
                end,
            } => {
                self.require_pair(start, end)?;
                Ok(translate_dist(*window, *op, *bound, start, end))
            }
        }
    }

    fn require_count(&mut self, atom: &str) {
        let name = count_counter(atom);
        if self.counters.contains_key(&name) {
            return;
        }
        let modulo = self.opts.modulo.map(|k| k + 1);
        self.counters.insert(
            name.clone(),
            CounterDecl {
                name,
                role: CounterRole::Count {
                    atom: atom.to_owned(),
                },
                modulo,
            },
        );
        let axioms = match self.opts.modulo {
            Some(kmax) => count_axioms_modulo(atom, kmax),
            None => count_axioms(atom),
        };
        self.add_axioms(atom.to_owned(), 1, axioms);
    }

    fn require_pair(&mut self, start: &str, end: &str) -> Result<(), TranslateError> {
        let group = format!("{start}.{end}");
        if self.axioms.contains_key(&group) {
            return Ok(());
        }
        let axioms = dist_axioms(start, end)?;
        for kind in PairCounter::ALL {
            let name = pair_counter(kind, start, end);
            self.counters.insert(
                name.clone(),
                CounterDecl {
                    name,
                    role: CounterRole::Pair {
                        kind,
                        start: start.to_owned(),
                        end: end.to_owned(),
                    },
                    modulo: None,
                },
            );
        }
        self.add_axioms(group, 4, axioms);
        Ok(())
    }

    fn add_axioms(&mut self, group: String, first_label: usize, axioms: Vec<CltlbFormula>) {
        let list = axioms
            .into_iter()
            .enumerate()
            .map(|(k, formula)| Axiom {
                group: group.clone(),
                label: format!("A{}", first_label + k),
                formula,
            })
            .collect();
        self.axioms.insert(group, list);
    }
}

/// Node count of the goal plus every axiom.
pub fn translation_size(t: &Translation) -> usize {
    t.goal.size() + t.axioms.iter().map(|a| a.formula.size()).sum::<usize>()
}
