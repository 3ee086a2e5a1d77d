//! Formula AST for the aggregate temporal logic, its concrete syntax,
//! desugaring of derived operators and the positive normal form.
//!
//! Grammar (whitespace-insensitive, `#` starts a comment):
//!
//! ```text
//! formula  := disj ('->' formula)?
//! disj     := conj ('||' conj)*
//! conj     := unary ('&&' unary)*
//! unary    := '!' unary | '(' formula ')' (('U'|'S'|'R'|'T') interval? '(' formula ')')?
//!           | ('G'|'F'|'P'|'H') interval? '(' formula ')'
//!           | 'C[' K ']' cmp n '(' atom ')'
//!           | 'V[' K ',' h ']' cmp n '(' atom ')'
//!           | 'M[' K ',' h ']' cmp n '(' atom ')'
//!           | 'D[' K ']' cmp n '(' atom ',' atom ')'
//!           | 'true' | 'false' | atom
//! interval := '[' nat ',' (nat | 'inf') ']'
//! cmp      := '<' | '<=' | '>=' | '>' | '=='
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Atom used to encode the boolean constants after desugaring. Rejected in
/// user input.
pub const TRUE_ATOM: &str = "__true";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("aggregate argument at {line}:{column} must be an atom")]
    AggregateArgument { line: usize, column: usize },
    #[error("distance modality needs two different atoms, got `{0}` twice")]
    SameDistAtoms(String),
    #[error("empty interval [{lo},{hi}]")]
    EmptyInterval { lo: u64, hi: u64 },
    #[error("window and subinterval lengths must be at least 1")]
    ZeroWindow,
    #[error("average subinterval {sub} exceeds window {window}")]
    SubintervalExceedsWindow { window: u64, sub: u64 },
    #[error("atom name `{0}` is reserved")]
    ReservedAtom(String),
}

/// Comparison relation of an aggregate bound. There is deliberately no `!=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    pub const ALL: [CmpOp; 5] = [CmpOp::Lt, CmpOp::Le, CmpOp::Ge, CmpOp::Gt, CmpOp::Eq];

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    /// The relation denoting the boolean complement, when it exists in the
    /// operator set (`<` and `>=`, `<=` and `>`). Equality has none.
    pub fn complement(self) -> Option<CmpOp> {
        match self {
            CmpOp::Lt => Some(CmpOp::Ge),
            CmpOp::Ge => Some(CmpOp::Lt),
            CmpOp::Le => Some(CmpOp::Gt),
            CmpOp::Gt => Some(CmpOp::Le),
            CmpOp::Eq => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Eq => "==",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Nonempty interval of time distances; `hi == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: u64,
    hi: Option<u64>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0, hi: None };

    pub fn new(lo: u64, hi: Option<u64>) -> Result<Self, FormulaError> {
        match hi {
            Some(hi) if hi < lo => Err(FormulaError::EmptyInterval { lo, hi }),
            _ => Ok(Interval { lo, hi }),
        }
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> Option<u64> {
        self.hi
    }

    pub fn contains(&self, distance: u64) -> bool {
        distance >= self.lo && self.hi.is_none_or(|hi| distance <= hi)
    }

    pub fn is_unbounded(&self) -> bool {
        *self == Interval::UNBOUNDED
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::UNBOUNDED
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

/// The four aggregate modalities. Arguments are always atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Aggregate {
    /// Number of occurrences of `atom` in the last `window` instants.
    Count {
        window: u64,
        op: CmpOp,
        bound: u64,
        atom: String,
    },
    /// Average number of occurrences per subinterval of length `sub`; the
    /// leftmost partial subinterval is ignored.
    Avg {
        window: u64,
        sub: u64,
        op: CmpOp,
        bound: u64,
        atom: String,
    },
    /// Maximum number of occurrences over the subintervals, including the
    /// leftmost partial one.
    Max {
        window: u64,
        sub: u64,
        op: CmpOp,
        bound: u64,
        atom: String,
    },
    /// Average distance between `start`/`end` pairs closed inside the window.
    Dist {
        window: u64,
        op: CmpOp,
        bound: u64,
        start: String,
        end: String,
    },
}

impl Aggregate {
    pub fn window(&self) -> u64 {
        match self {
            Aggregate::Count { window, .. }
            | Aggregate::Avg { window, .. }
            | Aggregate::Max { window, .. }
            | Aggregate::Dist { window, .. } => *window,
        }
    }

    pub fn op(&self) -> CmpOp {
        match self {
            Aggregate::Count { op, .. }
            | Aggregate::Avg { op, .. }
            | Aggregate::Max { op, .. }
            | Aggregate::Dist { op, .. } => *op,
        }
    }

    pub fn atoms(&self) -> Vec<&str> {
        match self {
            Aggregate::Count { atom, .. }
            | Aggregate::Avg { atom, .. }
            | Aggregate::Max { atom, .. } => vec![atom.as_str()],
            Aggregate::Dist { start, end, .. } => vec![start.as_str(), end.as_str()],
        }
    }

    pub fn validate(&self) -> Result<(), FormulaError> {
        match self {
            Aggregate::Count { window, .. } if *window == 0 => Err(FormulaError::ZeroWindow),
            Aggregate::Avg { window, sub, .. } => {
                if *window == 0 || *sub == 0 {
                    Err(FormulaError::ZeroWindow)
                } else if sub > window {
                    Err(FormulaError::SubintervalExceedsWindow {
                        window: *window,
                        sub: *sub,
                    })
                } else {
                    Ok(())
                }
            }
            Aggregate::Max { window, sub, .. } if *window == 0 || *sub == 0 => {
                Err(FormulaError::ZeroWindow)
            }
            Aggregate::Dist { window, .. } if *window == 0 => Err(FormulaError::ZeroWindow),
            Aggregate::Dist { start, end, .. } if start == end => {
                Err(FormulaError::SameDistAtoms(start.clone()))
            }
            _ => Ok(()),
        }
    }

    /// Node count: the modality plus its atom arguments.
    pub fn size(&self) -> usize {
        1 + self.atoms().len()
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregate::Count {
                window,
                op,
                bound,
                atom,
            } => write!(f, "C[{window}]{op}{bound}({atom})"),
            Aggregate::Avg {
                window,
                sub,
                op,
                bound,
                atom,
            } => write!(f, "V[{window},{sub}]{op}{bound}({atom})"),
            Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom,
            } => write!(f, "M[{window},{sub}]{op}{bound}({atom})"),
            Aggregate::Dist {
                window,
                op,
                bound,
                start,
                end,
            } => write!(f, "D[{window}]{op}{bound}({start}, {end})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(String),
    True,
    False,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Since(Interval, Box<Formula>, Box<Formula>),
    Release(Interval, Box<Formula>, Box<Formula>),
    Trigger(Interval, Box<Formula>, Box<Formula>),
    Globally(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    PastEventually(Interval, Box<Formula>),
    Historically(Interval, Box<Formula>),
    Agg(Aggregate),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn since(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Since(i, Box::new(a), Box::new(b))
    }

    pub fn release(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Release(i, Box::new(a), Box::new(b))
    }

    pub fn trigger(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Trigger(i, Box::new(a), Box::new(b))
    }

    pub fn globally(i: Interval, f: Formula) -> Formula {
        Formula::Globally(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: Formula) -> Formula {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn count(window: u64, op: CmpOp, bound: u64, atom: impl Into<String>) -> Formula {
        Formula::Agg(Aggregate::Count {
            window,
            op,
            bound,
            atom: atom.into(),
        })
    }

    pub fn avg(window: u64, sub: u64, op: CmpOp, bound: u64, atom: impl Into<String>) -> Formula {
        Formula::Agg(Aggregate::Avg {
            window,
            sub,
            op,
            bound,
            atom: atom.into(),
        })
    }

    pub fn max(window: u64, sub: u64, op: CmpOp, bound: u64, atom: impl Into<String>) -> Formula {
        Formula::Agg(Aggregate::Max {
            window,
            sub,
            op,
            bound,
            atom: atom.into(),
        })
    }

    pub fn dist(
        window: u64,
        op: CmpOp,
        bound: u64,
        start: impl Into<String>,
        end: impl Into<String>,
    ) -> Formula {
        Formula::Agg(Aggregate::Dist {
            window,
            op,
            bound,
            start: start.into(),
            end: end.into(),
        })
    }

    /// `p0 || !p0` over the reserved atom.
    pub fn top() -> Formula {
        Formula::or(
            Formula::atom(TRUE_ATOM),
            Formula::not(Formula::atom(TRUE_ATOM)),
        )
    }

    /// `p0 && !p0` over the reserved atom.
    pub fn bottom() -> Formula {
        Formula::and(
            Formula::atom(TRUE_ATOM),
            Formula::not(Formula::atom(TRUE_ATOM)),
        )
    }

    /// AST node count; aggregate parameters count as part of their node.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False => 1,
            Formula::Not(f)
            | Formula::Globally(_, f)
            | Formula::Eventually(_, f)
            | Formula::PastEventually(_, f)
            | Formula::Historically(_, f) => 1 + f.size(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(_, a, b)
            | Formula::Since(_, a, b)
            | Formula::Release(_, a, b)
            | Formula::Trigger(_, a, b) => 1 + a.size() + b.size(),
            Formula::Agg(agg) => agg.size(),
        }
    }

    /// Largest aggregate window in the formula, 0 when there is none.
    pub fn max_window(&self) -> u64 {
        let mut best = 0;
        self.visit_aggregates(&mut |a| best = best.max(a.window()));
        best
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(p) => {
                out.insert(p.clone());
            }
            Formula::True | Formula::False => {}
            Formula::Not(f)
            | Formula::Globally(_, f)
            | Formula::Eventually(_, f)
            | Formula::PastEventually(_, f)
            | Formula::Historically(_, f) => f.collect_atoms(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(_, a, b)
            | Formula::Since(_, a, b)
            | Formula::Release(_, a, b)
            | Formula::Trigger(_, a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::Agg(agg) => out.extend(agg.atoms().into_iter().map(str::to_owned)),
        }
    }

    pub fn visit_aggregates(&self, visit: &mut impl FnMut(&Aggregate)) {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False => {}
            Formula::Not(f)
            | Formula::Globally(_, f)
            | Formula::Eventually(_, f)
            | Formula::PastEventually(_, f)
            | Formula::Historically(_, f) => f.visit_aggregates(visit),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(_, a, b)
            | Formula::Since(_, a, b)
            | Formula::Release(_, a, b)
            | Formula::Trigger(_, a, b) => {
                a.visit_aggregates(visit);
                b.visit_aggregates(visit);
            }
            Formula::Agg(agg) => visit(agg),
        }
    }

    /// Distinct `(start, end)` pairs referenced by distance modalities.
    pub fn dist_pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        self.visit_aggregates(&mut |a| {
            if let Aggregate::Dist { start, end, .. } = a {
                out.insert((start.clone(), end.clone()));
            }
        });
        out
    }
}

pub fn formula_size(f: &Formula) -> usize {
    f.size()
}

pub fn max_window(f: &Formula) -> u64 {
    f.max_window()
}

/// Rewrites derived operators into `!`, `&&`, `||`, the four binary temporal
/// operators and aggregates. Constants become formulas over [`TRUE_ATOM`].
pub fn desugar(f: &Formula) -> Formula {
    let d = |g: &Formula| Box::new(desugar(g));
    let top = || Box::new(Formula::top());
    let neg = |g: &Formula| Box::new(Formula::not(desugar(g)));
    match f {
        Formula::Atom(_) | Formula::Agg(_) => f.clone(),
        Formula::True => Formula::top(),
        Formula::False => Formula::bottom(),
        Formula::Not(g) => Formula::Not(d(g)),
        Formula::And(a, b) => Formula::And(d(a), d(b)),
        Formula::Or(a, b) => Formula::Or(d(a), d(b)),
        Formula::Implies(a, b) => Formula::Or(neg(a), d(b)),
        Formula::Until(i, a, b) => Formula::Until(*i, d(a), d(b)),
        Formula::Since(i, a, b) => Formula::Since(*i, d(a), d(b)),
        Formula::Release(i, a, b) => Formula::Release(*i, d(a), d(b)),
        Formula::Trigger(i, a, b) => Formula::Trigger(*i, d(a), d(b)),
        Formula::Globally(i, g) => Formula::not(Formula::Until(*i, top(), neg(g))),
        Formula::Eventually(i, g) => Formula::Until(*i, top(), d(g)),
        Formula::PastEventually(i, g) => Formula::Since(*i, top(), d(g)),
        Formula::Historically(i, g) => Formula::not(Formula::Since(*i, top(), neg(g))),
    }
}

/// Formula in positive normal form: negation only on atoms and, where the
/// comparison cannot be complemented, on whole aggregates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pnf {
    Atom(String),
    NegAtom(String),
    And(Box<Pnf>, Box<Pnf>),
    Or(Box<Pnf>, Box<Pnf>),
    Until(Interval, Box<Pnf>, Box<Pnf>),
    Since(Interval, Box<Pnf>, Box<Pnf>),
    Release(Interval, Box<Pnf>, Box<Pnf>),
    Trigger(Interval, Box<Pnf>, Box<Pnf>),
    Agg(Aggregate),
    /// Exact boolean negation of the aggregate.
    NegAgg(Aggregate),
}

impl Pnf {
    pub fn size(&self) -> usize {
        match self {
            Pnf::Atom(_) | Pnf::NegAtom(_) => 1,
            Pnf::And(a, b)
            | Pnf::Or(a, b)
            | Pnf::Until(_, a, b)
            | Pnf::Since(_, a, b)
            | Pnf::Release(_, a, b)
            | Pnf::Trigger(_, a, b) => 1 + a.size() + b.size(),
            Pnf::Agg(agg) => agg.size(),
            Pnf::NegAgg(agg) => 1 + agg.size(),
        }
    }

    /// Embeds back into the full AST (`NegAtom p` becomes `!p`).
    pub fn to_formula(&self) -> Formula {
        let b = |p: &Pnf| Box::new(p.to_formula());
        match self {
            Pnf::Atom(p) => Formula::Atom(p.clone()),
            Pnf::NegAtom(p) => Formula::not(Formula::Atom(p.clone())),
            Pnf::And(x, y) => Formula::And(b(x), b(y)),
            Pnf::Or(x, y) => Formula::Or(b(x), b(y)),
            Pnf::Until(i, x, y) => Formula::Until(*i, b(x), b(y)),
            Pnf::Since(i, x, y) => Formula::Since(*i, b(x), b(y)),
            Pnf::Release(i, x, y) => Formula::Release(*i, b(x), b(y)),
            Pnf::Trigger(i, x, y) => Formula::Trigger(*i, b(x), b(y)),
            Pnf::Agg(a) => Formula::Agg(a.clone()),
            Pnf::NegAgg(a) => Formula::not(Formula::Agg(a.clone())),
        }
    }
}

impl fmt::Display for Pnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_formula().fmt(f)
    }
}

/// Pushes negations to the leaves. Derived operators are desugared on the
/// way, so the input need not be desugared first.
pub fn to_pnf(f: &Formula) -> Pnf {
    pnf(f, false)
}

fn pnf(f: &Formula, negated: bool) -> Pnf {
    let b = |g: &Formula, n: bool| Box::new(pnf(g, n));
    match (f, negated) {
        (Formula::Atom(p), false) => Pnf::Atom(p.clone()),
        (Formula::Atom(p), true) => Pnf::NegAtom(p.clone()),
        (Formula::Not(g), n) => pnf(g, !n),
        (Formula::And(x, y), false) => Pnf::And(b(x, false), b(y, false)),
        (Formula::And(x, y), true) => Pnf::Or(b(x, true), b(y, true)),
        (Formula::Or(x, y), false) => Pnf::Or(b(x, false), b(y, false)),
        (Formula::Or(x, y), true) => Pnf::And(b(x, true), b(y, true)),
        (Formula::Until(i, x, y), false) => Pnf::Until(*i, b(x, false), b(y, false)),
        (Formula::Until(i, x, y), true) => Pnf::Release(*i, b(x, true), b(y, true)),
        (Formula::Release(i, x, y), false) => Pnf::Release(*i, b(x, false), b(y, false)),
        (Formula::Release(i, x, y), true) => Pnf::Until(*i, b(x, true), b(y, true)),
        (Formula::Since(i, x, y), false) => Pnf::Since(*i, b(x, false), b(y, false)),
        (Formula::Since(i, x, y), true) => Pnf::Trigger(*i, b(x, true), b(y, true)),
        (Formula::Trigger(i, x, y), false) => Pnf::Trigger(*i, b(x, false), b(y, false)),
        (Formula::Trigger(i, x, y), true) => Pnf::Since(*i, b(x, true), b(y, true)),
        (Formula::Agg(a), false) => Pnf::Agg(a.clone()),
        (Formula::Agg(a), true) => negate_aggregate(a),
        (sugar, n) => pnf(&desugar(sugar), n),
    }
}

fn negate_aggregate(a: &Aggregate) -> Pnf {
    match a {
        Aggregate::Count {
            window,
            op,
            bound,
            atom,
        } => match op.complement() {
            Some(op) => Pnf::Agg(Aggregate::Count {
                window: *window,
                op,
                bound: *bound,
                atom: atom.clone(),
            }),
            None => Pnf::NegAgg(a.clone()),
        },
        _ => Pnf::NegAgg(a.clone()),
    }
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(p) => f.write_str(p),
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Not(g) => {
                f.write_str("!")?;
                write_operand(f, g)
            }
            Formula::And(a, b) => write_infix(f, a, "&&", b),
            Formula::Or(a, b) => write_infix(f, a, "||", b),
            Formula::Implies(a, b) => write_infix(f, a, "->", b),
            Formula::Until(i, a, b) => write_binary_temporal(f, a, "U", i, b),
            Formula::Since(i, a, b) => write_binary_temporal(f, a, "S", i, b),
            Formula::Release(i, a, b) => write_binary_temporal(f, a, "R", i, b),
            Formula::Trigger(i, a, b) => write_binary_temporal(f, a, "T", i, b),
            Formula::Globally(i, g) => write_prefix(f, "G", i, g),
            Formula::Eventually(i, g) => write_prefix(f, "F", i, g),
            Formula::PastEventually(i, g) => write_prefix(f, "P", i, g),
            Formula::Historically(i, g) => write_prefix(f, "H", i, g),
            Formula::Agg(a) => a.fmt(f),
        }
    }
}

fn is_tight(f: &Formula) -> bool {
    matches!(
        f,
        Formula::Atom(_)
            | Formula::True
            | Formula::False
            | Formula::Not(_)
            | Formula::Globally(..)
            | Formula::Eventually(..)
            | Formula::PastEventually(..)
            | Formula::Historically(..)
            | Formula::Agg(_)
    )
}

fn write_operand(f: &mut fmt::Formatter<'_>, g: &Formula) -> fmt::Result {
    if is_tight(g) {
        write!(f, "{g}")
    } else {
        write!(f, "({g})")
    }
}

fn write_infix(f: &mut fmt::Formatter<'_>, a: &Formula, op: &str, b: &Formula) -> fmt::Result {
    write_operand(f, a)?;
    write!(f, " {op} ")?;
    write_operand(f, b)
}

fn write_binary_temporal(
    f: &mut fmt::Formatter<'_>,
    a: &Formula,
    op: &str,
    i: &Interval,
    b: &Formula,
) -> fmt::Result {
    write!(f, "({a}) {op}")?;
    if !i.is_unbounded() {
        write!(f, "{i}")?;
    }
    write!(f, " ({b})")
}

fn write_prefix(f: &mut fmt::Formatter<'_>, op: &str, i: &Interval, g: &Formula) -> fmt::Result {
    f.write_str(op)?;
    if !i.is_unbounded() {
        write!(f, "{i}")?;
    }
    write!(f, "({g})")
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Nat(u64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Cmp(CmpOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::AndAnd => f.write_str("`&&`"),
            Tok::OrOr => f.write_str("`||`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Cmp(op) => write!(f, "`{op}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> FormulaError {
    FormulaError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: tl,
                column: tc,
            });
            *i += width;
            *col += width;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '[' => push(Tok::LBrack, 1, &mut i, &mut col),
            ']' => push(Tok::RBrack, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            '&' if chars.get(i + 1) == Some(&'&') => push(Tok::AndAnd, 2, &mut i, &mut col),
            '|' if chars.get(i + 1) == Some(&'|') => push(Tok::OrOr, 2, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '<' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Le), 2, &mut i, &mut col),
            '>' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Ge), 2, &mut i, &mut col),
            '=' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Eq), 2, &mut i, &mut col),
            '<' => push(Tok::Cmp(CmpOp::Lt), 1, &mut i, &mut col),
            '>' => push(Tok::Cmp(CmpOp::Gt), 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let n = digits
                    .parse()
                    .map_err(|_| syntax(tl, tc, format!("number `{digits}` is too large")))?;
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Nat(n),
                    line: tl,
                    column: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: tl,
                    column: tc,
                });
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.column)
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> FormulaError {
        let (line, column) = self.here();
        syntax(line, column, message)
    }

    fn expect(&mut self, want: Tok) -> Result<(), FormulaError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn nat(&mut self) -> Result<u64, FormulaError> {
        match self.peek() {
            Tok::Nat(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            other => Err(self.error(format!("expected a number, found {other}"))),
        }
    }

    fn cmp(&mut self) -> Result<CmpOp, FormulaError> {
        match self.peek() {
            Tok::Cmp(op) => {
                let op = *op;
                self.bump();
                Ok(op)
            }
            other => Err(self.error(format!("expected a comparison operator, found {other}"))),
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected an atom, found {other}"))),
        }
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut acc = self.conjunction()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            acc = Formula::or(acc, self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            acc = Formula::and(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn opens_body(&self, offset: usize) -> bool {
        matches!(self.peek_at(offset), Tok::LParen | Tok::LBrack)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let lhs = self.formula()?;
                self.expect(Tok::RParen)?;
                let op = match self.peek() {
                    Tok::Ident(s) if matches!(s.as_str(), "U" | "S" | "R" | "T") => s.clone(),
                    _ => return Ok(lhs),
                };
                if !self.opens_body(1) {
                    return Ok(lhs);
                }
                self.bump();
                let interval = self.interval_opt()?;
                self.expect(Tok::LParen)?;
                let rhs = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(match op.as_str() {
                    "U" => Formula::until(interval, lhs, rhs),
                    "S" => Formula::since(interval, lhs, rhs),
                    "R" => Formula::release(interval, lhs, rhs),
                    _ => Formula::trigger(interval, lhs, rhs),
                })
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(Formula::True)
                }
                "false" => {
                    self.bump();
                    Ok(Formula::False)
                }
                "G" | "F" | "P" | "H" if self.opens_body(1) => {
                    self.bump();
                    let interval = self.interval_opt()?;
                    self.expect(Tok::LParen)?;
                    let body = Box::new(self.formula()?);
                    self.expect(Tok::RParen)?;
                    Ok(match name.as_str() {
                        "G" => Formula::Globally(interval, body),
                        "F" => Formula::Eventually(interval, body),
                        "P" => Formula::PastEventually(interval, body),
                        _ => Formula::Historically(interval, body),
                    })
                }
                "C" | "V" | "M" | "D" if *self.peek_at(1) == Tok::LBrack => {
                    self.bump();
                    self.aggregate(&name)
                }
                _ => {
                    if name == TRUE_ATOM {
                        return Err(FormulaError::ReservedAtom(name));
                    }
                    self.bump();
                    Ok(Formula::Atom(name))
                }
            },
            other => Err(self.error(format!("expected a formula, found {other}"))),
        }
    }

    fn interval_opt(&mut self) -> Result<Interval, FormulaError> {
        if *self.peek() != Tok::LBrack {
            return Ok(Interval::UNBOUNDED);
        }
        self.bump();
        let lo = self.nat()?;
        self.expect(Tok::Comma)?;
        let hi = match self.peek() {
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                None
            }
            _ => Some(self.nat()?),
        };
        self.expect(Tok::RBrack)?;
        Interval::new(lo, hi)
    }

    fn aggregate_atom(&mut self) -> Result<String, FormulaError> {
        let (line, column) = self.here();
        let simple = matches!(self.peek(), Tok::Ident(_))
            && matches!(self.peek_at(1), Tok::RParen | Tok::Comma);
        if !simple {
            return Err(FormulaError::AggregateArgument { line, column });
        }
        let name = self.ident()?;
        if name == TRUE_ATOM {
            return Err(FormulaError::ReservedAtom(name));
        }
        Ok(name)
    }

    fn aggregate(&mut self, kind: &str) -> Result<Formula, FormulaError> {
        self.expect(Tok::LBrack)?;
        let window = self.nat()?;
        let sub = if matches!(kind, "V" | "M") {
            self.expect(Tok::Comma)?;
            Some(self.nat()?)
        } else {
            None
        };
        self.expect(Tok::RBrack)?;
        let op = self.cmp()?;
        let bound = self.nat()?;
        self.expect(Tok::LParen)?;
        let atom = self.aggregate_atom()?;
        let agg = match (kind, sub) {
            ("C", _) => Aggregate::Count {
                window,
                op,
                bound,
                atom,
            },
            ("V", Some(sub)) => Aggregate::Avg {
                window,
                sub,
                op,
                bound,
                atom,
            },
            ("M", Some(sub)) => Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom,
            },
            _ => {
                self.expect(Tok::Comma)?;
                let end = self.aggregate_atom()?;
                Aggregate::Dist {
                    window,
                    op,
                    bound,
                    start: atom,
                    end,
                }
            }
        };
        self.expect(Tok::RParen)?;
        agg.validate()?;
        Ok(Formula::Agg(agg))
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let f = parser.formula()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error(format!("unexpected {}", parser.peek())));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn parses_withdrawal_limit() {
        let f = p("G(logOff -> C[600]<=3(withdraw))");
        assert_eq!(
            f,
            Formula::globally(
                Interval::UNBOUNDED,
                Formula::implies(
                    Formula::atom("logOff"),
                    Formula::count(600, CmpOp::Le, 3, "withdraw")
                )
            )
        );
    }

    #[test]
    fn parses_single_atom_and_dist() {
        assert_eq!(p("p"), Formula::atom("p"));
        assert_eq!(
            p("D[900]<5(checkAccess_start, checkAccess_end)"),
            Formula::dist(900, CmpOp::Lt, 5, "checkAccess_start", "checkAccess_end")
        );
    }

    #[test]
    fn parses_binary_temporal_and_intervals() {
        let f = p("(a) U[2,5] (b) && (c) S (d)");
        assert_eq!(
            f,
            Formula::and(
                Formula::until(
                    Interval::new(2, Some(5)).unwrap(),
                    Formula::atom("a"),
                    Formula::atom("b")
                ),
                Formula::since(Interval::UNBOUNDED, Formula::atom("c"), Formula::atom("d"))
            )
        );
        assert_eq!(
            p("F[3,inf](x)"),
            Formula::eventually(Interval::new(3, None).unwrap(), Formula::atom("x"))
        );
    }

    #[test]
    fn implication_is_right_associative_and_loosest() {
        let f = p("a -> b -> c || d");
        assert_eq!(
            f,
            Formula::implies(
                Formula::atom("a"),
                Formula::implies(
                    Formula::atom("b"),
                    Formula::or(Formula::atom("c"), Formula::atom("d"))
                )
            )
        );
    }

    #[test]
    fn letters_used_as_operators_are_still_atoms_elsewhere() {
        assert_eq!(
            p("G && U"),
            Formula::and(Formula::atom("G"), Formula::atom("U"))
        );
        assert_eq!(
            p("(a) && C"),
            Formula::and(Formula::atom("a"), Formula::atom("C"))
        );
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        assert_eq!(p("# header\n  p  # trailing\n"), Formula::atom("p"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_formula("C[5]>2(!p)"),
            Err(FormulaError::AggregateArgument { .. })
        ));
        assert!(matches!(
            parse_formula("C[5]>2(p && q)"),
            Err(FormulaError::AggregateArgument { .. })
        ));
        assert_eq!(
            parse_formula("D[5]<2(a, a)"),
            Err(FormulaError::SameDistAtoms("a".into()))
        );
        assert_eq!(
            parse_formula("F[5,2](a)"),
            Err(FormulaError::EmptyInterval { lo: 5, hi: 2 })
        );
        assert_eq!(parse_formula("C[0]<2(a)"), Err(FormulaError::ZeroWindow));
        assert_eq!(parse_formula("M[4,0]<2(a)"), Err(FormulaError::ZeroWindow));
        assert_eq!(
            parse_formula("V[3,4]<2(a)"),
            Err(FormulaError::SubintervalExceedsWindow { window: 3, sub: 4 })
        );
        assert_eq!(
            parse_formula("__true"),
            Err(FormulaError::ReservedAtom(TRUE_ATOM.into()))
        );
        match parse_formula("p &&\n  &&") {
            Err(FormulaError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_formula("p q").is_err());
        assert!(parse_formula("(p").is_err());
    }

    #[test]
    fn max_subinterval_may_exceed_window() {
        assert_eq!(p("M[3,4]<2(a)"), Formula::max(3, 4, CmpOp::Lt, 2, "a"));
    }

    #[test]
    fn desugar_examples() {
        let g = Formula::globally(Interval::UNBOUNDED, Formula::atom("p"));
        assert_eq!(
            desugar(&g),
            Formula::not(Formula::until(
                Interval::UNBOUNDED,
                Formula::top(),
                Formula::not(Formula::atom("p"))
            ))
        );
        assert_eq!(desugar(&Formula::atom("p")), Formula::atom("p"));
        let i = Interval::new(2, Some(5)).unwrap();
        assert_eq!(
            desugar(&Formula::PastEventually(i, Box::new(Formula::atom("q")))),
            Formula::since(i, Formula::top(), Formula::atom("q"))
        );
    }

    #[test]
    fn pnf_examples() {
        let u = Formula::not(Formula::until(
            Interval::UNBOUNDED,
            Formula::atom("p"),
            Formula::atom("q"),
        ));
        assert_eq!(
            to_pnf(&desugar(&u)),
            Pnf::Release(
                Interval::UNBOUNDED,
                Box::new(Pnf::NegAtom("p".into())),
                Box::new(Pnf::NegAtom("q".into()))
            )
        );
        assert_eq!(
            to_pnf(&Formula::not(Formula::not(Formula::atom("p")))),
            Pnf::Atom("p".into())
        );
        assert_eq!(
            to_pnf(&Formula::not(Formula::count(600, CmpOp::Le, 3, "withdraw"))),
            Pnf::Agg(Aggregate::Count {
                window: 600,
                op: CmpOp::Gt,
                bound: 3,
                atom: "withdraw".into()
            })
        );
        let eq = Aggregate::Count {
            window: 5,
            op: CmpOp::Eq,
            bound: 1,
            atom: "p".into(),
        };
        assert_eq!(
            to_pnf(&Formula::not(Formula::Agg(eq.clone()))),
            Pnf::NegAgg(eq)
        );
        let d = Aggregate::Dist {
            window: 5,
            op: CmpOp::Lt,
            bound: 1,
            start: "a".into(),
            end: "b".into(),
        };
        assert_eq!(
            to_pnf(&Formula::not(Formula::Agg(d.clone()))),
            Pnf::NegAgg(d)
        );
    }

    #[test]
    fn sizes_and_windows() {
        assert_eq!(formula_size(&p("p")), 1);
        assert_eq!(formula_size(&p("p && q")), 3);
        assert_eq!(formula_size(&p("C[600]<=3(withdraw)")), 2);
        assert_eq!(formula_size(&p("D[9]<=3(a, b)")), 3);
        assert_eq!(max_window(&p("C[600]<=3(w)")), 600);
        assert_eq!(max_window(&p("p")), 0);
        assert_eq!(max_window(&p("C[100]>30(p) && D[900]<5(a, b)")), 900);
    }

    #[test]
    fn complement_is_exact() {
        for op in CmpOp::ALL {
            if let Some(c) = op.complement() {
                for a in -3..4 {
                    for b in -3..4 {
                        assert_eq!(op.holds(a, b), !c.holds(a, b));
                    }
                }
            }
        }
    }
}
