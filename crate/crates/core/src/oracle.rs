//! Reference evaluator that follows the semantics definitions directly over
//! the dense word. Quadratic in places; used as the ground truth for the
//! counter and solver backends.

use thiserror::Error;

use crate::formula::{Aggregate, Formula, Pnf};
use crate::trace::{AlternationError, DenseWord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("position {position} is past the last event position {last}")]
    OutOfRange { position: usize, last: usize },
    #[error(transparent)]
    Alternation(#[from] AlternationError),
}

/// A closed start/end occurrence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairInstance {
    pub open_at: usize,
    pub close_at: usize,
}

impl PairInstance {
    pub fn distance(&self) -> u64 {
        (self.close_at - self.open_at) as u64
    }
}

/// Closed pairs of `start`/`end` in order. A start while a pair is open, an
/// end while none is, or both at once while open is an alternation error.
/// Both at once while closed is a zero-duration pair. A trailing open start is
/// not an instance.
pub fn pair_instances(
    w: &DenseWord,
    start: &str,
    end: &str,
) -> Result<Vec<PairInstance>, AlternationError> {
    let fail = |t: usize, reason: &str| AlternationError {
        start: start.to_owned(),
        end: end.to_owned(),
        timestamp: t as u64,
        reason: reason.to_owned(),
    };
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for t in 0..w.len() {
        if !w.is_valid(t) {
            continue;
        }
        match (w.holds(start, t), w.holds(end, t), open) {
            (true, false, None) => open = Some(t),
            (true, false, Some(_)) => return Err(fail(t, "start while a pair is open")),
            (false, true, Some(o)) => {
                out.push(PairInstance {
                    open_at: o,
                    close_at: t,
                });
                open = None;
            }
            (false, true, None) => return Err(fail(t, "end without an open start")),
            (true, true, None) => out.push(PairInstance {
                open_at: t,
                close_at: t,
            }),
            (true, true, Some(_)) => return Err(fail(t, "start and end while a pair is open")),
            (false, false, _) => {}
        }
    }
    Ok(out)
}

/// Truth value of `f` at position `i`, which must not exceed the last event
/// position.
pub fn eval(f: &Formula, w: &DenseWord, i: usize) -> Result<bool, OracleError> {
    let last = w.last_event();
    if i > last {
        return Err(OracleError::OutOfRange { position: i, last });
    }
    Ok(eval_all(f, w)?[i])
}

pub fn eval_pnf(f: &Pnf, w: &DenseWord, i: usize) -> Result<bool, OracleError> {
    eval(&f.to_formula(), w, i)
}

/// Truth table of `f` over every position of `w`.
pub fn eval_all(f: &Formula, w: &DenseWord) -> Result<Vec<bool>, OracleError> {
    Ok(Evaluator { w }.table(f)?)
}

struct Evaluator<'a> {
    w: &'a DenseWord,
}

impl Evaluator<'_> {
    fn len(&self) -> usize {
        self.w.len()
    }

    fn table(&self, f: &Formula) -> Result<Vec<bool>, AlternationError> {
        let n = self.len();
        let w = self.w;
        Ok(match f {
            Formula::Atom(p) => (0..n).map(|t| w.holds(p, t)).collect(),
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Not(g) => self.table(g)?.into_iter().map(|v| !v).collect(),
            Formula::And(a, b) => zip(self.table(a)?, self.table(b)?, |x, y| x && y),
            Formula::Or(a, b) => zip(self.table(a)?, self.table(b)?, |x, y| x || y),
            Formula::Implies(a, b) => zip(self.table(a)?, self.table(b)?, |x, y| !x || y),
            Formula::Until(iv, a, b) => {
                let (ta, tb) = (self.table(a)?, self.table(b)?);
                (0..n)
                    .map(|i| {
                        let range = self.future(i, iv.lo(), iv.hi());
                        // `ok`: the left operand holds at every valid k in [i, j).
                        let mut ok = true;
                        for j in i..=*range.end().max(&i) {
                            if range.contains(&j) && w.is_valid(j) && tb[j] && ok {
                                return true;
                            }
                            ok &= !w.is_valid(j) || ta[j];
                            if !ok {
                                return false;
                            }
                        }
                        false
                    })
                    .collect()
            }
            Formula::Since(iv, a, b) => {
                let (ta, tb) = (self.table(a)?, self.table(b)?);
                (0..n)
                    .map(|i| {
                        let range = self.past(i, iv.lo(), iv.hi());
                        // `ok`: the left operand holds at every valid k in (j, i].
                        let mut ok = true;
                        for j in (*range.start().min(&i)..=i).rev() {
                            if range.contains(&j) && w.is_valid(j) && tb[j] && ok {
                                return true;
                            }
                            ok &= !w.is_valid(j) || ta[j];
                            if !ok {
                                return false;
                            }
                        }
                        false
                    })
                    .collect()
            }
            Formula::Release(iv, a, b) => {
                let (ta, tb) = (self.table(a)?, self.table(b)?);
                (0..n)
                    .map(|i| {
                        let range = self.future(i, iv.lo(), iv.hi());
                        // `seen`: the left operand held at some valid k in [i, j).
                        let mut seen = false;
                        for j in i..=*range.end().max(&i) {
                            if range.contains(&j) && !seen && w.is_valid(j) && !tb[j] {
                                return false;
                            }
                            seen |= w.is_valid(j) && ta[j];
                            if seen {
                                return true;
                            }
                        }
                        true
                    })
                    .collect()
            }
            Formula::Trigger(iv, a, b) => {
                let (ta, tb) = (self.table(a)?, self.table(b)?);
                (0..n)
                    .map(|i| {
                        let range = self.past(i, iv.lo(), iv.hi());
                        // `seen`: the left operand held at some valid k in (j, i].
                        let mut seen = false;
                        for j in (*range.start().min(&i)..=i).rev() {
                            if range.contains(&j) && !seen && w.is_valid(j) && !tb[j] {
                                return false;
                            }
                            seen |= w.is_valid(j) && ta[j];
                            if seen {
                                return true;
                            }
                        }
                        true
                    })
                    .collect()
            }
            Formula::Globally(iv, g) => {
                let tg = self.table(g)?;
                (0..n)
                    .map(|i| {
                        self.future(i, iv.lo(), iv.hi())
                            .all(|j| !w.is_valid(j) || tg[j])
                    })
                    .collect()
            }
            Formula::Eventually(iv, g) => {
                let tg = self.table(g)?;
                (0..n)
                    .map(|i| {
                        self.future(i, iv.lo(), iv.hi())
                            .any(|j| w.is_valid(j) && tg[j])
                    })
                    .collect()
            }
            Formula::PastEventually(iv, g) => {
                let tg = self.table(g)?;
                (0..n)
                    .map(|i| {
                        self.past(i, iv.lo(), iv.hi())
                            .any(|j| w.is_valid(j) && tg[j])
                    })
                    .collect()
            }
            Formula::Historically(iv, g) => {
                let tg = self.table(g)?;
                (0..n)
                    .map(|i| {
                        self.past(i, iv.lo(), iv.hi())
                            .all(|j| !w.is_valid(j) || tg[j])
                    })
                    .collect()
            }
            Formula::Agg(agg) => self.aggregate(agg)?,
        })
    }

    /// Positions `j` with `j - i` in `[lo, hi]`, inside the word.
    fn future(&self, i: usize, lo: u64, hi: Option<u64>) -> std::ops::RangeInclusive<usize> {
        let last = self.len() as u64 - 1;
        let from = i as u64 + lo;
        let to = hi.map_or(last, |h| (i as u64 + h).min(last));
        if from > to {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        from as usize..=to as usize
    }

    /// Positions `j` with `i - j` in `[lo, hi]`, inside the word.
    fn past(&self, i: usize, lo: u64, hi: Option<u64>) -> std::ops::RangeInclusive<usize> {
        let i = i as u64;
        if lo > i {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let to = i - lo;
        let from = hi.map_or(0, |h| i.saturating_sub(h));
        from as usize..=to as usize
    }

    /// Occurrences of `atom` at positions `from..=to` clipped to the word.
    fn occurrences(&self, atom: &str, from: i64, to: i64) -> i64 {
        if to < 0 {
            return 0;
        }
        (from.max(0)..=to)
            .filter(|&t| self.w.is_valid(t as usize) && self.w.holds(atom, t as usize))
            .count() as i64
    }

    fn aggregate(&self, agg: &Aggregate) -> Result<Vec<bool>, AlternationError> {
        let n = self.len();
        let table = match agg {
            Aggregate::Count {
                window,
                op,
                bound,
                atom,
            } => (0..n as i64)
                .map(|i| {
                    op.holds(
                        self.occurrences(atom, i - *window as i64 + 1, i),
                        *bound as i64,
                    )
                })
                .collect(),
            Aggregate::Avg {
                window,
                sub,
                op,
                bound,
                atom,
            } => {
                let blocks = (window / sub) as i64;
                let span = blocks * *sub as i64;
                (0..n as i64)
                    .map(|i| {
                        let count = self.occurrences(atom, i - span + 1, i);
                        op.holds(count, *bound as i64 * blocks)
                    })
                    .collect()
            }
            Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom,
            } => {
                let (k, h) = (*window as i64, *sub as i64);
                let blocks = k / h;
                (0..n as i64)
                    .map(|i| {
                        let mut best = (0..blocks)
                            .map(|m| self.occurrences(atom, i - (m + 1) * h + 1, i - m * h))
                            .max()
                            .unwrap_or(0);
                        if k % h != 0 {
                            best = best.max(self.occurrences(atom, i - k + 1, i - blocks * h));
                        }
                        op.holds(best, *bound as i64)
                    })
                    .collect()
            }
            Aggregate::Dist {
                window,
                op,
                bound,
                start,
                end,
            } => {
                let pairs = pair_instances(self.w, start, end)?;
                (0..n as i64)
                    .map(|i| {
                        let lo = i - *window as i64 + 1;
                        let inside: Vec<&PairInstance> = pairs
                            .iter()
                            .filter(|p| p.open_at as i64 >= lo && p.close_at as i64 <= i)
                            .collect();
                        if inside.is_empty() {
                            return true;
                        }
                        let total: i64 = inside.iter().map(|p| p.distance() as i64).sum();
                        op.holds(total, *bound as i64 * inside.len() as i64)
                    })
                    .collect()
            }
        };
        Ok(table)
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}
