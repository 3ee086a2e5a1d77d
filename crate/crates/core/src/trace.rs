//! Timed words, their dense expansion, the text format and a seeded
//! synthetic trace generator.
//!
//! Text format, one instant per line: `<timestamp>: <atom>, <atom>, ...`.
//! Blank lines and `#` comments are ignored; timestamps strictly increase.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::TRUE_ATOM;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("timestamp {timestamp} is not greater than the previous timestamp {previous}")]
    NonMonotonic { timestamp: u64, previous: u64 },
    #[error("instant {0} carries no events")]
    EmptyInstant(u64),
    #[error("trace is empty")]
    Empty,
    #[error("invalid atom name `{0}`")]
    InvalidAtom(String),
    #[error("atom name `{0}` is reserved")]
    ReservedAtom(String),
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

/// Alternation failure for a start/end atom pair used by a distance
/// modality.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pair ({start}, {end}) does not alternate at timestamp {timestamp}: {reason}")]
pub struct AlternationError {
    pub start: String,
    pub end: String,
    pub timestamp: u64,
    pub reason: String,
}

pub(crate) fn valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// One timestamped instant with its nonempty event set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instant {
    pub time: u64,
    pub events: BTreeSet<String>,
}

/// Finite timed word: strictly increasing timestamps, nonempty event sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedWord {
    instants: Vec<Instant>,
}

impl TimedWord {
    pub fn new(instants: Vec<Instant>) -> Result<Self, TraceError> {
        if instants.is_empty() {
            return Err(TraceError::Empty);
        }
        for (k, inst) in instants.iter().enumerate() {
            if inst.events.is_empty() {
                return Err(TraceError::EmptyInstant(inst.time));
            }
            for atom in &inst.events {
                check_atom(atom)?;
            }
            if k > 0 && inst.time <= instants[k - 1].time {
                return Err(TraceError::NonMonotonic {
                    timestamp: inst.time,
                    previous: instants[k - 1].time,
                });
            }
        }
        Ok(TimedWord { instants })
    }

    /// Convenience constructor from `(timestamp, atoms)` pairs.
    pub fn from_pairs<'a, I, A>(pairs: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = (u64, A)>,
        A: IntoIterator<Item = &'a str>,
    {
        TimedWord::new(
            pairs
                .into_iter()
                .map(|(time, atoms)| Instant {
                    time,
                    events: atoms.into_iter().map(str::to_owned).collect(),
                })
                .collect(),
        )
    }

    pub fn instants(&self) -> &[Instant] {
        &self.instants
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn last_timestamp(&self) -> u64 {
        self.instants.last().map_or(0, |i| i.time)
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.instants
            .iter()
            .flat_map(|i| i.events.iter().cloned())
            .collect()
    }

    /// Fraction of instants in `[0, last timestamp]` that carry events.
    pub fn sparseness(&self) -> f64 {
        self.len() as f64 / (self.last_timestamp() + 1) as f64
    }

    /// Dense length: last timestamp plus one trailing position without events.
    pub fn dense_len(&self) -> usize {
        self.last_timestamp() as usize + 2
    }
}

fn check_atom(atom: &str) -> Result<(), TraceError> {
    if atom == TRUE_ATOM {
        Err(TraceError::ReservedAtom(atom.to_owned()))
    } else if !valid_atom_name(atom) {
        Err(TraceError::InvalidAtom(atom.to_owned()))
    } else {
        Ok(())
    }
}

impl fmt::Display for TimedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for inst in &self.instants {
            let atoms: Vec<&str> = inst.events.iter().map(String::as_str).collect();
            writeln!(f, "{}: {}", inst.time, atoms.join(", "))?;
        }
        Ok(())
    }
}

/// Canonical text form; atoms sorted, one instant per line.
pub fn serialize_trace(w: &TimedWord) -> String {
    w.to_string()
}

pub fn parse_trace(text: &str) -> Result<TimedWord, TraceError> {
    let mut instants: Vec<Instant> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let malformed = |message: String| TraceError::Malformed { line, message };
        let (stamp, rest) = body
            .split_once(':')
            .ok_or_else(|| malformed("expected `<timestamp>: <atoms>`".into()))?;
        let stamp = stamp.trim();
        let time: u64 = stamp
            .parse()
            .map_err(|_| malformed(format!("invalid timestamp `{stamp}`")))?;
        let mut events = BTreeSet::new();
        for atom in rest.split(',').map(str::trim) {
            if atom.is_empty() {
                return Err(malformed("empty atom name".into()));
            }
            if atom == TRUE_ATOM {
                return Err(TraceError::ReservedAtom(atom.to_owned()));
            }
            if !valid_atom_name(atom) {
                return Err(malformed(format!("invalid atom name `{atom}`")));
            }
            events.insert(atom.to_owned());
        }
        if let Some(prev) = instants.last() {
            if time <= prev.time {
                return Err(TraceError::NonMonotonic {
                    timestamp: time,
                    previous: prev.time,
                });
            }
        }
        instants.push(Instant { time, events });
    }
    TimedWord::new(instants)
}

/// Dense word over positions `0..len()`. Position `t` is valid (carries
/// events) exactly when `t` is a timestamp of the source word; the last
/// position is never valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseWord {
    valid: Vec<bool>,
    atoms: BTreeMap<String, Vec<bool>>,
}

impl DenseWord {
    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn is_valid(&self, t: usize) -> bool {
        self.valid.get(t).copied().unwrap_or(false)
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Whether `atom` occurs at position `t`. Unknown atoms never occur.
    pub fn holds(&self, atom: &str, t: usize) -> bool {
        self.atoms
            .get(atom)
            .and_then(|v| v.get(t).copied())
            .unwrap_or(false)
    }

    pub fn alphabet(&self) -> impl Iterator<Item = &str> {
        self.atoms.keys().map(String::as_str)
    }

    pub fn events_at(&self, t: usize) -> BTreeSet<&str> {
        self.atoms
            .iter()
            .filter(|(_, v)| v.get(t).copied().unwrap_or(false))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Last position carrying events.
    pub fn last_event(&self) -> usize {
        self.len().saturating_sub(2)
    }

    /// Inverse of [`expand`].
    pub fn collapse(&self) -> TimedWord {
        let instants = (0..self.len())
            .filter(|&t| self.valid[t])
            .map(|t| Instant {
                time: t as u64,
                events: self.events_at(t).into_iter().map(str::to_owned).collect(),
            })
            .collect();
        TimedWord { instants }
    }
}

pub fn expand(w: &TimedWord) -> DenseWord {
    let len = w.dense_len();
    let mut valid = vec![false; len];
    let mut atoms: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for inst in w.instants() {
        let t = inst.time as usize;
        valid[t] = true;
        for a in &inst.events {
            atoms.entry(a.clone()).or_insert_with(|| vec![false; len])[t] = true;
        }
    }
    DenseWord { valid, atoms }
}

// ---------------------------------------------------------------------------
// Generator

/// Start/end atoms emitted as alternating, non-overlapping pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec {
    pub start: String,
    pub end: String,
    pub min_duration: u64,
    pub max_duration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Last timestamp; it always carries events.
    pub horizon: u64,
    /// Target fraction of instants in `[0, horizon]` carrying events, in `(0, 1]`.
    pub sparseness: f64,
    /// Filler atoms with their per-instant emission probability.
    pub atoms: Vec<(String, f64)>,
    pub pairs: Vec<PairSpec>,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidConfig(m));
        if !(self.sparseness > 0.0 && self.sparseness <= 1.0) {
            return bad(format!("sparseness {} is outside (0, 1]", self.sparseness));
        }
        if self.atoms.is_empty() && self.pairs.is_empty() {
            return bad("no atoms or pairs to emit".into());
        }
        let mut names = BTreeSet::new();
        for (atom, prob) in &self.atoms {
            check_atom(atom)?;
            if !(0.0..=1.0).contains(prob) {
                return bad(format!("probability {prob} for `{atom}` is outside [0, 1]"));
            }
            if !names.insert(atom.as_str()) {
                return bad(format!("atom `{atom}` listed twice"));
            }
        }
        for pair in &self.pairs {
            check_atom(&pair.start)?;
            check_atom(&pair.end)?;
            if pair.start == pair.end {
                return bad(format!("pair uses `{}` for both start and end", pair.start));
            }
            for atom in [&pair.start, &pair.end] {
                if !names.insert(atom.as_str()) {
                    return bad(format!("atom `{atom}` is used more than once"));
                }
            }
            if pair.min_duration > pair.max_duration {
                return bad(format!(
                    "pair ({}, {}) has min duration {} above max duration {}",
                    pair.start, pair.end, pair.min_duration, pair.max_duration
                ));
            }
            if pair.min_duration > self.horizon {
                return bad(format!(
                    "pair ({}, {}) needs duration {} but the horizon is {}",
                    pair.start, pair.end, pair.min_duration, self.horizon
                ));
            }
        }
        Ok(())
    }
}

/// Deterministic for a fixed config. Achieved sparseness is close to the
/// target when only filler atoms are used; pair instants come on top.
pub fn generate_trace(cfg: &GeneratorConfig) -> Result<TimedWord, TraceError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let slots = cfg.horizon + 1;
    let target = ((cfg.sparseness * slots as f64).round() as u64).clamp(1, slots);
    let mean_spacing = slots as f64 / target as f64;
    let max_gap = ((2.0 * mean_spacing).ceil() as u64).max(1);

    let mut events: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for pair in &cfg.pairs {
        let mut t = rng.gen_range(0..max_gap);
        loop {
            let duration = rng.gen_range(pair.min_duration..=pair.max_duration);
            let end = t + duration;
            if end > cfg.horizon {
                break;
            }
            events.entry(t).or_default().insert(pair.start.clone());
            events.entry(end).or_default().insert(pair.end.clone());
            t = end + 1 + rng.gen_range(0..max_gap);
        }
    }

    if !cfg.atoms.is_empty() {
        let mut needed = target.saturating_sub(events.len() as u64);
        if let Entry::Vacant(slot) = events.entry(cfg.horizon) {
            slot.insert(filler(&mut rng, &cfg.atoms));
            needed = needed.saturating_sub(1);
        }
        let free: Vec<u64> = (0..cfg.horizon)
            .filter(|t| !events.contains_key(t))
            .collect();
        let picks = (needed as usize).min(free.len());
        for k in index::sample(&mut rng, free.len(), picks) {
            let set = filler(&mut rng, &cfg.atoms);
            events.insert(free[k], set);
        }
    }

    TimedWord::new(
        events
            .into_iter()
            .map(|(time, events)| Instant { time, events })
            .collect(),
    )
}

fn filler(rng: &mut ChaCha8Rng, atoms: &[(String, f64)]) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = atoms
        .iter()
        .filter(|(_, p)| rng.gen_bool(*p))
        .map(|(a, _)| a.clone())
        .collect();
    if set.is_empty() {
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        let pick = if total > 0.0 {
            let mut x = rng.gen_range(0.0..total);
            atoms
                .iter()
                .position(|(_, p)| {
                    x -= p;
                    x < 0.0
                })
                .unwrap_or(atoms.len() - 1)
        } else {
            rng.gen_range(0..atoms.len())
        };
        set.insert(atoms[pick].0.clone());
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_two_instant_trace() {
        let w = TimedWord::from_pairs([(0, vec!["p"]), (3, vec!["q"])]).unwrap();
        let d = expand(&w);
        assert_eq!(d.len(), 5);
        assert_eq!(d.valid_mask(), &[true, false, false, true, false]);
        assert!(d.holds("p", 0));
        assert!(d.holds("q", 3));
        assert!(!d.holds("q", 0));
        assert_eq!(d.collapse(), w);
    }

    #[test]
    fn expand_single_instant() {
        let w = TimedWord::from_pairs([(0, vec!["p"])]).unwrap();
        let d = expand(&w);
        assert_eq!(d.len(), 2);
        assert_eq!(d.valid_mask(), &[true, false]);
    }

    #[test]
    fn parse_and_serialize() {
        let w = parse_trace("# atm\n0: logOn\n\n5: withdraw, logOff # done\n").unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(serialize_trace(&w), "0: logOn\n5: logOff, withdraw\n");
        assert_eq!(parse_trace(&serialize_trace(&w)).unwrap(), w);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_trace("5: a\n3: b\n"),
            Err(TraceError::NonMonotonic {
                timestamp: 3,
                previous: 5
            })
        );
        assert_eq!(
            parse_trace("5: a\n5: b\n"),
            Err(TraceError::NonMonotonic {
                timestamp: 5,
                previous: 5
            })
        );
        assert!(matches!(
            parse_trace("x: a"),
            Err(TraceError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("1 a"),
            Err(TraceError::Malformed { .. })
        ));
        assert!(matches!(
            parse_trace("1:"),
            Err(TraceError::Malformed { .. })
        ));
        assert!(matches!(
            parse_trace("1: a,,b"),
            Err(TraceError::Malformed { .. })
        ));
        assert_eq!(parse_trace("# nothing\n"), Err(TraceError::Empty));
        assert_eq!(
            parse_trace("0: __true"),
            Err(TraceError::ReservedAtom("__true".into()))
        );
    }

    #[test]
    fn sparseness_of_dense_and_sparse_words() {
        let w = TimedWord::from_pairs([(0, vec!["p"]), (1, vec!["p"])]).unwrap();
        assert_eq!(w.sparseness(), 1.0);
        let w = TimedWord::from_pairs([(0, vec!["p"]), (9, vec!["p"])]).unwrap();
        assert!((w.sparseness() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn generator_full_density() {
        let cfg = GeneratorConfig {
            seed: 1,
            horizon: 10,
            sparseness: 1.0,
            atoms: vec![("p".into(), 1.0)],
            pairs: vec![],
        };
        let w = generate_trace(&cfg).unwrap();
        assert_eq!(w.len(), 11);
        assert!(w
            .instants()
            .iter()
            .enumerate()
            .all(|(t, i)| i.time == t as u64 && i.events.iter().map(String::as_str).eq(["p"])));
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig {
            seed: 42,
            horizon: 500,
            sparseness: 0.3,
            atoms: vec![("r".into(), 0.5), ("s".into(), 0.2)],
            pairs: vec![PairSpec {
                start: "p".into(),
                end: "q".into(),
                min_duration: 1,
                max_duration: 8,
            }],
        };
        assert_eq!(generate_trace(&cfg).unwrap(), generate_trace(&cfg).unwrap());
    }

    #[test]
    fn generator_rejects_bad_configs() {
        let base = GeneratorConfig {
            seed: 0,
            horizon: 5,
            sparseness: 0.5,
            atoms: vec![("r".into(), 0.5)],
            pairs: vec![],
        };
        let mut c = base.clone();
        c.pairs.push(PairSpec {
            start: "p".into(),
            end: "q".into(),
            min_duration: 6,
            max_duration: 7,
        });
        assert!(matches!(
            generate_trace(&c),
            Err(TraceError::InvalidConfig(_))
        ));
        let mut c = base.clone();
        c.sparseness = 0.0;
        assert!(generate_trace(&c).is_err());
        let mut c = base.clone();
        c.atoms[0].1 = 1.5;
        assert!(generate_trace(&c).is_err());
        let mut c = base;
        c.atoms.clear();
        assert!(generate_trace(&c).is_err());
    }
}
