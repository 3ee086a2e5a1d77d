//! Random formulas and traces for differential testing.
//!
//! Formulas draw atoms from [`FREE_ATOMS`] and the single distance pair
//! [`PAIR`]; traces keep that pair alternating so every distance modality is
//! well defined.

use rand::Rng;

use crate::formula::{Aggregate, CmpOp, Formula, Interval};
use crate::trace::{Instant, TimedWord};

pub const FREE_ATOMS: [&str; 3] = ["p", "q", "r"];
pub const PAIR: (&str, &str) = ("a", "b");

fn op(rng: &mut impl Rng) -> CmpOp {
    CmpOp::ALL[rng.gen_range(0..CmpOp::ALL.len())]
}

fn interval(rng: &mut impl Rng) -> Interval {
    if rng.gen_bool(0.3) {
        return Interval::UNBOUNDED;
    }
    let lo = rng.gen_range(0..4);
    let hi = if rng.gen_bool(0.3) {
        None
    } else {
        Some(lo + rng.gen_range(0..7))
    };
    Interval::new(lo, hi).expect("lo <= hi")
}

fn counted_atom(rng: &mut impl Rng) -> String {
    let all = ["p", "q", "r", PAIR.0, PAIR.1];
    all[rng.gen_range(0..all.len())].to_owned()
}

pub fn random_aggregate(rng: &mut impl Rng) -> Aggregate {
    let window = rng.gen_range(1..=12);
    match rng.gen_range(0..4) {
        0 => Aggregate::Count {
            window,
            op: op(rng),
            bound: rng.gen_range(0..=5),
            atom: counted_atom(rng),
        },
        1 => Aggregate::Avg {
            window,
            sub: rng.gen_range(1..=window),
            op: op(rng),
            bound: rng.gen_range(0..=3),
            atom: counted_atom(rng),
        },
        2 => Aggregate::Max {
            window,
            sub: rng.gen_range(1..=8),
            op: op(rng),
            bound: rng.gen_range(0..=4),
            atom: counted_atom(rng),
        },
        _ => Aggregate::Dist {
            window,
            op: op(rng),
            bound: rng.gen_range(0..=6),
            start: PAIR.0.to_owned(),
            end: PAIR.1.to_owned(),
        },
    }
}

/// Random formula of nesting depth at most `depth`, covering every AST
/// variant.
pub fn random_formula(rng: &mut impl Rng, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            2..=5 => Formula::atom(FREE_ATOMS[rng.gen_range(0..FREE_ATOMS.len())]),
            _ => Formula::Agg(random_aggregate(rng)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..12) {
        0 => Formula::not(random_formula(rng, d)),
        1 => Formula::and(random_formula(rng, d), random_formula(rng, d)),
        2 => Formula::or(random_formula(rng, d), random_formula(rng, d)),
        3 => Formula::implies(random_formula(rng, d), random_formula(rng, d)),
        4 => Formula::until(
            interval(rng),
            random_formula(rng, d),
            random_formula(rng, d),
        ),
        5 => Formula::since(
            interval(rng),
            random_formula(rng, d),
            random_formula(rng, d),
        ),
        6 => Formula::release(
            interval(rng),
            random_formula(rng, d),
            random_formula(rng, d),
        ),
        7 => Formula::trigger(
            interval(rng),
            random_formula(rng, d),
            random_formula(rng, d),
        ),
        8 => Formula::Globally(interval(rng), Box::new(random_formula(rng, d))),
        9 => Formula::Eventually(interval(rng), Box::new(random_formula(rng, d))),
        10 => Formula::PastEventually(interval(rng), Box::new(random_formula(rng, d))),
        _ => Formula::Historically(interval(rng), Box::new(random_formula(rng, d))),
    }
}

/// Random trace with last timestamp at most `max_horizon`, free atoms
/// sprinkled at random and an alternating start/end pair.
pub fn random_word(rng: &mut impl Rng, max_horizon: u64) -> TimedWord {
    let horizon = rng.gen_range(0..=max_horizon);
    let density = rng.gen_range(0.2..=1.0);
    let mut open = false;
    let mut instants = Vec::new();
    for t in 0..=horizon {
        if t != horizon && !rng.gen_bool(density) {
            continue;
        }
        let mut events: std::collections::BTreeSet<String> = FREE_ATOMS
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|a| (*a).to_owned())
            .collect();
        if rng.gen_bool(0.35) {
            if open {
                events.insert(PAIR.1.to_owned());
                open = false;
            } else {
                events.insert(PAIR.0.to_owned());
                if rng.gen_bool(0.15) {
                    events.insert(PAIR.1.to_owned());
                } else {
                    open = true;
                }
            }
        }
        if events.is_empty() {
            events.insert(FREE_ATOMS[rng.gen_range(0..FREE_ATOMS.len())].to_owned());
        }
        instants.push(Instant { time: t, events });
    }
    TimedWord::new(instants).expect("generated word is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::pair_instances;
    use crate::trace::expand;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_words_alternate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let w = expand(&random_word(&mut rng, 30));
            assert!(pair_instances(&w, PAIR.0, PAIR.1).is_ok());
        }
    }

    #[test]
    fn generated_formulas_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            random_formula(&mut rng, 4).visit_aggregates(&mut |a| a.validate().unwrap());
        }
    }
}
