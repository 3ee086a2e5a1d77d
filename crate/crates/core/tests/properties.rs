mod common;

use aggtl::checker::{compute_counters, eval_cltlb_all};
use aggtl::cltlb::{translate, translation_size};
use aggtl::formula::{desugar, parse_formula, to_pnf, Aggregate, CmpOp, Formula, Interval, Pnf};
use aggtl::oracle::{self, pair_instances};
use aggtl::sample::random_word;
use aggtl::trace::{
    expand, generate_trace, parse_trace, serialize_trace, GeneratorConfig, PairSpec, TimedWord,
};
use proptest::prelude::*;

fn atom_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,3}".prop_filter("keyword", |s| {
        !matches!(s.as_str(), "true" | "false" | "inf")
    })
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(CmpOp::ALL.to_vec())
}

fn interval() -> impl Strategy<Value = Interval> {
    (0u64..5, prop::option::of(0u64..8))
        .prop_map(|(lo, span)| Interval::new(lo, span.map(|s| lo + s)).unwrap())
}

fn aggregate() -> impl Strategy<Value = Aggregate> {
    let window = 1u64..=12;
    prop_oneof![
        (window.clone(), cmp_op(), 0u64..6, atom_name()).prop_map(|(window, op, bound, atom)| {
            Aggregate::Count {
                window,
                op,
                bound,
                atom,
            }
        }),
        (window.clone(), 1u64..=12, cmp_op(), 0u64..4, atom_name()).prop_map(
            |(window, sub, op, bound, atom)| Aggregate::Avg {
                window,
                sub: sub.min(window),
                op,
                bound,
                atom
            }
        ),
        (window.clone(), 1u64..=12, cmp_op(), 0u64..5, atom_name()).prop_map(
            |(window, sub, op, bound, atom)| Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom
            }
        ),
        (window, cmp_op(), 0u64..7).prop_map(|(window, op, bound)| Aggregate::Dist {
            window,
            op,
            bound,
            start: "a".into(),
            end: "b".into()
        }),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        atom_name().prop_map(Formula::Atom),
        prop::sample::select(vec!["p", "q", "r"]).prop_map(Formula::atom),
        aggregate().prop_map(Formula::Agg),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let bin = (inner.clone(), inner.clone());
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            bin.clone().prop_map(|(a, b)| Formula::and(a, b)),
            bin.clone().prop_map(|(a, b)| Formula::or(a, b)),
            bin.clone().prop_map(|(a, b)| Formula::implies(a, b)),
            (interval(), bin.clone()).prop_map(|(i, (a, b))| Formula::until(i, a, b)),
            (interval(), bin.clone()).prop_map(|(i, (a, b))| Formula::since(i, a, b)),
            (interval(), bin.clone()).prop_map(|(i, (a, b))| Formula::release(i, a, b)),
            (interval(), bin).prop_map(|(i, (a, b))| Formula::trigger(i, a, b)),
            (interval(), inner.clone()).prop_map(|(i, f)| Formula::Globally(i, Box::new(f))),
            (interval(), inner.clone()).prop_map(|(i, f)| Formula::Eventually(i, Box::new(f))),
            (interval(), inner.clone()).prop_map(|(i, f)| Formula::PastEventually(i, Box::new(f))),
            (interval(), inner).prop_map(|(i, f)| Formula::Historically(i, Box::new(f))),
        ]
    })
}

/// Trace over `p, q, r` and the alternating pair `a, b`.
fn word() -> impl Strategy<Value = TimedWord> {
    (any::<u64>(), 0u64..30).prop_map(|(seed, h)| random_word(&mut common::rng(seed), h))
}

fn triple() -> impl Strategy<Value = (Formula, TimedWord, u64)> {
    (formula(), word(), any::<prop::sample::Index>()).prop_map(|(f, w, i)| {
        let i = i.index(w.last_timestamp() as usize + 1) as u64;
        (f, w, i)
    })
}

/// Same formula with every window and subinterval multiplied by `k`.
fn with_windows(f: &Formula, k: u64) -> Formula {
    let m = |g: &Formula| Box::new(with_windows(g, k));
    match f {
        Formula::Agg(a) => Formula::Agg(match a.clone() {
            Aggregate::Count {
                window,
                op,
                bound,
                atom,
            } => Aggregate::Count {
                window: window * k,
                op,
                bound,
                atom,
            },
            Aggregate::Avg {
                window,
                sub,
                op,
                bound,
                atom,
            } => Aggregate::Avg {
                window: window * k,
                sub: sub * k,
                op,
                bound,
                atom,
            },
            Aggregate::Max {
                window,
                sub,
                op,
                bound,
                atom,
            } => Aggregate::Max {
                window: window * k,
                sub: sub * k,
                op,
                bound,
                atom,
            },
            Aggregate::Dist {
                window,
                op,
                bound,
                start,
                end,
            } => Aggregate::Dist {
                window: window * k,
                op,
                bound,
                start,
                end,
            },
        }),
        Formula::Atom(_) | Formula::True | Formula::False => f.clone(),
        Formula::Not(g) => Formula::Not(m(g)),
        Formula::And(a, b) => Formula::And(m(a), m(b)),
        Formula::Or(a, b) => Formula::Or(m(a), m(b)),
        Formula::Implies(a, b) => Formula::Implies(m(a), m(b)),
        Formula::Until(i, a, b) => Formula::Until(*i, m(a), m(b)),
        Formula::Since(i, a, b) => Formula::Since(*i, m(a), m(b)),
        Formula::Release(i, a, b) => Formula::Release(*i, m(a), m(b)),
        Formula::Trigger(i, a, b) => Formula::Trigger(*i, m(a), m(b)),
        Formula::Globally(i, g) => Formula::Globally(*i, m(g)),
        Formula::Eventually(i, g) => Formula::Eventually(*i, m(g)),
        Formula::PastEventually(i, g) => Formula::PastEventually(*i, m(g)),
        Formula::Historically(i, g) => Formula::Historically(*i, m(g)),
    }
}

fn only_atom_negations(p: &Pnf) -> bool {
    match p {
        Pnf::Atom(_) | Pnf::NegAtom(_) | Pnf::Agg(_) => true,
        Pnf::NegAgg(a) => a.op() == CmpOp::Eq || !matches!(a, Aggregate::Count { .. }),
        Pnf::And(a, b)
        | Pnf::Or(a, b)
        | Pnf::Until(_, a, b)
        | Pnf::Since(_, a, b)
        | Pnf::Release(_, a, b)
        | Pnf::Trigger(_, a, b) => only_atom_negations(a) && only_atom_negations(b),
    }
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(f in formula()) {
        prop_assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn trace_text_round_trips(w in word()) {
        prop_assert_eq!(parse_trace(&serialize_trace(&w)).unwrap(), w);
    }

    #[test]
    fn expansion_places_events_at_timestamps(w in word()) {
        let d = expand(&w);
        prop_assert_eq!(d.len() as u64, w.last_timestamp() + 2);
        let stamps: Vec<u64> = w.instants().iter().map(|i| i.time).collect();
        for t in 0..d.len() {
            prop_assert_eq!(d.is_valid(t), stamps.contains(&(t as u64)));
        }
        prop_assert!(!d.is_valid(d.len() - 1));
        prop_assert_eq!(d.collapse(), w.clone());
        let s = w.sparseness();
        prop_assert!(s > 0.0 && s <= 1.0);
    }

    #[test]
    fn desugar_is_idempotent_and_sound((f, w, i) in triple()) {
        let d = desugar(&f);
        prop_assert_eq!(desugar(&d), d.clone());
        let dense = expand(&w);
        prop_assert_eq!(
            oracle::eval(&d, &dense, i as usize).unwrap(),
            oracle::eval(&f, &dense, i as usize).unwrap()
        );
    }

    #[test]
    fn pnf_is_sound_and_normal((f, w, i) in triple()) {
        let dense = expand(&w);
        let expected = oracle::eval(&f, &dense, i as usize).unwrap();
        let p = to_pnf(&desugar(&f));
        prop_assert!(only_atom_negations(&p));
        prop_assert_eq!(oracle::eval_pnf(&p, &dense, i as usize).unwrap(), expected);
        let n = to_pnf(&desugar(&Formula::not(f.clone())));
        prop_assert_eq!(oracle::eval_pnf(&n, &dense, i as usize).unwrap(), !expected);
    }

    #[test]
    fn translation_size_ignores_windows(f in formula()) {
        let sizes: Vec<usize> = [1u64, 10, 100]
            .iter()
            .map(|&k| translation_size(&translate(&to_pnf(&desugar(&with_windows(&f, k)))).unwrap()))
            .collect();
        prop_assert!(sizes.windows(2).all(|s| s[0] == s[1]), "{:?}", sizes);
    }

    #[test]
    fn stride_unfolding_preserves_meaning((f, w, _) in triple()) {
        let dense = expand(&w);
        let t = translate(&to_pnf(&desugar(&f))).unwrap();
        let vals = compute_counters(&t, &dense, false).unwrap();
        prop_assert_eq!(
            eval_cltlb_all(&t.goal, &dense, &vals),
            eval_cltlb_all(&t.goal.unfold_strides(), &dense, &vals)
        );
    }

    #[test]
    fn generator_meets_sparseness_and_pairing(
        seed in any::<u64>(),
        horizon in 50u64..400,
        sparseness in 0.05f64..=1.0,
        min in 0u64..4,
        extra in 0u64..6,
    ) {
        let filler_only = GeneratorConfig {
            seed,
            horizon,
            sparseness,
            atoms: vec![("r".into(), 0.6), ("s".into(), 0.3)],
            pairs: vec![],
        };
        let w = generate_trace(&filler_only).unwrap();
        prop_assert_eq!(w.last_timestamp(), horizon);
        prop_assert!((w.sparseness() - sparseness).abs() <= 1.0 / (horizon + 1) as f64 + 1e-9);
        prop_assert_eq!(generate_trace(&filler_only).unwrap(), w);

        let mut paired = filler_only;
        paired.pairs.push(PairSpec { start: "p".into(), end: "q".into(), min_duration: min, max_duration: min + extra });
        let w = generate_trace(&paired).unwrap();
        let pairs = pair_instances(&expand(&w), "p", "q").unwrap();
        prop_assert!(pairs.iter().all(|p| (min..=min + extra).contains(&p.distance())));
    }
}
