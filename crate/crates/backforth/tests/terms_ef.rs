//! Cross-module properties of the type engine and the normalizer: round
//! refinement, congruence under sum, the one-more-copy fixpoint, agreement
//! with the game solver, and normalizer consistency, all on seeded corpora.

mod common;

use backforth::ef::{ef_equiv, ef_type, game_solver, TypeArena};
use backforth::normal::{normalize, term_equal_in, TermVerdict};
use backforth::terms::{random_term, OrderTerm};
use common::{cnf_oracle, fin_threshold};
use rand_core::SeedableRng;

fn corpus(seed: u64, count: usize, depth: u32) -> Vec<OrderTerm> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_term(&mut rng, depth)).collect()
}

#[test]
fn equivalence_at_higher_rounds_refines_lower() {
    let mut arena = TypeArena::new();
    let terms = corpus(3, 60, 3);
    for (i, a) in terms.iter().enumerate() {
        for b in terms.iter().skip(i + 1).step_by(7) {
            for n in 1..=3u32 {
                let hi_a = ef_type(&mut arena, a, n + 1).unwrap();
                let hi_b = ef_type(&mut arena, b, n + 1).unwrap();
                if ef_equiv(&hi_a, &hi_b) {
                    let lo_a = ef_type(&mut arena, a, n).unwrap();
                    let lo_b = ef_type(&mut arena, b, n).unwrap();
                    assert!(ef_equiv(&lo_a, &lo_b), "{a} vs {b} at {n}");
                }
            }
        }
    }
}

#[test]
fn sum_respects_equivalence() {
    let mut arena = TypeArena::new();
    let terms = corpus(5, 40, 3);
    for n in 1..=4u32 {
        // bucket terms by round-n type, then check sums cross-bucket
        for a in terms.iter().step_by(3) {
            for a2 in terms.iter().step_by(5) {
                let ta = ef_type(&mut arena, a, n).unwrap();
                let ta2 = ef_type(&mut arena, a2, n).unwrap();
                if !ef_equiv(&ta, &ta2) {
                    continue;
                }
                for b in terms.iter().step_by(11) {
                    let left = OrderTerm::Sum(vec![a.clone(), b.clone()]);
                    let right = OrderTerm::Sum(vec![a2.clone(), b.clone()]);
                    let tl = ef_type(&mut arena, &left, n).unwrap();
                    let tr = ef_type(&mut arena, &right, n).unwrap();
                    assert!(ef_equiv(&tl, &tr), "{a} ~ {a2} but {left} !~ {right}");
                }
            }
        }
    }
}

#[test]
fn one_more_copy_is_absorbed_by_omega_power() {
    // t·ω versus t·m + t·ω: absorbing finitely many more copies in front
    // never changes any round's type
    let mut arena = TypeArena::new();
    for t in corpus(9, 30, 2) {
        let t_omega = OrderTerm::Prod(Box::new(t.clone()), Box::new(OrderTerm::Omega));
        for m in 1..=3u64 {
            let prefix = OrderTerm::Prod(Box::new(t.clone()), Box::new(OrderTerm::Fin(m)));
            let padded = OrderTerm::Sum(vec![prefix, t_omega.clone()]);
            for n in 1..=4u32 {
                let a = ef_type(&mut arena, &t_omega, n).unwrap();
                let b = ef_type(&mut arena, &padded, n).unwrap();
                assert!(ef_equiv(&a, &b), "{t_omega} vs {padded} at round {n}");
            }
        }
    }
}

#[test]
fn game_solver_agrees_with_type_engine_on_finite_orders() {
    let mut arena = TypeArena::new();
    for p in 0..=8u64 {
        for q in 0..=8u64 {
            for n in 1..=3u32 {
                let by_game = game_solver(p, q, n).unwrap();
                let ta = ef_type(&mut arena, &OrderTerm::Fin(p), n).unwrap();
                let tb = ef_type(&mut arena, &OrderTerm::Fin(q), n).unwrap();
                assert_eq!(by_game, ef_equiv(&ta, &tb), "p={p} q={q} n={n}");
                assert_eq!(by_game, fin_threshold(p, q, n), "threshold p={p} q={q} n={n}");
            }
        }
    }
}

#[test]
fn normalizer_preserves_types_spot_check() {
    let mut arena = TypeArena::new();
    for t in corpus(13, 300, 3) {
        let back = normalize(&t).term();
        for n in 1..=4u32 {
            let a = ef_type(&mut arena, &t, n).unwrap();
            let b = ef_type(&mut arena, &back, n).unwrap();
            assert!(ef_equiv(&a, &b), "{t} vs {back} at round {n}");
        }
    }
}

#[test]
fn term_equal_never_contradicts_the_type_engine() {
    let mut arena = TypeArena::new();
    let terms = corpus(17, 120, 3);
    for (i, a) in terms.iter().enumerate() {
        for b in terms.iter().skip(i + 1).step_by(13) {
            let verdict = term_equal_in(&mut arena, a, b, 4);
            if verdict == TermVerdict::Equal {
                for n in 1..=4u32 {
                    let ta = ef_type(&mut arena, a, n).unwrap();
                    let tb = ef_type(&mut arena, b, n).unwrap();
                    assert!(ef_equiv(&ta, &tb), "claimed equal: {a} vs {b} round {n}");
                }
            }
        }
    }
}

#[test]
fn cnf_oracle_matches_normalizer_on_ordinals() {
    use backforth::normal::Segment;
    for t in corpus(21, 400, 3) {
        let Some(cnf) = cnf_oracle(&t) else {
            continue;
        };
        let nf = normalize(&t);
        assert!(nf.is_pure_ordinal(), "{t}");
        let engine: Vec<(u64, u64)> = nf
            .segments()
            .iter()
            .map(|s| match s {
                Segment::Mono { exp, coeff } => (*exp, *coeff),
                other => panic!("pure form held {other:?}"),
            })
            .collect();
        assert_eq!(engine, cnf, "{t}");
    }
}
