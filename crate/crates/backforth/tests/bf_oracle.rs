//! Cross-validates the partition-refinement engine against oracles written
//! straight from the definitions: segment composition with the finite
//! threshold law for linear orders, and raw exponential recursion for tiny
//! digraphs.

mod common;

use backforth::bf::{bf_equiv, rho, scott_rank, BfTable};
use backforth::structure::{random_structure, Signature, Structure};
use common::{injective_tuples, lin_equiv_oracle, lin_rho_oracle, lin_sr_oracle, micro_equiv_oracle};

#[test]
fn linear_order_equiv_matches_gap_oracle() {
    for n1 in 1..=6usize {
        for n2 in 1..=6usize {
            let m1 = Structure::linear_order(n1).unwrap();
            let m2 = Structure::linear_order(n2).unwrap();
            let table = BfTable::build(&m1, &m2, 2).unwrap();
            for len in 0..=2.min(n1).min(n2) {
                for t1 in injective_tuples(n1, len) {
                    for t2 in injective_tuples(n2, len) {
                        for alpha in 0..=5u32 {
                            let engine = table.equiv(&t1, &t2, alpha as usize).unwrap();
                            let oracle = lin_equiv_oracle(n1, &t1, n2, &t2, alpha);
                            assert_eq!(
                                engine, oracle,
                                "n1={n1} n2={n2} t1={t1:?} t2={t2:?} alpha={alpha}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn linear_order_rho_matches_gap_oracle() {
    for n in 1..=6usize {
        let m = Structure::linear_order(n).unwrap();
        for len in 1..=2.min(n) {
            for t in injective_tuples(n, len) {
                let engine = rho(&m, &t).unwrap();
                let oracle = lin_rho_oracle(n, &t);
                assert_eq!(engine, oracle, "n={n} t={t:?}");
            }
        }
    }
}

#[test]
fn scott_rank_matches_gap_oracle_up_to_eight() {
    for n in 1..=8usize {
        let m = Structure::linear_order(n).unwrap();
        let engine = scott_rank(&m).unwrap().scott_rank;
        assert_eq!(engine, lin_sr_oracle(n), "L_{n}");
    }
}

#[test]
fn tiny_digraphs_match_raw_recursion() {
    let sig = Signature::binary("E");
    let mut checked = 0u32;
    for seed in 0..40u64 {
        let m1 = random_structure(seed, 1 + (seed as usize % 3), &sig, 0.4).unwrap();
        let m2 = random_structure(seed + 1000, 1 + ((seed as usize + 1) % 3), &sig, 0.6).unwrap();
        for len in 0..=2.min(m1.size()).min(m2.size()) {
            for t1 in injective_tuples(m1.size(), len) {
                for t2 in injective_tuples(m2.size(), len) {
                    for alpha in 0..=3u32 {
                        let engine = bf_equiv(&m1, &t1, &m2, &t2, alpha as usize).unwrap();
                        let oracle = micro_equiv_oracle(&m1, &t1, &m2, &t2, alpha);
                        assert_eq!(
                            engine, oracle,
                            "seed={seed} t1={t1:?} t2={t2:?} alpha={alpha}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 1000, "exercised {checked} comparisons");
}

#[test]
fn self_equivalence_at_every_level() {
    let sig = Signature::binary("E");
    for seed in 0..10u64 {
        let m = random_structure(seed, 4, &sig, 0.5).unwrap();
        for t in injective_tuples(4, 2) {
            for alpha in 0..=4 {
                assert!(bf_equiv(&m, &t, &m, &t, alpha).unwrap());
            }
        }
    }
}
