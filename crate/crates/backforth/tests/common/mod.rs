//! Shared oracles for the integration suites. Everything here is written
//! from the definitions directly, on independent code paths from the
//! library, so disagreements point at real bugs rather than shared ones.
//!
//! Each test target compiles this module on its own, so helpers a given
//! target does not touch would otherwise warn.
#![allow(dead_code)]

use backforth::structure::{atomic_type, Element, Structure};
use backforth::terms::OrderTerm;

/// Threshold law for finite linear orders: Fin(p) and Fin(q) survive n
/// rounds iff they are equal or both at least 2^n - 1.
pub fn fin_threshold(p: u64, q: u64, n: u32) -> bool {
    p == q || p.min(q) >= (1u64 << n.min(62)) - 1
}

fn argsort(tuple: &[Element]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tuple.len()).collect();
    idx.sort_by_key(|&i| tuple[i]);
    idx
}

/// Gap vector of an injective tuple inside the linear order [0, n): the
/// leading gap, the gaps between consecutive pinned points, and the
/// trailing gap.
fn gaps(n: usize, tuple: &[Element]) -> Vec<u64> {
    let mut sorted: Vec<Element> = tuple.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::with_capacity(tuple.len() + 1);
    let mut prev = 0;
    for &p in &sorted {
        out.push((p - prev) as u64);
        prev = p + 1;
    }
    out.push((n - prev) as u64);
    out
}

/// Level-alpha back-and-forth equivalence of pinned finite linear orders,
/// by segment composition: the pins must sit in the same relative order and
/// every gap pair must satisfy the finite threshold law.
pub fn lin_equiv_oracle(
    n1: usize,
    t1: &[Element],
    n2: usize,
    t2: &[Element],
    alpha: u32,
) -> bool {
    if t1.len() != t2.len() {
        return false;
    }
    if argsort(t1) != argsort(t2) {
        return false;
    }
    gaps(n1, t1)
        .into_iter()
        .zip(gaps(n2, t2))
        .all(|(g, h)| fin_threshold(g, h, alpha))
}

/// Least alpha at which the tuple's equivalence class among same-length
/// injective tuples of the same order stops shrinking.
pub fn lin_rho_oracle(n: usize, tuple: &[Element]) -> u32 {
    let peers = injective_tuples(n, tuple.len());
    for alpha in 0.. {
        if peers.iter().all(|b| {
            lin_equiv_oracle(n, tuple, n, b, alpha) == lin_equiv_oracle(n, tuple, n, b, alpha + 1)
        }) {
            return alpha;
        }
    }
    unreachable!("finite orders stabilize");
}

/// Scott rank of the linear order [0, n) from the rho oracle over tuples of
/// length at most 2 (longer tuples only shrink gaps, hence never raise rho).
pub fn lin_sr_oracle(n: usize) -> u32 {
    let mut best = 0;
    for len in 0..=2.min(n) {
        for t in injective_tuples(n, len) {
            best = best.max(lin_rho_oracle(n, &t));
        }
    }
    best + 1
}

pub fn injective_tuples(n: usize, len: usize) -> Vec<Vec<Element>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for t in &out {
            for e in 0..n {
                if !t.contains(&e) {
                    let mut t2 = t.clone();
                    t2.push(e);
                    next.push(t2);
                }
            }
        }
        out = next;
    }
    out
}

/// Raw recursive back-and-forth equivalence, straight from the definition:
/// atomic types agree at level 0, and at level alpha+1 every one-point
/// extension on either side has a matching extension on the other at level
/// alpha. Exponential, only usable on tiny structures.
pub fn micro_equiv_oracle(
    m1: &Structure,
    t1: &[Element],
    m2: &Structure,
    t2: &[Element],
    alpha: u32,
) -> bool {
    if t1.len() != t2.len() {
        return false;
    }
    if atomic_type(m1, t1).unwrap() != atomic_type(m2, t2).unwrap() {
        return false;
    }
    if alpha == 0 {
        return true;
    }
    let forth = (0..m1.size()).all(|c| {
        (0..m2.size()).any(|d| {
            let mut e1 = t1.to_vec();
            e1.push(c);
            let mut e2 = t2.to_vec();
            e2.push(d);
            micro_equiv_oracle(m1, &e1, m2, &e2, alpha - 1)
        })
    });
    let back = (0..m2.size()).all(|d| {
        (0..m1.size()).any(|c| {
            let mut e1 = t1.to_vec();
            e1.push(c);
            let mut e2 = t2.to_vec();
            e2.push(d);
            micro_equiv_oracle(m1, &e1, m2, &e2, alpha - 1)
        })
    });
    forth && back
}

/// Cantor normal form as a descending list of (exponent, coefficient)
/// pairs, computed by direct ordinal arithmetic. None when the term leaves
/// the ordinal fragment. Independent of the library normalizer.
pub type Cnf = Vec<(u64, u64)>;

pub fn cnf_oracle(t: &OrderTerm) -> Option<Cnf> {
    match t {
        OrderTerm::Fin(0) => Some(vec![]),
        OrderTerm::Fin(k) => Some(vec![(0, *k)]),
        OrderTerm::Omega => Some(vec![(1, 1)]),
        OrderTerm::Eta => None,
        OrderTerm::Sum(parts) => {
            let mut acc = vec![];
            for p in parts {
                acc = cnf_add(acc, cnf_oracle(p)?);
            }
            Some(acc)
        }
        OrderTerm::Prod(a, b) => {
            let left = cnf_oracle(a)?;
            match b.as_ref() {
                OrderTerm::Fin(k) => Some(cnf_mul_fin(left, *k)),
                OrderTerm::Omega => Some(cnf_mul_omega(left)),
                _ => None,
            }
        }
    }
}

pub fn cnf_add(a: Cnf, b: Cnf) -> Cnf {
    let Some(&(lead, _)) = b.first() else {
        return a;
    };
    // everything in a strictly below b's lead is absorbed
    let mut out: Cnf = a.into_iter().take_while(|&(e, _)| e >= lead).collect();
    for (e, c) in b {
        match out.last_mut() {
            Some(&mut (le, ref mut lc)) if le == e => *lc += c,
            _ => out.push((e, c)),
        }
    }
    out
}

fn cnf_mul_fin(a: Cnf, k: u64) -> Cnf {
    match k {
        0 => vec![],
        _ => {
            let mut out = a;
            if let Some(first) = out.first_mut() {
                first.1 *= k;
            }
            out
        }
    }
}

fn cnf_mul_omega(a: Cnf) -> Cnf {
    match a.first() {
        None => vec![],
        Some(&(e, _)) => vec![(e + 1, 1)],
    }
}
