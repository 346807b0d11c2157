//! Round-indexed back-and-forth types for the linear orders denoted by
//! `OrderTerm`, built compositionally, plus a tiny explicit game solver used
//! to cross-check the composition on finite orders.
//!
//! The n-round type of a linear order A is the set of pairs
//! (type_{n-1}(A_{<a}), type_{n-1}(A_{>a})) over all elements a, with a
//! single trivial type at round 0. Two orders are n-round equivalent exactly
//! when their n-types coincide, so interning the type trees gives a complete
//! invariant: equivalence becomes id equality. Sums, products by a finite
//! order, products by ω, and products by η all act on types directly, which
//! is what lets us type infinite orders without building them.
//!
//! Finite orders are clamped: beyond max(2^n + 1, 33) elements all finite
//! orders share their n-type, and the clamp threshold exceeds the 2^n - 1
//! equivalence threshold, so clamping never merges types of inequivalent
//! orders. It follows that a type separation is always a genuine one.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::terms::{OrderTerm, TermError};

/// Default search depth for equality witnesses.
pub const DEFAULT_MAX_ROUNDS: u32 = 6;
/// Explicit game solver accepts orders up to this size.
pub const MAX_GAME_SIZE: u64 = 10;
/// Explicit game solver accepts at most this many rounds.
pub const MAX_GAME_ROUNDS: u32 = 4;

const CHAIN_GUARD: usize = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EfError {
    #[error("game solver bounds are sizes up to {MAX_GAME_SIZE} and up to {MAX_GAME_ROUNDS} rounds")]
    GameBounds,
    #[error("type construction exceeded the internal chain guard")]
    ChainGuard,
    #[error(transparent)]
    Term(#[from] TermError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct EfNode {
    round: u32,
    /// Sorted, deduplicated (left, right) pairs of round-(n-1) type ids.
    splits: Vec<(u32, u32)>,
}

/// Handle to an interned type. Compare with `ef_equiv`, never structurally:
/// the round-0 type is deliberately shared by every order, including the
/// empty one, and only the handle remembers emptiness.
#[derive(Debug, Clone, Copy)]
pub struct EfType {
    id: u32,
    round: u32,
    empty: bool,
}

impl EfType {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

/// n-round equivalence of the underlying orders. Sound and complete for
/// types built at the same round; types from different rounds are never
/// equivalent (they are different invariants).
pub fn ef_equiv(a: &EfType, b: &EfType) -> bool {
    a.id == b.id
}

/// Interning arena with composition caches. One arena can serve any number
/// of terms and rounds; ids are stable for its lifetime.
pub struct TypeArena {
    nodes: Vec<EfNode>,
    index: HashMap<EfNode, u32>,
    sums: HashMap<(u32, u32), u32>,
    projs: HashMap<u32, u32>,
    omegas: HashMap<u32, u32>,
    etas: HashMap<u32, u32>,
    fins: HashMap<(u64, u32), u32>,
    terms: HashMap<(OrderTerm, u32), u32>,
}

impl Default for TypeArena {
    fn default() -> Self {
        Self::new()
    }
}

fn clamp_for(round: u32) -> u64 {
    ((1u64 << round.min(62)) + 1).max(33)
}

impl TypeArena {
    pub fn new() -> Self {
        let mut arena = TypeArena {
            nodes: Vec::new(),
            index: HashMap::new(),
            sums: HashMap::new(),
            projs: HashMap::new(),
            omegas: HashMap::new(),
            etas: HashMap::new(),
            fins: HashMap::new(),
            terms: HashMap::new(),
        };
        // the shared trivial round-0 type gets id 0
        arena.intern(EfNode {
            round: 0,
            splits: vec![],
        });
        arena
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the trivial type is always present
    }

    fn intern(&mut self, mut node: EfNode) -> u32 {
        node.splits.sort_unstable();
        node.splits.dedup();
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    fn round_of(&self, id: u32) -> u32 {
        self.nodes[id as usize].round
    }

    fn splits_of(&self, id: u32) -> Vec<(u32, u32)> {
        self.nodes[id as usize].splits.clone()
    }

    /// Type of the finite order with m elements (clamped).
    fn fin(&mut self, m: u64, round: u32) -> u32 {
        if round == 0 {
            return 0;
        }
        let m = m.min(clamp_for(round));
        if let Some(&id) = self.fins.get(&(m, round)) {
            return id;
        }
        let mut splits = Vec::with_capacity(m as usize);
        for i in 0..m {
            let left = self.fin(i, round - 1);
            let right = self.fin(m - 1 - i, round - 1);
            splits.push((left, right));
        }
        let id = self.intern(EfNode { round, splits });
        self.fins.insert((m, round), id);
        id
    }

    /// Restriction of a round-n type to round n-1: project every split.
    fn proj(&mut self, x: u32) -> u32 {
        let round = self.round_of(x);
        assert!(round >= 1, "no projection below round 0");
        if round == 1 {
            return 0;
        }
        if let Some(&id) = self.projs.get(&x) {
            return id;
        }
        let splits = self
            .splits_of(x)
            .into_iter()
            .map(|(l, r)| (self.proj(l), self.proj(r)))
            .collect();
        let id = self.intern(EfNode {
            round: round - 1,
            splits,
        });
        self.projs.insert(x, id);
        id
    }

    /// Type of A + B from the types of A and B (same round). A split lands
    /// in the left summand (carrying all of B on the right) or in the right
    /// summand (carrying all of A on the left).
    fn sum(&mut self, x: u32, y: u32) -> u32 {
        let round = self.round_of(x);
        debug_assert_eq!(round, self.round_of(y), "sum of types at equal rounds");
        if round == 0 {
            return 0;
        }
        if let Some(&id) = self.sums.get(&(x, y)) {
            return id;
        }
        let px = self.proj(x);
        let py = self.proj(y);
        let mut splits = Vec::new();
        for (l, r) in self.splits_of(x) {
            let right = self.sum(r, py);
            splits.push((l, right));
        }
        for (l, r) in self.splits_of(y) {
            let left = self.sum(px, l);
            splits.push((left, r));
        }
        let id = self.intern(EfNode { round, splits });
        self.sums.insert((x, y), id);
        id
    }

    /// Type of T·ω from the type of T. An element sits in copy j, so its
    /// left part is T·j plus a left part of T, and its right part is a right
    /// part of T followed by a fresh T·ω tail. The partial sums T·j range
    /// over finitely many types.
    fn omega_power(&mut self, x: u32) -> Result<u32, EfError> {
        let round = self.round_of(x);
        if round == 0 {
            return Ok(0);
        }
        if let Some(&id) = self.omegas.get(&x) {
            return Ok(id);
        }
        let px = self.proj(x);
        let w_tail = self.omega_power(px)?;
        let mut partials = Vec::new();
        let mut s = self.fin(0, round - 1);
        while !partials.contains(&s) {
            partials.push(s);
            s = self.sum(s, px);
            if partials.len() > CHAIN_GUARD {
                return Err(EfError::ChainGuard);
            }
        }
        let mut splits = Vec::new();
        for &p in &partials {
            for (l, r) in self.splits_of(x) {
                let left = self.sum(p, l);
                let right = self.sum(r, w_tail);
                splits.push((left, right));
            }
        }
        let id = self.intern(EfNode { round, splits });
        self.omegas.insert(x, id);
        Ok(id)
    }

    /// Type of T·η from the type of T. The copies below a fixed copy form
    /// T·η again (η is dense without endpoints below any point), and the
    /// copies above likewise, so both flanks reuse the round-(n-1) answer.
    fn eta_power(&mut self, x: u32) -> u32 {
        let round = self.round_of(x);
        if round == 0 {
            return 0;
        }
        if let Some(&id) = self.etas.get(&x) {
            return id;
        }
        let px = self.proj(x);
        let flank = self.eta_power(px);
        let mut splits = Vec::new();
        for (l, r) in self.splits_of(x) {
            let left = self.sum(flank, l);
            let right = self.sum(r, flank);
            splits.push((left, right));
        }
        let id = self.intern(EfNode { round, splits });
        self.etas.insert(x, id);
        id
    }

    /// Type of T·k by iterated sum with cycle detection, so k may be huge.
    fn fin_times(&mut self, x: u32, k: u64, round: u32) -> Result<u32, EfError> {
        if k == 0 || round == 0 {
            return Ok(self.fin(0, round));
        }
        // history[i] holds the type of T·(i+1)
        let mut history = vec![x];
        loop {
            if k - 1 < history.len() as u64 {
                return Ok(history[(k - 1) as usize]);
            }
            let last = *history.last().expect("nonempty");
            let next = self.sum(last, x);
            if let Some(pos) = history.iter().position(|&h| h == next) {
                // periodic from pos on, with this period
                let period = (history.len() - pos) as u64;
                let idx = pos as u64 + (k - 1 - pos as u64) % period;
                return Ok(history[idx as usize]);
            }
            history.push(next);
            if history.len() > CHAIN_GUARD {
                return Err(EfError::ChainGuard);
            }
        }
    }

    fn type_of(&mut self, t: &OrderTerm, round: u32) -> Result<u32, EfError> {
        if round == 0 {
            return Ok(0);
        }
        if let Some(&id) = self.terms.get(&(t.clone(), round)) {
            return Ok(id);
        }
        let id = match t {
            OrderTerm::Fin(m) => self.fin(*m, round),
            OrderTerm::Omega => {
                let one = self.fin(1, round);
                self.omega_power(one)?
            }
            OrderTerm::Eta => {
                let one = self.fin(1, round);
                self.eta_power(one)
            }
            OrderTerm::Sum(parts) => {
                let mut acc = self.fin(0, round);
                for p in parts {
                    let tp = self.type_of(p, round)?;
                    acc = self.sum(acc, tp);
                }
                acc
            }
            OrderTerm::Prod(a, b) => {
                let ta = self.type_of(a, round)?;
                match b.as_ref() {
                    OrderTerm::Fin(k) => self.fin_times(ta, *k, round)?,
                    OrderTerm::Omega => self.omega_power(ta)?,
                    OrderTerm::Eta => self.eta_power(ta),
                    _ if **b == OrderTerm::one_plus_eta() => {
                        let dense = self.eta_power(ta);
                        self.sum(ta, dense)
                    }
                    other => {
                        return Err(EfError::Term(TermError::UnsupportedRightFactor(
                            other.to_string(),
                        )))
                    }
                }
            }
        };
        self.terms.insert((t.clone(), round), id);
        Ok(id)
    }
}

fn term_is_empty(t: &OrderTerm) -> bool {
    match t {
        OrderTerm::Fin(n) => *n == 0,
        OrderTerm::Omega | OrderTerm::Eta => false,
        OrderTerm::Sum(parts) => parts.iter().all(term_is_empty),
        OrderTerm::Prod(a, b) => term_is_empty(a) || term_is_empty(b),
    }
}

/// The n-round type of the order denoted by the term.
pub fn ef_type(arena: &mut TypeArena, t: &OrderTerm, round: u32) -> Result<EfType, EfError> {
    t.validate()?;
    let id = arena.type_of(t, round)?;
    Ok(EfType {
        id,
        round,
        empty: term_is_empty(t),
    })
}

/// Readable rendering of a type's node graph: one line per reachable node,
/// children before parents, root last.
pub fn format_type(arena: &TypeArena, t: &EfType) -> String {
    let mut reach = BTreeSet::new();
    let mut stack = vec![t.id];
    while let Some(id) = stack.pop() {
        if reach.insert(id) {
            for &(l, r) in &arena.nodes[id as usize].splits {
                stack.push(l);
                stack.push(r);
            }
        }
    }
    let mut out = String::new();
    for &id in &reach {
        let node = &arena.nodes[id as usize];
        out.push_str(&format!("type {} round {}:", id, node.round));
        if node.splits.is_empty() {
            out.push_str(" no splits");
        } else {
            for &(l, r) in &node.splits {
                out.push_str(&format!(" ({l},{r})"));
            }
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "root {} round {} empty {}\n",
        t.id, t.round, t.empty
    ));
    out
}

/// Pebble configuration plus rounds remaining, for the game solver's memo.
type GameMemo = HashMap<(Vec<(u8, u8)>, u32), bool>;

/// Explicit alternating-move game on a pair of finite orders, memoized over
/// pebble configurations. Exists to validate the type machinery on the small
/// grid, so it deliberately shares no code with it.
pub fn game_solver(p: u64, q: u64, rounds: u32) -> Result<bool, EfError> {
    if p > MAX_GAME_SIZE || q > MAX_GAME_SIZE || rounds > MAX_GAME_ROUNDS {
        return Err(EfError::GameBounds);
    }
    let mut memo: GameMemo = HashMap::new();
    fn consistent(pairs: &BTreeSet<(u8, u8)>, a: u8, b: u8) -> bool {
        pairs
            .iter()
            .all(|&(x, y)| (a < x) == (b < y) && (a == x) == (b == y))
    }
    fn duplicator_wins(
        pairs: &BTreeSet<(u8, u8)>,
        r: u32,
        p: u8,
        q: u8,
        memo: &mut GameMemo,
    ) -> bool {
        if r == 0 {
            return true;
        }
        let key = (pairs.iter().copied().collect::<Vec<_>>(), r);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut ok = true;
        'spoiler: for a in 0..p {
            let mut answered = false;
            for b in 0..q {
                if consistent(pairs, a, b) {
                    let mut next = pairs.clone();
                    next.insert((a, b));
                    if duplicator_wins(&next, r - 1, p, q, memo) {
                        answered = true;
                        break;
                    }
                }
            }
            if !answered {
                ok = false;
                break 'spoiler;
            }
        }
        if ok {
            'spoiler2: for b in 0..q {
                let mut answered = false;
                for a in 0..p {
                    if consistent(pairs, a, b) {
                        let mut next = pairs.clone();
                        next.insert((a, b));
                        if duplicator_wins(&next, r - 1, p, q, memo) {
                            answered = true;
                            break;
                        }
                    }
                }
                if !answered {
                    ok = false;
                    break 'spoiler2;
                }
            }
        }
        memo.insert(key, ok);
        ok
    }
    Ok(duplicator_wins(
        &BTreeSet::new(),
        rounds,
        p as u8,
        q as u8,
        &mut memo,
    ))
}
