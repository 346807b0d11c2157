//! The back-and-forth hierarchy between two finite structures, computed by
//! fixpoint partition refinement, and the ranks derived from it.
//!
//! Level 0 groups tuples by atomic type. Level a+1 groups two tuples together
//! when they share a level-a block and their sets of fresh one-point
//! extension blocks coincide. That set formulation is exactly the two
//! quantifier conditions of the defining clause: extension by an element
//! already in the tuple is forced onto the matching repeat on the other side
//! (repeats never separate tuples that share a block, and a repeat extension
//! can never match a fresh one because the equality pattern differs at level
//! zero). Limit levels do not exist at finite scale; the iteration simply
//! stops when the partition repeats.
//!
//! The internal domain is always the full set of injective tuples on each
//! side, up to each structure's size. The `max_len` cap bounds which tuples
//! may be queried, not what is computed: stabilization of short tuples
//! depends on longer ones, so truncating the domain would give wrong levels.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::structure::{atomic_type, Element, Structure, Tuple};

#[derive(Debug, Error)]
pub enum BfError {
    #[error("max tuple length {k} invalid: must be between 1 and {bound}")]
    InvalidMaxLen { k: usize, bound: usize },
    #[error("structures have different signatures")]
    SignatureMismatch,
    #[error("tuple lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("tuple support length {len} exceeds the table's max length {max}")]
    TupleTooLong { len: usize, max: usize },
    #[error("tuple {0:?} repeats an element")]
    NotInjective(Tuple),
    #[error("element {elem} out of range for size {size}")]
    OutOfRange { elem: usize, size: usize },
    #[error("structure too large for back-and-forth analysis: {tuples} injective tuples (limit {limit})")]
    TooLarge { tuples: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// All injective tuples over [0, n), ids assigned breadth-first by length and
/// lexicographically within a length. Children of a tuple (its one-point
/// fresh extensions, in ascending element order) occupy a contiguous id range
/// computable arithmetically, so no adjacency lists are stored.
struct SideArena {
    n: usize,
    len_start: Vec<usize>, // len_start[l] = first id of length l; last entry = total
    parent: Vec<u32>,
    last: Vec<u8>,
}

impl SideArena {
    fn build(n: usize) -> SideArena {
        let mut len_start = vec![0usize; n + 2];
        let mut count = 1usize;
        len_start[1] = 1;
        let mut level = count;
        for l in 0..n {
            level *= n - l;
            count += level;
            len_start[l + 2] = count;
        }
        let mut parent = vec![0u32; count];
        let mut last = vec![0u8; count];
        let mut frontier: Vec<(u32, Vec<u8>)> = vec![(0, Vec::new())];
        let mut next_id = 1u32;
        for _l in 0..n {
            let mut next = Vec::with_capacity(frontier.len() * n);
            for (id, tuple) in &frontier {
                for c in 0..n as u8 {
                    if tuple.contains(&c) {
                        continue;
                    }
                    parent[next_id as usize] = *id;
                    last[next_id as usize] = c;
                    let mut t = tuple.clone();
                    t.push(c);
                    next.push((next_id, t));
                    next_id += 1;
                }
            }
            frontier = next;
        }
        debug_assert_eq!(next_id as usize, count);
        SideArena { n, len_start, parent, last }
    }

    fn total(&self) -> usize {
        self.parent.len()
    }

    fn len_of(&self, id: usize) -> usize {
        // len_start is strictly increasing (every length has at least one tuple)
        match self.len_start.binary_search(&id) {
            Ok(l) => l,
            Err(l) => l - 1,
        }
    }

    fn tuple_of(&self, id: usize) -> Tuple {
        let mut out = Vec::new();
        let mut cur = id;
        while cur != 0 {
            out.push(self.last[cur] as usize);
            cur = self.parent[cur] as usize;
        }
        out.reverse();
        out
    }

    fn child_range(&self, id: usize, len: usize) -> std::ops::Range<usize> {
        let width = self.n - len;
        let start = self.len_start[len + 1] + (id - self.len_start[len]) * width;
        start..start + width
    }

    /// Id of an injective tuple; None when the tuple repeats an element.
    /// Elements must already be validated in range.
    fn id_of(&self, tuple: &[Element]) -> Option<usize> {
        let mut id = 0usize;
        let mut used: u64 = 0;
        for (l, &e) in tuple.iter().enumerate() {
            let bit = 1u64 << e;
            if used & bit != 0 {
                return None;
            }
            let rank = e - (used & (bit - 1)).count_ones() as usize;
            id = self.child_range(id, l).start + rank;
            used |= bit;
        }
        Some(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockSizes {
    pub left: u32,
    pub right: u32,
}

pub struct BfTable {
    k: usize,
    left_size: usize,
    right_size: usize,
    a_left: SideArena,
    a_right: SideArena,
    left_total: usize,
    /// levels[a][gid] = block number of tuple gid at level a; global ids are
    /// left arena ids followed by right arena ids shifted by left_total.
    levels: Vec<Vec<u32>>,
    /// per level, per block: tuple counts on each side
    sizes: Vec<Vec<BlockSizes>>,
    /// per level, per block: first global id (canonical representative)
    reps: Vec<Vec<u32>>,
    stable_at: usize,
}

const TUPLE_LIMIT: usize = 4_000_000;

impl BfTable {
    /// `k` caps the length of tuples that may be queried; levels are computed
    /// over the full injective domain regardless.
    pub fn build(m: &Structure, n: &Structure, k: usize) -> Result<BfTable, BfError> {
        let bound = m.size() + n.size();
        if k == 0 || k > bound {
            return Err(BfError::InvalidMaxLen { k, bound });
        }
        if m.sig() != n.sig() {
            return Err(BfError::SignatureMismatch);
        }
        let a_left = SideArena::build(m.size());
        let a_right = SideArena::build(n.size());
        let left_total = a_left.total();
        let total = left_total + a_right.total();
        if total > TUPLE_LIMIT {
            return Err(BfError::TooLarge { tuples: total, limit: TUPLE_LIMIT });
        }

        let side_of = |gid: usize| -> (Side, usize) {
            if gid < left_total {
                (Side::Left, gid)
            } else {
                (Side::Right, gid - left_total)
            }
        };

        // level 0: atomic types
        let mut level0 = vec![0u32; total];
        let mut reps0: Vec<u32> = Vec::new();
        {
            let mut blocks: HashMap<crate::structure::AtomicType, u32> = HashMap::new();
            for (gid, slot) in level0.iter_mut().enumerate() {
                let (side, id) = side_of(gid);
                let (s, arena) = match side {
                    Side::Left => (m, &a_left),
                    Side::Right => (n, &a_right),
                };
                let tuple = arena.tuple_of(id);
                let ty = atomic_type(s, &tuple).expect("arena tuples are in range");
                let next = blocks.len() as u32;
                *slot = *blocks.entry(ty).or_insert_with(|| {
                    reps0.push(gid as u32);
                    next
                });
            }
        }

        let mut levels = vec![level0];
        let mut reps = vec![reps0];

        loop {
            let prev = levels.last().expect("at least level 0");
            let mut next = vec![0u32; total];
            let mut reps_next: Vec<u32> = Vec::new();
            let mut blocks: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
            for gid in 0..total {
                let (side, id) = side_of(gid);
                let (arena, offset) = match side {
                    Side::Left => (&a_left, 0usize),
                    Side::Right => (&a_right, left_total),
                };
                let len = arena.len_of(id);
                let mut kids: Vec<u32> = if len < arena.n {
                    arena
                        .child_range(id, len)
                        .map(|cid| prev[cid + offset])
                        .collect()
                } else {
                    Vec::new()
                };
                kids.sort_unstable();
                kids.dedup();
                let sig = (prev[gid], kids);
                let fresh = blocks.len() as u32;
                let b = *blocks.entry(sig).or_insert_with(|| {
                    reps_next.push(gid as u32);
                    fresh
                });
                next[gid] = b;
            }
            if next == *prev {
                break;
            }
            levels.push(next);
            reps.push(reps_next);
        }

        let stable_at = levels.len() - 1;
        let sizes = levels
            .iter()
            .map(|lev| {
                let nblocks = lev.iter().copied().max().map_or(0, |b| b as usize + 1);
                let mut sz = vec![BlockSizes { left: 0, right: 0 }; nblocks];
                for (gid, &b) in lev.iter().enumerate() {
                    if gid < left_total {
                        sz[b as usize].left += 1;
                    } else {
                        sz[b as usize].right += 1;
                    }
                }
                sz
            })
            .collect();

        Ok(BfTable {
            k,
            left_size: m.size(),
            right_size: n.size(),
            a_left,
            a_right,
            left_total,
            levels,
            sizes,
            reps,
            stable_at,
        })
    }

    /// Default query cap: the larger structure size.
    pub fn build_default(m: &Structure, n: &Structure) -> Result<BfTable, BfError> {
        BfTable::build(m, n, m.size().max(n.size()).max(1))
    }

    pub fn max_len(&self) -> usize {
        self.k
    }

    pub fn stable_at(&self) -> usize {
        self.stable_at
    }

    /// Number of stored levels (stable_at + 1); higher levels repeat the last.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn blocks_in_level(&self, alpha: usize) -> usize {
        self.sizes[alpha.min(self.stable_at)].len()
    }

    fn side_data(&self, side: Side) -> (&SideArena, usize, usize) {
        match side {
            Side::Left => (&self.a_left, 0, self.left_size),
            Side::Right => (&self.a_right, self.left_total, self.right_size),
        }
    }

    fn check_elements(&self, side: Side, tuple: &[Element]) -> Result<(), BfError> {
        let (_, _, size) = self.side_data(side);
        for &e in tuple {
            if e >= size {
                return Err(BfError::OutOfRange { elem: e, size });
            }
        }
        Ok(())
    }

    /// Injective support (first occurrences in order) and the position
    /// pattern mapping each position to its support index.
    fn support(tuple: &[Element]) -> (Tuple, Vec<usize>) {
        let mut support = Vec::new();
        let mut pattern = Vec::with_capacity(tuple.len());
        for &e in tuple {
            match support.iter().position(|&s| s == e) {
                Some(i) => pattern.push(i),
                None => {
                    pattern.push(support.len());
                    support.push(e);
                }
            }
        }
        (support, pattern)
    }

    fn gid_of(&self, side: Side, injective: &[Element]) -> Result<usize, BfError> {
        let (arena, offset, _) = self.side_data(side);
        if injective.len() > self.k {
            return Err(BfError::TupleTooLong { len: injective.len(), max: self.k });
        }
        let id = arena.id_of(injective).expect("support tuples are injective");
        Ok(id + offset)
    }

    /// Block of an injective tuple at a level (levels beyond stabilization
    /// repeat the stable partition).
    pub fn block(&self, side: Side, tuple: &[Element], alpha: usize) -> Result<u32, BfError> {
        self.check_elements(side, tuple)?;
        let (support, _) = BfTable::support(tuple);
        if support.len() != tuple.len() {
            return Err(BfError::NotInjective(tuple.to_vec()));
        }
        let gid = self.gid_of(side, tuple)?;
        Ok(self.levels[alpha.min(self.stable_at)][gid])
    }

    /// Lexicographically least tuple of a block (left side wins ties, shorter
    /// tuples come first by id order).
    pub fn block_repr(&self, alpha: usize, block: u32) -> Option<(Side, Tuple)> {
        let a = alpha.min(self.stable_at);
        let gid = *self.reps[a].get(block as usize)? as usize;
        if gid < self.left_total {
            Some((Side::Left, self.a_left.tuple_of(gid)))
        } else {
            Some((Side::Right, self.a_right.tuple_of(gid - self.left_total)))
        }
    }

    /// Whether (left, a) ~_alpha (right, b). Arbitrary tuples are reduced to
    /// their injective supports; supports must fit under the query cap.
    pub fn equiv(&self, a: &[Element], b: &[Element], alpha: usize) -> Result<bool, BfError> {
        if a.len() != b.len() {
            return Err(BfError::LengthMismatch { left: a.len(), right: b.len() });
        }
        self.check_elements(Side::Left, a)?;
        self.check_elements(Side::Right, b)?;
        let (sa, pa) = BfTable::support(a);
        let (sb, pb) = BfTable::support(b);
        if pa != pb {
            // different equality patterns: distinct already at level 0
            return Ok(false);
        }
        let ga = self.gid_of(Side::Left, &sa)?;
        let gb = self.gid_of(Side::Right, &sb)?;
        let lev = &self.levels[alpha.min(self.stable_at)];
        Ok(lev[ga] == lev[gb])
    }

    fn rho_gid(&self, side: Side, gid: usize) -> u32 {
        let pick = |s: &BlockSizes| match side {
            Side::Left => s.left,
            Side::Right => s.right,
        };
        let stable_size =
            pick(&self.sizes[self.stable_at][self.levels[self.stable_at][gid] as usize]);
        for alpha in 0..=self.stable_at {
            let b = self.levels[alpha][gid] as usize;
            if pick(&self.sizes[alpha][b]) == stable_size {
                return alpha as u32;
            }
        }
        unreachable!("stable level always matches its own size")
    }

    /// Least level from which the tuple's class never shrinks again,
    /// restricted to its own side. Non-injective tuples use their support.
    pub fn rho(&self, side: Side, tuple: &[Element]) -> Result<u32, BfError> {
        self.check_elements(side, tuple)?;
        let (support, _) = BfTable::support(tuple);
        let gid = self.gid_of(side, &support)?;
        Ok(self.rho_gid(side, gid))
    }

    /// Rank report over the left structure. The rho list covers injective
    /// tuples up to the query cap, but R and SR are maxima over all lengths
    /// (capping the listing must not understate the rank).
    pub fn rank_report(&self) -> RankReport {
        let upper = self.k.min(self.left_size);
        let mut entries: Vec<RhoEntry> = (0..self.a_left.len_start[upper + 1])
            .map(|id| RhoEntry {
                tuple: self.a_left.tuple_of(id),
                rho: self.rho_gid(Side::Left, id),
            })
            .collect();
        entries.sort_by(|a, b| a.tuple.cmp(&b.tuple));
        let r_rank = (0..self.left_total)
            .map(|id| self.rho_gid(Side::Left, id))
            .max()
            .unwrap_or(0);
        RankReport {
            scott_rank: r_rank + 1,
            r_rank,
            rho: entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RhoEntry {
    pub tuple: Tuple,
    pub rho: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    pub scott_rank: u32,
    pub r_rank: u32,
    pub rho: Vec<RhoEntry>,
}

impl RankReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("rank report serialization")
    }
}

/// One-shot (M, a) ~_alpha (N, b), building the table with the default cap.
pub fn bf_equiv(
    m: &Structure,
    a: &[Element],
    n: &Structure,
    b: &[Element],
    alpha: usize,
) -> Result<bool, BfError> {
    BfTable::build_default(m, n)?.equiv(a, b, alpha)
}

/// One-shot rho within a single structure.
pub fn rho(m: &Structure, tuple: &[Element]) -> Result<u32, BfError> {
    BfTable::build_default(m, m)?.rho(Side::Left, tuple)
}

/// Full rank report for a structure: every injective tuple's rho, R = max,
/// SR = max + 1 (the empty tuple is included).
pub fn scott_rank(m: &Structure) -> Result<RankReport, BfError> {
    Ok(BfTable::build_default(m, m)?.rank_report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Signature;

    fn l(n: usize) -> Structure {
        Structure::linear_order(n).unwrap()
    }

    #[test]
    fn arena_roundtrip() {
        let a = SideArena::build(4);
        assert_eq!(a.total(), 1 + 4 + 12 + 24 + 24);
        for id in 0..a.total() {
            let t = a.tuple_of(id);
            assert_eq!(a.id_of(&t), Some(id));
            assert_eq!(a.len_of(id), t.len());
        }
        assert_eq!(a.id_of(&[1, 1]), None);
    }

    #[test]
    fn level_one_separates_middle_of_l3_even_with_cap_one() {
        let l3 = l(3);
        let t = BfTable::build(&l3, &l3, 1).unwrap();
        assert!(t.equiv(&[0], &[2], 0).unwrap());
        assert!(t.equiv(&[0], &[1], 0).unwrap());
        assert!(!t.equiv(&[0], &[1], 1).unwrap());
        assert!(!t.equiv(&[2], &[1], 1).unwrap());
        // endpoints of a linear order are not back-and-forth equivalent:
        // one extends upward, the other downward
        assert!(!t.equiv(&[0], &[2], 1).unwrap());
    }

    #[test]
    fn empty_tuples_on_l2_l3() {
        let t = BfTable::build_default(&l(2), &l(3)).unwrap();
        assert!(t.equiv(&[], &[], 1).unwrap());
        assert!(!t.equiv(&[], &[], 2).unwrap());
    }

    #[test]
    fn reflexivity_at_any_level() {
        let l4 = l(4);
        let t = BfTable::build_default(&l4, &l4).unwrap();
        for alpha in 0..10 {
            assert!(t.equiv(&[2, 0], &[2, 0], alpha).unwrap());
            assert!(t.equiv(&[], &[], alpha).unwrap());
        }
    }

    #[test]
    fn non_injective_tuples_reduce_to_supports() {
        let l3 = l(3);
        let t = BfTable::build_default(&l3, &l3).unwrap();
        assert!(t.equiv(&[0, 0, 1], &[0, 0, 1], 5).unwrap());
        // same support, different pattern
        assert!(!t.equiv(&[0, 0, 1], &[0, 1, 1], 0).unwrap());
        // repeats match repeats of equivalent supports
        assert!(t.equiv(&[1, 1], &[1, 1], 3).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let l2 = l(2);
        let t = BfTable::build_default(&l2, &l2).unwrap();
        assert!(matches!(
            t.equiv(&[0], &[0, 1], 1),
            Err(BfError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn cap_zero_rejected() {
        let l2 = l(2);
        assert!(matches!(
            BfTable::build(&l2, &l2, 0),
            Err(BfError::InvalidMaxLen { .. })
        ));
        assert!(matches!(
            BfTable::build(&l2, &l2, 5),
            Err(BfError::InvalidMaxLen { .. })
        ));
    }

    #[test]
    fn signature_mismatch_rejected() {
        let a = Structure::digraph(2, "E", &[]).unwrap();
        let b = Structure::digraph(2, "R", &[]).unwrap();
        assert!(matches!(
            BfTable::build_default(&a, &b),
            Err(BfError::SignatureMismatch)
        ));
    }

    #[test]
    fn scott_rank_single_point() {
        let m = Structure::digraph(1, "E", &[]).unwrap();
        let r = scott_rank(&m).unwrap();
        assert_eq!(r.scott_rank, 1);
        assert_eq!(r.r_rank, 0);
        assert_eq!(r.rho.len(), 2); // empty tuple and (0)
    }

    #[test]
    fn scott_rank_edgeless() {
        for n in 1..=6 {
            let m = Structure::digraph(n, "E", &[]).unwrap();
            let r = scott_rank(&m).unwrap();
            assert_eq!(r.scott_rank, 1, "edgeless on {n} nodes");
        }
    }

    #[test]
    fn scott_rank_three_cycle_is_one() {
        let m = Structure::digraph(3, "R", &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let r = scott_rank(&m).unwrap();
        assert_eq!(r.r_rank, 0);
        assert_eq!(r.scott_rank, 1);
    }

    #[test]
    fn scott_ranks_of_small_linear_orders() {
        let expect = [(1, 1), (2, 2), (3, 2), (4, 3)];
        for (n, sr) in expect {
            let r = scott_rank(&l(n)).unwrap();
            assert_eq!(r.scott_rank, sr, "SR(L_{n})");
        }
    }

    #[test]
    fn rho_of_l4_endpoint() {
        assert_eq!(rho(&l(4), &[0]).unwrap(), 1);
    }

    #[test]
    fn rank_report_json_shape() {
        let m = Structure::digraph(1, "E", &[]).unwrap();
        let r = scott_rank(&m).unwrap();
        assert_eq!(
            r.to_json(),
            r#"{"scott_rank":1,"r_rank":0,"rho":[{"tuple":[],"rho":0},{"tuple":[0],"rho":0}]}"#
        );
    }

    #[test]
    fn rigid_structure_stable_blocks_are_side_paired_singletons() {
        let l3 = l(3);
        let t = BfTable::build_default(&l3, &l3).unwrap();
        let stable = t.stable_at();
        // every full-length tuple sits in a block containing exactly itself
        // on each side
        let sz = &t.sizes[stable];
        for id in 0..t.left_total {
            if t.a_left.len_of(id) == 3 {
                let b = t.levels[stable][id] as usize;
                assert_eq!((sz[b].left, sz[b].right), (1, 1));
            }
        }
    }

    #[test]
    fn monotone_refinement() {
        let sig = Signature::binary("E");
        for seed in 0..10u64 {
            let m = crate::structure::random_structure(seed, 4, &sig, 0.4).unwrap();
            let n = crate::structure::random_structure(seed + 100, 4, &sig, 0.4).unwrap();
            let t = BfTable::build_default(&m, &n).unwrap();
            for a in 0..4usize {
                for b in 0..4usize {
                    for alpha in 0..t.stable_at() + 2 {
                        let hi = t.equiv(&[a], &[b], alpha + 1).unwrap();
                        let lo = t.equiv(&[a], &[b], alpha).unwrap();
                        assert!(!hi || lo, "refinement violated at {alpha}");
                    }
                }
            }
        }
    }

    #[test]
    fn blocks_never_mix_lengths_or_sides_inconsistently() {
        let t = BfTable::build_default(&l(2), &l(3)).unwrap();
        // spot check: cross-length tuples never share a level-0 block
        assert_ne!(
            t.block(Side::Left, &[0], 0).unwrap(),
            t.block(Side::Left, &[0, 1], 0).unwrap()
        );
    }

    #[test]
    fn block_repr_is_first_seen() {
        let l3 = l(3);
        let t = BfTable::build_default(&l3, &l3).unwrap();
        let b = t.block(Side::Left, &[], 0).unwrap();
        assert_eq!(t.block_repr(0, b), Some((Side::Left, vec![])));
    }
}
