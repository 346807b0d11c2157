//! Hash-consed formula DAGs over relational signatures, with finite
//! evaluation, quantifier rank, the per-tuple canonical formulas of the
//! back-and-forth analysis, and the canonical sentence of a structure.
//!
//! Connectives are finitely branching lists; conjunction and disjunction
//! children are deduplicated and sorted by node id at interning time, which
//! makes structurally equal formulas pointer-equal and output byte-stable.
//! Formulas have no constant terms, so structures whose signature declares
//! constants are rejected by the formula builders (the table machinery in
//! `bf` handles constants fine).

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::bf::{scott_rank, BfError};
use crate::structure::{
    atom_holds, enumerate_atoms, validate_name, Atom, AtomTerm, Element, Structure, StructureError,
    Tuple,
};

/// Variable indices live below this bound so free-variable sets fit a bitmask.
pub const MAX_VARS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormulaId(u32);

impl FormulaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FormulaNode {
    Atom { rel: String, args: Vec<u32> },
    Equal(u32, u32),
    Not(FormulaId),
    Conj(Vec<FormulaId>),
    Disj(Vec<FormulaId>),
    Exists(u32, FormulaId),
    Forall(u32, FormulaId),
}

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("variable v{0} exceeds the limit of {MAX_VARS} variables")]
    VarLimit(u32),
    #[error("formula construction does not support signatures with constants")]
    ConstantsUnsupported,
    #[error("element {elem} out of range for size {size}")]
    ElementOutOfRange { elem: usize, size: usize },
    #[error(transparent)]
    Name(#[from] StructureError),
    #[error(transparent)]
    Bf(#[from] BfError),
}

/// Interning pool. Node ids are dense and stable for the pool's lifetime;
/// equal shapes get equal ids.
#[derive(Default)]
pub struct FormulaPool {
    nodes: Vec<FormulaNode>,
    qr: Vec<u32>,
    free: Vec<u64>,
    index: HashMap<FormulaNode, u32>,
}

impl FormulaPool {
    pub fn new() -> Self {
        FormulaPool::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, f: FormulaId) -> &FormulaNode {
        &self.nodes[f.index()]
    }

    /// Quantifier rank: 0 on atoms, max over connective children, child + 1
    /// under a quantifier. Empty conjunctions and disjunctions have rank 0.
    pub fn qr(&self, f: FormulaId) -> u32 {
        self.qr[f.index()]
    }

    /// Bitmask of free variables.
    pub fn free_mask(&self, f: FormulaId) -> u64 {
        self.free[f.index()]
    }

    fn intern(&mut self, node: FormulaNode) -> FormulaId {
        if let Some(&id) = self.index.get(&node) {
            return FormulaId(id);
        }
        let (qr, free) = match &node {
            FormulaNode::Atom { args, .. } => {
                (0, args.iter().fold(0u64, |m, &v| m | 1 << v))
            }
            FormulaNode::Equal(a, b) => (0, (1u64 << a) | (1u64 << b)),
            FormulaNode::Not(c) => (self.qr(*c), self.free_mask(*c)),
            FormulaNode::Conj(cs) | FormulaNode::Disj(cs) => (
                cs.iter().map(|&c| self.qr(c)).max().unwrap_or(0),
                cs.iter().fold(0u64, |m, &c| m | self.free_mask(c)),
            ),
            FormulaNode::Exists(v, c) | FormulaNode::Forall(v, c) => {
                (self.qr(*c) + 1, self.free_mask(*c) & !(1u64 << v))
            }
        };
        let id = self.nodes.len() as u32;
        self.nodes.push(node.clone());
        self.qr.push(qr);
        self.free.push(free);
        self.index.insert(node, id);
        FormulaId(id)
    }

    fn check_var(v: u32) -> Result<(), FormulaError> {
        if v >= MAX_VARS {
            Err(FormulaError::VarLimit(v))
        } else {
            Ok(())
        }
    }

    pub fn atom(&mut self, rel: &str, args: &[u32]) -> Result<FormulaId, FormulaError> {
        validate_name(rel)?;
        for &v in args {
            Self::check_var(v)?;
        }
        Ok(self.intern(FormulaNode::Atom {
            rel: rel.to_string(),
            args: args.to_vec(),
        }))
    }

    pub fn equal(&mut self, a: u32, b: u32) -> Result<FormulaId, FormulaError> {
        Self::check_var(a)?;
        Self::check_var(b)?;
        Ok(self.intern(FormulaNode::Equal(a, b)))
    }

    pub fn not(&mut self, f: FormulaId) -> FormulaId {
        self.intern(FormulaNode::Not(f))
    }

    pub fn conj(&mut self, mut children: Vec<FormulaId>) -> FormulaId {
        children.sort_unstable();
        children.dedup();
        self.intern(FormulaNode::Conj(children))
    }

    pub fn disj(&mut self, mut children: Vec<FormulaId>) -> FormulaId {
        children.sort_unstable();
        children.dedup();
        self.intern(FormulaNode::Disj(children))
    }

    pub fn exists(&mut self, v: u32, f: FormulaId) -> Result<FormulaId, FormulaError> {
        Self::check_var(v)?;
        Ok(self.intern(FormulaNode::Exists(v, f)))
    }

    pub fn forall(&mut self, v: u32, f: FormulaId) -> Result<FormulaId, FormulaError> {
        Self::check_var(v)?;
        Ok(self.intern(FormulaNode::Forall(v, f)))
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("relation {rel:?} used with {got} arguments, declared arity {want}")]
    ArityMismatch { rel: String, got: usize, want: usize },
    #[error("free variable v{0} has no assignment")]
    Unbound(u32),
    #[error("assignment value {elem} out of range for size {size}")]
    OutOfRange { elem: usize, size: usize },
    #[error("structure size {0} exceeds the evaluation limit of 255")]
    TooLarge(usize),
    #[error("formula has free variables, a sentence is required")]
    NotASentence,
}

/// Memo key: the assignment restricted to the node's free variables. The
/// packed form covers the common case (variables below 16, elements below
/// 16); anything else falls back to explicit pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum EvalKey {
    Packed(u64),
    Wide(Box<[u8]>),
}

const UNASSIGNED: usize = usize::MAX;

/// Caching evaluator bound to one structure. Keep it alive across queries to
/// reuse the memo table.
pub struct Evaluator<'a> {
    pool: &'a FormulaPool,
    m: &'a Structure,
    rel_cache: HashMap<u32, usize>,
    memo: HashMap<(u32, EvalKey), bool>,
    small: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(pool: &'a FormulaPool, m: &'a Structure) -> Result<Self, EvalError> {
        if m.size() > 255 {
            return Err(EvalError::TooLarge(m.size()));
        }
        Ok(Evaluator {
            pool,
            m,
            rel_cache: HashMap::new(),
            memo: HashMap::new(),
            small: m.size() <= 16,
        })
    }

    pub fn eval(&mut self, f: FormulaId, asg: &BTreeMap<u32, Element>) -> Result<bool, EvalError> {
        let mut dense = vec![UNASSIGNED; MAX_VARS as usize];
        for (&v, &e) in asg {
            if v >= MAX_VARS {
                return Err(EvalError::Unbound(v));
            }
            if e >= self.m.size() {
                return Err(EvalError::OutOfRange { elem: e, size: self.m.size() });
            }
            dense[v as usize] = e;
        }
        let mask = self.pool.free_mask(f);
        for v in 0..MAX_VARS {
            if mask & (1 << v) != 0 && dense[v as usize] == UNASSIGNED {
                return Err(EvalError::Unbound(v));
            }
        }
        self.go(f, &mut dense)
    }

    fn key(&self, f: FormulaId, asg: &[Element]) -> EvalKey {
        let mask = self.pool.free_mask(f);
        if self.small && mask & !0xFFFF == 0 {
            let mut packed = 0u64;
            let mut bits = mask;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                packed |= (asg[v] as u64) << (4 * v);
                bits &= bits - 1;
            }
            EvalKey::Packed(packed)
        } else {
            let mut wide = Vec::new();
            let mut bits = mask;
            while bits != 0 {
                let v = bits.trailing_zeros();
                wide.push(v as u8);
                wide.push(asg[v as usize] as u8);
                bits &= bits - 1;
            }
            EvalKey::Wide(wide.into_boxed_slice())
        }
    }

    fn rel_index(&mut self, f: FormulaId, rel: &str, args: &[u32]) -> Result<usize, EvalError> {
        if let Some(&idx) = self.rel_cache.get(&(f.index() as u32)) {
            return Ok(idx);
        }
        let idx = self
            .m
            .sig()
            .relation_index(rel)
            .ok_or_else(|| EvalError::UnknownRelation(rel.to_string()))?;
        let want = self.m.sig().relations()[idx].arity;
        if want != args.len() {
            return Err(EvalError::ArityMismatch {
                rel: rel.to_string(),
                got: args.len(),
                want,
            });
        }
        self.rel_cache.insert(f.index() as u32, idx);
        Ok(idx)
    }

    fn go(&mut self, f: FormulaId, asg: &mut Vec<Element>) -> Result<bool, EvalError> {
        let key = (f.index() as u32, self.key(f, asg));
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        // clone the node descriptor cheaply enough to release the pool borrow
        let value = match self.pool.node(f) {
            FormulaNode::Atom { rel, args } => {
                let rel = rel.clone();
                let args = args.clone();
                let idx = self.rel_index(f, &rel, &args)?;
                let mut vals = [0usize; 8];
                if args.len() <= 8 {
                    for (slot, &v) in vals.iter_mut().zip(args.iter()) {
                        *slot = asg[v as usize];
                    }
                    self.m.holds(idx, &vals[..args.len()])
                } else {
                    let vals: Vec<Element> = args.iter().map(|&v| asg[v as usize]).collect();
                    self.m.holds(idx, &vals)
                }
            }
            FormulaNode::Equal(a, b) => asg[*a as usize] == asg[*b as usize],
            FormulaNode::Not(c) => {
                let c = *c;
                !self.go(c, asg)?
            }
            FormulaNode::Conj(cs) => {
                let cs = cs.clone();
                let mut out = true;
                for c in cs {
                    if !self.go(c, asg)? {
                        out = false;
                        break;
                    }
                }
                out
            }
            FormulaNode::Disj(cs) => {
                let cs = cs.clone();
                let mut out = false;
                for c in cs {
                    if self.go(c, asg)? {
                        out = true;
                        break;
                    }
                }
                out
            }
            FormulaNode::Exists(v, c) => {
                let (v, c) = (*v as usize, *c);
                let saved = asg[v];
                let mut out = false;
                for e in 0..self.m.size() {
                    asg[v] = e;
                    if self.go(c, asg)? {
                        out = true;
                        break;
                    }
                }
                asg[v] = saved;
                out
            }
            FormulaNode::Forall(v, c) => {
                let (v, c) = (*v as usize, *c);
                let saved = asg[v];
                let mut out = true;
                for e in 0..self.m.size() {
                    asg[v] = e;
                    if !self.go(c, asg)? {
                        out = false;
                        break;
                    }
                }
                asg[v] = saved;
                out
            }
        };
        self.memo.insert(key, value);
        Ok(value)
    }
}

/// One-shot evaluation under an explicit assignment.
pub fn eval(
    m: &Structure,
    pool: &FormulaPool,
    f: FormulaId,
    asg: &BTreeMap<u32, Element>,
) -> Result<bool, EvalError> {
    Evaluator::new(pool, m)?.eval(f, asg)
}

/// Membership of each corpus structure in Mod(f); f must be a sentence.
pub fn mod_check(
    pool: &FormulaPool,
    f: FormulaId,
    corpus: &[Structure],
) -> Result<Vec<bool>, EvalError> {
    if pool.free_mask(f) != 0 {
        return Err(EvalError::NotASentence);
    }
    let empty = BTreeMap::new();
    corpus
        .iter()
        .map(|m| Evaluator::new(pool, m)?.eval(f, &empty))
        .collect()
}

/// Builder for the canonical formulas of one structure. Memoizes on (tuple,
/// level); reuse one builder when constructing a family.
pub struct ScottFormulas<'a, 'p> {
    m: &'a Structure,
    pool: &'p mut FormulaPool,
    memo: HashMap<(Tuple, u32), FormulaId>,
    atoms_by_len: HashMap<usize, Vec<Atom>>,
}

impl<'a, 'p> ScottFormulas<'a, 'p> {
    pub fn new(pool: &'p mut FormulaPool, m: &'a Structure) -> Result<Self, FormulaError> {
        if !m.sig().constants().is_empty() {
            return Err(FormulaError::ConstantsUnsupported);
        }
        Ok(ScottFormulas {
            m,
            pool,
            memo: HashMap::new(),
            atoms_by_len: HashMap::new(),
        })
    }

    pub fn pool(&mut self) -> &mut FormulaPool {
        self.pool
    }

    fn atom_formula(&mut self, atom: &Atom) -> Result<FormulaId, FormulaError> {
        let var = |t: AtomTerm| match t {
            AtomTerm::Var(i) => i as u32,
            AtomTerm::Const(_) => unreachable!("constants rejected at construction"),
        };
        match atom {
            Atom::Eq(a, b) => self.pool.equal(var(*a), var(*b)),
            Atom::Rel { rel, args } => {
                let name = self.m.sig().relations()[*rel].name.clone();
                let vars: Vec<u32> = args.iter().map(|&t| var(t)).collect();
                self.pool.atom(&name, &vars)
            }
        }
    }

    /// The level-`alpha` canonical formula of a tuple (repeats permitted).
    ///
    /// Level 0 is the conjunction, over the fixed atom enumeration, of each
    /// atomic formula the tuple satisfies and the negation of each it does
    /// not. Level b+1 conjoins, over every one-point extension, the
    /// existentially quantified level-b formulas with the universally
    /// quantified disjunction of the same family; the fresh variable index is
    /// the tuple length.
    pub fn phi(&mut self, tuple: &[Element], alpha: u32) -> Result<FormulaId, FormulaError> {
        for &e in tuple {
            if e >= self.m.size() {
                return Err(FormulaError::ElementOutOfRange { elem: e, size: self.m.size() });
            }
        }
        let key = (tuple.to_vec(), alpha);
        if let Some(&f) = self.memo.get(&key) {
            return Ok(f);
        }
        let result = if alpha == 0 {
            let k = tuple.len();
            if !self.atoms_by_len.contains_key(&k) {
                let atoms = enumerate_atoms(self.m.sig(), k);
                self.atoms_by_len.insert(k, atoms);
            }
            let atoms = self.atoms_by_len[&k].clone();
            let mut lits = Vec::with_capacity(atoms.len());
            for atom in &atoms {
                let base = self.atom_formula(atom)?;
                let lit = if atom_holds(self.m, tuple, atom) {
                    base
                } else {
                    self.pool.not(base)
                };
                lits.push(lit);
            }
            self.pool.conj(lits)
        } else {
            let w = tuple.len() as u32;
            FormulaPool::check_var(w)?;
            let mut children = Vec::with_capacity(self.m.size());
            let mut extended = tuple.to_vec();
            extended.push(0);
            for b in 0..self.m.size() {
                *extended.last_mut().expect("nonempty") = b;
                children.push(self.phi(&extended, alpha - 1)?);
            }
            let mut ex_parts = Vec::with_capacity(children.len());
            for &c in &children {
                ex_parts.push(self.pool.exists(w, c)?);
            }
            let forth = self.pool.conj(ex_parts);
            let disj = self.pool.disj(children);
            let back = self.pool.forall(w, disj)?;
            self.pool.conj(vec![forth, back])
        };
        self.memo.insert(key, result);
        Ok(result)
    }
}

/// The level-`alpha` canonical formula of a tuple, one shot.
pub fn phi_formula(
    pool: &mut FormulaPool,
    m: &Structure,
    tuple: &[Element],
    alpha: u32,
) -> Result<FormulaId, FormulaError> {
    ScottFormulas::new(pool, m)?.phi(tuple, alpha)
}

/// The canonical sentence of a structure: the empty tuple's formula at level
/// R conjoined with, for every injective tuple, the universal closure of
/// "level R implies level R+1". Its quantifier rank is size + R + 1.
pub fn css(pool: &mut FormulaPool, m: &Structure) -> Result<FormulaId, FormulaError> {
    let report = scott_rank(m)?;
    let r = report.r_rank;
    let mut builder = ScottFormulas::new(pool, m)?;
    let head = builder.phi(&[], r)?;
    let mut implications = Vec::with_capacity(report.rho.len());
    for entry in &report.rho {
        let tuple = &entry.tuple;
        let lo = builder.phi(tuple, r)?;
        let hi = builder.phi(tuple, r + 1)?;
        let neg = builder.pool.not(lo);
        let mut imp = builder.pool.disj(vec![neg, hi]);
        for v in (0..tuple.len()).rev() {
            imp = builder.pool.forall(v as u32, imp)?;
        }
        implications.push(imp);
    }
    let body = builder.pool.conj(implications);
    Ok(pool.conj(vec![head, body]))
}
