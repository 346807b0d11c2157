//! Finite relational structures: parsing, validation, atomic types, brute
//! force isomorphism search, and seeded random generation.
//!
//! The universe of a structure is always [0, n) with n >= 1. Signatures are
//! relational plus constant symbols; there are no function symbols.

use std::collections::{BTreeMap, BTreeSet};

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Element = usize;
pub type Tuple = Vec<Element>;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("structure size must be at least 1")]
    EmptyDomain,
    #[error("bad name {0:?}: names must be nonempty, printable, must not collide with formula syntax (digits, f<digits>, reserved words, parentheses, whitespace)")]
    BadName(String),
    #[error("duplicate name {0:?} in signature")]
    DuplicateName(String),
    #[error("relation {0:?} declared with arity 0")]
    ZeroArity(String),
    #[error("relation {rel:?}: tuple {tuple:?} has length {got}, expected arity {want}")]
    ArityMismatch {
        rel: String,
        tuple: Tuple,
        got: usize,
        want: usize,
    },
    #[error("element {elem} out of range for size {size}")]
    ElementOutOfRange { elem: usize, size: usize },
    #[error("constant {name:?} assigned {value}, out of range for size {size}")]
    ConstantOutOfRange {
        name: String,
        value: usize,
        size: usize,
    },
    #[error("table count {got} does not match relation count {want}")]
    TableCount { got: usize, want: usize },
    #[error("constant value count {got} does not match constant count {want}")]
    ConstantCount { got: usize, want: usize },
    #[error("density {0} outside [0, 1]")]
    DensityRange(f64),
}

const RESERVED_NAMES: &[&str] = &["and", "or", "not", "exists", "forall", "defs", "="];

/// Names appear verbatim in s-expression formulas, so anything that could be
/// read as a variable index, a definition reference, or a connective is
/// rejected up front.
pub fn validate_name(name: &str) -> Result<(), StructureError> {
    let bad = || StructureError::BadName(name.to_string());
    if name.is_empty() {
        return Err(bad());
    }
    for c in name.chars() {
        if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c.is_control() {
            return Err(bad());
        }
    }
    if RESERVED_NAMES.contains(&name) {
        return Err(bad());
    }
    if name.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut chars = name.chars();
    if chars.next() == Some('f') {
        let rest = chars.as_str();
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    relations: Vec<RelationDecl>,
    constants: Vec<String>,
}

impl Signature {
    pub fn new(relations: Vec<RelationDecl>, constants: Vec<String>) -> Result<Self, StructureError> {
        let mut seen = BTreeSet::new();
        for r in &relations {
            validate_name(&r.name)?;
            if r.arity == 0 {
                return Err(StructureError::ZeroArity(r.name.clone()));
            }
            if !seen.insert(r.name.clone()) {
                return Err(StructureError::DuplicateName(r.name.clone()));
            }
        }
        for c in &constants {
            validate_name(c)?;
            if !seen.insert(c.clone()) {
                return Err(StructureError::DuplicateName(c.clone()));
            }
        }
        Ok(Signature { relations, constants })
    }

    /// One binary relation, no constants. The workhorse signature.
    pub fn binary(name: &str) -> Signature {
        Signature::new(
            vec![RelationDecl {
                name: name.to_string(),
                arity: 2,
            }],
            vec![],
        )
        .expect("binary signature name")
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    sig: Signature,
    size: usize,
    tables: Vec<BTreeSet<Tuple>>,
    constant_values: Vec<Element>,
    /// Bitset per binary relation for O(1) membership; None for other arities.
    dense2: Vec<Option<Vec<u64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationDoc {
    arity: usize,
    tuples: Vec<Tuple>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureDoc {
    size: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    relations: BTreeMap<String, RelationDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    constants: BTreeMap<String, usize>,
}

impl Structure {
    pub fn new(
        sig: Signature,
        size: usize,
        tables: Vec<BTreeSet<Tuple>>,
        constant_values: Vec<Element>,
    ) -> Result<Self, StructureError> {
        if size == 0 {
            return Err(StructureError::EmptyDomain);
        }
        if tables.len() != sig.relations.len() {
            return Err(StructureError::TableCount {
                got: tables.len(),
                want: sig.relations.len(),
            });
        }
        if constant_values.len() != sig.constants.len() {
            return Err(StructureError::ConstantCount {
                got: constant_values.len(),
                want: sig.constants.len(),
            });
        }
        for (decl, table) in sig.relations.iter().zip(&tables) {
            for t in table {
                if t.len() != decl.arity {
                    return Err(StructureError::ArityMismatch {
                        rel: decl.name.clone(),
                        tuple: t.clone(),
                        got: t.len(),
                        want: decl.arity,
                    });
                }
                for &e in t {
                    if e >= size {
                        return Err(StructureError::ElementOutOfRange { elem: e, size });
                    }
                }
            }
        }
        for (name, &v) in sig.constants.iter().zip(&constant_values) {
            if v >= size {
                return Err(StructureError::ConstantOutOfRange {
                    name: name.clone(),
                    value: v,
                    size,
                });
            }
        }
        let dense2 = sig
            .relations
            .iter()
            .zip(&tables)
            .map(|(decl, table)| {
                if decl.arity != 2 {
                    return None;
                }
                let mut bits = vec![0u64; (size * size).div_ceil(64)];
                for t in table {
                    let idx = t[0] * size + t[1];
                    bits[idx / 64] |= 1 << (idx % 64);
                }
                Some(bits)
            })
            .collect();
        Ok(Structure {
            sig,
            size,
            tables,
            constant_values,
            dense2,
        })
    }

    /// Digraph over one binary relation.
    pub fn digraph(size: usize, rel_name: &str, edges: &[(usize, usize)]) -> Result<Self, StructureError> {
        let table: BTreeSet<Tuple> = edges.iter().map(|&(a, b)| vec![a, b]).collect();
        Structure::new(Signature::binary(rel_name), size, vec![table], vec![])
    }

    /// The linear order L_n over signature {<}: i < j as naturals.
    pub fn linear_order(n: usize) -> Result<Self, StructureError> {
        let mut table = BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                table.insert(vec![i, j]);
            }
        }
        Structure::new(Signature::binary("<"), n, vec![table], vec![])
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        let doc: StructureDoc = serde_json::from_str(text).map_err(|e| StructureError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut relations = Vec::new();
        let mut tables = Vec::new();
        for (name, rel) in &doc.relations {
            relations.push(RelationDecl {
                name: name.clone(),
                arity: rel.arity,
            });
            tables.push(rel.tuples.iter().cloned().collect());
        }
        let mut constants = Vec::new();
        let mut constant_values = Vec::new();
        for (name, &v) in &doc.constants {
            constants.push(name.clone());
            constant_values.push(v);
        }
        let sig = Signature::new(relations, constants)?;
        Structure::new(sig, doc.size, tables, constant_values)
    }

    /// Compact JSON with relations and constants keyed by name and tuples in
    /// lexicographic order (the table is a BTreeSet, so iteration is sorted).
    pub fn to_json(&self) -> String {
        let relations = self
            .sig
            .relations
            .iter()
            .zip(&self.tables)
            .map(|(decl, table)| {
                (
                    decl.name.clone(),
                    RelationDoc {
                        arity: decl.arity,
                        tuples: table.iter().cloned().collect(),
                    },
                )
            })
            .collect();
        let constants = self
            .sig
            .constants
            .iter()
            .cloned()
            .zip(self.constant_values.iter().copied())
            .collect();
        let doc = StructureDoc {
            size: self.size,
            relations,
            constants,
        };
        serde_json::to_string(&doc).expect("structure serialization")
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn table(&self, rel: usize) -> &BTreeSet<Tuple> {
        &self.tables[rel]
    }

    pub fn constant_value(&self, idx: usize) -> Element {
        self.constant_values[idx]
    }

    pub fn holds(&self, rel: usize, args: &[Element]) -> bool {
        debug_assert_eq!(args.len(), self.sig.relations[rel].arity);
        if let Some(bits) = &self.dense2[rel] {
            let idx = args[0] * self.size + args[1];
            return bits[idx / 64] & (1 << (idx % 64)) != 0;
        }
        self.tables[rel].contains(args)
    }

    /// True when the given binary relation is a strict linear order on the
    /// whole universe (irreflexive, transitive, total).
    pub fn is_strict_linear_order(&self, rel: usize) -> bool {
        if self.sig.relations[rel].arity != 2 {
            return false;
        }
        let n = self.size;
        for a in 0..n {
            if self.holds(rel, &[a, a]) {
                return false;
            }
            for b in 0..n {
                if a != b && self.holds(rel, &[a, b]) == self.holds(rel, &[b, a]) {
                    return false;
                }
                for c in 0..n {
                    if self.holds(rel, &[a, b]) && self.holds(rel, &[b, c]) && !self.holds(rel, &[a, c]) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// A term in an atomic formula: a tuple variable or a constant symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomTerm {
    Var(usize),
    Const(usize),
}

/// One atomic formula over k tuple variables and the signature's constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Eq(AtomTerm, AtomTerm),
    Rel { rel: usize, args: Vec<AtomTerm> },
}

/// Fixed enumeration of the atomic formulas in variables v0..v(k-1) plus the
/// signature's constant symbols: equality atoms first (all term pairs i <= j),
/// then relation atoms in signature order with argument tuples lexicographic.
/// The order is part of the atomic type encoding and of clause (I) formula
/// construction, so it must never change.
pub fn enumerate_atoms(sig: &Signature, k: usize) -> Vec<Atom> {
    let mut terms: Vec<AtomTerm> = (0..k).map(AtomTerm::Var).collect();
    terms.extend((0..sig.constants.len()).map(AtomTerm::Const));
    let mut atoms = Vec::new();
    for i in 0..terms.len() {
        for j in i..terms.len() {
            atoms.push(Atom::Eq(terms[i], terms[j]));
        }
    }
    for (rel, decl) in sig.relations.iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        // odometer over term indices, lexicographic
        let mut idx = vec![0usize; decl.arity];
        'rel: loop {
            atoms.push(Atom::Rel {
                rel,
                args: idx.iter().map(|&i| terms[i]).collect(),
            });
            let mut pos = decl.arity;
            loop {
                if pos == 0 {
                    break 'rel;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < terms.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
    atoms
}

/// Canonical atomic type: tuple length plus the sorted list of satisfied atom
/// indices under `enumerate_atoms`. Two tuples get equal types exactly when
/// they satisfy the same atomic formulas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomicType {
    pub len: usize,
    pub satisfied: Vec<u32>,
}

fn resolve(m: &Structure, tuple: &[Element], t: AtomTerm) -> Element {
    match t {
        AtomTerm::Var(i) => tuple[i],
        AtomTerm::Const(c) => m.constant_values[c],
    }
}

pub fn atom_holds(m: &Structure, tuple: &[Element], atom: &Atom) -> bool {
    match atom {
        Atom::Eq(a, b) => resolve(m, tuple, *a) == resolve(m, tuple, *b),
        Atom::Rel { rel, args } => {
            let mut buf = [0usize; 8];
            if args.len() <= 8 {
                for (slot, &a) in buf.iter_mut().zip(args.iter()) {
                    *slot = resolve(m, tuple, a);
                }
                m.holds(*rel, &buf[..args.len()])
            } else {
                let resolved: Vec<Element> = args.iter().map(|&a| resolve(m, tuple, a)).collect();
                m.holds(*rel, &resolved)
            }
        }
    }
}

pub fn atomic_type(m: &Structure, tuple: &[Element]) -> Result<AtomicType, StructureError> {
    for &e in tuple {
        if e >= m.size {
            return Err(StructureError::ElementOutOfRange { elem: e, size: m.size });
        }
    }
    let atoms = enumerate_atoms(&m.sig, tuple.len());
    let satisfied = atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| atom_holds(m, tuple, a))
        .map(|(i, _)| i as u32)
        .collect();
    Ok(AtomicType {
        len: tuple.len(),
        satisfied,
    })
}

/// Per-element profile used to prune the isomorphism search: singleton atomic
/// type plus, per relation and argument position, how many tuples mention the
/// element there.
fn element_profile(m: &Structure, x: Element) -> (AtomicType, Vec<u32>) {
    let ty = atomic_type(m, &[x]).expect("element in range");
    let mut counts = Vec::new();
    for (rel, decl) in m.sig.relations.iter().enumerate() {
        for pos in 0..decl.arity {
            counts.push(m.tables[rel].iter().filter(|t| t[pos] == x) .count() as u32);
        }
    }
    (ty, counts)
}

fn partial_map_ok(
    m: &Structure,
    n: &Structure,
    fwd: &[Option<Element>],
    bwd: &[Option<Element>],
) -> bool {
    for (rel, table) in m.tables.iter().enumerate() {
        for t in table {
            if let Some(image) = t
                .iter()
                .map(|&e| fwd[e])
                .collect::<Option<Vec<Element>>>()
            {
                if !n.holds(rel, &image) {
                    return false;
                }
            }
        }
        for t in &n.tables[rel] {
            if let Some(pre) = t.iter().map(|&e| bwd[e]).collect::<Option<Vec<Element>>>() {
                if !m.holds(rel, &pre) {
                    return false;
                }
            }
        }
    }
    true
}

/// Lexicographically least isomorphism M -> N, or None. Backtracking with
/// profile pruning; fine as an oracle up to six or so elements, factorial in
/// the worst case beyond that.
pub fn brute_force_iso(m: &Structure, n: &Structure) -> Option<Vec<Element>> {
    if m.size != n.size || m.sig != n.sig {
        return None;
    }
    let size = m.size;
    let m_prof: Vec<_> = (0..size).map(|x| element_profile(m, x)).collect();
    let n_prof: Vec<_> = (0..size).map(|x| element_profile(n, x)).collect();

    let mut fwd: Vec<Option<Element>> = vec![None; size];
    let mut bwd: Vec<Option<Element>> = vec![None; size];

    fn consts_ok(m: &Structure, n: &Structure, x: Element, y: Element) -> bool {
        m.constant_values
            .iter()
            .zip(&n.constant_values)
            .all(|(&cm, &cn)| (cm == x) == (cn == y))
    }

    fn dfs(
        m: &Structure,
        n: &Structure,
        m_prof: &[(AtomicType, Vec<u32>)],
        n_prof: &[(AtomicType, Vec<u32>)],
        fwd: &mut Vec<Option<Element>>,
        bwd: &mut Vec<Option<Element>>,
        depth: usize,
    ) -> bool {
        if depth == m.size {
            return true;
        }
        for y in 0..n.size {
            if bwd[y].is_some() || m_prof[depth] != n_prof[y] || !consts_ok(m, n, depth, y) {
                continue;
            }
            fwd[depth] = Some(y);
            bwd[y] = Some(depth);
            if partial_map_ok(m, n, fwd, bwd) && dfs(m, n, m_prof, n_prof, fwd, bwd, depth + 1) {
                return true;
            }
            fwd[depth] = None;
            bwd[y] = None;
        }
        false
    }

    if dfs(m, n, &m_prof, &n_prof, &mut fwd, &mut bwd, 0) {
        Some(fwd.into_iter().map(|o| o.expect("complete map")).collect())
    } else {
        None
    }
}

/// Seeded random structure over the given signature. Every potential tuple is
/// included independently with the given density; constants are drawn
/// uniformly. Identical seeds give identical structures.
pub fn random_structure(
    seed: u64,
    size: usize,
    sig: &Signature,
    density: f64,
) -> Result<Structure, StructureError> {
    if size == 0 {
        return Err(StructureError::EmptyDomain);
    }
    if !(0.0..=1.0).contains(&density) || density.is_nan() {
        return Err(StructureError::DensityRange(density));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // 53-bit threshold draw: exact at both endpoints
    let threshold = (density * 9007199254740992.0) as u64;
    let mut tables = Vec::new();
    for decl in sig.relations.iter() {
        let mut table = BTreeSet::new();
        let mut idx = vec![0usize; decl.arity];
        loop {
            let draw = rng.next_u64() >> 11;
            if draw < threshold {
                table.insert(idx.clone());
            }
            let mut pos = decl.arity;
            let mut rolled = true;
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < size {
                    rolled = false;
                    break;
                }
                idx[pos] = 0;
            }
            if rolled {
                break;
            }
        }
        tables.push(table);
    }
    let constant_values = (0..sig.constants.len())
        .map(|_| (rng.next_u64() % size as u64) as usize)
        .collect();
    Structure::new(sig.clone(), size, tables, constant_values)
}
