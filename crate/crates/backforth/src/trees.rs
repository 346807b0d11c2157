//! Finite trees of finite sequences, the Kleene-Brouwer ordering on their
//! nodes, and the classification pipeline tree -> KB order -> times omega,
//! realized at finite scale.
//!
//! A node is a sequence of naturals; a tree is a prefix-closed finite set of
//! nodes. The KB order puts proper extensions first and otherwise compares
//! lexicographically at the first difference, so on a finite tree it is the
//! postorder traversal with children visited in ascending label order. The
//! pipeline maps a tree to the order type of its KB order multiplied by ω,
//! which at finite scale collapses to ω for every nonempty tree; the
//! collapse is deliberate and tested, not hidden.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::normal::{normalize, NormalForm};
use crate::structure::{Structure, StructureError};
use crate::terms::OrderTerm;

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("tree is not prefix-closed: missing {missing:?}")]
    NotPrefixClosed { missing: Vec<u32> },
    #[error("empty tree has no structure")]
    Empty,
    #[error("invalid tree json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Prefix-closed finite set of finite sequences of naturals. Nonempty trees
/// always contain the empty sequence (the root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTree {
    nodes: BTreeSet<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    nodes: Vec<Vec<u32>>,
}

impl FiniteTree {
    /// Build a tree, rejecting node sets that are not prefix-closed.
    pub fn new(nodes: impl IntoIterator<Item = Vec<u32>>) -> Result<FiniteTree, TreeError> {
        let nodes: BTreeSet<Vec<u32>> = nodes.into_iter().collect();
        for node in &nodes {
            for cut in 0..node.len() {
                if !nodes.contains(&node[..cut]) {
                    return Err(TreeError::NotPrefixClosed {
                        missing: node[..cut].to_vec(),
                    });
                }
            }
        }
        Ok(FiniteTree { nodes })
    }

    /// Build a tree by adding every missing prefix of the given nodes.
    pub fn closed(nodes: impl IntoIterator<Item = Vec<u32>>) -> FiniteTree {
        let mut all = BTreeSet::new();
        for node in nodes {
            for cut in 0..=node.len() {
                all.insert(node[..cut].to_vec());
            }
        }
        FiniteTree { nodes: all }
    }

    pub fn from_json(text: &str) -> Result<FiniteTree, TreeError> {
        let raw: TreeJson = serde_json::from_str(text)?;
        FiniteTree::new(raw.nodes)
    }

    /// As `from_json` but prefix-closing instead of rejecting.
    pub fn from_json_closed(text: &str) -> Result<FiniteTree, TreeError> {
        let raw: TreeJson = serde_json::from_str(text)?;
        Ok(FiniteTree::closed(raw.nodes))
    }

    pub fn to_json(&self) -> String {
        let raw = TreeJson {
            nodes: self.nodes.iter().cloned().collect(),
        };
        serde_json::to_string(&raw).expect("tree json never fails")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.nodes.iter().map(|n| n.as_slice())
    }

    pub fn contains(&self, node: &[u32]) -> bool {
        self.nodes.contains(node)
    }

    /// All nodes in ascending Kleene-Brouwer order.
    pub fn kb_order(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self.nodes.iter().cloned().collect();
        out.sort_by(|a, b| kb_compare(a, b));
        out
    }

    /// The KB order as a structure over {<} with universe [0, |T|), element
    /// i being the i-th node in ascending KB order. The result is checked to
    /// be a strict linear order.
    pub fn kb_as_structure(&self) -> Result<Structure, TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        let order = self.kb_order();
        let mut edges = Vec::new();
        for (i, a) in order.iter().enumerate() {
            for (j, b) in order.iter().enumerate() {
                if kb_compare(a, b) == Ordering::Less {
                    edges.push((i, j));
                }
            }
        }
        let m = Structure::digraph(order.len(), "<", &edges)?;
        debug_assert!(m.is_strict_linear_order(0));
        Ok(m)
    }

    /// Order type of the KB order multiplied by ω, as a normal form. Every
    /// nonempty finite tree lands on ω; the empty tree on 0.
    pub fn classify_pipeline(&self) -> NormalForm {
        let kb_type = OrderTerm::Fin(self.len() as u64);
        normalize(&OrderTerm::Prod(
            Box::new(kb_type),
            Box::new(OrderTerm::Omega),
        ))
    }
}

/// Kleene-Brouwer comparison of two sequences: s below t when s properly
/// extends t, or when s is lexicographically smaller at the first
/// difference. Total on prefix-closed sets and on arbitrary pairs.
pub fn kb_compare(s: &[u32], t: &[u32]) -> Ordering {
    for (a, b) in s.iter().zip(t.iter()) {
        match a.cmp(b) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    // one is a prefix of the other; the longer one comes first
    t.len().cmp(&s.len())
}
