//! Desk-scale model theory for finite relational structures.
//!
//! The crate has three clusters of functionality that feed each other:
//!
//! * [`structure`] and [`bf`]: finite structures with named relations and
//!   constants, and the back-and-forth refinement that computes, for every
//!   tuple, the least round at which its equivalence class stops changing.
//!   From that we get Scott ranks and per-tuple rank reports.
//! * [`formula`] and [`sexpr`]: a pooled infinitary formula DAG (finite
//!   syntax, but conjunctions and disjunctions of arbitrary width), an
//!   evaluator over finite structures, the canonical formulas attached to
//!   tuples at each round, and the canonical sentence of a structure.
//!   S-expression and JSON serialization live in [`sexpr`].
//! * [`terms`], [`normal`], and [`ef`]: a term calculus for linear orders
//!   built from finite orders, `w` (the order type of the naturals), and
//!   `eta` (the rationals), a normalizer that rewrites sums and the
//!   restricted products the grammar admits, and an Ehrenfeucht-Fraisse
//!   engine that computes n-round game types compositionally. The EF engine
//!   cross-validates the normalizer: terms the normalizer equates must be
//!   game-equivalent at every round we can afford to check.
//!
//! [`trees`] is a small client of both sides: finite sequence trees ordered
//! by the Kleene-Brouwer order, flattened into linear orders and classified
//! through the term machinery.

pub mod bf;
pub mod ef;
pub mod formula;
pub mod normal;
pub mod sexpr;
pub mod structure;
pub mod terms;
pub mod trees;
