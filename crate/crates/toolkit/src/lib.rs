//! Generators, verifiers and transformers for the combinatorial objects that
//! appear in the structure theory of directed graphs: digraphs and walks,
//! linkages and separators, cylindrical grids, walls and fences, paths and
//! cycles of well-linked sets, webs, splits and segmentations, temporal
//! routings, directed tree-decompositions and havens, and the exact
//! big-integer bound arithmetic tying the constructions together.
//!
//! Every object of interest is a *witness*: a value that carries enough
//! structure to be checked independently by a verifier. Constructive ops
//! return witnesses that re-verify, searches return certificates, and
//! verifiers report machine-readable clause violations.

pub mod digraph;
pub mod grid;
pub mod linkage;
pub mod minors;
pub mod oracle;
pub mod report;
pub mod webs;
pub mod wells;
