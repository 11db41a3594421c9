//! Tiny exhaustive reference implementations. They exist to cross-check the
//! real algorithms on small instances and make no attempt at being fast.

use crate::digraph::{Digraph, Vertex, Walk};
use itertools::Itertools;
use std::collections::BTreeSet;

/// All simple `A`-`B` paths, enumerated depth-first in lexicographic order.
/// Vertices in `A ∩ B` yield zero-length paths.
pub fn all_simple_paths(d: &Digraph, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>) -> Vec<Walk> {
    let adj = d.adjacency();
    let mut result = Vec::new();
    fn go(
        adj: &crate::digraph::Adjacency,
        b: &BTreeSet<Vertex>,
        current: &mut Vec<Vertex>,
        seen: &mut BTreeSet<Vertex>,
        result: &mut Vec<Walk>,
    ) {
        let here = current.last().unwrap().clone();
        if b.contains(&here) {
            result.push(Walk::new(current.clone()));
        }
        for w in &adj.out[&here] {
            if seen.insert(w.clone()) {
                current.push(w.clone());
                go(adj, b, current, seen, result);
                current.pop();
                seen.remove(w);
            }
        }
    }
    for start in a {
        if !d.has_vertex(start) {
            continue;
        }
        let mut current = vec![start.clone()];
        let mut seen: BTreeSet<Vertex> = [start.clone()].into_iter().collect();
        go(&adj, b, &mut current, &mut seen, &mut result);
    }
    result
}

/// Maximum number of pairwise vertex-disjoint `A`-`B` paths, by exhaustive
/// packing over the full path list.
pub fn brute_max_disjoint_paths(d: &Digraph, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>) -> usize {
    let paths = all_simple_paths(d, a, b);
    fn pack(paths: &[Walk], from: usize, used: &mut BTreeSet<Vertex>) -> usize {
        let mut best = 0;
        for i in from..paths.len() {
            let vs = paths[i].vertex_set();
            if vs.iter().all(|v| !used.contains(v)) {
                for v in &vs {
                    used.insert(v.clone());
                }
                best = best.max(1 + pack(paths, i + 1, used));
                for v in &vs {
                    used.remove(v);
                }
            }
        }
        best
    }
    pack(&paths, 0, &mut BTreeSet::new())
}

/// True if `x` intersects every `A`-`B` path, i.e. no path survives in `d - x`.
pub fn separates(d: &Digraph, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>, x: &BTreeSet<Vertex>) -> bool {
    let rest = d.minus_vertices(x.iter());
    let sources: BTreeSet<Vertex> = a.iter().filter(|v| rest.has_vertex(v)).cloned().collect();
    let reach = rest.reachable_from(&sources);
    b.iter().all(|v| !reach.contains(v) || x.contains(v))
}

/// Size of a minimum `A`-`B` separator, by subset enumeration.
pub fn brute_min_separator_size(d: &Digraph, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>) -> usize {
    let verts: Vec<Vertex> = d.vertices().cloned().collect();
    for size in 0..=verts.len() {
        for subset in verts.iter().combinations(size) {
            let x: BTreeSet<Vertex> = subset.into_iter().cloned().collect();
            if separates(d, a, b, &x) {
                return size;
            }
        }
    }
    verts.len()
}

/// Maximum number of vertex-disjoint directed cycles, by exhaustive packing.
pub fn brute_max_disjoint_cycles(d: &Digraph) -> usize {
    let cycles = all_cycles(d);
    fn pack(cycles: &[BTreeSet<Vertex>], from: usize, used: &mut BTreeSet<Vertex>) -> usize {
        let mut best = 0;
        for i in from..cycles.len() {
            if cycles[i].iter().all(|v| !used.contains(v)) {
                for v in &cycles[i] {
                    used.insert(v.clone());
                }
                best = best.max(1 + pack(cycles, i + 1, used));
                for v in &cycles[i] {
                    used.remove(v);
                }
            }
        }
        best
    }
    pack(&cycles, 0, &mut BTreeSet::new())
}

/// Vertex sets of all simple directed cycles (each reported once).
pub fn all_cycles(d: &Digraph) -> Vec<BTreeSet<Vertex>> {
    let adj = d.adjacency();
    let mut found: BTreeSet<BTreeSet<Vertex>> = BTreeSet::new();
    fn go(
        adj: &crate::digraph::Adjacency,
        root: &Vertex,
        current: &mut Vec<Vertex>,
        seen: &mut BTreeSet<Vertex>,
        found: &mut BTreeSet<BTreeSet<Vertex>>,
    ) {
        let here = current.last().unwrap().clone();
        for w in &adj.out[&here] {
            if w == root {
                found.insert(current.iter().cloned().collect());
            } else if w > root && seen.insert(w.clone()) {
                // Only explore vertices above the root: each cycle is found
                // exactly once, rooted at its minimum.
                current.push(w.clone());
                go(adj, root, current, seen, found);
                current.pop();
                seen.remove(w);
            }
        }
    }
    for root in d.vertices() {
        let mut current = vec![root.clone()];
        let mut seen: BTreeSet<Vertex> = [root.clone()].into_iter().collect();
        go(&adj, root, &mut current, &mut seen, &mut found);
    }
    found.into_iter().collect()
}

/// Size of a minimum set of vertices meeting every directed cycle.
pub fn brute_min_cycle_hitting_set(d: &Digraph) -> usize {
    let verts: Vec<Vertex> = d.vertices().cloned().collect();
    for size in 0..=verts.len() {
        for subset in verts.iter().combinations(size) {
            let x: BTreeSet<Vertex> = subset.into_iter().cloned().collect();
            if d.minus_vertices(x.iter()).is_acyclic() {
                return size;
            }
        }
    }
    verts.len()
}
