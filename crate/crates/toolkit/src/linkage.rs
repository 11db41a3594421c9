//! Linkages, separators and the flow machinery behind them: Menger duality
//! with certificates on both sides, congestion handling, linkage
//! minimalization, weak minimality, well-linkedness and order-linkedness.

use crate::digraph::{Arc, Digraph, Vertex, Walk};
use crate::report::{Budget, OpError};
use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// A vertex set whose order matters (used for `A(S)`/`B(S)` sets and shifts).
pub type OrderedVertexSet = Vec<Vertex>;

/// Checks that an ordered set has no repeated entries.
pub fn validate_ordered_set(s: &OrderedVertexSet) -> Result<(), OpError> {
    let set: BTreeSet<&Vertex> = s.iter().collect();
    if set.len() != s.len() {
        return Err(OpError::pre("ordered vertex set has repeated entries"));
    }
    Ok(())
}

/// A set of pairwise vertex-disjoint nonempty paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linkage {
    paths: Vec<Walk>,
}

impl Linkage {
    pub fn new(paths: Vec<Walk>) -> Result<Self, OpError> {
        let mut seen: BTreeSet<&Vertex> = BTreeSet::new();
        for (i, p) in paths.iter().enumerate() {
            if p.is_empty() {
                return Err(OpError::pre(format!("path {i} is empty")));
            }
            if !p.is_path() {
                return Err(OpError::pre(format!("walk {i} repeats a vertex")));
            }
            for v in &p.seq {
                if !seen.insert(v) {
                    return Err(OpError::pre(format!(
                        "paths are not pairwise disjoint: {v} is shared"
                    )));
                }
            }
        }
        Ok(Linkage { paths })
    }

    pub fn empty() -> Self {
        Linkage { paths: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[Walk] {
        &self.paths
    }

    pub fn into_paths(self) -> Vec<Walk> {
        self.paths
    }

    pub fn start_set(&self) -> BTreeSet<Vertex> {
        self.paths.iter().filter_map(|p| p.start().cloned()).collect()
    }

    pub fn end_set(&self) -> BTreeSet<Vertex> {
        self.paths.iter().filter_map(|p| p.end().cloned()).collect()
    }

    pub fn vertex_set(&self) -> BTreeSet<Vertex> {
        self.paths.iter().flat_map(|p| p.seq.iter().cloned()).collect()
    }

    pub fn arc_set(&self) -> BTreeSet<Arc> {
        self.paths.iter().flat_map(|p| p.arcs()).collect()
    }

    pub fn to_digraph(&self) -> Digraph {
        let mut d = Digraph::new();
        for p in &self.paths {
            d = d.union(&p.to_digraph());
        }
        d
    }

    pub fn is_in(&self, d: &Digraph) -> bool {
        self.paths.iter().all(|p| p.is_walk_in(d))
    }

    /// `V(L) ∩ V(H) ⊆ Start(L) ∪ End(L)`.
    pub fn is_internally_disjoint_from(&self, h: &Digraph) -> bool {
        let boundary: BTreeSet<&Vertex> = self
            .paths
            .iter()
            .flat_map(|p| [p.start(), p.end()])
            .flatten()
            .collect();
        self.paths
            .iter()
            .flat_map(|p| p.seq.iter())
            .all(|v| !h.has_vertex(v) || boundary.contains(v))
    }

    pub fn path_starting_at(&self, a: &str) -> Option<&Walk> {
        self.paths.iter().find(|p| p.start().map(|s| s.as_str()) == Some(a))
    }

    /// The linkage as a function: maps a start vertex to the end of its path.
    pub fn maps(&self, a: &str) -> Option<&Vertex> {
        self.path_starting_at(a).and_then(|p| p.end())
    }

    /// True if some path contains `v`.
    pub fn covers(&self, v: &str) -> bool {
        self.paths.iter().any(|p| p.contains(v))
    }
}

#[derive(Serialize, Deserialize)]
struct LinkageRepr {
    paths: Vec<Walk>,
}

impl Serialize for Linkage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LinkageRepr { paths: self.paths.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Linkage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = LinkageRepr::deserialize(deserializer)?;
        Linkage::new(repr.paths).map_err(serde::de::Error::custom)
    }
}

/// A collection of walks that may share vertices: the congested cousin of a
/// linkage. Carries its own congestion so callers can decide whether the
/// half-integral route back to an integral linkage applies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSystem {
    pub walks: Vec<Walk>,
}

impl PathSystem {
    pub fn new(walks: Vec<Walk>) -> Self {
        PathSystem { walks }
    }

    pub fn order(&self) -> usize {
        self.walks.len()
    }

    /// Maximum number of distinct walks any one vertex lies on.
    pub fn congestion(&self) -> usize {
        let mut count: BTreeMap<Vertex, usize> = BTreeMap::new();
        for w in &self.walks {
            for v in w.vertex_set() {
                *count.entry(v).or_insert(0) += 1;
            }
        }
        count.values().copied().max().unwrap_or(0)
    }

    pub fn to_digraph(&self) -> Digraph {
        let mut d = Digraph::new();
        for w in &self.walks {
            d = d.union(&w.to_digraph());
        }
        d
    }

    pub fn start_set(&self) -> BTreeSet<Vertex> {
        self.walks.iter().filter_map(|w| w.start().cloned()).collect()
    }

    pub fn end_set(&self) -> BTreeSet<Vertex> {
        self.walks.iter().filter_map(|w| w.end().cloned()).collect()
    }
}

/// Result of concatenating two linkages: either everything stayed disjoint
/// and simple, or the joined walks overlap and only a congested system
/// remains.
#[derive(Debug, Clone)]
pub enum ConcatOutcome {
    Integral(Linkage),
    Congested { system: PathSystem, congestion: usize },
}

/// Concatenates `p` and `q`: a path of `p` whose end is the start of a path
/// of `q` is joined with it; all other paths of either side are carried over
/// unchanged. If the joined walks are no longer pairwise disjoint simple
/// paths, the congested system is returned instead.
pub fn concat_linkages(p: &Linkage, q: &Linkage) -> ConcatOutcome {
    let mut used_q: BTreeSet<usize> = BTreeSet::new();
    let mut walks: Vec<Walk> = Vec::new();
    for pp in p.paths() {
        let mat = q
            .paths()
            .iter()
            .position(|qq| qq.start() == pp.end() && pp.end().is_some());
        match mat {
            Some(j) => {
                used_q.insert(j);
                let mut seq = pp.seq.clone();
                seq.extend(q.paths()[j].seq[1..].iter().cloned());
                walks.push(Walk::new(seq));
            }
            None => walks.push(pp.clone()),
        }
    }
    for (j, qq) in q.paths().iter().enumerate() {
        if !used_q.contains(&j) {
            walks.push(qq.clone());
        }
    }
    match Linkage::new(walks.clone()) {
        Ok(l) => ConcatOutcome::Integral(l),
        Err(_) => {
            let system = PathSystem::new(walks);
            let congestion = system.congestion();
            ConcatOutcome::Congested { system, congestion }
        }
    }
}

// ---------------------------------------------------------------------------
// Max-flow core: vertex-split network with unit vertex capacities.
// ---------------------------------------------------------------------------

const INF: u32 = u32::MAX / 2;

struct FlowNet {
    // edges[i] = (to, cap); edges[i^1] is the reverse edge.
    to: Vec<usize>,
    cap: Vec<u32>,
    adj: Vec<Vec<usize>>,
    n: usize,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet { to: Vec::new(), cap: Vec::new(), adj: vec![Vec::new(); n], n }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u32) -> usize {
        let id = self.to.len();
        self.to.push(to);
        self.cap.push(cap);
        self.adj[from].push(id);
        self.to.push(from);
        self.cap.push(0);
        self.adj[to].push(id + 1);
        id
    }

    /// Edmonds-Karp; deterministic because adjacency lists are built in
    /// lexicographic vertex order.
    fn max_flow(&mut self, s: usize, t: usize) -> u32 {
        let mut total = 0u32;
        loop {
            let mut pred: Vec<Option<usize>> = vec![None; self.n];
            let mut seen = vec![false; self.n];
            seen[s] = true;
            let mut queue = VecDeque::new();
            queue.push_back(s);
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    if self.cap[e] > 0 && !seen[self.to[e]] {
                        seen[self.to[e]] = true;
                        pred[self.to[e]] = Some(e);
                        if self.to[e] == t {
                            break 'bfs;
                        }
                        queue.push_back(self.to[e]);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck = u32::MAX;
            let mut v = t;
            while v != s {
                let e = pred[v].unwrap();
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = pred[v].unwrap();
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
                v = self.to[e ^ 1];
            }
            total += bottleneck;
        }
    }
}

/// Maximum `A`-`B` linkage together with a minimum `A`-`B` separator of the
/// same size (Menger duality). Vertices in `A ∩ B` yield zero-length paths.
/// Both certificates are deterministic for a fixed input.
pub fn menger(
    d: &Digraph,
    a: &BTreeSet<Vertex>,
    b: &BTreeSet<Vertex>,
) -> (Linkage, BTreeSet<Vertex>) {
    let verts: Vec<&Vertex> = d.vertices().collect();
    let idx: BTreeMap<&Vertex, usize> = verts.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let n = verts.len();
    let node_in = |i: usize| 2 * i;
    let node_out = |i: usize| 2 * i + 1;
    let s = 2 * n;
    let t = 2 * n + 1;
    let mut net = FlowNet::new(2 * n + 2);

    // Split arcs, recorded for separator extraction; edge id = split_edge[i].
    let mut split_edge = vec![usize::MAX; n];
    for i in 0..n {
        split_edge[i] = net.add_edge(node_in(i), node_out(i), 1);
    }
    for (u, v) in d.arcs() {
        net.add_edge(node_out(idx[u]), node_in(idx[v]), INF);
    }
    for av in a {
        if let Some(&i) = idx.get(av) {
            net.add_edge(s, node_in(i), INF);
        }
    }
    for bv in b {
        if let Some(&i) = idx.get(bv) {
            net.add_edge(node_out(i), t, INF);
        }
    }

    let flow = net.max_flow(s, t) as usize;

    // Separator first, while the flow is intact: a vertex is cut when its
    // in-node is residual-reachable from s but its out-node is not.
    let mut reach = vec![false; net.n];
    reach[s] = true;
    let mut queue = VecDeque::new();
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for &e in &net.adj[u] {
            if net.cap[e] > 0 && !reach[net.to[e]] {
                reach[net.to[e]] = true;
                queue.push_back(net.to[e]);
            }
        }
    }
    let mut separator: BTreeSet<Vertex> = BTreeSet::new();
    for i in 0..n {
        if reach[node_in(i)] && !reach[node_out(i)] {
            separator.insert(verts[i].clone());
        }
    }
    debug_assert_eq!(separator.len(), flow, "cut size must equal flow value");

    // Trace the flow paths from each source vertex in lexicographic order,
    // consuming flow as we go. Unit split capacities mean every out-node
    // carries at most one unit, so each step is forced and cyclic flow (which
    // occupies its own split arcs) is never entered.
    let positive = |net: &FlowNet, e: usize| -> u32 { net.cap[e ^ 1] };
    let mut paths: Vec<Walk> = Vec::new();
    for av in a {
        let Some(&ai) = idx.get(av) else { continue };
        let mut s_edge = None;
        for &e in &net.adj[s] {
            if e % 2 == 0 && net.to[e] == node_in(ai) {
                s_edge = Some(e);
            }
        }
        let Some(se) = s_edge else { continue };
        while positive(&net, se) > 0 {
            net.cap[se] += 1;
            net.cap[se ^ 1] -= 1;
            let mut seq: Vec<Vertex> = Vec::new();
            let mut cur = node_in(ai);
            loop {
                // cur is an in-node: traverse its split edge.
                let vi = cur / 2;
                seq.push(verts[vi].clone());
                let sp = split_edge[vi];
                debug_assert!(positive(&net, sp) > 0, "flow path broke at a split arc");
                net.cap[sp] += 1;
                net.cap[sp ^ 1] -= 1;
                // Move from the out-node along its unique positive edge.
                let out = node_out(vi);
                let mut next = None;
                for &e in &net.adj[out] {
                    if e % 2 == 0 && positive(&net, e) > 0 {
                        next = Some(e);
                        break;
                    }
                }
                let e = next.expect("flow conservation violated during path tracing");
                net.cap[e] += 1;
                net.cap[e ^ 1] -= 1;
                if net.to[e] == t {
                    break;
                }
                cur = net.to[e];
            }
            paths.push(Walk::new(seq));
        }
    }
    debug_assert_eq!(paths.len(), flow, "flow decomposition lost a path");

    let linkage = Linkage::new(paths).expect("flow decomposition yields disjoint paths");
    (linkage, separator)
}

/// Size of a maximum `A`-`B` linkage, without building certificates.
pub fn max_linkage_order(d: &Digraph, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>) -> usize {
    menger(d, a, b).0.order()
}

/// Extracts an integral linkage of order `k` from a congested path system by
/// running Menger on the union digraph between the walk starts and ends.
pub fn integralize(ps: &PathSystem, k: usize) -> Result<Linkage, OpError> {
    let union = ps.to_digraph();
    let a = ps.start_set();
    let b = ps.end_set();
    let (linkage, _) = menger(&union, &a, &b);
    if linkage.order() < k {
        return Err(OpError::pre(format!(
            "system only supports {} disjoint start-end paths, {k} required",
            linkage.order()
        )));
    }
    Ok(Linkage::new(linkage.into_paths().into_iter().take(k).collect())
        .expect("subset of a linkage is a linkage"))
}

/// Iteratively removes arcs outside `h` from the linkage while a full-order
/// linkage with the same endpoint sets survives; the result is minimal with
/// respect to `h` and has the same order, starts and ends.
pub fn minimalize(h: &Digraph, l: &Linkage) -> Linkage {
    let k = l.order();
    let starts = l.start_set();
    let ends = l.end_set();
    let mut current = l.clone();
    let mut banned: BTreeSet<Arc> = BTreeSet::new();
    loop {
        let work = current.to_digraph().union(h);
        let mut improved = false;
        for e in current.arc_set() {
            if h.has_arc(&e.0, &e.1) || banned.contains(&e) {
                continue;
            }
            let without = work.minus_arcs([&e]);
            let (cand, _) = menger(&without, &starts, &ends);
            if cand.order() >= k {
                current = Linkage::new(cand.into_paths().into_iter().take(k).collect())
                    .expect("menger output is a linkage");
                improved = true;
                break;
            } else {
                banned.insert(e);
            }
        }
        if !improved {
            return current;
        }
    }
}

/// Witness that a linkage fails weak `k`-minimality: a decomposition
/// `L1 · e · L2` of one of its paths such that `V(L1)` cannot be separated
/// from `V(L2)` by fewer than `k` vertices once `e` is removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakMinimalityViolation {
    pub path_index: usize,
    pub arc: Arc,
    pub linkage_order_found: usize,
}

/// Checks weak `k`-minimality of `l` with respect to `h`: for every
/// decomposition `L1 · e · L2` of a path of `l` at an arc `e` outside `h`,
/// `(l ∪ h) - e` must admit a `V(L1)`-`V(L2)` separator of size `< k`.
pub fn is_weakly_minimal(
    l: &Linkage,
    h: &Digraph,
    k: usize,
) -> Result<(), WeakMinimalityViolation> {
    let work = l.to_digraph().union(h);
    for (pi, p) in l.paths().iter().enumerate() {
        for i in 0..p.len() {
            let e = (p.seq[i].clone(), p.seq[i + 1].clone());
            if h.has_arc(&e.0, &e.1) {
                continue;
            }
            let without = work.minus_arcs([&e]);
            let l1: BTreeSet<Vertex> = p.seq[..=i].iter().cloned().collect();
            let l2: BTreeSet<Vertex> = p.seq[i + 1..].iter().cloned().collect();
            let found = max_linkage_order(&without, &l1, &l2);
            if found >= k {
                return Err(WeakMinimalityViolation {
                    path_index: pi,
                    arc: e,
                    linkage_order_found: found,
                });
            }
        }
    }
    Ok(())
}

/// Certificate that `a` is not well-linked to `b`: an equal-size subset pair
/// admitting no full linkage, plus the separator proving it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellLinkedFailure {
    pub a_subset: Vec<Vertex>,
    pub b_subset: Vec<Vertex>,
    pub separator: Vec<Vertex>,
}

/// Decides whether `a` is well-linked to `b` in `d` by enumerating all
/// equal-size subset pairs. Sets larger than `cap` raise an error rather
/// than silently running forever.
pub fn is_well_linked(
    d: &Digraph,
    a: &BTreeSet<Vertex>,
    b: &BTreeSet<Vertex>,
    cap: usize,
) -> Result<Option<WellLinkedFailure>, OpError> {
    if a.len() > cap || b.len() > cap {
        return Err(OpError::CapExceeded(format!(
            "well-linkedness check enumerates subsets; |A| = {}, |B| = {} exceed cap {cap}",
            a.len(),
            b.len()
        )));
    }
    let av: Vec<&Vertex> = a.iter().collect();
    let bv: Vec<&Vertex> = b.iter().collect();
    for s in 1..=av.len().min(bv.len()) {
        for asub in av.iter().combinations(s) {
            let aset: BTreeSet<Vertex> = asub.iter().map(|v| (**v).clone()).collect();
            for bsub in bv.iter().combinations(s) {
                let bset: BTreeSet<Vertex> = bsub.iter().map(|v| (**v).clone()).collect();
                let (linkage, separator) = menger(d, &aset, &bset);
                if linkage.order() < s {
                    return Ok(Some(WellLinkedFailure {
                        a_subset: aset.into_iter().collect(),
                        b_subset: bset.into_iter().collect(),
                        separator: separator.into_iter().collect(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Searches for a linkage realizing the exact start-end pairing given in
/// `pairs`, by backtracking over simple paths with flow-based pruning.
/// Returns `None` when provably no such linkage exists.
pub fn linkage_with_pairing(
    d: &Digraph,
    pairs: &[(Vertex, Vertex)],
    budget: &Budget,
) -> Result<Option<Linkage>, OpError> {
    for (s, t) in pairs {
        if !d.has_vertex(s) || !d.has_vertex(t) {
            return Ok(None);
        }
    }
    let adj = d.adjacency();

    fn feasible(
        d: &Digraph,
        pairs: &[(Vertex, Vertex)],
        from: usize,
        used: &BTreeSet<Vertex>,
    ) -> bool {
        // Necessary condition: the remaining starts must reach the remaining
        // ends with enough disjoint paths in the unused part of the graph.
        let rest = d.minus_vertices(used.iter());
        let a: BTreeSet<Vertex> = pairs[from..].iter().map(|p| p.0.clone()).collect();
        let b: BTreeSet<Vertex> = pairs[from..].iter().map(|p| p.1.clone()).collect();
        max_linkage_order(&rest, &a, &b) >= pairs.len() - from
    }

    fn extend(
        d: &Digraph,
        adj: &crate::digraph::Adjacency,
        pairs: &[(Vertex, Vertex)],
        pair_idx: usize,
        current: &mut Vec<Vertex>,
        used: &mut BTreeSet<Vertex>,
        done: &mut Vec<Walk>,
        budget: &Budget,
    ) -> Result<bool, OpError> {
        budget.tick()?;
        let target = &pairs[pair_idx].1;
        let here = current.last().unwrap().clone();
        if here == *target {
            // A simple path cannot continue through its own endpoint, so
            // reaching the target is the only way to finish this pair.
            done.push(Walk::new(current.clone()));
            if pair_idx + 1 == pairs.len() {
                return Ok(true);
            }
            let next_start = pairs[pair_idx + 1].0.clone();
            if !used.contains(&next_start) && feasible(d, pairs, pair_idx + 1, used) {
                current.clear();
                current.push(next_start.clone());
                used.insert(next_start.clone());
                if extend(d, adj, pairs, pair_idx + 1, current, used, done, budget)? {
                    return Ok(true);
                }
                used.remove(&next_start);
            }
            let back = done.pop().unwrap();
            *current = back.seq;
            return Ok(false);
        }
        for w in &adj.out[&here] {
            if used.contains(w) {
                continue;
            }
            current.push(w.clone());
            used.insert(w.clone());
            if extend(d, adj, pairs, pair_idx, current, used, done, budget)? {
                return Ok(true);
            }
            used.remove(w);
            current.pop();
        }
        Ok(false)
    }

    if pairs.is_empty() {
        return Ok(Some(Linkage::empty()));
    }
    // Distinct starts and ends are required for a pairing linkage, except a
    // pair may be degenerate (s = t gives a zero-length path).
    let starts: BTreeSet<&Vertex> = pairs.iter().map(|p| &p.0).collect();
    if starts.len() != pairs.len() {
        return Ok(None);
    }
    let ends: BTreeSet<&Vertex> = pairs.iter().map(|p| &p.1).collect();
    if ends.len() != pairs.len() {
        return Ok(None);
    }
    if !feasible(d, pairs, 0, &BTreeSet::new()) {
        return Ok(None);
    }
    let mut current = vec![pairs[0].0.clone()];
    let mut used: BTreeSet<Vertex> = [pairs[0].0.clone()].into_iter().collect();
    let mut done: Vec<Walk> = Vec::new();
    if extend(d, &adj, pairs, 0, &mut current, &mut used, &mut done, budget)? {
        Ok(Some(Linkage::new(done).expect("search respects disjointness")))
    } else {
        Ok(None)
    }
}

/// Certificate that `a` is not `r`-order-linked to `b`: an equal-size subset
/// pair forming an `r`-shift whose prescribed pairing admits no linkage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLinkedFailure {
    pub a_subset: Vec<Vertex>,
    pub b_subset: Vec<Vertex>,
    pub pairing: Vec<(Vertex, Vertex)>,
}

/// Decides whether the ordered set `a` is `r`-order-linked to the ordered set
/// `b` in `d`: every equal-size subset pair where `b'` is an `r`-shift of
/// `a'` must admit a linkage realizing the (unique order-preserving) pairing.
pub fn is_order_linked(
    d: &Digraph,
    a: &OrderedVertexSet,
    b: &OrderedVertexSet,
    r: usize,
    cap: usize,
    budget: &Budget,
) -> Result<Option<OrderLinkedFailure>, OpError> {
    validate_ordered_set(a)?;
    validate_ordered_set(b)?;
    if a.len() > cap || b.len() > cap {
        return Err(OpError::CapExceeded(format!(
            "order-linkedness check enumerates subsets; |A| = {}, |B| = {} exceed cap {cap}",
            a.len(),
            b.len()
        )));
    }
    for s in 1..=a.len().min(b.len()) {
        for a_idx in (0..a.len()).combinations(s) {
            for b_idx in (0..b.len()).combinations(s) {
                // The order-preserving bijection is positional; check the
                // shift conditions on full-set indices.
                if !a_idx.iter().zip(&b_idx).all(|(i, j)| i <= j) {
                    continue;
                }
                let moved = a_idx.iter().zip(&b_idx).filter(|(i, j)| i != j).count();
                if moved > r {
                    continue;
                }
                let pairs: Vec<(Vertex, Vertex)> = a_idx
                    .iter()
                    .zip(&b_idx)
                    .map(|(&i, &j)| (a[i].clone(), b[j].clone()))
                    .collect();
                if linkage_with_pairing(d, &pairs, budget)?.is_none() {
                    return Ok(Some(OrderLinkedFailure {
                        a_subset: a_idx.iter().map(|&i| a[i].clone()).collect(),
                        b_subset: b_idx.iter().map(|&j| b[j].clone()).collect(),
                        pairing: pairs,
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{gen_special, PatternKind};
    use crate::oracle;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn set(ids: &[&str]) -> BTreeSet<Vertex> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn linkage_constructor_validates() {
        assert!(Linkage::new(vec![Walk::of(&["a", "b"]), Walk::of(&["c"])]).is_ok());
        assert!(Linkage::new(vec![Walk::of(&["a", "b"]), Walk::of(&["b", "c"])]).is_err());
        assert!(Linkage::new(vec![Walk::of(&["a", "b", "a"])]).is_err());
        assert!(Linkage::new(vec![Walk::empty()]).is_err());
    }

    #[test]
    fn menger_on_disjoint_paths_graph() {
        // Two parallel a->...->b strands plus a chord.
        let d = Digraph::from_arcs([
            ("a1", "m1"),
            ("m1", "b1"),
            ("a2", "m2"),
            ("m2", "b2"),
            ("m1", "m2"),
        ]);
        let (l, sep) = menger(&d, &set(&["a1", "a2"]), &set(&["b1", "b2"]));
        assert_eq!(l.order(), 2);
        assert_eq!(sep.len(), 2);
        assert!(l.is_in(&d));
    }

    #[test]
    fn menger_bottleneck_of_one() {
        // Everything funnels through x.
        let d = Digraph::from_arcs([("a1", "x"), ("a2", "x"), ("x", "b1"), ("x", "b2")]);
        let (l, sep) = menger(&d, &set(&["a1", "a2"]), &set(&["b1", "b2"]));
        assert_eq!(l.order(), 1);
        assert_eq!(sep, set(&["x"]));
    }

    #[test]
    fn menger_counts_shared_vertices_as_zero_length_paths() {
        let d = Digraph::from_parts(
            ["a", "b", "c"].map(String::from),
            [("a".to_string(), "b".to_string())],
        )
        .unwrap();
        // c is in both A and B: it must appear as a zero-length path.
        let (l, sep) = menger(&d, &set(&["a", "c"]), &set(&["c", "b"]));
        assert_eq!(l.order(), 2);
        assert_eq!(sep.len(), 2);
        assert!(l.paths().iter().any(|p| p.seq == vec!["c".to_string()]));
    }

    #[test]
    fn menger_shared_vertex_can_block_the_only_route() {
        let d = Digraph::from_arcs([("a", "c"), ("c", "b")]);
        // Every a-b route passes through c, and c itself is a zero-length
        // path, so {c} hits everything.
        let (l, sep) = menger(&d, &set(&["a", "c"]), &set(&["c", "b"]));
        assert_eq!(l.order(), 1);
        assert_eq!(sep, set(&["c"]));
    }

    #[test]
    fn menger_with_empty_sides() {
        let d = Digraph::from_arcs([("a", "b")]);
        let (l, sep) = menger(&d, &BTreeSet::new(), &set(&["b"]));
        assert_eq!(l.order(), 0);
        assert!(sep.is_empty());
    }

    #[test]
    fn menger_separator_actually_separates() {
        let d = Digraph::from_arcs([
            ("a1", "x"),
            ("a2", "x"),
            ("a2", "y"),
            ("x", "b1"),
            ("y", "b1"),
            ("y", "b2"),
        ]);
        let a = set(&["a1", "a2"]);
        let b = set(&["b1", "b2"]);
        let (l, sep) = menger(&d, &a, &b);
        assert_eq!(l.order(), sep.len());
        let cut = d.minus_vertices(sep.iter());
        let reach = cut.reachable_from(&a.difference(&sep).cloned().collect());
        assert!(reach.intersection(&b).all(|v| sep.contains(v)));
    }

    #[test]
    fn menger_agrees_with_brute_force_on_random_digraphs() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..120 {
            let n = rng.gen_range(2..=6);
            let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
            let mut d = Digraph::new();
            for v in &names {
                d.add_vertex(v.clone());
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.35) {
                        d.add_arc(names[i].clone(), names[j].clone()).unwrap();
                    }
                }
            }
            let a: BTreeSet<Vertex> =
                names.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            let b: BTreeSet<Vertex> =
                names.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            let (l, sep) = menger(&d, &a, &b);
            let brute_paths = oracle::brute_max_disjoint_paths(&d, &a, &b);
            let brute_sep = oracle::brute_min_separator_size(&d, &a, &b);
            assert_eq!(l.order(), brute_paths, "linkage vs brute on {d:?} {a:?} {b:?}");
            assert_eq!(sep.len(), brute_sep, "separator vs brute on {d:?} {a:?} {b:?}");
            assert_eq!(l.order(), sep.len());
            for p in l.paths() {
                assert!(p.is_walk_in(&d));
                assert!(a.contains(p.start().unwrap()) && b.contains(p.end().unwrap()));
            }
        }
    }

    #[test]
    fn integralize_extracts_from_congested_system() {
        // Two walks sharing m; their union still has 1 disjoint path, and
        // with two disjoint strands it has 2.
        let w1 = Walk::of(&["a1", "m", "b1"]);
        let w2 = Walk::of(&["a2", "m", "b2"]);
        let ps = PathSystem::new(vec![w1, w2]);
        assert_eq!(ps.congestion(), 2);
        let one = integralize(&ps, 1).unwrap();
        assert_eq!(one.order(), 1);
        assert!(integralize(&ps, 2).is_err());

        let ps2 = PathSystem::new(vec![
            Walk::of(&["a1", "m", "b1"]),
            Walk::of(&["a2", "m", "b2"]),
            Walk::of(&["a3", "n", "b3"]),
        ]);
        let two = integralize(&ps2, 2).unwrap();
        assert_eq!(two.order(), 2);
    }

    #[test]
    fn concat_matches_by_endpoint_and_carries_rest() {
        let p = Linkage::new(vec![Walk::of(&["a", "b"]), Walk::of(&["c", "d"])]).unwrap();
        let q = Linkage::new(vec![Walk::of(&["b", "e"]), Walk::of(&["f", "g"])]).unwrap();
        match concat_linkages(&p, &q) {
            ConcatOutcome::Integral(l) => {
                assert_eq!(l.order(), 3);
                assert!(l.paths().contains(&Walk::of(&["a", "b", "e"])));
                assert!(l.paths().contains(&Walk::of(&["c", "d"])));
                assert!(l.paths().contains(&Walk::of(&["f", "g"])));
            }
            other => panic!("expected integral outcome, got {other:?}"),
        }
    }

    #[test]
    fn concat_reports_congestion_when_walks_collide() {
        let p = Linkage::new(vec![Walk::of(&["a", "x", "b"])]).unwrap();
        let q = Linkage::new(vec![Walk::of(&["b", "x", "c"])]).unwrap();
        match concat_linkages(&p, &q) {
            ConcatOutcome::Congested { system, congestion } => {
                assert_eq!(system.order(), 1);
                assert_eq!(congestion, 1);
                assert!(!system.walks[0].is_path());
            }
            other => panic!("expected congestion, got {other:?}"),
        }
    }

    #[test]
    fn minimalize_drops_detours() {
        // L takes a detour a -> x -> y -> b although H provides a -> b.
        let h = Digraph::from_arcs([("a", "b")]);
        let l = Linkage::new(vec![Walk::of(&["a", "x", "y", "b"])]).unwrap();
        let m = minimalize(&h, &l);
        assert_eq!(m.order(), 1);
        assert_eq!(m.paths()[0], Walk::of(&["a", "b"]));
        assert!(is_weakly_minimal(&m, &h, 1).is_ok());
    }

    #[test]
    fn minimalize_preserves_endpoints() {
        let h = Digraph::from_arcs([("m1", "m2")]);
        let l = Linkage::new(vec![
            Walk::of(&["a1", "m1", "b1"]),
            Walk::of(&["a2", "m2", "b2"]),
        ])
        .unwrap();
        let m = minimalize(&h, &l);
        assert_eq!(m.order(), 2);
        assert_eq!(m.start_set(), set(&["a1", "a2"]));
        assert_eq!(m.end_set(), set(&["b1", "b2"]));
    }

    #[test]
    fn weak_minimality_violation_is_reported() {
        // Two parallel routes between split halves: removing the middle arc
        // leaves 2 disjoint V(L1)-V(L2) routes, so k = 1 minimality fails.
        let l = Linkage::new(vec![Walk::of(&["a", "m", "b"])]).unwrap();
        let mut h = Digraph::new();
        h.add_arc("a", "x").unwrap();
        h.add_arc("x", "b").unwrap();
        h.add_arc("a", "y").unwrap();
        h.add_arc("y", "m").unwrap();
        let err = is_weakly_minimal(&l, &h, 1).unwrap_err();
        assert_eq!(err.path_index, 0);
        assert!(err.linkage_order_found >= 1);
    }

    #[test]
    fn h_minimal_implies_weakly_minimal_on_randoms() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..40 {
            let n = rng.gen_range(3..=7);
            let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
            let mut d = Digraph::new();
            for v in &names {
                d.add_vertex(v.clone());
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.4) {
                        d.add_arc(names[i].clone(), names[j].clone()).unwrap();
                    }
                }
            }
            let a: BTreeSet<Vertex> =
                names.iter().take(n / 2).cloned().collect();
            let b: BTreeSet<Vertex> =
                names.iter().skip(n / 2).cloned().collect();
            let (l, _) = menger(&d, &a, &b);
            if l.order() == 0 {
                continue;
            }
            // Random subgraph h of d.
            let mut h = Digraph::new();
            for v in d.vertices() {
                if rng.gen_bool(0.5) {
                    h.add_vertex(v.clone());
                }
            }
            for (u, v) in d.arcs() {
                if rng.gen_bool(0.3) {
                    h.add_arc(u.clone(), v.clone()).unwrap();
                }
            }
            let m = minimalize(&h, &l);
            assert_eq!(m.order(), l.order());
            assert_eq!(m.start_set(), l.start_set());
            assert_eq!(m.end_set(), l.end_set());
            assert!(
                is_weakly_minimal(&m, &h, m.order()).is_ok(),
                "minimalized linkage must be weakly |L|-minimal"
            );
        }
    }

    #[test]
    fn well_linked_on_complete_bipartite_gadget() {
        let mut d = Digraph::new();
        for i in 1..=3 {
            for j in 1..=3 {
                d.add_arc(format!("a{i}"), format!("b{j}")).unwrap();
            }
        }
        let a = set(&["a1", "a2", "a3"]);
        let b = set(&["b1", "b2", "b3"]);
        assert!(is_well_linked(&d, &a, &b, 12).unwrap().is_none());
    }

    #[test]
    fn well_linked_failure_has_certificate() {
        // a1,a2 both reach only b1: any 2-2 pair fails.
        let d = Digraph::from_arcs([("a1", "b1"), ("a2", "b1")]);
        let fail = is_well_linked(&d, &set(&["a1", "a2"]), &set(&["b1", "b2"]), 12)
            .unwrap()
            .expect("must fail");
        assert!(fail.a_subset.len() == fail.b_subset.len());
        assert!(fail.separator.len() < fail.a_subset.len());
    }

    #[test]
    fn well_linked_cap_guard() {
        let mut d = Digraph::new();
        let big: BTreeSet<Vertex> = (0..13).map(|i| format!("v{i}")).collect();
        for v in &big {
            d.add_vertex(v.clone());
        }
        match is_well_linked(&d, &big, &big, 12) {
            Err(OpError::CapExceeded(_)) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn pairing_linkage_respects_prescription() {
        // Crossing demands: a1 -> b2 and a2 -> b1 in a graph where only the
        // identity pairing is realizable.
        let d = Digraph::from_arcs([("a1", "b1"), ("a2", "b2")]);
        let budget = Budget::default();
        let id = linkage_with_pairing(
            &d,
            &[("a1".into(), "b1".into()), ("a2".into(), "b2".into())],
            &budget,
        )
        .unwrap();
        assert!(id.is_some());
        let crossed = linkage_with_pairing(
            &d,
            &[("a1".into(), "b2".into()), ("a2".into(), "b1".into())],
            &budget,
        )
        .unwrap();
        assert!(crossed.is_none());
    }

    #[test]
    fn pairing_linkage_zero_length() {
        let mut d = Digraph::new();
        d.add_vertex("a");
        let budget = Budget::default();
        let l = linkage_with_pairing(&d, &[("a".into(), "a".into())], &budget)
            .unwrap()
            .unwrap();
        assert_eq!(l.order(), 1);
        assert_eq!(l.paths()[0].len(), 0);
    }

    #[test]
    fn order_linked_on_crossing_free_matching() {
        // Identity matching only: 0-order-linked but not 1-order-linked,
        // since a 1-shift pairs a1 with b2 when the subset is {a1},{b2}.
        let d = Digraph::from_arcs([("a1", "b1"), ("a2", "b2")]);
        let a: OrderedVertexSet = vec!["a1".into(), "a2".into()];
        let b: OrderedVertexSet = vec!["b1".into(), "b2".into()];
        let budget = Budget::default();
        assert!(is_order_linked(&d, &a, &b, 0, 12, &budget).unwrap().is_none());
        let fail = is_order_linked(&d, &a, &b, 1, 12, &budget).unwrap();
        assert!(fail.is_some());
    }

    #[test]
    fn order_linked_on_complete_bipartite() {
        let mut d = Digraph::new();
        for i in 1..=3 {
            for j in 1..=3 {
                d.add_arc(format!("a{i}"), format!("b{j}")).unwrap();
            }
        }
        let a: OrderedVertexSet = vec!["a1".into(), "a2".into(), "a3".into()];
        let b: OrderedVertexSet = vec!["b1".into(), "b2".into(), "b3".into()];
        let budget = Budget::default();
        // Complete bipartite realizes every shift pairing.
        assert!(is_order_linked(&d, &a, &b, 3, 12, &budget).unwrap().is_none());
    }

    #[test]
    fn order_linked_rejects_backward_shifts() {
        // The shift must move forward: pairing a2 with b1 is not a shift,
        // so its absence does not hurt.
        let d = Digraph::from_arcs([("a1", "b1"), ("a1", "b2"), ("a2", "b2")]);
        let a: OrderedVertexSet = vec!["a1".into(), "a2".into()];
        let b: OrderedVertexSet = vec!["b1".into(), "b2".into()];
        let budget = Budget::default();
        assert!(is_order_linked(&d, &a, &b, 2, 12, &budget).unwrap().is_none());
    }

    #[test]
    fn internal_disjointness_check() {
        let l = Linkage::new(vec![Walk::of(&["a", "m", "b"])]).unwrap();
        let h1 = Digraph::from_arcs([("a", "q"), ("q", "b")]);
        assert!(l.is_internally_disjoint_from(&h1));
        let mut h2 = Digraph::new();
        h2.add_vertex("m");
        assert!(!l.is_internally_disjoint_from(&h2));
    }

    #[test]
    fn cycle_pattern_linkage_functions() {
        let c = gen_special(PatternKind::Cycle, 3).unwrap();
        let (l, _) = menger(&c, &set(&["u0"]), &set(&["u2"]));
        assert_eq!(l.order(), 1);
        assert_eq!(l.maps("u0"), Some(&"u2".to_string()));
    }
}
