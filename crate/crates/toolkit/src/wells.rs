//! Paths and cycles of well-linked sets: witness verification, slicing and
//! width restriction, shortcutting and jump analysis of back-linkages, and
//! the re-clustering constructions built on top of them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::digraph::{Adjacency, Arc, Digraph, Vertex, Walk};
use crate::linkage::{
    integralize, is_order_linked, is_well_linked, menger, validate_ordered_set, Linkage,
    OrderedVertexSet, PathSystem,
};
use crate::report::{Budget, OpError, Report};

/// One cluster of a witness: a subgraph together with its ordered entry set
/// `A` and exit set `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub graph: Digraph,
    pub a: OrderedVertexSet,
    pub b: OrderedVertexSet,
}

impl Cluster {
    pub fn a_set(&self) -> BTreeSet<Vertex> {
        self.a.iter().cloned().collect()
    }

    pub fn b_set(&self) -> BTreeSet<Vertex> {
        self.b.iter().cloned().collect()
    }
}

/// Linkedness requirement imposed on every cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WellsMode {
    /// Every pair of equal-size subsets of `A` and `B` admits a full linkage.
    WellLinked,
    /// The ordered set `A` is `r`-order-linked to the ordered set `B`.
    OrderLinked { r: usize },
}

/// A path (cyclic: a cycle) of well-linked sets: pairwise disjoint clusters
/// `S_0..S_ℓ` chained by linkages `P_i` from `B(S_i)` to `A(S_{i+1})`, each
/// of order `w` and internally disjoint from every cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellsWitness {
    pub clusters: Vec<Cluster>,
    pub linkages: Vec<Linkage>,
    pub mode: WellsMode,
    pub strict: bool,
    pub uniform: bool,
    pub cyclic: bool,
}

impl WellsWitness {
    /// Interface size `w`, read off the first cluster.
    pub fn width(&self) -> usize {
        self.clusters.first().map(|c| c.a.len()).unwrap_or(0)
    }

    /// Number of linking steps: cluster count minus one for a path, the
    /// cluster count itself for a cycle.
    pub fn length(&self) -> usize {
        if self.cyclic {
            self.clusters.len()
        } else {
            self.clusters.len().saturating_sub(1)
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Union of all cluster graphs and linkage paths.
    pub fn to_digraph(&self) -> Digraph {
        let mut d = Digraph::new();
        for c in &self.clusters {
            d = d.union(&c.graph);
        }
        for p in &self.linkages {
            d = d.union(&p.to_digraph());
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpDirection {
    Forward,
    Backward,
}

/// A subpath of a back-linkage path, classified by the witness indices of
/// its first and last vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jump {
    pub path: Walk,
    pub from_index: usize,
    pub to_index: usize,
    pub direction: JumpDirection,
    pub length: usize,
}

/// Jump inventory of a linkage over a witness: every backward jump between
/// consecutive witness visits plus the longest forward jump of each path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpReport {
    pub jumps: Vec<Jump>,
    pub cluster_by_cluster: bool,
}

/// Case selector for `find_linkage_in_pows`, mirroring the four hypothesis
/// shapes under which a full-order linkage is guaranteed to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingCase {
    /// `X` inside a single exit set, `Y` inside a single later entry set.
    L1,
    /// `X` scattered (pairwise index gaps at least two), `Y` inside one entry set.
    L2,
    /// `X` inside a single exit set, `Y` scattered.
    L3,
    /// Both sides scattered.
    L4,
}

pub(crate) struct Memberships {
    pub(crate) cluster: BTreeMap<Vertex, usize>,
    pub(crate) linkage: BTreeMap<Vertex, usize>,
}

impl Memberships {
    /// Smallest and largest witness index a vertex belongs to, if any.
    pub(crate) fn range(&self, v: &Vertex) -> Option<(usize, usize)> {
        match (self.cluster.get(v), self.linkage.get(v)) {
            (None, None) => None,
            (Some(&i), None) => Some((i, i)),
            (None, Some(&p)) => Some((p, p)),
            (Some(&i), Some(&p)) => Some((i.min(p), i.max(p))),
        }
    }
}

/// Vertex-to-index maps for a witness. A vertex may sit in one cluster, on
/// one linkage, or in cluster `i` while on linkage `i` (an exit vertex) or
/// linkage `i−1` (an entry vertex); anything else is rejected.
pub(crate) fn memberships(w: &WellsWitness) -> Result<Memberships, OpError> {
    let n = w.clusters.len();
    if n == 0 {
        return Err(OpError::pre("the witness has no clusters"));
    }
    let mut cluster = BTreeMap::new();
    for (i, c) in w.clusters.iter().enumerate() {
        for v in c.graph.vertices() {
            if let Some(j) = cluster.insert(v.clone(), i) {
                return Err(OpError::pre(format!(
                    "vertex {v} lies in clusters {j} and {i}, so witness indices are ambiguous"
                )));
            }
        }
    }
    let mut linkage = BTreeMap::new();
    for (p, l) in w.linkages.iter().enumerate() {
        for v in l.vertex_set() {
            if let Some(q) = linkage.insert(v.clone(), p) {
                return Err(OpError::pre(format!(
                    "vertex {v} lies on linkages {q} and {p}, so witness indices are ambiguous"
                )));
            }
        }
    }
    for (v, &p) in &linkage {
        if let Some(&i) = cluster.get(v) {
            let tail = p == i;
            let head = if w.cyclic { (p + 1) % n == i } else { p + 1 == i };
            if !tail && !head {
                return Err(OpError::pre(format!(
                    "vertex {v} lies in cluster {i} and on linkage {p}, so witness indices are ambiguous"
                )));
            }
        }
    }
    Ok(Memberships { cluster, linkage })
}

struct Visit {
    pos: usize,
    lo: usize,
    hi: usize,
}

fn indexed_visits(p: &Walk, mem: &Memberships) -> Vec<Visit> {
    p.seq
        .iter()
        .enumerate()
        .filter_map(|(pos, v)| mem.range(v).map(|(lo, hi)| Visit { pos, lo, hi }))
        .collect()
}

/// Union of clusters `lo..=hi` and linkages `lo..hi` of a non-cyclic witness.
pub(crate) fn slice_digraph(w: &WellsWitness, lo: usize, hi: usize) -> Digraph {
    let mut d = Digraph::new();
    for c in &w.clusters[lo..=hi] {
        d = d.union(&c.graph);
    }
    for p in &w.linkages[lo..hi] {
        d = d.union(&p.to_digraph());
    }
    d
}

/// Routes `need` vertex-disjoint paths from `from` to `to` in `d`, failing
/// with a precondition error naming `what` if the flow falls short.
fn route_full(
    d: &Digraph,
    from: &BTreeSet<Vertex>,
    to: &BTreeSet<Vertex>,
    need: usize,
    what: &str,
) -> Result<Linkage, OpError> {
    let (flow, separator) = menger(d, from, to);
    if flow.order() < need {
        return Err(OpError::pre(format!(
            "{what} admits only {} of {need} required paths; separator {separator:?}",
            flow.order()
        )));
    }
    let paths: Vec<Walk> = flow.into_paths().into_iter().take(need).collect();
    Ok(Linkage::new(paths).expect("paths of a linkage stay disjoint"))
}

fn minus_arcs_into(d: &Digraph, targets: &BTreeSet<Vertex>) -> Digraph {
    let drop: Vec<Arc> =
        d.arcs().filter(|(_, v)| targets.contains(v)).cloned().collect();
    d.minus_arcs(drop.iter())
}

fn minus_arcs_out_of(d: &Digraph, sources: &BTreeSet<Vertex>) -> Digraph {
    let drop: Vec<Arc> =
        d.arcs().filter(|(u, _)| sources.contains(u)).cloned().collect();
    d.minus_arcs(drop.iter())
}

fn minus_cluster_except(d: &Digraph, c: &Cluster, keep: &BTreeSet<Vertex>) -> Digraph {
    let drop: Vec<Vertex> =
        c.graph.vertices().filter(|v| !keep.contains(*v)).cloned().collect();
    d.minus_vertices(drop.iter())
}

fn ordered_subset(
    s: &BTreeSet<Vertex>,
    full: &OrderedVertexSet,
    what: &str,
) -> Result<OrderedVertexSet, OpError> {
    let picked: OrderedVertexSet = full.iter().filter(|v| s.contains(*v)).cloned().collect();
    if picked.len() != s.len() {
        return Err(OpError::pre(format!("{what} does not contain all of {s:?}")));
    }
    Ok(picked)
}

fn check_backlinkage_endpoints(w: &WellsWitness, r: &Linkage) -> Result<(), OpError> {
    let last = w.clusters.len() - 1;
    if !r.start_set().is_subset(&w.clusters[last].b_set()) {
        return Err(OpError::pre(
            "a back-linkage must start inside the exit set of the last cluster",
        ));
    }
    if !r.end_set().is_subset(&w.clusters[0].a_set()) {
        return Err(OpError::pre(
            "a back-linkage must end inside the entry set of the first cluster",
        ));
    }
    Ok(())
}

/// Checks every defining clause of a path or cycle of well-linked sets and
/// reports all violations found. Interface sets larger than `cap` make the
/// per-cluster linkedness checks error out instead of enumerating forever;
/// the budget meters the linkedness and strictness searches.
pub fn verify_wells(w: &WellsWitness, cap: usize, budget: &Budget) -> Result<Report, OpError> {
    let mut rep = Report::ok();
    let n = w.clusters.len();
    if n == 0 {
        rep.add("wells.cluster_count", vec![], "a witness needs at least one cluster");
        return Ok(rep);
    }
    let width = w.width();
    if width == 0 {
        rep.add("wells.width_positive", vec![], "interface sets must be nonempty");
        return Ok(rep);
    }
    let expected = if w.cyclic { n } else { n - 1 };
    let counts_ok = w.linkages.len() == expected;
    if !counts_ok {
        rep.add(
            "wells.linkage_count",
            vec![],
            format!("expected {expected} linkages for {n} clusters, found {}", w.linkages.len()),
        );
    }

    let mut members_ok = vec![true; n];
    for (i, c) in w.clusters.iter().enumerate() {
        if let Err(e) = validate_ordered_set(&c.a) {
            rep.add("wells.ab_ordered", vec![i as i64], format!("entry set: {e}"));
            members_ok[i] = false;
        }
        if let Err(e) = validate_ordered_set(&c.b) {
            rep.add("wells.ab_ordered", vec![i as i64], format!("exit set: {e}"));
            members_ok[i] = false;
        }
        if c.a.len() != width || c.b.len() != width {
            rep.add(
                "wells.ab_size",
                vec![i as i64],
                format!("|A| = {}, |B| = {}, width is {width}", c.a.len(), c.b.len()),
            );
        }
        let aset = c.a_set();
        let bset = c.b_set();
        if !aset.is_disjoint(&bset) {
            rep.add(
                "wells.ab_disjoint",
                vec![i as i64],
                format!("shared vertices {:?}", aset.intersection(&bset).collect::<Vec<_>>()),
            );
        }
        let missing: Vec<&Vertex> =
            aset.union(&bset).filter(|v| !c.graph.has_vertex(v)).collect();
        if !missing.is_empty() {
            rep.add(
                "wells.ab_members",
                vec![i as i64],
                format!("interface vertices {missing:?} are not in the cluster"),
            );
            members_ok[i] = false;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let shared: Vec<&Vertex> = w.clusters[i]
                .graph
                .vertex_set()
                .intersection(w.clusters[j].graph.vertex_set())
                .collect();
            if !shared.is_empty() {
                rep.add(
                    "wells.clusters_disjoint",
                    vec![i as i64, j as i64],
                    format!("clusters share {shared:?}"),
                );
            }
        }
    }

    if counts_ok {
        for (i, p) in w.linkages.iter().enumerate() {
            let next = (i + 1) % n;
            let ci = &w.clusters[i];
            let cn = &w.clusters[next];
            if p.order() != width {
                rep.add(
                    "wells.linkage_order",
                    vec![i as i64],
                    format!("order {} instead of {width}", p.order()),
                );
            }
            if p.start_set() != ci.b_set() {
                rep.add(
                    "wells.linkage_starts",
                    vec![i as i64],
                    format!("starts {:?} differ from the exit set of cluster {i}", p.start_set()),
                );
            }
            if p.end_set() != cn.a_set() {
                rep.add(
                    "wells.linkage_ends",
                    vec![i as i64],
                    format!("ends {:?} differ from the entry set of cluster {next}", p.end_set()),
                );
            }
            let pverts = p.vertex_set();
            if next == i {
                let allowed: BTreeSet<Vertex> =
                    p.start_set().union(&p.end_set()).cloned().collect();
                let bad: Vec<&Vertex> = pverts
                    .intersection(ci.graph.vertex_set())
                    .filter(|v| !allowed.contains(*v))
                    .collect();
                if !bad.is_empty() {
                    rep.add(
                        "wells.linkage_internal",
                        vec![i as i64],
                        format!("interior vertices {bad:?} fall inside the cluster"),
                    );
                }
            } else {
                let starts = p.start_set();
                let bad_tail: Vec<&Vertex> = pverts
                    .intersection(ci.graph.vertex_set())
                    .filter(|v| !starts.contains(*v))
                    .collect();
                if !bad_tail.is_empty() {
                    rep.add(
                        "wells.linkage_internal_tail",
                        vec![i as i64],
                        format!("vertices {bad_tail:?} fall inside cluster {i} beyond its exit set"),
                    );
                }
                let ends = p.end_set();
                let bad_head: Vec<&Vertex> = pverts
                    .intersection(cn.graph.vertex_set())
                    .filter(|v| !ends.contains(*v))
                    .collect();
                if !bad_head.is_empty() {
                    rep.add(
                        "wells.linkage_internal_head",
                        vec![i as i64],
                        format!(
                            "vertices {bad_head:?} fall inside cluster {next} beyond its entry set"
                        ),
                    );
                }
            }
            for c in 0..n {
                if c == i || c == next {
                    continue;
                }
                let hit: Vec<&Vertex> =
                    pverts.intersection(w.clusters[c].graph.vertex_set()).collect();
                if !hit.is_empty() {
                    rep.add(
                        "wells.linkage_avoids_clusters",
                        vec![i as i64, c as i64],
                        format!("linkage vertices {hit:?} fall inside cluster {c}"),
                    );
                }
            }
        }
        for i in 0..w.linkages.len() {
            for j in i + 1..w.linkages.len() {
                let vi = w.linkages[i].vertex_set();
                let vj = w.linkages[j].vertex_set();
                let shared: Vec<&Vertex> = vi.intersection(&vj).collect();
                if !shared.is_empty() {
                    rep.add(
                        "wells.linkages_disjoint",
                        vec![i as i64, j as i64],
                        format!("linkages share {shared:?}"),
                    );
                }
            }
        }
    }

    for (i, c) in w.clusters.iter().enumerate() {
        if !members_ok[i] {
            continue;
        }
        match w.mode {
            WellsMode::WellLinked => {
                if let Some(f) = is_well_linked(&c.graph, &c.a_set(), &c.b_set(), cap)? {
                    rep.add(
                        "wells.well_linked",
                        vec![i as i64],
                        format!(
                            "subsets {:?} and {:?} admit no full linkage; separator {:?}",
                            f.a_subset, f.b_subset, f.separator
                        ),
                    );
                }
            }
            WellsMode::OrderLinked { r } => {
                if let Some(f) = is_order_linked(&c.graph, &c.a, &c.b, r, cap, budget)? {
                    rep.add(
                        "wells.order_linked",
                        vec![i as i64],
                        format!(
                            "subsets {:?} and {:?} admit no linkage realizing {:?}",
                            f.a_subset, f.b_subset, f.pairing
                        ),
                    );
                }
            }
        }
        if w.strict {
            let covered = strict_cover(c, budget)?;
            let missed: Vec<&Vertex> =
                c.graph.vertex_set().iter().filter(|v| !covered.contains(*v)).collect();
            if !missed.is_empty() {
                rep.add(
                    "wells.strict",
                    vec![i as i64],
                    format!("vertices {missed:?} lie on no entry-exit path"),
                );
            }
        }
    }

    if w.uniform {
        match w.mode {
            WellsMode::WellLinked => {
                rep.add(
                    "wells.uniform_mode",
                    vec![],
                    "the uniform flag applies to order-linked witnesses only",
                );
            }
            WellsMode::OrderLinked { .. } => {
                if counts_ok {
                    for (i, p) in w.linkages.iter().enumerate() {
                        let next = (i + 1) % n;
                        let ci = &w.clusters[i];
                        let cn = &w.clusters[next];
                        if ci.b.len() != cn.a.len() {
                            continue;
                        }
                        for t in 0..ci.b.len() {
                            if p.maps(&ci.b[t]) != Some(&cn.a[t]) {
                                rep.add(
                                    "wells.uniform",
                                    vec![i as i64, t as i64],
                                    format!(
                                        "position {t} of the exit ordering maps to {:?} instead of {}",
                                        p.maps(&ci.b[t]),
                                        cn.a[t]
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Vertices of the cluster lying on at least one simple path from an entry
/// vertex to an exit vertex, found by exhaustive path search.
fn strict_cover(c: &Cluster, budget: &Budget) -> Result<BTreeSet<Vertex>, OpError> {
    let adj = c.graph.adjacency();
    let total = c.graph.vertex_count();
    let bset = c.b_set();
    let mut covered = BTreeSet::new();
    for a in &c.a {
        if covered.len() == total {
            break;
        }
        if !c.graph.has_vertex(a) {
            continue;
        }
        let mut stack = vec![a.clone()];
        let mut on_stack: BTreeSet<Vertex> = stack.iter().cloned().collect();
        extend_cover(&adj, &bset, &mut stack, &mut on_stack, &mut covered, total, budget)?;
    }
    Ok(covered)
}

fn extend_cover(
    adj: &Adjacency,
    bset: &BTreeSet<Vertex>,
    stack: &mut Vec<Vertex>,
    on_stack: &mut BTreeSet<Vertex>,
    covered: &mut BTreeSet<Vertex>,
    total: usize,
    budget: &Budget,
) -> Result<(), OpError> {
    budget.tick()?;
    let v = stack.last().expect("the search stack never empties").clone();
    if bset.contains(&v) {
        for u in stack.iter() {
            covered.insert(u.clone());
        }
    }
    if covered.len() == total {
        return Ok(());
    }
    if let Some(outs) = adj.out.get(&v) {
        for u in outs {
            if on_stack.contains(u) {
                continue;
            }
            stack.push(u.clone());
            on_stack.insert(u.clone());
            extend_cover(adj, bset, stack, on_stack, covered, total, budget)?;
            on_stack.remove(u);
            stack.pop();
            if covered.len() == total {
                return Ok(());
            }
        }
    }
    Ok(())
}

/// The sub-witness on clusters `S_i..S_j` and linkages `P_i..P_{j−1}`.
pub fn sub_slice(w: &WellsWitness, i: usize, j: usize) -> Result<WellsWitness, OpError> {
    if w.cyclic {
        return Err(OpError::pre("slicing is defined for non-cyclic witnesses"));
    }
    if i > j || j > w.length() {
        return Err(OpError::pre(format!("slice range {i}..{j} exceeds 0..{}", w.length())));
    }
    Ok(WellsWitness {
        clusters: w.clusters[i..=j].to_vec(),
        linkages: w.linkages[i..j].to_vec(),
        mode: w.mode,
        strict: w.strict,
        uniform: w.uniform,
        cyclic: false,
    })
}

/// Restricts a well-linked witness to the prescribed entry and exit subsets,
/// thinning every interface and linkage to `target` positions. Clusters are
/// kept whole; a per-cluster flow check certifies that the chosen subsets
/// stay fully routable, so a shortfall exposes an invalid input witness.
pub fn restrict_width(
    w: &WellsWitness,
    a0: &OrderedVertexSet,
    bl: &OrderedVertexSet,
    target: usize,
) -> Result<WellsWitness, OpError> {
    if w.cyclic {
        return Err(OpError::pre("width restriction is defined for non-cyclic witnesses"));
    }
    if !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre(
            "width restriction needs a well-linked witness; order-linkedness does not transfer to arbitrary subsets",
        ));
    }
    validate_ordered_set(a0)?;
    validate_ordered_set(bl)?;
    if a0.len() != bl.len() || a0.len() != target {
        return Err(OpError::pre(format!(
            "the chosen subsets must both have the target size {target}, got {} and {}",
            a0.len(),
            bl.len()
        )));
    }
    if target == 0 || target > w.width() {
        return Err(OpError::pre(format!(
            "the target width must lie in 1..={}, got {target}",
            w.width()
        )));
    }
    let l = w.length();
    let a0set: BTreeSet<Vertex> = a0.iter().cloned().collect();
    let blset: BTreeSet<Vertex> = bl.iter().cloned().collect();
    let mut cur_a =
        ordered_subset(&a0set, &w.clusters[0].a, "the entry set of the first cluster")?;
    let mut clusters = Vec::new();
    let mut linkages = Vec::new();
    for i in 0..=l {
        let c = &w.clusters[i];
        let b_new: OrderedVertexSet = if i == l {
            ordered_subset(&blset, &c.b, "the exit set of the last cluster")?
        } else {
            c.b.iter().take(target).cloned().collect()
        };
        let from: BTreeSet<Vertex> = cur_a.iter().cloned().collect();
        let to: BTreeSet<Vertex> = b_new.iter().cloned().collect();
        let (flow, separator) = menger(&c.graph, &from, &to);
        if flow.order() < target {
            return Err(OpError::pre(format!(
                "cluster {i} routes only {} of {target} paths between the chosen interface subsets (separator {separator:?}); the witness is not well-linked",
                flow.order()
            )));
        }
        clusters.push(Cluster { graph: c.graph.clone(), a: cur_a.clone(), b: b_new.clone() });
        if i < l {
            let p = &w.linkages[i];
            let mut sub_paths = Vec::new();
            let mut images = BTreeSet::new();
            for bv in &b_new {
                let path = p.path_starting_at(bv).ok_or_else(|| {
                    OpError::pre(format!("linkage {i} has no path starting at {bv}"))
                })?;
                images.insert(path.end().expect("linkage paths are nonempty").clone());
                sub_paths.push(path.clone());
            }
            linkages.push(Linkage::new(sub_paths)?);
            cur_a = ordered_subset(
                &images,
                &w.clusters[i + 1].a,
                &format!("the entry set of cluster {}", i + 1),
            )?;
        }
    }
    Ok(WellsWitness {
        clusters,
        linkages,
        mode: WellsMode::WellLinked,
        strict: false,
        uniform: false,
        cyclic: false,
    })
}

/// Shortcuts a back-linkage across a slice: routes from `B(S_j)` onto the
/// starts of `r`, from the ends of `r` into `A(S_i)`, concatenates, and
/// integralizes the congestion-2 system into a `B(S_j)`-`A(S_i)` linkage of
/// order `t` whose intersection with `slice(i, j)` is confined to the
/// vertices of `r` plus its own endpoints.
pub fn shortcut_backlinkage(
    w: &WellsWitness,
    r: &Linkage,
    i: usize,
    j: usize,
    t: usize,
) -> Result<Linkage, OpError> {
    if w.cyclic {
        return Err(OpError::pre("shortcutting is defined for non-cyclic witnesses"));
    }
    if !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre("shortcutting needs a well-linked witness"));
    }
    if t == 0 {
        return Err(OpError::pre("the target order must be positive"));
    }
    let l = w.length();
    if i > j || j > l {
        return Err(OpError::pre(format!("slice range {i}..{j} exceeds 0..{l}")));
    }
    if w.width() < 2 * t {
        return Err(OpError::pre(format!(
            "width {} is below the {} a half-integral shortcut of order {t} consumes",
            w.width(),
            2 * t
        )));
    }
    if r.order() != 2 * t {
        return Err(OpError::pre(format!(
            "the back-linkage must have order exactly {}, got {}",
            2 * t,
            r.order()
        )));
    }
    check_backlinkage_endpoints(w, r)?;

    let lb = if j == l {
        None
    } else {
        let keep = w.clusters[j].b_set();
        let mut d = slice_digraph(w, j, l);
        d = minus_cluster_except(&d, &w.clusters[j], &keep);
        d = minus_arcs_into(&d, &keep);
        Some(route_full(&d, &keep, &r.start_set(), 2 * t, "the exit-side shortcut routing")?)
    };
    let la = if i == 0 {
        None
    } else {
        let keep = w.clusters[i].a_set();
        let mut d = slice_digraph(w, 0, i);
        d = minus_cluster_except(&d, &w.clusters[i], &keep);
        d = minus_arcs_out_of(&d, &keep);
        Some(route_full(&d, &r.end_set(), &keep, 2 * t, "the entry-side shortcut routing")?)
    };

    let mut by_end: BTreeMap<Vertex, &Walk> = BTreeMap::new();
    if let Some(lb) = &lb {
        for p in lb.paths() {
            by_end.insert(p.end().expect("linkage paths are nonempty").clone(), p);
        }
    }
    let mut walks = Vec::new();
    for rho in r.paths() {
        let start = rho.start().expect("linkage paths are nonempty");
        let mut walk = if lb.is_some() {
            let pre = by_end.get(start).ok_or_else(|| {
                OpError::Internal("the exit-side routing missed a back-linkage start".into())
            })?;
            (*pre).concat(rho)?
        } else {
            rho.clone()
        };
        if let Some(la) = &la {
            let tail = la
                .path_starting_at(walk.end().expect("walks stay nonempty"))
                .ok_or_else(|| {
                    OpError::Internal("the entry-side routing missed a back-linkage end".into())
                })?;
            walk = walk.concat(tail)?;
        }
        walks.push(walk);
    }
    integralize(&PathSystem::new(walks), t)
}

/// Finds an `X`-`Y` linkage of order `|X|` inside the slice spanned by the
/// index map `f`, under one of the four hypothesis shapes. On a verified
/// witness the hypotheses guarantee existence, so a flow shortfall is
/// reported as an internal error rather than a routing failure.
pub fn find_linkage_in_pows(
    w: &WellsWitness,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    f: &BTreeMap<Vertex, usize>,
    case: RoutingCase,
) -> Result<Linkage, OpError> {
    if w.cyclic {
        return Err(OpError::pre("linkage search is defined for non-cyclic witnesses"));
    }
    if !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre("linkage search needs a well-linked witness"));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(OpError::pre(format!(
            "X and Y must be nonempty and of equal size, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let l = w.length();
    for v in x.union(y) {
        let fv = *f
            .get(v)
            .ok_or_else(|| OpError::pre(format!("the index map does not cover {v}")))?;
        if fv > l {
            return Err(OpError::pre(format!("index {fv} of {v} exceeds the length {l}")));
        }
        let on_cluster = w.clusters[fv].graph.has_vertex(v);
        let on_linkage = fv < w.linkages.len() && w.linkages[fv].covers(v);
        if !on_cluster && !on_linkage {
            return Err(OpError::pre(format!(
                "{v} lies neither in cluster {fv} nor on linkage {fv}"
            )));
        }
    }
    let max_x = x.iter().map(|v| f[v]).max().expect("x is nonempty");
    let min_y = y.iter().map(|v| f[v]).min().expect("y is nonempty");
    if max_x + 2 > min_y {
        return Err(OpError::pre(format!(
            "every X index must sit at least two below every Y index; found {max_x} against {min_y}"
        )));
    }
    let in_b = |s: &BTreeSet<Vertex>| -> Option<usize> {
        (0..w.clusters.len()).find(|&i| s.is_subset(&w.clusters[i].b_set()))
    };
    let in_a = |s: &BTreeSet<Vertex>| -> Option<usize> {
        (0..w.clusters.len()).find(|&i| s.is_subset(&w.clusters[i].a_set()))
    };
    let scattered = |s: &BTreeSet<Vertex>| -> bool {
        let mut idx: Vec<usize> = s.iter().map(|v| f[v]).collect();
        idx.sort_unstable();
        idx.windows(2).all(|p| p[1] - p[0] >= 2)
    };
    match case {
        RoutingCase::L1 => {
            let bi =
                in_b(x).ok_or_else(|| OpError::pre("case l1 needs X inside a single exit set"))?;
            let aj =
                in_a(y).ok_or_else(|| OpError::pre("case l1 needs Y inside a single entry set"))?;
            if bi >= aj {
                return Err(OpError::pre(format!(
                    "case l1 needs the exit cluster {bi} strictly before the entry cluster {aj}"
                )));
            }
        }
        RoutingCase::L2 => {
            if !scattered(x) {
                return Err(OpError::pre("case l2 needs pairwise X index gaps of at least two"));
            }
            in_a(y).ok_or_else(|| OpError::pre("case l2 needs Y inside a single entry set"))?;
        }
        RoutingCase::L3 => {
            in_b(x).ok_or_else(|| OpError::pre("case l3 needs X inside a single exit set"))?;
            if !scattered(y) {
                return Err(OpError::pre("case l3 needs pairwise Y index gaps of at least two"));
            }
        }
        RoutingCase::L4 => {
            if !scattered(x) || !scattered(y) {
                return Err(OpError::pre(
                    "case l4 needs pairwise index gaps of at least two on both sides",
                ));
            }
        }
    }
    let lo = x.iter().map(|v| f[v]).min().expect("x is nonempty");
    let hi = y
        .iter()
        .map(|v| if w.clusters[f[v]].graph.has_vertex(v) { f[v] } else { f[v] + 1 })
        .max()
        .expect("y is nonempty");
    let (flow, _) = menger(&slice_digraph(w, lo, hi), x, y);
    if flow.order() < x.len() {
        return Err(OpError::Internal(format!(
            "the hypotheses hold but the flow realizes only {} of {} paths; the witness cannot be a verified one",
            flow.order(),
            x.len()
        )));
    }
    Ok(flow)
}

/// Classifies how a linkage travels over a witness: every backward jump
/// between consecutive witness visits, the longest forward jump of each
/// path, and whether the whole linkage moves cluster by cluster.
pub fn detect_jumps(w: &WellsWitness, r: &Linkage) -> Result<JumpReport, OpError> {
    if w.cyclic {
        return Err(OpError::pre("jump analysis is defined for non-cyclic witnesses"));
    }
    let mem = memberships(w)?;
    let mut jumps = Vec::new();
    for (pi, p) in r.paths().iter().enumerate() {
        let visits = indexed_visits(p, &mem);
        if visits.is_empty() {
            return Err(OpError::pre(format!(
                "path {pi} of the linkage never meets the witness"
            )));
        }
        for pair in visits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.hi > b.lo {
                jumps.push(Jump {
                    path: p.slice(a.pos, b.pos),
                    from_index: a.hi,
                    to_index: b.lo,
                    direction: JumpDirection::Backward,
                    length: a.hi - b.lo,
                });
            }
        }
        let mut best: Option<Jump> = None;
        let mut min_lo = usize::MAX;
        let mut min_pos = 0usize;
        for v in &visits {
            if v.lo < min_lo {
                min_lo = v.lo;
                min_pos = v.pos;
            }
            if v.hi > min_lo {
                let length = v.hi - min_lo;
                if best.as_ref().map_or(true, |b| length > b.length) {
                    best = Some(Jump {
                        path: p.slice(min_pos, v.pos),
                        from_index: min_lo,
                        to_index: v.hi,
                        direction: JumpDirection::Forward,
                        length,
                    });
                }
            }
        }
        if let Some(jump) = best {
            jumps.push(jump);
        }
    }
    let cluster_by_cluster = jumps.iter().all(|j| j.length <= 1);
    Ok(JumpReport { jumps, cluster_by_cluster })
}

/// Builds a cycle of well-linked sets from a witness slice that a
/// back-linkage passes by without entering: shortcuts the back-linkage
/// across the slice, restricts the slice onto the shortcut's endpoint sets,
/// and closes the cycle with the shortcut itself.
pub fn cows_from_avoiding_backlinkage(
    w: &WellsWitness,
    r: &Linkage,
    i: usize,
    target_len: usize,
    target_width: usize,
) -> Result<WellsWitness, OpError> {
    if w.cyclic {
        return Err(OpError::pre("the construction starts from a non-cyclic witness"));
    }
    if !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre("the construction needs a well-linked witness"));
    }
    if target_width == 0 || target_len == 0 {
        return Err(OpError::pre("target length and width must be positive"));
    }
    if w.width() < 2 * target_width {
        return Err(OpError::pre(format!(
            "width {} is below the {} the shortcut consumes",
            w.width(),
            2 * target_width
        )));
    }
    let j = i + target_len - 1;
    if j > w.length() {
        return Err(OpError::pre(format!(
            "slice {i}..{j} exceeds the witness length {}",
            w.length()
        )));
    }
    if r.order() < 2 * target_width {
        return Err(OpError::pre(format!(
            "the back-linkage must have order at least {}, got {}",
            2 * target_width,
            r.order()
        )));
    }
    check_backlinkage_endpoints(w, r)?;
    if !r.is_internally_disjoint_from(&slice_digraph(w, i, j)) {
        return Err(OpError::pre(
            "the back-linkage must be internally disjoint from the sliced clusters and linkages",
        ));
    }
    let trimmed = Linkage::new(r.paths()[..2 * target_width].to_vec())?;
    let wrap = shortcut_backlinkage(w, &trimmed, i, j, target_width)?;
    let sub = sub_slice(w, i, j)?;
    let a0 = ordered_subset(
        &wrap.end_set(),
        &w.clusters[i].a,
        "the entry set of the first sliced cluster",
    )?;
    let bl = ordered_subset(
        &wrap.start_set(),
        &w.clusters[j].b,
        "the exit set of the last sliced cluster",
    )?;
    let restricted = restrict_width(&sub, &a0, &bl, target_width)?;
    let mut linkages = restricted.linkages;
    linkages.push(wrap);
    Ok(WellsWitness {
        clusters: restricted.clusters,
        linkages,
        mode: WellsMode::WellLinked,
        strict: false,
        uniform: false,
        cyclic: true,
    })
}

struct JumpCertificate {
    arc: Arc,
    linkage: Linkage,
}

/// Materializes the contradiction behind an over-long forward jump: extends
/// the jump backwards over witness arcs to a non-witness arc `e`, places one
/// band of width `j` around every third stripe of the jumped range, and
/// routes one witness path per band from the prefix to the suffix of the
/// back-linkage path. The resulting order-`m` linkage avoids `e` and defeats
/// weak `m`-minimality.
fn long_jump_certificate(
    w: &WellsWitness,
    p: &Walk,
    visits: &[Visit],
    t1: usize,
    t2: usize,
    j: usize,
    m: usize,
    host: &Digraph,
    mem: &Memberships,
) -> Result<JumpCertificate, OpError> {
    let mut tstar = t1;
    while tstar > 0 && host.has_arc(&p.seq[tstar - 1], &p.seq[tstar]) {
        tstar -= 1;
    }
    if tstar == 0 {
        return Err(OpError::Internal("jump extension walked back to the path start".into()));
    }
    let e = (p.seq[tstar - 1].clone(), p.seq[tstar].clone());
    let s = mem
        .range(&p.seq[tstar])
        .map(|(lo, _)| lo)
        .ok_or_else(|| OpError::Internal("the extended jump start left the witness".into()))?;
    let mut used: BTreeSet<Vertex> = BTreeSet::new();
    let mut paths = Vec::new();
    for q in 1..=m {
        let a_band = (s + (3 * q - 3) * j, s + (3 * q - 2) * j - 1);
        let b_band = (s + (3 * q - 1) * j, s + 3 * q * j - 1);
        let va = visits
            .iter()
            .find(|v| v.pos < tstar && v.lo <= a_band.1 && v.hi >= a_band.0)
            .ok_or_else(|| {
                OpError::Internal(format!(
                    "no prefix visit meets indices {}..{}",
                    a_band.0, a_band.1
                ))
            })?;
        let vb = visits
            .iter()
            .find(|v| v.pos >= t2 && v.lo <= b_band.1 && v.hi >= b_band.0)
            .ok_or_else(|| {
                OpError::Internal(format!(
                    "no suffix visit meets indices {}..{}",
                    b_band.0, b_band.1
                ))
            })?;
        let fa = va.lo.max(a_band.0);
        let fb = vb.lo.max(b_band.0);
        let from = &p.seq[va.pos];
        let to = &p.seq[vb.pos];
        let hi = if w.clusters[fb].graph.has_vertex(to) { fb } else { fb + 1 };
        let d = slice_digraph(w, fa, hi.min(w.length()));
        let path = bfs_path(&d, from, to, &used).ok_or_else(|| {
            OpError::Internal(format!("no route from {from} to {to} inside indices {fa}..{hi}"))
        })?;
        for v in path.vertex_set() {
            used.insert(v);
        }
        paths.push(path);
    }
    Ok(JumpCertificate { arc: e, linkage: Linkage::new(paths)? })
}

pub(crate) fn bfs_path(
    d: &Digraph,
    from: &Vertex,
    to: &Vertex,
    forbidden: &BTreeSet<Vertex>,
) -> Option<Walk> {
    if forbidden.contains(from) || forbidden.contains(to) {
        return None;
    }
    if !d.has_vertex(from) || !d.has_vertex(to) {
        return None;
    }
    let adj = d.adjacency();
    let mut prev: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut seen: BTreeSet<Vertex> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(from.clone());
    queue.push_back(from.clone());
    while let Some(u) = queue.pop_front() {
        if &u == to {
            let mut seq = vec![u.clone()];
            let mut cur = u;
            while let Some(pv) = prev.get(&cur) {
                seq.push(pv.clone());
                cur = pv.clone();
            }
            seq.reverse();
            return Some(Walk::new(seq));
        }
        if let Some(outs) = adj.out.get(&u) {
            for vtx in outs {
                if seen.contains(vtx) || forbidden.contains(vtx) {
                    continue;
                }
                seen.insert(vtx.clone());
                prev.insert(vtx.clone(), u.clone());
                queue.push_back(vtx.clone());
            }
        }
    }
    None
}

/// Re-clusters a strict witness so the given weakly `m`-minimal back-linkage
/// meets it cluster by cluster. A forward jump longer than `3mj` contradicts
/// weak `m`-minimality, so finding one raises a precondition error carrying
/// the contradicting linkage as a serialized certificate; otherwise the
/// witness is re-clustered at stride `3mj` and the back-linkage, trimmed to
/// the width, moves cluster by cluster over the result.
pub fn enforce_cluster_by_cluster(
    w: &WellsWitness,
    r: &Linkage,
    j: usize,
    m: usize,
    target_len: usize,
) -> Result<(WellsWitness, Linkage), OpError> {
    if w.cyclic {
        return Err(OpError::pre("re-clustering is defined for non-cyclic witnesses"));
    }
    if !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre("re-clustering needs a well-linked witness"));
    }
    if !w.strict {
        return Err(OpError::pre("re-clustering needs a strict witness"));
    }
    if j == 0 || m == 0 || target_len == 0 {
        return Err(OpError::pre("j, m and the target length must be positive"));
    }
    let width = w.width();
    if width == 0 {
        return Err(OpError::pre("the witness width must be positive"));
    }
    let stride = 3 * m * j;
    if w.length() < stride * target_len {
        return Err(OpError::pre(format!(
            "length {} is below the required 3·j·m·targetLen = {}",
            w.length(),
            stride * target_len
        )));
    }
    if r.order() < width {
        return Err(OpError::pre(format!(
            "the back-linkage order {} is below the width {width}",
            r.order()
        )));
    }
    check_backlinkage_endpoints(w, r)?;
    let mem = memberships(w)?;
    let host = w.to_digraph();

    for (pi, p) in r.paths().iter().enumerate() {
        let visits = indexed_visits(p, &mem);
        if visits.is_empty() {
            return Err(OpError::pre(format!(
                "path {pi} of the back-linkage never meets the witness"
            )));
        }
        for pair in visits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.hi > b.lo && a.hi - b.lo >= j {
                return Err(OpError::pre(format!(
                    "path {pi} takes a backward jump of length {} from index {} to {}, breaking the bound {j}",
                    a.hi - b.lo,
                    a.hi,
                    b.lo
                )));
            }
        }
        let mut min_lo = usize::MAX;
        let mut min_pos = 0usize;
        for v in &visits {
            if v.lo < min_lo {
                min_lo = v.lo;
                min_pos = v.pos;
            }
            if v.hi > min_lo && v.hi - min_lo > stride {
                let cert =
                    long_jump_certificate(w, p, &visits, min_pos, v.pos, j, m, &host, &mem)?;
                return Err(OpError::pre(format!(
                    "path {pi} takes a forward jump of length {} from index {} to {}, contradicting weak {m}-minimality at arc ({}, {}); certificate: {}",
                    v.hi - min_lo,
                    min_lo,
                    v.hi,
                    cert.arc.0,
                    cert.arc.1,
                    serde_json::to_string(&cert.linkage).expect("linkages serialize"),
                )));
            }
        }
    }

    let origin: Vec<usize> = (0..target_len).map(|k| k * stride).chain([w.length()]).collect();
    let clusters: Vec<Cluster> = origin.iter().map(|&t| w.clusters[t].clone()).collect();
    let mut linkages = Vec::new();
    for k in 0..target_len {
        let (left, right) = (origin[k], origin[k + 1]);
        let keep_b = w.clusters[left].b_set();
        let keep_a = w.clusters[right].a_set();
        let mut d = slice_digraph(w, left, right);
        d = minus_cluster_except(&d, &w.clusters[left], &keep_b);
        d = minus_cluster_except(&d, &w.clusters[right], &keep_a);
        d = minus_arcs_into(&d, &keep_b);
        d = minus_arcs_out_of(&d, &keep_a);
        linkages.push(route_full(&d, &keep_b, &keep_a, width, &format!("re-clustering step {k}"))?);
    }
    let out = WellsWitness {
        clusters,
        linkages,
        mode: WellsMode::WellLinked,
        strict: w.strict,
        uniform: false,
        cyclic: false,
    };
    let kept = Linkage::new(r.paths()[..width].to_vec())?;
    let report = detect_jumps(&out, &kept)?;
    if !report.cluster_by_cluster {
        let worst = report
            .jumps
            .iter()
            .max_by_key(|x| x.length)
            .expect("a jump breaks the property");
        return Err(OpError::Internal(format!(
            "the re-clustered witness still admits a {:?} jump of length {} from index {} to {}",
            worst.direction, worst.length, worst.from_index, worst.to_index
        )));
    }
    Ok((out, kept))
}

/// Generates a synthetic well-linked witness: complete bipartite clusters
/// (entry vertices `s{i}a{t}`, exit vertices `s{i}b{t}`) joined by
/// length-two linkage paths through fresh vertices `q{i}x{t}`.
pub fn gen_wells(width: usize, length: usize, cyclic: bool) -> Result<WellsWitness, OpError> {
    if width == 0 {
        return Err(OpError::pre("width must be positive"));
    }
    if cyclic && length == 0 {
        return Err(OpError::pre("a cycle needs length at least one"));
    }
    let n = if cyclic { length } else { length + 1 };
    let mut clusters = Vec::new();
    for i in 0..n {
        let a: OrderedVertexSet = (0..width).map(|t| format!("s{i}a{t}")).collect();
        let b: OrderedVertexSet = (0..width).map(|t| format!("s{i}b{t}")).collect();
        let mut g = Digraph::new();
        for av in &a {
            for bv in &b {
                g.add_arc(av.clone(), bv.clone())?;
            }
        }
        clusters.push(Cluster { graph: g, a, b });
    }
    let steps = if cyclic { n } else { n - 1 };
    let mut linkages = Vec::new();
    for i in 0..steps {
        let next = (i + 1) % n;
        let paths: Vec<Walk> = (0..width)
            .map(|t| {
                Walk::new(vec![
                    format!("s{i}b{t}"),
                    format!("q{i}x{t}"),
                    format!("s{next}a{t}"),
                ])
            })
            .collect();
        linkages.push(Linkage::new(paths)?);
    }
    Ok(WellsWitness {
        clusters,
        linkages,
        mode: WellsMode::WellLinked,
        strict: true,
        uniform: false,
        cyclic,
    })
}
