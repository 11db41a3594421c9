//! Minor models: embeddings of a small pattern digraph inside a host.
//!
//! A butterfly model maps every pattern vertex to a subgraph of the host
//! shaped like an in-tree and an out-tree glued at a shared root, and every
//! pattern arc to a host path from the tail's out-tree to the head's in-tree.
//! A subdivision model is the special case where every vertex image is a
//! single vertex and arc images meet only at shared endpoints.
//!
//! Verification checks exactly those clauses. In particular two arc images
//! of a butterfly model may cross each other: the clauses constrain arc
//! images against vertex images, not against one another. The search in
//! [`find_butterfly_minor`] embraces that reading, which lets it route every
//! arc image independently once the vertex images are fixed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::digraph::{Adjacency, Digraph, Vertex, Walk};
use crate::report::{Budget, OpError, Report};

/// Which clause set a model is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Butterfly,
    Subdivision,
}

/// The image of one pattern arc: a path of the host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcImage {
    pub tail: Vertex,
    pub head: Vertex,
    pub walk: Walk,
}

/// An embedding of a pattern digraph inside a host digraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorModel {
    pub kind: ModelKind,
    pub vertex_images: BTreeMap<Vertex, Digraph>,
    pub arc_images: Vec<ArcImage>,
}

impl MinorModel {
    /// The image of the pattern arc `(tail, head)`, if the model has one.
    pub fn arc_image(&self, tail: &str, head: &str) -> Option<&Walk> {
        self.arc_images
            .iter()
            .find(|ai| ai.tail == tail && ai.head == head)
            .map(|ai| &ai.walk)
    }

    /// The model embedding `d` into itself vertex by vertex.
    pub fn identity(d: &Digraph) -> MinorModel {
        let vertex_images = d
            .vertices()
            .map(|v| {
                let mut img = Digraph::new();
                img.add_vertex(v.clone());
                (v.clone(), img)
            })
            .collect();
        let arc_images = d
            .arcs()
            .map(|(u, v)| ArcImage {
                tail: u.clone(),
                head: v.clone(),
                walk: Walk::new(vec![u.clone(), v.clone()]),
            })
            .collect();
        MinorModel {
            kind: ModelKind::Butterfly,
            vertex_images,
            arc_images,
        }
    }
}

/// Reinterpret a subdivision model as a butterfly model. Singleton vertex
/// images are trivially in-tree plus out-tree, and subdivision arc images
/// satisfy the butterfly clauses verbatim, so the result verifies whenever
/// the input does.
pub fn subdivision_as_butterfly(m: &MinorModel) -> MinorModel {
    MinorModel {
        kind: ModelKind::Butterfly,
        vertex_images: m.vertex_images.clone(),
        arc_images: m.arc_images.clone(),
    }
}

/// One way of reading a digraph as an in-tree and an out-tree glued at a
/// root: `in_side` is the in-tree's vertex set, `out_side` the out-tree's,
/// and the two sides share exactly the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootSplit {
    pub root: Vertex,
    pub in_side: BTreeSet<Vertex>,
    pub out_side: BTreeSet<Vertex>,
}

/// All valid root splits of `s`. Empty exactly when `s` is not an in-tree
/// and an out-tree glued at a root. A path admits every vertex as root, so
/// splits are not unique in general.
pub fn tree_shape_roots(s: &Digraph) -> Vec<RootSplit> {
    let mut splits = Vec::new();
    for r in s.vertices() {
        let mut in_side = BTreeSet::from([r.clone()]);
        let mut queue = VecDeque::from([r.clone()]);
        while let Some(x) = queue.pop_front() {
            for w in s.in_neighbours(&x) {
                if in_side.insert(w.clone()) {
                    queue.push_back(w);
                }
            }
        }
        let out_side = s.reachable_from(&BTreeSet::from([r.clone()]));

        let meet_is_root = in_side.intersection(&out_side).eq([r].into_iter());
        let covers = in_side.union(&out_side).count() == s.vertex_count();
        let in_degrees_ok = in_side
            .iter()
            .filter(|x| *x != r)
            .all(|x| s.out_degree(x) == 1);
        let out_degrees_ok = out_side
            .iter()
            .filter(|x| *x != r)
            .all(|x| s.in_degree(x) == 1);
        let arc_count_ok = s.arc_count() == (in_side.len() - 1) + (out_side.len() - 1);
        if meet_is_root && covers && in_degrees_ok && out_degrees_ok && arc_count_ok {
            splits.push(RootSplit {
                root: r.clone(),
                in_side,
                out_side,
            });
        }
    }
    splits
}

/// The root splits of the image of `v` that serve every arc image incident
/// to `v`: each arc leaving `v` must start in the split's out side and each
/// arc entering `v` must end in its in side.
fn splits_serving<'a>(v: &Vertex, splits: &'a [RootSplit], m: &MinorModel) -> Vec<&'a RootSplit> {
    splits
        .iter()
        .filter(|rs| {
            m.arc_images.iter().all(|ai| {
                let start_ok = ai.tail != *v
                    || ai.walk.start().is_some_and(|s| rs.out_side.contains(s));
                let end_ok =
                    ai.head != *v || ai.walk.end().is_some_and(|e| rs.in_side.contains(e));
                start_ok && end_ok
            })
        })
        .collect()
}

/// Check `m` as an embedding of `h` into `d` against the clauses of its
/// kind. Structural defects (missing or surplus images, images outside the
/// host, non-path arc images) short-circuit the clause checks, since those
/// would only repeat the same findings less precisely.
pub fn verify_minor_model(d: &Digraph, h: &Digraph, m: &MinorModel) -> Report {
    let mut rep = Report::ok();

    for v in h.vertices() {
        if !m.vertex_images.contains_key(v) {
            rep.add(
                "model.vertex_images_cover",
                vec![],
                format!("no image for pattern vertex {v}"),
            );
        }
    }
    for v in m.vertex_images.keys() {
        if !h.has_vertex(v) {
            rep.add(
                "model.vertex_images_cover",
                vec![],
                format!("image given for {v}, which is not a pattern vertex"),
            );
        }
    }

    let mut arc_keys: BTreeMap<(Vertex, Vertex), usize> = BTreeMap::new();
    for (i, ai) in m.arc_images.iter().enumerate() {
        if let Some(first) = arc_keys.insert((ai.tail.clone(), ai.head.clone()), i) {
            rep.add(
                "model.arc_image_duplicate",
                vec![first as i64, i as i64],
                format!("two images for pattern arc ({}, {})", ai.tail, ai.head),
            );
        }
        if !h.has_arc(&ai.tail, &ai.head) {
            rep.add(
                "model.arc_images_cover",
                vec![i as i64],
                format!("image given for ({}, {}), which is not a pattern arc", ai.tail, ai.head),
            );
        }
    }
    for (u, v) in h.arcs() {
        if !arc_keys.contains_key(&(u.clone(), v.clone())) {
            rep.add(
                "model.arc_images_cover",
                vec![],
                format!("no image for pattern arc ({u}, {v})"),
            );
        }
    }

    for (v, img) in &m.vertex_images {
        if img.is_empty() || !img.is_subgraph_of(d) {
            rep.add(
                "model.vertex_image_in_host",
                vec![],
                format!("image of {v} is not a nonempty subgraph of the host"),
            );
        }
    }
    for (i, ai) in m.arc_images.iter().enumerate() {
        if ai.walk.is_empty() || !ai.walk.is_walk_in(d) || !ai.walk.is_path() {
            rep.add(
                "model.arc_image_path",
                vec![i as i64],
                format!("image of ({}, {}) is not a path of the host", ai.tail, ai.head),
            );
        }
    }
    if !rep.is_ok() {
        return rep;
    }

    match m.kind {
        ModelKind::Butterfly => butterfly_clauses(m, &mut rep),
        ModelKind::Subdivision => subdivision_clauses(m, &mut rep),
    }
    rep
}

fn butterfly_clauses(m: &MinorModel, rep: &mut Report) {
    let vs: Vec<&Vertex> = m.vertex_images.keys().collect();

    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let a = m.vertex_images[vs[i]].vertex_set();
            let b = m.vertex_images[vs[j]].vertex_set();
            if let Some(x) = a.intersection(&b).next() {
                rep.add(
                    "model.vertex_images_disjoint",
                    vec![i as i64, j as i64],
                    format!("images of {} and {} share {x}", vs[i], vs[j]),
                );
            }
        }
    }

    for (i, ai) in m.arc_images.iter().enumerate() {
        let on_walk = ai.walk.vertex_set();
        for (j, v) in vs.iter().enumerate() {
            if **v == ai.tail || **v == ai.head {
                continue;
            }
            if let Some(x) = m.vertex_images[*v]
                .vertex_set()
                .intersection(&on_walk)
                .next()
            {
                rep.add(
                    "model.vertex_arc_disjoint",
                    vec![j as i64, i as i64],
                    format!(
                        "image of {} meets the image of non-incident arc ({}, {}) at {x}",
                        v, ai.tail, ai.head
                    ),
                );
            }
        }
    }

    let mut splits: BTreeMap<&Vertex, Vec<RootSplit>> = BTreeMap::new();
    for (j, (v, img)) in m.vertex_images.iter().enumerate() {
        let roots = tree_shape_roots(img);
        if roots.is_empty() {
            rep.add(
                "model.vertex_image_shape",
                vec![j as i64],
                format!("image of {v} is not an in-tree and an out-tree glued at a root"),
            );
        }
        splits.insert(v, roots);
    }

    let mut endpoint_failed: BTreeSet<&Vertex> = BTreeSet::new();
    for (i, ai) in m.arc_images.iter().enumerate() {
        let start = ai.walk.start().expect("nonempty checked above");
        let end = ai.walk.end().expect("nonempty checked above");
        let tail_splits = &splits[&ai.tail];
        if !tail_splits.is_empty() && !tail_splits.iter().any(|rs| rs.out_side.contains(start)) {
            rep.add(
                "model.arc_image_start",
                vec![i as i64],
                format!(
                    "image of ({}, {}) starts at {start}, outside every out-tree of the image of {}",
                    ai.tail, ai.head, ai.tail
                ),
            );
            endpoint_failed.insert(&ai.tail);
        }
        let head_splits = &splits[&ai.head];
        if !head_splits.is_empty() && !head_splits.iter().any(|rs| rs.in_side.contains(end)) {
            rep.add(
                "model.arc_image_end",
                vec![i as i64],
                format!(
                    "image of ({}, {}) ends at {end}, outside every in-tree of the image of {}",
                    ai.tail, ai.head, ai.head
                ),
            );
            endpoint_failed.insert(&ai.head);
        }
    }

    for (j, v) in vs.iter().enumerate() {
        let roots = &splits[*v];
        if roots.is_empty() || endpoint_failed.contains(*v) {
            continue;
        }
        if splits_serving(v, roots, m).is_empty() {
            rep.add(
                "model.root_consistency",
                vec![j as i64],
                format!("no single root of the image of {v} serves all incident arc images"),
            );
        }
    }
}

fn subdivision_clauses(m: &MinorModel, rep: &mut Report) {
    let mut spot: BTreeMap<&Vertex, &Vertex> = BTreeMap::new();
    for (j, (v, img)) in m.vertex_images.iter().enumerate() {
        if img.vertex_count() == 1 && img.arc_count() == 0 {
            spot.insert(v, img.vertices().next().expect("single vertex"));
        } else {
            rep.add(
                "model.vertex_image_single",
                vec![j as i64],
                format!("image of {v} is not a single vertex"),
            );
        }
    }

    let vs: Vec<&Vertex> = m.vertex_images.keys().collect();
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            if let (Some(a), Some(b)) = (spot.get(vs[i]), spot.get(vs[j])) {
                if a == b {
                    rep.add(
                        "model.vertex_images_disjoint",
                        vec![i as i64, j as i64],
                        format!("images of {} and {} are both {a}", vs[i], vs[j]),
                    );
                }
            }
        }
    }

    for (i, ai) in m.arc_images.iter().enumerate() {
        let (Some(lu), Some(lv)) = (spot.get(&ai.tail), spot.get(&ai.head)) else {
            continue;
        };
        if ai.walk.start() != Some(*lu) || ai.walk.end() != Some(*lv) {
            rep.add(
                "model.arc_image_endpoints",
                vec![i as i64],
                format!(
                    "image of ({}, {}) does not run from {lu} to {lv}",
                    ai.tail, ai.head
                ),
            );
        }
    }

    let placed: BTreeSet<&Vertex> = spot.values().copied().collect();
    for (i, ai) in m.arc_images.iter().enumerate() {
        if ai.walk.len() < 2 {
            continue;
        }
        for x in &ai.walk.seq[1..ai.walk.seq.len() - 1] {
            if placed.contains(x) {
                rep.add(
                    "model.arc_image_internal_clear",
                    vec![i as i64],
                    format!(
                        "image of ({}, {}) passes through the vertex image {x}",
                        ai.tail, ai.head
                    ),
                );
                break;
            }
        }
    }

    for i in 0..m.arc_images.len() {
        for j in i + 1..m.arc_images.len() {
            let a = &m.arc_images[i];
            let b = &m.arc_images[j];
            let mut allowed = BTreeSet::new();
            for x in [&a.tail, &a.head] {
                if (*x == b.tail || *x == b.head) && spot.contains_key(x) {
                    allowed.insert(*spot.get(x).expect("present"));
                }
            }
            let on_b = b.walk.vertex_set();
            if let Some(x) = a
                .walk
                .vertex_set()
                .intersection(&on_b)
                .find(|x| !allowed.contains(*x))
            {
                rep.add(
                    "model.arc_images_disjoint",
                    vec![i as i64, j as i64],
                    format!(
                        "images of ({}, {}) and ({}, {}) share {x}",
                        a.tail, a.head, b.tail, b.head
                    ),
                );
            }
        }
    }
}

/// Walk from `from` to the split's root along the in-tree, where every
/// non-root vertex has a unique outgoing arc.
fn climb_to_root(img: &Digraph, rs: &RootSplit, from: &Vertex) -> Vec<Vertex> {
    let mut seq = vec![from.clone()];
    let mut cur = from.clone();
    while cur != rs.root {
        let next = img
            .out_neighbours(&cur)
            .into_iter()
            .next()
            .expect("in-tree vertices have an outgoing arc");
        seq.push(next.clone());
        cur = next;
    }
    seq
}

/// Walk from the split's root to `to` along the out-tree, where every
/// non-root vertex has a unique incoming arc.
fn descend_from_root(img: &Digraph, rs: &RootSplit, to: &Vertex) -> Vec<Vertex> {
    let mut seq = vec![to.clone()];
    let mut cur = to.clone();
    while cur != rs.root {
        let prev = img
            .in_neighbours(&cur)
            .into_iter()
            .next()
            .expect("out-tree vertices have an incoming arc");
        seq.push(prev.clone());
        cur = prev;
    }
    seq.reverse();
    seq
}

/// Convert a butterfly model of a pattern with all in- and out-degrees at
/// most 2 and total degree at most 3 into a subdivision model of the same
/// pattern in the same host.
///
/// Each pattern vertex is placed at a junction of its image: the meeting
/// point of the two entering arc images (in-degree 2), the parting point of
/// the two leaving arc images (out-degree 2), or the image's root. Arc
/// images are extended through the trees to run junction to junction. The
/// composed model is reverified before it is returned: a butterfly model
/// whose arc images cross inside a shared tree can defeat the composition,
/// and that failure is reported rather than papered over.
pub fn butterfly_to_topological(
    d: &Digraph,
    h: &Digraph,
    m: &MinorModel,
) -> Result<MinorModel, OpError> {
    for v in h.vertices() {
        let (di, do_) = (h.in_degree(v), h.out_degree(v));
        if di > 2 || do_ > 2 || di + do_ > 3 {
            return Err(OpError::pre(format!(
                "pattern vertex {v} has in-degree {di} and out-degree {do_}, beyond the (2,1)/(1,2) limit"
            )));
        }
    }
    if m.kind != ModelKind::Butterfly {
        return Err(OpError::pre("expected a butterfly model"));
    }
    if !verify_minor_model(d, h, m).is_ok() {
        return Err(OpError::pre("model does not verify against the host"));
    }

    let mut chosen: BTreeMap<&Vertex, RootSplit> = BTreeMap::new();
    for (v, img) in &m.vertex_images {
        let roots = tree_shape_roots(img);
        let serving = splits_serving(v, &roots, m);
        chosen.insert(v, (*serving.first().expect("verified model has a serving root")).clone());
    }

    let mut junction: BTreeMap<&Vertex, Vertex> = BTreeMap::new();
    for v in h.vertices() {
        let rs = &chosen[v];
        let img = &m.vertex_images[v];
        let j = if h.in_degree(v) == 2 {
            let ends: Vec<Vec<Vertex>> = m
                .arc_images
                .iter()
                .filter(|ai| ai.head == *v)
                .map(|ai| climb_to_root(img, rs, ai.walk.end().expect("nonempty")))
                .collect();
            let other: BTreeSet<&Vertex> = ends[1].iter().collect();
            ends[0]
                .iter()
                .find(|x| other.contains(*x))
                .expect("both climbs end at the root")
                .clone()
        } else if h.out_degree(v) == 2 {
            let starts: Vec<Vec<Vertex>> = m
                .arc_images
                .iter()
                .filter(|ai| ai.tail == *v)
                .map(|ai| descend_from_root(img, rs, ai.walk.start().expect("nonempty")))
                .collect();
            let mut last = rs.root.clone();
            for (a, b) in starts[0].iter().zip(starts[1].iter()) {
                if a != b {
                    break;
                }
                last = a.clone();
            }
            last
        } else {
            rs.root.clone()
        };
        junction.insert(v, j);
    }

    let mut arc_images = Vec::new();
    for ai in &m.arc_images {
        let start = ai.walk.start().expect("nonempty");
        let end = ai.walk.end().expect("nonempty");

        let rs_u = &chosen[&ai.tail];
        let img_u = &m.vertex_images[&ai.tail];
        let ju = &junction[&ai.tail];
        let descent = descend_from_root(img_u, rs_u, start);
        let mut seq: Vec<Vertex> = match descent.iter().position(|x| x == ju) {
            Some(p) => descent[p..].to_vec(),
            None => {
                let mut pre = climb_to_root(img_u, rs_u, ju);
                pre.extend(descent[1..].iter().cloned());
                pre
            }
        };

        seq.extend(ai.walk.seq[1..].iter().cloned());

        let rs_w = &chosen[&ai.head];
        let img_w = &m.vertex_images[&ai.head];
        let jw = &junction[&ai.head];
        let climb = climb_to_root(img_w, rs_w, end);
        let suffix: Vec<Vertex> = match climb.iter().position(|x| x == jw) {
            Some(p) => climb[..=p].to_vec(),
            None => {
                let mut post = climb.clone();
                post.extend(descend_from_root(img_w, rs_w, jw)[1..].iter().cloned());
                post
            }
        };
        seq.extend(suffix[1..].iter().cloned());

        arc_images.push(ArcImage {
            tail: ai.tail.clone(),
            head: ai.head.clone(),
            walk: Walk::new(seq),
        });
    }

    let vertex_images = junction
        .iter()
        .map(|(v, x)| {
            let mut img = Digraph::new();
            img.add_vertex(x.clone());
            ((*v).clone(), img)
        })
        .collect();
    let out = MinorModel {
        kind: ModelKind::Subdivision,
        vertex_images,
        arc_images,
    };
    if verify_minor_model(d, h, &out).is_ok() {
        Ok(out)
    } else {
        Err(OpError::pre(
            "arc images interleave inside a shared tree, so the composed paths collide",
        ))
    }
}

pub const DEFAULT_SEARCH_CAP: usize = 20;

/// Search for a butterfly model of `h` inside `d`, smallest total image
/// size first. `Ok(None)` is exact when the budget is unbounded; running
/// out of budget raises an error rather than answering `None`.
pub fn find_butterfly_minor(
    d: &Digraph,
    h: &Digraph,
    budget: &Budget,
) -> Result<Option<MinorModel>, OpError> {
    find_butterfly_minor_with_cap(d, h, budget, DEFAULT_SEARCH_CAP)
}

/// [`find_butterfly_minor`] with an explicit host size cap in place of the
/// default guard.
pub fn find_butterfly_minor_with_cap(
    d: &Digraph,
    h: &Digraph,
    budget: &Budget,
    cap: usize,
) -> Result<Option<MinorModel>, OpError> {
    if d.vertex_count() > cap {
        return Err(OpError::CapExceeded(format!(
            "host has {} vertices, cap is {cap}",
            d.vertex_count()
        )));
    }
    if h.vertex_count() > d.vertex_count() {
        return Ok(None);
    }

    let order = pattern_order(h);
    let index: BTreeMap<&Vertex, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut all_arcs: Vec<(usize, usize)> = h.arcs().map(|(u, v)| (index[u], index[v])).collect();
    all_arcs.sort_by_key(|&(t, hd)| (order[t].clone(), order[hd].clone()));

    let mut closure: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    for v in d.vertices() {
        closure.insert(v.clone(), d.reachable_from(&BTreeSet::from([v.clone()])));
    }

    let search = Search {
        d,
        adj: d.adjacency(),
        budget,
        order,
        all_arcs,
        closure,
    };
    let mut asg = Assign {
        owner: BTreeMap::new(),
        splits: vec![None; search.order.len()],
    };
    for total_extra in 0..=(d.vertex_count() - h.vertex_count()) {
        if let Some(model) = search.extend(&mut asg, 0, total_extra)? {
            return Ok(Some(model));
        }
    }
    Ok(None)
}

/// Pattern vertices in breadth-first order over the underlying undirected
/// adjacency, seeded at the lexicographically least vertex of each
/// component. Neighbouring pattern vertices are assigned close together, so
/// the per-claim routing checks bite early.
fn pattern_order(h: &Digraph) -> Vec<Vertex> {
    let adj = h.adjacency();
    let mut order = Vec::new();
    let mut seen: BTreeSet<Vertex> = BTreeSet::new();
    for seed in h.vertices() {
        if seen.contains(seed) {
            continue;
        }
        seen.insert(seed.clone());
        let mut queue = VecDeque::from([seed.clone()]);
        while let Some(x) = queue.pop_front() {
            let mut nbrs: Vec<&Vertex> = adj.out[&x].iter().chain(adj.inn[&x].iter()).collect();
            nbrs.sort();
            nbrs.dedup();
            for y in nbrs {
                if seen.insert(y.clone()) {
                    queue.push_back(y.clone());
                }
            }
            order.push(x);
        }
    }
    order
}

struct Search<'a> {
    d: &'a Digraph,
    adj: Adjacency,
    budget: &'a Budget,
    order: Vec<Vertex>,
    all_arcs: Vec<(usize, usize)>,
    closure: BTreeMap<Vertex, BTreeSet<Vertex>>,
}

struct Assign {
    owner: BTreeMap<Vertex, usize>,
    splits: Vec<Option<RootSplit>>,
}

impl Search<'_> {
    fn extend(
        &self,
        asg: &mut Assign,
        idx: usize,
        extra_left: usize,
    ) -> Result<Option<MinorModel>, OpError> {
        if idx == self.order.len() {
            if extra_left != 0 {
                return Ok(None);
            }
            let mut images = Vec::new();
            for &(t, hd) in &self.all_arcs {
                match self.route(asg, t, hd)? {
                    Some(w) => images.push(ArcImage {
                        tail: self.order[t].clone(),
                        head: self.order[hd].clone(),
                        walk: w,
                    }),
                    None => return Ok(None),
                }
            }
            return Ok(Some(self.build_model(asg, images)));
        }

        let free_all: BTreeSet<Vertex> = self
            .d
            .vertices()
            .filter(|v| !asg.owner.contains_key(*v))
            .cloned()
            .collect();
        for root in &free_all {
            let mut free = free_all.clone();
            free.remove(root);
            for extra in 0..=extra_left {
                for in_extra in 0..=extra {
                    let out_extra = extra - in_extra;
                    for in_side in self.grow_sets(root, in_extra, &free, true)? {
                        let mut rest = free.clone();
                        for x in &in_side {
                            rest.remove(x);
                        }
                        for out_side in self.grow_sets(root, out_extra, &rest, false)? {
                            self.budget.tick()?;
                            let rs = RootSplit {
                                root: root.clone(),
                                in_side: in_side.clone(),
                                out_side,
                            };
                            self.claim(asg, idx, rs);
                            if self.assigned_arcs_route(asg, idx)? {
                                if let Some(model) =
                                    self.extend(asg, idx + 1, extra_left - extra)?
                                {
                                    return Ok(Some(model));
                                }
                            }
                            self.unclaim(asg, idx);
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// All vertex sets of size `extra + 1` containing `root` whose other
    /// members come from `free` and which, grown inward, all reach the root
    /// within the set (grown outward: are all reached from it). Any such set
    /// minus a member of maximum distance from the root is again such a set,
    /// so growing one vertex at a time enumerates them all.
    fn grow_sets(
        &self,
        root: &Vertex,
        extra: usize,
        free: &BTreeSet<Vertex>,
        inward: bool,
    ) -> Result<Vec<BTreeSet<Vertex>>, OpError> {
        let mut level: BTreeSet<BTreeSet<Vertex>> = BTreeSet::from([BTreeSet::from([root.clone()])]);
        for _ in 0..extra {
            let mut next = BTreeSet::new();
            for s in &level {
                for y in s {
                    let nbrs = if inward { &self.adj.inn[y] } else { &self.adj.out[y] };
                    for x in nbrs {
                        if free.contains(x) && !s.contains(x) {
                            self.budget.tick()?;
                            let mut t = s.clone();
                            t.insert(x.clone());
                            next.insert(t);
                        }
                    }
                }
            }
            level = next;
            if level.is_empty() {
                break;
            }
        }
        Ok(level.into_iter().collect())
    }

    fn claim(&self, asg: &mut Assign, idx: usize, rs: RootSplit) {
        for x in rs.in_side.iter().chain(rs.out_side.iter()) {
            asg.owner.insert(x.clone(), idx);
        }
        asg.splits[idx] = Some(rs);
    }

    fn unclaim(&self, asg: &mut Assign, idx: usize) {
        let rs = asg.splits[idx].take().expect("claimed");
        for x in rs.in_side.iter().chain(rs.out_side.iter()) {
            asg.owner.remove(x);
        }
    }

    /// Every pattern arc with both endpoints assigned must still route.
    /// Later claims only shrink the passable vertex set, so requiring this
    /// after every claim never prunes a completable assignment.
    fn assigned_arcs_route(&self, asg: &Assign, upto: usize) -> Result<bool, OpError> {
        for &(t, hd) in &self.all_arcs {
            if t <= upto && hd <= upto && self.route(asg, t, hd)?.is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Shortest host path from the tail's out side to the head's in side
    /// avoiding vertices owned by any other pattern vertex. Arc images only
    /// have to avoid non-incident vertex images, so each arc routes
    /// independently of the other arc images.
    fn route(&self, asg: &Assign, t: usize, hd: usize) -> Result<Option<Walk>, OpError> {
        let src = &asg.splits[t].as_ref().expect("assigned").out_side;
        let dst = &asg.splits[hd].as_ref().expect("assigned").in_side;
        let root_t = &asg.splits[t].as_ref().expect("assigned").root;
        let root_h = &asg.splits[hd].as_ref().expect("assigned").root;
        if !self.closure[root_t].contains(root_h) {
            return Ok(None);
        }

        let mut parent: BTreeMap<Vertex, Option<Vertex>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in src {
            parent.insert(s.clone(), None);
            queue.push_back(s.clone());
        }
        while let Some(x) = queue.pop_front() {
            self.budget.tick()?;
            if dst.contains(&x) {
                let mut seq = vec![x.clone()];
                let mut cur = x;
                while let Some(Some(p)) = parent.get(&cur).cloned() {
                    seq.push(p.clone());
                    cur = p;
                }
                seq.reverse();
                return Ok(Some(Walk::new(seq)));
            }
            for y in &self.adj.out[&x] {
                let passable = match asg.owner.get(y) {
                    None => true,
                    Some(&k) => k == t || k == hd,
                };
                if passable && !parent.contains_key(y) {
                    parent.insert(y.clone(), Some(x.clone()));
                    queue.push_back(y.clone());
                }
            }
        }
        Ok(None)
    }

    fn build_model(&self, asg: &Assign, images: Vec<ArcImage>) -> MinorModel {
        let mut vertex_images = BTreeMap::new();
        for (i, v) in self.order.iter().enumerate() {
            let rs = asg.splits[i].as_ref().expect("assigned");
            vertex_images.insert(v.clone(), self.tree_digraph(rs));
        }
        MinorModel {
            kind: ModelKind::Butterfly,
            vertex_images,
            arc_images: images,
        }
    }

    /// Extract one in-tree over the in side and one out-tree over the out
    /// side by breadth-first search from the root, keeping only the
    /// discovery arcs. Growth guaranteed each side is connected to the root
    /// through itself, so the search reaches every member.
    fn tree_digraph(&self, rs: &RootSplit) -> Digraph {
        let mut arcs: Vec<(Vertex, Vertex)> = Vec::new();
        let mut seen = BTreeSet::from([rs.root.clone()]);
        let mut queue = VecDeque::from([rs.root.clone()]);
        while let Some(y) = queue.pop_front() {
            for x in &self.adj.inn[&y] {
                if rs.in_side.contains(x) && seen.insert(x.clone()) {
                    arcs.push((x.clone(), y.clone()));
                    queue.push_back(x.clone());
                }
            }
        }
        let mut seen_out = BTreeSet::from([rs.root.clone()]);
        let mut queue = VecDeque::from([rs.root.clone()]);
        while let Some(x) = queue.pop_front() {
            for y in &self.adj.out[&x] {
                if rs.out_side.contains(y) && seen_out.insert(y.clone()) {
                    arcs.push((x.clone(), y.clone()));
                    queue.push_back(y.clone());
                }
            }
        }
        let vertices: BTreeSet<Vertex> = rs.in_side.union(&rs.out_side).cloned().collect();
        Digraph::from_parts(vertices, arcs).expect("tree arcs join distinct known vertices")
    }
}
