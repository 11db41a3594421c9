//! Digraphs over opaque string vertex ids, walks in them, and the basic
//! operations everything else builds on: union, walk concatenation, pattern
//! generators, connectivity tests, butterfly contraction and subdivision.
//!
//! Digraphs are simple (no loops, no duplicate arcs) and all iteration is in
//! lexicographic order, so equal digraphs serialize byte-identically.

use crate::report::OpError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

pub type Vertex = String;
pub type Arc = (String, String);

/// A finite simple digraph. Arc endpoints are always vertices of the graph
/// and loops are rejected at every entry point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Digraph {
    vertices: BTreeSet<Vertex>,
    arcs: BTreeSet<Arc>,
}

impl Digraph {
    pub fn new() -> Self {
        Digraph::default()
    }

    /// Builds a digraph from explicit parts. Arc endpoints must be listed in
    /// `vertices` and loops are rejected.
    pub fn from_parts<I, J>(vertices: I, arcs: J) -> Result<Self, OpError>
    where
        I: IntoIterator<Item = Vertex>,
        J: IntoIterator<Item = Arc>,
    {
        let vertices: BTreeSet<Vertex> = vertices.into_iter().collect();
        let mut set = BTreeSet::new();
        for (u, v) in arcs {
            if u == v {
                return Err(OpError::pre(format!("loop arc ({u},{v}) is not allowed")));
            }
            if !vertices.contains(&u) || !vertices.contains(&v) {
                return Err(OpError::pre(format!("arc ({u},{v}) has an endpoint outside the vertex set")));
            }
            set.insert((u, v));
        }
        Ok(Digraph { vertices, arcs: set })
    }

    /// Convenience constructor for tests and small fixtures.
    pub fn from_arcs<'a, I>(arcs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut d = Digraph::new();
        for (u, v) in arcs {
            d.add_arc(u, v).expect("loop arc in fixture");
        }
        d
    }

    pub fn add_vertex(&mut self, v: impl Into<Vertex>) {
        self.vertices.insert(v.into());
    }

    /// Inserts an arc, adding missing endpoints. Loops are an error.
    pub fn add_arc(&mut self, u: impl Into<Vertex>, v: impl Into<Vertex>) -> Result<(), OpError> {
        let (u, v) = (u.into(), v.into());
        if u == v {
            return Err(OpError::pre(format!("loop arc ({u},{u}) is not allowed")));
        }
        self.vertices.insert(u.clone());
        self.vertices.insert(v.clone());
        self.arcs.insert((u, v));
        Ok(())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.vertices.contains(v)
    }

    pub fn has_arc(&self, u: &str, v: &str) -> bool {
        self.arcs.contains(&(u.to_string(), v.to_string()))
    }

    pub fn vertex_set(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn arc_set(&self) -> &BTreeSet<Arc> {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Union of vertex and arc sets.
    pub fn union(&self, other: &Digraph) -> Digraph {
        let mut d = self.clone();
        d.vertices.extend(other.vertices.iter().cloned());
        d.arcs.extend(other.arcs.iter().cloned());
        d
    }

    pub fn is_subgraph_of(&self, host: &Digraph) -> bool {
        self.vertices.is_subset(&host.vertices) && self.arcs.is_subset(&host.arcs)
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<Vertex>) -> Digraph {
        let vertices: BTreeSet<Vertex> = self.vertices.intersection(keep).cloned().collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|(u, v)| vertices.contains(u) && vertices.contains(v))
            .cloned()
            .collect();
        Digraph { vertices, arcs }
    }

    /// Deletes the vertices in `x` together with their incident arcs.
    pub fn minus_vertices<'a, I>(&self, x: I) -> Digraph
    where
        I: IntoIterator<Item = &'a Vertex>,
    {
        let x: BTreeSet<&Vertex> = x.into_iter().collect();
        let vertices: BTreeSet<Vertex> =
            self.vertices.iter().filter(|v| !x.contains(v)).cloned().collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|(u, v)| vertices.contains(u) && vertices.contains(v))
            .cloned()
            .collect();
        Digraph { vertices, arcs }
    }

    /// Deletes the given arcs, keeping all vertices.
    pub fn minus_arcs<'a, I>(&self, f: I) -> Digraph
    where
        I: IntoIterator<Item = &'a Arc>,
    {
        let f: BTreeSet<&Arc> = f.into_iter().collect();
        let arcs = self.arcs.iter().filter(|a| !f.contains(a)).cloned().collect();
        Digraph { vertices: self.vertices.clone(), arcs }
    }

    /// Out- and in-adjacency maps in lexicographic order, built once per
    /// algorithm run.
    pub fn adjacency(&self) -> Adjacency {
        let mut out: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
        let mut inn: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
        for v in &self.vertices {
            out.insert(v.clone(), Vec::new());
            inn.insert(v.clone(), Vec::new());
        }
        for (u, v) in &self.arcs {
            out.get_mut(u).unwrap().push(v.clone());
            inn.get_mut(v).unwrap().push(u.clone());
        }
        Adjacency { out, inn }
    }

    pub fn in_degree(&self, v: &str) -> usize {
        self.arcs.iter().filter(|(_, b)| b == v).count()
    }

    pub fn out_degree(&self, v: &str) -> usize {
        self.arcs
            .range((v.to_string(), String::new())..)
            .take_while(|(a, _)| a == v)
            .count()
    }

    pub fn in_neighbours(&self, v: &str) -> BTreeSet<Vertex> {
        self.arcs.iter().filter(|(_, b)| b == v).map(|(a, _)| a.clone()).collect()
    }

    pub fn out_neighbours(&self, v: &str) -> BTreeSet<Vertex> {
        self.arcs
            .range((v.to_string(), String::new())..)
            .take_while(|(a, _)| a == v)
            .map(|(_, b)| b.clone())
            .collect()
    }

    /// Set of vertices reachable from `from` (which is included).
    pub fn reachable_from(&self, from: &BTreeSet<Vertex>) -> BTreeSet<Vertex> {
        let adj = self.adjacency();
        let mut seen: BTreeSet<Vertex> =
            from.iter().filter(|v| self.has_vertex(v)).cloned().collect();
        let mut queue: VecDeque<Vertex> = seen.iter().cloned().collect();
        while let Some(u) = queue.pop_front() {
            for w in &adj.out[&u] {
                if seen.insert(w.clone()) {
                    queue.push_back(w.clone());
                }
            }
        }
        seen
    }

    /// Strongly connected components in a deterministic order (Tarjan,
    /// roots visited lexicographically). Singletons count as components.
    pub fn strong_components(&self) -> Vec<BTreeSet<Vertex>> {
        let adj = self.adjacency();
        let mut index: BTreeMap<&Vertex, usize> = BTreeMap::new();
        let mut low: BTreeMap<&Vertex, usize> = BTreeMap::new();
        let mut on_stack: BTreeSet<&Vertex> = BTreeSet::new();
        let mut stack: Vec<&Vertex> = Vec::new();
        let mut next = 0usize;
        let mut comps: Vec<BTreeSet<Vertex>> = Vec::new();

        enum Frame<'a> {
            Enter(&'a Vertex),
            Resume(&'a Vertex, usize),
        }

        for root in &self.vertices {
            if index.contains_key(root) {
                continue;
            }
            let mut work = vec![Frame::Enter(root)];
            while let Some(frame) = work.pop() {
                match frame {
                    Frame::Enter(v) => {
                        index.insert(v, next);
                        low.insert(v, next);
                        next += 1;
                        stack.push(v);
                        on_stack.insert(v);
                        work.push(Frame::Resume(v, 0));
                    }
                    Frame::Resume(v, mut i) => {
                        let succs = &adj.out[v];
                        let mut descended = false;
                        while i < succs.len() {
                            let w = &succs[i];
                            i += 1;
                            if let Some(&wi) = index.get(w) {
                                if on_stack.contains(w) {
                                    let lv = low[v].min(wi);
                                    low.insert(v, lv);
                                }
                            } else {
                                let w_ref = self.vertices.get(w).unwrap();
                                work.push(Frame::Resume(v, i));
                                work.push(Frame::Enter(w_ref));
                                descended = true;
                                break;
                            }
                        }
                        if descended {
                            continue;
                        }
                        // All successors done: fold low values of children.
                        for w in succs {
                            if on_stack.contains(w) {
                                let lv = low[v].min(low[w]);
                                low.insert(v, lv);
                            }
                        }
                        if low[v] == index[v] {
                            let mut comp = BTreeSet::new();
                            while let Some(w) = stack.pop() {
                                on_stack.remove(w);
                                comp.insert(w.clone());
                                if w == v {
                                    break;
                                }
                            }
                            comps.push(comp);
                        }
                    }
                }
            }
        }
        comps.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        comps
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        self.strong_components().len() == 1
    }

    /// A digraph is unilateral if every pair of vertices is connected by a
    /// path in at least one direction: equivalently, its condensation has a
    /// Hamiltonian path, which for a DAG means the topological order is
    /// forced arc by arc.
    pub fn is_unilateral(&self) -> bool {
        let comps = self.strong_components();
        if comps.len() <= 1 {
            return true;
        }
        let comp_of: BTreeMap<&Vertex, usize> = comps
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.iter().map(move |v| (v, i)))
            .collect();
        let mut cond_out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); comps.len()];
        let mut indeg = vec![0usize; comps.len()];
        for (u, v) in &self.arcs {
            let (cu, cv) = (comp_of[u], comp_of[v]);
            if cu != cv && cond_out[cu].insert(cv) {
                indeg[cv] += 1;
            }
        }
        let mut order = Vec::with_capacity(comps.len());
        let mut ready: BTreeSet<usize> =
            (0..comps.len()).filter(|&i| indeg[i] == 0).collect();
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &j in &cond_out[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        order.windows(2).all(|w| cond_out[w[0]].contains(&w[1]))
    }

    /// Whether the digraph has no directed cycle (of length >= 2;
    /// loops cannot occur).
    pub fn is_acyclic(&self) -> bool {
        self.strong_components().iter().all(|c| c.len() == 1)
    }

    /// Butterfly-contracts the arc `(u,v)`: requires out-degree of `u` or
    /// in-degree of `v` to be one. The merged vertex keeps the in-neighbours
    /// of `u` and the out-neighbours of `v`; loops and duplicates vanish
    /// silently. Returns the new digraph and the merged vertex id.
    pub fn butterfly_contract(&self, u: &str, v: &str) -> Result<(Digraph, Vertex), OpError> {
        if !self.has_arc(u, v) {
            return Err(OpError::pre(format!("arc ({u},{v}) not present")));
        }
        if self.out_degree(u) != 1 && self.in_degree(v) != 1 {
            return Err(OpError::pre(format!(
                "arc ({u},{v}) is not butterfly contractible: Outdeg({u}) = {} and Indeg({v}) = {}",
                self.out_degree(u),
                self.in_degree(v)
            )));
        }
        let mut merged = format!("({u}.{v})");
        while self.vertices.contains(&merged) {
            merged.push('\'');
        }
        let mut d = Digraph::new();
        for w in &self.vertices {
            if w != u && w != v {
                d.add_vertex(w.clone());
            }
        }
        d.add_vertex(merged.clone());
        let rename = |w: &Vertex| -> Vertex {
            if w == u || w == v {
                merged.clone()
            } else {
                w.clone()
            }
        };
        for (a, b) in &self.arcs {
            if (a == u && b == v) || (a == v && b == u) {
                continue;
            }
            let keeps_a = a != u && a != v;
            let keeps_b = b != u && b != v;
            // Arcs into u and out of v survive (renamed); arcs out of u and
            // into v are dropped unless both endpoints are untouched.
            let survive = (keeps_a && keeps_b)
                || (b == u)
                || (a == v);
            if !survive {
                continue;
            }
            let (na, nb) = (rename(a), rename(b));
            if na != nb {
                d.arcs.insert((na, nb));
            }
        }
        Ok((d, merged))
    }

    /// Subdivides the arc `(u,v)`: replaces it with `(u,w)` and `(w,v)` for a
    /// fresh vertex `w`. Returns the new digraph and the new vertex id.
    pub fn subdivide(&self, u: &str, v: &str) -> Result<(Digraph, Vertex), OpError> {
        if !self.has_arc(u, v) {
            return Err(OpError::pre(format!("arc ({u},{v}) not present")));
        }
        let mut w = format!("{u}~{v}");
        while self.vertices.contains(&w) {
            w.push('\'');
        }
        let mut d = self.clone();
        d.arcs.remove(&(u.to_string(), v.to_string()));
        d.add_arc(u.to_string(), w.clone())?;
        d.add_arc(w.clone(), v.to_string())?;
        Ok((d, w))
    }

    /// GraphViz dot text with sorted vertices and arcs.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", name.replace('"', "'"));
        for v in &self.vertices {
            let _ = writeln!(s, "  \"{}\";", v.replace('"', "'"));
        }
        for (u, v) in &self.arcs {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", u.replace('"', "'"), v.replace('"', "'"));
        }
        s.push_str("}\n");
        s
    }
}

/// Precomputed adjacency in lexicographic order.
pub struct Adjacency {
    pub out: BTreeMap<Vertex, Vec<Vertex>>,
    pub inn: BTreeMap<Vertex, Vec<Vertex>>,
}

#[derive(Serialize, Deserialize)]
struct DigraphRepr {
    vertices: Vec<Vertex>,
    arcs: Vec<(Vertex, Vertex)>,
}

impl Serialize for Digraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DigraphRepr {
            vertices: self.vertices.iter().cloned().collect(),
            arcs: self.arcs.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Digraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DigraphRepr::deserialize(deserializer)?;
        Digraph::from_parts(repr.vertices, repr.arcs).map_err(serde::de::Error::custom)
    }
}

/// A walk: a vertex sequence where consecutive vertices are joined by arcs of
/// some host digraph. The empty walk is the identity of concatenation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Walk {
    pub seq: Vec<Vertex>,
}

impl Walk {
    pub fn new(seq: Vec<Vertex>) -> Self {
        Walk { seq }
    }

    pub fn empty() -> Self {
        Walk { seq: Vec::new() }
    }

    pub fn single(v: impl Into<Vertex>) -> Self {
        Walk { seq: vec![v.into()] }
    }

    pub fn of(ids: &[&str]) -> Self {
        Walk { seq: ids.iter().map(|s| s.to_string()).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Number of arcs traversed.
    pub fn len(&self) -> usize {
        self.seq.len().saturating_sub(1)
    }

    pub fn start(&self) -> Option<&Vertex> {
        self.seq.first()
    }

    pub fn end(&self) -> Option<&Vertex> {
        self.seq.last()
    }

    pub fn vertex_set(&self) -> BTreeSet<Vertex> {
        self.seq.iter().cloned().collect()
    }

    pub fn arcs(&self) -> Vec<Arc> {
        self.seq.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.seq.iter().any(|u| u == v)
    }

    /// Position of the first occurrence of `v`.
    pub fn position(&self, v: &str) -> Option<usize> {
        self.seq.iter().position(|u| u == v)
    }

    /// True if every consecutive pair is an arc of `d` and all vertices exist.
    pub fn is_walk_in(&self, d: &Digraph) -> bool {
        self.seq.iter().all(|v| d.has_vertex(v))
            && self.seq.windows(2).all(|w| d.has_arc(&w[0], &w[1]))
    }

    /// A path visits no vertex twice. The empty walk and single vertices are
    /// paths.
    pub fn is_path(&self) -> bool {
        let set: BTreeSet<&Vertex> = self.seq.iter().collect();
        set.len() == self.seq.len()
    }

    /// A cycle returns to its start, visits at least one arc, and repeats no
    /// other vertex.
    pub fn is_cycle(&self) -> bool {
        if self.seq.len() < 3 {
            return false;
        }
        if self.seq.first() != self.seq.last() {
            return false;
        }
        let inner = &self.seq[..self.seq.len() - 1];
        let set: BTreeSet<&Vertex> = inner.iter().collect();
        set.len() == inner.len()
    }

    /// Concatenation: the shared endpoint appears once. An empty operand
    /// yields the other walk.
    pub fn concat(&self, other: &Walk) -> Result<Walk, OpError> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.end() != other.start() {
            return Err(OpError::pre(format!(
                "cannot concatenate: end {:?} differs from start {:?}",
                self.end(),
                other.start()
            )));
        }
        let mut seq = self.seq.clone();
        seq.extend(other.seq[1..].iter().cloned());
        Ok(Walk { seq })
    }

    /// The subwalk from position `from` to position `to` inclusive.
    pub fn slice(&self, from: usize, to: usize) -> Walk {
        Walk { seq: self.seq[from..=to].to_vec() }
    }

    /// The digraph formed by this walk's vertices and arcs.
    pub fn to_digraph(&self) -> Digraph {
        let mut d = Digraph::new();
        for v in &self.seq {
            d.add_vertex(v.clone());
        }
        for (u, v) in self.arcs() {
            // A walk may traverse both directions of a bidirected pair, but
            // never a loop, since consecutive equal vertices would require
            // a loop arc in the host.
            d.add_arc(u, v).expect("walk with a loop step");
        }
        d
    }
}

/// The kinds of pattern digraphs used as search targets and routing patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Path,
    Bipath,
    Cycle,
}

/// Generates the path on `k` vertices (`u1 -> ... -> uk`), the bidirected
/// path on `k` vertices, or the cycle on `k` vertices (`u0 -> ... -> u{k-1} -> u0`).
pub fn gen_special(kind: PatternKind, k: usize) -> Result<Digraph, OpError> {
    match kind {
        PatternKind::Path | PatternKind::Bipath => {
            if k < 1 {
                return Err(OpError::pre("path patterns need k >= 1"));
            }
            let names: Vec<Vertex> = (1..=k).map(|i| format!("u{i}")).collect();
            let mut d = Digraph::new();
            for n in &names {
                d.add_vertex(n.clone());
            }
            for w in names.windows(2) {
                d.add_arc(w[0].clone(), w[1].clone())?;
                if kind == PatternKind::Bipath {
                    d.add_arc(w[1].clone(), w[0].clone())?;
                }
            }
            Ok(d)
        }
        PatternKind::Cycle => {
            if k < 2 {
                return Err(OpError::pre("cycles need k >= 2, loops are not digraph arcs"));
            }
            let names: Vec<Vertex> = (0..k).map(|i| format!("u{i}")).collect();
            let mut d = Digraph::new();
            for i in 0..k {
                d.add_arc(names[i].clone(), names[(i + 1) % k].clone())?;
            }
            Ok(d)
        }
    }
}
