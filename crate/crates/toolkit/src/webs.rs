//! Webs: pairs of linkages in which vertical paths cross horizontal ones,
//! together with the split and segmentation machinery that refines a weakly
//! minimal web into ordered or folded structure.
//!
//! A web witness carries two linkages and, depending on its kind, per-path
//! decompositions given as arc positions: the named arcs are removed and the
//! vertex stretches between them form the segments. Splits and segmentations
//! describe how a sublinkage of `Q` organizes itself around pieces of `P`;
//! the central transformation iterates an imported search oracle to produce
//! one of the two and then extracts an ordered web via monotone subsequences
//! or folds a split into a folded ordered web.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::digraph::{Arc, Digraph, Vertex, Walk};
use crate::grid::GridWitness;
use crate::linkage::{
    is_weakly_minimal, is_well_linked, max_linkage_order, menger, minimalize, Linkage,
};
use crate::report::{Budget, OpError, Report};
use crate::wells::{
    bfs_path, detect_jumps, find_linkage_in_pows, memberships, slice_digraph, RoutingCase,
    WellsMode, WellsWitness,
};

/// The flavour of a web, fixing which decomposition clauses apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WebKind {
    /// Every vertical path meets every horizontal path; no decompositions.
    Plain,
    /// Every horizontal path decomposes into one segment per vertical path,
    /// and segment `t` meets vertical path `t` and no other.
    Ordered,
    /// Every vertical path folds into two halves, both meeting every
    /// horizontal path; with `ordered` set the horizontal paths also satisfy
    /// the ordered clauses against the folded vertical paths.
    Folded { ordered: bool },
    /// Both families decompose into `c` zones and the vertical zone `x` may
    /// touch a horizontal path only inside its zones `c-x` and `c-x+1`,
    /// touching zone `c-x+1` at least once.
    Horizontal { c: usize },
    /// The relaxed zone condition checked on digraphs: the vertical zone `x`
    /// intersected with the horizontal digraph sits inside horizontal zone
    /// `c-x+1` plus vertical zone `c-x`. No all-pairs crossing is required.
    HorizontalSemi { c: usize },
}

/// A web witness: a horizontal linkage `h`, a vertical linkage `v`, and the
/// decompositions the declared kind is checked against. `h_cuts[i]` and
/// `v_cuts[j]` are strictly increasing arc positions of the respective path;
/// the named arcs belong to no segment and the vertex stretches between them
/// are the segments, numbered from 1 along the path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebWitness {
    pub h: Linkage,
    pub v: Linkage,
    pub kind: WebKind,
    pub h_cuts: Vec<Vec<usize>>,
    pub v_cuts: Vec<Vec<usize>>,
}

impl WebWitness {
    /// Union of both linkages.
    pub fn to_digraph(&self) -> Digraph {
        self.h.to_digraph().union(&self.v.to_digraph())
    }
}

/// A split around one path of `P`: arcs `cuts` divide path `path` into `r`
/// pieces, every member of `Q` is divided by `divisions` into `r` pieces,
/// and piece `i` of the path meets exactly piece `r + 1 - i` of every
/// member. `members` index into the ambient `Q` linkage. With `well_linked`
/// set, the ends of the members must be well-linked to their starts inside
/// the union of `P` and the reference linkage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWitness {
    pub path: usize,
    pub cuts: Vec<usize>,
    pub members: Vec<usize>,
    pub divisions: Vec<Vec<usize>>,
    pub well_linked: bool,
}

/// One piece of a segmentation: the subpath of `P`-path `path` between
/// vertex positions `from` and `to` (inclusive), cut at the piece-relative
/// arc positions `cuts` into one segment per member, with `order[t]` naming
/// the member (as an index into the witness member list) confined to
/// segment `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegPiece {
    pub path: usize,
    pub from: usize,
    pub to: usize,
    pub cuts: Vec<usize>,
    pub order: Vec<usize>,
}

/// A segmentation: pieces of `P`-paths forming a linkage, each segmented so
/// that every member's footprint on the piece sits inside its own segment.
/// `ordered` asserts all pieces use the same member order; `well_linked`
/// asserts the members' ends are well-linked to their starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationWitness {
    pub pieces: Vec<SegPiece>,
    pub members: Vec<usize>,
    pub ordered: bool,
    pub well_linked: bool,
}

/// Either outcome of the split-or-segmentation machinery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitOrSegmentation {
    Split(SplitWitness),
    Segmentation(SegmentationWitness),
}

/// Which end of the horizontal paths a disjoint pair is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorSide {
    Start,
    End,
}

/// Outcome of the semi-web case analysis: either a two-zone horizontal web
/// or a pair of linkages whose horizontal part is internally disjoint from
/// the vertical part, anchored at the named side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum SemiwebOutcome {
    Web(WebWitness),
    DisjointPair {
        h: Linkage,
        v: Linkage,
        side: AnchorSide,
    },
}

/// A linkage with one pivot vertex position per path, splitting each path
/// into a head `slice(0, splits[t])` and a tail `slice(splits[t], len)`
/// that share the pivot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitLinkage {
    pub linkage: Linkage,
    pub splits: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotoneDirection {
    Increasing,
    Decreasing,
}

/// Longest monotone subsequences of a sequence and, if one is long enough,
/// the qualifying one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneExtract {
    pub increasing: Vec<i64>,
    pub decreasing: Vec<i64>,
    pub qualifying: Option<(Vec<i64>, MonotoneDirection)>,
}

fn cut_ranges(arc_count: usize, cuts: &[usize]) -> Result<Vec<(usize, usize)>, OpError> {
    for (i, &d) in cuts.iter().enumerate() {
        if d >= arc_count {
            return Err(OpError::pre(format!(
                "cut {} names arc {d}, but the walk has only {arc_count} arcs",
                i + 1
            )));
        }
        if i > 0 && cuts[i - 1] >= d {
            return Err(OpError::pre(format!(
                "cut positions must increase strictly, found {} before {d}",
                cuts[i - 1]
            )));
        }
    }
    let mut ranges = Vec::with_capacity(cuts.len() + 1);
    let mut lo = 0;
    for &d in cuts {
        ranges.push((lo, d));
        lo = d + 1;
    }
    ranges.push((lo, arc_count));
    Ok(ranges)
}

/// Splits a walk at the given strictly increasing arc positions. Segment
/// `t` keeps the vertices between consecutive cut arcs; the cut arcs
/// themselves belong to no segment, so every segment is nonempty.
pub fn arc_segments(w: &Walk, cuts: &[usize]) -> Result<Vec<Walk>, OpError> {
    if w.is_empty() {
        return Err(OpError::pre("cannot segment an empty walk"));
    }
    let ranges = cut_ranges(w.len(), cuts)?;
    Ok(ranges.into_iter().map(|(lo, hi)| w.slice(lo, hi)).collect())
}

fn segment_table(l: &Linkage, cuts: &[Vec<usize>], want: usize, what: &str) -> Result<Vec<Vec<Walk>>, OpError> {
    if cuts.len() != l.order() {
        return Err(OpError::pre(format!(
            "{what} lists cuts for {} paths, the linkage has {}",
            cuts.len(),
            l.order()
        )));
    }
    let mut table = Vec::with_capacity(l.order());
    for (i, p) in l.paths().iter().enumerate() {
        if cuts[i].len() + 1 != want {
            return Err(OpError::pre(format!(
                "{what} path {} carries {} cuts, its kind wants {}",
                i + 1,
                cuts[i].len(),
                want - 1
            )));
        }
        table.push(arc_segments(p, &cuts[i])?);
    }
    Ok(table)
}

fn empty_cuts(cuts: &[Vec<usize>], what: &str) -> Result<(), OpError> {
    if cuts.iter().any(|c| !c.is_empty()) {
        return Err(OpError::pre(format!("{what} must carry no cuts for this kind")));
    }
    Ok(())
}

fn digraph_intersection(a: &Digraph, b: &Digraph) -> Digraph {
    let mut d = Digraph::new();
    for vtx in a.vertices() {
        if b.has_vertex(vtx) {
            d.add_vertex(vtx.clone());
        }
    }
    for (u, v) in a.arcs() {
        if b.has_arc(u, v) {
            d.add_arc(u.clone(), v.clone()).expect("both endpoints are present");
        }
    }
    d
}

fn crossing_clauses(rep: &mut Report, h: &Linkage, v: &Linkage) {
    let hsets: Vec<BTreeSet<Vertex>> = h.paths().iter().map(|p| p.vertex_set()).collect();
    let vsets: Vec<BTreeSet<Vertex>> = v.paths().iter().map(|p| p.vertex_set()).collect();
    for (i, hs) in hsets.iter().enumerate() {
        for (j, vs) in vsets.iter().enumerate() {
            if hs.intersection(vs).next().is_none() {
                rep.add(
                    "web.crossing",
                    vec![i as i64 + 1, j as i64 + 1],
                    format!("vertical path {} misses horizontal path {}", j + 1, i + 1),
                );
            }
        }
    }
}

fn ordered_clauses(rep: &mut Report, hseg: &[Vec<Walk>], v: &Linkage) {
    let vsets: Vec<BTreeSet<Vertex>> = v.paths().iter().map(|p| p.vertex_set()).collect();
    for (i, segs) in hseg.iter().enumerate() {
        for (t, seg) in segs.iter().enumerate() {
            let segset = seg.vertex_set();
            for (j, vs) in vsets.iter().enumerate() {
                let meets = segset.intersection(vs).next().is_some();
                if t == j && !meets {
                    rep.add(
                        "web.ordered_hit",
                        vec![i as i64 + 1, t as i64 + 1],
                        format!("segment {} of horizontal path {} misses its vertical path", t + 1, i + 1),
                    );
                }
                if t != j && meets {
                    rep.add(
                        "web.ordered_miss",
                        vec![i as i64 + 1, t as i64 + 1, j as i64 + 1],
                        format!(
                            "segment {} of horizontal path {} touches vertical path {}",
                            t + 1,
                            i + 1,
                            j + 1
                        ),
                    );
                }
            }
        }
    }
}

/// Checks every clause of the declared web kind and reports all violations.
/// Malformed decompositions (wrong counts, out-of-range or non-increasing
/// cuts) are errors rather than violations.
pub fn verify_web(w: &WebWitness) -> Result<Report, OpError> {
    let mut rep = Report::ok();
    match w.kind {
        WebKind::Plain => {
            empty_cuts(&w.h_cuts, "the horizontal decomposition")?;
            empty_cuts(&w.v_cuts, "the vertical decomposition")?;
            crossing_clauses(&mut rep, &w.h, &w.v);
        }
        WebKind::Ordered => {
            if w.v.order() == 0 {
                return Err(OpError::pre("an ordered web needs at least one vertical path"));
            }
            empty_cuts(&w.v_cuts, "the vertical decomposition")?;
            let hseg = segment_table(&w.h, &w.h_cuts, w.v.order(), "the horizontal decomposition")?;
            crossing_clauses(&mut rep, &w.h, &w.v);
            ordered_clauses(&mut rep, &hseg, &w.v);
        }
        WebKind::Folded { ordered } => {
            let vseg = segment_table(&w.v, &w.v_cuts, 2, "the vertical decomposition")?;
            let hseg = if ordered {
                if w.v.order() == 0 {
                    return Err(OpError::pre("an ordered web needs at least one vertical path"));
                }
                Some(segment_table(&w.h, &w.h_cuts, w.v.order(), "the horizontal decomposition")?)
            } else {
                empty_cuts(&w.h_cuts, "the horizontal decomposition")?;
                None
            };
            crossing_clauses(&mut rep, &w.h, &w.v);
            let hsets: Vec<BTreeSet<Vertex>> = w.h.paths().iter().map(|p| p.vertex_set()).collect();
            for (j, halves) in vseg.iter().enumerate() {
                for (x, half) in halves.iter().enumerate() {
                    let hs = half.vertex_set();
                    for (i, hset) in hsets.iter().enumerate() {
                        if hs.intersection(hset).next().is_none() {
                            rep.add(
                                "web.folded_hit",
                                vec![j as i64 + 1, x as i64 + 1, i as i64 + 1],
                                format!(
                                    "half {} of vertical path {} misses horizontal path {}",
                                    x + 1,
                                    j + 1,
                                    i + 1
                                ),
                            );
                        }
                    }
                }
            }
            if let Some(hseg) = hseg {
                ordered_clauses(&mut rep, &hseg, &w.v);
            }
        }
        WebKind::Horizontal { c } => {
            if c == 0 {
                return Err(OpError::pre("the zone count must be positive"));
            }
            let hseg = segment_table(&w.h, &w.h_cuts, c, "the horizontal decomposition")?;
            let vseg = segment_table(&w.v, &w.v_cuts, c, "the vertical decomposition")?;
            crossing_clauses(&mut rep, &w.h, &w.v);
            let hsets: Vec<BTreeSet<Vertex>> = w.h.paths().iter().map(|p| p.vertex_set()).collect();
            for (j, zones) in vseg.iter().enumerate() {
                for x in 1..=c {
                    let zone = zones[x - 1].vertex_set();
                    for (i, hset) in hsets.iter().enumerate() {
                        let mut allowed: BTreeSet<Vertex> = hseg[i][c - x].vertex_set();
                        if x < c {
                            allowed.extend(hseg[i][c - x - 1].vertex_set());
                        }
                        if let Some(bad) = zone.intersection(hset).find(|vx| !allowed.contains(*vx)) {
                            rep.add(
                                "web.horizontal_containment",
                                vec![j as i64 + 1, x as i64, i as i64 + 1],
                                format!(
                                    "vertex {bad} of vertical zone {x} sits in a forbidden zone of horizontal path {}",
                                    i + 1
                                ),
                            );
                        }
                        let hit = hseg[i][c - x].vertex_set();
                        if zone.intersection(&hit).next().is_none() {
                            rep.add(
                                "web.horizontal_hit",
                                vec![j as i64 + 1, x as i64, i as i64 + 1],
                                format!(
                                    "vertical zone {x} of path {} misses zone {} of horizontal path {}",
                                    j + 1,
                                    c - x + 1,
                                    i + 1
                                ),
                            );
                        }
                    }
                }
            }
        }
        WebKind::HorizontalSemi { c } => {
            if c == 0 {
                return Err(OpError::pre("the zone count must be positive"));
            }
            let hseg = segment_table(&w.h, &w.h_cuts, c, "the horizontal decomposition")?;
            let vseg = segment_table(&w.v, &w.v_cuts, c, "the vertical decomposition")?;
            let hfull = w.h.to_digraph();
            for x in 1..=c {
                let mut vx = Digraph::new();
                for zones in &vseg {
                    vx = vx.union(&zones[x - 1].to_digraph());
                }
                let inter = digraph_intersection(&vx, &hfull);
                let mut allowed = Digraph::new();
                for segs in &hseg {
                    allowed = allowed.union(&segs[c - x].to_digraph());
                }
                if x < c {
                    for zones in &vseg {
                        allowed = allowed.union(&zones[c - x - 1].to_digraph());
                    }
                }
                if !inter.is_subgraph_of(&allowed) {
                    let bad_v: Vec<&Vertex> = inter
                        .vertices()
                        .filter(|vx| !allowed.has_vertex(vx))
                        .collect();
                    let bad_a: Vec<&Arc> = inter
                        .arcs()
                        .filter(|a| !allowed.has_arc(&a.0, &a.1))
                        .collect();
                    rep.add(
                        "web.semi_containment",
                        vec![x as i64],
                        format!(
                            "vertical zone {x} leaves its permitted zones at vertices {bad_v:?} and arcs {bad_a:?}"
                        ),
                    );
                }
            }
        }
    }
    Ok(rep)
}

/// Best-effort inference of the decompositions a kind needs from the bare
/// linkages. Not normative: verification always works off the caller's
/// declared cuts, and `None` only means this simple search found nothing.
/// Ordered inference may reorder the vertical linkage; zone decompositions
/// for the horizontal kinds are never inferred.
pub fn infer_decompositions(h: &Linkage, v: &Linkage, kind: WebKind) -> Option<WebWitness> {
    match kind {
        WebKind::Plain => Some(WebWitness {
            h: h.clone(),
            v: v.clone(),
            kind,
            h_cuts: vec![],
            v_cuts: vec![],
        }),
        WebKind::Ordered => {
            let (vperm, h_cuts) = infer_ordered(h, v)?;
            let paths: Vec<Walk> = vperm.iter().map(|&j| v.paths()[j].clone()).collect();
            Some(WebWitness {
                h: h.clone(),
                v: Linkage::new(paths).ok()?,
                kind,
                h_cuts,
                v_cuts: vec![],
            })
        }
        WebKind::Folded { ordered } => {
            let (vv, h_cuts) = if ordered {
                let (vperm, h_cuts) = infer_ordered(h, v)?;
                let paths: Vec<Walk> = vperm.iter().map(|&j| v.paths()[j].clone()).collect();
                (Linkage::new(paths).ok()?, h_cuts)
            } else {
                (v.clone(), vec![])
            };
            let hsets: Vec<BTreeSet<Vertex>> = h.paths().iter().map(|p| p.vertex_set()).collect();
            let mut v_cuts = Vec::new();
            for p in vv.paths() {
                let d = (0..p.len()).find(|&d| {
                    let head = p.slice(0, d).vertex_set();
                    let tail = p.slice(d + 1, p.len()).vertex_set();
                    hsets.iter().all(|hs| {
                        head.intersection(hs).next().is_some()
                            && tail.intersection(hs).next().is_some()
                    })
                })?;
                v_cuts.push(vec![d]);
            }
            Some(WebWitness {
                h: h.clone(),
                v: vv,
                kind,
                h_cuts,
                v_cuts,
            })
        }
        WebKind::Horizontal { .. } | WebKind::HorizontalSemi { .. } => None,
    }
}

fn infer_ordered(h: &Linkage, v: &Linkage) -> Option<(Vec<usize>, Vec<Vec<usize>>)> {
    if h.order() == 0 || v.order() == 0 {
        return None;
    }
    let vsets: Vec<BTreeSet<Vertex>> = v.paths().iter().map(|p| p.vertex_set()).collect();
    let blocks = |p: &Walk| -> Option<Vec<(usize, usize, usize)>> {
        let mut spans = Vec::new();
        for (j, vs) in vsets.iter().enumerate() {
            let pos: Vec<usize> = p
                .seq
                .iter()
                .enumerate()
                .filter(|(_, vx)| vs.contains(*vx))
                .map(|(i, _)| i)
                .collect();
            let (&first, &last) = (pos.first()?, pos.last()?);
            spans.push((first, last, j));
        }
        spans.sort();
        for pair in spans.windows(2) {
            if pair[0].1 >= pair[1].0 {
                return None;
            }
        }
        Some(spans)
    };
    let first = blocks(&h.paths()[0])?;
    let vperm: Vec<usize> = first.iter().map(|&(_, _, j)| j).collect();
    let mut h_cuts = Vec::new();
    for p in h.paths() {
        let spans = blocks(p)?;
        let order: Vec<usize> = spans.iter().map(|&(_, _, j)| j).collect();
        if order != vperm {
            return None;
        }
        h_cuts.push(spans[..spans.len() - 1].iter().map(|&(_, last, _)| last).collect());
    }
    Some((vperm, h_cuts))
}

/// Renders the web as DOT, one horizontal rank per horizontal path, with
/// vertical-only arcs dashed.
pub fn web_to_dot(w: &WebWitness) -> String {
    let mut s = String::from("digraph web {\n  rankdir=TB;\n  node [shape=ellipse];\n");
    for p in w.h.paths() {
        s.push_str("  { rank=same;");
        for vx in &p.seq {
            s.push_str(&format!(" \"{vx}\";"));
        }
        s.push_str(" }\n");
        for (u, v) in p.arcs() {
            s.push_str(&format!("  \"{u}\" -> \"{v}\";\n"));
        }
    }
    let harcs = w.h.arc_set();
    for p in w.v.paths() {
        for (u, v) in p.arcs() {
            if !harcs.contains(&(u.clone(), v.clone())) {
                s.push_str(&format!("  \"{u}\" -> \"{v}\" [style=dashed];\n"));
            }
        }
    }
    s.push_str("}\n");
    s
}

fn distinct_members(members: &[usize], order: usize) -> Result<(), OpError> {
    let mut seen = BTreeSet::new();
    for &m in members {
        if m >= order {
            return Err(OpError::pre(format!(
                "member {m} is out of range for a linkage of order {order}"
            )));
        }
        if !seen.insert(m) {
            return Err(OpError::pre(format!("member {m} is listed twice")));
        }
    }
    Ok(())
}

fn well_linked_clause(
    rep: &mut Report,
    clause: &str,
    p: &Linkage,
    q: &Linkage,
    qstar: &Linkage,
    members: &[usize],
    cap: usize,
) -> Result<(), OpError> {
    let paths: Vec<Walk> = members.iter().map(|&m| q.paths()[m].clone()).collect();
    let sel = Linkage::new(paths).expect("paths of a linkage stay disjoint");
    let ambient = p.to_digraph().union(&qstar.to_digraph());
    if let Some(f) = is_well_linked(&ambient, &sel.end_set(), &sel.start_set(), cap)? {
        rep.add(
            clause,
            vec![],
            format!(
                "the member ends are not well-linked to their starts: {:?} to {:?} is separated by {:?}",
                f.a_subset, f.b_subset, f.separator
            ),
        );
    }
    Ok(())
}

/// Checks a split or segmentation witness clause by clause against the path
/// system `p`, the member linkage `q` and the reference linkage `qstar`
/// whose arcs the cut positions must avoid. The `cap` bounds the optional
/// well-linkedness subset checks.
pub fn verify_split_or_segmentation(
    wit: &SplitOrSegmentation,
    p: &Linkage,
    q: &Linkage,
    qstar: &Linkage,
    cap: usize,
) -> Result<Report, OpError> {
    if !q.to_digraph().is_subgraph_of(&qstar.to_digraph()) {
        return Err(OpError::pre(
            "the member linkage must sit inside the reference linkage",
        ));
    }
    let star_arcs = qstar.arc_set();
    let mut rep = Report::ok();
    match wit {
        SplitOrSegmentation::Split(sw) => {
            let pw = p
                .paths()
                .get(sw.path)
                .ok_or_else(|| OpError::pre(format!("the system has no path {}", sw.path)))?;
            let pieces = arc_segments(pw, &sw.cuts)?;
            let r = pieces.len();
            distinct_members(&sw.members, q.order())?;
            if sw.divisions.len() != sw.members.len() {
                return Err(OpError::pre(format!(
                    "{} division lists for {} members",
                    sw.divisions.len(),
                    sw.members.len()
                )));
            }
            let mut qpieces = Vec::new();
            for (k, &m) in sw.members.iter().enumerate() {
                let parts = arc_segments(&q.paths()[m], &sw.divisions[k])?;
                if parts.len() != r {
                    return Err(OpError::pre(format!(
                        "member {} is divided into {} pieces, the split has {r}",
                        k + 1,
                        parts.len()
                    )));
                }
                qpieces.push(parts);
            }
            for (t, &d) in sw.cuts.iter().enumerate() {
                let arc = (pw.seq[d].clone(), pw.seq[d + 1].clone());
                if star_arcs.contains(&arc) {
                    rep.add(
                        "split.cut_arc_free",
                        vec![t as i64 + 1],
                        format!("cut arc {} -> {} belongs to the reference linkage", arc.0, arc.1),
                    );
                }
            }
            for (i, piece) in pieces.iter().enumerate() {
                let pset = piece.vertex_set();
                for (k, &m) in sw.members.iter().enumerate() {
                    let hits: Vec<&Vertex> =
                        q.paths()[m].seq.iter().filter(|vx| pset.contains(*vx)).collect();
                    if hits.is_empty() {
                        rep.add(
                            "split.crossing_nonempty",
                            vec![i as i64 + 1, k as i64 + 1],
                            format!("member {} misses piece {}", k + 1, i + 1),
                        );
                        continue;
                    }
                    let target = qpieces[k][r - 1 - i].vertex_set();
                    if let Some(bad) = hits.iter().find(|vx| !target.contains(**vx)) {
                        rep.add(
                            "split.crossing_containment",
                            vec![i as i64 + 1, k as i64 + 1],
                            format!(
                                "vertex {bad} of piece {} lies outside division piece {} of member {}",
                                i + 1,
                                r - i,
                                k + 1
                            ),
                        );
                    }
                }
            }
            if sw.well_linked {
                well_linked_clause(&mut rep, "split.well_linked", p, q, qstar, &sw.members, cap)?;
            }
        }
        SplitOrSegmentation::Segmentation(sg) => {
            if sg.pieces.is_empty() {
                return Err(OpError::pre("a segmentation needs at least one piece"));
            }
            distinct_members(&sg.members, q.order())?;
            let qn = sg.members.len();
            let mut walks = Vec::new();
            for (k, pc) in sg.pieces.iter().enumerate() {
                let pw = p
                    .paths()
                    .get(pc.path)
                    .ok_or_else(|| OpError::pre(format!("the system has no path {}", pc.path)))?;
                if pc.from > pc.to || pc.to > pw.len() {
                    return Err(OpError::pre(format!(
                        "piece {} spans positions {}..{} of a walk with {} arcs",
                        k + 1,
                        pc.from,
                        pc.to,
                        pw.len()
                    )));
                }
                let piece = pw.slice(pc.from, pc.to);
                let segs = arc_segments(&piece, &pc.cuts)?;
                if qn == 0 {
                    if !pc.cuts.is_empty() || !pc.order.is_empty() {
                        return Err(OpError::pre(
                            "a segmentation without members carries no cuts or order",
                        ));
                    }
                } else {
                    if segs.len() != qn {
                        return Err(OpError::pre(format!(
                            "piece {} has {} segments for {qn} members",
                            k + 1,
                            segs.len()
                        )));
                    }
                    let mut idx: Vec<usize> = pc.order.clone();
                    idx.sort_unstable();
                    if idx != (0..qn).collect::<Vec<_>>() {
                        return Err(OpError::pre(format!(
                            "the order of piece {} is not a permutation of the members",
                            k + 1
                        )));
                    }
                }
                for (t, &d) in pc.cuts.iter().enumerate() {
                    let arc = (piece.seq[d].clone(), piece.seq[d + 1].clone());
                    if star_arcs.contains(&arc) {
                        rep.add(
                            "segmentation.cut_arc_free",
                            vec![k as i64 + 1, t as i64 + 1],
                            format!("cut arc {} -> {} belongs to the reference linkage", arc.0, arc.1),
                        );
                    }
                }
                let pieceset = piece.vertex_set();
                for (t, seg) in segs.iter().enumerate() {
                    if qn == 0 {
                        break;
                    }
                    let segset = seg.vertex_set();
                    let m = sg.members[pc.order[t]];
                    if let Some(bad) = q.paths()[m]
                        .seq
                        .iter()
                        .find(|vx| pieceset.contains(*vx) && !segset.contains(*vx))
                    {
                        rep.add(
                            "segmentation.containment",
                            vec![k as i64 + 1, t as i64 + 1],
                            format!(
                                "vertex {bad} of member {} strays outside segment {} of piece {}",
                                pc.order[t] + 1,
                                t + 1,
                                k + 1
                            ),
                        );
                    }
                }
                walks.push(piece);
            }
            if let Err(e) = Linkage::new(walks) {
                rep.add("segmentation.linkage", vec![], e.to_string());
            }
            if sg.ordered && qn > 0 {
                let first = &sg.pieces[0].order;
                for (k, pc) in sg.pieces.iter().enumerate().skip(1) {
                    if &pc.order != first {
                        rep.add(
                            "segmentation.same_order",
                            vec![k as i64 + 1],
                            format!("piece {} orders the members differently", k + 1),
                        );
                    }
                }
            }
            if sg.well_linked {
                well_linked_clause(
                    &mut rep,
                    "segmentation.well_linked",
                    p,
                    q,
                    qstar,
                    &sg.members,
                    cap,
                )?;
            }
        }
    }
    Ok(rep)
}

fn assert_verifies(
    wit: &SplitOrSegmentation,
    p: &Linkage,
    q: &Linkage,
    qstar: &Linkage,
) -> Result<(), OpError> {
    let rep = verify_split_or_segmentation(wit, p, q, qstar, 0)?;
    if rep.is_ok() {
        Ok(())
    } else {
        Err(OpError::Internal(format!(
            "a constructed witness fails its own clauses: {:?}",
            rep.violations
        )))
    }
}

/// Searches for an `s`-segmentation of the path `p` by members of `q`, or a
/// split of `p` into two pieces crossed by `r` members. The connectivity
/// hypothesis behind the guarantee is verified, not assumed: every arc of
/// `p` outside the reference linkage must, once removed from `h`, leave
/// fewer than `c` disjoint connections from its prefix to its suffix.
/// Candidate cuts are enumerated in lexicographic order and the result is
/// re-verified; exhaustion without a find is an internal error because the
/// hypothesis rules it out. When every member meets a common position of
/// the path, disjoint segments cannot each contain one, so the segmentation
/// search is skipped outright.
pub fn segmentation_or_split_oracle(
    h: &Digraph,
    qstar: &Linkage,
    q: &Linkage,
    p: &Walk,
    c: usize,
    s: usize,
    r: usize,
    budget: &Budget,
) -> Result<SplitOrSegmentation, OpError> {
    if p.is_empty() || !p.is_path() {
        return Err(OpError::pre("the segmented walk must be a nonempty path"));
    }
    if !p.is_walk_in(h) || !q.is_in(h) {
        return Err(OpError::pre("the path and the members must live in the host"));
    }
    if !q.to_digraph().is_subgraph_of(&qstar.to_digraph()) {
        return Err(OpError::pre(
            "the member linkage must sit inside the reference linkage",
        ));
    }
    let ppos: BTreeMap<&Vertex, usize> = p.seq.iter().enumerate().map(|(i, v)| (v, i)).collect();
    for (m, qp) in q.paths().iter().enumerate() {
        if !qp.seq.iter().any(|v| ppos.contains_key(v)) {
            return Err(OpError::pre(format!("member {} never meets the path", m + 1)));
        }
    }
    if q.order() < (r + c) * s {
        return Err(OpError::pre(format!(
            "{} members are too few, the search needs at least ({r} + {c}) * {s}",
            q.order()
        )));
    }
    let star_arcs = qstar.arc_set();
    let candidates: Vec<usize> = (0..p.len())
        .filter(|&d| !star_arcs.contains(&(p.seq[d].clone(), p.seq[d + 1].clone())))
        .collect();
    for &d in &candidates {
        budget.tick()?;
        let e = (p.seq[d].clone(), p.seq[d + 1].clone());
        let without = h.minus_arcs([&e]);
        let pre: BTreeSet<Vertex> = p.seq[..=d].iter().cloned().collect();
        let suf: BTreeSet<Vertex> = p.seq[d + 1..].iter().cloned().collect();
        if max_linkage_order(&without, &pre, &suf) >= c {
            return Err(OpError::pre(format!(
                "removing arc {} -> {} still leaves {c} disjoint connections around it",
                e.0, e.1
            )));
        }
    }
    let single = Linkage::new(vec![p.clone()]).expect("a single path is a linkage");
    if s == 0 {
        let sg = SegmentationWitness {
            pieces: vec![SegPiece {
                path: 0,
                from: 0,
                to: p.len(),
                cuts: vec![],
                order: vec![],
            }],
            members: vec![],
            ordered: true,
            well_linked: false,
        };
        let out = SplitOrSegmentation::Segmentation(sg);
        assert_verifies(&out, &single, q, qstar)?;
        return Ok(out);
    }
    if r == 0 {
        return Err(OpError::pre("the split order must be positive"));
    }
    let mut fmin = vec![usize::MAX; q.order()];
    let mut fmax = vec![0usize; q.order()];
    for (m, qp) in q.paths().iter().enumerate() {
        for v in &qp.seq {
            if let Some(&i) = ppos.get(v) {
                fmin[m] = fmin[m].min(i);
                fmax[m] = fmax[m].max(i);
            }
        }
    }
    let shared_position = s >= 2
        && fmin.iter().copied().max().unwrap_or(usize::MAX)
            <= fmax.iter().copied().min().unwrap_or(0);
    if !shared_position {
        for combo in candidates.iter().copied().combinations(s - 1) {
            budget.tick()?;
            let ranges = cut_ranges(p.len(), &combo)?;
            let mut used = vec![false; q.order()];
            let mut chosen = Vec::with_capacity(s);
            for &(lo, hi) in &ranges {
                match (0..q.order()).find(|&m| !used[m] && fmin[m] >= lo && fmax[m] <= hi) {
                    Some(m) => {
                        used[m] = true;
                        chosen.push(m);
                    }
                    None => break,
                }
            }
            if chosen.len() == ranges.len() {
                let sg = SegmentationWitness {
                    pieces: vec![SegPiece {
                        path: 0,
                        from: 0,
                        to: p.len(),
                        cuts: combo,
                        order: (0..s).collect(),
                    }],
                    members: chosen,
                    ordered: true,
                    well_linked: false,
                };
                let out = SplitOrSegmentation::Segmentation(sg);
                assert_verifies(&out, &single, q, qstar)?;
                return Ok(out);
            }
        }
    }
    let mut by_arc: Vec<(Arc, usize)> = candidates
        .iter()
        .map(|&d| ((p.seq[d].clone(), p.seq[d + 1].clone()), d))
        .collect();
    by_arc.sort();
    for (_, d) in by_arc {
        budget.tick()?;
        let mut members = Vec::new();
        let mut divisions = Vec::new();
        for (m, qp) in q.paths().iter().enumerate() {
            if members.len() == r {
                break;
            }
            let mut first1 = None;
            let mut last2 = None;
            for (qi, v) in qp.seq.iter().enumerate() {
                if let Some(&pi) = ppos.get(v) {
                    if pi <= d {
                        first1.get_or_insert(qi);
                    } else {
                        last2 = Some(qi);
                    }
                }
            }
            if let (Some(f1), Some(l2)) = (first1, last2) {
                if l2 < f1 {
                    members.push(m);
                    divisions.push(vec![l2]);
                }
            }
        }
        if members.len() == r {
            let sw = SplitWitness {
                path: 0,
                cuts: vec![d],
                members,
                divisions,
                well_linked: false,
            };
            let out = SplitOrSegmentation::Split(sw);
            assert_verifies(&out, &single, q, qstar)?;
            return Ok(out);
        }
    }
    Err(OpError::Internal(
        "no segmentation and no split was found, although the verified hypothesis guarantees one".into(),
    ))
}

/// The member schedule of the split-or-segmentation iteration: entry `i` is
/// the member order the iteration must still hold after `i` of `steps`
/// oracle calls, built backwards from the final target `q` by
/// `q_{i-1} = q_i (q_i + c)`.
pub fn q_schedule(q: usize, c: usize, steps: usize) -> Vec<BigUint> {
    let mut sched = vec![BigUint::zero(); steps + 1];
    sched[steps] = BigUint::from(q);
    for i in (0..steps).rev() {
        sched[i] = &sched[i + 1] * (&sched[i + 1] + BigUint::from(c));
    }
    sched
}

/// Closed-form upper estimate for the head of the schedule:
/// `(q(c+1))^(2^z) * 2^(2^z - 1)`. Returns `None` when the exponent `2^z`
/// does not fit the power interface.
pub fn segmentation_split_entry_bound(q: usize, c: usize, z: usize) -> Option<BigUint> {
    let exp = 2u32.checked_pow(u32::try_from(z).ok()?)?;
    let base = BigUint::from(q) * BigUint::from(c + 1);
    Some(base.pow(exp) * BigUint::from(2u32).pow(exp - 1))
}

/// Entry requirement on the member target of the folded-or-ordered
/// refinement: `q''^(2^(2x-1)) + 1`.
pub fn folded_or_ordered_entry_q(q_ord: usize, x: usize) -> Option<BigUint> {
    let exp = 2u32.checked_pow(u32::try_from(2 * x - 1).ok()?)?;
    Some(BigUint::from(q_ord).pow(exp) + 1u32)
}

struct SegRecord {
    path: usize,
    from: usize,
    cuts: Vec<usize>,
    qseq: Vec<usize>,
}

fn refit_record(rec: &mut SegRecord, keep: &BTreeSet<usize>) {
    let surviving: Vec<usize> = (0..rec.qseq.len())
        .filter(|&k| keep.contains(&rec.qseq[k]))
        .collect();
    let mut cuts = Vec::new();
    for w in 0..surviving.len().saturating_sub(1) {
        cuts.push(rec.cuts[surviving[w]]);
    }
    rec.cuts = cuts;
    rec.qseq = surviving.iter().map(|&k| rec.qseq[k]).collect();
}

struct ActiveSplit {
    path: usize,
    cuts: Vec<usize>,
    divisions: BTreeMap<usize, Vec<usize>>,
}

/// Iterates the split-or-segmentation oracle over end pieces of horizontal
/// paths until either `x` segmented pieces or a `y`-piece split chain has
/// accumulated, then trims to a `(x, q)`-segmentation whose pieces all end
/// at ends of the horizontal linkage, or to a `(y, q)`-split. The entry
/// requirement on the vertical order is the exact head of `q_schedule`; the
/// closed form over-approximates it and stays available for display.
pub fn web_to_split_or_segmentation(
    w: &WebWitness,
    x: usize,
    y: usize,
    q: usize,
    c: usize,
    budget: &Budget,
) -> Result<SplitOrSegmentation, OpError> {
    if x == 0 || y == 0 {
        return Err(OpError::pre("the piece targets must be positive"));
    }
    let rep = verify_web(w)?;
    if !rep.is_ok() {
        return Err(OpError::pre(format!(
            "the web does not verify: {:?}",
            rep.violations
        )));
    }
    if w.h.order() < x {
        return Err(OpError::pre(format!(
            "{} horizontal paths are too few for {x} segmented pieces",
            w.h.order()
        )));
    }
    let vdig = w.v.to_digraph();
    if let Err(viol) = is_weakly_minimal(&w.h, &vdig, c) {
        return Err(OpError::pre(format!(
            "the horizontal linkage is not weakly {c}-minimal: path {} keeps order {} without arc {:?}",
            viol.path_index + 1,
            viol.linkage_order_found,
            viol.arc
        )));
    }
    let steps = x * y;
    let sched = q_schedule(q, c, steps);
    if BigUint::from(w.v.order()) < sched[0] {
        return Err(OpError::pre(format!(
            "{} vertical paths are too few, the iteration enters at {}",
            w.v.order(),
            sched[0]
        )));
    }
    let host = w.to_digraph();
    let mut q_cur: Vec<usize> = (0..w.v.order()).collect();
    let mut pool: Vec<usize> = (0..w.h.order()).collect();
    pool.reverse();
    let mut records: Vec<SegRecord> = Vec::new();
    let mut active: Option<ActiveSplit> = None;
    let mut step = 0;
    loop {
        if records.len() >= x {
            return finish_segmentation(w, records, &q_cur, q);
        }
        if let Some(act) = &active {
            if act.cuts.len() + 1 >= y {
                return finish_split(w, act, &q_cur, q);
            }
        }
        if step == steps {
            return Err(OpError::Internal(
                "the iteration exhausted its step allowance without stopping".into(),
            ));
        }
        budget.tick()?;
        if active.is_none() {
            let t = pool.pop().ok_or_else(|| {
                OpError::Internal("the horizontal path pool ran out".into())
            })?;
            active = Some(ActiveSplit {
                path: t,
                cuts: vec![],
                divisions: q_cur.iter().map(|&vi| (vi, vec![])).collect(),
            });
        }
        let (act_path, from) = {
            let act = active.as_ref().expect("activated above");
            (act.path, act.cuts.last().map(|&d| d + 1).unwrap_or(0))
        };
        let hpath = &w.h.paths()[act_path];
        let piece = hpath.slice(from, hpath.len());
        let cur_paths: Vec<Walk> = q_cur.iter().map(|&vi| w.v.paths()[vi].clone()).collect();
        let cur = Linkage::new(cur_paths).expect("paths of a linkage stay disjoint");
        let target = usize::try_from(&sched[step + 1]).expect("the schedule fits the order");
        let found =
            segmentation_or_split_oracle(&host, &w.v, &cur, &piece, c, target, target, budget)?;
        match found {
            SplitOrSegmentation::Segmentation(sg) => {
                let pc = &sg.pieces[0];
                let qseq: Vec<usize> = pc
                    .order
                    .iter()
                    .map(|&slot| q_cur[sg.members[slot]])
                    .collect();
                let keep: BTreeSet<usize> = qseq.iter().copied().collect();
                records.push(SegRecord {
                    path: act_path,
                    from,
                    cuts: pc.cuts.clone(),
                    qseq,
                });
                q_cur = keep.iter().copied().collect();
                for rec in &mut records {
                    refit_record(rec, &keep);
                }
                active = None;
            }
            SplitOrSegmentation::Split(sw) => {
                let act = active.as_mut().expect("active during a split step");
                let abs = from + sw.cuts[0];
                act.cuts.push(abs);
                let keep: BTreeSet<usize> = sw.members.iter().map(|&m| q_cur[m]).collect();
                let mut divisions = BTreeMap::new();
                for (k, &m) in sw.members.iter().enumerate() {
                    let vi = q_cur[m];
                    let dv = sw.divisions[k][0];
                    let old = act.divisions.get(&vi).cloned().unwrap_or_default();
                    if let Some(&first) = old.first() {
                        if dv >= first {
                            return Err(OpError::Internal(
                                "a new division does not precede the previous ones".into(),
                            ));
                        }
                    }
                    let mut list = vec![dv];
                    list.extend(old);
                    divisions.insert(vi, list);
                }
                act.divisions = divisions;
                q_cur = keep.iter().copied().collect();
                for rec in &mut records {
                    refit_record(rec, &keep);
                }
            }
        }
        step += 1;
    }
}

fn finish_segmentation(
    w: &WebWitness,
    mut records: Vec<SegRecord>,
    q_cur: &[usize],
    q: usize,
) -> Result<SplitOrSegmentation, OpError> {
    let members: Vec<usize> = q_cur.iter().copied().take(q).collect();
    if members.len() < q {
        return Err(OpError::Internal(
            "fewer members survived than the schedule promises".into(),
        ));
    }
    let keep: BTreeSet<usize> = members.iter().copied().collect();
    let index: BTreeMap<usize, usize> =
        members.iter().enumerate().map(|(k, &vi)| (vi, k)).collect();
    for rec in &mut records {
        refit_record(rec, &keep);
    }
    let pieces: Vec<SegPiece> = records
        .iter()
        .map(|rec| SegPiece {
            path: rec.path,
            from: rec.from,
            to: w.h.paths()[rec.path].len(),
            cuts: rec.cuts.clone(),
            order: rec.qseq.iter().map(|vi| index[vi]).collect(),
        })
        .collect();
    let ordered = pieces.windows(2).all(|p| p[0].order == p[1].order);
    let sg = SegmentationWitness {
        pieces,
        members,
        ordered,
        well_linked: false,
    };
    let out = SplitOrSegmentation::Segmentation(sg);
    assert_verifies(&out, &w.h, &w.v, &w.v)?;
    Ok(out)
}

fn finish_split(
    w: &WebWitness,
    act: &ActiveSplit,
    q_cur: &[usize],
    q: usize,
) -> Result<SplitOrSegmentation, OpError> {
    let members: Vec<usize> = q_cur.iter().copied().take(q).collect();
    if members.len() < q {
        return Err(OpError::Internal(
            "fewer members survived than the schedule promises".into(),
        ));
    }
    let divisions: Vec<Vec<usize>> = members
        .iter()
        .map(|vi| act.divisions[vi].clone())
        .collect();
    let sw = SplitWitness {
        path: act.path,
        cuts: act.cuts.clone(),
        members,
        divisions,
        well_linked: false,
    };
    let out = SplitOrSegmentation::Split(sw);
    assert_verifies(&out, &w.h, &w.v, &w.v)?;
    Ok(out)
}

/// Folds a split with an even piece count into a folded ordered web: fused
/// piece pairs of the split path become the vertical paths, listed in
/// reverse, and the members become the horizontal paths, segmented at every
/// second division.
pub fn split_to_folded(
    sw: &SplitWitness,
    p: &Linkage,
    q: &Linkage,
    qstar: &Linkage,
    cap: usize,
) -> Result<WebWitness, OpError> {
    let rep = verify_split_or_segmentation(
        &SplitOrSegmentation::Split(sw.clone()),
        p,
        q,
        qstar,
        cap,
    )?;
    if !rep.is_ok() {
        return Err(OpError::pre(format!(
            "the split does not verify: {:?}",
            rep.violations
        )));
    }
    let r = sw.cuts.len() + 1;
    if r % 2 != 0 {
        return Err(OpError::pre(format!(
            "folding needs an even piece count, the split has {r}"
        )));
    }
    let fold = r / 2;
    let pw = &p.paths()[sw.path];
    let ranges = cut_ranges(pw.len(), &sw.cuts).expect("the split verified");
    let mut v_walks = Vec::new();
    let mut v_cuts = Vec::new();
    for i in (0..fold).rev() {
        let (lo, mid_hi) = ranges[2 * i];
        let (_, hi) = ranges[2 * i + 1];
        v_walks.push(pw.slice(lo, hi));
        v_cuts.push(vec![mid_hi - lo]);
    }
    let h_walks: Vec<Walk> = sw.members.iter().map(|&m| q.paths()[m].clone()).collect();
    let h_cuts: Vec<Vec<usize>> = sw
        .divisions
        .iter()
        .map(|dv| (1..r - 1).step_by(2).map(|idx| dv[idx]).collect())
        .collect();
    let web = WebWitness {
        h: Linkage::new(h_walks).expect("members of a linkage stay disjoint"),
        v: Linkage::new(v_walks).expect("pieces of one path stay disjoint"),
        kind: WebKind::Folded { ordered: true },
        h_cuts,
        v_cuts,
    };
    let rep = verify_web(&web)?;
    if !rep.is_ok() {
        return Err(OpError::Internal(format!(
            "the folded web fails verification: {:?}",
            rep.violations
        )));
    }
    Ok(web)
}

/// Longest strictly increasing and strictly decreasing subsequences of a
/// sequence of distinct numbers, each reconstructed with earliest ties, and
/// the qualifying one: increasing if it reaches `r`, otherwise decreasing
/// if it reaches `s`.
pub fn es_extract(seq: &[i64], r: usize, s: usize) -> MonotoneExtract {
    let increasing = longest_monotone(seq, |a, b| a < b);
    let decreasing = longest_monotone(seq, |a, b| a > b);
    let qualifying = if increasing.len() >= r {
        Some((increasing.clone(), MonotoneDirection::Increasing))
    } else if decreasing.len() >= s {
        Some((decreasing.clone(), MonotoneDirection::Decreasing))
    } else {
        None
    };
    MonotoneExtract {
        increasing,
        decreasing,
        qualifying,
    }
}

fn longest_monotone(seq: &[i64], before: impl Fn(i64, i64) -> bool) -> Vec<i64> {
    let n = seq.len();
    if n == 0 {
        return vec![];
    }
    let mut len = vec![1usize; n];
    let mut pred = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..i {
            if before(seq[j], seq[i]) && len[j] + 1 > len[i] {
                len[i] = len[j] + 1;
                pred[i] = j;
            }
        }
    }
    let best = (0..n).max_by_key(|&i| (len[i], n - i)).expect("nonempty");
    let mut out = Vec::with_capacity(len[best]);
    let mut cur = best;
    loop {
        out.push(seq[cur]);
        if pred[cur] == usize::MAX {
            break;
        }
        cur = pred[cur];
    }
    out.reverse();
    out
}

/// Refines a verified segmentation into an ordered web: starting from all
/// members, each further piece keeps a subset met in a monotone order via
/// `es_extract`, the survivors are trimmed to `q_ord`, and the pieces that
/// agree on one direction (at least `x` of them by pigeonhole when the
/// piece count is `2x - 1`) become the horizontal paths.
pub fn ordered_web_from_segmentation(
    sg: &SegmentationWitness,
    p: &Linkage,
    q: &Linkage,
    qstar: &Linkage,
    x: usize,
    q_ord: usize,
    cap: usize,
) -> Result<WebWitness, OpError> {
    if x == 0 || q_ord == 0 {
        return Err(OpError::pre("the targets must be positive"));
    }
    let rep = verify_split_or_segmentation(
        &SplitOrSegmentation::Segmentation(sg.clone()),
        p,
        q,
        qstar,
        cap,
    )?;
    if !rep.is_ok() {
        return Err(OpError::pre(format!(
            "the segmentation does not verify: {:?}",
            rep.violations
        )));
    }
    let n = sg.pieces.len();
    let mut need = vec![BigUint::from(q_ord)];
    for _ in 1..n {
        let last = need.last().expect("seeded").clone();
        need.push((last.clone() - 1u32) * (last - 1u32) + 1u32);
    }
    need.reverse();
    if BigUint::from(sg.members.len()) < need[0] {
        return Err(OpError::pre(format!(
            "{} members are too few, the refinement enters at {}",
            sg.members.len(),
            need[0]
        )));
    }
    let walks: Vec<Walk> = sg
        .pieces
        .iter()
        .map(|pc| p.paths()[pc.path].slice(pc.from, pc.to))
        .collect();
    let mut first_hit = vec![vec![usize::MAX; sg.members.len()]; n];
    for (pi, walk) in walks.iter().enumerate() {
        for (k, &m) in sg.members.iter().enumerate() {
            let vset = q.paths()[m].vertex_set();
            match walk.seq.iter().position(|vx| vset.contains(vx)) {
                Some(pos) => first_hit[pi][k] = pos,
                None => {
                    return Err(OpError::pre(format!(
                        "member {} never meets piece {}",
                        k + 1,
                        pi + 1
                    )))
                }
            }
        }
    }
    let by_piece = |pi: usize, set: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = set.to_vec();
        v.sort_by_key(|&k| first_hit[pi][k]);
        v
    };
    let mut q_set: Vec<usize> = (0..sg.members.len()).collect();
    for pi in 1..n {
        let prev = by_piece(pi - 1, &q_set);
        let rank: BTreeMap<usize, usize> =
            prev.iter().enumerate().map(|(rk, &k)| (k, rk)).collect();
        let cur = by_piece(pi, &q_set);
        let seq: Vec<i64> = cur.iter().map(|k| rank[k] as i64).collect();
        let threshold = usize::try_from(&need[pi]).expect("bounded by the member count");
        let ex = es_extract(&seq, threshold, threshold);
        let (sub, _) = ex.qualifying.ok_or_else(|| {
            OpError::Internal("no monotone subsequence of the promised length exists".into())
        })?;
        let chosen: BTreeSet<i64> = sub.iter().copied().collect();
        q_set = cur
            .into_iter()
            .filter(|k| chosen.contains(&(rank[k] as i64)))
            .collect();
    }
    let trimmed: Vec<usize> = by_piece(n - 1, &q_set).into_iter().take(q_ord).collect();
    if trimmed.len() < q_ord {
        return Err(OpError::Internal(
            "fewer members survived the refinement than promised".into(),
        ));
    }
    let sigma: Vec<usize> = by_piece(n - 1, &trimmed);
    let mut reversed = sigma.clone();
    reversed.reverse();
    let mut straight = Vec::new();
    let mut inverted = Vec::new();
    for pi in 0..n {
        let order = by_piece(pi, &trimmed);
        if order == sigma {
            straight.push(pi);
        } else if order == reversed {
            inverted.push(pi);
        } else {
            return Err(OpError::Internal(format!(
                "piece {} meets the members in a non-monotone order",
                pi + 1
            )));
        }
    }
    let (chosen_pieces, final_order) = if straight.len() >= inverted.len() {
        (straight, sigma)
    } else {
        (inverted, reversed)
    };
    if chosen_pieces.len() < x {
        return Err(OpError::Internal(format!(
            "only {} pieces share a direction, {x} are needed",
            chosen_pieces.len()
        )));
    }
    let h_walks: Vec<Walk> = chosen_pieces.iter().take(x).map(|&pi| walks[pi].clone()).collect();
    let v_walks: Vec<Walk> = final_order
        .iter()
        .map(|&k| q.paths()[sg.members[k]].clone())
        .collect();
    let mut h_cuts = Vec::new();
    for &pi in chosen_pieces.iter().take(x) {
        let mut cuts = Vec::new();
        let mut prev_last: Option<usize> = None;
        for (t, &k) in final_order.iter().enumerate() {
            let vset = q.paths()[sg.members[k]].vertex_set();
            let hits: Vec<usize> = walks[pi]
                .seq
                .iter()
                .enumerate()
                .filter(|(_, vx)| vset.contains(*vx))
                .map(|(i, _)| i)
                .collect();
            let (&first, &last) = (hits.first().expect("hits exist"), hits.last().expect("hits exist"));
            if let Some(pl) = prev_last {
                if first <= pl {
                    return Err(OpError::Internal(
                        "member blocks interleave along a piece".into(),
                    ));
                }
            }
            prev_last = Some(last);
            if t + 1 < final_order.len() {
                cuts.push(last);
            }
        }
        h_cuts.push(cuts);
    }
    let web = WebWitness {
        h: Linkage::new(h_walks).expect("segmentation pieces stay disjoint"),
        v: Linkage::new(v_walks).expect("members of a linkage stay disjoint"),
        kind: WebKind::Ordered,
        h_cuts,
        v_cuts: vec![],
    };
    let rep = verify_web(&web)?;
    if !rep.is_ok() {
        return Err(OpError::Internal(format!(
            "the ordered web fails verification: {:?}",
            rep.violations
        )));
    }
    Ok(web)
}

/// Runs the split-or-segmentation iteration at widened targets and converts
/// the outcome: a split folds into a folded ordered `(q, y)`-web, a
/// segmentation refines into an ordered `(x, q_ord)`-web whose horizontal
/// paths end at ends of the input's horizontal paths.
pub fn web_to_folded_or_ordered(
    w: &WebWitness,
    x: usize,
    y: usize,
    q: usize,
    q_ord: usize,
    c: usize,
    budget: &Budget,
) -> Result<WebWitness, OpError> {
    if x == 0 || y == 0 || q_ord == 0 {
        return Err(OpError::pre("the targets must be positive"));
    }
    let entry = folded_or_ordered_entry_q(q_ord, x)
        .ok_or_else(|| OpError::pre("the refinement exponent is out of range"))?;
    if BigUint::from(q) < entry {
        return Err(OpError::pre(format!(
            "the member target {q} is below the refinement entry {entry}"
        )));
    }
    if w.h.order() < 2 * x - 1 {
        return Err(OpError::pre(format!(
            "{} horizontal paths are too few, the pigeonhole needs {}",
            w.h.order(),
            2 * x - 1
        )));
    }
    match web_to_split_or_segmentation(w, 2 * x - 1, 2 * y, q, c, budget)? {
        SplitOrSegmentation::Split(sw) => split_to_folded(&sw, &w.h, &w.v, &w.v, 0),
        SplitOrSegmentation::Segmentation(sg) => {
            ordered_web_from_segmentation(&sg, &w.h, &w.v, &w.v, x, q_ord, 0)
        }
    }
}

/// Builds the two-zone horizontal web inside a cylindrical grid of even
/// order `2k`: the first `k` inward paths form the horizontal linkage, cut
/// at the boundary between the outer and inner half of the cycles, and each
/// vertical path runs along an inner cycle, rides an outward path, and
/// wraps around an outer cycle. The grid must follow the generator layout.
pub fn grid_to_2hweb(g: &GridWitness) -> Result<WebWitness, OpError> {
    let n = g.order;
    if n < 2 || n % 2 != 0 {
        return Err(OpError::pre("the grid order must be even and at least 2"));
    }
    if g.cycles.len() != n || g.paths.len() != 2 * n {
        return Err(OpError::pre("the witness shape does not match its order"));
    }
    for (ci, cycle) in g.cycles.iter().enumerate() {
        if cycle.seq.len() != 2 * n + 1 {
            return Err(OpError::pre("the grid witness does not follow the generator layout"));
        }
        for (pj, path) in g.paths.iter().enumerate() {
            let expected = &cycle.seq[pj];
            let at = if pj % 2 == 1 { n - 1 - ci } else { ci };
            if path.seq.get(at) != Some(expected) {
                return Err(OpError::pre("the grid witness does not follow the generator layout"));
            }
        }
    }
    let k = n / 2;
    let h_walks: Vec<Walk> = (1..=k).map(|t| g.paths[2 * t - 1].clone()).collect();
    let h_cuts: Vec<Vec<usize>> = (1..=k).map(|_| vec![k - 1]).collect();
    let mut v_walks = Vec::new();
    let mut v_cuts = Vec::new();
    for j in 1..=k {
        let rho = 4 * k - 2 * j;
        let oc = k + j;
        let mut seq: Vec<Vertex> = (1..=rho).map(|pos| g.cycles[j - 1].seq[pos].clone()).collect();
        for ci in j..oc {
            seq.push(g.cycles[ci].seq[rho].clone());
        }
        for m in 1..=(4 * k - 1 - rho) + 2 * k {
            seq.push(g.cycles[oc - 1].seq[(rho + m) % (4 * k)].clone());
        }
        v_walks.push(Walk::new(seq));
        v_cuts.push(vec![rho + k - 2]);
    }
    let web = WebWitness {
        h: Linkage::new(h_walks).expect("grid paths stay disjoint"),
        v: Linkage::new(v_walks).expect("the windows of the vertical paths stay disjoint"),
        kind: WebKind::Horizontal { c: 2 },
        h_cuts,
        v_cuts,
    };
    let rep = verify_web(&web)?;
    if !rep.is_ok() {
        return Err(OpError::Internal(format!(
            "the grid web fails verification: {:?}",
            rep.violations
        )));
    }
    Ok(web)
}

fn path_through(
    g: &Digraph,
    sources: &BTreeSet<Vertex>,
    mid: &Vertex,
    targets: &BTreeSet<Vertex>,
    budget: &Budget,
) -> Result<Option<Walk>, OpError> {
    if !g.has_vertex(mid) {
        return Ok(None);
    }
    let adj = g.adjacency();
    for a in sources {
        if !g.has_vertex(a) {
            continue;
        }
        let mut path = vec![a.clone()];
        let mut seen: BTreeSet<Vertex> = path.iter().cloned().collect();
        if let Some(found) = extend_through(g, &adj.out, mid, targets, &mut path, &mut seen, budget)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

fn extend_through(
    g: &Digraph,
    out: &BTreeMap<Vertex, Vec<Vertex>>,
    mid: &Vertex,
    targets: &BTreeSet<Vertex>,
    path: &mut Vec<Vertex>,
    seen: &mut BTreeSet<Vertex>,
    budget: &Budget,
) -> Result<Option<Walk>, OpError> {
    budget.tick()?;
    let cur = path.last().expect("the path is seeded").clone();
    if &cur == mid {
        if targets.contains(mid) {
            return Ok(Some(Walk::new(path.clone())));
        }
        let forbidden: BTreeSet<Vertex> =
            path.iter().filter(|vx| *vx != mid).cloned().collect();
        for t in targets {
            if let Some(tail) = bfs_path(g, mid, t, &forbidden) {
                let mut seq = path.clone();
                seq.extend(tail.seq[1..].iter().cloned());
                return Ok(Some(Walk::new(seq)));
            }
        }
        return Ok(None);
    }
    if let Some(nexts) = out.get(&cur) {
        for nxt in nexts {
            if seen.contains(nxt) {
                continue;
            }
            seen.insert(nxt.clone());
            path.push(nxt.clone());
            if let Some(found) = extend_through(g, out, mid, targets, path, seen, budget)? {
                return Ok(Some(found));
            }
            path.pop();
            seen.remove(nxt);
        }
    }
    Ok(None)
}

/// Builds an ordered web over a cluster-by-cluster back-linkage of a strict
/// well-linked path of clusters: vertical path `i` stitches one piece per
/// back-linkage path, placed at stride-two cluster indices inside window
/// `i`, with connectors routed through the witness; the back-linkage itself
/// is the horizontal side, segmented at the window boundaries.
pub fn ordered_web_from_cbc(
    w: &WellsWitness,
    r: &Linkage,
    v: usize,
    budget: &Budget,
) -> Result<WebWitness, OpError> {
    if w.cyclic {
        return Err(OpError::pre("the construction is defined for non-cyclic witnesses"));
    }
    if !w.strict || !matches!(w.mode, WellsMode::WellLinked) {
        return Err(OpError::pre("the construction needs a strict well-linked witness"));
    }
    if w.width() == 0 || v == 0 || r.order() == 0 {
        return Err(OpError::pre("the width, the target and the back-linkage must be nonempty"));
    }
    let rn = r.order();
    let ell = w.length();
    let span = 2 * (rn - 1) + 2 * rn * (v - 1);
    if ell < span {
        return Err(OpError::pre(format!(
            "length {ell} is too short, the windows need {span}"
        )));
    }
    let last = w.clusters.len() - 1;
    if !r.start_set().is_subset(&w.clusters[last].b_set())
        || !r.end_set().is_subset(&w.clusters[0].a_set())
    {
        return Err(OpError::pre(
            "the back-linkage must run from the exit of the last cluster to the entry of the first",
        ));
    }
    let jumps = detect_jumps(w, r)?;
    if !jumps.cluster_by_cluster {
        return Err(OpError::pre("the back-linkage does not move cluster by cluster"));
    }
    let mem = memberships(w)?;
    let mut used: BTreeSet<Vertex> = BTreeSet::new();
    let mut v_walks_rev: Vec<Walk> = Vec::new();
    for i in 1..=v {
        let mut pieces: Vec<Walk> = Vec::new();
        let mut windows: Vec<usize> = Vec::new();
        for j in 1..=rn {
            let k = 2 * (j - 1) + 2 * rn * (i - 1);
            windows.push(k);
            let rpath = &r.paths()[j - 1];
            let u = rpath
                .seq
                .iter()
                .find(|vx| mem.cluster.get(*vx) == Some(&k) || mem.linkage.get(*vx) == Some(&k))
                .ok_or_else(|| {
                    OpError::Internal(format!(
                        "back-linkage path {j} never touches cluster or linkage {k}"
                    ))
                })?;
            let piece = if mem.cluster.get(u) == Some(&k) {
                let cl = &w.clusters[k];
                let targets = if k < ell {
                    w.linkages[k].start_set()
                } else {
                    cl.b_set()
                };
                let through = path_through(&cl.graph, &cl.a_set(), u, &targets, budget)?
                    .ok_or_else(|| {
                        OpError::Internal(format!(
                            "cluster {k} admits no path from its entry through {u} to its exit"
                        ))
                    })?;
                if k < ell {
                    let end = through.end().expect("nonempty").clone();
                    let lp = w.linkages[k]
                        .path_starting_at(&end)
                        .expect("the targets are linkage starts");
                    through
                        .concat(lp)
                        .map_err(|e| OpError::Internal(e.to_string()))?
                } else {
                    through
                }
            } else {
                let lp = w.linkages[k]
                    .paths()
                    .iter()
                    .find(|pp| pp.contains(u))
                    .expect("the membership map names this linkage");
                let y0 = lp.start().expect("nonempty");
                let cl = &w.clusters[k];
                let mut leg = None;
                for a in &cl.a_set() {
                    if let Some(found) = bfs_path(&cl.graph, a, y0, &BTreeSet::new()) {
                        leg = Some(found);
                        break;
                    }
                }
                let leg = leg.ok_or_else(|| {
                    OpError::Internal(format!(
                        "cluster {k} admits no path from its entry to the linkage start {y0}"
                    ))
                })?;
                leg.concat(lp).map_err(|e| OpError::Internal(e.to_string()))?
            };
            if piece.seq.iter().any(|vx| used.contains(vx)) {
                return Err(OpError::Internal(
                    "a stitched piece collides with an earlier vertical path".into(),
                ));
            }
            used.extend(piece.seq.iter().cloned());
            pieces.push(piece);
        }
        let mut walk = pieces[0].clone();
        for j in 1..rn {
            let z = pieces[j - 1].end().expect("nonempty").clone();
            let y = pieces[j].start().expect("nonempty").clone();
            let k = windows[j - 1];
            let mut fmap = BTreeMap::new();
            fmap.insert(z.clone(), k);
            fmap.insert(y.clone(), k + 2);
            let xset: BTreeSet<Vertex> = [z.clone()].into_iter().collect();
            let yset: BTreeSet<Vertex> = [y.clone()].into_iter().collect();
            let direct = match find_linkage_in_pows(w, &xset, &yset, &fmap, RoutingCase::L4) {
                Ok(l) => {
                    let path = l.into_paths().remove(0);
                    if path
                        .seq
                        .iter()
                        .any(|vx| *vx != z && *vx != y && used.contains(vx))
                    {
                        None
                    } else {
                        Some(path)
                    }
                }
                Err(_) => None,
            };
            let conn = match direct {
                Some(path) => path,
                None => {
                    let mut forbidden = used.clone();
                    forbidden.remove(&z);
                    forbidden.remove(&y);
                    bfs_path(&slice_digraph(w, k, k + 2), &z, &y, &forbidden).ok_or_else(|| {
                        OpError::Internal(format!(
                            "no connector from {z} to {y} avoids the paths built so far"
                        ))
                    })?
                }
            };
            used.extend(conn.seq.iter().cloned());
            walk = walk
                .concat(&conn)
                .and_then(|wk| wk.concat(&pieces[j]))
                .map_err(|e| OpError::Internal(e.to_string()))?;
        }
        if !walk.is_path() {
            return Err(OpError::Internal("a stitched vertical walk revisits a vertex".into()));
        }
        v_walks_rev.push(walk);
    }
    v_walks_rev.reverse();
    let vsets: Vec<BTreeSet<Vertex>> = v_walks_rev.iter().map(|wk| wk.vertex_set()).collect();
    let mut h_cuts = Vec::new();
    for rpath in r.paths() {
        let mut cuts = Vec::new();
        let mut prev_last: Option<usize> = None;
        for (s, vset) in vsets.iter().enumerate() {
            let hits: Vec<usize> = rpath
                .seq
                .iter()
                .enumerate()
                .filter(|(_, vx)| vset.contains(*vx))
                .map(|(i, _)| i)
                .collect();
            let first = *hits.first().ok_or_else(|| {
                OpError::Internal("a back-linkage path misses a vertical path".into())
            })?;
            let lastp = *hits.last().expect("nonempty");
            if let Some(pl) = prev_last {
                if first <= pl {
                    return Err(OpError::Internal(
                        "the back-linkage does not traverse the vertical paths in order".into(),
                    ));
                }
            }
            prev_last = Some(lastp);
            if s + 1 < vsets.len() {
                cuts.push(lastp);
            }
        }
        h_cuts.push(cuts);
    }
    let web = WebWitness {
        h: r.clone(),
        v: Linkage::new(v_walks_rev).map_err(|e| OpError::Internal(e.to_string()))?,
        kind: WebKind::Ordered,
        h_cuts,
        v_cuts: vec![],
    };
    let rep = verify_web(&web)?;
    if !rep.is_ok() {
        return Err(OpError::Internal(format!(
            "the stitched web fails verification: {:?}",
            rep.violations
        )));
    }
    Ok(web)
}

/// Extracts a horizontally minimal linkage from a verified three-zone
/// semi-web: a maximum linkage from the horizontal starts to the horizontal
/// ends inside the whole web, minimalized against the vertical digraph and
/// split at the last visit to the middle horizontal zone. The weak
/// minimality of the result, the confinement of the tail interiors away
/// from the lower vertical zones, and the endpoint sets are all re-checked.
pub fn horizontally_minimal_linkage(w: &WebWitness) -> Result<SplitLinkage, OpError> {
    if w.kind != (WebKind::HorizontalSemi { c: 3 }) {
        return Err(OpError::pre("the extraction expects a three-zone semi-web"));
    }
    let rep = verify_web(w)?;
    if !rep.is_ok() {
        return Err(OpError::pre(format!(
            "the semi-web does not verify: {:?}",
            rep.violations
        )));
    }
    let ambient = w.to_digraph();
    let starts = w.h.start_set();
    let ends = w.h.end_set();
    let (p0, _) = menger(&ambient, &starts, &ends);
    if p0.order() != w.h.order() {
        return Err(OpError::Internal(format!(
            "the web admits only {} of {} horizontal connections",
            p0.order(),
            w.h.order()
        )));
    }
    let vdig = w.v.to_digraph();
    let p = minimalize(&vdig, &p0);
    if p.start_set() != starts || p.end_set() != ends {
        return Err(OpError::Internal(
            "minimalization moved the endpoints of the linkage".into(),
        ));
    }
    let mut zone2: BTreeSet<Vertex> = BTreeSet::new();
    for (i, hp) in w.h.paths().iter().enumerate() {
        let segs = arc_segments(hp, &w.h_cuts[i]).expect("the witness verified");
        zone2.extend(segs[1].vertex_set());
    }
    let mut splits = Vec::new();
    for (t, path) in p.paths().iter().enumerate() {
        let pos = path
            .seq
            .iter()
            .rposition(|vx| zone2.contains(vx))
            .ok_or_else(|| {
                OpError::Internal(format!("path {} avoids the middle horizontal zone", t + 1))
            })?;
        splits.push(pos);
    }
    if let Err(viol) = is_weakly_minimal(&p, &vdig, w.h.order()) {
        return Err(OpError::Internal(format!(
            "the minimalized linkage is not weakly minimal: path {} keeps order {} without arc {:?}",
            viol.path_index + 1,
            viol.linkage_order_found,
            viol.arc
        )));
    }
    let mut lower = Digraph::new();
    for (j, vp) in w.v.paths().iter().enumerate() {
        let segs = arc_segments(vp, &w.v_cuts[j]).expect("the witness verified");
        lower = lower.union(&segs[1].to_digraph()).union(&segs[2].to_digraph());
    }
    let tails: Vec<Walk> = p
        .paths()
        .iter()
        .zip(&splits)
        .map(|(path, &sp)| path.slice(sp, path.len()))
        .collect();
    let tail_linkage = Linkage::new(tails).expect("tails of a linkage stay disjoint");
    if !tail_linkage.is_internally_disjoint_from(&lower) {
        return Err(OpError::Internal(
            "a tail interior touches the lower vertical zones".into(),
        ));
    }
    Ok(SplitLinkage {
        linkage: p,
        splits,
    })
}

fn binom(n: usize, k: usize) -> BigUint {
    if k > n {
        BigUint::zero()
    } else {
        num_integer::binomial(BigUint::from(n), BigUint::from(k))
    }
}

/// Entry requirement on the vertical order of the semi-web case analysis:
/// `(v2-1) * 2 * C(h, h2) + (v1-1) * C(h, h1) - 1`, clamped at zero.
pub fn semiweb_entry_v_bound(h: usize, h1: usize, v1: usize, h2: usize, v2: usize) -> BigUint {
    let total = BigUint::from(v2 - 1) * 2u32 * binom(h, h2) + BigUint::from(v1 - 1) * binom(h, h1);
    if total.is_zero() {
        total
    } else {
        total - 1u32
    }
}

/// Case analysis over a three-zone semi-web: classifies every vertical path
/// by which heads and tails of the horizontally minimal linkage it meets
/// internally, and pigeonholes either a two-zone horizontal web (paths met
/// by many verticals in both halves) or a pair of linkages with the
/// horizontal side internally disjoint from the vertical side, anchored at
/// the start or the end of the horizontal linkage.
pub fn semiweb_cases(
    w: &WebWitness,
    h1: usize,
    v1: usize,
    h2: usize,
    v2: usize,
) -> Result<SemiwebOutcome, OpError> {
    if h1 == 0 || v1 == 0 || h2 == 0 || v2 == 0 {
        return Err(OpError::pre("the case targets must be positive"));
    }
    let h = w.h.order();
    if h < 2 * (h2 - 1) + h1 {
        return Err(OpError::pre(format!(
            "{h} horizontal paths are too few, the analysis needs {}",
            2 * (h2 - 1) + h1
        )));
    }
    if BigUint::from(w.v.order()) < semiweb_entry_v_bound(h, h1, v1, h2, v2) {
        return Err(OpError::pre(format!(
            "{} vertical paths are too few, the analysis enters at {}",
            w.v.order(),
            semiweb_entry_v_bound(h, h1, v1, h2, v2)
        )));
    }
    let split = horizontally_minimal_linkage(w)?;
    let p = &split.linkage;
    let interiors: Vec<(BTreeSet<Vertex>, BTreeSet<Vertex>)> = p
        .paths()
        .iter()
        .zip(&split.splits)
        .map(|(path, &sp)| {
            let head: BTreeSet<Vertex> = path.seq[1..sp].iter().cloned().collect();
            let tail: BTreeSet<Vertex> = path.seq[sp + 1..path.len()].iter().cloned().collect();
            (head, tail)
        })
        .collect();
    let mut x_sets: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
    for vp in w.v.paths() {
        let vset = vp.vertex_set();
        let x1: BTreeSet<usize> = (0..h)
            .filter(|&t| interiors[t].0.intersection(&vset).next().is_some())
            .collect();
        let x2: BTreeSet<usize> = (0..h)
            .filter(|&t| interiors[t].1.intersection(&vset).next().is_some())
            .collect();
        x_sets.push((x1, x2));
    }
    let m_set: Vec<usize> = (0..w.v.order())
        .filter(|&j| h - x_sets[j].0.len() >= h2 || h - x_sets[j].1.len() >= h2)
        .collect();
    let m_cap = BigUint::from(v2 - 1) * 2u32 * binom(h, h2);
    if BigUint::from(m_set.len()) <= m_cap {
        let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for j in 0..w.v.order() {
            if m_set.contains(&j) {
                continue;
            }
            let both: Vec<usize> = x_sets[j]
                .0
                .intersection(&x_sets[j].1)
                .copied()
                .collect();
            if both.len() < h1 {
                return Err(OpError::Internal(format!(
                    "vertical path {} meets only {} paths in both halves, {h1} are promised",
                    j + 1,
                    both.len()
                )));
            }
            classes.entry(both[..h1].to_vec()).or_default().push(j);
        }
        let (subset, voters) = classes
            .into_iter()
            .find(|(_, voters)| voters.len() >= v1)
            .ok_or_else(|| {
                OpError::Internal("no head subset gathered enough vertical paths".into())
            })?;
        let h_walks: Vec<Walk> = subset.iter().map(|&t| p.paths()[t].clone()).collect();
        let h_cuts: Vec<Vec<usize>> = subset.iter().map(|&t| vec![split.splits[t]]).collect();
        let v_walks: Vec<Walk> = voters.iter().map(|&j| w.v.paths()[j].clone()).collect();
        let v_cuts: Vec<Vec<usize>> = voters.iter().map(|&j| vec![w.v_cuts[j][0]]).collect();
        let web = WebWitness {
            h: Linkage::new(h_walks).expect("paths of a linkage stay disjoint"),
            v: Linkage::new(v_walks).expect("paths of a linkage stay disjoint"),
            kind: WebKind::Horizontal { c: 2 },
            h_cuts,
            v_cuts,
        };
        let rep = verify_web(&web)?;
        if !rep.is_ok() {
            return Err(OpError::Internal(format!(
                "the dense-case web fails verification: {:?}",
                rep.violations
            )));
        }
        if let Err(viol) = is_weakly_minimal(&web.h, &web.v.to_digraph(), 2) {
            return Err(OpError::Internal(format!(
                "the dense-case web is not weakly 2-minimal: path {} keeps order {} without arc {:?}",
                viol.path_index + 1,
                viol.linkage_order_found,
                viol.arc
            )));
        }
        Ok(SemiwebOutcome::Web(web))
    } else {
        let mut classes: BTreeMap<(usize, Vec<usize>), Vec<usize>> = BTreeMap::new();
        for &j in &m_set {
            let (side, avoided) = if h - x_sets[j].0.len() >= h2 {
                (1usize, &x_sets[j].0)
            } else {
                (2usize, &x_sets[j].1)
            };
            let missing: Vec<usize> = (0..h).filter(|t| !avoided.contains(t)).collect();
            classes
                .entry((side, missing[..h2].to_vec()))
                .or_default()
                .push(j);
        }
        let ((side, subset), voters) = classes
            .into_iter()
            .find(|(_, voters)| voters.len() >= v2)
            .ok_or_else(|| {
                OpError::Internal("no avoided subset gathered enough vertical paths".into())
            })?;
        let voters: Vec<usize> = voters.into_iter().take(v2).collect();
        let pieces: Vec<Walk> = subset
            .iter()
            .map(|&t| {
                let path = &p.paths()[t];
                if side == 1 {
                    path.slice(0, split.splits[t])
                } else {
                    path.slice(split.splits[t], path.len())
                }
            })
            .collect();
        let h_link = Linkage::new(pieces).expect("pieces of a linkage stay disjoint");
        let v_walks: Vec<Walk> = voters.iter().map(|&j| w.v.paths()[j].clone()).collect();
        let v_link = Linkage::new(v_walks).expect("paths of a linkage stay disjoint");
        if !h_link.is_internally_disjoint_from(&v_link.to_digraph()) {
            return Err(OpError::Internal(
                "a sparse-case piece interior touches a chosen vertical path".into(),
            ));
        }
        Ok(SemiwebOutcome::DisjointPair {
            h: h_link,
            v: v_link,
            side: if side == 1 { AnchorSide::Start } else { AnchorSide::End },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gen_grid;
    use crate::wells::gen_wells;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn linkage(paths: Vec<Walk>) -> Linkage {
        Linkage::new(paths).expect("test paths are disjoint")
    }

    fn verify_ok(w: &WebWitness) {
        let rep = verify_web(w).expect("verification runs");
        assert!(rep.is_ok(), "unexpected violations: {:?}", rep.violations);
    }

    fn clauses(w: &WebWitness) -> Vec<String> {
        verify_web(w)
            .expect("verification runs")
            .violations
            .into_iter()
            .map(|v| v.clause)
            .collect()
    }

    fn plain_crossing_web() -> WebWitness {
        let h = linkage(vec![Walk::of(&["g11", "g12"]), Walk::of(&["g21", "g22"])]);
        let v = linkage(vec![Walk::of(&["g11", "g21"]), Walk::of(&["g12", "g22"])]);
        WebWitness {
            h,
            v,
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        }
    }

    #[test]
    fn plain_web_crossing_holds_and_detached_path_reports() {
        verify_ok(&plain_crossing_web());
        let mut bad = plain_crossing_web();
        bad.v = linkage(vec![Walk::of(&["g11", "g21"]), Walk::of(&["w1", "g22"])]);
        let rep = verify_web(&bad).expect("verification runs");
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].clause, "web.crossing");
        assert_eq!(rep.violations[0].indices, vec![1, 2]);
    }

    fn figure_web() -> WebWitness {
        let mut hs = Vec::new();
        for i in 1..=4 {
            hs.push(Walk::new(vec![
                format!("s{i}"),
                format!("c1_{i}"),
                format!("u{i}"),
                format!("c2_{i}"),
                format!("w{i}"),
                format!("c3_{i}"),
                format!("t{i}"),
            ]));
        }
        let mut vseq = Vec::new();
        for i in 1..=4 {
            vseq.push(format!("c3_{i}"));
        }
        for i in 1..=4 {
            vseq.push(format!("c2_{i}"));
        }
        for i in 1..=4 {
            vseq.push(format!("c1_{i}"));
        }
        WebWitness {
            h: linkage(hs),
            v: linkage(vec![Walk::new(vseq)]),
            kind: WebKind::Horizontal { c: 3 },
            h_cuts: vec![vec![1, 4]; 4],
            v_cuts: vec![vec![3, 7]],
        }
    }

    #[test]
    fn three_zone_figure_web_verifies() {
        verify_ok(&figure_web());
    }

    #[test]
    fn horizontal_zone_violations_report() {
        let mut bad = figure_web();
        bad.v_cuts = vec![vec![2, 7]];
        let cl = clauses(&bad);
        assert!(cl.contains(&"web.horizontal_containment".to_string()));
        assert!(cl.contains(&"web.horizontal_hit".to_string()));
    }

    #[test]
    fn malformed_decompositions_error() {
        let mut bad = figure_web();
        bad.h_cuts = vec![vec![1]; 4];
        assert!(verify_web(&bad).is_err());
        let mut bad = figure_web();
        bad.v_cuts = vec![vec![7, 3]];
        assert!(verify_web(&bad).is_err());
        let mut bad = plain_crossing_web();
        bad.h_cuts = vec![vec![0], vec![0]];
        assert!(verify_web(&bad).is_err());
    }

    fn ordered_hand_web() -> WebWitness {
        let h = linkage(vec![Walk::of(&["u1", "u2", "w1", "w2"])]);
        let v = linkage(vec![Walk::of(&["u2", "q1"]), Walk::of(&["w2", "q2"])]);
        WebWitness {
            h,
            v,
            kind: WebKind::Ordered,
            h_cuts: vec![vec![1]],
            v_cuts: vec![],
        }
    }

    #[test]
    fn ordered_web_verifies_and_swapped_order_reports() {
        verify_ok(&ordered_hand_web());
        let mut bad = ordered_hand_web();
        bad.v = linkage(vec![Walk::of(&["w2", "q2"]), Walk::of(&["u2", "q1"])]);
        let cl = clauses(&bad);
        assert!(cl.contains(&"web.ordered_hit".to_string()));
        assert!(cl.contains(&"web.ordered_miss".to_string()));
    }

    #[test]
    fn semi_containment_violation_reports() {
        let mut bad = figure_web();
        bad.kind = WebKind::HorizontalSemi { c: 3 };
        verify_ok(&bad);
        let mut vseq = vec!["u1".to_string()];
        for i in 1..=4 {
            vseq.push(format!("c3_{i}"));
        }
        for i in 1..=4 {
            vseq.push(format!("c2_{i}"));
        }
        for i in 1..=4 {
            vseq.push(format!("c1_{i}"));
        }
        bad.v = linkage(vec![Walk::new(vseq)]);
        bad.v_cuts = vec![vec![4, 8]];
        let cl = clauses(&bad);
        assert_eq!(cl, vec!["web.semi_containment".to_string()]);
    }

    #[test]
    fn inference_recovers_ordered_and_folded_cuts() {
        let w = ordered_hand_web();
        let inferred = infer_decompositions(&w.h, &w.v, WebKind::Ordered).expect("inferable");
        assert_eq!(inferred.h_cuts, vec![vec![1]]);
        let shuffled = linkage(vec![Walk::of(&["w2", "q2"]), Walk::of(&["u2", "q1"])]);
        let inferred = infer_decompositions(&w.h, &shuffled, WebKind::Ordered).expect("inferable");
        assert_eq!(inferred.v.paths()[0].start().unwrap(), "u2");
        assert!(infer_decompositions(&w.h, &w.v, WebKind::Horizontal { c: 2 }).is_none());
    }

    #[test]
    fn dot_export_layers_both_families() {
        let dot = web_to_dot(&plain_crossing_web());
        assert!(dot.starts_with("digraph web {"));
        assert!(dot.contains("rank=same"));
        assert!(dot.contains("style=dashed"));
    }

    fn split_gadget() -> (SplitWitness, Linkage, Linkage) {
        let p = linkage(vec![Walk::of(&["a", "b", "c", "d"])]);
        let q = linkage(vec![
            Walk::of(&["c", "e1", "e2", "b"]),
            Walk::of(&["d", "f1", "f2", "a"]),
        ]);
        let sw = SplitWitness {
            path: 0,
            cuts: vec![1],
            members: vec![0, 1],
            divisions: vec![vec![0], vec![0]],
            well_linked: false,
        };
        (sw, p, q)
    }

    #[test]
    fn hand_split_verifies() {
        let (sw, p, q) = split_gadget();
        let rep = verify_split_or_segmentation(&SplitOrSegmentation::Split(sw), &p, &q, &q, 4)
            .expect("verification runs");
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn degenerate_one_piece_split_verifies() {
        let p = linkage(vec![Walk::of(&["a", "b", "c"])]);
        let q = linkage(vec![Walk::of(&["b", "k1"])]);
        let sw = SplitWitness {
            path: 0,
            cuts: vec![],
            members: vec![0],
            divisions: vec![vec![]],
            well_linked: false,
        };
        let rep = verify_split_or_segmentation(&SplitOrSegmentation::Split(sw), &p, &q, &q, 4)
            .expect("verification runs");
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn split_cut_inside_reference_linkage_reports() {
        let (sw, p, _) = split_gadget();
        let q = linkage(vec![
            Walk::of(&["x", "b", "c", "y"]),
            Walk::of(&["d", "f1", "f2", "a"]),
        ]);
        let rep = verify_split_or_segmentation(&SplitOrSegmentation::Split(sw), &p, &q, &q, 4)
            .expect("verification runs");
        let cl: Vec<&str> = rep.violations.iter().map(|v| v.clause.as_str()).collect();
        assert!(cl.contains(&"split.cut_arc_free"));
    }

    #[test]
    fn hand_segmentation_verifies_and_swapped_order_reports() {
        let p = linkage(vec![Walk::of(&["p0", "p1", "p2", "p3", "p4", "p5"])]);
        let q = linkage(vec![
            Walk::of(&["a1", "p1", "b1"]),
            Walk::of(&["a2", "p3", "b2"]),
        ]);
        let sg = SegmentationWitness {
            pieces: vec![SegPiece {
                path: 0,
                from: 0,
                to: 5,
                cuts: vec![2],
                order: vec![0, 1],
            }],
            members: vec![0, 1],
            ordered: true,
            well_linked: false,
        };
        let rep = verify_split_or_segmentation(
            &SplitOrSegmentation::Segmentation(sg.clone()),
            &p,
            &q,
            &q,
            4,
        )
        .expect("verification runs");
        assert!(rep.is_ok(), "{:?}", rep.violations);
        let mut bad = sg;
        bad.pieces[0].order = vec![1, 0];
        let rep =
            verify_split_or_segmentation(&SplitOrSegmentation::Segmentation(bad), &p, &q, &q, 4)
                .expect("verification runs");
        let cl: Vec<&str> = rep.violations.iter().map(|v| v.clause.as_str()).collect();
        assert!(cl.contains(&"segmentation.containment"));
    }

    fn windowed_instance(count: usize) -> (Digraph, Linkage, Walk) {
        let p = Walk::new((0..=count + 1).map(|i| format!("p{i}")).collect());
        let qs: Vec<Walk> = (1..=count)
            .map(|j| Walk::new(vec![format!("a{j}"), format!("p{j}"), format!("b{j}")]))
            .collect();
        let q = linkage(qs);
        let h = p.to_digraph().union(&q.to_digraph());
        (h, q, p)
    }

    #[test]
    fn oracle_finds_windowed_segmentation() {
        let (h, q, p) = windowed_instance(4);
        let out = segmentation_or_split_oracle(&h, &q, &q, &p, 1, 2, 1, &Budget::default())
            .expect("the search succeeds");
        match out {
            SplitOrSegmentation::Segmentation(sg) => {
                assert_eq!(sg.pieces[0].cuts, vec![1]);
                assert_eq!(sg.members, vec![0, 1]);
            }
            SplitOrSegmentation::Split(_) => panic!("expected a segmentation"),
        }
    }

    fn crossing_instance(count: usize) -> (Digraph, Linkage, Walk) {
        let p = Walk::new((0..2 * count).map(|i| format!("p{i}")).collect());
        let qs: Vec<Walk> = (0..count)
            .map(|j| {
                Walk::new(vec![
                    format!("p{}", count + j),
                    format!("x{j}"),
                    format!("p{}", count - 1 - j),
                ])
            })
            .collect();
        let q = linkage(qs);
        let h = p.to_digraph().union(&q.to_digraph());
        (h, q, p)
    }

    #[test]
    fn oracle_finds_crossing_split() {
        let (h, q, p) = crossing_instance(6);
        let out = segmentation_or_split_oracle(&h, &q, &q, &p, 1, 2, 2, &Budget::default())
            .expect("the search succeeds");
        match out {
            SplitOrSegmentation::Split(sw) => {
                assert_eq!(sw.cuts, vec![1]);
                assert_eq!(sw.members, vec![4, 5]);
                assert_eq!(sw.divisions, vec![vec![0], vec![0]]);
            }
            SplitOrSegmentation::Segmentation(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn oracle_preconditions_and_budget() {
        let (h, q, p) = crossing_instance(5);
        assert!(matches!(
            segmentation_or_split_oracle(&h, &q, &q, &p, 1, 2, 2, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
        let (h, q, p) = windowed_instance(4);
        let mut shortcut = h.clone();
        shortcut.add_arc("p0", "p5").expect("fresh arc");
        assert!(matches!(
            segmentation_or_split_oracle(&shortcut, &q, &q, &p, 1, 2, 1, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
        assert!(matches!(
            segmentation_or_split_oracle(&h, &q, &q, &p, 1, 2, 1, &Budget::new(1)),
            Err(OpError::BudgetExhausted { .. })
        ));
    }

    fn windowed_web(count: usize) -> WebWitness {
        let p = Walk::new((0..=count).map(|i| format!("p{i}")).collect());
        let qs: Vec<Walk> = (0..count)
            .map(|j| Walk::new(vec![format!("a{j}"), format!("p{j}"), format!("b{j}")]))
            .collect();
        WebWitness {
            h: linkage(vec![p]),
            v: linkage(qs),
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        }
    }

    #[test]
    fn single_targets_return_first_path_as_segmentation() {
        let w = windowed_web(4);
        let out = web_to_split_or_segmentation(&w, 1, 1, 1, 1, &Budget::default())
            .expect("the iteration succeeds");
        match out {
            SplitOrSegmentation::Segmentation(sg) => {
                assert_eq!(sg.pieces.len(), 1);
                assert_eq!(sg.pieces[0].from, 0);
                assert_eq!(sg.pieces[0].to, w.h.paths()[0].len());
                assert_eq!(sg.members, vec![0]);
            }
            SplitOrSegmentation::Split(_) => panic!("expected a segmentation"),
        }
    }

    #[test]
    fn degenerate_zero_member_web_segments_both_paths_to_the_end() {
        let q1 = Walk::new((0..10).map(|i| format!("w{i}")).collect());
        let h = linkage(vec![q1.slice(1, 4), q1.slice(6, 8)]);
        let v = linkage(vec![q1]);
        let w = WebWitness {
            h,
            v,
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        };
        let out = web_to_split_or_segmentation(&w, 2, 1, 0, 0, &Budget::default())
            .expect("the iteration succeeds");
        match out {
            SplitOrSegmentation::Segmentation(sg) => {
                assert_eq!(sg.pieces.len(), 2);
                assert!(sg.members.is_empty());
                for (pc, hp) in sg.pieces.iter().zip(w.h.paths()) {
                    assert_eq!(pc.to, hp.len());
                }
            }
            SplitOrSegmentation::Split(_) => panic!("expected a segmentation"),
        }
    }

    #[test]
    fn two_piece_windowed_segmentation_spans_both_paths() {
        let pa = Walk::new((0..=7).map(|i| format!("a{i}")).collect());
        let pb = Walk::new((0..=7).map(|i| format!("b{i}")).collect());
        let qs: Vec<Walk> = (1..=6)
            .map(|j| {
                Walk::new(vec![
                    format!("m{j}0"),
                    format!("a{j}"),
                    format!("m{j}1"),
                    format!("b{j}"),
                    format!("m{j}2"),
                ])
            })
            .collect();
        let w = WebWitness {
            h: linkage(vec![pa, pb]),
            v: linkage(qs),
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        };
        let out = web_to_split_or_segmentation(&w, 2, 1, 1, 1, &Budget::default())
            .expect("the iteration succeeds");
        match out {
            SplitOrSegmentation::Segmentation(sg) => {
                assert_eq!(sg.pieces.len(), 2);
                assert_eq!(sg.members, vec![0]);
                assert!(sg.ordered);
                let ends: Vec<usize> = sg.pieces.iter().map(|pc| pc.to).collect();
                assert_eq!(ends, vec![7, 7]);
            }
            SplitOrSegmentation::Split(_) => panic!("expected a segmentation"),
        }
    }

    #[test]
    fn crossing_web_splits_and_trims() {
        let (_, q, p) = crossing_instance(6);
        let w = WebWitness {
            h: linkage(vec![p]),
            v: q,
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        };
        let out = web_to_split_or_segmentation(&w, 1, 2, 1, 1, &Budget::default())
            .expect("the iteration succeeds");
        match out {
            SplitOrSegmentation::Split(sw) => {
                assert_eq!(sw.cuts, vec![1]);
                assert_eq!(sw.members, vec![4]);
                assert_eq!(sw.divisions, vec![vec![0]]);
            }
            SplitOrSegmentation::Segmentation(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn vertical_order_below_schedule_errors() {
        let w = windowed_web(4);
        assert!(matches!(
            web_to_split_or_segmentation(&w, 1, 1, 2, 1, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
    }

    #[test]
    fn one_fold_produces_single_vertical_path() {
        let (sw, p, q) = split_gadget();
        let web = split_to_folded(&sw, &p, &q, &q, 4).expect("folding succeeds");
        assert_eq!(web.kind, WebKind::Folded { ordered: true });
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 1);
        assert_eq!(web.v.paths()[0], p.paths()[0]);
        assert_eq!(web.v_cuts, vec![vec![1]]);
    }

    #[test]
    fn four_piece_split_folds_into_two_by_two_web() {
        let p = linkage(vec![Walk::of(&["a", "b", "c", "d", "e", "f", "g", "h"])]);
        let q = linkage(vec![
            Walk::of(&["g", "x1", "e", "y1", "c", "z1", "a"]),
            Walk::of(&["h", "x2", "f", "y2", "d", "z2", "b"]),
        ]);
        let sw = SplitWitness {
            path: 0,
            cuts: vec![1, 3, 5],
            members: vec![0, 1],
            divisions: vec![vec![1, 3, 5], vec![1, 3, 5]],
            well_linked: false,
        };
        let web = split_to_folded(&sw, &p, &q, &q, 4).expect("folding succeeds");
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 2);
        assert_eq!(web.v.paths()[0], Walk::of(&["e", "f", "g", "h"]));
        assert_eq!(web.v.paths()[1], Walk::of(&["a", "b", "c", "d"]));
        assert_eq!(web.h_cuts, vec![vec![3], vec![3]]);
        verify_ok(&web);
    }

    #[test]
    fn odd_piece_count_refuses_to_fold() {
        let p = linkage(vec![Walk::of(&["a", "b", "c", "d", "e", "f"])]);
        let q = linkage(vec![Walk::of(&["e", "m1", "c", "m2", "a"])]);
        let sw = SplitWitness {
            path: 0,
            cuts: vec![1, 3],
            members: vec![0],
            divisions: vec![vec![1, 3]],
            well_linked: false,
        };
        assert!(matches!(
            split_to_folded(&sw, &p, &q, &q, 4),
            Err(OpError::Precondition(_))
        ));
    }

    #[test]
    fn monotone_extraction_matches_brute_force() {
        let seq = [2, 4, 1, 5, 3];
        let ex = es_extract(&seq, 3, 3);
        assert_eq!(ex.increasing, vec![2, 4, 5]);
        assert_eq!(
            ex.qualifying,
            Some((vec![2, 4, 5], MonotoneDirection::Increasing))
        );
        let mut best = 0;
        for mask in 0u32..32 {
            let sub: Vec<i64> = (0..5).filter(|i| mask & (1 << i) != 0).map(|i| seq[i]).collect();
            if sub.windows(2).all(|w| w[0] < w[1]) {
                best = best.max(sub.len());
            }
        }
        assert_eq!(ex.increasing.len(), best);
    }

    #[test]
    fn length_five_always_qualifies_at_three() {
        let values = [1i64, 2, 3, 4, 5];
        let mut perm = values;
        let mut found_all = true;
        permute(&mut perm, 0, &mut found_all);
        assert!(found_all);
        let ex = es_extract(&[2, 1, 4, 3], 3, 3);
        assert!(ex.qualifying.is_none());
        let ex = es_extract(&[1, 2, 3], 3, 3);
        assert_eq!(ex.increasing, vec![1, 2, 3]);
    }

    fn permute(values: &mut [i64; 5], k: usize, ok: &mut bool) {
        if k == 5 {
            let ex = es_extract(values.as_slice(), 3, 3);
            if ex.qualifying.is_none() {
                *ok = false;
            }
            return;
        }
        for i in k..5 {
            values.swap(k, i);
            permute(values, k + 1, ok);
            values.swap(k, i);
        }
    }

    #[test]
    fn schedule_stays_under_closed_form() {
        for q in 1..=2usize {
            for c in 0..=2usize {
                for steps in 0..=12usize {
                    let sched = q_schedule(q, c, steps);
                    for (i, got) in sched.iter().enumerate() {
                        let bound = segmentation_split_entry_bound(q, c, steps - i)
                            .expect("small exponents");
                        assert!(
                            got <= &bound,
                            "q={q} c={c} steps={steps} i={i}: {got} > {bound}"
                        );
                    }
                }
            }
        }
    }

    fn three_piece_segmentation(reversed_third: bool) -> (SegmentationWitness, Linkage, Linkage) {
        let mk = |name: &str| -> Walk { Walk::new((0..=5).map(|i| format!("{name}{i}")).collect()) };
        let pa = mk("a");
        let pb = mk("b");
        let pc = mk("c");
        let (c_first, c_second) = if reversed_third { (3, 1) } else { (1, 3) };
        let q1 = Walk::new(vec![
            "m0".into(),
            "a1".into(),
            "m1".into(),
            "b1".into(),
            "m2".into(),
            format!("c{c_first}"),
            "m3".into(),
        ]);
        let q2 = Walk::new(vec![
            "n0".into(),
            "a3".into(),
            "n1".into(),
            "b3".into(),
            "n2".into(),
            format!("c{c_second}"),
            "n3".into(),
        ]);
        let p = linkage(vec![pa, pb, pc]);
        let q = linkage(vec![q1, q2]);
        let order_c = if reversed_third { vec![1, 0] } else { vec![0, 1] };
        let sg = SegmentationWitness {
            pieces: vec![
                SegPiece {
                    path: 0,
                    from: 0,
                    to: 5,
                    cuts: vec![2],
                    order: vec![0, 1],
                },
                SegPiece {
                    path: 1,
                    from: 0,
                    to: 5,
                    cuts: vec![2],
                    order: vec![0, 1],
                },
                SegPiece {
                    path: 2,
                    from: 0,
                    to: 5,
                    cuts: vec![2],
                    order: order_c,
                },
            ],
            members: vec![0, 1],
            ordered: !reversed_third,
            well_linked: false,
        };
        (sg, p, q)
    }

    #[test]
    fn segmentation_refines_into_ordered_web_with_shared_order() {
        let (sg, p, q) = three_piece_segmentation(false);
        let web = ordered_web_from_segmentation(&sg, &p, &q, &q, 2, 2, 4)
            .expect("the refinement succeeds");
        assert_eq!(web.kind, WebKind::Ordered);
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 2);
        assert_eq!(web.h_cuts[0], web.h_cuts[1]);
        verify_ok(&web);
    }

    #[test]
    fn reversed_piece_lands_in_the_minority_direction() {
        let (sg, p, q) = three_piece_segmentation(true);
        let web = ordered_web_from_segmentation(&sg, &p, &q, &q, 2, 2, 4)
            .expect("the refinement succeeds");
        assert_eq!(web.h.order(), 2);
        assert_eq!(
            web.h.paths()[0].start().map(String::as_str),
            Some("a0"),
            "the two straight pieces win the pigeonhole"
        );
        verify_ok(&web);
    }

    #[test]
    fn folded_branch_runs_end_to_end() {
        let (_, q, p) = crossing_instance(42);
        let w = WebWitness {
            h: linkage(vec![p]),
            v: q,
            kind: WebKind::Plain,
            h_cuts: vec![],
            v_cuts: vec![],
        };
        let web = web_to_folded_or_ordered(&w, 1, 1, 2, 1, 1, &Budget::default())
            .expect("the flow succeeds");
        assert_eq!(web.kind, WebKind::Folded { ordered: true });
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 1);
    }

    #[test]
    fn ordered_branch_runs_end_to_end() {
        let w = windowed_web(42);
        let web = web_to_folded_or_ordered(&w, 1, 1, 2, 1, 1, &Budget::default())
            .expect("the flow succeeds");
        assert_eq!(web.kind, WebKind::Ordered);
        assert_eq!(web.h.order(), 1);
        assert_eq!(web.v.order(), 1);
    }

    #[test]
    fn member_target_below_entry_errors() {
        let w = windowed_web(6);
        assert!(matches!(
            web_to_folded_or_ordered(&w, 1, 1, 1, 1, 1, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
    }

    #[test]
    fn grid_web_verifies_at_both_small_orders() {
        for k in 1..=2usize {
            let g = gen_grid(2 * k).expect("the grid generates");
            let web = grid_to_2hweb(&g).expect("the construction succeeds");
            assert_eq!(web.h.order(), k);
            assert_eq!(web.v.order(), k);
            assert_eq!(web.kind, WebKind::Horizontal { c: 2 });
        }
    }

    #[test]
    fn grid_web_horizontal_side_is_weakly_minimal() {
        let g = gen_grid(4).expect("the grid generates");
        let web = grid_to_2hweb(&g).expect("the construction succeeds");
        assert!(is_weakly_minimal(&web.h, &web.v.to_digraph(), 2).is_ok());
    }

    #[test]
    fn grid_web_inner_zones_are_well_linked() {
        let g = gen_grid(4).expect("the grid generates");
        let web = grid_to_2hweb(&g).expect("the construction succeeds");
        let mut d = Digraph::new();
        let mut starts = BTreeSet::new();
        let mut ends = BTreeSet::new();
        for (i, hp) in web.h.paths().iter().enumerate() {
            let segs = arc_segments(hp, &web.h_cuts[i]).expect("verified cuts");
            d = d.union(&segs[1].to_digraph());
            starts.insert(segs[1].start().expect("nonempty").clone());
        }
        for (j, vp) in web.v.paths().iter().enumerate() {
            let segs = arc_segments(vp, &web.v_cuts[j]).expect("verified cuts");
            d = d.union(&segs[0].to_digraph());
            ends.insert(segs[0].end().expect("nonempty").clone());
        }
        let failure = is_well_linked(&d, &starts, &ends, 8).expect("the check runs");
        assert!(failure.is_none(), "separated: {failure:?}");
    }

    #[test]
    fn odd_grid_order_errors() {
        let g = gen_grid(3).expect("the grid generates");
        assert!(matches!(grid_to_2hweb(&g), Err(OpError::Precondition(_))));
    }

    fn canonical_backlinkage(w: &WellsWitness) -> Linkage {
        let ell = w.length();
        let width = w.width();
        let paths: Vec<Walk> = (0..width)
            .map(|t| {
                let mut seq = Vec::new();
                for i in (0..=ell).rev() {
                    seq.push(format!("s{i}b{t}"));
                    seq.push(format!("s{i}a{t}"));
                }
                Walk::new(seq)
            })
            .collect();
        linkage(paths)
    }

    #[test]
    fn minimal_instance_stitches_one_vertical_path() {
        let w = gen_wells(2, 2, false).expect("the witness generates");
        let r = canonical_backlinkage(&w);
        let web = ordered_web_from_cbc(&w, &r, 1, &Budget::default()).expect("stitching succeeds");
        assert_eq!(web.kind, WebKind::Ordered);
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 1);
    }

    #[test]
    fn two_windows_stitch_two_disjoint_vertical_paths() {
        let w = gen_wells(2, 6, false).expect("the witness generates");
        let r = canonical_backlinkage(&w);
        let web = ordered_web_from_cbc(&w, &r, 2, &Budget::default()).expect("stitching succeeds");
        assert_eq!(web.h.order(), 2);
        assert_eq!(web.v.order(), 2);
        for cuts in &web.h_cuts {
            assert_eq!(cuts.len(), 1);
        }
    }

    #[test]
    fn short_witness_and_jumping_backlinkage_error() {
        let w = gen_wells(2, 5, false).expect("the witness generates");
        let r = canonical_backlinkage(&w);
        assert!(matches!(
            ordered_web_from_cbc(&w, &r, 2, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
        let w = gen_wells(1, 4, false).expect("the witness generates");
        let jumped = linkage(vec![Walk::new(vec![
            "s4b0".into(),
            "s1a0".into(),
            "s0b0".into(),
            "s0a0".into(),
        ])]);
        assert!(matches!(
            ordered_web_from_cbc(&w, &jumped, 1, &Budget::default()),
            Err(OpError::Precondition(_))
        ));
    }

    #[test]
    fn stitched_webs_verify_across_generated_sizes() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..6 {
            let width = rng.gen_range(1..=3usize);
            let v = rng.gen_range(1..=2usize);
            let span = 2 * (width - 1) + 2 * width * (v - 1);
            let length = span + rng.gen_range(0..=2usize);
            let w = gen_wells(width, length.max(1), false).expect("the witness generates");
            let r = canonical_backlinkage(&w);
            if w.length() < span {
                continue;
            }
            let web =
                ordered_web_from_cbc(&w, &r, v, &Budget::default()).expect("stitching succeeds");
            assert_eq!(web.v.order(), v);
        }
    }

    fn semi_web_detour() -> WebWitness {
        let h1 = Walk::of(&["a1", "b1", "u", "x", "w", "e1", "f1"]);
        let h2 = Walk::of(&["a2", "b2", "u2", "x2", "w2", "e2", "f2"]);
        let v1 = Walk::of(&["v0", "u", "d", "w", "v9"]);
        WebWitness {
            h: linkage(vec![h1, h2]),
            v: linkage(vec![v1]),
            kind: WebKind::HorizontalSemi { c: 3 },
            h_cuts: vec![vec![1, 4], vec![1, 4]],
            v_cuts: vec![vec![0, 3]],
        }
    }

    #[test]
    fn empty_vertical_side_returns_the_horizontal_linkage() {
        let h1 = Walk::of(&["s1", "u1", "m1", "e1"]);
        let h2 = Walk::of(&["s2", "u2", "m2", "e2"]);
        let w = WebWitness {
            h: linkage(vec![h1, h2]),
            v: Linkage::empty(),
            kind: WebKind::HorizontalSemi { c: 3 },
            h_cuts: vec![vec![0, 2], vec![0, 2]],
            v_cuts: vec![],
        };
        let out = horizontally_minimal_linkage(&w).expect("the extraction succeeds");
        let got: BTreeSet<Walk> = out.linkage.paths().iter().cloned().collect();
        let want: BTreeSet<Walk> = w.h.paths().iter().cloned().collect();
        assert_eq!(got, want);
        assert_eq!(out.splits, vec![2, 2]);
    }

    #[test]
    fn detour_reroutes_and_still_splits_at_the_middle_zone() {
        let w = semi_web_detour();
        let out = horizontally_minimal_linkage(&w).expect("the extraction succeeds");
        let rerouted = out
            .linkage
            .paths()
            .iter()
            .find(|p| p.start().map(String::as_str) == Some("a1"))
            .expect("the first path survives");
        assert_eq!(rerouted, &Walk::of(&["a1", "b1", "u", "d", "w", "e1", "f1"]));
        for (path, &sp) in out.linkage.paths().iter().zip(&out.splits) {
            assert!(matches!(path.seq[sp].as_str(), "w" | "w2"));
        }
        assert!(is_weakly_minimal(&out.linkage, &w.v.to_digraph(), 2).is_ok());
    }

    fn dense_semi_web() -> WebWitness {
        let h1 = Walk::of(&["s_1", "g_1", "u_1", "m_1", "y_1", "e_1", "f_1"]);
        let h2 = Walk::of(&["s_2", "g_2", "u_2", "m_2", "y_2", "e_2", "f_2"]);
        let v1 = Walk::of(&["e_1", "e_2", "m_1", "m_2", "p_1"]);
        WebWitness {
            h: linkage(vec![h1, h2]),
            v: linkage(vec![v1]),
            kind: WebKind::HorizontalSemi { c: 3 },
            h_cuts: vec![vec![1, 4], vec![1, 4]],
            v_cuts: vec![vec![1, 3]],
        }
    }

    #[test]
    fn dense_instance_yields_the_two_zone_web() {
        let w = dense_semi_web();
        match semiweb_cases(&w, 2, 1, 1, 1).expect("the analysis succeeds") {
            SemiwebOutcome::Web(web) => {
                assert_eq!(web.kind, WebKind::Horizontal { c: 2 });
                assert_eq!(web.h.order(), 2);
                assert_eq!(web.v.order(), 1);
                assert_eq!(web.h_cuts, vec![vec![4], vec![4]]);
                assert_eq!(web.v_cuts, vec![vec![1]]);
            }
            SemiwebOutcome::DisjointPair { .. } => panic!("expected the dense case"),
        }
    }

    fn sparse_semi_web() -> WebWitness {
        let mut hs = Vec::new();
        for t in 1..=3 {
            hs.push(Walk::new(vec![
                format!("s_{t}"),
                format!("u_{t}"),
                format!("y_{t}"),
                format!("e_{t}"),
                format!("f_{t}"),
            ]));
        }
        let v1 = Walk::of(&["e_1", "e_2", "e_3", "x_1", "x_2"]);
        WebWitness {
            h: linkage(hs),
            v: linkage(vec![v1]),
            kind: WebKind::HorizontalSemi { c: 3 },
            h_cuts: vec![vec![0, 2]; 3],
            v_cuts: vec![vec![2, 3]],
        }
    }

    #[test]
    fn sparse_instance_yields_a_start_anchored_disjoint_pair() {
        let w = sparse_semi_web();
        match semiweb_cases(&w, 1, 1, 2, 1).expect("the analysis succeeds") {
            SemiwebOutcome::DisjointPair { h, v, side } => {
                assert_eq!(side, AnchorSide::Start);
                assert_eq!(h.order(), 2);
                assert_eq!(v.order(), 1);
                assert!(h.start_set().is_subset(&w.h.start_set()));
                for p in h.paths() {
                    assert_eq!(p.len(), 2);
                }
            }
            SemiwebOutcome::Web(_) => panic!("expected the sparse case"),
        }
    }

    #[test]
    fn entry_bound_degenerates_to_zero() {
        assert_eq!(semiweb_entry_v_bound(1, 1, 1, 1, 1), BigUint::zero());
    }

    #[test]
    fn mixed_linkages_reach_full_order_up_to_four() {
        for p in 1..=4usize {
            let mut hs = Vec::new();
            let mut vs = Vec::new();
            for i in 1..=p {
                hs.push(Walk::new((1..=p).map(|j| format!("g{i}v{j}")).collect()));
            }
            for j in 1..=p {
                vs.push(Walk::new((1..=p).map(|i| format!("g{i}v{j}")).collect()));
            }
            let w = WebWitness {
                h: linkage(hs),
                v: linkage(vs),
                kind: WebKind::Plain,
                h_cuts: vec![],
                v_cuts: vec![],
            };
            verify_ok(&w);
            let d = w.to_digraph();
            let (flow, _) = menger(&d, &w.h.start_set(), &w.v.end_set());
            assert_eq!(flow.order(), p);
        }
    }

    #[test]
    fn witnesses_round_trip_through_serde() {
        let g = gen_grid(2).expect("the grid generates");
        let web = grid_to_2hweb(&g).expect("the construction succeeds");
        let json = serde_json::to_string(&web).expect("serializes");
        let back: WebWitness = serde_json::from_str(&json).expect("deserializes");
        assert_eq!(web, back);
        let (sw, ..) = split_gadget();
        let wrapped = SplitOrSegmentation::Split(sw);
        let json = serde_json::to_string(&wrapped).expect("serializes");
        let back: SplitOrSegmentation = serde_json::from_str(&json).expect("deserializes");
        assert_eq!(wrapped, back);
    }

    #[test]
    fn random_windowed_webs_segment_and_verify() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..12 {
            let count = rng.gen_range(6..=8usize);
            let span = rng.gen_range(count..=20usize);
            let mut positions: BTreeSet<usize> = BTreeSet::new();
            while positions.len() < count {
                positions.insert(rng.gen_range(1..=span));
            }
            let pos_a: Vec<usize> = positions.iter().copied().collect();
            let mut positions_b: BTreeSet<usize> = BTreeSet::new();
            while positions_b.len() < count {
                positions_b.insert(rng.gen_range(1..=span));
            }
            let pos_b: Vec<usize> = positions_b.iter().copied().collect();
            let pa = Walk::new((0..=span + 1).map(|i| format!("a{i}")).collect());
            let pb = Walk::new((0..=span + 1).map(|i| format!("b{i}")).collect());
            let qs: Vec<Walk> = (0..count)
                .map(|j| {
                    Walk::new(vec![
                        format!("m{j}0"),
                        format!("a{}", pos_a[j]),
                        format!("m{j}1"),
                        format!("b{}", pos_b[j]),
                        format!("m{j}2"),
                    ])
                })
                .collect();
            let w = WebWitness {
                h: linkage(vec![pa, pb]),
                v: linkage(qs),
                kind: WebKind::Plain,
                h_cuts: vec![],
                v_cuts: vec![],
            };
            let out = web_to_split_or_segmentation(&w, 2, 1, 1, 1, &Budget::default())
                .expect("the iteration succeeds");
            match out {
                SplitOrSegmentation::Segmentation(sg) => {
                    assert_eq!(sg.pieces.len(), 2);
                    for (pc, hp) in sg.pieces.iter().zip(w.h.paths()) {
                        assert_eq!(pc.to, hp.len());
                    }
                }
                SplitOrSegmentation::Split(_) => panic!("windowed webs always segment"),
            }
        }
    }
}
