//! Cylindrical grids, walls, fences and acyclic grids: canonical generators,
//! clause-by-clause witness verifiers, and the constructions between them.
//!
//! Vertex names are coordinates. Grid vertices are `c{i}p{j}` for cycle
//! `i` (1-based) and position `j` (0-based, position `j` hosts path
//! `P_{j+1}`). Wall vertices reuse the grid names, with split vertices
//! suffixed `_in`/`_out`. Fence and acyclic-grid vertices are `r{j}c{i}`
//! for row `j` and column `i` (both 1-based).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::digraph::{Digraph, Vertex, Walk};
use crate::linkage::Linkage;
use crate::minors::{
    find_butterfly_minor_with_cap, verify_minor_model, ArcImage, MinorModel, ModelKind,
};
use crate::report::{Budget, OpError, Report};

/// A cylindrical grid of order `k`: `k` disjoint cycles of length `2k`
/// crossed by `2k` disjoint paths of length `k - 1` that alternate
/// direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWitness {
    pub order: usize,
    pub host: Digraph,
    pub cycles: Vec<Walk>,
    pub paths: Vec<Walk>,
}

/// A cylindrical wall of order `k`: the grid of order `k` with every
/// vertex of in-degree and out-degree two split into an in/out pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallWitness {
    pub order: usize,
    pub host: Digraph,
    pub grid: GridWitness,
    pub splits: BTreeMap<Vertex, (Vertex, Vertex)>,
}

/// A fence: columns `P_1..P_2p` and rows `Q_1..Q_q` where every column
/// crosses every row in a path, columns appear in order along every row,
/// and rows appear in order along every column, forward on odd columns and
/// backward on even ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FenceWitness {
    pub host: Digraph,
    pub columns: Vec<Walk>,
    pub rows: Vec<Walk>,
}

/// An acyclic grid: like a fence, but every column traverses the rows in
/// forward order, and the number of columns is unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcyclicGridWitness {
    pub host: Digraph,
    pub columns: Vec<Walk>,
    pub rows: Vec<Walk>,
}

/// Any structure witness, tagged by kind. This is the on-disk format the
/// command line verifies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StructureWitness {
    Grid(GridWitness),
    Wall(WallWitness),
    Fence(FenceWitness),
    AcyclicGrid(AcyclicGridWitness),
}

fn gp(i: usize, j: usize) -> Vertex {
    format!("c{i}p{j}")
}

fn fp(row: usize, col: usize) -> Vertex {
    format!("r{row}c{col}")
}

/// Generate the cylindrical grid of order `k`.
pub fn gen_grid(k: usize) -> Result<GridWitness, OpError> {
    if k < 1 {
        return Err(OpError::pre("grid order must be at least 1"));
    }
    let mut cycles = Vec::new();
    for i in 1..=k {
        let mut seq: Vec<Vertex> = (0..2 * k).map(|j| gp(i, j)).collect();
        seq.push(gp(i, 0));
        cycles.push(Walk::new(seq));
    }
    let mut paths = Vec::new();
    for j in 0..2 * k {
        let mut seq: Vec<Vertex> = (1..=k).map(|i| gp(i, j)).collect();
        if j % 2 == 1 {
            seq.reverse();
        }
        paths.push(Walk::new(seq));
    }
    let mut host = Digraph::new();
    for w in cycles.iter().chain(paths.iter()) {
        host = host.union(&w.to_digraph());
    }
    Ok(GridWitness {
        order: k,
        host,
        cycles,
        paths,
    })
}

/// Check a grid witness clause by clause.
pub fn verify_grid(w: &GridWitness) -> Report {
    let mut rep = Report::ok();
    let k = w.order;
    if k < 1 {
        rep.add("grid.order_positive", vec![], "order must be at least 1");
        return rep;
    }
    if w.cycles.len() != k {
        rep.add(
            "grid.cycle_count",
            vec![w.cycles.len() as i64],
            format!("expected {k} cycles, found {}", w.cycles.len()),
        );
    }
    if w.paths.len() != 2 * k {
        rep.add(
            "grid.path_count",
            vec![w.paths.len() as i64],
            format!("expected {} paths, found {}", 2 * k, w.paths.len()),
        );
    }

    for (i, c) in w.cycles.iter().enumerate() {
        if !c.is_cycle() || !c.is_walk_in(&w.host) {
            rep.add(
                "grid.cycle_is_cycle",
                vec![i as i64 + 1],
                format!("entry {} is not a cycle of the host", i + 1),
            );
        } else if c.len() != 2 * k {
            rep.add(
                "grid.cycle_length",
                vec![i as i64 + 1],
                format!("cycle {} has length {}, expected {}", i + 1, c.len(), 2 * k),
            );
        }
    }
    for (i, p) in w.paths.iter().enumerate() {
        if !p.is_path() || !p.is_walk_in(&w.host) {
            rep.add(
                "grid.path_is_path",
                vec![i as i64 + 1],
                format!("entry {} is not a path of the host", i + 1),
            );
        } else if p.len() != k - 1 {
            rep.add(
                "grid.path_length",
                vec![i as i64 + 1],
                format!("path {} has length {}, expected {}", i + 1, p.len(), k - 1),
            );
        }
    }

    disjointness(&w.cycles, "grid.cycles_disjoint", &mut rep);
    disjointness(&w.paths, "grid.paths_disjoint", &mut rep);

    for (i, p) in w.paths.iter().enumerate() {
        for (j, c) in w.cycles.iter().enumerate() {
            let shared = p.vertex_set().intersection(&c.vertex_set()).count();
            if shared != 1 {
                rep.add(
                    "grid.path_meets_cycle_once",
                    vec![i as i64 + 1, j as i64 + 1],
                    format!("path {} meets cycle {} in {shared} vertices", i + 1, j + 1),
                );
            }
        }
    }

    if !rep.is_ok() {
        return rep;
    }

    let rim: BTreeSet<Vertex> = w.cycles[0]
        .vertex_set()
        .union(&w.cycles[k - 1].vertex_set())
        .cloned()
        .collect();
    let mut on_cycle: BTreeMap<&Vertex, usize> = BTreeMap::new();
    for (j, c) in w.cycles.iter().enumerate() {
        for v in &c.seq {
            on_cycle.insert(v, j + 1);
        }
    }
    for (i, p) in w.paths.iter().enumerate() {
        let start = p.start().expect("paths are nonempty");
        let end = p.end().expect("paths are nonempty");
        if !rim.contains(start) || !rim.contains(end) {
            rep.add(
                "grid.endpoints_on_rim",
                vec![i as i64 + 1],
                format!("path {} does not begin and end on the outer cycles", i + 1),
            );
            continue;
        }
        let visited: Vec<usize> = p.seq.iter().map(|v| on_cycle[v]).collect();
        let forward: Vec<usize> = (1..=k).collect();
        let expect = if (i + 1) % 2 == 1 {
            forward.clone()
        } else {
            forward.iter().rev().copied().collect()
        };
        if visited != expect {
            rep.add(
                "grid.alternating_direction",
                vec![i as i64 + 1],
                format!("path {} crosses the cycles in order {visited:?}", i + 1),
            );
        }
    }

    for (j, c) in w.cycles.iter().enumerate() {
        let open = &c.seq[..c.seq.len() - 1];
        let mut positions = Vec::new();
        for p in &w.paths {
            let on_p = p.vertex_set();
            let pos = open
                .iter()
                .position(|v| on_p.contains(v))
                .expect("each path meets each cycle");
            positions.push(pos);
        }
        let descents = (0..positions.len())
            .filter(|&t| positions[t] >= positions[(t + 1) % positions.len()])
            .count();
        if descents != 1 {
            rep.add(
                "grid.paths_in_order_on_cycle",
                vec![j as i64 + 1],
                format!("cycle {} meets the paths at positions {positions:?}", j + 1),
            );
        }
    }

    let mut union = Digraph::new();
    for w in w.cycles.iter().chain(w.paths.iter()) {
        union = union.union(&w.to_digraph());
    }
    if union != w.host {
        rep.add(
            "grid.host_matches_union",
            vec![],
            "host differs from the union of the cycles and paths",
        );
    }
    rep
}

fn disjointness(walks: &[Walk], clause: &str, rep: &mut Report) {
    for i in 0..walks.len() {
        for j in i + 1..walks.len() {
            if let Some(x) = walks[i]
                .vertex_set()
                .intersection(&walks[j].vertex_set())
                .next()
            {
                rep.add(
                    clause,
                    vec![i as i64 + 1, j as i64 + 1],
                    format!("entries {} and {} share {x}", i + 1, j + 1),
                );
            }
        }
    }
}

/// Replace each vertex in `splits` by an `in -> out` pair: arcs into the
/// vertex are redirected to its in-copy, arcs out of it leave the out-copy.
pub fn split_vertices(
    d: &Digraph,
    splits: &BTreeMap<Vertex, (Vertex, Vertex)>,
) -> Result<Digraph, OpError> {
    let mut fresh: BTreeSet<&Vertex> = BTreeSet::new();
    for (v, (vin, vout)) in splits {
        if !d.has_vertex(v) {
            return Err(OpError::pre(format!("split vertex {v} is not in the digraph")));
        }
        for name in [vin, vout] {
            if d.has_vertex(name) || !fresh.insert(name) {
                return Err(OpError::pre(format!("split name {name} collides")));
            }
        }
    }
    let in_name = |v: &Vertex| splits.get(v).map(|(vin, _)| vin.clone()).unwrap_or_else(|| v.clone());
    let out_name = |v: &Vertex| splits.get(v).map(|(_, vout)| vout.clone()).unwrap_or_else(|| v.clone());
    let mut out = Digraph::new();
    for v in d.vertices() {
        out.add_vertex(in_name(v));
        out.add_vertex(out_name(v));
    }
    for (u, v) in d.arcs() {
        out.add_arc(out_name(u), in_name(v))?;
    }
    for (vin, vout) in splits.values() {
        out.add_arc(vin.clone(), vout.clone())?;
    }
    Ok(out)
}

/// Generate the cylindrical wall of order `k` directly from coordinates.
/// The host must coincide with splitting the generated grid; that agreement
/// is checked by a test rather than assumed here.
pub fn gen_wall(k: usize) -> Result<WallWitness, OpError> {
    let grid = gen_grid(k)?;
    let interior = |i: usize| k >= 3 && i >= 2 && i <= k - 1;
    let mut splits = BTreeMap::new();
    for i in 2..=k.saturating_sub(1) {
        for j in 0..2 * k {
            let v = gp(i, j);
            splits.insert(v.clone(), (format!("{v}_in"), format!("{v}_out")));
        }
    }

    let vin = |i: usize, j: usize| {
        if interior(i) {
            format!("c{i}p{j}_in")
        } else {
            gp(i, j)
        }
    };
    let vout = |i: usize, j: usize| {
        if interior(i) {
            format!("c{i}p{j}_out")
        } else {
            gp(i, j)
        }
    };

    let mut host = Digraph::new();
    for i in 1..=k {
        for j in 0..2 * k {
            host.add_vertex(vin(i, j));
            host.add_vertex(vout(i, j));
            if interior(i) {
                host.add_arc(vin(i, j), vout(i, j))?;
            }
        }
    }
    for i in 1..=k {
        for j in 0..2 * k {
            host.add_arc(vout(i, j), vin(i, (j + 1) % (2 * k)))?;
        }
    }
    for j in 0..2 * k {
        for i in 1..k {
            if j % 2 == 0 {
                host.add_arc(vout(i, j), vin(i + 1, j))?;
            } else {
                host.add_arc(vout(i + 1, j), vin(i, j))?;
            }
        }
    }
    Ok(WallWitness {
        order: k,
        host,
        grid,
        splits,
    })
}

/// Check a wall witness: the embedded grid, the split domain (exactly the
/// vertices of in- and out-degree two), name hygiene, and that the host is
/// the split of the grid.
pub fn verify_wall(w: &WallWitness) -> Report {
    let mut rep = Report::ok();
    if w.order != w.grid.order {
        rep.add(
            "wall.order",
            vec![w.order as i64, w.grid.order as i64],
            "wall and embedded grid disagree on the order",
        );
    }
    rep.absorb("wall", verify_grid(&w.grid));
    if !rep.is_ok() {
        return rep;
    }

    let expected: BTreeSet<&Vertex> = w
        .grid
        .host
        .vertices()
        .filter(|v| w.grid.host.in_degree(v) == 2 && w.grid.host.out_degree(v) == 2)
        .collect();
    let given: BTreeSet<&Vertex> = w.splits.keys().collect();
    if expected != given {
        rep.add(
            "wall.split_domain",
            vec![],
            format!(
                "split domain has {} vertices, the grid has {} of in- and out-degree two",
                given.len(),
                expected.len()
            ),
        );
    }

    match split_vertices(&w.grid.host, &w.splits) {
        Err(e) => rep.add("wall.split_names", vec![], e.to_string()),
        Ok(split) => {
            if split != w.host {
                rep.add(
                    "wall.host_matches_split",
                    vec![],
                    "host differs from the split of the embedded grid",
                );
            }
        }
    }
    rep
}

/// Generate the fence with `2p` columns and `q` rows on the canonical
/// `r{row}c{col}` vertices: rows run left to right, odd columns run top to
/// bottom, even columns bottom to top.
pub fn gen_fence(p: usize, q: usize) -> Result<FenceWitness, OpError> {
    if p < 1 || q < 1 {
        return Err(OpError::pre("fences need p >= 1 and q >= 1"));
    }
    let mut rows = Vec::new();
    for j in 1..=q {
        rows.push(Walk::new((1..=2 * p).map(|i| fp(j, i)).collect()));
    }
    let mut columns = Vec::new();
    for i in 1..=2 * p {
        let mut seq: Vec<Vertex> = (1..=q).map(|j| fp(j, i)).collect();
        if i % 2 == 0 {
            seq.reverse();
        }
        columns.push(Walk::new(seq));
    }
    let mut host = Digraph::new();
    for w in columns.iter().chain(rows.iter()) {
        host = host.union(&w.to_digraph());
    }
    Ok(FenceWitness {
        host,
        columns,
        rows,
    })
}

/// The vertices and arcs common to two walks, as a digraph.
fn crossing(a: &Walk, b: &Walk) -> Digraph {
    let shared: BTreeSet<Vertex> = a
        .vertex_set()
        .intersection(&b.vertex_set())
        .cloned()
        .collect();
    let a_arcs: BTreeSet<(Vertex, Vertex)> = a.arcs().into_iter().collect();
    let arcs: Vec<(Vertex, Vertex)> = b
        .arcs()
        .into_iter()
        .filter(|x| a_arcs.contains(x))
        .collect();
    Digraph::from_parts(shared, arcs).expect("crossing arcs join shared vertices")
}

/// Whether `d` is a single directed path (possibly one vertex).
fn digraph_is_path(d: &Digraph) -> bool {
    if d.vertex_count() == 0 || d.arc_count() != d.vertex_count() - 1 {
        return false;
    }
    if d
        .vertices()
        .any(|v| d.in_degree(v) > 1 || d.out_degree(v) > 1)
    {
        return false;
    }
    let sources: Vec<&Vertex> = d.vertices().filter(|v| d.in_degree(v) == 0).collect();
    if sources.len() != 1 {
        return false;
    }
    d.reachable_from(&BTreeSet::from([sources[0].clone()])).len() == d.vertex_count()
}

/// The positions along `host_walk` occupied by the given vertices, as an
/// interval `(first, last)`.
fn span(host_walk: &Walk, of: &BTreeSet<Vertex>) -> Option<(usize, usize)> {
    let hits: Vec<usize> = host_walk
        .seq
        .iter()
        .enumerate()
        .filter(|(_, v)| of.contains(*v))
        .map(|(t, _)| t)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&a), Some(&b)) => Some((a, b)),
        _ => None,
    }
}

/// Shared checks for fences and acyclic grids. `forward_only` drops the
/// alternating row order in favour of forward order on every column.
fn verify_crossing_family(
    prefix: &str,
    host: &Digraph,
    columns: &[Walk],
    rows: &[Walk],
    forward_only: bool,
) -> Report {
    let mut rep = Report::ok();
    if columns.is_empty() || rows.is_empty() {
        rep.add(
            &format!("{prefix}.nonempty"),
            vec![columns.len() as i64, rows.len() as i64],
            "need at least one column and one row",
        );
        return rep;
    }
    if !forward_only && columns.len() % 2 != 0 {
        rep.add(
            &format!("{prefix}.p_even"),
            vec![columns.len() as i64],
            format!("{} columns, expected an even number", columns.len()),
        );
    }
    for (name, walks) in [("column", columns), ("row", rows)] {
        for (i, w) in walks.iter().enumerate() {
            if w.is_empty() || !w.is_path() || !w.is_walk_in(host) {
                rep.add(
                    &format!("{prefix}.{name}_is_path"),
                    vec![i as i64 + 1],
                    format!("{name} {} is not a nonempty path of the host", i + 1),
                );
            }
        }
    }
    disjointness(columns, &format!("{prefix}.columns_disjoint"), &mut rep);
    disjointness(rows, &format!("{prefix}.rows_disjoint"), &mut rep);
    if !rep.is_ok() {
        return rep;
    }

    for (i, p) in columns.iter().enumerate() {
        for (j, q) in rows.iter().enumerate() {
            if !digraph_is_path(&crossing(p, q)) {
                rep.add(
                    &format!("{prefix}.crossing_is_path"),
                    vec![i as i64 + 1, j as i64 + 1],
                    format!("column {} and row {} do not cross in a path", i + 1, j + 1),
                );
            }
        }
    }
    if !rep.is_ok() {
        return rep;
    }

    for (j, q) in rows.iter().enumerate() {
        let spans: Vec<(usize, usize)> = columns
            .iter()
            .map(|p| span(q, &p.vertex_set()).expect("crossings are nonempty"))
            .collect();
        for t in 0..spans.len() - 1 {
            if spans[t].1 >= spans[t + 1].0 {
                rep.add(
                    &format!("{prefix}.column_order"),
                    vec![j as i64 + 1, t as i64 + 1, t as i64 + 2],
                    format!(
                        "columns {} and {} appear out of order along row {}",
                        t + 1,
                        t + 2,
                        j + 1
                    ),
                );
            }
        }
    }
    for (i, p) in columns.iter().enumerate() {
        let spans: Vec<(usize, usize)> = rows
            .iter()
            .map(|q| span(p, &q.vertex_set()).expect("crossings are nonempty"))
            .collect();
        let forward = forward_only || (i + 1) % 2 == 1;
        for t in 0..spans.len() - 1 {
            let ordered = if forward {
                spans[t].1 < spans[t + 1].0
            } else {
                spans[t + 1].1 < spans[t].0
            };
            if !ordered {
                rep.add(
                    &format!("{prefix}.row_order"),
                    vec![i as i64 + 1, t as i64 + 1, t as i64 + 2],
                    format!(
                        "rows {} and {} appear out of order along column {}",
                        t + 1,
                        t + 2,
                        i + 1
                    ),
                );
            }
        }
    }

    let mut union = Digraph::new();
    for w in columns.iter().chain(rows.iter()) {
        union = union.union(&w.to_digraph());
    }
    if union != *host {
        rep.add(
            &format!("{prefix}.host_matches_union"),
            vec![],
            "host differs from the union of the columns and rows",
        );
    }
    rep
}

/// Check a fence witness clause by clause.
pub fn verify_fence(w: &FenceWitness) -> Report {
    verify_crossing_family("fence", &w.host, &w.columns, &w.rows, false)
}

/// Generate the acyclic grid with `p` columns and `q` rows, all columns
/// running top to bottom.
pub fn gen_acyclic_grid(p: usize, q: usize) -> Result<AcyclicGridWitness, OpError> {
    if p < 1 || q < 1 {
        return Err(OpError::pre("acyclic grids need p >= 1 and q >= 1"));
    }
    let mut rows = Vec::new();
    for j in 1..=q {
        rows.push(Walk::new((1..=p).map(|i| fp(j, i)).collect()));
    }
    let mut columns = Vec::new();
    for i in 1..=p {
        columns.push(Walk::new((1..=q).map(|j| fp(j, i)).collect()));
    }
    let mut host = Digraph::new();
    for w in columns.iter().chain(rows.iter()) {
        host = host.union(&w.to_digraph());
    }
    Ok(AcyclicGridWitness {
        host,
        columns,
        rows,
    })
}

/// Check an acyclic-grid witness clause by clause.
pub fn verify_acyclic_grid(w: &AcyclicGridWitness) -> Report {
    verify_crossing_family("acyclic_grid", &w.host, &w.columns, &w.rows, true)
}

/// Check any structure witness against its own definition.
pub fn verify_structure(w: &StructureWitness) -> Report {
    match w {
        StructureWitness::Grid(g) => verify_grid(g),
        StructureWitness::Wall(wl) => verify_wall(wl),
        StructureWitness::Fence(f) => verify_fence(f),
        StructureWitness::AcyclicGrid(a) => verify_acyclic_grid(a),
    }
}

/// Open every cycle of a grid by deleting the arc whose head lies on `P_1`,
/// turning cycles into rows and grid paths into columns of a fence. The
/// result is acyclic.
pub fn fence_from_grid(g: &GridWitness) -> Result<FenceWitness, OpError> {
    let rep = verify_grid(g);
    if !rep.is_ok() {
        return Err(OpError::pre("grid witness does not verify"));
    }
    let k = g.order;
    let cut: Vec<(Vertex, Vertex)> = (1..=k).map(|i| (gp(i, 2 * k - 1), gp(i, 0))).collect();
    let host = g.host.minus_arcs(cut.iter());
    let rows: Vec<Walk> = g
        .cycles
        .iter()
        .map(|c| Walk::new(c.seq[..c.seq.len() - 1].to_vec()))
        .collect();
    Ok(FenceWitness {
        host,
        columns: g.paths.clone(),
        rows,
    })
}

/// Keep the odd (forward) columns of a fence, yielding an acyclic grid.
pub fn acyclic_grid_from_fence(f: &FenceWitness) -> Result<AcyclicGridWitness, OpError> {
    let rep = verify_fence(f);
    if !rep.is_ok() {
        return Err(OpError::pre("fence witness does not verify"));
    }
    let columns: Vec<Walk> = f
        .columns
        .iter()
        .step_by(2)
        .cloned()
        .collect();
    let mut host = Digraph::new();
    for w in columns.iter().chain(f.rows.iter()) {
        host = host.union(&w.to_digraph());
    }
    Ok(AcyclicGridWitness {
        host,
        columns,
        rows: f.rows.clone(),
    })
}

/// Embed the wall of order `k` into a grid of order `2k - 2` as a
/// subdivision: wall vertices map to single grid vertices (interior rows
/// use two adjacent grid rows, swapping by column parity so the split arcs
/// ride the vertical grid arcs), row arcs follow the grid cycles, and the
/// wraparound of each wall row rides its own grid cycle.
pub fn grid_to_wall(g: &GridWitness) -> Result<MinorModel, OpError> {
    let rep = verify_grid(g);
    if !rep.is_ok() {
        return Err(OpError::pre("grid witness does not verify"));
    }
    if g.order < 2 || g.order % 2 != 0 {
        return Err(OpError::pre(format!(
            "grid order {} is not of the form 2k - 2 with k >= 2",
            g.order
        )));
    }
    let k = g.order / 2 + 1;
    let wall = gen_wall(k)?;
    let interior = |i: usize| k >= 3 && i >= 2 && i <= k - 1;

    // Grid vertex hosting a wall vertex; `enter` distinguishes the in-copy
    // from the out-copy of split (interior) wall vertices.
    let image = |i: usize, p: usize, enter: bool| -> Vertex {
        if i == 1 {
            gp(1, p)
        } else if i == k {
            gp(2 * k - 2, p)
        } else if enter == (p % 2 == 0) {
            gp(2 * i - 2, p)
        } else {
            gp(2 * i - 1, p)
        }
    };
    let wall_in = |i: usize, p: usize| {
        if interior(i) {
            format!("c{i}p{p}_in")
        } else {
            gp(i, p)
        }
    };
    let wall_out = |i: usize, p: usize| {
        if interior(i) {
            format!("c{i}p{p}_out")
        } else {
            gp(i, p)
        }
    };

    let mut vertex_images: BTreeMap<Vertex, Digraph> = BTreeMap::new();
    let mut place = |name: Vertex, at: Vertex| {
        let mut img = Digraph::new();
        img.add_vertex(at);
        vertex_images.insert(name, img);
    };
    for i in 1..=k {
        for p in 0..2 * k {
            if interior(i) {
                place(wall_in(i, p), image(i, p, true));
                place(wall_out(i, p), image(i, p, false));
            } else {
                place(gp(i, p), image(i, p, true));
            }
        }
    }

    let mut arc_images: Vec<ArcImage> = Vec::new();
    let mut join = |tail: Vertex, head: Vertex, walk: Vec<Vertex>| {
        arc_images.push(ArcImage {
            tail,
            head,
            walk: Walk::new(walk),
        });
    };

    for i in 2..=k.saturating_sub(1) {
        for p in 0..2 * k {
            join(
                wall_in(i, p),
                wall_out(i, p),
                vec![image(i, p, true), image(i, p, false)],
            );
        }
    }

    for i in 1..=k {
        for p in 0..2 * k {
            let tail = wall_out(i, p);
            let head = wall_in(i, (p + 1) % (2 * k));
            let from = image(i, p, false);
            let to = image(i, (p + 1) % (2 * k), true);
            if p + 1 < 2 * k {
                join(tail, head, vec![from, to]);
            } else {
                let row = if i == 1 {
                    1
                } else if i == k {
                    2 * k - 2
                } else {
                    2 * i - 2
                };
                let mut walk = vec![from];
                for j in 2 * k..4 * k - 4 {
                    walk.push(gp(row, j));
                }
                walk.push(to);
                join(tail, head, walk);
            }
        }
    }

    for p in 0..2 * k {
        for i in 1..k {
            let (tail, head) = if p % 2 == 0 {
                (wall_out(i, p), wall_in(i + 1, p))
            } else {
                (wall_out(i + 1, p), wall_in(i, p))
            };
            let (from, to) = if p % 2 == 0 {
                (image(i, p, false), image(i + 1, p, true))
            } else {
                (image(i + 1, p, false), image(i, p, true))
            };
            join(tail, head, vec![from, to]);
        }
    }

    let model = MinorModel {
        kind: ModelKind::Subdivision,
        vertex_images,
        arc_images,
    };
    let check = verify_minor_model(&g.host, &wall.host, &model);
    if !check.is_ok() {
        return Err(OpError::Internal(format!(
            "constructed wall embedding fails verification: {:?}",
            check.violations.first()
        )));
    }
    Ok(model)
}

/// Given a fence with at least `(t-1)(2t-1) + 1` rows and a back-linkage
/// `R` of the same order returning the column ends to the column starts,
/// the union hosts a cylindrical grid of order `t` as a butterfly minor.
/// The model is realized by search rather than by reproducing the
/// constructive proof, so hosts are limited to search scale.
pub fn fence_backlinkage_to_grid(
    f: &FenceWitness,
    r: &Linkage,
    t: usize,
    budget: &Budget,
) -> Result<MinorModel, OpError> {
    if t < 1 {
        return Err(OpError::pre("grid order must be at least 1"));
    }
    let rep = verify_fence(f);
    if !rep.is_ok() {
        return Err(OpError::pre("fence witness does not verify"));
    }
    let q = f.rows.len();
    let bound = (t - 1) * (2 * t - 1) + 1;
    if q < bound {
        return Err(OpError::pre(format!(
            "{q} rows, but grid order {t} needs at least {bound}"
        )));
    }
    if r.order() != q {
        return Err(OpError::pre(format!(
            "back-linkage has order {}, expected {q}",
            r.order()
        )));
    }
    let col_starts: BTreeSet<Vertex> = f
        .columns
        .iter()
        .filter_map(|p| p.start().cloned())
        .collect();
    let col_ends: BTreeSet<Vertex> = f.columns.iter().filter_map(|p| p.end().cloned()).collect();
    if !r.start_set().is_subset(&col_ends) || !r.end_set().is_subset(&col_starts) {
        return Err(OpError::pre(
            "back-linkage must run from column ends to column starts",
        ));
    }
    if !r.is_internally_disjoint_from(&f.host) {
        return Err(OpError::pre(
            "back-linkage must be internally disjoint from the fence",
        ));
    }

    let d = f.host.union(&r.to_digraph());
    let h = gen_grid(t)?.host;
    match find_butterfly_minor_with_cap(&d, &h, budget, d.vertex_count())? {
        Some(m) => Ok(m),
        None => Err(OpError::Internal(
            "no grid model found although the hypotheses hold".into(),
        )),
    }
}
