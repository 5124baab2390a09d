//! ℤᵈ-periodic graphs: a finite fundamental domain plus offset edges. The
//! implicit vertex set is ℤᵈ × domain.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{ActivityMap, FiniteGraph};

/// A translation-invariant strict total order on the group, given through its
/// algebraic past `{g : g ≺ 0}`. Only ℤᵈ is implemented; other orderable
/// groups plug in here.
pub trait GroupOrder: Sync {
    fn dimension(&self) -> usize;
    fn is_past(&self, g: &[i32]) -> bool;
}

/// Lexicographic order on ℤᵈ: coordinates are scanned from the first to the
/// last and the first nonzero one decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexOrder {
    pub d: usize,
}

impl GroupOrder for LexOrder {
    fn dimension(&self) -> usize {
        self.d
    }

    fn is_past(&self, g: &[i32]) -> bool {
        lex_past(self, g)
    }
}

pub fn lex_past(_order: &LexOrder, g: &[i32]) -> bool {
    g.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeriodicVertex {
    pub offset: Vec<i32>,
    pub index: usize,
}

impl PeriodicVertex {
    pub fn new(offset: Vec<i32>, index: usize) -> Self {
        PeriodicVertex { offset, index }
    }

    pub fn origin(d: usize, index: usize) -> Self {
        PeriodicVertex {
            offset: vec![0; d],
            index,
        }
    }
}

/// Vertex `(g, from)` is adjacent to `(g + offset, to)` for every `g`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrossEdge {
    pub from: usize,
    pub offset: Vec<i32>,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct PeriodicGraph {
    d: usize,
    labels: Vec<String>,
    internal: Vec<(usize, usize)>,
    cross: Vec<CrossEdge>,
    generators: Vec<Vec<i32>>,
    activity: Vec<f64>,
    // per domain index: canonical neighbor list as (offset, index)
    template: Vec<Vec<(Vec<i32>, usize)>>,
}

impl PeriodicGraph {
    /// Validates the description and applies symmetry closure. Cross-edge
    /// offsets, in order of first appearance (each followed by its negation),
    /// fix the generator listing used for the canonical neighbor order.
    pub fn new(
        d: usize,
        labels: Vec<String>,
        internal_edges: &[(usize, usize)],
        cross_edges: &[CrossEdge],
        activity: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if d == 0 {
            return invalid("dimension must be positive");
        }
        if activity.len() != n {
            return invalid("activity count does not match domain size");
        }
        ActivityMap::new(activity.clone())?;
        let mut internal = Vec::new();
        let mut seen_internal = HashSet::new();
        for &(u, v) in internal_edges {
            if u >= n || v >= n {
                return invalid(format!("internal edge ({u},{v}) out of range"));
            }
            if u == v {
                return invalid(format!("internal loop at domain vertex {u}"));
            }
            let e = (u.min(v), u.max(v));
            if seen_internal.insert(e) {
                internal.push(e);
            }
        }
        let mut generators: Vec<Vec<i32>> = Vec::new();
        let mut cross = Vec::new();
        let mut seen_cross = HashSet::new();
        for e in cross_edges {
            if e.from >= n || e.to >= n {
                return invalid(format!("cross edge ({},{:?},{}) out of range", e.from, e.offset, e.to));
            }
            if e.offset.len() != d {
                return invalid(format!("offset {:?} does not have dimension {d}", e.offset));
            }
            if e.offset.iter().all(|&c| c == 0) {
                return invalid("cross edge with zero offset; use an internal edge");
            }
            if e.offset.iter().any(|&c| c.unsigned_abs() > 1 << 14) {
                return invalid(format!("offset {:?} is too large", e.offset));
            }
            let neg: Vec<i32> = e.offset.iter().map(|c| -c).collect();
            for g in [&e.offset, &neg] {
                if !generators.contains(g) {
                    generators.push(g.clone());
                }
            }
            let reverse = CrossEdge {
                from: e.to,
                offset: neg,
                to: e.from,
            };
            for edge in [e.clone(), reverse] {
                if seen_cross.insert(edge.clone()) {
                    cross.push(edge);
                }
            }
        }
        let mut template = vec![Vec::new(); n];
        for &(u, v) in &internal {
            template[u].push((vec![0; d], v));
            template[v].push((vec![0; d], u));
        }
        for list in &mut template {
            list.sort_by_key(|&(_, v)| v);
        }
        for g in &generators {
            let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); n];
            for e in cross.iter().filter(|e| &e.offset == g) {
                by_source[e.from].push(e.to);
            }
            for (u, mut targets) in by_source.into_iter().enumerate() {
                targets.sort_unstable();
                template[u].extend(targets.into_iter().map(|v| (g.clone(), v)));
            }
        }
        Ok(PeriodicGraph {
            d,
            labels,
            internal,
            cross,
            generators,
            activity,
            template,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn internal_edges(&self) -> &[(usize, usize)] {
        &self.internal
    }

    /// Cross edges after symmetry closure.
    pub fn cross_edges(&self) -> &[CrossEdge] {
        &self.cross
    }

    pub fn generators(&self) -> &[Vec<i32>] {
        &self.generators
    }

    pub fn activities(&self) -> &[f64] {
        &self.activity
    }

    pub fn with_activities(&self, activity: Vec<f64>) -> Result<Self> {
        if activity.len() != self.domain_size() {
            return invalid("activity count does not match domain size");
        }
        ActivityMap::new(activity.clone())?;
        Ok(PeriodicGraph {
            activity,
            ..self.clone()
        })
    }

    pub fn max_activity(&self) -> f64 {
        self.activity.iter().copied().fold(0.0, f64::max)
    }

    /// Canonical neighbors of `(0, u)` as (offset, index) pairs.
    pub fn neighbor_template(&self, u: usize) -> &[(Vec<i32>, usize)] {
        &self.template[u]
    }

    pub fn neighbors(&self, w: &PeriodicVertex) -> Vec<PeriodicVertex> {
        self.template[w.index]
            .iter()
            .map(|(delta, v)| PeriodicVertex {
                offset: w.offset.iter().zip(delta).map(|(a, b)| a + b).collect(),
                index: *v,
            })
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.template.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge orbits under translation: internal edges, then cross edges with
    /// lexicographically positive offset, as (from, offset, to).
    pub fn edge_orbits(&self) -> Vec<CrossEdge> {
        let order = LexOrder { d: self.d };
        let mut out: Vec<CrossEdge> = self
            .internal
            .iter()
            .map(|&(u, v)| CrossEdge {
                from: u,
                offset: vec![0; self.d],
                to: v,
            })
            .collect();
        out.extend(
            self.cross
                .iter()
                .filter(|e| {
                    let neg: Vec<i32> = e.offset.iter().map(|c| -c).collect();
                    lex_past(&order, &neg)
                })
                .cloned(),
        );
        out
    }

    fn check_vertex(&self, w: &PeriodicVertex) -> Result<()> {
        if w.offset.len() != self.d || w.index >= self.domain_size() {
            return invalid(format!("invalid periodic vertex {w:?}"));
        }
        Ok(())
    }
}

/// A finite ball of a periodic graph. Vertex 0 is the center; vertices are
/// numbered in BFS order.
#[derive(Debug, Clone)]
pub struct Ball {
    pub graph: FiniteGraph,
    pub activity: ActivityMap,
    pub vertices: Vec<PeriodicVertex>,
    pub distance: Vec<usize>,
    /// Adjacency in the canonical periodic neighbor order (restricted to the
    /// ball), used for tagging walks.
    pub ranked: Vec<Vec<usize>>,
}

pub fn ball(
    pg: &PeriodicGraph,
    center: &PeriodicVertex,
    radius: usize,
    deleted: &HashSet<PeriodicVertex>,
) -> Result<Ball> {
    ball_where(pg, center, radius, |w| deleted.contains(w))
}

/// Breadth-first ball of `pg` minus the vertices for which `deleted` holds.
pub fn ball_where(
    pg: &PeriodicGraph,
    center: &PeriodicVertex,
    radius: usize,
    deleted: impl Fn(&PeriodicVertex) -> bool,
) -> Result<Ball> {
    pg.check_vertex(center)?;
    if deleted(center) {
        return invalid("ball center is deleted");
    }
    let mut index: HashMap<PeriodicVertex, usize> = HashMap::new();
    let mut vertices = vec![center.clone()];
    let mut distance = vec![0];
    index.insert(center.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if distance[i] == radius {
            continue;
        }
        for w in pg.neighbors(&vertices[i]) {
            if index.contains_key(&w) || deleted(&w) {
                continue;
            }
            index.insert(w.clone(), vertices.len());
            vertices.push(w);
            distance.push(distance[i] + 1);
            queue.push_back(vertices.len() - 1);
        }
    }
    let ranked: Vec<Vec<usize>> = vertices
        .iter()
        .map(|w| {
            pg.neighbors(w)
                .iter()
                .filter_map(|x| index.get(x).copied())
                .collect()
        })
        .collect();
    let graph = FiniteGraph::from_adjacency(ranked.clone())?;
    let activity = ActivityMap::new(vertices.iter().map(|w| pg.activity[w.index]).collect())?;
    Ok(Ball {
        graph,
        activity,
        vertices,
        distance,
        ranked,
    })
}

/// Finite quotient by the sublattice `L₁ℤ × … × L_dℤ`. Vertex
/// `(g, u)` gets id `cell(g)·n + u` with the first coordinate varying fastest.
pub fn torus_quotient(pg: &PeriodicGraph, dims: &[usize]) -> Result<(FiniteGraph, ActivityMap)> {
    if dims.len() != pg.d {
        return invalid(format!("expected {} torus dimensions", pg.d));
    }
    for (k, &l) in dims.iter().enumerate() {
        let span = pg
            .cross
            .iter()
            .map(|e| e.offset[k].unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        if l == 0 || l <= 2 * span {
            return invalid(format!(
                "torus side {l} in coordinate {} must exceed {}",
                k + 1,
                2 * span
            ));
        }
    }
    let n = pg.domain_size();
    let cells: usize = dims.iter().product();
    let coords = |mut c: usize| -> Vec<i64> {
        dims.iter()
            .map(|&l| {
                let x = (c % l) as i64;
                c /= l;
                x
            })
            .collect()
    };
    let cell_of = |x: &[i64]| -> usize {
        let mut c = 0usize;
        for (k, &l) in dims.iter().enumerate().rev() {
            c = c * l + x[k].rem_euclid(l as i64) as usize;
        }
        c
    };
    let order = LexOrder { d: pg.d };
    let mut edges = Vec::new();
    for c in 0..cells {
        let x = coords(c);
        for &(u, v) in &pg.internal {
            edges.push((c * n + u, c * n + v));
        }
        for e in &pg.cross {
            let neg: Vec<i32> = e.offset.iter().map(|c| -c).collect();
            if !lex_past(&order, &neg) {
                continue;
            }
            let y: Vec<i64> = x.iter().zip(&e.offset).map(|(a, b)| a + *b as i64).collect();
            edges.push((c * n + e.from, cell_of(&y) * n + e.to));
        }
    }
    let graph = FiniteGraph::from_edges(cells * n, &edges)?;
    let activity = ActivityMap::new((0..cells * n).map(|i| pg.activity[i % n]).collect())?;
    Ok((graph, activity))
}
