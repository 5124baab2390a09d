//! Finite graphs, activities and the exhaustive independent-set oracle, plus
//! the structural transformations used by the reductions (blow-up, line
//! graph) and self-avoiding-walk counting.

use crate::error::{invalid, Error, Result};

/// Default vertex cap for [`brute_force_partition`].
pub const DEFAULT_ENUMERATION_CAP: usize = 30;

/// Loopless simple undirected graph on vertices `0..n`.
///
/// Adjacency lists are kept sorted ascending; this is the canonical neighbor
/// order used for tagging trees of self-avoiding walks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGraph {
    adjacency: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
}

impl FiniteGraph {
    /// Graph with `n` vertices and no edges.
    pub fn empty(n: usize) -> Self {
        FiniteGraph {
            adjacency: vec![Vec::new(); n],
            labels: None,
        }
    }

    /// Builds a graph from an undirected edge list. Loops and repeated edges
    /// (in either orientation) are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return invalid(format!("edge ({u},{v}) out of range for {n} vertices"));
            }
            if u == v {
                return invalid(format!("loop at vertex {u}"));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Self::from_adjacency(adjacency)
    }

    /// Builds a graph from adjacency lists, sorting them. Lists must be
    /// symmetric, loopless and free of duplicates.
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return invalid(format!("repeated edge at vertex {v} (multigraphs are not supported)"));
            }
            if list.iter().any(|&u| u >= n) {
                return invalid(format!("neighbor of {v} out of range"));
            }
            if list.binary_search(&v).is_ok() {
                return invalid(format!("loop at vertex {v}"));
            }
        }
        for (v, list) in adjacency.iter().enumerate() {
            for &u in list {
                if adjacency[u].binary_search(&v).is_err() {
                    return invalid(format!("asymmetric adjacency between {v} and {u}"));
                }
            }
        }
        Ok(FiniteGraph {
            adjacency,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.vertex_count() {
            return invalid("label count does not match vertex count");
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Subgraph induced by the vertices with `keep[v]`, relabelled in
    /// increasing order. Also returns the old index of each new vertex.
    pub fn induced(&self, keep: &[bool]) -> (FiniteGraph, Vec<usize>) {
        let old: Vec<usize> = (0..self.vertex_count()).filter(|&v| keep[v]).collect();
        let mut new_index = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in old.iter().enumerate() {
            new_index[v] = i;
        }
        let adjacency = old
            .iter()
            .map(|&v| {
                self.adjacency[v]
                    .iter()
                    .filter(|&&u| keep[u])
                    .map(|&u| new_index[u])
                    .collect()
            })
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| old.iter().map(|&v| l[v].clone()).collect());
        (FiniteGraph { adjacency, labels }, old)
    }
}

/// Strictly positive per-vertex activities.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMap(Vec<f64>);

impl ActivityMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((v, x)) = values
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x > 0.0))
        {
            return invalid(format!("activity at vertex {v} must be finite and positive, got {x}"));
        }
        Ok(ActivityMap(values))
    }

    pub fn uniform(n: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// λ₊; zero for an empty map.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// λ₋; infinity for an empty map.
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_len(&self, g: &FiniteGraph) -> Result<()> {
        if self.len() != g.vertex_count() {
            return invalid(format!(
                "activity map has {} entries but graph has {} vertices",
                self.len(),
                g.vertex_count()
            ));
        }
        Ok(())
    }

    pub fn select(&self, old: &[usize]) -> ActivityMap {
        ActivityMap(old.iter().map(|&v| self.0[v]).collect())
    }
}

/// An independent set, stored as an indicator vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependentSet(Vec<bool>);

impl IndependentSet {
    pub fn new(g: &FiniteGraph, indicator: Vec<bool>) -> Result<Self> {
        if !is_independent(g, &indicator)? {
            return invalid("indicator is not an independent set");
        }
        Ok(IndependentSet(indicator))
    }

    pub fn indicator(&self) -> &[bool] {
        &self.0
    }

    pub fn weight(&self, lambda: &ActivityMap) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(v, _)| lambda.get(v))
            .product()
    }
}

pub fn is_independent(g: &FiniteGraph, set: &[bool]) -> Result<bool> {
    if set.len() != g.vertex_count() {
        return invalid(format!(
            "indicator has length {} but graph has {} vertices",
            set.len(),
            g.vertex_count()
        ));
    }
    Ok(g
        .edges()
        .into_iter()
        .all(|(u, v)| !(set[u] && set[v])))
}

/// Σ over independent sets of ∏ λ(v), by exhaustive backtracking.
pub fn brute_force_partition(g: &FiniteGraph, lambda: &ActivityMap) -> Result<f64> {
    brute_force_partition_with_cap(g, lambda, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_partition_with_cap(
    g: &FiniteGraph,
    lambda: &ActivityMap,
    cap: usize,
) -> Result<f64> {
    lambda.check_len(g)?;
    if g.vertex_count() > cap {
        return Err(Error::BudgetExceeded { budget: cap as u64 });
    }
    let mut blocked = vec![0u32; g.vertex_count()];
    Ok(enumerate_weight(g, lambda, 0, &mut blocked))
}

// Vertex v may be set only if no smaller-indexed set neighbor blocks it.
fn enumerate_weight(g: &FiniteGraph, lambda: &ActivityMap, v: usize, blocked: &mut [u32]) -> f64 {
    if v == g.vertex_count() {
        return 1.0;
    }
    let mut total = enumerate_weight(g, lambda, v + 1, blocked);
    if blocked[v] == 0 {
        for &u in g.neighbors(v) {
            blocked[u] += 1;
        }
        total += lambda.get(v) * enumerate_weight(g, lambda, v + 1, blocked);
        for &u in g.neighbors(v) {
            blocked[u] -= 1;
        }
    }
    total
}

/// Number of independent sets of each size `0..=n` (the coefficients of the
/// independence polynomial), by exhaustive backtracking.
pub fn independence_polynomial(g: &FiniteGraph, cap: usize) -> Result<Vec<u64>> {
    if g.vertex_count() > cap {
        return Err(Error::BudgetExceeded { budget: cap as u64 });
    }
    let mut counts = vec![0u64; g.vertex_count() + 1];
    let mut blocked = vec![0u32; g.vertex_count()];
    count_by_size(g, 0, 0, &mut blocked, &mut counts);
    Ok(counts)
}

fn count_by_size(g: &FiniteGraph, v: usize, size: usize, blocked: &mut [u32], counts: &mut [u64]) {
    if v == g.vertex_count() {
        counts[size] += 1;
        return;
    }
    count_by_size(g, v + 1, size, blocked, counts);
    if blocked[v] == 0 {
        for &u in g.neighbors(v) {
            blocked[u] += 1;
        }
        count_by_size(g, v + 1, size + 1, blocked, counts);
        for &u in g.neighbors(v) {
            blocked[u] -= 1;
        }
    }
}

/// Result of [`blow_up`]: the graph Γ_b, its activities λ_b, and for each new
/// vertex the pair (original vertex, copy index).
#[derive(Debug, Clone)]
pub struct BlowUp {
    pub graph: FiniteGraph,
    pub activity: ActivityMap,
    pub origin: Vec<(usize, usize)>,
}

/// Replaces each vertex `v` by a clique of `b[v]` copies, joins copies of
/// adjacent vertices completely, and splits λ(v) evenly among the copies.
/// The partition function is unchanged.
pub fn blow_up(g: &FiniteGraph, lambda: &ActivityMap, b: &[usize]) -> Result<BlowUp> {
    lambda.check_len(g)?;
    if b.len() != g.vertex_count() {
        return invalid("multiplicity vector length does not match vertex count");
    }
    if let Some(v) = b.iter().position(|&k| k == 0) {
        return invalid(format!("multiplicity of vertex {v} must be at least 1"));
    }
    let mut first = Vec::with_capacity(b.len());
    let mut origin = Vec::new();
    for (v, &k) in b.iter().enumerate() {
        first.push(origin.len());
        origin.extend((0..k).map(|i| (v, i)));
    }
    let mut adjacency = vec![Vec::new(); origin.len()];
    for (w, &(v, i)) in origin.iter().enumerate() {
        let list = &mut adjacency[w];
        list.extend((0..b[v]).filter(|&j| j != i).map(|j| first[v] + j));
        for &u in g.neighbors(v) {
            list.extend((0..b[u]).map(|j| first[u] + j));
        }
    }
    let activity = ActivityMap::new(
        origin
            .iter()
            .map(|&(v, _)| lambda.get(v) / b[v] as f64)
            .collect(),
    )?;
    Ok(BlowUp {
        graph: FiniteGraph::from_adjacency(adjacency)?,
        activity,
        origin,
    })
}

/// Line graph: one vertex per edge of `g` (in [`FiniteGraph::edges`] order),
/// adjacent when the edges share an endpoint.
pub fn line_graph(g: &FiniteGraph) -> FiniteGraph {
    let edges = g.edges();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.vertex_count()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }
    let mut adjacency = vec![Vec::new(); edges.len()];
    for list in &incident {
        for &e in list {
            adjacency[e].extend(list.iter().copied().filter(|&f| f != e));
        }
    }
    // two distinct simple edges share at most one endpoint
    let mut line = FiniteGraph::from_adjacency(adjacency).expect("line graph is simple");
    if let Some(labels) = g.labels() {
        line.labels = Some(
            edges
                .iter()
                .map(|&(u, v)| format!("{}-{}", labels[u], labels[v]))
                .collect(),
        );
    }
    line
}

/// N(v, k) for k = 1..=depth: the number of self-avoiding walks of exactly k
/// steps starting at `v`.
pub fn count_saw(g: &FiniteGraph, v: usize, depth: usize) -> Result<Vec<u64>> {
    if v >= g.vertex_count() {
        return invalid(format!("vertex {v} out of range"));
    }
    if depth == 0 {
        return invalid("depth must be at least 1");
    }
    let mut counts = vec![0u64; depth];
    let mut on_walk = vec![false; g.vertex_count()];
    on_walk[v] = true;
    saw_dfs(g, v, 0, depth, &mut on_walk, &mut counts);
    Ok(counts)
}

fn saw_dfs(g: &FiniteGraph, v: usize, len: usize, depth: usize, on_walk: &mut [bool], counts: &mut [u64]) {
    if len == depth {
        return;
    }
    for &u in g.neighbors(v) {
        if !on_walk[u] {
            counts[len] += 1;
            on_walk[u] = true;
            saw_dfs(g, u, len + 1, depth, on_walk, counts);
            on_walk[u] = false;
        }
    }
}

/// μ̂ = N(ℓ)^{1/ℓ} for the largest ℓ with N(ℓ) > 0. Not a certified bound.
pub fn estimate_connective_constant(counts: &[u64]) -> Result<f64> {
    let (idx, &n) = counts
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &c)| c > 0)
        .ok_or_else(|| Error::InvalidInput("all walk counts are zero".into()))?;
    Ok((n as f64).powf(1.0 / (idx + 1) as f64))
}
