//! Trees of self-avoiding walks and the root-marginal recursion.
//!
//! A walk that closes a cycle at `u` is tagged occupied when the rank (in
//! `u`'s canonical neighbor order) of the neighbor through which the walk left
//! `u` is smaller than the rank of the neighbor through which it returns, and
//! unoccupied otherwise.
//!
//! Two evaluators are provided. [`build_tsaw`] materializes the tree and is
//! meant for inspection and tests. [`SawEvaluator`] evaluates the same tree
//! without building it, through the equivalent graph recursion in which the
//! i-th child of `v` is evaluated on the graph with `v` and its later-ranked
//! neighbors removed. Subtrees whose value is exactly 1 (pruned below fixed
//! nodes) are skipped by both, so the two agree bit for bit.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{ActivityMap, FiniteGraph};
use crate::periodic::Ball;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Live sets larger than this are not memoized.
pub const DEFAULT_MEMO_LIMIT: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Free,
    FixedUnoccupied,
    FixedOccupied,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    AllUnoccupied,
    AllOccupied,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SawNode {
    pub activity: f64,
    pub state: NodeState,
    pub children: Vec<SawNode>,
    /// Vertex of the underlying graph at which the walk ends.
    pub origin: usize,
}

impl SawNode {
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(SawNode::node_count).sum::<usize>()
    }

    /// Number of nodes at each depth, root first.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut level = vec![self];
        while !level.is_empty() {
            out.push(level.len());
            level = level.iter().flat_map(|n| n.children.iter()).collect();
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }
}

#[derive(Debug, Clone)]
enum Coding {
    Absolute,
    Relative { pos: Vec<[i32; 3]>, class: Vec<u16> },
    Unavailable,
}

/// Graph view used for walk trees: ranked adjacency, activities and the set
/// of vertices removed by conditioning on "unoccupied".
#[derive(Debug, Clone)]
pub struct SawGraph {
    adj: Vec<Vec<u32>>,
    activity: Vec<f64>,
    deleted: Vec<bool>,
    coding: Coding,
}

impl SawGraph {
    /// View of a finite graph with sorted (canonical) neighbor order.
    pub fn from_finite(g: &FiniteGraph, lambda: &ActivityMap, deleted: &[bool]) -> Result<Self> {
        lambda.check_len(g)?;
        if deleted.len() != g.vertex_count() {
            return invalid("deleted mask length does not match vertex count");
        }
        Ok(SawGraph {
            adj: g
                .adjacency()
                .iter()
                .map(|l| l.iter().map(|&v| v as u32).collect())
                .collect(),
            activity: lambda.values().to_vec(),
            deleted: deleted.to_vec(),
            coding: Coding::Absolute,
        })
    }

    /// View of a periodic ball with canonical periodic neighbor order.
    /// Memo keys use coordinates relative to the vertex being evaluated, so
    /// translated copies of a subproblem share one entry.
    pub fn from_ball(ball: &Ball) -> Self {
        let d = ball.vertices.first().map_or(0, |w| w.offset.len());
        let fits = d <= 3 && ball.vertices.iter().all(|w| w.index <= u16::MAX as usize);
        let coding = if fits {
            Coding::Relative {
                pos: ball
                    .vertices
                    .iter()
                    .map(|w| {
                        let mut p = [0; 3];
                        p[..d].copy_from_slice(&w.offset);
                        p
                    })
                    .collect(),
                class: ball.vertices.iter().map(|w| w.index as u16).collect(),
            }
        } else {
            Coding::Unavailable
        };
        SawGraph {
            adj: ball
                .ranked
                .iter()
                .map(|l| l.iter().map(|&v| v as u32).collect())
                .collect(),
            activity: ball.activity.values().to_vec(),
            deleted: vec![false; ball.vertices.len()],
            coding,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn activity(&self, v: usize) -> f64 {
        self.activity[v]
    }

    fn rank(&self, a: usize, x: usize) -> usize {
        self.adj[a]
            .iter()
            .position(|&y| y as usize == x)
            .expect("rank of a non-neighbor")
    }

    fn check_root(&self, v: usize) -> Result<()> {
        if v >= self.vertex_count() {
            return invalid(format!("root {v} out of range"));
        }
        if self.deleted[v] {
            return invalid(format!("root {v} is deleted"));
        }
        Ok(())
    }
}

/// Materializes the walk tree rooted at `v`, truncated at `depth` (`None`
/// for the complete tree).
pub fn build_tsaw(g: &SawGraph, v: usize, depth: Option<usize>, budget: u64) -> Result<SawNode> {
    g.check_root(v)?;
    let mut b = TreeBuilder {
        g,
        walk: vec![v],
        pos: vec![usize::MAX; g.vertex_count()],
        limit: depth.unwrap_or(usize::MAX),
        nodes: 0,
        budget,
    };
    b.pos[v] = 0;
    b.expand()
}

struct TreeBuilder<'a> {
    g: &'a SawGraph,
    walk: Vec<usize>,
    pos: Vec<usize>,
    limit: usize,
    nodes: u64,
    budget: u64,
}

impl TreeBuilder<'_> {
    fn count(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    fn on_walk(&self, x: usize) -> bool {
        self.pos[x] != usize::MAX
    }

    // Entering `x` from `w` after having left `x` towards walk[pos(x)+1].
    fn closes_occupied(&self, x: usize, w: usize) -> bool {
        let next = self.walk[self.pos[x] + 1];
        self.g.rank(x, next) < self.g.rank(x, w)
    }

    fn forced(&self, w: usize, y: usize) -> bool {
        self.g.adj[y]
            .iter()
            .map(|&a| a as usize)
            .any(|a| a != w && self.on_walk(a) && self.closes_occupied(a, y))
    }

    fn expand(&mut self) -> Result<SawNode> {
        self.count()?;
        let m = self.walk.len() - 1;
        let w = self.walk[m];
        let parent = if m > 0 { Some(self.walk[m - 1]) } else { None };
        let activity = self.g.activity[w];
        let mut tags = Vec::new();
        let mut any_occupied = false;
        let mut free = Vec::new();
        for &x in &self.g.adj[w] {
            let x = x as usize;
            if Some(x) == parent || self.g.deleted[x] {
                continue;
            }
            if self.on_walk(x) {
                let occupied = self.closes_occupied(x, w);
                any_occupied |= occupied;
                tags.push((x, occupied));
            } else {
                free.push(x);
            }
        }
        let mut children = Vec::new();
        for &(x, occupied) in &tags {
            self.count()?;
            children.push(SawNode {
                activity: self.g.activity[x],
                state: if occupied {
                    NodeState::FixedOccupied
                } else {
                    NodeState::FixedUnoccupied
                },
                children: Vec::new(),
                origin: x,
            });
        }
        if !any_occupied {
            if m >= self.limit && free.iter().any(|&y| !self.forced(w, y)) {
                return Ok(SawNode {
                    activity,
                    state: NodeState::Truncated,
                    children: Vec::new(),
                    origin: w,
                });
            }
            for y in free {
                self.pos[y] = self.walk.len();
                self.walk.push(y);
                let child = self.expand();
                self.walk.pop();
                self.pos[y] = usize::MAX;
                children.push(child?);
            }
        }
        Ok(SawNode {
            activity,
            state: NodeState::Free,
            children,
            origin: w,
        })
    }
}

/// Bottom-up unoccupation probability of the root,
/// p = 1 / (1 + λ·∏ p(child)).
pub fn root_unoccupied_prob(t: &SawNode, bc: BoundaryCondition) -> f64 {
    match t.state {
        NodeState::FixedUnoccupied => 1.0,
        NodeState::FixedOccupied => 0.0,
        NodeState::Truncated => match bc {
            BoundaryCondition::AllUnoccupied => 1.0,
            BoundaryCondition::AllOccupied => 0.0,
        },
        NodeState::Free => {
            let prod: f64 = t.children.iter().map(|c| root_unoccupied_prob(c, bc)).product();
            1.0 / (1.0 + t.activity * prod)
        }
    }
}

/// (q̂, r̂) from a materialized tree.
pub fn tree_bounds(t: &SawNode) -> (f64, f64) {
    let a = root_unoccupied_prob(t, BoundaryCondition::AllUnoccupied);
    let b = root_unoccupied_prob(t, BoundaryCondition::AllOccupied);
    (a.min(b), a.max(b))
}

/// (q̂, r̂) bracketing the unoccupation probability of `v`, from the depth-`depth`
/// walk tree evaluated under both homogeneous boundary conditions.
pub fn marginal_bounds(g: &SawGraph, v: usize, depth: Option<usize>) -> Result<(f64, f64)> {
    SawEvaluator::new(g, DEFAULT_NODE_BUDGET, true).bounds(v, depth)
}

/// Memo of subproblem values keyed by the vertex, remaining depth and live
/// reachable set.
#[derive(Debug, Default, Clone)]
pub struct MemoTable {
    map: FxHashMap<Box<[u64]>, (f64, f64)>,
}

impl MemoTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Evaluates walk trees through the graph recursion, both boundary
/// conditions in one traversal. Without a memo, memory is O(depth).
pub struct SawEvaluator<'a> {
    g: &'a SawGraph,
    dead: Vec<u32>,
    memo: Option<MemoTable>,
    memo_limit: usize,
    min_memo_depth: usize,
    nodes: u64,
    budget: u64,
    stack: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<(u32, usize)>,
    key: Vec<u64>,
}

impl<'a> SawEvaluator<'a> {
    pub fn new(g: &'a SawGraph, budget: u64, memo: bool) -> Self {
        Self::with_memo(g, budget, memo.then(MemoTable::new))
    }

    /// Continues with an existing memo. Memo entries stay valid across graphs
    /// that share a coding (the same finite graph, or balls of one periodic
    /// graph).
    pub fn with_memo(g: &'a SawGraph, budget: u64, memo: Option<MemoTable>) -> Self {
        let memo = match g.coding {
            Coding::Unavailable => None,
            _ => memo,
        };
        SawEvaluator {
            g,
            dead: g.deleted.iter().map(|&d| d as u32).collect(),
            memo,
            memo_limit: DEFAULT_MEMO_LIMIT,
            min_memo_depth: 2,
            nodes: 0,
            budget,
            stack: Vec::new(),
            stamp: vec![0; g.vertex_count()],
            epoch: 0,
            queue: Vec::new(),
            key: Vec::new(),
        }
    }

    pub fn set_memo_limit(&mut self, limit: usize) {
        self.memo_limit = limit;
    }

    /// Calls made so far, including memo hits.
    pub fn nodes(&self) -> u64 {
        self.nodes
    }

    pub fn into_memo(self) -> Option<MemoTable> {
        self.memo
    }

    /// (q̂, r̂) for the root `v` with the tree truncated at `depth`
    /// (`None` for the complete tree).
    pub fn bounds(&mut self, v: usize, depth: Option<usize>) -> Result<(f64, f64)> {
        self.g.check_root(v)?;
        let out = self.eval(v, depth.unwrap_or(usize::MAX));
        if out.is_err() {
            self.dead = self.g.deleted.iter().map(|&d| d as u32).collect();
            self.stack.clear();
        }
        let (a, b) = out?;
        Ok((a.min(b), a.max(b)))
    }

    fn eval(&mut self, u: usize, k: usize) -> Result<(f64, f64)> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        let g = self.g;
        let lambda = g.activity[u];
        let start = self.stack.len();
        for &y in &g.adj[u] {
            if self.dead[y as usize] == 0 {
                self.stack.push(y);
            }
        }
        let end = self.stack.len();
        if start == end {
            let p = 1.0 / (1.0 + lambda);
            return Ok((p, p));
        }
        if k == 0 {
            self.stack.truncate(start);
            return Ok((1.0, 0.0));
        }
        let keyed = k >= self.min_memo_depth && self.memo.is_some() && self.build_key(u, k);
        if keyed {
            if let Some(&hit) = self.memo.as_ref().and_then(|m| m.map.get(&self.key[..])) {
                self.stack.truncate(start);
                return Ok(hit);
            }
        }
        let key: Option<Box<[u64]>> = keyed.then(|| self.key.as_slice().into());
        self.dead[u] += 1;
        for i in start..end {
            self.dead[self.stack[i] as usize] += 1;
        }
        let (mut prod_u, mut prod_o) = (1.0, 1.0);
        for i in start..end {
            let y = self.stack[i] as usize;
            self.dead[y] -= 1;
            let (a, b) = self.eval(y, k - 1)?;
            prod_u *= a;
            prod_o *= b;
        }
        self.dead[u] -= 1;
        self.stack.truncate(start);
        let value = (1.0 / (1.0 + lambda * prod_u), 1.0 / (1.0 + lambda * prod_o));
        if let (Some(key), Some(memo)) = (key, self.memo.as_mut()) {
            memo.map.insert(key, value);
        }
        Ok(value)
    }

    // Key: vertex tag, effective depth, sorted codes of the live vertices
    // within distance k+1 of u. Returns false when the set is too large.
    fn build_key(&mut self, u: usize, k: usize) -> bool {
        let reach = k.saturating_add(1);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.queue.clear();
        self.queue.push((u as u32, 0));
        self.stamp[u] = epoch;
        let mut head = 0;
        while head < self.queue.len() {
            let (x, dist) = self.queue[head];
            head += 1;
            if dist == reach {
                continue;
            }
            for &y in &self.g.adj[x as usize] {
                let yi = y as usize;
                if self.dead[yi] == 0 && self.stamp[yi] != epoch {
                    self.stamp[yi] = epoch;
                    self.queue.push((y, dist + 1));
                    if self.queue.len() > self.memo_limit {
                        return false;
                    }
                }
            }
        }
        let size = self.queue.len();
        self.key.clear();
        match &self.g.coding {
            Coding::Absolute => {
                self.key.push(u as u64);
                self.key.push(k.min(size) as u64);
                self.key.extend(self.queue.iter().map(|&(x, _)| x as u64));
            }
            Coding::Relative { pos, class } => {
                let base = pos[u];
                self.key.push(class[u] as u64);
                self.key.push(k.min(size) as u64);
                self.key.extend(self.queue.iter().map(|&(x, _)| {
                    let p = pos[x as usize];
                    let mut code = 0u64;
                    for c in 0..3 {
                        code = (code << 16) | ((p[c] - base[c] + 32768) as u64 & 0xffff);
                    }
                    (code << 16) | class[x as usize] as u64
                }));
            }
            Coding::Unavailable => return false,
        }
        self.key[2..].sort_unstable();
        true
    }
}
