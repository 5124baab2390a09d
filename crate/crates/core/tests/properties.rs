use std::collections::{HashMap, HashSet};

use hardcore::engine::{
    free_energy, weitz_partition_approx, weitz_partition_exact, CertifiedInterval,
};
use hardcore::graph::{blow_up, brute_force_partition, brute_force_partition_with_cap, is_independent, line_graph};
use hardcore::oracle::{power_iteration, transfer_free_energy_1d};
use hardcore::periodic::{ball, lex_past, torus_quotient, CrossEdge, LexOrder, PeriodicVertex};
use hardcore::reductions::{
    entropy, periodic_line_graph, pressure, spectral_radius_safe, SingleSitePotential,
    TransitionSystem,
};
use hardcore::saw::{
    build_tsaw, tree_bounds, NodeState, SawEvaluator, SawGraph, SawNode, DEFAULT_NODE_BUDGET,
};
use hardcore::{ActivityMap, EngineConfig, FiniteGraph, Normalization, PeriodicGraph};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(a.abs())
}

/// Keeps the random edges that respect the degree bound.
fn bounded_graph(n: usize, bits: &[bool], delta: usize) -> FiniteGraph {
    let mut deg = vec![0; n];
    let mut edges = Vec::new();
    let mut k = 0;
    for u in 0..n {
        for v in u + 1..n {
            if bits[k % bits.len()] && deg[u] < delta && deg[v] < delta {
                deg[u] += 1;
                deg[v] += 1;
                edges.push((u, v));
            }
            k += 1;
        }
    }
    FiniteGraph::from_edges(n, &edges).unwrap()
}

fn graph_and_activity(max_n: usize) -> impl Strategy<Value = (FiniteGraph, ActivityMap)> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(prop::bool::weighted(0.4), n * n.saturating_sub(1) / 2 + 1),
                prop::collection::vec(0.01f64..=2.0, n),
            )
        })
        .prop_map(|(n, bits, lam)| (bounded_graph(n, &bits, 4), ActivityMap::new(lam).unwrap()))
}

fn marginal(g: &FiniteGraph, lam: &ActivityMap, v: usize) -> f64 {
    let keep: Vec<bool> = (0..g.vertex_count()).map(|u| u != v).collect();
    let (h, old) = g.induced(&keep);
    brute_force_partition(&h, &lam.select(&old)).unwrap() / brute_force_partition(g, lam).unwrap()
}

fn view(g: &FiniteGraph, lam: &ActivityMap) -> SawGraph {
    SawGraph::from_finite(g, lam, &vec![false; g.vertex_count()]).unwrap()
}

fn count_matchings(g: &FiniteGraph) -> u64 {
    let edges = g.edges();
    (0u64..1 << edges.len())
        .filter(|mask| {
            let mut used = vec![false; g.vertex_count()];
            edges.iter().enumerate().filter(|(e, _)| mask >> e & 1 == 1).all(|(_, &(u, v))| {
                let free = !used[u] && !used[v];
                used[u] = true;
                used[v] = true;
                free
            })
        })
        .count() as u64
}

/// Periodic graph on ℤ with a domain of `n` vertices and the given cross edges.
fn chain_graph(n: usize, internal: &[(usize, usize)], cross: &[(usize, i32, usize)], lam: Vec<f64>) -> PeriodicGraph {
    let cross: Vec<CrossEdge> = cross
        .iter()
        .map(|&(from, step, to)| CrossEdge { from, offset: vec![step], to })
        .collect();
    let labels = (0..n).map(|i| format!("u{i}")).collect();
    PeriodicGraph::new(1, labels, internal, &cross, lam).unwrap()
}

fn periodic_2d() -> impl Strategy<Value = PeriodicGraph> {
    (1..=2usize)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, -1i32..=1, -1i32..=1, 0..n), 1..=3),
            )
        })
        .prop_filter_map("needs a nonzero offset", |(n, raw)| {
            let cross: Vec<CrossEdge> = raw
                .into_iter()
                .filter(|&(_, a, b, _)| (a, b) != (0, 0))
                .map(|(from, a, b, to)| CrossEdge { from, offset: vec![a, b], to })
                .collect();
            let internal = if n == 2 { vec![(0, 1)] } else { vec![] };
            let labels = (0..n).map(|i| format!("u{i}")).collect();
            (!cross.is_empty())
                .then(|| PeriodicGraph::new(2, labels, &internal, &cross, vec![1.0; n]).ok())
                .flatten()
        })
}

fn cycle_key(path: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    // path ends at a vertex seen earlier; split into prefix and closed cycle
    let last = *path.last()?;
    let first = path.iter().position(|&x| x == last)?;
    if first + 1 == path.len() {
        return None;
    }
    Some((path[..=first].to_vec(), path[first..].to_vec()))
}

fn collect_tags(t: &SawNode, path: &mut Vec<usize>, out: &mut HashMap<Vec<usize>, NodeState>) {
    path.push(t.origin);
    if matches!(t.state, NodeState::FixedOccupied | NodeState::FixedUnoccupied) {
        out.insert(path.clone(), t.state);
    }
    for c in &t.children {
        collect_tags(c, path, out);
    }
    path.pop();
}

fn assert_sound(iv: &CertifiedInterval) {
    assert!(iv.lower <= iv.estimate && iv.estimate <= iv.upper, "{iv:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn blow_up_preserves_partition_function(
        (g, lam) in graph_and_activity(12),
        mult in prop::collection::vec(1usize..=3, 12),
    ) {
        let b = &mult[..g.vertex_count()];
        let bu = blow_up(&g, &lam, b).unwrap();
        prop_assert_eq!(bu.graph.vertex_count(), b.iter().sum::<usize>());
        let z = brute_force_partition(&g, &lam).unwrap();
        let zb = brute_force_partition_with_cap(&bu.graph, &bu.activity, 36).unwrap();
        prop_assert!(rel_close(zb, z, 1e-9), "{} vs {}", zb, z);
    }

    #[test]
    fn line_graph_counts_matchings((g, _) in graph_and_activity(9)) {
        prop_assume!(g.edge_count() <= 10);
        let lg = line_graph(&g);
        let ones = ActivityMap::uniform(lg.vertex_count(), 1.0).unwrap();
        let z = brute_force_partition(&lg, &ones).unwrap();
        prop_assert_eq!(z, count_matchings(&g) as f64);
    }

    #[test]
    fn partition_function_elementary_bounds((g, lam) in graph_and_activity(12)) {
        let z = brute_force_partition(&g, &lam).unwrap();
        prop_assert!(z >= 1.0 + lam.values().iter().sum::<f64>() * (1.0 - 1e-12));
        // removing a vertex cannot increase Z
        let keep: Vec<bool> = (0..g.vertex_count()).map(|v| v != 0).collect();
        let (h, old) = g.induced(&keep);
        prop_assert!(brute_force_partition(&h, &lam.select(&old)).unwrap() <= z);
    }

    #[test]
    fn disjoint_unions_multiply((g, lam) in graph_and_activity(7), (h, mu) in graph_and_activity(7)) {
        let n = g.vertex_count();
        let mut edges = g.edges();
        edges.extend(h.edges().into_iter().map(|(a, b)| (a + n, b + n)));
        let u = FiniteGraph::from_edges(n + h.vertex_count(), &edges).unwrap();
        let both = ActivityMap::new([lam.values(), mu.values()].concat()).unwrap();
        let zu = brute_force_partition(&u, &both).unwrap();
        let zz = brute_force_partition(&g, &lam).unwrap() * brute_force_partition(&h, &mu).unwrap();
        prop_assert!(rel_close(zu, zz, 1e-12));
    }

    #[test]
    fn exact_partition_matches_brute_force((g, lam) in graph_and_activity(14)) {
        let z = weitz_partition_exact(&g, &lam).unwrap();
        let bf = brute_force_partition(&g, &lam).unwrap();
        prop_assert!(rel_close(z, bf, 1e-9), "{} vs {}", z, bf);
    }

    #[test]
    fn approximate_partition_contains_truth((g, lam) in graph_and_activity(10), eps in 1e-4f64..0.5) {
        let cfg = EngineConfig { depth_cap: 6, ..Default::default() };
        let bf = brute_force_partition(&g, &lam).unwrap();
        let iv = match weitz_partition_approx(&g, &lam, eps, &cfg) {
            Ok(iv) => {
                prop_assert!(iv.upper <= iv.lower * (1.0 + eps));
                iv
            }
            Err(hardcore::Error::NoConvergence { best, .. }) => *best,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        assert_sound(&iv);
        prop_assert!(iv.contains(bf), "{:?} vs {}", iv, bf);
    }

    #[test]
    fn complete_tree_gives_exact_marginal((g, lam) in graph_and_activity(9), v in 0usize..9) {
        let v = v % g.vertex_count();
        let t = build_tsaw(&view(&g, &lam), v, None, DEFAULT_NODE_BUDGET).unwrap();
        let (q, r) = tree_bounds(&t);
        prop_assert_eq!(q, r);
        prop_assert!(rel_close(q, marginal(&g, &lam, v), 1e-9));
    }

    #[test]
    fn truncated_trees_bracket_and_match_evaluator(
        (g, lam) in graph_and_activity(10),
        v in 0usize..10,
        depth in 0usize..7,
    ) {
        let v = v % g.vertex_count();
        let sg = view(&g, &lam);
        let exact = marginal(&g, &lam, v);
        let t = build_tsaw(&sg, v, Some(depth), DEFAULT_NODE_BUDGET).unwrap();
        let from_tree = tree_bounds(&t);
        let with_memo = SawEvaluator::new(&sg, DEFAULT_NODE_BUDGET, true).bounds(v, Some(depth)).unwrap();
        let without = SawEvaluator::new(&sg, DEFAULT_NODE_BUDGET, false).bounds(v, Some(depth)).unwrap();
        prop_assert_eq!(from_tree, with_memo);
        prop_assert_eq!(from_tree, without);
        let (q, r) = from_tree;
        prop_assert!(q <= exact * (1.0 + 1e-12) && exact <= r * (1.0 + 1e-12), "{} {} {}", q, exact, r);
    }

    #[test]
    fn root_marginal_within_a_priori_bounds((g, lam) in graph_and_activity(10), v in 0usize..10) {
        let v = v % g.vertex_count();
        let (p, _) = SawEvaluator::new(&view(&g, &lam), DEFAULT_NODE_BUDGET, true).bounds(v, None).unwrap();
        let hi = lam.max();
        let lo = lam.min();
        let a = (1.0 + hi).powi(g.max_degree() as i32);
        prop_assert!(p >= 1.0 / (1.0 + hi) * (1.0 - 1e-12));
        prop_assert!(p <= a / (lo + a) * (1.0 + 1e-12));
    }

    #[test]
    fn cycle_orientations_get_opposite_tags((g, lam) in graph_and_activity(7), v in 0usize..7) {
        let v = v % g.vertex_count();
        let t = build_tsaw(&view(&g, &lam), v, None, DEFAULT_NODE_BUDGET).unwrap();
        let mut tags = HashMap::new();
        collect_tags(&t, &mut Vec::new(), &mut tags);
        for (path, state) in &tags {
            let (prefix, cycle) = cycle_key(path).expect("tags close a cycle");
            let mut reversed = prefix.clone();
            reversed.extend(cycle[1..].iter().rev().skip(1));
            reversed.push(*prefix.last().unwrap());
            if let Some(other) = tags.get(&reversed) {
                prop_assert_ne!(state, other, "{:?} vs {:?}", path, reversed);
            }
        }
    }

    #[test]
    fn independence_check_agrees_with_edges((g, _) in graph_and_activity(10), bits in prop::collection::vec(any::<bool>(), 10)) {
        let s = &bits[..g.vertex_count()];
        let expected = g.edges().iter().all(|&(u, v)| !(s[u] && s[v]));
        prop_assert_eq!(is_independent(&g, s).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lex_past_is_a_translation_invariant_total_order(
        a in prop::collection::vec(-3i32..=3, 3),
        b in prop::collection::vec(-3i32..=3, 3),
        c in prop::collection::vec(-3i32..=3, 3),
    ) {
        let o = LexOrder { d: 3 };
        let sub = |x: &[i32], y: &[i32]| -> Vec<i32> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
        let neg: Vec<i32> = a.iter().map(|x| -x).collect();
        if a.iter().any(|&x| x != 0) {
            prop_assert!(lex_past(&o, &a) ^ lex_past(&o, &neg));
        } else {
            prop_assert!(!lex_past(&o, &a));
        }
        // a ≺ b ⇔ a − b ∈ past; transitivity on triples
        let less = |x: &[i32], y: &[i32]| lex_past(&o, &sub(x, y));
        if less(&a, &b) && less(&b, &c) {
            prop_assert!(less(&a, &c));
        }
        let shift = |x: &[i32]| -> Vec<i32> { x.iter().zip(&c).map(|(p, q)| p + q).collect() };
        prop_assert_eq!(less(&a, &b), less(&shift(&a), &shift(&b)));
    }

    #[test]
    fn neighbor_lists_are_translation_invariant(pg in periodic_2d(), g in prop::collection::vec(-5i32..=5, 2), u in 0usize..2) {
        let u = u % pg.domain_size();
        let at_origin = pg.neighbors(&PeriodicVertex::origin(2, u));
        let shifted: Vec<PeriodicVertex> = at_origin
            .iter()
            .map(|w| PeriodicVertex::new(w.offset.iter().zip(&g).map(|(a, b)| a + b).collect(), w.index))
            .collect();
        prop_assert_eq!(pg.neighbors(&PeriodicVertex::new(g, u)), shifted);
    }

    #[test]
    fn balls_are_nested_and_degree_bounded(pg in periodic_2d(), radius in 1usize..5) {
        let center = PeriodicVertex::origin(2, 0);
        let big = ball(&pg, &center, radius, &HashSet::new()).unwrap();
        let small = ball(&pg, &center, radius - 1, &HashSet::new()).unwrap();
        let inner: HashSet<_> = big
            .vertices
            .iter()
            .zip(&big.distance)
            .filter(|(_, &d)| d < radius)
            .map(|(w, _)| w.clone())
            .collect();
        prop_assert_eq!(inner, small.vertices.iter().cloned().collect::<HashSet<_>>());
        prop_assert!(big.graph.max_degree() <= pg.max_degree());
        let (torus, _) = torus_quotient(&pg, &[5, 5]).unwrap();
        prop_assert_eq!(torus.max_degree(), pg.max_degree());
    }

    #[test]
    fn disjoint_copies_do_not_change_per_vertex_free_energy(
        steps in prop::collection::btree_set(1i32..=2, 1..=2),
        lambda in 0.1f64..2.0,
        copies in 2usize..=3,
    ) {
        let steps: Vec<i32> = steps.into_iter().collect();
        let single = chain_graph(1, &[], &steps.iter().map(|&s| (0, s, 0)).collect::<Vec<_>>(), vec![lambda]);
        let cross: Vec<_> = (0..copies).flat_map(|i| steps.iter().map(move |&s| (i, s, i))).collect();
        let packed = chain_graph(copies, &[], &cross, vec![lambda; copies]);
        let cfg = EngineConfig::default();
        let f1 = free_energy(&single, 1e-5, &cfg).unwrap();
        let fn_ = free_energy(&packed, 1e-5, &cfg).unwrap();
        prop_assert!(rel_close(f1.lower, fn_.lower, 1e-12) && rel_close(f1.upper, fn_.upper, 1e-12));
        let per_group = EngineConfig { normalization: Normalization::PerGroupElement, ..cfg };
        let fg = free_energy(&packed, 1e-5 * copies as f64, &per_group).unwrap();
        prop_assert!(fg.contains(copies as f64 * f1.estimate) || rel_close(fg.estimate, copies as f64 * f1.estimate, 1e-6));
        let exact = transfer_free_energy_1d(&single).unwrap();
        prop_assert!(f1.contains(exact) && fn_.contains(exact));
    }

    #[test]
    fn torus_matchings_are_line_graph_independent_sets(
        cross in prop::collection::vec((0usize..2, 1i32..=2, 0usize..2), 1..=3),
        len in 5usize..=6,
    ) {
        let pg = chain_graph(2, &[(0, 1)], &cross, vec![1.0, 1.0]);
        let orbits = pg.edge_orbits().len();
        let lg = periodic_line_graph(&pg, &vec![1.0; orbits]).unwrap();
        let (torus, _) = torus_quotient(&pg, &[len]).unwrap();
        prop_assume!(torus.edge_count() <= 22);
        let (ltorus, lam) = torus_quotient(&lg, &[len]).unwrap();
        prop_assert_eq!(ltorus.vertex_count(), torus.edge_count());
        prop_assert_eq!(brute_force_partition(&ltorus, &lam).unwrap(), count_matchings(&torus) as f64);
    }
}

fn safe_matrix() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..=6).prop_flat_map(|k| {
        prop::collection::vec(prop::bool::weighted(0.6), k * k).prop_map(move |bits| {
            (0..k)
                .map(|a| (0..k).map(|b| u8::from(a == 0 || b == 0 || bits[a * k + b])).collect())
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn spectral_radius_brackets_power_iteration(m in safe_matrix()) {
        let dense: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
        let rho = power_iteration(&dense).unwrap();
        // large alphabets sit near criticality; a small budget keeps this quick
        let cfg = EngineConfig { node_budget: 200_000, ..Default::default() };
        match spectral_radius_safe(&m, 0, 1e-4, &cfg) {
            Ok(iv) => {
                prop_assert!(iv.contains(rho), "{:?} vs {}", iv, rho);
                prop_assert!(iv.width() <= 1e-4);
            }
            Err(hardcore::Error::NoConvergence { best, .. }) => prop_assert!(best.contains(rho)),
            Err(hardcore::Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn zero_potential_pressure_is_entropy(m in safe_matrix()) {
        prop_assume!(m.len() <= 4);
        let ts = TransitionSystem::from_matrix(m.clone()).unwrap();
        let cfg = EngineConfig::default();
        let h = entropy(&ts, 1e-3, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let p = pressure(&ts, &SingleSitePotential::zero(m.len()), 1e-3, &cfg).unwrap();
        prop_assert_eq!(h, p);
    }
}

#[test]
fn transfer_oracle_matches_finite_tori() {
    // golden chain: log Z(C_L)/L → log φ
    let pg = chain_graph(1, &[], &[(0, 1, 0)], vec![1.0]);
    let exact = transfer_free_energy_1d(&pg).unwrap();
    let mut last = f64::INFINITY;
    for len in [8, 12, 16, 20] {
        let (c, lam) = torus_quotient(&pg, &[len]).unwrap();
        let f = brute_force_partition(&c, &lam).unwrap().ln() / len as f64;
        let err = (f - exact).abs();
        assert!(err < last, "error {err} at L = {len}");
        last = err;
    }
    assert!(last < 1e-3);
}
