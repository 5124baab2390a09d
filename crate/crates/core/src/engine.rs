//! Partition functions of finite hardcore models by telescoping walk-tree
//! marginals, and certified free energies of periodic hardcore models.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{count_saw, estimate_connective_constant, ActivityMap, FiniteGraph};
use crate::numeric::CompensatedSum;
use crate::periodic::{ball_where, lex_past, LexOrder, PeriodicGraph, PeriodicVertex};
use crate::saw::{MemoTable, SawEvaluator, SawGraph, DEFAULT_NODE_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the number of vertices of the periodic graph.
    PerVertex,
    /// Per translate of the fundamental domain (per-vertex value times n).
    PerGroupElement,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub start_depth: usize,
    pub depth_step: usize,
    pub depth_cap: usize,
    /// Per factor and per depth: walk-tree nodes visited, memo hits included.
    pub node_budget: u64,
    pub memo: bool,
    pub normalization: Normalization,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            start_depth: 4,
            depth_step: 2,
            depth_cap: 40,
            node_budget: DEFAULT_NODE_BUDGET,
            memo: true,
            normalization: Normalization::PerVertex,
        }
    }
}

impl EngineConfig {
    fn validate(&self) -> Result<()> {
        if self.depth_step == 0 {
            return invalid("depth step must be positive");
        }
        if self.depth_cap < 2 {
            return invalid("depth cap must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorReport {
    pub i: usize,
    pub q: f64,
    pub r: f64,
    pub depth: usize,
    #[serde(skip)]
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedInterval {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub depth_used: usize,
    pub factors: Vec<FactorReport>,
}

impl CertifiedInterval {
    fn new(lower: f64, upper: f64, factors: Vec<FactorReport>) -> Self {
        CertifiedInterval {
            lower,
            upper,
            estimate: lower + (upper - lower) / 2.0,
            depth_used: factors.iter().map(|f| f.depth).max().unwrap_or(0),
            factors,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Image under an increasing map.
    pub fn map_monotone(&self, f: impl Fn(f64) -> f64) -> Self {
        let (lower, upper) = (f(self.lower), f(self.upper));
        CertifiedInterval {
            lower,
            upper,
            estimate: lower + (upper - lower) / 2.0,
            depth_used: self.depth_used,
            factors: self.factors.clone(),
        }
    }
}

/// Relative floating-point error allowance; certified intervals are widened
/// outward by this much (scaled) so exact brackets survive rounding.
const ROUNDING_PAD: f64 = 64.0 * f64::EPSILON;

/// λ_c(t) = (t−1)^{t−1}/(t−2)^t for t > 2, +∞ otherwise.
pub fn lambda_c(delta: usize) -> f64 {
    if delta <= 2 {
        return f64::INFINITY;
    }
    let t = delta as i32;
    (t as f64 - 1.0).powi(t - 1) / (t as f64 - 2.0).powi(t)
}

/// λ_c at a real argument, used with connective-constant estimates.
pub fn lambda_c_real(t: f64) -> f64 {
    if t <= 2.0 {
        return f64::INFINITY;
    }
    ((t - 1.0) * (t - 1.0).ln() - t * (t - 2.0).ln()).exp()
}

/// Z = ∏ 1/p_i, where p_i is the exact probability that v_i is unoccupied in
/// the graph with v_1..v_{i−1} removed.
pub fn weitz_partition_exact(g: &FiniteGraph, lambda: &ActivityMap) -> Result<f64> {
    weitz_partition_exact_with(g, lambda, &EngineConfig::default())
}

pub fn weitz_partition_exact_with(
    g: &FiniteGraph,
    lambda: &ActivityMap,
    cfg: &EngineConfig,
) -> Result<f64> {
    let p = telescoping_marginals(g, lambda, cfg)?;
    let z = multiply_inverses(&p);
    // with integral activities Z is an integer; snap off the rounding residue
    let integral = lambda.values().iter().all(|x| x.fract() == 0.0);
    let nearest = z.round();
    if integral && nearest < 9.0e15 && (z - nearest).abs() <= 1e-9 * nearest {
        return Ok(nearest);
    }
    Ok(z)
}

/// The exact telescoping factors p_i.
pub fn telescoping_marginals(
    g: &FiniteGraph,
    lambda: &ActivityMap,
    cfg: &EngineConfig,
) -> Result<Vec<f64>> {
    lambda.check_len(g)?;
    let n = g.vertex_count();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let deleted: Vec<bool> = (0..n).map(|v| v < i).collect();
            let view = SawGraph::from_finite(g, lambda, &deleted)?;
            let (q, _) = SawEvaluator::new(&view, cfg.node_budget, cfg.memo).bounds(i, None)?;
            Ok(q)
        })
        .collect()
}

// Direct product for small graphs, log-space beyond 40 factors.
fn multiply_inverses(p: &[f64]) -> f64 {
    if p.len() <= 40 {
        p.iter().fold(1.0, |z, &x| z / x)
    } else {
        p.iter()
            .map(|x| -x.ln())
            .collect::<CompensatedSum>()
            .value()
            .exp()
    }
}

enum FactorOutcome {
    Converged(FactorReport),
    Stalled(FactorReport, String),
}

impl FactorOutcome {
    fn report(&self) -> &FactorReport {
        match self {
            FactorOutcome::Converged(r) | FactorOutcome::Stalled(r, _) => r,
        }
    }
}

// Deepens the tree until `done(q, r)` or the cap. `evaluate(depth, memo)`
// runs one depth and hands the memo back.
fn adaptive_factor(
    i: usize,
    cfg: &EngineConfig,
    done: impl Fn(f64, f64) -> bool,
    mut evaluate: impl FnMut(usize, Option<MemoTable>) -> (Result<(f64, f64)>, u64, Option<MemoTable>),
) -> Result<FactorOutcome> {
    let mut memo = cfg.memo.then(MemoTable::new);
    let mut best: Option<FactorReport> = None;
    let mut depth = cfg.start_depth.min(cfg.depth_cap);
    loop {
        let (res, nodes, back) = evaluate(depth, memo.take());
        memo = back;
        let (q, r) = match res {
            Ok(b) => b,
            Err(Error::BudgetExceeded { budget }) => {
                return match best {
                    Some(b) => Ok(FactorOutcome::Stalled(
                        b,
                        format!("node budget {budget} exceeded at depth {depth}"),
                    )),
                    None => Err(Error::BudgetExceeded { budget }),
                }
            }
            Err(e) => return Err(e),
        };
        // every depth gives a valid bracket; keep the intersection
        let (q, r) = match &best {
            Some(b) => (q.max(b.q), r.min(b.r)),
            None => (q, r),
        };
        let report = FactorReport { i, q, r, depth, nodes };
        if q == r || done(q, r) {
            return Ok(FactorOutcome::Converged(report));
        }
        best = Some(report);
        if depth >= cfg.depth_cap {
            return Ok(FactorOutcome::Stalled(
                best.expect("set above"),
                format!("depth cap {} reached", cfg.depth_cap),
            ));
        }
        depth = (depth + cfg.depth_step).min(cfg.depth_cap);
    }
}

fn finish(
    outcomes: Vec<Result<FactorOutcome>>,
    interval: impl FnOnce(&[FactorReport]) -> (f64, f64),
) -> Result<CertifiedInterval> {
    let outcomes: Vec<FactorOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let reports: Vec<FactorReport> = outcomes.iter().map(|o| o.report().clone()).collect();
    let (lower, upper) = interval(&reports);
    let result = CertifiedInterval::new(lower, upper, reports);
    let stalled: Vec<String> = outcomes
        .iter()
        .filter_map(|o| match o {
            FactorOutcome::Stalled(r, why) => Some(format!("factor {}: {why}", r.i)),
            FactorOutcome::Converged(_) => None,
        })
        .collect();
    if stalled.is_empty() {
        Ok(result)
    } else {
        Err(Error::NoConvergence {
            reason: stalled.join("; "),
            best: Box::new(result),
        })
    }
}

/// Certified [∏1/r̂_i, ∏1/q̂_i] with upper/lower ≤ 1+ε on success.
pub fn weitz_partition_approx(
    g: &FiniteGraph,
    lambda: &ActivityMap,
    epsilon: f64,
    cfg: &EngineConfig,
) -> Result<CertifiedInterval> {
    lambda.check_len(g)?;
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    let n = g.vertex_count();
    let pad = ROUNDING_PAD * (n + 1) as f64;
    let budget = (1.0 + epsilon).ln() * (1.0 - 1e-9) - 2.0 * pad;
    if budget <= 0.0 {
        return invalid("epsilon is below floating-point resolution");
    }
    let slack = (budget / n.max(1) as f64).exp();
    let outcomes: Vec<Result<FactorOutcome>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let deleted: Vec<bool> = (0..n).map(|v| v < i).collect();
            let view = SawGraph::from_finite(g, lambda, &deleted)?;
            adaptive_factor(i, cfg, |q, r| r <= q * slack, |depth, memo| {
                let mut ev = SawEvaluator::with_memo(&view, cfg.node_budget, memo);
                let res = ev.bounds(i, Some(depth));
                (res, ev.nodes(), ev.into_memo())
            })
        })
        .collect();
    finish(outcomes, |f| {
        let lower = f.iter().fold(1.0, |z, x| z / x.r);
        let upper = f.iter().fold(1.0, |z, x| z / x.q);
        (lower * (1.0 - pad), upper * (1.0 + pad))
    })
}

/// Certified ε-additive free energy of a periodic hardcore model.
///
/// Factor i is the unoccupation probability of (0, v_i) in the graph with all
/// lexicographically past translates of the domain and (0, v_1..v_{i−1})
/// removed; f = (1/n)·Σ −log p_i.
pub fn free_energy(pg: &PeriodicGraph, epsilon: f64, cfg: &EngineConfig) -> Result<CertifiedInterval> {
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    let n = pg.domain_size();
    let d = pg.dimension();
    let scale = match cfg.normalization {
        Normalization::PerVertex => 1.0,
        Normalization::PerGroupElement => n as f64,
    };
    // f ≤ scale·log(1+λ₊), which bounds the rounding error of the sums
    let pad = ROUNDING_PAD * (1.0 + scale * pg.max_activity().ln_1p());
    let target = (epsilon * (1.0 - 1e-9) - 2.0 * pad) / scale;
    if target <= 0.0 {
        return invalid("epsilon is below floating-point resolution");
    }
    let order = LexOrder { d };
    let outcomes: Vec<Result<FactorOutcome>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let root = PeriodicVertex::origin(d, i);
            let deleted = |w: &PeriodicVertex| {
                lex_past(&order, &w.offset) || (w.index < i && w.offset.iter().all(|&c| c == 0))
            };
            adaptive_factor(i, cfg, |q, r| (r / q).ln() <= target, |depth, memo| {
                let ball = match ball_where(pg, &root, depth + 1, deleted) {
                    Ok(b) => b,
                    Err(e) => return (Err(e), 0, memo),
                };
                let view = SawGraph::from_ball(&ball);
                let mut ev = SawEvaluator::with_memo(&view, cfg.node_budget, memo);
                let res = ev.bounds(0, Some(depth));
                (res, ev.nodes(), ev.into_memo())
            })
        })
        .collect();
    finish(outcomes, |f| {
        if f.is_empty() {
            return (0.0, 0.0);
        }
        let norm = scale / n as f64;
        let lower = f.iter().map(|x| -x.r.ln()).collect::<CompensatedSum>().value() * norm;
        let upper = f.iter().map(|x| -x.q.ln()).collect::<CompensatedSum>().value() * norm;
        (lower - pad, upper + pad)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Unknown,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalActivityReport {
    pub max_degree: usize,
    pub lambda_c_of_degree: f64,
    pub lambda_plus: f64,
    pub regime: Regime,
    /// Connective-constant estimate (not certified) and λ_c(μ̂+1); present
    /// when the degree test alone is inconclusive.
    pub mu_hat: Option<f64>,
    pub lambda_c_of_mu: Option<f64>,
    pub saw_depth: Option<usize>,
}

/// Largest total number of walks counted for the μ̂ estimate.
const SAW_COUNT_BUDGET: u64 = 2_000_000;

// Deepest ℓ ≤ max_depth with the walk count within budget, starting from
// vertex 0 of `g`.
fn budgeted_saw_counts(g: &FiniteGraph, v: usize, max_depth: usize) -> Result<Vec<u64>> {
    let mut counts = count_saw(g, v, 1)?;
    let branching = g.max_degree().saturating_sub(1).max(1) as u64;
    while counts.len() < max_depth {
        let last = *counts.last().expect("non-empty");
        if last == 0 || last.saturating_mul(branching) > SAW_COUNT_BUDGET {
            break;
        }
        counts = count_saw(g, v, counts.len() + 1)?;
    }
    Ok(counts)
}

fn classify(
    max_degree: usize,
    lambda_plus: f64,
    mu: impl FnOnce() -> Result<Option<(f64, usize)>>,
) -> Result<CriticalActivityReport> {
    let lc = lambda_c(max_degree);
    let mut report = CriticalActivityReport {
        max_degree,
        lambda_c_of_degree: lc,
        lambda_plus,
        regime: Regime::Subcritical,
        mu_hat: None,
        lambda_c_of_mu: None,
        saw_depth: None,
    };
    if lambda_plus < lc {
        return Ok(report);
    }
    report.regime = Regime::Supercritical;
    if let Some((mu_hat, depth)) = mu()? {
        let lcm = lambda_c_real(mu_hat + 1.0);
        report.mu_hat = Some(mu_hat);
        report.lambda_c_of_mu = Some(lcm);
        report.saw_depth = Some(depth);
        if lambda_plus < lcm {
            report.regime = Regime::Unknown;
        }
    }
    Ok(report)
}

/// Regime of a finite model from Δ, λ₊ and, when needed, μ̂ from walk counts
/// up to `saw_depth` (maximized over start vertices).
pub fn regime_report_finite(
    g: &FiniteGraph,
    lambda: &ActivityMap,
    saw_depth: usize,
) -> Result<CriticalActivityReport> {
    lambda.check_len(g)?;
    classify(g.max_degree(), lambda.max(), || {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..g.vertex_count() {
            let counts = budgeted_saw_counts(g, v, saw_depth.max(1))?;
            if let Ok(mu) = estimate_connective_constant(&counts) {
                if best.is_none_or(|(m, _)| mu > m) {
                    best = Some((mu, counts.len()));
                }
            }
        }
        Ok(best)
    })
}

/// Regime of a periodic model; μ̂ is maximized over the domain vertices.
pub fn regime_report_periodic(pg: &PeriodicGraph, saw_depth: usize) -> Result<CriticalActivityReport> {
    classify(pg.max_degree(), pg.max_activity(), || {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..pg.domain_size() {
            let root = PeriodicVertex::origin(pg.dimension(), i);
            let ball = ball_where(pg, &root, saw_depth.max(1), |_| false)?;
            let counts = budgeted_saw_counts(&ball.graph, 0, saw_depth.max(1))?;
            if let Ok(mu) = estimate_connective_constant(&counts) {
                if best.is_none_or(|(m, _)| mu > m) {
                    best = Some((mu, counts.len()));
                }
            }
        }
        Ok(best)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::CrossEdge;

    fn chain(lambda: f64) -> PeriodicGraph {
        let cross = [CrossEdge { from: 0, offset: vec![1], to: 0 }];
        PeriodicGraph::new(1, vec!["v".into()], &[], &cross, vec![lambda]).unwrap()
    }

    #[test]
    fn critical_activity_values() {
        assert_eq!(lambda_c(6), 3125.0 / 4096.0);
        assert_eq!(lambda_c(4), 27.0 / 16.0);
        assert_eq!(lambda_c(3), 4.0);
        assert!(lambda_c(2).is_infinite() && lambda_c(1).is_infinite());
        assert!((lambda_c_real(4.0) - 1.6875).abs() < 1e-12);
        assert!(lambda_c_real(1.5).is_infinite());
    }

    #[test]
    fn small_exact_partitions() {
        let c4 = FiniteGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(weitz_partition_exact(&c4, &ActivityMap::uniform(4, 1.0).unwrap()).unwrap(), 7.0);
        let k3 = FiniteGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(weitz_partition_exact(&k3, &ActivityMap::uniform(3, 1.0).unwrap()).unwrap(), 4.0);
        let edge = FiniteGraph::from_edges(2, &[(0, 1)]).unwrap();
        let z = weitz_partition_exact(&edge, &ActivityMap::new(vec![2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(z, 6.0);
        assert_eq!(weitz_partition_exact(&FiniteGraph::empty(0), &ActivityMap::new(vec![]).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn golden_chain() {
        let f = free_energy(&chain(1.0), 1e-6, &EngineConfig::default()).unwrap();
        let target = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!(f.contains(target), "{f:?}");
        assert!(f.width() <= 1e-6);
    }

    #[test]
    fn isolated_sites() {
        let pg = PeriodicGraph::new(1, vec!["v".into()], &[], &[], vec![1.0]).unwrap();
        let f = free_energy(&pg, 1e-9, &EngineConfig::default()).unwrap();
        assert!(f.contains(2f64.ln()));
        assert!(f.width() <= 1e-13, "{f:?}");
    }

    #[test]
    fn empty_domain_has_zero_free_energy() {
        let pg = PeriodicGraph::new(2, vec![], &[], &[], vec![]).unwrap();
        let f = free_energy(&pg, 1e-3, &EngineConfig::default()).unwrap();
        assert_eq!((f.lower, f.upper), (0.0, 0.0));
    }

    #[test]
    fn depth_cap_gives_no_convergence() {
        let cfg = EngineConfig {
            depth_cap: 4,
            ..EngineConfig::default()
        };
        match free_energy(&chain(1.0), 1e-12, &cfg) {
            Err(Error::NoConvergence { best, .. }) => {
                assert!(best.contains(((1.0 + 5f64.sqrt()) / 2.0).ln()));
                assert_eq!(best.depth_used, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn regimes() {
        let grid = crate::periodic::tests::grid(2, 1.0);
        assert_eq!(regime_report_periodic(&grid, 6).unwrap().regime, Regime::Subcritical);
        let hot = grid.with_activities(vec![3.0]).unwrap();
        let rep = regime_report_periodic(&hot, 8).unwrap();
        assert_eq!(rep.regime, Regime::Supercritical);
        assert!(rep.mu_hat.unwrap() > 2.5);
        assert_eq!(regime_report_periodic(&chain(100.0), 6).unwrap().regime, Regime::Subcritical);
    }
}
