//! Nearest-neighbor shifts of finite type with safe symbols as hardcore
//! models: entropy, pressure, constraintedness, monomer-dimer free energy and
//! spectral radii of 0-1 matrices.
//!
//! Every safe symbol is collapsed into "no vertex occupied", so the domain of
//! the reduction graph has one vertex per unsafe symbol. Writing
//! W = Σ_{safe s} e^{φ(s)} and giving unsafe symbol a the activity
//! e^{φ(a)}/W, the pressure per site is log W + n_u·f, with f the per-vertex
//! free energy of the reduction graph.

use serde::Serialize;

use crate::engine::{
    free_energy, lambda_c, lambda_c_real, CertifiedInterval, EngineConfig, Normalization,
};
use crate::error::{invalid, Error, Result};
use crate::graph::{count_saw, estimate_connective_constant};
use crate::periodic::{ball_where, CrossEdge, PeriodicGraph, PeriodicVertex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    alphabet: Vec<String>,
    d: usize,
    /// M_k for the positive generators e_1..e_d; M_{−k} is the transpose.
    matrices: Vec<Vec<Vec<u8>>>,
}

impl TransitionSystem {
    pub fn new(alphabet: Vec<String>, d: usize, matrices: Vec<Vec<Vec<u8>>>) -> Result<Self> {
        let k = alphabet.len();
        if k == 0 {
            return invalid("empty alphabet");
        }
        if d == 0 {
            return invalid("dimension must be positive");
        }
        if matrices.len() != d {
            return invalid(format!("expected {d} matrices, got {}", matrices.len()));
        }
        for (i, m) in matrices.iter().enumerate() {
            if m.len() != k || m.iter().any(|row| row.len() != k) {
                return invalid(format!("matrix e{} must be {k}×{k}", i + 1));
            }
            if m.iter().flatten().any(|&x| x > 1) {
                return invalid(format!("matrix e{} must be 0-1", i + 1));
            }
        }
        Ok(TransitionSystem { alphabet, d, matrices })
    }

    /// One-dimensional system from a single matrix, symbols named "0".."k−1".
    pub fn from_matrix(m: Vec<Vec<u8>>) -> Result<Self> {
        let alphabet = (0..m.len()).map(|i| i.to_string()).collect();
        Self::new(alphabet, 1, vec![m])
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn matrices(&self) -> &[Vec<Vec<u8>>] {
        &self.matrices
    }

    pub fn allowed(&self, k: usize, a: usize, b: usize) -> bool {
        self.matrices[k][a][b] == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleSitePotential(pub Vec<f64>);

impl SingleSitePotential {
    pub fn zero(k: usize) -> Self {
        SingleSitePotential(vec![0.0; k])
    }
}

pub fn find_safe_symbols(ts: &TransitionSystem) -> Vec<usize> {
    (0..ts.alphabet.len())
        .filter(|&a| {
            ts.matrices
                .iter()
                .all(|m| m[a].iter().all(|&x| x == 1) && m.iter().all(|row| row[a] == 1))
        })
        .collect()
}

struct Split {
    safe: Vec<usize>,
    unsafe_: Vec<usize>,
    log_w: f64,
}

fn split(ts: &TransitionSystem, phi: &SingleSitePotential) -> Result<Split> {
    if phi.0.len() != ts.alphabet.len() {
        return invalid("potential length does not match alphabet");
    }
    if phi.0.iter().any(|x| !x.is_finite()) {
        return invalid("potential values must be finite");
    }
    let safe = find_safe_symbols(ts);
    if safe.is_empty() {
        return Err(Error::NotReducible("no safe symbol".into()));
    }
    if !safe.iter().any(|&s| phi.0[s] == 0.0) {
        return Err(Error::NotReducible(
            "no vacuum state (safe symbol with zero potential)".into(),
        ));
    }
    let unsafe_ = (0..ts.alphabet.len()).filter(|a| !safe.contains(a)).collect();
    let log_w = {
        let m = safe.iter().map(|&s| phi.0[s]).fold(f64::NEG_INFINITY, f64::max);
        m + safe.iter().map(|&s| (phi.0[s] - m).exp()).sum::<f64>().ln()
    };
    Ok(Split { safe, unsafe_, log_w })
}

/// The periodic hardcore model of a system with a vacuum state: one domain
/// vertex per unsafe symbol forming a clique, and an edge from (0, a) to
/// (e_k, b) whenever M_k(a, b) = 0.
pub fn hardcore_reduction(ts: &TransitionSystem, phi: &SingleSitePotential) -> Result<PeriodicGraph> {
    let s = split(ts, phi)?;
    let n = s.unsafe_.len();
    let mut internal = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            internal.push((i, j));
        }
    }
    let mut cross = Vec::new();
    for (k, m) in ts.matrices.iter().enumerate() {
        let mut offset = vec![0; ts.d];
        offset[k] = 1;
        for (i, &a) in s.unsafe_.iter().enumerate() {
            for (j, &b) in s.unsafe_.iter().enumerate() {
                if m[a][b] == 0 {
                    cross.push(CrossEdge {
                        from: i,
                        offset: offset.clone(),
                        to: j,
                    });
                }
            }
        }
    }
    let labels = s.unsafe_.iter().map(|&a| ts.alphabet[a].clone()).collect();
    let activity = s.unsafe_.iter().map(|&a| (phi.0[a] - s.log_w).exp()).collect();
    PeriodicGraph::new(ts.d, labels, &internal, &cross, activity)
}

/// Topological entropy per site.
pub fn entropy(ts: &TransitionSystem, epsilon: f64, cfg: &EngineConfig) -> Result<CertifiedInterval> {
    pressure(ts, &SingleSitePotential::zero(ts.alphabet.len()), epsilon, cfg)
}

/// Pressure per site: log W + n_u·f(reduction graph).
pub fn pressure(
    ts: &TransitionSystem,
    phi: &SingleSitePotential,
    epsilon: f64,
    cfg: &EngineConfig,
) -> Result<CertifiedInterval> {
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    let s = split(ts, phi)?;
    let n_u = s.unsafe_.len() as f64;
    let pg = hardcore_reduction(ts, phi)?;
    let cfg = EngineConfig {
        normalization: Normalization::PerVertex,
        ..cfg.clone()
    };
    let rescale = |f: &CertifiedInterval| f.map_monotone(|x| s.log_w + n_u * x);
    match free_energy(&pg, epsilon / n_u.max(1.0), &cfg) {
        Ok(f) => Ok(rescale(&f)),
        Err(Error::NoConvergence { reason, best }) => Err(Error::NoConvergence {
            reason,
            best: Box::new(rescale(&best)),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintednessReport {
    pub safe_symbols: usize,
    pub unsafe_symbols: usize,
    /// Activity 1/n_s of the reduction graph.
    pub activity: f64,
    pub max_degree: usize,
    pub degree_bound: usize,
    pub lambda_c_of_degree: f64,
    pub mu_hat: Option<f64>,
    pub lambda_c_of_mu: Option<f64>,
    pub saw_depth: usize,
    /// 1/n_s < λ_c(Δ).
    pub degree_condition: bool,
    /// 1/n_s < λ_c(μ̂+1); not certified.
    pub mu_condition: bool,
}

/// Connective-constant estimate of the reduction graph (after collapsing the
/// safe symbols) and the two sufficient uniqueness conditions.
pub fn constraintedness(ts: &TransitionSystem, saw_depth: usize) -> Result<ConstraintednessReport> {
    let phi = SingleSitePotential::zero(ts.alphabet.len());
    let s = split(ts, &phi)?;
    let pg = hardcore_reduction(ts, &phi)?;
    let n_u = s.unsafe_.len();
    let lambda = 1.0 / s.safe.len() as f64;
    let max_degree = pg.max_degree();
    let mut mu_hat: Option<f64> = None;
    for i in 0..n_u {
        let ball = ball_where(&pg, &PeriodicVertex::origin(ts.d, i), saw_depth.max(1), |_| false)?;
        let counts = count_saw(&ball.graph, 0, saw_depth.max(1))?;
        if let Ok(mu) = estimate_connective_constant(&counts) {
            mu_hat = Some(mu_hat.map_or(mu, |m: f64| m.max(mu)));
        }
    }
    let lc = lambda_c(max_degree);
    let lcm = mu_hat.map(|m| lambda_c_real(m + 1.0));
    Ok(ConstraintednessReport {
        safe_symbols: s.safe.len(),
        unsafe_symbols: n_u,
        activity: lambda,
        max_degree,
        degree_bound: ((2 * ts.d + 1) * n_u).saturating_sub(1),
        lambda_c_of_degree: lc,
        mu_hat,
        lambda_c_of_mu: lcm,
        saw_depth: saw_depth.max(1),
        degree_condition: lambda < lc,
        mu_condition: lcm.map_or(true, |l| lambda < l),
    })
}

/// The line graph of a periodic graph: one domain vertex per edge orbit (see
/// [`PeriodicGraph::edge_orbits`]), adjacent when the edges share an endpoint.
pub fn periodic_line_graph(pg: &PeriodicGraph, edge_activity: &[f64]) -> Result<PeriodicGraph> {
    let orbits = pg.edge_orbits();
    if edge_activity.len() != orbits.len() {
        return invalid(format!(
            "expected {} edge activities, got {}",
            orbits.len(),
            edge_activity.len()
        ));
    }
    let d = pg.dimension();
    let sub = |a: &[i32], b: &[i32]| -> Vec<i32> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let zero = vec![0; d];
    let mut internal = Vec::new();
    let mut cross = Vec::new();
    for (e, ee) in orbits.iter().enumerate() {
        for (f, ff) in orbits.iter().enumerate() {
            // translate γ with (γ + endpoint of f) = endpoint of e
            let ends_e = [(zero.clone(), ee.from), (ee.offset.clone(), ee.to)];
            let ends_f = [(zero.clone(), ff.from), (ff.offset.clone(), ff.to)];
            for (pe, ue) in &ends_e {
                for (pf, uf) in &ends_f {
                    if ue != uf {
                        continue;
                    }
                    let gamma = sub(pe, pf);
                    if gamma == zero {
                        if e < f {
                            internal.push((e, f));
                        }
                    } else {
                        cross.push(CrossEdge {
                            from: e,
                            offset: gamma,
                            to: f,
                        });
                    }
                }
            }
        }
    }
    let labels = orbits
        .iter()
        .map(|o| {
            let off: Vec<String> = o.offset.iter().map(i32::to_string).collect();
            format!("{}-{}@{}", pg.labels()[o.from], pg.labels()[o.to], off.join(","))
        })
        .collect();
    PeriodicGraph::new(d, labels, &internal, &cross, edge_activity.to_vec())
}

/// Monomer-dimer free energy per edge orbit vertex, as the hardcore free
/// energy of the periodic line graph.
pub fn monomer_dimer_free_energy(
    pg: &PeriodicGraph,
    edge_activity: &[f64],
    epsilon: f64,
    cfg: &EngineConfig,
) -> Result<CertifiedInterval> {
    free_energy(&periodic_line_graph(pg, edge_activity)?, epsilon, cfg)
}

/// Spectral radius of a 0-1 matrix with a safe symbol `a`, as exp of the
/// entropy of the one-dimensional shift it defines.
pub fn spectral_radius_safe(
    m: &[Vec<u8>],
    a: usize,
    epsilon: f64,
    cfg: &EngineConfig,
) -> Result<CertifiedInterval> {
    let ts = TransitionSystem::from_matrix(m.to_vec())?;
    if a >= m.len() {
        return invalid(format!("safe symbol index {a} out of range"));
    }
    if !find_safe_symbols(&ts).contains(&a) {
        return Err(Error::NotReducible(format!(
            "row and column {a} are not all ones"
        )));
    }
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    // λ_M ≤ k, so this entropy width keeps the exponentiated width below ε
    let k = m.len() as f64;
    let eps_h = epsilon / (k * (1.0 + epsilon));
    match entropy(&ts, eps_h, cfg) {
        Ok(h) => Ok(h.map_monotone(f64::exp)),
        Err(Error::NoConvergence { reason, best }) => Err(Error::NoConvergence {
            reason,
            best: Box::new(best.map_monotone(f64::exp)),
        }),
        Err(e) => Err(e),
    }
}
