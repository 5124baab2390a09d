//! Reference values for tests and acceptance runs: Perron eigenvalues by power
//! iteration and transfer matrices for 1D chains and 2D strips. Adjacency is
//! rebuilt here from the raw edge lists; nothing is shared with the walk-tree
//! engine.

use crate::error::{invalid, Error, Result};
use crate::periodic::{CrossEdge, PeriodicGraph};

pub use crate::graph::brute_force_partition;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 1_000_000;
/// Largest slab, in vertices, for transfer-matrix state enumeration.
pub const MAX_SLAB_BITS: usize = 24;

fn check_square(m: &[Vec<f64>]) -> Result<usize> {
    let k = m.len();
    if k == 0 {
        return invalid("empty matrix");
    }
    if m.iter().any(|row| row.len() != k) {
        return invalid("matrix is not square");
    }
    if m.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid("matrix entries must be finite and non-negative");
    }
    Ok(k)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducible and aperiodic, decided on the support graph.
fn is_primitive(rows: &[Vec<(usize, f64)>]) -> bool {
    let k = rows.len();
    let bfs = |adj: &dyn Fn(usize) -> Vec<usize>| -> Vec<usize> {
        let mut level = vec![usize::MAX; k];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for v in adj(u) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let forward = bfs(&|u| rows[u].iter().map(|&(v, _)| v).collect());
    let mut reverse_adj = vec![Vec::new(); k];
    for (u, row) in rows.iter().enumerate() {
        for &(v, _) in row {
            reverse_adj[v].push(u);
        }
    }
    let backward = bfs(&|u| reverse_adj[u].clone());
    if forward.contains(&usize::MAX) || backward.contains(&usize::MAX) {
        return false;
    }
    let mut period = 0;
    for (u, row) in rows.iter().enumerate() {
        for &(v, _) in row {
            period = gcd(period, (forward[u] + 1).abs_diff(forward[v]));
        }
    }
    period == 1
}

fn sparse(m: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
    m.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &x)| x > 0.0)
                .map(|(j, &x)| (j, x))
                .collect()
        })
        .collect()
}

/// Perron eigenvalue of a primitive non-negative matrix.
pub fn power_iteration(m: &[Vec<f64>]) -> Result<f64> {
    check_square(m)?;
    perron_sparse(&sparse(m))
}

fn perron_sparse(rows: &[Vec<(usize, f64)>]) -> Result<f64> {
    if !is_primitive(rows) {
        return Err(Error::OracleUnsupported(
            "matrix is not irreducible and aperiodic".into(),
        ));
    }
    let k = rows.len();
    let mut x = vec![1.0 / (k as f64).sqrt(); k];
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let y: Vec<f64> = rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::OracleUnsupported("iterate vanished".into()));
        }
        let next: Vec<f64> = y.into_iter().map(|v| v / norm).collect();
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        // the norm alone can repeat while the vector still rotates
        if (norm - prev).abs() <= POWER_TOL * 1e-2 * norm && moved <= POWER_TOL * 1e-1 {
            return Ok(norm);
        }
        prev = norm;
    }
    Err(Error::OracleUnsupported(format!(
        "power iteration did not converge in {POWER_MAX_ITER} steps"
    )))
}

/// Weighted transfer matrix between slab configurations, rows indexed by the
/// current slab and columns by the next one.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    /// Slab configurations as bit masks (bit t·n + u is copy t, domain vertex u).
    pub states: Vec<u64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TransferMatrix {
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let k = self.states.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; k];
                for &(j, w) in row {
                    dense[j] = w;
                }
                dense
            })
            .collect()
    }

    pub fn perron(&self) -> Result<f64> {
        perron_sparse(&self.rows)
    }
}

/// Transfer matrix of a 1D periodic hardcore model. A state is an independent
/// set of B consecutive domain copies, B the largest offset; a transition
/// appends one copy and drops the oldest.
pub fn transfer_matrix_1d(
    n: usize,
    internal: &[(usize, usize)],
    cross: &[CrossEdge],
    activity: &[f64],
) -> Result<TransferMatrix> {
    let b = cross
        .iter()
        .map(|e| e.offset[0].unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
        .max(1);
    let bits = n * b;
    if bits > MAX_SLAB_BITS || (n == 0) {
        return if n == 0 {
            invalid("empty domain")
        } else {
            Err(Error::BudgetExceeded {
                budget: MAX_SLAB_BITS as u64,
            })
        };
    }
    // conflicts[t][u]: mask of window bits (copies 0..=b) adjacent to (t, u)
    let window = n * (b + 1);
    let mut conflict = vec![0u64; window];
    let mut join = |x: usize, y: usize| {
        conflict[x] |= 1 << y;
        conflict[y] |= 1 << x;
    };
    for t in 0..=b {
        for &(u, v) in internal {
            join(t * n + u, t * n + v);
        }
        for e in cross {
            let s = t as i64 + e.offset[0] as i64;
            if (0..=b as i64).contains(&s) {
                join(t * n + e.from, s as usize * n + e.to);
            }
        }
    }
    let independent = |mask: u64| (0..window).all(|x| mask >> x & 1 == 0 || mask & conflict[x] == 0);
    let states: Vec<u64> = (0..1u64 << bits).filter(|&m| independent(m)).collect();
    let copies: Vec<u64> = (0..1u64 << n).filter(|&m| independent(m)).collect();
    let index: std::collections::HashMap<u64, usize> =
        states.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let weight = |c: u64| -> f64 {
        (0..n).filter(|u| c >> u & 1 == 1).map(|u| activity[u]).product()
    };
    let rows = states
        .iter()
        .map(|&s| {
            copies
                .iter()
                .filter_map(|&c| {
                    let w = s | c << bits;
                    if !independent(w) {
                        return None;
                    }
                    Some((index[&(w >> n)], weight(c)))
                })
                .collect()
        })
        .collect();
    Ok(TransferMatrix { states, rows })
}

/// Exact per-vertex free energy of a 1D periodic model, (1/n)·log ρ.
pub fn transfer_free_energy_1d(pg: &PeriodicGraph) -> Result<f64> {
    if pg.dimension() != 1 {
        return invalid("transfer oracle needs a one-dimensional graph");
    }
    let n = pg.domain_size();
    if n == 0 {
        return Ok(0.0);
    }
    let tm = transfer_matrix_1d(n, pg.internal_edges(), pg.cross_edges(), pg.activities())?;
    Ok(tm.perron()?.ln() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripBoundary {
    Free,
    Cylindrical,
}

/// Per-vertex free energy of the strip ℤ × {0..width−1} (transfer along the
/// first coordinate) with the given transverse boundary.
pub fn strip_free_energy(pg: &PeriodicGraph, width: usize, boundary: StripBoundary) -> Result<f64> {
    if pg.dimension() != 2 {
        return invalid("strip oracle needs a two-dimensional graph");
    }
    if width == 0 {
        return invalid("strip width must be positive");
    }
    let n = pg.domain_size();
    if n == 0 {
        return Ok(0.0);
    }
    if boundary == StripBoundary::Cylindrical {
        let span = pg
            .cross_edges()
            .iter()
            .map(|e| e.offset[1].unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        if width <= 2 * span {
            return invalid(format!("cylinder width {width} must exceed {}", 2 * span));
        }
    }
    let id = |y: usize, u: usize| y * n + u;
    let mut internal = std::collections::BTreeSet::new();
    let mut cross = std::collections::BTreeSet::new();
    for y in 0..width {
        for &(u, v) in pg.internal_edges() {
            internal.insert((id(y, u).min(id(y, v)), id(y, u).max(id(y, v))));
        }
        for e in pg.cross_edges() {
            let z = y as i64 + e.offset[1] as i64;
            let z = match boundary {
                StripBoundary::Free if !(0..width as i64).contains(&z) => continue,
                StripBoundary::Free => z as usize,
                StripBoundary::Cylindrical => z.rem_euclid(width as i64) as usize,
            };
            let (a, c) = (id(y, e.from), id(z, e.to));
            if e.offset[0] == 0 {
                internal.insert((a.min(c), a.max(c)));
            } else {
                cross.insert((a, e.offset[0], c));
            }
        }
    }
    let internal: Vec<(usize, usize)> = internal.into_iter().collect();
    let cross: Vec<CrossEdge> = cross
        .into_iter()
        .map(|(from, o, to)| CrossEdge {
            from,
            offset: vec![o],
            to,
        })
        .collect();
    let activity: Vec<f64> = (0..width).flat_map(|_| pg.activities().iter().copied()).collect();
    let tm = transfer_matrix_1d(width * n, &internal, &cross, &activity)?;
    Ok(tm.perron()?.ln() / (width * n) as f64)
}

/// (min, max) of the free- and cylindrical-boundary strip values at `width`
/// (free only when the cylinder would be degenerate).
pub fn strip_free_energy_2d(pg: &PeriodicGraph, width: usize) -> Result<(f64, f64)> {
    let free = strip_free_energy(pg, width, StripBoundary::Free)?;
    match strip_free_energy(pg, width, StripBoundary::Cylindrical) {
        Ok(cyl) => Ok((free.min(cyl), free.max(cyl))),
        Err(Error::InvalidInput(_)) => Ok((free, free)),
        Err(e) => Err(e),
    }
}

/// Reference band: the hull of the strip values over a range of widths.
pub fn strip_band(pg: &PeriodicGraph, widths: impl IntoIterator<Item = usize>) -> Result<(f64, f64)> {
    let mut band = (f64::INFINITY, f64::NEG_INFINITY);
    for w in widths {
        let (lo, hi) = strip_free_energy_2d(pg, w)?;
        band = (band.0.min(lo), band.1.max(hi));
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(lambda: f64) -> PeriodicGraph {
        let cross = [CrossEdge { from: 0, offset: vec![1], to: 0 }];
        PeriodicGraph::new(1, vec!["v".into()], &[], &cross, vec![lambda]).unwrap()
    }

    #[test]
    fn power_iteration_examples() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let got = power_iteration(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((got - phi).abs() < 1e-12 * phi);
        let ones = vec![vec![1.0; 4]; 4];
        assert!((power_iteration(&ones).unwrap() - 4.0).abs() < 1e-12);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(power_iteration(&id), Err(Error::OracleUnsupported(_))));
        let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(power_iteration(&swap), Err(Error::OracleUnsupported(_))));
    }

    #[test]
    fn chain_values() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((transfer_free_energy_1d(&chain(1.0)).unwrap() - phi.ln()).abs() < 1e-12);
        let half = ((1.0 + 3f64.sqrt()) / 2.0).ln();
        assert!((transfer_free_energy_1d(&chain(0.5)).unwrap() - half).abs() < 1e-12);
        let isolated = PeriodicGraph::new(1, vec!["v".into()], &[], &[], vec![1.0]).unwrap();
        assert!((transfer_free_energy_1d(&isolated).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn longer_offsets_use_wider_slabs() {
        // (g) ~ (g+2) only: two interleaved golden chains
        let cross = [CrossEdge { from: 0, offset: vec![2], to: 0 }];
        let pg = PeriodicGraph::new(1, vec!["v".into()], &[], &cross, vec![1.0]).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((transfer_free_energy_1d(&pg).unwrap() - phi.ln()).abs() < 1e-12);
    }

    #[test]
    fn width_one_strip_is_the_chain() {
        let grid = crate::periodic::tests::grid(2, 1.0);
        let (lo, hi) = strip_free_energy_2d(&grid, 1).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((lo - phi.ln()).abs() < 1e-12 && lo == hi);
    }

    #[test]
    fn hard_square_strips() {
        let grid = crate::periodic::tests::grid(2, 1.0);
        let (lo, hi) = strip_band(&grid, 8..=12).unwrap();
        assert!(lo < 0.40750 && hi > 0.40749, "{lo} {hi}");
        assert!(hi - lo < 0.05);
    }
}
