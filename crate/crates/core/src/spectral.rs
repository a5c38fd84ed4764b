//! The weighted non-backtracking matrix M, its unweighted companion, spectral
//! radii, Perron vectors, and the critical temperature.
//!
//! M is indexed by the directed class-pair set E in the canonical
//! lexicographic order. Its spectral radius linearizes the cavity recursion at
//! z = 0: rho(M) = 1 marks the phase boundary.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{class_edge_set, ClassEdgeSet, ModelSpec};

/// Window around rho(M) = 1 inside which nothing is guaranteed and solvers
/// report "critical" instead of a value.
pub const CRITICAL_WINDOW: f64 = 1e-6;

/// Position of rho(M) relative to the phase boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseRegime {
    Subcritical,
    Supercritical,
    /// |rho - 1| < 1e-6: no guarantee, fixed-point iteration arbitrarily slow.
    Critical,
}

impl PhaseRegime {
    pub fn classify(rho: f64) -> Self {
        if (rho - 1.0).abs() < CRITICAL_WINDOW {
            PhaseRegime::Critical
        } else if rho < 1.0 {
            PhaseRegime::Subcritical
        } else {
            PhaseRegime::Supercritical
        }
    }
}

/// Dense |E| x |E| non-negative matrix in class-edge order.
#[derive(Debug, Clone)]
pub struct NonBacktrackingMatrix {
    pub matrix: DMatrix<f64>,
    pub edges: Vec<(usize, usize)>,
    pub weighted: bool,
}

const POWER_ITER_CAP: usize = 200_000;
const RQ_WINDOW: usize = 10;
const GELFAND_MAX_SQUARINGS: u32 = 60;
/// Dimension up to which the Gelfand estimate is always computed as a
/// cross-check even when power iteration converged.
const GELFAND_CROSSCHECK_DIM: usize = 64;

fn build(spec: &ModelSpec, weighted: bool) -> NonBacktrackingMatrix {
    let edges = class_edge_set(spec);
    let dim = edges.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (row, &(a, b)) in edges.edges().iter().enumerate() {
        for (col, &(c, d)) in edges.edges().iter().enumerate() {
            if a != d {
                continue;
            }
            let k_ac = spec.k(a, c) as f64;
            let factor = if weighted { spec.beta(a, c).tanh() } else { 1.0 };
            m[(row, col)] = if b == c {
                factor * (k_ac - 1.0)
            } else {
                factor * k_ac
            };
        }
    }
    NonBacktrackingMatrix {
        matrix: m,
        edges: edges.edges().to_vec(),
        weighted,
    }
}

/// M_{(a,b),(c,d)} = tanh(beta_ac) (k_ac - delta_bc) for a = d, else 0.
pub fn build_m(spec: &ModelSpec) -> NonBacktrackingMatrix {
    build(spec, true)
}

/// M with the tanh factors removed; rho(Mbar) fixes the homogeneous critical
/// temperature.
pub fn build_mbar(spec: &ModelSpec) -> NonBacktrackingMatrix {
    build(spec, false)
}

impl NonBacktrackingMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spectral_radius(&self, tol: f64) -> Result<f64> {
        spectral_radius(&self.matrix, tol)
    }

    /// CSV export with E-pair row/column labels (1-based classes).
    pub fn to_csv(&self) -> String {
        let label = |&(a, b): &(usize, usize)| format!("({},{})", a + 1, b + 1);
        let mut out = String::from("edge");
        for e in &self.edges {
            out.push(',');
            out.push_str(&label(e));
        }
        out.push('\n');
        for (row, e) in self.edges.iter().enumerate() {
            out.push_str(&label(e));
            for col in 0..self.dim() {
                out.push_str(&format!(",{}", self.matrix[(row, col)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Strong connectivity of the support digraph of a square non-negative matrix.
pub fn is_irreducible_matrix(m: &DMatrix<f64>) -> bool {
    non_communicating_pair(m).is_none()
}

fn reachable_from(m: &DMatrix<f64>, start: usize, transpose: bool) -> Vec<bool> {
    let dim = m.nrows();
    let mut seen = vec![false; dim];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for j in 0..dim {
            let w = if transpose { m[(j, i)] } else { m[(i, j)] };
            if w != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// An index pair (i, j) with no directed support path i -> j, if one exists.
pub fn non_communicating_pair(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    let dim = m.nrows();
    if dim == 0 {
        return None;
    }
    let fwd = reachable_from(m, 0, false);
    if let Some(j) = fwd.iter().position(|&r| !r) {
        return Some((0, j));
    }
    let bwd = reachable_from(m, 0, true);
    if let Some(i) = bwd.iter().position(|&r| !r) {
        return Some((i, 0));
    }
    None
}

struct PowerIteration {
    rho: f64,
    vector: DVector<f64>,
    iterations: usize,
}

/// Power iteration on M + I. The shift removes periodicity (M + I is
/// primitive whenever M is irreducible) without moving the Perron vector;
/// rho(M) = rho(M + I) - 1 for non-negative M.
fn power_iteration(m: &DMatrix<f64>, tol: f64) -> Option<PowerIteration> {
    let dim = m.nrows();
    let shifted = m + DMatrix::<f64>::identity(dim, dim);
    let mut v = DVector::from_element(dim, 1.0);
    let mut window: Vec<f64> = Vec::with_capacity(RQ_WINDOW);
    for iter in 1..=POWER_ITER_CAP {
        let w = &shifted * &v;
        let rq = v.dot(&w) / v.dot(&v) - 1.0;
        let norm = w.amax();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        v = w / norm;
        window.push(rq);
        if window.len() > RQ_WINDOW {
            window.remove(0);
        }
        if window.len() == RQ_WINDOW {
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < tol {
                return Some(PowerIteration {
                    rho: rq,
                    vector: v,
                    iterations: iter,
                });
            }
        }
    }
    None
}

/// Gelfand estimate rho = lim ||M^s||^{1/s} over doubling powers s = 2^k,
/// with the matrix infinity norm and log-scale renormalization.
///
/// ||M^s||^{1/s} approaches rho only like exp(log(poly(s))/s), so consecutive
/// estimates may agree by accident at small s; the convergence test is armed
/// only once s is large.
fn gelfand_radius(m: &DMatrix<f64>, tol: f64) -> f64 {
    const MIN_SQUARINGS: u32 = 24; // s = 2^24 before early exit is allowed
    let norm_inf = |a: &DMatrix<f64>| -> f64 {
        (0..a.nrows())
            .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let c0 = norm_inf(m);
    if c0 == 0.0 {
        return 0.0;
    }
    let mut b = m / c0;
    let mut log_c = c0.ln();
    let mut s = 1u64;
    let mut estimate = (log_c / s as f64).exp();
    for squaring in 0..GELFAND_MAX_SQUARINGS {
        let sq = &b * &b;
        let d = norm_inf(&sq);
        if d == 0.0 {
            return 0.0; // nilpotent
        }
        b = sq / d;
        log_c = 2.0 * log_c + d.ln();
        s *= 2;
        let next = (log_c / s as f64).exp();
        let done = squaring >= MIN_SQUARINGS && (next - estimate).abs() < 0.5 * tol;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Spectral radius of a square non-negative matrix to absolute tolerance
/// `tol`.
///
/// Power iteration handles the irreducible case; the Gelfand iteration covers
/// reducible or periodic support and doubles as a cross-check on small
/// matrices. Disagreement beyond tolerance is a numeric error.
pub fn spectral_radius(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidInput("matrix must be non-empty".into()));
    }
    if m.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput(
            "spectral radius is defined here for finite non-negative matrices".into(),
        ));
    }
    let irreducible = is_irreducible_matrix(m);
    let power = if irreducible {
        power_iteration(m, 0.1 * tol)
    } else {
        None
    };
    let want_gelfand = !irreducible || power.is_none() || m.nrows() <= GELFAND_CROSSCHECK_DIM;
    let gelfand = want_gelfand.then(|| gelfand_radius(m, tol));
    match (power, gelfand) {
        (Some(p), Some(g)) => {
            if (p.rho - g).abs() > tol.max(1e-9) {
                return Err(Error::Numeric(format!(
                    "spectral radius estimators disagree: power iteration {} ({} iterations) vs Gelfand {}",
                    p.rho, p.iterations, g
                )));
            }
            Ok(p.rho)
        }
        (Some(p), None) => Ok(p.rho),
        (None, Some(g)) => Ok(g),
        (None, None) => Err(Error::Numeric(
            "power iteration did not converge and Gelfand fallback was not run".into(),
        )),
    }
}

/// Perron eigenvector of an irreducible non-negative matrix: strictly
/// positive, Euclidean norm 1, residual ||Mv - rho v|| <= tol.
pub fn perron_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if let Some((i, j)) = non_communicating_pair(m) {
        return Err(Error::Structural(format!(
            "matrix is reducible: no directed path from index {i} to index {j}"
        )));
    }
    let tol = 1e-12;
    let p = power_iteration(m, 0.01 * tol).ok_or_else(|| {
        Error::Numeric("power iteration for the Perron vector did not converge".into())
    })?;
    let v = &p.vector / p.vector.norm();
    let residual = (m * &v - p.rho * &v).norm();
    if residual > 1e-9 {
        return Err(Error::Numeric(format!(
            "Perron pair residual {residual} exceeds tolerance"
        )));
    }
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numeric(
            "Perron vector has a non-positive component".into(),
        ));
    }
    Ok(v)
}

/// Critical inverse temperature atanh(1 / rho(Mbar)) for homogeneous
/// couplings; +infinity when rho(Mbar) <= 1.
pub fn critical_beta(spec: &ModelSpec) -> Result<f64> {
    if spec.beta_homogeneous().is_none() {
        return Err(Error::UnsupportedRegime(
            "critical_beta is defined for homogeneous couplings only".into(),
        ));
    }
    let mbar = build_mbar(spec);
    let rho = mbar.spectral_radius(1e-12)?;
    if rho <= 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok((1.0 / rho).atanh())
    }
}

/// The degree-based bracket on the critical temperature:
/// atanh(1/(max_a k_a - 1)) <= beta_c <= atanh(1/(min_a k_a - 1)).
///
/// The upper bound is +infinity whenever min_a k_a <= 2 (and is flagged so
/// for min_a k_a <= 1, where the formula itself degenerates).
pub fn critical_beta_bounds(spec: &ModelSpec) -> (f64, f64) {
    let degrees: Vec<u32> = (0..spec.n()).map(|a| spec.degree(a)).collect();
    let max_k = *degrees.iter().max().expect("n >= 1") as f64;
    let min_k = *degrees.iter().min().expect("n >= 1") as f64;
    let lower = if max_k <= 1.0 {
        f64::INFINITY
    } else {
        (1.0 / (max_k - 1.0)).atanh()
    };
    let upper = if min_k <= 1.0 {
        f64::INFINITY
    } else {
        (1.0 / (min_k - 1.0)).atanh() // atanh(1) = +inf when min_k = 2
    };
    (lower, upper)
}

/// Edge set the matrix rows/columns refer to; convenience for callers that
/// built the matrix straight from a spec.
pub fn matrix_edge_set(spec: &ModelSpec) -> ClassEdgeSet {
    class_edge_set(spec)
}
