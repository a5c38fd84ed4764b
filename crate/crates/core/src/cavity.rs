//! The multidimensional cavity recursion, extended-real boundary fields,
//! fixed-point solvers, and the existence/uniqueness condition checks.
//!
//! A cavity vector holds one value per directed class pair (a,b) in E, in the
//! canonical lexicographic order. Components may be +/- infinity only at the
//! initialization z(0) = h + h*; one recursion step collapses everything to
//! finite values because |F_beta(x)| <= beta.

use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{class_edge_set, ClassEdgeSet, ModelSpec};
use crate::spectral::{self, PhaseRegime};

/// Default sup-norm tolerance for fixed-point solves.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration budget. Near criticality the map's contraction factor
/// approaches 1, so the budget is deliberately generous.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Agreement threshold between two boundary limits, in units of the solve
/// tolerance: both trajectories carry O(tol) truncation.
const BOUNDARY_AGREEMENT_FACTOR: f64 = 10.0;
/// A one-step residual of tol leaves the iterate within tol * r/(1-r) of the
/// limit; paired solves therefore run at a tighter internal tolerance so
/// their limits can be compared at the caller's tolerance.
const INTERNAL_REFINEMENT: f64 = 1e-2;
/// Sup-norm gap under which the two infinite-boundary limits count as one
/// fixed point in the high-temperature check.
const UNIQUE_GAP_TOL: f64 = 1e-10;
/// Slack for the componentwise monotonicity witness; trajectories are exactly
/// monotone in exact arithmetic and wobble by at most a few ulps here.
const MONO_SLACK: f64 = 1e-12;
/// Stall rule: a checkpoint every this many iterations must shrink the
/// residual by at least 1% or the solve is declared stalled.
const STALL_CHECK_EVERY: usize = 10_000;
const STALL_MIN_IMPROVEMENT: f64 = 0.01;

/// The BP message kernel F_beta(x) = atanh(tanh(beta) tanh(x)).
///
/// Odd in x, bounded by beta in absolute value, and F_beta(+/-inf) = +/-beta.
pub fn f_beta(beta: f64, x: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "f_beta requires beta >= 0, got {beta}"
        )));
    }
    Ok(f_beta_raw(beta, x))
}

#[inline]
fn f_beta_raw(beta: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { beta } else { -beta };
    }
    (beta.tanh() * x.tanh()).atanh()
}

/// One extended-real value per directed pair of the class edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityVector {
    values: Vec<f64>,
}

impl CavityVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn homogeneous(len: usize, value: f64) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        self.values[idx] = value;
    }

    /// Componentwise value for the directed pair (a,b).
    pub fn at(&self, edges: &ClassEdgeSet, a: usize, b: usize) -> Option<f64> {
        edges.index_of(a, b).map(|i| self.values[i])
    }

    pub fn sup_gap(&self, other: &CavityVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| {
                if x == y {
                    0.0 // covers equal infinities
                } else {
                    (x - y).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn negated(&self) -> CavityVector {
        CavityVector {
            values: self.values.iter().map(|x| -x).collect(),
        }
    }
}

/// Precomputed update table: for each output component (a,b), the list of
/// input components (c,a) with coefficient k_ac - delta_bc and coupling
/// beta_ac.
pub(crate) struct RecursionTable {
    pub edges: ClassEdgeSet,
    h_of: Vec<f64>,
    terms: Vec<Vec<(usize, f64, f64)>>, // (input index, coefficient, beta)
}

impl RecursionTable {
    pub fn new(spec: &ModelSpec) -> Self {
        let edges = class_edge_set(spec);
        let mut terms = Vec::with_capacity(edges.len());
        let mut h_of = Vec::with_capacity(edges.len());
        for &(a, b) in edges.edges() {
            h_of.push(spec.h(a));
            let mut row = Vec::new();
            for &c in edges.neighbors(a) {
                let coeff = spec.k(a, c) as f64 - if b == c { 1.0 } else { 0.0 };
                if coeff != 0.0 {
                    let idx = edges
                        .index_of(c, a)
                        .expect("edge set symmetry guarantees (c,a) in E");
                    row.push((idx, coeff, spec.beta(a, c)));
                }
            }
            terms.push(row);
        }
        Self { edges, h_of, terms }
    }

    pub fn step(&self, z: &[f64], out: &mut [f64]) {
        for (i, row) in self.terms.iter().enumerate() {
            let mut acc = self.h_of[i];
            for &(idx, coeff, beta) in row {
                acc += coeff * f_beta_raw(beta, z[idx]);
            }
            out[i] = acc;
        }
    }
}

/// Applies one step of the recursion
/// z'_a^(b) = h_a + sum_c (k_ac - delta_bc) F_{beta_ac}(z_c^(a)).
pub fn recursion_step(spec: &ModelSpec, z: &CavityVector) -> Result<CavityVector> {
    let table = RecursionTable::new(spec);
    if z.len() != table.edges.len() {
        return Err(Error::Structural(format!(
            "cavity vector has {} components but the edge set has {}",
            z.len(),
            table.edges.len()
        )));
    }
    if z.values().iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("cavity vector contains NaN".into()));
    }
    let mut out = vec![0.0; z.len()];
    table.step(z.values(), &mut out);
    Ok(CavityVector::new(out))
}

/// Sup-norm residual of the recursion at `z`; zero exactly at a fixed point.
pub fn fixed_point_residual(spec: &ModelSpec, z: &CavityVector) -> Result<f64> {
    let next = recursion_step(spec, z)?;
    Ok(next.sup_gap(z))
}

/// Componentwise bound sum_c (k_ac - delta_bc) beta_ac; after one step every
/// component lies in [h_a - bound, h_a + bound].
pub fn coupling_bounds(spec: &ModelSpec) -> CavityVector {
    let edges = class_edge_set(spec);
    let values = edges
        .edges()
        .iter()
        .map(|&(a, b)| {
            edges
                .neighbors(a)
                .iter()
                .map(|&c| (spec.k(a, c) as f64 - if b == c { 1.0 } else { 0.0 }) * spec.beta(a, c))
                .sum()
        })
        .collect();
    CavityVector::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
    None,
}

impl Monotonicity {
    fn as_str(self) -> &'static str {
        match self {
            Monotonicity::NonDecreasing => "nondecreasing",
            Monotonicity::NonIncreasing => "nonincreasing",
            Monotonicity::None => "none",
        }
    }
}

/// Outcome of a fixed-point solve.
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub z: CavityVector,
    pub iterations: usize,
    /// Sup-norm of the last one-step change.
    pub residual: f64,
    pub converged: bool,
    pub monotonicity_witness: Monotonicity,
    /// Residual stopped improving (less than 1% per 10^4 iterations).
    pub stalled: bool,
    /// Aitken-extrapolated limit estimate, reported when the plain iteration
    /// stalled or ran out of budget.
    pub extrapolated: Option<CavityVector>,
}

impl FixedPointResult {
    pub fn to_json(&self, edges: &ClassEdgeSet) -> String {
        let value = json!({
            "schema_version": 1,
            "edges": edges.edges().iter().map(|&(a, b)| vec![a + 1, b + 1]).collect::<Vec<_>>(),
            "z": self.z.values(),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "monotonicity": self.monotonicity_witness.as_str(),
            "stalled": self.stalled,
        });
        serde_json::to_string_pretty(&value).expect("json encoding cannot fail")
    }
}

/// Runs the recursion from z(0) = h + h* until the one-step change drops
/// below `tol` or the budget runs out.
///
/// Non-convergence is reported through `converged = false`, not an error.
pub fn iterate(
    spec: &ModelSpec,
    h_star: &CavityVector,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    let table = RecursionTable::new(spec);
    let dim = table.edges.len();
    if h_star.len() != dim {
        return Err(Error::Structural(format!(
            "boundary field has {} components but the edge set has {dim}",
            h_star.len()
        )));
    }
    if h_star.values().iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("boundary field contains NaN".into()));
    }

    let mut z: Vec<f64> = table
        .edges
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| spec.h(a) + h_star.get(i))
        .collect();
    let mut next = vec![0.0; dim];
    let mut prev1: Option<Vec<f64>> = None; // z(s-1)
    let mut prev2: Option<Vec<f64>> = None; // z(s-2)

    let mut non_decreasing = true;
    let mut non_increasing = true;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut stalled = false;
    let mut iterations = 0usize;
    let mut checkpoint_residual = f64::INFINITY;

    for s in 1..=max_iter {
        table.step(&z, &mut next);
        residual = 0.0;
        for i in 0..dim {
            let (old, new) = (z[i], next[i]);
            let diff = if old == new { 0.0 } else { new - old };
            if diff < -MONO_SLACK {
                non_decreasing = false;
            }
            if diff > MONO_SLACK {
                non_increasing = false;
            }
            residual = residual.max(diff.abs());
        }
        iterations = s;
        prev2 = prev1.take();
        prev1 = Some(z.clone());
        std::mem::swap(&mut z, &mut next);
        if residual <= tol {
            converged = true;
            break;
        }
        if s % STALL_CHECK_EVERY == 0 {
            if residual > checkpoint_residual * (1.0 - STALL_MIN_IMPROVEMENT) {
                stalled = true;
                break;
            }
            checkpoint_residual = residual;
        }
    }

    let monotonicity_witness = match (non_decreasing, non_increasing) {
        (true, _) => Monotonicity::NonDecreasing,
        (false, true) => Monotonicity::NonIncreasing,
        (false, false) => Monotonicity::None,
    };

    let extrapolated = if !converged {
        match (&prev1, &prev2) {
            (Some(z1), Some(z0)) => Some(CavityVector::new(aitken(z0, z1, &z))),
            _ => None,
        }
    } else {
        None
    };

    Ok(FixedPointResult {
        z: CavityVector::new(z),
        iterations,
        residual,
        converged,
        monotonicity_witness,
        stalled,
        extrapolated,
    })
}

/// Componentwise Aitken delta-squared estimate of the limit of a linearly
/// converging sequence, given three consecutive iterates.
fn aitken(z0: &[f64], z1: &[f64], z2: &[f64]) -> Vec<f64> {
    z0.iter()
        .zip(z1)
        .zip(z2)
        .map(|((&a, &b), &c)| {
            let d1 = b - a;
            let d2 = c - b;
            let denom = d2 - d1;
            if denom.abs() < 1e-300 || !denom.is_finite() {
                c
            } else {
                c - d2 * d2 / denom
            }
        })
        .collect()
}

/// Result of squeezing the fixed point between the free (h* = 0) and plus
/// (h* = +inf) boundary trajectories.
#[derive(Debug, Clone)]
pub struct SqueezeResult {
    pub from_free: FixedPointResult,
    pub from_plus: FixedPointResult,
    /// Average of the two limits.
    pub z: CavityVector,
    /// Sup-norm gap between the two limits.
    pub boundary_gap: f64,
    pub converged: bool,
}

/// The unique non-negative fixed point under non-negative fields
/// (all h_a > 0, or at least one positive with every k_a >= 2), obtained
/// independently from the free and plus boundary conditions.
pub fn fixed_point_nonneg(spec: &ModelSpec, tol: f64) -> Result<SqueezeResult> {
    fixed_point_nonneg_opts(spec, tol, DEFAULT_MAX_ITER)
}

pub fn fixed_point_nonneg_opts(
    spec: &ModelSpec,
    tol: f64,
    max_iter: usize,
) -> Result<SqueezeResult> {
    let n = spec.n();
    if (0..n).any(|a| spec.h(a) < 0.0) {
        return Err(Error::UnsupportedRegime(
            "fixed_point_nonneg requires h_a >= 0 for every class; use iterate or the \
             high-temperature check for mixed signs"
                .into(),
        ));
    }
    let all_positive = (0..n).all(|a| spec.h(a) > 0.0);
    let some_positive = (0..n).any(|a| spec.h(a) > 0.0);
    if !all_positive {
        if !some_positive {
            return Err(Error::UnsupportedRegime(
                "all fields are zero; use fixed_point_zero_field_positive".into(),
            ));
        }
        if let Some(a) = (0..n).find(|&a| spec.degree(a) < 2) {
            return Err(Error::UnsupportedRegime(format!(
                "zero fields with k_{} = {} < 2 are outside the uniqueness hypotheses",
                a + 1,
                spec.degree(a)
            )));
        }
    }
    let dim = class_edge_set(spec).len();
    let inner_tol = tol * INTERNAL_REFINEMENT;
    let from_free = iterate(spec, &CavityVector::zeros(dim), inner_tol, max_iter)?;
    let from_plus = iterate(
        spec,
        &CavityVector::homogeneous(dim, f64::INFINITY),
        inner_tol,
        max_iter,
    )?;
    squeeze(spec, tol, from_free, from_plus)
}

fn squeeze(
    _spec: &ModelSpec,
    tol: f64,
    lower: FixedPointResult,
    upper: FixedPointResult,
) -> Result<SqueezeResult> {
    let boundary_gap = lower.z.sup_gap(&upper.z);
    let converged = lower.converged && upper.converged;
    if converged && boundary_gap > BOUNDARY_AGREEMENT_FACTOR * tol {
        return Err(Error::Numeric(format!(
            "boundary limits disagree: sup gap {boundary_gap} exceeds {} * tol",
            BOUNDARY_AGREEMENT_FACTOR
        )));
    }
    let z = CavityVector::new(
        lower
            .z
            .values()
            .iter()
            .zip(upper.z.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    );
    Ok(SqueezeResult {
        from_free: lower,
        from_plus: upper,
        z,
        boundary_gap,
        converged,
    })
}

/// Zero-field solve outcome. Subcritical: the zero vector. Supercritical: the
/// strictly positive fixed point. Critical: no value is guaranteed and none
/// is reported.
#[derive(Debug, Clone)]
pub struct ZeroFieldFixedPoint {
    pub z: CavityVector,
    pub rho: f64,
    pub regime: PhaseRegime,
    /// Epsilon finally used in the epsilon*v initialization (supercritical).
    pub epsilon: Option<f64>,
    pub from_epsilon_v: Option<FixedPointResult>,
    pub from_plus: Option<FixedPointResult>,
}

/// The strictly positive fixed point at zero external fields, for
/// rho(M) > 1, k_a >= 2 for all classes, and a class graph that is not
/// simply cyclic.
///
/// The solve starts from epsilon * v with v the Perron vector of M; epsilon
/// starts at 1e-3 * min(v) and is halved until the strict small-field
/// condition holds. The result is cross-checked against the h* = +inf limit.
pub fn fixed_point_zero_field_positive(spec: &ModelSpec, tol: f64) -> Result<ZeroFieldFixedPoint> {
    if !spec.zero_field() {
        return Err(Error::UnsupportedRegime(
            "fixed_point_zero_field_positive requires h = 0".into(),
        ));
    }
    if let Some(a) = (0..spec.n()).find(|&a| spec.degree(a) < 2) {
        return Err(Error::UnsupportedRegime(format!(
            "class {} has degree {} < 2",
            a + 1,
            spec.degree(a)
        )));
    }
    if crate::model::is_simply_cyclic(spec) {
        return Err(Error::UnsupportedRegime(
            "simply cyclic class graphs are outside the supported phase-transition regime".into(),
        ));
    }
    let m = spectral::build_m(spec);
    let rho = m.spectral_radius(1e-12)?;
    let regime = PhaseRegime::classify(rho);
    let dim = m.dim();
    match regime {
        PhaseRegime::Critical => Ok(ZeroFieldFixedPoint {
            z: CavityVector::zeros(dim),
            rho,
            regime,
            epsilon: None,
            from_epsilon_v: None,
            from_plus: None,
        }),
        PhaseRegime::Subcritical => Ok(ZeroFieldFixedPoint {
            z: CavityVector::zeros(dim),
            rho,
            regime,
            epsilon: None,
            from_epsilon_v: None,
            from_plus: None,
        }),
        PhaseRegime::Supercritical => {
            let v = spectral::perron_vector(&m.matrix)?;
            let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut epsilon = 1e-3 * v_min;
            let mut chosen = None;
            for _ in 0..60 {
                let h_small =
                    CavityVector::new(v.iter().map(|&x| epsilon * x).collect::<Vec<_>>());
                let check = check_condition_h_small(spec, &h_small);
                if check.holds_strictly_where_k2 && check.positivity_ok {
                    chosen = Some(h_small);
                    break;
                }
                epsilon *= 0.5;
            }
            let h_small = chosen.ok_or_else(|| {
                Error::Numeric(
                    "no epsilon satisfied the strict small-field condition after 60 halvings"
                        .into(),
                )
            })?;
            let inner_tol = tol * INTERNAL_REFINEMENT;
            let from_eps = iterate(spec, &h_small, inner_tol, DEFAULT_MAX_ITER)?;
            let from_plus = iterate(
                spec,
                &CavityVector::homogeneous(dim, f64::INFINITY),
                inner_tol,
                DEFAULT_MAX_ITER,
            )?;
            let squeezed = squeeze(spec, tol, from_eps, from_plus)?;
            Ok(ZeroFieldFixedPoint {
                z: squeezed.z,
                rho,
                regime,
                epsilon: Some(epsilon),
                from_epsilon_v: Some(squeezed.from_free),
                from_plus: Some(squeezed.from_plus),
            })
        }
    }
}

/// Verdict of the small-field existence condition
/// sum_c (k_ac - delta_bc) F_{beta_ac}(h_c + h_c^(a)) >= h_a^(b).
#[derive(Debug, Clone)]
pub struct SmallFieldCondition {
    pub holds: bool,
    /// Strict inequality on every component whose class degree is >= 2.
    pub holds_strictly_where_k2: bool,
    pub fails_at: Vec<(usize, usize)>,
    /// The companion requirement h_a^(b) >= -h_a on every component.
    pub positivity_ok: bool,
}

pub fn check_condition_h_small(spec: &ModelSpec, underline_h: &CavityVector) -> SmallFieldCondition {
    let edges = class_edge_set(spec);
    let mut holds = true;
    let mut strict = true;
    let mut fails_at = Vec::new();
    let mut positivity_ok = true;
    for (i, &(a, b)) in edges.edges().iter().enumerate() {
        let rhs = underline_h.get(i);
        let mut lhs = 0.0;
        for &c in edges.neighbors(a) {
            let coeff = spec.k(a, c) as f64 - if b == c { 1.0 } else { 0.0 };
            let idx = edges.index_of(c, a).expect("symmetric edge set");
            lhs += coeff * f_beta_raw(spec.beta(a, c), spec.h(c) + underline_h.get(idx));
        }
        if !(lhs >= rhs) {
            holds = false;
            fails_at.push((a, b));
        }
        if spec.degree(a) >= 2 && !(lhs > rhs) {
            strict = false;
        }
        if !(rhs >= -spec.h(a)) {
            positivity_ok = false;
        }
    }
    SmallFieldCondition {
        holds,
        holds_strictly_where_k2: strict,
        fails_at,
        positivity_ok,
    }
}

/// Verdict of the mirror condition
/// sum_c (k_ac - delta_bc) F_{beta_ac}(h_c + h_c^(a)) <= h_a^(b).
#[derive(Debug, Clone)]
pub struct BigFieldCondition {
    pub holds: bool,
    pub fails_at: Vec<(usize, usize)>,
}

pub fn check_condition_h_big(spec: &ModelSpec, overline_h: &CavityVector) -> BigFieldCondition {
    let edges = class_edge_set(spec);
    let mut holds = true;
    let mut fails_at = Vec::new();
    for (i, &(a, b)) in edges.edges().iter().enumerate() {
        let rhs = overline_h.get(i);
        let mut lhs = 0.0;
        for &c in edges.neighbors(a) {
            let coeff = spec.k(a, c) as f64 - if b == c { 1.0 } else { 0.0 };
            let idx = edges.index_of(c, a).expect("symmetric edge set");
            lhs += coeff * f_beta_raw(spec.beta(a, c), spec.h(c) + overline_h.get(idx));
        }
        if !(lhs <= rhs) {
            holds = false;
            fails_at.push((a, b));
        }
    }
    BigFieldCondition { holds, fails_at }
}

#[derive(Debug, Clone, Copy)]
pub struct SecondDifference {
    pub s: usize,
    pub edge: (usize, usize),
    pub delta: f64,
    /// Scaled central second difference
    /// (z(s, h* + d e) - 2 z(s, h*) + z(s, h* - d e)) / d^2.
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SecondDifferenceTable {
    pub rows: Vec<SecondDifference>,
}

impl SecondDifferenceTable {
    pub fn max_value(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Probes concavity of z(s, .) in one boundary coordinate by central second
/// differences around `h_star_base`, for s = 0..=s_max and every probe step
/// in `deltas`.
///
/// The base point (and each displaced point) must satisfy the small-field
/// condition together with the positivity requirement, otherwise concavity is
/// not guaranteed and a regime error is returned.
pub fn concavity_probe(
    spec: &ModelSpec,
    h_star_base: &CavityVector,
    direction: (usize, usize),
    deltas: &[f64],
    s_max: usize,
) -> Result<SecondDifferenceTable> {
    let edges = class_edge_set(spec);
    if h_star_base.len() != edges.len() {
        return Err(Error::Structural(
            "base boundary field does not match the edge set".into(),
        ));
    }
    let dir_idx = edges
        .index_of(direction.0, direction.1)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "({},{}) is not an edge of the class graph",
                direction.0 + 1,
                direction.1 + 1
            ))
        })?;
    let base_check = check_condition_h_small(spec, h_star_base);
    if !base_check.holds || !base_check.positivity_ok {
        return Err(Error::UnsupportedRegime(
            "h_star_base violates the small-field condition or positivity requirement".into(),
        ));
    }
    let mut table = SecondDifferenceTable::default();
    for &delta in deltas {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "probe steps must be positive, got {delta}"
            )));
        }
        let mut minus = h_star_base.clone();
        minus.set(dir_idx, minus.get(dir_idx) - delta);
        let low_check = check_condition_h_small(spec, &minus);
        if !low_check.holds || !low_check.positivity_ok {
            return Err(Error::UnsupportedRegime(format!(
                "probe step {delta} leaves the region where concavity is guaranteed"
            )));
        }
        let mut plus = h_star_base.clone();
        plus.set(dir_idx, plus.get(dir_idx) + delta);

        let trajectories: Vec<Vec<Vec<f64>>> = [&minus, h_star_base, &plus]
            .iter()
            .map(|h_star| trajectory(spec, h_star, s_max))
            .collect();
        for s in 0..=s_max {
            for (i, &edge) in edges.edges().iter().enumerate() {
                let lo = trajectories[0][s][i];
                let mid = trajectories[1][s][i];
                let hi = trajectories[2][s][i];
                table.rows.push(SecondDifference {
                    s,
                    edge,
                    delta,
                    value: (hi - 2.0 * mid + lo) / (delta * delta),
                });
            }
        }
    }
    Ok(table)
}

/// z(s, h*) for s = 0..=s_max (finite boundary fields only).
fn trajectory(spec: &ModelSpec, h_star: &CavityVector, s_max: usize) -> Vec<Vec<f64>> {
    let table = RecursionTable::new(spec);
    let dim = table.edges.len();
    let mut states = Vec::with_capacity(s_max + 1);
    let z0: Vec<f64> = table
        .edges
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| spec.h(a) + h_star.get(i))
        .collect();
    states.push(z0);
    for s in 1..=s_max {
        let mut next = vec![0.0; dim];
        table.step(&states[s - 1], &mut next);
        states.push(next);
    }
    states
}

/// The finite-depth states z(0, h*), ..., z(s_max, h*) of the recursion,
/// matching the root-subtree magnetizations of the pruned trees depth by
/// depth. Extended-real boundary components are allowed.
pub fn recursion_trajectory(
    spec: &ModelSpec,
    h_star: &CavityVector,
    s_max: usize,
) -> Result<Vec<CavityVector>> {
    let edges = class_edge_set(spec);
    if h_star.len() != edges.len() {
        return Err(Error::Structural(
            "boundary field does not match the edge set".into(),
        ));
    }
    if h_star.values().iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("boundary field contains NaN".into()));
    }
    Ok(trajectory(spec, h_star, s_max)
        .into_iter()
        .map(CavityVector::new)
        .collect())
}

/// High-temperature uniqueness check: when rho(M) < 1 the h* = -inf and
/// h* = +inf trajectories must meet.
#[derive(Debug, Clone)]
pub struct HighTempCheck {
    pub rho: f64,
    pub unique: bool,
    /// Terminal componentwise gap between the two infinite-boundary limits;
    /// absent when rho >= 1 and the contraction argument does not apply.
    pub gap: Option<CavityVector>,
}

pub fn high_temp_contraction_check(spec: &ModelSpec) -> Result<HighTempCheck> {
    let m = spectral::build_m(spec);
    let rho = m.spectral_radius(1e-12)?;
    if rho >= 1.0 {
        return Ok(HighTempCheck {
            rho,
            unique: false,
            gap: None,
        });
    }
    let dim = m.dim();
    let minus = iterate(
        spec,
        &CavityVector::homogeneous(dim, f64::NEG_INFINITY),
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    let plus = iterate(
        spec,
        &CavityVector::homogeneous(dim, f64::INFINITY),
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    let gap = CavityVector::new(
        plus.z
            .values()
            .iter()
            .zip(minus.z.values())
            .map(|(p, m)| p - m)
            .collect(),
    );
    let sup = gap.values().iter().cloned().fold(0.0, f64::max);
    Ok(HighTempCheck {
        rho,
        unique: sup <= UNIQUE_GAP_TOL,
        gap: Some(gap),
    })
}

/// For each component, the first step s at which the trajectory from
/// `underline_h` strictly increases — the witness s*_ab of the weaker
/// uniqueness condition. No certification is attempted here.
pub fn uniqueness_witness(
    spec: &ModelSpec,
    underline_h: &CavityVector,
    max_s: usize,
) -> Result<Vec<Option<usize>>> {
    let table = RecursionTable::new(spec);
    let dim = table.edges.len();
    if underline_h.len() != dim {
        return Err(Error::Structural(
            "boundary field does not match the edge set".into(),
        ));
    }
    let mut z: Vec<f64> = table
        .edges
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| spec.h(a) + underline_h.get(i))
        .collect();
    let mut witness = vec![None; dim];
    let mut next = vec![0.0; dim];
    for s in 1..=max_s {
        table.step(&z, &mut next);
        for i in 0..dim {
            if witness[i].is_none() && next[i] > z[i] {
                witness[i] = Some(s);
            }
        }
        std::mem::swap(&mut z, &mut next);
        if witness.iter().all(|w| w.is_some()) {
            break;
        }
    }
    Ok(witness)
}
