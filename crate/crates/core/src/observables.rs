//! Closed-form limit observables at a cavity fixed point: magnetizations,
//! edge correlations, macroscopic averages, the Bethe pressure and its
//! coupling derivative, and the spontaneous magnetization.

use serde::Serialize;

use crate::cavity::{self, CavityVector};
use crate::error::{Error, Result};
use crate::model::{class_edge_set, ModelSpec};
use crate::spectral::{self, PhaseRegime};

/// Limit magnetization of a class-a spin:
/// tanh(h_a + sum_c k_ac F_{beta_ac}(z_c^(a))).
pub fn magnetization(spec: &ModelSpec, zbar: &CavityVector, a: usize) -> f64 {
    let edges = class_edge_set(spec);
    let mut arg = spec.h(a);
    for &c in edges.neighbors(a) {
        let idx = edges.index_of(c, a).expect("symmetric edge set");
        arg += spec.k(a, c) as f64
            * (spec.beta(a, c).tanh() * zbar.get(idx).tanh()).atanh();
    }
    arg.tanh()
}

/// Limit two-point function along an (a,a') edge:
/// tanh(beta + atanh(tanh z_a^(a') tanh z_a'^(a))).
pub fn edge_correlation(
    spec: &ModelSpec,
    zbar: &CavityVector,
    a: usize,
    a2: usize,
) -> Result<f64> {
    let edges = class_edge_set(spec);
    let out = edges.index_of(a, a2).ok_or_else(|| {
        Error::InvalidInput(format!(
            "({},{}) is not an edge of the class graph",
            a + 1,
            a2 + 1
        ))
    })?;
    let back = edges.index_of(a2, a).expect("symmetric edge set");
    let product = zbar.get(out).tanh() * zbar.get(back).tanh();
    Ok((spec.beta(a, a2) + product.atanh()).tanh())
}

/// Number of (a,a')-type edges per vertex: alpha_a k_aa' / 2^{delta_aa'}.
pub fn edge_type_weight(spec: &ModelSpec, a: usize, a2: usize) -> f64 {
    spec.alpha_f64(a) * spec.k(a, a2) as f64 / if a == a2 { 2.0 } else { 1.0 }
}

/// Macroscopic averages: (sum_a alpha_a m_a,
/// sum_{unordered (a,a') in E} alpha_a k_aa'/2^{delta} gamma_aa').
///
/// The correlation sum runs over unordered class pairs so that the weights
/// add up to |E_N| / N exactly.
pub fn averages(spec: &ModelSpec, zbar: &CavityVector) -> Result<(f64, f64)> {
    let edges = class_edge_set(spec);
    let avg_m = (0..spec.n())
        .map(|a| spec.alpha_f64(a) * magnetization(spec, zbar, a))
        .sum();
    let mut avg_corr = 0.0;
    for &(a, a2) in edges.edges() {
        if a > a2 {
            continue;
        }
        avg_corr += edge_type_weight(spec, a, a2) * edge_correlation(spec, zbar, a, a2)?;
    }
    Ok((avg_m, avg_corr))
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// The limit pressure p(beta, h) evaluated at a fixed point with finite
/// components.
pub fn bethe_pressure(spec: &ModelSpec, zbar: &CavityVector) -> Result<f64> {
    let edges = class_edge_set(spec);
    if zbar.len() != edges.len() {
        return Err(Error::Structural(
            "cavity vector does not match the edge set".into(),
        ));
    }
    if zbar.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "pressure needs a fixed point with finite components".into(),
        ));
    }
    let mut edge_part = 0.0;
    let mut vertex_part = 0.0;
    for a in 0..spec.n() {
        let alpha = spec.alpha_f64(a);
        let mut inner = 0.0;
        let mut log_plus = spec.h(a);
        let mut log_minus = -spec.h(a);
        for &c in edges.neighbors(a) {
            let theta = spec.beta(a, c).tanh();
            let k = spec.k(a, c) as f64;
            let m_out = zbar.get(edges.index_of(a, c).unwrap()).tanh();
            let m_in = zbar.get(edges.index_of(c, a).unwrap()).tanh();
            inner += k * (0.5 * (1.0 - theta * theta).ln() + (theta * m_out * m_in).ln_1p());
            log_plus += k * (theta * m_in).ln_1p();
            log_minus += k * (-theta * m_in).ln_1p();
        }
        edge_part += alpha * inner;
        vertex_part += alpha * log_add_exp(log_plus, log_minus);
    }
    Ok(-0.5 * edge_part + vertex_part)
}

/// d p / d beta_aa' at the fixed point:
/// (alpha_a k_aa' / 2^{delta_aa'}) * edge_correlation(a, a').
pub fn pressure_beta_derivative(
    spec: &ModelSpec,
    zbar: &CavityVector,
    a: usize,
    a2: usize,
) -> Result<f64> {
    Ok(edge_type_weight(spec, a, a2) * edge_correlation(spec, zbar, a, a2)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpontaneousMagnetization {
    pub regime: PhaseRegime,
    pub rho: f64,
    /// Zero in the subcritical phase, positive above; absent in the critical
    /// window where no value is guaranteed.
    pub value: Option<f64>,
}

/// The h -> 0+ spontaneous magnetization of class a, from the zero-field
/// positive fixed point.
pub fn spontaneous_magnetization(spec: &ModelSpec, a: usize) -> Result<SpontaneousMagnetization> {
    let zf = cavity::fixed_point_zero_field_positive(spec, cavity::DEFAULT_TOL)?;
    let value = match zf.regime {
        PhaseRegime::Subcritical => Some(0.0),
        PhaseRegime::Supercritical => Some(magnetization(spec, &zf.z, a)),
        PhaseRegime::Critical => None,
    };
    Ok(SpontaneousMagnetization {
        regime: zf.regime,
        rho: zf.rho,
        value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeCorrelationEntry {
    /// 1-based class labels of the unordered pair.
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

/// Everything the solver reports at a fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableReport {
    pub schema_version: u32,
    pub magnetizations: Vec<f64>,
    pub edge_correlations: Vec<EdgeCorrelationEntry>,
    pub avg_magnetization: f64,
    pub avg_edge_correlation_density: f64,
    pub bethe_pressure: f64,
    pub rho_m: f64,
    pub regime: PhaseRegime,
    /// Per-class spontaneous magnetization, reported in the zero-field
    /// supercritical phase.
    pub spontaneous: Option<Vec<f64>>,
}

impl ObservableReport {
    pub fn compute(spec: &ModelSpec, zbar: &CavityVector) -> Result<Self> {
        let rho = spectral::build_m(spec).spectral_radius(1e-12)?;
        let regime = PhaseRegime::classify(rho);
        let edges = class_edge_set(spec);
        let magnetizations: Vec<f64> = (0..spec.n())
            .map(|a| magnetization(spec, zbar, a))
            .collect();
        let mut edge_correlations = Vec::new();
        for &(a, b) in edges.edges() {
            if a > b {
                continue;
            }
            edge_correlations.push(EdgeCorrelationEntry {
                a: a + 1,
                b: b + 1,
                value: edge_correlation(spec, zbar, a, b)?,
            });
        }
        let (avg_magnetization, avg_edge_correlation_density) = averages(spec, zbar)?;
        // At zero field the caller may have handed in any of the fixed
        // points, so S_a is recomputed from the positive one.
        let spontaneous = if spec.zero_field() && regime == PhaseRegime::Supercritical {
            match cavity::fixed_point_zero_field_positive(spec, cavity::DEFAULT_TOL) {
                Ok(zf) => Some(
                    (0..spec.n())
                        .map(|a| magnetization(spec, &zf.z, a))
                        .collect(),
                ),
                Err(Error::UnsupportedRegime(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(ObservableReport {
            schema_version: 1,
            magnetizations,
            edge_correlations,
            avg_magnetization,
            avg_edge_correlation_density,
            bethe_pressure: bethe_pressure(spec, zbar)?,
            rho_m: rho,
            regime,
            spontaneous,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("json encoding cannot fail")
    }
}
