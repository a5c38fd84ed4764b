//! Frozen reference values for the three-class fixture, computed with an
//! independent 50-digit fixed-point iteration and closed-form evaluation.
//! Anchors the whole pipeline: recursion, observables, averages, pressure.

mod common;

use common::fig1_spec;
use multibethe::cavity::fixed_point_nonneg;
use multibethe::model::class_edge_set;
use multibethe::observables::{averages, bethe_pressure, edge_correlation, magnetization};

// E order: (1,2) (2,1) (2,2) (2,3) (3,2) (3,3), couplings 0.3, fields 0.1
const Z_REF: [f64; 6] = [
    0.17615459176723667,
    0.26708956198035288,
    0.24722109123424742,
    0.22153950990663696,
    0.34265504736384044,
    0.31670849885331496,
];
const M_REF: [f64; 3] = [
    0.24708809840781157,
    0.3076295656722418,
    0.38527746388998052,
];
const CORR_REF: [((usize, usize), f64); 4] = [
    ((0, 1), 0.33239928412082317),
    ((1, 1), 0.34413822828053294),
    ((1, 2), 0.35576226855372047),
    ((2, 2), 0.37500732880049741),
];
const PRESSURE_REF: f64 = 0.77586135629215906;
const AVG_M_REF: f64 = 0.31190617341056892;
const AVG_CORR_REF: f64 = 0.5238671656075294;

#[test]
fn three_class_pipeline_matches_frozen_reference() {
    let spec = fig1_spec(0.3, 0.1);
    let sq = fixed_point_nonneg(&spec, 1e-13).unwrap();
    assert!(sq.converged);
    let edges = class_edge_set(&spec);
    assert_eq!(
        edges.edges(),
        &[(0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
    );
    for (i, &z_ref) in Z_REF.iter().enumerate() {
        assert!(
            (sq.z.get(i) - z_ref).abs() < 1e-11,
            "component {i}: {} vs {z_ref}",
            sq.z.get(i)
        );
    }
    for (a, &m_ref) in M_REF.iter().enumerate() {
        let m = magnetization(&spec, &sq.z, a);
        assert!((m - m_ref).abs() < 1e-11, "class {a}: {m} vs {m_ref}");
    }
    for &((a, b), c_ref) in &CORR_REF {
        let c = edge_correlation(&spec, &sq.z, a, b).unwrap();
        assert!((c - c_ref).abs() < 1e-11, "pair ({a},{b}): {c} vs {c_ref}");
    }
    let p = bethe_pressure(&spec, &sq.z).unwrap();
    assert!((p - PRESSURE_REF).abs() < 1e-11, "pressure {p}");
    let (avg_m, avg_c) = averages(&spec, &sq.z).unwrap();
    assert!((avg_m - AVG_M_REF).abs() < 1e-11, "avg magnetization {avg_m}");
    assert!((avg_c - AVG_CORR_REF).abs() < 1e-11, "avg correlation {avg_c}");
}
