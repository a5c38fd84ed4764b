//! Shared fixtures for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use std::collections::BTreeMap;

use multibethe::model::{ModelSpec, Rational};

pub fn single_class(k: u32, beta: f64, h: f64) -> ModelSpec {
    let mut map = BTreeMap::new();
    map.insert((0, 0), beta);
    ModelSpec::new(vec![vec![k]], vec![Rational::new(1, 1)], map, vec![h]).unwrap()
}

pub fn fig1_spec(beta: f64, h: f64) -> ModelSpec {
    let k = vec![vec![0, 2, 0], vec![1, 1, 1], vec![0, 2, 2]];
    let alpha = vec![
        Rational::new(1, 4),
        Rational::new(1, 2),
        Rational::new(1, 4),
    ];
    let mut map = BTreeMap::new();
    for pair in [(0, 1), (1, 1), (1, 2), (2, 2)] {
        map.insert(pair, beta);
    }
    ModelSpec::new(k, alpha, map, vec![h; 3]).unwrap()
}

/// Ordinary least squares slope of y on x with its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (x.len() - 2).max(1) as f64;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let se = (sse / dof / sxx).sqrt();
    (slope, se)
}

pub fn pass(criterion: usize, detail: &str) {
    println!("[PASS] criterion {criterion}: {detail}");
}
