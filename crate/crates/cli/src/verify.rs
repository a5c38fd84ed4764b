//! Verification suites behind `multibethe verify`, mirroring the acceptance
//! checks on default fixtures: tree oracles, correlation inequalities, Monte
//! Carlo convergence, and the spectral critical line.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multibethe::cavity::{fixed_point_nonneg, fixed_point_zero_field_positive, CavityVector};
use multibethe::exact::{
    build_tree, inequality_suite, scalar_zero_field_bisection, tree_recursion_oracle,
    tree_two_point_oracle, InequalityFamily, TreeVariant,
};
use multibethe::graphgen;
use multibethe::mcmc::{estimate_observables, thermo_integrate_pressure, McmcConfig};
use multibethe::model::{class_edge_set, ModelSpec, Rational};
use multibethe::observables::{
    bethe_pressure, edge_correlation, magnetization, spontaneous_magnetization,
};
use multibethe::sampler::{random_spin_system, SpecSampler};
use multibethe::spectral::{critical_beta, critical_beta_bounds, PhaseRegime};

pub struct CheckResult {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

fn check(name: &'static str, ok: bool, detail: String) -> CheckResult {
    CheckResult { name, ok, detail }
}

fn single_class(k: u32, beta: f64, h: f64) -> ModelSpec {
    let mut map = BTreeMap::new();
    map.insert((0, 0), beta);
    ModelSpec::new(vec![vec![k]], vec![Rational::new(1, 1)], map, vec![h]).unwrap()
}

const MAX_ENUMERABLE: usize = 22;

pub fn trees(seed: u64) -> Vec<CheckResult> {
    let sampler = SpecSampler::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_rec: f64 = 0.0;
    let mut worst_two: f64 = 0.0;
    let mut rec_ok = true;
    let mut two_ok = true;
    for _ in 0..20 {
        let spec = match sampler.sample(&mut rng) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let root = rng.gen_range(0..spec.n());
        let mut depth = 1;
        for t in 2..=3usize {
            if build_tree(&spec, root, t, TreeVariant::Full)
                .map(|tr| tr.vertex_count() <= MAX_ENUMERABLE)
                .unwrap_or(false)
            {
                depth = t;
            }
        }
        let dim = class_edge_set(&spec).len();
        for h_star in [
            CavityVector::zeros(dim),
            CavityVector::homogeneous(dim, f64::INFINITY),
        ] {
            match tree_recursion_oracle(&spec, root, depth, TreeVariant::Full, &h_star) {
                Ok(r) => {
                    worst_rec = worst_rec.max(r.gap);
                    rec_ok &= r.gap <= 1e-10;
                }
                Err(_) => rec_ok = false,
            }
        }

        let edges = class_edge_set(&spec);
        let (a, b) = edges.edge(rng.gen_range(0..edges.len()));
        let mut depth2 = 0;
        for t in 1..=3usize {
            let size = build_tree(&spec, a, t, TreeVariant::Pruned(b))
                .map(|x| x.vertex_count())
                .unwrap_or(usize::MAX)
                + build_tree(&spec, b, t, TreeVariant::Pruned(a))
                    .map(|x| x.vertex_count())
                    .unwrap_or(usize::MAX);
            if size <= MAX_ENUMERABLE {
                depth2 = t;
            }
        }
        match tree_two_point_oracle(&spec, a, b, depth2) {
            Ok(r) => {
                worst_two = worst_two.max(r.gap);
                two_ok &= r.gap <= 1e-12;
            }
            Err(_) => two_ok = false,
        }
    }
    vec![
        check(
            "tree recursion vs enumeration",
            rec_ok,
            format!("worst gap {worst_rec:.2e} (tolerance 1e-10)"),
        ),
        check(
            "two-point formula vs enumeration",
            two_ok,
            format!("worst gap {worst_two:.2e} (tolerance 1e-12)"),
        ),
    ]
}

pub fn inequalities(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for family in [
        InequalityFamily::Gks,
        InequalityFamily::Fkg,
        InequalityFamily::Ghs,
    ] {
        let mut ok = true;
        let mut worst = f64::INFINITY;
        for i in 0..100 {
            let field_range = match family {
                InequalityFamily::Fkg => (-1.0, 1.0),
                _ => (0.0, 1.0),
            };
            let sys = random_spin_system(&mut rng, 8, field_range);
            match inequality_suite(&sys, family, seed ^ (i as u64)) {
                Ok(v) => {
                    worst = worst.min(v.worst_margin);
                    ok &= v.ok;
                }
                Err(_) => ok = false,
            }
        }
        let name = match family {
            InequalityFamily::Gks => "GKS inequalities",
            InequalityFamily::Fkg => "FKG inequalities",
            InequalityFamily::Ghs => "GHS inequalities",
        };
        out.push(check(
            name,
            ok,
            format!("100 systems, worst margin {worst:.2e} (floor -1e-12)"),
        ));
    }
    out
}

pub fn mcmc(seed: u64) -> Vec<CheckResult> {
    let spec = single_class(3, 0.2, 0.1);
    let z = match fixed_point_nonneg(&spec, 1e-13) {
        Ok(sq) => sq.z,
        Err(e) => return vec![check("mcmc fixture solve", false, e.to_string())],
    };
    let bp_m = magnetization(&spec, &z, 0);
    let bp_c = edge_correlation(&spec, &z, 0, 0).unwrap();
    let mut ok_m = true;
    let mut ok_c = true;
    let mut worst_m: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for r in 0..8u64 {
        let graph = match graphgen::generate(&spec, 3000, seed ^ (r + 1)) {
            Ok(g) => g,
            Err(e) => return vec![check("graph generation", false, e.to_string())],
        };
        let config = McmcConfig::new(1500, 300, 2, seed ^ (100 + r)).unwrap();
        match estimate_observables(&graph, &spec, &config) {
            Ok(obs) => {
                let m = &obs.magnetization[0];
                let gap = (m.mean - bp_m).abs();
                ok_m &= gap <= (3.0 * m.std_error).max(0.01);
                worst_m = worst_m.max(gap);
                let c = &obs.edge_correlation[0].estimate;
                let gap = (c.mean - bp_c).abs();
                ok_c &= gap <= (3.0 * c.std_error).max(0.01);
                worst_c = worst_c.max(gap);
            }
            Err(_) => {
                ok_m = false;
                ok_c = false;
            }
        }
    }
    let bp_p = bethe_pressure(&spec, &z).unwrap();
    let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let config = McmcConfig::new(900, 180, 2, seed ^ 0xABCD).unwrap();
    let (ok_p, p_detail) = match thermo_integrate_pressure(&spec, 3000, &grid, &config) {
        Ok(est) => {
            let gap = (est.mean - bp_p).abs();
            (
                gap <= (3.0 * est.std_error).max(0.01),
                format!("gap {gap:.4}, se {:.4}", est.std_error),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    vec![
        check(
            "Glauber magnetization vs closed form",
            ok_m,
            format!("8 graphs at N=3000, worst gap {worst_m:.4}"),
        ),
        check(
            "Glauber edge correlation vs closed form",
            ok_c,
            format!("8 graphs at N=3000, worst gap {worst_c:.4}"),
        ),
        check("thermodynamic integration vs pressure", ok_p, p_detail),
    ]
}

pub fn spectral(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    let bc = critical_beta(&single_class(3, 0.4, 0.0)).unwrap_or(f64::NAN);
    let gap = (bc - 0.5f64.atanh()).abs();
    out.push(check(
        "single-class critical point",
        gap <= 1e-9,
        format!("beta_c = {bc:.10}, gap {gap:.2e}"),
    ));

    let mut sign_ok = true;
    let mut detail = String::new();
    for beta in [0.45, 0.50, 0.60, 0.65] {
        let spec = single_class(3, beta, 0.0);
        match spontaneous_magnetization(&spec, 0) {
            Ok(s) => {
                let value = s.value.unwrap_or(f64::NAN);
                let expected_zero = beta < 0.5493;
                sign_ok &= if expected_zero {
                    value == 0.0
                } else {
                    value > 0.1
                };
                if s.regime == PhaseRegime::Supercritical {
                    let zf = fixed_point_zero_field_positive(&spec, 1e-12).unwrap();
                    let oracle = scalar_zero_field_bisection(3, beta, 1e-14);
                    sign_ok &= (zf.z.get(0) - oracle).abs() <= 1e-9;
                }
                detail.push_str(&format!("S({beta}) = {value:.4}; "));
            }
            Err(e) => {
                sign_ok = false;
                detail = e.to_string();
            }
        }
    }
    out.push(check("phase-transition sign pattern", sign_ok, detail));

    let sampler = SpecSampler {
        min_degree_two: true,
        ..SpecSampler::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bounds_ok = true;
    for _ in 0..50 {
        let spec = match sampler.sample(&mut rng) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let edges = class_edge_set(&spec);
        let mut homog = spec.clone();
        for &(a, b) in edges.edges() {
            homog = homog.with_beta(a, b, 0.5).unwrap();
        }
        match critical_beta(&homog) {
            Ok(bc) => {
                let (lo, hi) = critical_beta_bounds(&homog);
                bounds_ok &= lo <= bc + 1e-12 && bc <= hi + 1e-12;
            }
            Err(_) => bounds_ok = false,
        }
    }
    out.push(check(
        "critical-beta degree bounds",
        bounds_ok,
        "atanh(1/(max k - 1)) <= beta_c <= atanh(1/(min k - 1)) on 50 random specs".into(),
    ));
    out
}
