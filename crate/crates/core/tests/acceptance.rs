//! Acceptance suite: one test per verification criterion, each printing a
//! pass line with the measured margin. Run with
//! `cargo test -p multibethe --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{fig1_spec, ols_slope, pass, single_class};
use multibethe::cavity::{
    self, concavity_probe, fixed_point_nonneg, fixed_point_zero_field_positive,
    high_temp_contraction_check, CavityVector, Monotonicity,
};
use multibethe::exact::{
    self, inequality_suite, scalar_zero_field_bisection, tree_recursion_oracle,
    tree_two_point_oracle, InequalityFamily, TreeVariant,
};
use multibethe::graphgen;
use multibethe::mcmc::{estimate_observables, thermo_integrate_pressure, McmcConfig};
use multibethe::model::{class_edge_set, ModelSpec};
use multibethe::observables::{
    bethe_pressure, edge_correlation, magnetization, pressure_beta_derivative,
    spontaneous_magnetization,
};
use multibethe::sampler::{random_spin_system, SpecSampler};
use multibethe::spectral::{build_m, critical_beta, critical_beta_bounds, PhaseRegime};

/// Enumeration cap for the randomized tree corpora.
const MAX_ENUMERABLE: usize = 22;

fn corpus(seed: u64, count: usize, sampler: &SpecSampler) -> Vec<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sampler.sample(&mut rng).expect("sampler budget"))
        .collect()
}

#[test]
fn criterion_01_single_class_critical_point() {
    let spec = single_class(3, 0.4, 0.0);
    let expected = 0.5f64.atanh(); // atanh(1/(k-1)) at k = 3
    let warm = critical_beta(&spec).unwrap();
    assert!((warm - expected).abs() <= 1e-9);
    let mut best = f64::INFINITY;
    for _ in 0..10 {
        let start = Instant::now();
        let bc = critical_beta(&spec).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
        assert!((bc - expected).abs() <= 1e-9, "beta_c = {bc}");
    }
    assert!(best < 1e-3, "critical_beta took {best} s");
    pass(
        1,
        &format!("beta_c = {warm:.10} (target atanh(1/2)), fastest run {best:.2e} s"),
    );
}

#[test]
fn criterion_02_tree_recursion_oracle() {
    let start = Instant::now();
    let sampler = SpecSampler::default(); // n <= 3, k <= 3, beta/h in [0,1]
    let specs = corpus(0xC2, 20, &sampler);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED2);
    let mut worst: f64 = 0.0;
    let mut runs = 0usize;
    for spec in &specs {
        let root = rng.gen_range(0..spec.n());
        let mut max_depth = 1;
        for t in 2..=3usize {
            let size = exact::build_tree(spec, root, t, TreeVariant::Full)
                .unwrap()
                .vertex_count();
            if size <= MAX_ENUMERABLE {
                max_depth = t;
            }
        }
        let dim = class_edge_set(spec).len();
        for depth in 1..=max_depth {
            for h_star in [
                CavityVector::zeros(dim),
                CavityVector::homogeneous(dim, f64::INFINITY),
            ] {
                let record =
                    tree_recursion_oracle(spec, root, depth, TreeVariant::Full, &h_star).unwrap();
                assert!(
                    record.gap <= 1e-10,
                    "gap {} at depth {depth}, root {root}",
                    record.gap
                );
                worst = worst.max(record.gap);
                runs += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed} s");
    pass(
        2,
        &format!("{runs} comparisons over 20 specs, worst gap {worst:.2e}, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_03_two_point_tree_formula() {
    let start = Instant::now();
    let sampler = SpecSampler::default();
    let specs = corpus(0xC3, 20, &sampler);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED3);
    let mut worst: f64 = 0.0;
    let mut runs = 0usize;
    for spec in &specs {
        let edges = class_edge_set(spec);
        let pick = rng.gen_range(0..edges.len());
        let (a, b) = edges.edge(pick);
        let mut max_depth = 0;
        for t in 1..=3usize {
            let size_a = exact::build_tree(spec, a, t, TreeVariant::Pruned(b))
                .unwrap()
                .vertex_count();
            let size_b = exact::build_tree(spec, b, t, TreeVariant::Pruned(a))
                .unwrap()
                .vertex_count();
            if size_a + size_b <= MAX_ENUMERABLE {
                max_depth = t;
            }
        }
        for depth in 0..=max_depth {
            let record = tree_two_point_oracle(spec, a, b, depth).unwrap();
            assert!(
                record.gap <= 1e-12,
                "gap {} on edge ({a},{b}) depth {depth}",
                record.gap
            );
            worst = worst.max(record.gap);
            runs += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed} s");
    pass(
        3,
        &format!("{runs} comparisons over 20 specs, worst gap {worst:.2e}, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_04_boundary_squeeze_uniqueness() {
    let sampler = SpecSampler {
        min_degree_two: true,
        force_positive_field: true,
        ..SpecSampler::default()
    };
    let specs = corpus(0xC4, 20, &sampler);
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let sq = cavity::fixed_point_nonneg_opts(spec, 1e-12, 2_000_000).unwrap();
        assert!(sq.converged, "solver did not converge");
        assert_eq!(
            sq.from_free.monotonicity_witness,
            Monotonicity::NonDecreasing
        );
        assert_eq!(
            sq.from_plus.monotonicity_witness,
            Monotonicity::NonIncreasing
        );
        assert!(sq.boundary_gap <= 1e-10, "gap {}", sq.boundary_gap);
        worst = worst.max(sq.boundary_gap);
    }
    pass(
        4,
        &format!("20 specs squeezed, worst boundary gap {worst:.2e}"),
    );
}

#[test]
fn criterion_05_high_temperature_mixed_fields() {
    let sampler = SpecSampler {
        nonneg_fields: false,
        field_range: (-1.0, 1.0),
        ..SpecSampler::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 20 {
        let mut spec = sampler.sample(&mut rng).unwrap();
        if !(0..spec.n()).any(|a| spec.h(a) < 0.0) {
            continue; // want genuinely mixed-sign fields
        }
        // scale couplings down into the contraction regime
        loop {
            let rho = build_m(&spec).spectral_radius(1e-12).unwrap();
            if rho < 0.9 {
                break;
            }
            spec = spec.scaled_beta(0.7);
        }
        let check = high_temp_contraction_check(&spec).unwrap();
        assert!(check.rho < 0.9);
        assert!(check.unique, "rho = {}", check.rho);
        let gap = check
            .gap
            .unwrap()
            .values()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-10, "gap {gap}");
        worst = worst.max(gap);
        done += 1;
    }
    pass(
        5,
        &format!("20 mixed-field specs with rho < 0.9, worst boundary gap {worst:.2e}"),
    );
}

#[test]
fn criterion_06_pressure_derivative_identity() {
    let mut worst: f64 = 0.0;
    for spec in [single_class(3, 0.2, 0.1), fig1_spec(0.3, 0.1)] {
        let edges = class_edge_set(&spec);
        let z = fixed_point_nonneg(&spec, 1e-13).unwrap().z;
        for &(a, b) in edges.edges() {
            if a > b {
                continue;
            }
            let closed = pressure_beta_derivative(&spec, &z, a, b).unwrap();
            let step = 1e-4;
            let base = spec.beta(a, b);
            let mut fd = 0.0;
            for (sign, weight) in [(1.0, 0.5), (-1.0, -0.5)] {
                let shifted = spec.with_beta(a, b, base + sign * step).unwrap();
                let zs = fixed_point_nonneg(&shifted, 1e-13).unwrap().z;
                fd += weight * bethe_pressure(&shifted, &zs).unwrap();
            }
            fd /= step;
            let gap = (closed - fd).abs();
            assert!(gap <= 1e-6, "pair ({a},{b}): closed {closed}, fd {fd}");
            worst = worst.max(gap);
        }
    }
    pass(
        6,
        &format!("d p / d beta matches finite differences, worst gap {worst:.2e}"),
    );
}

#[test]
fn criterion_07_pressure_at_beta_zero() {
    let mut worst: f64 = 0.0;
    for (spec, n) in [
        (single_class(3, 0.0, 0.7), 1usize),
        (fig1_spec(0.0, 0.35), 3),
        (fig1_spec(0.0, 2.0), 3),
    ] {
        let z = fixed_point_nonneg(&spec, 1e-14).unwrap().z;
        let p = bethe_pressure(&spec, &z).unwrap();
        let expected = 2.0f64.ln()
            + (0..n)
                .map(|a| spec.alpha_f64(a) * spec.h(a).cosh().ln())
                .sum::<f64>();
        let gap = (p - expected).abs();
        assert!(gap <= 1e-14, "gap {gap}");
        worst = worst.max(gap);
    }
    pass(
        7,
        &format!("p(0,h) = log 2 + sum alpha log cosh h, worst gap {worst:.2e}"),
    );
}

#[test]
fn criterion_08_phase_transition_sign_pattern() {
    let mut details = String::new();
    for beta in [0.45, 0.50, 0.60, 0.65] {
        let spec = single_class(3, beta, 0.0);
        let s = spontaneous_magnetization(&spec, 0).unwrap();
        if beta < 0.55 {
            assert_eq!(s.regime, PhaseRegime::Subcritical, "beta {beta}");
            assert_eq!(s.value, Some(0.0));
        } else {
            assert_eq!(s.regime, PhaseRegime::Supercritical, "beta {beta}");
            let value = s.value.unwrap();
            assert!(value > 0.1, "S({beta}) = {value}");
            // the epsilon*v-initialized limit itself against the bisection oracle
            let zf = fixed_point_zero_field_positive(&spec, 1e-12).unwrap();
            let from_eps = zf.from_epsilon_v.as_ref().unwrap();
            let oracle = scalar_zero_field_bisection(3, beta, 1e-14);
            let gap = (from_eps.z.get(0) - oracle).abs();
            assert!(gap <= 1e-9, "z+ gap {gap} at beta {beta}");
        }
        details.push_str(&format!(
            "S({beta}) = {:.4}; ",
            s.value.unwrap_or(f64::NAN)
        ));
    }
    pass(8, &details);
}

#[test]
fn criterion_09_critical_beta_bounds() {
    let sampler = SpecSampler {
        min_degree_two: true,
        ..SpecSampler::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    for _ in 0..50 {
        let spec = sampler.sample(&mut rng).unwrap();
        // the critical line is defined for homogeneous couplings; the value
        // of beta itself does not enter rho(Mbar)
        let mut homog = spec.clone();
        let edges = class_edge_set(&spec);
        for &(a, b) in edges.edges() {
            homog = homog.with_beta(a, b, 0.5).unwrap();
        }
        let bc = critical_beta(&homog).unwrap();
        let (lo, hi) = critical_beta_bounds(&homog);
        assert!(
            lo <= bc + 1e-12 && bc <= hi + 1e-12,
            "bounds violated: {lo} <= {bc} <= {hi}"
        );
    }
    pass(9, "50 random specs: atanh(1/(max k - 1)) <= beta_c <= atanh(1/(min k - 1))");
}

#[test]
fn criterion_10_finite_n_mcmc_convergence() {
    let start = Instant::now();
    let spec = single_class(3, 0.2, 0.1);
    let z = fixed_point_nonneg(&spec, 1e-13).unwrap().z;
    let bp_m = magnetization(&spec, &z, 0);
    let bp_corr = edge_correlation(&spec, &z, 0, 0).unwrap();

    let mut worst_m: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for realization in 0..8u64 {
        let graph = graphgen::generate(&spec, 3000, 1000 + realization).unwrap();
        let config = McmcConfig::new(1500, 300, 2, 77 + realization).unwrap();
        let obs = estimate_observables(&graph, &spec, &config).unwrap();
        let m = &obs.magnetization[0];
        let gap = (m.mean - bp_m).abs();
        assert!(
            gap <= (3.0 * m.std_error).max(0.01),
            "realization {realization}: magnetization gap {gap}, se {}",
            m.std_error
        );
        worst_m = worst_m.max(gap);
        let c = &obs.edge_correlation[0].estimate;
        let gap = (c.mean - bp_corr).abs();
        assert!(
            gap <= (3.0 * c.std_error).max(0.01),
            "realization {realization}: correlation gap {gap}, se {}",
            c.std_error
        );
        worst_c = worst_c.max(gap);
    }

    let bp_pressure = bethe_pressure(&spec, &z).unwrap();
    let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let config = McmcConfig::new(900, 180, 2, 4242).unwrap();
    let est = thermo_integrate_pressure(&spec, 3000, &grid, &config).unwrap();
    let p_gap = (est.mean - bp_pressure).abs();
    assert!(
        p_gap <= (3.0 * est.std_error).max(0.01),
        "pressure gap {p_gap}, se {}",
        est.std_error
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed} s");
    pass(
        10,
        &format!(
            "8 graphs at N=3000: worst m gap {worst_m:.4}, corr gap {worst_c:.4}, \
             pressure gap {p_gap:.4} (BP {bp_pressure:.6}), {elapsed:.0} s"
        ),
    );
}

#[test]
fn criterion_11_tree_likeness_trend() {
    let start = Instant::now();
    let spec = fig1_spec(0.3, 0.1);
    let sizes = [40u64, 80, 160, 320];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let f = graphgen::tree_fraction_estimate(&spec, n, 1, 200, 0xBA11 + i as u64).unwrap();
        xs.push(n as f64);
        ys.push((1.0 - f.estimate) * n as f64);
    }
    let (slope, se) = ols_slope(&xs, &ys);
    assert!(
        slope <= 2.0 * se,
        "significant positive trend: slope {slope}, se {se}, y = {ys:?}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed} s");
    pass(
        11,
        &format!(
            "(1 - P(tree)) * N over N = 40..320: {ys:?}, slope {slope:.3} (se {se:.3}), {elapsed:.0} s"
        ),
    );
}

#[test]
fn criterion_12_correlation_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC12);
    let mut worst: f64 = f64::INFINITY;
    let mut checks = 0usize;
    for family in [
        InequalityFamily::Gks,
        InequalityFamily::Fkg,
        InequalityFamily::Ghs,
    ] {
        for i in 0..100 {
            let field_range = match family {
                InequalityFamily::Fkg => (-1.0, 1.0),
                _ => (0.0, 1.0),
            };
            let sys = random_spin_system(&mut rng, 8, field_range);
            let verdict = inequality_suite(&sys, family, 0xF00D + i).unwrap();
            assert!(
                verdict.ok,
                "{} violated on system {i}: margin {}",
                verdict.family.as_str(),
                verdict.worst_margin
            );
            worst = worst.min(verdict.worst_margin);
            checks += verdict.checks;
        }
    }
    pass(
        12,
        &format!("GKS/FKG/GHS on 300 systems, {checks} checks, worst margin {worst:.2e}"),
    );
}

#[test]
fn criterion_13_concavity_probe() {
    let sampler = SpecSampler {
        field_range: (0.1, 1.0),
        ..SpecSampler::default()
    };
    let specs = corpus(0xC13, 10, &sampler);
    let mut worst: f64 = f64::NEG_INFINITY;
    for spec in &specs {
        let edges = class_edge_set(spec);
        let base = CavityVector::zeros(edges.len());
        for &dir in edges.edges() {
            let table = concavity_probe(spec, &base, dir, &[0.0625, 0.03125], 12).unwrap();
            let max = table.max_value();
            assert!(max <= 1e-8, "second difference {max} in direction {dir:?}");
            worst = worst.max(max);
        }
    }
    pass(
        13,
        &format!("10 specs, every boundary coordinate, s <= 12: max second difference {worst:.2e}"),
    );
}

#[test]
fn criterion_14_graph_generator_exactness() {
    let asym = {
        use multibethe::model::Rational;
        use std::collections::BTreeMap;
        let mut map = BTreeMap::new();
        map.insert((0, 1), 0.2);
        map.insert((1, 1), 0.2);
        ModelSpec::new(
            vec![vec![0, 2], vec![1, 2]],
            vec![Rational::new(1, 3), Rational::new(2, 3)],
            map,
            vec![0.0, 0.0],
        )
        .unwrap()
    };
    let matching = {
        use multibethe::model::Rational;
        use std::collections::BTreeMap;
        let mut map = BTreeMap::new();
        map.insert((0, 1), 0.2);
        ModelSpec::new(
            vec![vec![0, 2], vec![2, 0]],
            vec![Rational::new(1, 2), Rational::new(1, 2)],
            map,
            vec![0.0, 0.0],
        )
        .unwrap()
    };
    let cases: [(ModelSpec, u64); 5] = [
        (fig1_spec(0.3, 0.1), 40),
        (single_class(3, 0.2, 0.0), 20),
        (single_class(2, 0.2, 0.0), 12),
        (asym, 18),
        (matching, 16),
    ];
    let mut graphs = 0;
    for (spec, n) in &cases {
        for seed in 0..20u64 {
            let graph = graphgen::generate(spec, *n, seed).unwrap();
            assert!(graphgen::verify_regularity(&graph, spec), "seed {seed}");
            // exact per-type edge counts
            let mut counts = std::collections::BTreeMap::new();
            for (u, v) in graph.edges() {
                let (a, b) = (graph.class_of(u as usize), graph.class_of(v as usize));
                *counts.entry((a.min(b), a.max(b))).or_insert(0u64) += 1;
            }
            for a in 0..spec.n() {
                for b in a..spec.n() {
                    if spec.k(a, b) == 0 && spec.k(b, a) == 0 {
                        continue;
                    }
                    let expected = *n as f64 * spec.alpha_f64(a) * spec.k(a, b) as f64
                        / if a == b { 2.0 } else { 1.0 };
                    let got = counts.get(&(a, b)).copied().unwrap_or(0) as f64;
                    assert_eq!(got, expected, "pair ({a},{b}) seed {seed}");
                }
            }
            graphs += 1;
        }
    }
    pass(
        14,
        &format!("{graphs} graphs across 5 specs: exact regularity and edge-type counts"),
    );
}
