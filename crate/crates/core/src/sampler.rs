//! Seeded random generation of feasible model instances and small spin
//! systems, used by the verification suites.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::SpinSystem;
use crate::model::{validate_spec, ModelSpec, Rational};

/// Constraints for random spec generation. Sampling is rejection-based: draw
/// a candidate class graph, derive exact ratios, retry until every constraint
/// holds.
#[derive(Debug, Clone)]
pub struct SpecSampler {
    pub max_classes: usize,
    pub max_degree: u32,
    pub beta_range: (f64, f64),
    pub field_range: (f64, f64),
    /// Require k_a >= 2 for every class.
    pub min_degree_two: bool,
    /// Clamp fields to be non-negative.
    pub nonneg_fields: bool,
    /// Require at least one field >= 0.05 (avoids the all-zero corner).
    pub force_positive_field: bool,
}

impl Default for SpecSampler {
    fn default() -> Self {
        Self {
            max_classes: 3,
            max_degree: 3,
            beta_range: (0.0, 1.0),
            field_range: (0.0, 1.0),
            min_degree_two: false,
            nonneg_fields: true,
            force_positive_field: false,
        }
    }
}

impl SpecSampler {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<ModelSpec> {
        for _ in 0..10_000 {
            if let Some(spec) = self.try_sample(rng) {
                return Ok(spec);
            }
        }
        Err(Error::Numeric(
            "spec sampler exhausted its rejection budget".into(),
        ))
    }

    fn try_sample(&self, rng: &mut ChaCha8Rng) -> Option<ModelSpec> {
        let n = rng.gen_range(1..=self.max_classes);
        let mut k = vec![vec![0u32; n]; n];
        let mut alpha = vec![Rational::new(1, n as i64); n];

        if n == 1 || rng.gen_bool(0.5) {
            // symmetric degree matrix with uniform ratios
            for a in 0..n {
                for b in a..n {
                    let v = rng.gen_range(0..=self.max_degree);
                    k[a][b] = v;
                    k[b][a] = v;
                }
            }
        } else {
            // class weights w_a fix the ratios; reciprocal degrees must then
            // satisfy w_a k_ab = w_b k_ba exactly
            let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
            let total: i64 = w.iter().sum();
            for a in 0..n {
                alpha[a] = Rational::new(w[a], total);
            }
            for a in 0..n {
                k[a][a] = rng.gen_range(0..=self.max_degree);
                for b in a + 1..n {
                    for _ in 0..8 {
                        let kab = rng.gen_range(0..=self.max_degree);
                        let num = w[a] * kab as i64;
                        if num % w[b] != 0 {
                            continue;
                        }
                        let kba = (num / w[b]) as u32;
                        if kba <= self.max_degree {
                            k[a][b] = kab;
                            k[b][a] = kba;
                            break;
                        }
                    }
                }
            }
        }

        if self.min_degree_two {
            let ok = (0..n).all(|a| k[a].iter().sum::<u32>() >= 2);
            if !ok {
                return None;
            }
        } else if (0..n).any(|a| k[a].iter().sum::<u32>() == 0) {
            return None;
        }

        let mut beta = BTreeMap::new();
        for a in 0..n {
            for b in a..n {
                if k[a][b] != 0 || k[b][a] != 0 {
                    beta.insert((a, b), rng.gen_range(self.beta_range.0..=self.beta_range.1));
                }
            }
        }
        let h: Vec<f64> = (0..n)
            .map(|_| {
                let lo = if self.nonneg_fields {
                    self.field_range.0.max(0.0)
                } else {
                    self.field_range.0
                };
                rng.gen_range(lo..=self.field_range.1)
            })
            .collect();
        if self.force_positive_field && !h.iter().any(|&x| x >= 0.05) {
            return None;
        }
        let spec = ModelSpec::new(k, alpha, beta, h).ok()?;
        validate_spec(&spec).verdict.then_some(spec)
    }
}

/// A random small spin system on up to `max_vertices` spins: each pair is an
/// edge with probability 1/2, couplings in [0, 1], fields in the given range.
pub fn random_spin_system(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    field_range: (f64, f64),
) -> SpinSystem {
    let n = rng.gen_range(2..=max_vertices);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.5) {
                edges.push((u, v, rng.gen_range(0.0..=1.0)));
            }
        }
    }
    let fields = (0..n)
        .map(|_| rng.gen_range(field_range.0..=field_range.1))
        .collect();
    SpinSystem::new(n, edges, fields).expect("indices and weights are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sampled_specs_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sampler = SpecSampler::default();
        for _ in 0..50 {
            let spec = sampler.sample(&mut rng).unwrap();
            assert!(validate_spec(&spec).verdict);
            assert!(spec.n() <= 3);
        }
    }

    #[test]
    fn sampled_specs_round_trip_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sampler = SpecSampler {
            nonneg_fields: false,
            field_range: (-1.0, 1.0),
            ..SpecSampler::default()
        };
        for _ in 0..50 {
            let spec = sampler.sample(&mut rng).unwrap();
            let back = crate::model::ModelSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(spec, back);
        }
    }

    #[test]
    fn min_degree_constraint_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sampler = SpecSampler {
            min_degree_two: true,
            ..SpecSampler::default()
        };
        for _ in 0..30 {
            let spec = sampler.sample(&mut rng).unwrap();
            assert!((0..spec.n()).all(|a| spec.degree(a) >= 2));
        }
    }

    #[test]
    fn mixed_sign_fields_possible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sampler = SpecSampler {
            nonneg_fields: false,
            field_range: (-1.0, 1.0),
            ..SpecSampler::default()
        };
        let mut saw_negative = false;
        for _ in 0..50 {
            let spec = sampler.sample(&mut rng).unwrap();
            if (0..spec.n()).any(|a| spec.h(a) < 0.0) {
                saw_negative = true;
            }
        }
        assert!(saw_negative);
    }

    #[test]
    fn random_systems_are_enumerable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let sys = random_spin_system(&mut rng, 8, (0.0, 1.0));
            assert!(sys.vertex_count() <= 8);
            assert!(crate::exact::gibbs_enumerate(&sys).is_ok());
        }
    }
}
