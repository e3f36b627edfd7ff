use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mapcalc::{map_jet, MapSpec};
use crate::{Error, Result};

/// Sampling and tolerance settings shared by every verifier operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub count: usize,
    pub seed: u64,
    pub tol_resid: f64,
    pub tol_hwc: f64,
    /// Points are kept only where both domain predicates exceed this.
    pub margin: f64,
    /// Random test functions used to cross-check morphism verdicts.
    pub test_functions: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 200,
            seed: 0,
            tol_resid: 1e-8,
            tol_hwc: 1e-8,
            margin: 1e-3,
            test_functions: 5,
        }
    }
}

impl SamplerConfig {
    pub fn with_count(self, count: usize) -> Self {
        Self { count, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Attempts allowed per requested point before giving up.
pub const ATTEMPTS_PER_POINT: usize = 1000;

/// Rejection sampling in the source chart's box: a point is kept when the
/// source predicate, and the target predicate at its image, both exceed
/// the margin and the map's jet evaluates without error.
pub fn sample_points(map: &MapSpec, cfg: &SamplerConfig) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bounds = map.source().bounds();
    let limit = ATTEMPTS_PER_POINT * cfg.count.max(1);
    let mut out = Vec::with_capacity(cfg.count);
    let mut attempts = 0;
    while out.len() < cfg.count {
        if attempts == limit {
            return Err(Error::SamplerExhausted {
                requested: cfg.count,
                accepted: out.len(),
                attempts,
            });
        }
        attempts += 1;
        let p: Vec<f64> = bounds
            .iter()
            .map(|&[lo, hi]| rng.gen_range(lo..hi))
            .collect();
        if accept(map, &p, cfg.margin) {
            out.push(p);
        }
    }
    Ok(out)
}

fn accept(map: &MapSpec, p: &[f64], margin: f64) -> bool {
    let inside = |v: Result<f64>| matches!(v, Ok(v) if v > margin);
    if !inside(map.source().domain_value(p)) {
        return false;
    }
    let Ok(image) = map.eval(p) else { return false };
    if image.iter().any(|v| !v.is_finite()) || !inside(map.target().domain_value(&image)) {
        return false;
    }
    map_jet(map, p).is_ok()
}
