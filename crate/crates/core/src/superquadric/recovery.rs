//! Fit-from-sample recovery runs over random shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{canonicalize, fit_superquadric, sample_surface, FitConfig, SuperquadricParams};
use crate::error::Result;

pub const SCALE_TOLERANCE: f64 = 0.05;
pub const SHAPE_TOLERANCE: f64 = 0.1;

/// A random shape in the range the fitter is expected to handle.
pub fn random_params(rng: &mut impl Rng) -> SuperquadricParams {
    use std::f64::consts::PI;
    SuperquadricParams {
        scale: [0; 3].map(|_| rng.random_range(0.01..0.3)),
        shape: [0; 2].map(|_| rng.random_range(0.3..1.9)),
        euler: [
            rng.random_range(-PI..PI),
            rng.random_range(-1.5..1.5),
            rng.random_range(-PI..PI),
        ],
        taper: [0; 2].map(|_| rng.random_range(-0.5..0.5)),
        center: [0; 3].map(|_| rng.random_range(-0.5..0.5)),
    }
}

/// Canonical scales within 5% per axis and exponents within 0.1.
pub fn recovered(truth: &SuperquadricParams, fitted: &SuperquadricParams) -> bool {
    let (t, f) = (canonicalize(truth), canonicalize(fitted));
    (0..3).all(|k| (f.scale[k] - t.scale[k]).abs() <= SCALE_TOLERANCE * t.scale[k])
        && (0..2).all(|k| (f.shape[k] - t.shape[k]).abs() <= SHAPE_TOLERANCE)
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryCase {
    pub truth: SuperquadricParams,
    pub fitted: SuperquadricParams,
    pub residual: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub seed: u64,
    pub noise: f64,
    pub cases: Vec<RecoveryCase>,
}

impl RecoveryReport {
    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.ok).count()
    }

    pub fn fraction(&self) -> f64 {
        self.passed() as f64 / self.cases.len().max(1) as f64
    }
}

/// Draws `count` shapes from `seed`, samples `points` per shape with
/// Gaussian `noise` (shape `i` uses sample seed `i`) and refits each.
pub fn recovery_suite(count: usize, points: usize, seed: u64, noise: f64, cfg: &FitConfig) -> Result<RecoveryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truths: Vec<SuperquadricParams> = (0..count).map(|_| random_params(&mut rng)).collect();
    let cases = truths
        .par_iter()
        .enumerate()
        .map(|(i, sq)| {
            let cloud = sample_surface(sq, points, noise, i as u64)?;
            let fit = fit_superquadric(&cloud, cfg)?;
            Ok(RecoveryCase {
                truth: *sq,
                fitted: fit.params,
                residual: fit.residual,
                ok: recovered(sq, &fit.params),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveryReport { seed, noise, cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_edges() {
        let t = SuperquadricParams::new([0.1, 0.05, 0.2], [1.0, 1.0], [0.0; 3]);
        let mut f = t;
        f.scale[0] = 0.1049;
        f.shape[1] = 1.099;
        assert!(recovered(&t, &f));
        f.scale[0] = 0.106;
        assert!(!recovered(&t, &f));
    }

    #[test]
    fn random_params_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            random_params(&mut rng).validate().unwrap();
        }
    }
}
