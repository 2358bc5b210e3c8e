//! Tapered superellipsoids: the 13-parameter part model.
//!
//! In the model frame a point `(x, y, z)` is first untapered along `z`
//! (`x' = x / (kx·z/a3 + 1)`, same for `y`) and then evaluated with
//!
//! ```text
//! F = ((x'/a1)^(2/ε2) + (y'/a2)^(2/ε2))^(ε2/ε1) + (z/a3)^(2/ε1)
//! ```
//!
//! which is `< 1` inside, `1` on the surface and `> 1` outside. The pose maps
//! model coordinates to the cloud frame as `p = R·q + center`, with
//! `R = Rz(ψ)·Ry(θ)·Rx(φ)` and `euler = [φ, θ, ψ]`.

mod canonical;
mod fit;
pub mod recovery;

pub use canonical::canonicalize;
pub use fit::{fit_superquadric, FitConfig, SqFitResult};

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, PointCloud};

pub const EPS_MIN: f64 = 0.1;
pub const EPS_MAX: f64 = 2.0;

/// Denominator floor for the inverse taper; keeps far-away points finite.
const TAPER_DENOM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperquadricParams {
    /// Semi-axis lengths `(a1, a2, a3)` in meters.
    pub scale: [f64; 3],
    /// Shape exponents `(ε1, ε2)`.
    pub shape: [f64; 2],
    /// `(φ, θ, ψ)` in radians.
    pub euler: [f64; 3],
    /// Linear taper `(kx, ky)` along the model `z` axis.
    pub taper: [f64; 2],
    pub center: [f64; 3],
}

impl SuperquadricParams {
    /// Axis-aligned, untapered superellipsoid at `center`.
    pub fn new(scale: [f64; 3], shape: [f64; 2], center: [f64; 3]) -> Self {
        Self {
            scale,
            shape,
            euler: [0.0; 3],
            taper: [0.0; 2],
            center,
        }
    }

    pub fn sphere(radius: f64) -> Self {
        Self::new([radius; 3], [1.0, 1.0], [0.0; 3])
    }

    pub fn with_euler(mut self, euler: [f64; 3]) -> Self {
        self.euler = euler;
        self
    }

    pub fn with_taper(mut self, taper: [f64; 2]) -> Self {
        self.taper = taper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .scale
            .iter()
            .chain(&self.shape)
            .chain(&self.euler)
            .chain(&self.taper)
            .chain(&self.center);
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.scale.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidParams(format!(
                "scale must be positive, got {:?}",
                self.scale
            )));
        }
        if self.shape.iter().any(|&e| !(EPS_MIN..=EPS_MAX).contains(&e)) {
            return Err(Error::InvalidParams(format!(
                "shape exponents must lie in [{EPS_MIN}, {EPS_MAX}], got {:?}",
                self.shape
            )));
        }
        if self.taper.iter().any(|&k| k <= -1.0 || k >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "taper must lie in (-1, 1), got {:?}",
                self.taper
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *Rotation3::from_euler_angles(self.euler[0], self.euler[1], self.euler[2]).matrix()
    }

    pub fn center_point(&self) -> Point {
        Point::from(self.center)
    }

    /// Replaces the orientation with the Euler angles of `rotation`.
    pub fn set_rotation(&mut self, rotation: &Matrix3<f64>) {
        let (r, p, y) = Rotation3::from_matrix_unchecked(*rotation).euler_angles();
        self.euler = [wrap_angle(r), wrap_angle(p), wrap_angle(y)];
    }

    pub fn volume_factor(&self) -> f64 {
        (self.scale[0] * self.scale[1] * self.scale[2]).sqrt()
    }

    /// Maps a point from the model frame (after tapering) to the cloud frame.
    pub fn model_to_world(&self, q: &Point) -> Point {
        self.rotation() * q + self.center_point()
    }

    /// Applies the forward taper to an untapered model-frame point.
    pub fn taper_point(&self, q: &Point) -> Point {
        let fz = q.z / self.scale[2];
        Point::new(q.x * (self.taper[0] * fz + 1.0), q.y * (self.taper[1] * fz + 1.0), q.z)
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Sign-preserving power `sign(u)·|u|^e`.
pub fn signed_pow(u: f64, e: f64) -> f64 {
    u.signum() * u.abs().powf(e)
}

/// Precomputed evaluation data for one parameter set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prepared {
    rt: Matrix3<f64>,
    center: Vector3<f64>,
    inv_scale: [f64; 3],
    taper: [f64; 2],
    e1: f64,
    xy_exp: f64,
    xy_outer: f64,
    z_exp: f64,
    volume: f64,
}

impl Prepared {
    pub(crate) fn new(
        scale: [f64; 3],
        shape: [f64; 2],
        rotation: &Matrix3<f64>,
        taper: [f64; 2],
        center: Vector3<f64>,
    ) -> Self {
        let [e1, e2] = shape;
        Self {
            rt: rotation.transpose(),
            center,
            inv_scale: scale.map(|a| 1.0 / a),
            taper,
            e1,
            xy_exp: 2.0 / e2,
            xy_outer: e2 / e1,
            z_exp: 2.0 / e1,
            volume: (scale[0] * scale[1] * scale[2]).sqrt(),
        }
    }

    pub(crate) fn from_params(sq: &SuperquadricParams) -> Self {
        Self::new(sq.scale, sq.shape, &sq.rotation(), sq.taper, Vector3::from(sq.center))
    }

    #[inline]
    pub(crate) fn inside_outside(&self, p: &Point) -> f64 {
        let q = self.rt * (p - self.center);
        let fz = q.z * self.inv_scale[2];
        let dx = (self.taper[0] * fz + 1.0).max(TAPER_DENOM_FLOOR);
        let dy = (self.taper[1] * fz + 1.0).max(TAPER_DENOM_FLOOR);
        let x = (q.x / dx * self.inv_scale[0]).abs();
        let y = (q.y / dy * self.inv_scale[1]).abs();
        let xy = x.powf(self.xy_exp) + y.powf(self.xy_exp);
        xy.powf(self.xy_outer) + fz.abs().powf(self.z_exp)
    }

    /// `sqrt(a1·a2·a3)·(F^ε1 − 1)`.
    #[inline]
    pub(crate) fn residual(&self, p: &Point) -> f64 {
        self.volume * (self.inside_outside(p).powf(self.e1) - 1.0)
    }
}

/// Inside-outside function of `p` (cloud frame) with respect to `sq`.
pub fn inside_outside(p: &Point, sq: &SuperquadricParams) -> f64 {
    Prepared::from_params(sq).inside_outside(p)
}

/// Volume-weighted squared residual `Σ (sqrt(a1a2a3)·(F(p)^ε1 − 1))²`.
pub fn fit_cost(cloud: &PointCloud, sq: &SuperquadricParams) -> Result<f64> {
    cloud.ensure_non_empty()?;
    let prep = Prepared::from_params(sq);
    Ok(cloud
        .points()
        .iter()
        .map(|p| {
            let r = prep.residual(p);
            r * r
        })
        .sum())
}

/// Draws `n` surface points from the angular parameterization, with `η`
/// chosen as `asin(u)` for uniform `u` so a sphere is sampled uniformly.
/// Taper and pose are applied, then isotropic Gaussian noise.
pub fn sample_surface(sq: &SuperquadricParams, n: usize, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    sq.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).expect("validated sigma");
    let [a1, a2, a3] = sq.scale;
    let [e1, e2] = sq.shape;
    let rot = sq.rotation();
    let center = sq.center_point();

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let eta = u.asin();
        let omega: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let ce = signed_pow(eta.cos(), e1);
        let q = Point::new(
            a1 * ce * signed_pow(omega.cos(), e2),
            a2 * ce * signed_pow(omega.sin(), e2),
            a3 * signed_pow(eta.sin(), e1),
        );
        let mut p = rot * sq.taper_point(&q) + center;
        if noise_sigma > 0.0 {
            p += Point::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
        points.push(p);
    }
    PointCloud::new(points, "sq")
}

/// Draws `n` surface points by casting rays from the centre in uniformly
/// random directions. Dense where the angular sampler is sparse (flat faces,
/// the middle of long bodies) and sparse where it is dense.
pub fn sample_surface_radial(sq: &SuperquadricParams, n: usize, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    sq.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, noise_sigma).expect("validated sigma");
    let [a1, a2, a3] = sq.scale;
    let [e1, e2] = sq.shape;
    let rot = sq.rotation();
    let center = sq.center_point();

    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let d = Point::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
        let len = d.norm();
        if len < 1e-12 {
            continue;
        }
        let d = d / len;
        // F is homogeneous of degree 2/ε1 along rays, so the hit is at F(d)^(-ε1/2).
        let xy = (d.x / a1).abs().powf(2.0 / e2) + (d.y / a2).abs().powf(2.0 / e2);
        let f = xy.powf(e2 / e1) + (d.z / a3).abs().powf(2.0 / e1);
        let q = d * f.powf(-e1 / 2.0);
        let mut p = rot * sq.taper_point(&q) + center;
        if noise_sigma > 0.0 {
            p += Point::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
        points.push(p);
    }
    PointCloud::new(points, "sq")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radial_samples_lie_on_the_surface() {
        let sq = SuperquadricParams::new([0.03, 0.02, 0.1], [0.3, 0.6], [0.1, 0.0, 0.2])
            .with_euler([0.3, 0.2, -0.4])
            .with_taper([0.4, -0.2]);
        let c = sample_surface_radial(&sq, 500, 0.0, 3).unwrap();
        assert_eq!(c.len(), 500);
        for p in c.points() {
            assert!((inside_outside(p, &sq) - 1.0).abs() < 1e-6);
        }
    }

    /// Independent evaluation of `F`: explicit elementary rotations, untaper
    /// by division, powers via `exp(e·ln u)`.
    fn oracle_f(p: [f64; 3], sq: &SuperquadricParams) -> f64 {
        let [phi, theta, psi] = sq.euler;
        let rx = [
            [1.0, 0.0, 0.0],
            [0.0, phi.cos(), -phi.sin()],
            [0.0, phi.sin(), phi.cos()],
        ];
        let ry = [
            [theta.cos(), 0.0, theta.sin()],
            [0.0, 1.0, 0.0],
            [-theta.sin(), 0.0, theta.cos()],
        ];
        let rz = [
            [psi.cos(), -psi.sin(), 0.0],
            [psi.sin(), psi.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            c
        };
        let r = mul(rz, mul(ry, rx));
        let d = [p[0] - sq.center[0], p[1] - sq.center[1], p[2] - sq.center[2]];
        // local = Rᵀ d
        let l: Vec<f64> = (0..3).map(|j| (0..3).map(|i| r[i][j] * d[i]).sum()).collect();
        let z = l[2];
        let x = l[0] / (sq.taper[0] * z / sq.scale[2] + 1.0);
        let y = l[1] / (sq.taper[1] * z / sq.scale[2] + 1.0);
        let pw = |u: f64, e: f64| if u == 0.0 { 0.0 } else { (e * u.abs().ln()).exp() };
        let [e1, e2] = sq.shape;
        let xy = pw(x / sq.scale[0], 2.0 / e2) + pw(y / sq.scale[1], 2.0 / e2);
        pw(xy, e2 / e1) + pw(z / sq.scale[2], 2.0 / e1)
    }

    fn arb_sq() -> impl Strategy<Value = SuperquadricParams> {
        (
            prop::array::uniform3(0.01f64..0.3),
            prop::array::uniform2(0.1f64..2.0),
            prop::array::uniform3(-3.1f64..3.1),
            prop::array::uniform2(-0.9f64..0.9),
            prop::array::uniform3(-1.0f64..1.0),
        )
            .prop_map(|(scale, shape, euler, taper, center)| SuperquadricParams {
                scale,
                shape,
                euler,
                taper,
                center,
            })
    }

    #[test]
    fn center_is_zero() {
        let sq = SuperquadricParams::new([0.1, 0.2, 0.3], [0.4, 1.7], [1.0, 2.0, 3.0])
            .with_euler([0.3, 0.2, 0.1])
            .with_taper([0.2, -0.3]);
        assert_eq!(inside_outside(&sq.center_point(), &sq), 0.0);
    }

    #[test]
    fn unit_sphere_surface_point() {
        let f = inside_outside(&Point::new(1.0, 0.0, 0.0), &SuperquadricParams::sphere(1.0));
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cost_positive_off_surface() {
        let cloud = sample_surface(&SuperquadricParams::sphere(1.0), 200, 0.0, 1).unwrap();
        assert!(fit_cost(&cloud, &SuperquadricParams::sphere(2.0)).unwrap() > 0.0);
    }

    #[test]
    fn cost_matches_scripted_fixture() {
        // Frozen from an independent numpy evaluation of the same cost.
        let sq = SuperquadricParams {
            scale: [0.12, 0.05, 0.2],
            shape: [0.6, 1.3],
            euler: [0.4, -0.7, 1.9],
            taper: [0.25, -0.15],
            center: [0.3, -0.1, 0.05],
        };
        let cloud = PointCloud::from_xyz(
            &[
                [0.35, -0.05, 0.1],
                [0.2, 0.0, 0.0],
                [0.3, -0.1, 0.3],
                [0.45, -0.2, -0.1],
                [0.31, -0.12, 0.04],
            ],
            "f",
        )
        .unwrap();
        let cost = fit_cost(&cloud, &sq).unwrap();
        assert!(
            (cost - COST_FIXTURE).abs() <= 1e-9 * COST_FIXTURE.abs().max(1.0),
            "{cost:.17e}"
        );
    }

    // Independent numpy evaluation: tests/oracles/fit_cost_fixture.py
    const COST_FIXTURE: f64 = 0.10842603549160855;

    #[test]
    fn noiseless_samples_lie_on_surface() {
        let sq = SuperquadricParams {
            scale: [0.15, 0.02, 0.04],
            shape: [0.3, 1.6],
            euler: [1.0, 0.5, -2.0],
            taper: [0.4, -0.6],
            center: [0.1, 0.2, 0.3],
        };
        let c = sample_surface(&sq, 2000, 0.0, 9).unwrap();
        for p in c.points() {
            assert!((inside_outside(p, &sq) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let sq = SuperquadricParams::sphere(0.5);
        assert_eq!(
            sample_surface(&sq, 100, 0.01, 42).unwrap(),
            sample_surface(&sq, 100, 0.01, 42).unwrap()
        );
    }

    #[test]
    fn sphere_sample_centroid() {
        let sq = SuperquadricParams::new([0.2; 3], [1.0, 1.0], [0.5, -0.5, 1.0]);
        let c = sample_surface(&sq, 10_000, 0.0, 5).unwrap();
        assert!((c.centroid().unwrap() - sq.center_point()).norm() < 0.01 * 0.2);
    }

    #[test]
    fn sphere_pca_is_isotropic() {
        let c = sample_surface(&SuperquadricParams::sphere(1.0), 20_000, 0.0, 8).unwrap();
        let f = crate::geom::pca_frame(&c).unwrap();
        // Var of each coordinate on the unit sphere is 1/3.
        for ev in f.eigenvalues {
            assert!((ev - 1.0 / 3.0).abs() < 0.02, "{ev}");
        }
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut sq = SuperquadricParams::sphere(1.0);
        sq.shape = [0.05, 1.0];
        assert!(sq.validate().is_err());
        let mut sq = SuperquadricParams::sphere(1.0);
        sq.taper = [1.0, 0.0];
        assert!(sq.validate().is_err());
        let mut sq = SuperquadricParams::sphere(1.0);
        sq.scale = [0.0, 1.0, 1.0];
        assert!(sq.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let sq = SuperquadricParams::sphere(1.0);
        let v = serde_json::to_value(sq).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["scale", "shape", "euler", "taper", "center"] {
            assert!(v[k].is_array());
        }
    }

    proptest! {
        #[test]
        fn matches_independent_formula(sq in arb_sq(), p in prop::array::uniform3(-1.5f64..1.5)) {
            let got = inside_outside(&Point::from(p), &sq);
            let want = oracle_f(p, &sq);
            // The oracle does not floor the taper denominator.
            let local_z = (sq.rotation().transpose() * (Point::from(p) - sq.center_point())).z;
            let denom = sq.taper.map(|k| k * local_z / sq.scale[2] + 1.0);
            prop_assume!(denom.iter().all(|&d| d > 1e-3));
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
        }

        #[test]
        fn cost_is_non_negative(sq in arb_sq(), seed in 0u64..1000) {
            let cloud = sample_surface(&SuperquadricParams::sphere(0.3), 50, 0.0, seed).unwrap();
            prop_assert!(fit_cost(&cloud, &sq).unwrap() >= 0.0);
        }

        #[test]
        fn surface_samples_satisfy_implicit(sq in arb_sq(), seed in 0u64..1000) {
            let c = sample_surface(&sq, 200, 0.0, seed).unwrap();
            for p in c.points() {
                prop_assert!((inside_outside(p, &sq) - 1.0).abs() < 1e-6);
            }
        }
    }
}
