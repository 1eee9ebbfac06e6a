//! Deterministic low-discrepancy sample points.

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::SpaceTimePoint;
use crate::frames::{GalileiSpec, RotationSpec};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;
pub const DEFAULT_POINTS: usize = 200;
/// Radius of the ball around the origin excluded from sampling.
pub const EXCLUSION_RADIUS: f64 = 0.1;
/// Minimum number of valid points for a verdict.
pub const MIN_VALID_POINTS: usize = 50;

const BASES: [u32; 4] = [2, 3, 5, 7];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// `n` points of a shifted Halton sequence in `[-1,1]^3 x [0,1]`, skipping
/// the ball `|x| < EXCLUSION_RADIUS`.
pub fn sample_points(n: usize, seed: u64) -> Vec<SpaceTimePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let mut out = Vec::with_capacity(n);
    let mut i = 1u64;
    while out.len() < n {
        let u: [f64; 4] = std::array::from_fn(|d| (radical_inverse(i, BASES[d]) + shift[d]).fract());
        i += 1;
        let x = Vector3::new(2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0, 2.0 * u[2] - 1.0);
        if x.norm() >= EXCLUSION_RADIUS {
            out.push(SpaceTimePoint::new(u[3], x));
        }
    }
    out
}

/// The default point set.
pub fn default_points() -> Vec<SpaceTimePoint> {
    sample_points(DEFAULT_POINTS, DEFAULT_SEED)
}

/// Random proper rotation matrix.
pub fn random_rotation_matrix(rng: &mut impl Rng) -> nalgebra::Matrix3<f64> {
    let axis = random_unit(rng);
    Rotation3::new(axis * rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).into_inner()
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `n` seeded rotation specs with random axes, phases and rates with
/// `0.2 <= |rate| <= 2`.
pub fn random_rotation_specs(n: usize, seed: u64) -> Vec<RotationSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let axis = random_unit(&mut rng);
            let rate = rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            RotationSpec::new(axis, rate, phase).expect("unit axis")
        })
        .collect()
}

/// `n` seeded Galilei specs: random rotation, `v` and `c` in `[-2,2]^3`,
/// `tau` in `[-1,1]`.
pub fn random_galilei_specs(n: usize, seed: u64) -> Vec<GalileiSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = random_rotation_matrix(&mut rng);
            let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let c = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            GalileiSpec::new(r, v, c, rng.random_range(-1.0..1.0)).expect("proper rotation")
        })
        .collect()
}
