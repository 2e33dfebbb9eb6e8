//! Seeded sampling helpers. Every random test point in the crate goes through
//! here so reports are reproducible from their seed.

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::s3geom::PointS3;

pub type SeededRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Uniformly distributed point on S³.
pub fn point_s3<R: Rng + ?Sized>(rng: &mut R) -> PointS3 {
    loop {
        let v = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(p) = PointS3::normalize(v) {
            return p;
        }
    }
}

/// Uniformly distributed point on S².
pub fn point_s2<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random vector tangent to S² at `p`.
pub fn tangent_s2<R: Rng + ?Sized>(rng: &mut R, p: &Vector3<f64>) -> Vector3<f64> {
    let v = gaussian3(rng);
    v - p * p.dot(&v)
}
