//! `φ_a(z) = (1 − |a|²)(z − a)/|z − a|² − a`, a conformal diffeomorphism of
//! the unit sphere of ℝᴰ for `|a| < 1`. The same formula serves S² and S³.

use nalgebra::{Matrix3, SVector, Vector3};

use crate::error::{Error, Result};

pub fn check_parameter<const D: usize>(a: &SVector<f64, D>) -> Result<()> {
    let n = a.norm();
    if !n.is_finite() || n >= 1.0 {
        return Err(Error::domain(format!("Möbius parameter |a| = {n} must be < 1")));
    }
    Ok(())
}

pub fn apply<const D: usize>(a: &SVector<f64, D>, z: &SVector<f64, D>) -> SVector<f64, D> {
    let d = z - a;
    let s = d.norm_squared();
    d * ((1.0 - a.norm_squared()) / s) - a
}

/// Ambient differential `Dφ_a(z)·t`.
pub fn push<const D: usize>(a: &SVector<f64, D>, z: &SVector<f64, D>, t: &SVector<f64, D>) -> SVector<f64, D> {
    let d = z - a;
    let s = d.norm_squared();
    let k = 1.0 - a.norm_squared();
    (t - d * (2.0 * d.dot(t) / s)) * (k / s)
}

/// Image of `z ∈ S²` and the Jacobian `Dφ_a(z)·P_z`, which maps `T_z S²` to
/// `T_{φ_a(z)} S²` and annihilates the normal direction.
pub fn mobius_transform(a: &Vector3<f64>, z: &Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    check_parameter(a)?;
    let nz = z.norm();
    if (nz - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("|z| = {nz} is not 1")));
    }
    let z = z / nz;
    let proj = Matrix3::identity() - z * z.transpose();
    let cols = [0, 1, 2].map(|k| push(a, &z, &proj.column(k).into_owned()));
    Ok((apply(a, &z), Matrix3::from_columns(&cols)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::Vector4;

    #[test]
    fn identity_at_zero() {
        let mut r = rng::seeded(1);
        for _ in 0..20 {
            let z = rng::point_s2(&mut r);
            let (w, j) = mobius_transform(&Vector3::zeros(), &z).unwrap();
            assert!((w - z).amax() < 1e-15);
            let t = rng::tangent_s2(&mut r, &z);
            assert!((j * t - t).amax() < 1e-14);
        }
    }

    #[test]
    fn fixed_points() {
        let a = Vector3::new(0.3, -0.5, 0.2);
        let ah = a / a.norm();
        assert!((mobius_transform(&a, &ah).unwrap().0 - ah).amax() < 1e-14);
        assert!((mobius_transform(&a, &(-ah)).unwrap().0 + ah).amax() < 1e-14);
    }

    #[test]
    fn rejects_boundary_parameter() {
        assert!(mobius_transform(&Vector3::new(1.0, 0.0, 0.0), &Vector3::z()).is_err());
        assert!(check_parameter(&Vector4::new(0.6, 0.6, 0.6, 0.0)).is_err());
    }

    #[test]
    fn stays_on_sphere_and_inverse_is_negated_parameter() {
        let mut r = rng::seeded(2);
        let a = Vector4::new(0.4, -0.1, 0.3, 0.5);
        for _ in 0..100 {
            let x = *rng::point_s3(&mut r).coords();
            let y = apply(&a, &x);
            assert!((y.norm() - 1.0).abs() < 1e-12);
            assert!((apply(&(-a), &y) - x).amax() < 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_fd_and_is_conformal() {
        let mut r = rng::seeded(4);
        let a = Vector3::new(0.5, 0.2, -0.4);
        for _ in 0..50 {
            let z = rng::point_s2(&mut r);
            let t = rng::tangent_s2(&mut r, &z);
            let t = t / t.norm();
            let h = 1e-6;
            let zp = (z + t * h).normalize();
            let zm = (z - t * h).normalize();
            let fd = (apply(&a, &zp) - apply(&a, &zm)) / (2.0 * h);
            let (_, j) = mobius_transform(&a, &z).unwrap();
            assert!((j * t - fd).amax() < 1e-7);
            // conformal factor (1−|a|²)/|z−a|²
            let lam = (1.0 - a.norm_squared()) / (z - a).norm_squared();
            assert!(((j * t).norm() - lam).abs() < 1e-12);
        }
    }
}
