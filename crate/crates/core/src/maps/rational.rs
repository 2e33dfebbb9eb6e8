//! Rational maps `v = p/q` of the Riemann sphere acting on the unit S².
//!
//! The map is evaluated homogeneously, `[Z : W] ↦ [P(Z,W) : Q(Z,W)]` with
//! `P`, `Q` of degree `max(deg p, deg q)`, in whichever stereographic chart
//! keeps the chart coordinate inside the unit disc (input) and the
//! ratio inside the unit disc (output). No evaluation goes near infinity.
//!
//! Charts: `σ_N(p) = (p₁ + i p₂)/(1 − p₃)`, `σ_S(p) = (p₁ − i p₂)/(1 + p₃) = 1/σ_N(p)`.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative size of the Sylvester resultant below which `p` and `q` are
/// considered to share a root.
pub const RESULTANT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    /// coefficient of `z^k` at index `k`
    p: Vec<Complex64>,
    q: Vec<Complex64>,
    degree: usize,
}

fn trim(mut c: Vec<Complex64>) -> Vec<Complex64> {
    while c.len() > 1 && c.last().is_some_and(|z| z.norm() == 0.0) {
        c.pop();
    }
    c
}

fn max_abs(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Sylvester resultant of two polynomials given by ascending coefficients.
pub fn resultant(p: &[Complex64], q: &[Complex64]) -> Complex64 {
    let m = p.len() - 1;
    let n = q.len() - 1;
    if m == 0 {
        return p[0].powu(n as u32);
    }
    if n == 0 {
        return q[0].powu(m as u32);
    }
    let size = m + n;
    let mut s = DMatrix::<Complex64>::zeros(size, size);
    for row in 0..n {
        for (k, c) in p.iter().rev().enumerate() {
            s[(row, row + k)] = *c;
        }
    }
    for row in 0..m {
        for (k, c) in q.iter().rev().enumerate() {
            s[(n + row, row + k)] = *c;
        }
    }
    s.determinant()
}

impl RationalMap {
    pub fn new(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        let p = trim(p);
        let q = trim(q);
        if p.is_empty() || q.is_empty() {
            return Err(Error::domain("empty polynomial"));
        }
        if p.iter().chain(&q).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("non-finite polynomial coefficient"));
        }
        let (sp, sq) = (max_abs(&p), max_abs(&q));
        if sp == 0.0 || sq == 0.0 {
            return Err(Error::domain("zero polynomial in rational map"));
        }
        let pn: Vec<_> = p.iter().map(|c| c / sp).collect();
        let qn: Vec<_> = q.iter().map(|c| c / sq).collect();
        let res = resultant(&pn, &qn).norm();
        if res < RESULTANT_TOL {
            return Err(Error::domain(format!("p and q share a root (|resultant| = {res:e})")));
        }
        let degree = (p.len() - 1).max(q.len() - 1);
        Ok(RationalMap { p, q, degree })
    }

    /// `z ↦ z`.
    pub fn identity() -> Self {
        RationalMap::new(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0)],
        )
        .expect("z/1 is a valid rational map")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[Complex64] {
        &self.p
    }

    pub fn denominator(&self) -> &[Complex64] {
        &self.q
    }

    /// Homogenized value and partials `(F, ∂_Z F, ∂_W F)` at `(Z, W)`.
    fn homogeneous(&self, c: &[Complex64], z: Complex64, w: Complex64) -> (Complex64, Complex64, Complex64) {
        let d = self.degree;
        let pow = |b: Complex64, e: usize| b.powu(e as u32);
        let mut f = Complex64::new(0.0, 0.0);
        let mut fz = f;
        let mut fw = f;
        for (k, ck) in c.iter().enumerate() {
            f += ck * pow(z, k) * pow(w, d - k);
            if k > 0 {
                fz += ck * (k as f64) * pow(z, k - 1) * pow(w, d - k);
            }
            if d > k {
                fw += ck * ((d - k) as f64) * pow(z, k) * pow(w, d - k - 1);
            }
        }
        (f, fz, fw)
    }

    /// Value at a point of S² and pushforward of the given tangent vectors.
    pub fn push(&self, p: &Vector3<f64>, tangents: &mut [Vector3<f64>]) -> Vector3<f64> {
        let north = p[2] <= 0.0;
        let c = chart(north, p);
        let dc = |t: &Vector3<f64>| chart_push(north, p, t);
        let one = Complex64::new(1.0, 0.0);
        let (zz, ww) = if north { (c, one) } else { (one, c) };
        let (pv, pz, pw) = self.homogeneous(&self.p, zz, ww);
        let (qv, qz, qw) = self.homogeneous(&self.q, zz, ww);
        let (pc, qc) = if north { (pz, qz) } else { (pw, qw) };

        if pv.norm() <= qv.norm() {
            let r = pv / qv;
            let dr = (pc * qv - pv * qc) / (qv * qv);
            for t in tangents.iter_mut() {
                *t = inverse_north_push(r, dr * dc(t));
            }
            inverse_north(r)
        } else {
            let s = qv / pv;
            let ds = (qc * pv - qv * pc) / (pv * pv);
            for t in tangents.iter_mut() {
                *t = inverse_south_push(s, ds * dc(t));
            }
            inverse_south(s)
        }
    }
}

fn chart(north: bool, p: &Vector3<f64>) -> Complex64 {
    if north {
        Complex64::new(p[0], p[1]) / (1.0 - p[2])
    } else {
        Complex64::new(p[0], -p[1]) / (1.0 + p[2])
    }
}

fn chart_push(north: bool, p: &Vector3<f64>, t: &Vector3<f64>) -> Complex64 {
    if north {
        let den = 1.0 - p[2];
        Complex64::new(t[0], t[1]) / den + Complex64::new(p[0], p[1]) * (t[2] / (den * den))
    } else {
        let den = 1.0 + p[2];
        Complex64::new(t[0], -t[1]) / den - Complex64::new(p[0], -p[1]) * (t[2] / (den * den))
    }
}

fn inverse_north(z: Complex64) -> Vector3<f64> {
    let d = 1.0 + z.norm_sqr();
    Vector3::new(2.0 * z.re, 2.0 * z.im, z.norm_sqr() - 1.0) / d
}

fn inverse_north_push(z: Complex64, dz: Complex64) -> Vector3<f64> {
    let d = 1.0 + z.norm_sqr();
    let n = Vector3::new(2.0 * z.re, 2.0 * z.im, z.norm_sqr() - 1.0);
    let dd = 2.0 * (z.re * dz.re + z.im * dz.im);
    let dn = Vector3::new(2.0 * dz.re, 2.0 * dz.im, dd);
    dn / d - n * (dd / (d * d))
}

fn inverse_south(z: Complex64) -> Vector3<f64> {
    let d = 1.0 + z.norm_sqr();
    Vector3::new(2.0 * z.re, -2.0 * z.im, 1.0 - z.norm_sqr()) / d
}

fn inverse_south_push(z: Complex64, dz: Complex64) -> Vector3<f64> {
    let d = 1.0 + z.norm_sqr();
    let n = Vector3::new(2.0 * z.re, -2.0 * z.im, 1.0 - z.norm_sqr());
    let dd = 2.0 * (z.re * dz.re + z.im * dz.im);
    let dn = Vector3::new(2.0 * dz.re, -2.0 * dz.im, -dd);
    dn / d - n * (dd / (d * d))
}
