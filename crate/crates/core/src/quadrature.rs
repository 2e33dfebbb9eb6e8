//! Quadrature on S³ in Hopf coordinates
//! `x = (cos η cos ξ₁, cos η sin ξ₁, sin η cos ξ₂, sin η sin ξ₂)`.
//!
//! With `t = sin²η` the volume form is `½ dt dξ₁ dξ₂`, so Gauss–Legendre
//! nodes in `t ∈ (0, 1)` integrate against the `cos η sin η dη` weight, and
//! the two angles use the midpoint (half-step offset) rule. The grid may be
//! rotated by an orthogonal matrix; this moves the Gauss-clustered circle
//! `t → 0` onto a chosen great circle.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix4, SVector, Vector4};

use crate::error::{Error, Result};
use crate::maps::SphereMap;
use crate::reduce;
use crate::s3geom::PointS3;

pub const VOLUME_S3: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;

pub const MIN_ETA: usize = 4;
pub const MIN_XI: usize = 8;

/// Gauss–Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        x[k] = -z;
        x[n - 1 - k] = z;
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resolution {
    pub n_eta: usize,
    pub n_xi1: usize,
    pub n_xi2: usize,
}

impl Resolution {
    pub const DEFAULT: Resolution = Resolution { n_eta: 24, n_xi1: 48, n_xi2: 48 };

    pub fn new(n_eta: usize, n_xi1: usize, n_xi2: usize) -> Result<Resolution> {
        if n_eta < MIN_ETA || n_xi1 < MIN_XI || n_xi2 < MIN_XI {
            return Err(Error::Config(format!(
                "grid {n_eta}x{n_xi1}x{n_xi2} below the minimum {MIN_ETA}x{MIN_XI}x{MIN_XI}"
            )));
        }
        Ok(Resolution { n_eta, n_xi1, n_xi2 })
    }

    pub fn nodes(&self) -> usize {
        self.n_eta * self.n_xi1 * self.n_xi2
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::DEFAULT
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n_eta, self.n_xi1, self.n_xi2)
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Resolution> {
        let parts: Vec<&str> = s.split('x').collect();
        let bad = || Error::Config(format!("grid must look like 24x48x48, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<usize> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        Resolution::new(n[0], n[1], n[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub point: PointS3,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    resolution: Resolution,
    orientation: Option<Matrix4<f64>>,
    /// nodes in `t = sin²η` on (0, 1)
    t: Vec<f64>,
    /// `½ w_t (2π/n_ξ₁)(2π/n_ξ₂)`
    weight: Vec<f64>,
    xi1: Vec<(f64, f64)>,
    xi2: Vec<(f64, f64)>,
}

/// Phase of the periodic angles in units of their step.
pub const OFFSET: f64 = 0.5;

fn angles(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let a = (k as f64 + OFFSET) * std::f64::consts::TAU / n as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

pub fn build_grid(n_eta: usize, n_xi1: usize, n_xi2: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::new(Resolution::new(n_eta, n_xi1, n_xi2)?)
}

impl QuadratureGrid {
    pub fn new(resolution: Resolution) -> Result<QuadratureGrid> {
        let Resolution { n_eta, n_xi1, n_xi2 } = Resolution::new(resolution.n_eta, resolution.n_xi1, resolution.n_xi2)?;
        let (x, w) = gauss_legendre(n_eta);
        let angular = std::f64::consts::TAU / n_xi1 as f64 * std::f64::consts::TAU / n_xi2 as f64;
        Ok(QuadratureGrid {
            resolution,
            orientation: None,
            t: x.iter().map(|x| 0.5 * (1.0 + x)).collect(),
            weight: w.iter().map(|w| 0.25 * w * angular).collect(),
            xi1: angles(n_xi1),
            xi2: angles(n_xi2),
        })
    }

    /// Rotate every node by `r`.
    pub fn with_orientation(mut self, r: Matrix4<f64>) -> Result<QuadratureGrid> {
        let e = (r.transpose() * r - Matrix4::identity()).amax();
        if !(e <= 1e-12) {
            return Err(Error::Config(format!("grid orientation is not orthogonal (|RᵀR − I| = {e:e})")));
        }
        self.orientation = Some(r);
        Ok(self)
    }

    /// Grid oriented along the concentration circle of `u`, if it has one.
    pub fn for_map(resolution: Resolution, u: &SphereMap) -> Result<QuadratureGrid> {
        let g = QuadratureGrid::new(resolution)?;
        match u.concentration_frame() {
            Some(r) => g.with_orientation(r),
            None => Ok(g),
        }
    }

    /// The same grid with `n_η` multiplied by `2^level`.
    pub fn refined(&self, level: u32) -> QuadratureGrid {
        let mut res = self.resolution;
        res.n_eta <<= level;
        let g = QuadratureGrid::new(res).expect("refinement only grows the grid");
        QuadratureGrid { orientation: self.orientation, ..g }
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn orientation(&self) -> Option<&Matrix4<f64>> {
        self.orientation.as_ref()
    }

    pub fn len(&self) -> usize {
        self.resolution.nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, index: usize) -> Node {
        let n2 = self.resolution.n_xi2;
        let n1 = self.resolution.n_xi1;
        let i2 = index % n2;
        let i1 = (index / n2) % n1;
        let k = index / (n1 * n2);
        let t = self.t[k];
        let (c, s) = ((1.0 - t).sqrt(), t.sqrt());
        let (c1, s1) = self.xi1[i1];
        let (c2, s2) = self.xi2[i2];
        let mut x = Vector4::new(c * c1, c * s1, s * c2, s * s2);
        if let Some(r) = &self.orientation {
            x = r * x;
        }
        Node { point: PointS3::normalize(x).expect("unit node"), weight: self.weight[k] }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    pub fn total_weight(&self) -> f64 {
        self.integrate(|_| Ok(1.0)).expect("constant integrand")
    }

    /// `Σ w f(x)` in a fixed order.
    pub fn integrate_values<T, F>(&self, f: F) -> Result<T>
    where
        T: Integrable,
        F: Fn(&PointS3) -> Result<T> + Sync,
    {
        let out = reduce::map_reduce_range(
            self.len(),
            |range| {
                let mut terms = Vec::with_capacity(range.len());
                for k in range {
                    let node = self.node(k);
                    let v = f(&node.point)?;
                    if !v.all_finite() {
                        return Err(Error::NonFinite { point: *node.point.coords() });
                    }
                    terms.push(v.scaled(node.weight));
                }
                Ok(reduce::tree_reduce(terms, |a, b| a.plus_scaled(&b, 1.0)).expect("non-empty chunk"))
            },
            |a, b| a.plus_scaled(&b, 1.0),
        )?;
        out.ok_or_else(|| Error::Config("empty grid".into()))
    }

    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&PointS3) -> Result<f64> + Sync,
    {
        self.integrate_values(f)
    }

    pub fn integrate_with<T, F>(&self, f: F, policy: SingularPolicy) -> Result<Integral<T>>
    where
        T: Integrable,
        F: Fn(&PointS3) -> Result<T> + Sync,
    {
        match policy {
            SingularPolicy::None => {
                let v = self.integrate_values(&f)?;
                Ok(Integral { error_estimate: 0.0, levels: vec![v.clone()], value: v })
            }
            SingularPolicy::Refine(levels) => {
                let mut values = Vec::with_capacity(levels as usize + 1);
                for l in 0..=levels {
                    values.push(self.refined(l).integrate_values(&f)?);
                }
                let last = values[values.len() - 1].clone();
                if values.len() == 1 {
                    return Ok(Integral { value: last, error_estimate: 0.0, levels: values });
                }
                let diff = last.clone().plus_scaled(&values[values.len() - 2], -1.0);
                Ok(Integral {
                    value: last.plus_scaled(&diff, 1.0 / 3.0),
                    error_estimate: diff.max_abs(),
                    levels: values,
                })
            }
        }
    }
}

/// How an integrand with point singularities is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SingularPolicy {
    #[default]
    None,
    /// Integrate on `L + 1` grids with `n_η` doubled each time and extrapolate.
    Refine(u32),
}

/// Result of [`integrate`]. With refinement, `value` is the Richardson
/// extrapolation of the last two levels (second order assumed) and
/// `error_estimate` their difference; without it the estimate is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Integral<T = f64> {
    pub value: T,
    pub error_estimate: f64,
    pub levels: Vec<T>,
}

pub fn integrate<F>(f: F, grid: &QuadratureGrid, policy: SingularPolicy) -> Result<Integral>
where
    F: Fn(&PointS3) -> Result<f64> + Sync,
{
    grid.integrate_with(f, policy)
}

/// Values that can be accumulated by the quadrature.
pub trait Integrable: Clone + Send {
    fn scaled(&self, w: f64) -> Self;
    fn plus_scaled(self, other: &Self, w: f64) -> Self;
    fn all_finite(&self) -> bool;
    fn max_abs(&self) -> f64;
}

impl Integrable for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn plus_scaled(self, other: &Self, w: f64) -> Self {
        self + other * w
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl<const N: usize> Integrable for SVector<f64, N> {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn plus_scaled(self, other: &Self, w: f64) -> Self {
        self + other * w
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
    fn max_abs(&self) -> f64 {
        self.amax()
    }
}

impl Integrable for DVector<f64> {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn plus_scaled(mut self, other: &Self, w: f64) -> Self {
        self.axpy(w, other, 1.0);
        self
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
    fn max_abs(&self) -> f64 {
        self.amax()
    }
}
