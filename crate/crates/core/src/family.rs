//! Conformal families `u ∘ φ_a`, their average directions and energies, the
//! degree of maps S² → S², and the Hopf invariant of maps S³ → S².

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector3, Vector4};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{mobius, SphereMap, SurfaceMap};
use crate::quadrature::{gauss_legendre, QuadratureGrid, Resolution, SingularPolicy};
#[cfg(test)]
use crate::quadrature::VOLUME_S3;
use crate::rng;
use crate::s3geom::{frame_vectors, PointS3};

/// The Möbius map `φ_a` of S³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalS3 {
    a: Vector4<f64>,
}

impl ConformalS3 {
    pub fn new(a: Vector4<f64>) -> Result<ConformalS3> {
        mobius::check_parameter(&a)?;
        Ok(ConformalS3 { a })
    }

    pub fn parameter(&self) -> &Vector4<f64> {
        &self.a
    }

    pub fn inverse(&self) -> ConformalS3 {
        ConformalS3 { a: -self.a }
    }

    pub fn apply(&self, x: &PointS3) -> PointS3 {
        PointS3::normalize(mobius::apply(&self.a, x.coords())).expect("φ_a maps S³ to S³")
    }

    /// Ambient differential applied to `t`.
    pub fn push(&self, x: &PointS3, t: &Vector4<f64>) -> Vector4<f64> {
        mobius::push(&self.a, x.coords(), t)
    }
}

/// `∫ u dvol` and its direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AverageDirection {
    pub avg: Vector3<f64>,
    /// `None` when `|avg| ≤ 1e−8`
    pub unit_avg: Option<Vector3<f64>>,
}

pub const DEGENERATE_AVERAGE: f64 = 1e-8;

pub fn average_direction(u: &SphereMap, grid: &QuadratureGrid) -> Result<AverageDirection> {
    let avg = grid.integrate_values(|x| u.value(x))?;
    Ok(direction_of(avg))
}

fn direction_of(avg: Vector3<f64>) -> AverageDirection {
    let n = avg.norm();
    AverageDirection { avg, unit_avg: (n > DEGENERATE_AVERAGE).then(|| avg / n) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyMode {
    /// `a` in the open unit ball of ℝ⁴
    A,
    /// `a` in the open unit ball of `{x₄ = 0}`
    B,
}

impl std::str::FromStr for FamilyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<FamilyMode> {
        match s {
            "A" | "a" => Ok(FamilyMode::A),
            "B" | "b" => Ok(FamilyMode::B),
            _ => Err(Error::Config(format!("family mode must be A or B, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSample {
    pub a: Vector4<f64>,
    /// `E(u ∘ φ_a)`, absent when the sample failed
    pub energy: Option<f64>,
    /// `∫ u ∘ φ_a dvol`
    pub average: Option<Vector3<f64>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyProfile {
    pub mode: FamilyMode,
    pub samples: Vec<ProfileSample>,
}

impl FamilyProfile {
    /// Largest sampled energy (the reported sweep maximum).
    pub fn max_energy(&self) -> Option<f64> {
        self.samples.iter().filter_map(|s| s.energy).reduce(f64::max)
    }
}

/// The centre followed by `count` parameters at radius `1 − eps`: uniform
/// random directions on S³ (mode A, from `seed`) or a Fibonacci spiral on
/// S² (mode B).
pub fn family_parameters(mode: FamilyMode, count: usize, eps: f64, seed: u64) -> Result<Vec<Vector4<f64>>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")));
    }
    let r = 1.0 - eps;
    let mut out = vec![Vector4::zeros()];
    match mode {
        FamilyMode::A => {
            let mut g = rng::seeded(seed);
            out.extend((0..count).map(|_| rng::point_s3(&mut g).coords() * r));
        }
        FamilyMode::B => {
            out.extend(fibonacci_sphere(count).into_iter().map(|d| Vector4::new(d[0], d[1], d[2], 0.0) * r));
        }
    }
    Ok(out)
}

pub fn fibonacci_sphere(count: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            Vector3::new(s * t.cos(), s * t.sin(), z)
        })
        .collect()
}

/// `E(u ∘ φ_a)` and `∫ u ∘ φ_a` for each parameter. Singular compositions
/// are integrated with `refine` levels on a grid oriented to the map.
pub fn energy_profile(
    u: &SphereMap,
    mode: FamilyMode,
    params: &[Vector4<f64>],
    resolution: Resolution,
    refine: u32,
) -> Result<FamilyProfile> {
    if mode == FamilyMode::B && params.iter().any(|a| a[3] != 0.0) {
        return Err(Error::Config("mode B parameters must have a₄ = 0".into()));
    }
    let samples = params
        .par_iter()
        .map(|a| match profile_sample(u, a, resolution, refine) {
            Ok((e, avg)) => ProfileSample { a: *a, energy: Some(e), average: Some(avg), error: None },
            Err(e) => ProfileSample { a: *a, energy: None, average: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(FamilyProfile { mode, samples })
}

fn profile_sample(u: &SphereMap, a: &Vector4<f64>, resolution: Resolution, refine: u32) -> Result<(f64, Vector3<f64>)> {
    let v = u.with_conformal(*a)?;
    let grid = QuadratureGrid::for_map(resolution, &v)?;
    let policy = if v.is_smooth() { SingularPolicy::None } else { SingularPolicy::Refine(refine) };
    let r = grid.integrate_with(
        |x| {
            let j = v.evaluate(x)?;
            Ok(Vector4::new(j.energy_density(), j.value[0], j.value[1], j.value[2]))
        },
        policy,
    )?;
    Ok((0.5 * r.value[0], r.value.fixed_rows::<3>(1).into_owned()))
}

/// Allowed distance of a computed degree from the nearest integer.
pub const INTEGRALITY_TOL: f64 = 0.1;

fn round_integral(v: f64, what: &str) -> Result<i64> {
    let r = v.round();
    if !v.is_finite() || (v - r).abs() > INTEGRALITY_TOL {
        return Err(Error::Resolution(format!("{what} evaluated to {v}, not within {INTEGRALITY_TOL} of an integer")));
    }
    Ok(r as i64)
}

/// `(1/4π) ∫_{S²} v^*(area form)` by Gauss–Legendre in `cos θ` (`n_nodes`
/// nodes) and the midpoint rule in `φ` (`2 n_nodes` nodes).
pub fn degree_integral(v: &SurfaceMap, n_nodes: usize) -> Result<f64> {
    if n_nodes < 4 {
        return Err(Error::Config(format!("degree quadrature needs at least 4 nodes, got {n_nodes}")));
    }
    let (mu, w) = gauss_legendre(n_nodes);
    let n_phi = 2 * n_nodes;
    let mut per_ring = Vec::with_capacity(n_nodes);
    for (m, wm) in mu.iter().zip(&w) {
        let s = (1.0 - m * m).sqrt();
        let mut ring = Vec::with_capacity(n_phi);
        for k in 0..n_phi {
            let phi = (k as f64 + 0.5) * 2.0 * PI / n_phi as f64;
            let (c, sn) = (phi.cos(), phi.sin());
            let p = Vector3::new(s * c, s * sn, *m);
            // orthonormal tangents with t1 × t2 = p
            let mut t = [Vector3::new(m * c, m * sn, -s), Vector3::new(-sn, c, 0.0)];
            let q = v.push(&p, &mut t);
            ring.push(q.dot(&t[0].cross(&t[1])));
        }
        per_ring.push(wm * crate::reduce::pairwise_sum(&ring) * 2.0 * PI / n_phi as f64);
    }
    let total = crate::reduce::pairwise_sum(&per_ring) / (4.0 * PI);
    if !total.is_finite() {
        return Err(Error::NonFinite { point: Vector4::zeros() });
    }
    Ok(total)
}

pub fn degree_s2(v: &SurfaceMap, n_nodes: usize) -> Result<i64> {
    round_integral(degree_integral(v, n_nodes)?, "degree")
}

/// Triangulation of S² by a subdivided icosahedron, outward-oriented faces.
pub fn icosphere(subdivisions: u32) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(a, b, c)| Vector3::new(a, b, c).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid = std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Signed solid angle of the spherical triangle `(a, b, c)`.
pub fn solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    2.0 * a.dot(&b.cross(c)).atan2(1.0 + a.dot(b) + b.dot(c) + c.dot(a))
}

/// Degree of a sampled map S² → S² from the signed areas of the image of an
/// icosphere triangulation. Image edges longer than `π/2` mean the sampling
/// is too coarse.
pub fn degree_sampled<F>(f: F, subdivisions: u32) -> Result<i64>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let (verts, faces) = icosphere(subdivisions);
    let image: Vec<Vector3<f64>> = verts.iter().map(&f).collect::<Result<_>>()?;
    let mut total = 0.0;
    for [a, b, c] in faces {
        let (p, q, r) = (&image[a], &image[b], &image[c]);
        for (x, y) in [(p, q), (q, r), (r, p)] {
            if x.dot(y) < 0.0 {
                return Err(Error::Resolution("image triangle edge exceeds π/2; refine the triangulation".into()));
            }
        }
        total += solid_angle(p, q, r);
    }
    round_integral(total / (4.0 * PI), "sampled degree")
}

/// Degree of `b ↦ unit_avg(u ∘ φ_{(1−ε)b})` on `∂B³ ⊂ {x₄ = 0}`.
pub fn mode_b_boundary_degree(u: &SphereMap, eps: f64, subdivisions: u32, resolution: Resolution) -> Result<i64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")));
    }
    let grid = QuadratureGrid::new(resolution)?;
    degree_sampled(
        |b| {
            let v = u.with_conformal(Vector4::new(b[0], b[1], b[2], 0.0) * (1.0 - eps))?;
            average_direction(&v, &grid)?
                .unit_avg
                .ok_or_else(|| Error::Resolution(format!("degenerate average at b = {b:?}")))
        },
        subdivisions,
    )
}

// ---------------------------------------------------------------------------
// Hopf invariant by preimage linking
// ---------------------------------------------------------------------------

/// Rows `b₁·∂_{e_i}u`, `b₂·∂_{e_i}u` and the residual `(b₁·u, b₂·u)`.
struct LevelSet<'a> {
    u: &'a SphereMap,
    p: Vector3<f64>,
    b1: Vector3<f64>,
    b2: Vector3<f64>,
}

struct LevelJet {
    g: Vector2<f64>,
    r1: Vector3<f64>,
    r2: Vector3<f64>,
    along: f64,
}

/// A closed polygon on S³.
pub type Loop = Vec<PointS3>;

const NEWTON_TOL: f64 = 1e-11;
const RANK_TOL: f64 = 1e-8;

impl<'a> LevelSet<'a> {
    fn new(u: &'a SphereMap, p: Vector3<f64>) -> LevelSet<'a> {
        let seed = if p[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let b1 = (seed - p * p.dot(&seed)).normalize();
        let b2 = p.cross(&b1);
        LevelSet { u, p, b1, b2 }
    }

    fn jet(&self, x: &PointS3) -> Result<LevelJet> {
        let j = self.u.evaluate(x)?;
        Ok(LevelJet {
            g: Vector2::new(self.b1.dot(&j.value), self.b2.dot(&j.value)),
            r1: Vector3::from_fn(|i, _| self.b1.dot(&j.partials[i])),
            r2: Vector3::from_fn(|i, _| self.b2.dot(&j.partials[i])),
            along: self.p.dot(&j.value),
        })
    }

    /// Minimal-norm Newton step `δ = −Jᵀ(JJᵀ)⁻¹ g`, in frame coordinates.
    fn step(j: &LevelJet) -> Option<Vector3<f64>> {
        let jj = Matrix2::new(j.r1.dot(&j.r1), j.r1.dot(&j.r2), j.r2.dot(&j.r1), j.r2.dot(&j.r2));
        let y = jj.try_inverse()? * j.g;
        Some(-(j.r1 * y[0] + j.r2 * y[1]))
    }

    /// Newton projection onto `u = p`. `None` if it fails to converge, leaves
    /// `max_move`, or lands on the preimage of `−p`.
    fn project(&self, x0: &PointS3, max_move: f64) -> Result<Option<PointS3>> {
        let mut x = *x0;
        for _ in 0..30 {
            let j = self.jet(&x)?;
            if j.g.norm() < NEWTON_TOL {
                return Ok((j.along > 0.0 && x.distance(x0) <= max_move).then_some(x));
            }
            let Some(d) = Self::step(&j) else { return Ok(None) };
            if d.norm() > 0.5 {
                return Ok(None);
            }
            let e = frame_vectors(&x);
            x = PointS3::normalize(x.coords() + e[0] * d[0] + e[1] * d[1] + e[2] * d[2]).expect("unit");
        }
        Ok(None)
    }

    /// Oriented unit tangent `r₁ × r₂` of the preimage, as an ambient vector.
    fn tangent(&self, x: &PointS3) -> Result<std::result::Result<Vector4<f64>, f64>> {
        let j = self.jet(x)?;
        let t = j.r1.cross(&j.r2);
        let scale = j.r1.norm() * j.r2.norm();
        if !(t.norm() > RANK_TOL * scale.max(1.0)) {
            return Ok(Err(t.norm()));
        }
        let t = t.normalize();
        let e = frame_vectors(x);
        Ok(Ok(e[0] * t[0] + e[1] * t[1] + e[2] * t[2]))
    }
}

/// Cell centres of the radial projection of the boundary of `[−1, 1]⁴`
/// (8 facets, `res³` cells each) onto S³.
pub fn cubical_cell_centres(res: usize) -> Vec<PointS3> {
    let mut out = Vec::with_capacity(8 * res * res * res);
    let c = |k: usize| -1.0 + (2.0 * k as f64 + 1.0) / res as f64;
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            for i in 0..res {
                for j in 0..res {
                    for k in 0..res {
                        let mut free = [c(i), c(j), c(k)].into_iter();
                        let v = Vector4::from_fn(|d, _| if d == axis { sign } else { free.next().expect("three free coordinates") });
                        out.push(PointS3::normalize(v).expect("nonzero"));
                    }
                }
            }
        }
    }
    out
}

/// Preimage loops of `p` traced by predictor–corrector continuation from
/// Newton seeds in the cubical cells. `Err(Ok(s))` signals a critical point
/// (rank below 2) with `|r₁ × r₂| = s`.
fn trace_preimage(u: &SphereMap, p: Vector3<f64>, mesh_res: usize) -> Result<std::result::Result<Vec<Loop>, f64>> {
    let level = LevelSet::new(u, p);
    // angular size of a cell, and the continuation step
    let cell = 2.0 / mesh_res as f64;
    let step = (0.25 * cell).min(0.05);
    let mut seeds = Vec::new();
    for c in cubical_cell_centres(mesh_res) {
        if let Some(x) = level.project(&c, 2.0 * cell)? {
            seeds.push(x);
        }
    }
    let mut loops: Vec<Loop> = Vec::new();
    for seed in seeds {
        if loops.iter().any(|l| l.iter().any(|v| v.distance(&seed) < step)) {
            continue;
        }
        match trace_loop(&level, seed, step)? {
            Ok(l) => loops.push(l),
            Err(s) => return Ok(Err(s)),
        }
    }
    Ok(Ok(loops))
}

const MAX_LOOP_STEPS: usize = 200_000;

fn trace_loop(level: &LevelSet<'_>, start: PointS3, step: f64) -> Result<std::result::Result<Loop, f64>> {
    let mut pts = vec![start];
    let mut x = start;
    let mut travelled = 0.0;
    let mut h = step;
    for _ in 0..MAX_LOOP_STEPS {
        let t = match level.tangent(&x)? {
            Ok(t) => t,
            Err(s) => return Ok(Err(s)),
        };
        let pred = x.geodesic(&t, h);
        match level.project(&pred, 0.5 * h)? {
            Some(next) if next.distance(&x) > 0.25 * h => {
                travelled += next.distance(&x);
                x = next;
                if travelled > 3.0 * step && x.distance(&start) < step {
                    return Ok(Ok(pts));
                }
                pts.push(x);
                h = (h * 1.5).min(step);
            }
            _ => {
                h *= 0.5;
                if h < 1e-7 {
                    return Err(Error::Resolution("preimage tracing stalled; increase the mesh resolution".into()));
                }
            }
        }
    }
    Err(Error::Resolution("preimage curve did not close; increase the mesh resolution".into()))
}

/// Orthonormal `f₁, f₂, f₃` spanning `n^⊥` with `det(n, f₁, f₂, f₃) = −1`, so
/// that stereographic projection from `n` preserves orientation.
fn stereo_basis(n: &Vector4<f64>) -> [Vector4<f64>; 3] {
    let mut cols: Vec<Vector4<f64>> = vec![*n];
    for k in 0..4 {
        let mut v = Vector4::zeros();
        v[k] = 1.0;
        for c in &cols {
            v -= c * c.dot(&v);
        }
        if v.norm() > 0.5 {
            cols.push(v.normalize());
        }
        if cols.len() == 4 {
            break;
        }
    }
    if Matrix4::from_columns(&cols).determinant() > 0.0 {
        cols[3] = -cols[3];
    }
    [cols[1], cols[2], cols[3]]
}

/// Stereographic projection from `n` in the basis of [`stereo_basis`].
pub fn stereographic(n: &Vector4<f64>, x: &Vector4<f64>) -> Vector3<f64> {
    let f = stereo_basis(n);
    let d = 1.0 - x.dot(n);
    Vector3::new(f[0].dot(x), f[1].dot(x), f[2].dot(x)) / d
}

/// Signed solid angle subtended by segment `p₁p₂` seen from every point of
/// `p₃p₄`, divided by `4π`: the exact linking contribution of two segments.
pub fn segment_linking(p1: &Vector3<f64>, p2: &Vector3<f64>, p3: &Vector3<f64>, p4: &Vector3<f64>) -> f64 {
    let r13 = p3 - p1;
    let r14 = p4 - p1;
    let r23 = p3 - p2;
    let r24 = p4 - p2;
    let unit = |v: Vector3<f64>| {
        let n = v.norm();
        if n > 0.0 {
            v / n
        } else {
            v
        }
    };
    let n1 = unit(r13.cross(&r14));
    let n2 = unit(r14.cross(&r24));
    let n3 = unit(r24.cross(&r23));
    let n4 = unit(r23.cross(&r13));
    let asin = |v: f64| v.clamp(-1.0, 1.0).asin();
    let omega = asin(n1.dot(&n2)) + asin(n2.dot(&n3)) + asin(n3.dot(&n4)) + asin(n4.dot(&n1));
    let s = (p4 - p3).cross(&(p2 - p1)).dot(&r13);
    omega * s.signum() / (4.0 * PI)
}

/// Linking number of two closed polygons in ℝ³.
pub fn polygon_linking(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        let (p1, p2) = (&a[i], &a[(i + 1) % a.len()]);
        let mut row = 0.0;
        for j in 0..b.len() {
            row += segment_linking(p1, p2, &b[j], &b[(j + 1) % b.len()]);
        }
        total += row;
    }
    total
}

/// Gauss double integral `(1/4π) ∮∮ (γ̇ × σ̇)·(γ − σ)/|γ − σ|³` with the
/// midpoint rule on `n` samples of each parametrised closed curve.
pub fn gauss_linking_integral<F, G>(gamma: F, sigma: G, n: usize) -> f64
where
    F: Fn(f64) -> Vector3<f64>,
    G: Fn(f64) -> Vector3<f64>,
{
    let dt = 2.0 * PI / n as f64;
    let h = 1e-6;
    let sample = |c: &dyn Fn(f64) -> Vector3<f64>| -> Vec<(Vector3<f64>, Vector3<f64>)> {
        (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                (c(t), (c(t + h) - c(t - h)) / (2.0 * h))
            })
            .collect()
    };
    let a = sample(&gamma);
    let b = sample(&sigma);
    let mut total = 0.0;
    for (x, dx) in &a {
        for (y, dy) in &b {
            let r = x - y;
            total += dx.cross(dy).dot(&r) / r.norm().powi(3);
        }
    }
    total * dt * dt / (4.0 * PI)
}

/// A projection pole far from every vertex of the given loops.
fn projection_pole(loops: &[&Loop], seed: u64) -> Vector4<f64> {
    let mut g = rng::seeded(seed);
    let mut best = (f64::NEG_INFINITY, Vector4::x());
    for _ in 0..64 {
        let c = rng::point_s3(&mut g);
        let d = loops
            .iter()
            .flat_map(|l| l.iter())
            .map(|v| v.distance(&c))
            .fold(f64::INFINITY, f64::min);
        if d > best.0 {
            best = (d, *c.coords());
        }
    }
    best.1
}

#[derive(Clone, Debug, PartialEq)]
pub struct HopfInvariant {
    pub value: i64,
    /// unrounded linking number
    pub linking: f64,
    pub p: Vector3<f64>,
    pub q: Vector3<f64>,
    pub loops_p: usize,
    pub loops_q: usize,
    pub resamples: usize,
}

pub const MAX_RESAMPLES: usize = 10;

/// Hopf invariant as the linking number of the preimages of `p` and `q`.
/// If either is found to be a critical value, both are perturbed by a small
/// seeded rotation and the computation repeated, up to ten times.
pub fn hopf_invariant(u: &SphereMap, p: Vector3<f64>, q: Vector3<f64>, mesh_res: usize) -> Result<HopfInvariant> {
    if mesh_res < 2 {
        return Err(Error::Config(format!("mesh resolution must be at least 2, got {mesh_res}")));
    }
    for (name, v) in [("p", &p), ("q", &q)] {
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("{name} must be a unit vector")));
        }
    }
    if (p - q).norm() < 1e-6 {
        return Err(Error::domain("p and q must be distinct"));
    }
    let mut g = rng::seeded(0x40bf);
    let (mut p, mut q) = (p.normalize(), q.normalize());
    for attempt in 0..=MAX_RESAMPLES {
        let lp = trace_preimage(u, p, mesh_res)?;
        let lq = trace_preimage(u, q, mesh_res)?;
        if let (Ok(lp), Ok(lq)) = (lp, lq) {
            let linking = loops_linking(&lp, &lq);
            return Ok(HopfInvariant {
                value: round_integral(linking, "linking number")?,
                linking,
                p,
                q,
                loops_p: lp.len(),
                loops_q: lq.len(),
                resamples: attempt,
            });
        }
        let axis = rng::point_s2(&mut g);
        let angle = 0.05 * g.random::<f64>() + 0.01;
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        p = r * p;
        q = r * q;
    }
    Err(Error::Resolution(format!("no regular value pair found after {MAX_RESAMPLES} re-samples")))
}

/// Total linking number of two families of loops on S³.
pub fn loops_linking(a: &[Loop], b: &[Loop]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let all: Vec<&Loop> = a.iter().chain(b.iter()).collect();
    let n = projection_pole(&all, 7);
    let proj = |l: &Loop| -> Vec<Vector3<f64>> { l.iter().map(|x| stereographic(&n, x.coords())).collect() };
    let mut total = 0.0;
    for la in a {
        let pa = proj(la);
        for lb in b {
            total += polygon_linking(&pa, &proj(lb));
        }
    }
    total
}

/// Preimage loops (exposed for diagnostics and tests).
pub fn preimage_loops(u: &SphereMap, p: Vector3<f64>, mesh_res: usize) -> Result<Vec<Loop>> {
    match trace_preimage(u, p, mesh_res)? {
        Ok(l) => Ok(l),
        Err(s) => Err(Error::domain(format!("{p:?} is a critical value (|r1 × r2| = {s:e})"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn conformal_group_sanity() {
        let mut r = rng::seeded(1);
        let phi = ConformalS3::new(Vector4::new(0.3, -0.2, 0.5, 0.1)).unwrap();
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            let y = phi.apply(&x);
            assert!((y.coords().norm() - 1.0).abs() < 1e-12);
            assert!((phi.inverse().apply(&y).coords() - x.coords()).amax() < 1e-10);
        }
        let id = ConformalS3::new(Vector4::zeros()).unwrap();
        let x = rng::point_s3(&mut r);
        assert!((id.apply(&x).coords() - x.coords()).amax() < 1e-15);
        assert!(ConformalS3::new(Vector4::new(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn degrees_of_simple_maps() {
        assert_eq!(degree_s2(&SurfaceMap::identity(), 16).unwrap(), 1);
        assert_eq!(degree_s2(&SurfaceMap::parse("antipodal").unwrap(), 16).unwrap(), -1);
        assert_eq!(degree_s2(&SurfaceMap::parse("mobius(0.5,0,0)").unwrap(), 32).unwrap(), 1);
        assert_eq!(degree_s2(&SurfaceMap::parse("blaschke(z^2;1)").unwrap(), 32).unwrap(), 2);
        assert_eq!(degree_s2(&SurfaceMap::parse("blaschke(1;z^3)").unwrap(), 32).unwrap(), 3);
        let v = degree_integral(&SurfaceMap::parse("blaschke(z^3 - 0.2;z + 0.5i)").unwrap(), 48).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn sampled_degree_matches_integral() {
        assert_eq!(degree_sampled(|p| Ok(*p), 2).unwrap(), 1);
        assert_eq!(degree_sampled(|p| Ok(-p), 2).unwrap(), -1);
        let m = SurfaceMap::parse("rot3(0,1,0,-1,0,0,0,0,1)∘mobius(0.3,0.2,0)").unwrap();
        assert_eq!(degree_sampled(|p| Ok(m.value(p)), 3).unwrap(), 1);
        let (v, f) = icosphere(2);
        assert_eq!(v.len(), 162);
        let total: f64 = f.iter().map(|[a, b, c]| solid_angle(&v[*a], &v[*b], &v[*c])).sum();
        assert_abs_diff_eq!(total, 4.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn segment_formula_links_square_loops() {
        // two unit squares linked once
        let a = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(2.0, 2.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
        ];
        let b = vec![
            Vector3::new(1.0, 1.0, -1.0),
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, 3.0, 1.0),
            Vector3::new(1.0, 3.0, -1.0),
        ];
        let lk = polygon_linking(&a, &b);
        assert_abs_diff_eq!(lk.abs(), 1.0, epsilon = 1e-12);
        let far: Vec<_> = b.iter().map(|v| v + Vector3::new(10.0, 0.0, 0.0)).collect();
        assert_abs_diff_eq!(polygon_linking(&a, &far), 0.0, epsilon = 1e-12);
        let rev: Vec<_> = b.iter().rev().copied().collect();
        assert_abs_diff_eq!(polygon_linking(&a, &rev), -lk, epsilon = 1e-12);
    }

    #[test]
    fn average_of_constant_and_hopf() {
        let g = QuadratureGrid::new(Resolution::new(8, 16, 16).unwrap()).unwrap();
        let c = SphereMap::parse("const(0,0.6,0.8)").unwrap();
        let a = average_direction(&c, &g).unwrap();
        assert!((a.avg - Vector3::new(0.0, 0.6, 0.8) * VOLUME_S3).amax() < 1e-12);
        assert!((a.unit_avg.unwrap() - Vector3::new(0.0, 0.6, 0.8)).amax() < 1e-14);
        let h = average_direction(&SphereMap::hopf(), &g).unwrap();
        assert!(h.unit_avg.is_none());
    }

    #[test]
    fn family_parameters_shape() {
        let p = family_parameters(FamilyMode::B, 10, 0.05, 1).unwrap();
        assert_eq!(p.len(), 11);
        assert_eq!(p[0], Vector4::zeros());
        assert!(p[1..].iter().all(|a| a[3] == 0.0 && (a.norm() - 0.95).abs() < 1e-14));
        let p = family_parameters(FamilyMode::A, 5, 0.1, 3).unwrap();
        assert!(p[1..].iter().all(|a| (a.norm() - 0.9).abs() < 1e-14));
        assert!(family_parameters(FamilyMode::A, 5, 1.0, 3).is_err());
    }

    #[test]
    fn cell_centres_cover_the_sphere() {
        let c = cubical_cell_centres(3);
        assert_eq!(c.len(), 8 * 27);
        let mut r = rng::seeded(2);
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            let d = c.iter().map(|y| y.distance(&x)).fold(f64::INFINITY, f64::min);
            assert!(d < 0.6);
        }
    }

    #[test]
    fn stereographic_orientation_preserving() {
        let n = Vector4::new(0.1, -0.3, 0.5, 0.8).normalize();
        let mut r = rng::seeded(4);
        for _ in 0..20 {
            let x = rng::point_s3(&mut r);
            let e = frame_vectors(&x);
            let h = 1e-6;
            let d: Vec<Vector3<f64>> = e
                .iter()
                .map(|v| (stereographic(&n, x.geodesic(v, h).coords()) - stereographic(&n, x.geodesic(v, -h).coords())) / (2.0 * h))
                .collect();
            assert!(d[0].dot(&d[1].cross(&d[2])) > 0.0);
        }
    }
}
