//! Maps S³ → S² (and S² → S²) given by the composition grammar of [`spec`],
//! evaluated together with their differential in the moving frame.

pub mod mobius;
pub mod rational;
pub mod spec;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};

pub use mobius::mobius_transform;
pub use rational::RationalMap;
pub use spec::{Atom, MapSpec, Space};

use crate::error::{Error, Result};
use crate::s3geom::{frame_vectors, PointS3};

/// Distance from `x′ = 0` below which an equator map refuses to evaluate.
pub const SINGULAR_RADIUS: f64 = 1e-9;

/// Value of a map together with its partials `∂_{e_i}u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapJet {
    pub value: Vector3<f64>,
    pub partials: [Vector3<f64>; 3],
}

impl MapJet {
    pub fn new(value: Vector3<f64>, partials: [Vector3<f64>; 3]) -> Self {
        MapJet { value, partials }
    }

    /// Columns are the partials.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.partials)
    }

    /// `|du|²`.
    pub fn energy_density(&self) -> f64 {
        self.partials.iter().map(|p| p.norm_squared()).sum()
    }

    /// `G_ij = ∂_{e_i}u · ∂_{e_j}u`.
    pub fn gram(&self) -> Matrix3<f64> {
        let j = self.matrix();
        j.transpose() * j
    }

    pub fn density_report(&self, point: PointS3) -> DensityReport {
        let e = self.energy_density();
        let t = self.gram().norm_squared();
        DensityReport {
            point,
            e_density: e,
            tensor_norm_sq: t,
            defect: e * e - 2.0 * t,
            normal_form: normal_form(&self.matrix()),
        }
    }

    /// `w_l = Σ_i ⟨X^l, e_i⟩ ∂_{e_i}u` for `l = 1..4` (index `l − 1`).
    pub fn killing_pairings(&self, x: &PointS3) -> KillingPairings {
        let e = frame_vectors(x);
        let w: [Vector3<f64>; 4] =
            std::array::from_fn(|l| self.partials[0] * e[0][l] + self.partials[1] * e[1][l] + self.partials[2] * e[2][l]);
        let cross = w.map(|wl| self.value.cross(&wl));
        KillingPairings { w, cross }
    }
}

/// Nonpositive normal form `−(|∂_{f₁}u|² − |∂_{f₂}u|²)² − 4(∂_{f₁}u·∂_{f₂}u)²`,
/// with `f₁`, `f₂` the two leading right singular directions of `j`.
/// Meaningful when `j` has rank at most 2, as every differential into S² does.
pub fn normal_form(j: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(j.transpose() * j);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let a = j * eig.eigenvectors.column(order[0]);
    let b = j * eig.eigenvectors.column(order[1]);
    let d = a.norm_squared() - b.norm_squared();
    -d * d - 4.0 * a.dot(&b).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityReport {
    pub point: PointS3,
    /// `|du|²`
    pub e_density: f64,
    /// `Σ_ij (∂_{e_i}u·∂_{e_j}u)²`
    pub tensor_norm_sq: f64,
    /// `|du|⁴ − 2 Σ_ij (∂_{e_i}u·∂_{e_j}u)²`
    pub defect: f64,
    pub normal_form: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingPairings {
    pub w: [Vector3<f64>; 4],
    pub cross: [Vector3<f64>; 4],
}

/// A map S³ → S².
#[derive(Clone, Debug, PartialEq)]
pub struct SphereMap {
    spec: MapSpec,
    /// S³ → S³ stages, innermost first
    pre: Vec<Atom>,
    bridge: Atom,
    /// S² → S² stages, innermost first
    post: Vec<Atom>,
}

fn apply_s2(atom: &Atom, p: &mut Vector3<f64>, t: &mut [Vector3<f64>]) {
    match atom {
        Atom::Rotate3(r) => {
            *p = r * *p;
            t.iter_mut().for_each(|v| *v = r * *v);
        }
        Atom::Mobius(a) => {
            t.iter_mut().for_each(|v| *v = mobius::push(a, p, v));
            *p = mobius::apply(a, p);
        }
        Atom::Rational(v) => *p = v.push(p, t),
        Atom::Antipodal => {
            *p = -*p;
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Atom::Identity => {}
        other => unreachable!("`{other}` is not an S² → S² atom"),
    }
}

fn apply_s3(atom: &Atom, y: &mut Vector4<f64>, t: &mut [Vector4<f64>]) {
    match atom {
        Atom::Rotate(r) => {
            *y = r * *y;
            t.iter_mut().for_each(|v| *v = r * *v);
        }
        Atom::Conformal(a) => {
            t.iter_mut().for_each(|v| *v = mobius::push(a, y, v));
            *y = mobius::apply(a, y);
        }
        other => unreachable!("`{other}` is not an S³ → S³ atom"),
    }
}

/// Completes unit `c1`, `c2` (orthogonal) to a rotation with those first columns.
fn complete_frame(c1: Vector4<f64>, c2: Vector4<f64>) -> Matrix4<f64> {
    let mut cols = vec![c1, c2];
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
    let mut m = Matrix4::from_columns(&cols);
    if m.determinant() < 0.0 {
        let c = -m.column(3);
        m.set_column(3, &c);
    }
    m
}

impl SphereMap {
    pub fn new(spec: MapSpec) -> Result<SphereMap> {
        if spec.domain() != Space::S3 || spec.codomain() != Space::S2 {
            return Err(Error::domain(format!("`{spec}` is not a map from S³ to S²")));
        }
        let mut applied: Vec<Atom> = spec.atoms().iter().rev().cloned().collect();
        let split = applied.iter().position(|a| a.codomain() == Space::S2).expect("type-checked");
        let post = applied.split_off(split + 1);
        let bridge = applied.pop().expect("bridge atom");
        Ok(SphereMap { spec, pre: applied, bridge, post })
    }

    pub fn parse(text: &str) -> Result<SphereMap> {
        SphereMap::new(MapSpec::parse(text)?)
    }

    pub fn hopf() -> SphereMap {
        SphereMap::new(MapSpec::from_atoms(vec![Atom::Hopf]).expect("valid")).expect("valid")
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    /// `self ∘ φ_a` with `φ_a` the Möbius map of S³.
    pub fn with_conformal(&self, a: Vector4<f64>) -> Result<SphereMap> {
        let mut atoms = self.spec.atoms().to_vec();
        atoms.push(Atom::conformal(a)?);
        SphereMap::new(MapSpec::from_atoms(atoms)?)
    }

    /// `self ∘ R` for `R ∈ O(4)`.
    pub fn with_rotation(&self, r: Matrix4<f64>) -> Result<SphereMap> {
        let mut atoms = self.spec.atoms().to_vec();
        atoms.push(Atom::rotate(r)?);
        SphereMap::new(MapSpec::from_atoms(atoms)?)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.bridge, Atom::Constant(_))
    }

    /// Points where the map is undefined (the preimages of `x′ = 0` for equator maps).
    pub fn singular_points(&self) -> Vec<PointS3> {
        if !matches!(self.bridge, Atom::Equator(_)) {
            return Vec::new();
        }
        [1.0, -1.0]
            .iter()
            .map(|s| {
                let mut y = Vector4::new(0.0, 0.0, 0.0, *s);
                for atom in self.pre.iter().rev() {
                    y = match atom {
                        Atom::Rotate(r) => r.transpose() * y,
                        Atom::Conformal(a) => mobius::apply(&(-a), &y),
                        _ => unreachable!(),
                    };
                }
                PointS3::normalize(y).expect("unit")
            })
            .collect()
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.bridge, Atom::Equator(_))
    }

    /// A rotation `H` whose image of the great circle through `ε₁`, `ε₂` passes
    /// through the region where the energy of the map concentrates, for use as
    /// a quadrature orientation. `None` when no concentration is expected.
    pub fn concentration_frame(&self) -> Option<Matrix4<f64>> {
        let mut h = match &self.bridge {
            Atom::Equator(a) if a.norm() > 0.0 => {
                let ah = a / a.norm();
                complete_frame(Vector4::new(ah[0], ah[1], ah[2], 0.0), Vector4::w())
            }
            Atom::Equator(_) => Matrix4::identity(),
            _ => {
                let a = self.pre.iter().find_map(|s| match s {
                    Atom::Conformal(a) if a.norm() > 0.0 => Some(a / a.norm()),
                    _ => None,
                })?;
                let seed = if a[0].abs() < 0.9 { Vector4::x() } else { Vector4::y() };
                let c2 = (seed - a * a.dot(&seed)).normalize();
                return Some(complete_frame(a, c2));
            }
        };
        for atom in self.pre.iter().rev() {
            match atom {
                Atom::Rotate(r) => h = r.transpose() * h,
                Atom::Conformal(_) => return None,
                _ => unreachable!(),
            }
        }
        Some(h)
    }

    /// Value and frame partials at `x`.
    pub fn evaluate(&self, x: &PointS3) -> Result<MapJet> {
        let mut y = *x.coords();
        let mut t = frame_vectors(x);
        for atom in &self.pre {
            apply_s3(atom, &mut y, &mut t);
        }
        let (mut p, mut s) = match &self.bridge {
            Atom::Hopf => {
                let [y1, y2, y3, y4] = [y[0], y[1], y[2], y[3]];
                let p = Vector3::new(
                    2.0 * (y1 * y3 + y2 * y4),
                    2.0 * (y2 * y3 - y1 * y4),
                    y1 * y1 + y2 * y2 - y3 * y3 - y4 * y4,
                );
                let jac = nalgebra::Matrix3x4::new(
                    2.0 * y3, 2.0 * y4, 2.0 * y1, 2.0 * y2,
                    -2.0 * y4, 2.0 * y3, 2.0 * y2, -2.0 * y1,
                    2.0 * y1, 2.0 * y2, -2.0 * y3, -2.0 * y4,
                );
                (p, t.map(|v| jac * v))
            }
            Atom::Equator(a) => {
                let yp = Vector3::new(y[0], y[1], y[2]);
                let r = yp.norm();
                if !(r >= SINGULAR_RADIUS) {
                    return Err(Error::Singular { point: *x.coords() });
                }
                let n = yp / r;
                let b = -a;
                let s = t.map(|v| {
                    let vp = Vector3::new(v[0], v[1], v[2]);
                    let dn = (vp - n * n.dot(&vp)) / r;
                    mobius::push(&b, &n, &dn)
                });
                (mobius::apply(&b, &n), s)
            }
            Atom::Constant(c) => (*c, [Vector3::zeros(); 3]),
            other => unreachable!("`{other}` is not an S³ → S² atom"),
        };
        for atom in &self.post {
            apply_s2(atom, &mut p, &mut s);
        }
        if !p.iter().chain(s.iter().flat_map(|v| v.iter())).all(|c| c.is_finite()) {
            return Err(Error::NonFinite { point: *x.coords() });
        }
        Ok(MapJet { value: p, partials: s })
    }

    pub fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
        Ok(self.evaluate(x)?.value)
    }

    pub fn energy_density(&self, x: &PointS3) -> Result<f64> {
        Ok(self.evaluate(x)?.energy_density())
    }

    pub fn conf_defect(&self, x: &PointS3) -> Result<DensityReport> {
        Ok(self.evaluate(x)?.density_report(*x))
    }

    pub fn killing_pairings(&self, x: &PointS3) -> Result<KillingPairings> {
        Ok(self.evaluate(x)?.killing_pairings(x))
    }
}

impl std::str::FromStr for SphereMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<SphereMap> {
        SphereMap::parse(s)
    }
}

pub fn parse_map_spec(text: &str) -> Result<MapSpec> {
    MapSpec::parse(text)
}

/// A map S² → S².
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMap {
    spec: MapSpec,
    /// innermost first
    stages: Vec<Atom>,
}

impl SurfaceMap {
    pub fn new(spec: MapSpec) -> Result<SurfaceMap> {
        if spec.domain() != Space::S2 || spec.codomain() != Space::S2 {
            return Err(Error::domain(format!("`{spec}` is not a map from S² to S²")));
        }
        let stages = spec.atoms().iter().rev().cloned().collect();
        Ok(SurfaceMap { spec, stages })
    }

    pub fn parse(text: &str) -> Result<SurfaceMap> {
        SurfaceMap::new(MapSpec::parse(text)?)
    }

    pub fn identity() -> SurfaceMap {
        SurfaceMap::new(MapSpec::from_atoms(vec![Atom::Identity]).expect("valid")).expect("valid")
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    /// Value at `p ∈ S²` and pushforward of `tangents` in place.
    pub fn push(&self, p: &Vector3<f64>, tangents: &mut [Vector3<f64>]) -> Vector3<f64> {
        let mut q = *p;
        for atom in &self.stages {
            apply_s2(atom, &mut q, tangents);
        }
        q
    }

    pub fn value(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.push(p, &mut [])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::s3geom::fd;
    use approx::assert_abs_diff_eq;

    fn fd_partials(u: &SphereMap, x: &PointS3, h: f64) -> [Vector3<f64>; 3] {
        let e = frame_vectors(x);
        e.map(|v| (u.value(&x.geodesic(&v, h)).unwrap() - u.value(&x.geodesic(&v, -h)).unwrap()) / (2.0 * h))
    }

    const MAPS: &[&str] = &[
        "hopf",
        "blaschke(z^2;1)∘hopf",
        "blaschke((1+i)z^3 - 0.5;z + 0.2i)∘hopf",
        "mobius(0.3,-0.2,0.1)∘hopf∘conf(0.2,0.1,-0.3,0.4)",
        "rot3(0,1,0,-1,0,0,0,0,1)∘hopf∘rot(0,1,0,0,-1,0,0,0,0,0,0,1,0,0,-1,0)",
        "equator(0,0,0)",
        "equator(0.9,0,0)",
        "antipodal∘equator(0.2,0.3,-0.1)∘conf(0.1,0,0,0.2)",
        "const(0,0,1)",
    ];

    #[test]
    fn hopf_examples() {
        let h = SphereMap::hopf();
        let v = h.value(&PointS3::from_coords(1.0, 0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(v, Vector3::new(0.0, 0.0, 1.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = h.value(&PointS3::from_coords(s, 0.0, s, 0.0).unwrap()).unwrap();
        assert!((v - Vector3::new(1.0, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn unit_values_tangent_partials_and_fd_chain_rule() {
        let mut r = rng::seeded(21);
        for text in MAPS {
            let u = SphereMap::parse(text).unwrap();
            for _ in 0..200 {
                let x = rng::point_s3(&mut r);
                let j = u.evaluate(&x).unwrap();
                assert!((j.value.norm() - 1.0).abs() < 1e-12, "{text}");
                for p in &j.partials {
                    assert!(j.value.dot(p).abs() < 1e-10, "{text}");
                }
                let fd = fd_partials(&u, &x, fd::STEP);
                for k in 0..3 {
                    let scale = 1.0 + j.partials[k].amax();
                    assert!((fd[k] - j.partials[k]).amax() < 1e-6 * scale, "{text}: {} vs {}", fd[k], j.partials[k]);
                }
            }
        }
    }

    #[test]
    fn hopf_density_is_eight() {
        let u = SphereMap::hopf();
        let mut r = rng::seeded(3);
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            assert_abs_diff_eq!(u.energy_density(&x).unwrap(), 8.0, epsilon = 1e-10);
            let fd: f64 = fd_partials(&u, &x, fd::STEP).iter().map(|v| v.norm_squared()).sum();
            assert_abs_diff_eq!(fd, 8.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn equator_zero_density() {
        let u = SphereMap::parse("equator(0,0,0)").unwrap();
        let mut r = rng::seeded(5);
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            let s = x.coords().xyz().norm();
            assert_abs_diff_eq!(u.energy_density(&x).unwrap(), 2.0 / (s * s), epsilon = 1e-9 / (s * s));
        }
    }

    #[test]
    fn singular_points_are_errors() {
        let u = SphereMap::parse("equator(0.5,0,0)").unwrap();
        let pole = PointS3::from_coords(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(u.evaluate(&pole), Err(Error::Singular { .. })));
        let near = PointS3::normalize(Vector4::new(1e-10, 0.0, 0.0, 1.0)).unwrap();
        assert!(u.evaluate(&near).is_err());
        let v = SphereMap::parse("equator(0.5,0,0)∘conf(0.3,0.1,0,0.2)").unwrap();
        for p in v.singular_points() {
            assert!(matches!(v.evaluate(&p), Err(Error::Singular { .. })));
        }
        assert!(SphereMap::hopf().singular_points().is_empty());
    }

    #[test]
    fn constant_map_is_flat() {
        let u = SphereMap::parse("const(0,1,0)").unwrap();
        let mut r = rng::seeded(6);
        let x = rng::point_s3(&mut r);
        assert_eq!(u.energy_density(&x).unwrap(), 0.0);
        assert!(u.killing_pairings(&x).unwrap().w.iter().all(|w| w.norm() == 0.0));
    }

    #[test]
    fn hopf_is_horizontally_conformal() {
        let u = SphereMap::hopf();
        let mut r = rng::seeded(8);
        for _ in 0..200 {
            let x = rng::point_s3(&mut r);
            let d = u.conf_defect(&x).unwrap();
            assert!(d.defect.abs() < 1e-10);
            assert!(d.normal_form.abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_defect() {
        let j = MapJet::new(Vector3::z(), [Vector3::new(1.5, 0.0, 0.0), Vector3::new(-0.5, 0.0, 0.0), Vector3::new(2.0, 0.0, 0.0)]);
        let d = j.density_report(PointS3::from_coords(1.0, 0.0, 0.0, 0.0).unwrap());
        let n2 = j.energy_density();
        assert_abs_diff_eq!(d.defect, -n2 * n2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.normal_form, -n2 * n2, epsilon = 1e-12);
    }

    #[test]
    fn killing_pairings_completeness() {
        let mut r = rng::seeded(7);
        for text in MAPS {
            let u = SphereMap::parse(text).unwrap();
            let x = rng::point_s3(&mut r);
            let j = u.evaluate(&x).unwrap();
            let k = j.killing_pairings(&x);
            let sum: f64 = k.w.iter().map(|w| w.norm_squared()).sum();
            assert!((sum - j.energy_density()).abs() < 1e-11 * (1.0 + sum));
            for l in 0..4 {
                assert!(j.value.dot(&k.w[l]).abs() < 1e-10);
                assert!(j.value.dot(&k.cross[l]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn concentration_frame_is_a_rotation() {
        let u = SphereMap::parse("equator(0.9,0,0)∘rot(0,1,0,0,-1,0,0,0,0,0,1,0,0,0,0,1)").unwrap();
        let h = u.concentration_frame().unwrap();
        assert!((h.transpose() * h - Matrix4::identity()).amax() < 1e-14);
        assert_abs_diff_eq!(h.determinant(), 1.0, epsilon = 1e-14);
        // the second column is a singular point
        let pole = PointS3::normalize(h.column(1).into_owned()).unwrap();
        assert!(u.evaluate(&pole).is_err());
        assert!(SphereMap::hopf().concentration_frame().is_none());
    }

    #[test]
    fn surface_maps() {
        let id = SurfaceMap::identity();
        let p = Vector3::new(0.0, 0.6, 0.8);
        assert_eq!(id.value(&p), p);
        assert!(SurfaceMap::parse("hopf").is_err());
        let m = SurfaceMap::parse("antipodal∘mobius(0.5,0,0)").unwrap();
        let ah = Vector3::x();
        assert!((m.value(&ah) + ah).amax() < 1e-15);
    }
}
