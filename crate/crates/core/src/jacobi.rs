//! Second variation of the energy along `u`, the Jacobi operator and its
//! Galerkin spectrum.
//!
//! Sections of `u⁻¹TS²` are ℝ³-valued fields `w` with `u·w ≡ 0`. For such `w`
//!
//! ```text
//! D²E_u(w) = ½ ∫ |dw|² − |w|²|du|²,      L_u w = −P_u Δw − |du|² w,
//! ```
//!
//! with `Δ` the (nonpositive) Laplace–Beltrami operator of S³.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::harmonics::HarmonicSet;
use crate::maps::{MapJet, SphereMap};
use crate::quadrature::QuadratureGrid;
use crate::reduce;
use crate::s3geom::{fd, frame_vectors, PointS3};

/// Pointwise tangency tolerance for sections.
pub const TANGENCY_TOL: f64 = 1e-10;
pub const DEFAULT_TOL_NEG: f64 = 0.05;
pub const DEFAULT_TOL_NULL: f64 = 0.05;
/// Mass eigenvalues below this fraction of the largest are discarded.
pub const MASS_RANK_TOL: f64 = 1e-10;

/// Value of a section and its frame partials `∂_{e_i}w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionJet {
    pub value: Vector3<f64>,
    pub partials: [Vector3<f64>; 3],
}

impl SectionJet {
    pub fn dirichlet_density(&self) -> f64 {
        self.partials.iter().map(|p| p.norm_squared()).sum()
    }
}

pub trait Section: Sync {
    fn value(&self, x: &PointS3) -> Result<Vector3<f64>>;

    /// Partials by central differences along the frame geodesics unless overridden.
    fn jet(&self, x: &PointS3) -> Result<SectionJet> {
        let h = fd::STEP;
        let e = frame_vectors(x);
        let mut partials = [Vector3::zeros(); 3];
        for (p, v) in partials.iter_mut().zip(&e) {
            *p = (self.value(&x.geodesic(v, h))? - self.value(&x.geodesic(v, -h))?) / (2.0 * h);
        }
        Ok(SectionJet { value: self.value(x)?, partials })
    }
}

/// `w ≡ 0`.
pub struct ZeroSection;

impl Section for ZeroSection {
    fn value(&self, _: &PointS3) -> Result<Vector3<f64>> {
        Ok(Vector3::zeros())
    }

    fn jet(&self, _: &PointS3) -> Result<SectionJet> {
        Ok(SectionJet { value: Vector3::zeros(), partials: [Vector3::zeros(); 3] })
    }
}

/// `⟨du, X^l⟩ = Σ_i ⟨X^l, e_i⟩ ∂_{e_i}u`.
pub struct KillingSection<'a> {
    pub map: &'a SphereMap,
    pub l: usize,
}

impl Section for KillingSection<'_> {
    fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
        Ok(self.map.killing_pairings(x)?.w[self.l - 1])
    }
}

/// `u × ⟨du, X^l⟩`.
pub struct CrossKillingSection<'a> {
    pub map: &'a SphereMap,
    pub l: usize,
}

impl Section for CrossKillingSection<'_> {
    fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
        Ok(self.map.killing_pairings(x)?.cross[self.l - 1])
    }
}

/// `P_u(V(x))` for an ambient field `V: S³ → ℝ³` with analytic ambient derivative.
pub struct ProjectedField<'a, F> {
    pub map: &'a SphereMap,
    /// returns `V(x)` and `DV(x)·v` for each frame vector
    pub field: F,
}

impl<F> Section for ProjectedField<'_, F>
where
    F: Fn(&Vector4<f64>, &[Vector4<f64>; 3]) -> (Vector3<f64>, [Vector3<f64>; 3]) + Sync,
{
    fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
        Ok(self.jet(x)?.value)
    }

    fn jet(&self, x: &PointS3) -> Result<SectionJet> {
        let u = self.map.evaluate(x)?;
        let (v, dv) = (self.field)(x.coords(), &frame_vectors(x));
        Ok(project_jet(&u, &v, &dv))
    }
}

/// Jet of `P_u v` from the jets of `u` and `v`, using
/// `∂(P_u)v = −(∂u)(u·v) − u((∂u)·v)`.
pub fn project_jet(u: &MapJet, v: &Vector3<f64>, dv: &[Vector3<f64>; 3]) -> SectionJet {
    let n = u.value;
    let value = v - n * n.dot(v);
    let partials = std::array::from_fn(|i| {
        let du = u.partials[i];
        (dv[i] - n * n.dot(&dv[i])) - du * n.dot(v) - n * du.dot(v)
    });
    SectionJet { value, partials }
}

fn checked_jet<S: Section + ?Sized>(u: &MapJet, w: &S, x: &PointS3) -> Result<SectionJet> {
    let j = w.jet(x)?;
    let d = u.value.dot(&j.value).abs();
    if d > TANGENCY_TOL * (1.0 + j.value.norm()) {
        return Err(Error::NotTangent(d));
    }
    Ok(j)
}

/// Projected harmonic polynomial sections `P_u(Y_m c)`, member `3m + c`.
#[derive(Clone, Debug)]
pub struct SectionBasis {
    map: SphereMap,
    degree: u32,
    harmonics: HarmonicSet,
}

/// All basis members evaluated at one point. Column `α` is member `α`.
pub struct BasisJet {
    pub map: MapJet,
    pub values: DMatrix<f64>,
    pub partials: [DMatrix<f64>; 3],
}

pub fn basis_size(degree: u32) -> usize {
    3 * (0..=degree as usize).map(|k| (k + 1) * (k + 1)).sum::<usize>()
}

pub fn build_basis(u: &SphereMap, degree: u32) -> Result<SectionBasis> {
    if !u.is_smooth() {
        return Err(Error::Unsupported(format!(
            "`{}` is singular; the Galerkin basis needs a smooth map",
            u.spec()
        )));
    }
    if degree > 8 {
        return Err(Error::Config(format!("basis degree {degree} exceeds the supported maximum 8")));
    }
    Ok(SectionBasis { map: u.clone(), degree, harmonics: HarmonicSet::new(degree)? })
}

impl SectionBasis {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn map(&self) -> &SphereMap {
        &self.map
    }

    pub fn len(&self) -> usize {
        3 * self.harmonics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, x: &PointS3) -> Result<BasisJet> {
        let u = self.map.evaluate(x)?;
        let e = frame_vectors(x);
        let (mut y, mut g) = (Vec::new(), Vec::new());
        self.harmonics.eval_all(x.coords(), &mut y, &mut g);
        let n = self.len();
        let mut values = DMatrix::zeros(3, n);
        let mut partials = [DMatrix::zeros(3, n), DMatrix::zeros(3, n), DMatrix::zeros(3, n)];
        for (m, (ym, gm)) in y.iter().zip(&g).enumerate() {
            let dy = e.map(|v| gm.dot(&v));
            for c in 0..3 {
                let mut v = Vector3::zeros();
                v[c] = *ym;
                let dv = dy.map(|d| {
                    let mut t = Vector3::zeros();
                    t[c] = d;
                    t
                });
                let j = project_jet(&u, &v, &dv);
                let col = 3 * m + c;
                values.set_column(col, &j.value);
                for i in 0..3 {
                    partials[i].set_column(col, &j.partials[i]);
                }
            }
        }
        Ok(BasisJet { map: u, values, partials })
    }

    /// `Σ_α c_α w_α`.
    pub fn combination(&self, coeffs: DVector<f64>) -> BasisSection<'_> {
        assert_eq!(coeffs.len(), self.len());
        BasisSection { basis: self, coeffs }
    }

    /// `∫ w_α · w` for every member.
    pub fn moments<S: Section + ?Sized>(&self, w: &S, grid: &QuadratureGrid) -> Result<DVector<f64>> {
        grid.integrate_values(|x| {
            let b = self.eval(x)?;
            let v = w.value(x)?;
            Ok(b.values.transpose() * v)
        })
    }
}

pub struct BasisSection<'a> {
    basis: &'a SectionBasis,
    coeffs: DVector<f64>,
}

impl Section for BasisSection<'_> {
    fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
        Ok(self.jet(x)?.value)
    }

    fn jet(&self, x: &PointS3) -> Result<SectionJet> {
        let b = self.basis.eval(x)?;
        let v = &b.values * &self.coeffs;
        let p: [DVector<f64>; 3] = std::array::from_fn(|i| &b.partials[i] * &self.coeffs);
        Ok(SectionJet {
            value: Vector3::new(v[0], v[1], v[2]),
            partials: p.map(|d| Vector3::new(d[0], d[1], d[2])),
        })
    }
}

/// Index form and mass matrix on a section basis, with the mass-matrix
/// rank filter applied.
#[derive(Clone, Debug, PartialEq)]
pub struct FormPencil {
    pub a: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// columns: mass eigenvectors scaled by `λ^{−1/2}` on the kept directions
    pub transform: DMatrix<f64>,
    /// indices (into the ascending mass spectrum) of the kept directions
    pub kept_dims: Vec<usize>,
    pub mass_eigenvalues: DVector<f64>,
}

impl FormPencil {
    pub fn from_matrices(a: DMatrix<f64>, m: DMatrix<f64>) -> Result<FormPencil> {
        if a.shape() != m.shape() || !a.is_square() {
            return Err(Error::domain("pencil matrices must be square and of equal size"));
        }
        let m_sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m_sym);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let max = vals.iter().copied().fold(0.0, f64::max);
        if let Some(min) = vals.iter().copied().reduce(f64::min) {
            if min < -1e-12 * max.max(1.0) {
                return Err(Error::Conditioning(format!(
                    "mass matrix is not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
        }
        let kept_dims: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > MASS_RANK_TOL * max).collect();
        if kept_dims.is_empty() {
            return Err(Error::DegenerateBasis("mass matrix has no nondegenerate direction".into()));
        }
        let cols: Vec<DVector<f64>> = kept_dims
            .iter()
            .map(|&k| eig.eigenvectors.column(order[k]) / vals[k].sqrt())
            .collect();
        Ok(FormPencil { a, m, transform: DMatrix::from_columns(&cols), kept_dims, mass_eigenvalues: vals })
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dropped mass directions.
    pub fn filtered_dims(&self) -> usize {
        self.len() - self.kept_dims.len()
    }

    /// `TᵀAT`, the index form in mass-orthonormal coordinates.
    pub fn reduced(&self) -> DMatrix<f64> {
        let r = self.transform.transpose() * &self.a * &self.transform;
        (&r + r.transpose()) * 0.5
    }

    /// Mass-orthonormal coordinates of the L² projection of a field with
    /// basis moments `b` (`b_α = ∫ w_α·w`).
    pub fn project(&self, b: &DVector<f64>) -> DVector<f64> {
        self.transform.transpose() * b
    }

    /// Coefficients on the raw basis of the orthonormal coordinates `y`.
    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.transform * y
    }

    pub fn rayleigh(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * self.reduced() * y)[0] / y.norm_squared()
    }
}

/// Integrate `Σ_i ∂w_α·∂w_β − |du|² w_α·w_β` and `w_α·w_β` over the grid.
pub fn assemble(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<FormPencil> {
    let n = basis.len();
    let parts = reduce::map_reduce_range(
        grid.len(),
        |range| {
            let rows = range.len();
            let mut d = DMatrix::zeros(9 * rows, n);
            let mut v = DMatrix::zeros(3 * rows, n);
            let mut vp = DMatrix::zeros(3 * rows, n);
            for (r, k) in range.enumerate() {
                let node = grid.node(k);
                let b = basis.eval(&node.point)?;
                let s = node.weight.sqrt();
                let e = b.map.energy_density();
                if !e.is_finite() {
                    return Err(Error::NonFinite { point: *node.point.coords() });
                }
                v.view_mut((3 * r, 0), (3, n)).copy_from(&(&b.values * s));
                vp.view_mut((3 * r, 0), (3, n)).copy_from(&(&b.values * (s * e.sqrt())));
                for i in 0..3 {
                    d.view_mut((9 * r + 3 * i, 0), (3, n)).copy_from(&(&b.partials[i] * s));
                }
            }
            let m = v.tr_mul(&v);
            let a = d.tr_mul(&d) - vp.tr_mul(&vp);
            Ok::<_, Error>((a, m))
        },
        |(a1, m1), (a2, m2)| (a1 + a2, m1 + m2),
    )?;
    let (a, m) = parts.ok_or_else(|| Error::Config("empty grid".into()))?;
    let a = (&a + a.transpose()) * 0.5;
    let m = (&m + m.transpose()) * 0.5;
    FormPencil::from_matrices(a, m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// eigenvectors in mass-orthonormal coordinates, column `k` for eigenvalue `k`
    pub eigenvectors: DMatrix<f64>,
    pub index_count: usize,
    pub near_null_count: usize,
    pub tol_neg: f64,
    pub tol_null: f64,
}

impl SpectrumResult {
    pub fn count_below(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < threshold).count()
    }
}

pub fn spectrum(pencil: &FormPencil, tol_neg: f64, tol_null: f64) -> Result<SpectrumResult> {
    if !(tol_neg >= 0.0 && tol_null >= 0.0) {
        return Err(Error::Config("spectral tolerances must be nonnegative".into()));
    }
    let eig = SymmetricEigen::new(pencil.reduced());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("non-finite pencil eigenvalue".into()));
    }
    let cols: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let index_count = eigenvalues.iter().filter(|&&l| l < -tol_neg).count();
    let near_null_count = eigenvalues.iter().filter(|&&l| l >= -tol_neg && l <= tol_null).count();
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors: DMatrix::from_columns(&cols),
        index_count,
        near_null_count,
        tol_neg,
        tol_null,
    })
}

/// Largest principal angle between the column spans of `a` and `b` (radians),
/// computed from the component of `b` orthogonal to `a`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.singular_values().amax();
    s.min(1.0).asin()
}

/// Central second difference of `w` along the three frame geodesics.
pub fn laplacian_fd<S: Section + ?Sized>(w: &S, x: &PointS3, h: f64) -> Result<Vector3<f64>> {
    let w0 = w.value(x)?;
    let mut acc = Vector3::zeros();
    for v in frame_vectors(x) {
        acc += w.value(&x.geodesic(&v, h))? + w.value(&x.geodesic(&v, -h))? - w0 * 2.0;
    }
    Ok(acc / (h * h))
}

/// `L_u w (x) = −P_u Δw − |du|² w` with a finite-difference Laplacian.
pub fn apply_l<S: Section + ?Sized>(u: &SphereMap, w: &S, x: &PointS3, h: f64) -> Result<Vector3<f64>> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(Error::Config(format!("finite-difference step {h} outside [1e-4, 1e-2]")));
    }
    let j = u.evaluate(x)?;
    let lap = laplacian_fd(w, x, h)?;
    let n = j.value;
    Ok(-(lap - n * n.dot(&lap)) - w.value(x)? * j.energy_density())
}

/// `½ ∫ |dw|² − |w|²|du|²`.
pub fn second_variation<S: Section + ?Sized>(u: &SphereMap, w: &S, grid: &QuadratureGrid) -> Result<f64> {
    let v = grid.integrate(|x| {
        let j = u.evaluate(x)?;
        let s = checked_jet(&j, w, x)?;
        Ok(s.dirichlet_density() - s.value.norm_squared() * j.energy_density())
    })?;
    Ok(0.5 * v)
}

/// `½ ∫ |du|²` on the grid.
pub fn energy(u: &SphereMap, grid: &QuadratureGrid) -> Result<f64> {
    Ok(0.5 * grid.integrate(|x| u.energy_density(x))?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expansion {
    pub t: f64,
    pub lhs: f64,
    pub quadratic_model: f64,
    pub remainder: f64,
}

/// Compares `E((u + t w)/|u + t w|)` to `E(u) + t² D²E_u(w)`.
pub fn expansion_check<S: Section + ?Sized>(u: &SphereMap, w: &S, t: f64, grid: &QuadratureGrid) -> Result<Expansion> {
    let integrand = |x: &PointS3| -> Result<(f64, f64, f64)> {
        let j = u.evaluate(x)?;
        let s = checked_jet(&j, w, x)?;
        let v = j.value + s.value * t;
        let r = v.norm();
        if r < 0.5 {
            return Err(Error::domain(format!("|u + t w| = {r} < 1/2; t is too large")));
        }
        let n = v / r;
        let mut dens = 0.0;
        for i in 0..3 {
            let dv = j.partials[i] + s.partials[i] * t;
            dens += ((dv - n * n.dot(&dv)) / r).norm_squared();
        }
        let e0 = j.energy_density();
        Ok((dens, e0, s.dirichlet_density() - s.value.norm_squared() * e0))
    };
    let out = grid.integrate_values(|x| {
        let (a, b, c) = integrand(x)?;
        Ok(Vector3::new(a, b, c))
    })?;
    let lhs = 0.5 * out[0];
    let quadratic_model = 0.5 * out[1] + t * t * 0.5 * out[2];
    Ok(Expansion { t, lhs, quadratic_model, remainder: lhs - quadratic_model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_grid, Resolution};
    use crate::rng;

    #[test]
    fn basis_sizes() {
        let h = SphereMap::hopf();
        assert_eq!(build_basis(&h, 0).unwrap().len(), 3);
        assert_eq!(build_basis(&h, 2).unwrap().len(), 42);
        assert_eq!(basis_size(3), 90);
        assert!(matches!(build_basis(&SphereMap::parse("equator(0,0,0)").unwrap(), 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn basis_members_are_tangent_with_correct_partials() {
        let h = SphereMap::parse("blaschke(z^2;1)∘hopf").unwrap();
        let b = build_basis(&h, 2).unwrap();
        let mut r = rng::seeded(3);
        for _ in 0..10 {
            let x = rng::point_s3(&mut r);
            let j = b.eval(&x).unwrap();
            let u = j.map.value;
            assert!((j.values.transpose() * u).amax() < 1e-12);
            for alpha in [0, 7, 20, 41] {
                let mut c = DVector::zeros(b.len());
                c[alpha] = 1.0;
                let s = b.combination(c);
                let analytic = s.jet(&x).unwrap();
                let e = frame_vectors(&x);
                for i in 0..3 {
                    let h = 1e-5;
                    let fd = (s.value(&x.geodesic(&e[i], h)).unwrap() - s.value(&x.geodesic(&e[i], -h)).unwrap()) / (2.0 * h);
                    assert!((fd - analytic.partials[i]).amax() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn constant_map_has_nonnegative_spectrum() {
        let u = SphereMap::parse("const(0,0,1)").unwrap();
        let b = build_basis(&u, 2).unwrap();
        let g = build_grid(8, 16, 16).unwrap();
        let p = assemble(&b, &g).unwrap();
        let s = spectrum(&p, DEFAULT_TOL_NEG, DEFAULT_TOL_NULL).unwrap();
        assert_eq!(s.index_count, 0);
        assert!(s.eigenvalues[0] > -1e-10);
    }

    #[test]
    fn synthetic_negative_identity_pencil() {
        let m = DMatrix::<f64>::identity(5, 5) * 2.0;
        let p = FormPencil::from_matrices(-m.clone(), m).unwrap();
        let s = spectrum(&p, DEFAULT_TOL_NEG, DEFAULT_TOL_NULL).unwrap();
        assert_eq!(s.index_count, 5);
        assert!(s.eigenvalues.iter().all(|l| (l + 1.0).abs() < 1e-14));
    }

    #[test]
    fn index_count_monotone_in_tol_neg() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -0.3, -0.06, -0.01, 0.0, 2.0]));
        let p = FormPencil::from_matrices(a, DMatrix::identity(6, 6)).unwrap();
        let mut last = usize::MAX;
        for tol in [0.0, 0.005, 0.05, 0.1, 0.5, 2.0] {
            let c = spectrum(&p, tol, 0.05).unwrap().index_count;
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn killing_section_is_a_minus_one_eigenfield() {
        let h = SphereMap::hopf();
        let mut r = rng::seeded(11);
        for l in 1..=4 {
            let w = KillingSection { map: &h, l };
            let x = rng::point_s3(&mut r);
            let res = apply_l(&h, &w, &x, 1e-3).unwrap() + w.value(&x).unwrap();
            assert!(res.amax() < 1e-5, "{res}");
        }
        assert_eq!(apply_l(&h, &ZeroSection, &rng::point_s3(&mut r), 1e-3).unwrap(), Vector3::zeros());
    }

    #[test]
    fn non_tangent_field_rejected() {
        let h = SphereMap::hopf();
        struct Radial<'a>(&'a SphereMap);
        impl Section for Radial<'_> {
            fn value(&self, x: &PointS3) -> Result<Vector3<f64>> {
                self.0.value(x)
            }
        }
        let g = build_grid(4, 8, 8).unwrap();
        assert!(matches!(second_variation(&h, &Radial(&h), &g), Err(Error::NotTangent(_))));
        assert!(matches!(expansion_check(&h, &Radial(&h), 0.01, &g), Err(Error::NotTangent(_))));
    }

    #[test]
    fn zero_expansion() {
        let h = SphereMap::hopf();
        let g = QuadratureGrid::new(Resolution::new(6, 12, 12).unwrap()).unwrap();
        let k = KillingSection { map: &h, l: 1 };
        let e = expansion_check(&h, &k, 0.0, &g).unwrap();
        assert!(e.remainder.abs() < 1e-12);
        assert_eq!(second_variation(&h, &ZeroSection, &g).unwrap(), 0.0);
    }
}
