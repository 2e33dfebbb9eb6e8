//! Closed-form calculus on the round S³ in the global left-invariant frame
//!
//! ```text
//! e_i = x_i ∂_{i+1} − x_{i+1} ∂_i + x_{i−1} ∂_4 − x_4 ∂_{i−1},   i ∈ ℤ₃
//! ```
//!
//! Everything here is exact: frame fields are linear in `x`, the connection
//! and curvature are constant in the frame, and conformal Killing fields are
//! the tangential parts of the coordinate directions. The [`fd`] submodule
//! holds the finite-difference oracles used to check these closed forms.

use std::fmt;

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

/// Accepted deviation of `|x|` from 1 before [`PointS3::new`] rejects.
pub const UNIT_ACCEPT: f64 = 1e-10;

/// A point of S³ ⊂ ℝ⁴.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointS3(Vector4<f64>);

impl PointS3 {
    /// Accepts vectors within [`UNIT_ACCEPT`] of the unit sphere and
    /// renormalizes them; anything else is a domain error.
    pub fn new(x: Vector4<f64>) -> Result<Self> {
        let n = x.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_ACCEPT {
            return Err(Error::domain(format!("|x| = {n} is not 1")));
        }
        Ok(PointS3(x / n))
    }

    /// Radial projection of any nonzero vector.
    pub fn normalize(x: Vector4<f64>) -> Result<Self> {
        let n = x.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::domain("cannot normalize the zero vector"));
        }
        Ok(PointS3(x / n))
    }

    pub fn from_coords(x1: f64, x2: f64, x3: f64, x4: f64) -> Result<Self> {
        Self::new(Vector4::new(x1, x2, x3, x4))
    }

    pub fn coords(&self) -> &Vector4<f64> {
        &self.0
    }

    /// Coordinate `x_k`, `k` in 1..=4.
    pub fn x(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    /// Orthogonal projection of an ambient vector onto `T_x S³`.
    pub fn project(&self, v: &Vector4<f64>) -> Vector4<f64> {
        v - self.0 * self.0.dot(v)
    }

    /// Point reached along the great circle leaving `x` with velocity `v`.
    pub fn geodesic(&self, v: &Vector4<f64>, t: f64) -> PointS3 {
        let s = v.norm();
        if s == 0.0 {
            return *self;
        }
        let y = self.0 * (s * t).cos() + v * ((s * t).sin() / s);
        PointS3(y / y.norm())
    }

    pub fn distance(&self, other: &PointS3) -> f64 {
        // chordal form is stable near 0 and π
        let c = (self.0 - other.0).norm();
        2.0 * (0.5 * c).min(1.0).asin()
    }
}

/// Index of a frame field in ℤ₃ = {1, 2, 3}.
///
/// All cyclic `i ± 1` arithmetic in the crate goes through [`Frame::next`]
/// and [`Frame::prev`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Frame {
    E1,
    E2,
    E3,
}

impl Frame {
    pub const ALL: [Frame; 3] = [Frame::E1, Frame::E2, Frame::E3];

    pub fn from_label(i: usize) -> Result<Frame> {
        match i {
            1 => Ok(Frame::E1),
            2 => Ok(Frame::E2),
            3 => Ok(Frame::E3),
            _ => Err(Error::domain(format!("frame index {i} not in 1..=3"))),
        }
    }

    /// 1-based label.
    pub fn label(self) -> usize {
        self.index() + 1
    }

    /// 0-based position, also the ambient coordinate slot of `x_i`.
    pub fn index(self) -> usize {
        match self {
            Frame::E1 => 0,
            Frame::E2 => 1,
            Frame::E3 => 2,
        }
    }

    pub fn next(self) -> Frame {
        Frame::ALL[(self.index() + 1) % 3]
    }

    pub fn prev(self) -> Frame {
        Frame::ALL[(self.index() + 2) % 3]
    }

    /// Levi-Civita symbol ε_{ijk}.
    pub fn epsilon(i: Frame, j: Frame, k: Frame) -> f64 {
        if j == i.next() && k == j.next() {
            1.0
        } else if j == i.prev() && k == j.prev() {
            -1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.label())
    }
}

/// Constant matrix `A_i` with `e_i(x) = A_i x`.
pub fn frame_generator(i: Frame) -> Matrix4<f64> {
    let (a, b, c) = (i.index(), i.next().index(), i.prev().index());
    let mut m = Matrix4::zeros();
    m[(b, a)] = 1.0;
    m[(a, b)] = -1.0;
    m[(3, c)] = 1.0;
    m[(c, 3)] = -1.0;
    m
}

fn frame_vector(i: Frame, x: &Vector4<f64>) -> Vector4<f64> {
    let (a, b, c) = (i.index(), i.next().index(), i.prev().index());
    let mut v = Vector4::zeros();
    v[b] += x[a];
    v[a] -= x[b];
    v[3] += x[c];
    v[c] -= x[3];
    v
}

/// A tangent vector to S³, stored in ambient ℝ⁴ coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVec {
    pub base: PointS3,
    pub v: Vector4<f64>,
}

impl TangentVec {
    /// Rejects vectors whose normal component exceeds `1e-12·max(1, |v|)`.
    pub fn new(base: PointS3, v: Vector4<f64>) -> Result<Self> {
        let normal = base.coords().dot(&v);
        if normal.abs() > 1e-12 * v.norm().max(1.0) {
            return Err(Error::domain(format!("vector is not tangent (v·x = {normal:e})")));
        }
        Ok(TangentVec { base, v })
    }

    /// Tangential part of an arbitrary ambient vector.
    pub fn projected(base: PointS3, v: Vector4<f64>) -> Self {
        TangentVec { base, v: base.project(&v) }
    }

    pub fn from_frame(base: PointS3, c: &Vector3<f64>) -> Self {
        let e = frame_vectors(&base);
        TangentVec { base, v: e[0] * c[0] + e[1] * c[1] + e[2] * c[2] }
    }

    /// Components `(v·e_1, v·e_2, v·e_3)`.
    pub fn frame_components(&self) -> Vector3<f64> {
        let e = frame_vectors(&self.base);
        Vector3::new(self.v.dot(&e[0]), self.v.dot(&e[1]), self.v.dot(&e[2]))
    }

    pub fn zero(base: PointS3) -> Self {
        TangentVec { base, v: Vector4::zeros() }
    }
}

/// A covector on S³ as coefficients in the coframe `(e_1*, e_2*, e_3*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovectorS3 {
    pub base: PointS3,
    pub c: Vector3<f64>,
}

impl CovectorS3 {
    pub fn new(base: PointS3, c: Vector3<f64>) -> Self {
        CovectorS3 { base, c }
    }

    /// The coframe element `e_i*`.
    pub fn coframe(base: PointS3, i: Frame) -> Self {
        let mut c = Vector3::zeros();
        c[i.index()] = 1.0;
        CovectorS3 { base, c }
    }

    /// Pullback to S³ of the ambient constant-coefficient 1-form `Σ α_k dx_k`.
    pub fn from_ambient(base: PointS3, alpha: &Vector4<f64>) -> Self {
        let e = frame_vectors(&base);
        CovectorS3 { base, c: Vector3::new(alpha.dot(&e[0]), alpha.dot(&e[1]), alpha.dot(&e[2])) }
    }

    /// Pullback of the ambient 1-form
    /// `x_i dx_{i+1} − x_{i+1} dx_i + x_{i−1} dx_4 − x_4 dx_{i−1}`, which
    /// is the coframe element `e_i*` when the frame is dual.
    pub fn coframe_from_ambient_form(base: PointS3, i: Frame) -> Self {
        Self::from_ambient(base, &frame_vector(i, base.coords()))
    }

    /// The coordinate differential `dx_k`, `k` in 1..=4.
    pub fn coordinate_differential(base: PointS3, k: usize) -> Self {
        let mut a = Vector4::zeros();
        a[k - 1] = 1.0;
        Self::from_ambient(base, &a)
    }

    pub fn pair(&self, t: &TangentVec) -> f64 {
        self.c.dot(&t.frame_components())
    }

    /// Riesz representative in ambient coordinates.
    pub fn to_ambient(&self) -> Vector4<f64> {
        let e = frame_vectors(&self.base);
        e[0] * self.c[0] + e[1] * self.c[1] + e[2] * self.c[2]
    }

    /// Metric inner product of covectors.
    pub fn dot(&self, other: &CovectorS3) -> f64 {
        self.c.dot(&other.c)
    }
}

/// `(e_1, e_2, e_3)` at `x` as ambient vectors.
pub fn frame_vectors(x: &PointS3) -> [Vector4<f64>; 3] {
    Frame::ALL.map(|i| frame_vector(i, x.coords()))
}

/// The orthonormal frame at `x`; `(x, e_1, e_2, e_3)` is positively oriented.
pub fn frame(x: &PointS3) -> [TangentVec; 3] {
    frame_vectors(x).map(|v| TangentVec { base: *x, v })
}

/// `[e_i, e_j](x)` from the coefficient formula
/// `Σ_{k,l} (e_i^k ∂_k e_j^l − e_j^k ∂_k e_i^l) ∂_l`; since the fields are
/// linear this is `A_j e_i − A_i e_j`. The bracket of a field with itself is
/// exactly zero.
pub fn lie_bracket_frame(i: Frame, j: Frame, x: &PointS3) -> TangentVec {
    if i == j {
        return TangentVec::zero(*x);
    }
    let ei = frame_vector(i, x.coords());
    let ej = frame_vector(j, x.coords());
    let v = frame_generator(j) * ei - frame_generator(i) * ej;
    TangentVec { base: *x, v }
}

/// A signed frame element `0`, `+e_k` or `−e_k` (or the coframe analogue).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameTerm {
    Zero,
    Plus(Frame),
    Minus(Frame),
}

impl FrameTerm {
    pub fn coeffs(self) -> Vector3<f64> {
        let mut c = Vector3::zeros();
        match self {
            FrameTerm::Zero => {}
            FrameTerm::Plus(k) => c[k.index()] = 1.0,
            FrameTerm::Minus(k) => c[k.index()] = -1.0,
        }
        c
    }

    pub fn neg(self) -> FrameTerm {
        match self {
            FrameTerm::Zero => FrameTerm::Zero,
            FrameTerm::Plus(k) => FrameTerm::Minus(k),
            FrameTerm::Minus(k) => FrameTerm::Plus(k),
        }
    }

    pub fn vector(self, x: &PointS3) -> TangentVec {
        TangentVec::from_frame(*x, &self.coeffs())
    }

    pub fn covector(self, x: &PointS3) -> CovectorS3 {
        CovectorS3::new(*x, self.coeffs())
    }
}

/// Levi-Civita connection in the frame: `vectors[i][j] = ∇_{e_i} e_j` and
/// `covectors[i][j] = ∇_{e_i} e_j*`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionTable {
    pub vectors: [[FrameTerm; 3]; 3],
    pub covectors: [[FrameTerm; 3]; 3],
}

impl ConnectionTable {
    pub fn new() -> Self {
        let mut vectors = [[FrameTerm::Zero; 3]; 3];
        let mut covectors = [[FrameTerm::Zero; 3]; 3];
        for i in Frame::ALL {
            // ∇_{e_i} e_{i+1} = −e_{i−1},  ∇_{e_{i+1}} e_i = e_{i−1},  ∇_{e_i} e_i = 0
            vectors[i.index()][i.next().index()] = FrameTerm::Minus(i.prev());
            vectors[i.next().index()][i.index()] = FrameTerm::Plus(i.prev());
            // ∇_{e_i} e_i* = 0,  ∇_{e_{i+1}} e_i* = e_{i−1}*,  ∇_{e_{i−1}} e_i* = −e_{i+1}*
            covectors[i.next().index()][i.index()] = FrameTerm::Plus(i.prev());
            covectors[i.prev().index()][i.index()] = FrameTerm::Minus(i.next());
        }
        ConnectionTable { vectors, covectors }
    }

    pub fn vector(&self, i: Frame, j: Frame) -> FrameTerm {
        self.vectors[i.index()][j.index()]
    }

    pub fn covector(&self, i: Frame, j: Frame) -> FrameTerm {
        self.covectors[i.index()][j.index()]
    }

    /// Christoffel-type coefficient `(∇_{e_i} e_j)·e_k`.
    pub fn gamma(&self, i: Frame, j: Frame, k: Frame) -> f64 {
        self.vector(i, j).coeffs()[k.index()]
    }

    /// `∇_{e_i} Y` for `Y = Σ_j c_j e_j` with constant coefficients.
    pub fn along(&self, i: Frame, c: &Vector3<f64>) -> Vector3<f64> {
        Frame::ALL.iter().map(|&j| self.vector(i, j).coeffs() * c[j.index()]).sum()
    }

    /// `∇_{e_i} α` for `α = Σ_j c_j e_j*` with constant coefficients.
    pub fn along_covector(&self, i: Frame, c: &Vector3<f64>) -> Vector3<f64> {
        Frame::ALL.iter().map(|&j| self.covector(i, j).coeffs() * c[j.index()]).sum()
    }

    /// Tangential frame field `∇_X Y` with `X = Σ a_i e_i`, `Y = Σ c_j e_j`, both
    /// with constant coefficients (no derivative of coefficients).
    pub fn combine(&self, a: &Vector3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
        Frame::ALL.iter().map(|&i| self.along(i, c) * a[i.index()]).sum()
    }

    /// Largest violation of metric compatibility `(∇_{e_i}e_j)·e_j = 0` and of
    /// torsion-freeness `∇_{e_i}e_j − ∇_{e_j}e_i = [e_i, e_j]` at `x`.
    pub fn invariant_residual(&self, x: &PointS3) -> f64 {
        let mut worst: f64 = 0.0;
        for i in Frame::ALL {
            for j in Frame::ALL {
                worst = worst.max(self.gamma(i, j, j).abs());
                let torsion = self.vector(i, j).coeffs() - self.vector(j, i).coeffs();
                let bracket = lie_bracket_frame(i, j, x).frame_components();
                worst = worst.max((torsion - bracket).amax());
            }
        }
        worst
    }
}

impl Default for ConnectionTable {
    fn default() -> Self {
        Self::new()
    }
}

/// `∇_{e_i} e_j` at `x`, by table lookup.
pub fn nabla_frame(i: Frame, j: Frame, x: &PointS3) -> TangentVec {
    ConnectionTable::new().vector(i, j).vector(x)
}

/// `∇_{e_i} e_j*` at `x`, by table lookup.
pub fn nabla_coframe(i: Frame, j: Frame, x: &PointS3) -> CovectorS3 {
    ConnectionTable::new().covector(i, j).covector(x)
}

/// Tangential projection of the ambient derivative `D_{e_i} e_j = A_j e_i`,
/// which is the Levi-Civita derivative on the embedded sphere.
pub fn levi_civita_ambient(i: Frame, j: Frame, x: &PointS3) -> Vector4<f64> {
    let ei = frame_vector(i, x.coords());
    x.project(&(frame_generator(j) * ei))
}

/// Curvature action `R(e_i, e_j)` on frame vectors and coframe covectors.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciTable {
    /// `vectors[i][j][k] = R(e_i, e_j) e_k`
    pub vectors: [[[FrameTerm; 3]; 3]; 3],
    /// `covectors[i][j][k] = R(e_i, e_j) e_k*`
    pub covectors: [[[FrameTerm; 3]; 3]; 3],
}

impl RicciTable {
    pub fn new() -> Self {
        let mut vectors = [[[FrameTerm::Zero; 3]; 3]; 3];
        for i in Frame::ALL {
            let j = i.next();
            // R(e_i,e_{i+1}) e_i = −e_{i+1},  R(e_i,e_{i+1}) e_{i+1} = e_i,  R(e_i,e_{i+1}) e_{i−1} = 0
            let row = [
                (i, FrameTerm::Minus(j)),
                (j, FrameTerm::Plus(i)),
                (i.prev(), FrameTerm::Zero),
            ];
            for (k, t) in row {
                vectors[i.index()][j.index()][k.index()] = t;
                vectors[j.index()][i.index()][k.index()] = t.neg();
            }
        }
        RicciTable { vectors, covectors: vectors }
    }

    pub fn vector(&self, i: Frame, j: Frame, k: Frame) -> FrameTerm {
        self.vectors[i.index()][j.index()][k.index()]
    }

    pub fn covector(&self, i: Frame, j: Frame, k: Frame) -> FrameTerm {
        self.covectors[i.index()][j.index()][k.index()]
    }

    /// Matrix of `R(e_i, e_j)` acting on frame coefficients (columns = images of `e_k`).
    pub fn matrix(&self, i: Frame, j: Frame) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_columns(&Frame::ALL.map(|k| self.vector(i, j, k).coeffs()))
    }
}

impl Default for RicciTable {
    fn default() -> Self {
        Self::new()
    }
}

/// `R(e_i, e_j) v`, extended linearly from the table. Vanishes for `i = j`.
pub fn ricci_action(i: Frame, j: Frame, target: &TangentVec) -> TangentVec {
    let c = RicciTable::new().matrix(i, j) * target.frame_components();
    TangentVec::from_frame(target.base, &c)
}

/// `R(e_i, e_j) α` for a covector.
pub fn ricci_action_covector(i: Frame, j: Frame, target: &CovectorS3) -> CovectorS3 {
    let t = RicciTable::new();
    let m = nalgebra::Matrix3::from_columns(&Frame::ALL.map(|k| t.covector(i, j, k).coeffs()));
    CovectorS3::new(target.base, m * target.c)
}

/// Curvature computed from the connection by
/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]} Z` on frame fields. The
/// connection coefficients are constant, so this is pure table algebra.
pub fn curvature_from_connection(i: Frame, j: Frame, k: Frame, x: &PointS3) -> Vector3<f64> {
    let t = ConnectionTable::new();
    let ek = t.vector(j, k).coeffs();
    let a = t.along(i, &ek);
    let ek2 = t.vector(i, k).coeffs();
    let b = t.along(j, &ek2);
    let bracket = lie_bracket_frame(i, j, x).frame_components();
    let c = t.combine(&bracket, &Frame::ALL.map(|m| if m == k { 1.0 } else { 0.0 }).into());
    a - b - c
}

/// Covector analogue of [`curvature_from_connection`].
pub fn curvature_from_connection_covector(i: Frame, j: Frame, k: Frame, x: &PointS3) -> Vector3<f64> {
    let t = ConnectionTable::new();
    let a = t.along_covector(i, &t.covector(j, k).coeffs());
    let b = t.along_covector(j, &t.covector(i, k).coeffs());
    let bracket = lie_bracket_frame(i, j, x).frame_components();
    let c: Vector3<f64> = Frame::ALL
        .iter()
        .map(|&m| t.covector(m, k).coeffs() * bracket[m.index()])
        .sum();
    a - b - c
}

/// `de_i*(e_j, e_k)` from `dα(X,Y) = X α(Y) − Y α(X) − α([X,Y])`. The
/// pairings `e_i*(e_k)` are constant, so only the bracket term survives.
pub fn exterior_derivative_coframe(i: Frame, j: Frame, k: Frame, x: &PointS3) -> f64 {
    if j == k {
        return 0.0;
    }
    let bracket = lie_bracket_frame(j, k, x);
    -CovectorS3::coframe_from_ambient_form(*x, i).pair(&bracket)
}

/// `de_i*(e_j, e_k)` from `dα = Σ_m e_m* ∧ ∇_{e_m} α`, i.e.
/// `(∇_{e_j} e_i*)(e_k) − (∇_{e_k} e_i*)(e_j)`.
pub fn exterior_derivative_via_connection(i: Frame, j: Frame, k: Frame, x: &PointS3) -> f64 {
    let ek = frame(x)[k.index()];
    let ej = frame(x)[j.index()];
    nabla_coframe(j, i, x).pair(&ek) - nabla_coframe(k, i, x).pair(&ej)
}

/// Conformal Killing field `X^l = ε_l − x_l x`, `l` in 1..=4.
///
/// # Panics
/// If `l` is outside 1..=4.
pub fn killing_field(l: usize, x: &PointS3) -> TangentVec {
    assert!((1..=4).contains(&l), "Killing index {l} not in 1..=4");
    let mut v = -x.coords() * x.x(l);
    v[l - 1] += 1.0;
    TangentVec { base: *x, v }
}

/// `∇_{e_i} X^l = −x_l e_i`.
pub fn nabla_killing(i: Frame, l: usize, x: &PointS3) -> TangentVec {
    assert!((1..=4).contains(&l), "Killing index {l} not in 1..=4");
    let ei = frame_vector(i, x.coords());
    TangentVec { base: *x, v: ei * (-x.x(l)) }
}

/// `Σ_i ∇_{e_i}∇_{e_i} X^l` in closed form: differentiating `−x_l e_i` along
/// `e_i` gives `−e_i(x_l) e_i − x_l ∇_{e_i} e_i`.
pub fn killing_rough_laplacian(l: usize, x: &PointS3) -> TangentVec {
    let e = frame_vectors(x);
    let t = ConnectionTable::new();
    let mut v = Vector4::zeros();
    for i in Frame::ALL {
        let ei = e[i.index()];
        v -= ei * ei[l - 1];
        v -= t.vector(i, i).vector(x).v * x.x(l);
    }
    TangentVec { base: *x, v }
}

/// Finite-difference oracles.
pub mod fd {
    use super::*;

    /// Default step for first-derivative central differences.
    pub const STEP: f64 = 1e-5;

    /// Covariant derivative of an ambient-valued vector field along `v`, by a
    /// central difference on the great circle through `x` with velocity `v`,
    /// projected back to `T_x S³`.
    pub fn covariant_derivative<F>(field: F, x: &PointS3, v: &Vector4<f64>, h: f64) -> Vector4<f64>
    where
        F: Fn(&PointS3) -> Vector4<f64>,
    {
        let d = (field(&x.geodesic(v, h)) - field(&x.geodesic(v, -h))) / (2.0 * h);
        x.project(&d)
    }

    /// Central difference of a scalar function along the great circle with velocity `v`.
    pub fn directional<F>(f: F, x: &PointS3, v: &Vector4<f64>, h: f64) -> f64
    where
        F: Fn(&PointS3) -> f64,
    {
        (f(&x.geodesic(v, h)) - f(&x.geodesic(v, -h))) / (2.0 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use proptest::prelude::*;

    fn p(x: [f64; 4]) -> PointS3 {
        PointS3::normalize(Vector4::from(x)).unwrap()
    }

    fn arb_point() -> impl Strategy<Value = PointS3> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("nonzero", |v| Vector4::from(*v).norm() > 1e-3)
            .prop_map(p)
    }

    #[test]
    fn frame_at_first_axis() {
        let x = p([1.0, 0.0, 0.0, 0.0]);
        let [e1, e2, e3] = frame_vectors(&x);
        assert_eq!(e1, Vector4::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(e2, Vector4::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(e3, Vector4::new(0.0, 0.0, -1.0, 0.0));
        let m = Matrix4::from_rows(&[
            x.coords().transpose(),
            e1.transpose(),
            e2.transpose(),
            e3.transpose(),
        ]);
        assert_abs_diff_eq!(m.determinant(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_unit() {
        assert!(PointS3::new(Vector4::new(1.0, 1.0, 0.0, 0.0)).is_err());
        assert!(PointS3::normalize(Vector4::zeros()).is_err());
        assert!(Frame::from_label(0).is_err());
        assert!(Frame::from_label(4).is_err());
    }

    #[test]
    fn cyclic_indices() {
        assert_eq!(Frame::E3.next(), Frame::E1);
        assert_eq!(Frame::E1.prev(), Frame::E3);
        assert_eq!(Frame::epsilon(Frame::E2, Frame::E3, Frame::E1), 1.0);
        assert_eq!(Frame::epsilon(Frame::E2, Frame::E1, Frame::E3), -1.0);
        assert_eq!(Frame::epsilon(Frame::E2, Frame::E2, Frame::E3), 0.0);
    }

    #[test]
    fn bracket_examples() {
        let mut r = rng::seeded(3);
        for _ in 0..50 {
            let x = rng::point_s3(&mut r);
            let e3 = frame_vectors(&x)[2];
            let b12 = lie_bracket_frame(Frame::E1, Frame::E2, &x).v;
            let b21 = lie_bracket_frame(Frame::E2, Frame::E1, &x).v;
            assert!((b12 + 2.0 * e3).amax() < 1e-14);
            assert!((b21 - 2.0 * e3).amax() < 1e-14);
            assert_eq!(lie_bracket_frame(Frame::E1, Frame::E1, &x).v, Vector4::zeros());
        }
        let x = p([1.0, 0.0, 0.0, 0.0]);
        let b = lie_bracket_frame(Frame::E1, Frame::E2, &x).v + 2.0 * frame_vectors(&x)[2];
        assert_eq!(b, Vector4::zeros());
    }

    #[test]
    fn connection_examples() {
        let x = p([0.3, -0.2, 0.5, 0.1]);
        let e = frame_vectors(&x);
        assert!((nabla_frame(Frame::E1, Frame::E2, &x).v + e[2]).amax() < 1e-15);
        assert_eq!(nabla_frame(Frame::E1, Frame::E1, &x).v, Vector4::zeros());
        let d = nabla_coframe(Frame::E2, Frame::E1, &x);
        assert_eq!(d.c, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn connection_matches_ambient_projection_and_fd() {
        let mut r = rng::seeded(11);
        let table = ConnectionTable::new();
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            assert!(table.invariant_residual(&x) < 1e-14);
            let e = frame_vectors(&x);
            for i in Frame::ALL {
                for j in Frame::ALL {
                    let expect = table.vector(i, j).vector(&x).v;
                    assert!((levi_civita_ambient(i, j, &x) - expect).amax() < 1e-14);
                    let fd = fd::covariant_derivative(
                        |y| frame_vectors(y)[j.index()],
                        &x,
                        &e[i.index()],
                        fd::STEP,
                    );
                    assert!((fd - expect).amax() < 1e-8, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn metric_compatibility_fd() {
        // d/dt (e_i·e_j) along e_k equals (∇e_i)·e_j + e_i·(∇e_j) from the table
        let mut r = rng::seeded(12);
        let t = ConnectionTable::new();
        for _ in 0..50 {
            let x = rng::point_s3(&mut r);
            let e = frame_vectors(&x);
            for i in Frame::ALL {
                for j in Frame::ALL {
                    for k in Frame::ALL {
                        let lhs = fd::directional(
                            |y| {
                                let f = frame_vectors(y);
                                f[i.index()].dot(&f[j.index()])
                            },
                            &x,
                            &e[k.index()],
                            fd::STEP,
                        );
                        let rhs = t.gamma(k, i, j) + t.gamma(k, j, i);
                        assert!((lhs - rhs).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn ricci_examples() {
        let x = p([0.1, 0.7, -0.3, 0.2]);
        let e = frame(&x);
        let r = ricci_action(Frame::E1, Frame::E2, &e[0]);
        assert!((r.v + e[1].v).amax() < 1e-15);
        let r = ricci_action(Frame::E1, Frame::E2, &e[2]);
        assert!(r.v.amax() < 1e-15);
        let a = ricci_action_covector(Frame::E1, Frame::E2, &CovectorS3::coframe(x, Frame::E2));
        assert_eq!(a.c, Vector3::new(1.0, 0.0, 0.0));
        assert!(ricci_action(Frame::E2, Frame::E2, &e[0]).v.amax() == 0.0);
    }

    #[test]
    fn ricci_table_matches_connection_curvature() {
        let mut r = rng::seeded(5);
        let table = RicciTable::new();
        for _ in 0..20 {
            let x = rng::point_s3(&mut r);
            for i in Frame::ALL {
                for j in Frame::ALL {
                    for k in Frame::ALL {
                        let c = curvature_from_connection(i, j, k, &x);
                        assert!((c - table.vector(i, j, k).coeffs()).amax() < 1e-13);
                        let c = curvature_from_connection_covector(i, j, k, &x);
                        assert!((c - table.covector(i, j, k).coeffs()).amax() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn exterior_derivative_examples() {
        let x = p([0.2, 0.2, 0.4, -0.8]);
        let d = |i, j, k| exterior_derivative_coframe(i, j, k, &x);
        assert_abs_diff_eq!(d(Frame::E1, Frame::E2, Frame::E3), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d(Frame::E1, Frame::E3, Frame::E2), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d(Frame::E1, Frame::E1, Frame::E2), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn killing_examples() {
        let x = p([0.0, 1.0, 0.0, 0.0]);
        assert_eq!(killing_field(1, &x).v, Vector4::new(1.0, 0.0, 0.0, 0.0));
        let x = p([1.0, 0.0, 0.0, 0.0]);
        assert_eq!(killing_field(1, &x).v, Vector4::zeros());
        let x = p([0.0, 1.0, 0.0, 0.0]);
        assert_eq!(nabla_killing(Frame::E2, 1, &x).v.amax(), 0.0);
    }

    #[test]
    fn killing_derivative_fd() {
        let mut r = rng::seeded(8);
        for _ in 0..100 {
            let x = rng::point_s3(&mut r);
            let e = frame_vectors(&x);
            for i in Frame::ALL {
                for l in 1..=4 {
                    let fd = fd::covariant_derivative(|y| killing_field(l, y).v, &x, &e[i.index()], fd::STEP);
                    assert!((fd - nabla_killing(i, l, &x).v).amax() < 1e-7);
                }
            }
        }
    }

    #[test]
    #[should_panic]
    fn killing_index_out_of_range() {
        killing_field(5, &p([1.0, 0.0, 0.0, 0.0]));
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_and_tangent(x in arb_point()) {
            let e = frame_vectors(&x);
            for a in 0..3 {
                prop_assert!(e[a].dot(x.coords()).abs() < 1e-15);
                for b in 0..3 {
                    let g = e[a].dot(&e[b]);
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((g - want).abs() < 1e-14);
                }
            }
            let m = Matrix4::from_rows(&[
                x.coords().transpose(), e[0].transpose(), e[1].transpose(), e[2].transpose(),
            ]);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-13);
        }

        #[test]
        fn dual_frame(x in arb_point()) {
            let e = frame(&x);
            for i in Frame::ALL {
                let star = CovectorS3::coframe_from_ambient_form(x, i);
                for j in Frame::ALL {
                    let d = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((star.pair(&e[j.index()]) - d).abs() < 1e-13);
                }
            }
        }

        #[test]
        fn coordinate_differentials(x in arb_point()) {
            // dx_1 = −x_2 e1* − x_4 e2* + x_3 e3*,  dx_4 = x_3 e1* + x_1 e2* + x_2 e3*
            let d1 = CovectorS3::coordinate_differential(x, 1).c;
            prop_assert!((d1 - Vector3::new(-x.x(2), -x.x(4), x.x(3))).amax() < 1e-15);
            let d4 = CovectorS3::coordinate_differential(x, 4).c;
            prop_assert!((d4 - Vector3::new(x.x(3), x.x(1), x.x(2))).amax() < 1e-15);
        }

        #[test]
        fn killing_in_frame(x in arb_point()) {
            let e = frame_vectors(&x);
            let v = -x.x(2) * e[0] - x.x(4) * e[1] + x.x(3) * e[2];
            prop_assert!((killing_field(1, &x).v - v).amax() < 1e-14);
            for l in 1..=4 {
                let lap = killing_rough_laplacian(l, &x).v + killing_field(l, &x).v;
                prop_assert!(lap.amax() < 1e-13);
            }
        }

        #[test]
        fn exterior_derivative_routes_agree(x in arb_point()) {
            for i in Frame::ALL {
                for j in Frame::ALL {
                    for k in Frame::ALL {
                        let a = exterior_derivative_coframe(i, j, k, &x);
                        let b = exterior_derivative_via_connection(i, j, k, &x);
                        let expect = 2.0 * (
                            if j == i.next() && k == i.prev() { 1.0 } else { 0.0 }
                            - if j == i.prev() && k == i.next() { 1.0 } else { 0.0 });
                        prop_assert!((a - expect).abs() < 1e-13);
                        prop_assert!((b - expect).abs() < 1e-13);
                    }
                }
            }
        }

        #[test]
        fn completeness(x in arb_point(), a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0)) {
            let alpha = CovectorS3::new(x, Vector3::from(a));
            let beta = CovectorS3::new(x, Vector3::from(b));
            let sum: f64 = (1..=4)
                .map(|l| { let k = killing_field(l, &x); alpha.pair(&k) * beta.pair(&k) })
                .sum();
            prop_assert!((sum - alpha.dot(&beta)).abs() < 1e-13);
        }
    }
}
