//! Identity suites. Every check evaluates one identity numerically and
//! produces a [`CheckReport`]; failures are reported, never raised.

use nalgebra::{Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jacobi::{self, CrossKillingSection, KillingSection, Section, SectionJet};
use crate::maps::{Atom, MapJet, SphereMap};
use crate::quadrature::{QuadratureGrid, Resolution, SingularPolicy};
use crate::rng::{self, SeededRng};
use crate::s3geom::{self, fd, CovectorS3, Frame, PointS3, TangentVec};

/// Tolerance for closed-form identities.
pub const CLOSED_FORM_TOL: f64 = 1e-12;
/// Tolerance for identities checked against a first-derivative finite difference.
pub const FD_TOL: f64 = 1e-6;
/// Tolerance for identities involving one second-order finite difference.
pub const SINGLE_FD_TOL: f64 = 1e-5;
/// Tolerance for identities combining quadrature and finite differences.
pub const QUADRATURE_FD_TOL: f64 = 1e-3;
/// Allowed deviation of an observed convergence order from its nominal value.
pub const ORDER_TOL: f64 = 0.3;
/// Step for the second-difference checks.
pub const LAPLACIAN_STEP: f64 = 1e-3;

/// One identity with its residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// the identity in formula form
    pub paper_ref: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub points_sampled: usize,
    pub seed: u64,
}

impl CheckReport {
    pub fn new(name: &str, formula: &str, residual: f64, tolerance: f64, points_sampled: usize, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            paper_ref: formula.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            points_sampled,
            seed,
        }
    }
}

/// The identities that every full run must cover, one owning check each.
pub const REGISTRY: [&str; 17] = [
    "frame-bracket",
    "dual-frame",
    "coframe-exterior-derivative",
    "levi-civita",
    "levi-civita-diagonal",
    "coframe-connection",
    "killing-derivative",
    "curvature-frame",
    "curvature-coframe",
    "jacobi-field",
    "killing-eigen-section",
    "killing-second-variation",
    "killing-completeness",
    "cross-section-energy",
    "conformality-defect",
    "balance",
    "non-balance",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Frames,
    Killing,
    JacobiField,
    Balance,
    Ii44,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Ok(match s {
            "frames" => Suite::Frames,
            "killing" => Suite::Killing,
            "jacobi-field" => Suite::JacobiField,
            "balance" => Suite::Balance,
            "ii44" => Suite::Ii44,
            "all" => Suite::All,
            _ => return Err(Error::Config(format!("unknown suite `{s}`"))),
        })
    }
}

/// Inputs shared by the suites.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub map: SphereMap,
    pub seed: u64,
    pub points: usize,
    pub grid: Resolution,
    pub refine: u32,
    pub h: f64,
}

impl VerifyConfig {
    pub fn new(map: SphereMap) -> VerifyConfig {
        VerifyConfig { map, seed: 1, points: 1000, grid: Resolution::DEFAULT, refine: 3, h: LAPLACIAN_STEP }
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    if cfg.points < 100 {
        return Err(Error::Config(format!("at least 100 sample points are required, got {}", cfg.points)));
    }
    let mut out = Vec::new();
    let grid = || QuadratureGrid::for_map(cfg.grid, &cfg.map);
    if matches!(suite, Suite::Frames | Suite::All) {
        out.extend(run_frame_suite(cfg.seed, cfg.points));
    }
    if matches!(suite, Suite::Killing | Suite::All) {
        out.extend(run_killing_suite(cfg.seed, cfg.points));
    }
    if matches!(suite, Suite::JacobiField | Suite::All) {
        out.extend(run_jacobi_suite(&cfg.map, &grid()?, cfg.seed, cfg.points, cfg.h)?);
    }
    if matches!(suite, Suite::Balance | Suite::All) {
        out.extend(run_balance_suite(&cfg.map, &grid()?, cfg.refine, cfg.seed)?);
    }
    if matches!(suite, Suite::Ii44 | Suite::All) {
        out.extend(run_ii44_suite(&cfg.map, &grid()?, cfg.seed, cfg.points)?);
    }
    Ok(out)
}

fn points(seed: u64, n: usize) -> Vec<PointS3> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| rng::point_s3(&mut r)).collect()
}

fn max_over<F: Fn(&PointS3) -> f64>(pts: &[PointS3], f: F) -> f64 {
    pts.iter().map(f).fold(0.0, f64::max)
}

fn kronecker(a: Frame, b: Frame) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn frame_pairs() -> impl Iterator<Item = (Frame, Frame)> {
    Frame::ALL.into_iter().flat_map(|i| Frame::ALL.into_iter().map(move |j| (i, j)))
}

/// Closed-form frame, coframe, connection and curvature identities.
pub fn run_frame_suite(seed: u64, n_points: usize) -> Vec<CheckReport> {
    let pts = points(seed, n_points);
    let n = pts.len();
    let table = s3geom::ConnectionTable::new();
    let mut out = Vec::new();

    let r = max_over(&pts, |x| {
        let e = s3geom::frame_vectors(x);
        Frame::ALL
            .iter()
            .map(|&i| (s3geom::lie_bracket_frame(i, i.next(), x).v + e[i.prev().index()] * 2.0).amax())
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new("frame-bracket", "[e_i, e_(i+1)] = -2 e_(i-1)", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| {
        let e = s3geom::frame(x);
        frame_pairs()
            .map(|(i, j)| (CovectorS3::coframe_from_ambient_form(*x, i).pair(&e[j.index()]) - kronecker(i, j)).abs())
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new("dual-frame", "<e_i*, e_j> = delta_ij", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| {
        let mut m: f64 = 0.0;
        for i in Frame::ALL {
            for (j, k) in frame_pairs() {
                let want = 2.0 * (kronecker(j, i.next()) * kronecker(k, i.prev()) - kronecker(j, i.prev()) * kronecker(k, i.next()));
                let a = s3geom::exterior_derivative_coframe(i, j, k, x);
                let b = s3geom::exterior_derivative_via_connection(i, j, k, x);
                m = m.max((a - want).abs()).max((b - want).abs());
            }
        }
        m
    });
    out.push(CheckReport::new(
        "coframe-exterior-derivative",
        "de_i* = 2 e_(i+1)* ^ e_(i-1)* = sum_m e_m* ^ nabla_(e_m) e_i*",
        r,
        CLOSED_FORM_TOL,
        n,
        seed,
    ));

    let r = max_over(&pts, |x| {
        frame_pairs()
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (s3geom::levi_civita_ambient(i, j, x) - s3geom::nabla_frame(i, j, x).v).amax())
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new("levi-civita", "nabla_(e_i) e_(i+1) = -e_(i-1)", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| {
        Frame::ALL
            .iter()
            .map(|&i| s3geom::levi_civita_ambient(i, i, x).amax().max(s3geom::nabla_frame(i, i, x).v.amax()))
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new("levi-civita-diagonal", "nabla_(e_i) e_i = 0", r, CLOSED_FORM_TOL, n, seed));

    // (∇_{e_i} e_j*)(e_k) = −e_j*(∇_{e_i} e_k) with the vector connection taken
    // from the ambient projection.
    let r = max_over(&pts, |x| {
        let e = s3geom::frame(x);
        let mut m: f64 = 0.0;
        for (i, j) in frame_pairs() {
            let table_cov = s3geom::nabla_coframe(i, j, x);
            for k in Frame::ALL {
                let nk = TangentVec::projected(*x, s3geom::levi_civita_ambient(i, k, x));
                let want = -CovectorS3::coframe_from_ambient_form(*x, j).pair(&nk);
                m = m.max((table_cov.pair(&e[k.index()]) - want).abs());
            }
        }
        m
    });
    out.push(CheckReport::new("coframe-connection", "nabla_(e_(i+1)) e_i* = e_(i-1)*", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| {
        let e = s3geom::frame(x);
        let mut m: f64 = 0.0;
        for (i, j) in frame_pairs() {
            for k in Frame::ALL {
                let table_v = s3geom::ricci_action(i, j, &e[k.index()]).frame_components();
                let conn = s3geom::curvature_from_connection(i, j, k, x);
                let mut want = Vector3::zeros();
                want[i.index()] += kronecker(j, k);
                want[j.index()] -= kronecker(i, k);
                m = m.max((table_v - want).amax()).max((conn - want).amax());
            }
        }
        m
    });
    out.push(CheckReport::new(
        "curvature-frame",
        "R(e_i, e_(i+1)) e_i = -e_(i+1), R(e_i, e_(i+1)) e_(i-1) = 0",
        r,
        CLOSED_FORM_TOL,
        n,
        seed,
    ));

    let r = max_over(&pts, |x| {
        let mut m: f64 = 0.0;
        for (i, j) in frame_pairs() {
            for k in Frame::ALL {
                let table_c = s3geom::ricci_action_covector(i, j, &CovectorS3::coframe(*x, k)).c;
                let conn = s3geom::curvature_from_connection_covector(i, j, k, x);
                let mut want = Vector3::zeros();
                want[i.index()] += kronecker(j, k);
                want[j.index()] -= kronecker(i, k);
                m = m.max((table_c - want).amax()).max((conn - want).amax());
            }
        }
        m
    });
    out.push(CheckReport::new("curvature-coframe", "R(e_i, e_(i+1)) e_(i+1)* = e_i*", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| table.invariant_residual(x));
    out.push(CheckReport::new(
        "connection-torsion-metric",
        "nabla_(e_i) e_(i+1) - nabla_(e_(i+1)) e_i = [e_i, e_(i+1)]",
        r,
        CLOSED_FORM_TOL,
        n,
        seed,
    ));

    let r = max_over(&pts, |x| {
        let e = s3geom::frame_vectors(x);
        frame_pairs()
            .map(|(i, j)| {
                let lhs = fd::directional(
                    |y| s3geom::frame_vectors(y)[i.index()].dot(&s3geom::frame_vectors(y)[j.index()]),
                    x,
                    &e[0],
                    fd::STEP,
                );
                let rhs = s3geom::nabla_frame(Frame::E1, i, x).v.dot(&e[j.index()])
                    + e[i.index()].dot(&s3geom::nabla_frame(Frame::E1, j, x).v);
                (lhs - rhs).abs()
            })
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new(
        "metric-compatibility-fd",
        "e_k(e_i . e_j) = nabla e_i . e_j + e_i . nabla e_j",
        r,
        FD_TOL,
        n,
        seed,
    ));
    out
}

/// Conformal Killing field identities.
pub fn run_killing_suite(seed: u64, n_points: usize) -> Vec<CheckReport> {
    let pts = points(seed, n_points);
    let n = pts.len();
    let table = s3geom::ConnectionTable::new();
    let mut out = Vec::new();

    // X^l = Σ_j (e_j)_l e_j, differentiated with the connection table:
    // ∇_{e_i}X^l = Σ_j (A_j e_i)_l e_j + (e_j)_l ∇_{e_i} e_j.
    let r = max_over(&pts, |x| {
        let e = s3geom::frame_vectors(x);
        let mut m: f64 = 0.0;
        for i in Frame::ALL {
            for l in 1..=4 {
                let mut v = Vector4::zeros();
                for j in Frame::ALL {
                    let d = (s3geom::frame_generator(j) * e[i.index()])[l - 1];
                    v += e[j.index()] * d + table.vector(i, j).vector(x).v * e[j.index()][l - 1];
                }
                m = m.max((v - s3geom::nabla_killing(i, l, x).v).amax());
            }
        }
        m
    });
    out.push(CheckReport::new("killing-derivative", "nabla_(e_i) X^l = -x_l e_i", r, CLOSED_FORM_TOL, n, seed));

    let r = max_over(&pts, |x| {
        let e = s3geom::frame_vectors(x);
        let mut m: f64 = 0.0;
        for i in Frame::ALL {
            for l in 1..=4 {
                let d = fd::covariant_derivative(|y| s3geom::killing_field(l, y).v, x, &e[i.index()], fd::STEP);
                m = m.max((d - s3geom::nabla_killing(i, l, x).v).amax());
            }
        }
        m
    });
    out.push(CheckReport::new("killing-derivative-fd", "nabla_(e_i) X^l = -x_l e_i", r, FD_TOL, n, seed));

    let r = max_over(&pts, |x| {
        (1..=4)
            .map(|l| (s3geom::killing_rough_laplacian(l, x).v + s3geom::killing_field(l, x).v).amax())
            .fold(0.0, f64::max)
    });
    out.push(CheckReport::new(
        "killing-rough-laplacian",
        "sum_i nabla_(e_i) nabla_(e_i) X^l + X^l = 0",
        r,
        CLOSED_FORM_TOL,
        n,
        seed,
    ));

    let mut rg = rng::seeded(seed ^ 0x5eed);
    let r = pts
        .iter()
        .map(|x| {
            let a = CovectorS3::new(*x, rng::gaussian3(&mut rg));
            let b = CovectorS3::new(*x, rng::gaussian3(&mut rg));
            let sum: f64 = (1..=4)
                .map(|l| {
                    let xl = s3geom::killing_field(l, x);
                    a.pair(&xl) * b.pair(&xl)
                })
                .sum();
            (a.dot(&b) - sum).abs() / (1.0 + a.c.norm() * b.c.norm())
        })
        .fold(0.0, f64::max);
    out.push(CheckReport::new(
        "killing-completeness",
        "alpha . beta = sum_l <alpha, X^l> <beta, X^l>",
        r,
        CLOSED_FORM_TOL,
        n,
        seed,
    ));

    let r = max_over(&pts, |x| {
        let e = s3geom::frame_vectors(x);
        let want = -e[0] * x.x(2) - e[1] * x.x(4) + e[2] * x.x(3);
        (s3geom::killing_field(1, x).v - want).amax()
    });
    out.push(CheckReport::new("killing-frame-expansion", "X^1 = -x_2 e_1 - x_4 e_2 + x_3 e_3", r, CLOSED_FORM_TOL, n, seed));
    out
}

/// `Δ⟨du,X^k⟩ − [(1 − |du|²)⟨du,X^k⟩ + 2 x_k u |du|²]` with a second-difference Laplacian.
pub fn jacobi_field_residual(u: &SphereMap, k: usize, x: &PointS3, h: f64) -> Result<Vector3<f64>> {
    let w = KillingSection { map: u, l: k };
    let lap = jacobi::laplacian_fd(&w, x, h)?;
    let j = u.evaluate(x)?;
    let e = j.energy_density();
    let wk = j.killing_pairings(x).w[k - 1];
    Ok(lap - (wk * (1.0 - e) + j.value * (2.0 * x.x(k) * e)))
}

/// Observed order `log₂(r(h)/r(h/2))`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn fd_study<F>(pts: &[PointS3], h: f64, residual: F) -> Result<(f64, f64, f64)>
where
    F: Fn(&PointS3, f64) -> Result<f64>,
{
    let mut max_h: f64 = 0.0;
    let mut sum_h = 0.0;
    let mut sum_h2 = 0.0;
    for x in pts {
        let a = residual(x, h)?;
        let b = residual(x, h / 2.0)?;
        max_h = max_h.max(a);
        sum_h += a;
        sum_h2 += b;
    }
    Ok((max_h, sum_h, sum_h2))
}

fn order_report(name: &str, formula: &str, coarse: f64, fine: f64, nominal: f64, n: usize, seed: u64) -> CheckReport {
    let p = observed_order(coarse, fine);
    let r = if p.is_finite() { (p - nominal).abs() } else { f64::INFINITY };
    CheckReport::new(name, formula, r, ORDER_TOL, n, seed)
}

/// Checks that need a smooth harmonic map: the Jacobi field identity, the
/// eigen-sections `⟨du, X^l⟩` and the Gram matrix behind the index bound.
/// Singular maps yield no reports here.
pub fn run_jacobi_suite(u: &SphereMap, grid: &QuadratureGrid, seed: u64, n_points: usize, h: f64) -> Result<Vec<CheckReport>> {
    if !u.is_smooth() {
        return Ok(Vec::new());
    }
    let pts = points(seed.wrapping_add(1), n_points);
    let n = pts.len();
    let mut out = Vec::new();

    let (max_h, coarse, fine) = fd_study(&pts, h, |x, h| {
        let mut m: f64 = 0.0;
        for k in 1..=4 {
            m = m.max(jacobi_field_residual(u, k, x, h)?.amax());
        }
        Ok(m)
    })?;
    let formula = "Lap <du,X^k> = (1 - |du|^2) <du,X^k> + 2 x_k u |du|^2";
    out.push(CheckReport::new("jacobi-field", formula, max_h, 1e-4, n, seed));
    out.push(order_report("jacobi-field-order", formula, coarse, fine, 2.0, n, seed));

    let (max_h, coarse, fine) = fd_study(&pts, h, |x, h| {
        let mut m: f64 = 0.0;
        for l in 1..=4 {
            let w = KillingSection { map: u, l };
            m = m.max((jacobi::apply_l(u, &w, x, h)? + w.value(x)?).amax());
        }
        Ok(m)
    })?;
    out.push(CheckReport::new("killing-eigen-section", "L_u <du,X^l> = -<du,X^l>", max_h, SINGLE_FD_TOL, n, seed));
    out.push(order_report("killing-eigen-section-order", "L_u <du,X^l> = -<du,X^l>", coarse, fine, 2.0, n, seed));

    let mut worst: f64 = 0.0;
    for l in 1..=4 {
        let w = KillingSection { map: u, l };
        let d2 = jacobi::second_variation(u, &w, grid)?;
        let want = -0.5 * grid.integrate(|x| Ok(w.value(x)?.norm_squared()))?;
        let scale = want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(if want == 0.0 { d2.abs() } else { (d2 - want).abs() / scale });
    }
    out.push(CheckReport::new(
        "killing-second-variation",
        "D2E_u(<du,X^l>) = -1/2 int |<du,X^l>|^2",
        worst,
        1e-8,
        grid.len(),
        seed,
    ));

    let g = elsoufi_gram(u, grid)?;
    out.push(g.report(grid.len(), seed));
    Ok(out)
}

/// `G_kl = ∫⟨du,X^k⟩·⟨du,X^l⟩` and its spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct GramReport {
    pub gram: Matrix4<f64>,
    /// ascending
    pub eigenvalues: Vector4<f64>,
    pub rank: usize,
}

/// Relative eigenvalue threshold for the Gram rank and independence test.
pub const GRAM_RANK_TOL: f64 = 1e-3;

impl GramReport {
    pub fn ratio(&self) -> f64 {
        let max = self.eigenvalues[3];
        if max > 0.0 {
            self.eigenvalues[0] / max
        } else {
            0.0
        }
    }

    /// Passes iff `λ_min > 1e−3 λ_max`; the residual is `1e−3 λ_max / λ_min`
    /// against tolerance 1.
    pub fn report(&self, points: usize, seed: u64) -> CheckReport {
        let r = if self.eigenvalues[0] > 0.0 {
            GRAM_RANK_TOL * self.eigenvalues[3] / self.eigenvalues[0]
        } else {
            f64::INFINITY
        };
        CheckReport::new("elsoufi-gram", "lambda_min(G) > 1e-3 lambda_max(G), G_kl = int <du,X^k>.<du,X^l>", r, 1.0, points, seed)
    }
}

pub fn elsoufi_gram(u: &SphereMap, grid: &QuadratureGrid) -> Result<GramReport> {
    let flat = grid.integrate_values(|x| {
        let k = u.killing_pairings(x)?;
        Ok(nalgebra::SVector::<f64, 16>::from_fn(|i, _| k.w[i / 4].dot(&k.w[i % 4])))
    })?;
    let gram = Matrix4::from_fn(|i, j| 0.5 * (flat[4 * i + j] + flat[4 * j + i]));
    let eig = SymmetricEigen::new(gram);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let max = ev[3];
    let rank = if max > 0.0 { ev.iter().filter(|&&v| v > GRAM_RANK_TOL * max).count() } else { 0 };
    Ok(GramReport { gram, eigenvalues: Vector4::from_vec(ev), rank })
}

/// The parameter `a` when `u` is an equator map followed only by isometries of S².
pub fn plain_equator_parameter(u: &SphereMap) -> Option<Vector3<f64>> {
    let atoms = u.spec().atoms();
    let (last, rest) = atoms.split_last()?;
    let Atom::Equator(a) = last else { return None };
    rest.iter().all(|s| matches!(s, Atom::Rotate3(_) | Atom::Antipodal | Atom::Identity)).then_some(*a)
}

/// `∫ x_k |du|²` with its report. Smooth maps must balance; plain equator
/// maps must have the sign `−sign(a_k)` (beyond the error estimate) when
/// `a_k ≠ 0` and balance otherwise.
pub fn balance_check(u: &SphereMap, k: usize, grid: &QuadratureGrid, refine: u32) -> Result<(CheckReport, f64, f64)> {
    if !(1..=4).contains(&k) {
        return Err(Error::Config(format!("balance index {k} not in 1..=4")));
    }
    let policy = if u.is_smooth() { SingularPolicy::None } else { SingularPolicy::Refine(refine) };
    let both = grid.integrate_with(
        |x| {
            let e = u.energy_density(x)?;
            Ok(nalgebra::Vector2::new(e, x.x(k) * e))
        },
        policy,
    )?;
    let energy = 0.5 * both.value[0];
    let value = both.value[1];
    let err = match both.levels.as_slice() {
        [.., prev, last] => (last[1] - prev[1]).abs(),
        _ => 0.0,
    };
    let name = format!("balance-x{k}");
    let formula = format!("int x_{k} |du|^2 = 0");
    let report = match plain_equator_parameter(u) {
        Some(a) if k <= 3 && a[k - 1] != 0.0 => {
            let s = a[k - 1].signum();
            CheckReport::new(
                &format!("non-balance-x{k}"),
                &format!("sign int x_{k} |du_a|^2 = -sign a_{k}"),
                (s * value + err).max(0.0),
                0.0,
                grid.len(),
                0,
            )
        }
        Some(_) => CheckReport::new(&name, &formula, value.abs(), 1e-8 * energy + err, grid.len(), 0),
        None if u.is_smooth() => CheckReport::new(&name, &formula, value.abs(), 1e-8 * energy, grid.len(), 0),
        None => {
            return Err(Error::Unsupported(format!(
                "balance expectations are only defined for smooth maps and equator maps, not `{}`",
                u.spec()
            )))
        }
    };
    Ok((report, value, err))
}

/// Reference equator parameter and refinement of the non-balance check.
pub const NON_BALANCE_A: f64 = 0.9;
pub const NON_BALANCE_REFINE: u32 = 3;

pub fn run_balance_suite(u: &SphereMap, grid: &QuadratureGrid, refine: u32, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    if u.is_smooth() || plain_equator_parameter(u).is_some() {
        let mut worst: Option<CheckReport> = None;
        let mut all = Vec::new();
        for k in 1..=4 {
            let (mut r, _, _) = balance_check(u, k, grid, refine)?;
            r.seed = seed;
            all.push(r);
        }
        // aggregate balance over the indices that are expected to balance
        for r in all.iter().filter(|r| r.name.starts_with("balance")) {
            if worst.as_ref().is_none_or(|w| r.residual / r.tolerance.max(f64::MIN_POSITIVE) > w.residual / w.tolerance.max(f64::MIN_POSITIVE)) {
                worst = Some(r.clone());
            }
        }
        if let Some(w) = worst {
            out.push(CheckReport { name: "balance".into(), paper_ref: "int x_k |du|^2 = 0".into(), ..w });
        }
        out.extend(all);
    }

    let ua = SphereMap::new(crate::maps::MapSpec::from_atoms(vec![Atom::equator(Vector3::new(NON_BALANCE_A, 0.0, 0.0))?])?)?;
    let g = QuadratureGrid::for_map(grid.resolution(), &ua)?;
    let (r, value, err) = balance_check(&ua, 1, &g, NON_BALANCE_REFINE)?;
    out.push(CheckReport {
        name: "non-balance".into(),
        paper_ref: "int x_1 |du_a|^2 < 0, a = 0.9 e_1".into(),
        seed,
        ..r
    });
    out.push(CheckReport::new(
        "non-balance-accuracy",
        "error estimate < 1% of |int x_1 |du_a|^2|",
        err / value.abs(),
        0.01,
        g.len(),
        seed,
    ));
    Ok(out)
}

/// A random differential into S²: three tangent vectors at a random point.
pub fn synthetic_jet(r: &mut SeededRng) -> MapJet {
    let u = rng::point_s2(r);
    let scale = (rng::gaussian3(r)[0]).exp();
    MapJet::new(u, std::array::from_fn(|_| rng::tangent_s2(r, &u) * scale))
}

/// `Σ_{k,l} |w_k|²|w_l|² − 2(w_k·w_l)²` with `w_l = ⟨J, X^l⟩` at `x`.
pub fn ii44_tail(j: &MapJet, x: &PointS3) -> f64 {
    let w = j.killing_pairings(x).w;
    let mut s = 0.0;
    for a in &w {
        for b in &w {
            s += a.norm_squared() * b.norm_squared() - 2.0 * a.dot(b).powi(2);
        }
    }
    s
}

fn jet_with_step<S: Section + ?Sized>(w: &S, x: &PointS3, h: f64) -> Result<SectionJet> {
    let e = s3geom::frame_vectors(x);
    let mut partials = [Vector3::zeros(); 3];
    for (p, v) in partials.iter_mut().zip(&e) {
        *p = (w.value(&x.geodesic(v, h))? - w.value(&x.geodesic(v, -h))?) / (2.0 * h);
    }
    Ok(SectionJet { value: w.value(x)?, partials })
}

/// Both sides of the cross-section energy identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Ii44 {
    pub lhs: f64,
    pub rhs: f64,
    pub report: CheckReport,
}

/// `Σ_l ∫ |d(u×w_l)|² − |u×w_l|²(|du|² − 1)` against `∫ |du|⁴ − 2|du⊗̇du|²`.
pub fn ii44_check(u: &SphereMap, grid: &QuadratureGrid, h: f64, seed: u64) -> Result<Ii44> {
    if !u.is_smooth() {
        return Err(Error::Unsupported(format!("`{}` is singular", u.spec())));
    }
    let v = grid.integrate_values(|x| {
        let j = u.evaluate(x)?;
        let e = j.energy_density();
        let mut lhs = 0.0;
        for l in 1..=4 {
            let s = jet_with_step(&CrossKillingSection { map: u, l }, x, h)?;
            lhs += s.dirichlet_density() - s.value.norm_squared() * (e - 1.0);
        }
        let d = j.density_report(*x);
        Ok(nalgebra::Vector2::new(lhs, d.defect))
    })?;
    let (lhs, rhs) = (v[0], v[1]);
    let r = (lhs - rhs).abs() / (1.0 + lhs.abs() + rhs.abs());
    let report = CheckReport::new(
        "cross-section-energy",
        "sum_l int |d(u x w_l)|^2 - |u x w_l|^2 (|du|^2 - 1) = int |du|^4 - 2 |du (x) du|^2",
        r,
        QUADRATURE_FD_TOL,
        grid.len(),
        seed,
    );
    Ok(Ii44 { lhs, rhs, report })
}

/// Pointwise conformality-defect checks on the map's grid, plus the algebraic
/// identities on random synthetic differentials.
pub fn run_ii44_suite(u: &SphereMap, grid: &QuadratureGrid, seed: u64, n_points: usize) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let n_synth = n_points.max(10_000);
    let mut r = rng::seeded(seed ^ 0x44);
    let mut tail: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut normal: f64 = 0.0;
    for _ in 0..n_synth {
        let x = rng::point_s3(&mut r);
        let j = synthetic_jet(&mut r);
        let d = j.density_report(x);
        let scale = 1.0 + d.e_density * d.e_density;
        tail = tail.max((ii44_tail(&j, &x) - d.defect).abs() / scale);
        defect = defect.max(d.defect / scale);
        normal = normal.max((d.defect - d.normal_form).abs() / scale);
    }
    // the map itself, on its quadrature nodes
    let stride = (grid.len() / n_points.max(1)).max(1);
    let mut sampled = 0;
    for k in (0..grid.len()).step_by(stride) {
        let x = grid.node(k).point;
        let d = u.conf_defect(&x)?;
        let scale = 1.0 + d.e_density * d.e_density;
        defect = defect.max(d.defect / scale);
        normal = normal.max((d.defect - d.normal_form).abs() / scale);
        sampled += 1;
    }
    out.push(CheckReport::new(
        "conformality-defect",
        "|du|^4 - 2 |du (x) du|^2 <= 0",
        defect.max(0.0),
        1e-10,
        n_synth + sampled,
        seed,
    ));
    out.push(CheckReport::new(
        "conformality-normal-form",
        "|du|^4 - 2 |du (x) du|^2 = -(|du f1|^2 - |du f2|^2)^2 - 4 (du f1 . du f2)^2",
        normal,
        1e-11,
        n_synth + sampled,
        seed,
    ));
    out.push(CheckReport::new(
        "cross-section-energy-pointwise",
        "sum_kl |w_k|^2 |w_l|^2 - 2 (w_k . w_l)^2 = |du|^4 - 2 |du (x) du|^2",
        tail,
        CLOSED_FORM_TOL,
        n_synth,
        seed,
    ));
    if u.is_smooth() {
        out.push(ii44_check(u, grid, fd::STEP, seed)?.report);
    }
    Ok(out)
}

/// Maximum `|defect|` of `u` over every node of `grid`.
pub fn max_abs_defect(u: &SphereMap, grid: &QuadratureGrid) -> Result<f64> {
    let mut m: f64 = 0.0;
    for node in grid.nodes() {
        m = m.max(u.conf_defect(&node.point)?.defect.abs());
    }
    Ok(m)
}
