//! Homogeneous harmonic polynomials on ℝ⁴, restricted to S³.
//!
//! The degree-`k` harmonics are the kernel of the Laplacian on degree-`k`
//! monomials, a space of dimension `(k + 1)²`. Each degree is returned
//! orthonormal in `L²(S³)` using the exact sphere moments of monomials.

use nalgebra::{DMatrix, SymmetricEigen, Vector4};

use crate::error::{Error, Result};

pub type Exponent = [u32; 4];

/// All exponents with `|α| = k`, in lexicographic order.
pub fn monomials(k: u32) -> Vec<Exponent> {
    let mut out = Vec::new();
    for a in (0..=k).rev() {
        for b in (0..=k - a).rev() {
            for c in (0..=k - a - b).rev() {
                out.push([a, b, c, k - a - b - c]);
            }
        }
    }
    out
}

/// `(k+1)(k+2)(k+3)/6`, the number of degree-`k` monomials in four variables.
pub fn monomial_count(k: u32) -> usize {
    let k = k as usize;
    (k + 1) * (k + 2) * (k + 3) / 6
}

pub fn harmonic_dimension(k: u32) -> usize {
    let k = k as usize;
    (k + 1) * (k + 1)
}

fn double_factorial_odd(n: i64) -> f64 {
    // (n)!! for odd n ≥ −1
    let mut acc = 1.0;
    let mut m = n;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

/// `∫_{S³} x^α dvol`, zero unless every exponent is even.
pub fn sphere_moment(a: &Exponent) -> f64 {
    if a.iter().any(|e| e % 2 == 1) {
        return 0.0;
    }
    let half: u32 = a.iter().sum::<u32>() / 2;
    let num: f64 = a.iter().map(|&e| double_factorial_odd(e as i64 - 1)).product();
    let mut den = 2f64.powi(half as i32);
    for j in 2..=(half + 1) {
        den *= j as f64;
    }
    2.0 * std::f64::consts::PI * std::f64::consts::PI * num / den
}

/// Matrix of the Laplacian from degree-`k` to degree-`(k−2)` monomial coefficients.
pub fn laplacian_matrix(k: u32) -> DMatrix<f64> {
    let src = monomials(k);
    if k < 2 {
        return DMatrix::zeros(0, src.len());
    }
    let dst = monomials(k - 2);
    let index = |e: &Exponent| dst.iter().position(|d| d == e).expect("lower monomial");
    let mut l = DMatrix::zeros(dst.len(), src.len());
    for (j, e) in src.iter().enumerate() {
        for v in 0..4 {
            if e[v] >= 2 {
                let mut d = *e;
                d[v] -= 2;
                l[(index(&d), j)] += (e[v] * (e[v] - 1)) as f64;
            }
        }
    }
    l
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicPoly {
    pub degree: u32,
    pub terms: Vec<(Exponent, f64)>,
}

impl HarmonicPoly {
    pub fn eval(&self, x: &Vector4<f64>) -> (f64, Vector4<f64>) {
        let pw = Powers::new(x, self.degree);
        pw.eval(&self.terms)
    }
}

/// Table of `x_v^j`, `j ≤ degree`.
struct Powers {
    p: [Vec<f64>; 4],
}

impl Powers {
    fn new(x: &Vector4<f64>, degree: u32) -> Powers {
        let p = std::array::from_fn(|v| {
            let mut row = vec![1.0; degree as usize + 1];
            for j in 1..row.len() {
                row[j] = row[j - 1] * x[v];
            }
            row
        });
        Powers { p }
    }

    fn eval(&self, terms: &[(Exponent, f64)]) -> (f64, Vector4<f64>) {
        let mut f = 0.0;
        let mut g = Vector4::zeros();
        for (e, c) in terms {
            let m: [f64; 4] = std::array::from_fn(|v| self.p[v][e[v] as usize]);
            f += c * m[0] * m[1] * m[2] * m[3];
            for v in 0..4 {
                if e[v] > 0 {
                    let mut d = c * e[v] as f64 * self.p[v][e[v] as usize - 1];
                    for w in 0..4 {
                        if w != v {
                            d *= m[w];
                        }
                    }
                    g[v] += d;
                }
            }
        }
        (f, g)
    }
}

/// `L²(S³)`-orthonormal harmonic polynomials of exact degree `k`.
pub fn harmonics_of_degree(k: u32) -> Result<Vec<HarmonicPoly>> {
    let mons = monomials(k);
    let n = mons.len();
    let l = laplacian_matrix(k);
    let kernel: DMatrix<f64> = if l.nrows() == 0 {
        DMatrix::identity(n, n)
    } else {
        let eig = SymmetricEigen::new(l.transpose() * &l);
        let scale = eig.eigenvalues.amax().max(1.0);
        let cols: Vec<_> = (0..n)
            .filter(|&j| eig.eigenvalues[j].abs() <= 1e-9 * scale)
            .map(|j| eig.eigenvectors.column(j).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    };
    if kernel.ncols() != harmonic_dimension(k) {
        return Err(Error::DegenerateBasis(format!(
            "degree {k} harmonic kernel has dimension {} (expected {})",
            kernel.ncols(),
            harmonic_dimension(k)
        )));
    }
    // Gram of the kernel in L²(S³), then whiten it.
    let moments = DMatrix::from_fn(n, n, |i, j| {
        let e: Exponent = std::array::from_fn(|v| mons[i][v] + mons[j][v]);
        sphere_moment(&e)
    });
    let gram = kernel.transpose() * moments * &kernel;
    let eig = SymmetricEigen::new(gram);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Conditioning(format!("degree {k} harmonic Gram is not positive definite")));
    }
    let white = &kernel * &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok((0..white.ncols())
        .map(|j| HarmonicPoly {
            degree: k,
            terms: mons
                .iter()
                .enumerate()
                .filter(|(i, _)| white[(*i, j)].abs() > 1e-15)
                .map(|(i, e)| (*e, white[(i, j)]))
                .collect(),
        })
        .collect())
}

/// All harmonics of degree `≤ max_degree`, evaluated together.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSet {
    pub max_degree: u32,
    pub polys: Vec<HarmonicPoly>,
}

impl HarmonicSet {
    pub fn new(max_degree: u32) -> Result<HarmonicSet> {
        let mut polys = Vec::new();
        for k in 0..=max_degree {
            polys.extend(harmonics_of_degree(k)?);
        }
        Ok(HarmonicSet { max_degree, polys })
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Values and ambient gradients of every member at `x`.
    pub fn eval_all(&self, x: &Vector4<f64>, values: &mut Vec<f64>, grads: &mut Vec<Vector4<f64>>) {
        let pw = Powers::new(x, self.max_degree);
        values.clear();
        grads.clear();
        for p in &self.polys {
            let (f, g) = pw.eval(&p.terms);
            values.push(f);
            grads.push(g);
        }
    }
}
