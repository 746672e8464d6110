//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` column-major, so `vec(X)` is a plain reinterpretation
//! of the storage. Products with `A ⊗ I_m` are never formed explicitly; the
//! helpers below apply them blockwise.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Column-stacking `vec(X)`.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension {
            context: "unvec",
            expected: format!("{}", rows * cols),
            got: format!("{}", v.len()),
        });
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Dense Kronecker product. Only used where a materialized operator is wanted
/// (observation blocks, reference computations, tests).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A ⊗ I_m) X` without forming the Kronecker product.
pub fn kron_id_left(a: &CMat, m: usize, x: &CMat) -> CMat {
    let (p, q) = a.shape();
    assert_eq!(x.nrows(), q * m, "kron_id_left: inner dimension");
    let cols = x.ncols();
    let xr = x.nrows();
    let or = p * m;
    let mut out = CMat::zeros(or, cols);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for col in 0..cols {
        let xc = &xs[col * xr..(col + 1) * xr];
        let oc = &mut os[col * or..(col + 1) * or];
        for j in 0..q {
            let xb = &xc[j * m..(j + 1) * m];
            for i in 0..p {
                let aij = a[(i, j)];
                if aij == ZERO {
                    continue;
                }
                let ob = &mut oc[i * m..(i + 1) * m];
                for s in 0..m {
                    ob[s] += aij * xb[s];
                }
            }
        }
    }
    out
}

/// `X (A ⊗ I_m)` without forming the Kronecker product.
pub fn kron_id_right(x: &CMat, a: &CMat, m: usize) -> CMat {
    let (p, q) = a.shape();
    assert_eq!(x.ncols(), p * m, "kron_id_right: inner dimension");
    let rows = x.nrows();
    let mut out = CMat::zeros(rows, q * m);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for j in 0..q {
        for i in 0..p {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for s in 0..m {
                let src = &xs[(i * m + s) * rows..(i * m + s + 1) * rows];
                let dst = &mut os[(j * m + s) * rows..(j * m + s + 1) * rows];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += aij * v;
                }
            }
        }
    }
    out
}

/// Traces of the `m × m` blocks: for `X` of size `pm × qm`, returns the `p × q`
/// matrix with entries `Σ_s X[i m + s, j m + s]`.
///
/// This is the contraction that `tr{Y (dA ⊗ I_m)}` reduces to, and is how the
/// commutation-matrix products of the gradient expressions are applied.
pub fn block_trace(x: &CMat, m: usize) -> CMat {
    assert!(m > 0 && x.nrows().is_multiple_of(m) && x.ncols().is_multiple_of(m));
    let p = x.nrows() / m;
    let q = x.ncols() / m;
    CMat::from_fn(p, q, |i, j| (0..m).map(|s| x[(i * m + s, j * m + s)]).sum())
}

/// `block_trace(A B, m)` evaluated without forming `A B`: only the block
/// diagonals of the product are touched, so the cost is linear in the number
/// of column blocks of `B`.
pub fn block_trace_of_product(a: &CMat, b: &CMat, m: usize) -> CMat {
    assert_eq!(a.ncols(), b.nrows());
    assert!(m > 0 && a.nrows().is_multiple_of(m) && b.ncols().is_multiple_of(m));
    let p = a.nrows() / m;
    let q = b.ncols() / m;
    let inner = a.ncols();
    let ar = a.nrows();
    let br = b.nrows();
    let (as_, bs) = (a.as_slice(), b.as_slice());
    let mut out = CMat::zeros(p, q);
    for j in 0..q {
        for s in 0..m {
            let bcol = &bs[(j * m + s) * br..(j * m + s + 1) * br];
            for i in 0..p {
                let row = i * m + s;
                let mut acc = ZERO;
                for (t, bv) in bcol.iter().enumerate().take(inner) {
                    acc += as_[t * ar + row] * bv;
                }
                out[(i, j)] += acc;
            }
        }
    }
    out
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().sum()
}

pub fn trace_re(m: &CMat) -> f64 {
    trace(m).re
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest absolute entry of `A - B`, relative to the largest entry of `B`.
pub fn max_rel_diff(a: &CMat, b: &CMat) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Real eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn condition_number(m: &CMat) -> f64 {
    let ev = hermitian_eigenvalues(m);
    let max = ev.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let min = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// True when `m` is Hermitian to `herm_tol` (relative to its largest entry)
/// and its smallest eigenvalue is ≥ `-psd_tol · λ_max`.
pub fn is_hermitian_psd(m: &CMat, herm_tol: f64, psd_tol: f64) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return true;
    }
    let asym = (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if asym > herm_tol * scale {
        return false;
    }
    let ev = hermitian_eigenvalues(m);
    let lmax = ev.last().copied().unwrap_or(0.0).max(0.0);
    ev.first().copied().unwrap_or(0.0) >= -psd_tol * lmax
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues from
/// round-off are clipped to zero).
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * q.adjoint()
}

/// Complex Cholesky takes complex square roots of nonpositive pivots instead
/// of failing, so the pivots are checked explicitly. A negative pivot yields
/// an (almost) purely imaginary diagonal entry.
fn positive_cholesky(mut a: CMat) -> Option<Cholesky<Complex64, Dyn>> {
    for i in 0..a.nrows() {
        a[(i, i)].im = 0.0;
    }
    let chol = Cholesky::new(a)?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-3 * d.re);
    ok.then_some(chol)
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// On failure a diagonal jitter of `1e-12 · tr(A)/n` is added and the
/// factorization retried once.
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    chol: Option<Cholesky<Complex64, Dyn>>,
    dim: usize,
    jittered: bool,
}

impl HermitianFactor {
    pub fn new(a: &CMat, what: &'static str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension {
                context: what,
                expected: "square matrix".into(),
                got: format!("{}x{}", n, a.ncols()),
            });
        }
        if n == 0 {
            return Ok(Self {
                chol: None,
                dim: 0,
                jittered: false,
            });
        }
        if let Some(chol) = positive_cholesky(a.clone()) {
            return Ok(Self {
                chol: Some(chol),
                dim: n,
                jittered: false,
            });
        }
        let jitter = 1e-12 * trace_re(a).abs() / n as f64;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += c(jitter, 0.0);
        }
        match positive_cholesky(b) {
            Some(chol) => Ok(Self {
                chol: Some(chol),
                dim: n,
                jittered: true,
            }),
            None => Err(Error::Numerical {
                what,
                condition: condition_number(a),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// `A^{-1} B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        match &self.chol {
            Some(ch) => ch.solve(b),
            None => b.clone(),
        }
    }

    /// `L^{-1} B` for the lower factor `A = L L^H`.
    pub fn whiten(&self, b: &CMat) -> CMat {
        match &self.chol {
            Some(ch) => ch
                .l_dirty()
                .solve_lower_triangular(b)
                .expect("Cholesky factor has a positive diagonal"),
            None => b.clone(),
        }
    }

    pub fn inverse(&self) -> CMat {
        match &self.chol {
            Some(ch) => ch.inverse(),
            None => CMat::zeros(0, 0),
        }
    }

    pub fn ln_det(&self) -> f64 {
        match &self.chol {
            Some(ch) => {
                2.0 * ch
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.re.ln())
                    .sum::<f64>()
            }
            None => 0.0,
        }
    }
}

/// Entries i.i.d. `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Drawn column by column so prefixes of wider blocks coincide.
    let mut out = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(i, j)] = c(s * re, s * im);
        }
    }
    out
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    let m = complex_gaussian(rng, len, 1);
    CVec::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn vec_unvec_round_trip() {
        let mut r = rng();
        let x = complex_gaussian(&mut r, 3, 5);
        assert_eq!(unvec(&vec_of(&x), 3, 5).unwrap(), x);
        assert!(unvec(&vec_of(&x), 4, 4).is_err());
    }

    #[test]
    fn kron_identity_products_match_dense() {
        let mut r = rng();
        let a = complex_gaussian(&mut r, 3, 2);
        let x = complex_gaussian(&mut r, 2 * 4, 5);
        let dense = kron(&a, &identity(4));
        assert!(max_rel_diff(&kron_id_left(&a, 4, &x), &(&dense * &x)) < 1e-14);

        let y = complex_gaussian(&mut r, 6, 3 * 4);
        assert!(max_rel_diff(&kron_id_right(&y, &a, 4), &(&y * &dense)) < 1e-14);
    }

    #[test]
    fn kronecker_vec_identity() {
        // vec(H X) = (X^T ⊗ I) vec(H)
        let mut r = rng();
        let h = complex_gaussian(&mut r, 3, 2);
        let x = complex_gaussian(&mut r, 2, 4);
        let lhs = vec_of(&(&h * &x));
        let rhs = kron(&x.transpose(), &identity(3)) * vec_of(&h);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn block_trace_contracts_kron_differential() {
        // tr{Y (D ⊗ I_m)} = Σ_ij D[i,j] · block_trace(Y)[j,i]
        let mut r = rng();
        let y = complex_gaussian(&mut r, 2 * 3, 4 * 3);
        let d = complex_gaussian(&mut r, 4, 2);
        let lhs = trace(&(&y * kron(&d, &identity(3))));
        let bt = block_trace(&y, 3);
        let rhs: Complex64 = (0..4)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| d[(i, j)] * bt[(j, i)])
            .sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn block_trace_of_product_matches_dense() {
        let mut r = rng();
        let a = complex_gaussian(&mut r, 3 * 2, 5);
        let b = complex_gaussian(&mut r, 5, 7 * 2);
        let dense = block_trace(&(&a * &b), 2);
        assert!(max_rel_diff(&block_trace_of_product(&a, &b, 2), &dense) < 1e-14);
    }

    #[test]
    fn factor_solves_and_logdet() {
        let mut r = rng();
        let g = complex_gaussian(&mut r, 4, 4);
        let a = &g * g.adjoint() + identity(4);
        let f = HermitianFactor::new(&a, "test").unwrap();
        let b = complex_gaussian(&mut r, 4, 2);
        assert!(max_rel_diff(&(&a * f.solve(&b)), &b) < 1e-12);
        let det = a.clone().determinant();
        assert!((f.ln_det() - det.re.ln()).abs() < 1e-10);
        assert!(!f.jittered());
    }

    #[test]
    fn factor_reports_indefinite_matrix() {
        let mut a = identity(3);
        a[(2, 2)] = c(-1.0, 0.0);
        match HermitianFactor::new(&a, "indefinite") {
            Err(Error::Numerical { what, condition }) => {
                assert_eq!(what, "indefinite");
                assert!((condition - 1.0).abs() < 1e-12);
            }
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut r = rng();
        let g = complex_gaussian(&mut r, 5, 3);
        let a = &g * g.adjoint();
        let s = hermitian_sqrt(&a);
        assert!(max_rel_diff(&(&s * &s), &a) < 1e-10);
        assert!(is_hermitian_psd(&a, 1e-12, 1e-10));
    }
}
