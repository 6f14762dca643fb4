//! Factorizations and solves: SVD, thin QR, pseudoinverse, Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};

use super::matrix::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Iteration cap handed to the bidiagonal QR sweep of the main SVD path.
pub const SVD_MAX_ITER: usize = 10_000;

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// `u` is `rows x r`, `v` is `cols x r` with `r = min(rows, cols)` for a full
/// decomposition (or the truncation rank after [`SvdTriple::truncated`]).
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn rank_capacity(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.sigma.len());
        Self {
            u: self.u.leading_columns(k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.leading_columns(k),
        }
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.u.scale_columns(&self.sigma).matmul_tr(&self.v)
    }

    /// Number of singular values above `rtol * sigma_1`.
    pub fn numerical_rank(&self, rtol: f64) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma
            .iter()
            .filter(|&&s| s > rtol * s1 && s > 0.0)
            .count()
    }
}

fn run_svd(a: &DenseMatrix, vectors: bool) -> Result<SVD<f64, Dyn, Dyn>> {
    SVD::try_new(
        a.to_nalgebra(),
        vectors,
        vectors,
        f64::EPSILON,
        SVD_MAX_ITER,
    )
    .ok_or(Error::SvdNoConvergence {
        rows: a.rows(),
        cols: a.cols(),
        max_iter: SVD_MAX_ITER,
    })
}

fn check_nonempty(op: &'static str, a: &DenseMatrix) -> Result<()> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::shape(
            op,
            "a nonempty matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    Ok(())
}

/// Full thin SVD with singular values sorted nonincreasingly.
pub fn svd_full(a: &DenseMatrix) -> Result<SvdTriple> {
    check_nonempty("svd_full", a)?;
    let svd = run_svd(a, true)?;
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    Ok(SvdTriple {
        u: DenseMatrix::from_nalgebra(u),
        sigma: svd.singular_values.iter().copied().collect(),
        v: DenseMatrix::from_nalgebra(&v_t.transpose()),
    })
}

/// Singular values only, sorted nonincreasingly.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_nonempty("singular_values", a)?;
    Ok(run_svd(a, false)?.singular_values.iter().copied().collect())
}

/// Largest singular value. Zero for an empty or zero matrix.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Thin QR result: `q` has orthonormal columns, as many as the input.
#[derive(Clone, Debug)]
pub struct ThinQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    /// Numerical rank of the input, estimated from the singular values of `R`.
    pub numerical_rank: usize,
}

impl ThinQr {
    pub fn rank_deficient(&self) -> bool {
        self.numerical_rank < self.q.cols()
    }
}

/// Householder thin QR of a tall matrix.
///
/// Householder reflectors always yield orthonormal columns, so when the input
/// is rank deficient the trailing columns of `q` already complete the basis.
pub fn qr_thin(a: &DenseMatrix) -> Result<ThinQr> {
    if a.rows() < a.cols() {
        return Err(Error::shape(
            "qr_thin",
            format!("rows >= cols ({} columns)", a.cols()),
            format!("{} rows", a.rows()),
        ));
    }
    if a.cols() == 0 {
        return Ok(ThinQr {
            q: DenseMatrix::zeros(a.rows(), 0),
            r: DenseMatrix::zeros(0, 0),
            numerical_rank: 0,
        });
    }
    let qr = nalgebra::linalg::QR::new(a.to_nalgebra());
    let q = DenseMatrix::from_nalgebra(&qr.q());
    let r = DenseMatrix::from_nalgebra(&qr.r());
    let rtol = a.rows().max(a.cols()) as f64 * f64::EPSILON;
    let numerical_rank = singular_values(&r)
        .map(|s| {
            let s1 = s[0];
            s.iter().filter(|&&v| v > rtol * s1 && v > 0.0).count()
        })
        .unwrap_or(0);
    Ok(ThinQr {
        q,
        r,
        numerical_rank,
    })
}

/// Default relative cutoff for the numerical rank of a `rows x cols` matrix.
pub fn default_rtol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Moore-Penrose pseudoinverse. Singular values at or below `rtol * sigma_1`
/// are dropped; `None` selects [`default_rtol`].
pub fn pinv(a: &DenseMatrix, rtol: Option<f64>) -> Result<DenseMatrix> {
    let rtol = rtol.unwrap_or_else(|| default_rtol(a.rows(), a.cols()));
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "pinv rtol must lie in (0,1), got {rtol}"
        )));
    }
    if a.is_empty() {
        return Ok(DenseMatrix::zeros(a.cols(), a.rows()));
    }
    let svd = svd_full(a)?;
    Ok(pinv_from_svd(&svd, rtol, a.rows(), a.cols()))
}

fn pinv_from_svd(svd: &SvdTriple, rtol: f64, rows: usize, cols: usize) -> DenseMatrix {
    let r = svd.numerical_rank(rtol);
    if r == 0 {
        return DenseMatrix::zeros(cols, rows);
    }
    let inv: Vec<f64> = svd.sigma[..r].iter().map(|s| 1.0 / s).collect();
    svd.v
        .leading_columns(r)
        .scale_columns(&inv)
        .matmul_tr(&svd.u.leading_columns(r))
}

/// Orthonormal basis of the null space of `a`, from the right singular vectors
/// whose singular values fall below `rtol * sigma_1`.
pub fn null_space(a: &DenseMatrix, rtol: Option<f64>) -> Result<DenseMatrix> {
    let rtol = rtol.unwrap_or_else(|| default_rtol(a.rows(), a.cols()));
    let n = a.cols();
    if a.rows() == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    // Pad to a square matrix so the full set of right singular vectors is returned.
    let padded = if a.rows() < n {
        let mut p = DenseMatrix::zeros(n, n);
        for i in 0..a.rows() {
            p.row_mut(i).copy_from_slice(a.row(i));
        }
        p
    } else {
        a.clone()
    };
    let svd = svd_full(&padded)?;
    let r = svd.numerical_rank(rtol);
    let cols: Vec<Vec<f64>> = (r..n).map(|j| svd.v.column(j)).collect();
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// `sum_i (u_i, b) / (sigma_i^2 + alpha) u_i` for the columns `u_i` of `u`.
pub fn solve_shifted_gram(
    u: &DenseMatrix,
    sigma: &[f64],
    alpha: f64,
    b: &[f64],
) -> Result<Vec<f64>> {
    if u.cols() != sigma.len() {
        return Err(Error::shape(
            "solve_shifted_gram",
            format!("{} singular values", u.cols()),
            sigma.len(),
        ));
    }
    if u.rows() != b.len() {
        return Err(Error::shape(
            "solve_shifted_gram",
            format!("rhs of length {}", u.rows()),
            b.len(),
        ));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let coeffs = u.tr_matvec(b);
    let mut weights = Vec::with_capacity(sigma.len());
    for (i, (&c, &s)) in coeffs.iter().zip(sigma).enumerate() {
        let d = s * s + alpha;
        if d == 0.0 {
            return Err(Error::ZeroSingularValue { index: i });
        }
        weights.push(c / d);
    }
    Ok(u.matvec(&weights))
}

/// Cholesky factor of a symmetric positive definite matrix, reusable across
/// right-hand sides.
pub struct CholeskyFactor {
    inner: Cholesky<f64, Dyn>,
}

impl CholeskyFactor {
    pub fn new(spd: &DenseMatrix) -> Result<Self> {
        if spd.rows() != spd.cols() {
            return Err(Error::shape(
                "cholesky",
                "a square matrix",
                format!("{}x{}", spd.rows(), spd.cols()),
            ));
        }
        let inner = Cholesky::new(spd.to_nalgebra()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { inner })
    }

    pub fn dim(&self) -> usize {
        self.inner.l_dirty().nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim());
        let x = self.inner.solve(&DVector::from_column_slice(b));
        x.iter().copied().collect()
    }

    /// Solves for every column of `b` at once.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let x: DMatrix<f64> = self.inner.solve(&b.to_nalgebra());
        DenseMatrix::from_nalgebra(&x)
    }
}

/// Solves `(M^T M + alpha I) x = rhs` style systems: `gram` must already hold
/// the symmetric matrix, `alpha` is added to its diagonal.
pub fn solve_spd_shifted(gram: &DenseMatrix, alpha: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut m = gram.clone();
    m.add_to_diagonal(alpha);
    Ok(CholeskyFactor::new(&m)?.solve(rhs))
}

/// One-sided Jacobi SVD. Slow but short and independent of the main SVD
/// path, which makes it a useful cross-check on small matrices.
pub fn jacobi_svd(a: &DenseMatrix) -> SvdTriple {
    let transposed = a.rows() < a.cols();
    let work = if transposed { a.transpose() } else { a.clone() };
    let (m, n) = work.shape();
    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (norm2(c), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut sigma = Vec::with_capacity(n);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &(s, j) in &order {
        sigma.push(s);
        let mut uj = vec![0.0; m];
        if s > 0.0 {
            axpy(1.0 / s, &cols[j], &mut uj);
        }
        u_cols.push(uj);
        v_cols.push(v[j].clone());
    }
    let u = DenseMatrix::from_columns(m, &u_cols);
    let vm = DenseMatrix::from_columns(n, &v_cols);
    if transposed {
        SvdTriple { u: vm, sigma, v: u }
    } else {
        SvdTriple { u, sigma, v: vm }
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}
