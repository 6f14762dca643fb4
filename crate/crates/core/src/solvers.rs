//! Regularized solvers: truncated SVD, standard Tikhonov and general-form
//! Tikhonov, each with a direct path and randomized variants.
//!
//! The "range" variants keep the solution in the range of `A^T` (or of
//! `Gamma A^T` for a general penalty) by applying the true adjoint to a
//! low-rank data-space solve. The "projected" variants work entirely in the
//! span of the approximate right singular vectors.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, default_rtol, solve_shifted_gram, CholeskyFactor, DenseMatrix, SvdTriple,
};
use crate::rsvd::RankKApprox;
use crate::smoothing::WeightedPinv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tsvd,
    TrsvdProj,
    TrsvdRange,
    TikhDirect,
    TikhProj,
    TikhRange,
    GtikhDirect,
    /// General-form penalty restricted to the span of the approximate right
    /// singular vectors of `A`.
    GtikhProj,
    GtikhRange,
    /// Primal recovered from the maximizer of the low-rank dual problem.
    Dual,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Tsvd,
        Method::TrsvdProj,
        Method::TrsvdRange,
        Method::TikhDirect,
        Method::TikhProj,
        Method::TikhRange,
        Method::GtikhDirect,
        Method::GtikhProj,
        Method::GtikhRange,
        Method::Dual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tsvd => "tsvd",
            Method::TrsvdProj => "trsvd_proj",
            Method::TrsvdRange => "trsvd_range",
            Method::TikhDirect => "tikh_direct",
            Method::TikhProj => "tikh_proj",
            Method::TikhRange => "tikh_range",
            Method::GtikhDirect => "gtikh_direct",
            Method::GtikhProj => "gtikh_proj",
            Method::GtikhRange => "gtikh_range",
            Method::Dual => "dual",
        }
    }

    /// Whether the method takes a regularization parameter.
    pub fn uses_alpha(self) -> bool {
        !matches!(self, Method::Tsvd | Method::TrsvdProj | Method::TrsvdRange)
    }

    /// Whether the method needs randomized factors.
    pub fn is_randomized(self) -> bool {
        !matches!(
            self,
            Method::Tsvd | Method::TikhDirect | Method::GtikhDirect
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method '{s}', expected one of {}",
                    valid.join(", ")
                ))
            })
    }
}

/// How the data-space resolvent is applied in the range-preserving
/// Tikhonov variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolventForm {
    /// `sum_i (u_i, b) / (s_i^2 + alpha) u_i`: only the captured modes.
    /// Recovers the truncated solution as `alpha -> 0`.
    #[default]
    SpectralSum,
    /// `(U S^2 U^T + alpha I)^{-1} b`, which adds `alpha^{-1} (I - U U^T) b`
    /// to the spectral sum.
    Full,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub method: Method,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    /// Seconds spent in the solve (factorizations passed in are not counted).
    pub wall_time: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

fn check_rhs(op: &'static str, expected: usize, b: &[f64]) -> Result<()> {
    if b.len() != expected {
        return Err(Error::shape(
            op,
            format!("data vector of length {expected}"),
            b.len(),
        ));
    }
    Ok(())
}

fn check_positive(sigma: &[f64]) -> Result<()> {
    match sigma.iter().position(|&s| !(s > 0.0)) {
        Some(index) => Err(Error::ZeroSingularValue { index }),
        None => Ok(()),
    }
}

/// `sum_{i<k} (u_i, b) / s_i v_i` with the exact SVD.
pub fn tsvd_solve(svd: &SvdTriple, k: usize, b: &[f64]) -> Result<SolverResult> {
    let t = Instant::now();
    check_rhs("tsvd_solve", svd.u.rows(), b)?;
    let rtol = default_rtol(svd.u.rows(), svd.v.rows());
    let rank = svd.numerical_rank(rtol);
    if k > rank {
        return Err(Error::RankExceeded {
            k,
            rank,
            cutoff: rtol * svd.sigma.first().copied().unwrap_or(0.0),
        });
    }
    let x = spectral_pinv_apply(&svd.u, &svd.sigma, &svd.v, k, b);
    Ok(SolverResult {
        x,
        method: Method::Tsvd,
        alpha: None,
        k: Some(k),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

fn spectral_pinv_apply(
    u: &DenseMatrix,
    sigma: &[f64],
    v: &DenseMatrix,
    k: usize,
    b: &[f64],
) -> Vec<f64> {
    let mut x = vec![0.0; v.rows()];
    for i in 0..k {
        let c: f64 = (0..u.rows()).map(|r| u[(r, i)] * b[r]).sum::<f64>() / sigma[i];
        for (r, xr) in x.iter_mut().enumerate() {
            *xr += c * v[(r, i)];
        }
    }
    x
}

/// `V_k S_k^{-1} U_k^T b` with approximate factors.
pub fn trsvd_solve_projected(approx: &RankKApprox, b: &[f64]) -> Result<SolverResult> {
    let t = Instant::now();
    check_rhs("trsvd_solve_projected", approx.u.rows(), b)?;
    check_positive(&approx.sigma)?;
    let c: Vec<f64> = approx
        .u
        .tr_matvec(b)
        .iter()
        .zip(&approx.sigma)
        .map(|(c, s)| c / s)
        .collect();
    Ok(SolverResult {
        x: approx.v.matvec(&c),
        method: Method::TrsvdProj,
        alpha: None,
        k: Some(approx.rank()),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// `A^T sum_i (u_i, b) / s_i^2 u_i`: lies in the range of `A^T`.
pub fn trsvd_solve_range(a: &DenseMatrix, approx: &RankKApprox, b: &[f64]) -> Result<SolverResult> {
    let t = Instant::now();
    check_rhs("trsvd_solve_range", a.rows(), b)?;
    check_factor_rows(a, approx)?;
    check_positive(&approx.sigma)?;
    let y = solve_shifted_gram(&approx.u, &approx.sigma, 0.0, b)?;
    Ok(SolverResult {
        x: a.tr_matvec(&y),
        method: Method::TrsvdRange,
        alpha: None,
        k: Some(approx.rank()),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

fn check_factor_rows(a: &DenseMatrix, approx: &RankKApprox) -> Result<()> {
    if approx.u.rows() != a.rows() {
        return Err(Error::shape(
            "randomized solver",
            format!("left factor with {} rows", a.rows()),
            approx.u.rows(),
        ));
    }
    Ok(())
}

/// Direct Tikhonov solver that caches the Gram matrix of `A` so that many
/// values of `alpha` can be tried cheaply.
///
/// With `rows <= cols` the data-space form `A^T (A A^T + alpha I)^{-1} b` is
/// used, otherwise `(A^T A + alpha I)^{-1} A^T b`.
#[derive(Clone, Debug)]
pub struct DirectTikhonov {
    gram: DenseMatrix,
    dual: bool,
}

impl DirectTikhonov {
    pub fn new(a: &DenseMatrix) -> Self {
        let dual = a.rows() <= a.cols();
        let gram = if dual { a.matmul_tr(a) } else { a.tr_matmul(a) };
        Self { gram, dual }
    }

    pub fn uses_dual_form(&self) -> bool {
        self.dual
    }

    /// Solution for one `alpha`. `a` must be the matrix the cache was built from.
    pub fn solve(&self, a: &DenseMatrix, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        check_rhs("tikhonov_solve_direct", a.rows(), b)?;
        let mut m = self.gram.clone();
        m.add_to_diagonal(alpha);
        let chol = CholeskyFactor::new(&m)?;
        Ok(if self.dual {
            a.tr_matvec(&chol.solve(b))
        } else {
            chol.solve(&a.tr_matvec(b))
        })
    }
}

/// `(A^T A + alpha I)^{-1} A^T b`.
pub fn tikhonov_solve_direct(a: &DenseMatrix, b: &[f64], alpha: f64) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    let x = DirectTikhonov::new(a).solve(a, b, alpha)?;
    Ok(SolverResult {
        x,
        method: Method::TikhDirect,
        alpha: Some(alpha),
        k: None,
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// `V_k diag(s_i / (s_i^2 + alpha)) U_k^T b`.
pub fn rsvd_tikhonov_projected(
    approx: &RankKApprox,
    b: &[f64],
    alpha: f64,
) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    check_rhs("rsvd_tikhonov_projected", approx.u.rows(), b)?;
    let c: Vec<f64> = approx
        .u
        .tr_matvec(b)
        .iter()
        .zip(&approx.sigma)
        .map(|(c, s)| c * s / (s * s + alpha))
        .collect();
    Ok(SolverResult {
        x: approx.v.matvec(&c),
        method: Method::TikhProj,
        alpha: Some(alpha),
        k: Some(approx.rank()),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// Low-rank data-space resolvent applied to `b`.
fn data_resolvent(
    u: &DenseMatrix,
    sigma: &[f64],
    alpha: f64,
    b: &[f64],
    form: ResolventForm,
) -> Result<Vec<f64>> {
    let mut y = solve_shifted_gram(u, sigma, alpha, b)?;
    if form == ResolventForm::Full {
        // alpha^{-1} (I - U U^T) b
        let mut r = b.to_vec();
        axpy(-1.0, &u.matvec(&u.tr_matvec(b)), &mut r);
        axpy(1.0 / alpha, &r, &mut y);
    }
    Ok(y)
}

/// `A^T sum_i (u_i, b) / (s_i^2 + alpha) u_i`.
pub fn rsvd_tikhonov_range(
    a: &DenseMatrix,
    approx: &RankKApprox,
    b: &[f64],
    alpha: f64,
) -> Result<SolverResult> {
    rsvd_tikhonov_range_with(a, approx, b, alpha, ResolventForm::SpectralSum)
}

pub fn rsvd_tikhonov_range_with(
    a: &DenseMatrix,
    approx: &RankKApprox,
    b: &[f64],
    alpha: f64,
    form: ResolventForm,
) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    check_rhs("rsvd_tikhonov_range", a.rows(), b)?;
    check_factor_rows(a, approx)?;
    let y = data_resolvent(&approx.u, &approx.sigma, alpha, b, form)?;
    Ok(SolverResult {
        x: a.tr_matvec(&y),
        method: Method::TikhRange,
        alpha: Some(alpha),
        k: Some(approx.rank()),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// Direct general-form Tikhonov through the standard-form reduction.
///
/// The reduced matrix `B = A L#` is materialized once; each solve then costs
/// one Cholesky factorization of the smaller Gram matrix of `B`.
#[derive(Clone, Debug)]
pub struct DirectGenTikhonov {
    b_mat: DenseMatrix,
    inner: DirectTikhonov,
}

impl DirectGenTikhonov {
    pub fn new(a: &DenseMatrix, bundle: &WeightedPinv) -> Result<Self> {
        if a.cols() != bundle.penalty().in_dim() {
            return Err(Error::shape(
                "gen_tikhonov_direct",
                format!("penalty acting on {} unknowns", a.cols()),
                bundle.penalty().in_dim(),
            ));
        }
        let b_mat = bundle.operator(a).materialize();
        let inner = DirectTikhonov::new(&b_mat);
        Ok(Self { b_mat, inner })
    }

    pub fn reduced_matrix(&self) -> &DenseMatrix {
        &self.b_mat
    }

    pub fn solve(
        &self,
        a: &DenseMatrix,
        bundle: &WeightedPinv,
        b: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>> {
        let y = self.inner.solve(&self.b_mat, b, alpha)?;
        let mut x = bundle.l_sharp_apply(a, &y)?;
        axpy(1.0, &bundle.null_component(b), &mut x);
        Ok(x)
    }
}

/// Minimizer of `||A x - b||^2 + alpha ||L x||^2`.
pub fn gen_tikhonov_direct(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    b: &[f64],
    alpha: f64,
) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    let x = DirectGenTikhonov::new(a, bundle)?.solve(a, bundle, b, alpha)?;
    Ok(SolverResult {
        x,
        method: Method::GtikhDirect,
        alpha: Some(alpha),
        k: None,
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// `Gamma A^T sum_i (u_i, b) / (s_i^2 + alpha) u_i + W (AW)^+ b`, where the
/// factors approximate `B = A L#`.
pub fn rsvd_gen_tikhonov_range(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    approx_b: &RankKApprox,
    b: &[f64],
    alpha: f64,
) -> Result<SolverResult> {
    rsvd_gen_tikhonov_range_with(a, bundle, approx_b, b, alpha, ResolventForm::SpectralSum)
}

pub fn rsvd_gen_tikhonov_range_with(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    approx_b: &RankKApprox,
    b: &[f64],
    alpha: f64,
    form: ResolventForm,
) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    check_rhs("rsvd_gen_tikhonov_range", a.rows(), b)?;
    check_factor_rows(a, approx_b)?;
    if approx_b.v.rows() != bundle.penalty().out_dim() {
        return Err(Error::shape(
            "rsvd_gen_tikhonov_range",
            format!(
                "factors of A L# with {} columns",
                bundle.penalty().out_dim()
            ),
            approx_b.v.rows(),
        ));
    }
    let y = data_resolvent(&approx_b.u, &approx_b.sigma, alpha, b, form)?;
    let mut x = bundle.gamma_at_apply(a, &y)?;
    axpy(1.0, &bundle.null_component(b), &mut x);
    Ok(SolverResult {
        x,
        method: Method::GtikhRange,
        alpha: Some(alpha),
        k: Some(approx_b.rank()),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// General-form Tikhonov restricted to `x = V_k y`:
/// `(S_k^2 + alpha V_k^T L^T L V_k) y = S_k U_k^T b`, with factors of `A`.
/// Reduces to [`rsvd_tikhonov_projected`] when `L = I`.
pub fn rsvd_gen_tikhonov_projected(
    approx_a: &RankKApprox,
    bundle: &WeightedPinv,
    b: &[f64],
    alpha: f64,
) -> Result<SolverResult> {
    let t = Instant::now();
    check_alpha(alpha)?;
    check_rhs("rsvd_gen_tikhonov_projected", approx_a.u.rows(), b)?;
    let pen = bundle.penalty();
    if approx_a.v.rows() != pen.in_dim() {
        return Err(Error::shape(
            "rsvd_gen_tikhonov_projected",
            format!("right factor with {} rows", pen.in_dim()),
            approx_a.v.rows(),
        ));
    }
    let k = approx_a.rank();
    let lv_cols = (0..k)
        .map(|j| pen.apply(&approx_a.v.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let lv = DenseMatrix::from_columns(pen.out_dim(), &lv_cols);
    let mut m = lv.tr_matmul(&lv).scaled(alpha);
    for (i, s) in approx_a.sigma.iter().enumerate() {
        m[(i, i)] += s * s;
    }
    let rhs: Vec<f64> = approx_a
        .u
        .tr_matvec(b)
        .iter()
        .zip(&approx_a.sigma)
        .map(|(c, s)| c * s)
        .collect();
    let y = if k == 0 {
        Vec::new()
    } else {
        CholeskyFactor::new(&m)?.solve(&rhs)
    };
    Ok(SolverResult {
        x: approx_a.v.matvec(&y),
        method: Method::GtikhProj,
        alpha: Some(alpha),
        k: Some(k),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// Randomized factors of `B = A L#` for the general-form solvers.
pub fn penalized_factors(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    cfg: &crate::rsvd::RsvdConfig,
) -> Result<RankKApprox> {
    crate::rsvd::rsvd_operator(&bundle.operator(a), cfg)
}

/// Exact factors of `B = A L#` truncated to rank `k`.
pub fn penalized_exact_factors(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    k: usize,
) -> Result<RankKApprox> {
    let b = bundle.operator(a).materialize();
    Ok(RankKApprox::from_svd(&crate::linalg::svd_full(&b)?, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist, norm2, pinv, svd_full};
    use crate::rsvd::{gaussian_matrix, rsvd_auto, RsvdConfig};
    use crate::smoothing::SmoothingOperator;

    fn diag(d: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(d.len(), d.len(), d)
    }

    fn exact(a: &DenseMatrix, k: usize) -> RankKApprox {
        RankKApprox::from_svd(&svd_full(a).unwrap(), k)
    }

    /// Matrix with prescribed decaying spectrum.
    fn graded(n: usize, m: usize, seed: u64) -> DenseMatrix {
        let u = crate::linalg::qr_thin(&gaussian_matrix(n, n.min(m), seed))
            .unwrap()
            .q;
        let v = crate::linalg::qr_thin(&gaussian_matrix(m, n.min(m), seed + 1))
            .unwrap()
            .q;
        let s: Vec<f64> = (0..n.min(m)).map(|i| 0.7f64.powi(i as i32)).collect();
        u.scale_columns(&s).matmul_tr(&v)
    }

    fn normal_equations(a: &DenseMatrix, l: &DenseMatrix, b: &[f64], alpha: f64) -> Vec<f64> {
        let m = a.tr_matmul(a).add(&l.tr_matmul(l).scaled(alpha));
        CholeskyFactor::new(&m).unwrap().solve(&a.tr_matvec(b))
    }

    #[test]
    fn tsvd_examples() {
        let a = diag(&[3.0, 2.0, 1.0]);
        let s = svd_full(&a).unwrap();
        let x = tsvd_solve(&s, 2, &[3.0, 4.0, 5.0]).unwrap().x;
        assert!(dist(&x, &[1.0, 2.0, 0.0]) < 1e-14);
        let x = tsvd_solve(&s, 3, &[3.0, 4.0, 5.0]).unwrap().x;
        assert!(dist(&x, &[1.0, 2.0, 5.0]) < 1e-14);
        let x = tsvd_solve(&s, 2, &[0.0, 0.0, 5.0]).unwrap().x;
        assert_eq!(norm2(&x), 0.0);
        let sing = svd_full(&diag(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            tsvd_solve(&sing, 2, &[1.0, 1.0]),
            Err(Error::RankExceeded { rank: 1, .. })
        ));
    }

    #[test]
    fn range_solvers_with_exact_factors() {
        let a = graded(15, 12, 3);
        let b = gaussian_matrix(15, 1, 4).into_vec();
        let s = svd_full(&a).unwrap();
        for k in [1, 5, 12] {
            let ex = RankKApprox::from_svd(&s, k);
            let t = tsvd_solve(&s, k, &b).unwrap().x;
            assert!(dist(&trsvd_solve_range(&a, &ex, &b).unwrap().x, &t) < 1e-10 * norm2(&t));
            assert!(dist(&trsvd_solve_projected(&ex, &b).unwrap().x, &t) < 1e-10 * norm2(&t));
        }
        let alpha = 1e-3;
        let d = tikhonov_solve_direct(&a, &b, alpha).unwrap().x;
        let full = RankKApprox::from_svd(&s, 12);
        assert!(dist(&rsvd_tikhonov_range(&a, &full, &b, alpha).unwrap().x, &d) < 1e-9 * norm2(&d));
        assert!(dist(&rsvd_tikhonov_projected(&full, &b, alpha).unwrap().x, &d) < 1e-9 * norm2(&d));
    }

    #[test]
    fn orthogonal_full_rank_range() {
        let q = crate::linalg::qr_thin(&gaussian_matrix(6, 6, 2)).unwrap().q;
        let b = gaussian_matrix(6, 1, 3).into_vec();
        let x = trsvd_solve_range(&q, &exact(&q, 6), &b).unwrap().x;
        assert!(dist(&x, &q.tr_matvec(&b)) < 1e-12);
    }

    #[test]
    fn tikhonov_closed_forms() {
        let x = tikhonov_solve_direct(&DenseMatrix::identity(2), &[2.0, 4.0], 1.0)
            .unwrap()
            .x;
        assert!(dist(&x, &[1.0, 2.0]) < 1e-15);
        let a = diag(&[2.0, 1.0]);
        let x = tikhonov_solve_direct(&a, &[6.0, 3.0], 2.0).unwrap().x;
        assert!(dist(&x, &[2.0, 1.0]) < 1e-14);
        let x = rsvd_tikhonov_range(&a, &exact(&a, 2), &[6.0, 3.0], 2.0)
            .unwrap()
            .x;
        assert!(dist(&x, &[2.0, 1.0]) < 1e-14);
        let x = rsvd_tikhonov_projected(&exact(&a, 1), &[6.0, 3.0], 2.0)
            .unwrap()
            .x;
        assert!(dist(&x, &[2.0, 0.0]) < 1e-14);
        assert!(tikhonov_solve_direct(&a, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn primal_and_dual_forms_agree() {
        let a = gaussian_matrix(9, 6, 5);
        let b = gaussian_matrix(9, 1, 6).into_vec();
        let primal = DirectTikhonov::new(&a);
        assert!(!primal.uses_dual_form());
        let x1 = primal.solve(&a, &b, 0.3).unwrap();
        let at = a.transpose();
        let c = gaussian_matrix(6, 1, 7).into_vec();
        let dual = DirectTikhonov::new(&at);
        assert!(dual.uses_dual_form());
        // Same problem in data-space form: compare with the explicit inverse.
        let mut g = a.tr_matmul(&a);
        g.add_to_diagonal(0.3);
        let x_ref = pinv(&g, None).unwrap().matvec(&a.tr_matvec(&b));
        assert!(dist(&x1, &x_ref) < 1e-9 * norm2(&x_ref));
        let y = dual.solve(&at, &c, 0.3).unwrap();
        let mut g = a.matmul_tr(&a);
        g.add_to_diagonal(0.3);
        let y_ref = pinv(&g, None).unwrap().matvec(&a.matvec(&c));
        assert!(dist(&y, &y_ref) < 1e-9 * norm2(&y_ref));
        assert!(DirectTikhonov::new(&gaussian_matrix(4, 4, 1)).uses_dual_form());
    }

    #[test]
    fn norm_shrinks_with_alpha() {
        let a = gaussian_matrix(8, 8, 9);
        let b = gaussian_matrix(8, 1, 10).into_vec();
        let norms: Vec<f64> = [1e-2, 1e0, 1e2, 1e4]
            .iter()
            .map(|&al| norm2(&tikhonov_solve_direct(&a, &b, al).unwrap().x))
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn empty_factors_give_zero() {
        let a = gaussian_matrix(5, 4, 1);
        let ex = exact(&a, 0);
        let x = rsvd_tikhonov_range(&a, &ex, &[1.0; 5], 0.1).unwrap().x;
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn spectral_sum_recovers_truncated_limit() {
        let a = graded(20, 20, 11);
        let b = gaussian_matrix(20, 1, 12).into_vec();
        let r = rsvd_auto(&a, &RsvdConfig::new(6, 1)).unwrap();
        let t = trsvd_solve_range(&a, &r, &b).unwrap().x;
        let alpha = 1e-14 * r.sigma[0].powi(2);
        let x = rsvd_tikhonov_range(&a, &r, &b, alpha).unwrap().x;
        assert!(dist(&x, &t) <= 1e-8 * norm2(&t));
    }

    #[test]
    fn full_resolvent_adds_complement() {
        let a = graded(10, 8, 13);
        let b = gaussian_matrix(10, 1, 14).into_vec();
        let r = exact(&a, 3);
        let alpha = 0.05;
        let s = rsvd_tikhonov_range_with(&a, &r, &b, alpha, ResolventForm::SpectralSum)
            .unwrap()
            .x;
        let f = rsvd_tikhonov_range_with(&a, &r, &b, alpha, ResolventForm::Full)
            .unwrap()
            .x;
        let mut g =
            r.u.scale_columns(&r.sigma)
                .matmul_tr(&r.u.scale_columns(&r.sigma));
        g.add_to_diagonal(alpha);
        let expected = a.tr_matvec(&CholeskyFactor::new(&g).unwrap().solve(&b));
        assert!(dist(&f, &expected) < 1e-9 * norm2(&expected));
        assert!(dist(&f, &s) > 1e-3);
    }

    #[test]
    fn general_direct_matches_normal_equations() {
        for pen in [
            SmoothingOperator::identity(30),
            SmoothingOperator::first_difference(30).unwrap(),
            SmoothingOperator::second_difference(30).unwrap(),
        ] {
            let a = graded(30, 30, 15);
            let b = gaussian_matrix(30, 1, 16).into_vec();
            let bundle = WeightedPinv::new(&a, &pen).unwrap();
            let alpha = 1e-3;
            let x = gen_tikhonov_direct(&a, &bundle, &b, alpha).unwrap().x;
            let x_ref = normal_equations(&a, &pen.to_dense(), &b, alpha);
            assert!(dist(&x, &x_ref) < 1e-8 * norm2(&x_ref), "{:?}", pen.kind());
            // Exact full-rank factors of B reproduce the direct solution.
            let exb = penalized_exact_factors(&a, &bundle, pen.out_dim()).unwrap();
            let xr = rsvd_gen_tikhonov_range(&a, &bundle, &exb, &b, alpha)
                .unwrap()
                .x;
            assert!(dist(&xr, &x_ref) < 1e-8 * norm2(&x_ref));
        }
    }

    #[test]
    fn identity_penalty_reduces_to_standard() {
        let a = graded(12, 10, 17);
        let b = gaussian_matrix(12, 1, 18).into_vec();
        let bundle = WeightedPinv::new(&a, &SmoothingOperator::identity(10)).unwrap();
        let alpha = 0.01;
        let g = gen_tikhonov_direct(&a, &bundle, &b, alpha).unwrap().x;
        let s = tikhonov_solve_direct(&a, &b, alpha).unwrap().x;
        assert!(dist(&g, &s) < 1e-10 * norm2(&s));
        let r = rsvd_auto(&a, &RsvdConfig::new(4, 2)).unwrap();
        let rb = penalized_factors(&a, &bundle, &RsvdConfig::new(4, 2)).unwrap();
        let x1 = rsvd_gen_tikhonov_range(&a, &bundle, &rb, &b, alpha)
            .unwrap()
            .x;
        let x2 = rsvd_tikhonov_range(&a, &r, &b, alpha).unwrap().x;
        assert!(dist(&x1, &x2) < 1e-12 * norm2(&x2));
        let p1 = rsvd_gen_tikhonov_projected(&r, &bundle, &b, alpha)
            .unwrap()
            .x;
        let p2 = rsvd_tikhonov_projected(&r, &b, alpha).unwrap().x;
        assert!(dist(&p1, &p2) < 1e-12 * norm2(&p2));
    }

    #[test]
    fn null_component_is_recovered() {
        // b = A w for w in N(L): the minimizer is w itself for any alpha.
        let a = graded(14, 14, 19);
        let pen = SmoothingOperator::first_difference(14).unwrap();
        let bundle = WeightedPinv::new(&a, &pen).unwrap();
        let w = vec![0.7; 14];
        let b = a.matvec(&w);
        let x = gen_tikhonov_direct(&a, &bundle, &b, 0.5).unwrap().x;
        assert!(dist(&x, &w) < 1e-8);
    }

    #[test]
    fn gen_range_smooth_part_in_gamma_range() {
        let a = graded(16, 16, 21);
        let pen = SmoothingOperator::first_difference(16).unwrap();
        let bundle = WeightedPinv::new(&a, &pen).unwrap();
        let b = gaussian_matrix(16, 1, 22).into_vec();
        let rb = penalized_factors(&a, &bundle, &RsvdConfig::new(5, 3)).unwrap();
        let x = rsvd_gen_tikhonov_range(&a, &bundle, &rb, &b, 0.01)
            .unwrap()
            .x;
        let smooth = crate::linalg::sub(&x, &bundle.null_component(&b));
        // Range of Gamma A^T = range of L# B^T.
        let basis = bundle
            .l_sharp_matrix(&a)
            .unwrap()
            .matmul(&bundle.operator(&a).materialize().transpose());
        let p = basis.matmul(&pinv(&basis, Some(1e-12)).unwrap());
        assert!(dist(&p.matvec(&smooth), &smooth) < 1e-8 * norm2(&smooth));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
