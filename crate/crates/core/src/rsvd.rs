//! Randomized SVD: Gaussian range sketch, optional power iteration, small
//! exact SVD, truncation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    norm2, qr_thin, singular_values, spectral_norm, svd_full, DenseMatrix, SvdTriple,
};

/// Parameters of one randomized SVD run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsvdConfig {
    /// Target rank.
    pub k: usize,
    /// Oversampling.
    pub p: usize,
    /// Power exponent.
    pub q: usize,
    pub seed: u64,
}

impl RsvdConfig {
    pub const DEFAULT_OVERSAMPLING: usize = 5;
    pub const DEFAULT_POWER: usize = 0;

    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            p: Self::DEFAULT_OVERSAMPLING,
            q: Self::DEFAULT_POWER,
            seed,
        }
    }

    pub fn with_oversampling(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_power(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    /// Number of probe vectors, `k + p`.
    pub fn sketch_size(&self) -> usize {
        self.k + self.p
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig(
                "target rank k must be positive".into(),
            ));
        }
        let limit = rows.min(cols);
        if self.sketch_size() > limit {
            return Err(Error::shape(
                "rsvd",
                format!("k + p <= min(rows, cols) = {limit}"),
                format!("k + p = {}", self.sketch_size()),
            ));
        }
        Ok(())
    }
}

/// Which side of the matrix was sketched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Range of `A` probed (`rows >= cols`).
    Tall,
    /// Range of `A^T` probed (`rows < cols`).
    Wide,
}

/// Rank-`k` factors `U_k diag(sigma_k) V_k^T`.
#[derive(Clone, Debug)]
pub struct RankKApprox {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// `None` when the factors came from an exact SVD.
    pub config: Option<RsvdConfig>,
    /// The full `k + p` column sketch basis (empty for exact factors).
    pub basis: DenseMatrix,
    pub orientation: Orientation,
    /// Set when the sketch was numerically rank deficient.
    pub rank_deficient: bool,
}

impl RankKApprox {
    /// Wraps the leading `k` triplets of an exact SVD.
    pub fn from_svd(svd: &SvdTriple, k: usize) -> Self {
        let t = svd.truncated(k);
        Self {
            basis: DenseMatrix::zeros(t.u.rows(), 0),
            u: t.u,
            sigma: t.sigma,
            v: t.v,
            config: None,
            orientation: Orientation::Tall,
            rank_deficient: false,
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U_k diag(sigma_k) V_k^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.u.scale_columns(&self.sigma).matmul_tr(&self.v)
    }

    pub fn as_svd(&self) -> SvdTriple {
        SvdTriple {
            u: self.u.clone(),
            sigma: self.sigma.clone(),
            v: self.v.clone(),
        }
    }
}

/// A matrix known through products with blocks of vectors.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `Op * X` for `X` with `cols()` rows.
    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix;
    /// `Op^T * Y` for `Y` with `rows()` rows.
    fn apply_t_block(&self, y: &DenseMatrix) -> DenseMatrix;

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_block(&DenseMatrix::column_vector(x)).into_vec()
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.apply_t_block(&DenseMatrix::column_vector(y))
            .into_vec()
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }
    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }
    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix {
        self.matmul(x)
    }
    fn apply_t_block(&self, y: &DenseMatrix) -> DenseMatrix {
        self.tr_matmul(y)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.tr_matvec(y)
    }
}

/// View of `Op^T` that swaps the two products.
struct Transposed<'a, O: ?Sized>(&'a O);

impl<O: LinearOperator + ?Sized> LinearOperator for Transposed<'_, O> {
    fn rows(&self) -> usize {
        self.0.cols()
    }
    fn cols(&self) -> usize {
        self.0.rows()
    }
    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix {
        self.0.apply_t_block(x)
    }
    fn apply_t_block(&self, y: &DenseMatrix) -> DenseMatrix {
        self.0.apply_block(y)
    }
}

/// `rows x cols` matrix of i.i.d. standard normals, drawn column by column
/// from a ChaCha20 stream seeded with `seed`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

fn orthonormalize(y: DenseMatrix) -> Result<DenseMatrix> {
    Ok(qr_thin(&y)?.q)
}

/// Sketch of the range of a tall operator. Returns the factors plus the basis.
fn sketch_tall<O: LinearOperator + ?Sized>(op: &O, cfg: &RsvdConfig) -> Result<RankKApprox> {
    let (rows, cols) = (op.rows(), op.cols());
    cfg.validate(rows, cols)?;
    let l = cfg.sketch_size();
    let omega = gaussian_matrix(cols, l, cfg.seed);
    let reorth = cfg.q >= 3;
    let mut y = op.apply_block(&omega);
    for _ in 0..cfg.q {
        if reorth {
            y = orthonormalize(y)?;
        }
        let mut z = op.apply_t_block(&y);
        if reorth {
            z = orthonormalize(z)?;
        }
        y = op.apply_block(&z);
    }
    let qr = qr_thin(&y)?;
    let rank_deficient = qr.rank_deficient();
    let q = qr.q;
    // B^T = Op^T Q = Q2 R is cols x l. With R = U_s S V_s^T we get
    // B = V_s S (Q2 U_s)^T, and only an l x l SVD is needed.
    let bt = qr_thin(&op.apply_t_block(&q))?;
    let small = svd_full(&bt.r)?;
    let w = small.v.leading_columns(cfg.k);
    let u = q.matmul(&w);
    let v = bt.q.matmul(&small.u.leading_columns(cfg.k));
    Ok(RankKApprox {
        u,
        sigma: small.sigma[..cfg.k].to_vec(),
        v,
        config: Some(*cfg),
        basis: q,
        orientation: Orientation::Tall,
        rank_deficient,
    })
}

/// Randomized SVD of a matrix with `rows >= cols`.
pub fn rsvd_tall(a: &DenseMatrix, cfg: &RsvdConfig) -> Result<RankKApprox> {
    if a.rows() < a.cols() {
        return Err(Error::shape(
            "rsvd_tall",
            format!("rows >= cols ({} columns)", a.cols()),
            format!("{} rows", a.rows()),
        ));
    }
    sketch_tall(a, cfg)
}

/// Randomized SVD of a matrix with `rows < cols`, probing the range of `A^T`.
///
/// The probe is the transpose of the one [`rsvd_tall`] would draw for `A^T`,
/// so the factors coincide with those of `rsvd_tall(A^T)` with `U` and `V`
/// exchanged.
pub fn rsvd_wide(a: &DenseMatrix, cfg: &RsvdConfig) -> Result<RankKApprox> {
    if a.rows() >= a.cols() {
        return Err(Error::shape(
            "rsvd_wide",
            format!("rows < cols ({} columns)", a.cols()),
            format!("{} rows", a.rows()),
        ));
    }
    sketch_wide(a, cfg)
}

fn sketch_wide<O: LinearOperator + ?Sized>(op: &O, cfg: &RsvdConfig) -> Result<RankKApprox> {
    let t = sketch_tall(&Transposed(op), cfg)?;
    Ok(RankKApprox {
        u: t.v,
        sigma: t.sigma,
        v: t.u,
        config: t.config,
        basis: t.basis,
        orientation: Orientation::Wide,
        rank_deficient: t.rank_deficient,
    })
}

/// Dispatches on shape; square inputs take the tall path.
pub fn rsvd_auto(a: &DenseMatrix, cfg: &RsvdConfig) -> Result<RankKApprox> {
    rsvd_operator(a, cfg)
}

/// Randomized SVD of any [`LinearOperator`], dispatching on its shape.
pub fn rsvd_operator<O: LinearOperator + ?Sized>(op: &O, cfg: &RsvdConfig) -> Result<RankKApprox> {
    if op.rows() >= op.cols() {
        sketch_tall(op, cfg)
    } else {
        sketch_wide(op, cfg)
    }
}

/// Recomputes each singular value as `||A^T u_i||`.
pub fn refine_singular_values(a: &DenseMatrix, approx: &RankKApprox) -> Result<Vec<f64>> {
    if approx.u.rows() != a.rows() {
        return Err(Error::shape(
            "refine_singular_values",
            format!("left factor with {} rows", a.rows()),
            approx.u.rows(),
        ));
    }
    let atu = a.tr_matmul(&approx.u);
    Ok((0..atu.cols()).map(|j| norm2(&atu.column(j))).collect())
}

/// Measured approximation errors next to the probabilistic bounds for the
/// projection error.
#[derive(Clone, Debug, Serialize)]
pub struct RsvdErrorReport {
    /// `||A - U_k S_k V_k^T||`.
    pub approx_error: f64,
    /// `||A - Q Q^T A||` (or `||A - A Q Q^T||` for a wide sketch).
    pub projection_error: f64,
    /// Bound holding with probability at least `1 - 3 p^-p`.
    pub bound_poly: f64,
    /// Bound holding with probability at least `1 - 3 e^-p`.
    pub bound_exp: f64,
}

/// Both projection-error bounds for given tail singular values.
///
/// `sigma` is the full nonincreasing spectrum of `A`.
pub fn projection_error_bounds(sigma: &[f64], k: usize, p: usize) -> (f64, f64) {
    let s_next = sigma.get(k).copied().unwrap_or(0.0);
    let tail = sigma.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt();
    let (kf, pf) = (k as f64, p as f64);
    let l = kf + pf;
    let poly = (1.0 + 6.0 * (l * pf * pf.ln()).sqrt()) * s_next + 3.0 * l.sqrt() * tail;
    let exp =
        (1.0 + 16.0 * (1.0 + kf / (pf + 1.0)).sqrt()) * s_next + 8.0 * l.sqrt() / (pf + 1.0) * tail;
    (poly, exp)
}

/// The two bounds specialized to a spectrum `sigma_j = c0 * c1^j`.
pub fn exponential_decay_bounds(sigma_next: f64, c1: f64, k: usize, p: usize) -> (f64, f64) {
    let (kf, pf) = (k as f64, p as f64);
    let l = kf + pf;
    let root = (1.0 - c1 * c1).sqrt();
    let poly = 1.0 + 6.0 * (l * pf * pf.ln()).sqrt() + 3.0 * l.sqrt() / root;
    let exp = 1.0 + 16.0 * (1.0 + kf / (pf + 1.0)).sqrt() + 8.0 * l.sqrt() / ((pf + 1.0) * root);
    (poly * sigma_next, exp * sigma_next)
}

/// Approximation and projection errors of `approx` against `a`, with the
/// bounds evaluated from the exact spectrum of `a`.
pub fn rsvd_error(a: &DenseMatrix, approx: &RankKApprox) -> Result<RsvdErrorReport> {
    if approx.u.rows() != a.rows() || approx.v.rows() != a.cols() {
        return Err(Error::shape(
            "rsvd_error",
            format!("factors for a {}x{} matrix", a.rows(), a.cols()),
            format!("{}x{}", approx.u.rows(), approx.v.rows()),
        ));
    }
    let approx_error = spectral_norm(&a.sub(&approx.reconstruct()))?;
    let q = &approx.basis;
    let projection_error = if q.cols() == 0 {
        approx_error
    } else {
        let residual = match approx.orientation {
            Orientation::Tall => a.sub(&q.matmul(&q.tr_matmul(a))),
            Orientation::Wide => a.sub(&a.matmul(q).matmul_tr(q)),
        };
        spectral_norm(&residual)?
    };
    let sigma = singular_values(a)?;
    let p = approx.config.map_or(0, |c| c.p);
    let (bound_poly, bound_exp) = projection_error_bounds(&sigma, approx.rank(), p);
    Ok(RsvdErrorReport {
        approx_error,
        projection_error,
        bound_poly,
        bound_exp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist, jacobi_svd};

    fn diag_embedded(rows: usize, d: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(rows, d.len(), d)
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn exact_capture_rank_one() {
        let mut a = DenseMatrix::zeros(3, 3);
        a[(0, 0)] = 2.0;
        let cfg = RsvdConfig::new(1, 3).with_oversampling(1);
        let r = rsvd_tall(&a, &cfg).unwrap();
        assert!((r.sigma[0] - 2.0).abs() < 1e-10);
        assert!(spectral_norm(&a.sub(&r.reconstruct())).unwrap() < 1e-10);
        let refined = refine_singular_values(&a, &r).unwrap();
        assert!((refined[0] - r.sigma[0]).abs() < 1e-12);
    }

    #[test]
    fn wide_rank_one() {
        let mut a = DenseMatrix::zeros(3, 5);
        a[(0, 0)] = 3.0;
        let r = rsvd_wide(&a, &RsvdConfig::new(1, 1).with_oversampling(1)).unwrap();
        assert!((r.sigma[0] - 3.0).abs() < 1e-12);
        assert_eq!(r.orientation, Orientation::Wide);
    }

    #[test]
    fn diagonal_spectrum_medians() {
        let a = diag_embedded(6, &[4.0, 2.0, 1.0, 0.5]);
        let (mut s1, mut s2) = (Vec::new(), Vec::new());
        for seed in 0..100 {
            let r = rsvd_tall(&a, &RsvdConfig::new(2, seed).with_oversampling(2)).unwrap();
            s1.push(r.sigma[0]);
            s2.push(r.sigma[1]);
        }
        assert!((median(s1) - 4.0).abs() <= 0.01 * 4.0);
        assert!((median(s2) - 2.0).abs() <= 0.05 * 2.0);
    }

    #[test]
    fn power_iteration_does_not_hurt() {
        let a = diag_embedded(6, &[4.0, 2.0, 1.0, 0.5]);
        let err = |q: usize| {
            median(
                (0..100)
                    .map(|seed| {
                        let r = rsvd_tall(
                            &a,
                            &RsvdConfig::new(2, seed).with_oversampling(1).with_power(q),
                        )
                        .unwrap();
                        rsvd_error(&a, &r).unwrap().projection_error
                    })
                    .collect(),
            )
        };
        assert!(err(1) <= err(0));
    }

    #[test]
    fn wide_is_transpose_of_tall() {
        let a = gaussian_matrix(9, 4, 77);
        let cfg = RsvdConfig::new(2, 5).with_oversampling(2);
        let tall = rsvd_tall(&a, &cfg).unwrap();
        let wide = rsvd_wide(&a.transpose(), &cfg).unwrap();
        assert!(dist(&tall.sigma, &wide.sigma) < 1e-12);
        for j in 0..2 {
            let (tu, wv) = (tall.u.column(j), wide.v.column(j));
            let s = crate::linalg::dot(&tu, &wv).signum();
            assert!(dist(&tu, &crate::linalg::scale(s, &wv)) < 1e-10);
        }
    }

    #[test]
    fn wide_weyl_bound() {
        let a = gaussian_matrix(4, 9, 8);
        let r = rsvd_wide(&a, &RsvdConfig::new(3, 2).with_oversampling(1)).unwrap();
        let exact = jacobi_svd(&a).sigma;
        let err = spectral_norm(&a.sub(&r.reconstruct())).unwrap();
        for i in 0..3 {
            assert!((r.sigma[i] - exact[i]).abs() <= err + 1e-12);
        }
    }

    #[test]
    fn dispatch_by_shape() {
        let cfg = RsvdConfig::new(1, 0).with_oversampling(1);
        assert_eq!(
            rsvd_auto(&gaussian_matrix(5, 3, 1), &cfg)
                .unwrap()
                .orientation,
            Orientation::Tall
        );
        assert_eq!(
            rsvd_auto(&gaussian_matrix(3, 5, 1), &cfg)
                .unwrap()
                .orientation,
            Orientation::Wide
        );
        assert_eq!(
            rsvd_auto(&gaussian_matrix(4, 4, 1), &cfg)
                .unwrap()
                .orientation,
            Orientation::Tall
        );
    }

    #[test]
    fn config_validation() {
        let a = gaussian_matrix(5, 3, 1);
        assert!(matches!(
            rsvd_tall(&a, &RsvdConfig::new(2, 0)),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            rsvd_tall(&a, &RsvdConfig::new(0, 0).with_oversampling(1)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(rsvd_wide(&a, &RsvdConfig::new(1, 0).with_oversampling(1)).is_err());
        assert!(rsvd_tall(&a.transpose(), &RsvdConfig::new(1, 0).with_oversampling(1)).is_err());
    }

    #[test]
    fn refine_examples() {
        let a = diag_embedded(3, &[4.0, 2.0, 1.0]);
        let r = rsvd_tall(&a, &RsvdConfig::new(2, 4).with_oversampling(1)).unwrap();
        let refined = refine_singular_values(&a, &r).unwrap();
        let err = spectral_norm(&a.sub(&r.reconstruct())).unwrap();
        assert!((refined[0] - 4.0).abs() <= err + 1e-12);
        assert!((refined[1] - 2.0).abs() <= err + 1e-12);

        // A left vector orthogonal to range(A) refines to zero.
        let a = diag_embedded(3, &[1.0, 1.0]);
        let mut fake = RankKApprox::from_svd(&svd_full(&a).unwrap(), 1);
        fake.u = DenseMatrix::column_vector(&[0.0, 0.0, 1.0]);
        assert_eq!(refine_singular_values(&a, &fake).unwrap(), vec![0.0]);
        assert!(refine_singular_values(&a.transpose(), &fake).is_err());
    }

    #[test]
    fn bound_formula() {
        let sigma = [5.0, 3.0, 2.0, 1.0];
        let (poly, exp) = projection_error_bounds(&sigma, 1, 4);
        let expected =
            (1.0 + 6.0 * (5.0 * 4.0 * 4f64.ln()).sqrt()) * 3.0 + 3.0 * 5f64.sqrt() * 14f64.sqrt();
        assert!((poly - expected).abs() < 1e-12);
        let expected =
            (1.0 + 16.0 * (1.0 + 0.2f64).sqrt()) * 3.0 + 8.0 * 5f64.sqrt() / 5.0 * 14f64.sqrt();
        assert!((exp - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_capture_error_is_zero() {
        let mut a = DenseMatrix::zeros(6, 4);
        a[(1, 2)] = 1.5;
        let r = rsvd_tall(&a, &RsvdConfig::new(1, 9).with_oversampling(2)).unwrap();
        let rep = rsvd_error(&a, &r).unwrap();
        assert!(rep.approx_error < 1e-12 && rep.projection_error < 1e-12);
        assert_eq!(rep.bound_poly, 0.0);
        let mut b = diag_embedded(6, &[2.0, 1.0, 0.5, 0.1]);
        b[(5, 0)] = 0.0;
        let rep = rsvd_error(
            &b,
            &rsvd_tall(&b, &RsvdConfig::new(1, 1).with_oversampling(2)).unwrap(),
        )
        .unwrap();
        assert!(rep.bound_poly > 0.0 && rep.bound_exp > 0.0);
    }

    #[test]
    fn exponential_bounds_collapse() {
        let (c0, c1) = (2.0f64, 0.5f64);
        let sigma: Vec<f64> = (1..=60).map(|j| c0 * c1.powi(j)).collect();
        let (k, p) = (3, 5);
        let (poly, _) = projection_error_bounds(&sigma, k, p);
        let (cpoly, _) = exponential_decay_bounds(sigma[k], c1, k, p);
        // The corollary replaces the tail sum by its geometric-series majorant.
        assert!(poly <= cpoly * (1.0 + 1e-12));
    }

    #[test]
    fn deterministic() {
        let a = gaussian_matrix(30, 20, 3);
        let cfg = RsvdConfig::new(4, 11).with_power(1);
        let (x, y) = (rsvd_auto(&a, &cfg).unwrap(), rsvd_auto(&a, &cfg).unwrap());
        assert_eq!(x.u, y.u);
        assert_eq!(x.sigma, y.sigma);
        assert_eq!(x.v, y.v);
    }
}
