//! Penalty matrices `L`, their pseudoinverses and the A-weighted
//! pseudoinverse used to reduce general-form Tikhonov to standard form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, norm2, null_space, pinv, singular_values, spectral_norm, DenseMatrix,
};
use crate::rsvd::LinearOperator;

/// Relative threshold on `sigma_min(A W) / ||A||` below which the combined
/// null space of `A` and `L` is considered nontrivial.
pub const UNIQUENESS_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Identity,
    FirstDifference,
    SecondDifference,
    Custom,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "none",
            Self::FirstDifference => "d1",
            Self::SecondDifference => "d2",
            Self::Custom => "custom",
        })
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "identity" => Ok(Self::Identity),
            "d1" | "first_difference" => Ok(Self::FirstDifference),
            "d2" | "second_difference" => Ok(Self::SecondDifference),
            other => Err(Error::InvalidArgument(format!(
                "unknown penalty '{other}', expected one of none, d1, d2"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
struct CustomParts {
    matrix: DenseMatrix,
    pinv: DenseMatrix,
    null_basis: DenseMatrix,
}

/// The penalty matrix `L` (`l x m`).
///
/// Difference operators use forward differences without boundary rows, so
/// `l = m - 1` or `l = m - 2` and `L` has full row rank.
#[derive(Clone, Debug)]
pub struct SmoothingOperator {
    kind: PenaltyKind,
    m: usize,
    custom: Option<CustomParts>,
}

impl SmoothingOperator {
    pub fn identity(m: usize) -> Self {
        Self {
            kind: PenaltyKind::Identity,
            m,
            custom: None,
        }
    }

    pub fn first_difference(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "first difference needs m >= 2, got {m}"
            )));
        }
        Ok(Self {
            kind: PenaltyKind::FirstDifference,
            m,
            custom: None,
        })
    }

    pub fn second_difference(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!(
                "second difference needs m >= 3, got {m}"
            )));
        }
        Ok(Self {
            kind: PenaltyKind::SecondDifference,
            m,
            custom: None,
        })
    }

    pub fn from_kind(kind: PenaltyKind, m: usize) -> Result<Self> {
        match kind {
            PenaltyKind::Identity => Ok(Self::identity(m)),
            PenaltyKind::FirstDifference => Self::first_difference(m),
            PenaltyKind::SecondDifference => Self::second_difference(m),
            PenaltyKind::Custom => Err(Error::InvalidArgument(
                "a custom penalty must be built from its matrix".into(),
            )),
        }
    }

    /// Arbitrary penalty matrix. Its pseudoinverse and null space come from an
    /// SVD computed once here.
    pub fn custom(matrix: DenseMatrix) -> Result<Self> {
        if matrix.cols() == 0 || matrix.rows() == 0 {
            return Err(Error::shape(
                "custom penalty",
                "a nonempty matrix",
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        let pinv = pinv(&matrix, None)?;
        let null_basis = null_space(&matrix, None)?;
        Ok(Self {
            kind: PenaltyKind::Custom,
            m: matrix.cols(),
            custom: Some(CustomParts {
                matrix,
                pinv,
                null_basis,
            }),
        })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// `(l, m)`.
    pub fn dims(&self) -> (usize, usize) {
        let l = match self.kind {
            PenaltyKind::Identity => self.m,
            PenaltyKind::FirstDifference => self.m - 1,
            PenaltyKind::SecondDifference => self.m - 2,
            PenaltyKind::Custom => self.parts().matrix.rows(),
        };
        (l, self.m)
    }

    pub fn out_dim(&self) -> usize {
        self.dims().0
    }

    pub fn in_dim(&self) -> usize {
        self.m
    }

    fn parts(&self) -> &CustomParts {
        self.custom
            .as_ref()
            .expect("custom penalty carries its parts")
    }

    /// True when `L` has a trivial null space.
    pub fn is_injective(&self) -> bool {
        match self.kind {
            PenaltyKind::Identity => true,
            PenaltyKind::FirstDifference | PenaltyKind::SecondDifference => false,
            PenaltyKind::Custom => self.parts().null_basis.cols() == 0,
        }
    }

    fn check_len(&self, op: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::shape(
                op,
                format!("vector of length {expected}"),
                got,
            ));
        }
        Ok(())
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("penalty apply", self.m, x.len())?;
        Ok(match self.kind {
            PenaltyKind::Identity => x.to_vec(),
            PenaltyKind::FirstDifference => x.windows(2).map(|w| w[1] - w[0]).collect(),
            PenaltyKind::SecondDifference => {
                x.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
            }
            PenaltyKind::Custom => self.parts().matrix.matvec(x),
        })
    }

    /// `L^T y`.
    pub fn apply_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        let l = self.out_dim();
        self.check_len("penalty apply_t", l, y.len())?;
        Ok(match self.kind {
            PenaltyKind::Identity => y.to_vec(),
            PenaltyKind::FirstDifference => {
                let mut out = vec![0.0; self.m];
                for (i, &v) in y.iter().enumerate() {
                    out[i] -= v;
                    out[i + 1] += v;
                }
                out
            }
            PenaltyKind::SecondDifference => {
                let mut out = vec![0.0; self.m];
                for (i, &v) in y.iter().enumerate() {
                    out[i] += v;
                    out[i + 1] -= 2.0 * v;
                    out[i + 2] += v;
                }
                out
            }
            PenaltyKind::Custom => self.parts().matrix.tr_matvec(y),
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (l, m) = self.dims();
        match self.kind {
            PenaltyKind::Identity => DenseMatrix::identity(m),
            PenaltyKind::FirstDifference => DenseMatrix::from_fn(l, m, |i, j| {
                if j == i {
                    -1.0
                } else if j == i + 1 {
                    1.0
                } else {
                    0.0
                }
            }),
            PenaltyKind::SecondDifference => DenseMatrix::from_fn(l, m, |i, j| {
                if j == i || j == i + 2 {
                    1.0
                } else if j == i + 1 {
                    -2.0
                } else {
                    0.0
                }
            }),
            PenaltyKind::Custom => self.parts().matrix.clone(),
        }
    }

    /// Orthonormal basis of `N(L)`, `m x d` (possibly `d = 0`).
    pub fn null_basis(&self) -> DenseMatrix {
        let m = self.m;
        match self.kind {
            PenaltyKind::Identity => DenseMatrix::zeros(m, 0),
            PenaltyKind::FirstDifference => {
                DenseMatrix::from_fn(m, 1, |_, _| 1.0 / (m as f64).sqrt())
            }
            PenaltyKind::SecondDifference => {
                let c = 1.0 / (m as f64).sqrt();
                let mid = (m as f64 - 1.0) / 2.0;
                let ramp: Vec<f64> = (0..m).map(|i| i as f64 - mid).collect();
                let r = norm2(&ramp);
                DenseMatrix::from_fn(m, 2, |i, j| if j == 0 { c } else { ramp[i] / r })
            }
            PenaltyKind::Custom => self.parts().null_basis.clone(),
        }
    }

    /// Removes the `N(L)` component: `(I - W W^T) x` for the analytic kernels.
    fn project_out_kernel(&self, x: &mut [f64]) {
        match self.kind {
            PenaltyKind::FirstDifference => {
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                x.iter_mut().for_each(|v| *v -= mean);
            }
            PenaltyKind::SecondDifference => {
                let w = self.null_basis();
                for j in 0..2 {
                    let c = w.column(j);
                    let coef = dot(&c, x);
                    axpy(-coef, &c, x);
                }
            }
            _ => {}
        }
    }

    /// `L^+ y`.
    pub fn pinv_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len("penalty pinv_apply", self.out_dim(), y.len())?;
        let m = self.m;
        let mut x = match self.kind {
            PenaltyKind::Identity => return Ok(y.to_vec()),
            PenaltyKind::Custom => return Ok(self.parts().pinv.matvec(y)),
            PenaltyKind::FirstDifference => {
                let mut x = vec![0.0; m];
                for i in 1..m {
                    x[i] = x[i - 1] + y[i - 1];
                }
                x
            }
            PenaltyKind::SecondDifference => {
                let mut x = vec![0.0; m];
                for i in 0..m - 2 {
                    x[i + 2] = y[i] + 2.0 * x[i + 1] - x[i];
                }
                x
            }
        };
        self.project_out_kernel(&mut x);
        Ok(x)
    }

    /// `(L^+)^T z`.
    pub fn pinv_t_apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len("penalty pinv_t_apply", self.m, z.len())?;
        let m = self.m;
        match self.kind {
            PenaltyKind::Identity => Ok(z.to_vec()),
            PenaltyKind::Custom => Ok(self.parts().pinv.tr_matvec(z)),
            PenaltyKind::FirstDifference => {
                let mut p = z.to_vec();
                self.project_out_kernel(&mut p);
                // out[j] = sum_{i > j} p[i]
                let mut out = vec![0.0; m - 1];
                let mut acc = 0.0;
                for j in (0..m - 1).rev() {
                    acc += p[j + 1];
                    out[j] = acc;
                }
                Ok(out)
            }
            PenaltyKind::SecondDifference => {
                let mut p = z.to_vec();
                self.project_out_kernel(&mut p);
                // out[j] = sum_{l >= j + 2} suffix(l), suffix(l) = sum_{i >= l} p[i]
                let mut out = vec![0.0; m - 2];
                let (mut suffix, mut acc) = (0.0, 0.0);
                for j in (0..m - 2).rev() {
                    suffix += p[j + 2];
                    acc += suffix;
                    out[j] = acc;
                }
                Ok(out)
            }
        }
    }

    fn map_columns(
        &self,
        x: &DenseMatrix,
        out_rows: usize,
        f: impl Fn(&[f64]) -> Result<Vec<f64>>,
    ) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..x.cols())
            .map(|j| f(&x.column(j)).expect("column length checked by caller"))
            .collect();
        DenseMatrix::from_columns(out_rows, &cols)
    }
}

/// Precomputed pieces of the A-weighted pseudoinverse
/// `L# = (I - W (AW)^+ A) L^+`.
#[derive(Clone, Debug)]
pub struct WeightedPinv {
    penalty: SmoothingOperator,
    w: DenseMatrix,
    aw: DenseMatrix,
    aw_pinv: DenseMatrix,
}

impl WeightedPinv {
    /// Builds the bundle for `A` and `L`, checking that `N(A) ∩ N(L) = {0}`.
    pub fn new(a: &DenseMatrix, penalty: &SmoothingOperator) -> Result<Self> {
        if a.cols() != penalty.in_dim() {
            return Err(Error::shape(
                "weighted_pinv",
                format!("penalty acting on {} unknowns", a.cols()),
                penalty.in_dim(),
            ));
        }
        let w = penalty.null_basis();
        let aw = a.matmul(&w);
        let aw_pinv = if w.cols() == 0 {
            DenseMatrix::zeros(0, a.rows())
        } else {
            let smin = if aw.rows() < aw.cols() {
                0.0
            } else {
                singular_values(&aw)?.last().copied().unwrap_or(0.0)
            };
            let tol = UNIQUENESS_RTOL * spectral_norm(a)?;
            if !(smin > tol) {
                return Err(Error::NonUniqueMinimizer {
                    sigma_min: smin,
                    tol,
                });
            }
            pinv(&aw, None)?
        };
        Ok(Self {
            penalty: penalty.clone(),
            w,
            aw,
            aw_pinv,
        })
    }

    pub fn penalty(&self) -> &SmoothingOperator {
        &self.penalty
    }

    /// Null-space basis `W`.
    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn aw(&self) -> &DenseMatrix {
        &self.aw
    }

    pub fn aw_pinv(&self) -> &DenseMatrix {
        &self.aw_pinv
    }

    pub fn has_kernel(&self) -> bool {
        self.w.cols() > 0
    }

    /// `W (AW)^+ b`, the part of the solution the penalty does not see.
    pub fn null_component(&self, b: &[f64]) -> Vec<f64> {
        if !self.has_kernel() {
            return vec![0.0; self.w.rows()];
        }
        self.w.matvec(&self.aw_pinv.matvec(b))
    }

    /// `(I - AW (AW)^+) y`.
    pub fn project_data(&self, y: &[f64]) -> Vec<f64> {
        if !self.has_kernel() {
            return y.to_vec();
        }
        let c = self.aw_pinv.matvec(y);
        let mut out = y.to_vec();
        axpy(-1.0, &self.aw.matvec(&c), &mut out);
        out
    }

    fn project_data_block(&self, y: &DenseMatrix) -> DenseMatrix {
        if !self.has_kernel() {
            return y.clone();
        }
        y.sub(&self.aw.matmul(&self.aw_pinv.matmul(y)))
    }

    /// `L# y`.
    pub fn l_sharp_apply(&self, a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.penalty.pinv_apply(y)?;
        if self.has_kernel() {
            let c = self.aw_pinv.matvec(&a.matvec(&x));
            axpy(-1.0, &self.w.matvec(&c), &mut x);
        }
        Ok(x)
    }

    /// `L#^T z`.
    pub fn l_sharp_t_apply(&self, a: &DenseMatrix, z: &[f64]) -> Result<Vec<f64>> {
        if !self.has_kernel() {
            return self.penalty.pinv_t_apply(z);
        }
        let wz = self.w.tr_matvec(z);
        let mut v = z.to_vec();
        axpy(-1.0, &a.tr_matvec(&self.aw_pinv.tr_matvec(&wz)), &mut v);
        self.penalty.pinv_t_apply(&v)
    }

    /// `Gamma u = L# L#^T u`.
    pub fn gamma_apply(&self, a: &DenseMatrix, u: &[f64]) -> Result<Vec<f64>> {
        let t = self.l_sharp_t_apply(a, u)?;
        self.l_sharp_apply(a, &t)
    }

    /// `Gamma A^T y`, computed as `L# B^T y`.
    pub fn gamma_at_apply(&self, a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
        let bt = self.operator(a).apply_t(y);
        self.l_sharp_apply(a, &bt)
    }

    /// Dense `L#`, for small problems and tests.
    pub fn l_sharp_matrix(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        let l = self.penalty.out_dim();
        let cols = (0..l)
            .map(|j| {
                let mut e = vec![0.0; l];
                e[j] = 1.0;
                self.l_sharp_apply(a, &e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseMatrix::from_columns(self.penalty.in_dim(), &cols))
    }

    /// The operator `B = A L#` as a matrix-free handle.
    pub fn operator<'a>(&'a self, a: &'a DenseMatrix) -> PenalizedOperator<'a> {
        PenalizedOperator { a, bundle: self }
    }
}

/// Convenience constructor matching [`WeightedPinv::new`].
pub fn weighted_pinv(a: &DenseMatrix, penalty: &SmoothingOperator) -> Result<WeightedPinv> {
    WeightedPinv::new(a, penalty)
}

/// `B = A L# = (I - P_AW) A L^+` without forming it.
#[derive(Clone, Copy)]
pub struct PenalizedOperator<'a> {
    a: &'a DenseMatrix,
    bundle: &'a WeightedPinv,
}

impl PenalizedOperator<'_> {
    /// Dense `B`, built row by row as `(L^+)^T a_i` followed by the data-side
    /// projection.
    pub fn materialize(&self) -> DenseMatrix {
        let (n, l) = (self.a.rows(), self.bundle.penalty.out_dim());
        let pen = &self.bundle.penalty;
        let raw = match pen.kind() {
            PenaltyKind::Identity => self.a.clone(),
            PenaltyKind::Custom => self.a.matmul(&pen.parts().pinv),
            _ => {
                let mut m = DenseMatrix::zeros(n, l);
                for i in 0..n {
                    let r = pen
                        .pinv_t_apply(self.a.row(i))
                        .expect("row length matches penalty");
                    m.row_mut(i).copy_from_slice(&r);
                }
                m
            }
        };
        self.bundle.project_data_block(&raw)
    }
}

impl LinearOperator for PenalizedOperator<'_> {
    fn rows(&self) -> usize {
        self.a.rows()
    }

    fn cols(&self) -> usize {
        self.bundle.penalty.out_dim()
    }

    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix {
        let pen = &self.bundle.penalty;
        let lx = match pen.kind() {
            PenaltyKind::Identity => x.clone(),
            PenaltyKind::Custom => pen.parts().pinv.matmul(x),
            _ => pen.map_columns(x, pen.in_dim(), |c| pen.pinv_apply(c)),
        };
        self.bundle.project_data_block(&self.a.matmul(&lx))
    }

    fn apply_t_block(&self, y: &DenseMatrix) -> DenseMatrix {
        let pen = &self.bundle.penalty;
        let aty = self.a.tr_matmul(&self.bundle.project_data_block(y));
        match pen.kind() {
            PenaltyKind::Identity => aty,
            PenaltyKind::Custom => pen.parts().pinv.tr_matmul(&aty),
            _ => pen.map_columns(&aty, pen.out_dim(), |c| pen.pinv_t_apply(c)),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lx = self
            .bundle
            .penalty
            .pinv_apply(x)
            .expect("length matches penalty");
        self.bundle.project_data(&self.a.matvec(&lx))
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        let aty = self.a.tr_matvec(&self.bundle.project_data(y));
        self.bundle
            .penalty
            .pinv_t_apply(&aty)
            .expect("length matches penalty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;
    use crate::rsvd::gaussian_matrix;

    fn seeded_vec(n: usize, seed: u64) -> Vec<f64> {
        gaussian_matrix(n, 1, seed).into_vec()
    }

    fn all_kinds(m: usize) -> Vec<SmoothingOperator> {
        let mut sq = SmoothingOperator::first_difference(m + 1)
            .unwrap()
            .to_dense()
            .leading_columns(m);
        // Bidiagonal square matrix: invertible.
        sq[(m - 1, m - 1)] = -1.0;
        vec![
            SmoothingOperator::identity(m),
            SmoothingOperator::first_difference(m).unwrap(),
            SmoothingOperator::second_difference(m).unwrap(),
            SmoothingOperator::custom(sq).unwrap(),
        ]
    }

    #[test]
    fn dims_and_annihilation() {
        let d1 = SmoothingOperator::first_difference(6).unwrap();
        assert_eq!(d1.dims(), (5, 6));
        assert!(norm2(&d1.apply(&[1.0; 6]).unwrap()) == 0.0);
        let d2 = SmoothingOperator::second_difference(6).unwrap();
        assert_eq!(d2.dims(), (4, 6));
        let ramp: Vec<f64> = (0..6).map(|i| 3.0 - 0.5 * i as f64).collect();
        assert!(norm2(&d2.apply(&ramp).unwrap()) < 1e-15);
        assert!(SmoothingOperator::second_difference(2).is_err());
    }

    #[test]
    fn transpose_matches_dense() {
        for l in all_kinds(9) {
            let d = l.to_dense();
            let x = seeded_vec(9, 1);
            let y = seeded_vec(l.out_dim(), 2);
            assert!(dist(&l.apply(&x).unwrap(), &d.matvec(&x)) < 1e-13);
            assert!(dist(&l.apply_t(&y).unwrap(), &d.tr_matvec(&y)) < 1e-13);
        }
    }

    #[test]
    fn null_bases() {
        let w = SmoothingOperator::first_difference(4).unwrap().null_basis();
        assert!(dist(&w.column(0), &[0.5; 4]) < 1e-15);
        assert_eq!(SmoothingOperator::identity(3).null_basis().shape(), (3, 0));
        let d2 = SmoothingOperator::second_difference(5).unwrap();
        let w = d2.null_basis();
        assert!(d2.to_dense().matmul(&w).max_abs() < 1e-12);
        assert!(w.tr_matmul(&w).sub(&DenseMatrix::identity(2)).max_abs() < 1e-12);
        // Cross-check against the SVD null space: same projector.
        let ws = null_space(&d2.to_dense(), None).unwrap();
        assert!(w.matmul_tr(&w).sub(&ws.matmul_tr(&ws)).max_abs() < 1e-12);
    }

    #[test]
    fn structured_pinv_matches_dense() {
        for l in all_kinds(20) {
            let p = pinv(&l.to_dense(), None).unwrap();
            let y = seeded_vec(l.out_dim(), 3);
            let z = seeded_vec(20, 4);
            assert!(dist(&l.pinv_apply(&y).unwrap(), &p.matvec(&y)) < 1e-10 * (1.0 + norm2(&y)));
            assert!(
                dist(&l.pinv_t_apply(&z).unwrap(), &p.tr_matvec(&z)) < 1e-10 * (1.0 + norm2(&z))
            );
            // Right inverse: L L^+ y = y.
            let back = l.apply(&l.pinv_apply(&y).unwrap()).unwrap();
            assert!(dist(&back, &y) < 1e-10 * norm2(&y));
        }
        let y = seeded_vec(5, 5);
        assert_eq!(SmoothingOperator::identity(5).pinv_apply(&y).unwrap(), y);
    }

    #[test]
    fn weighted_pinv_reductions() {
        let a = gaussian_matrix(12, 10, 6);
        let id = WeightedPinv::new(&a, &SmoothingOperator::identity(10)).unwrap();
        assert!(
            id.l_sharp_matrix(&a)
                .unwrap()
                .sub(&DenseMatrix::identity(10))
                .max_abs()
                < 1e-15
        );

        let sq = all_kinds(10).pop().unwrap();
        let b = WeightedPinv::new(&a, &sq).unwrap();
        let inv = pinv(&sq.to_dense(), None).unwrap();
        assert!(b.l_sharp_matrix(&a).unwrap().sub(&inv).max_abs() < 1e-10);
    }

    #[test]
    fn oblique_orthogonality() {
        for kind in [PenaltyKind::FirstDifference, PenaltyKind::SecondDifference] {
            let a = gaussian_matrix(14, 10, 7);
            let pen = SmoothingOperator::from_kind(kind, 10).unwrap();
            let b = WeightedPinv::new(&a, &pen).unwrap();
            let ls = b.l_sharp_matrix(&a).unwrap();
            assert!(a.matmul(&ls).tr_matmul(b.aw()).max_abs() < 1e-8);
            assert!(pen.to_dense().matmul(b.w()).max_abs() < 1e-12);
            // A L# L x + A W (AW)^+ A x = A x.
            let x = seeded_vec(10, 8);
            let ax = a.matvec(&x);
            let rebuilt = crate::linalg::add(
                &a.matvec(&b.l_sharp_apply(&a, &pen.apply(&x).unwrap()).unwrap()),
                &a.matvec(&b.null_component(&ax)),
            );
            assert!(dist(&rebuilt, &ax) < 1e-10 * norm2(&ax));
        }
    }

    #[test]
    fn operator_matches_materialized() {
        for pen in all_kinds(10) {
            let a = gaussian_matrix(13, 10, 9);
            let bundle = WeightedPinv::new(&a, &pen).unwrap();
            let op = bundle.operator(&a);
            let dense = a.matmul(&bundle.l_sharp_matrix(&a).unwrap());
            assert!(op.materialize().sub(&dense).max_abs() < 1e-10);
            let x = seeded_vec(pen.out_dim(), 10);
            let y = seeded_vec(13, 11);
            assert!(dist(&op.apply(&x), &dense.matvec(&x)) < 1e-10);
            assert!(dist(&op.apply_t(&y), &dense.tr_matvec(&y)) < 1e-10);
            let xb = gaussian_matrix(pen.out_dim(), 3, 12);
            let yb = gaussian_matrix(13, 3, 13);
            assert!(op.apply_block(&xb).sub(&dense.matmul(&xb)).max_abs() < 1e-10);
            assert!(op.apply_t_block(&yb).sub(&dense.tr_matmul(&yb)).max_abs() < 1e-10);
            assert!((dot(&op.apply(&x), &y) - dot(&x, &op.apply_t(&y))).abs() < 1e-10);
            // Gamma is symmetric and Gamma A^T = L# B^T.
            let (u, v) = (seeded_vec(10, 14), seeded_vec(10, 15));
            let gu = bundle.gamma_apply(&a, &u).unwrap();
            let gv = bundle.gamma_apply(&a, &v).unwrap();
            assert!((dot(&gu, &v) - dot(&u, &gv)).abs() < 1e-10);
            let gat = bundle.gamma_apply(&a, &a.tr_matvec(&y)).unwrap();
            assert!(dist(&gat, &bundle.gamma_at_apply(&a, &y).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn rejects_shared_kernel() {
        // Constant vectors lie in N(A): A has rows summing to zero.
        let mut a = gaussian_matrix(8, 6, 1);
        for i in 0..8 {
            let mean = a.row(i).iter().sum::<f64>() / 6.0;
            a.row_mut(i).iter_mut().for_each(|v| *v -= mean);
        }
        let pen = SmoothingOperator::first_difference(6).unwrap();
        assert!(matches!(
            WeightedPinv::new(&a, &pen),
            Err(Error::NonUniqueMinimizer { .. })
        ));
    }
}
