//! Dual route to penalized least squares: solve a low-rank approximation of
//! the dual problem, map back to the primal, and optionally refine.
//!
//! Everything here needs an injective penalty (`N(L) = {0}`), so that the
//! primal is recovered as `x = alpha^{-1} Gamma A^T xi`.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, norm2, scale, sub, CholeskyFactor, DenseMatrix};
use crate::rsvd::{LinearOperator, RankKApprox};
use crate::smoothing::WeightedPinv;
use crate::solvers::{Method, SolverResult};

fn require_injective(bundle: &WeightedPinv) -> Result<()> {
    if !bundle.penalty().is_injective() {
        return Err(Error::PenaltyKernel {
            dim: bundle.penalty().null_basis().cols(),
        });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub primal: SolverResult,
    /// Maximizer of the low-rank dual objective.
    pub xi: Vec<f64>,
}

/// Maximizes `-(2 alpha)^{-1} ||B_k^T xi||^2 - ||xi - b||^2 / 2`, i.e.
/// `xi = alpha (B_k B_k^T + alpha I)^{-1} b`, then sets
/// `x = alpha^{-1} Gamma A^T xi`.
pub fn dual_solve(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    approx_b: &RankKApprox,
    b: &[f64],
    alpha: f64,
) -> Result<DualSolution> {
    let t = Instant::now();
    require_injective(bundle)?;
    check_alpha(alpha)?;
    if b.len() != a.rows() || approx_b.u.rows() != a.rows() {
        return Err(Error::shape(
            "dual_solve",
            format!("data of length {}", a.rows()),
            b.len(),
        ));
    }
    // alpha (U S^2 U^T + alpha I)^{-1} b = b - U diag(s^2 / (s^2 + alpha)) U^T b
    let c: Vec<f64> = approx_b
        .u
        .tr_matvec(b)
        .iter()
        .zip(&approx_b.sigma)
        .map(|(c, s)| c * s * s / (s * s + alpha))
        .collect();
    let mut xi = b.to_vec();
    axpy(-1.0, &approx_b.u.matvec(&c), &mut xi);
    let x = scale(1.0 / alpha, &bundle.gamma_at_apply(a, &xi)?);
    Ok(DualSolution {
        primal: SolverResult {
            x,
            method: Method::Dual,
            alpha: Some(alpha),
            k: Some(approx_b.rank()),
            wall_time: t.elapsed().as_secs_f64(),
        },
        xi,
    })
}

/// `||Ax - b||^2 / 2 + alpha ||Lx||^2 / 2`.
pub fn primal_objective(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    b: &[f64],
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    let r = sub(&a.matvec(x), b);
    let lx = bundle.penalty().apply(x)?;
    Ok(0.5 * norm2(&r).powi(2) + 0.5 * alpha * norm2(&lx).powi(2))
}

/// `-(2 alpha)^{-1} ||(L^+)^T A^T xi||^2 - ||xi - b||^2 / 2 + ||b||^2 / 2`.
///
/// The constant `||b||^2 / 2` makes the optimal value equal to the primal
/// minimum, so the duality gap closes at the solution.
pub fn dual_objective(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    b: &[f64],
    alpha: f64,
    xi: &[f64],
) -> Result<f64> {
    require_injective(bundle)?;
    let v = bundle.penalty().pinv_t_apply(&a.tr_matvec(xi))?;
    Ok(-norm2(&v).powi(2) / (2.0 * alpha) - 0.5 * dist(xi, b).powi(2) + 0.5 * norm2(b).powi(2))
}

#[derive(Clone, Copy, Debug)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Relative stopping tolerance on `||x^{j+1} - x^j|| / ||x^{j+1}||`.
    pub tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefineState {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// Completed iterations.
    pub j: usize,
    /// `||x^{j+1} - x^j||` for every completed iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// One step of the refinement map, with the small Galerkin system
/// `(V^T B^T B V + alpha I) z = V^T B^T (b - A x) - alpha V^T L x`
/// factored once. `V` spans the approximate right singular subspace of `B`.
pub struct Refiner<'a> {
    a: &'a DenseMatrix,
    bundle: &'a WeightedPinv,
    b: &'a [f64],
    alpha: f64,
    v: DenseMatrix,
    bv: DenseMatrix,
    chol: Option<CholeskyFactor>,
}

impl<'a> Refiner<'a> {
    pub fn new(
        a: &'a DenseMatrix,
        bundle: &'a WeightedPinv,
        approx_b: &RankKApprox,
        b: &'a [f64],
        alpha: f64,
    ) -> Result<Self> {
        require_injective(bundle)?;
        check_alpha(alpha)?;
        if b.len() != a.rows() {
            return Err(Error::shape(
                "iterative_refine",
                format!("data of length {}", a.rows()),
                b.len(),
            ));
        }
        if approx_b.v.rows() != bundle.penalty().out_dim() {
            return Err(Error::shape(
                "iterative_refine",
                format!("right factor with {} rows", bundle.penalty().out_dim()),
                approx_b.v.rows(),
            ));
        }
        let v = approx_b.v.clone();
        // k products with the true B.
        let bv = bundle.operator(a).apply_block(&v);
        let chol = if v.cols() == 0 {
            None
        } else {
            let mut g = bv.tr_matmul(&bv);
            g.add_to_diagonal(alpha);
            Some(CholeskyFactor::new(&g)?)
        };
        Ok(Self {
            a,
            bundle,
            b,
            alpha,
            v,
            bv,
            chol,
        })
    }

    /// Maps `x^j` to `(xi^{j+1}, x^{j+1})`.
    pub fn step(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut r = self.b.to_vec();
        axpy(-1.0, &self.a.matvec(x), &mut r);
        let mut xi = r.clone();
        if let Some(chol) = &self.chol {
            let lx = self.bundle.penalty().apply(x)?;
            let mut rhs = self.bv.tr_matvec(&r);
            axpy(-self.alpha, &self.v.tr_matvec(&lx), &mut rhs);
            let z = chol.solve(&rhs);
            axpy(-1.0, &self.bv.matvec(&z), &mut xi);
        }
        let x_next = scale(1.0 / self.alpha, &self.bundle.gamma_at_apply(self.a, &xi)?);
        Ok((xi, x_next))
    }
}

/// Fixed-point refinement of the low-rank dual solution, starting from
/// `x0` (zero when `None`). Fails if the update norm grows by more than
/// 10x three times in a row.
pub fn iterative_refine(
    a: &DenseMatrix,
    bundle: &WeightedPinv,
    approx_b: &RankKApprox,
    b: &[f64],
    alpha: f64,
    opts: RefineOptions,
    x0: Option<&[f64]>,
) -> Result<RefineState> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let refiner = Refiner::new(a, bundle, approx_b, b, alpha)?;
    let m = a.cols();
    let mut x = match x0 {
        Some(x0) if x0.len() != m => {
            return Err(Error::shape(
                "iterative_refine",
                format!("start of length {m}"),
                x0.len(),
            ))
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; m],
    };
    let mut xi = vec![0.0; a.rows()];
    let mut history = Vec::new();
    let mut growth_streak = 0;
    for j in 0..opts.max_iter {
        let (xi_next, x_next) = refiner.step(&x)?;
        let change = dist(&x_next, &x);
        if let Some(&prev) = history.last() {
            if change > 10.0 * prev {
                growth_streak += 1;
            } else {
                growth_streak = 0;
            }
        }
        history.push(change);
        x = x_next;
        xi = xi_next;
        if !change.is_finite() || growth_streak >= 3 {
            return Err(Error::Divergence {
                iteration: j + 1,
                last: change,
            });
        }
        if change <= opts.tol * norm2(&x) {
            return Ok(RefineState {
                x,
                xi,
                j: j + 1,
                history,
                converged: true,
            });
        }
    }
    Ok(RefineState {
        x,
        xi,
        j: opts.max_iter,
        history,
        converged: false,
    })
}
