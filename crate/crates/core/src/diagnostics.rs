//! Error metrics, oracle selection of the regularization parameter, spectral
//! decay fits, and numerical evaluation of the error bounds for the
//! randomized solvers.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{default_rtol, dist, norm2, spectral_norm, svd_full, DenseMatrix, SvdTriple};
use crate::problems::InverseProblem;
use crate::rsvd::{projection_error_bounds, Orientation, RankKApprox};
use crate::smoothing::WeightedPinv;
use crate::solvers::{
    rsvd_gen_tikhonov_range_with, rsvd_tikhonov_range_with, trsvd_solve_range, tsvd_solve,
    ResolventForm,
};

/// Distances between a projected estimate `x_hat`, a range-preserving
/// estimate `x_tilde`, the direct solution and the exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `||x_hat - x_direct||`
    pub e_tilde_xz: f64,
    /// `||x_tilde - x_direct||`
    pub e_tilde_ij: f64,
    /// `||x_direct - x_true||`
    pub e: f64,
    /// `||x_hat - x_true||`
    pub e_xz: f64,
    /// `||x_tilde - x_true||`
    pub e_ij: f64,
}

pub fn error_report(
    x_hat: &[f64],
    x_tilde: &[f64],
    x_direct: &[f64],
    x_true: &[f64],
) -> Result<ErrorReport> {
    let n = x_true.len();
    for (name, v) in [
        ("x_hat", x_hat),
        ("x_tilde", x_tilde),
        ("x_direct", x_direct),
    ] {
        if v.len() != n {
            return Err(Error::shape(
                "error_report",
                format!("{name} of length {n}"),
                v.len(),
            ));
        }
    }
    Ok(ErrorReport {
        e_tilde_xz: dist(x_hat, x_direct),
        e_tilde_ij: dist(x_tilde, x_direct),
        e: dist(x_direct, x_true),
        e_xz: dist(x_hat, x_true),
        e_ij: dist(x_tilde, x_true),
    })
}

/// Log-spaced grid of regularization parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AlphaGrid {
    pub const DEFAULT_COUNT: usize = 100;

    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let g = Self { lo, hi, count };
        g.validate()?;
        Ok(g)
    }

    /// `count` points on `[1e-14 s1^2, s1^2]`.
    pub fn for_spectral_norm(sigma1: f64, count: usize) -> Result<Self> {
        let top = sigma1 * sigma1;
        Self::new(1e-14 * top, top, count)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha grid needs 0 < lo < hi < inf, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.count < 2 {
            return Err(Error::InvalidArgument(format!(
                "alpha grid needs at least 2 points, got {}",
                self.count
            )));
        }
        Ok(())
    }

    /// Ascending grid points with the endpoints hit exactly.
    pub fn points(&self) -> Vec<f64> {
        let (l0, l1) = (self.lo.ln(), self.hi.ln());
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| match i {
                0 => self.lo,
                i if i + 1 == self.count => self.hi,
                i => (l0 + (l1 - l0) * i as f64 / last).exp(),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    /// `None` when the error was not finite.
    pub error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSelection {
    pub alpha_star: f64,
    pub error_star: f64,
    /// One entry per grid point in ascending `alpha`.
    pub curve: Vec<AlphaPoint>,
    /// Number of points dropped for a non-finite error.
    pub excluded: usize,
    /// The minimizer sits at the smallest or largest grid value.
    pub at_boundary: bool,
}

/// Minimizes `error_at` over the grid. Equal errors resolve toward the larger
/// `alpha`.
pub fn select_alpha<F>(grid: &AlphaGrid, error_at: F) -> Result<AlphaSelection>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.validate()?;
    select_alpha_on(&grid.points(), error_at)
}

/// [`select_alpha`] on arbitrary positive points, in any order.
pub fn select_alpha_on<F>(points: &[f64], error_at: F) -> Result<AlphaSelection>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "alpha grid needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let errors = sorted
        .par_iter()
        .map(|&a| error_at(a))
        .collect::<Result<Vec<f64>>>()?;
    let curve: Vec<AlphaPoint> = sorted
        .iter()
        .zip(&errors)
        .map(|(&alpha, &e)| AlphaPoint {
            alpha,
            error: e.is_finite().then_some(e),
        })
        .collect();
    let best = curve
        .iter()
        .filter_map(|p| p.error.map(|e| (p.alpha, e)))
        .fold(None::<(f64, f64)>, |best, (a, e)| match best {
            Some((ba, be)) if be < e || (be == e && ba > a) => Some((ba, be)),
            _ => Some((a, e)),
        });
    let Some((alpha_star, error_star)) = best else {
        return Err(Error::InvalidArgument(
            "no grid point produced a finite error".into(),
        ));
    };
    Ok(AlphaSelection {
        alpha_star,
        error_star,
        excluded: curve.iter().filter(|p| p.error.is_none()).count(),
        at_boundary: alpha_star == sorted[0] || alpha_star == sorted[sorted.len() - 1],
        curve,
    })
}

/// Least-squares line through `(x, y)` points: `(intercept, slope)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let (a, b, _) = linear_fit_r2(points);
    (a, b)
}

/// [`linear_fit`] plus the coefficient of determination.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (intercept, slope, r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `sigma_j = c0 * c1^j`
    Exponential,
    /// `sigma_j = amplitude * j^exponent`
    Algebraic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `(c0, c1)` or `(amplitude, exponent)`.
    pub params: (f64, f64),
    /// Mean squared residual of `ln sigma` for the chosen model.
    pub residual: f64,
}

/// Fits both decay models to `ln sigma_j` (`j` from 1) and keeps the one
/// with the smaller residual. Nonpositive entries are skipped.
pub fn decay_fit(sigma: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0 && s.is_finite())
        .map(|(i, &s)| ((i + 1) as f64, s.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "decay fit needs at least 10 positive singular values, got {}",
            pts.len()
        )));
    }
    let mse = |pts: &[(f64, f64)], a: f64, b: f64| {
        pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum::<f64>() / pts.len() as f64
    };
    let (ea, eb) = linear_fit(&pts);
    let e_res = mse(&pts, ea, eb);
    let log_pts: Vec<(f64, f64)> = pts.iter().map(|p| (p.0.ln(), p.1)).collect();
    let (aa, ab) = linear_fit(&log_pts);
    let a_res = mse(&log_pts, aa, ab);
    Ok(if e_res <= a_res {
        DecayFit {
            model: DecayModel::Exponential,
            params: (ea.exp(), eb.exp()),
            residual: e_res,
        }
    } else {
        DecayFit {
            model: DecayModel::Algebraic,
            params: (aa.exp(), ab),
            residual: a_res,
        }
    })
}

/// Error and perturbation bounds that can be checked numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundId {
    /// `||A - Q Q^T A||` against the tail of the spectrum (holds with
    /// probability at least `1 - 3 p^-p`).
    RsvdProb,
    /// Error of truncated RSVD against the exact solution under `x = A^T w`.
    Trsvd,
    /// Relative distance between truncated RSVD and truncated SVD solutions.
    TrsvdRel,
    /// Error of range-preserving Tikhonov under `x = A^T w`.
    Tikh,
    /// Penalty-norm error of range-preserving general Tikhonov under
    /// `x = Gamma A^T w`.
    GenTikh,
    /// `||A^+ - B^+|| <= ||A^+|| ||B^+|| ||B - A||` for PSD matrices.
    PinvPerturb,
    /// `|sigma_i(A + B) - sigma_i(A)| <= ||B||`.
    Weyl,
    /// `||A^T (Ak^T)^+|| <= 2` for a good enough rank-k approximation.
    AdjointPinv,
    /// `||Ak~ Ak~^T (Ak^T)^+ - Ak|| <= (1 + s1/sk) ||Ak - Ak~||`.
    GramResidual,
    /// `||(AA^T + a)(Ak~Ak~^T + a)^-1 - I|| <= 2/a ||A|| ||A - Ak~||`.
    Resolvent,
    /// The resolvent perturbation composed with `A A^T`.
    ResolventGram,
}

impl BoundId {
    pub const ALL: [BoundId; 11] = [
        BoundId::RsvdProb,
        BoundId::Trsvd,
        BoundId::TrsvdRel,
        BoundId::Tikh,
        BoundId::GenTikh,
        BoundId::PinvPerturb,
        BoundId::Weyl,
        BoundId::AdjointPinv,
        BoundId::GramResidual,
        BoundId::Resolvent,
        BoundId::ResolventGram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::RsvdProb => "rsvd-prob",
            BoundId::Trsvd => "trsvd",
            BoundId::TrsvdRel => "trsvd-rel",
            BoundId::Tikh => "tikh",
            BoundId::GenTikh => "gen-tikh",
            BoundId::PinvPerturb => "pinv-perturb",
            BoundId::Weyl => "weyl",
            BoundId::AdjointPinv => "adjoint-pinv",
            BoundId::GramResidual => "gram-residual",
            BoundId::Resolvent => "resolvent",
            BoundId::ResolventGram => "resolvent-gram",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown bound '{s}'; valid: {}",
                    BoundId::ALL.map(|b| b.as_str()).join(", ")
                ))
            })
    }
}

/// Absolute slack allowed on top of a bound, relative to its size.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: BoundId,
    pub lhs: f64,
    pub rhs: f64,
    pub hypotheses_met: bool,
    pub seed: u64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + BOUND_SLACK * (1.0 + self.rhs)
    }

    /// `None` when the hypotheses fail and the inequality says nothing.
    pub fn verdict(&self) -> Option<bool> {
        self.hypotheses_met.then(|| self.holds())
    }

    /// `rhs - lhs`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Everything a bound may refer to. Each check names the fields it needs.
#[derive(Clone, Copy, Debug, Default)]
pub struct BoundInputs<'a> {
    /// The forward operator.
    pub a: Option<&'a DenseMatrix>,
    /// Exact SVD of the operator the approximation targets (`A`, or
    /// `A L^+` for the penalized bound). Computed when absent.
    pub svd: Option<&'a SvdTriple>,
    /// Rank-k approximation of the same operator.
    pub approx: Option<&'a RankKApprox>,
    /// Second matrix of the perturbation inequalities.
    pub other: Option<&'a DenseMatrix>,
    pub problem: Option<&'a InverseProblem>,
    pub bundle: Option<&'a WeightedPinv>,
    pub alpha: Option<f64>,
    pub seed: u64,
}

fn need<T: Copy>(v: Option<T>, check: BoundId, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingIngredient {
        check: check.as_str(),
        what: what.to_string(),
    })
}

fn sourcewise(problem: &InverseProblem, check: BoundId, weighted: bool) -> Result<f64> {
    match problem.source {
        Some(s) if s.weighted == weighted => Ok(s.norm),
        _ => Err(Error::MissingIngredient {
            check: check.as_str(),
            what: if weighted {
                "a problem with x = Gamma A^T w".into()
            } else {
                "a problem with x = A^T w".into()
            },
        }),
    }
}

fn exact_svd(op: &DenseMatrix, given: Option<&SvdTriple>) -> Result<SvdTriple> {
    match given {
        Some(s) => Ok(s.clone()),
        None => svd_full(op),
    }
}

fn sigma_at(s: &[f64], i: usize) -> f64 {
    s.get(i).copied().unwrap_or(0.0)
}

/// Numerical rank of an exact spectrum.
fn rank_of(svd: &SvdTriple) -> usize {
    svd.numerical_rank(default_rtol(svd.u.rows(), svd.v.rows()))
}

/// `(Ak~ Ak~^T + alpha I)^{-1}` from approximate factors.
fn shifted_gram_inverse(approx: &RankKApprox, alpha: f64) -> DenseMatrix {
    let d: Vec<f64> = approx
        .sigma
        .iter()
        .map(|s| 1.0 / (s * s + alpha) - 1.0 / alpha)
        .collect();
    let mut m = approx.u.scale_columns(&d).matmul_tr(&approx.u);
    m.add_to_diagonal(1.0 / alpha);
    m
}

/// Evaluates both sides of a bound. The verdict only counts when the
/// hypotheses hold; see [`BoundCheck::verdict`].
pub fn check_bound(id: BoundId, inp: &BoundInputs<'_>) -> Result<BoundCheck> {
    let (lhs, rhs, hypotheses_met) = match id {
        BoundId::RsvdProb => rsvd_prob(inp)?,
        BoundId::Trsvd => trsvd(inp)?,
        BoundId::TrsvdRel => trsvd_rel(inp)?,
        BoundId::Tikh => tikh(inp)?,
        BoundId::GenTikh => gen_tikh(inp)?,
        BoundId::PinvPerturb => pinv_perturb(inp)?,
        BoundId::Weyl => weyl(inp)?,
        BoundId::AdjointPinv => adjoint_pinv(inp)?,
        BoundId::GramResidual => gram_residual(inp)?,
        BoundId::Resolvent | BoundId::ResolventGram => resolvent(inp, id)?,
    };
    Ok(BoundCheck {
        bound: id,
        lhs,
        rhs,
        hypotheses_met,
        seed: inp.seed,
    })
}

type Sides = (f64, f64, bool);

fn rsvd_prob(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::RsvdProb;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a randomized approximation")?;
    let cfg = need(
        approx.config,
        id,
        "randomized factors (exact factors carry no sketch)",
    )?;
    let q = &approx.basis;
    let residual = match approx.orientation {
        Orientation::Tall => a.sub(&q.matmul(&q.tr_matmul(a))),
        Orientation::Wide => a.sub(&a.matmul(q).matmul_tr(q)),
    };
    let lhs = spectral_norm(&residual)?;
    let sigma = exact_svd(a, inp.svd)?.sigma;
    let (rhs, _) = projection_error_bounds(&sigma, cfg.k, cfg.p);
    let hyp = cfg.p >= 4 && cfg.k + cfg.p <= a.rows().min(a.cols()) && a.rows() >= a.cols();
    Ok((lhs, rhs, hyp))
}

/// `||A - Ak~||`, `||Ak - Ak~||` and the exact SVD.
fn approx_errors(
    a: &DenseMatrix,
    approx: &RankKApprox,
    svd: Option<&SvdTriple>,
) -> Result<(f64, f64, SvdTriple)> {
    let svd = exact_svd(a, svd)?;
    let at = approx.reconstruct();
    let full = spectral_norm(&a.sub(&at))?;
    let ak = svd.truncated(approx.rank()).reconstruct();
    let trunc = spectral_norm(&ak.sub(&at))?;
    Ok((full, trunc, svd))
}

fn trsvd(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::Trsvd;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let prob = need(inp.problem, id, "the problem record")?;
    let w = sourcewise(prob, id, false)?;
    let k = approx.rank();
    let (e_full, e_trunc, svd) = approx_errors(a, approx, inp.svd)?;
    let s = &svd.sigma;
    let sk = sigma_at(s, k - 1);
    let hyp = k <= rank_of(&svd) && e_full <= sk / 2.0;
    let x = trsvd_solve_range(a, approx, &prob.b)?.x;
    let lhs = dist(&prob.x_true, &x);
    let rhs = 4.0 * prob.noise_norm / sk + 8.0 * s[0] / sk * e_trunc * w + sigma_at(s, k) * w;
    Ok((lhs, rhs, hyp))
}

fn trsvd_rel(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::TrsvdRel;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let b = &need(inp.problem, id, "the problem record")?.b;
    let k = approx.rank();
    let (e_full, e_trunc, svd) = approx_errors(a, approx, inp.svd)?;
    let s = &svd.sigma;
    let sk = sigma_at(s, k - 1);
    let hyp = k < rank_of(&svd) && e_full < sk / 2.0;
    let rhs = 4.0 * (1.0 + s[0] / sk) * e_trunc / sk;
    if !hyp {
        return Ok((f64::NAN, rhs, false));
    }
    let xk = tsvd_solve(&svd, k, b)?.x;
    let xt = trsvd_solve_range(a, approx, b)?.x;
    Ok((dist(&xk, &xt) / norm2(&xk), rhs, true))
}

/// Shared right-hand side of the two Tikhonov error bounds.
fn tikh_rhs(op_norm: f64, err: f64, delta: f64, alpha: f64, w: f64) -> f64 {
    alpha.powf(-1.5) * op_norm * err * (delta + (2.0 / alpha * op_norm * err + 1.0) * alpha * w)
        + 0.5 * alpha.sqrt() * w
}

fn tikh(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::Tikh;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let prob = need(inp.problem, id, "the problem record")?;
    let alpha = need(inp.alpha, id, "alpha")?;
    let w = sourcewise(prob, id, false)?;
    let (e_full, _, svd) = approx_errors(a, approx, inp.svd)?;
    let x = rsvd_tikhonov_range_with(a, approx, &prob.b, alpha, ResolventForm::Full)?.x;
    let lhs = dist(&x, &prob.x_true);
    Ok((
        lhs,
        tikh_rhs(svd.sigma[0], e_full, prob.noise_norm, alpha, w),
        true,
    ))
}

fn gen_tikh(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::GenTikh;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation of A L^+")?;
    let prob = need(inp.problem, id, "the problem record")?;
    let alpha = need(inp.alpha, id, "alpha")?;
    let bundle = need(inp.bundle, id, "the penalty bundle")?;
    let w = sourcewise(prob, id, true)?;
    let pen = bundle.penalty();
    let b_op = bundle.operator(a).materialize();
    let (e_full, _, svd) = approx_errors(&b_op, approx, inp.svd)?;
    let x = rsvd_gen_tikhonov_range_with(a, bundle, approx, &prob.b, alpha, ResolventForm::Full)?.x;
    let diff: Vec<f64> = prob.x_true.iter().zip(&x).map(|(t, x)| t - x).collect();
    let lhs = norm2(&pen.apply(&diff)?);
    let rhs = tikh_rhs(svd.sigma[0], e_full, prob.noise_norm, alpha, w);
    Ok((lhs, rhs, pen.is_injective()))
}

fn is_symmetric_psd(m: &DenseMatrix, svd: &SvdTriple) -> bool {
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    if m.rows() != m.cols() || m.sub(&m.transpose()).max_abs() > 1e-12 * scale {
        return false;
    }
    // For a symmetric matrix u_i = v_i on the positive part of the spectrum.
    let tol = default_rtol(m.rows(), m.cols()) * svd.sigma.first().copied().unwrap_or(0.0);
    (0..svd.sigma.len()).all(|i| {
        svd.sigma[i] <= tol || {
            let c: f64 = (0..m.rows()).map(|r| svd.u[(r, i)] * svd.v[(r, i)]).sum();
            c > 0.0
        }
    })
}

fn pinv_perturb(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::PinvPerturb;
    let a = need(inp.a, id, "the first matrix")?;
    let b = need(inp.other, id, "the second matrix")?;
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "pinv-perturb",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    let (sa, sb) = (svd_full(a)?, svd_full(b)?);
    let (ra, rb) = (rank_of(&sa), rank_of(&sb));
    let pa = crate::linalg::pinv(a, None)?;
    let pb = crate::linalg::pinv(b, None)?;
    // Equal ranges: the projector onto R(B) leaves R(A) invariant.
    let ua = sa.u.leading_columns(ra);
    let ub = sb.u.leading_columns(rb);
    let leak = spectral_norm(&ub.sub(&ua.matmul(&ua.tr_matmul(&ub))))?;
    let hyp = ra == rb && leak <= 1e-8 && is_symmetric_psd(a, &sa) && is_symmetric_psd(b, &sb);
    let lhs = spectral_norm(&pa.sub(&pb))?;
    let rhs = spectral_norm(&pa)? * spectral_norm(&pb)? * spectral_norm(&b.sub(a))?;
    Ok((lhs, rhs, hyp))
}

fn weyl(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::Weyl;
    let a = need(inp.a, id, "the matrix")?;
    let e = need(inp.other, id, "the perturbation")?;
    if a.shape() != e.shape() {
        return Err(Error::shape(
            "weyl",
            format!("{:?}", a.shape()),
            format!("{:?}", e.shape()),
        ));
    }
    let s0 = exact_svd(a, inp.svd)?.sigma;
    let s1 = crate::linalg::singular_values(&a.add(e))?;
    let lhs = s0
        .iter()
        .zip(&s1)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((lhs, spectral_norm(e)?, true))
}

fn adjoint_pinv(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::AdjointPinv;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let k = approx.rank();
    let (e_full, _, svd) = approx_errors(a, approx, inp.svd)?;
    let hyp = k <= rank_of(&svd) && e_full <= svd.sigma[k - 1] / 2.0;
    // (Ak~^T)^+ = U~ S~^{-1} V~^T, and V~ has orthonormal columns.
    let inv: Vec<f64> = approx.sigma.iter().map(|s| 1.0 / s).collect();
    let lhs = spectral_norm(&a.tr_matmul(&approx.u).scale_columns(&inv))?;
    Ok((lhs, 2.0, hyp))
}

fn gram_residual(inp: &BoundInputs<'_>) -> Result<Sides> {
    let id = BoundId::GramResidual;
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let k = approx.rank();
    let (_, e_trunc, svd) = approx_errors(a, approx, inp.svd)?;
    let hyp = k <= rank_of(&svd);
    let t = svd.truncated(k);
    let ak = t.reconstruct();
    let inv: Vec<f64> = t.sigma.iter().map(|s| 1.0 / s).collect();
    // (Ak^T)^+ = U_k S_k^{-1} V_k^T
    let akt_pinv = t.u.scale_columns(&inv).matmul_tr(&t.v);
    let at = approx.reconstruct();
    let lhs = spectral_norm(&at.matmul_tr(&at).matmul(&akt_pinv).sub(&ak))?;
    let rhs = (1.0 + svd.sigma[0] / svd.sigma[k - 1]) * e_trunc;
    Ok((lhs, rhs, hyp))
}

fn resolvent(inp: &BoundInputs<'_>, id: BoundId) -> Result<Sides> {
    let a = need(inp.a, id, "the matrix")?;
    let approx = need(inp.approx, id, "a rank-k approximation")?;
    let alpha = need(inp.alpha, id, "alpha")?;
    let (e_full, _, svd) = approx_errors(a, approx, inp.svd)?;
    let norm_a = svd.sigma[0];
    let at = approx.reconstruct();
    let aat = a.matmul_tr(a);
    // (AA^T + a)(Ak~Ak~^T + a)^{-1} - I = (AA^T - Ak~Ak~^T)(Ak~Ak~^T + a)^{-1}
    let t = aat
        .sub(&at.matmul_tr(&at))
        .matmul(&shifted_gram_inverse(approx, alpha));
    let first = 2.0 / alpha * norm_a * e_full;
    Ok(match id {
        BoundId::Resolvent => (spectral_norm(&t)?, first, true),
        _ => (
            spectral_norm(&t.matmul(&aat))?,
            2.0 * norm_a * (first + 1.0) * e_full,
            true,
        ),
    })
}
