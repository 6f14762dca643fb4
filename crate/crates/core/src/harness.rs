//! Experiment drivers behind the command-line tool: reconstruction tables,
//! parameter and rank sweeps, timing runs and bound verification.
//!
//! Every driver is deterministic given its configuration. Work is spread
//! over a rayon pool, and results are gathered in key order.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_bound, error_report, linear_fit, select_alpha, AlphaGrid, AlphaSelection, BoundCheck,
    BoundId, BoundInputs, ErrorReport,
};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm2, svd_full, DenseMatrix};
use crate::problems::{generate, make_sourcewise, InverseProblem, NoiseSpec, ProblemName};
use crate::rsvd::{gaussian_matrix, rsvd_auto, rsvd_operator, RankKApprox, RsvdConfig};
use crate::smoothing::{PenaltyKind, SmoothingOperator, WeightedPinv};
use crate::solvers::{
    gen_tikhonov_direct, rsvd_gen_tikhonov_projected, rsvd_gen_tikhonov_range,
    rsvd_tikhonov_projected, rsvd_tikhonov_range, tikhonov_solve_direct, DirectGenTikhonov,
    DirectTikhonov, Method,
};

/// Rank of the factors used when picking the oracle-best `alpha`.
pub const SELECTION_RANK: usize = 100;

/// Runs `f` on a pool with `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("workers must be positive".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
            .map(|pool| pool.install(f)),
    }
}

/// Seeds of one repetition. The noise seed is `base + rep`; the sketch
/// seed is derived from it so that both are recoverable from the base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub noise: u64,
    pub sketch: u64,
}

impl SeedSet {
    pub fn derive(base: u64, rep: usize) -> Self {
        let noise = base.wrapping_add(rep as u64);
        Self {
            noise,
            sketch: noise.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
                ^ 0xD1B5_4A32_D192_ED03,
        }
    }
}

/// Scientific notation with six significant digits.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.5e}")
    } else {
        x.to_string()
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Settings shared by the reconstruction drivers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSettings {
    pub n: usize,
    /// Rank of the factors in the compared randomized solvers.
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub penalty: PenaltyKind,
    /// Points of the default `alpha` grid.
    pub grid_count: usize,
    /// Explicit grid; the default spans `[1e-14 s1^2, s1^2]`.
    pub grid: Option<AlphaGrid>,
    pub selection_rank: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            n: 1000,
            k: 20,
            p: RsvdConfig::DEFAULT_OVERSAMPLING,
            q: RsvdConfig::DEFAULT_POWER,
            penalty: PenaltyKind::Identity,
            grid_count: AlphaGrid::DEFAULT_COUNT,
            grid: None,
            selection_rank: SELECTION_RANK,
        }
    }
}

impl SolveSettings {
    fn rsvd(&self, k: usize, seed: u64) -> RsvdConfig {
        RsvdConfig::new(k, seed)
            .with_oversampling(self.p)
            .with_power(self.q)
    }
}

/// Operator-level state reused across noise draws: the matrix, its
/// penalty bundle and cached direct solvers.
pub struct Workspace {
    pub name: ProblemName,
    pub a: DenseMatrix,
    pub x_true: Vec<f64>,
    pub b_exact: Vec<f64>,
    pub bundle: WeightedPinv,
    direct: DirectSolver,
}

enum DirectSolver {
    Standard(DirectTikhonov),
    General(DirectGenTikhonov),
}

impl Workspace {
    pub fn new(name: ProblemName, n: usize, penalty: PenaltyKind) -> Result<Self> {
        let (a, x_true, b_exact) = generate(name, n)?;
        let pen = SmoothingOperator::from_kind(penalty, n)?;
        let bundle = WeightedPinv::new(&a, &pen)?;
        let direct = if penalty == PenaltyKind::Identity {
            DirectSolver::Standard(DirectTikhonov::new(&a))
        } else {
            DirectSolver::General(DirectGenTikhonov::new(&a, &bundle)?)
        };
        Ok(Self {
            name,
            a,
            x_true,
            b_exact,
            bundle,
            direct,
        })
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.direct, DirectSolver::Standard(_))
    }

    pub fn direct(&self, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        match &self.direct {
            DirectSolver::Standard(d) => d.solve(&self.a, b, alpha),
            DirectSolver::General(d) => d.solve(&self.a, &self.bundle, b, alpha),
        }
    }

    /// Factors for the range-preserving solver: of `A`, or of `A L#`.
    pub fn range_factors(&self, cfg: &RsvdConfig) -> Result<RankKApprox> {
        if self.is_standard() {
            rsvd_auto(&self.a, cfg)
        } else {
            rsvd_operator(&self.bundle.operator(&self.a), cfg)
        }
    }

    pub fn range_solve(&self, f: &RankKApprox, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        Ok(if self.is_standard() {
            rsvd_tikhonov_range(&self.a, f, b, alpha)?.x
        } else {
            rsvd_gen_tikhonov_range(&self.a, &self.bundle, f, b, alpha)?.x
        })
    }

    /// Projected solver; `f` must be factors of `A`.
    pub fn projected_solve(&self, f: &RankKApprox, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        Ok(if self.is_standard() {
            rsvd_tikhonov_projected(f, b, alpha)?.x
        } else {
            rsvd_gen_tikhonov_projected(f, &self.bundle, b, alpha)?.x
        })
    }

    pub fn noisy_data(&self, delta: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
        crate::problems::add_noise(&self.b_exact, &NoiseSpec::new(delta, seed))
    }

    /// Oracle-best `alpha` for data `b`, measured with range-preserving
    /// factors of rank `settings.selection_rank`.
    pub fn select_alpha(
        &self,
        settings: &SolveSettings,
        b: &[f64],
        seed: u64,
    ) -> Result<(AlphaSelection, RankKApprox)> {
        let rank = settings
            .selection_rank
            .min(self.a.rows().min(self.a.cols()) - settings.p);
        let f = self.range_factors(&settings.rsvd(rank, seed))?;
        let grid = match settings.grid {
            Some(g) => g,
            None => AlphaGrid::for_spectral_norm(f.sigma[0], settings.grid_count)?,
        };
        let sel = select_alpha(&grid, |alpha| {
            Ok(dist(&self.range_solve(&f, b, alpha)?, &self.x_true))
        })?;
        Ok((sel, f))
    }
}

/// One repetition of a table cell.
#[derive(Clone, Debug, Serialize)]
pub struct TableSample {
    pub alpha_star: f64,
    pub at_boundary: bool,
    pub noise_norm: f64,
    pub report: ErrorReport,
    pub seeds: SeedSet,
}

/// Errors of direct, projected and range-preserving Tikhonov at the
/// oracle-best `alpha` for one noise draw.
pub fn table_sample(
    ws: &Workspace,
    settings: &SolveSettings,
    delta: f64,
    seeds: SeedSet,
) -> Result<TableSample> {
    let (b, noise_norm) = ws.noisy_data(delta, seeds.noise)?;
    let (sel, _) = ws.select_alpha(settings, &b, seeds.sketch)?;
    let alpha = sel.alpha_star;
    let cfg = settings.rsvd(settings.k, seeds.sketch);
    let fa = rsvd_auto(&ws.a, &cfg)?;
    let x_hat = ws.projected_solve(&fa, &b, alpha)?;
    let fr = if ws.is_standard() {
        fa
    } else {
        ws.range_factors(&cfg)?
    };
    let x_tilde = ws.range_solve(&fr, &b, alpha)?;
    let x_direct = ws.direct(&b, alpha)?;
    Ok(TableSample {
        alpha_star: alpha,
        at_boundary: sel.at_boundary,
        noise_norm,
        report: error_report(&x_hat, &x_tilde, &x_direct, &ws.x_true)?,
        seeds,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableConfig {
    pub problems: Vec<ProblemName>,
    pub deltas: Vec<f64>,
    pub settings: SolveSettings,
    pub repeats: usize,
    pub seed: u64,
}

/// Median over repetitions of every metric.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub example: ProblemName,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    pub penalty: PenaltyKind,
    pub alpha_star: f64,
    pub noise_norm: f64,
    pub report: ErrorReport,
    pub samples: Vec<TableSample>,
    pub seed: u64,
    pub repeats: usize,
    /// Set when any repetition failed; the metrics are then NaN.
    pub error: Option<String>,
}

fn median_of(samples: &[TableSample], f: impl Fn(&TableSample) -> f64) -> f64 {
    median(&mut samples.iter().map(f).collect::<Vec<_>>())
}

pub fn run_table(cfg: &TableConfig) -> Result<Vec<TableRow>> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let s = &cfg.settings;
    let workspaces = cfg
        .problems
        .par_iter()
        .map(|&p| Workspace::new(p, s.n, s.penalty))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (pi, _) in cfg.problems.iter().enumerate() {
        for (di, _) in cfg.deltas.iter().enumerate() {
            for rep in 0..cfg.repeats {
                jobs.push((pi, di, rep));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(pi, di, rep)| {
            table_sample(
                &workspaces[pi],
                s,
                cfg.deltas[di],
                SeedSet::derive(cfg.seed, rep),
            )
        })
        .collect();
    let mut rows = Vec::new();
    let mut it = results.into_iter();
    for &example in &cfg.problems {
        for &delta in &cfg.deltas {
            let chunk: Vec<Result<TableSample>> = it.by_ref().take(cfg.repeats).collect();
            let mut error = None;
            let mut samples = Vec::new();
            for r in chunk {
                match r {
                    Ok(sample) => samples.push(sample),
                    Err(e) => error = Some(e.to_string()),
                }
            }
            let nan = f64::NAN;
            let ok = error.is_none();
            let m = |f: &dyn Fn(&TableSample) -> f64| if ok { median_of(&samples, f) } else { nan };
            rows.push(TableRow {
                example,
                delta,
                n: s.n,
                k: s.k,
                penalty: s.penalty,
                alpha_star: m(&|t| t.alpha_star),
                noise_norm: m(&|t| t.noise_norm),
                report: ErrorReport {
                    e_tilde_xz: m(&|t| t.report.e_tilde_xz),
                    e_tilde_ij: m(&|t| t.report.e_tilde_ij),
                    e: m(&|t| t.report.e),
                    e_xz: m(&|t| t.report.e_xz),
                    e_ij: m(&|t| t.report.e_ij),
                },
                samples,
                seed: cfg.seed,
                repeats: cfg.repeats,
                error,
            });
        }
    }
    Ok(rows)
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "example",
        "delta",
        "e_tilde_xz",
        "e_tilde_ij",
        "e",
        "e_xz",
        "e_ij",
        "alpha_star",
        "noise_norm",
        "n",
        "k",
        "penalty",
        "seed",
        "repeats",
        "error",
    ])?;
    for r in rows {
        let e = &r.report;
        w.write_record([
            r.example.to_string(),
            sci(r.delta),
            sci(e.e_tilde_xz),
            sci(e.e_tilde_ij),
            sci(e.e),
            sci(e.e_xz),
            sci(e.e_ij),
            sci(r.alpha_star),
            sci(r.noise_norm),
            r.n.to_string(),
            r.k.to_string(),
            r.penalty.to_string(),
            r.seed.to_string(),
            r.repeats.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// How the sweep over `k` sets `alpha` relative to the oracle-best value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    AlphaStar,
    TenTimes,
    Tenth,
}

impl AlphaPolicy {
    pub const ALL: [AlphaPolicy; 3] = [
        AlphaPolicy::AlphaStar,
        AlphaPolicy::TenTimes,
        AlphaPolicy::Tenth,
    ];

    pub fn factor(self) -> f64 {
        match self {
            AlphaPolicy::AlphaStar => 1.0,
            AlphaPolicy::TenTimes => 10.0,
            AlphaPolicy::Tenth => 0.1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlphaPolicy::AlphaStar => "alpha_star",
            AlphaPolicy::TenTimes => "ten_times",
            AlphaPolicy::Tenth => "tenth",
        }
    }
}

impl std::str::FromStr for AlphaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlphaPolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown alpha policy '{s}'; valid: alpha_star, ten_times, tenth"
                ))
            })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSweepConfig {
    pub problem: ProblemName,
    pub delta: f64,
    pub ks: Vec<usize>,
    pub policies: Vec<AlphaPolicy>,
    pub settings: SolveSettings,
    pub repeats: usize,
    pub seed: u64,
}

/// Median `e_ij` at one rank and policy, next to the direct error `e` at
/// the same `alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct RankSweepRow {
    pub example: ProblemName,
    pub delta: f64,
    pub policy: AlphaPolicy,
    pub k: usize,
    pub alpha: f64,
    pub e_ij: f64,
    pub e: f64,
    pub seed: u64,
    pub repeats: usize,
}

/// Shape of one `e_ij(k)` curve.
#[derive(Clone, Debug, Serialize)]
pub struct CurveSummary {
    pub policy: AlphaPolicy,
    pub nonincreasing_to_plateau: bool,
    pub dip_rise_plateau: bool,
    /// Smallest `k` with `e_ij <= 1.1 e`.
    pub optimal_k: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankSweep {
    pub rows: Vec<RankSweepRow>,
    pub curves: Vec<CurveSummary>,
}

/// Tolerance used by the curve-shape detectors.
pub const SHAPE_TOL: f64 = 0.1;

/// Every value stays within `1 + tol` of the running minimum.
pub fn nonincreasing_to_plateau(e: &[f64], tol: f64) -> bool {
    let mut best = f64::INFINITY;
    e.iter().all(|&v| {
        let ok = v <= (1.0 + tol) * best;
        best = best.min(v);
        ok
    })
}

/// Drops below the first value, then settles on a level plateau at least
/// `1 + tol` above the dip. The plateau is the longest tail whose spread is
/// within `tol`, and it must hold at least two points.
pub fn dip_rise_plateau(e: &[f64], tol: f64) -> bool {
    if e.len() < 4 {
        return false;
    }
    let mut start = e.len() - 1;
    let (mut lo, mut hi) = (e[start], e[start]);
    while start > 0 {
        let v = e[start - 1];
        if v.max(hi) > (1.0 + tol) * v.min(lo) {
            break;
        }
        lo = lo.min(v);
        hi = hi.max(v);
        start -= 1;
    }
    if e.len() - start < 2 || start < 2 {
        return false;
    }
    let dip = e[..start].iter().copied().fold(f64::INFINITY, f64::min);
    dip <= (1.0 - tol) * e[0] && lo >= (1.0 + tol) * dip
}

/// Smallest `k` whose error is within 10% of the direct error.
pub fn optimal_k(ks: &[usize], e_ij: &[f64], e: &[f64]) -> Option<usize> {
    ks.iter()
        .zip(e_ij.iter().zip(e))
        .find(|(_, (eij, e))| **eij <= 1.1 * **e)
        .map(|(k, _)| *k)
}

pub fn run_rank_sweep(cfg: &RankSweepConfig) -> Result<RankSweep> {
    if cfg.repeats == 0 || cfg.ks.is_empty() || cfg.policies.is_empty() {
        return Err(Error::InvalidArgument(
            "rank sweep needs repeats >= 1, ranks and policies".into(),
        ));
    }
    let s = &cfg.settings;
    let ws = Workspace::new(cfg.problem, s.n, s.penalty)?;
    // [rep][k][policy] -> (alpha, e_ij, e)
    let per_rep = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let seeds = SeedSet::derive(cfg.seed, rep);
            let (b, _) = ws.noisy_data(cfg.delta, seeds.noise)?;
            let alpha_star = ws.select_alpha(s, &b, seeds.sketch)?.0.alpha_star;
            let directs = cfg
                .policies
                .iter()
                .map(|p| {
                    let alpha = alpha_star * p.factor();
                    Ok((alpha, dist(&ws.direct(&b, alpha)?, &ws.x_true)))
                })
                .collect::<Result<Vec<_>>>()?;
            cfg.ks
                .par_iter()
                .map(|&k| {
                    let f = ws.range_factors(&s.rsvd(k, seeds.sketch))?;
                    directs
                        .iter()
                        .map(|&(alpha, e)| {
                            Ok((alpha, dist(&ws.range_solve(&f, &b, alpha)?, &ws.x_true), e))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (pi, &policy) in cfg.policies.iter().enumerate() {
        let mut e_ijs = Vec::new();
        let mut es = Vec::new();
        for (ki, &k) in cfg.ks.iter().enumerate() {
            let pick = |f: fn(&(f64, f64, f64)) -> f64| {
                median(&mut per_rep.iter().map(|r| f(&r[ki][pi])).collect::<Vec<_>>())
            };
            let row = RankSweepRow {
                example: cfg.problem,
                delta: cfg.delta,
                policy,
                k,
                alpha: pick(|t| t.0),
                e_ij: pick(|t| t.1),
                e: pick(|t| t.2),
                seed: cfg.seed,
                repeats: cfg.repeats,
            };
            e_ijs.push(row.e_ij);
            es.push(row.e);
            rows.push(row);
        }
        curves.push(CurveSummary {
            policy,
            nonincreasing_to_plateau: nonincreasing_to_plateau(&e_ijs, SHAPE_TOL),
            dip_rise_plateau: dip_rise_plateau(&e_ijs, SHAPE_TOL),
            optimal_k: optimal_k(&cfg.ks, &e_ijs, &es),
        });
    }
    Ok(RankSweep { rows, curves })
}

pub fn write_rank_sweep_csv<W: Write>(sweep: &RankSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "example", "delta", "policy", "k", "alpha", "e_ij", "e", "seed", "repeats",
    ])?;
    for r in &sweep.rows {
        w.write_record([
            r.example.to_string(),
            sci(r.delta),
            r.policy.as_str().to_string(),
            r.k.to_string(),
            sci(r.alpha),
            sci(r.e_ij),
            sci(r.e),
            r.seed.to_string(),
            r.repeats.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Methods compared by the parameter sweep for one penalty.
fn tikhonov_family(standard: bool) -> [Method; 3] {
    if standard {
        [Method::TikhDirect, Method::TikhProj, Method::TikhRange]
    } else {
        [Method::GtikhDirect, Method::GtikhProj, Method::GtikhRange]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaSweepConfig {
    pub problem: ProblemName,
    pub delta: f64,
    pub settings: SolveSettings,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaSweepRow {
    pub example: ProblemName,
    pub delta: f64,
    pub method: Method,
    pub alpha: f64,
    pub error: f64,
    pub seeds: SeedSet,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaSweep {
    pub rows: Vec<AlphaSweepRow>,
    /// Oracle-best `alpha` of each method on the grid.
    pub best: Vec<(Method, AlphaSelection)>,
}

/// Reconstruction error of the direct, projected and range-preserving
/// solvers over the whole grid.
pub fn run_alpha_sweep(cfg: &AlphaSweepConfig) -> Result<AlphaSweep> {
    let s = &cfg.settings;
    let ws = Workspace::new(cfg.problem, s.n, s.penalty)?;
    let seeds = SeedSet::derive(cfg.seed, 0);
    let (b, _) = ws.noisy_data(cfg.delta, seeds.noise)?;
    let rcfg = s.rsvd(s.k, seeds.sketch);
    let fa = rsvd_auto(&ws.a, &rcfg)?;
    let fr = if ws.is_standard() {
        fa.clone()
    } else {
        ws.range_factors(&rcfg)?
    };
    let grid = match s.grid {
        Some(g) => g,
        None => AlphaGrid::for_spectral_norm(fa.sigma[0], s.grid_count)?,
    };
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for method in tikhonov_family(ws.is_standard()) {
        let solve = |alpha: f64| -> Result<Vec<f64>> {
            match method {
                Method::TikhDirect | Method::GtikhDirect => ws.direct(&b, alpha),
                Method::TikhProj | Method::GtikhProj => ws.projected_solve(&fa, &b, alpha),
                _ => ws.range_solve(&fr, &b, alpha),
            }
        };
        let sel = select_alpha(&grid, |alpha| Ok(dist(&solve(alpha)?, &ws.x_true)))?;
        for p in &sel.curve {
            rows.push(AlphaSweepRow {
                example: cfg.problem,
                delta: cfg.delta,
                method,
                alpha: p.alpha,
                error: p.error.unwrap_or(f64::NAN),
                seeds,
            });
        }
        best.push((method, sel));
    }
    Ok(AlphaSweep { rows, best })
}

pub fn write_alpha_sweep_csv<W: Write>(sweep: &AlphaSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "example",
        "delta",
        "method",
        "alpha",
        "error",
        "noise_seed",
        "sketch_seed",
    ])?;
    for r in &sweep.rows {
        w.write_record([
            r.example.to_string(),
            sci(r.delta),
            r.method.to_string(),
            sci(r.alpha),
            sci(r.error),
            r.seeds.noise.to_string(),
            r.seeds.sketch.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Solver families timed by [`run_bench`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Direct,
    Projected,
    Range,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [
        BenchMethod::Direct,
        BenchMethod::Projected,
        BenchMethod::Range,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Direct => "direct",
            BenchMethod::Projected => "projected",
            BenchMethod::Range => "range",
        }
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown bench method '{s}'; valid: direct, projected, range"
                ))
            })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub problem: ProblemName,
    pub dims: Vec<usize>,
    pub methods: Vec<BenchMethod>,
    pub ks: Vec<usize>,
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    /// Minimum timed runs per cell; the fastest counts.
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            problem: ProblemName::Deriv2,
            dims: vec![250, 500, 1000, 2000],
            methods: BenchMethod::ALL.to_vec(),
            ks: vec![20, 30],
            p: RsvdConfig::DEFAULT_OVERSAMPLING,
            q: RsvdConfig::DEFAULT_POWER,
            delta: 0.01,
            trials: 3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub method: BenchMethod,
    /// `None` for the direct solver.
    pub k: Option<usize>,
    pub seconds: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchSlope {
    pub method: BenchMethod,
    pub k: Option<usize>,
    /// Exponent of the least-squares fit `t ~ n^slope`.
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slopes: Vec<BenchSlope>,
}

impl BenchReport {
    pub fn seconds(&self, n: usize, method: BenchMethod, k: Option<usize>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.method == method && r.k == k)
            .map(|r| r.seconds)
    }

    pub fn slope(&self, method: BenchMethod, k: Option<usize>) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.method == method && s.k == k)
            .map(|s| s.slope)
    }
}

/// Minimum over at least `trials` runs. Cheap cells keep sampling until
/// about 0.1 s has been spent, which steadies the minimum.
fn best_of<T>(trials: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut best = f64::INFINITY;
    let start = Instant::now();
    let mut runs = 0;
    while runs < trials || (start.elapsed().as_secs_f64() < 0.1 && runs < 200) {
        let t = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(t.elapsed().as_secs_f64());
        runs += 1;
    }
    Ok(best)
}

/// Best-of-`trials` wall time of one Tikhonov solve per cell. Randomized
/// cells include the factorization. Cells run one after another.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.trials == 0 || cfg.dims.is_empty() {
        return Err(Error::InvalidArgument(
            "bench needs trials >= 1 and at least one dimension".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in &cfg.dims {
        let (a, _, b_exact) = generate(cfg.problem, n)?;
        let (b, _) = crate::problems::add_noise(&b_exact, &NoiseSpec::new(cfg.delta, cfg.seed))?;
        let alpha = 1e-6 * crate::linalg::spectral_norm(&a)?.powi(2);
        for &method in &cfg.methods {
            let ks: Vec<Option<usize>> = match method {
                BenchMethod::Direct => vec![None],
                _ => cfg.ks.iter().map(|&k| Some(k)).collect(),
            };
            for k in ks {
                let seconds = match (method, k) {
                    (BenchMethod::Direct, _) => {
                        best_of(cfg.trials, || tikhonov_solve_direct(&a, &b, alpha))?
                    }
                    (m, Some(k)) => {
                        let rc = RsvdConfig::new(k, cfg.seed)
                            .with_oversampling(cfg.p)
                            .with_power(cfg.q);
                        best_of(cfg.trials, || {
                            let f = rsvd_auto(&a, &rc)?;
                            if m == BenchMethod::Projected {
                                rsvd_tikhonov_projected(&f, &b, alpha)
                            } else {
                                rsvd_tikhonov_range(&a, &f, &b, alpha)
                            }
                        })?
                    }
                    _ => unreachable!("randomized cells always carry a rank"),
                };
                rows.push(BenchRow {
                    n,
                    method,
                    k,
                    seconds,
                    seed: cfg.seed,
                });
            }
        }
    }
    let mut groups: BTreeMap<(BenchMethod, Option<usize>), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.method, r.k))
            .or_default()
            .push(((r.n as f64).ln(), r.seconds.ln()));
    }
    let slopes = groups
        .into_iter()
        .filter(|(_, pts)| pts.len() >= 2)
        .map(|((method, k), pts)| BenchSlope {
            method,
            k,
            slope: linear_fit(&pts).1,
        })
        .collect();
    Ok(BenchReport { rows, slopes })
}

pub fn write_bench_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "method", "k", "seconds", "seed"])?;
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            r.method.as_str().to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            sci(r.seconds),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub bounds: Vec<BoundId>,
    pub seeds: usize,
    pub problem: ProblemName,
    pub n: usize,
    pub delta: f64,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    /// `alpha` as a multiple of `||A||^2`.
    pub alpha_rel: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            bounds: BoundId::ALL.to_vec(),
            seeds: 50,
            problem: ProblemName::Shaw,
            n: 200,
            delta: 0.01,
            k: 8,
            p: RsvdConfig::DEFAULT_OVERSAMPLING,
            q: 1,
            alpha_rel: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundSummary {
    pub bound: BoundId,
    pub runs: usize,
    pub hypotheses_met: usize,
    pub passed: usize,
    pub failed: usize,
    /// `passed / hypotheses_met`, or `None` when no run qualified.
    pub pass_rate: Option<f64>,
    /// Smallest `rhs - lhs` among qualifying runs.
    pub worst_slack: Option<f64>,
    pub failing_seeds: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub summaries: Vec<BoundSummary>,
    pub checks: Vec<BoundCheck>,
}

/// Square lower-bidiagonal difference matrix: injective, so that the
/// penalized bounds apply.
pub fn injective_difference(m: usize) -> Result<SmoothingOperator> {
    SmoothingOperator::custom(DenseMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else if i == j + 1 {
            -1.0
        } else {
            0.0
        }
    }))
}

/// Seeded symmetric PSD pair with a common range of dimension `m / 2`.
fn psd_pair(m: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let r = (m / 2).max(1);
    let g = gaussian_matrix(m, r, seed);
    let e = gaussian_matrix(r, r, seed ^ 0xA5A5);
    let mut inner = e.add(&e.transpose()).scaled(0.01);
    inner.add_to_diagonal(1.0);
    // I + 0.01 (E + E^T) stays positive definite for these sizes.
    (g.matmul_tr(&g), g.matmul(&inner).matmul_tr(&g))
}

struct VerifyContext {
    a: DenseMatrix,
    svd: crate::linalg::SvdTriple,
    bundle: WeightedPinv,
    b_svd: crate::linalg::SvdTriple,
}

fn verify_one(
    cfg: &VerifyConfig,
    ctx: &VerifyContext,
    id: BoundId,
    seed: u64,
) -> Result<BoundCheck> {
    let noise = NoiseSpec::new(cfg.delta, seed);
    let rc = RsvdConfig::new(cfg.k, seed)
        .with_oversampling(cfg.p)
        .with_power(cfg.q);
    let alpha = cfg.alpha_rel * ctx.svd.sigma[0].powi(2);
    let base = BoundInputs {
        a: Some(&ctx.a),
        svd: Some(&ctx.svd),
        alpha: Some(alpha),
        seed,
        ..Default::default()
    };
    match id {
        BoundId::PinvPerturb => {
            let (x, y) = psd_pair(cfg.n, seed);
            check_bound(
                id,
                &BoundInputs {
                    a: Some(&x),
                    other: Some(&y),
                    svd: None,
                    ..base
                },
            )
        }
        BoundId::Weyl => {
            let e =
                gaussian_matrix(ctx.a.rows(), ctx.a.cols(), seed).scaled(1e-3 * ctx.svd.sigma[0]);
            check_bound(
                id,
                &BoundInputs {
                    other: Some(&e),
                    ..base
                },
            )
        }
        BoundId::GenTikh => {
            let prob = make_sourcewise(&ctx.a, Some(&ctx.bundle), seed, &noise)?;
            let b_op = ctx.bundle.operator(&ctx.a);
            let approx = rsvd_operator(&b_op, &rc)?;
            let alpha = cfg.alpha_rel * ctx.b_svd.sigma[0].powi(2);
            check_bound(
                id,
                &BoundInputs {
                    svd: Some(&ctx.b_svd),
                    approx: Some(&approx),
                    problem: Some(&prob),
                    bundle: Some(&ctx.bundle),
                    alpha: Some(alpha),
                    ..base
                },
            )
        }
        _ => {
            let prob = make_sourcewise(&ctx.a, None, seed, &noise)?;
            let approx = rsvd_auto(&ctx.a, &rc)?;
            check_bound(
                id,
                &BoundInputs {
                    approx: Some(&approx),
                    problem: Some(&prob),
                    ..base
                },
            )
        }
    }
}

/// Evaluates each bound on `cfg.seeds` seeded source-condition problems
/// built from the named operator.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.seeds == 0 || cfg.bounds.is_empty() {
        return Err(Error::InvalidArgument(
            "verify needs seeds >= 1 and at least one bound".into(),
        ));
    }
    let (a, _, _) = generate(cfg.problem, cfg.n)?;
    let svd = svd_full(&a)?;
    let bundle = WeightedPinv::new(&a, &injective_difference(cfg.n)?)?;
    let b_svd = svd_full(&bundle.operator(&a).materialize())?;
    let ctx = VerifyContext {
        a,
        svd,
        bundle,
        b_svd,
    };
    let jobs: Vec<(BoundId, u64)> = cfg
        .bounds
        .iter()
        .flat_map(|&id| (0..cfg.seeds).map(move |s| (id, cfg.seed.wrapping_add(s as u64))))
        .collect();
    let checks = jobs
        .par_iter()
        .map(|&(id, seed)| verify_one(cfg, &ctx, id, seed))
        .collect::<Result<Vec<_>>>()?;
    let summaries = cfg
        .bounds
        .iter()
        .map(|&bound| {
            let mine: Vec<&BoundCheck> = checks.iter().filter(|c| c.bound == bound).collect();
            let met: Vec<&&BoundCheck> = mine.iter().filter(|c| c.hypotheses_met).collect();
            let passed = met.iter().filter(|c| c.holds()).count();
            BoundSummary {
                bound,
                runs: mine.len(),
                hypotheses_met: met.len(),
                passed,
                failed: met.len() - passed,
                pass_rate: (!met.is_empty()).then(|| passed as f64 / met.len() as f64),
                worst_slack: met.iter().map(|c| c.slack()).reduce(f64::min),
                failing_seeds: met.iter().filter(|c| !c.holds()).map(|c| c.seed).collect(),
            }
        })
        .collect();
    Ok(VerifyReport {
        config: cfg.clone(),
        summaries,
        checks,
    })
}

/// One solver run on one problem instance.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub example: String,
    pub n: usize,
    pub delta: f64,
    pub method: Method,
    pub penalty: PenaltyKind,
    pub k: Option<usize>,
    pub p: usize,
    pub q: usize,
    pub alpha: Option<f64>,
    /// `||x - x_true||`
    pub error: f64,
    /// `||x - x_true|| / ||x_true||`
    pub relative_error: f64,
    /// Includes the randomized factorization where there is one.
    pub wall_time_seconds: f64,
    pub noise_norm: f64,
    pub seeds: SeedSet,
}

#[derive(Clone, Debug)]
pub struct SolveRun {
    pub record: RunRecord,
    pub x: Vec<f64>,
}

/// How [`run_solve`] chooses `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AlphaChoice {
    Fixed(f64),
    /// Oracle-best on the grid, measured with the range-preserving solver.
    Oracle(Option<AlphaGrid>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    pub methods: Vec<Method>,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub penalty: PenaltyKind,
    pub alpha: AlphaChoice,
    pub sketch_seed: u64,
}

/// Runs every requested method on `problem`.
pub fn run_solve(problem: &InverseProblem, cfg: &SolveConfig) -> Result<Vec<SolveRun>> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one method is required".into(),
        ));
    }
    let a = &problem.a;
    let b = &problem.b;
    let pen = SmoothingOperator::from_kind(cfg.penalty, a.cols())?;
    let bundle = WeightedPinv::new(a, &pen)?;
    let rc = RsvdConfig::new(cfg.k, cfg.sketch_seed)
        .with_oversampling(cfg.p)
        .with_power(cfg.q);
    let alpha = match cfg.alpha {
        AlphaChoice::Fixed(a) => a,
        AlphaChoice::Oracle(grid) => {
            let settings = SolveSettings {
                n: a.cols(),
                k: cfg.k,
                p: cfg.p,
                q: cfg.q,
                penalty: cfg.penalty,
                grid,
                ..Default::default()
            };
            let rank = SELECTION_RANK.min(a.rows().min(a.cols()) - cfg.p);
            let standard = cfg.penalty == PenaltyKind::Identity;
            let sel_cfg = settings.rsvd(rank, cfg.sketch_seed);
            let f = if standard {
                rsvd_auto(a, &sel_cfg)?
            } else {
                rsvd_operator(&bundle.operator(a), &sel_cfg)?
            };
            let grid = match grid {
                Some(g) => g,
                None => AlphaGrid::for_spectral_norm(f.sigma[0], AlphaGrid::DEFAULT_COUNT)?,
            };
            select_alpha(&grid, |alpha| {
                let x = if standard {
                    rsvd_tikhonov_range(a, &f, b, alpha)?.x
                } else {
                    rsvd_gen_tikhonov_range(a, &bundle, &f, b, alpha)?.x
                };
                Ok(dist(&x, &problem.x_true))
            })?
            .alpha_star
        }
    };
    let x_norm = norm2(&problem.x_true);
    cfg.methods
        .iter()
        .map(|&method| {
            let t = Instant::now();
            let x = match method {
                Method::Tsvd => crate::solvers::tsvd_solve(&svd_full(a)?, cfg.k, b)?.x,
                Method::TrsvdProj => {
                    crate::solvers::trsvd_solve_projected(&rsvd_auto(a, &rc)?, b)?.x
                }
                Method::TrsvdRange => {
                    crate::solvers::trsvd_solve_range(a, &rsvd_auto(a, &rc)?, b)?.x
                }
                Method::TikhDirect => tikhonov_solve_direct(a, b, alpha)?.x,
                Method::TikhProj => rsvd_tikhonov_projected(&rsvd_auto(a, &rc)?, b, alpha)?.x,
                Method::TikhRange => rsvd_tikhonov_range(a, &rsvd_auto(a, &rc)?, b, alpha)?.x,
                Method::GtikhDirect => gen_tikhonov_direct(a, &bundle, b, alpha)?.x,
                Method::GtikhProj => {
                    rsvd_gen_tikhonov_projected(&rsvd_auto(a, &rc)?, &bundle, b, alpha)?.x
                }
                Method::GtikhRange => {
                    let f = rsvd_operator(&bundle.operator(a), &rc)?;
                    rsvd_gen_tikhonov_range(a, &bundle, &f, b, alpha)?.x
                }
                Method::Dual => {
                    let f = rsvd_operator(&bundle.operator(a), &rc)?;
                    crate::dual::dual_solve(a, &bundle, &f, b, alpha)?.primal.x
                }
            };
            let wall = t.elapsed().as_secs_f64();
            let error = dist(&x, &problem.x_true);
            Ok(SolveRun {
                record: RunRecord {
                    example: problem.name.clone(),
                    n: a.cols(),
                    delta: problem.delta_rel,
                    method,
                    penalty: cfg.penalty,
                    k: (method != Method::TikhDirect && method != Method::GtikhDirect)
                        .then_some(cfg.k),
                    p: cfg.p,
                    q: cfg.q,
                    alpha: method.uses_alpha().then_some(alpha),
                    error,
                    relative_error: if x_norm > 0.0 {
                        error / x_norm
                    } else {
                        f64::NAN
                    },
                    wall_time_seconds: wall,
                    noise_norm: problem.noise_norm,
                    seeds: SeedSet {
                        noise: problem.seed,
                        sketch: cfg.sketch_seed,
                    },
                },
                x,
            })
        })
        .collect()
}

pub fn write_run_records_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "example",
        "n",
        "delta",
        "method",
        "penalty",
        "k",
        "p",
        "q",
        "alpha",
        "error",
        "relative_error",
        "wall_time_seconds",
        "noise_norm",
        "noise_seed",
        "sketch_seed",
    ])?;
    for r in records {
        w.write_record([
            r.example.clone(),
            r.n.to_string(),
            sci(r.delta),
            r.method.to_string(),
            r.penalty.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.p.to_string(),
            r.q.to_string(),
            r.alpha.map(sci).unwrap_or_default(),
            sci(r.error),
            sci(r.relative_error),
            sci(r.wall_time_seconds),
            sci(r.noise_norm),
            r.seeds.noise.to_string(),
            r.seeds.sketch.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
