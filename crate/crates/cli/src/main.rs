//! Command-line front end for generating problems, running solvers, sweeps,
//! timing runs and bound verification.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rangereg::harness::{
    run_alpha_sweep, run_bench, run_rank_sweep, run_solve, run_table, run_verify, with_workers,
    write_alpha_sweep_csv, write_bench_csv, write_rank_sweep_csv, write_run_records_csv,
    write_table_csv, AlphaChoice, AlphaPolicy, AlphaSweepConfig, BenchConfig, BenchMethod,
    RankSweepConfig, SolveConfig, SolveSettings, TableConfig, VerifyConfig,
};
use rangereg::{
    AlphaGrid, BoundId, Error, InverseProblem, Method, NoiseSpec, PenaltyKind, ProblemName,
    RsvdConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "rangereg",
    version,
    about = "Randomized SVD regularization for linear inverse problems"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test problem as Matrix Market files plus JSON metadata.
    Gen(GenArgs),
    /// Solve one problem with one or more methods.
    Solve(SolveArgs),
    /// Median reconstruction errors per problem and noise level.
    Table(TableArgs),
    /// Error against the regularization parameter.
    SweepAlpha(SweepAlphaArgs),
    /// Error against the sketch rank.
    SweepRank(SweepRankArgs),
    /// Wall-clock scaling of direct and randomized solvers.
    Bench(BenchArgs),
    /// Check the error bounds on seeded source-condition problems.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct Sketch {
    /// Target rank.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Oversampling.
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_OVERSAMPLING)]
    p: usize,
    /// Power iterations.
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_POWER)]
    q: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    problem: ProblemName,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Relative noise level.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, required_unless_present = "from")]
    problem: Option<ProblemName>,
    /// Load a problem directory written by `gen` instead of generating one.
    #[arg(long, conflicts_with_all = ["problem", "delta"])]
    from: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Noise seed; the sketch seed is derived from it unless given.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    sketch_seed: Option<u64>,
    #[command(flatten)]
    sketch: Sketch,
    /// Fixed regularization parameter.
    #[arg(long, conflicts_with = "alpha_grid")]
    alpha: Option<f64>,
    /// Grid `lo:hi:count` for the oracle-best parameter.
    #[arg(long, value_parser = parse_grid)]
    alpha_grid: Option<AlphaGrid>,
    #[arg(long, default_value = "none")]
    penalty: PenaltyKind,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "tikh_range")]
    method: Vec<Method>,
    /// Also write every solution vector as a Matrix Market file here.
    #[arg(long)]
    solutions: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct TableArgs {
    /// Comma-separated problems; all seven by default.
    #[arg(long, value_delimiter = ',')]
    problem: Vec<ProblemName>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05])]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    sketch: Sketch,
    #[arg(long, default_value = "none")]
    penalty: PenaltyKind,
    #[arg(long, value_parser = parse_grid)]
    alpha_grid: Option<AlphaGrid>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepAlphaArgs {
    #[arg(long)]
    problem: ProblemName,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    sketch: Sketch,
    #[arg(long, default_value = "none")]
    penalty: PenaltyKind,
    #[arg(long, value_parser = parse_grid)]
    alpha_grid: Option<AlphaGrid>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepRankArgs {
    #[arg(long)]
    problem: ProblemName,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Comma-separated ranks; 2, 4, ..., 100 by default.
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
    /// Comma-separated parameter policies: alpha_star, ten_times, tenth.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "alpha_star,ten_times,tenth"
    )]
    policy: Vec<AlphaPolicy>,
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_POWER)]
    q: usize,
    #[arg(long, default_value = "none")]
    penalty: PenaltyKind,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "deriv2")]
    problem: ProblemName,
    #[arg(long = "n", value_delimiter = ',', default_values_t = [250, 500, 1000, 2000])]
    dims: Vec<usize>,
    /// Comma-separated: direct, projected, range.
    #[arg(long, value_delimiter = ',', default_value = "direct,projected,range")]
    method: Vec<BenchMethod>,
    #[arg(long, value_delimiter = ',', default_values_t = [20, 30])]
    k: Vec<usize>,
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_POWER)]
    q: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Minimum timed runs per cell.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated bound names; all of them by default.
    #[arg(long, alias = "bound", value_delimiter = ',')]
    theorem: Vec<BoundId>,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value = "shaw")]
    problem: ProblemName,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = RsvdConfig::DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Regularization parameter as a multiple of the squared operator norm.
    #[arg(long, default_value_t = 1e-3)]
    alpha_rel: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `json` for the summary report, `csv` for one row per check.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_grid(s: &str) -> Result<AlphaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(format!("expected lo:hi:count, got '{s}'"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("bad lower end: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad upper end: {e}"))?;
    let count: usize = count.parse().map_err(|e| format!("bad count: {e}"))?;
    AlphaGrid::new(lo, hi, count).map_err(|e| e.to_string())
}

/// Failure reported as JSON on stderr.
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => "io",
            Error::UnknownProblem { .. } => "unknown_problem",
            Error::InvalidArgument(_) | Error::InvalidConfig(_) => "invalid_argument",
            Error::Shape { .. } | Error::DataLength { .. } => "shape",
            _ => "numerical",
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            kind: "serialization",
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn sink(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn incomplete(rows: usize) -> Failure {
    Failure {
        kind: "incomplete",
        message: format!("{rows} requested row(s) failed; see the error column"),
    }
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let p = InverseProblem::generate(a.problem, a.n, &NoiseSpec::new(a.delta, a.seed))?;
    p.export(&a.out)?;
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    let problem = match (&a.from, a.problem) {
        (Some(dir), _) => InverseProblem::import(dir)?,
        (None, Some(name)) => {
            InverseProblem::generate(name, a.n, &NoiseSpec::new(a.delta, a.seed))?
        }
        (None, None) => unreachable!("clap requires --problem or --from"),
    };
    let cfg = SolveConfig {
        methods: a.method,
        k: a.sketch.k,
        p: a.sketch.p,
        q: a.sketch.q,
        penalty: a.penalty,
        alpha: match a.alpha {
            Some(alpha) => AlphaChoice::Fixed(alpha),
            None => AlphaChoice::Oracle(a.alpha_grid),
        },
        sketch_seed: a
            .sketch_seed
            .unwrap_or_else(|| rangereg::harness::SeedSet::derive(a.seed, 0).sketch),
    };
    let runs = run_solve(&problem, &cfg)?;
    if let Some(dir) = &a.solutions {
        std::fs::create_dir_all(dir)?;
        for r in &runs {
            let path = dir.join(format!("x_{}.mtx", r.record.method));
            rangereg::linalg::mtx::write_vector(&path, &r.x)?;
        }
    }
    let records: Vec<_> = runs.into_iter().map(|r| r.record).collect();
    match a.output.format {
        Format::Csv => write_run_records_csv(&records, sink(a.output.out.as_deref())?)?,
        Format::Json => write_json(&records, a.output.out.as_deref())?,
    }
    Ok(())
}

fn settings(
    n: usize,
    sketch: &Sketch,
    penalty: PenaltyKind,
    grid: Option<AlphaGrid>,
) -> SolveSettings {
    SolveSettings {
        n,
        k: sketch.k,
        p: sketch.p,
        q: sketch.q,
        penalty,
        grid,
        ..Default::default()
    }
}

fn cmd_table(a: TableArgs) -> CliResult {
    let problems = if a.problem.is_empty() {
        ProblemName::ALL.to_vec()
    } else {
        a.problem
    };
    let rows = run_table(&TableConfig {
        problems,
        deltas: a.delta,
        settings: settings(a.n, &a.sketch, a.penalty, a.alpha_grid),
        repeats: a.repeats,
        seed: a.seed,
    })?;
    match a.output.format {
        Format::Csv => write_table_csv(&rows, sink(a.output.out.as_deref())?)?,
        Format::Json => write_json(&rows, a.output.out.as_deref())?,
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(incomplete(failed));
    }
    Ok(())
}

fn cmd_sweep_alpha(a: SweepAlphaArgs) -> CliResult {
    let sweep = run_alpha_sweep(&AlphaSweepConfig {
        problem: a.problem,
        delta: a.delta,
        settings: settings(a.n, &a.sketch, a.penalty, a.alpha_grid),
        seed: a.seed,
    })?;
    match a.output.format {
        Format::Csv => write_alpha_sweep_csv(&sweep, sink(a.output.out.as_deref())?)?,
        Format::Json => write_json(&sweep, a.output.out.as_deref())?,
    }
    Ok(())
}

fn cmd_sweep_rank(a: SweepRankArgs) -> CliResult {
    let ks = if a.ks.is_empty() {
        (1..=50).map(|i| 2 * i).collect()
    } else {
        a.ks
    };
    let sweep = run_rank_sweep(&RankSweepConfig {
        problem: a.problem,
        delta: a.delta,
        ks,
        policies: a.policy,
        settings: SolveSettings {
            n: a.n,
            p: a.p,
            q: a.q,
            penalty: a.penalty,
            ..Default::default()
        },
        repeats: a.repeats,
        seed: a.seed,
    })?;
    match a.output.format {
        Format::Csv => {
            write_rank_sweep_csv(&sweep, sink(a.output.out.as_deref())?)?;
            for c in &sweep.curves {
                eprintln!("{}", serde_json::to_string(c)?);
            }
        }
        Format::Json => write_json(&sweep, a.output.out.as_deref())?,
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let report = run_bench(&BenchConfig {
        problem: a.problem,
        dims: a.dims,
        methods: a.method,
        ks: a.k,
        p: a.p,
        q: a.q,
        delta: a.delta,
        trials: a.trials,
        seed: a.seed,
    })?;
    match a.output.format {
        Format::Csv => {
            write_bench_csv(&report, sink(a.output.out.as_deref())?)?;
            for s in &report.slopes {
                eprintln!("{}", serde_json::to_string(s)?);
            }
        }
        Format::Json => write_json(&report, a.output.out.as_deref())?,
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let bounds = if a.theorem.is_empty() {
        BoundId::ALL.to_vec()
    } else {
        a.theorem
    };
    let report = run_verify(&VerifyConfig {
        bounds,
        seeds: a.seeds,
        problem: a.problem,
        n: a.n,
        delta: a.delta,
        k: a.k,
        p: a.p,
        q: a.q,
        alpha_rel: a.alpha_rel,
        seed: a.seed,
    })?;
    match a.format {
        Format::Json => write_json(
            &json!({ "config": report.config, "summaries": report.summaries }),
            a.out.as_deref(),
        )?,
        Format::Csv => {
            let mut w = sink(a.out.as_deref())?;
            writeln!(w, "bound,seed,hypotheses_met,lhs,rhs,holds")?;
            for c in &report.checks {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    c.bound,
                    c.seed,
                    c.hypotheses_met,
                    rangereg::harness::sci(c.lhs),
                    rangereg::harness::sci(c.rhs),
                    c.holds()
                )?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let workers = cli.workers;
    with_workers(workers, move || match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Table(a) => cmd_table(a),
        Command::SweepAlpha(a) => cmd_sweep_alpha(a),
        Command::SweepRank(a) => cmd_sweep_rank(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    })?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.to_string();
            let detail = detail
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!(
                "{}",
                json!({ "error": "usage", "message": detail, "kind": message })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::FAILURE
        }
    }
}
