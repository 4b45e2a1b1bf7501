use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rosen::bv::{ly_monte_carlo, LyConstants, LyTrial, Realization};
use rosen::clt::{clt_experiment, condition_h_check, ConditionH, CostFn, InvariantSampler};
use rosen::export::{
    clt_histogram, write_density_csv, write_histogram_csv, write_json, write_samples_csv,
    HistogramRow,
};
use rosen::mixing::{growth_factor_check, iterate_until_full, GrowthReport, MixingRun};
use rosen::transfer::{
    invariant_density, spectral_gap, tail_bound, InvariantDensity, UlamOperator,
};
use rosen::{Digit, Error, RosenParams};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "rosen",
    version,
    about = "Rosen continued fractions: densities, mixing and CLT experiments"
)]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunConfig {
    /// Family index q >= 3.
    #[arg(long, global = true, default_value_t = 3)]
    q: u32,
    /// Ulam bins.
    #[arg(long, global = true, default_value_t = 4096)]
    bins: usize,
    /// Digit cap for literal branch sums.
    #[arg(long, global = true, default_value_t = 10_000)]
    a_max: u64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for output files. Without it the main result goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Digits of the expansion of x.
    Expand {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Invariant density and second-eigenvalue estimate.
    Density,
    /// Lasota-Yorke inequality on random staircases.
    Ly {
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Evaluate H^k f on this many grid nodes instead of the Ulam matrix.
        #[arg(long)]
        grid_nodes: Option<usize>,
        #[arg(long, default_value_t = 12)]
        max_pieces: usize,
    },
    /// Iterate [c, d] until it covers the interval.
    Mixing {
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, allow_negative_numbers = true)]
        d: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Standardized Birkhoff sums against the normal law.
    Clt {
        /// `min:K` (min(a, K)), `const:C`, `indicator:A` or `table:v1,v2,...`.
        #[arg(long, default_value = "min:5")]
        cost: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. }
            | Error::Deflation(_)
            | Error::DegenerateVariance { .. } => EXIT_NUMERICAL,
            Error::NotMixed { .. } => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn parse_cost(spec: &str) -> Result<CostFn, Failure> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("cost `{spec}`: expected KIND:ARG")))?;
    let bad = |what: &str| usage(format!("cost `{spec}`: {what}"));
    match kind {
        "min" => match arg.parse::<u64>() {
            Ok(k) if k >= 1 => Ok(CostFn::digit_min(k)),
            _ => Err(bad("cap must be a positive integer")),
        },
        "const" => arg
            .parse()
            .map(CostFn::constant)
            .map_err(|_| bad("not a number")),
        "indicator" => match arg.parse::<u64>() {
            Ok(a) if a >= 1 => Ok(CostFn::digit_indicator(a)),
            _ => Err(bad("digit must be a positive integer")),
        },
        "table" => {
            let values = arg
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("values must be numbers"))?;
            Ok(CostFn::digit_table(values)?)
        }
        _ => Err(bad("unknown kind")),
    }
}

/// Where results go: files under `--out`, or stdout.
struct Sink<'a> {
    config: &'a RunConfig,
}

impl Sink<'_> {
    fn file(&self, name: &str) -> Result<Option<BufWriter<File>>, Failure> {
        match &self.config.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(BufWriter::new(File::create(dir.join(name))?)))
            }
            None => Ok(None),
        }
    }

    fn json<T: Serialize>(&self, name: &str, body: &T) -> CmdResult {
        if let Some(mut f) = self.file(name)? {
            write_json(&mut f, body)?;
            f.flush()?;
        }
        Ok(())
    }

    /// Writes the primary result to stdout when there is no `--out`.
    fn stdout(
        &self,
        csv: impl FnOnce(&mut dyn Write) -> rosen::Result<()>,
        json: &impl Serialize,
    ) -> CmdResult {
        if self.config.out.is_some() {
            return Ok(());
        }
        let mut out = io::stdout().lock();
        match self.config.format {
            Format::Csv => csv(&mut out)?,
            Format::Json => write_json(&mut out, json)?,
        }
        Ok(())
    }

    fn written(&self, names: &[&str]) {
        if let Some(dir) = &self.config.out {
            for name in names {
                eprintln!("wrote {}", Path::new(dir).join(name).display());
            }
        }
    }
}

#[derive(Serialize)]
struct ExpandReport {
    q: u32,
    x: f64,
    digits: Vec<Digit>,
    reconstruction: f64,
    error: f64,
}

fn cmd_expand(config: &RunConfig, p: RosenParams, x: f64, n: usize) -> CmdResult {
    let digits = p.expand(x, n)?;
    let reconstruction = p.evaluate_cf(&digits);
    let report = ExpandReport {
        q: p.q(),
        x,
        error: (x - reconstruction).abs(),
        reconstruction,
        digits,
    };
    let sink = Sink { config };
    let csv = |out: &mut dyn Write| -> rosen::Result<()> {
        writeln!(out, "index,sign,a")?;
        for (i, d) in report.digits.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, d.sign.as_f64() as i8, d.a)?;
        }
        Ok(())
    };
    if let Some(mut f) = sink.file("expand.csv")? {
        csv(&mut f)?;
        f.flush()?;
    }
    sink.json("expand.json", &report)?;
    sink.stdout(csv, &report)?;
    if config.format == Format::Csv || config.out.is_some() {
        eprintln!("reconstruction error {:e}", report.error);
    }
    sink.written(&["expand.csv", "expand.json"]);
    Ok(())
}

fn ulam(p: RosenParams, bins: usize) -> Result<(UlamOperator, InvariantDensity), Failure> {
    let op = UlamOperator::new(p, bins)?;
    let density = invariant_density(&op)?;
    Ok((op, density))
}

#[derive(Serialize)]
struct DensityReport {
    #[serde(flatten)]
    spectral: rosen::transfer::SpectralReport,
    a_max: u64,
    /// Bound on the omitted digits when `H f_1` is summed literally up to `a_max`.
    literal_tail_bound: f64,
}

fn cmd_density(config: &RunConfig, p: RosenParams) -> CmdResult {
    let (op, density) = ulam(p, config.bins)?;
    let spectral = spectral_gap(&op, &density)?;
    let sup = density.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = DensityReport {
        spectral,
        a_max: config.a_max,
        literal_tail_bound: tail_bound(&p, sup, config.a_max),
    };
    let sink = Sink { config };
    if let Some(mut f) = sink.file("density.csv")? {
        write_density_csv(&mut f, &op, &density)?;
        f.flush()?;
    }
    sink.json("spectral.json", &report)?;
    sink.stdout(|out| write_density_csv(out, &op, &density), &report)?;
    sink.written(&["density.csv", "spectral.json"]);
    Ok(())
}

#[derive(Serialize)]
struct LyReport {
    constants: LyConstants,
    realization: String,
    trials: usize,
    violations: usize,
    min_margin: f64,
    results: Vec<LyTrial>,
}

fn cmd_ly(
    config: &RunConfig,
    p: RosenParams,
    trials: u64,
    grid_nodes: Option<usize>,
    max_pieces: usize,
) -> CmdResult {
    let op;
    let (realization, label) = match grid_nodes {
        Some(nodes) => (Realization::Grid { nodes }, format!("grid-{nodes}")),
        None => {
            op = UlamOperator::new(p, config.bins)?;
            (Realization::Ulam(&op), format!("ulam-{}", config.bins))
        }
    };
    let (constants, results) =
        ly_monte_carlo(&p, realization, trials, max_pieces.max(1), config.seed);
    let violations = results.iter().filter(|t| !t.holds).count();
    let report = LyReport {
        constants,
        realization: label,
        trials: results.len(),
        violations,
        min_margin: results
            .iter()
            .map(|t| t.margin)
            .fold(f64::INFINITY, f64::min),
        results,
    };
    let sink = Sink { config };
    sink.json("ly.json", &report)?;
    let csv = |out: &mut dyn Write| -> rosen::Result<()> {
        writeln!(out, "trial,var_f,lhs,rhs,budget,margin,holds")?;
        for (i, t) in report.results.iter().enumerate() {
            writeln!(
                out,
                "{i},{},{},{},{},{},{}",
                t.var_f, t.lhs, t.rhs, t.budget, t.margin, t.holds
            )?;
        }
        Ok(())
    };
    sink.stdout(csv, &report)?;
    sink.written(&["ly.json"]);
    if violations > 0 {
        return Err(Failure {
            code: EXIT_VIOLATION,
            message: format!("{violations} of {trials} trials violate the Lasota-Yorke bound"),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct MixingReport {
    #[serde(flatten)]
    run: MixingRun,
    growth: GrowthReport,
}

fn cmd_mixing(config: &RunConfig, p: RosenParams, c: f64, d: f64, max_iter: usize) -> CmdResult {
    if !(c < d) {
        return Err(usage(format!("need c < d, got [{c}, {d}]")));
    }
    let sink = Sink { config };
    let run = match iterate_until_full(&p, c, d, max_iter) {
        Ok(run) => run,
        Err(Error::NotMixed {
            trace,
            max_iter,
            last_measure,
        }) => {
            sink.json("mixing.json", &trace)?;
            return Err(Error::NotMixed {
                max_iter,
                last_measure,
                trace,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    let growth = growth_factor_check(&p, &run.trace);
    let monotone = growth.steps.iter().all(|s| s.monotone);
    let report = MixingReport { run, growth };
    sink.json("mixing.json", &report)?;
    let csv = |out: &mut dyn Write| -> rosen::Result<()> {
        writeln!(out, "step,measure,components")?;
        for s in &report.run.trace {
            writeln!(
                out,
                "{},{},{}",
                s.step,
                s.measure,
                s.components.components().len()
            )?;
        }
        Ok(())
    };
    sink.stdout(csv, &report)?;
    sink.written(&["mixing.json"]);
    eprintln!("N = {}", report.run.n);
    if !(report.growth.holds && monotone) {
        return Err(Failure {
            code: EXIT_VIOLATION,
            message: "a bad step failed to grow".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct CltReport {
    cost: String,
    #[serde(flatten)]
    result: CltSummary,
    condition_h: ConditionH,
}

#[derive(Serialize)]
struct CltSummary {
    q: u32,
    trials: u64,
    n: usize,
    seed: u64,
    mean: f64,
    sigma2: f64,
    sigma2_autocov: f64,
    growth_ratio: f64,
    discarded: u64,
    ks_statistic: f64,
    ks_p_value: f64,
}

fn cmd_clt(config: &RunConfig, p: RosenParams, cost: &str, n: usize, trials: u64) -> CmdResult {
    let f = parse_cost(cost)?;
    if n == 0 || trials < 2 {
        return Err(usage("need --n >= 1 and --trials >= 2"));
    }
    let (op, density) = ulam(p, config.bins)?;
    let condition_h = condition_h_check(&p, &f, &op, &density, 20);
    let sampler = InvariantSampler::new(&op, &density)?;
    let result = match clt_experiment(&p, &f, &sampler, n, trials, config.seed) {
        Ok(r) => r,
        Err(e @ Error::DegenerateVariance { .. }) => {
            eprintln!("condition (H) check: {:?}", condition_h.verdict);
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let histogram: Vec<HistogramRow> = clt_histogram(&result);
    let report = CltReport {
        cost: cost.to_string(),
        result: CltSummary {
            q: result.q,
            trials: result.trials,
            n: result.n,
            seed: result.seed,
            mean: result.mean,
            sigma2: result.sigma2,
            sigma2_autocov: result.sigma2_autocov,
            growth_ratio: result.growth_ratio,
            discarded: result.discarded,
            ks_statistic: result.ks_statistic,
            ks_p_value: result.ks_p_value,
        },
        condition_h,
    };
    let sink = Sink { config };
    sink.json("clt.json", &report)?;
    if let Some(mut f) = sink.file("histogram.csv")? {
        write_histogram_csv(&mut f, &histogram)?;
        f.flush()?;
    }
    if let Some(mut f) = sink.file("samples.csv")? {
        write_samples_csv(&mut f, &result.standardized)?;
        f.flush()?;
    }
    sink.stdout(|out| write_histogram_csv(out, &histogram), &report)?;
    sink.written(&["clt.json", "histogram.csv", "samples.csv"]);
    eprintln!(
        "ks statistic {:.5}, p-value {:.4}",
        result.ks_statistic, result.ks_p_value
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let config = &cli.config;
    if config.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    if config.a_max == 0 {
        return Err(usage("--a-max must be positive"));
    }
    if let Some(w) = config.workers {
        if w == 0 {
            return Err(usage("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let p = RosenParams::new(config.q)?;
    match &cli.command {
        Command::Expand { x, n } => cmd_expand(config, p, *x, *n),
        Command::Density => cmd_density(config, p),
        Command::Ly {
            trials,
            grid_nodes,
            max_pieces,
        } => cmd_ly(config, p, *trials, *grid_nodes, *max_pieces),
        Command::Mixing { c, d, max_iter } => cmd_mixing(config, p, *c, *d, *max_iter),
        Command::Clt { cost, n, trials } => cmd_clt(config, p, cost, *n, *trials),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
