// `!(x > 0.0)` is how the domain checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anytime_pac::confseq::{stitched_cs_width, SubGaussianCs};
use anytime_pac::divergences::{
    kl_divergence, kl_inv_upper, renyi_divergence, tv_distance, Distribution,
};
use anytime_pac::forward::{BercuForm, ForwardBoundState, ForwardKind};
use anytime_pac::parse::{parse_distribution, parse_observations, parse_stream};
use anytime_pac::reverse::{
    convex_phi_rhs_stitched, convex_phi_rhs_target, convex_phi_risk_bound, data_free_log_moment,
    ipm_rhs_stitched, ipm_rhs_target, mcallester_bound, mcallester_bound_target, renyi_convex_rhs,
    renyi_convex_rhs_target, seeger_rhs, seeger_rhs_target, thiemann_bound,
    thiemann_bound_optimized, thiemann_bound_target, thiemann_bound_target_optimized,
    ConvexPhiSpec, Phi,
};
use anytime_pac::schedule::{default_lambda_schedule, LambdaSchedule};
use anytime_pac::simulation::{write_coverage_csv, write_trace_csv, Experiment, ExperimentConfig};
use anytime_pac::stitch::{eta, xi};

/// Anytime-valid PAC-Bayes bounds and confidence sequences.
#[derive(Parser)]
#[command(name = "anytime-pac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a bound along an observation CSV; writes one row per step.
    Bound(BoundArgs),
    /// Confidence sequence for the mean of a loss stream.
    Cs(CsArgs),
    /// Monte Carlo coverage of the bounds in a config file.
    Simulate(SimulateArgs),
    /// Largest q ≥ p with kl(p‖q) ≤ c.
    InvertKl { p: f64, c: f64 },
    /// ξ(k) = Σ_l C(k,l) (l/k)^l (1 − l/k)^(k−l).
    Xi { k: u64 },
}

#[derive(clap::Args)]
struct BoundArgs {
    /// Bound kind: a forward kind or seeger|mcallester|thiemann|convex-phi|renyi|ipm.
    #[arg(long)]
    kind: String,
    /// Observation CSV ("-" for stdin).
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Target time for the reverse bounds; rows before it are skipped.
    #[arg(long)]
    at: Option<u64>,
    /// Posterior spec; uniform over the loss columns by default.
    #[arg(long)]
    posterior: Option<String>,
    /// Prior spec; uniform over the loss columns by default.
    #[arg(long)]
    prior: Option<String>,
    /// Constant λ for rows without a `lambda` cell (default: the shrinking schedule).
    #[arg(long)]
    lambda: Option<f64>,
    /// `tight` or `simplified` (bercu-touati only).
    #[arg(long, default_value = "tight")]
    bercu: String,
    /// kl | quadratic | catoni:<c> (convex-phi, renyi, ipm).
    #[arg(long)]
    phi: Option<String>,
    /// Rényi order.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Fixed Thiemann λ in (0, 2); the grid minimum otherwise.
    #[arg(long)]
    thiemann_lambda: Option<f64>,
}

#[derive(clap::Args)]
struct CsArgs {
    /// Stream CSV with a `loss` column ("-" for stdin).
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// SubGaussian scale of the losses.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Divergence between the fixed posterior and prior the stream was averaged under.
    #[arg(long, default_value_t = 0.0)]
    kl: f64,
    /// Use the stitched iterated-logarithm width instead of the λ-weighted one.
    #[arg(long)]
    stitched: bool,
    /// Constant λ (default: the shrinking schedule).
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Coverage report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-step trace of replication 0.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    /// Bad flags, inputs or configuration: exit 2.
    Config(String),
    /// Unreadable or unwritable files: exit 1.
    Io(String),
}

impl From<anytime_pac::Error> for Failure {
    fn from(e: anytime_pac::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn open_input(path: &Path) -> CliResult<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    File::open(path)
        .map(|f| Box::new(io::BufReader::new(f)) as Box<dyn Read>)
        .map_err(|e| io_err(path, e))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| io_err(p, e)),
    }
}

/// Writes CSV rows with `Display` formatting, which round-trips `f64` exactly.
struct Rows {
    out: csv::Writer<Box<dyn Write>>,
    label: String,
}

impl Rows {
    fn new(out: Box<dyn Write>, label: &str, header: &[&str]) -> CliResult<Self> {
        let mut r = Self {
            out: csv::Writer::from_writer(out),
            label: label.to_string(),
        };
        r.write(header.iter().map(|s| s.to_string()))?;
        Ok(r)
    }

    fn write(&mut self, fields: impl IntoIterator<Item = String>) -> CliResult<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.out
            .write_record(&fields)
            .map_err(|e| Failure::Io(format!("{}: {e}", self.label)))
    }

    fn finish(mut self) -> CliResult<()> {
        self.out
            .flush()
            .map_err(|e| Failure::Io(format!("{}: {e}", self.label)))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn check_delta(delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Failure::Config(format!(
            "--delta {delta} must be in (0, 1)"
        )))
    }
}

fn distribution_or_uniform(spec: Option<&str>, k: usize) -> CliResult<Distribution> {
    match spec {
        Some(s) => Ok(parse_distribution(s)?),
        None => Ok(parse_distribution(&format!("uniform:{k}"))?),
    }
}

fn at_row(t: u64, e: anytime_pac::Error) -> Failure {
    Failure::Config(format!("row t = {t}: {e}"))
}

fn bound(args: BoundArgs) -> CliResult<()> {
    check_delta(args.delta)?;
    let rows = parse_observations(open_input(&args.input)?)?;
    let k = rows.first().map_or(0, |r| r.obs.loss.len());
    if k == 0 {
        return Err(Failure::Config("observation file has no rows".into()));
    }
    let posterior = distribution_or_uniform(args.posterior.as_deref(), k)?;
    let prior = distribution_or_uniform(args.prior.as_deref(), k)?;
    let kl = kl_divergence(&posterior, &prior)?;
    let out = open_output(args.out.as_deref())?;
    let label = args
        .out
        .as_deref()
        .map_or("stdout".to_string(), |p| p.display().to_string());

    if let Ok(kind) = args.kind.parse::<ForwardKind>() {
        if args.at.is_some() {
            return Err(Failure::Config(
                "--at applies to the reverse bounds only".into(),
            ));
        }
        let form = match args.bercu.as_str() {
            "tight" => BercuForm::Tight,
            "simplified" => BercuForm::Simplified,
            other => return Err(Failure::Config(format!("unknown --bercu `{other}`"))),
        };
        let schedule = match args.lambda {
            Some(l) => LambdaSchedule::constant(l)?,
            None => default_lambda_schedule(args.delta, 1.0)?,
        };
        let mut state = ForwardBoundState::new(kind, k).with_bercu_form(form);
        let mut w = Rows::new(out, &label, &["t", "lhs", "rhs", "kl"])?;
        for row in &rows {
            if row.obs.mean.len() != k {
                return Err(Failure::Config(format!(
                    "row t = {}: forward bounds need mu_0..mu_{} columns",
                    row.t,
                    k - 1
                )));
            }
            let lambda = match row.lambda {
                Some(l) => l,
                None => schedule.at(row.t)?,
            };
            state
                .update_with_lambda(lambda, &row.obs)
                .map_err(|e| at_row(row.t, e))?;
            let lhs = posterior
                .as_finite()
                .map(|rho| state.gap_lhs(rho))
                .transpose()?;
            let rhs = state
                .rhs_with_kl(&posterior, kl, args.delta)
                .map_err(|e| at_row(row.t, e))?;
            w.write([row.t.to_string(), opt(lhs), rhs.to_string(), kl.to_string()])?;
        }
        return w.finish();
    }

    let rho = posterior
        .as_finite()
        .ok_or_else(|| Failure::Config("reverse bounds need a finite posterior".into()))?;
    let nu = prior
        .as_finite()
        .ok_or_else(|| Failure::Config("reverse bounds need a finite prior".into()))?;
    if rho.support_size() != k {
        return Err(Failure::Config(format!(
            "posterior has {} weights but the file has {k} loss columns",
            rho.support_size()
        )));
    }
    let phi = args.phi.as_deref().map(str::parse::<Phi>).transpose()?;
    let kind = args.kind.as_str();
    if phi.is_some() && !matches!(kind, "convex-phi" | "renyi" | "ipm") {
        return Err(Failure::Config(format!("--phi does not apply to `{kind}`")));
    }
    if args.thiemann_lambda.is_some() && kind != "thiemann" {
        return Err(Failure::Config(format!(
            "--thiemann-lambda does not apply to `{kind}`"
        )));
    }
    let phi = phi.unwrap_or(if kind == "ipm" {
        Phi::Quadratic
    } else {
        Phi::Kl
    });
    let spec = ConvexPhiSpec::data_free(phi);
    let divergence = match kind {
        "renyi" => {
            if matches!(phi, Phi::Catoni(_)) {
                return Err(Failure::Config(
                    "the Renyi bound needs phi = kl or quadratic".into(),
                ));
            }
            renyi_divergence(rho, nu, args.alpha)?
        }
        "ipm" => {
            if phi == Phi::Kl {
                return Err(Failure::Config(
                    "the TV-IPM bound needs a bounded phi".into(),
                ));
            }
            tv_distance(rho, nu)?
        }
        "seeger" | "mcallester" | "thiemann" | "convex-phi" => kl,
        other => return Err(Failure::Config(format!("unknown bound kind `{other}`"))),
    };
    if let Some(n) = args.at {
        if n == 0 {
            return Err(Failure::Config("--at must be at least 1".into()));
        }
    }

    let mut cum = vec![0.0; k];
    let mut w = Rows::new(
        out,
        &label,
        &["t", "r_hat", "rhs", "risk_bound", "divergence"],
    )?;
    for row in &rows {
        let t = row.t;
        if let Some(f) = row.obs.loss.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Failure::Config(format!(
                "row t = {t}: loss {f} outside [0, 1]"
            )));
        }
        for (c, f) in cum.iter_mut().zip(&row.obs.loss) {
            *c += f;
        }
        if args.at.is_some_and(|n| t < n) {
            continue;
        }
        let r_hat = rho
            .expect(&cum.iter().map(|c| c / t as f64).collect::<Vec<_>>())?
            .clamp(0.0, 1.0);
        let delta = args.delta;
        let at = args.at;
        let (rhs, risk, div) = match kind {
            "seeger" => {
                let rhs = match at {
                    Some(n) => seeger_rhs_target(n, kl, delta)?,
                    None => seeger_rhs(t, kl, delta)?,
                };
                (rhs, kl_inv_upper(r_hat, rhs)?, kl)
            }
            "mcallester" => {
                let b = match at {
                    Some(n) => mcallester_bound_target(n, kl, delta, r_hat)?,
                    None => mcallester_bound(t, kl, delta, r_hat)?,
                };
                (b.raw, b.clipped, kl)
            }
            "thiemann" => {
                let b = match (at, args.thiemann_lambda) {
                    (Some(n), Some(l)) => thiemann_bound_target(n, kl, delta, l, r_hat)?,
                    (Some(n), None) => thiemann_bound_target_optimized(n, kl, delta, r_hat)?.1,
                    (None, Some(l)) => thiemann_bound(t, kl, delta, l, r_hat)?,
                    (None, None) => thiemann_bound_optimized(t, kl, delta, r_hat)?.1,
                };
                (b.raw, b.clipped, kl)
            }
            "convex-phi" => {
                let rhs = match at {
                    Some(n) => convex_phi_rhs_target(&spec, n, t, kl, delta)?,
                    None => convex_phi_rhs_stitched(&spec, t, kl, delta)?,
                };
                (rhs, convex_phi_risk_bound(phi, r_hat, rhs)?, kl)
            }
            "ipm" => {
                let j = at.map_or_else(|| eta(t), Ok)?;
                let range = match phi {
                    Phi::Catoni(c) => 2.0 * c,
                    _ => 2.0,
                };
                let gamma = spec.lambda_at(j) * range * divergence;
                let rhs = match at {
                    Some(n) => ipm_rhs_target(&spec, n, t, gamma, delta)?,
                    None => ipm_rhs_stitched(&spec, t, gamma, delta)?,
                };
                (rhs, convex_phi_risk_bound(phi, r_hat, rhs)?, divergence)
            }
            _ => {
                let q = args.alpha / (args.alpha - 1.0);
                let moment = |j: u64| data_free_log_moment(phi, q, j);
                let rhs = match at {
                    Some(n) => {
                        renyi_convex_rhs_target(n, t, args.alpha, divergence, moment, delta)?
                    }
                    None => renyi_convex_rhs(t, args.alpha, divergence, moment, delta)?,
                };
                (
                    rhs,
                    convex_phi_risk_bound(phi, r_hat, rhs.exp())?,
                    divergence,
                )
            }
        };
        w.write([
            t.to_string(),
            r_hat.to_string(),
            rhs.to_string(),
            risk.to_string(),
            div.to_string(),
        ])?;
    }
    w.finish()
}

fn cs(args: CsArgs) -> CliResult<()> {
    check_delta(args.delta)?;
    if !(args.sigma > 0.0) || !args.sigma.is_finite() {
        return Err(Failure::Config(format!(
            "--sigma {} must be positive",
            args.sigma
        )));
    }
    if !(args.kl >= 0.0) {
        return Err(Failure::Config(format!(
            "--kl {} must be nonnegative",
            args.kl
        )));
    }
    if args.stitched && args.lambda.is_some() {
        return Err(Failure::Config(
            "--lambda does not apply to the stitched sequence".into(),
        ));
    }
    let losses = parse_stream(open_input(&args.input)?)?;
    let label = args
        .out
        .as_deref()
        .map_or("stdout".to_string(), |p| p.display().to_string());
    let mut w = Rows::new(
        open_output(args.out.as_deref())?,
        &label,
        &["t", "center", "lo", "hi"],
    )?;
    let schedule = match args.lambda {
        Some(l) => LambdaSchedule::constant(l)?,
        None => default_lambda_schedule(args.delta, args.sigma)?,
    };
    let mut weighted = SubGaussianCs::new(schedule, args.sigma)?;
    let mut sum = 0.0;
    for (i, f) in losses.iter().enumerate() {
        let t = i as u64 + 1;
        let (center, width) = if args.stitched {
            sum += f;
            // Rescaling losses by 1/σ gives the unit-scale form.
            let width = args.sigma * stitched_cs_width(t, args.kl, args.delta)?;
            (sum / t as f64, width)
        } else {
            weighted.update(*f)?;
            let c = weighted.interval(args.kl, args.delta)?;
            (c.center, c.width)
        };
        w.write([
            t.to_string(),
            center.to_string(),
            (center - width).to_string(),
            (center + width).to_string(),
        ])?;
    }
    w.finish()
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut text = String::new();
    File::open(&args.config)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(&args.config, e))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let experiment = Experiment::new(config)?;
    let report = experiment.coverage()?;
    let file = File::create(&args.out).map_err(|e| io_err(&args.out, e))?;
    write_coverage_csv(&report, BufWriter::new(file)).map_err(|e| io_err(&args.out, e))?;
    if let Some(path) = &args.trace {
        let trace = experiment.run(0)?;
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        write_trace_csv(&trace, BufWriter::new(file)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bound(a) => bound(a),
        Command::Cs(a) => cs(a),
        Command::Simulate(a) => simulate(a),
        Command::InvertKl { p, c } => {
            println!("{}", kl_inv_upper(p, c)?);
            Ok(())
        }
        Command::Xi { k } => {
            println!("{}", xi(k)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("anytime-pac: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("anytime-pac: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("anytime-pac: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
