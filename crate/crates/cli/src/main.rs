mod reference;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use blocktail::block_data::{read_raw_sample, BlockData, BlockDataError};
use blocktail::estimators::{quantile_hat_star, EstimateError, QuantileEstimate};
use blocktail::likelihood::{likelihood_ci, normal_ci, ConfidenceInterval, LikelihoodError, Method};
use blocktail::montecarlo::{
    builtin_studies, default_workers, parse_real, parse_study_config, run_study_with_progress, Scheme, SimConfig,
    SimulationReport, DEFAULT_MASTER_SEED,
};
use blocktail::HeavyTailModel;

use reference::Quantity;

#[derive(Parser)]
#[command(
    name = "blocktail",
    version,
    about = "High-quantile inference from block top order statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point estimates of the tail index and the high quantile.
    Estimate(EstimateArgs),
    /// Confidence intervals for the log quantile.
    Ci(CiArgs),
    /// Run a coverage and length study.
    Simulate(SimulateArgs),
    /// Run the built-in studies and compare against the published values.
    Tables(TablesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Normal,
    El,
    Ael,
    All,
}

#[derive(Args)]
struct InputArgs {
    /// Block CSV (`block_id,m,rank,log_value`), or a raw sample with `--blocks`.
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as a raw sample and split it into this many blocks.
    #[arg(long, requires = "ranks")]
    blocks: Option<usize>,
    /// Number of log-gaps `r` kept per block when blocking a raw sample.
    #[arg(long, requires = "blocks")]
    ranks: Option<usize>,
    /// Tail probability of the target quantile.
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Fail instead of warning when `a(m, r, p) >= 0`.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    /// Pseudo-point weight for the adjusted likelihood (a real or a fraction).
    #[arg(long, default_value = "19/12", value_parser = parse_fraction)]
    an: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, env = "BLOCKTAIL_WORKERS")]
    workers: Option<usize>,
    /// Override the number of replicates per cell.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study configuration file; one study per `model` line.
    #[arg(long, conflicts_with_all = ["scheme", "model"])]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["scheme1", "scheme2"], requires = "model")]
    scheme: Option<String>,
    /// Model specification such as `frechet:a=1` or `burr:a=0.5,b=1`.
    #[arg(long, requires = "scheme")]
    model: Option<String>,
    /// Scheme 2 growth exponent.
    #[arg(long, requires = "scheme")]
    v: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_parser = parse_fraction)]
    an: Option<f64>,
    /// Directory for the `.csv` and `.txt` reports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Absolute tolerance on coverage.
    #[arg(long, default_value_t = 0.015)]
    coverage_tol: f64,
    /// Relative tolerance on mean length.
    #[arg(long, default_value_t = 0.03)]
    length_tol: f64,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("`{s}` is not a number or fraction"))
}

/// Maps onto the exit-code contract: 2 for bad input, 3 for domain errors.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Domain(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Domain(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Input(_) => "input",
            Failure::Domain(_) => "domain",
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Domain(e) => e,
        }
    }
}

impl From<BlockDataError> for Failure {
    fn from(e: BlockDataError) -> Self {
        Failure::Input(e.into())
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        Failure::Domain(e.into())
    }
}

impl From<LikelihoodError> for Failure {
    fn from(e: LikelihoodError) -> Self {
        Failure::Domain(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match &cli.command {
        Command::Estimate(a) => a.input.format,
        Command::Ci(a) => a.input.format,
        Command::Simulate(a) => a.run.format,
        Command::Tables(a) => a.run.format,
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Ci(a) => cmd_ci(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Tables(a) => cmd_tables(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if format == Format::Json {
                let msg = serde_json::json!({ "error": { "kind": f.kind(), "message": format!("{:#}", f.error()) } });
                eprintln!("{msg}");
            } else {
                eprintln!("error ({}): {:#}", f.kind(), f.error());
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_data(args: &InputArgs) -> Result<BlockData, Failure> {
    let file = File::open(&args.input)
        .with_context(|| format!("cannot open {}", args.input.display()))
        .map_err(Failure::Input)?;
    let reader = BufReader::new(file);
    let data = match (args.blocks, args.ranks) {
        (Some(k), Some(r)) => BlockData::blockify(&read_raw_sample(reader)?, k, r)?,
        _ => BlockData::read_csv(reader)?,
    };
    Ok(data)
}

fn estimate_checked(data: &BlockData, args: &InputArgs) -> Result<QuantileEstimate, Failure> {
    let est = quantile_hat_star(data, args.p)?;
    if est.non_negative_a_coeff() {
        let e = LikelihoodError::NonNegativeACoeff(est.a_coeff);
        if args.strict {
            return Err(e.into());
        }
        eprintln!("warning: {e}");
    }
    Ok(est)
}

#[derive(Serialize)]
struct EstimateOut {
    gamma_hat: f64,
    log_xp_hat: f64,
    xp_hat: f64,
    a_coeff: f64,
    total_ranks: usize,
    se_log_xp: f64,
    heterogeneous: bool,
}

impl From<&QuantileEstimate> for EstimateOut {
    fn from(e: &QuantileEstimate) -> Self {
        EstimateOut {
            gamma_hat: e.gamma_hat,
            log_xp_hat: e.log_xp_hat,
            xp_hat: e.xp_hat(),
            a_coeff: e.a_coeff,
            total_ranks: e.total_ranks,
            se_log_xp: e.se_log_xp,
            heterogeneous: e.heterogeneous,
        }
    }
}

fn write_stdout(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .context("writing standard output")
        .map_err(Failure::Input)
}

fn cmd_estimate(args: EstimateArgs) -> Outcome {
    let data = load_data(&args.input)?;
    let est = estimate_checked(&data, &args.input)?;
    let out = EstimateOut::from(&est);
    let text = match args.input.format {
        Format::Json => serde_json::to_string_pretty(&out).expect("serializable") + "\n",
        Format::Csv => format!(
            "gamma_hat,log_xp_hat,xp_hat,a_coeff,total_ranks,se_log_xp,heterogeneous\n{:?},{:?},{:?},{:?},{},{:?},{}\n",
            out.gamma_hat, out.log_xp_hat, out.xp_hat, out.a_coeff, out.total_ranks, out.se_log_xp, out.heterogeneous
        ),
        Format::Text => format!(
            "gamma_hat    {:.6}\nlog_xp_hat   {:.6}\nxp_hat       {:.6e}\na_coeff      {:.6}\ntotal_ranks  {}\nse_log_xp    {:.6}\nheterogeneous {}\n",
            out.gamma_hat, out.log_xp_hat, out.xp_hat, out.a_coeff, out.total_ranks, out.se_log_xp, out.heterogeneous
        ),
    };
    write_stdout(&text)
}

fn methods_of(arg: MethodArg) -> Vec<Method> {
    match arg {
        MethodArg::Normal => vec![Method::Normal],
        MethodArg::El => vec![Method::El],
        MethodArg::Ael => vec![Method::Ael],
        MethodArg::All => Method::ALL.to_vec(),
    }
}

#[derive(Serialize)]
struct IntervalOut<'a> {
    #[serde(flatten)]
    interval: &'a ConfidenceInterval,
    length: f64,
}

fn cmd_ci(args: CiArgs) -> Outcome {
    let data = load_data(&args.input)?;
    let est = estimate_checked(&data, &args.input)?;
    let intervals = methods_of(args.method)
        .into_iter()
        .map(|m| match m {
            Method::Normal => normal_ci(&est, args.alpha),
            _ => likelihood_ci(&data, args.input.p, args.alpha, m, args.an),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let text = match args.input.format {
        Format::Json => {
            let list: Vec<_> = intervals
                .iter()
                .map(|i| IntervalOut {
                    interval: i,
                    length: i.length(),
                })
                .collect();
            let doc = serde_json::json!({ "estimate": EstimateOut::from(&est), "intervals": list });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
        Format::Csv => {
            let mut s = String::from(
                "method,level,lower,upper,point,length,hull_failure_at_endpoints,bracket_expanded,bracket_failure,negative_lower_bound,a_n_exceeds_rate\n",
            );
            for i in &intervals {
                let d = &i.diagnostics;
                s += &format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{}\n",
                    i.method,
                    i.level,
                    i.lower,
                    i.upper,
                    i.point,
                    i.length(),
                    d.hull_failure_at_endpoints,
                    d.bracket_expanded,
                    d.bracket_failure,
                    d.negative_lower_bound,
                    d.a_n_exceeds_rate
                );
            }
            s
        }
        Format::Text => {
            let mut s = format!("log x_p estimate {:.4}\n", est.log_xp_hat);
            for i in &intervals {
                s += &format!(
                    "{:<5} {:.0}%  ({:.4}, {:.4})",
                    i.method.label(),
                    100.0 * i.level,
                    i.lower,
                    i.upper
                );
                let d = &i.diagnostics;
                for (flag, name) in [
                    (d.hull_failure_at_endpoints, "hull-boundary"),
                    (d.bracket_expanded, "non-convex"),
                    (d.bracket_failure, "bracket-failure"),
                    (d.negative_lower_bound, "negative-lower"),
                    (d.a_n_exceeds_rate, "large-a_n"),
                ] {
                    if flag {
                        s += &format!(" [{name}]");
                    }
                }
                s.push('\n');
            }
            s
        }
    };
    write_stdout(&text)
}

fn workers_of(run: &RunArgs) -> usize {
    run.workers.filter(|&w| w > 0).unwrap_or_else(default_workers)
}

fn study_configs(args: &SimulateArgs) -> Result<Vec<SimConfig>, Failure> {
    let mut configs = match (&args.config, &args.scheme, &args.model) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(Failure::Input)?;
            parse_study_config(&text)
                .with_context(|| path.display().to_string())
                .map_err(Failure::Input)?
        }
        (None, Some(scheme), Some(model)) => {
            let model: HeavyTailModel = model.parse().map_err(|e| Failure::Input(anyhow::Error::new(e)))?;
            let scheme = if scheme == "scheme1" {
                Scheme::Scheme1
            } else {
                Scheme::Scheme2 { v: args.v, c: 50.0 }
            };
            vec![SimConfig::new(scheme, model)]
        }
        _ => {
            return Err(Failure::Input(anyhow::anyhow!(
                "simulate needs --config or --scheme with --model"
            )))
        }
    };
    for c in &mut configs {
        if let Some(seed) = args.run.seed {
            c.master_seed = seed;
        }
        if let Some(n) = args.run.replicates {
            c.replicates = n;
        }
        if let Some(m) = args.method {
            c.methods = methods_of(m);
        }
        if let Some(a_n) = args.an {
            c.a_n = a_n;
        }
        c.validate().map_err(|e| Failure::Input(e.into()))?;
    }
    Ok(configs)
}

fn run_with_progress(config: &SimConfig, workers: usize) -> Result<SimulationReport, Failure> {
    let start = Instant::now();
    let total = config.k_grid.len();
    let mut done = 0;
    let report = run_study_with_progress(config, workers, |k| {
        done += 1;
        eprintln!(
            "[{} {}] k = {k} done ({done}/{total}, {:.1}s)",
            config.scheme.name(),
            config.model,
            start.elapsed().as_secs_f64()
        );
    })
    .map_err(|e| Failure::Input(e.into()))?;
    Ok(report)
}

fn report_stem(config: &SimConfig) -> String {
    let model: String = config
        .model
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect();
    format!("{}_{}", config.scheme.name(), model)
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Input)
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let configs = study_configs(&args)?;
    let workers = workers_of(&args.run);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::Input)?;
    }
    let mut reports = Vec::new();
    for config in &configs {
        let report = run_with_progress(config, workers)?;
        if let Some(dir) = &args.out_dir {
            let stem = report_stem(config);
            write_file(&dir.join(format!("{stem}.csv")), &report.to_csv_string())?;
            write_file(&dir.join(format!("{stem}.txt")), &report.to_text_table())?;
        }
        reports.push(report);
    }
    let text = match args.run.format {
        Format::Json => serde_json::to_string_pretty(&reports).expect("serializable") + "\n",
        Format::Csv => {
            // Several studies share one header so the output stays a single table.
            let mut s = String::new();
            for (i, r) in reports.iter().enumerate() {
                let csv = r.to_csv_string();
                s += if i == 0 {
                    &csv
                } else {
                    csv.split_once('\n').map_or("", |(_, rest)| rest)
                };
            }
            s
        }
        Format::Text => reports.iter().map(|r| r.to_text_table()).collect::<Vec<_>>().join("\n"),
    };
    write_stdout(&text)
}

#[derive(Serialize)]
struct Comparison {
    table: u8,
    model: String,
    k: usize,
    method: &'static str,
    quantity: Quantity,
    reproduced: f64,
    published: f64,
    diff: f64,
    flagged: bool,
}

fn compare(report: &SimulationReport, args: &TablesArgs) -> Vec<Comparison> {
    let cfg = &report.config;
    let scheme_offset = if cfg.scheme == Scheme::Scheme1 { 0 } else { 2 };
    let mut out = Vec::new();
    for quantity in [Quantity::Coverage, Quantity::Length] {
        for row in &report.rows {
            let reproduced = match quantity {
                Quantity::Coverage => row.coverage,
                Quantity::Length => match row.mean_length {
                    Some(l) => l,
                    None => continue,
                },
            };
            let Some(published) = reference::lookup(&cfg.scheme, &cfg.model, row.k, row.method, quantity) else {
                continue;
            };
            let diff = reproduced - published;
            let flagged = match quantity {
                Quantity::Coverage => diff.abs() > args.coverage_tol,
                Quantity::Length => diff.abs() > args.length_tol * published,
            };
            out.push(Comparison {
                table: scheme_offset + if quantity == Quantity::Coverage { 1 } else { 2 },
                model: cfg.model.label(),
                k: row.k,
                method: row.method.label(),
                quantity,
                reproduced,
                published,
                diff,
                flagged,
            });
        }
    }
    out
}

fn cmd_tables(args: TablesArgs) -> Outcome {
    let workers = workers_of(&args.run);
    let mut rows = Vec::new();
    let start = Instant::now();
    for mut config in builtin_studies(args.run.seed.unwrap_or(DEFAULT_MASTER_SEED)) {
        if let Some(n) = args.run.replicates {
            config.replicates = n;
        }
        let report = run_with_progress(&config, workers)?;
        rows.extend(compare(&report, &args));
    }
    rows.sort_by_key(|r| r.table);
    eprintln!("all studies finished in {:.1}s", start.elapsed().as_secs_f64());

    let text = match args.run.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("serializable") + "\n",
        Format::Csv => {
            let mut s = String::from("table,model,k,method,quantity,reproduced,published,diff,flagged\n");
            for r in &rows {
                let q = if r.quantity == Quantity::Coverage {
                    "coverage"
                } else {
                    "length"
                };
                s += &format!(
                    "{},\"{}\",{},{},{},{:?},{:?},{:?},{}\n",
                    r.table, r.model, r.k, r.method, q, r.reproduced, r.published, r.diff, r.flagged
                );
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            let mut current = 0;
            for r in &rows {
                if r.table != current {
                    current = r.table;
                    let what = if r.quantity == Quantity::Coverage {
                        "coverage"
                    } else {
                        "mean length"
                    };
                    s += &format!(
                        "\nTable {current} ({what}, scheme {})\n{:<12} {:>4} {:<5} {:>10} {:>10} {:>9}\n",
                        if current <= 2 { 1 } else { 2 },
                        "model",
                        "k",
                        "meth",
                        "reproduced",
                        "published",
                        "diff"
                    );
                }
                let (rep, publ, diff) = match r.quantity {
                    Quantity::Coverage => (
                        format!("{:.4}", r.reproduced),
                        format!("{:.4}", r.published),
                        format!("{:+.4}", r.diff),
                    ),
                    Quantity::Length => (
                        format!("{:.3}", r.reproduced),
                        format!("{:.3}", r.published),
                        format!("{:+.3}", r.diff),
                    ),
                };
                s += &format!(
                    "{:<12} {:>4} {:<5} {:>10} {:>10} {:>9}{}\n",
                    r.model,
                    r.k,
                    r.method,
                    rep,
                    publ,
                    diff,
                    if r.flagged { "  *" } else { "" }
                );
            }
            let flagged = rows.iter().filter(|r| r.flagged).count();
            s += &format!(
                "\n{flagged} of {} cells outside tolerance (coverage {}, length {}% relative)\n",
                rows.len(),
                args.coverage_tol,
                100.0 * args.length_tol
            );
            s
        }
    };
    write_stdout(&text)
}
