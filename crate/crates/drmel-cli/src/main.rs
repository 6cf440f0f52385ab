//! Command-line front end: fit the pooled model on delimited data, estimate
//! quantiles and confidence intervals, and run replicated simulation
//! studies.

use clap::{Args, Parser, Subcommand, ValueEnum};
use drmel::montecarlo::{self, designs, ExperimentConfig};
use drmel::{Analysis, AnalysisOptions, BasisSpec, MultiSample};
use drmel_cli::config::{parse_levels, FileConfig};
use drmel_cli::ingest::ingest;
use drmel_cli::report::{render_cis, render_fit, render_quantiles, OutFormat, QuantileSide};
use drmel_cli::{CliError, CliResult};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "drmel",
    version,
    about = "Pooled empirical-likelihood estimation of distributions and quantiles \
             for several samples linked by a density ratio model"
)]
struct Cli {
    /// Flat key=value file supplying defaults for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and report the parameter estimates.
    Fit(FitArgs),
    /// Estimate quantiles for every population.
    Quantile(QuantileArgs),
    /// Confidence intervals for quantiles or a quantile difference.
    Ci(CiArgs),
    /// Run a replicated simulation study and emit its metric tables.
    Simulate(SimArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input file with header `sample_id,value`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated basis components (1, x, x2, logx, log1p_abs,
    /// sqrt_abs, x1.5); the first must be 1.
    #[arg(long)]
    basis: Option<String>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write output to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct QuantileArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Quantile levels: comma list `0.05,0.5` or range `0.05:0.95:0.05`.
    #[arg(long)]
    levels: Option<String>,
    /// Which estimators to report.
    #[arg(long, value_enum, default_value = "el")]
    method: MethodArg,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    levels: Option<String>,
    /// Confidence level.
    #[arg(long)]
    conf: Option<f64>,
    /// Difference target `r,s`: intervals for quantile(r) - quantile(s).
    #[arg(long)]
    diff: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    /// Built-in design (gamma50, normal50, misspec50) or a JSON experiment
    /// description.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-sample size override for built-in designs.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    conf: Option<f64>,
    #[arg(long)]
    levels: Option<String>,
    /// Directory for metrics.txt and metrics.csv; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Records,
}

impl From<FormatArg> for OutFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => OutFormat::Text,
            FormatArg::Records => OutFormat::Records,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    El,
    Em,
    Both,
}

impl From<MethodArg> for QuantileSide {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::El => QuantileSide::El,
            MethodArg::Em => QuantileSide::Em,
            MethodArg::Both => QuantileSide::Both,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file_config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Fit(args) => {
            let (analysis, _) = load_analysis(&args.common, &file_config)?;
            let format = resolve_format(args.common.format, &file_config)?;
            write_output(
                args.common.out.as_deref(),
                &file_config,
                &render_fit(&analysis, format),
            )
        }
        Command::Quantile(args) => {
            let (analysis, _) = load_analysis(&args.common, &file_config)?;
            let format = resolve_format(args.common.format, &file_config)?;
            let levels = resolve_levels(args.levels.as_deref(), &file_config)?;
            let text = render_quantiles(&analysis, &levels, args.method.into(), format)?;
            write_output(args.common.out.as_deref(), &file_config, &text)
        }
        Command::Ci(args) => {
            let (analysis, data) = load_analysis(&args.common, &file_config)?;
            let format = resolve_format(args.common.format, &file_config)?;
            let levels = resolve_levels(args.levels.as_deref(), &file_config)?;
            let conf = resolve_conf(args.conf, &file_config)?;
            let diff = resolve_diff(args.diff.as_deref(), &file_config, data.n_populations())?;
            let text = render_cis(&analysis, &levels, conf, diff, format)?;
            write_output(args.common.out.as_deref(), &file_config, &text)
        }
        Command::Simulate(args) => simulate(args, &file_config),
    }
}

fn load_analysis(
    common: &CommonArgs,
    file_config: &FileConfig,
) -> CliResult<(Analysis, MultiSample)> {
    let input = common
        .input
        .clone()
        .or_else(|| file_config.get("input").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let basis = resolve_basis(common.basis.as_deref(), file_config)?;
    let data = ingest(&input)?;
    let analysis = Analysis::new(data.clone(), &basis, &AnalysisOptions::default())?;
    Ok((analysis, data))
}

fn resolve_basis(arg: Option<&str>, file_config: &FileConfig) -> CliResult<BasisSpec> {
    let expr = arg
        .map(str::to_string)
        .or_else(|| file_config.get("basis").map(str::to_string));
    match expr {
        Some(expr) => expr
            .parse()
            .map_err(|e: drmel::Error| CliError::Usage(e.to_string())),
        None => Ok(BasisSpec::robust_default()),
    }
}

fn resolve_format(arg: Option<FormatArg>, file_config: &FileConfig) -> CliResult<OutFormat> {
    if let Some(f) = arg {
        return Ok(f.into());
    }
    match file_config.get("format") {
        Some("text") => Ok(OutFormat::Text),
        Some("records") => Ok(OutFormat::Records),
        Some(other) => Err(CliError::Usage(format!(
            "unknown format `{other}` (text or records)"
        ))),
        None => Ok(OutFormat::Text),
    }
}

fn resolve_levels(arg: Option<&str>, file_config: &FileConfig) -> CliResult<Vec<f64>> {
    match arg.or_else(|| file_config.get("levels")) {
        Some(expr) => parse_levels(expr),
        None => Ok(montecarlo::STUDY_LEVELS.to_vec()),
    }
}

fn resolve_conf(arg: Option<f64>, file_config: &FileConfig) -> CliResult<f64> {
    let conf = match arg {
        Some(c) => c,
        None => match file_config.get("conf") {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid conf `{raw}`")))?,
            None => 0.95,
        },
    };
    if !(conf > 0.0 && conf < 1.0) {
        return Err(CliError::Usage(format!("conf {conf} outside (0, 1)")));
    }
    Ok(conf)
}

fn resolve_diff(
    arg: Option<&str>,
    file_config: &FileConfig,
    n_populations: usize,
) -> CliResult<Option<(usize, usize)>> {
    let Some(expr) = arg.or_else(|| file_config.get("diff")) else {
        return Ok(None);
    };
    let parts: Vec<&str> = expr.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "--diff expects `r,s`, found `{expr}`"
        )));
    }
    let parse = |p: &str| -> CliResult<usize> {
        p.parse()
            .map_err(|_| CliError::Usage(format!("invalid population index `{p}`")))
    };
    let (r, s) = (parse(parts[0])?, parse(parts[1])?);
    if r >= n_populations || s >= n_populations {
        return Err(CliError::Usage(format!(
            "difference indices {r},{s} out of range (have {n_populations} populations)"
        )));
    }
    if r == s {
        return Err(CliError::Usage(
            "difference needs two distinct populations".into(),
        ));
    }
    Ok(Some((r, s)))
}

fn write_output(out: Option<&Path>, file_config: &FileConfig, text: &str) -> CliResult<()> {
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| file_config.get("out").map(PathBuf::from));
    match target {
        Some(path) => std::fs::write(&path, text).map_err(|e| {
            CliError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: SimArgs, file_config: &FileConfig) -> CliResult<()> {
    let design = args
        .design
        .clone()
        .or_else(|| file_config.get("design").map(str::to_string))
        .ok_or_else(|| {
            CliError::Usage(
                "--design is required (gamma50, normal50, misspec50, or FILE.json)".into(),
            )
        })?;
    let reps = match args.reps {
        Some(r) => r,
        None => match file_config.get("reps") {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid reps `{raw}`")))?,
            None => 2000,
        },
    };
    let seed = match args.seed {
        Some(s) => s,
        None => match file_config.get("seed") {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid seed `{raw}`")))?,
            None => 314159,
        },
    };

    let mut config: ExperimentConfig = match design.as_str() {
        "gamma50" => designs::gamma50(reps, seed),
        "normal50" => designs::normal50(reps, seed),
        "misspec50" => designs::misspec50(reps, seed),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            config.reps = reps;
            config.seed = seed;
            config
        }
    };
    if let Some(n) = args.n {
        config.n_per_sample = n;
    }
    if let Some(conf) = args.conf {
        config.conf_level = conf;
    }
    if let Some(levels) = &args.levels {
        config.levels = parse_levels(levels)?;
    }

    let table = montecarlo::run_experiment(&config)?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("metrics.txt"), table.to_delimited_text())?;
            std::fs::write(dir.join("metrics.csv"), table.to_records())?;
            eprintln!(
                "wrote {} and {}",
                dir.join("metrics.txt").display(),
                dir.join("metrics.csv").display()
            );
            Ok(())
        }
        None => {
            let format = resolve_format(args.format, file_config)?;
            match format {
                OutFormat::Text => print!("{}", table.to_delimited_text()),
                OutFormat::Records => print!("{}", table.to_records()),
            }
            Ok(())
        }
    }
}
