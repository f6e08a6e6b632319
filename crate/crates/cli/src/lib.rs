//! Command-line front end: data ingestion, RG tests, scheme selection, power
//! studies and reproduction runs with CSV, JSON and SVG output.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use chisqalt_core::distributions::{Distribution, DistributionSpec};
use chisqalt_core::mc::{self, SampleSize};
use chisqalt_core::power::{self, ChartStyle, Method, PowerTable, Scale, StudyCell, StudySpec};
use chisqalt_core::rgtest::{self, RgConfig};
use chisqalt_core::selection::{self, SelectionGrid};
use chisqalt_core::statistic::StatisticKind;

pub mod data;
pub mod svg;

pub use data::{read_data, DataInput};
pub use svg::render_svg;

pub const DEFAULT_SEED: u64 = 20240101;
pub const THREADS_ENV: &str = "CHISQALT_THREADS";

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    /// Bad flags, specs or input files; nothing was computed.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "chisqalt", version, about = "Chi-square goodness-of-fit tests with binning chosen against an alternative")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run the RG test on a file of values and print the JSON report.
    Test(Options),
    /// Run the RG test on pre-binned counts (`lower,upper,count`).
    TestBinned(Options),
    /// Print the merit of every grid entry as CSV.
    Select(Options),
    /// Estimate the power of each method against the alternative.
    Power(Options),
    /// Estimate the RG rejection rate under the null at 1%, 5% and 10%.
    Type1(Options),
    /// Rerun a published study: table1 or fig1 to fig10.
    Reproduce {
        target: String,
        #[command(flatten)]
        opts: Options,
    },
    /// Draw a sample and print one value per line.
    Sample(Options),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Null hypothesis, e.g. "normal(?,?)" or "uniform(0,1)".
    #[arg(long)]
    pub null: Option<String>,
    /// Alternative used to choose the binning, e.g. "t(5)".
    #[arg(long)]
    pub alt: Option<String>,
    /// Data file: one value per line, or `lower,upper,count` CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Poisson rate of a random sample size.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Simulation replicates.
    #[arg(long = "B", default_value_t = 2000)]
    pub replicates: usize,
    /// Replicates of the simulated EDF null distributions.
    #[arg(long = "B-inner", default_value_t = power::DEFAULT_INNER_REPLICATES)]
    pub inner_replicates: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Bin counts to search, as "lo:hi" or a comma list.
    #[arg(long = "grid-k")]
    pub grid_k: Option<String>,
    /// Kappa values to search, comma separated.
    #[arg(long = "grid-kappa")]
    pub grid_kappa: Option<String>,
    /// Statistics to search, comma separated (pearson, ft, lambdap, g2, nm, cr23).
    #[arg(long)]
    pub kinds: Option<String>,
    /// Methods for `power`, comma separated (default: all nine).
    #[arg(long)]
    pub methods: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_spec(flag: &str, text: Option<&String>) -> Result<DistributionSpec, CliError> {
    let text = text.ok_or_else(|| CliError::Config(format!("--{flag} is required")))?;
    DistributionSpec::parse(text).map_err(|e| CliError::Config(format!("--{flag} '{text}': {e}")))
}

fn parse_simple(flag: &str, text: Option<&String>) -> Result<Distribution, CliError> {
    let spec = parse_spec(flag, text)?;
    if !spec.is_simple() {
        return Err(CliError::Config(format!("--{flag} must be fully specified (no '?')")));
    }
    spec.bind(&[]).map_err(config)
}

fn parse_list<T>(flag: &str, text: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let out: Option<Vec<T>> = text.split(',').map(|s| f(s.trim())).collect();
    match out {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Config(format!("--{flag} '{text}' could not be parsed"))),
    }
}

fn parse_k_values(text: &str) -> Result<Vec<usize>, CliError> {
    if let Some((lo, hi)) = text.split_once(':') {
        let lo: usize = lo.trim().parse().map_err(|_| config(format!("--grid-k '{text}'")))?;
        let hi: usize = hi.trim().parse().map_err(|_| config(format!("--grid-k '{text}'")))?;
        if lo > hi {
            return Err(config(format!("--grid-k '{text}' is an empty range")));
        }
        return Ok((lo..=hi).collect());
    }
    parse_list("grid-k", text, |s| s.parse().ok())
}

impl Options {
    fn sample_size(&self) -> Result<(usize, SampleSize), CliError> {
        match (self.n, self.lambda) {
            (Some(_), Some(_)) => Err(config("give either --n or --lambda, not both")),
            (Some(0), _) => Err(config("--n must be positive")),
            (Some(n), None) => Ok((n, SampleSize::Multinomial)),
            (None, Some(l)) if l > 0.0 && l.is_finite() => {
                Ok((l.round().max(1.0) as usize, SampleSize::Poisson { lambda: l }))
            }
            (None, Some(l)) => Err(config(format!("--lambda {l} must be positive"))),
            (None, None) => Err(config("--n or --lambda is required")),
        }
    }

    fn check_alpha(&self) -> Result<(), CliError> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(config(format!("--alpha {} must lie in (0, 1)", self.alpha)))
        }
    }

    /// The selection grid when any grid flag is given.
    fn grid(&self, n: usize, p: usize, poisson: bool) -> Result<Option<SelectionGrid>, CliError> {
        if self.grid_k.is_none() && self.grid_kappa.is_none() && self.kinds.is_none() {
            return Ok(None);
        }
        let mut grid = SelectionGrid::default_for(n, p, poisson);
        if let Some(k) = &self.grid_k {
            grid.k_values = parse_k_values(k)?;
        }
        if let Some(k) = &self.grid_kappa {
            grid.kappa_values = parse_list("grid-kappa", k, |s| s.parse().ok().filter(|x: &f64| (0.0..=1.0).contains(x)))?;
        }
        if let Some(k) = &self.kinds {
            grid.kinds = parse_list("kinds", k, |s| s.parse::<StatisticKind>().ok())?;
        }
        Ok(Some(grid))
    }

    fn rg_config(&self, null: &DistributionSpec, n: usize, poisson: bool) -> Result<RgConfig, CliError> {
        self.check_alpha()?;
        Ok(RgConfig {
            alpha: self.alpha,
            grid: self.grid(n, null.free_count(), poisson)?,
            ..RgConfig::default()
        })
    }

    fn format(&self, allowed: &[Format], default: Format) -> Result<Format, CliError> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(config(format!("--format {f:?} is not available for this command").to_lowercase()))
        }
    }

    fn check_replicates(&self) -> Result<(), CliError> {
        if self.replicates < power::MIN_STUDY_REPLICATES {
            return Err(config(format!(
                "--B must be at least {}",
                power::MIN_STUDY_REPLICATES
            )));
        }
        if self.inner_replicates < chisqalt_core::edf::MIN_REPLICATES {
            return Err(config(format!(
                "--B-inner must be at least {}",
                chisqalt_core::edf::MIN_REPLICATES
            )));
        }
        Ok(())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| runtime(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(runtime)
}

fn table_output(table: &PowerTable, format: Format, title: &str, style: ChartStyle, x_label: &str, y_label: &str) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(table.to_csv()),
        Format::Json => to_json(&table.rows),
        Format::Svg => render_svg(table, style, title, x_label, y_label),
    }
}

fn cmd_test(o: &Options, binned: bool) -> Result<(), CliError> {
    let null = parse_spec("null", o.null.as_ref())?;
    let alt = parse_simple("alt", o.alt.as_ref())?;
    o.format(&[Format::Json], Format::Json)?;
    let path = o.data.as_ref().ok_or_else(|| config("--data is required"))?;
    let input = read_data(path)?;
    let report = match (input, binned) {
        (DataInput::Values(x), false) => match o.lambda {
            Some(lambda) => {
                if o.n.is_some() {
                    return Err(config("give either --n or --lambda, not both"));
                }
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(config(format!("--lambda {lambda} must be positive")));
                }
                let cfg = o.rg_config(&null, lambda.round().max(1.0) as usize, true)?;
                rgtest::rg_test_poisson(&x, lambda, &null, &alt, &cfg)
            }
            None => {
                let cfg = o.rg_config(&null, x.len(), false)?;
                rgtest::rg_test(&x, &null, &alt, &cfg)
            }
        },
        (DataInput::Binned(b), true) => {
            if o.lambda.is_some() {
                return Err(config("--lambda is not supported for binned data"));
            }
            let cfg = o.rg_config(&null, b.total() as usize, false)?;
            rgtest::rg_test_prebinned(&b, &null, &alt, &cfg)
        }
        (DataInput::Binned(_), false) => {
            return Err(config("the data file holds binned counts; use test-binned"));
        }
        (DataInput::Values(_), true) => {
            return Err(config("test-binned needs a lower,upper,count file"));
        }
    }
    .map_err(runtime)?;
    for w in &report.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    emit(o.out.as_deref(), &to_json(&report)?)
}

fn cmd_select(o: &Options) -> Result<(), CliError> {
    let null = parse_spec("null", o.null.as_ref())?;
    let alt = parse_simple("alt", o.alt.as_ref())?;
    let (n, size) = o.sample_size()?;
    let poisson = matches!(size, SampleSize::Poisson { .. });
    let cfg = o.rg_config(&null, n, poisson)?;
    let format = o.format(&[Format::Csv, Format::Json], Format::Csv)?;
    let choice = rgtest::select_for(&null, &alt, n, &cfg, poisson).map_err(runtime)?;
    eprintln!(
        "selected k = {}, kappa = {}, {} (merit {:.4}, {} grid entries)",
        choice.scheme.k,
        choice.scheme.kappa,
        choice.kind,
        choice.merit,
        choice.grid_report.len()
    );
    let text = match format {
        Format::Json => to_json(&choice)?,
        _ => selection::grid_report_csv(&choice.grid_report),
    };
    emit(o.out.as_deref(), &text)
}

fn parse_methods(o: &Options) -> Result<Vec<Method>, CliError> {
    match &o.methods {
        None => Ok(Method::ALL.to_vec()),
        Some(m) => parse_list("methods", m, |s| s.parse().ok()),
    }
}

fn cmd_power(o: &Options) -> Result<(), CliError> {
    let null = parse_spec("null", o.null.as_ref())?;
    let alt_text = o.alt.clone().ok_or_else(|| config("--alt is required"))?;
    let alt = parse_simple("alt", o.alt.as_ref())?;
    let (n, size) = o.sample_size()?;
    o.check_replicates()?;
    let cfg = o.rg_config(&null, n, matches!(size, SampleSize::Poisson { .. }))?;
    let format = o.format(&[Format::Csv, Format::Json, Format::Svg], Format::Csv)?;
    let study = StudySpec {
        name: "power".into(),
        cells: vec![StudyCell {
            param: 0.0,
            label: alt_text,
            null,
            alternative: alt.clone(),
            truth: alt,
        }],
        methods: parse_methods(o)?,
        n,
        sample_size: size,
        alphas: vec![o.alpha],
        replicates: o.replicates,
        inner_replicates: o.inner_replicates,
        seed: o.seed,
        rg: cfg,
    };
    let table = power::run_study(&study).map_err(runtime)?;
    emit(
        o.out.as_deref(),
        &table_output(&table, format, "power", ChartStyle::Bar, "alternative", "power")?,
    )
}

fn cmd_type1(o: &Options) -> Result<(), CliError> {
    let null = parse_spec("null", o.null.as_ref())?;
    let truth = match (&o.alt, null.is_simple()) {
        (Some(_), _) => parse_simple("alt", o.alt.as_ref())?,
        (None, true) => null.bind(&[]).map_err(config)?,
        (None, false) => return Err(config("a composite --null needs --alt to generate the data")),
    };
    if o.lambda.is_some() {
        return Err(config("type1 uses a fixed sample size; give --n"));
    }
    let n = o.n.unwrap_or(1000);
    o.check_replicates()?;
    let format = o.format(&[Format::Csv, Format::Json, Format::Svg], Format::Csv)?;
    let label = o.null.clone().unwrap_or_default();
    let table = power::type1_table(&[(label, null, truth)], &power::TABLE1_ALPHAS, n, o.replicates, o.seed)
        .map_err(runtime)?;
    emit(
        o.out.as_deref(),
        &table_output(&table, format, "type I error", ChartStyle::Bar, "null", "rejection rate")?,
    )
}

fn cmd_reproduce(target: &str, o: &Options) -> Result<(), CliError> {
    let target = target.to_ascii_lowercase();
    if !power::TARGETS.contains(&target.as_str()) {
        return Err(config(format!(
            "unknown target '{target}'; expected one of {}",
            power::TARGETS.join(", ")
        )));
    }
    if o.lambda.is_some() {
        return Err(config("reproduction runs use a fixed sample size"));
    }
    o.check_replicates()?;
    let format = o.format(&[Format::Csv, Format::Json, Format::Svg], Format::Csv)?;
    if o.replicates >= 10_000 {
        eprintln!("warning: {} replicates per cell may take a long time", o.replicates);
    }
    let scale = Scale {
        replicates: o.replicates,
        inner_replicates: o.inner_replicates,
        seed: o.seed,
        n: o.n.unwrap_or(1000),
    };
    let rep = power::reproduce(&target, &scale).map_err(runtime)?;
    let svg = render_svg(&rep.table, rep.style, &target, &rep.x_label, &rep.y_label)?;
    let text = match format {
        Format::Csv => rep.csv.clone(),
        Format::Json => to_json(&rep.table.rows)?,
        Format::Svg => svg.clone(),
    };
    emit(o.out.as_deref(), &text)?;
    if let Some(out) = &o.out {
        if format != Format::Svg {
            emit(Some(&out.with_extension("svg")), &svg)?;
        }
        emit(Some(&out.with_extension("manifest.json")), &to_json(&rep.manifest)?)?;
    }
    Ok(())
}

fn cmd_sample(o: &Options) -> Result<(), CliError> {
    let (flag, text) = match (&o.alt, &o.null) {
        (Some(_), _) => ("alt", o.alt.as_ref()),
        (None, Some(_)) => ("null", o.null.as_ref()),
        (None, None) => return Err(config("--alt or --null is required")),
    };
    let dist = parse_simple(flag, text)?;
    let n = o.n.ok_or_else(|| config("--n is required"))?;
    let x = dist.sample(n, &mut mc::stream(o.seed, mc::cell_key("sample"), 0));
    let mut text = String::with_capacity(20 * n);
    for v in x {
        text.push_str(&format!("{v}\n"));
    }
    emit(o.out.as_deref(), &text)
}

/// Executes one command. The statistical decision is part of the output;
/// errors are configuration (exit 2) or runtime (exit 1) failures.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.command {
        Command::Test(o) => cmd_test(o, false),
        Command::TestBinned(o) => cmd_test(o, true),
        Command::Select(o) => cmd_select(o),
        Command::Power(o) => cmd_power(o),
        Command::Type1(o) => cmd_type1(o),
        Command::Reproduce { target, opts } => cmd_reproduce(target, opts),
        Command::Sample(o) => cmd_sample(o),
    }
}

/// Worker count from `CHISQALT_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(config(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
        },
    }
}

/// `run` on a pool capped by `CHISQALT_THREADS`.
pub fn run_with_env(config: &RunConfig) -> Result<(), CliError> {
    match threads_from_env()? {
        None => run(config),
        Some(t) => power::with_threads(t, || run(config)).map_err(runtime)?,
    }
}
