use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blowup_asym::builtins;
use blowup_asym::dsl::{parse_problem_with, ProblemSpec};
use blowup_asym::error::{Error, ExpansionError};
use blowup_asym::report::{self, AnalysisReport, PipelineOptions, RootStatus};
use blowup_asym::spectral::RootAnalysis;
use blowup_asym::validate::ValidateOptions;
use blowup_asym::vf::Params;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 2;
const EXIT_SPECTRUM: u8 = 3;
const EXIT_NON_HYPERBOLIC: u8 = 4;
const EXIT_VALIDATION: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "blowup-asym", version, about = "Multi-order asymptotic expansions of blow-up solutions")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Balance roots, power-determining matrix, spectrum and gap.
    Analyze(CommonArgs),
    /// Expansion to order N at every expandable root.
    Expand(CommonArgs),
    /// Symbolic residual and numerical comparison of the expansion.
    Validate(ValidateArgs),
    /// List or show the bundled example problems.
    Examples(ExamplesArgs),
    /// Analysis, expansion and validation in one document.
    Report(ValidateArgs),
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// Bundled example name (see `examples`).
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    builtin: Option<String>,
    /// Problem file (TOML).
    #[arg(long)]
    file: Option<PathBuf>,
    /// Newton seed, e.g. "1.2,0.3"; repeatable.
    #[arg(long = "seed", value_name = "X,Y,...")]
    seeds: Vec<String>,
    /// Problem parameter override, e.g. a=0.25 or a=1,b=1; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    tol_newton: Option<f64>,
    #[arg(long)]
    tau_hyp: Option<f64>,
    /// Restrict to one root (index in the sorted root list).
    #[arg(long)]
    root: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Expansion order N (number of correction terms Y_1..Y_N).
    #[arg(long)]
    order: Option<usize>,
    /// Value for a free parameter, e.g. C1=1; repeatable.
    #[arg(long = "bind", value_name = "Ci=VALUE")]
    binds: Vec<String>,
    /// Format of the report on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write the JSON report here.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write a CSV table here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Highest order tried when --order is not given.
    #[arg(long, default_value_t = 3)]
    max_order: usize,
    /// Skip the s-time diagnostic.
    #[arg(long)]
    no_s_time: bool,
}

#[derive(Args, Debug)]
struct ExamplesArgs {
    /// Print the problem file of this example.
    #[arg(long)]
    show: Option<String>,
}

/// Failure with an exit code; the message goes to stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Expand(a) => cmd_expand(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Examples(a) => cmd_examples(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, _) => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env(env_logger::Env::new().filter("BLOWUP_ASYM_LOG"))
        .format_timestamp(None)
        .init();
}

fn parse_assignments(items: &[String], what: &str) -> Result<Params, Failure> {
    let mut out = Params::new();
    for item in items.iter().flat_map(|s| s.split(',')) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("{what} `{item}` is not NAME=VALUE")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{what} `{item}`: `{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_seed(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::input(format!("seed `{s}` is not a list of numbers"))))
        .collect()
}

fn load_problem(p: &ProblemArgs) -> Result<(ProblemSpec, PipelineOptions), Failure> {
    let overrides = parse_assignments(&p.params, "parameter")?;
    let spec = match (&p.builtin, &p.file) {
        (Some(name), _) => builtins::load(name, &overrides)?,
        (None, Some(path)) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            parse_problem_with(&text, &overrides).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Failure::input("one of --builtin or --file is required")),
    };
    let mut opts = PipelineOptions::from_spec(&spec);
    if !p.seeds.is_empty() {
        opts.seeds = p.seeds.iter().map(|s| parse_seed(s)).collect::<Result<_, _>>()?;
        if let Some(bad) = opts.seeds.iter().find(|s| s.len() != spec.vars.len()) {
            return Err(Failure::input(format!("seed {bad:?} has {} entries, expected {}", bad.len(), spec.vars.len())));
        }
    }
    if let Some(t) = p.tol_newton {
        opts.newton.tol = t;
    }
    if let Some(t) = p.tau_hyp {
        opts.tau_hyp = t;
    }
    opts.root = p.root;
    Ok((spec, opts))
}

fn apply_common(c: &CommonArgs, opts: &mut PipelineOptions) -> Result<(), Failure> {
    if let Some(n) = c.order {
        if n == 0 {
            return Err(Failure::input("order must be at least 1"));
        }
        opts.order = n;
    }
    let binds = parse_assignments(&c.binds, "binding")?;
    if let Some(bad) = binds.keys().find(|k| !is_param_name(k)) {
        return Err(Failure::input(format!("`{bad}` is not a free parameter name (C1, C2, ...)")));
    }
    opts.bind.extend(binds);
    Ok(())
}

fn is_param_name(s: &str) -> bool {
    s.strip_prefix('C').is_some_and(|d| d.parse::<usize>().is_ok_and(|i| i >= 1))
}

fn emit<T: Serialize>(c: &CommonArgs, value: &T, text: impl FnOnce() -> String, csv: Option<String>) -> Result<(), Failure> {
    let json = || serde_json::to_string_pretty(value).expect("report serializes");
    if let Some(path) = &c.json {
        fs::write(path, json() + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    if let (Some(path), Some(body)) = (&c.csv, csv) {
        fs::write(path, body).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    match c.format {
        Format::Text => write_stdout(&text()),
        Format::Json => write_stdout(&(json() + "\n")),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn write_stdout(s: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(s.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::input(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn run_analysis(spec: &ProblemSpec, opts: &PipelineOptions) -> Result<(AnalysisReport, Vec<RootAnalysis>), Failure> {
    Ok(report::analyze_problem(spec, opts)?)
}

fn analysis_code(a: &AnalysisReport) -> u8 {
    if a.any_expandable() {
        EXIT_OK
    } else {
        for r in &a.roots {
            log::warn!("root {}: {:?}", r.index, r.status);
        }
        EXIT_SPECTRUM
    }
}

fn expansion_code(errors: &[&ExpansionError]) -> u8 {
    match errors.first() {
        Some(ExpansionError::ComplexSpectrumUnsupported) => EXIT_SPECTRUM,
        Some(ExpansionError::NonHyperbolic(_)) => EXIT_NON_HYPERBOLIC,
        _ => EXIT_INPUT,
    }
}

fn cmd_analyze(c: &CommonArgs) -> Result<u8, Failure> {
    let (spec, mut opts) = load_problem(&c.problem)?;
    apply_common(c, &mut opts)?;
    let (analysis, _) = run_analysis(&spec, &opts)?;
    emit(c, &analysis, || report::render_analysis(&analysis), None)?;
    Ok(analysis_code(&analysis))
}

fn cmd_expand(c: &CommonArgs) -> Result<u8, Failure> {
    let (spec, mut opts) = load_problem(&c.problem)?;
    apply_common(c, &mut opts)?;
    let (analysis, roots) = run_analysis(&spec, &opts)?;
    let (exp, raw) = report::expand_problem(&spec, &analysis, &roots, &opts);
    let csv = c.csv.as_ref().map(|_| report::expansion_csv(&exp));
    emit(c, &exp, || report::render_expansion(&exp), csv)?;
    if exp.any_ok() {
        return Ok(EXIT_OK);
    }
    let errors: Vec<&ExpansionError> = raw.iter().filter_map(|r| r.as_ref().err()).collect();
    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(expansion_code(&errors))
}

fn validate_options(v: &ValidateArgs) -> ValidateOptions {
    let mut o = ValidateOptions::default();
    if v.no_s_time {
        o.s_time = None;
    }
    o
}

fn cmd_validate(v: &ValidateArgs) -> Result<u8, Failure> {
    let c = &v.common;
    let (spec, mut opts) = load_problem(&c.problem)?;
    apply_common(c, &mut opts)?;
    let (analysis, roots) = run_analysis(&spec, &opts)?;
    if !analysis.any_expandable() {
        return Ok(no_expandable_root(&analysis));
    }
    let summary =
        report::validate_problem(&spec, &analysis, &roots, c.order, v.max_order, &opts.bind, &validate_options(v));
    let csv = c.csv.as_ref().map(|_| report::validation_csv(&summary));
    emit(c, &summary, || report::render_validation(&summary), csv)?;
    if summary.pass {
        Ok(EXIT_OK)
    } else {
        for r in summary.roots.iter().filter(|r| !r.pass) {
            eprintln!("validation failed at root {}", r.index);
        }
        Ok(EXIT_VALIDATION)
    }
}

fn no_expandable_root(analysis: &AnalysisReport) -> u8 {
    let complex = analysis.roots.iter().any(|r| r.status == RootStatus::ComplexSpectrum);
    if complex {
        eprintln!("error: {}", ExpansionError::ComplexSpectrumUnsupported);
        EXIT_SPECTRUM
    } else {
        eprintln!("error: no root admits an expansion");
        EXIT_NON_HYPERBOLIC
    }
}

#[derive(Serialize)]
struct FullReport<'a> {
    analysis: &'a AnalysisReport,
    expansion: &'a report::ExpansionReport,
    validation: Option<&'a report::ValidationSummary>,
}

fn cmd_report(v: &ValidateArgs) -> Result<u8, Failure> {
    let c = &v.common;
    let (spec, mut opts) = load_problem(&c.problem)?;
    apply_common(c, &mut opts)?;
    let (analysis, roots) = run_analysis(&spec, &opts)?;
    let (exp, _) = report::expand_problem(&spec, &analysis, &roots, &opts);
    let summary = analysis.any_expandable().then(|| {
        report::validate_problem(&spec, &analysis, &roots, None, v.max_order, &opts.bind, &validate_options(v))
    });
    let full = FullReport { analysis: &analysis, expansion: &exp, validation: summary.as_ref() };
    let text = || {
        let mut s = report::render_analysis(&analysis);
        s.push('\n');
        s.push_str(&report::render_expansion(&exp));
        if let Some(v) = &summary {
            s.push('\n');
            s.push_str(&report::render_validation(v));
        }
        s
    };
    let csv = c.csv.as_ref().map(|_| report::expansion_csv(&exp));
    emit(c, &full, text, csv)?;
    Ok(match &summary {
        None => no_expandable_root(&analysis),
        Some(s) if !s.pass => EXIT_VALIDATION,
        Some(_) => EXIT_OK,
    })
}

fn cmd_examples(a: &ExamplesArgs) -> Result<u8, Failure> {
    match &a.show {
        Some(name) => {
            let text = builtins::source(name).ok_or_else(|| Failure::from(Error::UnknownBuiltin(name.clone())))?;
            write_stdout(text)?;
        }
        None => {
            let mut listing = String::new();
            for name in builtins::names() {
                let spec = builtins::load(name, &Params::new())?;
                listing.push_str(&format!("{name:<20} {}\n", spec.description));
            }
            write_stdout(&listing)?;
        }
    }
    Ok(EXIT_OK)
}
