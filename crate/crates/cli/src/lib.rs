//! Command-line driver: `search`, `evaluate`, `diff` and `sweep`.

pub mod report;
pub mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use padesr_core::diff::{differentiate_with, second_derivative, DiffError, IcDerivatives};
use padesr_core::expr::{parse, Bindings, Expr, ExprError, Notation, ParseMode, TokenSet, Var};
use padesr_core::pde::{build_case, objective, InitialTime, ObjectiveConfig};
use padesr_core::search::{run_search, Algorithm, SearchConfig};

pub use padesr_core::pde::CaseId;
pub use report::{format_g6, parse_report, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ExprError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "padesr",
    version,
    about = "Fixed-depth symbolic search for PDE solutions",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for an expression solving one of the advection-diffusion cases.
    Search(SearchArgs),
    /// Score an expression and print every objective component.
    Evaluate(EvaluateArgs),
    /// Differentiate an expression symbolically.
    Diff(DiffArgs),
    /// Run the configuration grid and write a ranked CSV.
    Sweep(sweep::SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ObjectiveArgs {
    /// Gate threshold on the first derivatives (default 1/sqrt(2)).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Interior mesh as nx,ny,nt.
    #[arg(long, value_parser = parse_mesh)]
    pub mesh: Option<[usize; 3]>,
    #[arg(long, default_value = "frozen")]
    pub ic_derivatives: IcDerivatives,
    #[arg(long, default_value = "zero")]
    pub initial_time: InitialTime,
}

impl ObjectiveArgs {
    pub fn config(&self) -> Result<ObjectiveConfig, CliError> {
        let mut c = ObjectiveConfig {
            ic_derivatives: self.ic_derivatives,
            initial_time: self.initial_time,
            ..Default::default()
        };
        if let Some(t) = self.threshold {
            if !(t >= 0.0) {
                return Err(CliError::Usage(format!("--threshold must be >= 0, got {t}")));
            }
            c.threshold = t;
        }
        if let Some(m) = self.mesh {
            c.mesh = m;
        }
        Ok(c)
    }
}

pub fn parse_mesh(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("mesh '{s}' must be nx,ny,nt"));
    };
    let n = |p: &str| -> Result<usize, String> {
        match p.parse::<usize>() {
            Ok(v) if v >= 2 => Ok(v),
            _ => Err(format!("mesh size '{p}' must be an integer >= 2")),
        }
    };
    Ok([n(a)?, n(b)?, n(c)?])
}

fn bindings(binds: &[String]) -> Result<Bindings, CliError> {
    let mut b = Bindings::new();
    for s in binds {
        b.bind_assignment(s).map_err(CliError::Usage)?;
    }
    Ok(b)
}

fn parse_free(text: &str, notation: Notation, binds: &[String]) -> Result<Expr, CliError> {
    let mode = ParseMode::Free(bindings(binds)?);
    parse(text, notation, &mode).map_err(|e| match e {
        ExprError::UnknownToken { position, text } if binds.is_empty() && text.contains('_') => {
            CliError::Usage(format!(
                "unknown token '{text}' at position {position}; bind it with --bind {text}=<value>"
            ))
        }
        other => other.into(),
    })
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long, default_value = "case1")]
    case: CaseId,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value = "prefix")]
    notation: Notation,
    #[arg(long, default_value = "vars+const")]
    tokens: TokenSet,
    #[arg(long, env = "PADESR_THREADS", default_value_t = 1)]
    threads: usize,
    /// Time budget in seconds.
    #[arg(long, default_value_t = 5.0)]
    time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after this many objective evaluations.
    #[arg(long)]
    max_evals: Option<u64>,
    /// Starting expression for `sa`, in the search notation.
    #[arg(long, allow_hyphen_values = true)]
    seed_expr: Option<String>,
    /// Name binding for free tokens in --seed-expr, e.g. y_0=y_min.
    #[arg(long)]
    bind: Vec<String>,
    /// Write the full report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    objective: ObjectiveArgs,
}

pub fn time_budget(seconds: f64, flag: &str) -> Result<Duration, CliError> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(CliError::Usage(format!("{flag} must be a positive number of seconds")));
    }
    Ok(Duration::from_secs_f64(seconds))
}

fn check_threads(threads: usize) -> Result<usize, CliError> {
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok(threads)
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn cmd_search(a: SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.seed_expr.is_some() && a.algo != Algorithm::Sa {
        return Err(CliError::Usage("--seed-expr is only used by --algo sa".into()));
    }
    let mut c = SearchConfig::new(a.algo, a.depth, a.notation, a.tokens);
    c.threads = check_threads(a.threads)?;
    c.time_budget = time_budget(a.time, "--time")?;
    c.seed = a.seed;
    c.max_evals = a.max_evals;
    c.objective = a.objective.config()?;
    if let Some(s) = &a.seed_expr {
        c.seed_expr = Some(parse_free(s, a.notation, &a.bind)?);
    }
    let data = build_case(a.case, &c.objective);
    let result = run_search(&c, &data);
    let report = report::search_report(a.case, &c, &result);
    let text = report.to_text();
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            let _ = writeln!(out, "best={}", report.get("best.expr").unwrap_or(""));
            let _ = writeln!(out, "infix={}", report.get("best.infix").unwrap_or(""));
            let _ = writeln!(out, "mse={}", result.best_mse());
            let _ = writeln!(out, "evaluations={}", result.evaluations);
            let _ = writeln!(out, "report={}", path.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, default_value = "case1")]
    case: CaseId,
    #[arg(long, default_value = "prefix")]
    notation: Notation,
    #[arg(long, allow_hyphen_values = true)]
    expr: String,
    /// Values for learnable slots C0, C1, ... as a comma list.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    consts: Vec<f64>,
    /// Name binding for free tokens, e.g. y_0=y_min.
    #[arg(long)]
    bind: Vec<String>,
    #[command(flatten)]
    objective: ObjectiveArgs,
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let e = parse_free(&a.expr, a.notation, &a.bind)?;
    if e.slot_count() > a.consts.len() {
        return Err(CliError::Usage(format!(
            "expression has {} learnable slot(s) but --consts gives {}",
            e.slot_count(),
            a.consts.len()
        )));
    }
    let cfg = a.objective.config()?;
    let data = build_case(a.case, &cfg);
    let b = objective(&e, &data, &a.consts, &cfg);
    let mut r = Report::default();
    r.push("case", a.case.name());
    r.push("expr", e.to_text());
    r.push("infix", e.render_infix());
    report::push_breakdown(&mut r, &b);
    let _ = out.write_all(r.to_text().as_bytes());
    Ok(())
}

#[derive(Debug, Args)]
struct DiffArgs {
    #[arg(long, allow_hyphen_values = true)]
    expr: String,
    #[arg(long, default_value = "prefix")]
    notation: Notation,
    #[arg(long)]
    wrt: Var,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,
    #[arg(long, default_value = "analytic")]
    ic_derivatives: IcDerivatives,
    #[arg(long)]
    bind: Vec<String>,
}

fn cmd_diff(a: DiffArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let e = parse_free(&a.expr, a.notation, &a.bind)?;
    let d = match a.order {
        1 => differentiate_with(&e, a.wrt, a.ic_derivatives)?,
        _ => second_derivative(&e, a.wrt, a.ic_derivatives)?,
    };
    let _ = writeln!(out, "derivative={}", d.to_text());
    let _ = writeln!(out, "infix={}", d.render_infix());
    Ok(())
}

/// Replace `--config path` with the path's `key=value` lines as flags, placed right
/// after the subcommand so that explicit flags (later on the line) win.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text =
        std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let mut injected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: expected key=value", i + 1)))?;
        injected.push(format!("--{}", k.trim()));
        injected.push(v.trim().to_string());
    }
    let at = rest.len().min(2);
    rest.splice(at..at, injected);
    Ok(rest)
}

/// Run the CLI on `args` (program name first); returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Search(a) => cmd_search(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Diff(a) => cmd_diff(a, out),
        Command::Sweep(a) => sweep::cmd_sweep(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
