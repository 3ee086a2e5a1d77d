//! `aggtl`: check aggregate temporal properties against timed event traces.

mod bench;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use aggtl::checker::{check, Backend, CheckError, CheckReport, CheckSettings, Verdict};
use aggtl::cltlb::{translate_with, TranslateOptions};
use aggtl::formula::{desugar, parse_formula, to_pnf, Formula};
use aggtl::oracle::pair_instances;
use aggtl::smt::SolverConfig;
use aggtl::trace::{
    expand, generate_trace, parse_trace, serialize_trace, GeneratorConfig, PairSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_HOLDS: u8 = 0;
pub const EXIT_VIOLATED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_DISAGREEMENT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "aggtl",
    version,
    about = "Offline checker for temporal properties with aggregate modalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a formula holds on a trace at one instant.
    Check(CheckArgs),
    /// Print the counter translation of a formula.
    Translate(TranslateArgs),
    /// Generate a random trace.
    Gen(GenArgs),
    /// Time checks over a sweep of trace lengths, windows and bounds; prints CSV.
    Bench(bench::BenchArgs),
}

#[derive(Args)]
struct FormulaSource {
    /// Formula text.
    #[arg(
        short,
        long,
        conflicts_with = "formula_file",
        required_unless_present = "formula_file"
    )]
    formula: Option<String>,
    /// File holding the formula text.
    #[arg(long)]
    formula_file: Option<PathBuf>,
}

impl FormulaSource {
    fn load(&self) -> Result<Formula, Failure> {
        let text = match (&self.formula, &self.formula_file) {
            (Some(f), _) => f.clone(),
            (None, Some(path)) => read(path)?,
            (None, None) => unreachable!("clap requires one formula source"),
        };
        parse_formula(&text).map_err(|e| Failure::input(format!("formula: {e}")))
    }
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// SMT solver binary; defaults to $AGGTL_SOLVER, then `z3`.
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-call solver timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    solver_timeout: f64,
}

#[derive(Args, Clone)]
pub struct EncodingArgs {
    /// Keep count counters modulo `kmax + 1`.
    #[arg(long, requires = "kmax")]
    optimized: bool,
    /// Largest count window covered by the modulo encoding.
    #[arg(long)]
    kmax: Option<u64>,
}

impl EncodingArgs {
    fn modulo(&self) -> Option<u64> {
        self.optimized.then_some(self.kmax).flatten()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Oracle,
    Counters,
    Smt,
    All,
}

impl BackendChoice {
    pub fn backends(self) -> Vec<Backend> {
        match self {
            BackendChoice::Oracle => vec![Backend::Oracle],
            BackendChoice::Counters => vec![Backend::Counters],
            BackendChoice::Smt => vec![Backend::Smt],
            BackendChoice::All => Backend::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Plain,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InstantArg {
    Last,
    At(u64),
}

impl FromStr for InstantArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "last" {
            return Ok(InstantArg::Last);
        }
        s.parse()
            .map(InstantArg::At)
            .map_err(|_| format!("expected `last` or a timestamp, got `{s}`"))
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: FormulaSource,
    /// Trace file, one `timestamp: atom, atom` line per instant.
    #[arg(short, long)]
    trace: PathBuf,
    /// Timestamp to evaluate at, or `last`.
    #[arg(short, long, default_value = "last")]
    instant: InstantArg,
    #[arg(short, long, value_enum, default_value_t = BackendChoice::Counters)]
    backend: BackendChoice,
    #[arg(long, value_enum, default_value_t = OutputFormat::Plain)]
    format: OutputFormat,
    /// Accept distance pairs that do not alternate.
    #[arg(long)]
    lax: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    encoding: EncodingArgs,
}

#[derive(Args)]
struct TranslateArgs {
    #[command(flatten)]
    source: FormulaSource,
    #[command(flatten)]
    encoding: EncodingArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Last timestamp of the trace.
    #[arg(long)]
    horizon: u64,
    /// Fraction of instants carrying events, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    sparseness: f64,
    /// Filler atom as `name` or `name:probability`; repeatable.
    #[arg(long = "atom", value_parser = parse_atom)]
    atoms: Vec<(String, f64)>,
    /// Alternating pair as `start:end:min:max`; repeatable.
    #[arg(long = "pair", value_parser = parse_pair)]
    pairs: Vec<PairSpec>,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_atom(s: &str) -> Result<(String, f64), String> {
    match s.split_once(':') {
        None => Ok((s.to_owned(), 0.5)),
        Some((name, p)) => {
            let p: f64 = p.parse().map_err(|_| format!("bad probability in `{s}`"))?;
            Ok((name.to_owned(), p))
        }
    }
}

fn parse_pair(s: &str) -> Result<PairSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, min, max] = parts[..] else {
        return Err(format!("expected `start:end:min:max`, got `{s}`"));
    };
    let num = |x: &str| {
        x.parse::<u64>()
            .map_err(|_| format!("bad duration `{x}` in `{s}`"))
    };
    Ok(PairSpec {
        start: start.to_owned(),
        end: end.to_owned(),
        min_duration: num(min)?,
        max_duration: num(max)?,
    })
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        let code = match e {
            CheckError::Smt(_) => EXIT_BACKEND,
            CheckError::InstantOutOfRange { .. }
            | CheckError::Alternation(_)
            | CheckError::Translate(_) => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Writes to standard output; a closed pipe is not an error.
pub fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn settings(
    lax: bool,
    solver: &SolverArgs,
    encoding: &EncodingArgs,
) -> Result<CheckSettings, Failure> {
    if !(solver.solver_timeout.is_finite() && solver.solver_timeout > 0.0) {
        return Err(Failure::input("--solver-timeout must be positive"));
    }
    Ok(CheckSettings {
        lax,
        modulo: encoding.modulo(),
        solver: SolverConfig::resolve(
            solver.solver.clone(),
            Duration::from_secs_f64(solver.solver_timeout),
        ),
    })
}

fn cmd_check(args: &CheckArgs) -> Result<u8, Failure> {
    let formula = args.source.load()?;
    let trace =
        parse_trace(&read(&args.trace)?).map_err(|e| Failure::input(format!("trace: {e}")))?;
    let instant = match args.instant {
        InstantArg::Last => trace.last_timestamp(),
        InstantArg::At(t) => t,
    };
    let settings = settings(args.lax, &args.solver, &args.encoding)?;
    let mut backends = args.backend.backends();
    if args.lax && backends.len() > 1 && !alternates(&formula, &trace) {
        eprintln!(
            "warning: distance pairs do not alternate; cross-checks skipped, counters backend only"
        );
        backends = vec![Backend::Counters];
    }
    let reports = backends
        .iter()
        .map(|&b| check(&formula, &trace, instant, b, &settings))
        .collect::<Result<Vec<CheckReport>, _>>()?;

    let verdicts: Vec<Verdict> = reports.iter().map(|r| r.verdict).collect();
    if verdicts.windows(2).any(|v| v[0] != v[1]) {
        let bits: Vec<String> = reports
            .iter()
            .map(|r| format!("{}={}", r.backend, u8::from(r.verdict.holds())))
            .collect();
        eprintln!("discrepancy at instant {instant}: {}", bits.join(" "));
        return Ok(EXIT_DISAGREEMENT);
    }
    let verdict = verdicts[0];
    match args.format {
        OutputFormat::Plain => {
            let lines: String = reports.iter().map(|r| r.record() + "\n").collect();
            emit(&lines);
        }
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "verdict": verdict,
                "instant": instant,
                "formula": formula.to_string(),
                "reports": reports,
            });
            emit(&(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"));
        }
    }
    Ok(if verdict.holds() {
        EXIT_HOLDS
    } else {
        EXIT_VIOLATED
    })
}

fn alternates(formula: &Formula, trace: &aggtl::TimedWord) -> bool {
    let dense = expand(trace);
    formula
        .dist_pairs()
        .iter()
        .all(|(s, e)| pair_instances(&dense, s, e).is_ok())
}

fn cmd_translate(args: &TranslateArgs) -> Result<u8, Failure> {
    let formula = args.source.load()?;
    let options = TranslateOptions {
        modulo: args.encoding.modulo(),
    };
    let t = translate_with(&to_pnf(&desugar(&formula)), options)
        .map_err(|e| Failure::input(e.to_string()))?;
    emit(&t.to_string());
    Ok(EXIT_HOLDS)
}

fn cmd_gen(args: &GenArgs) -> Result<u8, Failure> {
    let atoms = if args.atoms.is_empty() && args.pairs.is_empty() {
        vec![("p".to_owned(), 0.5), ("q".to_owned(), 0.5)]
    } else {
        args.atoms.clone()
    };
    let cfg = GeneratorConfig {
        seed: args.seed,
        horizon: args.horizon,
        sparseness: args.sparseness,
        atoms,
        pairs: args.pairs.clone(),
    };
    let text = serialize_trace(&generate_trace(&cfg).map_err(|e| Failure::input(e.to_string()))?);
    match &args.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => emit(&text),
    }
    Ok(EXIT_HOLDS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
