//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid model or observations (with a JSON
//! error report on stdout), 2 usage or I/O errors.

pub mod dsl;
pub mod obs;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::calculi::{Calculus, Cost};
use crate::explain::{expand_link_faults, Diagnosis, Explanation};
use crate::model::{ground, validate, ModelDef};
use crate::sim::{oracle_explanations, simulate, Injection};
use crate::theory::{compile, CausalTheory};

pub use dsl::{parse_model, write_model, ParseError};
pub use obs::{parse_observations, ObsError};

/// Environment variable naming the time unit of models whose header has none.
pub const TIME_UNIT_VAR: &str = "FAULTCORR_TIME_UNIT";

#[derive(Debug, Parser)]
#[command(name = "faultcorr", version, about = "Temporal abductive fault correlation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model and report errors and warnings.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compile a model to its causal theory.
    Compile {
        #[arg(long)]
        model: PathBuf,
        /// Print the canonical model text with the rules as comments.
        #[arg(long)]
        dump: bool,
    },
    /// Rank explanations of an observation log.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value = "probabilistic", value_parser = parse_calculus)]
        calculus: Calculus,
        /// Cost bound; `inf` for no bound.
        #[arg(long, default_value = "inf", value_parser = parse_bound)]
        bound: f64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also emit explanations with working links replaced by link faults.
        #[arg(long)]
        link_faults: bool,
    },
    /// Propagate injected faults forward and print the observation log.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// `instance.state=mode@time`; repeatable.
        #[arg(long)]
        inject: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        horizon: Option<i64>,
    },
    /// Exhaustive reference explanations for small models.
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value = "probabilistic", value_parser = parse_calculus)]
        calculus: Calculus,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn parse_calculus(s: &str) -> Result<Calculus, String> {
    s.parse().map_err(|e: crate::calculi::CostError| e.to_string())
}

fn parse_bound(s: &str) -> Result<f64, String> {
    if s == "inf" || s == "+inf" {
        return Ok(f64::INFINITY);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 => Ok(v),
        _ => Err(format!("bound must be a non-negative number or `inf`, got `{s}`")),
    }
}

enum Failure {
    Invalid(serde_json::Value),
    Usage(String),
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_def(path: &Path) -> Result<ModelDef, Failure> {
    let text = read(path)?;
    let unit = std::env::var(TIME_UNIT_VAR).ok();
    dsl::parse_model(&text, unit.as_deref()).map_err(|e| Failure::Invalid(report::parse_error(e.line, &e.message)))
}

fn load_theory(path: &Path) -> Result<CausalTheory, Failure> {
    let def = load_def(path)?;
    let r = validate(&def);
    if r.has_errors() {
        return Err(Failure::Invalid(report::validation(&r)));
    }
    let gm = ground(&def).map_err(|e| Failure::Invalid(json!({"errors": [{"severity": "error", "line": 0, "location": "model", "message": e.to_string()}], "warnings": []})))?;
    compile(&gm).map_err(|e| Failure::Invalid(json!({"errors": [{"severity": "error", "line": 0, "location": "theory", "message": e.to_string()}], "warnings": []})))
}

fn input_error(location: &str, message: String) -> Failure {
    Failure::Invalid(json!({"errors": [{"severity": "error", "line": 0, "location": location, "message": message}], "warnings": []}))
}

fn emit(io: &mut Io<'_>, theory: &CausalTheory, list: &[Explanation], format: Format) {
    let text = match format {
        Format::Json => report::to_string(&report::explanations(theory, list)),
        Format::Table => report::table(theory, list),
    };
    let _ = io.out.write_all(text.as_bytes());
}

fn execute(cmd: Command, io: &mut Io<'_>) -> Result<(), Failure> {
    match cmd {
        Command::Validate { model } => {
            let def = load_def(&model)?;
            let r = validate(&def);
            let _ = io.out.write_all(report::to_string(&report::validation(&r)).as_bytes());
            if r.has_errors() {
                return Err(Failure::Invalid(serde_json::Value::Null));
            }
        }
        Command::Compile { model, dump } => {
            let theory = load_theory(&model)?;
            if dump {
                let mut text = write_model(&theory.model.def);
                text.push_str("\n# theory\n");
                for line in theory.to_string().lines() {
                    text.push_str("# ");
                    text.push_str(line);
                    text.push('\n');
                }
                let _ = io.out.write_all(text.as_bytes());
            } else {
                let summary = json!({
                    "causes": theory.model.causes.iter().map(|c| c.label.clone()).collect::<Vec<_>>(),
                    "events": theory.events.iter().map(|e| e.name.clone()).collect::<Vec<_>>(),
                    "rules": theory.to_string().lines().map(str::to_string).collect::<Vec<_>>(),
                    "warnings": theory.warnings,
                });
                let _ = io.out.write_all(report::to_string(&summary).as_bytes());
            }
            for w in &theory.warnings {
                let _ = writeln!(io.err, "warning: {w}");
            }
        }
        Command::Explain { model, obs, calculus, bound, max, format, link_faults } => {
            let theory = load_theory(&model)?;
            let observations = parse_observations(&read(&obs)?).map_err(|e| input_error("observations", e.to_string()))?;
            let mut d = Diagnosis::new(&theory, &observations, calculus).map_err(|e| input_error("observations", e.to_string()))?;
            let mut set = d.explanations(Cost(bound));
            if link_faults {
                set = expand_link_faults(&set, &theory, calculus, Cost(bound));
            }
            let mut list = set.explanations;
            if let Some(m) = max {
                list.truncate(m as usize);
            }
            emit(io, &theory, &list, format);
        }
        Command::Simulate { model, inject, seed, horizon } => {
            let theory = load_theory(&model)?;
            let injections = inject
                .iter()
                .map(|s| Injection::parse(&theory.model, s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let log = simulate(&theory, &injections, seed, horizon.unwrap_or(i64::MAX)).map_err(|e| input_error("simulation", e.to_string()))?;
            let _ = io.out.write_all(log.to_jsonl().as_bytes());
        }
        Command::Oracle { model, obs, calculus, max, format } => {
            let theory = load_theory(&model)?;
            let observations = parse_observations(&read(&obs)?).map_err(|e| input_error("observations", e.to_string()))?;
            let set = oracle_explanations(&theory, &observations, calculus).map_err(|e| input_error("oracle", e.to_string()))?;
            let mut list = set.explanations;
            if let Some(m) = max {
                list.truncate(m as usize);
            }
            emit(io, &theory, &list, format);
        }
    }
    Ok(())
}

/// Runs one command line (including the program name) and returns the exit
/// code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { out, err };
    match execute(cli.command, &mut io) {
        Ok(()) => 0,
        Err(Failure::Invalid(v)) => {
            if !v.is_null() {
                let _ = io.out.write_all(report::to_string(&v).as_bytes());
            }
            1
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(io.err, "error: {m}");
            2
        }
    }
}
