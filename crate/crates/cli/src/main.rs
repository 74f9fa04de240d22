use std::io::Write;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use poisson_stab::catalog::{self, EntryKind, DEFAULT_SEED};
use poisson_stab::dynamics::ProbeOptions;
use poisson_stab::Params;
use poisson_stab_cli::commands::{self, AnalyzeOptions, SimulateOptions};
use poisson_stab_cli::report::CheckJson;
use poisson_stab_cli::{CliError, ErrorKind, ProbeJson, SystemFile, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "poistab", version, about = "Stability of equilibria of Poisson systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide stability of the equilibrium of a system file.
    Analyze {
        #[arg(long)]
        system: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<String>,
        /// Also run the single-piece energy-Casimir variant.
        #[arg(long)]
        single_piece: bool,
    },
    /// Integrate a trajectory and write it as CSV.
    Simulate {
        #[arg(long)]
        system: String,
        /// Initial state; defaults to the equilibrium.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<String>,
    },
    /// Confinement probe around the equilibrium.
    Probe(ProbeArgs),
    /// Builtin examples.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    system: String,
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    trials: usize,
    #[arg(long, default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List entry names.
    List,
    /// Print one entry as JSON.
    Show { name: String },
    /// Check expected verdicts; exit 1 on any mismatch.
    Check {
        names: Vec<String>,
        /// Time budget in seconds; entries not started in time are skipped.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the full outcome table as JSON.
        #[arg(long)]
        json: Option<String>,
    },
    /// Write an entry as a system file.
    Export {
        name: String,
        /// Parameter override `name=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long)]
        out: Option<String>,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn emit(out: Option<&str>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, &e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(|e| CliError::io("<stdout>", &e))
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Analyze {
            system,
            report,
            single_piece,
        } => {
            let sys = SystemFile::read(&system)?.load()?;
            let r = commands::analyze(&sys, AnalyzeOptions { single_piece })?;
            emit(report.as_deref(), &r.to_json())?;
            eprintln!("{}: {}", sys.name, commands::verdict_label(r.verdict.value));
            Ok(0)
        }
        Command::Simulate {
            system,
            x0,
            t_final,
            tol,
            samples,
            out,
        } => {
            let sys = SystemFile::read(&system)?.load()?;
            let rec = commands::simulate(&sys, &SimulateOptions { x0, t_final, tol, samples })?;
            emit(out.as_deref(), rec.to_csv().trim_end())?;
            eprint!("{}", commands::drift_summary(&rec));
            Ok(0)
        }
        Command::Probe(a) => {
            let sys = SystemFile::read(&a.system)?.load()?;
            let opts = ProbeOptions {
                tol: a.tol,
                ..ProbeOptions::new(a.radius, a.deltas, a.trials, a.t_final, a.seed)
            };
            let report = commands::probe(&sys.system, &sys.equilibrium, &opts, commands::worker_count())?;
            for s in &report.summaries {
                eprintln!("delta {:e}: {}/{} confined", s.delta, s.confined, s.trials);
            }
            emit(a.out.as_deref(), &ProbeJson::new(&sys.name, report).to_json())?;
            Ok(0)
        }
        Command::Catalog { command } => catalog_command(command),
    }
}

fn catalog_command(cmd: CatalogCommand) -> Result<u8, CliError> {
    match cmd {
        CatalogCommand::List => {
            for e in catalog::entries() {
                let kind = match e.kind {
                    EntryKind::Runnable(_) => "runnable",
                    EntryKind::DocumentationOnly { .. } => "documentation-only",
                };
                println!("{:<16} {:<19} {}", e.name, kind, e.title);
            }
            Ok(0)
        }
        CatalogCommand::Show { name } => {
            let e = catalog::get_entry(&name)?;
            let mut v = serde_json::json!({
                "name": e.name,
                "title": e.title,
                "quote": e.quote,
            });
            match &e.kind {
                EntryKind::Runnable(t) => {
                    v["runnable"] = true.into();
                    v["grid_points"] = (t.grid)().len().into();
                    v["system"] = serde_json::to_value(SystemFile::from_catalog(&e, &Params::new())?)?;
                }
                EntryKind::DocumentationOnly { reason } => {
                    v["runnable"] = false.into();
                    v["reason"] = (*reason).into();
                }
            }
            emit(None, &serde_json::to_string_pretty(&v)?)?;
            Ok(0)
        }
        CatalogCommand::Check {
            names,
            budget,
            seed,
            json,
        } => {
            let budget = match budget {
                Some(b) if !(b >= 0.0 && b.is_finite()) => return Err(CliError::validation("budget must be a non-negative number of seconds")),
                Some(b) => Some(Duration::from_secs_f64(b)),
                None => None,
            };
            let outcomes = commands::catalog_check(&names, budget, seed, commands::worker_count())?;
            for o in &outcomes {
                println!(
                    "{:<16} {:<10} {}",
                    o.name,
                    commands::status_label(o.status),
                    o.message.as_deref().unwrap_or("")
                );
                for p in o.points.iter().filter(|p| !p.ok) {
                    println!("    {:?}: {}", p.params, p.detail.join("; "));
                }
            }
            let failed = commands::any_failed(&outcomes);
            if let Some(path) = json {
                let j = CheckJson {
                    schema_version: SCHEMA_VERSION,
                    seed,
                    entries: outcomes,
                };
                emit(Some(&path), &serde_json::to_string_pretty(&j)?)?;
            }
            Ok(u8::from(failed))
        }
        CatalogCommand::Export { name, params, out } => {
            let e = catalog::get_entry(&name)?;
            let overrides: Params = params.into_iter().collect();
            emit(out.as_deref(), &SystemFile::from_catalog(&e, &overrides)?.to_json())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let err = CliError::new(ErrorKind::Validation, e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
