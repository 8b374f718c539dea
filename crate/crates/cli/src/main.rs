//! `impulsive`: command-line front end for the impulsive-extension toolkit.
//!
//! Exit status: 0 when a check passes or a command completes, 1 when a checked
//! condition fails, 2 on malformed input or a numerical error.

mod commands;
mod config;
mod problem_file;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, OrderTarget, Outcome};
use config::{parse_list, RunConfig};
use problem_file::{parse_problem, ProblemFile};

#[derive(Parser, Debug)]
#[command(name = "impulsive", version, about = "Checks maximum principles for impulsive control processes")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Integration steps over the reference parameter interval.
    #[arg(long, global = true, default_value_t = 1000)]
    grid: usize,
    /// Tolerance for equality-type conditions.
    #[arg(long = "tol-eq", global = true)]
    tol_eq: Option<f64>,
    /// Slack for inequality-type conditions.
    #[arg(long = "tol-ineq", global = true)]
    tol_ineq: Option<f64>,
    /// Comma-separated, strictly decreasing epsilon ladder.
    #[arg(long, global = true)]
    ladder: Option<String>,
    /// Report directory (report.txt plus CSV series).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the standing hypotheses on the problem data.
    Validate { file: PathBuf },
    /// Embed a strict-sense process into the space-time system.
    Embed { file: PathBuf },
    /// Canonical parameterization of the reference process.
    Canonicalize { file: PathBuf },
    /// Integrate the reference process and export the trajectory.
    Simulate { file: PathBuf },
    /// Enumerate formal brackets of a given length with switch numbers and smoothness ledgers.
    Brackets {
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        k: u32,
    },
    /// Print the control word realizing a bracket.
    SynthBracket {
        bracket: String,
        /// Total duration of the word.
        #[arg(long)]
        s: f64,
        /// 1-based fields bound to the leaves, e.g. 1,2.
        #[arg(long)]
        fields: Option<String>,
        /// Number of impulse components (defaults to the largest field used).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Fit the remainder order of a needle or bracket-like variation over the ladder.
    VerifyOrder {
        file: PathBuf,
        /// Parameter value of the variation.
        #[arg(long)]
        at: f64,
        /// Needle value "w0, w1..wm, a" (a is 1-based).
        #[arg(long, conflicts_with = "bracket", required_unless_present = "bracket")]
        needle: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        zeta: f64,
        /// Bracket, optionally with fields: "[X1,X2]|1,2".
        #[arg(long)]
        bracket: Option<String>,
    },
    /// First-order maximum principle and complementarity for the file's multiplier.
    CheckMp { file: PathBuf },
    /// Higher-order conditions on brackets and their differentiated forms.
    CheckHo {
        file: PathBuf,
        #[arg(long = "bracket")]
        brackets: Vec<String>,
    },
    /// Search for a multiplier certifying the reference process.
    FindMultiplier {
        file: PathBuf,
        #[arg(long)]
        higher_order: bool,
        #[arg(long = "bracket")]
        brackets: Vec<String>,
    },
    /// Rank conditions I.1, I.2 and the Kalman test.
    Rank {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        length: usize,
        /// Extra evaluation points "x1,..,xn", repeatable.
        #[arg(long = "at")]
        points: Vec<String>,
    },
    /// Fully impulsive classification of the reference process.
    Classify {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        length: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Embed { .. } => "embed",
            Command::Canonicalize { .. } => "canonicalize",
            Command::Simulate { .. } => "simulate",
            Command::Brackets { .. } => "brackets",
            Command::SynthBracket { .. } => "synth-bracket",
            Command::VerifyOrder { .. } => "verify-order",
            Command::CheckMp { .. } => "check-mp",
            Command::CheckHo { .. } => "check-ho",
            Command::FindMultiplier { .. } => "find-multiplier",
            Command::Rank { .. } => "rank",
            Command::Classify { .. } => "classify",
        }
    }
}

fn run_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig {
        grid: c.grid,
        out: c.out.clone(),
        ..RunConfig::default()
    };
    if let Some(v) = c.tol_eq {
        cfg.tol_eq = v;
    }
    if let Some(v) = c.tol_ineq {
        cfg.tol_ineq = v;
    }
    if let Some(l) = &c.ladder {
        cfg.ladder = parse_list(l).map_err(CliError::Input)?;
    }
    cfg.validate().map_err(CliError::Input)?;
    Ok(cfg)
}

fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Validate { file } => commands::validate(&load(file)?),
        Command::Embed { file } => commands::embed(&load(file)?),
        Command::Canonicalize { file } => commands::canonicalize_cmd(&load(file)?, cfg),
        Command::Simulate { file } => commands::simulate(&load(file)?, cfg),
        Command::Brackets { length, k } => commands::brackets(*length, *k),
        Command::SynthBracket { bracket, s, fields, m } => {
            let f = fields.as_deref().map(commands::parse_fields).transpose()?;
            commands::synth_bracket(bracket, *s, f.as_deref(), *m)
        }
        Command::VerifyOrder {
            file,
            at,
            needle,
            zeta,
            bracket,
        } => {
            let target = match (needle, bracket) {
                (Some(n), _) => OrderTarget::Needle {
                    value: parse_list(n).map_err(CliError::Input)?,
                    zeta: *zeta,
                },
                (None, Some(b)) => OrderTarget::Bracket(b.clone()),
                (None, None) => return Err(CliError::Input("give --needle or --bracket".into())),
            };
            commands::verify_order(&load(file)?, cfg, &target, *at)
        }
        Command::CheckMp { file } => commands::check_mp(&load(file)?, cfg),
        Command::CheckHo { file, brackets } => commands::check_ho(&load(file)?, cfg, brackets),
        Command::FindMultiplier {
            file,
            higher_order,
            brackets,
        } => commands::find_multiplier_cmd(&load(file)?, cfg, *higher_order, brackets),
        Command::Rank { file, length, points } => {
            let pts = points
                .iter()
                .map(|p| parse_list(p).map_err(CliError::Input))
                .collect::<Result<Vec<_>, _>>()?;
            commands::rank(&load(file)?, *length, &pts)
        }
        Command::Classify { file, length } => commands::classify(&load(file)?, cfg, *length),
    }
}

fn input_line(cmd: &Command) -> String {
    match cmd {
        Command::Validate { file }
        | Command::Embed { file }
        | Command::Canonicalize { file }
        | Command::Simulate { file }
        | Command::VerifyOrder { file, .. }
        | Command::CheckMp { file }
        | Command::CheckHo { file, .. }
        | Command::FindMultiplier { file, .. }
        | Command::Rank { file, .. }
        | Command::Classify { file, .. } => format!("problem: {}\n", file.display()),
        _ => String::new(),
    }
}

fn write_report(dir: &Path, report: &str, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report)?;
    for (name, contents) in files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match run_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match dispatch(&cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = format!(
        "command: {}\n{}status: {}\n\n[config]\n{}\n[result]\n{}",
        cli.command.name(),
        input_line(&cli.command),
        outcome.verdict.as_str(),
        cfg.to_text(),
        outcome.body
    );
    print!("{report}");
    if let Some(dir) = &cfg.out {
        if let Err(e) = write_report(dir, &report, &outcome.files) {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.verdict.exit_code() as u8)
}
