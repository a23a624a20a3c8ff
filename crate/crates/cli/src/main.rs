use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ffilint::config::ext_list;
use ffilint::{
    binding_summary, check_exit_code, cmd_check, cmd_extract, cmd_graph, cmd_lint, cmd_resolve,
    lint_exit_code, render_check, render_check_json, CliError, GraphFormat, ReportFormat, Settings,
    DEFAULT_OUT, EXIT_ERROR,
};
use ffilint_core::diag::Diagnostics;
use ffilint_core::lint::{render_text, RuleSet};

#[derive(Debug, Parser)]
#[command(
    name = "ffilint",
    version,
    about = "Python/C++ call graphs and pybind11 binding lint"
)]
struct Cli {
    /// Config file with `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Comma-separated C++ source extensions
    #[arg(long, global = true)]
    cpp_ext: Option<String>,

    /// Comma-separated Python extensions
    #[arg(long, global = true)]
    py_ext: Option<String>,

    /// Rules to check, e.g. `m1,m3` (r1 is off unless named)
    #[arg(long, global = true)]
    rules: Option<String>,

    /// Treat advisories as violations
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract facts from source trees into CSV tables
    Extract {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// IR directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve bindings and rewrite cross-language calls
    Resolve { dir: PathBuf },
    /// Build the call graph
    Graph {
        dir: PathBuf,
        #[arg(long, default_value = "dot")]
        format: String,
        /// Output file (default: graph.<format> in the IR directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check bindings against the physical design rules
    Lint {
        dir: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
        /// Report file (default: standard output)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage over one or more repositories
    Check {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        #[arg(long, default_value = "text")]
        format: String,
        /// Work directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.load_config(path)?;
    }
    if let Some(v) = &cli.cpp_ext {
        s.cpp_ext = ext_list(v)?;
    }
    if let Some(v) = &cli.py_ext {
        s.py_ext = ext_list(v)?;
    }
    if let Some(v) = &cli.rules {
        s.rules = RuleSet::parse(v).map_err(CliError::Config)?;
    }
    s.strict |= cli.strict;
    Ok(s)
}

fn report_diagnostics(diag: &Diagnostics) {
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    if diag.skipped_total() > 0 {
        let parts: Vec<String> = diag
            .skipped
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        eprintln!("skipped: {}", parts.join(", "));
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn out_dir(flag: &Option<PathBuf>, s: &Settings) -> PathBuf {
    flag.clone()
        .or_else(|| s.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let s = settings(&cli)?;
    match &cli.command {
        Command::Extract { paths, out } => {
            let report = cmd_extract(paths, &s, &out_dir(out, &s))?;
            report_diagnostics(&report.diagnostics);
            println!("{}", report.summary());
            Ok(0)
        }
        Command::Resolve { dir } => {
            let output = cmd_resolve(dir)?;
            println!("{}", binding_summary(&output.bindings));
            Ok(0)
        }
        Command::Graph { dir, format, out } => {
            let path = cmd_graph(dir, GraphFormat::parse(format)?, out.as_deref())?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
        Command::Lint { dir, format, out } => {
            let format = ReportFormat::parse(format)?;
            let report = cmd_lint(dir, &s)?;
            let text = match format {
                ReportFormat::Text => render_text(&report),
                ReportFormat::Json => report.to_json(),
            };
            emit(&text, out.as_deref())?;
            Ok(lint_exit_code(&report, s.strict))
        }
        Command::Check { roots, format, out } => {
            let format = ReportFormat::parse(format)?;
            let runs = cmd_check(roots, &s, &out_dir(out, &s))?;
            for r in &runs {
                report_diagnostics(&r.extract.diagnostics);
            }
            let text = match format {
                ReportFormat::Text => render_check(&runs),
                ReportFormat::Json => render_check_json(&runs),
            };
            emit(&text, None)?;
            Ok(check_exit_code(&runs, s.strict))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
