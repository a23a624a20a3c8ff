//! Pipeline behind the `ffilint` command: extract, resolve, graph, lint.
//!
//! Every stage reads and writes plain CSV files in an IR directory, so the
//! stages can run one at a time or all at once through [`cmd_check`].

pub mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ffilint_core::callgraph::{build_graph, emit_dot, emit_json, GraphError};
use ffilint_core::cpp::parse_cpp_unit;
use ffilint_core::diag::Diagnostics;
use ffilint_core::ffi::{
    BindingRecord, BindingStatus, FfiFilter, FilterOutput, Pybind11Filter, ResolvedCall,
};
use ffilint_core::ir::{read_table, write_csv, Record};
use ffilint_core::lint::{lint, LintInput, LintReport, Table};
use ffilint_core::model::{FunctionDef, Language};
use ffilint_core::python::parse_python_unit;
use ffilint_core::{ExtractionTables, IrError};
use thiserror::Error;
use walkdir::WalkDir;

pub use config::Settings;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub const DEFAULT_OUT: &str = "ffilint-out";
pub const LINT_JSON: &str = "lint.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: no Python or C++ source files found")]
    NoUnits(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Ir(#[from] IrError),

    #[error("{dir}: missing {file}; run `ffilint {stage}` first")]
    MissingStage {
        dir: PathBuf,
        file: &'static str,
        stage: &'static str,
    },

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("{0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One source file to analyse, with its repository-relative path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub language: Language,
    pub text: String,
}

pub fn classify(path: &str, settings: &Settings) -> Option<Language> {
    let ext = Path::new(path).extension()?.to_str()?;
    if settings.py_ext.iter().any(|e| e == ext) {
        Some(Language::Python)
    } else if settings
        .cpp_ext
        .iter()
        .chain(&settings.header_ext)
        .any(|e| e == ext)
    {
        Some(Language::Cpp)
    } else {
        None
    }
}

fn relative(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    parts.join("/")
}

/// Collects analysable files under `roots`. Paths are relative to their
/// root; hidden directories are skipped and symlinks are not followed.
pub fn discover(
    roots: &[PathBuf],
    settings: &Settings,
    diag: &mut Diagnostics,
) -> Result<Vec<SourceFile>, CliError> {
    let mut files = Vec::new();
    for root in roots {
        let meta = fs::metadata(root).map_err(io_err(root))?;
        let base = if meta.is_file() {
            root.parent().unwrap_or(Path::new("")).to_path_buf()
        } else {
            root.clone()
        };
        let walker = WalkDir::new(root)
            .follow_links(false)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
        for entry in walker {
            let entry = entry.map_err(|e| CliError::Io {
                path: e.path().unwrap_or(root).to_path_buf(),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let path = relative(entry.path(), &base);
            let Some(language) = classify(&path, settings) else {
                continue;
            };
            let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
            let text = match String::from_utf8(bytes) {
                Ok(text) => text,
                Err(e) => {
                    diag.warn(&path, None, "not valid UTF-8; invalid bytes replaced");
                    String::from_utf8_lossy(e.as_bytes()).into_owned()
                }
            };
            files.push(SourceFile {
                path,
                language,
                text,
            });
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Default)]
pub struct ExtractReport {
    pub tables: ExtractionTables,
    pub diagnostics: Diagnostics,
    pub py_units: usize,
    pub cpp_units: usize,
}

impl ExtractReport {
    pub fn summary(&self) -> String {
        format!("PY={} CPP={}", self.py_units, self.cpp_units)
    }
}

/// Runs both extractors. The result does not depend on the order of `files`.
pub fn extract_sources(files: &[SourceFile]) -> ExtractReport {
    let mut report = ExtractReport::default();
    for file in files {
        let x = match file.language {
            Language::Python => {
                report.py_units += 1;
                parse_python_unit(&file.text, &file.path)
            }
            Language::Cpp => {
                report.cpp_units += 1;
                parse_cpp_unit(&file.text, &file.path)
            }
        };
        report.tables.extend(x.tables);
        report.diagnostics.merge(x.diagnostics);
    }
    report.tables.canonicalize();
    report.diagnostics.warnings.sort();
    report
}

pub fn cmd_extract(
    roots: &[PathBuf],
    settings: &Settings,
    out: &Path,
) -> Result<ExtractReport, CliError> {
    let mut diag = Diagnostics::default();
    let files = discover(roots, settings, &mut diag)?;
    if files.is_empty() {
        let names: Vec<String> = roots.iter().map(|r| r.display().to_string()).collect();
        return Err(CliError::NoUnits(names.join(", ")));
    }
    let mut report = extract_sources(&files);
    diag.merge(report.diagnostics);
    report.diagnostics = diag;
    fs::create_dir_all(out).map_err(io_err(out))?;
    report.tables.write(out)?;
    Ok(report)
}

fn require(dir: &Path, file: &'static str, stage: &'static str) -> Result<(), CliError> {
    if dir.join(file).is_file() {
        Ok(())
    } else {
        Err(CliError::MissingStage {
            dir: dir.to_path_buf(),
            file,
            stage,
        })
    }
}

fn require_extraction(dir: &Path) -> Result<(), CliError> {
    ExtractionTables::FILE_NAMES
        .iter()
        .try_for_each(|f| require(dir, f, "extract"))
}

/// `N bindings (resolved/anonymous/unresolved)`.
pub fn binding_summary(bindings: &[BindingRecord]) -> String {
    let count = |s: BindingStatus| bindings.iter().filter(|b| b.status == s).count();
    let n = bindings.len();
    format!(
        "{n} binding{} ({}/{}/{})",
        if n == 1 { "" } else { "s" },
        count(BindingStatus::Resolved),
        count(BindingStatus::Anonymous),
        count(BindingStatus::Unresolved)
    )
}

pub fn cmd_resolve(dir: &Path) -> Result<FilterOutput, CliError> {
    require_extraction(dir)?;
    let tables = ExtractionTables::read(dir)?;
    let output = Pybind11Filter.run(&tables);
    write_csv(&output.bindings, dir)?;
    write_csv(&output.calls, dir)?;
    Ok(output)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl GraphFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            _ => Err(CliError::Config(format!(
                "unknown graph format `{s}` (expected dot or json)"
            ))),
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            GraphFormat::Dot => "graph.dot",
            GraphFormat::Json => "graph.json",
        }
    }
}

pub fn render_graph(
    defs: &[FunctionDef],
    calls: &[ResolvedCall],
    format: GraphFormat,
) -> Result<String, CliError> {
    let graph = build_graph(defs, calls)?;
    Ok(match format {
        GraphFormat::Dot => emit_dot(&graph),
        GraphFormat::Json => emit_json(&graph),
    })
}

/// Writes the call graph to `out`, or to `graph.<fmt>` inside `dir`.
pub fn cmd_graph(dir: &Path, format: GraphFormat, out: Option<&Path>) -> Result<PathBuf, CliError> {
    require(dir, FunctionDef::FILE_NAME, "extract")?;
    require(dir, ResolvedCall::FILE_NAME, "resolve")?;
    let defs: Vec<FunctionDef> = read_table(dir)?;
    let calls: Vec<ResolvedCall> = read_table(dir)?;
    let text = render_graph(&defs, &calls, format)?;
    let path = out.map_or_else(|| dir.join(format.file_name()), Path::to_path_buf);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn lint_tables(
    tables: &ExtractionTables,
    bindings: &[BindingRecord],
    settings: &Settings,
) -> LintReport {
    let input = LintInput {
        defs: &tables.defs,
        calls: &tables.calls,
        imports: &tables.imports,
        includes: &tables.includes,
        bindings,
    };
    lint(input, &settings.lint_config())
}

pub fn cmd_lint(dir: &Path, settings: &Settings) -> Result<LintReport, CliError> {
    require_extraction(dir)?;
    require(dir, BindingRecord::FILE_NAME, "resolve")?;
    let tables = ExtractionTables::read(dir)?;
    let bindings: Vec<BindingRecord> = read_table(dir)?;
    Ok(lint_tables(&tables, &bindings, settings))
}

pub fn lint_exit_code(report: &LintReport, strict: bool) -> i32 {
    if report.violations() > 0 || (strict && report.advisories() > 0) {
        EXIT_VIOLATIONS
    } else {
        EXIT_CLEAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            _ => Err(CliError::Config(format!(
                "unknown report format `{s}` (expected text or json)"
            ))),
        }
    }
}

/// Result of a full pipeline run over one repository.
#[derive(Debug, Clone)]
pub struct RepoRun {
    pub name: String,
    pub work_dir: PathBuf,
    pub extract: ExtractReport,
    pub bindings: Vec<BindingRecord>,
    pub lint: LintReport,
}

fn repo_name(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(root)
        .file_name()
        .map_or_else(|| "repo".to_string(), |n| n.to_string_lossy().into_owned())
}

/// Runs every stage over one repository into `work`, leaving the same files
/// the individual subcommands would.
pub fn run_repo(root: &Path, settings: &Settings, work: &Path) -> Result<RepoRun, CliError> {
    let extract = cmd_extract(&[root.to_path_buf()], settings, work)?;
    let resolved = cmd_resolve(work)?;
    cmd_graph(work, GraphFormat::Dot, None)?;
    let lint = cmd_lint(work, settings)?;
    let path = work.join(LINT_JSON);
    fs::write(&path, lint.to_json()).map_err(io_err(&path))?;
    Ok(RepoRun {
        name: repo_name(root),
        work_dir: work.to_path_buf(),
        extract,
        bindings: resolved.bindings,
        lint,
    })
}

/// Full run over one or more repositories. A single root uses `out` as its
/// work directory; several roots get one subdirectory each.
pub fn cmd_check(
    roots: &[PathBuf],
    settings: &Settings,
    out: &Path,
) -> Result<Vec<RepoRun>, CliError> {
    let mut runs = Vec::new();
    let mut used = BTreeSet::new();
    for root in roots {
        let work = if roots.len() == 1 {
            out.to_path_buf()
        } else {
            let base = repo_name(root);
            let mut name = base.clone();
            let mut k = 1;
            while !used.insert(name.clone()) {
                k += 1;
                name = format!("{base}-{k}");
            }
            out.join(name)
        };
        runs.push(run_repo(root, settings, &work)?);
    }
    Ok(runs)
}

pub fn check_exit_code(runs: &[RepoRun], strict: bool) -> i32 {
    runs.iter()
        .map(|r| lint_exit_code(&r.lint, strict))
        .max()
        .unwrap_or(EXIT_CLEAN)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Human-readable summary of a check run, ending with the compliance table.
pub fn render_check(runs: &[RepoRun]) -> String {
    let mut out = String::new();
    for run in runs {
        let modules = run.lint.report.per_module.len();
        let _ = writeln!(
            out,
            "{}: {}, {}, {} module{}",
            run.name,
            run.extract.summary(),
            binding_summary(&run.bindings),
            modules,
            if modules == 1 { "" } else { "s" }
        );
        for (module, s) in &run.lint.report.per_module {
            let _ = writeln!(
                out,
                "  {module}: M1 {} M2 {} M3 {}{}",
                pass(s.m1_pass),
                pass(s.m2_pass),
                pass(s.m3_pass),
                if s.uses_lambda { " (lambda)" } else { "" }
            );
        }
        for f in &run.lint.findings {
            let location = if f.unit.is_empty() {
                String::from("-")
            } else {
                format!("{}:{}", f.unit, f.line)
            };
            let _ = writeln!(out, "    {} {location}: {}", f.rule, f.message);
        }
    }
    out.push('\n');
    out.push_str(&Table::from_reports(runs.iter().map(|r| &r.lint.report)).render());
    out
}

/// Machine-readable summary: one lint report per repository.
pub fn render_check_json(runs: &[RepoRun]) -> String {
    let mut s = String::from("{\n");
    for (i, run) in runs.iter().enumerate() {
        let body = run.lint.to_json();
        let body = body.trim_end().replace('\n', "\n  ");
        let name = serde_json::to_string(&run.name).expect("string serializes");
        let _ = write!(s, "  {name}: {body}");
        s.push_str(if i + 1 < runs.len() { ",\n" } else { "\n" });
    }
    s.push_str("}\n");
    s
}
