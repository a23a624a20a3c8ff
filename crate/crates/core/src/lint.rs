//! Physical-design lint for pybind11 bindings.
//!
//! * M1: Python imports the generated module by name with a plain `import`.
//! * M2: the binding source file is named after the module.
//! * M3: bound functions are declared in the component header and
//!   implemented outside the binding unit.
//! * R1 (opt-in): a binding unit includes its own header first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ffi::{BindingRecord, BindingStatus};
use crate::fqn::FqnTable;
use crate::model::{
    last_dotted, CallSite, FunctionDef, ImportMechanism, ImportRecord, IncludeRecord, Language,
};

crate::model::wire_enum!(
    Rule {
        M1 => "M1",
        M2 => "M2",
        M3 => "M3",
        R1 => "R1",
        FlagAnon => "FLAG_ANON",
        FlagMultiModule => "FLAG_MULTI_MODULE",
        FlagUnresolved => "FLAG_UNRESOLVED",
        FlagUnusedModule => "FLAG_UNUSED_MODULE",
    }
);

impl Rule {
    /// Rule ids fail a module; flags are advisories.
    pub fn is_violation(self) -> bool {
        matches!(self, Rule::M1 | Rule::M2 | Rule::M3 | Rule::R1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule: Rule,
    pub module: String,
    pub unit: String,
    pub line: u32,
    pub message: String,
}

impl LintFinding {
    fn new(rule: Rule, module: &str, unit: &str, line: u32, message: String) -> Self {
        LintFinding {
            rule,
            module: module.to_string(),
            unit: unit.to_string(),
            line,
            message,
        }
    }
}

/// Which rule families to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub m1: bool,
    pub m2: bool,
    pub m3: bool,
    pub r1: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            m1: true,
            m2: true,
            m3: true,
            r1: false,
        }
    }
}

impl RuleSet {
    pub fn none() -> Self {
        RuleSet {
            m1: false,
            m2: false,
            m3: false,
            r1: false,
        }
    }

    /// Parses a comma-separated list such as `m1,m3`.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut set = RuleSet::none();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name.to_ascii_lowercase().as_str() {
                "m1" => set.m1 = true,
                "m2" => set.m2 = true,
                "m3" => set.m3 = true,
                "r1" => set.r1 = true,
                "all" => {
                    set = RuleSet {
                        r1: true,
                        ..RuleSet::default()
                    }
                }
                _ => return Err(format!("unknown rule `{name}` (expected m1, m2, m3, r1)")),
            }
        }
        if set == RuleSet::none() {
            return Err("no rules selected".to_string());
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintConfig {
    pub rules: RuleSet,
    /// Extensions (without dot) accepted for binding source files.
    pub source_exts: Vec<String>,
    pub header_exts: Vec<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            rules: RuleSet::default(),
            source_exts: ["cpp", "cc", "cxx"].map(String::from).to_vec(),
            header_exts: ["h", "hpp", "hh", "hxx"].map(String::from).to_vec(),
        }
    }
}

/// The tables lint needs from one analysis run.
#[derive(Debug, Clone, Copy)]
pub struct LintInput<'a> {
    pub defs: &'a [FunctionDef],
    pub calls: &'a [CallSite],
    pub imports: &'a [ImportRecord],
    pub includes: &'a [IncludeRecord],
    pub bindings: &'a [BindingRecord],
}

fn stem(unit: &str) -> &str {
    Path::new(unit)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(unit)
}

fn extension(unit: &str) -> &str {
    Path::new(unit)
        .extension()
        .and_then(|s| s.to_str())
        .unwrap_or("")
}

/// Module a Python import refers to, by leaf name.
fn imported_modules(imp: &ImportRecord) -> Vec<&str> {
    let mut out = vec![imp.module_leaf()];
    if !imp.member.is_empty() && imp.member != "*" {
        out.push(imp.member.as_str());
    }
    out
}

pub fn check_m1(
    module: &str,
    exposed: &BTreeSet<&str>,
    imports: &[ImportRecord],
    calls: &[CallSite],
) -> Vec<LintFinding> {
    let mut out = Vec::new();
    let refs: Vec<&ImportRecord> = imports
        .iter()
        .filter(|i| imported_modules(i).contains(&module))
        .collect();
    for imp in refs
        .iter()
        .filter(|i| i.mechanism == ImportMechanism::Dynamic)
    {
        out.push(LintFinding::new(
            Rule::M1,
            module,
            &imp.unit,
            imp.line,
            format!(
                "module `{module}` is imported dynamically as `{}`",
                imp.alias
            ),
        ));
    }

    let mut used = !refs.is_empty();
    for call in calls.iter().filter(|c| c.language == Language::Python) {
        let Some((receiver, name)) = call.callee_expr.rsplit_once('.') else {
            continue;
        };
        if last_dotted(receiver) != module || !exposed.contains(name) {
            continue;
        }
        used = true;
        let imported = imports
            .iter()
            .any(|i| i.unit == call.unit && i.alias == receiver);
        if !imported {
            out.push(LintFinding::new(
                Rule::M1,
                module,
                &call.unit,
                call.line,
                format!(
                    "`{}` calls into `{module}` through a name that is never imported",
                    call.callee_expr
                ),
            ));
        }
    }
    if !used {
        let first = exposed.iter().next().copied().unwrap_or_default();
        out.push(LintFinding::new(
            Rule::FlagUnusedModule,
            module,
            "",
            0,
            format!("module `{module}` is bound but never imported from Python (e.g. `{first}`)"),
        ));
    }
    out
}

pub fn check_m2(
    module: &str,
    bindings: &[BindingRecord],
    source_exts: &[String],
) -> Vec<LintFinding> {
    let mut units: BTreeMap<&str, u32> = BTreeMap::new();
    let mut modules_by_unit: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for b in bindings {
        modules_by_unit
            .entry(&b.unit)
            .or_default()
            .insert(&b.module);
        if b.module == module {
            let line = units.entry(&b.unit).or_insert(b.line);
            *line = (*line).min(b.line);
        }
    }
    let mut out = Vec::new();
    for (unit, line) in units {
        let ext = extension(unit);
        if stem(unit) != module {
            out.push(LintFinding::new(
                Rule::M2,
                module,
                unit,
                line,
                format!("binding for module `{module}` is in `{unit}`, not `{module}.<ext>`"),
            ));
        } else if !source_exts.iter().any(|e| e == ext) {
            out.push(LintFinding::new(
                Rule::M2,
                module,
                unit,
                line,
                format!("binding unit `{unit}` does not have a C++ source extension"),
            ));
        }
        let others = &modules_by_unit[unit];
        if others.len() > 1 {
            let names: Vec<&str> = others.iter().copied().collect();
            out.push(LintFinding::new(
                Rule::FlagMultiModule,
                module,
                unit,
                line,
                format!(
                    "`{unit}` defines {} modules: {}",
                    names.len(),
                    names.join(", ")
                ),
            ));
        }
    }
    out
}

/// Include graph over the analysed units.
struct Includes<'a> {
    units: BTreeSet<&'a str>,
    by_unit: BTreeMap<&'a str, Vec<&'a IncludeRecord>>,
}

impl<'a> Includes<'a> {
    fn new(defs: &'a [FunctionDef], includes: &'a [IncludeRecord]) -> Self {
        let mut units: BTreeSet<&str> = defs.iter().map(|d| d.unit.as_str()).collect();
        let mut by_unit: BTreeMap<&str, Vec<&IncludeRecord>> = BTreeMap::new();
        for inc in includes {
            units.insert(&inc.unit);
            by_unit.entry(&inc.unit).or_default().push(inc);
        }
        Includes { units, by_unit }
    }

    /// Units an include directive in `from` may refer to.
    fn targets(&self, from: &str, path: &str) -> Vec<&'a str> {
        let dir = Path::new(from)
            .parent()
            .and_then(|p| p.to_str())
            .unwrap_or("");
        let relative = if dir.is_empty() {
            path.to_string()
        } else {
            format!("{dir}/{path}")
        };
        if let Some(u) = self.units.get(relative.as_str()) {
            return vec![u];
        }
        let suffix = format!("/{path}");
        self.units
            .iter()
            .copied()
            .filter(|u| *u == path || u.ends_with(&suffix))
            .collect()
    }

    /// Units included by `unit` directly or through one included file.
    fn reachable(&self, unit: &str) -> BTreeSet<&'a str> {
        let direct: BTreeSet<&str> = self
            .by_unit
            .get(unit)
            .into_iter()
            .flatten()
            .flat_map(|inc| self.targets(unit, &inc.included_path))
            .collect();
        let mut out = direct.clone();
        for d in direct {
            for inc in self.by_unit.get(d).into_iter().flatten() {
                out.extend(self.targets(d, &inc.included_path));
            }
        }
        out
    }
}

pub fn check_m3(
    module: &str,
    bindings: &[BindingRecord],
    defs: &[FunctionDef],
    includes: &[IncludeRecord],
    header_exts: &[String],
) -> Vec<LintFinding> {
    let table = FqnTable::new(defs);
    let by_fqn: BTreeMap<String, Vec<&FunctionDef>> =
        defs.iter().fold(BTreeMap::new(), |mut m, d| {
            m.entry(table.fqn(d)).or_insert_with(Vec::new).push(d);
            m
        });
    let graph = Includes::new(defs, includes);
    let mut out = Vec::new();

    for b in bindings.iter().filter(|b| b.module == module) {
        let target = by_fqn.get(&b.target_fqn).and_then(|ds| ds.first()).copied();
        let anonymous =
            b.status == BindingStatus::Anonymous || target.is_some_and(|t| t.is_anonymous);
        if anonymous {
            out.push(LintFinding::new(
                Rule::FlagAnon,
                module,
                &b.unit,
                b.line,
                format!("`{}` is bound to an anonymous function", b.exposed_name),
            ));
            out.push(LintFinding::new(
                Rule::M3,
                module,
                &b.unit,
                b.line,
                format!(
                    "`{}` is implemented by a lambda inside the binding, not a declared function",
                    b.exposed_name
                ),
            ));
            continue;
        }
        let (BindingStatus::Resolved, Some(target)) = (b.status, target) else {
            out.push(LintFinding::new(
                Rule::FlagUnresolved,
                module,
                &b.unit,
                b.line,
                format!(
                    "binding of `{}` could not be resolved statically (target `{}`)",
                    b.exposed_name, b.target_fqn
                ),
            ));
            continue;
        };

        let same = |d: &&FunctionDef| {
            d.language == Language::Cpp && d.name == target.name && d.scope == target.scope
        };
        if defs
            .iter()
            .filter(same)
            .any(|d| d.has_body && d.unit == b.unit)
        {
            out.push(LintFinding::new(
                Rule::M3,
                module,
                &b.unit,
                b.line,
                format!(
                    "implementation of `{}` is in the binding unit `{}`",
                    target.name, b.unit
                ),
            ));
        }

        let mut component_stems: BTreeSet<&str> = BTreeSet::from([stem(&b.unit), module]);
        component_stems.extend(
            defs.iter()
                .filter(same)
                .filter(|d| d.has_body)
                .map(|d| stem(&d.unit)),
        );
        let reachable = graph.reachable(&b.unit);
        let declared = defs.iter().filter(same).any(|d| {
            !d.has_body
                && header_exts.iter().any(|e| e == extension(&d.unit))
                && reachable.contains(d.unit.as_str())
                && component_stems.contains(stem(&d.unit))
        });
        if !declared {
            let stems: Vec<&str> = component_stems.iter().copied().collect();
            out.push(LintFinding::new(
                Rule::M3,
                module,
                &b.unit,
                b.line,
                format!(
                    "`{}` is not declared in a component header ({}) included by `{}`",
                    target.name,
                    stems
                        .iter()
                        .map(|s| format!("{s}.h"))
                        .collect::<Vec<_>>()
                        .join(" or "),
                    b.unit
                ),
            ));
        }
    }
    out
}

/// Opt-in check: each binding unit includes its own header first.
pub fn check_r1(
    module: &str,
    bindings: &[BindingRecord],
    includes: &[IncludeRecord],
) -> Vec<LintFinding> {
    let units: BTreeMap<&str, u32> =
        bindings
            .iter()
            .filter(|b| b.module == module)
            .fold(BTreeMap::new(), |mut m, b| {
                let line = m.entry(b.unit.as_str()).or_insert(b.line);
                *line = (*line).min(b.line);
                m
            });
    units
        .into_iter()
        .filter(|(unit, _)| {
            !includes.iter().any(|i| {
                i.unit == *unit && i.is_first_substantive && stem(&i.included_path) == stem(unit)
            })
        })
        .map(|(unit, line)| {
            LintFinding::new(
                Rule::R1,
                module,
                unit,
                line,
                format!(
                    "`{unit}` does not include `{}.h` as its first line of code",
                    stem(unit)
                ),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleStatus {
    pub m1_pass: bool,
    pub m2_pass: bool,
    pub m3_pass: bool,
    pub uses_lambda: bool,
}

impl ModuleStatus {
    pub fn meets_all(&self) -> bool {
        self.m1_pass && self.m2_pass && self.m3_pass
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoStatus {
    pub meets_all: bool,
    pub fails_m1: bool,
    pub fails_m2: bool,
    pub fails_m3: bool,
    pub uses_lambda: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub modules: usize,
    pub meeting_all: usize,
    pub failing_m1: usize,
    pub failing_m2: usize,
    pub failing_m3: usize,
    pub using_lambda: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub per_module: BTreeMap<String, ModuleStatus>,
    pub per_repo: RepoStatus,
    pub counts: Counts,
}

/// Folds findings into module and repository tallies. A repository fails
/// a rule when any of its modules does.
pub fn aggregate(findings: &[LintFinding], modules: &BTreeSet<String>) -> ComplianceReport {
    let mut per_module: BTreeMap<String, ModuleStatus> = modules
        .iter()
        .map(|m| {
            (
                m.clone(),
                ModuleStatus {
                    m1_pass: true,
                    m2_pass: true,
                    m3_pass: true,
                    uses_lambda: false,
                },
            )
        })
        .collect();
    for f in findings {
        let Some(status) = per_module.get_mut(&f.module) else {
            continue;
        };
        match f.rule {
            Rule::M1 => status.m1_pass = false,
            Rule::M2 => status.m2_pass = false,
            Rule::M3 => status.m3_pass = false,
            Rule::FlagAnon => status.uses_lambda = true,
            _ => {}
        }
    }
    let statuses = per_module.values();
    let counts = Counts {
        modules: per_module.len(),
        meeting_all: statuses.clone().filter(|s| s.meets_all()).count(),
        failing_m1: statuses.clone().filter(|s| !s.m1_pass).count(),
        failing_m2: statuses.clone().filter(|s| !s.m2_pass).count(),
        failing_m3: statuses.clone().filter(|s| !s.m3_pass).count(),
        using_lambda: statuses.clone().filter(|s| s.uses_lambda).count(),
    };
    let per_repo = RepoStatus {
        meets_all: counts.meeting_all == counts.modules,
        fails_m1: counts.failing_m1 > 0,
        fails_m2: counts.failing_m2 > 0,
        fails_m3: counts.failing_m3 > 0,
        uses_lambda: counts.using_lambda > 0,
    };
    ComplianceReport {
        per_module,
        per_repo,
        counts,
    }
}

/// Findings and tallies for one repository.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub findings: Vec<LintFinding>,
    pub report: ComplianceReport,
}

impl LintReport {
    pub fn violations(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.rule.is_violation())
            .count()
    }

    pub fn advisories(&self) -> usize {
        self.findings.len() - self.violations()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Runs the selected checks over every bound module.
pub fn lint(input: LintInput<'_>, config: &LintConfig) -> LintReport {
    let mut exposed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for b in input.bindings {
        exposed
            .entry(&b.module)
            .or_default()
            .insert(&b.exposed_name);
    }
    let rules = config.rules;
    let mut findings = Vec::new();
    for (module, names) in &exposed {
        if rules.m1 {
            findings.extend(check_m1(module, names, input.imports, input.calls));
        }
        if rules.m2 {
            findings.extend(check_m2(module, input.bindings, &config.source_exts));
        }
        if rules.m3 {
            findings.extend(check_m3(
                module,
                input.bindings,
                input.defs,
                input.includes,
                &config.header_exts,
            ));
        }
        if rules.r1 {
            findings.extend(check_r1(module, input.bindings, input.includes));
        }
    }
    findings.sort_by(|a, b| {
        (&a.module, &a.unit, a.line, a.rule, &a.message)
            .cmp(&(&b.module, &b.unit, b.line, b.rule, &b.message))
    });
    findings.dedup();
    let modules: BTreeSet<String> = exposed.keys().map(|m| m.to_string()).collect();
    let report = aggregate(&findings, &modules);
    LintReport { findings, report }
}

fn cell(n: usize, total: usize) -> String {
    let pct = if total == 0 {
        0
    } else {
        (200 * n + total) / (2 * total)
    };
    format!("{n} ({pct}%)")
}

/// Row labels of the compliance table, in order.
pub const TABLE_ROWS: [&str; 4] = [
    "Num. rep./mod. meeting M1-M3",
    "Binding misname (fails M2)",
    "Impl. in binding (fails M3)",
    "Uses lambda",
];

/// Repository- and module-level tallies over a set of repositories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub repos: usize,
    pub modules: usize,
    /// `[meets all, fails M2, fails M3, uses lambda]` counts.
    pub repo_counts: [usize; 4],
    pub module_counts: [usize; 4],
}

impl Table {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a ComplianceReport>) -> Self {
        let mut t = Table::default();
        for r in reports {
            t.repos += 1;
            t.modules += r.counts.modules;
            let repo = [
                r.per_repo.meets_all,
                r.per_repo.fails_m2,
                r.per_repo.fails_m3,
                r.per_repo.uses_lambda,
            ];
            let modules = [
                r.counts.meeting_all,
                r.counts.failing_m2,
                r.counts.failing_m3,
                r.counts.using_lambda,
            ];
            for i in 0..4 {
                t.repo_counts[i] += usize::from(repo[i]);
                t.module_counts[i] += modules[i];
            }
        }
        t
    }

    pub fn render(&self) -> String {
        let width = TABLE_ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
        let rows: Vec<(String, String)> = (0..4)
            .map(|i| {
                (
                    cell(self.repo_counts[i], self.repos),
                    cell(self.module_counts[i], self.modules),
                )
            })
            .collect();
        let rep_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(4);
        let mod_w = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "{:width$}  {:>rep_w$}  {:>mod_w$}", "", "Rep.", "Mod.");
        for (label, (rep, module)) in TABLE_ROWS.iter().zip(rows) {
            let _ = writeln!(out, "{label:width$}  {rep:>rep_w$}  {module:>mod_w$}");
        }
        let _ = writeln!(
            out,
            "{:width$}  {:>rep_w$}  {:>mod_w$}",
            "Total", self.repos, self.modules
        );
        out
    }
}

/// Plain-text report: one line per finding, then the compliance table.
pub fn render_text(report: &LintReport) -> String {
    let mut out = String::new();
    for f in &report.findings {
        let location = if f.unit.is_empty() {
            String::from("-")
        } else {
            format!("{}:{}", f.unit, f.line)
        };
        let _ = writeln!(
            out,
            "{:<18} {:<8} {location}: {}",
            f.rule, f.module, f.message
        );
    }
    if !report.findings.is_empty() {
        out.push('\n');
    }
    out.push_str(&Table::from_reports([&report.report]).render());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpp::parse_cpp_unit;
    use crate::ffi::{FfiFilter, Pybind11Filter};
    use crate::ir::ExtractionTables;
    use crate::python::parse_python_unit;

    fn run(units: &[(&str, &str)], rules: RuleSet) -> LintReport {
        let mut t = ExtractionTables::default();
        for (path, src) in units {
            let x = if path.ends_with(".py") {
                parse_python_unit(src, path)
            } else {
                parse_cpp_unit(src, path)
            };
            t.extend(x.tables);
        }
        let out = Pybind11Filter.run(&t);
        let input = LintInput {
            defs: &t.defs,
            calls: &t.calls,
            imports: &t.imports,
            includes: &t.includes,
            bindings: &out.bindings,
        };
        lint(
            input,
            &LintConfig {
                rules,
                ..LintConfig::default()
            },
        )
    }

    fn rules_of(r: &LintReport) -> Vec<(Rule, &str, &str)> {
        r.findings
            .iter()
            .map(|f| (f.rule, f.module.as_str(), f.unit.as_str()))
            .collect()
    }

    const CLEAN: &[(&str, &str)] = &[
        ("A.py", "import B\nx = B.f(34)\n"),
        ("B.h", "#pragma once\nint f(int a);\n"),
        ("B.cpp", "#include \"B.h\"\n#include <pybind11/pybind11.h>\nPYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n"),
        ("f.cpp", "#include \"B.h\"\nint square(int x) { return x * x; }\nint f(int a) { return square(a); }\n"),
    ];

    #[test]
    fn clean_layout() {
        let r = run(
            CLEAN,
            RuleSet {
                r1: true,
                ..RuleSet::default()
            },
        );
        assert!(r.findings.is_empty(), "{:?}", r.findings);
        assert!(r.report.per_repo.meets_all);
        assert_eq!(r.report.counts.meeting_all, 1);
    }

    #[test]
    fn impl_in_binding() {
        let r = run(
            &[
                ("A.py", "import B\nB.f(1)\n"),
                (
                    "B.cpp",
                    "int f(int a){return a*a;}\nPYBIND11_MODULE(B, m) { m.def(\"f\", &f); }\n",
                ),
            ],
            RuleSet::default(),
        );
        assert_eq!(
            rules_of(&r),
            [(Rule::M3, "B", "B.cpp"), (Rule::M3, "B", "B.cpp")]
        );
        assert!(r
            .findings
            .iter()
            .any(|f| f.message.contains("implementation")));
        assert!(r.report.per_repo.fails_m3);
        assert!(!r.report.per_repo.fails_m2);
    }

    #[test]
    fn misnamed_binding() {
        let mut units = CLEAN.to_vec();
        units[2].0 = "bindings.cpp";
        let r = run(&units, RuleSet::default());
        assert_eq!(rules_of(&r), [(Rule::M2, "B", "bindings.cpp")]);
        let r = run(&units, RuleSet::parse("m3").unwrap());
        assert!(r.findings.is_empty(), "{:?}", r.findings);
    }

    #[test]
    fn lambda_binding() {
        let r = run(
            &[
                ("A.py", "import B\nB.g(1)\n"),
                (
                    "B.cpp",
                    "PYBIND11_MODULE(B, m) {\n  m.def(\"g\", [](int a){return a;});\n}\n",
                ),
            ],
            RuleSet::default(),
        );
        assert_eq!(
            rules_of(&r),
            [(Rule::M3, "B", "B.cpp"), (Rule::FlagAnon, "B", "B.cpp")]
        );
        assert!(r.report.per_module["B"].uses_lambda);
        assert!(r.report.per_repo.uses_lambda);
    }

    #[test]
    fn two_modules_in_one_unit() {
        let r = run(
            &[
                ("A.py", "import B\nimport C\nB.f(1)\nC.g(2)\n"),
                ("B.h", "int f(int);\nint g(int);\n"),
                ("B.cpp", "#include \"B.h\"\nPYBIND11_MODULE(B, m) { m.def(\"f\", &f); }\nPYBIND11_MODULE(C, m) { m.def(\"g\", &g); }\n"),
                ("impl.cpp", "#include \"B.h\"\nint f(int a) { return a; }\nint g(int a) { return a; }\n"),
            ],
            RuleSet::default(),
        );
        assert_eq!(
            rules_of(&r),
            [
                (Rule::FlagMultiModule, "B", "B.cpp"),
                (Rule::M2, "C", "B.cpp"),
                (Rule::FlagMultiModule, "C", "B.cpp"),
            ]
        );
        assert!(r.report.per_module["B"].m2_pass);
        assert!(!r.report.per_module["C"].m2_pass);
    }

    #[test]
    fn dynamic_and_unimported_use() {
        let mut units = CLEAN.to_vec();
        units[0].1 = "import importlib\nB = importlib.import_module(\"B\")\nB.f(1)\n";
        let r = run(&units, RuleSet::default());
        assert_eq!(rules_of(&r), [(Rule::M1, "B", "A.py")]);
        units[0].1 = "B.f(1)\n";
        let r = run(&units, RuleSet::default());
        assert_eq!(rules_of(&r), [(Rule::M1, "B", "A.py")]);
        assert!(r.findings[0].message.contains("never imported"));
        units[0].1 = "print(1)\n";
        let r = run(&units, RuleSet::default());
        assert_eq!(rules_of(&r), [(Rule::FlagUnusedModule, "B", "")]);
        assert_eq!(r.violations(), 0);
    }

    #[test]
    fn aggregate_counting_rule() {
        let modules: BTreeSet<String> = ["B", "C"].map(String::from).into();
        let clean = aggregate(&[], &modules);
        assert!(clean.per_repo.meets_all);
        assert_eq!(clean.counts.meeting_all, 2);
        let bad = LintFinding::new(Rule::M2, "C", "x.cpp", 1, String::new());
        let r = aggregate(&[bad], &modules);
        assert!(r.per_repo.fails_m2);
        assert!(!r.per_repo.meets_all);
        assert_eq!((r.counts.meeting_all, r.counts.failing_m2), (1, 1));
    }

    #[test]
    fn table_text() {
        let r = run(CLEAN, RuleSet::default());
        let text = render_text(&r);
        assert_eq!(
            text,
            "                                  Rep.      Mod.\n\
             Num. rep./mod. meeting M1-M3  1 (100%)  1 (100%)\n\
             Binding misname (fails M2)      0 (0%)    0 (0%)\n\
             Impl. in binding (fails M3)     0 (0%)    0 (0%)\n\
             Uses lambda                     0 (0%)    0 (0%)\n\
             Total                                1         1\n"
        );
        assert_eq!(LintReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            RuleSet::parse("m1, M3").unwrap(),
            RuleSet {
                m1: true,
                m2: false,
                m3: true,
                r1: false
            }
        );
        assert!(RuleSet::parse("m4").is_err());
        assert!(RuleSet::parse("").is_err());
    }
}
