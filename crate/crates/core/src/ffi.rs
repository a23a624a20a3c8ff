//! The pybind11 filter: binds `.def` statements to C++ targets and rewrites
//! Python calls into bound modules as cross-language calls.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::FieldError;
use crate::fqn::{binding_scope, FqnTable};
use crate::ir::{bool_field, canonicalize, parse_bool, parse_line, ExtractionTables, Record};
use crate::model::{
    ArgForm, AssignRecord, CallSite, FunctionDef, ImportRecord, Language, RawBinding,
};
use crate::reaching::{resolve_string_arg, UseSite};

/// Placeholder for names and targets that could not be determined.
pub const UNRESOLVED: &str = "<unresolved>";

crate::model::wire_enum!(
    BindingStatus {
        Resolved => "RESOLVED",
        Anonymous => "ANONYMOUS",
        Unresolved => "UNRESOLVED",
    }
);

crate::model::wire_enum!(
    CallFlag {
        Anonymous => "ANONYMOUS",
        Unresolved => "UNRESOLVED",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BindingRecord {
    pub module: String,
    pub unit: String,
    pub line: u32,
    pub exposed_name: String,
    pub target_fqn: String,
    pub status: BindingStatus,
}

/// A call site after FFI rewriting.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResolvedCall {
    pub call: CallSite,
    pub cross_language: bool,
    /// Target fqn(s) of a rewritten call, `|`-separated when several
    /// bindings share the exposed name; empty for pass-through calls.
    pub resolved_callee: String,
    pub flag: Option<CallFlag>,
}

impl ResolvedCall {
    fn pass_through(call: CallSite) -> Self {
        ResolvedCall {
            call,
            cross_language: false,
            resolved_callee: String::new(),
            flag: None,
        }
    }

    /// Individual target fqns of a rewritten call.
    pub fn callees(&self) -> impl Iterator<Item = &str> {
        self.resolved_callee.split('|').filter(|s| !s.is_empty())
    }
}

impl Record for BindingRecord {
    const FILE_NAME: &'static str = "bindings.csv";
    const COLUMNS: &'static [&'static str] = &[
        "module",
        "unit",
        "line",
        "exposed_name",
        "target_fqn",
        "status",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.module.clone(),
            self.unit.clone(),
            self.line.to_string(),
            self.exposed_name.clone(),
            self.target_fqn.clone(),
            self.status.to_string(),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let rec = BindingRecord {
            module: row[0].to_string(),
            unit: row[1].to_string(),
            line: parse_line(row[2])?,
            exposed_name: row[3].to_string(),
            target_fqn: row[4].to_string(),
            status: row[5].parse()?,
        };
        if rec.status == BindingStatus::Resolved
            && (rec.exposed_name == UNRESOLVED || rec.target_fqn == UNRESOLVED)
        {
            return Err(FieldError::new(
                "a RESOLVED binding needs a name and a target",
            ));
        }
        Ok(rec)
    }
}

impl Record for ResolvedCall {
    const FILE_NAME: &'static str = "calls_resolved.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "language",
        "caller_fqn",
        "callee_expr",
        "args",
        "cross_language",
        "resolved_callee",
        "flag",
    ];

    fn unit(&self) -> &str {
        &self.call.unit
    }

    fn line(&self) -> u32 {
        self.call.line
    }

    fn to_row(&self) -> Vec<String> {
        let mut row = self.call.to_row();
        row.push(bool_field(self.cross_language));
        row.push(self.resolved_callee.clone());
        row.push(self.flag.map_or_else(String::new, |f| f.to_string()));
        row
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let call = CallSite::from_row(&row[..6])?;
        let flag = match row[8] {
            "" => None,
            s => Some(s.parse()?),
        };
        let rc = ResolvedCall {
            call,
            cross_language: parse_bool(row[6])?,
            resolved_callee: row[7].to_string(),
            flag,
        };
        if rc.cross_language && rc.callees().next().is_none() {
            return Err(FieldError::new(
                "cross-language call without a resolved callee",
            ));
        }
        Ok(rc)
    }
}

/// Looks up C++ definitions by name with same-unit-first precedence:
/// definition in `unit`, declaration in `unit`, unique definition anywhere,
/// unique declaration anywhere.
pub struct SymbolIndex<'a> {
    table: FqnTable,
    by_name: BTreeMap<&'a str, Vec<&'a FunctionDef>>,
}

impl<'a> SymbolIndex<'a> {
    pub fn new(defs: &'a [FunctionDef]) -> Self {
        let mut by_name: BTreeMap<&str, Vec<&FunctionDef>> = BTreeMap::new();
        for d in defs {
            if d.language == Language::Cpp && !d.is_anonymous {
                by_name.entry(d.name.as_str()).or_default().push(d);
            }
        }
        SymbolIndex {
            table: FqnTable::new(defs),
            by_name,
        }
    }

    pub fn fqn(&self, def: &FunctionDef) -> String {
        self.table.fqn(def)
    }

    /// Resolves `a::b::name` from `unit`. `Err(n)` means `n` equally
    /// ranked candidates.
    pub fn lookup(&self, path: &str, unit: &str) -> Result<Option<String>, usize> {
        self.lookup_call(path, unit, None)
    }

    /// Like [`lookup`](Self::lookup), but an ambiguous tier is narrowed to
    /// the candidates taking `arity` parameters when one is given.
    pub fn lookup_call(
        &self,
        path: &str,
        unit: &str,
        arity: Option<u32>,
    ) -> Result<Option<String>, usize> {
        let path = path.trim_start_matches("::");
        let mut parts = path.rsplit("::");
        let name = parts.next().unwrap_or(path);
        let qualifier = parts.next();
        let candidates: Vec<&FunctionDef> = self
            .by_name
            .get(name)
            .into_iter()
            .flatten()
            .copied()
            .filter(|d| qualifier.is_none_or(|q| d.scope.last().is_some_and(|s| s == q)))
            .collect();
        let tiers = [
            (Some(true), true),
            (Some(true), false),
            (None, true),
            (None, false),
        ];
        for (same_unit, body) in tiers {
            let tier: BTreeMap<String, u32> = candidates
                .iter()
                .filter(|d| d.has_body == body)
                .filter(|d| same_unit.is_none_or(|s| (d.unit == unit) == s))
                .map(|d| (self.fqn(d), d.arity))
                .collect();
            match tier.len() {
                0 => continue,
                1 => return Ok(tier.into_keys().next()),
                n => {
                    let narrowed: Vec<String> = tier
                        .into_iter()
                        .filter(|(_, a)| Some(*a) == arity)
                        .map(|(fqn, _)| fqn)
                        .collect();
                    return match narrowed.as_slice() {
                        [one] => Ok(Some(one.clone())),
                        _ => Err(n),
                    };
                }
            }
        }
        Ok(None)
    }
}

fn raw_key(r: &RawBinding) -> (String, u32, Vec<String>) {
    (r.unit.clone(), r.line, r.to_row())
}

/// Resolves every raw binding to exactly one binding record.
pub fn resolve_bindings(
    raw: &[RawBinding],
    assigns: &[AssignRecord],
    defs: &[FunctionDef],
) -> Vec<BindingRecord> {
    let index = SymbolIndex::new(defs);
    let mut ordered: Vec<&RawBinding> = raw.iter().collect();
    ordered.sort_by_key(|r| raw_key(r));

    let mut lambdas: BTreeMap<(&str, u32), Vec<&FunctionDef>> = BTreeMap::new();
    for d in defs
        .iter()
        .filter(|d| d.is_anonymous && d.language == Language::Cpp)
    {
        lambdas
            .entry((d.unit.as_str(), d.line))
            .or_default()
            .push(d);
    }
    for list in lambdas.values_mut() {
        list.sort_by_key(|d| anon_number(&d.name));
        list.reverse();
    }

    let mut assigns_by_unit: BTreeMap<&str, Vec<AssignRecord>> = BTreeMap::new();
    for a in assigns {
        assigns_by_unit.entry(&a.unit).or_default().push(a.clone());
    }

    let mut out = Vec::with_capacity(raw.len());
    for r in ordered {
        let scope = binding_scope(&r.unit, &r.module);
        let site = UseSite {
            unit: &r.unit,
            line: r.line,
            scope_fqn: &scope,
        };
        let unit_assigns = assigns_by_unit
            .get(r.unit.as_str())
            .map_or(&[][..], Vec::as_slice);
        let exposed = resolve_string_arg(&r.exposed_arg, site, unit_assigns).value;

        let (target_fqn, mut status) = match r.target_arg.form {
            ArgForm::FunctionRef => {
                let path = r.target_arg.text.trim_start_matches('&').trim();
                match index.lookup(path, &r.unit) {
                    Ok(Some(fqn)) => (fqn, BindingStatus::Resolved),
                    _ => (UNRESOLVED.to_string(), BindingStatus::Unresolved),
                }
            }
            ArgForm::Lambda => match lambdas
                .get_mut(&(r.unit.as_str(), r.line))
                .and_then(Vec::pop)
            {
                Some(def) => (index.fqn(def), BindingStatus::Anonymous),
                None => (UNRESOLVED.to_string(), BindingStatus::Unresolved),
            },
            _ => (UNRESOLVED.to_string(), BindingStatus::Unresolved),
        };
        let exposed_name = match exposed {
            Some(name) if !name.is_empty() => name,
            _ => {
                status = BindingStatus::Unresolved;
                UNRESOLVED.to_string()
            }
        };
        out.push(BindingRecord {
            module: r.module.clone(),
            unit: r.unit.clone(),
            line: r.line,
            exposed_name,
            target_fqn,
            status,
        });
    }
    canonicalize(&mut out);
    out
}

fn anon_number(name: &str) -> u32 {
    name.trim_start_matches("<anonymous:")
        .trim_end_matches('>')
        .parse()
        .unwrap_or(u32::MAX)
}

/// Binding modules a Python callee refers to, paired with the exposed name.
fn ffi_targets<'a>(
    call: &'a CallSite,
    imports: &[&'a ImportRecord],
    exposed: &BTreeMap<&str, BTreeSet<&str>>,
) -> BTreeSet<(&'a str, &'a str)> {
    let mut out = BTreeSet::new();
    match call.callee_expr.rsplit_once('.') {
        Some((receiver, name)) => {
            for imp in imports.iter().filter(|i| i.alias == receiver) {
                let module = if imp.member.is_empty() {
                    imp.module_leaf()
                } else {
                    imp.member.as_str()
                };
                if exposed.contains_key(module) {
                    out.insert((module, name));
                }
            }
        }
        None => {
            let name = call.callee_expr.as_str();
            for imp in imports.iter().filter(|i| !i.member.is_empty()) {
                let module = imp.module_leaf();
                if !exposed.contains_key(module) {
                    continue;
                }
                if imp.alias == name && imp.member != "*" {
                    out.insert((module, imp.member.as_str()));
                } else if imp.member == "*" && exposed[module].contains(name) {
                    out.insert((module, name));
                }
            }
        }
    }
    out
}

/// Rewrites Python calls into bound modules; every input call yields
/// exactly one output call.
pub fn rewrite_calls(
    calls: &[CallSite],
    imports: &[ImportRecord],
    bindings: &[BindingRecord],
) -> Vec<ResolvedCall> {
    let mut exposed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut by_name: BTreeMap<(&str, &str), Vec<&BindingRecord>> = BTreeMap::new();
    for b in bindings {
        exposed
            .entry(&b.module)
            .or_default()
            .insert(&b.exposed_name);
        by_name
            .entry((&b.module, &b.exposed_name))
            .or_default()
            .push(b);
    }
    let mut imports_by_unit: BTreeMap<&str, Vec<&ImportRecord>> = BTreeMap::new();
    for imp in imports {
        imports_by_unit.entry(&imp.unit).or_default().push(imp);
    }

    let mut out: Vec<ResolvedCall> = calls
        .iter()
        .map(|call| {
            if call.language != Language::Python {
                return ResolvedCall::pass_through(call.clone());
            }
            let unit_imports = imports_by_unit
                .get(call.unit.as_str())
                .map_or(&[][..], Vec::as_slice);
            let targets = ffi_targets(call, unit_imports, &exposed);
            if targets.is_empty() {
                return ResolvedCall::pass_through(call.clone());
            }
            let matched: Vec<&BindingRecord> = targets
                .iter()
                .flat_map(|key| by_name.get(key).into_iter().flatten().copied())
                .collect();
            let callees: BTreeSet<&str> = matched
                .iter()
                .filter(|b| b.status != BindingStatus::Unresolved)
                .map(|b| b.target_fqn.as_str())
                .collect();
            if callees.is_empty() {
                return ResolvedCall {
                    call: call.clone(),
                    cross_language: false,
                    resolved_callee: UNRESOLVED.to_string(),
                    flag: Some(CallFlag::Unresolved),
                };
            }
            let anonymous = matched.iter().any(|b| b.status == BindingStatus::Anonymous);
            ResolvedCall {
                call: call.clone(),
                cross_language: true,
                resolved_callee: callees.into_iter().collect::<Vec<_>>().join("|"),
                flag: anonymous.then_some(CallFlag::Anonymous),
            }
        })
        .collect();
    canonicalize(&mut out);
    out
}

/// Output of an FFI filter stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutput {
    pub bindings: Vec<BindingRecord>,
    pub calls: Vec<ResolvedCall>,
}

/// A stage that turns extraction tables into bindings and rewritten calls
/// for one FFI mechanism.
pub trait FfiFilter {
    fn name(&self) -> &'static str;
    fn run(&self, tables: &ExtractionTables) -> FilterOutput;
}

/// Python-to-C++ calls through pybind11 `.def` bindings.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pybind11Filter;

impl FfiFilter for Pybind11Filter {
    fn name(&self) -> &'static str {
        "pybind11"
    }

    fn run(&self, tables: &ExtractionTables) -> FilterOutput {
        let bindings = resolve_bindings(&tables.raw_bindings, &tables.assigns, &tables.defs);
        let calls = rewrite_calls(&tables.calls, &tables.imports, &bindings);
        FilterOutput { bindings, calls }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpp::parse_cpp_unit;
    use crate::ir::{from_csv_bytes, to_csv_bytes};
    use crate::python::parse_python_unit;
    use std::path::Path;

    const B_CPP: &str = "#include <pybind11/pybind11.h>\n\
                         int f(int x);\n\
                         int square(int x) { return x * x; }\n\
                         int f(int x) { return square(x); }\n\
                         PYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n";

    fn tables(units: &[(&str, &str)]) -> ExtractionTables {
        let mut t = ExtractionTables::default();
        for (path, src) in units {
            let x = if path.ends_with(".py") {
                parse_python_unit(src, path)
            } else {
                parse_cpp_unit(src, path)
            };
            t.extend(x.tables);
        }
        t
    }

    #[test]
    fn figure_two() {
        let t = tables(&[("A.py", "import B\n\nx = B.f(34)\n"), ("B.cpp", B_CPP)]);
        let out = Pybind11Filter.run(&t);
        assert_eq!(
            out.bindings,
            [BindingRecord {
                module: "B".into(),
                unit: "B.cpp".into(),
                line: 6,
                exposed_name: "f".into(),
                target_fqn: "B.cpp::f".into(),
                status: BindingStatus::Resolved,
            }]
        );
        let py: Vec<&ResolvedCall> = out.calls.iter().filter(|c| c.call.unit == "A.py").collect();
        assert_eq!(py.len(), 1);
        assert!(py[0].cross_language);
        assert_eq!(py[0].resolved_callee, "B.cpp::f");
        assert_eq!(out.calls.len(), t.calls.len());
    }

    #[test]
    fn aliases_and_member_imports() {
        for src in [
            "import B as bb\nbb.f(1)\n",
            "from B import f\nf(1)\n",
            "from B import f as g\ng(1)\n",
            "from B import *\nf(1)\n",
            "import pkg.B\npkg.B.f(1)\n",
            "from pkg import B\nB.f(1)\n",
        ] {
            let t = tables(&[("A.py", src), ("B.cpp", B_CPP)]);
            let out = Pybind11Filter.run(&t);
            let call = out.calls.iter().find(|c| c.call.unit == "A.py").unwrap();
            assert!(call.cross_language, "{src}");
            assert_eq!(call.resolved_callee, "B.cpp::f", "{src}");
        }
    }

    #[test]
    fn unbound_names_and_decoys() {
        let t = tables(&[
            ("A.py", "import B\nimport C\nB.g(1)\nC.f(2)\nlen(x)\n"),
            ("B.cpp", B_CPP),
        ]);
        let out = Pybind11Filter.run(&t);
        let got: Vec<(&str, bool, &str, Option<CallFlag>)> = out
            .calls
            .iter()
            .filter(|c| c.call.unit == "A.py")
            .map(|c| {
                (
                    c.call.callee_expr.as_str(),
                    c.cross_language,
                    c.resolved_callee.as_str(),
                    c.flag,
                )
            })
            .collect();
        assert_eq!(
            got,
            [
                ("B.g", false, UNRESOLVED, Some(CallFlag::Unresolved)),
                ("C.f", false, "", None),
                ("len", false, "", None),
            ]
        );
    }

    #[test]
    fn lambda_and_unresolved_bindings() {
        let src = "int g(int);\n\
                   PYBIND11_MODULE(B, m) {\n\
                   m.def(\"sq\", [](int a){ return a * a; });\n\
                   m.def(name, &g);\n\
                   m.def(\"h\", &missing);\n}\n";
        let t = tables(&[("B.cpp", src), ("A.py", "import B\nB.sq(2)\nB.h(1)\n")]);
        let out = Pybind11Filter.run(&t);
        let got: Vec<(&str, &str, BindingStatus)> = out
            .bindings
            .iter()
            .map(|b| (b.exposed_name.as_str(), b.target_fqn.as_str(), b.status))
            .collect();
        assert_eq!(
            got,
            [
                ("sq", "B.cpp::<anonymous:1>", BindingStatus::Anonymous),
                (UNRESOLVED, "B.cpp::g", BindingStatus::Unresolved),
                ("h", UNRESOLVED, BindingStatus::Unresolved),
            ]
        );
        let sq = out
            .calls
            .iter()
            .find(|c| c.call.callee_expr == "B.sq")
            .unwrap();
        assert!(sq.cross_language);
        assert_eq!(sq.flag, Some(CallFlag::Anonymous));
        let h = out
            .calls
            .iter()
            .find(|c| c.call.callee_expr == "B.h")
            .unwrap();
        assert_eq!(h.flag, Some(CallFlag::Unresolved));
    }

    #[test]
    fn target_precedence() {
        let defs = |specs: &[(&str, &str, bool)]| -> Vec<FunctionDef> {
            specs
                .iter()
                .enumerate()
                .map(|(i, (unit, scope, body))| FunctionDef {
                    unit: unit.to_string(),
                    line: i as u32 + 1,
                    language: Language::Cpp,
                    scope: scope
                        .split('.')
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                    name: "f".into(),
                    has_body: *body,
                    is_anonymous: false,
                    arity: 1,
                })
                .collect()
        };
        let d = defs(&[("B.cpp", "", false), ("f.cpp", "", true)]);
        assert_eq!(
            SymbolIndex::new(&d).lookup("f", "B.cpp"),
            Ok(Some("B.cpp::f".into()))
        );
        let d = defs(&[("B.h", "", false), ("f.cpp", "", true)]);
        assert_eq!(
            SymbolIndex::new(&d).lookup("f", "B.cpp"),
            Ok(Some("f.cpp::f".into()))
        );
        let d = defs(&[("B.cpp", "", false), ("x.cpp", "", false)]);
        assert_eq!(
            SymbolIndex::new(&d).lookup("f", "B.cpp"),
            Ok(Some("B.cpp::f".into()))
        );
        let d = defs(&[("x.cpp", "", true), ("y.cpp", "", true)]);
        assert_eq!(SymbolIndex::new(&d).lookup("f", "B.cpp"), Err(2));
        let d = defs(&[("x.cpp", "ns", true), ("y.cpp", "other", true)]);
        assert_eq!(
            SymbolIndex::new(&d).lookup("ns::f", "B.cpp"),
            Ok(Some("x.cpp::ns::f".into()))
        );
        assert_eq!(SymbolIndex::new(&d).lookup("g", "B.cpp"), Ok(None));
    }

    #[test]
    fn csv_round_trip() {
        let t = tables(&[("A.py", "import B\nB.f(\"a,b\")\n"), ("B.cpp", B_CPP)]);
        let out = Pybind11Filter.run(&t);
        let back: Vec<ResolvedCall> =
            from_csv_bytes(&to_csv_bytes(&out.calls), Path::new("calls_resolved.csv")).unwrap();
        assert_eq!(back, out.calls);
        let back: Vec<BindingRecord> =
            from_csv_bytes(&to_csv_bytes(&out.bindings), Path::new("bindings.csv")).unwrap();
        assert_eq!(back, out.bindings);
    }
}
