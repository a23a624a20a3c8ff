//! CSV serialization of the intermediate representation.
//!
//! Every record type maps to one file with a fixed header. Rows are written
//! in canonical order (unit, line, then the remaining columns as strings), so
//! identical record sets always produce identical bytes.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diag::Diagnostics;
use crate::error::{FieldError, IrError};
use crate::model::{
    ArgForm, ArgValue, AssignRecord, CallSite, FunctionDef, ImportRecord, IncludeRecord,
    RawBinding, ValueForm,
};

/// A row type of the intermediate representation.
pub trait Record: Sized {
    const FILE_NAME: &'static str;
    const COLUMNS: &'static [&'static str];

    fn unit(&self) -> &str;
    fn line(&self) -> u32;
    fn to_row(&self) -> Vec<String>;
    fn from_row(row: &[&str]) -> Result<Self, FieldError>;

    /// Identity that must not repeat within one file, if the type has one.
    fn unique_key(&self) -> Option<String> {
        None
    }
}

struct SortKey {
    unit: String,
    line: u32,
    row: Vec<String>,
}

/// Sorts records into canonical row order and returns their rows.
pub fn canonical_rows<R: Record>(records: &[R]) -> Vec<Vec<String>> {
    let mut keyed: Vec<SortKey> = records
        .iter()
        .map(|r| SortKey {
            unit: r.unit().to_string(),
            line: r.line(),
            row: r.to_row(),
        })
        .collect();
    keyed.sort_by(|a, b| (a.unit.as_str(), a.line, &a.row).cmp(&(b.unit.as_str(), b.line, &b.row)));
    keyed.into_iter().map(|k| k.row).collect()
}

/// Sorts a record list into canonical order in place.
pub fn canonicalize<R: Record>(records: &mut [R]) {
    records.sort_by_cached_key(|r| (r.unit().to_string(), r.line(), r.to_row()));
}

fn check_unique<R: Record>(records: &[R], path: &Path) -> Result<(), IrError> {
    let mut seen = BTreeSet::new();
    for key in records.iter().filter_map(Record::unique_key) {
        if !seen.insert(key.clone()) {
            return Err(IrError::Duplicate {
                path: path.to_path_buf(),
                key,
            });
        }
    }
    Ok(())
}

/// Serializes records to canonical CSV bytes.
pub fn to_csv_bytes<R: Record>(records: &[R]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    writer.write_record(R::COLUMNS).expect("in-memory write");
    for row in canonical_rows(records) {
        writer.write_record(&row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

/// Writes `records` to `out_dir/R::FILE_NAME` and returns the file path.
pub fn write_csv<R: Record>(records: &[R], out_dir: &Path) -> Result<PathBuf, IrError> {
    let path = out_dir.join(R::FILE_NAME);
    check_unique(records, &path)?;
    fs::write(&path, to_csv_bytes(records)).map_err(|source| IrError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Parses CSV bytes; `path` is only used to label errors.
pub fn from_csv_bytes<R: Record>(bytes: &[u8], path: &Path) -> Result<Vec<R>, IrError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(IrError::MalformedRow {
                path: path.to_path_buf(),
                line: 1,
                reason: e.to_string(),
            })
        }
        None => csv::StringRecord::new(),
    };
    let found: Vec<&str> = header.iter().collect();
    if found != R::COLUMNS {
        return Err(IrError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: R::COLUMNS.join(","),
            found: found.join(","),
        });
    }

    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| IrError::MalformedRow {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = row.iter().collect();
        if fields.len() != R::COLUMNS.len() {
            return Err(IrError::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!(
                    "expected {} fields, found {}",
                    R::COLUMNS.len(),
                    fields.len()
                ),
            });
        }
        let record = R::from_row(&fields).map_err(|e| IrError::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    check_unique(&out, path)?;
    Ok(out)
}

/// Reads `path`, validating the header against the schema of `R`.
pub fn read_csv<R: Record>(path: &Path) -> Result<Vec<R>, IrError> {
    let bytes = fs::read(path).map_err(|source| IrError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_csv_bytes(&bytes, path)
}

/// Reads `dir/R::FILE_NAME`.
pub fn read_table<R: Record>(dir: &Path) -> Result<Vec<R>, IrError> {
    read_csv(&dir.join(R::FILE_NAME))
}

pub(crate) fn bool_field(value: bool) -> String {
    if value { "true" } else { "false" }.to_string()
}

pub(crate) fn parse_bool(s: &str) -> Result<bool, FieldError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(FieldError::new(format!("invalid boolean `{other}`"))),
    }
}

pub(crate) fn parse_line(s: &str) -> Result<u32, FieldError> {
    match s.parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(FieldError::new(format!("invalid line number `{s}`"))),
    }
}

fn scope_field(scope: &[String]) -> String {
    scope.join(".")
}

fn parse_scope(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split('.').map(str::to_string).collect()
    }
}

/// Literal columns are empty unless the form says a literal exists, so an
/// empty string literal still round-trips.
pub(crate) fn parse_literal(has_literal: bool, s: &str) -> Result<Option<String>, FieldError> {
    match (has_literal, s.is_empty()) {
        (true, _) => Ok(Some(s.to_string())),
        (false, true) => Ok(None),
        (false, false) => Err(FieldError::new(format!(
            "literal `{s}` given for a non-literal value"
        ))),
    }
}

pub(crate) fn args_field(args: &[ArgValue]) -> String {
    serde_json::to_string(args).expect("argument lists serialize")
}

pub(crate) fn parse_args(s: &str) -> Result<Vec<ArgValue>, FieldError> {
    let args: Vec<ArgValue> = serde_json::from_str(s)
        .map_err(|e| FieldError::new(format!("invalid argument list: {e}")))?;
    args.iter().try_for_each(ArgValue::validate)?;
    Ok(args)
}

fn arg_field(arg: &ArgValue) -> String {
    serde_json::to_string(arg).expect("arguments serialize")
}

fn parse_arg(s: &str) -> Result<ArgValue, FieldError> {
    let arg: ArgValue =
        serde_json::from_str(s).map_err(|e| FieldError::new(format!("invalid argument: {e}")))?;
    arg.validate()?;
    Ok(arg)
}

impl Record for FunctionDef {
    const FILE_NAME: &'static str = "defs.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "language",
        "scope",
        "name",
        "has_body",
        "is_anonymous",
        "arity",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.language.to_string(),
            scope_field(&self.scope),
            self.name.clone(),
            bool_field(self.has_body),
            bool_field(self.is_anonymous),
            self.arity.to_string(),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let def = FunctionDef {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            language: row[2].parse()?,
            scope: parse_scope(row[3]),
            name: row[4].to_string(),
            has_body: parse_bool(row[5])?,
            is_anonymous: parse_bool(row[6])?,
            arity: row[7]
                .parse()
                .map_err(|_| FieldError::new(format!("invalid arity `{}`", row[7])))?,
        };
        def.validate()?;
        Ok(def)
    }

    fn unique_key(&self) -> Option<String> {
        Some(format!(
            "{}:{}:{}:{}",
            self.unit,
            self.line,
            scope_field(&self.scope),
            self.name
        ))
    }
}

impl Record for CallSite {
    const FILE_NAME: &'static str = "calls.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "language",
        "caller_fqn",
        "callee_expr",
        "args",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.language.to_string(),
            self.caller_fqn.clone(),
            self.callee_expr.clone(),
            args_field(&self.args),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let call = CallSite {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            language: row[2].parse()?,
            caller_fqn: row[3].to_string(),
            callee_expr: row[4].to_string(),
            args: parse_args(row[5])?,
        };
        call.validate()?;
        Ok(call)
    }
}

impl Record for ImportRecord {
    const FILE_NAME: &'static str = "imports.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "imported_name",
        "alias",
        "member",
        "mechanism",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.imported_name.clone(),
            self.alias.clone(),
            self.member.clone(),
            self.mechanism.to_string(),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let import = ImportRecord {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            imported_name: row[2].to_string(),
            alias: row[3].to_string(),
            member: row[4].to_string(),
            mechanism: row[5].parse()?,
        };
        import.validate()?;
        Ok(import)
    }
}

impl Record for AssignRecord {
    const FILE_NAME: &'static str = "assigns.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "language",
        "scope_fqn",
        "variable",
        "value_form",
        "literal",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.language.to_string(),
            self.scope_fqn.clone(),
            self.variable.clone(),
            self.value_form.to_string(),
            self.literal.clone().unwrap_or_default(),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let value_form: ValueForm = row[5].parse()?;
        let assign = AssignRecord {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            language: row[2].parse()?,
            scope_fqn: row[3].to_string(),
            variable: row[4].to_string(),
            value_form,
            literal: parse_literal(value_form == ValueForm::StringLiteral, row[6])?,
        };
        assign.validate()?;
        Ok(assign)
    }
}

impl Record for IncludeRecord {
    const FILE_NAME: &'static str = "includes.csv";
    const COLUMNS: &'static [&'static str] =
        &["unit", "line", "included_path", "is_first_substantive"];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.included_path.clone(),
            bool_field(self.is_first_substantive),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        Ok(IncludeRecord {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            included_path: row[2].to_string(),
            is_first_substantive: parse_bool(row[3])?,
        })
    }

    fn unique_key(&self) -> Option<String> {
        // At most one first-substantive include per unit.
        self.is_first_substantive
            .then(|| format!("{}:first-substantive-include", self.unit))
    }
}

impl Record for RawBinding {
    const FILE_NAME: &'static str = "bindings_raw.csv";
    const COLUMNS: &'static [&'static str] = &[
        "unit",
        "line",
        "module",
        "module_var",
        "exposed_arg",
        "target_arg",
    ];

    fn unit(&self) -> &str {
        &self.unit
    }

    fn line(&self) -> u32 {
        self.line
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.unit.clone(),
            self.line.to_string(),
            self.module.clone(),
            self.module_var.clone(),
            arg_field(&self.exposed_arg),
            arg_field(&self.target_arg),
        ]
    }

    fn from_row(row: &[&str]) -> Result<Self, FieldError> {
        let raw = RawBinding {
            unit: row[0].to_string(),
            line: parse_line(row[1])?,
            module: row[2].to_string(),
            module_var: row[3].to_string(),
            exposed_arg: parse_arg(row[4])?,
            target_arg: parse_arg(row[5])?,
        };
        raw.validate()?;
        if raw.target_arg.form == ArgForm::StringLiteral {
            return Err(FieldError::new(
                "a binding target cannot be a string literal",
            ));
        }
        Ok(raw)
    }
}

/// Facts extracted from one unit together with extraction diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub tables: ExtractionTables,
    pub diagnostics: Diagnostics,
}

/// The six tables produced by one extraction run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionTables {
    pub defs: Vec<FunctionDef>,
    pub calls: Vec<CallSite>,
    pub imports: Vec<ImportRecord>,
    pub assigns: Vec<AssignRecord>,
    pub includes: Vec<IncludeRecord>,
    pub raw_bindings: Vec<RawBinding>,
}

impl ExtractionTables {
    pub const FILE_NAMES: [&'static str; 6] = [
        FunctionDef::FILE_NAME,
        CallSite::FILE_NAME,
        ImportRecord::FILE_NAME,
        AssignRecord::FILE_NAME,
        IncludeRecord::FILE_NAME,
        RawBinding::FILE_NAME,
    ];

    pub fn extend(&mut self, other: ExtractionTables) {
        self.defs.extend(other.defs);
        self.calls.extend(other.calls);
        self.imports.extend(other.imports);
        self.assigns.extend(other.assigns);
        self.includes.extend(other.includes);
        self.raw_bindings.extend(other.raw_bindings);
    }

    pub fn canonicalize(&mut self) {
        canonicalize(&mut self.defs);
        canonicalize(&mut self.calls);
        canonicalize(&mut self.imports);
        canonicalize(&mut self.assigns);
        canonicalize(&mut self.includes);
        canonicalize(&mut self.raw_bindings);
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, IrError> {
        Ok(vec![
            write_csv(&self.defs, dir)?,
            write_csv(&self.calls, dir)?,
            write_csv(&self.imports, dir)?,
            write_csv(&self.assigns, dir)?,
            write_csv(&self.includes, dir)?,
            write_csv(&self.raw_bindings, dir)?,
        ])
    }

    pub fn read(dir: &Path) -> Result<Self, IrError> {
        Ok(ExtractionTables {
            defs: read_table(dir)?,
            calls: read_table(dir)?,
            imports: read_table(dir)?,
            assigns: read_table(dir)?,
            includes: read_table(dir)?,
            raw_bindings: read_table(dir)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ImportMechanism, Language};

    fn fig2_def(line: u32) -> FunctionDef {
        FunctionDef {
            unit: "B.cpp".into(),
            line,
            language: Language::Cpp,
            scope: vec![],
            name: "f".into(),
            has_body: true,
            is_anonymous: false,
            arity: 1,
        }
    }

    #[test]
    fn empty_input_writes_header_only() {
        let bytes = to_csv_bytes::<FunctionDef>(&[]);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "unit,line,language,scope,name,has_body,is_anonymous,arity\n"
        );
    }

    #[test]
    fn function_def_row_layout() {
        let text = String::from_utf8(to_csv_bytes(&[fig2_def(6)])).unwrap();
        assert_eq!(text.lines().nth(1), Some("B.cpp,6,CPP,,f,true,false,1"));
    }

    #[test]
    fn insertion_order_does_not_change_bytes() {
        let a = fig2_def(3);
        let mut b = fig2_def(9);
        b.name = "square".into();
        assert_eq!(to_csv_bytes(&[a.clone(), b.clone()]), to_csv_bytes(&[b, a]));
    }

    #[test]
    fn lines_sort_numerically() {
        let text = String::from_utf8(to_csv_bytes(&[fig2_def(10), fig2_def(9)])).unwrap();
        let lines: Vec<_> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(lines, ["9", "10"]);
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let call = CallSite {
            unit: "a b.py".into(),
            line: 1,
            language: Language::Python,
            caller_fqn: "<module>".into(),
            callee_expr: "f".into(),
            args: vec![ArgValue::string_literal("\"x,y\"", "x,y")],
        };
        let bytes = to_csv_bytes(std::slice::from_ref(&call));
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\"[{\"\"form\"\":\"\"STRING_LITERAL\"\""));
        assert!(!text.contains('\r'));
        let back: Vec<CallSite> = from_csv_bytes(&bytes, Path::new("calls.csv")).unwrap();
        assert_eq!(back, vec![call]);
    }

    #[test]
    fn header_only_reads_empty() {
        let back: Vec<ImportRecord> = from_csv_bytes(
            b"unit,line,imported_name,alias,member,mechanism\n",
            Path::new("imports.csv"),
        )
        .unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn wrong_header_is_schema_mismatch() {
        let err = from_csv_bytes::<ImportRecord>(b"unit,line,name\n", Path::new("imports.csv"))
            .unwrap_err();
        match err {
            IrError::SchemaMismatch {
                expected, found, ..
            } => {
                assert_eq!(expected, "unit,line,imported_name,alias,member,mechanism");
                assert_eq!(found, "unit,line,name");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let data = b"unit,line,imported_name,alias,member,mechanism\nA.py,1,B,B,,STANDARD\nA.py,x,B,B,,STANDARD\n";
        let err = from_csv_bytes::<ImportRecord>(data, Path::new("imports.csv")).unwrap_err();
        match err {
            IrError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_row_is_malformed() {
        let data = b"unit,line,imported_name,alias,member,mechanism\nA.py,1,B\n";
        assert!(matches!(
            from_csv_bytes::<ImportRecord>(data, Path::new("imports.csv")),
            Err(IrError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_defs_rejected_on_read() {
        let bytes = to_csv_bytes(&[fig2_def(3), fig2_def(3)]);
        assert!(matches!(
            from_csv_bytes::<FunctionDef>(&bytes, Path::new("defs.csv")),
            Err(IrError::Duplicate { .. })
        ));
    }

    #[test]
    fn empty_string_literal_round_trips() {
        let assign = AssignRecord {
            unit: "B.cpp".into(),
            line: 2,
            language: Language::Cpp,
            scope_fqn: "<file>".into(),
            variable: "n".into(),
            value_form: ValueForm::StringLiteral,
            literal: Some(String::new()),
        };
        let bytes = to_csv_bytes(std::slice::from_ref(&assign));
        let back: Vec<AssignRecord> = from_csv_bytes(&bytes, Path::new("assigns.csv")).unwrap();
        assert_eq!(back, vec![assign]);
    }

    #[test]
    fn dynamic_import_round_trips() {
        let import = ImportRecord {
            unit: "A.py".into(),
            line: 4,
            imported_name: "B".into(),
            alias: "mod".into(),
            member: String::new(),
            mechanism: ImportMechanism::Dynamic,
        };
        let bytes = to_csv_bytes(std::slice::from_ref(&import));
        let back: Vec<ImportRecord> = from_csv_bytes(&bytes, Path::new("imports.csv")).unwrap();
        assert_eq!(back, vec![import]);
    }
}
