//! Extraction facts shared by every pipeline stage.
//!
//! Each record type here is one row type of the CSV intermediate
//! representation. Values are plain immutable data; validation of the
//! per-type invariants lives next to each type.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;

/// Declares a closed enum whose wire form is its uppercase name.
macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $name {
            type Err = $crate::error::FieldError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err($crate::error::FieldError::new(format!(
                        "invalid {} value `{}`",
                        stringify!($name),
                        other
                    ))),
                }
            }
        }
    };
}

pub(crate) use wire_enum;

wire_enum!(
    /// Source language of a unit or a record.
    Language { Python => "PYTHON", Cpp => "CPP" }
);

wire_enum!(
    /// Physical role of a source unit.
    UnitKind { Script => "SCRIPT", Source => "SOURCE", Header => "HEADER" }
);

wire_enum!(
    /// Syntactic shape of a call argument.
    ArgForm {
        StringLiteral => "STRING_LITERAL",
        Identifier => "IDENTIFIER",
        FunctionRef => "FUNCTION_REF",
        Lambda => "LAMBDA",
        Other => "OTHER",
    }
);

wire_enum!(
    ImportMechanism { Standard => "STANDARD", Dynamic => "DYNAMIC" }
);

wire_enum!(
    ValueForm { StringLiteral => "STRING_LITERAL", Other => "OTHER" }
);

/// Pseudo-caller for Python top-level code.
pub const PY_TOP_LEVEL: &str = "<module>";
/// Pseudo-caller for C++ file-scope code.
pub const CPP_TOP_LEVEL: &str = "<file>";

impl Language {
    pub fn top_level(self) -> &'static str {
        match self {
            Language::Python => PY_TOP_LEVEL,
            Language::Cpp => CPP_TOP_LEVEL,
        }
    }
}

/// One analysed file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceUnit {
    path: String,
    language: Language,
    kind: UnitKind,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, kind: UnitKind) -> Result<Self, FieldError> {
        let path = path.into();
        if path.is_empty() {
            return Err(FieldError::new("unit path is empty"));
        }
        if path.contains('\\') {
            return Err(FieldError::new(format!(
                "unit path `{path}` must use forward slashes"
            )));
        }
        let language = match kind {
            UnitKind::Script => Language::Python,
            UnitKind::Source | UnitKind::Header => Language::Cpp,
        };
        Ok(SourceUnit {
            path,
            language,
            kind,
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }
}

/// A function definition or declaration found in a unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionDef {
    pub unit: String,
    pub line: u32,
    pub language: Language,
    /// Enclosing namespaces, classes and functions, outermost first.
    pub scope: Vec<String>,
    pub name: String,
    pub has_body: bool,
    pub is_anonymous: bool,
    /// Declared parameter count; drives overload disambiguation in fqns.
    pub arity: u32,
}

const ANON_PREFIX: &str = "<anonymous:";

/// Reserved name for the `n`-th anonymous function of a unit (1-based).
pub fn anonymous_name(n: u32) -> String {
    format!("{ANON_PREFIX}{n}>")
}

/// True iff `name` has the shape `<anonymous:N>`.
pub fn is_anonymous_name(name: &str) -> bool {
    name.strip_prefix(ANON_PREFIX)
        .and_then(|rest| rest.strip_suffix('>'))
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

impl FunctionDef {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.name.is_empty() {
            return Err(FieldError::new("function name is empty"));
        }
        if self.is_anonymous != is_anonymous_name(&self.name) {
            return Err(FieldError::new(format!(
                "is_anonymous={} disagrees with name `{}`",
                self.is_anonymous, self.name
            )));
        }
        if self.language == Language::Python && !self.has_body {
            return Err(FieldError::new("python definitions always have a body"));
        }
        Ok(())
    }
}

/// A call argument as written at the call site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArgValue {
    pub form: ArgForm,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<String>,
}

impl ArgValue {
    pub fn string_literal(text: impl Into<String>, literal: impl Into<String>) -> Self {
        ArgValue {
            form: ArgForm::StringLiteral,
            text: text.into(),
            literal: Some(literal.into()),
        }
    }

    pub fn new(form: ArgForm, text: impl Into<String>) -> Self {
        debug_assert!(form != ArgForm::StringLiteral);
        ArgValue {
            form,
            text: text.into(),
            literal: None,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let is_lit = self.form == ArgForm::StringLiteral;
        if is_lit != self.literal.is_some() {
            return Err(FieldError::new(format!(
                "argument `{}`: literal must be present iff form is STRING_LITERAL",
                self.text
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallSite {
    pub unit: String,
    pub line: u32,
    pub language: Language,
    pub caller_fqn: String,
    pub callee_expr: String,
    pub args: Vec<ArgValue>,
}

impl CallSite {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.callee_expr.is_empty() {
            return Err(FieldError::new("callee_expr is empty"));
        }
        if self.caller_fqn.is_empty() {
            return Err(FieldError::new("caller_fqn is empty"));
        }
        self.args.iter().try_for_each(ArgValue::validate)
    }

    pub fn is_top_level(&self) -> bool {
        self.caller_fqn == self.language.top_level()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImportRecord {
    pub unit: String,
    pub line: u32,
    /// Dotted module name as written (`pkg.mod`, `.rel`).
    pub imported_name: String,
    /// Local name the statement binds.
    pub alias: String,
    /// Imported member for `from X import m`, empty otherwise.
    pub member: String,
    pub mechanism: ImportMechanism,
}

impl ImportRecord {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.imported_name.is_empty() || self.alias.is_empty() {
            return Err(FieldError::new("import without a name"));
        }
        Ok(())
    }

    /// Last dotted component of the imported module.
    pub fn module_leaf(&self) -> &str {
        last_dotted(&self.imported_name)
    }
}

pub(crate) fn last_dotted(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssignRecord {
    pub unit: String,
    pub line: u32,
    pub language: Language,
    pub scope_fqn: String,
    pub variable: String,
    pub value_form: ValueForm,
    pub literal: Option<String>,
}

impl AssignRecord {
    pub fn validate(&self) -> Result<(), FieldError> {
        if (self.value_form == ValueForm::StringLiteral) != self.literal.is_some() {
            return Err(FieldError::new(format!(
                "assignment to `{}`: literal must be present iff value_form is STRING_LITERAL",
                self.variable
            )));
        }
        if self.variable.is_empty() {
            return Err(FieldError::new("assignment without a variable"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IncludeRecord {
    pub unit: String,
    pub line: u32,
    pub included_path: String,
    pub is_first_substantive: bool,
}

/// One `.def` statement inside a binding macro block, before resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawBinding {
    pub unit: String,
    pub line: u32,
    pub module: String,
    pub module_var: String,
    pub exposed_arg: ArgValue,
    pub target_arg: ArgValue,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

impl RawBinding {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !is_identifier(&self.module) {
            return Err(FieldError::new(format!(
                "binding module `{}` is not an identifier",
                self.module
            )));
        }
        self.exposed_arg.validate()?;
        self.target_arg.validate()
    }
}
