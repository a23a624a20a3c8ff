//! Conservative resolution of call arguments to string literals.
//!
//! An identifier argument resolves only when every assignment that reaches
//! the use site stores the same literal. Reaching is line-ordered within a
//! scope: every earlier assignment in the use-site scope reaches, and
//! file-scope assignments reach function scopes that assign nothing to the
//! variable themselves. Earlier assignments are never killed by later ones,
//! since branch structure is not modelled; disagreement collapses to
//! `Unresolved`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{ArgForm, ArgValue, AssignRecord, ValueForm};
use crate::model::{CPP_TOP_LEVEL, PY_TOP_LEVEL};

crate::model::wire_enum!(
    ResolutionStatus {
        Resolved => "RESOLVED",
        Unresolved => "UNRESOLVED",
        NotAString => "NOT_A_STRING",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub status: ResolutionStatus,
    pub value: Option<String>,
    pub reasons: Vec<String>,
}

impl Resolution {
    fn resolved(value: String) -> Self {
        Resolution {
            status: ResolutionStatus::Resolved,
            value: Some(value),
            reasons: Vec::new(),
        }
    }

    fn unresolved(reasons: Vec<String>) -> Self {
        Resolution {
            status: ResolutionStatus::Unresolved,
            value: None,
            reasons,
        }
    }

    pub fn value(&self) -> Option<&str> {
        self.value.as_deref()
    }
}

/// Where an argument is used.
#[derive(Debug, Clone, Copy)]
pub struct UseSite<'a> {
    pub unit: &'a str,
    pub line: u32,
    pub scope_fqn: &'a str,
}

fn is_file_scope(scope: &str) -> bool {
    scope == PY_TOP_LEVEL || scope == CPP_TOP_LEVEL
}

pub fn resolve_string_arg(
    arg: &ArgValue,
    site: UseSite<'_>,
    assigns: &[AssignRecord],
) -> Resolution {
    match arg.form {
        ArgForm::StringLiteral => Resolution::resolved(arg.literal.clone().unwrap_or_default()),
        ArgForm::Identifier => resolve_identifier(arg.text.trim(), site, assigns),
        _ => Resolution {
            status: ResolutionStatus::NotAString,
            value: None,
            reasons: vec![format!(
                "argument `{}` is a {} expression, not a string",
                arg.text, arg.form
            )],
        },
    }
}

fn resolve_identifier(name: &str, site: UseSite<'_>, assigns: &[AssignRecord]) -> Resolution {
    let preceding =
        |a: &&AssignRecord| a.unit == site.unit && a.variable == name && a.line < site.line;
    let in_scope: Vec<&AssignRecord> = assigns
        .iter()
        .filter(preceding)
        .filter(|a| a.scope_fqn == site.scope_fqn)
        .collect();
    let reaching = if in_scope.is_empty() && !is_file_scope(site.scope_fqn) {
        assigns
            .iter()
            .filter(preceding)
            .filter(|a| is_file_scope(&a.scope_fqn))
            .collect()
    } else {
        in_scope
    };

    if reaching.is_empty() {
        return Resolution::unresolved(vec![format!(
            "no assignment to `{name}` reaches line {}",
            site.line
        )]);
    }

    let non_literal: BTreeSet<u32> = reaching
        .iter()
        .filter(|a| a.value_form == ValueForm::Other)
        .map(|a| a.line)
        .collect();
    if !non_literal.is_empty() {
        return Resolution::unresolved(
            non_literal
                .into_iter()
                .map(|line| format!("non-literal assignment to `{name}` at line {line}"))
                .collect(),
        );
    }

    let values: BTreeSet<&str> = reaching
        .iter()
        .filter_map(|a| a.literal.as_deref())
        .collect();
    if values.len() == 1 {
        let value = values.into_iter().next().unwrap_or_default();
        return Resolution::resolved(value.to_string());
    }
    let listed: Vec<String> = values.iter().map(|v| format!("\"{v}\"")).collect();
    Resolution::unresolved(vec![format!(
        "`{name}` has {} distinct reaching literals: {}",
        listed.len(),
        listed.join(", ")
    )])
}
