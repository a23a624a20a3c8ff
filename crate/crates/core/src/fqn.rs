//! Fully qualified names: `<unit>::<scope1>.<scope2>::<name>`.
//!
//! The scope segment is omitted for file-level names. Overloads (same unit,
//! scope and name with differing arity) get a `/K` suffix in the fqn only.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{FunctionDef, Language};

pub fn qualify(unit: &str, scope: &[String], name: &str) -> String {
    if scope.is_empty() {
        format!("{unit}::{name}")
    } else {
        format!("{unit}::{}::{name}", scope.join("."))
    }
}

/// Graph id of the top-level pseudo-function of a unit.
pub fn top_level_fqn(unit: &str, language: Language) -> String {
    format!("{unit}::{}", language.top_level())
}

/// Scope id used for assignments made inside a binding macro block.
pub fn binding_scope(unit: &str, module: &str) -> String {
    format!("{unit}::<binding:{module}>")
}

/// Fqn assignment for a set of definitions, with overload suffixes applied.
#[derive(Debug, Default, Clone)]
pub struct FqnTable {
    overloaded: BTreeSet<(String, Vec<String>, String)>,
}

impl FqnTable {
    pub fn new<'a>(defs: impl IntoIterator<Item = &'a FunctionDef>) -> Self {
        let mut arities: BTreeMap<(&str, &[String], &str), BTreeSet<u32>> = BTreeMap::new();
        for def in defs {
            if def.is_anonymous {
                continue;
            }
            arities
                .entry((&def.unit, &def.scope, &def.name))
                .or_default()
                .insert(def.arity);
        }
        let overloaded = arities
            .into_iter()
            .filter(|(_, set)| set.len() > 1)
            .map(|((u, s, n), _)| (u.to_string(), s.to_vec(), n.to_string()))
            .collect();
        FqnTable { overloaded }
    }

    pub fn is_overloaded(&self, unit: &str, scope: &[String], name: &str) -> bool {
        !self.overloaded.is_empty()
            && self
                .overloaded
                .contains(&(unit.to_string(), scope.to_vec(), name.to_string()))
    }

    pub fn fqn(&self, def: &FunctionDef) -> String {
        if !def.is_anonymous && self.is_overloaded(&def.unit, &def.scope, &def.name) {
            qualify(
                &def.unit,
                &def.scope,
                &format!("{}/{}", def.name, def.arity),
            )
        } else {
            qualify(&def.unit, &def.scope, &def.name)
        }
    }
}
