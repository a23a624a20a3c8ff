//! Merges resolved calls into one multilingual call graph and renders it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffi::{CallFlag, ResolvedCall, SymbolIndex, UNRESOLVED};
use crate::fqn::FqnTable;
use crate::model::{last_dotted, CallSite, FunctionDef, Language};

crate::model::wire_enum!(
    NodeKind {
        Function => "FUNCTION",
        TopLevel => "TOP_LEVEL",
        External => "EXTERNAL",
        Unresolved => "UNRESOLVED",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub fqn: String,
    pub display: String,
    pub language: Language,
    pub is_anonymous: bool,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub caller: String,
    pub callee: String,
    pub cross_language: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<CallFlag>,
}

/// Nodes sorted by fqn and edges sorted lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("{unit}:{line}: caller `{caller}` is not a known function")]
    DanglingCaller {
        unit: String,
        line: u32,
        caller: String,
    },
    #[error("{unit}:{line}: resolved callee `{callee}` is not a known function")]
    DanglingCallee {
        unit: String,
        line: u32,
        callee: String,
    },
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

fn stem(unit: &str) -> &str {
    Path::new(unit)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(unit)
}

fn unresolved_id(language: Language) -> String {
    format!("{UNRESOLVED}::{language}")
}

fn external_id(language: Language, expr: &str) -> String {
    format!("<external>::{language}::{expr}")
}

struct Builder<'a> {
    nodes: BTreeMap<String, Node>,
    edges: BTreeSet<Edge>,
    cpp: SymbolIndex<'a>,
    /// Python definitions by unit and name.
    py: BTreeMap<(&'a str, &'a str), BTreeSet<String>>,
    /// Python units by file stem, for `module.f` calls.
    py_stems: BTreeMap<&'a str, BTreeSet<&'a str>>,
}

impl<'a> Builder<'a> {
    fn new(defs: &'a [FunctionDef]) -> Self {
        let fqns = FqnTable::new(defs);
        let mut nodes = BTreeMap::new();
        let mut py: BTreeMap<(&str, &str), BTreeSet<String>> = BTreeMap::new();
        let mut py_stems: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for d in defs {
            let fqn = fqns.fqn(d);
            if d.language == Language::Python && !d.is_anonymous {
                py.entry((&d.unit, &d.name))
                    .or_default()
                    .insert(fqn.clone());
                py_stems.entry(stem(&d.unit)).or_default().insert(&d.unit);
            }
            nodes.entry(fqn.clone()).or_insert_with(|| Node {
                fqn,
                display: d.name.clone(),
                language: d.language,
                is_anonymous: d.is_anonymous,
                kind: NodeKind::Function,
            });
        }
        Builder {
            nodes,
            edges: BTreeSet::new(),
            cpp: SymbolIndex::new(defs),
            py,
            py_stems,
        }
    }

    fn caller_id(&mut self, call: &CallSite) -> Result<String, GraphError> {
        let top = call.language.top_level();
        if call.caller_fqn == top {
            let fqn = format!("{}::{top}", call.unit);
            self.nodes.entry(fqn.clone()).or_insert_with(|| Node {
                display: format!("{}:{top}", stem(&call.unit)),
                fqn,
                language: call.language,
                is_anonymous: false,
                kind: NodeKind::TopLevel,
            });
            return Ok(format!("{}::{top}", call.unit));
        }
        match self.nodes.get(&call.caller_fqn) {
            Some(node) if node.kind == NodeKind::Function => Ok(call.caller_fqn.clone()),
            _ => Err(GraphError::DanglingCaller {
                unit: call.unit.clone(),
                line: call.line,
                caller: call.caller_fqn.clone(),
            }),
        }
    }

    fn python_callee(&self, call: &CallSite) -> Option<String> {
        let unique = |set: Option<&BTreeSet<String>>| match set {
            Some(s) if s.len() == 1 => s.iter().next().cloned(),
            _ => None,
        };
        let expr = call.callee_expr.as_str();
        match expr.rsplit_once('.') {
            None => unique(self.py.get(&(call.unit.as_str(), expr))),
            Some(("self" | "cls", name)) => unique(self.py.get(&(call.unit.as_str(), name))),
            Some((module, name)) => {
                let units = self.py_stems.get(last_dotted(module))?;
                let candidates: BTreeSet<String> = units
                    .iter()
                    .filter_map(|u| self.py.get(&(*u, name)))
                    .flatten()
                    .filter(|fqn| fqn.matches("::").count() == 1)
                    .cloned()
                    .collect();
                unique(Some(&candidates))
            }
        }
    }

    fn cpp_callee(&self, call: &CallSite) -> Option<String> {
        let expr = call.callee_expr.as_str();
        let path = match expr.strip_prefix("this->") {
            Some(rest) => rest,
            None if expr.contains('.') || expr.contains("->") => return None,
            None => expr,
        };
        self.cpp
            .lookup_call(path, &call.unit, Some(call.args.len() as u32))
            .ok()
            .flatten()
    }

    fn add_special(&mut self, fqn: String, display: &str, language: Language, kind: NodeKind) {
        self.nodes.entry(fqn.clone()).or_insert_with(|| Node {
            fqn,
            display: display.to_string(),
            language,
            is_anonymous: false,
            kind,
        });
    }

    fn add(&mut self, rc: &ResolvedCall) -> Result<(), GraphError> {
        let call = &rc.call;
        let caller = self.caller_id(call)?;
        if rc.cross_language {
            for callee in rc.callees() {
                if !self.nodes.contains_key(callee) {
                    return Err(GraphError::DanglingCallee {
                        unit: call.unit.clone(),
                        line: call.line,
                        callee: callee.to_string(),
                    });
                }
                self.edges.insert(Edge {
                    caller: caller.clone(),
                    callee: callee.to_string(),
                    cross_language: true,
                    flag: rc.flag,
                });
            }
            return Ok(());
        }
        let callee = if rc.flag == Some(CallFlag::Unresolved) {
            let id = unresolved_id(Language::Cpp);
            self.add_special(id.clone(), UNRESOLVED, Language::Cpp, NodeKind::Unresolved);
            id
        } else {
            let found = match call.language {
                Language::Python => self.python_callee(call),
                Language::Cpp => self.cpp_callee(call),
            };
            match found {
                Some(fqn) => fqn,
                None => {
                    let id = external_id(call.language, &call.callee_expr);
                    self.add_special(
                        id.clone(),
                        &call.callee_expr,
                        call.language,
                        NodeKind::External,
                    );
                    id
                }
            }
        };
        self.edges.insert(Edge {
            caller,
            callee,
            cross_language: false,
            flag: rc.flag,
        });
        Ok(())
    }
}

/// Builds the graph: one node per function, per top-level pseudo-function
/// that makes calls, per external callee, and one edge per distinct call.
pub fn build_graph(defs: &[FunctionDef], calls: &[ResolvedCall]) -> Result<CallGraph, GraphError> {
    let mut builder = Builder::new(defs);
    let mut ordered: Vec<&ResolvedCall> = calls.iter().collect();
    ordered.sort();
    for rc in ordered {
        builder.add(rc)?;
    }
    Ok(CallGraph {
        nodes: builder.nodes.into_values().collect(),
        edges: builder.edges.into_iter().collect(),
    })
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering: Python nodes are boxes, C++ nodes ellipses,
/// cross-language edges dashed.
pub fn emit_dot(graph: &CallGraph) -> String {
    let mut out = String::from("digraph G {\n");
    for n in &graph.nodes {
        let shape = match n.language {
            Language::Python => "box",
            Language::Cpp => "ellipse",
        };
        let label = match n.kind {
            _ if n.is_anonymous => format!("{} [anonymous]", n.display),
            NodeKind::Unresolved => format!("{} [unresolved]", n.display),
            _ => n.display.clone(),
        };
        let style = match n.kind {
            NodeKind::External => ", style=dotted",
            NodeKind::Unresolved => ", style=bold",
            _ => "",
        };
        let _ = writeln!(
            out,
            "  {} [label={}, shape={shape}{style}];",
            quote(&n.fqn),
            quote(&label)
        );
    }
    for e in &graph.edges {
        let mut attrs = Vec::new();
        if e.cross_language {
            attrs.push("style=dashed".to_string());
        }
        if let Some(flag) = e.flag {
            attrs.push(format!("label={}", quote(flag.as_str())));
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        let _ = writeln!(
            out,
            "  {} -> {}{attrs};",
            quote(&e.caller),
            quote(&e.callee)
        );
    }
    out.push_str("}\n");
    out
}

pub fn emit_json(graph: &CallGraph) -> String {
    let mut s = serde_json::to_string_pretty(graph).expect("graph serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<CallGraph, GraphError> {
    serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))
}
