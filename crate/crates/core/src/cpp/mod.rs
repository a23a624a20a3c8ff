//! C++ subset extractor.
//!
//! Handles includes, namespaces, classes, free and member function
//! declarations/definitions, calls inside function bodies, string-typed
//! variable initializations and `PYBIND11_MODULE` blocks. There is no
//! preprocessor: every conditional branch is scanned.

mod lex;
mod mask;

pub use mask::mask;

use std::collections::BTreeSet;

use crate::diag::Diagnostics;
use crate::fqn::{binding_scope, FqnTable};
use crate::ir::{Extraction, ExtractionTables};
use crate::model::{
    anonymous_name, ArgForm, ArgValue, AssignRecord, CallSite, FunctionDef, IncludeRecord,
    Language, RawBinding, ValueForm, CPP_TOP_LEVEL,
};

use lex::{string_value, Tok, TokKind};

const BINDING_MACRO: &str = "PYBIND11_MODULE";

const SPECIFIERS: &[&str] = &[
    "static",
    "inline",
    "constexpr",
    "consteval",
    "constinit",
    "extern",
    "virtual",
    "explicit",
    "friend",
    "thread_local",
    "mutable",
    "volatile",
    "register",
    "const",
];

/// Keywords that may directly precede a call expression.
const CALL_PREV_OK: &[&str] = &[
    "return",
    "else",
    "new",
    "throw",
    "case",
    "co_return",
    "co_await",
    "co_yield",
    "do",
    "delete",
    "not",
    "and",
    "or",
];

const NOT_CALLEES: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "return",
    "sizeof",
    "alignof",
    "decltype",
    "catch",
    "static_assert",
    "noexcept",
    "typeid",
    "static_cast",
    "dynamic_cast",
    "const_cast",
    "reinterpret_cast",
    "alignas",
    "defined",
    "throw",
    "requires",
    "__attribute__",
    "__declspec",
    "operator",
    "new",
    "delete",
    "template",
    "typename",
    "sizeof...",
];

const STMT_KEYWORDS: &[&str] = &[
    "return",
    "throw",
    "delete",
    "goto",
    "case",
    "default",
    "else",
    "do",
    "co_return",
    "co_yield",
    "co_await",
    "using",
    "typedef",
    "namespace",
    "break",
    "continue",
    "if",
    "for",
    "while",
    "switch",
    "try",
    "catch",
    "new",
    "public",
    "private",
    "protected",
    "template",
    "friend",
    "enum",
    "class",
    "struct",
    "union",
    "static_assert",
    "operator",
    "sizeof",
    "this",
    "true",
    "false",
    "nullptr",
];

const STRING_TYPES: &[&str] = &[
    "string",
    "wstring",
    "u8string",
    "u16string",
    "u32string",
    "string_view",
    "wstring_view",
    "auto",
];

const CHAR_TYPES: &[&str] = &["char", "wchar_t", "char8_t", "char16_t", "char32_t"];

const CASTS: &[&str] = &[
    "overload_cast",
    "static_cast",
    "reinterpret_cast",
    "const_cast",
];

/// Whose scope a call or assignment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Owner {
    File,
    Def(usize),
    Binding(usize),
}

#[derive(Debug)]
enum Target {
    Ready(ArgValue),
    /// A lone identifier: a function reference unless it names a variable.
    Bare(String),
}

#[derive(Debug)]
struct PendingBinding {
    line: u32,
    module: usize,
    module_var: String,
    exposed: ArgValue,
    target: Target,
}

struct CppParser<'a> {
    src: &'a str,
    unit: &'a str,
    toks: Vec<Tok>,
    pairs: Vec<Option<usize>>,
    defs: Vec<FunctionDef>,
    calls: Vec<(Owner, u32, String, Vec<ArgValue>)>,
    assigns: Vec<(Owner, u32, String, Option<String>)>,
    bindings: Vec<PendingBinding>,
    modules: Vec<String>,
    string_vars: BTreeSet<(Owner, String)>,
    vars: BTreeSet<String>,
    anon: u32,
    bindings_ok: bool,
    diag: Diagnostics,
}

fn match_pairs(src: &str, toks: &[Tok]) -> Vec<Option<usize>> {
    let mut pairs = vec![None; toks.len()];
    let mut stack: Vec<(usize, u8)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokKind::Punct {
            continue;
        }
        let c = src.as_bytes()[t.start];
        let open = match c {
            b'(' | b'[' | b'{' => {
                stack.push((i, c));
                continue;
            }
            b')' => b'(',
            b']' => b'[',
            b'}' => b'{',
            _ => continue,
        };
        if let Some(depth) = stack.iter().rposition(|&(_, o)| o == open) {
            let (j, _) = stack[depth];
            stack.truncate(depth);
            pairs[i] = Some(j);
            pairs[j] = Some(i);
        }
    }
    pairs
}

impl<'a> CppParser<'a> {
    fn new(src: &'a str, unit: &'a str, toks: Vec<Tok>) -> Self {
        let pairs = match_pairs(src, &toks);
        CppParser {
            src,
            unit,
            toks,
            pairs,
            defs: Vec::new(),
            calls: Vec::new(),
            assigns: Vec::new(),
            bindings: Vec::new(),
            modules: Vec::new(),
            string_vars: BTreeSet::new(),
            vars: BTreeSet::new(),
            anon: 0,
            bindings_ok: true,
            diag: Diagnostics::default(),
        }
    }

    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| &self.src[t.start..t.end])
    }

    fn is(&self, i: usize, s: &str) -> bool {
        self.text(i) == s
    }

    fn kind(&self, i: usize) -> Option<TokKind> {
        self.toks.get(i).map(|t| t.kind)
    }

    fn is_ident(&self, i: usize) -> bool {
        self.kind(i) == Some(TokKind::Ident)
    }

    fn line(&self, i: usize) -> u32 {
        self.toks.get(i).map_or(0, |t| t.line)
    }

    fn pair(&self, i: usize) -> Option<usize> {
        self.pairs.get(i).copied().flatten()
    }

    fn is_opener(&self, i: usize) -> bool {
        self.kind(i) == Some(TokKind::Punct) && matches!(self.text(i), "(" | "[" | "{")
    }

    /// Source text of `lo..hi`, one space wherever the source had a gap.
    fn tokens_text(&self, lo: usize, hi: usize) -> String {
        let mut out = String::new();
        for k in lo..hi {
            if k > lo && self.toks[k].start > self.toks[k - 1].end {
                out.push(' ');
            }
            out.push_str(self.text(k));
        }
        out
    }

    /// Concatenated value if `lo..hi` is one or more adjacent string literals.
    fn literal(&self, lo: usize, hi: usize) -> Option<String> {
        if lo >= hi {
            return None;
        }
        let mut out = String::new();
        for k in lo..hi {
            if self.kind(k) != Some(TokKind::Str) {
                return None;
            }
            out.push_str(&string_value(self.text(k))?);
        }
        Some(out)
    }

    fn angle_forward(&self, lt: usize, hi: usize) -> Option<usize> {
        let mut depth = 0usize;
        let mut j = lt;
        while j < hi {
            match self.text(j) {
                "(" | "[" => {
                    j = self.pair(j)? + 1;
                    continue;
                }
                "{" | "}" | ";" | "&&" | "||" => return None,
                "<" => depth += 1,
                ">" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(j);
                    }
                }
                _ => {}
            }
            j += 1;
        }
        None
    }

    fn angle_back(&self, gt: usize) -> Option<usize> {
        let mut depth = 0usize;
        let mut j = gt;
        loop {
            match self.text(j) {
                ")" | "]" => j = self.pair(j)?,
                "{" | "}" | ";" | "&&" | "||" => return None,
                ">" => depth += 1,
                "<" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(j);
                    }
                }
                _ => {}
            }
            if j == 0 {
                return None;
            }
            j -= 1;
        }
    }

    /// End of the statement starting at `i`: the index of its `;`, or of
    /// the `{` opening a body (`true`). A `{` after a top-level `=` belongs
    /// to the initializer.
    fn stmt_end(&self, i: usize, hi: usize) -> (usize, bool) {
        let mut eq = false;
        let mut j = i;
        while j < hi {
            match self.text(j) {
                "(" | "[" if self.is_opener(j) => {
                    j = self.pair(j).map_or(hi, |c| c + 1);
                    continue;
                }
                "{" if self.is_opener(j) => {
                    if !eq {
                        return (j, true);
                    }
                    j = self.pair(j).map_or(hi, |c| c + 1);
                    continue;
                }
                ";" | "}" => return (j, false),
                "=" if j == 0 || !self.is(j - 1, "operator") => eq = true,
                _ => {}
            }
            j += 1;
        }
        (hi, false)
    }

    /// First index in `lo..hi` at bracket depth zero satisfying `pred`.
    fn find_top(&self, lo: usize, hi: usize, pred: impl Fn(&str) -> bool) -> Option<usize> {
        let mut j = lo;
        while j < hi {
            if pred(self.text(j)) {
                return Some(j);
            }
            if self.is_opener(j) {
                j = self.pair(j).map_or(hi, |c| c + 1);
            } else {
                j += 1;
            }
        }
        None
    }

    /// Comma-separated ranges of `lo..hi` at depth zero, template-aware.
    fn split_commas(&self, lo: usize, hi: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = lo;
        let mut angle = 0usize;
        let mut j = lo;
        while j < hi {
            let t = self.text(j);
            if self.is_opener(j) {
                j = self.pair(j).map_or(hi, |c| c + 1).min(hi);
                continue;
            }
            if t == "<" && j > lo && self.is_ident(j - 1) && self.angle_forward(j, hi).is_some() {
                angle += 1;
            } else if t == ">" && angle > 0 {
                angle -= 1;
            } else if t == "," && angle == 0 {
                out.push((start, j));
                start = j + 1;
            }
            j += 1;
        }
        out.push((start, hi));
        out
    }

    fn arity(&self, lo: usize, hi: usize) -> u32 {
        if lo >= hi || (hi == lo + 1 && self.is(lo, "void")) {
            return 0;
        }
        self.split_commas(lo, hi).len() as u32
    }

    /// `ident (:: ident)*`, optionally with a leading `::`.
    fn qualified_chain(&self, lo: usize, hi: usize) -> bool {
        let mut j = if self.is(lo, "::") { lo + 1 } else { lo };
        if j >= hi {
            return false;
        }
        loop {
            if !self.is_ident(j) {
                return false;
            }
            j += 1;
            if j == hi {
                return true;
            }
            if !self.is(j, "::") {
                return false;
            }
            j += 1;
        }
    }

    fn scope_of(&self, owner: Owner) -> Vec<String> {
        match owner {
            Owner::Def(i) => {
                let def = &self.defs[i];
                let mut scope = def.scope.clone();
                scope.push(def.name.clone());
                scope
            }
            Owner::File | Owner::Binding(_) => Vec::new(),
        }
    }

    fn push_def(&mut self, def: FunctionDef) -> usize {
        if let Some(idx) = self
            .defs
            .iter()
            .position(|d| d.line == def.line && d.scope == def.scope && d.name == def.name)
        {
            self.diag.skip("redefinition on one line");
            return idx;
        }
        self.defs.push(def);
        self.defs.len() - 1
    }

    // ---- declaration level ----

    fn decls(&mut self, lo: usize, hi: usize, scope: &mut Vec<String>, class: Option<&str>) {
        let mut i = lo;
        while i < hi {
            if self.kind(i) == Some(TokKind::Punct) {
                i = if self.is(i, "[") && self.is(i + 1, "[") {
                    self.pair(i).map_or(hi, |c| c + 1)
                } else {
                    i + 1
                };
                continue;
            }
            let t = self.text(i);
            if t == "namespace" || (t == "inline" && self.is(i + 1, "namespace")) {
                i = self.namespace(i, hi, scope);
                continue;
            }
            match t {
                "extern" if self.kind(i + 1) == Some(TokKind::Str) => {
                    if self.is(i + 2, "{") {
                        let close = self.pair(i + 2).unwrap_or(hi);
                        self.decls(i + 3, close, scope, class);
                        i = close + 1;
                    } else {
                        i += 2;
                    }
                    continue;
                }
                "template" if self.is(i + 1, "<") => {
                    i = self.angle_forward(i + 1, hi).map_or(i + 2, |g| g + 1);
                    continue;
                }
                "public" | "private" | "protected" if self.is(i + 1, ":") => {
                    i += 2;
                    continue;
                }
                BINDING_MACRO if self.is(i + 1, "(") => {
                    i = self.module_block(i, hi);
                    continue;
                }
                _ => {}
            }
            let (end, brace) = self.stmt_end(i, hi);
            i = self.declaration(i, end, brace, hi, scope, class);
        }
    }

    fn namespace(&mut self, i: usize, hi: usize, scope: &mut Vec<String>) -> usize {
        let mut j = if self.is(i, "inline") { i + 2 } else { i + 1 };
        let mut names = Vec::new();
        while j < hi && (self.is_ident(j) || self.is(j, "::")) {
            if self.is_ident(j) && !self.is(j, "inline") {
                names.push(self.text(j).to_string());
            }
            j += 1;
        }
        if !self.is(j, "{") {
            self.diag.skip("namespace alias");
            return self.stmt_end(i, hi).0 + 1;
        }
        let close = self.pair(j).unwrap_or(hi);
        let n = names.len();
        scope.extend(names);
        self.decls(j + 1, close, scope, None);
        scope.truncate(scope.len() - n);
        close + 1
    }

    fn after(&self, end: usize, brace: bool, hi: usize) -> usize {
        if brace {
            self.pair(end).map_or(hi, |c| c + 1)
        } else {
            end + 1
        }
    }

    fn declaration(
        &mut self,
        i: usize,
        end: usize,
        brace: bool,
        hi: usize,
        scope: &mut Vec<String>,
        class: Option<&str>,
    ) -> usize {
        let paren = self.find_top(i, end, |t| t == "(");
        if brace && paren.is_none() {
            if let Some(kw) = self.find_top(i, end, |t| {
                matches!(t, "class" | "struct" | "union" | "enum")
            }) {
                let close = self.pair(end).unwrap_or(hi);
                if self.is(kw, "enum") {
                    self.diag.skip("enum");
                } else {
                    let name = self.type_name(kw + 1, end);
                    let pushed = name.is_some();
                    scope.extend(name.clone());
                    self.decls(end + 1, close, scope, name.as_deref());
                    if pushed {
                        scope.pop();
                    }
                }
                return close + 1;
            }
            if end > i && self.is_ident(end - 1) {
                // Brace-initialized variable: `T x{...};`
                let close = self.pair(end).unwrap_or(hi);
                let (semi, _) = self.stmt_end(close + 1, hi);
                self.var_statement(i, semi, class);
                return semi + 1;
            }
            self.diag.skip("unrecognized block");
            return self.after(end, brace, hi);
        }
        let Some(paren) = paren else {
            if !brace {
                self.var_statement(i, end, class);
            }
            return end + 1;
        };
        if self
            .find_top(i, paren, |t| t == "=")
            .is_some_and(|k| k == 0 || !self.is(k - 1, "operator"))
        {
            self.var_statement(i, end, class);
            return end + 1;
        }
        if (i..paren).any(|k| self.is(k, "typedef") || self.is(k, "using")) {
            self.diag.skip("type alias");
            return self.after(end, brace, hi);
        }

        // Locate the declarator name and its parameter list.
        let (name, name_idx, params_open) = match (i..paren).rev().find(|&k| self.is(k, "operator"))
        {
            Some(op) if op + 1 == paren => {
                if !(self.is(paren + 1, ")") && self.is(paren + 2, "(")) {
                    self.diag.skip("unrecognized declaration");
                    return self.after(end, brace, hi);
                }
                ("operator()".to_string(), op, paren + 2)
            }
            Some(op) => {
                let mut name = String::from("operator");
                if self.is_ident(op + 1) {
                    name.push(' ');
                }
                for k in op + 1..paren {
                    name.push_str(self.text(k));
                }
                (name, op, paren)
            }
            None => {
                let mut k = paren - 1;
                if paren == i {
                    self.diag.skip("unrecognized declaration");
                    return self.after(end, brace, hi);
                }
                if self.is(k, ">") {
                    match self.angle_back(k) {
                        Some(lt) if lt > i => k = lt - 1,
                        _ => {
                            self.diag.skip("unrecognized declaration");
                            return self.after(end, brace, hi);
                        }
                    }
                }
                if !self.is_ident(k) || NOT_CALLEES.contains(&self.text(k)) {
                    self.diag.skip("unrecognized declaration");
                    return self.after(end, brace, hi);
                }
                (self.text(k).to_string(), k, paren)
            }
        };

        let mut name = name;
        let mut chain = name_idx;
        if chain > i && self.is(chain - 1, "~") {
            name.insert(0, '~');
            chain -= 1;
        }
        let mut quals = Vec::new();
        while chain >= i + 2 && self.is(chain - 1, "::") && self.is_ident(chain - 2) {
            quals.push(self.text(chain - 2).to_string());
            chain -= 2;
        }
        quals.reverse();
        if chain > i && self.is(chain - 1, "::") {
            chain -= 1;
        }

        let prefix = i..chain;
        if prefix.clone().any(|k| {
            matches!(
                self.kind(k),
                Some(TokKind::Str | TokKind::Number | TokKind::Char)
            )
        }) {
            self.diag.skip("unrecognized declaration");
            return self.after(end, brace, hi);
        }
        let has_type = prefix.clone().any(|k| !SPECIFIERS.contains(&self.text(k)));
        let bare = name.trim_start_matches('~');
        let is_ctor =
            name.starts_with('~') || quals.last().is_some_and(|q| q == bare) || class == Some(bare);
        if !has_type && !is_ctor {
            self.diag.skip("macro invocation");
            return self.after(end, brace, hi);
        }

        let Some(params_close) = self.pair(params_open) else {
            self.diag.skip("unrecognized declaration");
            return self.after(end, brace, hi);
        };
        let params = self.split_commas(params_open + 1, params_close);
        let literal_param = params.iter().any(|&(a, b)| {
            a < b
                && matches!(
                    self.kind(a),
                    Some(TokKind::Str | TokKind::Number | TokKind::Char)
                )
        });
        if literal_param {
            if brace {
                self.diag.skip("unrecognized declaration");
                return self.after(end, brace, hi);
            }
            self.var_statement(i, end, class);
            return end + 1;
        }
        let arity = self.arity(params_open + 1, params_close);

        let mut def_scope = scope.clone();
        def_scope.extend(quals);
        let def = FunctionDef {
            unit: self.unit.to_string(),
            line: self.line(name_idx),
            language: Language::Cpp,
            scope: def_scope,
            name,
            has_body: brace,
            is_anonymous: false,
            arity,
        };
        let idx = self.push_def(def);
        if !brace {
            return end + 1;
        }
        let open = if self.find_top(params_close + 1, end, |t| t == ":").is_some() {
            self.ctor_body(end, hi)
        } else {
            end
        };
        let close = self.pair(open).unwrap_or(hi);
        self.scan(open + 1, close, Owner::Def(idx), true, true);
        close + 1
    }

    /// Skips brace-initialized members of a constructor initializer list.
    fn ctor_body(&self, mut open: usize, hi: usize) -> usize {
        while open < hi && self.is_ident(open - 1) {
            let Some(close) = self.pair(open) else {
                return open;
            };
            match self.find_top(close + 1, hi, |t| t == "{" || t == ";") {
                Some(next) if self.is(next, "{") => open = next,
                _ => return open,
            }
        }
        open
    }

    fn type_name(&self, lo: usize, hi: usize) -> Option<String> {
        let stop = self.find_top(lo, hi, |t| t == ":").unwrap_or(hi);
        let mut name = None;
        let mut j = lo;
        while j < stop {
            if self.is_opener(j) {
                j = self.pair(j).map_or(stop, |c| c + 1);
                continue;
            }
            if self.is(j, "<") {
                j = self.angle_forward(j, stop).map_or(stop, |g| g + 1);
                continue;
            }
            if self.is_ident(j) && !matches!(self.text(j), "final" | "alignas") {
                name = Some(self.text(j).to_string());
            }
            j += 1;
        }
        name
    }

    fn var_statement(&mut self, lo: usize, hi: usize, class: Option<&str>) {
        if class.is_some() {
            self.diag.skip("class member variable");
            return;
        }
        self.try_var_decl(lo, hi, Owner::File);
        self.scan(lo, hi, Owner::File, true, false);
    }

    // ---- variables ----

    /// Records the declaration at `lo..hi` if it is one; string-typed
    /// declarators with initializers become assignments.
    fn try_var_decl(&mut self, lo: usize, hi: usize, owner: Owner) -> bool {
        let mut j = lo;
        while j < hi && SPECIFIERS.contains(&self.text(j)) {
            j += 1;
        }
        if self.is(j, "::") {
            j += 1;
        }
        if !self.is_ident(j) || STMT_KEYWORDS.contains(&self.text(j)) {
            return false;
        }
        let mut type_idents = Vec::new();
        loop {
            if !self.is_ident(j) {
                return false;
            }
            type_idents.push(self.text(j));
            j += 1;
            if self.is(j, "<") {
                match self.angle_forward(j, hi) {
                    Some(g) => j = g + 1,
                    None => return false,
                }
            }
            if self.is(j, "::") {
                j += 1;
            } else {
                break;
            }
        }
        while j < hi && matches!(self.text(j), "const" | "volatile") {
            j += 1;
        }
        let base = type_idents.last().copied().unwrap_or("");
        let base_string = STRING_TYPES.contains(&base)
            || (base == "str" && type_idents.first().is_some_and(|q| *q == "py"));
        let char_like = CHAR_TYPES.contains(&base);

        let mut found = Vec::new();
        for (a, b) in self.split_commas(j, hi) {
            let mut k = a;
            let mut pointer = false;
            while k < b && matches!(self.text(k), "*" | "&" | "&&" | "const") {
                pointer |= self.is(k, "*");
                k += 1;
            }
            if k >= b || !self.is_ident(k) || STMT_KEYWORDS.contains(&self.text(k)) {
                return false;
            }
            let name_idx = k;
            k += 1;
            let mut array = false;
            while self.is(k, "[") {
                array = true;
                k = match self.pair(k) {
                    Some(c) => c + 1,
                    None => return false,
                };
            }
            let init = if k == b {
                None
            } else if self.is(k, "=") {
                Some((k + 1, b))
            } else if (self.is(k, "(") || self.is(k, "{")) && self.pair(k) == Some(b - 1) {
                Some((k + 1, b - 1))
            } else {
                return false;
            };
            found.push((name_idx, pointer || array, init));
        }

        for (name_idx, indirect, init) in found {
            let name = self.text(name_idx).to_string();
            self.vars.insert(name.clone());
            if !(base_string || (char_like && indirect)) {
                continue;
            }
            self.string_vars.insert((owner, name.clone()));
            if let Some((s, e)) = init {
                let literal = self.literal(s, e);
                self.assigns
                    .push((owner, self.line(name_idx), name, literal));
            }
        }
        true
    }

    fn try_reassign(&mut self, lo: usize, hi: usize, owner: Owner) {
        if !self.is_ident(lo) || !matches!(self.text(lo + 1), "=" | "+=") {
            return;
        }
        let name = self.text(lo).to_string();
        let target = if self.string_vars.contains(&(owner, name.clone())) {
            owner
        } else if self.string_vars.contains(&(Owner::File, name.clone())) {
            Owner::File
        } else {
            return;
        };
        let literal = if self.is(lo + 1, "=") {
            self.literal(lo + 2, hi)
        } else {
            None
        };
        self.assigns.push((target, self.line(lo), name, literal));
    }

    // ---- bodies ----

    fn scan(&mut self, lo: usize, hi: usize, owner: Owner, calls: bool, stmts: bool) {
        let mut i = lo;
        let mut stmt_start = true;
        while i < hi {
            if stmt_start && stmts {
                let (end, _) = self.stmt_end(i, hi);
                if !self.try_var_decl(i, end, owner) {
                    self.try_reassign(i, end, owner);
                }
            }
            stmt_start = false;
            match self.text(i) {
                ";" | "{" | "}" => stmt_start = true,
                ")" | "else" if stmts && self.is_ident(i + 1) => {
                    let (end, _) = self.stmt_end(i + 1, hi);
                    self.try_reassign(i + 1, end, owner);
                }
                "[" if self.is_lambda_start(i) => {
                    if let Some((next, _)) = self.lambda(i, owner, None) {
                        i = next;
                        continue;
                    }
                }
                "(" if calls && self.kind(i) == Some(TokKind::Punct) => self.maybe_call(i, owner),
                _ => {}
            }
            i += 1;
        }
    }

    fn is_lambda_start(&self, i: usize) -> bool {
        if self.is(i + 1, "[") || self.pair(i).is_none() {
            return false;
        }
        if i == 0 {
            return true;
        }
        let prev = self.text(i - 1);
        if self.is_ident(i - 1) {
            return CALL_PREV_OK.contains(&prev);
        }
        !matches!(prev, ")" | "]" | "[")
            && self.kind(i - 1) != Some(TokKind::Str)
            && self.kind(i - 1) != Some(TokKind::Number)
    }

    /// Parses a lambda at `[`; returns the index after its body and the
    /// anonymous definition it produced.
    fn lambda(&mut self, i: usize, owner: Owner, line: Option<u32>) -> Option<(usize, usize)> {
        let len = self.toks.len();
        let mut j = self.pair(i)? + 1;
        if self.is(j, "<") {
            j = self.angle_forward(j, len)? + 1;
        }
        let mut arity = 0;
        if self.is(j, "(") {
            let close = self.pair(j)?;
            arity = self.arity(j + 1, close);
            j = close + 1;
        }
        while j < len && !self.is(j, "{") {
            match self.text(j) {
                ";" | ")" | "," | "}" | "]" => return None,
                "(" | "[" => j = self.pair(j)? + 1,
                _ => j += 1,
            }
        }
        let close = self.pair(j)?;
        self.anon += 1;
        let idx = self.push_def(FunctionDef {
            unit: self.unit.to_string(),
            line: line.unwrap_or_else(|| self.line(i)),
            language: Language::Cpp,
            scope: self.scope_of(owner),
            name: anonymous_name(self.anon),
            has_body: true,
            is_anonymous: true,
            arity,
        });
        self.scan(j + 1, close, Owner::Def(idx), true, true);
        Some((close + 1, idx))
    }

    fn maybe_call(&mut self, open: usize, owner: Owner) {
        if open == 0 {
            return;
        }
        let mut k = open - 1;
        if self.is(k, ">") {
            match self.angle_back(k) {
                Some(lt) if lt > 0 => k = lt - 1,
                _ => return,
            }
        }
        if !self.is_ident(k) || NOT_CALLEES.contains(&self.text(k)) {
            return;
        }
        let mut start = k;
        while start >= 2
            && matches!(self.text(start - 1), "::" | "." | "->")
            && self.is_ident(start - 2)
        {
            start -= 2;
        }
        if start >= 1 {
            let prev = self.text(start - 1);
            if matches!(prev, "." | "->") {
                self.diag.skip("call on computed receiver");
                return;
            }
            if self.is_ident(start - 1) && !CALL_PREV_OK.contains(&prev) {
                return;
            }
            if prev == ">" && self.angle_back(start - 1).is_some() {
                return;
            }
            if prev == "~" {
                return;
            }
        }
        let Some(close) = self.pair(open) else {
            return;
        };
        let args = if close == open + 1 {
            Vec::new()
        } else {
            self.split_commas(open + 1, close)
                .into_iter()
                .map(|(a, b)| self.classify_arg(a, b))
                .collect()
        };
        let callee = self.tokens_text(start, k + 1);
        self.calls.push((owner, self.line(k), callee, args));
    }

    fn classify_arg(&self, a: usize, b: usize) -> ArgValue {
        let text = self.tokens_text(a, b);
        if let Some(value) = self.literal(a, b) {
            return ArgValue::string_literal(text, value);
        }
        let form = if b == a + 1 && self.is_ident(a) {
            ArgForm::Identifier
        } else if self.is(a, "[") && b > a && self.is(b - 1, "}") {
            ArgForm::Lambda
        } else if self.is(a, "&") && self.qualified_chain(a + 1, b) {
            ArgForm::FunctionRef
        } else {
            ArgForm::Other
        };
        ArgValue::new(form, text)
    }

    // ---- binding blocks ----

    fn module_block(&mut self, i: usize, hi: usize) -> usize {
        let open = i + 1;
        let line = self.line(i);
        let Some(close) = self.pair(open) else {
            self.suppress_bindings(line);
            return hi;
        };
        let args = self.split_commas(open + 1, close);
        let ident_arg = |p: &Self, n: usize| {
            args.get(n)
                .filter(|&&(a, b)| b == a + 1 && p.is_ident(a))
                .map(|&(a, _)| p.text(a).to_string())
        };
        let (Some(module), Some(var)) = (ident_arg(self, 0), ident_arg(self, 1)) else {
            self.diag.skip("unhandled binding construct");
            return close + 1;
        };
        let body = close + 1;
        if !self.is(body, "{") {
            self.diag.skip("unhandled binding construct");
            return body;
        }
        let Some(body_close) = self.pair(body) else {
            self.suppress_bindings(line);
            return hi;
        };
        if (body..=body_close).any(|k| {
            self.kind(k) == Some(TokKind::Punct)
                && matches!(self.text(k), "(" | ")" | "[" | "]" | "{" | "}")
                && self.pair(k).is_none()
        }) {
            self.suppress_bindings(line);
            return body_close + 1;
        }
        let midx = self.modules.len();
        self.modules.push(module);
        self.binding_body(body + 1, body_close, midx, &var);
        body_close + 1
    }

    fn suppress_bindings(&mut self, line: u32) {
        self.bindings_ok = false;
        self.diag.warn(
            self.unit,
            Some(line),
            format!(
                "unbalanced braces in {BINDING_MACRO} block; bindings of this unit are dropped"
            ),
        );
    }

    fn binding_body(&mut self, lo: usize, hi: usize, midx: usize, var: &str) {
        let owner = Owner::Binding(midx);
        let mut i = lo;
        while i < hi {
            if matches!(self.text(i), ";" | "{" | "}") {
                i += 1;
                continue;
            }
            let (end, _) = self.stmt_end(i, hi);
            if self.is(i, var) && self.is(i + 1, ".") {
                let rest = self.binding_chain(i + 1, end, midx, var);
                self.unhandled_defs(rest, end);
                self.scan(rest, end, owner, false, false);
            } else {
                self.unhandled_defs(i, end);
                self.scan(i, end, owner, false, true);
            }
            i = end + 1;
        }
    }

    fn unhandled_defs(&mut self, lo: usize, hi: usize) {
        for k in lo..hi {
            if self.is(k, ".") && matches!(self.text(k + 1), "def" | "attr" | "def_submodule") {
                self.diag.skip("unhandled binding construct");
            }
        }
    }

    /// Walks `.def(...)` segments of a chain on the module variable;
    /// returns the index where the chain stops.
    fn binding_chain(&mut self, mut k: usize, end: usize, midx: usize, var: &str) -> usize {
        while k + 2 < end && self.is(k, ".") && self.is_ident(k + 1) && self.is(k + 2, "(") {
            let open = k + 2;
            let Some(close) = self.pair(open) else {
                break;
            };
            if self.is(k + 1, "def") {
                self.raw_binding(k + 1, open, close, midx, var);
            } else {
                self.diag.skip("unhandled binding construct");
                self.scan(open + 1, close, Owner::Binding(midx), false, false);
            }
            k = close + 1;
        }
        k
    }

    fn raw_binding(&mut self, def_idx: usize, open: usize, close: usize, midx: usize, var: &str) {
        let args = self.split_commas(open + 1, close);
        if args.len() < 2 || args.iter().any(|&(a, b)| a >= b) {
            self.diag.skip("unhandled binding construct");
            return;
        }
        let line = self.line(def_idx);
        let (ea, eb) = args[0];
        let exposed_text = self.tokens_text(ea, eb);
        let exposed = match self.literal(ea, eb) {
            Some(value) => ArgValue::string_literal(exposed_text, value),
            None if eb == ea + 1 && self.is_ident(ea) => {
                ArgValue::new(ArgForm::Identifier, exposed_text)
            }
            None => ArgValue::new(ArgForm::Other, exposed_text),
        };
        let (ta, tb) = args[1];
        let target = self.binding_target(ta, tb, line, midx);
        for &(a, b) in &args[2..] {
            self.scan(a, b, Owner::Binding(midx), false, false);
        }
        self.bindings.push(PendingBinding {
            line,
            module: midx,
            module_var: var.to_string(),
            exposed,
            target,
        });
    }

    fn binding_target(&mut self, a: usize, b: usize, line: u32, midx: usize) -> Target {
        let (a, b) = self.strip_casts(a, b);
        let text = self.tokens_text(a, b);
        if self.is(a, "[") {
            if let Some((next, _)) = self.lambda(a, Owner::Binding(midx), Some(line)) {
                if next == b {
                    return Target::Ready(ArgValue::new(ArgForm::Lambda, text));
                }
            }
            return Target::Ready(ArgValue::new(ArgForm::Other, text));
        }
        if self.is(a, "&") && self.qualified_chain(a + 1, b) {
            return Target::Ready(ArgValue::new(ArgForm::FunctionRef, text));
        }
        if self.qualified_chain(a, b) {
            if b == a + 1 {
                return Target::Bare(text);
            }
            return Target::Ready(ArgValue::new(ArgForm::FunctionRef, text));
        }
        self.scan(a, b, Owner::Binding(midx), false, false);
        Target::Ready(ArgValue::new(ArgForm::Other, text))
    }

    /// Peels `py::overload_cast<...>(x)`, `static_cast<...>(x)`, C-style
    /// casts and redundant parentheses off a binding target.
    fn strip_casts(&self, mut a: usize, mut b: usize) -> (usize, usize) {
        loop {
            if a >= b {
                return (a, b);
            }
            if self.is(a, "(") {
                match self.pair(a) {
                    Some(c) if c + 1 == b => {
                        (a, b) = (a + 1, c);
                        continue;
                    }
                    Some(c) if c + 1 < b => {
                        a = c + 1;
                        continue;
                    }
                    _ => return (a, b),
                }
            }
            if !self.is(b - 1, ")") {
                return (a, b);
            }
            let Some(open) = self.pair(b - 1) else {
                return (a, b);
            };
            if open == 0 || !self.is(open - 1, ">") {
                return (a, b);
            }
            let Some(lt) = self.angle_back(open - 1) else {
                return (a, b);
            };
            if lt <= a || !CASTS.contains(&self.text(lt - 1)) {
                return (a, b);
            }
            let head = lt - 1;
            if !(head == a
                || (head >= a + 2 && self.is(head - 1, "::") && self.qualified_chain(a, head - 1)))
            {
                return (a, b);
            }
            let (x, y) = self.split_commas(open + 1, b - 1)[0];
            (a, b) = (x, y);
        }
    }

    fn finish(self, lexed_includes: Vec<lex::Include>) -> Extraction {
        let table = FqnTable::new(&self.defs);
        let owner_fqn = |owner: Owner| match owner {
            Owner::File => CPP_TOP_LEVEL.to_string(),
            Owner::Def(i) => table.fqn(&self.defs[i]),
            Owner::Binding(m) => binding_scope(self.unit, &self.modules[m]),
        };
        let unit = self.unit.to_string();
        let mut out = ExtractionTables::default();
        for (owner, line, callee_expr, args) in &self.calls {
            out.calls.push(CallSite {
                unit: unit.clone(),
                line: *line,
                language: Language::Cpp,
                caller_fqn: owner_fqn(*owner),
                callee_expr: callee_expr.clone(),
                args: args.clone(),
            });
        }
        for (owner, line, variable, literal) in &self.assigns {
            out.assigns.push(AssignRecord {
                unit: unit.clone(),
                line: *line,
                language: Language::Cpp,
                scope_fqn: owner_fqn(*owner),
                variable: variable.clone(),
                value_form: if literal.is_some() {
                    ValueForm::StringLiteral
                } else {
                    ValueForm::Other
                },
                literal: literal.clone(),
            });
        }
        for inc in lexed_includes {
            out.includes.push(IncludeRecord {
                unit: unit.clone(),
                line: inc.line,
                included_path: inc.path,
                is_first_substantive: inc.first_substantive,
            });
        }
        if self.bindings_ok {
            let functions: BTreeSet<&str> = self
                .defs
                .iter()
                .filter(|d| !d.is_anonymous)
                .map(|d| d.name.as_str())
                .collect();
            for b in self.bindings {
                let target_arg = match b.target {
                    Target::Ready(arg) => arg,
                    Target::Bare(name)
                        if !functions.contains(name.as_str()) && self.vars.contains(&name) =>
                    {
                        ArgValue::new(ArgForm::Identifier, name)
                    }
                    Target::Bare(name) => ArgValue::new(ArgForm::FunctionRef, name),
                };
                out.raw_bindings.push(RawBinding {
                    unit: unit.clone(),
                    line: b.line,
                    module: self.modules[b.module].clone(),
                    module_var: b.module_var,
                    exposed_arg: b.exposed,
                    target_arg,
                });
            }
        }
        out.defs = self.defs;
        Extraction {
            tables: out,
            diagnostics: self.diag,
        }
    }
}

/// Extracts definitions, calls, includes, string assignments and raw
/// bindings from C++ text.
pub fn parse_cpp_unit(source: &str, path: &str) -> Extraction {
    let lexed = lex::lex(source);
    let mut parser = CppParser::new(source, path, lexed.toks);
    let n = parser.toks.len();
    parser.decls(0, n, &mut Vec::new(), None);
    parser.finish(lexed.includes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Extraction {
        parse_cpp_unit(src, "B.cpp")
    }

    fn names(x: &Extraction) -> Vec<(String, bool, u32)> {
        x.tables
            .defs
            .iter()
            .map(|d| (d.name.clone(), d.has_body, d.arity))
            .collect()
    }

    fn calls(x: &Extraction) -> Vec<(String, String)> {
        x.tables
            .calls
            .iter()
            .map(|c| (c.caller_fqn.clone(), c.callee_expr.clone()))
            .collect()
    }

    const FIG2B: &str = "#include <pybind11/pybind11.h>\n\
                         namespace py = pybind11;\n\
                         \n\
                         int f(int x);\n\
                         \n\
                         PYBIND11_MODULE(B, m) {\n\
                         \x20   m.def(\"f\", &f);\n\
                         }\n";

    #[test]
    fn binding_example() {
        let x = parse(FIG2B);
        assert_eq!(names(&x), [("f".to_string(), false, 1)]);
        let raw = &x.tables.raw_bindings;
        assert_eq!(raw.len(), 1);
        assert_eq!(raw[0].module, "B");
        assert_eq!(raw[0].module_var, "m");
        assert_eq!(raw[0].line, 7);
        assert_eq!(raw[0].exposed_arg, ArgValue::string_literal("\"f\"", "f"));
        assert_eq!(raw[0].target_arg, ArgValue::new(ArgForm::FunctionRef, "&f"));
        assert_eq!(x.tables.includes.len(), 1);
        assert!(x.tables.includes[0].is_first_substantive);
        assert!(x.tables.calls.is_empty());
    }

    #[test]
    fn lambda_target() {
        let x = parse("PYBIND11_MODULE(B, m) {\n  m.def(\"g\", [](int a){return a;});\n}\n");
        let raw = &x.tables.raw_bindings;
        assert_eq!(raw[0].target_arg.form, ArgForm::Lambda);
        assert_eq!(raw[0].target_arg.text, "[](int a){return a;}");
        let def = &x.tables.defs[0];
        assert_eq!(def.name, "<anonymous:1>");
        assert!(def.is_anonymous);
        assert_eq!(def.line, 2);
        assert_eq!(def.arity, 1);
    }

    #[test]
    fn no_binding_macro() {
        let x = parse("int f(int x) { return x; }\n");
        assert!(x.tables.raw_bindings.is_empty());
        assert_eq!(names(&x), [("f".to_string(), true, 1)]);
    }

    #[test]
    fn definitions_and_calls() {
        let src = "int square(int x);\n\
                   int square(int x) { return x * x; }\n\
                   int f(int x) {\n  int y = square(x);\n  return helper::g(y) + obj.h();\n}\n";
        let x = parse(src);
        assert_eq!(
            names(&x),
            [
                ("square".to_string(), false, 1),
                ("square".to_string(), true, 1),
                ("f".to_string(), true, 1)
            ]
        );
        assert_eq!(
            calls(&x),
            [
                ("B.cpp::f".to_string(), "square".to_string()),
                ("B.cpp::f".to_string(), "helper::g".to_string()),
                ("B.cpp::f".to_string(), "obj.h".to_string()),
            ]
        );
        assert_eq!(x.tables.calls[0].line, 4);
        assert_eq!(
            x.tables.calls[0].args,
            [ArgValue::new(ArgForm::Identifier, "x")]
        );
    }

    #[test]
    fn namespaces_classes_and_overloads() {
        let src = "namespace a { namespace b {\n\
                   int f(int x);\n int f(int x, int y) { return f(x) + y; }\n\
                   class K {\n public:\n  K(int v) : v_(v) {}\n  int get() const { return v_; }\n\
                   private:\n  int v_ = 0;\n};\n\
                   }}\n\
                   int a::b::K::size() { return 1; }\n";
        let x = parse(src);
        let fqns: Vec<String> = {
            let t = FqnTable::new(&x.tables.defs);
            x.tables.defs.iter().map(|d| t.fqn(d)).collect()
        };
        assert_eq!(
            fqns,
            [
                "B.cpp::a.b::f/1",
                "B.cpp::a.b::f/2",
                "B.cpp::a.b.K::K",
                "B.cpp::a.b.K::get",
                "B.cpp::a.b.K::size",
            ]
        );
        assert_eq!(
            calls(&x),
            [("B.cpp::a.b::f/2".to_string(), "f".to_string())]
        );
    }

    #[test]
    fn declarations_are_not_calls() {
        let src = "void f() {\n  std::string s(\"x\");\n  Foo bar(1, 2);\n\
                   std::vector<int> v(3);\n  if (ok(s)) { g(); }\n  return;\n}\n";
        let x = parse(src);
        assert_eq!(
            calls(&x),
            [
                ("B.cpp::f".to_string(), "ok".to_string()),
                ("B.cpp::f".to_string(), "g".to_string())
            ]
        );
        assert_eq!(x.tables.assigns.len(), 1);
        assert_eq!(x.tables.assigns[0].literal.as_deref(), Some("x"));
    }

    #[test]
    fn string_variables() {
        let src = "static const char* kName = \"f\";\n\
                   PYBIND11_MODULE(B, m) {\n\
                   \x20 std::string n = \"g\";\n\
                   \x20 auto k = std::string(\"h\");\n\
                   \x20 n = \"i\";\n\
                   \x20 if (alt) n = \"j\"; else { n += k; }\n\
                   \x20 m.def(n, &g);\n\
                   \x20 m.def(kName, &f);\n\
                   }\n";
        let x = parse(src);
        let a: Vec<(String, String, Option<String>)> = x
            .tables
            .assigns
            .iter()
            .map(|a| (a.scope_fqn.clone(), a.variable.clone(), a.literal.clone()))
            .collect();
        assert_eq!(
            a,
            [
                ("<file>".into(), "kName".into(), Some("f".into())),
                ("B.cpp::<binding:B>".into(), "n".into(), Some("g".into())),
                ("B.cpp::<binding:B>".into(), "k".into(), None),
                ("B.cpp::<binding:B>".into(), "n".into(), Some("i".into())),
                ("B.cpp::<binding:B>".into(), "n".into(), Some("j".into())),
                ("B.cpp::<binding:B>".into(), "n".into(), None),
            ]
        );
        let raw = &x.tables.raw_bindings;
        assert_eq!(raw[0].exposed_arg, ArgValue::new(ArgForm::Identifier, "n"));
        assert_eq!(
            raw[1].exposed_arg,
            ArgValue::new(ArgForm::Identifier, "kName")
        );
    }

    #[test]
    fn target_forms() {
        let src = "int f(int);\nint f(double);\nauto fp = &f;\n\
                   PYBIND11_MODULE(B, m) {\n\
                   m.def(\"a\", py::overload_cast<int>(&f))\n\
                    .def(\"b\", static_cast<int (*)(double)>(&f))\n\
                    .def(\"c\", f)\n\
                    .def(\"d\", ns::g)\n\
                    .def(\"e\", fp)\n\
                    .def(\"f\", &K::m, py::arg(\"x\"))\n\
                    .def(\"g\", make());\n\
                   }\n";
        let x = parse(src);
        let forms: Vec<(ArgForm, String)> = x
            .tables
            .raw_bindings
            .iter()
            .map(|r| (r.target_arg.form, r.target_arg.text.clone()))
            .collect();
        assert_eq!(
            forms,
            [
                (ArgForm::FunctionRef, "&f".into()),
                (ArgForm::FunctionRef, "&f".into()),
                (ArgForm::FunctionRef, "f".into()),
                (ArgForm::FunctionRef, "ns::g".into()),
                (ArgForm::Identifier, "fp".into()),
                (ArgForm::FunctionRef, "&K::m".into()),
                (ArgForm::Other, "make()".into()),
            ]
        );
        assert_eq!(x.tables.raw_bindings[1].line, 6);
    }

    #[test]
    fn other_receivers_are_tallied() {
        let src = "PYBIND11_MODULE(B, m) {\n\
                   py::class_<K>(m, \"K\").def(\"get\", &K::get);\n\
                   m.attr(\"x\") = 1;\n\
                   m.def(\"f\", &f);\n}\n";
        let x = parse(src);
        assert_eq!(x.tables.raw_bindings.len(), 1);
        assert_eq!(
            x.diagnostics.skipped.get("unhandled binding construct"),
            Some(&2)
        );
    }

    #[test]
    fn multiple_modules() {
        let src = "PYBIND11_MODULE(A, m) { m.def(\"f\", &f); }\n\
                   PYBIND11_MODULE(C, mod) { mod.def(\"g\", &g); }\n";
        let x = parse(src);
        let mods: Vec<(&str, &str)> = x
            .tables
            .raw_bindings
            .iter()
            .map(|r| (r.module.as_str(), r.module_var.as_str()))
            .collect();
        assert_eq!(mods, [("A", "m"), ("C", "mod")]);
    }

    #[test]
    fn unbalanced_block_suppresses_bindings() {
        let x = parse("int f();\nPYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f;\n}\n");
        assert!(x.tables.raw_bindings.is_empty());
        assert_eq!(x.diagnostics.warnings.len(), 1);
        assert_eq!(x.tables.defs.len(), 1);
    }

    #[test]
    fn masked_content_is_ignored() {
        let src = "// PYBIND11_MODULE(X, m) { m.def(\"x\", &x); }\n\
                   void f() { log(\"g(); m.def(\\\"y\\\", &y)\"); /* h(); */ }\n";
        let x = parse(src);
        assert!(x.tables.raw_bindings.is_empty());
        assert_eq!(calls(&x), [("B.cpp::f".to_string(), "log".to_string())]);
    }

    #[test]
    fn lambdas_in_bodies() {
        let src = "void run() {\n  auto cb = [&](int v) { return work(v); };\n  cb(1);\n}\n";
        let x = parse(src);
        assert_eq!(x.tables.defs[1].name, "<anonymous:1>");
        assert_eq!(x.tables.defs[1].scope, ["run"]);
        assert_eq!(
            calls(&x),
            [
                ("B.cpp::run::<anonymous:1>".to_string(), "work".to_string()),
                ("B.cpp::run".to_string(), "cb".to_string())
            ]
        );
    }

    #[test]
    fn templates_operators_and_macros() {
        let src = "template <typename T>\nT twice(T x) { return x + x; }\n\
                   struct V { V& operator=(const V& o) { copy(o); return *this; }\n\
                   bool operator()(int a) const; };\n\
                   TEST(Suite, Case) { run(); }\n\
                   extern \"C\" { void c_api(void); }\n";
        let x = parse(src);
        assert_eq!(
            names(&x),
            [
                ("twice".to_string(), true, 1),
                ("operator=".to_string(), true, 1),
                ("operator()".to_string(), false, 1),
                ("c_api".to_string(), false, 0),
            ]
        );
        assert_eq!(x.diagnostics.skipped.get("macro invocation"), Some(&1));
    }

    #[test]
    fn include_records() {
        let x = parse("#pragma once\n#include \"B.h\"\n#include <vector>\n");
        let inc: Vec<(u32, &str, bool)> = x
            .tables
            .includes
            .iter()
            .map(|i| (i.line, i.included_path.as_str(), i.is_first_substantive))
            .collect();
        assert_eq!(inc, [(2, "B.h", true), (3, "vector", false)]);
    }
}
