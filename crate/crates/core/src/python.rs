//! Python subset extractor.
//!
//! Recognizes imports (static and `importlib`-style dynamic), `def`/`class`
//! nesting, lambdas, simple assignments and call expressions whose callee is
//! a dotted name. Everything else is skipped and tallied in the returned
//! [`Diagnostics`].

use std::collections::BTreeSet;

use crate::diag::Diagnostics;
use crate::fqn::qualify;
use crate::ir::{Extraction, ExtractionTables};
use crate::model::{
    anonymous_name, ArgForm, ArgValue, AssignRecord, CallSite, FunctionDef, ImportMechanism,
    ImportRecord, Language, ValueForm, PY_TOP_LEVEL,
};
use crate::reaching::{resolve_string_arg, UseSite};

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const DYNAMIC_IMPORTERS: &[&str] = &["importlib.import_module", "import_module", "__import__"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Name,
    Number,
    /// Decoded value; `None` for f-strings and bytes.
    Str(Option<String>),
    Op,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: Kind,
    start: usize,
    end: usize,
    line: u32,
    /// Bracket depth the token sits at, relative to its logical line.
    depth: u32,
}

#[derive(Debug)]
struct Logical {
    indent: usize,
    toks: Vec<Tok>,
}

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "@=",
];

fn string_prefix(name: &str) -> Option<(bool, bool, bool)> {
    // (raw, formatted, bytes)
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "r" => Some((true, false, false)),
        "u" => Some((false, false, false)),
        "f" => Some((false, true, false)),
        "b" => Some((false, false, true)),
        "rb" | "br" => Some((true, false, true)),
        "rf" | "fr" => Some((true, true, false)),
        _ => None,
    }
}

fn decode_escapes(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('\\') => out.push('\\'),
            Some('\'') => out.push('\''),
            Some('"') => out.push('"'),
            Some('\n') => {}
            Some('x') => {
                let hex: String = (0..2).filter_map(|_| chars.next()).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => {
                        out.push_str("\\x");
                        out.push_str(&hex);
                    }
                }
            }
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    depth: u32,
    open_lines: Vec<u32>,
    unit: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, unit: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            depth: 0,
            open_lines: Vec::new(),
            unit,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn offset(&self, pos: usize) -> usize {
        self.chars.get(pos).map_or(self.src.len(), |&(o, _)| o)
    }

    /// True when the physical line starting at `pos` opens a new top-level
    /// `def`, `class` or decorator; used to recover from unclosed brackets.
    fn line_starts_block(&self, pos: usize) -> bool {
        let rest = &self.src[self.offset(pos)..];
        rest.starts_with("def ") || rest.starts_with("class ") || rest.starts_with('@')
    }

    fn lex(mut self, diag: &mut Diagnostics) -> Vec<Logical> {
        let mut lines = Vec::new();
        let mut cur: Vec<Tok> = Vec::new();
        let mut indent = 0usize;
        let mut at_line_start = true;

        while self.pos < self.chars.len() {
            if at_line_start {
                let mut col = 0usize;
                while let Some(c) = self.peek(0) {
                    match c {
                        ' ' => col += 1,
                        '\t' => col += 8 - col % 8,
                        '\x0c' => col = 0,
                        _ => break,
                    }
                    self.pos += 1;
                }
                if cur.is_empty() {
                    indent = col;
                }
                at_line_start = false;
                continue;
            }

            let (off, c) = self.chars[self.pos];
            match c {
                '\n' => {
                    self.pos += 1;
                    self.line += 1;
                    if self.depth > 0 && self.line_starts_block(self.pos) {
                        let opened = self.open_lines.first().copied().unwrap_or(self.line);
                        diag.warn(
                            self.unit,
                            Some(opened),
                            "unbalanced brackets; recovered at next block",
                        );
                        self.depth = 0;
                        self.open_lines.clear();
                    }
                    if self.depth == 0 {
                        if !cur.is_empty() {
                            lines.push(Logical {
                                indent,
                                toks: std::mem::take(&mut cur),
                            });
                        }
                        at_line_start = true;
                    }
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                '\\' if matches!(self.peek(1), Some('\n')) => {
                    self.pos += 2;
                    self.line += 1;
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.pos += 3;
                    self.line += 1;
                }
                '"' | '\'' => {
                    let tok = self.string(self.pos, (false, false, false), diag);
                    cur.push(tok);
                }
                c if c == '_' || c.is_alphabetic() => {
                    let start = self.pos;
                    while self
                        .peek(0)
                        .is_some_and(|c| c == '_' || c.is_alphanumeric())
                    {
                        self.pos += 1;
                    }
                    let text = &self.src[off..self.offset(self.pos)];
                    match (string_prefix(text), self.peek(0)) {
                        (Some(flags), Some('"' | '\'')) => {
                            let tok = self.string(start, flags, diag);
                            cur.push(tok);
                        }
                        _ => cur.push(Tok {
                            kind: Kind::Name,
                            start: off,
                            end: self.offset(self.pos),
                            line: self.line,
                            depth: self.depth,
                        }),
                    }
                }
                c if c.is_ascii_digit()
                    || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) =>
                {
                    self.pos += 1;
                    while self
                        .peek(0)
                        .is_some_and(|c| c == '_' || c == '.' || c.is_alphanumeric())
                    {
                        self.pos += 1;
                    }
                    cur.push(Tok {
                        kind: Kind::Number,
                        start: off,
                        end: self.offset(self.pos),
                        line: self.line,
                        depth: self.depth,
                    });
                }
                _ => {
                    let rest = &self.src[off..];
                    let len = OPS3
                        .iter()
                        .chain(OPS2)
                        .find(|op| rest.starts_with(**op))
                        .map_or(1, |op| op.chars().count());
                    let mut depth = self.depth;
                    match c {
                        '(' | '[' | '{' => {
                            self.depth += 1;
                            self.open_lines.push(self.line);
                        }
                        ')' | ']' | '}' => {
                            if self.depth == 0 {
                                diag.warn(self.unit, Some(self.line), "unmatched closing bracket");
                            } else {
                                self.depth -= 1;
                                self.open_lines.pop();
                            }
                            depth = self.depth;
                        }
                        _ => {}
                    }
                    let line = self.line;
                    self.pos += len;
                    cur.push(Tok {
                        kind: Kind::Op,
                        start: off,
                        end: self.offset(self.pos),
                        line,
                        depth,
                    });
                }
            }
        }
        if self.depth > 0 {
            let opened = self.open_lines.first().copied().unwrap_or(self.line);
            diag.warn(
                self.unit,
                Some(opened),
                "unbalanced brackets at end of file",
            );
        }
        if !cur.is_empty() {
            lines.push(Logical { indent, toks: cur });
        }
        lines
    }

    /// Lexes a string literal whose prefix (if any) starts at `start` and
    /// whose opening quote is at the current position.
    fn string(&mut self, start: usize, flags: (bool, bool, bool), diag: &mut Diagnostics) -> Tok {
        let (raw, formatted, bytes) = flags;
        let line = self.line;
        let quote = self.peek(0).unwrap_or('"');
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        let qlen = if triple { 3 } else { 1 };
        self.pos += qlen;
        let body_start = self.offset(self.pos);
        let mut body_end = None;
        while let Some(c) = self.peek(0) {
            if c == '\\' {
                if self.peek(1) == Some('\n') {
                    self.line += 1;
                }
                self.pos += 2;
                continue;
            }
            if c == '\n' {
                if !triple {
                    break;
                }
                self.line += 1;
            }
            if c == quote
                && (!triple || (self.peek(1) == Some(quote) && self.peek(2) == Some(quote)))
            {
                body_end = Some(self.offset(self.pos));
                self.pos += qlen;
                break;
            }
            self.pos += 1;
        }
        let end = self.offset(self.pos.min(self.chars.len()));
        let value = match body_end {
            Some(body_end) if !formatted && !bytes => {
                let body = &self.src[body_start..body_end];
                Some(if raw {
                    body.to_string()
                } else {
                    decode_escapes(body)
                })
            }
            Some(_) => None,
            None => {
                diag.warn(self.unit, Some(line), "unterminated string literal");
                None
            }
        };
        Tok {
            kind: Kind::Str(value),
            start: self.offset(start),
            end,
            line,
            depth: self.depth,
        }
    }
}

#[derive(Debug, Clone)]
struct Frame {
    indent: usize,
    name: String,
    /// Fqn for function frames; `None` for classes.
    fqn: Option<String>,
}

struct PendingDynamic {
    line: u32,
    scope: String,
    arg: ArgValue,
    alias: Option<String>,
}

struct PyExtractor<'a> {
    src: &'a str,
    unit: &'a str,
    out: ExtractionTables,
    diag: Diagnostics,
    frames: Vec<Frame>,
    anon: u32,
    seen: BTreeSet<(Vec<String>, String)>,
    pending: Vec<PendingDynamic>,
}

fn text_of<'s>(src: &'s str, toks: &[Tok]) -> &'s str {
    match (toks.first(), toks.last()) {
        (Some(a), Some(b)) => &src[a.start..b.end],
        _ => "",
    }
}

fn is_op(tok: &Tok, src: &str, op: &str) -> bool {
    tok.kind == Kind::Op && &src[tok.start..tok.end] == op
}

/// Splits at `sep` ops found at relative bracket depth `depth`.
fn split_at<'t>(toks: &'t [Tok], src: &str, sep: &str, depth: u32) -> Vec<&'t [Tok]> {
    let mut parts = Vec::new();
    let mut begin = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.depth == depth && is_op(t, src, sep) {
            parts.push(&toks[begin..i]);
            begin = i + 1;
        }
    }
    parts.push(&toks[begin..]);
    parts
}

/// Index of the matching close bracket for the open bracket at `open`.
fn matching_close(toks: &[Tok], open: usize) -> Option<usize> {
    let depth = toks[open].depth;
    toks.iter()
        .enumerate()
        .skip(open + 1)
        .find(|(_, t)| t.depth <= depth)
        .filter(|(_, t)| t.kind == Kind::Op)
        .map(|(i, _)| i)
}

impl<'a> PyExtractor<'a> {
    fn text(&self, tok: &Tok) -> &'a str {
        &self.src[tok.start..tok.end]
    }

    fn scope_names(&self) -> Vec<String> {
        self.frames.iter().map(|f| f.name.clone()).collect()
    }

    fn caller(&self) -> String {
        self.frames
            .iter()
            .rev()
            .find_map(|f| f.fqn.clone())
            .unwrap_or_else(|| PY_TOP_LEVEL.to_string())
    }

    fn in_class_body(&self) -> bool {
        self.frames.last().is_some_and(|f| f.fqn.is_none())
    }

    fn run(mut self, lines: Vec<Logical>) -> Extraction {
        for line in &lines {
            while self.frames.last().is_some_and(|f| f.indent >= line.indent) {
                self.frames.pop();
            }
            self.statement(&line.toks, line.indent);
        }
        self.resolve_pending();
        Extraction {
            tables: self.out,
            diagnostics: self.diag,
        }
    }

    /// Position of the `:` that ends a compound statement header.
    fn block_colon(&self, toks: &[Tok]) -> Option<usize> {
        let base = toks.first()?.depth;
        let mut lambdas = 0;
        for (i, t) in toks.iter().enumerate() {
            if t.depth != base {
                continue;
            }
            if t.kind == Kind::Name && self.text(t) == "lambda" {
                lambdas += 1;
            } else if is_op(t, self.src, ":") {
                if lambdas == 0 {
                    return Some(i);
                }
                lambdas -= 1;
            }
        }
        None
    }

    fn statement(&mut self, toks: &[Tok], indent: usize) {
        let Some(first) = toks.first() else { return };
        let mut toks = toks;
        if first.kind == Kind::Name && self.text(first) == "async" && toks.len() > 1 {
            toks = &toks[1..];
        }
        let head = if toks[0].kind == Kind::Name {
            self.text(&toks[0])
        } else {
            ""
        };
        match head {
            "def" => self.def(toks, indent),
            "class" => self.class(toks, indent),
            "if" | "elif" | "while" | "for" | "with" | "else" | "try" | "except" | "finally" => {
                match self.block_colon(toks) {
                    Some(colon) => {
                        let caller = self.caller();
                        self.scan(&toks[1..colon], &caller, None);
                        self.statement(&toks[colon + 1..], indent);
                    }
                    None => {
                        let caller = self.caller();
                        self.scan(&toks[1..], &caller, None);
                    }
                }
            }
            _ if is_op(&toks[0], self.src, "@") => self.decorator(&toks[1..]),
            _ => {
                let base = toks[0].depth;
                for part in split_at(toks, self.src, ";", base) {
                    self.simple(part);
                }
            }
        }
    }

    fn decorator(&mut self, toks: &[Tok]) {
        let caller = self.caller();
        let dotted = toks.iter().enumerate().all(|(i, t)| {
            if i % 2 == 0 {
                t.kind == Kind::Name
            } else {
                is_op(t, self.src, ".")
            }
        });
        if dotted && !toks.is_empty() {
            self.out.calls.push(CallSite {
                unit: self.unit.to_string(),
                line: toks[0].line,
                language: Language::Python,
                caller_fqn: caller,
                callee_expr: text_of(self.src, toks).to_string(),
                args: Vec::new(),
            });
        } else {
            self.scan(toks, &caller, None);
        }
    }

    fn def(&mut self, toks: &[Tok], indent: usize) {
        let name_tok = toks.get(1).filter(|t| t.kind == Kind::Name);
        let open = toks.iter().position(|t| is_op(t, self.src, "("));
        let (Some(name_tok), Some(open)) = (name_tok, open) else {
            self.diag.skip("malformed def");
            return;
        };
        let Some(close) = matching_close(toks, open) else {
            self.diag.skip("malformed def");
            return;
        };
        let name = self.text(name_tok).to_string();
        let params = &toks[open + 1..close];
        let arity = self.param_count(params);

        // Defaults and annotations evaluate in the enclosing scope.
        let caller = self.caller();
        self.scan(params, &caller, None);
        let colon = self.block_colon(&toks[close + 1..]).map(|c| c + close + 1);
        if let Some(colon) = colon {
            self.scan(&toks[close + 1..colon], &caller, None);
        }

        let scope = self.scope_names();
        let fqn = qualify(self.unit, &scope, &name);
        if self.seen.insert((scope.clone(), name.clone())) {
            self.out.defs.push(FunctionDef {
                unit: self.unit.to_string(),
                line: name_tok.line,
                language: Language::Python,
                scope,
                name: name.clone(),
                has_body: true,
                is_anonymous: false,
                arity,
            });
        } else {
            self.diag.skip("redefinition");
        }

        let frame = Frame {
            indent,
            name,
            fqn: Some(fqn),
        };
        self.enter(frame, colon.map(|c| &toks[c + 1..]), indent);
    }

    fn class(&mut self, toks: &[Tok], indent: usize) {
        let Some(name_tok) = toks.get(1).filter(|t| t.kind == Kind::Name) else {
            self.diag.skip("malformed class");
            return;
        };
        let colon = self.block_colon(toks);
        let caller = self.caller();
        let header_end = colon.unwrap_or(toks.len());
        if header_end > 2 {
            self.scan(&toks[2..header_end], &caller, None);
        }
        let frame = Frame {
            indent,
            name: self.text(name_tok).to_string(),
            fqn: None,
        };
        self.enter(frame, colon.map(|c| &toks[c + 1..]), indent);
    }

    /// Pushes a block frame; a same-line body is processed inside it.
    fn enter(&mut self, frame: Frame, tail: Option<&[Tok]>, indent: usize) {
        match tail {
            Some(body) if !body.is_empty() => {
                self.frames.push(frame);
                self.statement(body, indent);
                self.frames.pop();
            }
            _ => self.frames.push(frame),
        }
    }

    fn param_count(&self, params: &[Tok]) -> u32 {
        let Some(first) = params.first() else {
            return 0;
        };
        split_at(params, self.src, ",", first.depth)
            .into_iter()
            .filter(|p| !p.is_empty() && !(p.len() == 1 && matches!(self.text(&p[0]), "*" | "/")))
            .count() as u32
    }

    fn simple(&mut self, toks: &[Tok]) {
        let Some(first) = toks.first() else { return };
        let head = if first.kind == Kind::Name {
            self.text(first)
        } else {
            ""
        };
        match head {
            "import" => return self.import(&toks[1..], first.line),
            "from" if toks.iter().any(|t| self.text(t) == "import") => {
                return self.import_from(toks, first.line)
            }
            "global" | "nonlocal" | "pass" | "break" | "continue" => return,
            _ => {}
        }

        let base = first.depth;
        let caller = self.caller();
        let segments = self.assignment_segments(toks, base);
        if segments.len() > 1 {
            let (value, targets) = segments.split_last().expect("len > 1");
            let alias = if targets.len() == 1 {
                self.target_name(targets[0])
            } else {
                None
            };
            for target in targets {
                match self.target_name(target) {
                    Some(var) => self.assign(var, value, first.line),
                    None => {
                        self.diag.skip("complex assignment target");
                        self.scan(target, &caller, None);
                    }
                }
            }
            self.scan(value, &caller, alias.as_deref());
            return;
        }

        let aug = toks.iter().position(|t| {
            t.depth == base
                && t.kind == Kind::Op
                && self.text(t).len() >= 2
                && self.text(t).ends_with('=')
                && !matches!(self.text(t), "==" | "!=" | "<=" | ">=" | ":=")
        });
        if let Some(op) = aug {
            if let Some(var) = self.target_name(&toks[..op]) {
                if !self.in_class_body() {
                    self.push_assign(var, ValueForm::Other, None, first.line);
                }
            }
            self.scan(toks, &caller, None);
            return;
        }
        self.scan(toks, &caller, None);
    }

    /// Splits `a = b = value` at top-level `=`, ignoring the `=` of lambda
    /// parameter defaults.
    fn assignment_segments<'t>(&self, toks: &'t [Tok], base: u32) -> Vec<&'t [Tok]> {
        let mut parts = Vec::new();
        let mut begin = 0;
        for (i, t) in toks.iter().enumerate() {
            if t.depth != base {
                continue;
            }
            if t.kind == Kind::Name && self.text(t) == "lambda" {
                break;
            }
            if is_op(t, self.src, "=") {
                parts.push(&toks[begin..i]);
                begin = i + 1;
            }
        }
        parts.push(&toks[begin..]);
        parts
    }

    /// Name bound by a simple (optionally annotated) assignment target.
    fn target_name(&self, target: &[Tok]) -> Option<String> {
        match target {
            [t] if t.kind == Kind::Name && !is_keyword(self.text(t)) => {
                Some(self.text(t).to_string())
            }
            [t, colon, ..] if t.kind == Kind::Name && is_op(colon, self.src, ":") => {
                Some(self.text(t).to_string())
            }
            _ => None,
        }
    }

    fn literal_value(&self, toks: &[Tok]) -> Option<String> {
        if toks.is_empty() {
            return None;
        }
        let mut joined = String::new();
        for t in toks {
            match &t.kind {
                Kind::Str(Some(v)) => joined.push_str(v),
                _ => return None,
            }
        }
        Some(joined)
    }

    fn assign(&mut self, var: String, value: &[Tok], line: u32) {
        if self.in_class_body() {
            self.diag.skip("class attribute");
            return;
        }
        match self.literal_value(value) {
            Some(lit) => self.push_assign(var, ValueForm::StringLiteral, Some(lit), line),
            None => self.push_assign(var, ValueForm::Other, None, line),
        }
    }

    fn push_assign(&mut self, var: String, form: ValueForm, literal: Option<String>, line: u32) {
        self.out.assigns.push(AssignRecord {
            unit: self.unit.to_string(),
            line,
            language: Language::Python,
            scope_fqn: self.caller(),
            variable: var,
            value_form: form,
            literal,
        });
    }

    fn dotted(&self, toks: &[Tok]) -> String {
        toks.iter().map(|t| self.text(t)).collect()
    }

    fn import(&mut self, toks: &[Tok], line: u32) {
        let Some(first) = toks.first() else {
            self.diag.skip("malformed import");
            return;
        };
        for part in split_at(toks, self.src, ",", first.depth) {
            let as_pos = part.iter().position(|t| self.text(t) == "as");
            let (module, alias) = match as_pos {
                Some(p) => (
                    self.dotted(&part[..p]),
                    part.get(p + 1).map(|t| self.text(t)),
                ),
                None => (self.dotted(part), None),
            };
            if module.is_empty() {
                self.diag.skip("malformed import");
                continue;
            }
            self.out.imports.push(ImportRecord {
                unit: self.unit.to_string(),
                line,
                alias: alias.map_or_else(|| module.clone(), str::to_string),
                imported_name: module,
                member: String::new(),
                mechanism: ImportMechanism::Standard,
            });
        }
    }

    fn import_from(&mut self, toks: &[Tok], line: u32) {
        let Some(kw) = toks.iter().position(|t| self.text(t) == "import") else {
            return;
        };
        let module = self.dotted(&toks[1..kw]);
        let names: Vec<&Tok> = toks[kw + 1..]
            .iter()
            .filter(|t| !matches!(self.text(t), "(" | ")"))
            .collect();
        let names: Vec<Tok> = names.into_iter().cloned().collect();
        if module.is_empty() || names.is_empty() {
            self.diag.skip("malformed import");
            return;
        }
        let mut parts: Vec<Vec<&Tok>> = vec![Vec::new()];
        for t in &names {
            if is_op(t, self.src, ",") {
                parts.push(Vec::new());
            } else {
                parts.last_mut().expect("non-empty").push(t);
            }
        }
        for part in parts.into_iter().filter(|p| !p.is_empty()) {
            let member = self.text(part[0]).to_string();
            let alias = match part.as_slice() {
                [_, kw, alias, ..] if self.text(kw) == "as" => self.text(alias).to_string(),
                _ => member.clone(),
            };
            self.out.imports.push(ImportRecord {
                unit: self.unit.to_string(),
                line,
                imported_name: module.clone(),
                alias,
                member,
                mechanism: ImportMechanism::Standard,
            });
        }
    }

    fn classify_arg(&self, toks: &[Tok]) -> ArgValue {
        let text = text_of(self.src, toks).to_string();
        if let Some(lit) = self.literal_value(toks) {
            return ArgValue::string_literal(text, lit);
        }
        match toks {
            [t] if t.kind == Kind::Name && !is_keyword(self.text(t)) => {
                ArgValue::new(ArgForm::Identifier, text)
            }
            [t, ..] if t.kind == Kind::Name && self.text(t) == "lambda" => {
                ArgValue::new(ArgForm::Lambda, text)
            }
            _ => ArgValue::new(ArgForm::Other, text),
        }
    }

    /// End (exclusive) of the lambda starting at `start`.
    fn lambda_end(&self, toks: &[Tok], start: usize) -> usize {
        let depth = toks[start].depth;
        let colon = toks
            .iter()
            .enumerate()
            .skip(start + 1)
            .find(|(_, t)| t.depth == depth && is_op(t, self.src, ":"))
            .map_or(start, |(i, _)| i);
        toks.iter()
            .enumerate()
            .skip(colon + 1)
            .find(|(_, t)| {
                t.depth < depth
                    || (t.depth == depth
                        && (is_op(t, self.src, ",")
                            || (t.kind == Kind::Name && self.text(t) == "for")))
            })
            .map_or(toks.len(), |(i, _)| i)
    }

    /// Records the calls and lambdas in an expression.
    ///
    /// `alias` is the assignment target when `toks` is the whole right-hand
    /// side of a simple assignment.
    fn scan(&mut self, toks: &[Tok], caller: &str, alias: Option<&str>) {
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            if t.kind == Kind::Name && self.text(t) == "lambda" {
                let end = self.lambda_end(toks, i);
                self.lambda(&toks[i..end]);
                i = end;
                continue;
            }
            if is_op(t, self.src, "(") && i > 0 {
                self.maybe_call(toks, i, caller, alias);
            }
            i += 1;
        }
    }

    fn lambda(&mut self, toks: &[Tok]) {
        let depth = toks[0].depth;
        let colon = toks
            .iter()
            .position(|t| t.depth == depth && is_op(t, self.src, ":"))
            .unwrap_or(toks.len());
        let params = &toks[1..colon];
        let arity = self.param_count(params);
        self.anon += 1;
        let name = anonymous_name(self.anon);
        let scope = self.scope_names();
        let fqn = qualify(self.unit, &scope, &name);
        self.out.defs.push(FunctionDef {
            unit: self.unit.to_string(),
            line: toks[0].line,
            language: Language::Python,
            scope,
            name: name.clone(),
            has_body: true,
            is_anonymous: true,
            arity,
        });
        if colon + 1 < toks.len() {
            self.frames.push(Frame {
                indent: usize::MAX,
                name,
                fqn: Some(fqn.clone()),
            });
            self.scan(&toks[colon + 1..], &fqn, None);
            self.frames.pop();
        }
    }

    fn maybe_call(&mut self, toks: &[Tok], open: usize, caller: &str, alias: Option<&str>) {
        // Walk back over `name(.name)*`.
        let mut start = open - 1;
        if toks[start].kind != Kind::Name {
            if matches!(self.text(&toks[start]), ")" | "]") {
                self.diag.skip("call on computed callee");
            }
            return;
        }
        while start >= 2
            && is_op(&toks[start - 1], self.src, ".")
            && toks[start - 2].kind == Kind::Name
        {
            start -= 2;
        }
        if start >= 1 && is_op(&toks[start - 1], self.src, ".") {
            self.diag.skip("call on computed receiver");
            return;
        }
        let chain = &toks[start..open];
        if chain.len() == 1 && is_keyword(self.text(&chain[0])) {
            return;
        }
        let callee = self.dotted(chain);
        let Some(close) = matching_close(toks, open) else {
            self.diag.skip("unterminated call");
            return;
        };
        let inner = &toks[open + 1..close];
        let args: Vec<ArgValue> = match inner.first() {
            None => Vec::new(),
            Some(f) => split_at(inner, self.src, ",", f.depth)
                .into_iter()
                .filter(|a| !a.is_empty())
                .map(|a| self.classify_arg(a))
                .collect(),
        };
        let line = chain[0].line;

        if DYNAMIC_IMPORTERS.contains(&callee.as_str()) {
            let whole_rhs = start == 0 && close + 1 == toks.len();
            match args.first() {
                Some(arg) if matches!(arg.form, ArgForm::StringLiteral | ArgForm::Identifier) => {
                    self.pending.push(PendingDynamic {
                        line,
                        scope: caller.to_string(),
                        arg: arg.clone(),
                        alias: alias.filter(|_| whole_rhs).map(str::to_string),
                    });
                }
                _ => self.diag.skip("dynamic import of computed name"),
            }
        }

        self.out.calls.push(CallSite {
            unit: self.unit.to_string(),
            line,
            language: Language::Python,
            caller_fqn: caller.to_string(),
            callee_expr: callee,
            args,
        });
    }

    fn resolve_pending(&mut self) {
        for p in std::mem::take(&mut self.pending) {
            let site = UseSite {
                unit: self.unit,
                line: p.line,
                scope_fqn: &p.scope,
            };
            let resolution = resolve_string_arg(&p.arg, site, &self.out.assigns);
            match resolution.value {
                Some(name) if !name.is_empty() => {
                    self.out.imports.push(ImportRecord {
                        unit: self.unit.to_string(),
                        line: p.line,
                        alias: p.alias.unwrap_or_else(|| name.clone()),
                        imported_name: name,
                        member: String::new(),
                        mechanism: ImportMechanism::Dynamic,
                    });
                }
                _ => self.diag.skip("dynamic import of unresolved name"),
            }
        }
    }
}

/// Extracts definitions, calls, imports and assignments from Python text.
pub fn parse_python_unit(source: &str, path: &str) -> Extraction {
    let mut diag = Diagnostics::default();
    let lines = Lexer::new(source, path).lex(&mut diag);
    let extractor = PyExtractor {
        src: source,
        unit: path,
        out: ExtractionTables::default(),
        diag,
        frames: Vec::new(),
        anon: 0,
        seen: BTreeSet::new(),
        pending: Vec::new(),
    };
    extractor.run(lines)
}
