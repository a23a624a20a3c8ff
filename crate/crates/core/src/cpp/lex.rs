//! Tokenizer over masked C++ text.
//!
//! Preprocessor directives are consumed here: `#include` lines are reported
//! separately and no directive produces tokens.

use super::mask::mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, Copy)]
pub struct Tok {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Include {
    pub line: u32,
    pub path: String,
    pub first_substantive: bool,
}

#[derive(Debug)]
pub struct Lexed {
    pub toks: Vec<Tok>,
    pub includes: Vec<Include>,
}

const STRING_PREFIXES: &[&str] = &["u8", "L", "u", "U", "R", "u8R", "LR", "uR", "UR"];
const PUNCT3: &[&str] = &["...", "<<=", ">>=", "->*"];
const PUNCT2: &[&str] = &[
    "::", "->", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=",
    "++", "--",
];

fn is_ident_start(c: u8) -> bool {
    c == b'_' || c.is_ascii_alphabetic() || c >= 0x80
}

fn is_ident_continue(c: u8) -> bool {
    c == b'_' || c.is_ascii_alphanumeric() || c >= 0x80
}

pub fn lex(src: &str) -> Lexed {
    let masked = mask(src);
    let bytes = masked.as_bytes();
    let n = bytes.len();
    let mut toks = Vec::new();
    let mut includes = Vec::new();
    let mut line = 1u32;
    let mut line_start = true;
    let mut i = 0;

    while i < n {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                line_start = true;
                i += 1;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => i += 1,
            b'\\' if bytes.get(i + 1) == Some(&b'\n') => {
                line += 1;
                i += 2;
            }
            b'#' if line_start => {
                // Directive runs to end of line, honouring continuations.
                let mut j = i;
                let mut lines = 0;
                while j < n && bytes[j] != b'\n' {
                    if bytes[j] == b'\\' && bytes.get(j + 1) == Some(&b'\n') {
                        lines += 1;
                        j += 2;
                        continue;
                    }
                    j += 1;
                }
                if let Some(path) = include_path(&masked[i..j], &src[i..j]) {
                    includes.push(Include {
                        line,
                        path,
                        first_substantive: false,
                    });
                }
                line += lines;
                i = j;
            }
            _ => {
                line_start = false;
                let start = i;
                let kind = if is_ident_start(c) {
                    while i < n && is_ident_continue(bytes[i]) {
                        i += 1;
                    }
                    if bytes.get(i) == Some(&b'"') && STRING_PREFIXES.contains(&&masked[start..i]) {
                        i = skip_quoted(bytes, i, b'"');
                        TokKind::Str
                    } else {
                        TokKind::Ident
                    }
                } else if c.is_ascii_digit()
                    || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
                {
                    i += 1;
                    while i < n {
                        let b = bytes[i];
                        let exp_sign = matches!(b, b'+' | b'-')
                            && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P');
                        if is_ident_continue(b) || b == b'.' || b == b'\'' || exp_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    TokKind::Number
                } else if c == b'"' {
                    i = skip_quoted(bytes, i, b'"');
                    TokKind::Str
                } else if c == b'\'' {
                    i = skip_quoted(bytes, i, b'\'');
                    TokKind::Char
                } else {
                    let rest = &masked[i..];
                    let len = PUNCT3
                        .iter()
                        .chain(PUNCT2)
                        .find(|p| rest.starts_with(**p))
                        .map_or(1, |p| p.len());
                    i += len;
                    TokKind::Punct
                };
                toks.push(Tok {
                    kind,
                    start,
                    end: i,
                    line,
                });
            }
        }
    }

    mark_first_substantive(&masked, &mut includes);
    Lexed { toks, includes }
}

/// Skips a masked literal starting at the opening quote at `i`.
fn skip_quoted(bytes: &[u8], i: usize, quote: u8) -> usize {
    let mut j = i + 1;
    while j < bytes.len() && bytes[j] != quote && bytes[j] != b'\n' {
        j += 1;
    }
    if j < bytes.len() && bytes[j] == quote {
        j + 1
    } else {
        j
    }
}

fn include_path(masked: &str, original: &str) -> Option<String> {
    let rest = masked.trim_start().strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix("include")?;
    let offset = masked.len() - rest.len();
    let rest = rest.trim_start();
    let offset = offset + (masked.len() - offset - rest.len());
    let original = &original[offset..];
    match rest.as_bytes().first()? {
        b'"' => {
            let end = original[1..].find('"')?;
            Some(original[1..1 + end].to_string())
        }
        b'<' => {
            let end = original[1..].find('>')?;
            Some(original[1..1 + end].to_string())
        }
        _ => None,
    }
}

fn directive_words(line: &str) -> Vec<&str> {
    line.trim_start_matches('#')
        .split(|c: char| c.is_whitespace() || c == '(' || c == ')')
        .filter(|w| !w.is_empty())
        .collect()
}

fn mark_first_substantive(masked: &str, includes: &mut [Include]) {
    let mut guard: Option<&str> = None;
    let mut expect_define = false;
    for (idx, raw) in masked.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let words = directive_words(line);
            match words.as_slice() {
                ["pragma", "once", ..] => continue,
                ["ifndef", name, ..] if guard.is_none() => {
                    guard = Some(name);
                    expect_define = true;
                    continue;
                }
                ["if", "!defined", name, ..] | ["if", "!", "defined", name, ..]
                    if guard.is_none() =>
                {
                    guard = Some(name);
                    expect_define = true;
                    continue;
                }
                ["define", name, ..] if expect_define && Some(*name) == guard => {
                    expect_define = false;
                    continue;
                }
                _ => {}
            }
        }
        let line_no = idx as u32 + 1;
        if let Some(inc) = includes.iter_mut().find(|inc| inc.line == line_no) {
            inc.first_substantive = true;
        }
        return;
    }
}

/// Decoded value of a string literal token's source text.
pub fn string_value(text: &str) -> Option<String> {
    let quote = text.find('"')?;
    let prefix = &text[..quote];
    let body = &text[quote..];
    if prefix.ends_with('R') {
        let open = body.find('(')?;
        let close = body.rfind(')')?;
        return (close >= open).then(|| body[open + 1..close].to_string());
    }
    let inner = body.strip_prefix('"')?.strip_suffix('"')?;
    Some(decode_escapes(inner))
}

fn decode_escapes(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
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
            Some(c @ ('\\' | '\'' | '"' | '?')) => out.push(c),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
