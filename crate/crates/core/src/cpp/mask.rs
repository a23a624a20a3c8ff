//! Comment and literal masking.
//!
//! The masked text has the same byte length and line structure as the
//! input. Comments become spaces; string and character literals keep their
//! delimiters but their contents become spaces, so structural scanning can
//! never match tokens inside them. Literal values are read back from the
//! original text using the unchanged byte offsets.

fn is_ident_byte(b: u8) -> bool {
    b == b'_' || b.is_ascii_alphanumeric()
}

/// True if the quote at `quote` opens a raw string literal (`R"`, `u8R"`, `LR"`, ...).
fn raw_prefix(bytes: &[u8], quote: usize) -> bool {
    if quote == 0 || bytes[quote - 1] != b'R' {
        return false;
    }
    let mut start = quote - 1;
    while start > 0 && is_ident_byte(bytes[start - 1]) {
        start -= 1;
    }
    matches!(&bytes[start..quote], b"R" | b"u8R" | b"LR" | b"uR" | b"UR")
}

/// True when a `'` at `pos` is a digit separator (`1'000`).
fn digit_separator(bytes: &[u8], pos: usize) -> bool {
    if pos == 0 || !bytes[pos - 1].is_ascii_hexdigit() {
        return false;
    }
    let mut start = pos;
    while start > 0 && (is_ident_byte(bytes[start - 1]) || bytes[start - 1] == b'\'') {
        start -= 1;
    }
    bytes[start].is_ascii_digit()
}

fn blank(out: &mut [u8], range: std::ops::Range<usize>) {
    for b in &mut out[range] {
        if *b != b'\n' {
            *b = b' ';
        }
    }
}

pub fn mask(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let n = bytes.len();
    let mut i = 0;
    while i < n {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let end = bytes[i..]
                    .iter()
                    .position(|&b| b == b'\n')
                    .map_or(n, |p| i + p);
                blank(&mut out, i..end);
                i = end;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = src[i + 2..].find("*/").map_or(n, |p| i + 2 + p + 2);
                blank(&mut out, i..end);
                i = end;
            }
            b'"' if raw_prefix(bytes, i) => {
                let open = src[i + 1..].find('(').map(|p| i + 1 + p);
                let end = open.and_then(|open| {
                    let delim = &src[i + 1..open];
                    let close = format!("){delim}\"");
                    src[open..].find(&close).map(|p| open + p + close.len())
                });
                let end = end.unwrap_or(n);
                // Keep the closing quote so the lexer sees a delimited token.
                if end > i + 1 {
                    blank(&mut out, i + 1..end - 1);
                }
                i = end;
            }
            b'"' | b'\'' if !(bytes[i] == b'\'' && digit_separator(bytes, i)) => {
                let quote = bytes[i];
                let mut j = i + 1;
                while j < n && bytes[j] != quote && bytes[j] != b'\n' {
                    j += if bytes[j] == b'\\' { 2 } else { 1 };
                }
                let j = j.min(n);
                blank(&mut out, i + 1..j);
                i = if j < n && bytes[j] == quote { j + 1 } else { j };
            }
            _ => i += 1,
        }
    }
    // Only ASCII bytes were written over whole multi-byte sequences.
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_comments_and_literal_contents() {
        let src = "int f(); // g()\n/* h()\n */ s = \"k(x)\"; c = ')';\n";
        let m = mask(src);
        assert_eq!(m.len(), src.len());
        assert_eq!(m.lines().count(), src.lines().count());
        assert!(!m.contains("g()"));
        assert!(!m.contains("h()"));
        assert!(!m.contains("k(x)"));
        assert!(m.contains("s = \"    \";"));
        assert!(m.contains("c = ' ';"));
    }

    #[test]
    fn escapes_do_not_end_literals() {
        let m = mask(r#"a("x\"y(", b)"#);
        assert_eq!(m, r#"a("     ", b)"#);
    }

    #[test]
    fn raw_strings() {
        let src = "auto s = R\"d(a \" b )\" c)d\"; f();";
        let inner = "d(a \" b )\" c)d".len();
        assert_eq!(
            mask(src),
            format!("auto s = R\"{}\"; f();", " ".repeat(inner))
        );
    }

    #[test]
    fn digit_separators_are_not_chars() {
        let m = mask("int x = 1'000'000; f('a');");
        assert_eq!(m, "int x = 1'000'000; f(' ');");
    }

    #[test]
    fn multibyte_contents() {
        let src = "s = \"héllo\"; // ünïcode\nf();";
        let m = mask(src);
        assert_eq!(m.len(), src.len());
        assert!(m.ends_with("\nf();"));
    }
}
