//! Lexical helpers over single-line Python expressions: string literals,
//! bracket balancing and top-level splitting. Not a parser.

use alloc::vec::Vec;

pub(crate) fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

/// `i` points at a quote byte. Returns the index one past the closing quote,
/// or `b.len()` if the literal is unterminated.
fn skip_string(b: &[u8], i: usize) -> usize {
    let q = b[i];
    let triple = i + 2 < b.len() && b[i + 1] == q && b[i + 2] == q;
    let mut j = if triple { i + 3 } else { i + 1 };
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            c if c == q => {
                if !triple {
                    return j + 1;
                }
                if j + 2 < b.len() && b[j + 1] == q && b[j + 2] == q {
                    return j + 3;
                }
                j += 1;
            }
            _ => j += 1,
        }
    }
    b.len()
}

/// Walks `s` outside string literals, calling `f(index, byte, depth)` for
/// every code byte. Depth counts open `(`, `[` and `{`; a closing bracket is
/// reported at the depth it closes to.
fn walk(s: &str, mut f: impl FnMut(usize, u8, usize) -> bool) {
    let b = s.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c == b'"' || c == b'\'' {
            i = skip_string(b, i);
            continue;
        }
        match c {
            b'(' | b'[' | b'{' => {
                if !f(i, c, depth) {
                    return;
                }
                depth += 1;
            }
            b')' | b']' | b'}' => {
                depth = depth.saturating_sub(1);
                if !f(i, c, depth) {
                    return;
                }
            }
            _ => {
                if !f(i, c, depth) {
                    return;
                }
            }
        }
        i += 1;
    }
}

/// Index of the bracket closing the one at `open`.
pub(crate) fn matching_close(s: &str, open: usize) -> Option<usize> {
    let mut base = None;
    let mut found = None;
    walk(s, |i, c, depth| {
        if i == open {
            base = Some(depth);
        } else if base == Some(depth) && matches!(c, b')' | b']' | b'}') {
            found = Some(i);
            return false;
        }
        true
    });
    found
}

/// Splits on `sep` occurrences at bracket depth 0 outside string literals.
pub(crate) fn split_top_level<'a>(s: &'a str, sep: u8) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut start = 0;
    walk(s, |i, c, depth| {
        if c == sep && depth == 0 {
            parts.push(&s[start..i]);
            start = i + 1;
        }
        true
    });
    parts.push(&s[start..]);
    parts
}

/// Byte offsets of every top-level `==` operator.
pub(crate) fn top_level_eq(s: &str) -> Vec<usize> {
    let b = s.as_bytes();
    let mut hits = Vec::new();
    walk(s, |i, c, depth| {
        if c == b'=' && depth == 0 && i + 1 < b.len() && b[i + 1] == b'=' {
            let prev_ok = i == 0 || !matches!(b[i - 1], b'=' | b'<' | b'>' | b'!');
            let next_ok = i + 2 >= b.len() || b[i + 2] != b'=';
            if prev_ok && next_ok {
                hits.push(i);
            }
        }
        true
    });
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CallSite {
    pub name_start: usize,
    pub open: usize,
    /// Attribute access such as `math.isclose(`.
    pub dotted: bool,
}

/// Every `identifier(` occurrence outside string literals, in source order.
pub(crate) fn call_sites(s: &str) -> Vec<CallSite> {
    let b = s.as_bytes();
    let mut sites = Vec::new();
    walk(s, |i, c, _| {
        if c == b'(' && i > 0 && is_ident_byte(b[i - 1]) {
            let mut start = i;
            while start > 0 && is_ident_byte(b[start - 1]) {
                start -= 1;
            }
            let name = &s[start..i];
            if is_identifier(name) {
                let dotted = start > 0 && b[start - 1] == b'.';
                sites.push(CallSite { name_start: start, open: i, dotted });
            }
        }
        true
    });
    sites
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brackets_inside_strings_are_ignored() {
        let s = "f(\")\", g(1))";
        assert_eq!(matching_close(s, 1), Some(s.len() - 1));
    }

    #[test]
    fn split_respects_nesting() {
        assert_eq!(split_top_level("a, (b, c), 'd,e'", b','), ["a", " (b, c)", " 'd,e'"]);
    }

    #[test]
    fn eq_excludes_other_comparisons() {
        assert_eq!(top_level_eq("a <= b"), Vec::<usize>::new());
        assert_eq!(top_level_eq("f(x==1) == 2"), [8]);
        assert_eq!(top_level_eq("a != b"), Vec::<usize>::new());
    }

    #[test]
    fn call_sites_flag_attribute_calls() {
        let sites = call_sites("math.isclose(area(5), 1.0)");
        assert_eq!(sites.len(), 2);
        assert!(sites[0].dotted);
        assert!(!sites[1].dotted);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("_x1"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier(""));
    }
}
