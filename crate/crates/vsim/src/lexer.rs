// SPDX-License-Identifier: Apache-2.0

use crate::value::{Logic, MAX_WIDTH};
use crate::VsimError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `$name` system identifiers.
    System(String),
    Number(Number),
    Str(String),
    Op(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Number {
    pub value: Logic,
    pub sized: bool,
    pub signed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
}

// Longest first.
const OPS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "**", "==", "!=", "<=", ">=", "<<", ">>", "&&", "||", "~&", "~|", "~^", "^~", "+:",
    "-:", "->", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "=", "?", ":", ";", ",", ".", "(", ")",
    "[", "]", "{", "}", "@", "#",
];

/// Directives that carry no semantics for simulation and are skipped whole-line.
const IGNORED_DIRECTIVES: &[&str] = &[
    "timescale",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
];

pub fn lex(src: &str) -> Result<Vec<Token>, VsimError> {
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut line = 1u32;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(VsimError::parse(line, "unterminated block comment"));
                }
                if bytes[i] == b'\n' {
                    line += 1;
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c == b'`' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let name = &src[start..j];
            if IGNORED_DIRECTIVES.contains(&name) {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            return Err(VsimError::Unsupported(format!(
                "compiler directive `{name} (line {line})"
            )));
        }
        if c == b'"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < bytes.len() && bytes[j] != b'"' {
                if bytes[j] == b'\\' && j + 1 < bytes.len() {
                    j += 1;
                }
                if bytes[j] == b'\n' {
                    line += 1;
                }
                s.push(bytes[j] as char);
                j += 1;
            }
            if j >= bytes.len() {
                return Err(VsimError::parse(line, "unterminated string"));
            }
            out.push(Token { tok: Tok::Str(s), line });
            i = j + 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c == b'\\' {
            if c == b'\\' {
                // escaped identifier runs to whitespace
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && !bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..j].to_string()),
                    line,
                });
                i = j;
                continue;
            }
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = if let Some(rest) = word.strip_prefix('$') {
                Tok::System(rest.to_string())
            } else {
                Tok::Ident(word.to_string())
            };
            out.push(Token { tok, line });
            continue;
        }
        if c.is_ascii_digit() || c == b'\'' {
            let (num, next) = lex_number(src, i, line)?;
            out.push(Token {
                tok: Tok::Number(num),
                line,
            });
            i = next;
            continue;
        }
        let rest = &src[i..];
        match OPS.iter().find(|op| rest.starts_with(**op)) {
            Some(op) => {
                out.push(Token { tok: Tok::Op(op), line });
                i += op.len();
            }
            None => return Err(VsimError::parse(line, format!("unexpected character '{}'", c as char))),
        }
    }
    Ok(out)
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    i
}

fn lex_number(src: &str, start: usize, line: u32) -> Result<(Number, usize), VsimError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let mut size_digits = String::new();
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
        if bytes[i] != b'_' {
            size_digits.push(bytes[i] as char);
        }
        i += 1;
    }
    let after_digits = i;
    let j = skip_ws(bytes, i);
    if j < bytes.len() && bytes[j] == b'\'' {
        i = j + 1;
        let mut signed = false;
        if i < bytes.len() && (bytes[i] == b's' || bytes[i] == b'S') {
            signed = true;
            i += 1;
        }
        if i >= bytes.len() {
            return Err(VsimError::parse(line, "truncated number"));
        }
        let base = bytes[i].to_ascii_lowercase();
        if !matches!(base, b'b' | b'o' | b'd' | b'h') {
            // SystemVerilog unbased unsized fill: '0 '1 'x 'z
            if size_digits.is_empty() && matches!(base, b'0' | b'1' | b'x' | b'z' | b'X' | b'Z') {
                let v = match base {
                    b'0' => Logic::zero(1),
                    b'1' => Logic::new(1, 1),
                    b'z' | b'Z' => Logic::z(1),
                    _ => Logic::x(1),
                };
                return Ok((
                    Number {
                        value: v,
                        sized: false,
                        signed: false,
                    },
                    i + 1,
                ));
            }
            return Err(VsimError::parse(line, "bad number base"));
        }
        i += 1;
        i = skip_ws(bytes, i);
        let dstart = i;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'?') {
            i += 1;
        }
        let digits: String = src[dstart..i].chars().filter(|c| *c != '_').collect();
        if digits.is_empty() {
            return Err(VsimError::parse(line, "number without digits"));
        }
        let width = if size_digits.is_empty() {
            None
        } else {
            let w: u32 = size_digits.parse().map_err(|_| VsimError::parse(line, "bad size"))?;
            if w == 0 {
                return Err(VsimError::parse(line, "zero-width literal"));
            }
            if w > MAX_WIDTH {
                return Err(VsimError::Unsupported(format!(
                    "literal wider than {MAX_WIDTH} bits (line {line})"
                )));
            }
            Some(w)
        };
        let value = parse_based(width, base, &digits)
            .ok_or_else(|| VsimError::parse(line, format!("bad digits '{digits}' for base {}", base as char)))?;
        return Ok((
            Number {
                value,
                sized: width.is_some(),
                signed,
            },
            i,
        ));
    }
    if size_digits.is_empty() {
        return Err(VsimError::parse(line, "stray apostrophe"));
    }
    // reals are not synthesizable; reject them rather than misparse
    if bytes.get(after_digits) == Some(&b'.') && bytes.get(after_digits + 1).is_some_and(|b| b.is_ascii_digit()) {
        return Err(VsimError::Unsupported(format!("real literal (line {line})")));
    }
    let v: u128 = size_digits
        .parse()
        .map_err(|_| VsimError::parse(line, "decimal literal out of range"))?;
    let width = if v >> 32 == 0 { 32 } else { 128 - v.leading_zeros() + 1 };
    Ok((
        Number {
            value: Logic::new(width.min(MAX_WIDTH), v),
            sized: false,
            signed: true,
        },
        after_digits,
    ))
}

fn parse_based(width: Option<u32>, base: u8, digits: &str) -> Option<Logic> {
    let bits_per = match base {
        b'b' => 1,
        b'o' => 3,
        b'h' => 4,
        _ => 0,
    };
    let (val, unk, natural) = if bits_per == 0 {
        let d = digits.to_ascii_lowercase();
        if d.chars().all(|c| c == 'x') {
            (0u128, u128::MAX, 1u32)
        } else if d.chars().all(|c| c == 'z' || c == '?') {
            (u128::MAX, u128::MAX, 1u32)
        } else {
            let v: u128 = d.parse().ok()?;
            (v, 0, 128 - v.leading_zeros())
        }
    } else {
        let mut val = 0u128;
        let mut unk = 0u128;
        let mut n = 0u32;
        for ch in digits.chars() {
            let m = (1u128 << bits_per) - 1;
            val = val.checked_shl(bits_per)?;
            unk = unk.checked_shl(bits_per)?;
            match ch.to_ascii_lowercase() {
                'x' => unk |= m,
                'z' | '?' => {
                    unk |= m;
                    val |= m;
                }
                c => {
                    let d = c.to_digit(16)? as u128;
                    if d > m {
                        return None;
                    }
                    val |= d;
                }
            }
            n += bits_per;
        }
        (val, unk, n)
    };
    let w = width.unwrap_or_else(|| natural.max(32)).min(MAX_WIDTH);
    let mut v = Logic::from_planes(w, val, unk);
    // a leading x/z digit extends through the full width
    if natural < w && natural > 0 {
        let top = natural - 1;
        if (unk >> top) & 1 == 1 {
            let ext = crate::value::mask(w) & !crate::value::mask(natural);
            let fill_v = if (val >> top) & 1 == 1 { ext } else { 0 };
            v = Logic::from_planes(w, v.val() | fill_v, v.unk() | ext);
        }
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(src: &str) -> Vec<Number> {
        lex(src)
            .unwrap()
            .into_iter()
            .filter_map(|t| match t.tok {
                Tok::Number(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn based_literals() {
        let n = nums("8'hA5 4'b1x0z 'd10 12 3'sb101 16'h_ff");
        assert_eq!(n[0].value, Logic::new(8, 0xA5));
        assert_eq!(n[1].value.unk(), 0b0101);
        assert_eq!(n[1].value.val(), 0b1001);
        assert_eq!(n[2].value, Logic::new(32, 10));
        assert!(!n[2].sized);
        assert_eq!(n[3].value, Logic::new(32, 12));
        assert!(n[3].signed);
        assert!(n[4].signed);
        assert_eq!(n[5].value, Logic::new(16, 0xff));
    }

    #[test]
    fn x_literal_extends() {
        let n = nums("8'bx");
        assert_eq!(n[0].value, Logic::x(8));
    }

    #[test]
    fn comments_and_directives_skipped() {
        let toks = lex("`timescale 1ns/1ps\n// hi\nmodule /* c */ m;").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[0].line, 3);
    }

    #[test]
    fn macros_rejected() {
        assert!(matches!(lex("`define W 8"), Err(VsimError::Unsupported(_))));
    }

    #[test]
    fn operators_longest_match() {
        let toks = lex("a <<< b <= c !== d").unwrap();
        let ops: Vec<_> = toks
            .iter()
            .filter_map(|t| match t.tok {
                Tok::Op(o) => Some(o),
                _ => None,
            })
            .collect();
        assert_eq!(ops, vec!["<<<", "<=", "!=="]);
    }
}
