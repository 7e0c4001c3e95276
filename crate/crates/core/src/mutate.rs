// SPDX-License-Identifier: Apache-2.0

//! Single-operator mutants for exercising the equivalence checker.
//!
//! Swaps `+`/`-`, `&`/`|` and `<`/`<=` one occurrence at a time. Module
//! headers, declarations, bit ranges, numeric literals, sensitivity lists and
//! non-blocking assignment arrows are left alone.

use serde::Serialize;

use crate::verilog::strip_comments;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mutant {
    /// Position among all mutation sites, in source order.
    pub site: usize,
    /// Byte offset in the comment-stripped source.
    pub offset: usize,
    pub from: &'static str,
    pub to: &'static str,
    pub source: String,
}

const DECL_KEYWORDS: &[&str] = &[
    "module",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "integer",
    "parameter",
    "localparam",
    "genvar",
];

fn swap_for(op: &str) -> Option<(&'static str, &'static str)> {
    Some(match op {
        "+" => ("+", "-"),
        "-" => ("-", "+"),
        "&" => ("&", "|"),
        "|" => ("|", "&"),
        "<" => ("<", "<="),
        "<=" => ("<=", "<"),
        _ => return None,
    })
}

/// Every single-operator mutant of `source`, in source order. Mutants are
/// built from the comment-stripped text.
pub fn mutants(source: &str) -> Vec<Mutant> {
    let text = strip_comments(source);
    let b = text.as_bytes();
    let mut sites: Vec<(usize, &'static str, &'static str)> = Vec::new();

    let mut i = 0;
    let mut paren = 0i32;
    let mut bracket = 0i32;
    let mut skip_statement = false;
    let mut assigned = false;
    let mut after_at = false;
    let mut ternary = 0u32;
    let mut word_start = true;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c == b'`' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$' || b[i] == b'`') {
                i += 1;
            }
            let word = &text[start..i];
            if word_start && DECL_KEYWORDS.contains(&word) {
                skip_statement = true;
            }
            if matches!(word, "begin" | "end" | "else" | "endcase" | "always" | "assign") {
                word_start = true;
                assigned = false;
            } else {
                word_start = false;
            }
            continue;
        }
        if c.is_ascii_digit() || c == b'\'' {
            // numbers, including based literals like 4'hF and 8'd0
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'\'' || b[i] == b'?') {
                i += 1;
            }
            word_start = false;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let three = text.get(i..i + 3).unwrap_or("");
        let op: &str = if ["<<<", ">>>", "===", "!=="].contains(&three) {
            three
        } else if [
            "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "+:", "-:",
        ]
        .contains(&two)
        {
            two
        } else {
            &text[i..i + 1]
        };
        let mut starts = false;
        match op {
            "(" => paren += 1,
            ")" => {
                paren -= 1;
                if paren == 0 && after_at {
                    after_at = false;
                    starts = true;
                }
            }
            "[" => bracket += 1,
            "]" => bracket -= 1,
            "@" => after_at = true,
            "?" => ternary += 1,
            ";" => {
                skip_statement = false;
                assigned = false;
                ternary = 0;
                starts = true;
            }
            ":" if bracket == 0 && ternary > 0 => ternary -= 1,
            ":" if paren == 0 && bracket == 0 => {
                starts = true;
                assigned = false;
            }
            "=" if paren == 0 && bracket == 0 => assigned = true,
            _ => {}
        }
        let in_context = !skip_statement && !after_at && bracket == 0;
        let nonblocking = op == "<=" && paren == 0 && !assigned;
        if nonblocking {
            assigned = true;
        } else if in_context && (assigned || paren > 0) {
            if let Some((from, to)) = swap_for(op) {
                sites.push((i, from, to));
            }
        }
        word_start = starts;
        i += op.len();
    }

    sites
        .into_iter()
        .enumerate()
        .map(|(site, (offset, from, to))| {
            let mut source = String::with_capacity(text.len() + 1);
            source.push_str(&text[..offset]);
            source.push_str(to);
            source.push_str(&text[offset + from.len()..]);
            Mutant {
                site,
                offset,
                from,
                to,
                source,
            }
        })
        .collect()
}
