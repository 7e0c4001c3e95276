// SPDX-License-Identifier: Apache-2.0

//! Token-level reading of Verilog sources: module discovery, the top
//! module's ports, and clock/reset detection. No elaboration happens here.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RtlDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortInfo {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    pub is_clock: bool,
    pub is_reset: bool,
    pub reset_active_low: bool,
}

impl PortInfo {
    pub fn new(name: impl Into<String>, direction: Direction, width: u32) -> Self {
        PortInfo {
            name: name.into(),
            direction,
            width,
            is_clock: false,
            is_reset: false,
            reset_active_low: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleInterface {
    pub top_module: String,
    pub ports: Vec<PortInfo>,
    pub is_sequential: bool,
}

impl ModuleInterface {
    pub fn clock(&self) -> Option<&PortInfo> {
        self.ports.iter().find(|p| p.is_clock)
    }

    pub fn resets(&self) -> impl Iterator<Item = &PortInfo> {
        self.ports.iter().filter(|p| p.is_reset)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PortInfo> {
        self.ports.iter().filter(|p| p.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortInfo> {
        self.ports.iter().filter(|p| p.direction == Direction::Output)
    }

    /// Same port names, directions and widths, in any order.
    pub fn same_shape(&self, other: &ModuleInterface) -> bool {
        let key = |i: &ModuleInterface| {
            i.ports
                .iter()
                .map(|p| (p.name.clone(), p.direction, p.width))
                .collect::<BTreeSet<_>>()
        };
        self.ports.len() == other.ports.len() && key(self) == key(other)
    }

    /// Human-readable one-line summary, e.g. `m(input clk, input [3:0] a, output [3:0] y)`.
    pub fn summary(&self) -> String {
        let ports: Vec<String> = self
            .ports
            .iter()
            .map(|p| {
                let dir = match p.direction {
                    Direction::Input => "input",
                    Direction::Output => "output",
                    Direction::Inout => "inout",
                };
                if p.width == 1 {
                    format!("{dir} {}", p.name)
                } else {
                    format!("{dir} [{}:0] {}", p.width - 1, p.name)
                }
            })
            .collect();
        format!("{}({})", self.top_module, ports.join(", "))
    }

    /// A minimal module with this interface. Clocks and resets appear in an
    /// edge list with their polarity so detection recovers the same flags.
    pub fn to_verilog_stub(&self) -> String {
        let mut s = format!("module {} (\n", self.top_module);
        let decls: Vec<String> = self
            .ports
            .iter()
            .map(|p| {
                let dir = match p.direction {
                    Direction::Input => "input",
                    Direction::Output => "output",
                    Direction::Inout => "inout",
                };
                let range = if p.width == 1 {
                    String::new()
                } else {
                    format!(" [{}:0]", p.width - 1)
                };
                format!("  {dir} wire{range} {}", p.name)
            })
            .collect();
        s.push_str(&decls.join(",\n"));
        s.push_str("\n);\n");
        if let Some(clk) = self.clock() {
            let mut edges = vec![format!("posedge {}", clk.name)];
            for r in self.resets() {
                let e = if r.reset_active_low { "negedge" } else { "posedge" };
                edges.push(format!("{e} {}", r.name));
            }
            s.push_str(&format!("  always @({}) begin end\n", edges.join(" or ")));
        }
        s.push_str("endmodule\n");
        s
    }
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    System,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: u32,
}

impl Token {
    pub fn is(&self, s: &str) -> bool {
        self.kind != TokKind::Str && self.text == s
    }
}

/// Replaces comments with whitespace, preserving line breaks and string literals.
pub fn strip_comments(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut start = 0;
    while i < b.len() {
        match b[i] {
            b'"' => {
                i += 1;
                while i < b.len() && b[i] != b'"' && b[i] != b'\n' {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                out.push_str(&src[start..i]);
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                start = i;
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                out.push_str(&src[start..i]);
                i += 2;
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    if b[i] == b'\n' {
                        out.push('\n');
                    }
                    i += 1;
                }
                i = (i + 2).min(b.len());
                out.push(' ');
                start = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&src[start.min(src.len())..]);
    out
}

const OPS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "**", "~&", "~|", "~^",
    "^~", "+:", "-:", "->", "::", "+=", "-=", "++", "--",
];

/// Tokenizes comment-stripped source. Compiler directives are dropped along
/// with the rest of their line.
pub fn tokenize(src: &str) -> Vec<Token> {
    let src = strip_comments(src);
    let b = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == b'`' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'"' {
            i += 1;
            while i < b.len() && b[i] != b'"' && b[i] != b'\n' {
                if b[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(b.len());
            toks.push(Token {
                kind: TokKind::Str,
                text: src[start..i].to_string(),
                line,
            });
            continue;
        }
        if c == b'\\' {
            i += 1;
            while i < b.len() && !b[i].is_ascii_whitespace() {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Ident,
                text: src[start + 1..i].to_string(),
                line,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            let kind = if c == b'$' { TokKind::System } else { TokKind::Ident };
            toks.push(Token {
                kind,
                text: src[start..i].to_string(),
                line,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'\'' && b.get(i + 1).is_some_and(|n| b"sSbBoOdDhH01xXzZ".contains(n))) {
            // size, optional base, digits
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                i += 1;
            }
            let mut j = i;
            while j < b.len() && b[j] == b' ' {
                j += 1;
            }
            if j < b.len() && b[j] == b'\'' {
                i = j + 1;
                if i < b.len() && (b[i] == b's' || b[i] == b'S') {
                    i += 1;
                }
                if i < b.len() && b"bBoOdDhH".contains(&b[i]) {
                    i += 1;
                }
                while i < b.len() && b[i] == b' ' {
                    i += 1;
                }
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'?') {
                    i += 1;
                }
            } else if i < b.len() && b[i] == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit) {
                i += 1;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                    i += 1;
                }
            }
            toks.push(Token {
                kind: TokKind::Number,
                text: src[start..i].trim().to_string(),
                line,
            });
            continue;
        }
        let rest = &src[i..];
        let op = OPS.iter().find(|op| rest.starts_with(**op)).copied();
        let len = op.map_or_else(|| rest.chars().next().map_or(1, char::len_utf8), str::len);
        toks.push(Token {
            kind: TokKind::Op,
            text: rest[..len].to_string(),
            line,
        });
        i += len;
    }
    toks
}

const KEYWORDS: &[&str] = &[
    "always",
    "always_comb",
    "always_ff",
    "always_latch",
    "and",
    "assign",
    "automatic",
    "begin",
    "bit",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cmos",
    "deassign",
    "default",
    "defparam",
    "disable",
    "else",
    "end",
    "endcase",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endtask",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "if",
    "initial",
    "inout",
    "input",
    "integer",
    "join",
    "localparam",
    "logic",
    "macromodule",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "pulldown",
    "pullup",
    "real",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "signed",
    "supply0",
    "supply1",
    "task",
    "time",
    "tran",
    "tri",
    "tri0",
    "tri1",
    "unsigned",
    "wait",
    "while",
    "wire",
    "wor",
    "wand",
    "xnor",
    "xor",
    "interface",
    "endinterface",
    "modport",
    "typedef",
    "struct",
    "enum",
    "unique",
    "priority",
    "int",
    "byte",
    "shortint",
    "longint",
    "return",
    "do",
    "var",
    "const",
    "static",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

// ---------------------------------------------------------------------------
// Module discovery

#[derive(Debug, Clone)]
pub(crate) struct ModuleSpan {
    pub(crate) name: String,
    /// Token index just after the module name.
    pub(crate) start: usize,
    /// Token index of `endmodule` (exclusive end of the body).
    pub(crate) end: usize,
}

pub(crate) fn find_modules(toks: &[Token]) -> Result<Vec<ModuleSpan>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is("module") || toks[i].is("macromodule") {
            let Some(name) = toks.get(i + 1).filter(|t| t.kind == TokKind::Ident) else {
                return Err(Error::Parse(format!("line {}: module without a name", toks[i].line)));
            };
            let mut j = i + 2;
            while j < toks.len() && !toks[j].is("endmodule") {
                if toks[j].is("module") || toks[j].is("macromodule") {
                    return Err(Error::Parse(format!(
                        "line {}: module '{}' is not closed",
                        name.line, name.text
                    )));
                }
                j += 1;
            }
            if j == toks.len() {
                return Err(Error::Parse(format!("module '{}' has no endmodule", name.text)));
            }
            out.push(ModuleSpan {
                name: name.text.clone(),
                start: i + 2,
                end: j,
            });
            i = j + 1;
        } else if toks[i].is("interface") && toks.get(i + 1).is_some_and(|t| t.kind == TokKind::Ident) {
            return Err(Error::Unsupported(format!("interface '{}'", toks[i + 1].text)));
        } else {
            i += 1;
        }
    }
    Ok(out)
}

/// Names of modules instantiated inside `span`, in order of appearance.
fn instantiations(toks: &[Token], span: &ModuleSpan) -> Vec<String> {
    let mut out = Vec::new();
    let body = &toks[span.start..span.end];
    for i in 0..body.len() {
        let t = &body[i];
        if t.kind != TokKind::Ident || is_keyword(&t.text) {
            continue;
        }
        // a module name must start a statement
        if i > 0 {
            let p = &body[i - 1];
            let starts = [
                ";",
                "begin",
                "end",
                "endfunction",
                "endtask",
                "generate",
                "else",
                ")",
                ":",
            ]
            .iter()
            .any(|s| p.is(s));
            if !starts {
                continue;
            }
        }
        let next = body.get(i + 1);
        let is_inst = match next {
            Some(n) if n.is("#") => true,
            Some(n) if n.kind == TokKind::Ident && !is_keyword(&n.text) => {
                body.get(i + 2).is_some_and(|t| t.is("(") || t.is("["))
            }
            _ => false,
        };
        if is_inst {
            out.push(t.text.clone());
        }
    }
    out
}

/// Module names defined in `src`.
pub fn module_names(src: &str) -> Result<Vec<String>> {
    Ok(find_modules(&tokenize(src))?.into_iter().map(|m| m.name).collect())
}

/// Modules referenced by instantiation but not defined in the source.
pub fn unresolved_modules(src: &str) -> Result<Vec<String>> {
    let toks = tokenize(src);
    let mods = find_modules(&toks)?;
    let defined: BTreeSet<&str> = mods.iter().map(|m| m.name.as_str()).collect();
    let mut missing = BTreeSet::new();
    for m in &mods {
        for inst in instantiations(&toks, m) {
            if !defined.contains(inst.as_str()) {
                missing.insert(inst);
            }
        }
    }
    Ok(missing.into_iter().collect())
}

/// Name of the single module no other module instantiates.
pub fn find_top(src: &str) -> Result<String> {
    let toks = tokenize(src);
    let mods = find_modules(&toks)?;
    top_of(&toks, &mods, None).map(|m| m.name.clone())
}

fn top_of<'m>(toks: &[Token], mods: &'m [ModuleSpan], configured: Option<&str>) -> Result<&'m ModuleSpan> {
    if mods.is_empty() {
        return Err(Error::Parse("no module declaration found".into()));
    }
    if let Some(name) = configured {
        return mods
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Parse(format!("configured top module '{name}' not found")));
    }
    let mut used = BTreeSet::new();
    for m in mods {
        for inst in instantiations(toks, m) {
            if inst != m.name {
                used.insert(inst);
            }
        }
    }
    let roots: Vec<&ModuleSpan> = mods.iter().filter(|m| !used.contains(&m.name)).collect();
    match roots.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Parse(
            "every module is instantiated by another (cyclic hierarchy)".into(),
        )),
        many => Err(Error::AmbiguousTop(many.iter().map(|m| m.name.clone()).collect())),
    }
}

// ---------------------------------------------------------------------------
// Interface extraction

pub fn extract_interface(design: &RtlDesign) -> Result<ModuleInterface> {
    let toks = tokenize(&design.source);
    let mods = find_modules(&toks)?;
    let top = top_of(&toks, &mods, design.top_module.as_deref())?;
    let body = &toks[top.start..top.end];
    let mut params: HashMap<String, Option<i128>> = HashMap::new();
    let mut i = 0;

    // header parameter list
    if body.first().is_some_and(|t| t.is("#")) {
        let close = matching(body, 1).ok_or_else(|| Error::Parse("unbalanced parameter list".into()))?;
        read_param_assignments(&body[2..close], &mut params);
        i = close + 1;
    }

    let mut order: Vec<String> = Vec::new();
    let mut ports: HashMap<String, PortInfo> = HashMap::new();
    if body.get(i).is_some_and(|t| t.is("(")) {
        let close = matching(body, i).ok_or_else(|| Error::Parse("unbalanced port list".into()))?;
        let list = &body[i + 1..close];
        let ansi = list.iter().any(|t| t.is("input") || t.is("output") || t.is("inout"));
        if ansi {
            for decl in split_top_level(list, ",") {
                read_ansi_port(decl, &params, &mut order, &mut ports)?;
            }
        } else {
            for decl in split_top_level(list, ",") {
                match decl {
                    [] => {}
                    [t] if t.kind == TokKind::Ident => order.push(t.text.clone()),
                    _ => return Err(Error::Unsupported("port expressions in a non-ANSI port list".into())),
                }
            }
        }
        i = close + 1;
    }

    // body: parameters and non-ANSI port declarations, statement by statement
    let rest = &body[i.min(body.len())..];
    let mut k = 0;
    while k < rest.len() {
        let t = &rest[k];
        if t.is("parameter") || t.is("localparam") {
            let end = find_semicolon(rest, k);
            read_param_assignments(&rest[k + 1..end], &mut params);
            k = end + 1;
        } else if (t.is("input") || t.is("output") || t.is("inout")) && at_statement_start(rest, k) {
            let end = find_semicolon(rest, k);
            read_body_port(&rest[k..end], &params, &order, &mut ports)?;
            k = end + 1;
        } else if (t.is("function") || t.is("task")) && at_statement_start(rest, k) {
            let close = if t.is("function") { "endfunction" } else { "endtask" };
            while k < rest.len() && !rest[k].is(close) {
                k += 1;
            }
            k += 1;
        } else {
            k += 1;
        }
    }

    let mut list = Vec::with_capacity(order.len());
    for name in &order {
        let p = ports
            .remove(name)
            .ok_or_else(|| Error::Parse(format!("port '{name}' of '{}' has no direction declaration", top.name)))?;
        list.push(p);
    }
    if list.is_empty() {
        return Err(Error::Parse(format!("module '{}' has no ports", top.name)));
    }
    let mut seen = BTreeSet::new();
    for p in &list {
        if !seen.insert(&p.name) {
            return Err(Error::Parse(format!("duplicate port '{}'", p.name)));
        }
    }

    let ports = detect_clock_reset(list, &design.source);
    let is_sequential = ports.iter().any(|p| p.is_clock);
    Ok(ModuleInterface {
        top_module: top.name.clone(),
        ports,
        is_sequential,
    })
}

fn at_statement_start(toks: &[Token], k: usize) -> bool {
    k == 0 || {
        let p = &toks[k - 1];
        [";", "begin", "end", "endfunction", "endtask"].iter().any(|s| p.is(s))
    }
}

fn find_semicolon(toks: &[Token], from: usize) -> usize {
    toks[from..]
        .iter()
        .position(|t| t.is(";"))
        .map_or(toks.len(), |p| from + p)
}

/// Index of the bracket closing the one at `open`.
pub(crate) fn matching(toks: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.is("(") || t.is("[") || t.is("{") {
            depth += 1;
        } else if t.is(")") || t.is("]") || t.is("}") {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

pub(crate) fn split_top_level<'t>(toks: &'t [Token], sep: &str) -> Vec<&'t [Token]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (j, t) in toks.iter().enumerate() {
        if t.is("(") || t.is("[") || t.is("{") {
            depth += 1;
        } else if t.is(")") || t.is("]") || t.is("}") {
            depth -= 1;
        } else if depth == 0 && t.is(sep) {
            out.push(&toks[start..j]);
            start = j + 1;
        }
    }
    out.push(&toks[start..]);
    out
}

pub(crate) fn read_param_assignments(toks: &[Token], params: &mut HashMap<String, Option<i128>>) {
    for part in split_top_level(toks, ",") {
        let Some(eq) = part.iter().position(|t| t.is("=")) else {
            if let Some(name) = part
                .iter()
                .rev()
                .find(|t| t.kind == TokKind::Ident && !is_keyword(&t.text))
            {
                params.insert(name.text.clone(), None);
            }
            continue;
        };
        let Some(name) = part[..eq]
            .iter()
            .rev()
            .find(|t| t.kind == TokKind::Ident && !is_keyword(&t.text))
        else {
            continue;
        };
        let value = ConstEval::new(&part[eq + 1..], params).eval();
        params.insert(name.text.clone(), value);
    }
}

struct PortHead {
    direction: Direction,
    width: Option<u32>,
}

/// Reads `input wire signed [7:0]` style prefixes; returns the remaining tokens.
fn port_head<'t>(toks: &'t [Token], params: &HashMap<String, Option<i128>>) -> Result<(Option<PortHead>, &'t [Token])> {
    let mut i = 0;
    let mut direction = None;
    let mut width = None;
    while i < toks.len() {
        let t = &toks[i];
        if t.is("input") {
            direction = Some(Direction::Input);
        } else if t.is("output") {
            direction = Some(Direction::Output);
        } else if t.is("inout") {
            direction = Some(Direction::Inout);
        } else if t.is("integer") {
            width = Some(32);
        } else if t.is("wire")
            || t.is("reg")
            || t.is("logic")
            || t.is("signed")
            || t.is("unsigned")
            || t.is("var")
            || t.is("tri")
            || t.is("bit")
        {
        } else if t.is("[") {
            let close = matching(toks, i).ok_or_else(|| Error::Parse("unbalanced range".into()))?;
            width = Some(range_width(&toks[i + 1..close], params)?);
            i = close;
        } else if t.kind == TokKind::Ident && toks.get(i + 1).is_some_and(|n| n.is(".")) {
            return Err(Error::Unsupported(format!("interface port '{}'", t.text)));
        } else if t.kind == TokKind::Ident
            && !is_keyword(&t.text)
            && direction.is_none()
            && toks.get(i + 1).is_some_and(|n| n.kind == TokKind::Ident)
        {
            return Err(Error::Unsupported(format!("user-defined port type '{}'", t.text)));
        } else {
            break;
        }
        i += 1;
    }
    Ok((direction.map(|direction| PortHead { direction, width }), &toks[i..]))
}

pub(crate) fn range_width(toks: &[Token], params: &HashMap<String, Option<i128>>) -> Result<u32> {
    let parts = split_top_level(toks, ":");
    if parts.len() != 2 {
        return Err(Error::Unsupported("range is not of the form [msb:lsb]".into()));
    }
    let msb = ConstEval::new(parts[0], params).eval();
    let lsb = ConstEval::new(parts[1], params).eval();
    match (msb, lsb) {
        (Some(a), Some(b)) => {
            let w = (a - b).unsigned_abs() + 1;
            u32::try_from(w).map_err(|_| Error::Unsupported("port wider than 2^32 bits".into()))
        }
        _ => Err(Error::Unsupported(
            "port width depends on a parameter without a literal default".into(),
        )),
    }
}

fn read_ansi_port(
    decl: &[Token],
    params: &HashMap<String, Option<i128>>,
    order: &mut Vec<String>,
    ports: &mut HashMap<String, PortInfo>,
) -> Result<()> {
    if decl.is_empty() {
        return Ok(());
    }
    let (head, rest) = port_head(decl, params)?;
    let name = rest
        .first()
        .filter(|t| t.kind == TokKind::Ident)
        .ok_or_else(|| Error::Parse(format!("line {}: malformed port declaration", decl[0].line)))?;
    if rest.len() > 1 {
        if rest[1].is("[") {
            return Err(Error::Unsupported(format!("unpacked port '{}'", name.text)));
        }
        if !rest[1].is("=") {
            return Err(Error::Parse(format!(
                "line {}: unexpected token after port '{}'",
                name.line, name.text
            )));
        }
    }
    // a bare name inherits direction and width from the previous declaration
    let info = match head {
        Some(h) => PortInfo::new(&name.text, h.direction, h.width.unwrap_or(1)),
        None => {
            let prev = order
                .last()
                .and_then(|n| ports.get(n))
                .ok_or_else(|| Error::Parse(format!("port '{}' has no direction", name.text)))?;
            let mut p = prev.clone();
            p.name = name.text.clone();
            p
        }
    };
    order.push(name.text.clone());
    ports.insert(name.text.clone(), info);
    Ok(())
}

fn read_body_port(
    stmt: &[Token],
    params: &HashMap<String, Option<i128>>,
    order: &[String],
    ports: &mut HashMap<String, PortInfo>,
) -> Result<()> {
    let (head, rest) = port_head(stmt, params)?;
    let Some(head) = head else { return Ok(()) };
    for part in split_top_level(rest, ",") {
        let Some(name) = part.first().filter(|t| t.kind == TokKind::Ident) else {
            continue;
        };
        if part.get(1).is_some_and(|t| t.is("[")) {
            return Err(Error::Unsupported(format!("unpacked port '{}'", name.text)));
        }
        if !order.contains(&name.text) {
            return Err(Error::Parse(format!(
                "line {}: '{}' declared as a port but missing from the port list",
                name.line, name.text
            )));
        }
        ports.insert(
            name.text.clone(),
            PortInfo::new(&name.text, head.direction, head.width.unwrap_or(1)),
        );
    }
    Ok(())
}

/// Constant folding over parameter-free or literal-parameter expressions.
pub(crate) fn const_value(toks: &[Token], params: &HashMap<String, Option<i128>>) -> Option<i128> {
    ConstEval::new(toks, params).eval()
}

struct ConstEval<'a> {
    toks: &'a [Token],
    pos: usize,
    params: &'a HashMap<String, Option<i128>>,
}

impl<'a> ConstEval<'a> {
    fn new(toks: &'a [Token], params: &'a HashMap<String, Option<i128>>) -> Self {
        ConstEval { toks, pos: 0, params }
    }

    fn eval(mut self) -> Option<i128> {
        let v = self.ternary()?;
        (self.pos == self.toks.len()).then_some(v)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek().is_some_and(|t| t.is(s)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ternary(&mut self) -> Option<i128> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.ternary()?;
            if !self.eat(":") {
                return None;
            }
            let b = self.ternary()?;
            Some(if c != 0 { a } else { b })
        } else {
            Some(c)
        }
    }

    fn binary(&mut self, min_prec: u8) -> Option<i128> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^", "~^", "^~"],
            &["&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["<<", ">>", "<<<", ">>>"],
            &["+", "-"],
            &["*", "/", "%"],
            &["**"],
        ];
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek() {
            let Some(prec) = LEVELS.iter().position(|ops| ops.contains(&t.text.as_str())) else {
                break;
            };
            let prec = prec as u8;
            if prec < min_prec || t.kind != TokKind::Op {
                break;
            }
            let op = t.text.clone();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = match op.as_str() {
                "||" => ((lhs != 0) || (rhs != 0)) as i128,
                "&&" => ((lhs != 0) && (rhs != 0)) as i128,
                "|" => lhs | rhs,
                "^" => lhs ^ rhs,
                "~^" | "^~" => !(lhs ^ rhs),
                "&" => lhs & rhs,
                "==" => (lhs == rhs) as i128,
                "!=" => (lhs != rhs) as i128,
                "<" => (lhs < rhs) as i128,
                "<=" => (lhs <= rhs) as i128,
                ">" => (lhs > rhs) as i128,
                ">=" => (lhs >= rhs) as i128,
                "<<" | "<<<" => lhs.checked_shl(u32::try_from(rhs).ok()?)?,
                ">>" | ">>>" => lhs.checked_shr(u32::try_from(rhs).ok()?)?,
                "+" => lhs.checked_add(rhs)?,
                "-" => lhs.checked_sub(rhs)?,
                "*" => lhs.checked_mul(rhs)?,
                "/" => lhs.checked_div(rhs)?,
                "%" => lhs.checked_rem(rhs)?,
                _ => lhs.checked_pow(u32::try_from(rhs).ok()?)?,
            };
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<i128> {
        if self.eat("-") {
            return self.unary()?.checked_neg();
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("~") {
            return Some(!self.unary()?);
        }
        if self.eat("!") {
            return Some((self.unary()? == 0) as i128);
        }
        self.primary()
    }

    fn primary(&mut self) -> Option<i128> {
        let t = self.peek()?.clone();
        self.pos += 1;
        match t.kind {
            TokKind::Number => parse_number(&t.text),
            TokKind::Ident => *self.params.get(&t.text)?,
            TokKind::System if t.text == "$clog2" => {
                if !self.eat("(") {
                    return None;
                }
                let v = self.ternary()?;
                if !self.eat(")") {
                    return None;
                }
                let v = u128::try_from(v).ok()?;
                Some(if v <= 1 {
                    0
                } else {
                    (128 - (v - 1).leading_zeros()) as i128
                })
            }
            TokKind::Op if t.text == "(" => {
                let v = self.ternary()?;
                self.eat(")").then_some(v)
            }
            _ => None,
        }
    }
}

/// Value of an integer literal; `None` for literals with x/z digits.
pub fn parse_number(text: &str) -> Option<i128> {
    let text: String = text.chars().filter(|c| *c != '_' && !c.is_whitespace()).collect();
    let Some(q) = text.find('\'') else {
        return text.parse().ok();
    };
    let mut rest = &text[q + 1..];
    if rest.starts_with(['s', 'S']) {
        rest = &rest[1..];
    }
    let (radix, digits) = match rest.chars().next()? {
        'b' | 'B' => (2, &rest[1..]),
        'o' | 'O' => (8, &rest[1..]),
        'd' | 'D' => (10, &rest[1..]),
        'h' | 'H' => (16, &rest[1..]),
        _ => (10, rest),
    };
    i128::from_str_radix(digits, radix).ok()
}

// ---------------------------------------------------------------------------
// Clock and reset detection

const CLOCK_TOKENS: &[&str] = &["clk", "clock", "ck"];
const RESET_TOKENS: &[&str] = &["rst", "reset", "clr", "clear"];

/// Splits an identifier into lowercase segments at `_`, camel-case humps and
/// letter/digit boundaries: `sysClk_2x` → `["sys", "clk", "2", "x"]`.
pub fn name_segments(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in name.split(['_', '$']) {
        let chars: Vec<char> = part.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 {
                let p = chars[i - 1];
                let boundary = (p.is_ascii_lowercase() && c.is_ascii_uppercase())
                    || (p.is_ascii_digit() != c.is_ascii_digit())
                    || (p.is_ascii_uppercase()
                        && c.is_ascii_uppercase()
                        && chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase()));
                if boundary && !cur.is_empty() {
                    out.push(std::mem::take(&mut cur).to_ascii_lowercase());
                }
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur.to_ascii_lowercase());
        }
    }
    out
}

fn is_clock_name(name: &str) -> bool {
    name_segments(name).iter().any(|s| CLOCK_TOKENS.contains(&s.as_str()))
}

fn is_reset_name(name: &str) -> bool {
    name_segments(name).iter().any(|s| {
        RESET_TOKENS
            .iter()
            .any(|t| s == t || s.strip_prefix('n') == Some(t) || s.strip_suffix('n') == Some(t))
    })
}

fn low_by_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    if ["_n", "_b", "_ni", "_nb"].iter().any(|s| lower.ends_with(s)) {
        return true;
    }
    let segs = name_segments(name);
    segs.first().is_some_and(|s| s == "n")
        || segs.iter().any(|s| {
            RESET_TOKENS
                .iter()
                .any(|t| s.strip_prefix('n') == Some(t) || s.strip_suffix('n') == Some(t))
        })
}

/// Edge-sensitivity usage of every identifier: (posedge count, negedge count)
/// plus the identifiers sharing an event list with at least one other edge.
fn edge_usage(source: &str) -> (HashMap<String, (u32, u32)>, BTreeSet<String>) {
    let toks = tokenize(source);
    let mut usage: HashMap<String, (u32, u32)> = HashMap::new();
    let mut multi = BTreeSet::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is("@") && toks.get(i + 1).is_some_and(|t| t.is("(")) {
            let close = matching(&toks, i + 1).unwrap_or(toks.len() - 1);
            let mut names = Vec::new();
            let mut j = i + 2;
            while j < close {
                let pos = toks[j].is("posedge");
                if (pos || toks[j].is("negedge")) && toks.get(j + 1).is_some_and(|t| t.kind == TokKind::Ident) {
                    let name = toks[j + 1].text.clone();
                    let e = usage.entry(name.clone()).or_default();
                    if pos {
                        e.0 += 1;
                    } else {
                        e.1 += 1;
                    }
                    names.push(name);
                    j += 1;
                }
                j += 1;
            }
            if names.len() > 1 {
                multi.extend(names);
            }
            i = close;
        }
        i += 1;
    }
    (usage, multi)
}

/// Flags one clock and any resets among one-bit inputs.
pub fn detect_clock_reset(mut ports: Vec<PortInfo>, source: &str) -> Vec<PortInfo> {
    for p in &mut ports {
        p.is_clock = false;
        p.is_reset = false;
        p.reset_active_low = false;
    }
    let (usage, multi) = edge_usage(source);
    let eligible = |p: &PortInfo| p.direction == Direction::Input && p.width == 1;

    let by_name = ports
        .iter()
        .position(|p| eligible(p) && is_clock_name(&p.name) && !is_reset_name(&p.name));
    let clock = by_name.or_else(|| {
        ports
            .iter()
            .position(|p| eligible(p) && usage.contains_key(&p.name) && !is_reset_name(&p.name))
    });
    if let Some(c) = clock {
        ports[c].is_clock = true;
    }
    let clock_name = clock.map(|c| ports[c].name.clone());
    for p in &mut ports {
        if !eligible(p) || p.is_clock {
            continue;
        }
        let async_partner = multi.contains(&p.name) && clock_name.as_ref().is_some_and(|c| multi.contains(c));
        if is_reset_name(&p.name) || async_partner {
            p.is_reset = true;
            let only_neg = usage.get(&p.name).is_some_and(|(pos, neg)| *pos == 0 && *neg > 0);
            p.reset_active_low = low_by_name(&p.name) || only_neg;
        }
    }
    ports
}

/// Renames every module declared in `src` with `suffix` appended, rewriting
/// declarations and instantiations token by token. Comments and strings are
/// left untouched.
pub fn rename_modules(src: &str, suffix: &str) -> Result<String> {
    let names: BTreeSet<String> = module_names(src)?.into_iter().collect();
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len() + 64);
    let mut i = 0;
    let mut prev_sig: Option<u8> = None;
    while i < b.len() {
        let c = b[i];
        if c == b'/' && b.get(i + 1) == Some(&b'/') {
            let end = src[i..].find('\n').map_or(b.len(), |p| i + p);
            out.push_str(&src[i..end]);
            i = end;
            continue;
        }
        if c == b'/' && b.get(i + 1) == Some(&b'*') {
            let end = src[i + 2..].find("*/").map_or(b.len(), |p| i + 2 + p + 2);
            out.push_str(&src[i..end]);
            i = end;
            continue;
        }
        if c == b'"' {
            let mut j = i + 1;
            while j < b.len() && b[j] != b'"' && b[j] != b'\n' {
                if b[j] == b'\\' {
                    j += 1;
                }
                j += 1;
            }
            let end = (j + 1).min(b.len());
            out.push_str(&src[i..end]);
            i = end;
            continue;
        }
        if c == b'`' || c == b'$' || c == b'\'' {
            // directive, system name or based literal: copy the word verbatim
            let mut j = i + 1;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_' || b[j] == b'$') {
                j += 1;
            }
            out.push_str(&src[i..j]);
            prev_sig = Some(c);
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i + 1;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_' || b[j] == b'$') {
                j += 1;
            }
            let word = &src[i..j];
            // `.name(` is a port connection, never a module reference
            if names.contains(word) && prev_sig != Some(b'.') {
                out.push_str(word);
                out.push_str(suffix);
            } else {
                out.push_str(word);
            }
            prev_sig = Some(b'a');
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i + 1;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                j += 1;
            }
            out.push_str(&src[i..j]);
            prev_sig = Some(b'0');
            i = j;
            continue;
        }
        let ch = src[i..].chars().next().unwrap();
        out.push(ch);
        if !ch.is_whitespace() {
            prev_sig = Some(c);
        }
        i += ch.len_utf8();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iface(src: &str) -> ModuleInterface {
        extract_interface(&RtlDesign::new("t", src).unwrap()).unwrap()
    }

    #[test]
    fn ansi_sequential_module() {
        let i =
            iface("module m(input clk, input [3:0] a, output reg [3:0] y); always @(posedge clk) y <= a; endmodule");
        assert_eq!(i.top_module, "m");
        assert!(i.is_sequential);
        let w: Vec<_> = i
            .ports
            .iter()
            .map(|p| (p.name.as_str(), p.direction, p.width, p.is_clock))
            .collect();
        assert_eq!(
            w,
            vec![
                ("clk", Direction::Input, 1, true),
                ("a", Direction::Input, 4, false),
                ("y", Direction::Output, 4, false)
            ]
        );
    }

    #[test]
    fn combinational_module() {
        let i = iface("module f(input [7:0] x, output [7:0] z); assign z = x; endmodule");
        assert_eq!(i.top_module, "f");
        assert!(!i.is_sequential);
        assert!(i.clock().is_none());
    }

    #[test]
    fn top_is_the_uninstantiated_module() {
        let src = "module sub(input a, output b); assign b = a; endmodule\n\
                   module top(input a, output b); sub u0(.a(a), .b(b)); endmodule";
        assert_eq!(iface(src).top_module, "top");
    }

    #[test]
    fn ambiguity_and_absence() {
        let two = RtlDesign::new("t", "module a(input x); endmodule module b(input y); endmodule").unwrap();
        assert!(matches!(extract_interface(&two), Err(Error::AmbiguousTop(_))));
        let chosen = two.clone().with_top("b");
        assert_eq!(extract_interface(&chosen).unwrap().top_module, "b");
        let none = RtlDesign::new("t", "// nothing here\nwire x;").unwrap();
        assert!(matches!(extract_interface(&none), Err(Error::Parse(_))));
    }

    #[test]
    fn parameterized_widths() {
        let i = iface("module p #(parameter W = 8, parameter D = W*2) (input [W-1:0] a, output [D-1:0] y); endmodule");
        assert_eq!(i.ports[0].width, 8);
        assert_eq!(i.ports[1].width, 16);
        let bad = RtlDesign::new("t", "module p #(parameter W) (input [W-1:0] a); endmodule").unwrap();
        assert!(matches!(extract_interface(&bad), Err(Error::Unsupported(_))));
    }

    #[test]
    fn non_ansi_ports() {
        let i = iface(
            "module n(clk, rst_n, d, q);\n input clk, rst_n;\n input [15:0] d;\n output reg [15:0] q;\n\
             always @(posedge clk or negedge rst_n) if (!rst_n) q <= 0; else q <= d;\nendmodule",
        );
        let rst = &i.ports[1];
        assert!(rst.is_reset && rst.reset_active_low);
        assert_eq!(i.ports[2].width, 16);
        assert!(i.ports[0].is_clock);
    }

    #[test]
    fn clock_heuristics() {
        assert!(is_clock_name("clk"));
        assert!(is_clock_name("sys_clk_i"));
        assert!(is_clock_name("coreClock"));
        assert!(is_clock_name("clk2x"));
        assert!(!is_clock_name("class_a"));
        assert!(!is_clock_name("clkdiv_ratio"));
        assert!(is_reset_name("rst_n"));
        assert!(is_reset_name("resetn"));
        assert!(is_reset_name("nRST"));
        assert!(low_by_name("rst_n") && low_by_name("rst_ni") && low_by_name("resetn") && low_by_name("n_rst"));
        assert!(!low_by_name("rst") && !low_by_name("reset"));
    }

    #[test]
    fn edge_only_clock_and_async_partner_reset() {
        let src = "module e(input tick, input arst, input d, output reg q);\n\
                   always @(posedge tick or posedge arst) if (arst) q <= 0; else q <= d;\nendmodule";
        let i = iface(src);
        assert!(i.ports[0].is_clock);
        assert!(i.ports[1].is_reset && !i.ports[1].reset_active_low);
        assert!(!i.ports[2].is_clock && !i.ports[2].is_reset);
    }

    #[test]
    fn comments_and_strings_do_not_count() {
        let src = "module c(input a, output y); // always @(posedge a)\n\
                   /* module fake(input q); endmodule */ initial $display(\"posedge a\"); assign y = a; endmodule";
        let i = iface(src);
        assert!(!i.is_sequential);
        assert_eq!(i.top_module, "c");
    }

    #[test]
    fn rename_rewrites_declarations_and_instances_only() {
        let src = "module sub(input a, output b); assign b = a; endmodule\n\
                   module top(input a, output sub_o); sub u0(.a(a), .b(sub_o)); // sub\nendmodule";
        let r = rename_modules(src, "__a").unwrap();
        assert!(r.contains("module sub__a("));
        assert!(r.contains("module top__a("));
        assert!(r.contains("sub__a u0(.a(a), .b(sub_o));"));
        assert!(r.contains("// sub\n"));
    }

    #[test]
    fn unresolved_references() {
        let src = "module top(input a, output y); missing_ip u0(.a(a), .y(y)); endmodule";
        assert_eq!(unresolved_modules(src).unwrap(), vec!["missing_ip".to_string()]);
    }

    #[test]
    fn literal_parsing() {
        assert_eq!(parse_number("8'hff"), Some(255));
        assert_eq!(parse_number("'d10"), Some(10));
        assert_eq!(parse_number("4'b10_01"), Some(9));
        assert_eq!(parse_number("4'bx"), None);
        assert_eq!(parse_number("42"), Some(42));
    }
}
