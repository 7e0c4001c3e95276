// SPDX-License-Identifier: Apache-2.0

//! Deterministic PPA proxy computed from the token stream.
//!
//! | class                                    | area | latency (ns) |
//! |------------------------------------------|------|--------------|
//! | `*` `**`                                 | 32   | 1.0          |
//! | `/` `%`                                  | 64   | 2.0          |
//! | `+` `-`                                  | 8    | 0.4          |
//! | `<<` `>>` `<<<` `>>>`                    | 4    | 0.2          |
//! | `==` `!=` `===` `!==` `<` `<=` `>` `>=`  | 3    | 0.3          |
//! | bitwise, logical, `!`, `?`               | 1    | 0.05         |
//! | each declared `reg` bit                  | 2    |              |
//!
//! Tokens in module headers, declarations (wire initializers excepted),
//! parameter values, `for` headers, delays and sensitivity lists are not
//! counted. Memories count `width × depth` bits; `integer` counts nothing.
//!
//! Delay is the worst statement: its operator latencies summed plus 0.1 ns per
//! level of parenthesis nesting. Statements without operators cost nothing.
//! Power is `area / 100`.

use std::collections::HashMap;

use crate::error::Result;
use crate::verilog::{
    const_value, find_modules, matching, range_width, read_param_assignments, split_top_level, tokenize, TokKind, Token,
};

/// Delay is accumulated in units of 0.05 ns to keep sums exact.
const DELAY_UNIT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Estimate {
    pub area: u64,
    pub delay_units: u64,
    pub reg_bits: u64,
    pub operators: u64,
}

impl Estimate {
    pub fn area(&self) -> f64 {
        self.area as f64
    }

    pub fn delay(&self) -> f64 {
        self.delay_units as f64 / DELAY_UNIT
    }

    pub fn power(&self) -> f64 {
        self.area as f64 / 100.0
    }

    /// Report text in the `mock` schema.
    pub fn report(&self, top: &str) -> String {
        format!(
            "schema: mock\ntop: {top}\noperators: {}\nreg_bits: {}\narea: {}\ndelay: {}\npower: {}\n",
            self.operators,
            self.reg_bits,
            self.area(),
            self.delay(),
            self.power()
        )
    }
}

/// `(area weight, latency units)` of an operator token.
pub fn operator_cost(op: &str) -> Option<(u64, u64)> {
    Some(match op {
        "*" | "**" => (32, 20),
        "/" | "%" => (64, 40),
        "+" | "-" => (8, 8),
        "<<" | ">>" | "<<<" | ">>>" => (4, 4),
        "==" | "!=" | "===" | "!==" | "<" | "<=" | ">" | ">=" => (3, 6),
        "&" | "|" | "^" | "~" | "~&" | "~|" | "~^" | "^~" | "&&" | "||" | "!" | "?" => (1, 1),
        _ => return None,
    })
}

const DECLARATIONS: &[&str] = &[
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "integer",
    "parameter",
    "localparam",
    "defparam",
    "specparam",
    "genvar",
    "real",
    "realtime",
    "time",
    "tri",
    "wand",
    "wor",
    "supply0",
    "supply1",
    "event",
    "logic",
];

const BOUNDARIES: &[&str] = &[
    "begin",
    "end",
    "else",
    "endcase",
    "endfunction",
    "endtask",
    "generate",
    "endgenerate",
    "always",
    "always_ff",
    "always_comb",
    "always_latch",
    "initial",
    "assign",
    "default",
    "fork",
    "join",
    "forever",
];

const CONDITIONS: &[&str] = &["if", "case", "casez", "casex", "while", "repeat", "wait"];

#[derive(Default)]
struct Walker {
    est: Estimate,
    seg_ops: u64,
    seg_latency: u64,
    paren: u32,
    max_paren: u32,
    group: i32,
    assigned: bool,
    pending_ternary: u32,
}

impl Walker {
    fn boundary(&mut self) {
        if self.seg_ops > 0 {
            let d = self.seg_latency + 2 * self.max_paren as u64;
            self.est.delay_units = self.est.delay_units.max(d);
        }
        self.seg_ops = 0;
        self.seg_latency = 0;
        self.max_paren = self.paren;
        self.assigned = false;
        self.pending_ternary = 0;
    }

    fn charge(&mut self, op: &str) {
        if let Some((w, l)) = operator_cost(op) {
            self.est.area += w;
            self.est.operators += 1;
            self.seg_ops += 1;
            self.seg_latency += l;
        }
    }

    /// One token of ordinary statement text.
    fn token(&mut self, t: &Token) {
        if t.kind != TokKind::Op {
            return;
        }
        match t.text.as_str() {
            "(" => {
                self.group += 1;
                self.paren += 1;
                self.max_paren = self.max_paren.max(self.paren);
            }
            ")" => {
                self.group -= 1;
                self.paren = self.paren.saturating_sub(1);
            }
            "[" | "{" => self.group += 1,
            "]" | "}" => self.group -= 1,
            ";" => self.boundary(),
            "=" if self.group == 0 => self.assigned = true,
            "<=" if self.group == 0 && !self.assigned => self.assigned = true,
            ":" if self.group == 0 => {
                if self.pending_ternary > 0 {
                    self.pending_ternary -= 1;
                } else {
                    self.boundary();
                }
            }
            "?" => {
                self.pending_ternary += 1;
                self.charge("?");
            }
            op => self.charge(op),
        }
    }

    /// An expression outside any statement context, e.g. a wire initializer.
    fn expression(&mut self, toks: &[Token]) {
        self.boundary();
        self.assigned = true;
        for t in toks {
            self.token(t);
        }
        self.boundary();
    }
}

/// Index of the `;` ending the statement that starts at `from`, or the slice end.
fn statement_end(toks: &[Token], from: usize) -> usize {
    let mut depth = 0i32;
    for (j, t) in toks.iter().enumerate().skip(from) {
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ";" if depth <= 0 && t.kind == TokKind::Op => return j,
            _ => {}
        }
    }
    toks.len()
}

/// Width from the first `[msb:lsb]` range in `toks`, or 1.
fn head_width(toks: &[Token], params: &HashMap<String, Option<i128>>) -> u64 {
    match toks.iter().position(|t| t.is("[")) {
        Some(open) => matching(toks, open)
            .and_then(|close| range_width(&toks[open + 1..close], params).ok())
            .map_or(1, u64::from),
        None => 1,
    }
}

/// Bits declared by a `reg` declaration (without the trailing `;`).
fn reg_bits(decl: &[Token], params: &HashMap<String, Option<i128>>) -> u64 {
    let mut i = 0;
    let mut width = 1;
    while i < decl.len() {
        let t = &decl[i];
        if t.is("[") {
            let Some(close) = matching(decl, i) else { return 0 };
            width = range_width(&decl[i + 1..close], params).map_or(1, u64::from);
            i = close + 1;
        } else if ["input", "output", "inout", "reg", "wire", "signed", "unsigned"]
            .iter()
            .any(|k| t.is(k))
        {
            i += 1;
        } else {
            break;
        }
    }
    let mut bits = 0;
    for item in split_top_level(&decl[i..], ",") {
        if item.is_empty() {
            continue;
        }
        let end = item.iter().position(|t| t.is("=")).unwrap_or(item.len());
        let mut depth: u64 = 1;
        let mut k = 1;
        while k < end {
            if item[k].is("[") {
                let Some(close) = matching(item, k) else { break };
                let inner = &item[k + 1..close];
                let n = if split_top_level(inner, ":").len() == 2 {
                    range_width(inner, params).map_or(1, u64::from)
                } else {
                    const_value(inner, params)
                        .and_then(|v| u64::try_from(v).ok())
                        .unwrap_or(1)
                };
                depth = depth.saturating_mul(n);
                k = close + 1;
            } else {
                k += 1;
            }
        }
        bits += width * depth;
    }
    bits
}

fn header(body: &[Token], params: &mut HashMap<String, Option<i128>>, w: &mut Walker) -> usize {
    let mut i = 0;
    if body.first().is_some_and(|t| t.is("#")) && body.get(1).is_some_and(|t| t.is("(")) {
        if let Some(close) = matching(body, 1) {
            read_param_assignments(&body[2..close], params);
            i = close + 1;
        }
    }
    if body.get(i).is_some_and(|t| t.is("(")) {
        if let Some(close) = matching(body, i) {
            let mut is_reg = false;
            let mut width = 1;
            for decl in split_top_level(&body[i + 1..close], ",") {
                let has_dir = decl.iter().any(|t| t.is("input") || t.is("output") || t.is("inout"));
                if has_dir {
                    is_reg = decl.iter().any(|t| t.is("reg"));
                    width = head_width(decl, params);
                }
                if is_reg && decl.iter().any(|t| t.kind == TokKind::Ident) {
                    w.est.reg_bits += width;
                }
            }
            i = close + 1;
        }
    }
    if body.get(i).is_some_and(|t| t.is(";")) {
        i += 1;
    }
    i
}

/// Estimates every module in `source` without elaboration.
pub fn estimate(source: &str) -> Result<Estimate> {
    let toks = tokenize(source);
    let mut w = Walker::default();
    for span in find_modules(&toks)? {
        let body = &toks[span.start..span.end];
        let mut params = HashMap::new();
        let mut i = header(body, &mut params, &mut w);
        w.boundary();
        let mut cond_end: Option<usize> = None;
        while i < body.len() {
            let t = &body[i];
            let word = if t.kind == TokKind::Ident { t.text.as_str() } else { "" };
            if DECLARATIONS.contains(&word) {
                w.boundary();
                let end = statement_end(body, i);
                let decl = &body[i..end];
                match word {
                    "parameter" | "localparam" | "defparam" | "specparam" => {
                        read_param_assignments(&decl[1..], &mut params)
                    }
                    _ if decl.iter().any(|t| t.is("reg")) => w.est.reg_bits += reg_bits(decl, &params),
                    "integer" | "genvar" | "real" | "realtime" | "time" | "event" => {}
                    _ => {
                        for item in split_top_level(&decl[1..], ",") {
                            if let Some(eq) = item.iter().position(|t| t.is("=")) {
                                w.expression(&item[eq + 1..]);
                            }
                        }
                    }
                }
                i = end + 1;
                continue;
            }
            if word == "function" || word == "task" {
                w.boundary();
                i = statement_end(body, i) + 1;
                continue;
            }
            if word == "for" {
                w.boundary();
                i += 1;
                if body.get(i).is_some_and(|t| t.is("(")) {
                    i = matching(body, i).map_or(body.len(), |c| c + 1);
                }
                continue;
            }
            if CONDITIONS.contains(&word) && body.get(i + 1).is_some_and(|t| t.is("(")) {
                w.boundary();
                cond_end = matching(body, i + 1);
                i += 1;
                continue;
            }
            if BOUNDARIES.contains(&word) {
                w.boundary();
                i += 1;
                continue;
            }
            if t.is("@") {
                w.boundary();
                i += 1;
                if body.get(i).is_some_and(|t| t.is("*")) {
                    i += 1;
                } else if body.get(i).is_some_and(|t| t.is("(")) {
                    i = matching(body, i).map_or(body.len(), |c| c + 1);
                }
                w.boundary();
                continue;
            }
            if t.is("#") {
                i += 1;
                if body.get(i).is_some_and(|t| t.is("(")) {
                    i = matching(body, i).map_or(body.len(), |c| c + 1);
                } else {
                    i += 1;
                }
                continue;
            }
            w.token(t);
            if cond_end == Some(i) {
                cond_end = None;
                w.boundary();
            }
            i += 1;
        }
        w.boundary();
    }
    w.est.area += 2 * w.est.reg_bits;
    Ok(w.est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(src: &str) -> Estimate {
        estimate(src).unwrap()
    }

    #[test]
    fn operator_weights_by_hand() {
        // + (8) and * (32); header and declarations contribute nothing
        let e = est("module m(input [7:0] a, b, c, output [15:0] y); assign y = a + b * c; endmodule");
        assert_eq!(e.area, 40);
        assert_eq!(e.operators, 2);
        // 0.4 + 1.0 with no parentheses
        assert!((e.delay() - 1.4).abs() < 1e-12);
        assert!((e.power() - 0.40).abs() < 1e-12);
    }

    #[test]
    fn register_bits_count_two_each() {
        let e = est("module m(input clk, input [3:0] d, output reg [3:0] q); always @(posedge clk) q <= d; endmodule");
        assert_eq!(e.reg_bits, 4);
        assert_eq!(e.area, 8);
        // the nonblocking assignment is not a compare
        assert_eq!(e.operators, 0);
        assert_eq!(e.delay_units, 0);
    }

    #[test]
    fn memories_and_parameters() {
        let e = est("module m #(parameter W = 8, D = 16) (input clk);
                     localparam H = W / 2;
                     reg [W-1:0] mem [0:D-1];
                     reg [H-1:0] half;
                     integer i;
                     endmodule");
        assert_eq!(e.reg_bits, 8 * 16 + 4);
        assert_eq!(e.area, 2 * 132);
    }

    #[test]
    fn less_equal_inside_condition_is_compare() {
        let e = est("module m(input clk, input [3:0] a, b, output reg y);
                     always @(posedge clk) if (a <= b) y <= 1'b1; else y <= a <= b; endmodule");
        // two compares; y is one reg bit
        assert_eq!(e.operators, 2);
        assert_eq!(e.area, 3 + 3 + 2);
    }

    #[test]
    fn sensitivity_for_headers_and_delays_skipped() {
        let e = est("module m(input [3:0] a, output reg [3:0] y);
                     integer i;
                     always @(*) begin y = 0; for (i = 0; i < 4; i = i + 1) y = y | a; end endmodule");
        // only `|` counts, plus four reg bits
        assert_eq!(e.operators, 1);
        assert_eq!(e.area, 1 + 8);
    }

    #[test]
    fn wire_initializers_count() {
        let e = est("module m(input [3:0] a, b, output [3:0] y); wire [3:0] t = a ^ b; assign y = ~t; endmodule");
        assert_eq!(e.area, 2);
    }

    #[test]
    fn ternary_and_case_labels() {
        let e = est("module m(input [1:0] s, input [3:0] a, b, output reg [3:0] y);
                     always @* case (s) 2'd0: y = s[0] ? a : b; default: y = a - b; endcase endmodule");
        // `?` 1, `-` 8, reg bits 4 -> 8
        assert_eq!(e.area, 1 + 8 + 8);
        assert_eq!(e.operators, 2);
    }

    #[test]
    fn parenthesis_depth_adds_delay() {
        let e = est("module m(input [3:0] a, b, c, output [3:0] y); assign y = ((a + b) + c); endmodule");
        // 2 × 0.4 + 2 × 0.1
        assert!((e.delay() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_design_is_zero() {
        let e = est("module m(input a); endmodule");
        assert_eq!(e, Estimate::default());
    }

    #[test]
    fn instance_parameters_skipped() {
        let e = est(
            "module leaf #(parameter W=1)(input [W-1:0] x, output [W-1:0] y); assign y = ~x; endmodule
                     module top(input [7:0] a, output [7:0] y); leaf #(.W(8 + 0)) u (.x(a & a), .y(y)); endmodule",
        );
        // `~` and `&`; the `+` in the override is a parameter value
        assert_eq!(e.area, 2);
    }
}
