// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the synthesizable Verilog-2005 subset the
//! simulator understands.

use crate::ast::*;
use crate::lexer::{lex, Tok, Token};
use crate::VsimError;

pub fn parse(src: &str) -> Result<SourceFile, VsimError> {
    let tokens = lex(src)?;
    let mut p = Parser { toks: tokens, pos: 0 };
    let mut file = SourceFile::default();
    while !p.at_end() {
        if p.eat_kw("module") || p.eat_kw("macromodule") {
            file.modules.push(p.module()?);
        } else {
            let t = p.peek_desc();
            return Err(p.err(format!("expected 'module', found {t}")));
        }
    }
    Ok(file)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const UNSUPPORTED_ITEMS: &[&str] = &[
    "generate",
    "genvar",
    "task",
    "defparam",
    "specify",
    "primitive",
    "fork",
    "interface",
    "class",
    "package",
    "import",
    "typedef",
    "struct",
    "enum",
    "wait",
    "forever",
    "while",
    "repeat",
    "disable",
    "tri0",
    "tri1",
    "wand",
    "wor",
    "supply0",
    "supply1",
    "real",
    "time",
    "realtime",
    "event",
    "always_latch",
];

const GATES: &[&str] = &["and", "or", "nand", "nor", "xor", "xnor", "not", "buf"];

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn line(&self) -> u32 {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.line)
            .unwrap_or(0)
    }

    fn err(&self, msg: impl Into<String>) -> VsimError {
        VsimError::parse(self.line(), msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off).map(|t| &t.tok)
    }

    fn peek_desc(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Ident(s)) => format!("'{s}'"),
            Some(Tok::System(s)) => format!("'${s}'"),
            Some(Tok::Op(o)) => format!("'{o}'"),
            Some(Tok::Number(_)) => "number".into(),
            Some(Tok::Str(_)) => "string".into(),
        }
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), VsimError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{op}', found {}", self.peek_desc())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), VsimError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}', found {}", self.peek_desc())))
        }
    }

    fn ident(&mut self) -> Result<String, VsimError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_reserved(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected identifier, found {}", self.peek_desc()))),
        }
    }

    fn module(&mut self) -> Result<Module, VsimError> {
        let line = self.line();
        let name = self.ident()?;
        let mut m = Module {
            name,
            params: Vec::new(),
            ports: Vec::new(),
            port_decls: Vec::new(),
            functions: Vec::new(),
            items: Vec::new(),
            line,
        };
        if self.eat_op("#") {
            self.expect_op("(")?;
            if !self.is_op(")") {
                loop {
                    let local = self.eat_kw("localparam");
                    if !local {
                        self.eat_kw("parameter");
                    }
                    self.param_assignments(&mut m.params, local, true)?;
                    if !self.eat_op(",") {
                        break;
                    }
                }
            }
            self.expect_op(")")?;
        }
        if self.eat_op("(") {
            if !self.is_op(")") {
                self.port_list(&mut m)?;
            }
            self.expect_op(")")?;
        }
        self.expect_op(";")?;
        loop {
            if self.at_end() {
                return Err(self.err("missing 'endmodule'"));
            }
            if self.eat_kw("endmodule") {
                break;
            }
            self.module_item(&mut m)?;
        }
        Ok(m)
    }

    /// Parses `NAME = expr {, NAME = expr}` with optional leading type/range.
    /// In a header list a following `parameter` keyword ends the group.
    fn param_assignments(&mut self, out: &mut Vec<ParamDecl>, local: bool, header: bool) -> Result<(), VsimError> {
        let mut signed = false;
        let mut range = None;
        loop {
            if self.eat_kw("integer") || self.eat_kw("signed") {
                signed = true;
            } else if self.eat_kw("unsigned") || self.eat_kw("logic") || self.eat_kw("bit") {
            } else if self.is_op("[") {
                range = Some(self.range()?);
            } else {
                break;
            }
        }
        loop {
            let name = self.ident()?;
            self.expect_op("=")?;
            let value = self.expr()?;
            out.push(ParamDecl {
                name,
                value,
                local,
                signed,
                range: range.clone(),
            });
            if header {
                // `, parameter X = ...` starts a new group; `, X = ...` continues this one
                if self.is_op(",")
                    && matches!(self.peek_at(1), Some(Tok::Ident(s)) if !is_reserved(s))
                    && matches!(self.peek_at(2), Some(Tok::Op("=")))
                {
                    self.pos += 1;
                    continue;
                }
                return Ok(());
            }
            if !self.eat_op(",") {
                return Ok(());
            }
        }
    }

    fn port_list(&mut self, m: &mut Module) -> Result<(), VsimError> {
        let ansi = matches!(self.peek(), Some(Tok::Ident(s)) if matches!(s.as_str(), "input" | "output" | "inout"));
        if !ansi {
            loop {
                if self.is_op(".") {
                    return Err(VsimError::Unsupported("named port expressions".into()));
                }
                m.ports.push(self.ident()?);
                if !self.eat_op(",") {
                    return Ok(());
                }
            }
        }
        let mut dir = Direction::Input;
        let mut kind = NetKind::Wire;
        let mut signed = false;
        let mut range: Option<Range> = None;
        loop {
            let line = self.line();
            let mut new_dir = None;
            if self.eat_kw("input") {
                new_dir = Some(Direction::Input);
            } else if self.eat_kw("output") {
                new_dir = Some(Direction::Output);
            } else if self.eat_kw("inout") {
                new_dir = Some(Direction::Inout);
            }
            if let Some(d) = new_dir {
                dir = d;
                kind = NetKind::Wire;
                signed = false;
                range = None;
                loop {
                    if self.eat_kw("wire") || self.eat_kw("tri") {
                        kind = NetKind::Wire;
                    } else if self.eat_kw("reg") || self.eat_kw("logic") || self.eat_kw("bit") {
                        if self.toks[self.pos - 1].tok == Tok::Ident("reg".into()) {
                            kind = NetKind::Reg;
                        } else if kind != NetKind::Reg {
                            // `output logic` behaves as a variable, `input logic` as a net
                            kind = if dir == Direction::Output {
                                NetKind::Reg
                            } else {
                                NetKind::Wire
                            };
                        }
                    } else if self.eat_kw("integer") {
                        kind = NetKind::Integer;
                        signed = true;
                    } else if self.eat_kw("signed") {
                        signed = true;
                    } else if self.eat_kw("unsigned") {
                    } else {
                        break;
                    }
                }
                if self.is_op("[") {
                    range = Some(self.range()?);
                }
            }
            let name = self.ident()?;
            if self.is_op("[") {
                return Err(VsimError::Unsupported(format!("unpacked port '{name}'")));
            }
            m.ports.push(name.clone());
            m.port_decls.push(PortDecl {
                dir,
                kind,
                signed,
                range: range.clone(),
                name,
                line,
            });
            if !self.eat_op(",") {
                return Ok(());
            }
        }
    }

    fn range(&mut self) -> Result<Range, VsimError> {
        self.expect_op("[")?;
        let msb = self.expr()?;
        self.expect_op(":")?;
        let lsb = self.expr()?;
        self.expect_op("]")?;
        Ok(Range { msb, lsb })
    }

    fn module_item(&mut self, m: &mut Module) -> Result<(), VsimError> {
        let line = self.line();
        let word = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            Some(Tok::Op(";")) => {
                self.pos += 1;
                return Ok(());
            }
            _ => return Err(self.err(format!("unexpected {} in module body", self.peek_desc()))),
        };
        if UNSUPPORTED_ITEMS.contains(&word.as_str()) {
            return Err(VsimError::Unsupported(format!("'{word}' (line {line})")));
        }
        match word.as_str() {
            "input" | "output" | "inout" => {
                self.pos += 1;
                let dir = match word.as_str() {
                    "input" => Direction::Input,
                    "output" => Direction::Output,
                    _ => Direction::Inout,
                };
                let (kind, signed, range) = self.net_type(NetKind::Wire)?;
                loop {
                    let name = self.ident()?;
                    m.port_decls.push(PortDecl {
                        dir,
                        kind,
                        signed,
                        range: range.clone(),
                        name,
                        line,
                    });
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(";")
            }
            "wire" | "reg" | "logic" | "integer" | "tri" | "bit" => {
                self.pos += 1;
                let base = match word.as_str() {
                    "reg" | "logic" | "bit" => NetKind::Reg,
                    "integer" => NetKind::Integer,
                    _ => NetKind::Wire,
                };
                let (kind, signed, range) = self.net_type(base)?;
                let signed = signed || kind == NetKind::Integer;
                loop {
                    let line = self.line();
                    let name = self.ident()?;
                    let array = if self.is_op("[") { Some(self.range()?) } else { None };
                    let init = if self.eat_op("=") { Some(self.expr()?) } else { None };
                    m.items.push(Item::Net(NetDecl {
                        kind,
                        signed,
                        range: range.clone(),
                        name,
                        array,
                        init,
                        line,
                    }));
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(";")
            }
            "parameter" | "localparam" => {
                self.pos += 1;
                self.param_assignments(&mut m.params, word == "localparam", false)?;
                self.expect_op(";")
            }
            "assign" => {
                self.pos += 1;
                if self.is_op("#") {
                    return Err(VsimError::Unsupported(format!("assignment delay (line {line})")));
                }
                loop {
                    let lhs = self.lvalue()?;
                    self.expect_op("=")?;
                    let rhs = self.expr()?;
                    m.items.push(Item::Assign { lhs, rhs, line });
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(";")
            }
            "always" | "always_ff" | "always_comb" => {
                self.pos += 1;
                let sens = if word == "always_comb" {
                    Sensitivity::Comb
                } else {
                    self.sensitivity()?
                };
                let body = self.stmt()?;
                m.items.push(Item::Always { sens, body, line });
                Ok(())
            }
            "initial" => {
                self.pos += 1;
                let body = self.stmt()?;
                m.items.push(Item::Initial { body, line });
                Ok(())
            }
            "function" => {
                self.pos += 1;
                let f = self.function(line)?;
                m.functions.push(f);
                Ok(())
            }
            g if GATES.contains(&g) => {
                self.pos += 1;
                self.gate(g, m, line)
            }
            _ => {
                let inst = self.instances(line)?;
                m.items.extend(inst.into_iter().map(Item::Instance));
                Ok(())
            }
        }
    }

    fn net_type(&mut self, mut kind: NetKind) -> Result<(NetKind, bool, Option<Range>), VsimError> {
        let mut signed = false;
        loop {
            if self.eat_kw("wire") || self.eat_kw("tri") {
            } else if self.eat_kw("reg") || self.eat_kw("logic") || self.eat_kw("bit") {
                kind = NetKind::Reg;
            } else if self.eat_kw("integer") {
                kind = NetKind::Integer;
                signed = true;
            } else if self.eat_kw("signed") {
                signed = true;
            } else if self.eat_kw("unsigned") {
            } else {
                break;
            }
        }
        let range = if self.is_op("[") { Some(self.range()?) } else { None };
        Ok((kind, signed, range))
    }

    fn sensitivity(&mut self) -> Result<Sensitivity, VsimError> {
        if !self.eat_op("@") {
            return Err(VsimError::Unsupported(format!(
                "always block without event control (line {})",
                self.line()
            )));
        }
        if self.eat_op("*") {
            return Ok(Sensitivity::Comb);
        }
        self.expect_op("(")?;
        if self.eat_op("*") {
            self.expect_op(")")?;
            return Ok(Sensitivity::Comb);
        }
        let mut edges = Vec::new();
        let mut plain = false;
        loop {
            if self.eat_kw("posedge") {
                edges.push((Edge::Pos, self.ident()?));
            } else if self.eat_kw("negedge") {
                edges.push((Edge::Neg, self.ident()?));
            } else {
                // plain signal names: treated as a complete combinational list
                self.expr()?;
                plain = true;
            }
            if !(self.eat_kw("or") || self.eat_op(",")) {
                break;
            }
        }
        self.expect_op(")")?;
        if plain && !edges.is_empty() {
            return Err(VsimError::Unsupported("mixed edge and level sensitivity".into()));
        }
        Ok(if edges.is_empty() {
            Sensitivity::Comb
        } else {
            Sensitivity::Edges(edges)
        })
    }

    fn function(&mut self, line: u32) -> Result<Function, VsimError> {
        self.eat_kw("automatic");
        let mut signed = false;
        let mut range = None;
        loop {
            if self.eat_kw("signed") {
                signed = true;
            } else if self.eat_kw("reg") || self.eat_kw("logic") {
            } else if self.eat_kw("integer") {
                signed = true;
                range = Some(int_range());
            } else if self.is_op("[") {
                range = Some(self.range()?);
            } else {
                break;
            }
        }
        let name = self.ident()?;
        let mut f = Function {
            name,
            signed,
            range,
            inputs: Vec::new(),
            locals: Vec::new(),
            body: Stmt::Null,
            line,
        };
        if self.eat_op("(") {
            loop {
                let line = self.line();
                self.expect_kw("input")?;
                let (kind, signed, range) = self.net_type(NetKind::Reg)?;
                loop {
                    let name = self.ident()?;
                    f.inputs.push(NetDecl {
                        kind,
                        signed,
                        range: range.clone(),
                        name,
                        array: None,
                        init: None,
                        line,
                    });
                    if !(self.is_op(",") && matches!(self.peek_at(1), Some(Tok::Ident(s)) if !is_reserved(s))) {
                        break;
                    }
                    self.pos += 1;
                }
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_op(")")?;
        }
        self.expect_op(";")?;
        let mut body = Vec::new();
        loop {
            let line = self.line();
            if self.eat_kw("endfunction") {
                break;
            }
            if self.at_end() {
                return Err(self.err("missing 'endfunction'"));
            }
            let decl = if self.eat_kw("input") {
                Some(true)
            } else if self.is_kw("reg") || self.is_kw("integer") || self.is_kw("logic") {
                Some(false)
            } else {
                None
            };
            match decl {
                Some(is_input) => {
                    let (kind, signed, range) = self.net_type(NetKind::Reg)?;
                    let signed = signed || kind == NetKind::Integer;
                    let range = if kind == NetKind::Integer {
                        Some(int_range())
                    } else {
                        range
                    };
                    loop {
                        let name = self.ident()?;
                        let d = NetDecl {
                            kind,
                            signed,
                            range: range.clone(),
                            name,
                            array: None,
                            init: None,
                            line,
                        };
                        if is_input {
                            f.inputs.push(d);
                        } else {
                            f.locals.push(d);
                        }
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    self.expect_op(";")?;
                }
                None => body.push(self.stmt()?),
            }
        }
        f.body = if body.len() == 1 {
            body.pop().unwrap()
        } else {
            Stmt::Block(body)
        };
        Ok(f)
    }

    fn gate(&mut self, gate: &str, m: &mut Module, line: u32) -> Result<(), VsimError> {
        loop {
            if matches!(self.peek(), Some(Tok::Ident(_))) {
                self.ident()?;
            }
            self.expect_op("(")?;
            let mut terms = vec![self.expr()?];
            while self.eat_op(",") {
                terms.push(self.expr()?);
            }
            self.expect_op(")")?;
            if terms.len() < 2 {
                return Err(self.err("gate needs an output and an input"));
            }
            let out = terms.remove(0);
            let rhs = match gate {
                "not" | "buf" => {
                    if terms.len() != 1 {
                        return Err(VsimError::Unsupported("multi-output buf/not".into()));
                    }
                    let t = terms.pop().unwrap();
                    if gate == "not" {
                        Expr::Unary("~", Box::new(t))
                    } else {
                        t
                    }
                }
                _ => {
                    let op = match gate {
                        "and" | "nand" => "&",
                        "or" | "nor" => "|",
                        _ => "^",
                    };
                    let mut it = terms.into_iter();
                    let first = it.next().unwrap();
                    let e = it.fold(first, |a, b| Expr::Binary(op, Box::new(a), Box::new(b)));
                    if matches!(gate, "nand" | "nor" | "xnor") {
                        Expr::Unary("~", Box::new(e))
                    } else {
                        e
                    }
                }
            };
            m.items.push(Item::Assign { lhs: out, rhs, line });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(";")
    }

    fn instances(&mut self, line: u32) -> Result<Vec<Instance>, VsimError> {
        let module = self.ident()?;
        let mut params = Vec::new();
        if self.eat_op("#") {
            self.expect_op("(")?;
            if !self.is_op(")") {
                loop {
                    if self.eat_op(".") {
                        let name = self.ident()?;
                        self.expect_op("(")?;
                        let e = self.expr()?;
                        self.expect_op(")")?;
                        params.push((Some(name), e));
                    } else {
                        params.push((None, self.expr()?));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
            }
            self.expect_op(")")?;
        }
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            if self.is_op("[") {
                return Err(VsimError::Unsupported(format!("instance array '{name}'")));
            }
            self.expect_op("(")?;
            let mut conns = Vec::new();
            if !self.is_op(")") {
                loop {
                    if self.eat_op(".") {
                        if self.eat_op("*") {
                            return Err(VsimError::Unsupported("'.*' port connections".into()));
                        }
                        let port = self.ident()?;
                        let e = if self.eat_op("(") {
                            let e = if self.is_op(")") { None } else { Some(self.expr()?) };
                            self.expect_op(")")?;
                            e
                        } else {
                            Some(Expr::Ident(port.clone()))
                        };
                        conns.push((Some(port), e));
                    } else if self.is_op(",") {
                        conns.push((None, None));
                    } else {
                        conns.push((None, Some(self.expr()?)));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
            }
            self.expect_op(")")?;
            out.push(Instance {
                module: module.clone(),
                params: params.clone(),
                name,
                conns,
                line,
            });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(";")?;
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, VsimError> {
        let line = self.line();
        if self.eat_op(";") {
            return Ok(Stmt::Null);
        }
        if self.is_op("#") || self.is_op("@") {
            return Err(VsimError::Unsupported(format!(
                "timing control inside a statement (line {line})"
            )));
        }
        if let Some(Tok::System(_)) = self.peek() {
            // $display and friends: no effect on the compared outputs
            self.pos += 1;
            if self.eat_op("(") {
                let mut depth = 1;
                while depth > 0 {
                    match self.peek() {
                        None => return Err(self.err("unterminated system task")),
                        Some(Tok::Op("(")) => depth += 1,
                        Some(Tok::Op(")")) => depth -= 1,
                        _ => {}
                    }
                    self.pos += 1;
                }
            }
            self.expect_op(";")?;
            return Ok(Stmt::Null);
        }
        self.eat_kw("unique");
        self.eat_kw("priority");
        if self.eat_kw("begin") {
            if self.eat_op(":") {
                self.ident()?;
            }
            let mut body = Vec::new();
            while !self.eat_kw("end") {
                if self.at_end() {
                    return Err(self.err("missing 'end'"));
                }
                if self.is_kw("reg") || self.is_kw("integer") {
                    return Err(VsimError::Unsupported(format!(
                        "declaration inside a block (line {})",
                        self.line()
                    )));
                }
                body.push(self.stmt()?);
            }
            if self.eat_op(":") {
                self.ident()?;
            }
            return Ok(Stmt::Block(body));
        }
        if self.eat_kw("if") {
            self.expect_op("(")?;
            let cond = self.expr()?;
            self.expect_op(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If { cond, then, els });
        }
        let case_kind = if self.eat_kw("case") {
            Some(CaseKind::Case)
        } else if self.eat_kw("casez") {
            Some(CaseKind::Casez)
        } else if self.eat_kw("casex") {
            Some(CaseKind::Casex)
        } else {
            None
        };
        if let Some(kind) = case_kind {
            self.expect_op("(")?;
            let subject = self.expr()?;
            self.expect_op(")")?;
            let mut items = Vec::new();
            let mut default = None;
            while !self.eat_kw("endcase") {
                if self.at_end() {
                    return Err(self.err("missing 'endcase'"));
                }
                if self.eat_kw("default") {
                    self.eat_op(":");
                    default = Some(Box::new(self.stmt()?));
                    continue;
                }
                let mut labels = vec![self.expr()?];
                while self.eat_op(",") {
                    labels.push(self.expr()?);
                }
                self.expect_op(":")?;
                items.push((labels, self.stmt()?));
            }
            return Ok(Stmt::Case {
                kind,
                subject,
                items,
                default,
            });
        }
        if self.eat_kw("for") {
            self.expect_op("(")?;
            self.eat_kw("integer");
            self.eat_kw("int");
            let init = Box::new(self.simple_assign(false)?);
            self.expect_op(";")?;
            let cond = self.expr()?;
            self.expect_op(";")?;
            let step = Box::new(self.simple_assign(false)?);
            self.expect_op(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::For { init, cond, step, body });
        }
        let s = self.simple_assign(true)?;
        self.expect_op(";")?;
        let _ = line;
        Ok(s)
    }

    fn simple_assign(&mut self, allow_nb: bool) -> Result<Stmt, VsimError> {
        let line = self.line();
        let lhs = self.lvalue()?;
        let nonblocking = if self.eat_op("=") {
            false
        } else if allow_nb && self.eat_op("<=") {
            true
        } else {
            return Err(self.err(format!("expected assignment, found {}", self.peek_desc())));
        };
        if self.is_op("#") || self.is_op("@") {
            return Err(VsimError::Unsupported(format!("intra-assignment delay (line {line})")));
        }
        let rhs = self.expr()?;
        Ok(Stmt::Assign {
            lhs,
            rhs,
            nonblocking,
            line,
        })
    }

    fn lvalue(&mut self) -> Result<Expr, VsimError> {
        if self.is_op("{") {
            self.pos += 1;
            let mut parts = vec![self.lvalue()?];
            while self.eat_op(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_op("}")?;
            return Ok(Expr::Concat(parts));
        }
        let name = self.ident()?;
        self.selects(Expr::Ident(name))
    }

    fn selects(&mut self, mut base: Expr) -> Result<Expr, VsimError> {
        while self.eat_op("[") {
            let first = self.expr()?;
            if self.eat_op(":") {
                let lsb = self.expr()?;
                self.expect_op("]")?;
                base = Expr::Range(Box::new(base), Box::new(first), Box::new(lsb));
            } else if self.eat_op("+:") {
                let w = self.expr()?;
                self.expect_op("]")?;
                base = Expr::IndexedRange(Box::new(base), Box::new(first), Box::new(w), true);
            } else if self.eat_op("-:") {
                let w = self.expr()?;
                self.expect_op("]")?;
                base = Expr::IndexedRange(Box::new(base), Box::new(first), Box::new(w), false);
            } else {
                self.expect_op("]")?;
                base = Expr::Index(Box::new(base), Box::new(first));
            }
        }
        Ok(base)
    }

    pub fn expr(&mut self) -> Result<Expr, VsimError> {
        let cond = self.binary(0)?;
        if self.eat_op("?") {
            let a = self.expr()?;
            self.expect_op(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, VsimError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            let Some(prec) = binary_prec(op) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            // `**` is right associative, everything else left
            let next = if op == "**" { prec } else { prec + 1 };
            let rhs = self.binary(next)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, VsimError> {
        if let Some(Tok::Op(o)) = self.peek() {
            let o = *o;
            if matches!(o, "+" | "-" | "!" | "~" | "&" | "|" | "^" | "~&" | "~|" | "~^" | "^~") {
                self.pos += 1;
                let e = self.unary()?;
                return Ok(Expr::Unary(o, Box::new(e)));
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, VsimError> {
        let line = self.line();
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Number(n))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Some(Tok::System(name)) => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.eat_op("(") {
                    if !self.is_op(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_op(",") {
                                break;
                            }
                        }
                    }
                    self.expect_op(")")?;
                }
                Ok(Expr::SysCall(name, args))
            }
            Some(Tok::Op("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(")")?;
                Ok(e)
            }
            Some(Tok::Op("{")) => {
                self.pos += 1;
                let first = self.expr()?;
                if self.eat_op("{") {
                    // replication {n{...}}
                    let mut parts = vec![self.expr()?];
                    while self.eat_op(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_op("}")?;
                    self.expect_op("}")?;
                    return Ok(Expr::Repl(Box::new(first), parts));
                }
                let mut parts = vec![first];
                while self.eat_op(",") {
                    parts.push(self.expr()?);
                }
                self.expect_op("}")?;
                Ok(Expr::Concat(parts))
            }
            Some(Tok::Ident(name)) if !is_reserved(&name) => {
                self.pos += 1;
                if self.is_op("(") {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.is_op(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_op(",") {
                                break;
                            }
                        }
                    }
                    self.expect_op(")")?;
                    return Ok(Expr::Call(name, args));
                }
                self.selects(Expr::Ident(name))
            }
            _ => Err(VsimError::parse(
                line,
                format!("expected expression, found {}", self.peek_desc()),
            )),
        }
    }
}

fn int_range() -> Range {
    use crate::lexer::Number;
    use crate::value::Logic;
    let n = |v| {
        Expr::Number(Number {
            value: Logic::new(32, v),
            sized: false,
            signed: true,
        })
    };
    Range { msb: n(31), lsb: n(0) }
}

fn binary_prec(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" | "^~" | "~^" => 4,
        "&" => 5,
        "==" | "!=" | "===" | "!==" => 6,
        "<" | "<=" | ">" | ">=" => 7,
        "<<" | ">>" | "<<<" | ">>>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        "**" => 11,
        _ => return None,
    })
}

pub fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "module"
            | "endmodule"
            | "input"
            | "output"
            | "inout"
            | "wire"
            | "reg"
            | "logic"
            | "integer"
            | "assign"
            | "always"
            | "always_ff"
            | "always_comb"
            | "initial"
            | "begin"
            | "end"
            | "if"
            | "else"
            | "case"
            | "casez"
            | "casex"
            | "endcase"
            | "default"
            | "for"
            | "posedge"
            | "negedge"
            | "or"
            | "parameter"
            | "localparam"
            | "function"
            | "endfunction"
            | "signed"
            | "unsigned"
            | "generate"
            | "endgenerate"
            | "genvar"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ansi_header_with_shared_ranges() {
        let f = parse(
            "module m #(parameter W = 4, D = 2) (input clk, input [W-1:0] a, b, output reg [W-1:0] y);
             always @(posedge clk) y <= a + b;
             endmodule",
        )
        .unwrap();
        let m = &f.modules[0];
        assert_eq!(m.params.len(), 2);
        assert_eq!(m.ports, vec!["clk", "a", "b", "y"]);
        assert!(m.port_decl("b").unwrap().range.is_some());
        assert_eq!(m.port_decl("y").unwrap().kind, NetKind::Reg);
        assert!(matches!(
            m.items[0],
            Item::Always {
                sens: Sensitivity::Edges(_),
                ..
            }
        ));
    }

    #[test]
    fn non_ansi_ports_and_instances() {
        let f = parse(
            "module top(a, y); input [3:0] a; output [3:0] y; wire [3:0] t;
               sub #(.W(4)) u0 (.x(a), .z(t)), u1 (t, y);
             endmodule
             module sub(x, z); parameter W = 1; input [W-1:0] x; output [W-1:0] z; assign z = ~x; endmodule",
        )
        .unwrap();
        let top = f.module("top").unwrap();
        let insts: Vec<_> = top
            .items
            .iter()
            .filter_map(|i| match i {
                Item::Instance(inst) => Some(inst),
                _ => None,
            })
            .collect();
        assert_eq!(insts.len(), 2);
        assert_eq!(insts[1].params.len(), 1);
    }

    #[test]
    fn precedence() {
        let f = parse("module m(input [3:0] a, b, output y); assign y = a + b << 1 == 4 & a[0]; endmodule").unwrap();
        let Item::Assign { rhs, .. } = &f.modules[0].items[0] else {
            panic!()
        };
        // (((a + b) << 1) == 4) & a[0]
        let Expr::Binary("&", l, _) = rhs else {
            panic!("{rhs:?}")
        };
        assert!(matches!(**l, Expr::Binary("==", _, _)));
    }

    #[test]
    fn indexed_part_selects() {
        let f = parse("module m(input [7:0] a, output [3:0] y, output [3:0] z); assign y = a[4 +: 4]; assign z = a[7 -: 4]; endmodule").unwrap();
        let Item::Assign { rhs, .. } = &f.modules[0].items[1] else {
            panic!()
        };
        assert!(matches!(rhs, Expr::IndexedRange(_, _, _, false)));
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(parse("module m(input a, output y) assign y = a; endmodule").is_err());
        assert!(parse("module m(input a, output y); assign y = ; endmodule").is_err());
        assert!(parse("module m(input a, output y); assign y = a;").is_err());
    }

    #[test]
    fn generate_is_unsupported() {
        let e = parse("module m; generate endgenerate endmodule").unwrap_err();
        assert!(matches!(e, VsimError::Unsupported(_)));
    }
}
