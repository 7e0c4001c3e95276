// SPDX-License-Identifier: Apache-2.0

use crate::lexer::Number;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Debug, Clone)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone)]
pub struct PortDecl {
    pub dir: Direction,
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub name: String,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct ParamDecl {
    pub name: String,
    pub value: Expr,
    pub local: bool,
    pub signed: bool,
    pub range: Option<Range>,
}

#[derive(Debug, Clone)]
pub struct NetDecl {
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub name: String,
    /// Unpacked dimension, making this a memory.
    pub array: Option<Range>,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Debug, Clone)]
pub enum Sensitivity {
    /// `@*`, `@(*)`, `always_comb`, or a plain signal list.
    Comb,
    Edges(Vec<(Edge, String)>),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub module: String,
    pub params: Vec<(Option<String>, Expr)>,
    pub name: String,
    pub conns: Vec<(Option<String>, Option<Expr>)>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub signed: bool,
    pub range: Option<Range>,
    pub inputs: Vec<NetDecl>,
    pub locals: Vec<NetDecl>,
    pub body: Stmt,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum Item {
    Net(NetDecl),
    Assign { lhs: Expr, rhs: Expr, line: u32 },
    Always { sens: Sensitivity, body: Stmt, line: u32 },
    Initial { body: Stmt, line: u32 },
    Instance(Instance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Block(Vec<Stmt>),
    Assign {
        lhs: Expr,
        rhs: Expr,
        nonblocking: bool,
        line: u32,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        subject: Expr,
        items: Vec<(Vec<Expr>, Stmt)>,
        default: Option<Box<Stmt>>,
    },
    For {
        init: Box<Stmt>,
        cond: Expr,
        step: Box<Stmt>,
        body: Box<Stmt>,
    },
    Null,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Number(Number),
    Str(String),
    Ident(String),
    Index(Box<Expr>, Box<Expr>),
    Range(Box<Expr>, Box<Expr>, Box<Expr>),
    /// base, start, width, ascending (`+:`)
    IndexedRange(Box<Expr>, Box<Expr>, Box<Expr>, bool),
    Concat(Vec<Expr>),
    Repl(Box<Expr>, Vec<Expr>),
    Unary(&'static str, Box<Expr>),
    Binary(&'static str, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    SysCall(String, Vec<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone)]
pub struct Module {
    pub name: String,
    pub params: Vec<ParamDecl>,
    /// Port names in header order.
    pub ports: Vec<String>,
    pub port_decls: Vec<PortDecl>,
    pub functions: Vec<Function>,
    pub items: Vec<Item>,
    pub line: u32,
}

impl Module {
    pub fn port_decl(&self, name: &str) -> Option<&PortDecl> {
        self.port_decls.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SourceFile {
    pub modules: Vec<Module>,
}

impl SourceFile {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }
}
