// SPDX-License-Identifier: Apache-2.0

//! Flattens a module hierarchy into nets, memories and processes.
//!
//! Every expression is annotated with its self-determined width and
//! signedness so evaluation can apply the Verilog sizing rules without
//! re-walking the tree.

use std::collections::HashMap;

use crate::ast::{self, CaseKind, Direction, Edge, Expr, Item, Module, NetKind, Sensitivity, SourceFile, Stmt};
use crate::value::{Logic, MAX_WIDTH};
use crate::VsimError;

pub type NetId = usize;
pub type MemId = usize;
pub type ProcId = usize;
pub type FuncId = usize;

#[derive(Debug, Clone)]
pub struct NetInfo {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub msb: i64,
    pub lsb: i64,
    /// Function arguments and locals: writes never wake other processes.
    pub silent: bool,
}

impl NetInfo {
    /// Maps a declared bit index to a zero-based bit offset.
    fn offset(&self, idx: i64) -> i64 {
        if self.msb >= self.lsb {
            idx - self.lsb
        } else {
            self.lsb - idx
        }
    }

    fn ascending(&self) -> bool {
        self.msb < self.lsb
    }
}

#[derive(Debug, Clone)]
pub struct MemInfo {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub first: i64,
    pub depth: usize,
    pub word_msb: i64,
    pub word_lsb: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Plus,
    Neg,
    Not,
    LogNot,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    And,
    Or,
    Xor,
    Xnor,
    Shl,
    Shr,
    AShl,
    AShr,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    Lt,
    Le,
    Gt,
    Ge,
    LogAnd,
    LogOr,
}

/// Bit offset `scale * index + bias`; a missing index means a constant offset.
#[derive(Debug, Clone)]
pub struct Offset {
    pub index: Option<Box<Ex>>,
    pub scale: i64,
    pub bias: i64,
}

#[derive(Debug, Clone)]
pub enum ExKind {
    Const(Logic),
    Net(NetId),
    Select { base: Box<Ex>, offset: Offset },
    MemRead { mem: MemId, addr: Box<Ex> },
    Unary(UnOp, Box<Ex>),
    Binary(BinOp, Box<Ex>, Box<Ex>),
    Ternary(Box<Ex>, Box<Ex>, Box<Ex>),
    Concat(Vec<Ex>),
    Repl(u32, Vec<Ex>),
    Cast(Box<Ex>),
    Call(FuncId, Vec<Ex>),
}

#[derive(Debug, Clone)]
pub struct Ex {
    pub kind: ExKind,
    pub width: u32,
    pub signed: bool,
}

#[derive(Debug, Clone)]
pub enum LVal {
    Net {
        net: NetId,
        offset: Offset,
        width: u32,
    },
    Mem {
        mem: MemId,
        addr: Ex,
        offset: Offset,
        width: u32,
    },
    Concat(Vec<LVal>),
}

impl LVal {
    pub fn width(&self) -> u32 {
        match self {
            LVal::Net { width, .. } | LVal::Mem { width, .. } => *width,
            LVal::Concat(parts) => parts.iter().map(LVal::width).sum(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum IStmt {
    Block(Vec<IStmt>),
    Assign {
        lhs: LVal,
        rhs: Ex,
        nonblocking: bool,
    },
    If(Ex, Box<IStmt>, Option<Box<IStmt>>),
    Case {
        kind: CaseKind,
        subject: Ex,
        items: Vec<(Vec<Ex>, IStmt)>,
        default: Option<Box<IStmt>>,
        width: u32,
        signed: bool,
    },
    For {
        init: Box<IStmt>,
        cond: Ex,
        step: Box<IStmt>,
        body: Box<IStmt>,
    },
    Nop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcKind {
    Comb,
    Edge(Vec<(NetId, Edge)>),
    Initial,
}

#[derive(Debug, Clone)]
pub struct Process {
    pub kind: ProcKind,
    pub body: IStmt,
    pub name: String,
    /// Continuous assignments re-evaluate on their own output changes;
    /// `always` blocks do not observe writes made while they run.
    pub self_trigger: bool,
}

#[derive(Debug, Clone)]
pub struct FuncInfo {
    pub name: String,
    pub ret: NetId,
    pub inputs: Vec<NetId>,
    pub body: IStmt,
}

#[derive(Debug, Clone)]
pub struct TopPort {
    pub name: String,
    pub dir: Direction,
    pub net: NetId,
    pub width: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Design {
    pub top: String,
    pub nets: Vec<NetInfo>,
    pub mems: Vec<MemInfo>,
    pub procs: Vec<Process>,
    pub funcs: Vec<FuncInfo>,
    pub ports: Vec<TopPort>,
    pub net_readers: Vec<Vec<ProcId>>,
    pub mem_readers: Vec<Vec<ProcId>>,
    pub edge_watchers: Vec<Vec<(ProcId, Edge)>>,
}

impl Design {
    pub fn port(&self, name: &str) -> Option<&TopPort> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone)]
enum Sym {
    Net(NetId),
    Mem(MemId),
    Param(Logic, bool),
    Func(FuncId),
}

type Scope = HashMap<String, Sym>;

const MAX_DEPTH: usize = 64;

pub fn elaborate(file: &SourceFile, top: &str) -> Result<Design, VsimError> {
    let module = file
        .module(top)
        .ok_or_else(|| VsimError::Elab(format!("top module '{top}' not found")))?;
    let mut el = Elaborator {
        file,
        design: Design {
            top: top.to_string(),
            ..Design::default()
        },
    };
    let scope = el.instantiate(module, "", &[], 0)?;
    for decl in &module.port_decls {
        let Some(Sym::Net(net)) = scope.get(&decl.name) else {
            return Err(VsimError::Elab(format!("port '{}' has no net", decl.name)));
        };
        el.design.ports.push(TopPort {
            name: decl.name.clone(),
            dir: decl.dir,
            net: *net,
            width: el.design.nets[*net].width,
        });
    }
    // header order
    let order: HashMap<&str, usize> = module.ports.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    el.design
        .ports
        .sort_by_key(|p| order.get(p.name.as_str()).copied().unwrap_or(usize::MAX));
    el.index_sensitivity();
    Ok(el.design)
}

struct Elaborator<'a> {
    file: &'a SourceFile,
    design: Design,
}

/// Merged view of a name declared as a port and/or a net.
struct Decl<'m> {
    kind: NetKind,
    signed: bool,
    range: Option<&'m ast::Range>,
    array: Option<&'m ast::Range>,
    dir: Option<Direction>,
}

impl<'a> Elaborator<'a> {
    fn instantiate(
        &mut self,
        m: &Module,
        prefix: &str,
        overrides: &[(Option<String>, Logic, bool)],
        depth: usize,
    ) -> Result<Scope, VsimError> {
        if depth > MAX_DEPTH {
            return Err(VsimError::Elab(format!(
                "instantiation depth exceeded at '{}' (recursive hierarchy?)",
                m.name
            )));
        }
        let mut scope = Scope::new();

        // parameters, with overrides applied to the non-local ones in order
        let mut positional = overrides.iter().filter(|o| o.0.is_none());
        for p in &m.params {
            if scope.contains_key(&p.name) {
                return Err(VsimError::Elab(format!("duplicate parameter '{}'", p.name)));
            }
            let mut value = None;
            if !p.local {
                if let Some(o) = overrides.iter().find(|o| o.0.as_deref() == Some(&p.name)) {
                    value = Some((o.1, o.2));
                } else if let Some(o) = positional.next() {
                    value = Some((o.1, o.2));
                }
            }
            let (mut v, mut signed) = match value {
                Some(v) => v,
                None => {
                    let e = self.expr(&scope, &p.value, true)?;
                    (const_eval(&e)?, e.signed)
                }
            };
            if let Some(r) = &p.range {
                let (msb, lsb) = self.const_range(&scope, r)?;
                let w = ((msb - lsb).unsigned_abs() + 1) as u32;
                v = v.resize(w, signed);
                signed = p.signed;
            } else if p.signed {
                signed = true;
            }
            scope.insert(p.name.clone(), Sym::Param(v, signed));
        }
        for o in overrides {
            if let Some(name) = &o.0 {
                if !m.params.iter().any(|p| &p.name == name && !p.local) {
                    return Err(VsimError::Elab(format!(
                        "module '{}' has no parameter '{name}'",
                        m.name
                    )));
                }
            }
        }

        // merge port declarations with body declarations of the same name
        let mut decls: Vec<(String, Decl)> = Vec::new();
        for pd in &m.port_decls {
            if decls.iter().any(|(n, _)| n == &pd.name) {
                return Err(VsimError::Elab(format!("port '{}' declared twice", pd.name)));
            }
            decls.push((
                pd.name.clone(),
                Decl {
                    kind: pd.kind,
                    signed: pd.signed,
                    range: pd.range.as_ref(),
                    array: None,
                    dir: Some(pd.dir),
                },
            ));
        }
        for name in &m.ports {
            if !decls.iter().any(|(n, _)| n == name) {
                return Err(VsimError::Elab(format!("port '{name}' has no direction")));
            }
        }
        if m.ports.len() != m.port_decls.len() {
            for pd in &m.port_decls {
                if !m.ports.contains(&pd.name) {
                    return Err(VsimError::Elab(format!(
                        "'{}' declared as a port but missing from the port list",
                        pd.name
                    )));
                }
            }
        }
        for item in &m.items {
            if let Item::Net(nd) = item {
                if let Some((_, d)) = decls.iter_mut().find(|(n, _)| n == &nd.name) {
                    if d.dir.is_none() || d.array.is_some() || nd.array.is_some() {
                        return Err(VsimError::Elab(format!("'{}' declared twice", nd.name)));
                    }
                    if nd.kind != NetKind::Wire {
                        d.kind = nd.kind;
                    }
                    d.signed |= nd.signed;
                    if d.range.is_none() {
                        d.range = nd.range.as_ref();
                    }
                } else {
                    decls.push((
                        nd.name.clone(),
                        Decl {
                            kind: nd.kind,
                            signed: nd.signed,
                            range: nd.range.as_ref(),
                            array: nd.array.as_ref(),
                            dir: None,
                        },
                    ));
                }
            }
        }
        for (name, d) in &decls {
            if scope.contains_key(name) {
                return Err(VsimError::Elab(format!("'{name}' clashes with a parameter")));
            }
            if d.dir == Some(Direction::Inout) {
                return Err(VsimError::Unsupported(format!("inout port '{name}'")));
            }
            let (msb, lsb) = match (d.kind, d.range) {
                (NetKind::Integer, _) => (31, 0),
                (_, Some(r)) => self.const_range(&scope, r)?,
                (_, None) => (0, 0),
            };
            let width = ((msb - lsb).unsigned_abs() + 1) as u32;
            if width > MAX_WIDTH {
                return Err(VsimError::Unsupported(format!(
                    "'{name}' is {width} bits wide (limit {MAX_WIDTH})"
                )));
            }
            let signed = d.signed || d.kind == NetKind::Integer;
            let full = format!("{prefix}{name}");
            if let Some(arr) = d.array {
                let (a, b) = self.const_range(&scope, arr)?;
                let depth = (a - b).unsigned_abs() as usize + 1;
                if depth > 1 << 20 {
                    return Err(VsimError::Unsupported(format!("memory '{name}' too deep")));
                }
                self.design.mems.push(MemInfo {
                    name: full,
                    width,
                    signed,
                    first: a.min(b),
                    depth,
                    word_msb: msb,
                    word_lsb: lsb,
                });
                scope.insert(name.clone(), Sym::Mem(self.design.mems.len() - 1));
            } else {
                let id = self.new_net(full, width, signed, msb, lsb, false);
                scope.insert(name.clone(), Sym::Net(id));
            }
        }

        for f in &m.functions {
            self.function(&mut scope, f, prefix)?;
        }

        for item in &m.items {
            match item {
                Item::Net(nd) => {
                    if let Some(init) = &nd.init {
                        let lhs = self.lvalue(&scope, &Expr::Ident(nd.name.clone()))?;
                        let rhs = self.expr(&scope, init, false)?;
                        let name = format!("{prefix}{}", nd.name);
                        if nd.kind == NetKind::Wire {
                            self.push_continuous(lhs, rhs, name);
                        } else {
                            self.push_proc(ProcKind::Initial, assign(lhs, rhs, false), name);
                        }
                    }
                }
                Item::Assign { lhs, rhs, line } => {
                    let lhs = self.lvalue(&scope, lhs)?;
                    let rhs = self.expr(&scope, rhs, false)?;
                    self.push_continuous(lhs, rhs, format!("{prefix}assign@{line}"));
                }
                Item::Always { sens, body, line } => {
                    let kind = match sens {
                        Sensitivity::Comb => ProcKind::Comb,
                        Sensitivity::Edges(edges) => {
                            let mut out = Vec::new();
                            for (e, name) in edges {
                                match scope.get(name) {
                                    Some(Sym::Net(id)) => out.push((*id, *e)),
                                    _ => {
                                        return Err(VsimError::Elab(format!(
                                            "edge on unknown net '{name}' (line {line})"
                                        )))
                                    }
                                }
                            }
                            ProcKind::Edge(out)
                        }
                    };
                    let body = self.stmt(&scope, body)?;
                    self.push_proc(kind, body, format!("{prefix}always@{line}"));
                }
                Item::Initial { body, line } => {
                    let body = self.stmt(&scope, body)?;
                    self.push_proc(ProcKind::Initial, body, format!("{prefix}initial@{line}"));
                }
                Item::Instance(inst) => self.instance(&mut scope, inst, prefix, depth)?,
            }
        }
        Ok(scope)
    }

    fn new_net(&mut self, name: String, width: u32, signed: bool, msb: i64, lsb: i64, silent: bool) -> NetId {
        self.design.nets.push(NetInfo {
            name,
            width,
            signed,
            msb,
            lsb,
            silent,
        });
        self.design.nets.len() - 1
    }

    fn push_proc(&mut self, kind: ProcKind, body: IStmt, name: String) {
        self.design.procs.push(Process {
            kind,
            body,
            name,
            self_trigger: false,
        });
    }

    fn push_continuous(&mut self, lhs: LVal, rhs: Ex, name: String) {
        self.design.procs.push(Process {
            kind: ProcKind::Comb,
            body: assign(lhs, rhs, false),
            name,
            self_trigger: true,
        });
    }

    fn function(&mut self, scope: &mut Scope, f: &ast::Function, prefix: &str) -> Result<(), VsimError> {
        let (msb, lsb) = match &f.range {
            Some(r) => self.const_range(scope, r)?,
            None => (0, 0),
        };
        let width = ((msb - lsb).unsigned_abs() + 1) as u32;
        let ret = self.new_net(format!("{prefix}{}", f.name), width, f.signed, msb, lsb, true);
        // the body sees its own name as the return variable and its args as locals
        let mut local = scope.clone();
        local.insert(f.name.clone(), Sym::Net(ret));
        let mut inputs = Vec::new();
        for d in f.inputs.iter().chain(&f.locals) {
            let (msb, lsb) = match &d.range {
                Some(r) => self.const_range(scope, r)?,
                None => (0, 0),
            };
            let width = ((msb - lsb).unsigned_abs() + 1) as u32;
            let id = self.new_net(
                format!("{prefix}{}.{}", f.name, d.name),
                width,
                d.signed,
                msb,
                lsb,
                true,
            );
            local.insert(d.name.clone(), Sym::Net(id));
            if f.inputs.iter().any(|i| i.name == d.name) {
                inputs.push(id);
            }
        }
        let fid = self.design.funcs.len();
        // reserve the id so recursive calls resolve, then reject them at call time
        self.design.funcs.push(FuncInfo {
            name: f.name.clone(),
            ret,
            inputs: inputs.clone(),
            body: IStmt::Nop,
        });
        let body = self.stmt(&local, &f.body)?;
        if contains_call(&body, fid) {
            return Err(VsimError::Unsupported(format!("recursive function '{}'", f.name)));
        }
        self.design.funcs[fid].body = body;
        scope.insert(f.name.clone(), Sym::Func(fid));
        Ok(())
    }

    fn instance(
        &mut self,
        scope: &mut Scope,
        inst: &ast::Instance,
        prefix: &str,
        depth: usize,
    ) -> Result<(), VsimError> {
        let child = self.file.module(&inst.module).ok_or_else(|| {
            VsimError::Elab(format!(
                "unresolved module '{}' instantiated as '{}' (line {})",
                inst.module, inst.name, inst.line
            ))
        })?;
        let mut overrides = Vec::new();
        for (name, e) in &inst.params {
            let ex = self.expr(scope, e, true)?;
            overrides.push((name.clone(), const_eval(&ex)?, ex.signed));
        }
        let child_prefix = format!("{prefix}{}.", inst.name);
        let child_scope = self.instantiate(child, &child_prefix, &overrides, depth + 1)?;
        let named = inst.conns.iter().any(|c| c.0.is_some());
        if named && inst.conns.iter().any(|c| c.0.is_none() && c.1.is_some()) {
            return Err(VsimError::Elab(format!(
                "mixed port connection styles on '{}'",
                inst.name
            )));
        }
        if !named && inst.conns.len() > child.ports.len() {
            return Err(VsimError::Elab(format!("too many connections on '{}'", inst.name)));
        }
        for (i, (pname, conn)) in inst.conns.iter().enumerate() {
            let port_name = match pname {
                Some(n) => n.clone(),
                None => child.ports[i].clone(),
            };
            let Some(decl) = child.port_decl(&port_name) else {
                return Err(VsimError::Elab(format!(
                    "module '{}' has no port '{port_name}'",
                    child.name
                )));
            };
            let Some(conn) = conn else { continue };
            let Some(Sym::Net(child_net)) = child_scope.get(&port_name).cloned() else {
                return Err(VsimError::Elab(format!("port '{port_name}' is not a net")));
            };
            let child_ex = self.net_ex(child_net);
            let child_lv = LVal::Net {
                net: child_net,
                offset: Offset {
                    index: None,
                    scale: 1,
                    bias: 0,
                },
                width: self.design.nets[child_net].width,
            };
            let name = format!("{prefix}{}.{port_name}", inst.name);
            match decl.dir {
                Direction::Input => {
                    let rhs = self.expr_implicit(scope, conn, prefix)?;
                    self.push_continuous(child_lv, rhs, name);
                }
                Direction::Output => {
                    self.declare_implicit(scope, conn, prefix);
                    let lhs = self.lvalue(scope, conn)?;
                    self.push_continuous(lhs, child_ex, name);
                }
                Direction::Inout => return Err(VsimError::Unsupported("inout connection".into())),
            }
        }
        Ok(())
    }

    /// Undeclared identifiers in port connections become implicit one-bit wires.
    fn declare_implicit(&mut self, scope: &mut Scope, e: &Expr, prefix: &str) {
        if let Expr::Ident(name) = e {
            if !scope.contains_key(name) {
                let id = self.new_net(format!("{prefix}{name}"), 1, false, 0, 0, false);
                scope.insert(name.clone(), Sym::Net(id));
            }
        }
    }

    fn expr_implicit(&mut self, scope: &mut Scope, e: &Expr, prefix: &str) -> Result<Ex, VsimError> {
        self.declare_implicit(scope, e, prefix);
        self.expr(scope, e, false)
    }

    fn const_range(&self, scope: &Scope, r: &ast::Range) -> Result<(i64, i64), VsimError> {
        Ok((self.const_int(scope, &r.msb)?, self.const_int(scope, &r.lsb)?))
    }

    fn const_int(&self, scope: &Scope, e: &Expr) -> Result<i64, VsimError> {
        let ex = self.expr(scope, e, true)?;
        let v = const_eval(&ex)?;
        let i = if ex.signed {
            v.to_i128()
        } else {
            v.to_u128().map(|u| u as i128)
        };
        i.and_then(|i| i64::try_from(i).ok())
            .ok_or_else(|| VsimError::Elab("constant expression is unknown or out of range".into()))
    }

    fn net_ex(&self, id: NetId) -> Ex {
        let n = &self.design.nets[id];
        Ex {
            kind: ExKind::Net(id),
            width: n.width,
            signed: n.signed,
        }
    }

    fn expr(&self, scope: &Scope, e: &Expr, constant: bool) -> Result<Ex, VsimError> {
        Ok(match e {
            Expr::Number(n) => Ex {
                kind: ExKind::Const(n.value),
                width: n.value.width(),
                signed: n.signed,
            },
            Expr::Str(_) => return Err(VsimError::Unsupported("string in expression".into())),
            Expr::Ident(name) => match scope.get(name) {
                Some(Sym::Param(v, s)) => Ex {
                    kind: ExKind::Const(*v),
                    width: v.width(),
                    signed: *s,
                },
                Some(Sym::Net(id)) if !constant => self.net_ex(*id),
                Some(Sym::Net(_)) => return Err(VsimError::Elab(format!("'{name}' is not a constant"))),
                Some(Sym::Mem(_)) => return Err(VsimError::Elab(format!("memory '{name}' used without an index"))),
                Some(Sym::Func(_)) => return Err(VsimError::Elab(format!("function '{name}' used as a value"))),
                None => return Err(VsimError::Elab(format!("undeclared identifier '{name}'"))),
            },
            Expr::Index(base, idx) => {
                if let Expr::Ident(name) = &**base {
                    if let Some(Sym::Mem(mem)) = scope.get(name) {
                        if constant {
                            return Err(VsimError::Elab(format!("'{name}' is not a constant")));
                        }
                        let info = &self.design.mems[*mem];
                        let addr = self.expr(scope, idx, false)?;
                        return Ok(Ex {
                            kind: ExKind::MemRead {
                                mem: *mem,
                                addr: Box::new(addr),
                            },
                            width: info.width,
                            signed: info.signed,
                        });
                    }
                }
                let b = self.expr(scope, base, constant)?;
                let (offset, width) = self.bit_select(scope, &b, idx, constant)?;
                Ex {
                    kind: ExKind::Select {
                        base: Box::new(b),
                        offset,
                    },
                    width,
                    signed: false,
                }
            }
            Expr::Range(base, msb, lsb) => {
                let b = self.expr(scope, base, constant)?;
                let (offset, width) = self.part_select(scope, &b, msb, lsb)?;
                Ex {
                    kind: ExKind::Select {
                        base: Box::new(b),
                        offset,
                    },
                    width,
                    signed: false,
                }
            }
            Expr::IndexedRange(base, start, w, up) => {
                let b = self.expr(scope, base, constant)?;
                let (offset, width) = self.indexed_select(scope, &b, start, w, *up, constant)?;
                Ex {
                    kind: ExKind::Select {
                        base: Box::new(b),
                        offset,
                    },
                    width,
                    signed: false,
                }
            }
            Expr::Concat(parts) => {
                let parts = parts
                    .iter()
                    .map(|p| self.expr(scope, p, constant))
                    .collect::<Result<Vec<_>, _>>()?;
                let width: u32 = parts.iter().map(|p| p.width).sum();
                check_width(width)?;
                Ex {
                    kind: ExKind::Concat(parts),
                    width,
                    signed: false,
                }
            }
            Expr::Repl(count, parts) => {
                let n = self.const_int(scope, count)?;
                if n <= 0 {
                    return Err(VsimError::Unsupported("non-positive replication".into()));
                }
                let parts = parts
                    .iter()
                    .map(|p| self.expr(scope, p, constant))
                    .collect::<Result<Vec<_>, _>>()?;
                let inner: u32 = parts.iter().map(|p| p.width).sum();
                let width = inner as i64 * n;
                check_width(width.min(u32::MAX as i64) as u32)?;
                Ex {
                    kind: ExKind::Repl(n as u32, parts),
                    width: width as u32,
                    signed: false,
                }
            }
            Expr::Unary(op, a) => {
                let a = self.expr(scope, a, constant)?;
                let op = match *op {
                    "+" => UnOp::Plus,
                    "-" => UnOp::Neg,
                    "~" => UnOp::Not,
                    "!" => UnOp::LogNot,
                    "&" => UnOp::RedAnd,
                    "|" => UnOp::RedOr,
                    "^" => UnOp::RedXor,
                    "~&" => UnOp::RedNand,
                    "~|" => UnOp::RedNor,
                    _ => UnOp::RedXnor,
                };
                let (width, signed) = match op {
                    UnOp::Plus | UnOp::Neg | UnOp::Not => (a.width, a.signed),
                    _ => (1, false),
                };
                Ex {
                    kind: ExKind::Unary(op, Box::new(a)),
                    width,
                    signed,
                }
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(scope, a, constant)?;
                let b = self.expr(scope, b, constant)?;
                let op = match *op {
                    "+" => BinOp::Add,
                    "-" => BinOp::Sub,
                    "*" => BinOp::Mul,
                    "/" => BinOp::Div,
                    "%" => BinOp::Mod,
                    "**" => BinOp::Pow,
                    "&" => BinOp::And,
                    "|" => BinOp::Or,
                    "^" => BinOp::Xor,
                    "~^" | "^~" => BinOp::Xnor,
                    "<<" => BinOp::Shl,
                    ">>" => BinOp::Shr,
                    "<<<" => BinOp::AShl,
                    ">>>" => BinOp::AShr,
                    "==" => BinOp::Eq,
                    "!=" => BinOp::Ne,
                    "===" => BinOp::CaseEq,
                    "!==" => BinOp::CaseNe,
                    "<" => BinOp::Lt,
                    "<=" => BinOp::Le,
                    ">" => BinOp::Gt,
                    ">=" => BinOp::Ge,
                    "&&" => BinOp::LogAnd,
                    _ => BinOp::LogOr,
                };
                use BinOp::*;
                let (width, signed) = match op {
                    Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => (a.width.max(b.width), a.signed && b.signed),
                    Pow => (a.width, a.signed && b.signed),
                    Shl | Shr | AShl | AShr => (a.width, a.signed),
                    _ => (1, false),
                };
                Ex {
                    kind: ExKind::Binary(op, Box::new(a), Box::new(b)),
                    width,
                    signed,
                }
            }
            Expr::Ternary(c, a, b) => {
                let c = self.expr(scope, c, constant)?;
                let a = self.expr(scope, a, constant)?;
                let b = self.expr(scope, b, constant)?;
                let width = a.width.max(b.width);
                let signed = a.signed && b.signed;
                Ex {
                    kind: ExKind::Ternary(Box::new(c), Box::new(a), Box::new(b)),
                    width,
                    signed,
                }
            }
            Expr::SysCall(name, args) => match (name.as_str(), args.as_slice()) {
                ("signed", [a]) | ("unsigned", [a]) => {
                    let a = self.expr(scope, a, constant)?;
                    let width = a.width;
                    Ex {
                        kind: ExKind::Cast(Box::new(a)),
                        width,
                        signed: name == "signed",
                    }
                }
                ("clog2", [a]) => {
                    let a = self.expr(scope, a, true)?;
                    let v = const_eval(&a)?
                        .to_u128()
                        .ok_or_else(|| VsimError::Elab("$clog2 of unknown value".into()))?;
                    let r = if v <= 1 { 0 } else { 128 - (v - 1).leading_zeros() };
                    Ex {
                        kind: ExKind::Const(Logic::new(32, r as u128)),
                        width: 32,
                        signed: true,
                    }
                }
                _ => return Err(VsimError::Unsupported(format!("system function ${name}"))),
            },
            Expr::Call(name, args) => {
                if constant {
                    return Err(VsimError::Unsupported(format!(
                        "function '{name}' in constant expression"
                    )));
                }
                let Some(Sym::Func(fid)) = scope.get(name) else {
                    return Err(VsimError::Elab(format!("unknown function '{name}'")));
                };
                let f = &self.design.funcs[*fid];
                if f.inputs.len() != args.len() {
                    return Err(VsimError::Elab(format!(
                        "function '{name}' expects {} arguments",
                        f.inputs.len()
                    )));
                }
                let ret = &self.design.nets[f.ret];
                let (width, signed) = (ret.width, ret.signed);
                let args = args
                    .iter()
                    .map(|a| self.expr(scope, a, false))
                    .collect::<Result<Vec<_>, _>>()?;
                Ex {
                    kind: ExKind::Call(*fid, args),
                    width,
                    signed,
                }
            }
        })
    }

    /// Declared index geometry of a select base: the net when the base is a
    /// plain net, otherwise a zero-based descending vector.
    fn base_geometry(&self, base: &Ex) -> (i64, i64) {
        match &base.kind {
            ExKind::Net(id) => {
                let n = &self.design.nets[*id];
                (n.msb, n.lsb)
            }
            ExKind::MemRead { mem, .. } => {
                let m = &self.design.mems[*mem];
                (m.word_msb, m.word_lsb)
            }
            _ => (base.width as i64 - 1, 0),
        }
    }

    fn geometry_info(&self, base: &Ex) -> NetInfo {
        let (msb, lsb) = self.base_geometry(base);
        NetInfo {
            name: String::new(),
            width: base.width,
            signed: false,
            msb,
            lsb,
            silent: false,
        }
    }

    fn bit_select(&self, scope: &Scope, base: &Ex, idx: &Expr, constant: bool) -> Result<(Offset, u32), VsimError> {
        let g = self.geometry_info(base);
        let idx = self.expr(scope, idx, constant)?;
        Ok((dynamic_offset(&g, idx, 0), 1))
    }

    fn part_select(&self, scope: &Scope, base: &Ex, msb: &Expr, lsb: &Expr) -> Result<(Offset, u32), VsimError> {
        let g = self.geometry_info(base);
        let a = self.const_int(scope, msb)?;
        let b = self.const_int(scope, lsb)?;
        let width = (a - b).unsigned_abs() as u32 + 1;
        check_width(width)?;
        let lo = g.offset(a).min(g.offset(b));
        Ok((
            Offset {
                index: None,
                scale: 1,
                bias: lo,
            },
            width,
        ))
    }

    fn indexed_select(
        &self,
        scope: &Scope,
        base: &Ex,
        start: &Expr,
        w: &Expr,
        up: bool,
        constant: bool,
    ) -> Result<(Offset, u32), VsimError> {
        let g = self.geometry_info(base);
        let width = self.const_int(scope, w)?;
        if width <= 0 {
            return Err(VsimError::Elab("indexed part-select width must be positive".into()));
        }
        let width = width as u32;
        check_width(width)?;
        let start = self.expr(scope, start, constant)?;
        // lowest selected index relative to `start`
        let adj = match (up, g.ascending()) {
            (true, false) => 0,
            (true, true) => width as i64 - 1,
            (false, false) => -(width as i64 - 1),
            (false, true) => 0,
        };
        Ok((dynamic_offset(&g, start, adj), width))
    }

    fn lvalue(&self, scope: &Scope, e: &Expr) -> Result<LVal, VsimError> {
        let full = |id: NetId, n: &NetInfo| LVal::Net {
            net: id,
            offset: Offset {
                index: None,
                scale: 1,
                bias: 0,
            },
            width: n.width,
        };
        match e {
            Expr::Ident(name) => match scope.get(name) {
                Some(Sym::Net(id)) => Ok(full(*id, &self.design.nets[*id])),
                _ => Err(VsimError::Elab(format!("cannot assign to '{name}'"))),
            },
            Expr::Concat(parts) => Ok(LVal::Concat(
                parts.iter().map(|p| self.lvalue(scope, p)).collect::<Result<_, _>>()?,
            )),
            Expr::Index(base, idx) | Expr::Range(base, idx, _) | Expr::IndexedRange(base, idx, _, _) => {
                // memory word, optionally followed by a select inside the word
                let (target, inner) = match &**base {
                    Expr::Ident(name) => (name, None),
                    Expr::Index(b2, addr) => match &**b2 {
                        Expr::Ident(name) => (name, Some(addr)),
                        _ => return Err(VsimError::Unsupported("nested lvalue select".into())),
                    },
                    _ => return Err(VsimError::Unsupported("nested lvalue select".into())),
                };
                let _ = idx;
                match (scope.get(target), inner) {
                    (Some(Sym::Mem(mem)), None) if matches!(e, Expr::Index(..)) => {
                        let Expr::Index(_, addr) = e else { unreachable!() };
                        let info = &self.design.mems[*mem];
                        Ok(LVal::Mem {
                            mem: *mem,
                            addr: self.expr(scope, addr, false)?,
                            offset: Offset {
                                index: None,
                                scale: 1,
                                bias: 0,
                            },
                            width: info.width,
                        })
                    }
                    (Some(Sym::Mem(mem)), Some(addr)) => {
                        let info = &self.design.mems[*mem];
                        let word = Ex {
                            kind: ExKind::MemRead {
                                mem: *mem,
                                addr: Box::new(Ex {
                                    kind: ExKind::Const(Logic::zero(1)),
                                    width: 1,
                                    signed: false,
                                }),
                            },
                            width: info.width,
                            signed: false,
                        };
                        let (offset, width) = self.select_of(scope, &word, e)?;
                        Ok(LVal::Mem {
                            mem: *mem,
                            addr: self.expr(scope, addr, false)?,
                            offset,
                            width,
                        })
                    }
                    (Some(Sym::Net(id)), None) => {
                        let (offset, width) = self.select_of(scope, &self.net_ex(*id), e)?;
                        Ok(LVal::Net {
                            net: *id,
                            offset,
                            width,
                        })
                    }
                    _ => Err(VsimError::Elab(format!("cannot assign to '{target}'"))),
                }
            }
            _ => Err(VsimError::Elab("invalid assignment target".into())),
        }
    }

    fn select_of(&self, scope: &Scope, base: &Ex, e: &Expr) -> Result<(Offset, u32), VsimError> {
        match e {
            Expr::Index(_, idx) => self.bit_select(scope, base, idx, false),
            Expr::Range(_, msb, lsb) => self.part_select(scope, base, msb, lsb),
            Expr::IndexedRange(_, start, w, up) => self.indexed_select(scope, base, start, w, *up, false),
            _ => unreachable!(),
        }
    }

    fn stmt(&self, scope: &Scope, s: &Stmt) -> Result<IStmt, VsimError> {
        Ok(match s {
            Stmt::Null => IStmt::Nop,
            Stmt::Block(v) => IStmt::Block(v.iter().map(|s| self.stmt(scope, s)).collect::<Result<_, _>>()?),
            Stmt::Assign {
                lhs, rhs, nonblocking, ..
            } => assign(self.lvalue(scope, lhs)?, self.expr(scope, rhs, false)?, *nonblocking),
            Stmt::If { cond, then, els } => IStmt::If(
                self.expr(scope, cond, false)?,
                Box::new(self.stmt(scope, then)?),
                match els {
                    Some(e) => Some(Box::new(self.stmt(scope, e)?)),
                    None => None,
                },
            ),
            Stmt::Case {
                kind,
                subject,
                items,
                default,
            } => {
                let subject = self.expr(scope, subject, false)?;
                let mut width = subject.width;
                let mut signed = subject.signed;
                let mut out = Vec::new();
                for (labels, body) in items {
                    let labels = labels
                        .iter()
                        .map(|l| self.expr(scope, l, false))
                        .collect::<Result<Vec<_>, _>>()?;
                    for l in &labels {
                        width = width.max(l.width);
                        signed &= l.signed;
                    }
                    out.push((labels, self.stmt(scope, body)?));
                }
                IStmt::Case {
                    kind: *kind,
                    subject,
                    items: out,
                    default: match default {
                        Some(d) => Some(Box::new(self.stmt(scope, d)?)),
                        None => None,
                    },
                    width,
                    signed,
                }
            }
            Stmt::For { init, cond, step, body } => IStmt::For {
                init: Box::new(self.stmt(scope, init)?),
                cond: self.expr(scope, cond, false)?,
                step: Box::new(self.stmt(scope, step)?),
                body: Box::new(self.stmt(scope, body)?),
            },
        })
    }

    fn index_sensitivity(&mut self) {
        let d = &mut self.design;
        d.net_readers = vec![Vec::new(); d.nets.len()];
        d.mem_readers = vec![Vec::new(); d.mems.len()];
        d.edge_watchers = vec![Vec::new(); d.nets.len()];
        for (pid, p) in d.procs.iter().enumerate() {
            match &p.kind {
                ProcKind::Comb => {
                    let mut nets = Vec::new();
                    let mut mems = Vec::new();
                    let mut seen_funcs = Vec::new();
                    stmt_reads(&p.body, &d.funcs, &mut nets, &mut mems, &mut seen_funcs);
                    nets.sort_unstable();
                    nets.dedup();
                    mems.sort_unstable();
                    mems.dedup();
                    for n in nets {
                        if !d.nets[n].silent {
                            d.net_readers[n].push(pid);
                        }
                    }
                    for m in mems {
                        d.mem_readers[m].push(pid);
                    }
                }
                ProcKind::Edge(edges) => {
                    for (net, e) in edges {
                        d.edge_watchers[*net].push((pid, *e));
                    }
                }
                ProcKind::Initial => {}
            }
        }
    }
}

fn check_width(w: u32) -> Result<(), VsimError> {
    if w > MAX_WIDTH {
        Err(VsimError::Unsupported(format!(
            "expression wider than {MAX_WIDTH} bits"
        )))
    } else {
        Ok(())
    }
}

/// Offset for index expression `idx + adj` under the declared geometry.
fn dynamic_offset(g: &NetInfo, idx: Ex, adj: i64) -> Offset {
    let (scale, bias) = if g.ascending() {
        (-1, g.lsb - adj)
    } else {
        (1, adj - g.lsb)
    };
    if let ExKind::Const(v) = &idx.kind {
        let i = if idx.signed {
            v.to_i128()
        } else {
            v.to_u128().map(|u| u as i128)
        };
        if let Some(i) = i.and_then(|i| i64::try_from(i).ok()) {
            return Offset {
                index: None,
                scale: 1,
                bias: scale * i + bias,
            };
        }
    }
    Offset {
        index: Some(Box::new(idx)),
        scale,
        bias,
    }
}

fn assign(lhs: LVal, rhs: Ex, nonblocking: bool) -> IStmt {
    IStmt::Assign { lhs, rhs, nonblocking }
}

fn contains_call(s: &IStmt, fid: FuncId) -> bool {
    let mut funcs = Vec::new();
    stmt_calls(s, &mut funcs);
    funcs.contains(&fid)
}

fn stmt_calls(s: &IStmt, out: &mut Vec<FuncId>) {
    let mut visit = |e: &Ex| expr_calls(e, out);
    walk_stmt_exprs(s, &mut visit);
}

fn expr_calls(e: &Ex, out: &mut Vec<FuncId>) {
    if let ExKind::Call(f, _) = &e.kind {
        out.push(*f);
    }
    for c in children(e) {
        expr_calls(c, out);
    }
}

fn children(e: &Ex) -> Vec<&Ex> {
    match &e.kind {
        ExKind::Const(_) | ExKind::Net(_) => vec![],
        ExKind::Select { base, offset } => {
            let mut v = vec![&**base];
            if let Some(i) = &offset.index {
                v.push(i);
            }
            v
        }
        ExKind::MemRead { addr, .. } => vec![addr],
        ExKind::Unary(_, a) | ExKind::Cast(a) => vec![a],
        ExKind::Binary(_, a, b) => vec![a, b],
        ExKind::Ternary(a, b, c) => vec![a, b, c],
        ExKind::Concat(v) | ExKind::Repl(_, v) | ExKind::Call(_, v) => v.iter().collect(),
    }
}

fn walk_stmt_exprs(s: &IStmt, f: &mut dyn FnMut(&Ex)) {
    match s {
        IStmt::Nop => {}
        IStmt::Block(v) => v.iter().for_each(|s| walk_stmt_exprs(s, f)),
        IStmt::Assign { lhs, rhs, .. } => {
            walk_lval_exprs(lhs, f);
            f(rhs);
        }
        IStmt::If(c, t, e) => {
            f(c);
            walk_stmt_exprs(t, f);
            if let Some(e) = e {
                walk_stmt_exprs(e, f);
            }
        }
        IStmt::Case {
            subject,
            items,
            default,
            ..
        } => {
            f(subject);
            for (labels, body) in items {
                labels.iter().for_each(&mut *f);
                walk_stmt_exprs(body, f);
            }
            if let Some(d) = default {
                walk_stmt_exprs(d, f);
            }
        }
        IStmt::For { init, cond, step, body } => {
            walk_stmt_exprs(init, f);
            f(cond);
            walk_stmt_exprs(step, f);
            walk_stmt_exprs(body, f);
        }
    }
}

fn walk_lval_exprs(l: &LVal, f: &mut dyn FnMut(&Ex)) {
    match l {
        LVal::Net { offset, .. } => {
            if let Some(i) = &offset.index {
                f(i);
            }
        }
        LVal::Mem { addr, offset, .. } => {
            f(addr);
            if let Some(i) = &offset.index {
                f(i);
            }
        }
        LVal::Concat(v) => v.iter().for_each(|l| walk_lval_exprs(l, f)),
    }
}

fn stmt_reads(s: &IStmt, funcs: &[FuncInfo], nets: &mut Vec<NetId>, mems: &mut Vec<MemId>, seen: &mut Vec<FuncId>) {
    let mut pending = Vec::new();
    {
        let mut visit = |e: &Ex| expr_reads(e, nets, mems, &mut pending);
        walk_stmt_exprs(s, &mut visit);
    }
    for fid in pending {
        if !seen.contains(&fid) {
            seen.push(fid);
            stmt_reads(&funcs[fid].body, funcs, nets, mems, seen);
        }
    }
}

fn expr_reads(e: &Ex, nets: &mut Vec<NetId>, mems: &mut Vec<MemId>, calls: &mut Vec<FuncId>) {
    match &e.kind {
        ExKind::Net(id) => nets.push(*id),
        ExKind::MemRead { mem, .. } => mems.push(*mem),
        ExKind::Call(f, _) => calls.push(*f),
        _ => {}
    }
    for c in children(e) {
        expr_reads(c, nets, mems, calls);
    }
}

/// Evaluates an expression that references only constants.
pub fn const_eval(e: &Ex) -> Result<Logic, VsimError> {
    struct ConstEnv;
    impl crate::eval::Env for ConstEnv {
        fn net(&self, _: NetId) -> Logic {
            unreachable!("constant expressions hold no nets")
        }
        fn mem(&self, _: MemId, _: i128) -> Option<Logic> {
            None
        }
        fn call(&mut self, _: FuncId, _: Vec<Logic>) -> Result<Logic, VsimError> {
            Err(VsimError::Unsupported("function call in constant expression".into()))
        }
    }
    crate::eval::eval(&mut ConstEnv, e, e.width, e.signed)
}
