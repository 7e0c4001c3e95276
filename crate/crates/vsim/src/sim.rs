// SPDX-License-Identifier: Apache-2.0

//! Zero-delay event-driven simulation of an elaborated design.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use crate::ast::{CaseKind, Direction, Edge};
use crate::elab::{Design, Ex, FuncId, IStmt, LVal, MemId, NetId, ProcId, ProcKind};
use crate::eval::{eval, index_value, resolve_offset, Env};
use crate::value::Logic;
use crate::VsimError;

/// Process activations allowed within one `settle` call.
const DEFAULT_ACTIVATION_LIMIT: u64 = 2_000_000;
const LOOP_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone)]
enum Target {
    Net { net: NetId, lo: i64 },
    Mem { mem: MemId, index: usize, lo: i64 },
}

pub struct Simulator {
    design: Arc<Design>,
    nets: Vec<Logic>,
    mems: Vec<Vec<Logic>>,
    queue: VecDeque<ProcId>,
    queued: Vec<bool>,
    edges: BTreeSet<ProcId>,
    nba: Vec<(Target, Logic)>,
    running: Option<ProcId>,
    activation_limit: u64,
}

impl Simulator {
    /// Builds the initial state: everything `x`, initial blocks run, then
    /// combinational logic settled.
    pub fn new(design: Arc<Design>) -> Result<Self, VsimError> {
        let nets = design.nets.iter().map(|n| Logic::x(n.width)).collect();
        let mems = design.mems.iter().map(|m| vec![Logic::x(m.width); m.depth]).collect();
        let n_procs = design.procs.len();
        let mut sim = Simulator {
            design,
            nets,
            mems,
            queue: VecDeque::new(),
            queued: vec![false; n_procs],
            edges: BTreeSet::new(),
            nba: Vec::new(),
            running: None,
            activation_limit: DEFAULT_ACTIVATION_LIMIT,
        };
        let d = sim.design.clone();
        for (pid, p) in d.procs.iter().enumerate() {
            if p.kind == ProcKind::Initial {
                sim.run(pid)?;
            }
        }
        for (pid, p) in d.procs.iter().enumerate() {
            if p.kind == ProcKind::Comb {
                sim.enqueue(pid);
            }
        }
        sim.settle()?;
        Ok(sim)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn set_activation_limit(&mut self, limit: u64) {
        self.activation_limit = limit;
    }

    /// Drives a top-level input. Takes effect on the next `settle`.
    pub fn set(&mut self, port: &str, value: Logic) -> Result<(), VsimError> {
        let p = self
            .design
            .port(port)
            .ok_or_else(|| VsimError::Elab(format!("no port '{port}'")))?;
        if p.dir != Direction::Input {
            return Err(VsimError::Elab(format!("'{port}' is not an input")));
        }
        let net = p.net;
        let v = value.resize(p.width, false);
        self.write_net(net, 0, &v);
        Ok(())
    }

    pub fn get(&self, port: &str) -> Option<Logic> {
        self.design.port(port).map(|p| self.nets[p.net])
    }

    /// Value of any net by hierarchical name, e.g. `u0.sum`.
    pub fn peek(&self, name: &str) -> Option<Logic> {
        self.design
            .nets
            .iter()
            .position(|n| n.name == name)
            .map(|i| self.nets[i])
    }

    /// Runs until no process is pending and no nonblocking update remains.
    pub fn settle(&mut self) -> Result<(), VsimError> {
        let mut activations = 0u64;
        loop {
            while let Some(pid) = self.queue.pop_front() {
                self.queued[pid] = false;
                activations += 1;
                if activations > self.activation_limit {
                    return Err(VsimError::CombLoop(self.design.procs[pid].name.clone()));
                }
                self.run(pid)?;
            }
            if !self.edges.is_empty() {
                let fired = std::mem::take(&mut self.edges);
                for pid in fired {
                    activations += 1;
                    self.run(pid)?;
                }
                continue;
            }
            if !self.nba.is_empty() {
                for (t, v) in std::mem::take(&mut self.nba) {
                    self.write_target(&t, &v);
                }
                continue;
            }
            return Ok(());
        }
    }

    fn enqueue(&mut self, pid: ProcId) {
        if !self.queued[pid] {
            self.queued[pid] = true;
            self.queue.push_back(pid);
        }
    }

    fn run(&mut self, pid: ProcId) -> Result<(), VsimError> {
        let d = self.design.clone();
        let prev = self.running.replace(pid);
        let r = self.exec(&d.procs[pid].body);
        self.running = prev;
        r
    }

    fn write_net(&mut self, net: NetId, lo: i64, part: &Logic) {
        let old = self.nets[net];
        let new = if lo == 0 && part.width() == old.width() {
            *part
        } else {
            old.with_slice(lo, part)
        };
        if new.case_eq(&old) {
            return;
        }
        self.nets[net] = new;
        let d = self.design.clone();
        if d.nets[net].silent {
            return;
        }
        for &r in &d.net_readers[net] {
            if Some(r) != self.running || d.procs[r].self_trigger {
                self.enqueue(r);
            }
        }
        let (o, n) = (old.slice(0, 1), new.slice(0, 1));
        for &(pid, edge) in &d.edge_watchers[net] {
            if is_edge(&o, &n, edge) {
                self.edges.insert(pid);
            }
        }
    }

    fn write_target(&mut self, t: &Target, v: &Logic) {
        match *t {
            Target::Net { net, lo } => self.write_net(net, lo, v),
            Target::Mem { mem, index, lo } => {
                let old = self.mems[mem][index];
                let new = old.with_slice(lo, v);
                if new.case_eq(&old) {
                    return;
                }
                self.mems[mem][index] = new;
                let d = self.design.clone();
                for &r in &d.mem_readers[mem] {
                    if Some(r) != self.running {
                        self.enqueue(r);
                    }
                }
            }
        }
    }

    /// Resolves an lvalue into concrete targets paired with their widths,
    /// most significant first. Targets with unknown indices are dropped.
    fn targets(&mut self, lv: &LVal, out: &mut Vec<(Option<Target>, u32)>) -> Result<(), VsimError> {
        match lv {
            LVal::Net { net, offset, width } => {
                let t = resolve_offset(self, offset)?.map(|lo| Target::Net { net: *net, lo });
                out.push((t, *width));
            }
            LVal::Mem {
                mem,
                addr,
                offset,
                width,
            } => {
                let a = eval(self, addr, addr.width, addr.signed)?;
                let info = &self.design.mems[*mem];
                let index = index_value(&a, addr.signed)
                    .map(|i| i - info.first as i128)
                    .filter(|i| *i >= 0 && (*i as usize) < info.depth)
                    .map(|i| i as usize);
                let lo = resolve_offset(self, offset)?;
                let t = match (index, lo) {
                    (Some(index), Some(lo)) => Some(Target::Mem { mem: *mem, index, lo }),
                    _ => None,
                };
                out.push((t, *width));
            }
            LVal::Concat(parts) => {
                for p in parts {
                    self.targets(p, out)?;
                }
            }
        }
        Ok(())
    }

    fn assign(&mut self, lhs: &LVal, rhs: &Ex, nonblocking: bool) -> Result<(), VsimError> {
        let lw = lhs.width();
        let v = eval(self, rhs, rhs.width.max(lw), rhs.signed)?;
        let mut ts = Vec::new();
        self.targets(lhs, &mut ts)?;
        let mut hi = lw as i64;
        for (t, w) in ts {
            hi -= w as i64;
            let Some(t) = t else { continue };
            let part = v.slice(hi, w);
            if nonblocking {
                self.nba.push((t, part));
            } else {
                self.write_target(&t, &part);
            }
        }
        Ok(())
    }

    fn exec(&mut self, s: &IStmt) -> Result<(), VsimError> {
        match s {
            IStmt::Nop => Ok(()),
            IStmt::Block(v) => {
                for s in v {
                    self.exec(s)?;
                }
                Ok(())
            }
            IStmt::Assign { lhs, rhs, nonblocking } => self.assign(lhs, rhs, *nonblocking),
            IStmt::If(c, t, e) => {
                if eval(self, c, c.width, c.signed)?.truthy() == Some(true) {
                    self.exec(t)
                } else if let Some(e) = e {
                    self.exec(e)
                } else {
                    Ok(())
                }
            }
            IStmt::Case {
                kind,
                subject,
                items,
                default,
                width,
                signed,
            } => {
                let sv = eval(self, subject, *width, *signed)?;
                for (labels, body) in items {
                    for l in labels {
                        let lv = eval(self, l, *width, *signed)?;
                        let hit = match kind {
                            CaseKind::Case => sv.case_eq(&lv),
                            CaseKind::Casez => {
                                let care = !(sv.wildcard_mask(false) | lv.wildcard_mask(false));
                                sv.matches_masked(&lv, care)
                            }
                            CaseKind::Casex => {
                                let care = !(sv.wildcard_mask(true) | lv.wildcard_mask(true));
                                sv.matches_masked(&lv, care)
                            }
                        };
                        if hit {
                            return self.exec(body);
                        }
                    }
                }
                match default {
                    Some(d) => self.exec(d),
                    None => Ok(()),
                }
            }
            IStmt::For { init, cond, step, body } => {
                self.exec(init)?;
                let mut n = 0u64;
                while eval(self, cond, cond.width, cond.signed)?.truthy() == Some(true) {
                    n += 1;
                    if n > LOOP_LIMIT {
                        return Err(VsimError::Elab("for loop iteration limit exceeded".into()));
                    }
                    self.exec(body)?;
                    self.exec(step)?;
                }
                Ok(())
            }
        }
    }
}

impl Env for Simulator {
    fn net(&self, id: NetId) -> Logic {
        self.nets[id]
    }

    fn mem(&self, id: MemId, addr: i128) -> Option<Logic> {
        let info = &self.design.mems[id];
        let i = addr - info.first as i128;
        if i < 0 || i as usize >= info.depth {
            None
        } else {
            Some(self.mems[id][i as usize])
        }
    }

    fn call(&mut self, f: FuncId, args: Vec<Logic>) -> Result<Logic, VsimError> {
        let d = self.design.clone();
        let func = &d.funcs[f];
        for (net, v) in func.inputs.iter().zip(args) {
            let w = d.nets[*net].width;
            self.nets[*net] = v.resize(w, v.width() < w && d.nets[*net].signed);
        }
        self.nets[func.ret] = Logic::x(d.nets[func.ret].width);
        self.exec(&func.body)?;
        Ok(self.nets[func.ret])
    }
}

fn is_edge(old: &Logic, new: &Logic, edge: Edge) -> bool {
    // bit-level transition table: 0->1/x/z and x/z->1 rise; the mirror falls
    let o = old.to_u128();
    let n = new.to_u128();
    match edge {
        Edge::Pos => matches!((o, n), (Some(0), Some(1)) | (Some(0), None) | (None, Some(1))),
        Edge::Neg => matches!((o, n), (Some(1), Some(0)) | (Some(1), None) | (None, Some(0))),
    }
}
