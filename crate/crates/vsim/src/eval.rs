// SPDX-License-Identifier: Apache-2.0

//! Expression evaluation with Verilog context-determined sizing.

use crate::elab::{BinOp, Ex, ExKind, FuncId, MemId, NetId, Offset, UnOp};
use crate::value::{sign_extend, tri, Logic};
use crate::VsimError;

pub trait Env {
    fn net(&self, id: NetId) -> Logic;
    /// Word at a declared address, `None` when out of range.
    fn mem(&self, id: MemId, addr: i128) -> Option<Logic>;
    fn call(&mut self, f: FuncId, args: Vec<Logic>) -> Result<Logic, VsimError>;
}

/// Integer value of an index expression, `None` if any bit is unknown.
pub fn index_value(v: &Logic, signed: bool) -> Option<i128> {
    if !v.is_known() {
        return None;
    }
    Some(if signed {
        sign_extend(v.val(), v.width())
    } else {
        v.val() as i128
    })
}

pub fn resolve_offset(env: &mut dyn Env, off: &Offset) -> Result<Option<i64>, VsimError> {
    match &off.index {
        None => Ok(Some(off.bias)),
        Some(ix) => {
            let v = eval(env, ix, ix.width, ix.signed)?;
            Ok(index_value(&v, ix.signed)
                .and_then(|i| i64::try_from(i).ok())
                .and_then(|i| i.checked_mul(off.scale))
                .and_then(|i| i.checked_add(off.bias)))
        }
    }
}

/// Evaluates `e` in a context `width` bits wide. `signed` is the signedness
/// of the enclosing context-determined expression.
pub fn eval(env: &mut dyn Env, e: &Ex, width: u32, signed: bool) -> Result<Logic, VsimError> {
    debug_assert!(width >= e.width);
    let leaf = |v: Logic| v.resize(width, signed);
    Ok(match &e.kind {
        ExKind::Const(v) => leaf(*v),
        ExKind::Net(id) => leaf(env.net(*id)),
        ExKind::Select { base, offset } => {
            let b = eval(env, base, base.width, false)?;
            match resolve_offset(env, offset)? {
                Some(lo) => leaf(b.slice(lo, e.width)),
                None => leaf(Logic::x(e.width)),
            }
        }
        ExKind::MemRead { mem, addr } => {
            let a = eval(env, addr, addr.width, addr.signed)?;
            let word = index_value(&a, addr.signed).and_then(|i| env.mem(*mem, i));
            leaf(word.unwrap_or_else(|| Logic::x(e.width)))
        }
        ExKind::Cast(a) => leaf(eval(env, a, a.width, a.signed)?),
        ExKind::Concat(parts) => leaf(concat(env, parts)?),
        ExKind::Repl(n, parts) => {
            let one = concat(env, parts)?;
            let mut acc = one;
            for _ in 1..*n {
                acc = acc.concat(&one).expect("width checked at elaboration");
            }
            leaf(acc)
        }
        ExKind::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(env, a, a.width, a.signed)?);
            }
            leaf(env.call(*f, vals)?)
        }
        ExKind::Unary(op, a) => match op {
            UnOp::Plus => eval(env, a, width, signed)?,
            UnOp::Neg => eval(env, a, width, signed)?.neg(),
            UnOp::Not => eval(env, a, width, signed)?.not(),
            _ => {
                let v = eval(env, a, a.width, a.signed)?;
                let r = match op {
                    UnOp::LogNot => tri(v.truthy().map(|b| !b)),
                    UnOp::RedAnd => v.reduce_and(),
                    UnOp::RedOr => v.reduce_or(),
                    UnOp::RedXor => v.reduce_xor(),
                    UnOp::RedNand => v.reduce_and().not(),
                    UnOp::RedNor => v.reduce_or().not(),
                    _ => v.reduce_xor().not(),
                };
                leaf(r)
            }
        },
        ExKind::Binary(op, a, b) => {
            use BinOp::*;
            match op {
                Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                    let x = eval(env, a, width, signed)?;
                    let y = eval(env, b, width, signed)?;
                    match op {
                        Add => x.add(&y),
                        Sub => x.sub(&y),
                        Mul => x.mul(&y),
                        Div => x.div(&y, signed),
                        Mod => x.rem(&y, signed),
                        And => x.and(&y),
                        Or => x.or(&y),
                        Xor => x.xor(&y),
                        _ => x.xor(&y).not(),
                    }
                }
                Pow => {
                    let x = eval(env, a, width, signed)?;
                    let y = eval(env, b, b.width, b.signed)?;
                    x.pow(&y, signed && b.signed)
                }
                Shl | AShl => {
                    let x = eval(env, a, width, signed)?;
                    let y = eval(env, b, b.width, false)?;
                    x.shl(&y)
                }
                Shr | AShr => {
                    let x = eval(env, a, width, signed)?;
                    let y = eval(env, b, b.width, false)?;
                    x.shr(&y, *op == AShr && signed)
                }
                Eq | Ne | CaseEq | CaseNe | Lt | Le | Gt | Ge => {
                    let w = a.width.max(b.width);
                    let s = a.signed && b.signed;
                    let x = eval(env, a, w, s)?;
                    let y = eval(env, b, w, s)?;
                    let r = match op {
                        Eq => x.eq(&y),
                        Ne => x.eq(&y).not(),
                        CaseEq => Logic::bit(x.case_eq(&y)),
                        CaseNe => Logic::bit(!x.case_eq(&y)),
                        Lt => x.lt(&y, s),
                        Le => x.le(&y, s),
                        Gt => y.lt(&x, s),
                        _ => y.le(&x, s),
                    };
                    leaf(r)
                }
                LogAnd | LogOr => {
                    let x = eval(env, a, a.width, a.signed)?.truthy();
                    let y = eval(env, b, b.width, b.signed)?.truthy();
                    let r = if *op == LogAnd {
                        match (x, y) {
                            (Some(false), _) | (_, Some(false)) => Some(false),
                            (Some(true), Some(true)) => Some(true),
                            _ => None,
                        }
                    } else {
                        match (x, y) {
                            (Some(true), _) | (_, Some(true)) => Some(true),
                            (Some(false), Some(false)) => Some(false),
                            _ => None,
                        }
                    };
                    leaf(tri(r))
                }
            }
        }
        ExKind::Ternary(c, a, b) => {
            let cv = eval(env, c, c.width, c.signed)?;
            match cv.truthy() {
                Some(true) => eval(env, a, width, signed)?,
                Some(false) => eval(env, b, width, signed)?,
                None => {
                    let x = eval(env, a, width, signed)?;
                    let y = eval(env, b, width, signed)?;
                    x.merge(&y)
                }
            }
        }
    })
}

fn concat(env: &mut dyn Env, parts: &[Ex]) -> Result<Logic, VsimError> {
    let mut acc: Option<Logic> = None;
    for p in parts {
        let v = eval(env, p, p.width, p.signed)?;
        acc = Some(match acc {
            None => v,
            Some(hi) => hi.concat(&v).expect("width checked at elaboration"),
        });
    }
    Ok(acc.unwrap_or_else(|| Logic::zero(0)))
}
