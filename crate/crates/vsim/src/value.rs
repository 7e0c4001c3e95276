// SPDX-License-Identifier: Apache-2.0

//! Four-state bit vectors up to 128 bits wide.
//!
//! Each bit is held in two planes: `val` and `unk`. A bit with `unk` set is
//! unknown; its `val` bit distinguishes `z` (1) from `x` (0). Operators other
//! than case equality collapse `z` into `x`.

use std::fmt;

pub const MAX_WIDTH: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Logic {
    width: u32,
    val: u128,
    unk: u128,
}

pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl Logic {
    pub fn new(width: u32, val: u128) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width));
        Logic {
            width,
            val: val & mask(width),
            unk: 0,
        }
    }

    pub fn from_planes(width: u32, val: u128, unk: u128) -> Self {
        let m = mask(width);
        Logic {
            width,
            val: val & m,
            unk: unk & m,
        }
    }

    pub fn zero(width: u32) -> Self {
        Logic::new(width, 0)
    }

    pub fn x(width: u32) -> Self {
        Logic {
            width,
            val: 0,
            unk: mask(width),
        }
    }

    pub fn z(width: u32) -> Self {
        Logic {
            width,
            val: mask(width),
            unk: mask(width),
        }
    }

    pub fn bit(b: bool) -> Self {
        Logic::new(1, b as u128)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn val(&self) -> u128 {
        self.val
    }

    pub fn unk(&self) -> u128 {
        self.unk
    }

    pub fn is_known(&self) -> bool {
        self.unk == 0
    }

    pub fn to_u128(&self) -> Option<u128> {
        self.is_known().then_some(self.val)
    }

    /// Two's complement interpretation at the current width.
    pub fn to_i128(&self) -> Option<i128> {
        self.to_u128().map(|v| sign_extend(v, self.width))
    }

    /// Turns every `z` bit into `x`.
    fn norm(mut self) -> Self {
        self.val &= !self.unk;
        self
    }

    fn all_x_if_unknown(self, width: u32, f: impl FnOnce() -> u128) -> Self {
        if self.unk != 0 {
            Logic::x(width)
        } else {
            Logic::new(width, f())
        }
    }

    pub fn resize(&self, width: u32, sign_extend_it: bool) -> Logic {
        if width <= self.width {
            return Logic::from_planes(width, self.val, self.unk);
        }
        let mut out = Logic::from_planes(width, self.val, self.unk);
        if sign_extend_it {
            let top = self.width - 1;
            let ext = mask(width) & !mask(self.width);
            if (self.unk >> top) & 1 == 1 {
                out.unk |= ext;
                if (self.val >> top) & 1 == 1 {
                    out.val |= ext;
                }
            } else if (self.val >> top) & 1 == 1 {
                out.val |= ext;
            }
        }
        out
    }

    /// Extracts `width` bits starting at `lo`. Bits beyond the vector read as `x`.
    pub fn slice(&self, lo: i64, width: u32) -> Logic {
        let mut out = Logic::x(width);
        for i in 0..width {
            let src = lo + i as i64;
            if src >= 0 && (src as u32) < self.width {
                let s = src as u32;
                let v = (self.val >> s) & 1;
                let u = (self.unk >> s) & 1;
                out.val = (out.val & !(1 << i)) | (v << i);
                out.unk = (out.unk & !(1 << i)) | (u << i);
            }
        }
        out
    }

    /// Overwrites `part.width()` bits starting at `lo`; out-of-range bits are dropped.
    pub fn with_slice(&self, lo: i64, part: &Logic) -> Logic {
        let mut out = *self;
        for i in 0..part.width {
            let dst = lo + i as i64;
            if dst >= 0 && (dst as u32) < self.width {
                let d = dst as u32;
                let v = (part.val >> i) & 1;
                let u = (part.unk >> i) & 1;
                out.val = (out.val & !(1 << d)) | (v << d);
                out.unk = (out.unk & !(1 << d)) | (u << d);
            }
        }
        out
    }

    /// Concatenation with `self` in the most significant position.
    pub fn concat(&self, low: &Logic) -> Option<Logic> {
        let width = self.width + low.width;
        if width > MAX_WIDTH {
            return None;
        }
        Some(Logic::from_planes(
            width,
            (self.val << low.width) | low.val,
            (self.unk << low.width) | low.unk,
        ))
    }

    // Arithmetic. Any unknown operand bit poisons the whole result.

    pub fn add(&self, rhs: &Logic) -> Logic {
        let w = self.width;
        if rhs.unk != 0 {
            return Logic::x(w);
        }
        self.all_x_if_unknown(w, || self.val.wrapping_add(rhs.val))
    }

    pub fn sub(&self, rhs: &Logic) -> Logic {
        let w = self.width;
        if rhs.unk != 0 {
            return Logic::x(w);
        }
        self.all_x_if_unknown(w, || self.val.wrapping_sub(rhs.val))
    }

    pub fn mul(&self, rhs: &Logic) -> Logic {
        let w = self.width;
        if rhs.unk != 0 {
            return Logic::x(w);
        }
        self.all_x_if_unknown(w, || self.val.wrapping_mul(rhs.val))
    }

    pub fn div(&self, rhs: &Logic, signed: bool) -> Logic {
        self.divmod(rhs, signed, true)
    }

    pub fn rem(&self, rhs: &Logic, signed: bool) -> Logic {
        self.divmod(rhs, signed, false)
    }

    fn divmod(&self, rhs: &Logic, signed: bool, quotient: bool) -> Logic {
        let w = self.width;
        if self.unk != 0 || rhs.unk != 0 || rhs.val == 0 {
            return Logic::x(w);
        }
        let r = if signed {
            let a = sign_extend(self.val, w);
            let b = sign_extend(rhs.val, w);
            (if quotient { a.wrapping_div(b) } else { a.wrapping_rem(b) }) as u128
        } else if quotient {
            self.val / rhs.val
        } else {
            self.val % rhs.val
        };
        Logic::new(w, r)
    }

    pub fn pow(&self, rhs: &Logic, signed: bool) -> Logic {
        let w = self.width;
        if self.unk != 0 || rhs.unk != 0 {
            return Logic::x(w);
        }
        let exp = if signed {
            sign_extend(rhs.val, rhs.width)
        } else {
            rhs.val as i128
        };
        if exp < 0 {
            let base = if signed {
                sign_extend(self.val, w)
            } else {
                self.val as i128
            };
            return match base {
                0 => Logic::x(w),
                1 => Logic::new(w, 1),
                -1 => Logic::new(w, if exp % 2 == 0 { 1 } else { u128::MAX }),
                _ => Logic::zero(w),
            };
        }
        let mut acc: u128 = 1;
        let mut base = self.val;
        let mut e = exp as u128;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.wrapping_mul(base);
            }
            base = base.wrapping_mul(base);
            e >>= 1;
        }
        Logic::new(w, acc)
    }

    pub fn neg(&self) -> Logic {
        self.all_x_if_unknown(self.width, || self.val.wrapping_neg())
    }

    // Bitwise.

    fn known0(&self) -> u128 {
        !self.unk & !self.val & mask(self.width)
    }

    fn known1(&self) -> u128 {
        !self.unk & self.val
    }

    pub fn and(&self, rhs: &Logic) -> Logic {
        let one = self.known1() & rhs.known1();
        let zero = self.known0() | rhs.known0();
        Logic::from_planes(self.width, one, !(one | zero))
    }

    pub fn or(&self, rhs: &Logic) -> Logic {
        let one = self.known1() | rhs.known1();
        let zero = self.known0() & rhs.known0();
        Logic::from_planes(self.width, one, !(one | zero))
    }

    pub fn xor(&self, rhs: &Logic) -> Logic {
        let unk = self.unk | rhs.unk;
        Logic::from_planes(self.width, (self.val ^ rhs.val) & !unk, unk)
    }

    pub fn not(&self) -> Logic {
        Logic::from_planes(self.width, !self.val & !self.unk, self.unk)
    }

    // Reductions and truthiness, all one bit wide.

    pub fn reduce_and(&self) -> Logic {
        if self.known0() != 0 {
            Logic::bit(false)
        } else if self.unk == 0 {
            Logic::bit(true)
        } else {
            Logic::x(1)
        }
    }

    pub fn reduce_or(&self) -> Logic {
        if self.known1() != 0 {
            Logic::bit(true)
        } else if self.unk == 0 {
            Logic::bit(false)
        } else {
            Logic::x(1)
        }
    }

    pub fn reduce_xor(&self) -> Logic {
        if self.unk != 0 {
            Logic::x(1)
        } else {
            Logic::bit(self.val.count_ones() % 2 == 1)
        }
    }

    /// `Some(true)`/`Some(false)` when the vector is definitely non-zero/zero.
    pub fn truthy(&self) -> Option<bool> {
        if self.known1() != 0 {
            Some(true)
        } else if self.unk == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn logical(&self) -> Logic {
        tri(self.truthy())
    }

    // Comparisons. Operands must already share a width.

    pub fn eq(&self, rhs: &Logic) -> Logic {
        let unk = self.unk | rhs.unk;
        if (self.val ^ rhs.val) & !unk != 0 {
            Logic::bit(false)
        } else if unk != 0 {
            Logic::x(1)
        } else {
            Logic::bit(true)
        }
    }

    pub fn case_eq(&self, rhs: &Logic) -> bool {
        self.val == rhs.val && self.unk == rhs.unk
    }

    /// Equality treating `x` and `z` as the same unknown state.
    pub fn same(&self, rhs: &Logic) -> bool {
        self.norm() == rhs.norm()
    }

    pub fn lt(&self, rhs: &Logic, signed: bool) -> Logic {
        self.compare(rhs, signed, |o| o == std::cmp::Ordering::Less)
    }

    pub fn le(&self, rhs: &Logic, signed: bool) -> Logic {
        self.compare(rhs, signed, |o| o != std::cmp::Ordering::Greater)
    }

    fn compare(&self, rhs: &Logic, signed: bool, pred: impl Fn(std::cmp::Ordering) -> bool) -> Logic {
        if self.unk != 0 || rhs.unk != 0 {
            return Logic::x(1);
        }
        let ord = if signed {
            sign_extend(self.val, self.width).cmp(&sign_extend(rhs.val, rhs.width))
        } else {
            self.val.cmp(&rhs.val)
        };
        Logic::bit(pred(ord))
    }

    // Shifts. The amount is interpreted unsigned; an unknown amount gives all `x`.

    pub fn shl(&self, amount: &Logic) -> Logic {
        let w = self.width;
        match amount.to_u128() {
            None => Logic::x(w),
            Some(a) if a >= w as u128 => Logic::zero(w),
            Some(a) => Logic::from_planes(w, self.val << a, self.unk << a).norm(),
        }
    }

    pub fn shr(&self, amount: &Logic, arithmetic: bool) -> Logic {
        let w = self.width;
        let Some(a) = amount.to_u128() else {
            return Logic::x(w);
        };
        let fill = if arithmetic {
            let top = w - 1;
            Some(((self.val >> top) & 1, (self.unk >> top) & 1))
        } else {
            None
        };
        let (fill_v, fill_u) = fill.unwrap_or((0, 0));
        if a >= w as u128 {
            let v = if fill_v == 1 { mask(w) } else { 0 };
            let u = if fill_u == 1 { mask(w) } else { 0 };
            return Logic::from_planes(w, v, u).norm();
        }
        let a = a as u32;
        let ext = mask(w) & !mask(w - a);
        let mut v = self.val >> a;
        let mut u = self.unk >> a;
        if fill_v == 1 {
            v |= ext;
        }
        if fill_u == 1 {
            u |= ext;
        }
        Logic::from_planes(w, v, u).norm()
    }

    /// Bitwise merge used by `?:` with an unknown condition.
    pub fn merge(&self, rhs: &Logic) -> Logic {
        let a = self.norm();
        let b = rhs.norm();
        let unk = a.unk | b.unk | (a.val ^ b.val);
        Logic::from_planes(self.width, a.val & !unk, unk)
    }

    /// Wildcard match used by `casez`/`casex`. `care` bits set to 0 are ignored.
    pub fn matches_masked(&self, rhs: &Logic, care: u128) -> bool {
        let a = self.norm();
        let b = rhs.norm();
        ((a.val ^ b.val) | (a.unk ^ b.unk)) & care == 0
    }

    /// Mask of bits that are `z` (for `casez`) or `x`/`z` (for `casex`).
    pub fn wildcard_mask(&self, include_x: bool) -> u128 {
        if include_x {
            self.unk
        } else {
            self.unk & self.val
        }
    }

    /// Hex rendering with one digit per nibble, `x`/`z` for unknown nibbles.
    pub fn to_hex(&self) -> String {
        let digits = self.width.div_ceil(4);
        let mut s = String::with_capacity(digits as usize);
        for d in (0..digits).rev() {
            let lo = d * 4;
            let n = (self.width - lo).min(4);
            let m = mask(n);
            let u = (self.unk >> lo) & m;
            let v = (self.val >> lo) & m;
            if u == 0 {
                s.push(char::from_digit(v as u32, 16).unwrap());
            } else if u == m && v == m {
                s.push('z');
            } else if u == m && v == 0 {
                s.push('x');
            } else {
                s.push('X');
            }
        }
        s
    }
}

pub fn tri(v: Option<bool>) -> Logic {
    match v {
        Some(b) => Logic::bit(b),
        None => Logic::x(1),
    }
}

pub fn sign_extend(v: u128, width: u32) -> i128 {
    if width >= 128 {
        v as i128
    } else {
        let shift = 128 - width;
        ((v << shift) as i128) >> shift
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{}", self.width, self.to_hex())
    }
}
