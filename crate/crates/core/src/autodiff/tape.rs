//! Scalar reverse-mode tape.
//!
//! Every thread owns one tape. [`Var`] is a handle to a tape node plus its
//! primal value; constants carry no node and fold away in arithmetic, so a
//! computation only records the part that depends on leaves.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{elu, sigmoid, Activation, Coeff, C64};

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    AddC,
    MulC,
    Exp,
    Sigmoid,
    Elu,
    Relu,
    Recip,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    c: f64,
    val: f64,
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
}

fn push(op: Op, a: u32, b: u32, c: f64, val: f64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let id = t.len() as u32;
        t.push(Node { op, a, b, c, val });
        Var { id, val }
    })
}

/// Clear this thread's tape. Existing variables become dangling.
pub fn reset() {
    TAPE.with(|t| t.borrow_mut().clear());
}

pub fn tape_len() -> usize {
    TAPE.with(|t| t.borrow().len())
}

#[derive(Clone, Copy, Debug)]
pub struct Var {
    id: u32,
    val: f64,
}

impl Var {
    pub fn leaf(val: f64) -> Var {
        push(Op::Leaf, CONST, CONST, 0.0, val)
    }

    pub fn constant(val: f64) -> Var {
        Var { id: CONST, val }
    }

    pub fn val(self) -> f64 {
        self.val
    }

    pub fn is_const(self) -> bool {
        self.id == CONST
    }

    fn unary(self, op: Op, c: f64, val: f64) -> Var {
        if self.is_const() {
            Var::constant(val)
        } else {
            push(op, self.id, CONST, c, val)
        }
    }

    pub fn exp(self) -> Var {
        self.unary(Op::Exp, 0.0, self.val.exp())
    }
    pub fn sigmoid(self) -> Var {
        self.unary(Op::Sigmoid, 0.0, sigmoid(self.val))
    }
    pub fn elu(self) -> Var {
        self.unary(Op::Elu, 0.0, elu(self.val))
    }
    pub fn relu(self) -> Var {
        self.unary(Op::Relu, 0.0, self.val.max(0.0))
    }
    pub fn recip(self) -> Var {
        self.unary(Op::Recip, 0.0, 1.0 / self.val)
    }
    pub fn sin(self) -> Var {
        self.unary(Op::Sin, 0.0, self.val.sin())
    }
    pub fn cos(self) -> Var {
        self.unary(Op::Cos, 0.0, self.val.cos())
    }

    pub fn add_c(self, c: f64) -> Var {
        if c == 0.0 {
            self
        } else {
            self.unary(Op::AddC, c, self.val + c)
        }
    }

    pub fn mul_c(self, c: f64) -> Var {
        if c == 1.0 {
            self
        } else if c == 0.0 {
            Var::constant(0.0)
        } else {
            self.unary(Op::MulC, c, self.val * c)
        }
    }

    pub fn activate(self, act: Activation) -> Var {
        match act {
            Activation::Identity => self,
            Activation::Exp => self.exp(),
            Activation::Sigmoid => self.sigmoid(),
            Activation::Elu => self.elu(),
            Activation::Relu => self.relu(),
        }
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, o: Var) -> Var {
        match (self.is_const(), o.is_const()) {
            (true, true) => Var::constant(self.val + o.val),
            (false, true) => self.add_c(o.val),
            (true, false) => o.add_c(self.val),
            (false, false) => push(Op::Add, self.id, o.id, 0.0, self.val + o.val),
        }
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, o: Var) -> Var {
        match (self.is_const(), o.is_const()) {
            (true, true) => Var::constant(self.val - o.val),
            (false, true) => self.add_c(-o.val),
            (true, false) => (-o).add_c(self.val),
            (false, false) => push(Op::Sub, self.id, o.id, 0.0, self.val - o.val),
        }
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, o: Var) -> Var {
        match (self.is_const(), o.is_const()) {
            (true, true) => Var::constant(self.val * o.val),
            (false, true) => self.mul_c(o.val),
            (true, false) => o.mul_c(self.val),
            (false, false) => push(Op::Mul, self.id, o.id, 0.0, self.val * o.val),
        }
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(Op::Neg, 0.0, -self.val)
    }
}

/// Adjoints of `out` with respect to every node.
fn backward(out: Var) -> Vec<f64> {
    TAPE.with(|t| {
        let t = t.borrow();
        let mut adj = vec![0.0; t.len()];
        if out.is_const() {
            return adj;
        }
        adj[out.id as usize] = 1.0;
        for i in (0..=out.id as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = t[i];
            let va = if n.a != CONST { t[n.a as usize].val } else { 0.0 };
            let (da, db) = match n.op {
                Op::Leaf => continue,
                Op::Add => (1.0, 1.0),
                Op::Sub => (1.0, -1.0),
                Op::Mul => (t[n.b as usize].val, va),
                Op::Neg => (-1.0, 0.0),
                Op::AddC => (1.0, 0.0),
                Op::MulC => (n.c, 0.0),
                Op::Exp => (n.val, 0.0),
                Op::Sigmoid => (n.val * (1.0 - n.val), 0.0),
                Op::Elu => (if va > 0.0 { 1.0 } else { n.val + 1.0 }, 0.0),
                Op::Relu => (if va > 0.0 { 1.0 } else { 0.0 }, 0.0),
                Op::Recip => (-n.val * n.val, 0.0),
                Op::Sin => (va.cos(), 0.0),
                Op::Cos => (-va.sin(), 0.0),
            };
            adj[n.a as usize] += da * g;
            if n.b != CONST {
                adj[n.b as usize] += db * g;
            }
        }
        adj
    })
}

/// d out / d leaf for each leaf.
pub fn gradient(out: Var, leaves: &[Var]) -> Vec<f64> {
    let adj = backward(out);
    leaves
        .iter()
        .map(|l| if l.is_const() { 0.0 } else { adj[l.id as usize] })
        .collect()
}

/// Recompute every node from the recorded leaf values.
pub fn replay() -> Vec<f64> {
    TAPE.with(|t| {
        let t = t.borrow();
        let mut v: Vec<f64> = Vec::with_capacity(t.len());
        for n in t.iter() {
            let a = if n.a != CONST { v[n.a as usize] } else { 0.0 };
            let b = if n.b != CONST { v[n.b as usize] } else { 0.0 };
            v.push(match n.op {
                Op::Leaf => n.val,
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Neg => -a,
                Op::AddC => a + n.c,
                Op::MulC => a * n.c,
                Op::Exp => a.exp(),
                Op::Sigmoid => sigmoid(a),
                Op::Elu => elu(a),
                Op::Relu => a.max(0.0),
                Op::Recip => 1.0 / a,
                Op::Sin => a.sin(),
                Op::Cos => a.cos(),
            });
        }
        v
    })
}

/// Recorded primal values in node order.
pub fn primals() -> Vec<f64> {
    TAPE.with(|t| t.borrow().iter().map(|n| n.val).collect())
}

/// Complex number over two taped reals.
#[derive(Clone, Copy, Debug)]
pub struct CVar {
    pub re: Var,
    pub im: Var,
}

impl CVar {
    pub fn real(re: Var) -> CVar {
        CVar {
            re,
            im: Var::constant(0.0),
        }
    }

    /// The real part as a loss value; a taped imaginary part is an error.
    pub fn into_real_loss(self) -> Result<Var> {
        if !self.im.is_const() || self.im.val != 0.0 {
            return Err(Error::UnsupportedOp("loss has an imaginary part".into()));
        }
        Ok(self.re)
    }
}

impl Add for CVar {
    type Output = CVar;
    fn add(self, o: CVar) -> CVar {
        CVar {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl Sub for CVar {
    type Output = CVar;
    fn sub(self, o: CVar) -> CVar {
        CVar {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}

impl Mul for CVar {
    type Output = CVar;
    fn mul(self, o: CVar) -> CVar {
        CVar {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl Neg for CVar {
    type Output = CVar;
    fn neg(self) -> CVar {
        CVar {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Coeff for CVar {
    const TAPED: bool = true;

    fn from_c64(c: C64) -> Self {
        CVar {
            re: Var::constant(c.re),
            im: Var::constant(c.im),
        }
    }
    fn value(&self) -> C64 {
        C64::new(self.re.val, self.im.val)
    }
    fn is_structural_zero(&self) -> bool {
        self.re.is_const() && self.im.is_const() && self.re.val == 0.0 && self.im.val == 0.0
    }
    fn conj(self) -> Self {
        CVar {
            re: self.re,
            im: -self.im,
        }
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        if self.im.is_const() && self.im.val == 0.0 {
            return CVar::real(e);
        }
        CVar {
            re: e * self.im.cos(),
            im: e * self.im.sin(),
        }
    }
    fn recip(self) -> Self {
        if self.im.is_const() && self.im.val == 0.0 {
            return CVar::real(self.re.recip());
        }
        let inv = (self.re * self.re + self.im * self.im).recip();
        CVar {
            re: self.re * inv,
            im: -(self.im * inv),
        }
    }
    fn activate_real(self, act: Activation) -> Self {
        CVar::real(self.re.activate(act))
    }
    fn scale(self, s: f64) -> Self {
        CVar {
            re: self.re.mul_c(s),
            im: self.im.mul_c(s),
        }
    }
    fn norm_sqr(self) -> Self {
        CVar::real(self.re * self.re + self.im * self.im)
    }
    fn real_part(self) -> Self {
        CVar::real(self.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_fold() {
        reset();
        let a = Var::constant(2.0) * Var::constant(3.0) + Var::constant(1.0);
        assert!(a.is_const());
        assert_eq!(a.val(), 7.0);
        let x = Var::leaf(1.5);
        let z = Var::constant(0.0) * x;
        assert!(z.is_const());
        assert_eq!(tape_len(), 1);
    }

    #[test]
    fn derivatives_of_primitives() {
        reset();
        let x = Var::leaf(0.3);
        let y = Var::leaf(-0.7);
        let f = (x * y).exp() + x.sigmoid() - y.elu() + (x - y).recip() + x.sin() * y.cos() + y.relu();
        let g = gradient(f, &[x, y]);
        let (xv, yv) = (0.3f64, -0.7f64);
        let s = sigmoid(xv);
        let gx = yv * (xv * yv).exp() + s * (1.0 - s) - 1.0 / (xv - yv).powi(2) + xv.cos() * yv.cos();
        let gy = xv * (xv * yv).exp() - yv.exp() + 1.0 / (xv - yv).powi(2) - xv.sin() * yv.sin();
        assert!((g[0] - gx).abs() < 1e-14);
        assert!((g[1] - gy).abs() < 1e-14);
    }

    #[test]
    fn replay_reproduces_primals() {
        reset();
        let x = Var::leaf(0.9);
        let c = CVar { re: x, im: Var::leaf(0.2) };
        let _ = (c * c).exp().recip() + c.conj();
        let rec = primals();
        let rep = replay();
        assert_eq!(rec.len(), rep.len());
        for (a, b) in rec.iter().zip(&rep) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn complex_gradient_matches_closed_form() {
        reset();
        // |exp(i t)|^2 = 1 so the derivative in t vanishes; Re exp(i t) = cos t.
        let t = Var::leaf(0.4);
        let z = CVar { re: Var::constant(0.0), im: t }.exp();
        let g = gradient(z.re, &[t]);
        assert!((g[0] + 0.4f64.sin()).abs() < 1e-15);
        assert!(matches!(z.into_real_loss(), Err(Error::UnsupportedOp(_))));
    }
}
