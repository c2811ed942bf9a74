//! Truncated third-order Taylor jets in three ambient variables.
//!
//! A [`Jet3`] carries a scalar value together with its gradient, Hessian and
//! third-derivative tensor at a point. Arithmetic follows the truncated
//! composition rules, so expressions built from seeded coordinates carry
//! exact derivatives up to order three.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Packed index of the symmetric pair `(i, j)`.
#[inline]
fn h_idx(i: usize, j: usize) -> usize {
    const T: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    T[i][j]
}

/// Packed index of the symmetric triple `(i, j, k)`.
#[inline]
fn t_idx(i: usize, j: usize, k: usize) -> usize {
    let mut s = [i, j, k];
    s.sort_unstable();
    match s {
        [0, 0, 0] => 0,
        [0, 0, 1] => 1,
        [0, 0, 2] => 2,
        [0, 1, 1] => 3,
        [0, 1, 2] => 4,
        [0, 2, 2] => 5,
        [1, 1, 1] => 6,
        [1, 1, 2] => 7,
        [1, 2, 2] => 8,
        _ => 9,
    }
}

/// Sorted representatives of the six Hessian entries.
const H_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
/// Sorted representatives of the ten third-derivative entries.
const T_TRIPLES: [(usize, usize, usize); 10] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 0, 2),
    (0, 1, 1),
    (0, 1, 2),
    (0, 2, 2),
    (1, 1, 1),
    (1, 1, 2),
    (1, 2, 2),
    (2, 2, 2),
];

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet3 {
    pub value: f64,
    pub grad: [f64; 3],
    hess: [f64; 6],
    third: [f64; 10],
}

impl Jet3 {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Self::default()
        }
    }

    /// The coordinate function `x_axis` seeded at the point `x`.
    pub fn variable(x: [f64; 3], axis: usize) -> Self {
        let mut j = Self::constant(x[axis]);
        j.grad[axis] = 1.0;
        j
    }

    /// All three coordinate jets at `x`.
    pub fn seed(x: [f64; 3]) -> [Self; 3] {
        [Self::variable(x, 0), Self::variable(x, 1), Self::variable(x, 2)]
    }

    /// Build from a full Hessian and third tensor, reading only the
    /// upper-sorted entries.
    pub fn from_parts(
        value: f64,
        grad: [f64; 3],
        hess: [[f64; 3]; 3],
        third: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let mut j = Self {
            value,
            grad,
            ..Self::default()
        };
        for (n, &(a, b)) in H_PAIRS.iter().enumerate() {
            j.hess[n] = hess[a][b];
        }
        for (n, &(a, b, c)) in T_TRIPLES.iter().enumerate() {
            j.third[n] = third(a, b, c);
        }
        j
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[h_idx(i, j)]
    }

    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[t_idx(i, j, k)]
    }

    pub fn hessian(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.hess(i, j);
            }
        }
        m
    }

    /// Partial derivative along `axis`, as a jet one order lower.
    ///
    /// The returned third tensor is zero: after `n` differentiations only
    /// derivatives up to order `3 - n` are meaningful.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut d = Self::constant(self.grad[axis]);
        for j in 0..3 {
            d.grad[j] = self.hess(axis, j);
        }
        for (n, &(a, b)) in H_PAIRS.iter().enumerate() {
            d.hess[n] = self.third(axis, a, b);
        }
        d
    }

    /// Chain rule for `f(self)` given `f`, `f'`, `f''`, `f'''` at `self.value`.
    fn compose(&self, f: [f64; 4]) -> Self {
        let g = &self.grad;
        let mut r = Self::constant(f[0]);
        for i in 0..3 {
            r.grad[i] = f[1] * g[i];
        }
        for (n, &(i, j)) in H_PAIRS.iter().enumerate() {
            r.hess[n] = f[1] * self.hess[n] + f[2] * g[i] * g[j];
        }
        for (n, &(i, j, k)) in T_TRIPLES.iter().enumerate() {
            r.third[n] = f[1] * self.third[n]
                + f[2] * (self.hess(i, j) * g[k] + self.hess(i, k) * g[j] + self.hess(j, k) * g[i])
                + f[3] * g[i] * g[j] * g[k];
        }
        r
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn sqrt(&self) -> Result<Self> {
        let v = self.value;
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::ArithmeticDomain("sqrt of non-positive value"));
        }
        let s = v.sqrt();
        Ok(self.compose([s, 0.5 / s, -0.25 / (v * s), 0.375 / (v * v * s)]))
    }

    pub fn recip(&self) -> Result<Self> {
        let v = self.value;
        if v == 0.0 || !v.is_finite() {
            return Err(Error::ArithmeticDomain("reciprocal of zero"));
        }
        let r = 1.0 / v;
        Ok(self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn try_div(&self, rhs: &Self) -> Result<Self> {
        Ok(*self * rhs.recip()?)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut r = *self;
        r.value *= s;
        r.grad.iter_mut().for_each(|v| *v *= s);
        r.hess.iter_mut().for_each(|v| *v *= s);
        r.third.iter_mut().for_each(|v| *v *= s);
        r
    }

    fn zip(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut r = *self;
        r.value = f(self.value, rhs.value);
        for i in 0..3 {
            r.grad[i] = f(self.grad[i], rhs.grad[i]);
        }
        for i in 0..6 {
            r.hess[i] = f(self.hess[i], rhs.hess[i]);
        }
        for i in 0..10 {
            r.third[i] = f(self.third[i], rhs.third[i]);
        }
        r
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, b: Jet3) -> Jet3 {
        let a = self;
        let mut r = Jet3::constant(a.value * b.value);
        for i in 0..3 {
            r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
        }
        for (n, &(i, j)) in H_PAIRS.iter().enumerate() {
            r.hess[n] = a.hess[n] * b.value
                + a.grad[i] * b.grad[j]
                + a.grad[j] * b.grad[i]
                + a.value * b.hess[n];
        }
        for (n, &(i, j, k)) in T_TRIPLES.iter().enumerate() {
            r.third[n] = a.third[n] * b.value
                + a.value * b.third[n]
                + a.hess(i, j) * b.grad[k]
                + a.hess(i, k) * b.grad[j]
                + a.hess(j, k) * b.grad[i]
                + a.grad[i] * b.hess(j, k)
                + a.grad[j] * b.hess(i, k)
                + a.grad[k] * b.hess(i, j);
        }
        r
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, s: f64) -> Jet3 {
        self.scale(s)
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, s: f64) -> Jet3 {
        self.value += s;
        self
    }
}

/// Panicking division; prefer [`Jet3::try_div`] when the divisor may vanish.
impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, rhs: Jet3) -> Jet3 {
        self.try_div(&rhs).expect("jet division by zero")
    }
}

/// Binary operations supported by [`jet_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementary functions supported by [`jet_func`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetFn {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Recip,
}

pub fn jet_arith(a: &Jet3, b: &Jet3, op: JetOp) -> Result<Jet3> {
    Ok(match op {
        JetOp::Add => *a + *b,
        JetOp::Sub => *a - *b,
        JetOp::Mul => *a * *b,
        JetOp::Div => a.try_div(b)?,
    })
}

pub fn jet_func(a: &Jet3, f: JetFn) -> Result<Jet3> {
    match f {
        JetFn::Exp => Ok(a.exp()),
        JetFn::Sin => Ok(a.sin()),
        JetFn::Cos => Ok(a.cos()),
        JetFn::Sqrt => a.sqrt(),
        JetFn::Recip => a.recip(),
    }
}

/// A scalar field on ℝ³ built from coordinates, constants and elementary
/// functions.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpr {
    Const(f64),
    Coord(usize),
    Add(Box<FieldExpr>, Box<FieldExpr>),
    Sub(Box<FieldExpr>, Box<FieldExpr>),
    Mul(Box<FieldExpr>, Box<FieldExpr>),
    Div(Box<FieldExpr>, Box<FieldExpr>),
    Neg(Box<FieldExpr>),
    Func(JetFn, Box<FieldExpr>),
}

impl FieldExpr {
    pub fn x(axis: usize) -> Self {
        assert!(axis < 3, "coordinate axis out of range");
        FieldExpr::Coord(axis)
    }

    pub fn c(v: f64) -> Self {
        FieldExpr::Const(v)
    }

    pub fn exp(self) -> Self {
        FieldExpr::Func(JetFn::Exp, Box::new(self))
    }

    pub fn sin(self) -> Self {
        FieldExpr::Func(JetFn::Sin, Box::new(self))
    }

    pub fn cos(self) -> Self {
        FieldExpr::Func(JetFn::Cos, Box::new(self))
    }

    pub fn sqrt(self) -> Self {
        FieldExpr::Func(JetFn::Sqrt, Box::new(self))
    }

    /// `e^{x₁}(cos x₂ + x₃)`.
    pub fn exp_cos_stream() -> Self {
        FieldExpr::x(0).exp() * (FieldExpr::x(1).cos() + FieldExpr::x(2))
    }

    /// `x₁x₂x₃`.
    pub fn triple_product() -> Self {
        FieldExpr::x(0) * FieldExpr::x(1) * FieldExpr::x(2)
    }

    /// Evaluate with the coordinates replaced by arbitrary jets, which
    /// composes the expression with the map those jets describe.
    pub fn eval_with(&self, vars: &[Jet3; 3]) -> Result<Jet3> {
        Ok(match self {
            FieldExpr::Const(v) => Jet3::constant(*v),
            FieldExpr::Coord(i) => vars[*i],
            FieldExpr::Add(a, b) => a.eval_with(vars)? + b.eval_with(vars)?,
            FieldExpr::Sub(a, b) => a.eval_with(vars)? - b.eval_with(vars)?,
            FieldExpr::Mul(a, b) => a.eval_with(vars)? * b.eval_with(vars)?,
            FieldExpr::Div(a, b) => a.eval_with(vars)?.try_div(&b.eval_with(vars)?)?,
            FieldExpr::Neg(a) => -a.eval_with(vars)?,
            FieldExpr::Func(f, a) => jet_func(&a.eval_with(vars)?, *f)?,
        })
    }

    /// Value and derivatives to order three at `x`.
    pub fn jet(&self, x: [f64; 3]) -> Result<Jet3> {
        self.eval_with(&Jet3::seed(x))
    }

    /// Plain value at `x`.
    pub fn value(&self, x: [f64; 3]) -> Result<f64> {
        Ok(match self {
            FieldExpr::Const(v) => *v,
            FieldExpr::Coord(i) => x[*i],
            FieldExpr::Add(a, b) => a.value(x)? + b.value(x)?,
            FieldExpr::Sub(a, b) => a.value(x)? - b.value(x)?,
            FieldExpr::Mul(a, b) => a.value(x)? * b.value(x)?,
            FieldExpr::Div(a, b) => {
                let d = b.value(x)?;
                if d == 0.0 {
                    return Err(Error::ArithmeticDomain("division by zero"));
                }
                a.value(x)? / d
            }
            FieldExpr::Neg(a) => -a.value(x)?,
            FieldExpr::Func(f, a) => {
                let v = a.value(x)?;
                match f {
                    JetFn::Exp => v.exp(),
                    JetFn::Sin => v.sin(),
                    JetFn::Cos => v.cos(),
                    JetFn::Sqrt if v > 0.0 => v.sqrt(),
                    JetFn::Sqrt => return Err(Error::ArithmeticDomain("sqrt of non-positive value")),
                    JetFn::Recip if v != 0.0 => 1.0 / v,
                    JetFn::Recip => return Err(Error::ArithmeticDomain("reciprocal of zero")),
                }
            }
        })
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl std::ops::$tr for FieldExpr {
            type Output = FieldExpr;
            fn $method(self, rhs: FieldExpr) -> FieldExpr {
                FieldExpr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl std::ops::Neg for FieldExpr {
    type Output = FieldExpr;
    fn neg(self) -> FieldExpr {
        FieldExpr::Neg(Box::new(self))
    }
}
