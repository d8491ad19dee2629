//! Single-scan stack evaluation of flat expressions over mesh grids.

use thiserror::Error;

use crate::expr::{BinaryOp, Expr, IcOrder, Literal, Notation, Side, Token, UnaryOp, Var};

/// Inclusive linspace `lo + i·(hi−lo)/(n−1)`; a single-point axis sits at `lo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 1, "axis needs at least one point");
        Axis { lo, hi, n }
    }

    pub fn point(v: f64) -> Self {
        Axis { lo: v, hi: v, n: 1 }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else if i == self.n - 1 {
            self.hi
        } else {
            self.lo + i as f64 * (self.hi - self.lo) / (self.n - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }
}

/// Case domain; the source of `x_min`, `t_max`, ... literal values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub t: (f64, f64),
}

impl Bounds {
    pub fn get(&self, v: Var, side: Side) -> f64 {
        let (lo, hi) = match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::T => self.t,
        };
        match side {
            Side::Min => lo,
            Side::Max => hi,
        }
    }

    pub fn literal(&self, l: Literal) -> f64 {
        match l {
            Literal::Bound(v, side) => self.get(v, side),
            other => other.numeric().expect("domain-free literal"),
        }
    }
}

/// Mesh with a precomputed grid for every non-literal leaf.
///
/// Layout is x-major, then y, then t: `index = (ix·ny + iy)·nt + it`.
#[derive(Clone, Debug)]
pub struct Dataset {
    axes: [Axis; 3],
    bounds: Bounds,
    coords: [Vec<f64>; 3],
    ic: [Vec<f64>; 6],
}

impl Dataset {
    /// `ic(x, y)` returns the field family `[I, I_x, I_y, I_xx, I_xy, I_yy]`.
    pub fn new(axes: [Axis; 3], bounds: Bounds, ic: impl Fn(f64, f64) -> [f64; 6]) -> Self {
        let [ax, ay, at] = axes;
        let len = ax.n * ay.n * at.n;
        let mut coords: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(len));
        let mut fam: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(len));
        for ix in 0..ax.n {
            let x = ax.value(ix);
            for iy in 0..ay.n {
                let y = ay.value(iy);
                let f = ic(x, y);
                for it in 0..at.n {
                    coords[0].push(x);
                    coords[1].push(y);
                    coords[2].push(at.value(it));
                    for (g, v) in fam.iter_mut().zip(f) {
                        g.push(v);
                    }
                }
            }
        }
        Dataset { axes, bounds, coords, ic: fam }
    }

    pub fn len(&self) -> usize {
        self.coords[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.axes[0].n, self.axes[1].n, self.axes[2].n)
    }

    pub fn axis(&self, v: Var) -> Axis {
        self.axes[v as usize]
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn index(&self, ix: usize, iy: usize, it: usize) -> usize {
        (ix * self.axes[1].n + iy) * self.axes[2].n + it
    }

    pub fn coord(&self, v: Var) -> &[f64] {
        &self.coords[v as usize]
    }

    pub fn ic(&self, order: IcOrder) -> Option<&[f64]> {
        order.family_index().map(|i| self.ic[i].as_slice())
    }

    pub fn ic_at(&self, idx: usize) -> [f64; 6] {
        std::array::from_fn(|k| self.ic[k][idx])
    }

    pub fn point(&self, idx: usize) -> (f64, f64, f64) {
        (self.coords[0][idx], self.coords[1][idx], self.coords[2][idx])
    }

    /// Grid of a non-literal leaf; literals are broadcast scalars and return `None`.
    pub fn leaf_grid(&self, tok: Token) -> Option<&[f64]> {
        match tok {
            Token::Var(v) => Some(self.coord(v)),
            Token::Ic(o) => self.ic(o),
            _ => None,
        }
    }
}

/// Evaluated field plus the domain-fault flag (any non-finite entry).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub values: Vec<f64>,
    pub fault: bool,
}

impl Grid {
    pub fn new(values: Vec<f64>) -> Self {
        let fault = values.iter().any(|v| !v.is_finite());
        Grid { values, fault }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no value for learnable constant slot {slot}")]
    MissingConstant { slot: u16 },
    #[error("initial-condition derivative {token} has no stored grid")]
    MissingIcGrid { token: String },
    #[error("malformed token sequence")]
    Malformed,
}

enum Val<'a> {
    S(f64),
    R(&'a [f64]),
    A(Vec<f64>),
}

/// Reusable evaluation scratch: operand stack and a pool of grid buffers.
#[derive(Default)]
pub struct Evaluator {
    pool: Vec<Vec<f64>>,
    max_stack: usize,
}

fn unary_in_place(op: UnaryOp, buf: &mut [f64]) {
    macro_rules! each {
        ($f:expr) => {
            for v in buf.iter_mut() {
                *v = $f(*v);
            }
        };
    }
    match op {
        UnaryOp::Neg => each!(|v: f64| -v),
        UnaryOp::Log => each!(f64::ln),
        UnaryOp::Exp => each!(f64::exp),
        UnaryOp::Cos => each!(f64::cos),
        UnaryOp::Sin => each!(f64::sin),
        UnaryOp::Sqrt => each!(f64::sqrt),
        UnaryOp::Asin => each!(f64::asin),
        UnaryOp::Acos => each!(f64::acos),
        UnaryOp::Tanh => each!(f64::tanh),
        UnaryOp::Sech => each!(|v| UnaryOp::Sech.apply(v)),
    }
}

enum Operand<'x> {
    S(f64),
    V(&'x [f64]),
}

/// `buf[i] = op(buf[i], b[i])` when `left`, else `buf[i] = op(b[i], buf[i])`.
fn binary_in_place(op: BinaryOp, buf: &mut [f64], other: Operand<'_>, left: bool) {
    macro_rules! zip {
        ($f:expr) => {
            match (other, left) {
                (Operand::S(s), true) => buf.iter_mut().for_each(|v| *v = $f(*v, s)),
                (Operand::S(s), false) => buf.iter_mut().for_each(|v| *v = $f(s, *v)),
                (Operand::V(o), true) => buf.iter_mut().zip(o).for_each(|(v, &w)| *v = $f(*v, w)),
                (Operand::V(o), false) => buf.iter_mut().zip(o).for_each(|(v, &w)| *v = $f(w, *v)),
            }
        };
    }
    match op {
        BinaryOp::Add => zip!(|a: f64, b: f64| a + b),
        BinaryOp::Sub => zip!(|a: f64, b: f64| a - b),
        BinaryOp::Mul => zip!(|a: f64, b: f64| a * b),
        BinaryOp::Div => zip!(|a: f64, b: f64| a / b),
        BinaryOp::Pow => zip!(f64::powf),
    }
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Largest operand-stack size reached by the most recent evaluation.
    pub fn last_max_stack(&self) -> usize {
        self.max_stack
    }

    /// Return a buffer to the pool.
    pub fn recycle(&mut self, mut buf: Vec<f64>) {
        buf.clear();
        self.pool.push(buf);
    }

    fn fresh(&mut self, src: &[f64]) -> Vec<f64> {
        let mut v = self.pool.pop().unwrap_or_default();
        v.clear();
        v.extend_from_slice(src);
        v
    }

    fn leaf<'a>(tok: Token, data: &'a Dataset, consts: &[f64]) -> Result<Val<'a>, EvalError> {
        Ok(match tok {
            Token::Lit(l) => Val::S(data.bounds.literal(l)),
            Token::Learnable(slot) => {
                Val::S(*consts.get(slot as usize).ok_or(EvalError::MissingConstant { slot })?)
            }
            Token::Var(_) | Token::Ic(_) => {
                Val::R(data.leaf_grid(tok).ok_or_else(|| EvalError::MissingIcGrid { token: tok.spelling() })?)
            }
            _ => return Err(EvalError::Malformed),
        })
    }

    fn apply_unary<'a>(&mut self, op: UnaryOp, a: Val<'a>) -> Val<'a> {
        match a {
            Val::S(s) => Val::S(op.apply(s)),
            Val::R(r) => {
                let mut buf = self.fresh(r);
                unary_in_place(op, &mut buf);
                Val::A(buf)
            }
            Val::A(mut buf) => {
                unary_in_place(op, &mut buf);
                Val::A(buf)
            }
        }
    }

    fn apply_binary<'a>(&mut self, op: BinaryOp, a: Val<'a>, b: Val<'a>) -> Val<'a> {
        match (a, b) {
            (Val::S(x), Val::S(y)) => Val::S(op.apply(x, y)),
            (Val::A(mut buf), Val::S(y)) => {
                binary_in_place(op, &mut buf, Operand::S(y), true);
                Val::A(buf)
            }
            (Val::A(mut buf), Val::R(r)) => {
                binary_in_place(op, &mut buf, Operand::V(r), true);
                Val::A(buf)
            }
            (Val::A(mut buf), Val::A(other)) => {
                binary_in_place(op, &mut buf, Operand::V(&other), true);
                self.recycle(other);
                Val::A(buf)
            }
            (Val::S(x), Val::A(mut buf)) => {
                binary_in_place(op, &mut buf, Operand::S(x), false);
                Val::A(buf)
            }
            (Val::R(r), Val::A(mut buf)) => {
                binary_in_place(op, &mut buf, Operand::V(r), false);
                Val::A(buf)
            }
            (Val::R(r), Val::S(y)) => {
                let mut buf = self.fresh(r);
                binary_in_place(op, &mut buf, Operand::S(y), true);
                Val::A(buf)
            }
            (Val::S(x), Val::R(r)) => {
                let mut buf = self.fresh(r);
                binary_in_place(op, &mut buf, Operand::S(x), false);
                Val::A(buf)
            }
            (Val::R(r), Val::R(q)) => {
                let mut buf = self.fresh(r);
                binary_in_place(op, &mut buf, Operand::V(q), true);
                Val::A(buf)
            }
        }
    }

    fn step<'a>(
        &mut self,
        tok: Token,
        notation: Notation,
        stack: &mut Vec<Val<'a>>,
        data: &'a Dataset,
        consts: &[f64],
    ) -> Result<(), EvalError> {
        match tok {
            Token::Unary(op) => {
                let a = stack.pop().ok_or(EvalError::Malformed)?;
                let r = self.apply_unary(op, a);
                stack.push(r);
            }
            Token::Binary(op) => {
                let (a, b) = match notation {
                    Notation::Postfix => {
                        let b = stack.pop().ok_or(EvalError::Malformed)?;
                        (stack.pop().ok_or(EvalError::Malformed)?, b)
                    }
                    Notation::Prefix => {
                        let a = stack.pop().ok_or(EvalError::Malformed)?;
                        (a, stack.pop().ok_or(EvalError::Malformed)?)
                    }
                };
                let r = self.apply_binary(op, a, b);
                stack.push(r);
            }
            leaf => stack.push(Self::leaf(leaf, data, consts)?),
        }
        self.max_stack = self.max_stack.max(stack.len());
        Ok(())
    }

    /// Evaluate into a full-length buffer taken from the pool.
    pub fn eval_values(
        &mut self,
        tokens: &[Token],
        notation: Notation,
        data: &Dataset,
        consts: &[f64],
    ) -> Result<Vec<f64>, EvalError> {
        let mut stack: Vec<Val> = Vec::with_capacity(16);
        self.max_stack = 0;
        match notation {
            Notation::Postfix => {
                for &tok in tokens {
                    self.step(tok, notation, &mut stack, data, consts)?;
                }
            }
            Notation::Prefix => {
                for &tok in tokens.iter().rev() {
                    self.step(tok, notation, &mut stack, data, consts)?;
                }
            }
        }
        if stack.len() != 1 {
            return Err(EvalError::Malformed);
        }
        Ok(match stack.pop().unwrap() {
            Val::S(s) => {
                let mut v = self.pool.pop().unwrap_or_default();
                v.clear();
                v.resize(data.len(), s);
                v
            }
            Val::R(r) => self.fresh(r),
            Val::A(a) => a,
        })
    }

    pub fn eval(&mut self, e: &Expr, data: &Dataset, consts: &[f64]) -> Result<Grid, EvalError> {
        self.eval_values(e.tokens(), e.notation(), data, consts).map(Grid::new)
    }
}

pub fn eval_grid(e: &Expr, data: &Dataset, consts: &[f64]) -> Result<Grid, EvalError> {
    Evaluator::new().eval(e, data, consts)
}

/// Leaf values at a single point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointInput {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// `[I, I_x, I_y, I_xx, I_xy, I_yy]` at the point.
    pub ic: [f64; 6],
}

impl PointInput {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        PointInput { x, y, t, ic: [0.0; 6] }
    }
}

pub fn eval_point(e: &Expr, at: &PointInput, bounds: &Bounds, consts: &[f64]) -> Result<f64, EvalError> {
    let mut stack: Vec<f64> = Vec::with_capacity(16);
    let mut step = |tok: Token| -> Result<(), EvalError> {
        let v = match tok {
            Token::Var(Var::X) => at.x,
            Token::Var(Var::Y) => at.y,
            Token::Var(Var::T) => at.t,
            Token::Ic(o) => {
                at.ic[o.family_index().ok_or_else(|| EvalError::MissingIcGrid { token: tok.spelling() })?]
            }
            Token::Lit(l) => bounds.literal(l),
            Token::Learnable(slot) => {
                *consts.get(slot as usize).ok_or(EvalError::MissingConstant { slot })?
            }
            Token::Unary(op) => op.apply(stack.pop().ok_or(EvalError::Malformed)?),
            Token::Binary(op) => {
                let top = stack.pop().ok_or(EvalError::Malformed)?;
                let next = stack.pop().ok_or(EvalError::Malformed)?;
                match e.notation() {
                    Notation::Postfix => op.apply(next, top),
                    Notation::Prefix => op.apply(top, next),
                }
            }
        };
        stack.push(v);
        Ok(())
    };
    match e.notation() {
        Notation::Postfix => e.tokens().iter().try_for_each(|&t| step(t))?,
        Notation::Prefix => e.tokens().iter().rev().try_for_each(|&t| step(t))?,
    }
    match stack.as_slice() {
        [v] => Ok(*v),
        _ => Err(EvalError::Malformed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseMode};

    fn unit_data() -> Dataset {
        let b = Bounds { x: (0.0, 2.0), y: (0.0, 3.0), t: (1.0, 3.0) };
        Dataset::new([Axis::new(0.0, 2.0, 3), Axis::new(0.0, 3.0, 4), Axis::new(1.0, 3.0, 2)], b, |x, y| {
            [x + y, 1.0, 1.0, 0.0, 0.0, 0.0]
        })
    }

    fn pf(s: &str) -> Expr {
        parse(s, Notation::Postfix, &ParseMode::free()).unwrap()
    }

    #[test]
    fn linspace_endpoints_are_exact() {
        let a = Axis::new(0.1, 2.1, 10);
        assert_eq!(a.value(0), 0.1);
        assert_eq!(a.value(9), 2.1);
        assert_eq!(Axis::point(0.5).values(), vec![0.5]);
    }

    #[test]
    fn layout_is_x_major() {
        let d = unit_data();
        let idx = d.index(2, 1, 1);
        assert_eq!(d.point(idx), (2.0, 1.0, 3.0));
        assert_eq!(d.ic_at(idx)[0], 3.0);
    }

    #[test]
    fn grid_sum() {
        let d = unit_data();
        let g = eval_grid(&pf("x y +"), &d, &[]).unwrap();
        assert!(!g.fault);
        assert_eq!(g.values[d.index(1, 2, 0)], 3.0);
    }

    #[test]
    fn scalar_expressions_broadcast() {
        let d = unit_data();
        let g = eval_grid(&parse("sech 0", Notation::Prefix, &ParseMode::Search).unwrap(), &d, &[]).unwrap();
        assert!(g.values.iter().all(|&v| v == 1.0));
        assert_eq!(g.values.len(), d.len());
        let g = eval_grid(&parse("log ~ 1", Notation::Prefix, &ParseMode::Search).unwrap(), &d, &[]).unwrap();
        assert!(g.fault);
    }

    #[test]
    fn bound_literals_and_constants() {
        let d = unit_data();
        let e = parse("y_max C +", Notation::Postfix, &ParseMode::Search).unwrap();
        assert_eq!(eval_grid(&e, &d, &[0.5]).unwrap().values[0], 3.5);
        assert_eq!(eval_grid(&e, &d, &[]), Err(EvalError::MissingConstant { slot: 0 }));
    }

    #[test]
    fn point_evaluation() {
        let b = Bounds { x: (0.0, 1.0), y: (0.0, 1.0), t: (0.0, 1.0) };
        let p = PointInput::new(2.0, 0.0, 3.0);
        assert_eq!(eval_point(&pf("2 4 *"), &p, &b, &[]).unwrap(), 8.0);
        assert_eq!(eval_point(&pf("x t ^"), &p, &b, &[]).unwrap(), 8.0);
        let e = parse("- x t", Notation::Prefix, &ParseMode::Search).unwrap();
        assert_eq!(eval_point(&e, &p, &b, &[]).unwrap(), -1.0);
    }

    #[test]
    fn prefix_operand_order() {
        let d = unit_data();
        let e = parse("/ x t", Notation::Prefix, &ParseMode::Search).unwrap();
        let g = eval_grid(&e, &d, &[]).unwrap();
        let idx = d.index(2, 0, 1);
        assert_eq!(g.values[idx], 2.0 / 3.0);
    }

    #[test]
    fn division_by_zero_is_ieee() {
        let d = unit_data();
        let g = eval_grid(&pf("1 x /"), &d, &[]).unwrap();
        assert_eq!(g.values[0], f64::INFINITY);
        assert!(g.fault);
        let g = eval_grid(&pf("1 1 x / asin ^"), &d, &[]).unwrap();
        assert!(!g.fault);
    }
}
