//! Symbolic differentiation directly on flat token arrays.
//!
//! Subexpressions are index spans of the input; derivative pieces are appended to
//! one output buffer. Operands always sit side by side at the end of the buffer,
//! so combining them only needs the operator pushed (postfix) or inserted before
//! the left operand (prefix). Identity rules are applied at that moment.

use thiserror::Error;

use crate::expr::{split_span, BinaryOp, Expr, IcOrder, Literal, Notation, Span, Token, UnaryOp, Var};

/// How initial-condition tokens respond to spatial differentiation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum IcDerivatives {
    /// `dI/dx = I_x` and so on, from the stored family.
    #[default]
    Analytic,
    /// `I` is treated as an independent input: every derivative is 0.
    Frozen,
}

impl IcDerivatives {
    pub fn name(self) -> &'static str {
        match self {
            IcDerivatives::Analytic => "analytic",
            IcDerivatives::Frozen => "frozen",
        }
    }
}

impl std::str::FromStr for IcDerivatives {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(IcDerivatives::Analytic),
            "frozen" => Ok(IcDerivatives::Frozen),
            other => Err(format!("unknown IC derivative mode '{other}' (expected analytic|frozen)")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("derivative of {token} would need IC order {order}; only orders up to 2 are stored")]
    UnsupportedIcOrder { token: String, order: u8 },
}

struct Emitter<'a> {
    src: &'a [Token],
    notation: Notation,
    wrt: Var,
    ic: IcDerivatives,
    out: Vec<Token>,
}

impl<'a> Emitter<'a> {
    fn new(src: &'a [Token], notation: Notation, wrt: Var, ic: IcDerivatives) -> Self {
        Emitter { src, notation, wrt, ic, out: Vec::with_capacity(src.len() * 8 + 8) }
    }

    fn numeric(&self, s: Span) -> Option<f64> {
        if s.len() == 1 {
            self.out[s.start].numeric()
        } else {
            None
        }
    }

    fn is_zero(&self, s: Span) -> bool {
        self.numeric(s) == Some(0.0)
    }

    fn lit(&mut self, v: f64) -> Span {
        let start = self.out.len();
        self.out.push(Token::lit(v));
        Span::new(start, start + 1)
    }

    fn copy(&mut self, s: Span) -> Span {
        let start = self.out.len();
        self.out.extend_from_slice(&self.src[s.start..s.end]);
        Span::new(start, self.out.len())
    }

    fn replace_with_lit(&mut self, from: usize, v: f64) -> Span {
        self.out.truncate(from);
        self.lit(v)
    }

    fn place(&mut self, tok: Token, start: usize) -> Span {
        match self.notation {
            Notation::Postfix => self.out.push(tok),
            Notation::Prefix => self.out.insert(start, tok),
        }
        Span::new(start, self.out.len())
    }

    fn un(&mut self, op: UnaryOp, a: Span) -> Span {
        if let Some(v) = self.numeric(a) {
            let r = op.apply(v);
            if r.is_finite() {
                return self.replace_with_lit(a.start, r);
            }
        }
        self.place(Token::Unary(op), a.start)
    }

    /// Combine the two adjacent operands `a` and `b` (`b` ends the buffer).
    fn bin(&mut self, op: BinaryOp, a: Span, b: Span) -> Span {
        debug_assert!(a.end == b.start && b.end == self.out.len());
        let (na, nb) = (self.numeric(a), self.numeric(b));
        if let (Some(x), Some(y)) = (na, nb) {
            let r = op.apply(x, y);
            if r.is_finite() {
                return self.replace_with_lit(a.start, r);
            }
        }
        let keep_a = |em: &mut Self| {
            em.out.truncate(b.start);
            a
        };
        let keep_b = |em: &mut Self| {
            em.out.drain(a.start..a.end);
            Span::new(a.start, a.start + b.len())
        };
        match op {
            BinaryOp::Mul => {
                if na == Some(0.0) || nb == Some(0.0) {
                    return self.replace_with_lit(a.start, 0.0);
                }
                if na == Some(1.0) {
                    return keep_b(self);
                }
                if nb == Some(1.0) {
                    return keep_a(self);
                }
            }
            BinaryOp::Add => {
                if na == Some(0.0) {
                    return keep_b(self);
                }
                if nb == Some(0.0) {
                    return keep_a(self);
                }
            }
            BinaryOp::Sub => {
                if nb == Some(0.0) {
                    return keep_a(self);
                }
                if na == Some(0.0) {
                    let b = keep_b(self);
                    return self.un(UnaryOp::Neg, b);
                }
            }
            BinaryOp::Div => {
                if na == Some(0.0) {
                    return self.replace_with_lit(a.start, 0.0);
                }
                if nb == Some(1.0) {
                    return keep_a(self);
                }
            }
            BinaryOp::Pow => {
                if nb == Some(1.0) {
                    return keep_a(self);
                }
                if nb == Some(0.0) || na == Some(1.0) {
                    return self.replace_with_lit(a.start, 1.0);
                }
            }
        }
        self.place(Token::Binary(op), a.start)
    }

    /// `d · rest`, skipping the emission of `rest` when `d` is already 0.
    fn times(
        &mut self,
        d: Span,
        rest: impl FnOnce(&mut Self) -> Result<Span, DiffError>,
    ) -> Result<Span, DiffError> {
        if self.is_zero(d) {
            return Ok(d);
        }
        let r = rest(self)?;
        Ok(self.bin(BinaryOp::Mul, d, r))
    }

    fn depends(&self, s: Span) -> bool {
        self.src[s.start..s.end].iter().any(|&t| match t {
            Token::Var(v) => v == self.wrt,
            Token::Ic(_) => self.ic == IcDerivatives::Analytic && self.wrt != Var::T,
            _ => false,
        })
    }

    /// `1 − u²` with `u` copied from the source.
    fn one_minus_square(&mut self, u: Span) -> Span {
        let one = self.lit(1.0);
        let c = self.copy(u);
        let two = self.lit(2.0);
        let sq = self.bin(BinaryOp::Pow, c, two);
        self.bin(BinaryOp::Sub, one, sq)
    }

    fn deriv(&mut self, s: Span) -> Result<Span, DiffError> {
        if !self.depends(s) {
            return Ok(self.lit(0.0));
        }
        let (root, [u, w]) = split_span(self.src, self.notation, s);
        match root {
            Token::Var(_) => Ok(self.lit(1.0)),
            Token::Ic(o) => {
                let next = match self.wrt {
                    Var::X => IcOrder::new(o.dx + 1, o.dy),
                    Var::Y => IcOrder::new(o.dx, o.dy + 1),
                    Var::T => unreachable!("IC tokens do not depend on t"),
                };
                if next.total() > IcOrder::MAX_TOTAL {
                    return Err(DiffError::UnsupportedIcOrder {
                        token: root.spelling(),
                        order: next.total(),
                    });
                }
                let start = self.out.len();
                self.out.push(Token::Ic(next));
                Ok(Span::new(start, start + 1))
            }
            Token::Lit(_) | Token::Learnable(_) => Ok(self.lit(0.0)),
            Token::Unary(op) => {
                let d = self.deriv(u)?;
                match op {
                    UnaryOp::Neg => Ok(self.un(UnaryOp::Neg, d)),
                    UnaryOp::Log => {
                        let c = self.copy(u);
                        Ok(self.bin(BinaryOp::Div, d, c))
                    }
                    UnaryOp::Exp | UnaryOp::Sin | UnaryOp::Cos => self.times(d, |em| {
                        let c = em.copy(u);
                        Ok(match op {
                            UnaryOp::Exp => em.un(UnaryOp::Exp, c),
                            UnaryOp::Sin => em.un(UnaryOp::Cos, c),
                            _ => {
                                let s = em.un(UnaryOp::Sin, c);
                                em.un(UnaryOp::Neg, s)
                            }
                        })
                    }),
                    UnaryOp::Sqrt => {
                        let two = self.lit(2.0);
                        let c = self.copy(u);
                        let r = self.un(UnaryOp::Sqrt, c);
                        let den = self.bin(BinaryOp::Mul, two, r);
                        Ok(self.bin(BinaryOp::Div, d, den))
                    }
                    UnaryOp::Asin | UnaryOp::Acos => {
                        let inner = self.one_minus_square(u);
                        let den = self.un(UnaryOp::Sqrt, inner);
                        let q = self.bin(BinaryOp::Div, d, den);
                        Ok(if op == UnaryOp::Acos { self.un(UnaryOp::Neg, q) } else { q })
                    }
                    UnaryOp::Tanh => self.times(d, |em| {
                        let one = em.lit(1.0);
                        let c = em.copy(u);
                        let th = em.un(UnaryOp::Tanh, c);
                        let two = em.lit(2.0);
                        let sq = em.bin(BinaryOp::Pow, th, two);
                        Ok(em.bin(BinaryOp::Sub, one, sq))
                    }),
                    UnaryOp::Sech => self.times(d, |em| {
                        let c = em.copy(u);
                        let sh = em.un(UnaryOp::Sech, c);
                        let c = em.copy(u);
                        let th = em.un(UnaryOp::Tanh, c);
                        let p = em.bin(BinaryOp::Mul, sh, th);
                        Ok(em.un(UnaryOp::Neg, p))
                    }),
                }
            }
            Token::Binary(op) => match op {
                BinaryOp::Add | BinaryOp::Sub => {
                    let du = self.deriv(u)?;
                    let dw = self.deriv(w)?;
                    Ok(self.bin(op, du, dw))
                }
                BinaryOp::Mul => {
                    let du = self.deriv(u)?;
                    let left = self.times(du, |em| Ok(em.copy(w)))?;
                    let cu = self.copy(u);
                    let dw = self.deriv(w)?;
                    let right = self.bin(BinaryOp::Mul, cu, dw);
                    Ok(self.bin(BinaryOp::Add, left, right))
                }
                BinaryOp::Div => {
                    let du = self.deriv(u)?;
                    if !self.depends(w) {
                        let cw = self.copy(w);
                        return Ok(self.bin(BinaryOp::Div, du, cw));
                    }
                    let left = self.times(du, |em| Ok(em.copy(w)))?;
                    let cu = self.copy(u);
                    let dw = self.deriv(w)?;
                    let right = self.bin(BinaryOp::Mul, cu, dw);
                    let num = self.bin(BinaryOp::Sub, left, right);
                    let cw = self.copy(w);
                    let two = self.lit(2.0);
                    let den = self.bin(BinaryOp::Pow, cw, two);
                    Ok(self.bin(BinaryOp::Div, num, den))
                }
                BinaryOp::Pow => {
                    // f^g · (g'·ln f + g·f'/f)
                    let p = self.copy(s);
                    let dg = self.deriv(w)?;
                    let t1 = self.times(dg, |em| {
                        let cf = em.copy(u);
                        Ok(em.un(UnaryOp::Log, cf))
                    })?;
                    let cg = self.copy(w);
                    let df = self.deriv(u)?;
                    let q = if self.is_zero(df) {
                        df
                    } else {
                        let cf = self.copy(u);
                        self.bin(BinaryOp::Div, df, cf)
                    };
                    let t2 = self.bin(BinaryOp::Mul, cg, q);
                    let sum = self.bin(BinaryOp::Add, t1, t2);
                    Ok(self.bin(BinaryOp::Mul, p, sum))
                }
            },
        }
    }

    fn rebuild(&mut self, s: Span) -> Span {
        let (root, [u, w]) = split_span(self.src, self.notation, s);
        match root {
            Token::Unary(op) => {
                let a = self.rebuild(u);
                self.un(op, a)
            }
            Token::Binary(op) => {
                let a = self.rebuild(u);
                let b = self.rebuild(w);
                self.bin(op, a, b)
            }
            _ => self.copy(s),
        }
    }
}

/// `∂e/∂v` with analytic IC derivatives.
pub fn differentiate(e: &Expr, v: Var) -> Result<Expr, DiffError> {
    differentiate_with(e, v, IcDerivatives::Analytic)
}

pub fn differentiate_with(e: &Expr, v: Var, ic: IcDerivatives) -> Result<Expr, DiffError> {
    let mut em = Emitter::new(e.tokens(), e.notation(), v, ic);
    em.deriv(e.root_span())?;
    Ok(Expr::new(e.notation(), em.out).expect("emitter yields complete sequences"))
}

pub fn second_derivative(e: &Expr, v: Var, ic: IcDerivatives) -> Result<Expr, DiffError> {
    differentiate_with(&differentiate_with(e, v, ic)?, v, ic)
}

/// Identity rules plus folding of numeric-literal subexpressions, to a fixed point.
pub fn simplify(e: &Expr) -> Expr {
    let mut cur = e.clone();
    loop {
        let mut em = Emitter::new(cur.tokens(), cur.notation(), Var::X, IcDerivatives::Frozen);
        em.rebuild(cur.root_span());
        let next = Expr::new(cur.notation(), em.out).expect("emitter yields complete sequences");
        if next.tokens() == cur.tokens() {
            return next;
        }
        cur = next;
    }
}

/// Replace learnable slots by their fitted values.
pub fn substitute_constants(e: &Expr, consts: &[f64]) -> Expr {
    let tokens = e
        .tokens()
        .iter()
        .map(|&t| match t {
            Token::Learnable(slot) => match consts.get(slot as usize) {
                Some(&v) => Token::Lit(Literal::Value(v)),
                None => t,
            },
            other => other,
        })
        .collect();
    Expr::new(e.notation(), tokens).expect("substitution keeps structure")
}
