use std::fmt;

/// Input coordinate of the solution field `T(x, y, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::X, Var::Y, Var::T];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Var {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Var::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variable '{s}' (expected x|y|t)"))
    }
}

/// Which end of an axis a bound literal refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Log,
    Exp,
    Cos,
    Sin,
    Sqrt,
    Asin,
    Acos,
    Tanh,
    Sech,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 10] = [
        UnaryOp::Neg,
        UnaryOp::Log,
        UnaryOp::Exp,
        UnaryOp::Cos,
        UnaryOp::Sin,
        UnaryOp::Sqrt,
        UnaryOp::Asin,
        UnaryOp::Acos,
        UnaryOp::Tanh,
        UnaryOp::Sech,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "~",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Asin => "asin",
            UnaryOp::Acos => "acos",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Sech => "sech",
        }
    }

    /// IEEE evaluation; out-of-domain inputs yield NaN or an infinity.
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Neg => -v,
            UnaryOp::Log => v.ln(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Sin => v.sin(),
            UnaryOp::Sqrt => v.sqrt(),
            UnaryOp::Asin => v.asin(),
            UnaryOp::Acos => v.acos(),
            UnaryOp::Tanh => v.tanh(),
            UnaryOp::Sech => 2.0 / (v.exp() + (-v).exp()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] =
        [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    /// `Pow` is real-valued: a negative base with a non-integer exponent is NaN, `0^0 = 1`.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }
}

/// Spatial derivative order of the initial-condition field. `(0, 0)` is `I` itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IcOrder {
    pub dx: u8,
    pub dy: u8,
}

impl IcOrder {
    pub const FIELD: IcOrder = IcOrder { dx: 0, dy: 0 };
    /// Highest total order that has a stored grid.
    pub const MAX_TOTAL: u8 = 2;

    pub const fn new(dx: u8, dy: u8) -> Self {
        IcOrder { dx, dy }
    }

    pub fn total(self) -> u8 {
        self.dx + self.dy
    }

    /// Position in the stored family `[I, I_x, I_y, I_xx, I_xy, I_yy]`.
    pub fn family_index(self) -> Option<usize> {
        match (self.dx, self.dy) {
            (0, 0) => Some(0),
            (1, 0) => Some(1),
            (0, 1) => Some(2),
            (2, 0) => Some(3),
            (1, 1) => Some(4),
            (0, 2) => Some(5),
            _ => None,
        }
    }

    fn spelling(self) -> Option<&'static str> {
        Some(match (self.dx, self.dy) {
            (0, 0) => "I",
            (1, 0) => "I_x",
            (0, 1) => "I_y",
            (2, 0) => "I_xx",
            (1, 1) => "I_xy",
            (0, 2) => "I_yy",
            _ => return None,
        })
    }
}

/// Non-optimizable constant. Bound literals take their value from the case domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Literal {
    Zero,
    One,
    Two,
    Four,
    Bound(Var, Side),
    Value(f64),
}

impl Literal {
    /// Value when it does not depend on the case domain.
    pub fn numeric(self) -> Option<f64> {
        match self {
            Literal::Zero => Some(0.0),
            Literal::One => Some(1.0),
            Literal::Two => Some(2.0),
            Literal::Four => Some(4.0),
            Literal::Value(v) => Some(v),
            Literal::Bound(..) => None,
        }
    }

    /// Canonical literal for a folded value.
    pub fn from_value(v: f64) -> Literal {
        if v == 0.0 {
            Literal::Zero
        } else if v == 1.0 {
            Literal::One
        } else if v == 2.0 {
            Literal::Two
        } else if v == 4.0 {
            Literal::Four
        } else {
            Literal::Value(v)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Token {
    Var(Var),
    Ic(IcOrder),
    Lit(Literal),
    /// Optimizable constant; the payload is the slot index into the constant vector.
    Learnable(u16),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl Token {
    pub const I: Token = Token::Ic(IcOrder::FIELD);

    pub fn arity(self) -> usize {
        match self {
            Token::Unary(_) => 1,
            Token::Binary(_) => 2,
            _ => 0,
        }
    }

    pub fn is_leaf(self) -> bool {
        self.arity() == 0
    }

    pub fn lit(v: f64) -> Token {
        Token::Lit(Literal::from_value(v))
    }

    /// Numeric value of a domain-independent literal.
    pub fn numeric(self) -> Option<f64> {
        match self {
            Token::Lit(l) => l.numeric(),
            _ => None,
        }
    }

    /// Text spelling. Learnable slots render as `C`; see [`Token::spelling_with_slot`].
    pub fn spelling(self) -> String {
        match self {
            Token::Learnable(_) => "C".to_string(),
            other => other.spelling_with_slot(),
        }
    }

    /// Like [`Token::spelling`] but learnable slots carry their index (`C3`).
    pub fn spelling_with_slot(self) -> String {
        match self {
            Token::Var(v) => v.name().to_string(),
            Token::Ic(o) => match o.spelling() {
                Some(s) => s.to_string(),
                None => format!("I_{}{}", "x".repeat(o.dx as usize), "y".repeat(o.dy as usize)),
            },
            Token::Lit(l) => match l {
                Literal::Zero => "0".into(),
                Literal::One => "1".into(),
                Literal::Two => "2".into(),
                Literal::Four => "4".into(),
                Literal::Bound(v, Side::Min) => format!("{}_min", v.name()),
                Literal::Bound(v, Side::Max) => format!("{}_max", v.name()),
                Literal::Value(v) => format_number(v),
            },
            Token::Learnable(slot) => format!("C{slot}"),
            Token::Unary(op) => op.symbol().to_string(),
            Token::Binary(op) => op.symbol().to_string(),
        }
    }

    /// Resolve a fixed spelling (everything except decimal numbers and bound names).
    pub fn from_spelling(s: &str) -> Option<Token> {
        let t = match s {
            "x" => Token::Var(Var::X),
            "y" => Token::Var(Var::Y),
            "t" => Token::Var(Var::T),
            "I" => Token::I,
            "I_x" => Token::Ic(IcOrder::new(1, 0)),
            "I_y" => Token::Ic(IcOrder::new(0, 1)),
            "I_xx" => Token::Ic(IcOrder::new(2, 0)),
            "I_xy" => Token::Ic(IcOrder::new(1, 1)),
            "I_yy" => Token::Ic(IcOrder::new(0, 2)),
            "0" => Token::Lit(Literal::Zero),
            "1" => Token::Lit(Literal::One),
            "2" => Token::Lit(Literal::Two),
            "4" => Token::Lit(Literal::Four),
            "x_min" => Token::Lit(Literal::Bound(Var::X, Side::Min)),
            "x_max" => Token::Lit(Literal::Bound(Var::X, Side::Max)),
            "y_min" => Token::Lit(Literal::Bound(Var::Y, Side::Min)),
            "y_max" => Token::Lit(Literal::Bound(Var::Y, Side::Max)),
            "t_min" => Token::Lit(Literal::Bound(Var::T, Side::Min)),
            "t_max" => Token::Lit(Literal::Bound(Var::T, Side::Max)),
            _ => {
                if let Some(op) = UnaryOp::ALL.iter().find(|op| op.symbol() == s) {
                    Token::Unary(*op)
                } else {
                    Token::Binary(*BinaryOp::ALL.iter().find(|op| op.symbol() == s)?)
                }
            }
        };
        Some(t)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spelling())
    }
}

/// Shortest decimal that round-trips through `f64::from_str`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Free-mode decimal literal: optional sign, digits, optional fraction, optional exponent.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spellings_round_trip() {
        let all = [
            "x", "y", "t", "I", "I_x", "I_y", "I_xx", "I_xy", "I_yy", "0", "1", "2", "4", "x_min", "x_max",
            "y_min", "y_max", "t_min", "t_max", "~", "log", "exp", "cos", "sin", "sqrt", "asin", "acos",
            "tanh", "sech", "+", "-", "*", "/", "^",
        ];
        for s in all {
            let tok = Token::from_spelling(s).unwrap_or_else(|| panic!("{s}"));
            assert_eq!(tok.spelling(), s);
        }
        assert_eq!(Token::from_spelling("C"), None);
    }

    #[test]
    fn decimal_grammar() {
        assert_eq!(parse_decimal("0.103287"), Some(0.103287));
        assert_eq!(parse_decimal("-1.1"), Some(-1.1));
        assert_eq!(parse_decimal("+2."), Some(2.0));
        assert_eq!(parse_decimal(".5e-3"), Some(0.0005));
        assert_eq!(parse_decimal("20.0"), Some(20.0));
        assert_eq!(parse_decimal("-"), None);
        assert_eq!(parse_decimal("1e"), None);
        assert_eq!(parse_decimal("inf"), None);
        assert_eq!(parse_decimal("1.2.3"), None);
    }

    #[test]
    fn sech_is_stable_for_large_arguments() {
        assert_eq!(UnaryOp::Sech.apply(0.0), 1.0);
        assert_eq!(UnaryOp::Sech.apply(1000.0), 0.0);
        assert_eq!(UnaryOp::Sech.apply(f64::INFINITY), 0.0);
        assert!((UnaryOp::Sech.apply(1.0) - 1.0 / 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn pow_semantics() {
        assert_eq!(BinaryOp::Pow.apply(0.0, 0.0), 1.0);
        assert_eq!(BinaryOp::Pow.apply(1.0, f64::NAN), 1.0);
        assert!(BinaryOp::Pow.apply(-8.0, 1.0 / 3.0).is_nan());
        assert_eq!(BinaryOp::Pow.apply(-2.0, 2.0), 4.0);
    }
}
