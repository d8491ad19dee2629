//! Flat token-sequence expressions in Polish (prefix) and reverse Polish (postfix)
//! notation.
//!
//! An [`Expr`] is never materialized as a tree. Structure is recovered on demand
//! from arity counts: every subexpression occupies one contiguous [`Span`] of the
//! token array in either notation.

mod grammar;
mod token;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use grammar::{
    legal_tokens, sample_complete, sample_with_budget, Action, Alphabet, PartialExpr, TokenSet,
};
pub use token::{format_number, parse_decimal, BinaryOp, IcOrder, Literal, Side, Token, UnaryOp, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Notation {
    Prefix,
    Postfix,
}

impl Notation {
    pub fn name(self) -> &'static str {
        match self {
            Notation::Prefix => "prefix",
            Notation::Postfix => "postfix",
        }
    }

    pub fn other(self) -> Notation {
        match self {
            Notation::Prefix => Notation::Postfix,
            Notation::Postfix => Notation::Prefix,
        }
    }
}

impl fmt::Display for Notation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Notation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefix" => Ok(Notation::Prefix),
            "postfix" => Ok(Notation::Postfix),
            other => Err(format!("unknown notation '{other}' (expected prefix|postfix)")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unknown token '{text}' at position {position}")]
    UnknownToken { position: usize, text: String },
    #[error("operand underflow at position {position}")]
    Underflow { position: usize },
    #[error("incomplete expression: {missing} operand(s) missing")]
    Incomplete { missing: usize },
    #[error("trailing tokens after a complete expression at position {position}")]
    Trailing { position: usize },
    #[error("expression depth {depth} exceeds budget {budget}")]
    DepthExceeded { depth: usize, budget: usize },
    #[error("empty expression")]
    Empty,
}

/// Half-open index range `[start, end)` holding one complete subexpression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(self) -> bool {
        self.end == self.start
    }
}

/// End of the prefix subexpression that starts at `start`.
pub fn prefix_subtree_end(tokens: &[Token], start: usize) -> Option<usize> {
    let mut need = 1usize;
    let mut i = start;
    while need > 0 {
        let tok = tokens.get(i)?;
        need = need - 1 + tok.arity();
        i += 1;
    }
    Some(i)
}

/// Start of the postfix subexpression that ends (exclusive) at `end`.
pub fn postfix_subtree_start(tokens: &[Token], end: usize) -> Option<usize> {
    let mut need = 1usize;
    let mut i = end;
    while need > 0 {
        i = i.checked_sub(1)?;
        need = need - 1 + tokens[i].arity();
    }
    Some(i)
}

/// Root token and operand spans of the subexpression occupying `span`.
pub fn split_span(tokens: &[Token], notation: Notation, span: Span) -> (Token, [Span; 2]) {
    let empty = Span::new(span.end, span.end);
    match notation {
        Notation::Prefix => {
            let root = tokens[span.start];
            match root.arity() {
                0 => (root, [empty, empty]),
                1 => (root, [Span::new(span.start + 1, span.end), empty]),
                _ => {
                    let mid = prefix_subtree_end(tokens, span.start + 1).expect("well-formed span");
                    (root, [Span::new(span.start + 1, mid), Span::new(mid, span.end)])
                }
            }
        }
        Notation::Postfix => {
            let root = tokens[span.end - 1];
            match root.arity() {
                0 => (root, [empty, empty]),
                1 => (root, [Span::new(span.start, span.end - 1), empty]),
                _ => {
                    let mid = postfix_subtree_start(tokens, span.end - 1).expect("well-formed span");
                    (root, [Span::new(span.start, mid), Span::new(mid, span.end - 1)])
                }
            }
        }
    }
}

/// Distance from the root of every token's node (root = 0).
pub fn node_depths(tokens: &[Token], notation: Notation) -> Vec<usize> {
    let mut out = vec![0; tokens.len()];
    let mut slots: Vec<usize> = vec![0];
    let mut visit = |i: usize| {
        let d = slots.pop().expect("complete sequence");
        out[i] = d;
        for _ in 0..tokens[i].arity() {
            slots.push(d + 1);
        }
    };
    // Reversed postfix is prefix with the operands swapped, so depths are unchanged.
    match notation {
        Notation::Prefix => (0..tokens.len()).for_each(&mut visit),
        Notation::Postfix => (0..tokens.len()).rev().for_each(&mut visit),
    }
    out
}

/// Span of the subexpression whose root token sits at index `i`.
pub fn subtree_span(tokens: &[Token], notation: Notation, i: usize) -> Span {
    match notation {
        Notation::Prefix => Span::new(i, prefix_subtree_end(tokens, i).expect("complete sequence")),
        Notation::Postfix => {
            Span::new(postfix_subtree_start(tokens, i + 1).expect("complete sequence"), i + 1)
        }
    }
}

/// Tree depth of a token sequence (leaf = 0), validating completeness in one scan.
pub fn sequence_depth(tokens: &[Token], notation: Notation) -> Result<usize, ExprError> {
    if tokens.is_empty() {
        return Err(ExprError::Empty);
    }
    match notation {
        Notation::Postfix => {
            let mut stack: Vec<usize> = Vec::with_capacity(16);
            for (position, tok) in tokens.iter().enumerate() {
                match tok.arity() {
                    0 => stack.push(0),
                    1 => {
                        let top = stack.last_mut().ok_or(ExprError::Underflow { position })?;
                        *top += 1;
                    }
                    _ => {
                        if stack.len() < 2 {
                            return Err(ExprError::Underflow { position });
                        }
                        let b = stack.pop().unwrap();
                        let a = stack.last_mut().unwrap();
                        *a = (*a).max(b) + 1;
                    }
                }
            }
            if stack.len() != 1 {
                return Err(ExprError::Incomplete { missing: stack.len() - 1 });
            }
            Ok(stack[0])
        }
        Notation::Prefix => {
            // Open operand slots, each holding the depth of the node that will fill it.
            let mut slots: Vec<usize> = Vec::with_capacity(16);
            slots.push(0);
            let mut depth = 0;
            for (position, tok) in tokens.iter().enumerate() {
                let d = slots.pop().ok_or(ExprError::Trailing { position })?;
                depth = depth.max(d);
                for _ in 0..tok.arity() {
                    slots.push(d + 1);
                }
            }
            if !slots.is_empty() {
                return Err(ExprError::Incomplete { missing: slots.len() });
            }
            Ok(depth)
        }
    }
}

/// A complete expression in one notation with a declared depth budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    notation: Notation,
    tokens: Vec<Token>,
    budget: usize,
}

impl Expr {
    /// Validates completeness; the budget is set to the actual depth.
    pub fn new(notation: Notation, tokens: Vec<Token>) -> Result<Self, ExprError> {
        let depth = sequence_depth(&tokens, notation)?;
        Ok(Expr { notation, tokens, budget: depth })
    }

    pub fn with_budget(notation: Notation, tokens: Vec<Token>, budget: usize) -> Result<Self, ExprError> {
        let depth = sequence_depth(&tokens, notation)?;
        if depth > budget {
            return Err(ExprError::DepthExceeded { depth, budget });
        }
        Ok(Expr { notation, tokens, budget })
    }

    pub fn leaf(notation: Notation, token: Token) -> Self {
        assert!(token.is_leaf());
        Expr { notation, tokens: vec![token], budget: 0 }
    }

    pub fn notation(&self) -> Notation {
        self.notation
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn depth(&self) -> usize {
        sequence_depth(&self.tokens, self.notation).expect("Expr is always complete")
    }

    pub fn root_span(&self) -> Span {
        Span::new(0, self.tokens.len())
    }

    /// Number of learnable-constant slots referenced (highest slot + 1).
    pub fn slot_count(&self) -> usize {
        self.tokens
            .iter()
            .filter_map(|t| match t {
                Token::Learnable(s) => Some(*s as usize + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn has_learnables(&self) -> bool {
        self.tokens.iter().any(|t| matches!(t, Token::Learnable(_)))
    }

    /// Reassign learnable slots in order of occurrence.
    pub fn renumber_slots(&mut self) {
        let mut next = 0u16;
        for tok in &mut self.tokens {
            if let Token::Learnable(slot) = tok {
                *slot = next;
                next += 1;
            }
        }
    }

    fn slots_canonical(&self) -> bool {
        self.tokens
            .iter()
            .filter_map(|t| match t {
                Token::Learnable(s) => Some(*s),
                _ => None,
            })
            .enumerate()
            .all(|(i, s)| i == s as usize)
    }

    /// Whitespace-separated spellings; parses back to the same expression in free mode.
    pub fn to_text(&self) -> String {
        let canonical = self.slots_canonical();
        let mut out = String::with_capacity(self.tokens.len() * 3);
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if canonical {
                out.push_str(&tok.spelling());
            } else {
                out.push_str(&tok.spelling_with_slot());
            }
        }
        out
    }

    /// Canonical cache key: notation tag plus token spellings.
    pub fn key(&self) -> String {
        format!("{}:{}", self.notation.name(), self.to_text())
    }

    pub fn render_infix(&self) -> String {
        render_infix(self)
    }

    pub fn to_notation(&self, target: Notation) -> Expr {
        convert_notation(self, target)
    }

    pub fn contains(&self, pred: impl Fn(Token) -> bool) -> bool {
        self.tokens.iter().any(|t| pred(*t))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Names that free-mode parsing resolves to literals (e.g. `y_0 -> y_min`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    map: BTreeMap<String, Literal>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: Literal) {
        self.map.insert(name.into(), value);
    }

    /// Parse `name=value` where value is a literal spelling or a decimal.
    pub fn bind_assignment(&mut self, text: &str) -> Result<(), String> {
        let (name, value) =
            text.split_once('=').ok_or_else(|| format!("binding '{text}' is not of the form name=value"))?;
        let name = name.trim();
        let value = value.trim();
        if name.is_empty() {
            return Err(format!("binding '{text}' has an empty name"));
        }
        let lit = match Token::from_spelling(value) {
            Some(Token::Lit(l)) => l,
            Some(_) => return Err(format!("binding value '{value}' is not a constant")),
            None => {
                Literal::Value(parse_decimal(value).ok_or_else(|| format!("bad binding value '{value}'"))?)
            }
        };
        self.bind(name, lit);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Literal> {
        self.map.get(name).copied()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum ParseMode {
    /// Only the fixed token spellings (plus `C`/`C<n>` learnable slots).
    #[default]
    Search,
    /// Additionally accepts decimal literals and bound names.
    Free(Bindings),
}

impl ParseMode {
    pub fn free() -> Self {
        ParseMode::Free(Bindings::new())
    }
}

pub fn parse(text: &str, notation: Notation, mode: &ParseMode) -> Result<Expr, ExprError> {
    let mut tokens = Vec::new();
    let mut next_slot = 0u16;
    for (position, word) in text.split_whitespace().enumerate() {
        let tok = if let Some(tok) = Token::from_spelling(word) {
            tok
        } else if word == "C" {
            let slot = next_slot;
            next_slot += 1;
            Token::Learnable(slot)
        } else if let Some(slot) = word.strip_prefix('C').and_then(|d| d.parse::<u16>().ok()) {
            next_slot = next_slot.max(slot + 1);
            Token::Learnable(slot)
        } else {
            let free = match mode {
                ParseMode::Free(bindings) => bindings
                    .get(word)
                    .map(Token::Lit)
                    .or_else(|| parse_decimal(word).map(|v| Token::Lit(Literal::Value(v)))),
                ParseMode::Search => None,
            };
            free.ok_or_else(|| ExprError::UnknownToken { position, text: word.to_string() })?
        };
        tokens.push(tok);
    }
    Expr::new(notation, tokens)
}

/// Fully parenthesized infix string, built with a string stack (no tree).
pub fn render_infix(e: &Expr) -> String {
    let tokens = e.tokens();
    let mut stack: Vec<String> = Vec::with_capacity(e.depth() + 2);
    let apply = |tok: Token, stack: &mut Vec<String>, first: String, second: Option<String>| {
        let s = match (tok, second) {
            (Token::Unary(UnaryOp::Neg), None) => format!("(-{first})"),
            (Token::Unary(op), None) => format!("{}({first})", op.symbol()),
            (Token::Binary(op), Some(second)) => format!("({first}{}{second})", op.symbol()),
            _ => unreachable!(),
        };
        stack.push(s);
    };
    let leaf = |tok: Token| match tok {
        Token::Learnable(slot) => format!("C{slot}"),
        other => other.spelling(),
    };
    match e.notation() {
        Notation::Postfix => {
            for &tok in tokens {
                match tok.arity() {
                    0 => stack.push(leaf(tok)),
                    1 => {
                        let a = stack.pop().unwrap();
                        apply(tok, &mut stack, a, None);
                    }
                    _ => {
                        let b = stack.pop().unwrap();
                        let a = stack.pop().unwrap();
                        apply(tok, &mut stack, a, Some(b));
                    }
                }
            }
        }
        Notation::Prefix => {
            for &tok in tokens.iter().rev() {
                match tok.arity() {
                    0 => stack.push(leaf(tok)),
                    1 => {
                        let a = stack.pop().unwrap();
                        apply(tok, &mut stack, a, None);
                    }
                    _ => {
                        let a = stack.pop().unwrap();
                        let b = stack.pop().unwrap();
                        apply(tok, &mut stack, a, Some(b));
                    }
                }
            }
        }
    }
    stack.pop().unwrap()
}

/// Same tree in the other notation; depth and budget are preserved.
pub fn convert_notation(e: &Expr, target: Notation) -> Expr {
    if e.notation() == target {
        return e.clone();
    }
    let mut out = Vec::with_capacity(e.len());
    emit_converted(e.tokens(), e.notation(), e.root_span(), &mut out);
    Expr { notation: target, tokens: out, budget: e.budget() }
}

fn emit_converted(tokens: &[Token], from: Notation, span: Span, out: &mut Vec<Token>) {
    let (root, children) = split_span(tokens, from, span);
    let kids = &children[..root.arity()];
    match from {
        // prefix -> postfix: operands first, then operator
        Notation::Prefix => {
            for &c in kids {
                emit_converted(tokens, from, c, out);
            }
            out.push(root);
        }
        Notation::Postfix => {
            out.push(root);
            for &c in kids {
                emit_converted(tokens, from, c, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(s: &str) -> Expr {
        parse(s, Notation::Prefix, &ParseMode::free()).unwrap()
    }

    fn pf(s: &str) -> Expr {
        parse(s, Notation::Postfix, &ParseMode::free()).unwrap()
    }

    #[test]
    fn depth_examples() {
        assert_eq!(pf("x").depth(), 0);
        assert_eq!(px("+ x y").depth(), 1);
        assert_eq!(pf("x y + t *").depth(), 2);
        assert_eq!(px("* x + y t").depth(), 2);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse("x +", Notation::Postfix, &ParseMode::Search),
            Err(ExprError::Underflow { position: 1 })
        );
        assert_eq!(
            parse("x y", Notation::Postfix, &ParseMode::Search),
            Err(ExprError::Incomplete { missing: 1 })
        );
        assert_eq!(
            parse("+ x", Notation::Prefix, &ParseMode::Search),
            Err(ExprError::Incomplete { missing: 1 })
        );
        assert_eq!(
            parse("x y", Notation::Prefix, &ParseMode::Search),
            Err(ExprError::Trailing { position: 1 })
        );
        assert_eq!(
            parse("sech 0.103287", Notation::Prefix, &ParseMode::Search),
            Err(ExprError::UnknownToken { position: 1, text: "0.103287".into() })
        );
        assert_eq!(
            parse("x foo +", Notation::Postfix, &ParseMode::free()),
            Err(ExprError::UnknownToken { position: 1, text: "foo".into() })
        );
        assert_eq!(parse("", Notation::Prefix, &ParseMode::Search), Err(ExprError::Empty));
    }

    #[test]
    fn free_mode_literals_and_bindings() {
        let e = px("sech 0.103287");
        assert_eq!(e.tokens()[1], Token::Lit(Literal::Value(0.103287)));
        assert!(parse("^ I y_0", Notation::Prefix, &ParseMode::free()).is_err());
        let mut b = Bindings::new();
        b.bind_assignment("y_0=y_min").unwrap();
        let e = parse("^ I y_0", Notation::Prefix, &ParseMode::Free(b)).unwrap();
        assert_eq!(e.tokens()[2], Token::Lit(Literal::Bound(Var::Y, Side::Min)));
        let mut b = Bindings::new();
        b.bind_assignment("y_0=0.5").unwrap();
        assert_eq!(b.get("y_0"), Some(Literal::Value(0.5)));
        assert!(b.bind_assignment("y_0").is_err());
        assert!(b.bind_assignment("y_0=sin").is_err());
    }

    #[test]
    fn budget_is_checked() {
        let toks = px("+ x y").into_tokens();
        assert!(Expr::with_budget(Notation::Prefix, toks.clone(), 1).is_ok());
        assert_eq!(
            Expr::with_budget(Notation::Prefix, toks, 0),
            Err(ExprError::DepthExceeded { depth: 1, budget: 0 })
        );
    }

    #[test]
    fn infix_rendering() {
        assert_eq!(px("* x + y t").render_infix(), "(x*(y+t))");
        assert_eq!(pf("I").render_infix(), "I");
        assert_eq!(pf("x 2 ^").render_infix(), "(x^2)");
        assert_eq!(px("~ sin x").render_infix(), "(-sin(x))");
        assert_eq!(pf("x y - t /").render_infix(), "((x-y)/t)");
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(px("+ x y").to_notation(Notation::Postfix), pf("x y +"));
        assert_eq!(px("+ x y").to_notation(Notation::Prefix), px("+ x y"));
        let e = px("- ^ I tanh t * sech x y");
        let back = e.to_notation(Notation::Postfix).to_notation(Notation::Prefix);
        assert_eq!(back, e);
        assert_eq!(e.to_notation(Notation::Postfix).to_text(), "I t tanh ^ x sech y * -");
    }

    #[test]
    fn learnable_slots() {
        let e = parse("C x * C +", Notation::Postfix, &ParseMode::Search).unwrap();
        assert_eq!(e.slot_count(), 2);
        assert_eq!(e.to_text(), "C x * C +");
        assert_eq!(e.key(), "postfix:C x * C +");
        let e = parse("C1 C0 +", Notation::Postfix, &ParseMode::Search).unwrap();
        assert_eq!(e.to_text(), "C1 C0 +");
        let mut e2 = e.clone();
        e2.renumber_slots();
        assert_eq!(e2.to_text(), "C C +");
        assert_eq!(e.render_infix(), "(C1+C0)");
    }

    #[test]
    fn node_depth_helpers() {
        let e = px("* x + y t");
        assert_eq!(node_depths(e.tokens(), Notation::Prefix), vec![0, 1, 1, 2, 2]);
        assert_eq!(subtree_span(e.tokens(), Notation::Prefix, 2), Span::new(2, 5));
        let e = pf("x y t + *");
        assert_eq!(node_depths(e.tokens(), Notation::Postfix), vec![1, 2, 2, 1, 0]);
        assert_eq!(subtree_span(e.tokens(), Notation::Postfix, 3), Span::new(1, 4));
    }

    #[test]
    fn span_helpers() {
        let e = px("* x + y t");
        let (root, kids) = split_span(e.tokens(), Notation::Prefix, e.root_span());
        assert_eq!(root, Token::Binary(BinaryOp::Mul));
        assert_eq!(kids, [Span::new(1, 2), Span::new(2, 5)]);
        let e = pf("x y t + *");
        let (_, kids) = split_span(e.tokens(), Notation::Postfix, e.root_span());
        assert_eq!(kids, [Span::new(0, 1), Span::new(1, 4)]);
    }
}
