//! Depth-bounded generation grammar.
//!
//! Prefix sequences track the depth of every open operand slot; an operator may
//! fill a slot only if its children still fit under the budget. Postfix sequences
//! track the subtree height of every stacked operand. Operands already on the stack
//! can only be merged right-to-left, so a postfix state is viable iff that forced
//! right comb fits under the budget.

use rand::Rng;

use super::{sequence_depth, BinaryOp, Expr, ExprError, Literal, Notation, Side, Token, UnaryOp, Var};

/// Which constant tokens join the variables in the leaf set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenSet {
    Vars,
    VarsConst,
    VarsConstOpt,
}

impl TokenSet {
    pub const ALL: [TokenSet; 3] = [TokenSet::Vars, TokenSet::VarsConst, TokenSet::VarsConstOpt];

    pub fn name(self) -> &'static str {
        match self {
            TokenSet::Vars => "vars",
            TokenSet::VarsConst => "vars+const",
            TokenSet::VarsConstOpt => "vars+const+opt",
        }
    }

    pub fn non_optimizable(self) -> bool {
        !matches!(self, TokenSet::Vars)
    }

    pub fn optimizable(self) -> bool {
        matches!(self, TokenSet::VarsConstOpt)
    }
}

impl std::str::FromStr for TokenSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TokenSet::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown token set '{s}' (expected vars|vars+const|vars+const+opt)"))
    }
}

/// The token classes a search may draw from.
#[derive(Clone, Debug, PartialEq)]
pub struct Alphabet {
    leaves: Vec<Token>,
    unaries: Vec<UnaryOp>,
    binaries: Vec<BinaryOp>,
}

/// One generation step. `Stop` ends a postfix sequence that is already complete.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Action {
    Token(Token),
    Stop,
}

impl Alphabet {
    pub fn new(leaves: Vec<Token>, unaries: Vec<UnaryOp>, binaries: Vec<BinaryOp>) -> Self {
        assert!(!leaves.is_empty(), "alphabet needs at least one leaf");
        assert!(leaves.iter().all(|t| t.is_leaf()));
        Alphabet { leaves, unaries, binaries }
    }

    pub fn for_token_set(set: TokenSet) -> Self {
        let mut leaves = vec![Token::Var(Var::X), Token::Var(Var::Y), Token::Var(Var::T), Token::I];
        if set.non_optimizable() {
            leaves.extend([Literal::Zero, Literal::One, Literal::Two, Literal::Four].map(Token::Lit));
            for v in Var::ALL {
                for side in [Side::Min, Side::Max] {
                    leaves.push(Token::Lit(Literal::Bound(v, side)));
                }
            }
        }
        if set.optimizable() {
            leaves.push(Token::Learnable(0));
        }
        Alphabet::new(leaves, UnaryOp::ALL.to_vec(), BinaryOp::ALL.to_vec())
    }

    pub fn leaves(&self) -> &[Token] {
        &self.leaves
    }

    pub fn unaries(&self) -> &[UnaryOp] {
        &self.unaries
    }

    pub fn binaries(&self) -> &[BinaryOp] {
        &self.binaries
    }

    /// Number of action indices, `Stop` included.
    pub fn action_count(&self) -> usize {
        self.leaves.len() + self.unaries.len() + self.binaries.len() + 1
    }

    /// Stable index of an action; used to key search statistics.
    pub fn action(&self, index: usize) -> Action {
        let l = self.leaves.len();
        let u = self.unaries.len();
        let b = self.binaries.len();
        if index < l {
            Action::Token(self.leaves[index])
        } else if index < l + u {
            Action::Token(Token::Unary(self.unaries[index - l]))
        } else if index < l + u + b {
            Action::Token(Token::Binary(self.binaries[index - l - u]))
        } else {
            Action::Stop
        }
    }

    pub fn stop_index(&self) -> usize {
        self.action_count() - 1
    }
}

/// An in-progress token sequence with its grammar state.
#[derive(Clone, Debug)]
pub struct PartialExpr {
    notation: Notation,
    budget: usize,
    tokens: Vec<Token>,
    /// prefix: depths of open slots (top = next to fill); postfix: operand heights.
    stack: Vec<usize>,
    stopped: bool,
    slots: u16,
}

impl PartialExpr {
    pub fn new(notation: Notation, budget: usize) -> Self {
        let stack = match notation {
            Notation::Prefix => vec![0],
            Notation::Postfix => Vec::new(),
        };
        PartialExpr { notation, budget, tokens: Vec::new(), stack, stopped: false, slots: 0 }
    }

    /// Rebuild the state of an existing partial sequence.
    pub fn from_tokens(notation: Notation, budget: usize, tokens: &[Token]) -> Result<Self, ExprError> {
        let mut p = PartialExpr::new(notation, budget);
        for (position, &tok) in tokens.iter().enumerate() {
            match notation {
                Notation::Prefix if p.stack.is_empty() => return Err(ExprError::Trailing { position }),
                Notation::Postfix if p.stack.len() < tok.arity() => {
                    return Err(ExprError::Underflow { position })
                }
                _ => {}
            }
            p.push_unchecked(tok);
            if !p.viable() {
                return Err(ExprError::DepthExceeded { depth: p.min_completion_depth(), budget });
            }
        }
        Ok(p)
    }

    pub fn notation(&self) -> Notation {
        self.notation
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The tokens so far form one complete expression.
    pub fn is_complete(&self) -> bool {
        match self.notation {
            Notation::Prefix => self.stack.is_empty(),
            Notation::Postfix => self.stack.len() == 1,
        }
    }

    /// No further action is possible.
    pub fn is_terminal(&self) -> bool {
        match self.notation {
            Notation::Prefix => self.stack.is_empty(),
            Notation::Postfix => self.stopped,
        }
    }

    /// Smallest depth any completion can reach (postfix right comb; prefix deepest slot).
    fn min_completion_depth(&self) -> usize {
        match self.notation {
            Notation::Prefix => self.stack.iter().copied().max().unwrap_or(0),
            Notation::Postfix => comb_depth(&self.stack),
        }
    }

    fn viable(&self) -> bool {
        self.min_completion_depth() <= self.budget
    }

    pub fn token_legal(&self, tok: Token) -> bool {
        if self.stopped {
            return false;
        }
        match self.notation {
            Notation::Prefix => match self.stack.last() {
                None => false,
                Some(&d) => tok.is_leaf() || d < self.budget,
            },
            Notation::Postfix => {
                let n = self.stack.len();
                let fits = |s: &[usize], extra: Option<usize>| {
                    let mut m = match extra {
                        Some(v) => v,
                        None => match s.last() {
                            Some(&v) => v,
                            None => return true,
                        },
                    };
                    let rest = if extra.is_some() { s } else { &s[..s.len() - 1] };
                    for &h in rest.iter().rev() {
                        m = h.max(m) + 1;
                    }
                    m <= self.budget
                };
                match tok.arity() {
                    0 => fits(&self.stack, Some(0)),
                    1 => n >= 1 && fits(&self.stack[..n - 1], Some(self.stack[n - 1] + 1)),
                    _ => {
                        n >= 2
                            && fits(&self.stack[..n - 2], Some(self.stack[n - 2].max(self.stack[n - 1]) + 1))
                    }
                }
            }
        }
    }

    pub fn stop_legal(&self) -> bool {
        self.notation == Notation::Postfix && !self.stopped && self.stack.len() == 1
    }

    pub fn action_legal(&self, action: Action) -> bool {
        match action {
            Action::Token(t) => self.token_legal(t),
            Action::Stop => self.stop_legal(),
        }
    }

    pub fn legal_tokens(&self, alphabet: &Alphabet) -> Vec<Token> {
        let mut out = Vec::new();
        if self.is_terminal() {
            return out;
        }
        let candidates = alphabet
            .leaves
            .iter()
            .copied()
            .chain(alphabet.unaries.iter().map(|&u| Token::Unary(u)))
            .chain(alphabet.binaries.iter().map(|&b| Token::Binary(b)));
        for tok in candidates {
            if self.token_legal(tok) {
                out.push(tok);
            }
        }
        out
    }

    /// Indices (see [`Alphabet::action`]) of all legal actions, `Stop` included.
    pub fn legal_action_indices(&self, alphabet: &Alphabet) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_terminal() {
            return out;
        }
        for i in 0..alphabet.stop_index() {
            if let Action::Token(t) = alphabet.action(i) {
                if self.token_legal(t) {
                    out.push(i);
                }
            }
        }
        if self.stop_legal() {
            out.push(alphabet.stop_index());
        }
        out
    }

    fn push_unchecked(&mut self, tok: Token) {
        let tok = match tok {
            Token::Learnable(_) => {
                let t = Token::Learnable(self.slots);
                self.slots += 1;
                t
            }
            other => other,
        };
        match self.notation {
            Notation::Prefix => {
                let d = self.stack.pop().expect("slot available");
                for _ in 0..tok.arity() {
                    self.stack.push(d + 1);
                }
            }
            Notation::Postfix => match tok.arity() {
                0 => self.stack.push(0),
                1 => *self.stack.last_mut().expect("operand available") += 1,
                _ => {
                    let b = self.stack.pop().expect("operand available");
                    let a = self.stack.last_mut().expect("operand available");
                    *a = (*a).max(b) + 1;
                }
            },
        }
        self.tokens.push(tok);
    }

    /// Apply a legal action. Learnable tokens are renumbered to the next slot.
    pub fn push(&mut self, action: Action) {
        debug_assert!(self.action_legal(action), "illegal action {action:?}");
        match action {
            Action::Token(t) => self.push_unchecked(t),
            Action::Stop => self.stopped = true,
        }
    }

    /// Finish the sequence with the fewest tokens: leaves for prefix, merges for postfix.
    pub fn close(&mut self, alphabet: &Alphabet) {
        while !self.is_terminal() {
            match self.notation {
                Notation::Prefix => self.push_unchecked(alphabet.leaves[0]),
                Notation::Postfix => {
                    if self.stack.is_empty() {
                        self.push_unchecked(alphabet.leaves[0]);
                    } else if self.stack.len() >= 2 {
                        let op = alphabet.binaries.first().copied().unwrap_or(BinaryOp::Add);
                        self.push_unchecked(Token::Binary(op));
                    } else {
                        self.stopped = true;
                    }
                }
            }
        }
    }

    pub fn into_expr(self) -> Result<Expr, ExprError> {
        Expr::with_budget(self.notation, self.tokens, self.budget)
    }
}

fn comb_depth(stack: &[usize]) -> usize {
    let mut it = stack.iter().rev();
    let Some(&top) = it.next() else { return 0 };
    it.fold(top, |m, &h| h.max(m) + 1)
}

/// Tokens `a` such that `partial + [a]` can still complete within `budget`.
///
/// For prefix the result is empty exactly when `partial` is complete. A complete
/// postfix sequence may still be extended (e.g. by a unary operator on top).
pub fn legal_tokens(
    partial: &[Token],
    notation: Notation,
    budget: usize,
    alphabet: &Alphabet,
) -> Result<Vec<Token>, ExprError> {
    let p = PartialExpr::from_tokens(notation, budget, partial)?;
    Ok(p.legal_tokens(alphabet))
}

/// Draw each step uniformly from the legal actions until the sequence terminates.
pub fn sample_complete<R: Rng + ?Sized>(
    rng: &mut R,
    notation: Notation,
    budget: usize,
    alphabet: &Alphabet,
) -> Expr {
    let mut p = PartialExpr::new(notation, budget);
    let mut legal = Vec::with_capacity(alphabet.action_count());
    while !p.is_terminal() {
        legal.clear();
        legal.extend(p.legal_action_indices(alphabet));
        let i = legal[rng.gen_range(0..legal.len())];
        p.push(alphabet.action(i));
    }
    let e = p.into_expr().expect("grammar only yields complete sequences");
    debug_assert!(sequence_depth(e.tokens(), notation).unwrap() <= budget);
    e
}

/// Raw token sequence of a random subexpression fitting in `budget` (used by span mutation).
pub fn sample_with_budget<R: Rng + ?Sized>(
    rng: &mut R,
    notation: Notation,
    budget: usize,
    alphabet: &Alphabet,
) -> Vec<Token> {
    sample_complete(rng, notation, budget, alphabet).into_tokens()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Alphabet {
        Alphabet::new(vec![Token::Var(Var::X), Token::Var(Var::Y)], vec![UnaryOp::Sin], vec![BinaryOp::Add])
    }

    fn toks(s: &str) -> Vec<Token> {
        s.split_whitespace().map(|w| Token::from_spelling(w).unwrap()).collect()
    }

    #[test]
    fn depth_zero_prefix_allows_only_leaves() {
        let a = Alphabet::for_token_set(TokenSet::VarsConst);
        let legal = legal_tokens(&[], Notation::Prefix, 0, &a).unwrap();
        assert_eq!(legal, a.leaves().to_vec());
    }

    #[test]
    fn prefix_operator_at_budget_edge() {
        let a = Alphabet::for_token_set(TokenSet::Vars);
        let legal = legal_tokens(&toks("+"), Notation::Prefix, 1, &a).unwrap();
        assert_eq!(legal, a.leaves().to_vec());
        assert!(legal_tokens(&toks("+ x y"), Notation::Prefix, 1, &a).unwrap().is_empty());
    }

    #[test]
    fn postfix_single_operand() {
        let a = Alphabet::for_token_set(TokenSet::Vars);
        let legal = legal_tokens(&toks("x"), Notation::Postfix, 1, &a).unwrap();
        let mut expected = a.leaves().to_vec();
        expected.extend(a.unaries().iter().map(|&u| Token::Unary(u)));
        assert_eq!(legal, expected);
    }

    #[test]
    fn postfix_two_operands_at_depth_one() {
        // Brute force: every complete depth<=1 postfix sequence over {x, y, sin, +}
        // that starts with "x y" continues with "+".
        let a = tiny();
        let legal = legal_tokens(&toks("x y"), Notation::Postfix, 1, &a).unwrap();
        assert_eq!(legal, vec![Token::Binary(BinaryOp::Add)]);
        let a = Alphabet::for_token_set(TokenSet::Vars);
        let legal = legal_tokens(&toks("x y"), Notation::Postfix, 1, &a).unwrap();
        assert_eq!(legal, a.binaries().iter().map(|&b| Token::Binary(b)).collect::<Vec<_>>());
    }

    #[test]
    fn malformed_partials_are_rejected() {
        let a = tiny();
        assert_eq!(
            legal_tokens(&toks("x +"), Notation::Postfix, 3, &a),
            Err(ExprError::Underflow { position: 1 })
        );
        assert_eq!(
            legal_tokens(&toks("x y"), Notation::Prefix, 3, &a),
            Err(ExprError::Trailing { position: 1 })
        );
        assert!(matches!(
            legal_tokens(&toks("sin sin"), Notation::Prefix, 1, &a),
            Err(ExprError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let a = Alphabet::for_token_set(TokenSet::VarsConstOpt);
        for notation in [Notation::Prefix, Notation::Postfix] {
            let mut r1 = ChaCha8Rng::seed_from_u64(7);
            let mut r2 = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..200 {
                let e1 = sample_complete(&mut r1, notation, 3, &a);
                let e2 = sample_complete(&mut r2, notation, 3, &a);
                assert_eq!(e1, e2);
                assert!(e1.depth() <= 3);
            }
            let leaf = sample_complete(&mut r1, notation, 0, &a);
            assert_eq!(leaf.len(), 1);
        }
    }

    #[test]
    fn learnables_are_numbered_in_order() {
        let a = Alphabet::new(vec![Token::Learnable(0)], vec![], vec![BinaryOp::Mul]);
        let mut p = PartialExpr::new(Notation::Prefix, 2);
        for t in toks("* *") {
            p.push(Action::Token(t));
        }
        while !p.is_terminal() {
            p.push(Action::Token(Token::Learnable(0)));
        }
        let e = p.into_expr().unwrap();
        assert_eq!(e.slot_count(), 3);
        assert_eq!(e.to_text(), "* * C C C");
        let _ = a;
    }

    #[test]
    fn close_finishes_minimally() {
        let a = tiny();
        let mut p = PartialExpr::from_tokens(Notation::Postfix, 3, &toks("x y x")).unwrap();
        p.close(&a);
        assert_eq!(p.into_expr().unwrap().to_text(), "x y x + +");
        let mut p = PartialExpr::from_tokens(Notation::Prefix, 3, &toks("+ sin")).unwrap();
        p.close(&a);
        assert_eq!(p.into_expr().unwrap().to_text(), "+ sin x x");
    }

    #[test]
    fn token_set_names() {
        for s in TokenSet::ALL {
            assert_eq!(s.name().parse::<TokenSet>().unwrap(), s);
        }
        assert_eq!(Alphabet::for_token_set(TokenSet::Vars).leaves().len(), 4);
        assert_eq!(Alphabet::for_token_set(TokenSet::VarsConst).leaves().len(), 14);
        assert_eq!(Alphabet::for_token_set(TokenSet::VarsConstOpt).leaves().len(), 15);
        let _ = parse("x", Notation::Prefix, &ParseMode::Search).unwrap();
    }
}
