use rand::seq::SliceRandom;
use rand::Rng;

use super::Worker;
use crate::expr::{node_depths, sample_with_budget, sequence_depth, subtree_span, Alphabet, Expr};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpParams {
    pub population: usize,
    pub offspring: usize,
    pub crossover: f64,
    pub mutation: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        GpParams { population: 200, offspring: 400, crossover: 0.7, mutation: 0.3 }
    }
}

fn rebuild(e: &Expr, tokens: Vec<crate::expr::Token>) -> Expr {
    let mut out = Expr::with_budget(e.notation(), tokens, e.budget()).expect("span edit keeps depth");
    out.renumber_slots();
    out
}

/// Replace a random subexpression with a fresh one that fits the remaining depth.
pub fn mutate<R: Rng + ?Sized>(e: &Expr, alphabet: &Alphabet, rng: &mut R) -> Expr {
    let toks = e.tokens();
    let depths = node_depths(toks, e.notation());
    let i = rng.gen_range(0..toks.len());
    let span = subtree_span(toks, e.notation(), i);
    let room = e.budget().saturating_sub(depths[i]);
    let fresh = sample_with_budget(rng, e.notation(), room, alphabet);
    let mut out = Vec::with_capacity(toks.len() - span.len() + fresh.len());
    out.extend_from_slice(&toks[..span.start]);
    out.extend(fresh);
    out.extend_from_slice(&toks[span.end..]);
    rebuild(e, out)
}

/// Swap one subexpression of `a` with one of `b`, keeping both children within
/// their budgets. Returns `None` if no compatible pair turned up in a few draws.
pub fn crossover<R: Rng + ?Sized>(a: &Expr, b: &Expr, rng: &mut R) -> Option<(Expr, Expr)> {
    assert_eq!(a.notation(), b.notation());
    let n = a.notation();
    let (ta, tb) = (a.tokens(), b.tokens());
    let (da, db) = (node_depths(ta, n), node_depths(tb, n));
    for _ in 0..16 {
        let i = rng.gen_range(0..ta.len());
        let j = rng.gen_range(0..tb.len());
        let (sa, sb) = (subtree_span(ta, n, i), subtree_span(tb, n, j));
        let ha = sequence_depth(&ta[sa.start..sa.end], n).ok()?;
        let hb = sequence_depth(&tb[sb.start..sb.end], n).ok()?;
        if da[i] + hb > a.budget() || db[j] + ha > b.budget() {
            continue;
        }
        let splice = |t: &[crate::expr::Token], s: crate::expr::Span, with: &[crate::expr::Token]| {
            let mut out = Vec::with_capacity(t.len() - s.len() + with.len());
            out.extend_from_slice(&t[..s.start]);
            out.extend_from_slice(with);
            out.extend_from_slice(&t[s.end..]);
            out
        };
        let ca = splice(ta, sa, &tb[sb.start..sb.end]);
        let cb = splice(tb, sb, &ta[sa.start..sa.end]);
        return Some((rebuild(a, ca), rebuild(b, cb)));
    }
    None
}

pub(crate) fn run(w: &mut Worker, params: &GpParams) {
    let alphabet = w.alphabet().clone();
    let mut pop: Vec<(Expr, f64)> = Vec::with_capacity(params.population + params.offspring);
    for _ in 0..params.population.max(1) {
        if w.done() {
            return;
        }
        let e = w.random_expr();
        let f = w.score(&e);
        pop.push((e, f));
    }
    let survivors = pop.len();
    while !w.done() {
        let mut made = 0;
        while made < params.offspring && !w.done() {
            let total = params.crossover + params.mutation;
            let pick = w.rng.gen::<f64>() * total;
            let a = pop[..survivors].choose(&mut w.rng).unwrap().0.clone();
            let children = if pick < params.crossover {
                let b = pop[..survivors].choose(&mut w.rng).unwrap().0.clone();
                match crossover(&a, &b, &mut w.rng) {
                    Some((x, y)) => vec![x, y],
                    None => vec![mutate(&a, &alphabet, &mut w.rng)],
                }
            } else {
                vec![mutate(&a, &alphabet, &mut w.rng)]
            };
            for c in children {
                if w.done() {
                    break;
                }
                let f = w.score(&c);
                pop.push((c, f));
                made += 1;
            }
        }
        pop.sort_by(|x, y| x.1.total_cmp(&y.1));
        pop.truncate(survivors);
    }
}
