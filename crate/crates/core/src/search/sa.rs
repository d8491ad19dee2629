use rand::Rng;

use super::gp::mutate;
use super::Worker;
use crate::expr::Expr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaParams {
    pub t0: f64,
    pub cooling: f64,
    pub floor: f64,
    /// Steps without an accepted move before the temperature is reset to `t0`.
    pub reheat_after: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { t0: 1.0, cooling: 0.999, floor: 1e-6, reheat_after: 2000 }
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub(crate) fn run(w: &mut Worker, params: &SaParams) {
    let alphabet = w.alphabet().clone();
    let mut cur = match &w.ctx.config.seed_expr {
        Some(s) => {
            let e = s.to_notation(w.notation());
            let budget = e.depth().max(w.budget());
            Expr::with_budget(e.notation(), e.into_tokens(), budget).expect("depth within budget")
        }
        None => w.random_expr(),
    };
    let mut cur_f = finite_or_inf(w.score(&cur));
    let mut temp = params.t0;
    let mut stall = 0usize;
    while !w.done() {
        let next = mutate(&cur, &alphabet, &mut w.rng);
        let f = finite_or_inf(w.score(&next));
        let delta = if f.is_infinite() && cur_f.is_infinite() { 0.0 } else { f - cur_f };
        let accept = delta < 0.0 || w.rng.gen::<f64>() < (-delta / temp).exp();
        if accept {
            cur = next;
            cur_f = f;
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.reheat_after {
                temp = params.t0;
                stall = 0;
            }
        }
        temp = (temp * params.cooling).max(params.floor);
    }
}
