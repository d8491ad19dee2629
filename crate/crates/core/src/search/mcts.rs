use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::shared::{select_action, NodeStats};
use super::Worker;
use crate::expr::{Action, PartialExpr};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MctsParams {
    pub c_initial: f64,
    /// Iterations without improvement before the exploration constant is raised.
    pub stall_iterations: usize,
    pub c_increment: f64,
    pub c_reset: f64,
}

impl Default for MctsParams {
    fn default() -> Self {
        MctsParams { c_initial: 1.4, stall_iterations: 500, c_increment: 1.4, c_reset: 1.4 }
    }
}

impl MctsParams {
    pub fn concurrent() -> Self {
        MctsParams { stall_iterations: 1000, ..Default::default() }
    }
}

fn push_key(key: &mut String, action: Action) {
    if let Action::Token(t) = action {
        key.push_str(&t.spelling());
        key.push(' ');
    }
}

/// UCT search over partial token sequences. With `shared_stats` the statistics live
/// in the shared map and unvisited actions are picked at random.
pub(crate) fn run(w: &mut Worker, params: &MctsParams, shared_stats: bool) {
    let mut local: HashMap<String, NodeStats> = HashMap::new();
    let mut c = params.c_initial;
    let mut stall = 0usize;
    let mut best = f64::INFINITY;
    let (notation, budget) = (w.notation(), w.budget());
    let mut path: Vec<(String, usize)> = Vec::new();
    while !w.done() {
        let alphabet = w.alphabet().clone();
        let mut p = PartialExpr::new(notation, budget);
        let mut key = String::new();
        path.clear();
        while !p.is_terminal() {
            let legal = p.legal_action_indices(&alphabet);
            let (a, fresh) = if shared_stats {
                let stats = w.ctx.shared.node_stats(&key);
                let fresh = stats.as_ref().is_none_or(|s| legal.iter().any(|&a| s.edge(a).0 == 0));
                (select_action(stats.as_ref(), &legal, c, Some(&mut w.rng)), fresh)
            } else {
                let stats = local.get(&key);
                let fresh = stats.is_none_or(|s| legal.iter().any(|&a| s.edge(a).0 == 0));
                (select_action::<rand_chacha::ChaCha8Rng>(stats, &legal, c, None), fresh)
            };
            path.push((key.clone(), a));
            let action = alphabet.action(a);
            p.push(action);
            push_key(&mut key, action);
            if fresh {
                break;
            }
        }
        while !p.is_terminal() {
            let legal = p.legal_action_indices(&alphabet);
            let a = *legal.choose(&mut w.rng).unwrap();
            p.push(alphabet.action(a));
        }
        let e = p.into_expr().expect("grammar yields complete sequences");
        let mse = w.score(&e);
        let reward = if mse.is_finite() { 1.0 / (1.0 + mse) } else { 0.0 };
        for (k, a) in path.drain(..) {
            if shared_stats {
                w.ctx.shared.record_visit(&k, a, reward);
            } else {
                local.entry(k).or_default().record(a, reward);
            }
        }
        if mse < best {
            best = mse;
            stall = 0;
            c = params.c_reset;
        } else {
            stall += 1;
            if stall >= params.stall_iterations {
                c += params.c_increment;
                stall = 0;
            }
        }
    }
}
