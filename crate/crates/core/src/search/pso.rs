use rand::Rng;

use super::Worker;
use crate::expr::{Alphabet, Expr, Notation, PartialExpr};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsoParams {
    pub swarm: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Upper bound on the particle length 2^(N+1) - 1.
    pub max_dimension: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams { swarm: 50, inertia: 0.7, cognitive: 1.5, social: 1.5, max_dimension: 512 }
    }
}

impl PsoParams {
    pub fn dimension(&self, depth: usize) -> usize {
        let full = if depth >= 62 { usize::MAX } else { (1usize << (depth + 1)) - 1 };
        full.min(self.max_dimension.max(1))
    }
}

/// Walk the grammar, taking legal action `floor(|x_i|) mod |legal|` at step `i`.
/// Once the components run out the sequence is closed with the shortest completion.
pub fn decode_particle(x: &[f64], notation: Notation, budget: usize, alphabet: &Alphabet) -> Expr {
    let mut p = PartialExpr::new(notation, budget);
    for &v in x {
        if p.is_terminal() {
            break;
        }
        let legal = p.legal_action_indices(alphabet);
        let k = v.abs().floor();
        let k = if k.is_finite() { (k % legal.len() as f64) as usize } else { 0 };
        p.push(alphabet.action(legal[k]));
    }
    p.close(alphabet);
    p.into_expr().expect("grammar yields complete sequences")
}

pub(crate) fn run(w: &mut Worker, params: &PsoParams) {
    let alphabet = w.alphabet().clone();
    let (notation, budget) = (w.notation(), w.budget());
    let dim = params.dimension(budget);
    let span = alphabet.action_count() as f64;
    let n = params.swarm.max(1);
    let mut pos: Vec<Vec<f64>> =
        (0..n).map(|_| (0..dim).map(|_| w.rng.gen_range(0.0..span)).collect()).collect();
    let mut vel = vec![vec![0.0; dim]; n];
    let mut pbest = pos.clone();
    let mut pbest_f = vec![f64::INFINITY; n];
    let mut gbest = pos[0].clone();
    let mut gbest_f = f64::INFINITY;
    let mut first = true;
    while !w.done() {
        for i in 0..n {
            if w.done() {
                return;
            }
            if !first {
                for d in 0..dim {
                    let r1: f64 = w.rng.gen();
                    let r2: f64 = w.rng.gen();
                    let v = params.inertia * vel[i][d]
                        + params.cognitive * r1 * (pbest[i][d] - pos[i][d])
                        + params.social * r2 * (gbest[d] - pos[i][d]);
                    vel[i][d] = v.clamp(-span, span);
                    pos[i][d] += vel[i][d];
                }
            }
            let e = decode_particle(&pos[i], notation, budget, &alphabet);
            let f = w.score(&e);
            let f = if f.is_nan() { f64::INFINITY } else { f };
            if f < pbest_f[i] {
                pbest_f[i] = f;
                pbest[i].clone_from(&pos[i]);
            }
            if f < gbest_f {
                gbest_f = f;
                gbest.clone_from(&pos[i]);
            }
        }
        first = false;
    }
}
