use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::shared::{CachedFit, SharedState};
use crate::pde::{objective_prepared, CaseData, ObjectiveConfig, Prepared};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstFitParams {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ConstFitParams {
    fn default() -> Self {
        ConstFitParams {
            swarm: 20,
            iterations: 5,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            lo: -10.0,
            hi: 10.0,
        }
    }
}

/// Global-best particle swarm over a box; `f` returns a score (lower is better,
/// NaN counts as +∞) and an attached payload.
///
/// One initial evaluation of the swarm plus `iterations` update rounds.
pub fn pso_minimize<T, R: Rng + ?Sized>(
    mut f: impl FnMut(&[f64]) -> (f64, T),
    dim: usize,
    params: &ConstFitParams,
    rng: &mut R,
) -> (Vec<f64>, f64, T) {
    let score = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let n = params.swarm.max(1);
    let mut pos: Vec<Vec<f64>> =
        (0..n).map(|_| (0..dim).map(|_| rng.gen_range(params.lo..=params.hi)).collect()).collect();
    let mut vel = vec![vec![0.0; dim]; n];
    let mut pbest = pos.clone();
    let mut pbest_f = Vec::with_capacity(n);
    let mut g: Option<(usize, f64, T)> = None;
    for (i, p) in pos.iter().enumerate() {
        let (v, payload) = f(p);
        let v = score(v);
        pbest_f.push(v);
        if g.as_ref().is_none_or(|(_, gv, _)| v < *gv) {
            g = Some((i, v, payload));
        }
    }
    let (gi, mut gf, mut gp) = g.expect("non-empty swarm");
    let mut gx = pos[gi].clone();
    for _ in 0..params.iterations {
        for i in 0..n {
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                vel[i][d] = params.inertia * vel[i][d]
                    + params.cognitive * r1 * (pbest[i][d] - pos[i][d])
                    + params.social * r2 * (gx[d] - pos[i][d]);
                pos[i][d] += vel[i][d];
            }
            let (v, payload) = f(&pos[i]);
            let v = score(v);
            if v < pbest_f[i] {
                pbest_f[i] = v;
                pbest[i].clone_from(&pos[i]);
            }
            if v < gf {
                gf = v;
                gx.clone_from(&pos[i]);
                gp = payload;
            }
        }
    }
    (gx, gf, gp)
}

/// FNV-1a, used to seed constant fitting from the expression key.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fitted constants for `p.expr`, from the shared cache or a fresh swarm run.
pub fn fit_constants(
    p: &Prepared,
    data: &CaseData,
    shared: &SharedState,
    params: &ConstFitParams,
    config: &ObjectiveConfig,
) -> CachedFit {
    let slots = p.expr.slot_count();
    if slots == 0 {
        shared.count_eval();
        return CachedFit { consts: Vec::new(), breakdown: objective_prepared(p, data, &[], config) };
    }
    let key = p.expr.key();
    if let Some(hit) = shared.const_cache.get(&key) {
        return hit.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(&key));
    let (consts, _, breakdown) = pso_minimize(
        |c| {
            shared.count_eval();
            let b = objective_prepared(p, data, c, config);
            (b.total, b)
        },
        slots,
        params,
        &mut rng,
    );
    let fit = CachedFit { consts, breakdown };
    shared.const_cache.insert(key, fit.clone());
    fit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn sphere_improves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ConstFitParams { iterations: 40, ..Default::default() };
        let (x, v, ()) =
            pso_minimize(|c| (c.iter().map(|v| (v - 1.0).powi(2)).sum(), ()), 3, &params, &mut rng);
        assert!(v < 1e-2, "{x:?} {v}");
    }
}
