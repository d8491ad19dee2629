//! Fixed-depth expression search: six algorithms over a shared best-so-far and
//! constant cache, one independent instance per worker thread.

mod constants;
mod gp;
mod mcts;
mod pso;
mod sa;
mod shared;

use std::fmt;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use constants::{fit_constants, fnv1a, pso_minimize, ConstFitParams};
pub use gp::{crossover, mutate, GpParams};
pub use mcts::MctsParams;
pub use pso::{decode_particle, PsoParams};
pub use sa::SaParams;
pub use shared::{select_action, BestRecord, CachedFit, NodeStats, Scored, SharedState};

use crate::expr::{sample_complete, Alphabet, Expr, Notation, TokenSet};
use crate::pde::{CaseData, ObjectiveConfig, Prepared};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Rs,
    Mcts,
    Cmcts,
    Pso,
    Gp,
    Sa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Rs, Algorithm::Mcts, Algorithm::Cmcts, Algorithm::Pso, Algorithm::Gp, Algorithm::Sa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rs => "rs",
            Algorithm::Mcts => "mcts",
            Algorithm::Cmcts => "cmcts",
            Algorithm::Pso => "pso",
            Algorithm::Gp => "gp",
            Algorithm::Sa => "sa",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Algorithm::Rs => "Random Search",
            Algorithm::Mcts => "MCTS",
            Algorithm::Cmcts => "Concurrent MCTS",
            Algorithm::Pso => "PSO",
            Algorithm::Gp => "GP",
            Algorithm::Sa => "Simulated Annealing",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}' (expected rs|mcts|cmcts|pso|gp|sa)"))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Hyperparams {
    pub mcts: MctsParams,
    pub cmcts: MctsParams,
    pub pso: PsoParams,
    pub gp: GpParams,
    pub sa: SaParams,
    pub consts: ConstFitParams,
}

impl Hyperparams {
    pub fn new() -> Self {
        Hyperparams { cmcts: MctsParams::concurrent(), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub depth: usize,
    pub notation: Notation,
    pub token_set: TokenSet,
    pub threads: usize,
    pub time_budget: Duration,
    pub seed: u64,
    pub objective: ObjectiveConfig,
    /// Warm start for `sa`.
    pub seed_expr: Option<Expr>,
    /// Stop after this many objective evaluations (for reproducible runs).
    pub max_evals: Option<u64>,
    pub params: Hyperparams,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, depth: usize, notation: Notation, token_set: TokenSet) -> Self {
        SearchConfig {
            algorithm,
            depth,
            notation,
            token_set,
            threads: 1,
            time_budget: Duration::from_secs(5),
            seed: 0,
            objective: ObjectiveConfig::default(),
            seed_expr: None,
            max_evals: None,
            params: Hyperparams::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// `None` when the budget ended before any candidate was scored.
    pub best: Option<BestRecord>,
    pub evaluations: u64,
    pub elapsed: Duration,
    /// Global best-so-far history as `(seconds, mse)`.
    pub improvements: Vec<(f64, f64)>,
    /// Per-worker history of the worker's own best scores.
    pub worker_logs: Vec<Vec<(f64, f64)>>,
}

impl SearchResult {
    pub fn best_mse(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.scored.mse())
    }
}

/// Deterministic per-worker seed derivation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn worker_seed(seed: u64, worker: usize) -> u64 {
    splitmix64(seed ^ splitmix64(worker as u64))
}

struct Ctx<'a> {
    config: &'a SearchConfig,
    data: &'a CaseData,
    alphabet: Alphabet,
    shared: &'a SharedState,
}

pub(crate) struct Worker<'a> {
    ctx: &'a Ctx<'a>,
    id: usize,
    rng: ChaCha8Rng,
    log: Vec<(f64, f64)>,
    local_best: f64,
}

impl<'a> Worker<'a> {
    fn done(&self) -> bool {
        self.ctx.shared.done()
    }

    fn alphabet(&self) -> &Alphabet {
        &self.ctx.alphabet
    }

    fn budget(&self) -> usize {
        self.ctx.config.depth
    }

    fn notation(&self) -> Notation {
        self.ctx.config.notation
    }

    fn random_expr(&mut self) -> Expr {
        sample_complete(&mut self.rng, self.ctx.config.notation, self.ctx.config.depth, &self.ctx.alphabet)
    }

    /// Score a candidate (fitting constants if it has slots) and publish improvements.
    fn score(&mut self, e: &Expr) -> f64 {
        let cfg = self.ctx.config;
        let p = Prepared::new(e, cfg.objective.ic_derivatives);
        let fit = fit_constants(&p, self.ctx.data, self.ctx.shared, &cfg.params.consts, &cfg.objective);
        let mse = fit.breakdown.total;
        let scored = Scored { expr: e.clone(), consts: fit.consts, breakdown: fit.breakdown };
        if mse < self.local_best || self.log.is_empty() {
            self.local_best = mse;
            self.log.push((self.ctx.shared.elapsed().as_secs_f64(), mse));
        }
        self.ctx.shared.offer(&scored, self.id);
        mse
    }
}

fn run_random(w: &mut Worker) {
    while !w.done() {
        let e = w.random_expr();
        w.score(&e);
    }
}

pub fn run_search(config: &SearchConfig, data: &CaseData) -> SearchResult {
    let shared = SharedState::new(config.time_budget, config.max_evals);
    let ctx = Ctx { config, data, alphabet: Alphabet::for_token_set(config.token_set), shared: &shared };
    let threads = config.threads.max(1);
    let worker_logs: Vec<Vec<(f64, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|id| {
                let ctx = &ctx;
                s.spawn(move || {
                    let mut w = Worker {
                        ctx,
                        id,
                        rng: ChaCha8Rng::seed_from_u64(worker_seed(config.seed, id)),
                        log: Vec::new(),
                        local_best: f64::INFINITY,
                    };
                    match config.algorithm {
                        Algorithm::Rs => run_random(&mut w),
                        Algorithm::Mcts => mcts::run(&mut w, &config.params.mcts, false),
                        Algorithm::Cmcts => mcts::run(&mut w, &config.params.cmcts, true),
                        Algorithm::Pso => pso::run(&mut w, &config.params.pso),
                        Algorithm::Gp => gp::run(&mut w, &config.params.gp),
                        Algorithm::Sa => sa::run(&mut w, &config.params.sa),
                    }
                    w.log
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    SearchResult {
        best: shared.best(),
        evaluations: shared.evaluations(),
        elapsed: shared.elapsed(),
        improvements: shared.improvements(),
        worker_logs,
    }
}
