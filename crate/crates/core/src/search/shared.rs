use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use dashmap::DashMap;
use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::expr::Expr;
use crate::pde::MseBreakdown;

/// An expression together with the constants it was scored with.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub expr: Expr,
    pub consts: Vec<f64>,
    pub breakdown: MseBreakdown,
}

impl Scored {
    pub fn mse(&self) -> f64 {
        self.breakdown.total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestRecord {
    pub scored: Scored,
    pub found_at: Duration,
    pub worker: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CachedFit {
    pub consts: Vec<f64>,
    pub breakdown: MseBreakdown,
}

/// Visit statistics of one search-tree state, indexed by alphabet action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeStats {
    pub n: u64,
    pub edges: Vec<(u64, f64)>,
}

impl NodeStats {
    pub fn edge(&self, action: usize) -> (u64, f64) {
        self.edges.get(action).copied().unwrap_or((0, 0.0))
    }

    pub fn record(&mut self, action: usize, reward: f64) {
        if self.edges.len() <= action {
            self.edges.resize(action + 1, (0, 0.0));
        }
        self.n += 1;
        let e = &mut self.edges[action];
        e.0 += 1;
        e.1 += reward;
    }
}

/// UCT choice among `legal` (ascending action indices).
///
/// Unvisited actions come first: the lowest-index one, or a uniformly random one
/// when `rng` is given. Otherwise the UCT argmax wins, ties going to the lowest index.
pub fn select_action<R: Rng + ?Sized>(
    stats: Option<&NodeStats>,
    legal: &[usize],
    c: f64,
    rng: Option<&mut R>,
) -> usize {
    assert!(!legal.is_empty());
    let Some(stats) = stats else {
        return match rng {
            Some(r) => *legal.choose(r).unwrap(),
            None => legal[0],
        };
    };
    let unvisited: Vec<usize> = legal.iter().copied().filter(|&a| stats.edge(a).0 == 0).collect();
    if !unvisited.is_empty() {
        return match rng {
            Some(r) => *unvisited.choose(r).unwrap(),
            None => unvisited[0],
        };
    }
    let ln_n = (stats.n.max(1) as f64).ln();
    let mut best = legal[0];
    let mut best_score = f64::NEG_INFINITY;
    for &a in legal {
        let (n, w) = stats.edge(a);
        let score = w / n as f64 + c * (ln_n / n as f64).sqrt();
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

/// State shared by all workers of one search.
pub struct SharedState {
    pub const_cache: DashMap<String, CachedFit>,
    pub mcts: DashMap<String, NodeStats>,
    best: Mutex<Option<BestRecord>>,
    best_hint: AtomicU64,
    has_best: AtomicBool,
    improvements: Mutex<Vec<(f64, f64)>>,
    evals: AtomicU64,
    stop: AtomicBool,
    start: Instant,
    deadline: Instant,
    max_evals: Option<u64>,
}

impl SharedState {
    pub fn new(budget: Duration, max_evals: Option<u64>) -> Self {
        let start = Instant::now();
        SharedState {
            const_cache: DashMap::new(),
            mcts: DashMap::new(),
            best: Mutex::new(None),
            best_hint: AtomicU64::new(f64::INFINITY.to_bits()),
            has_best: AtomicBool::new(false),
            improvements: Mutex::new(Vec::new()),
            evals: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            start,
            deadline: start + budget,
            max_evals,
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn count_eval(&self) {
        self.evals.fetch_add(1, Ordering::Relaxed);
    }

    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }

    pub fn done(&self) -> bool {
        if self.stop.load(Ordering::Relaxed) {
            return true;
        }
        let over = self.max_evals.is_some_and(|m| self.evaluations() >= m) || Instant::now() >= self.deadline;
        if over {
            self.request_stop();
        }
        over
    }

    pub fn best_mse(&self) -> f64 {
        f64::from_bits(self.best_hint.load(Ordering::Acquire))
    }

    /// Install `s` as best-so-far if it beats the current one. The first offer always
    /// installs, so an all-infinite search still reports what it scored.
    pub fn offer(&self, s: &Scored, worker: usize) -> bool {
        let mse = s.mse();
        if self.has_best.load(Ordering::Acquire) && !(mse < self.best_mse()) {
            return false;
        }
        let mut guard = self.best.lock();
        let better = match guard.as_ref() {
            None => true,
            Some(b) => mse < b.scored.mse(),
        };
        if better {
            let found_at = self.elapsed();
            *guard = Some(BestRecord { scored: s.clone(), found_at, worker });
            self.best_hint.store(mse.to_bits(), Ordering::Release);
            self.has_best.store(true, Ordering::Release);
            self.improvements.lock().push((found_at.as_secs_f64(), mse));
        }
        better
    }

    pub fn best(&self) -> Option<BestRecord> {
        self.best.lock().clone()
    }

    pub fn improvements(&self) -> Vec<(f64, f64)> {
        self.improvements.lock().clone()
    }

    pub fn node_stats(&self, key: &str) -> Option<NodeStats> {
        self.mcts.get(key).map(|r| r.clone())
    }

    pub fn record_visit(&self, key: &str, action: usize, reward: f64) {
        self.mcts.entry(key.to_string()).or_default().record(action, reward);
    }
}
