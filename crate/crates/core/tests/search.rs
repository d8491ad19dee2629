use std::time::Duration;

use padesr_core::eval::{eval_grid, Axis, Bounds, Dataset};
use padesr_core::expr::{
    parse, sample_complete, sequence_depth, Alphabet, Expr, Notation, ParseMode, Token, TokenSet,
};
use padesr_core::pde::{build_case, objective, CaseData, CaseId, ObjectiveConfig, Prepared};
use padesr_core::search::{
    crossover, decode_particle, fit_constants, mutate, pso_minimize, run_search, Algorithm, ConstFitParams,
    SearchConfig, SearchResult, SharedState,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CASE1_PUBLISHED: &str = "- ^ I ^ tanh I sqrt t * sech + I / t * 0.2 y sech + x + y ^ 2 I";

fn case1() -> CaseData {
    build_case(CaseId::Case1, &ObjectiveConfig::default())
}

fn config(alg: Algorithm, depth: usize, notation: Notation, tokens: TokenSet) -> SearchConfig {
    let mut c = SearchConfig::new(alg, depth, notation, tokens);
    c.time_budget = Duration::from_secs(600);
    c.seed = 11;
    c
}

fn fingerprint(r: &SearchResult) -> (String, u64, Vec<Vec<u64>>) {
    let best = r.best.as_ref().unwrap();
    let logs = r.worker_logs.iter().map(|l| l.iter().map(|p| p.1.to_bits()).collect()).collect();
    (format!("{} {:?}", best.scored.expr, best.scored.consts), r.evaluations, logs)
}

#[test]
fn depth_zero_random_search_finds_best_leaf() {
    let data = case1();
    let cfg = ObjectiveConfig::default();
    let brute = ["x", "y", "t", "I"]
        .iter()
        .map(|s| {
            let e = parse(s, Notation::Prefix, &ParseMode::free()).unwrap();
            objective(&e, &data, &[], &cfg).total
        })
        .fold(f64::INFINITY, f64::min);
    let mut c = config(Algorithm::Rs, 0, Notation::Prefix, TokenSet::Vars);
    c.max_evals = Some(64);
    let r = run_search(&c, &data);
    assert_eq!(r.best_mse(), brute);
}

#[test]
fn single_thread_runs_are_reproducible() {
    let data = case1();
    for alg in [Algorithm::Rs, Algorithm::Mcts, Algorithm::Pso, Algorithm::Gp, Algorithm::Sa] {
        for notation in [Notation::Prefix, Notation::Postfix] {
            let mut c = config(alg, 3, notation, TokenSet::VarsConst);
            c.max_evals = Some(250);
            c.params.gp.population = 40;
            c.params.gp.offspring = 60;
            let a = run_search(&c, &data);
            let b = run_search(&c, &data);
            assert_eq!(fingerprint(&a), fingerprint(&b), "{alg} {notation}");
            assert_eq!(a.evaluations, 250, "{alg}");
        }
    }
}

#[test]
fn best_matches_logs_and_rescoring() {
    let data = case1();
    let cfg = ObjectiveConfig::default();
    for alg in Algorithm::ALL {
        let mut c = config(alg, 2, Notation::Prefix, TokenSet::VarsConstOpt);
        c.max_evals = Some(400);
        c.threads = 2;
        c.params.gp.population = 20;
        c.params.gp.offspring = 40;
        let r = run_search(&c, &data);
        let best = r.best.clone().expect("something was scored");
        for log in &r.worker_logs {
            assert!(log.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 >= w[0].0), "{alg}");
        }
        let log_min = r.worker_logs.iter().flatten().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_mse(), log_min, "{alg}");
        assert!(r.improvements.windows(2).all(|w| w[1].1 < w[0].1));
        let again = objective(&best.scored.expr, &data, &best.scored.consts, &cfg);
        assert_eq!(again.total.to_bits(), best.scored.mse().to_bits(), "{alg}");
    }
}

#[test]
fn time_budget_stops_concurrent_search() {
    let data = case1();
    let mut c = config(Algorithm::Cmcts, 4, Notation::Postfix, TokenSet::VarsConstOpt);
    c.threads = 4;
    c.time_budget = Duration::from_millis(600);
    let r = run_search(&c, &data);
    assert!(r.elapsed < Duration::from_secs(5));
    let log_min = r.worker_logs.iter().flatten().map(|p| p.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_mse(), log_min);
    assert!(r.evaluations > 0);
}

#[test]
fn annealing_from_seed_never_loses_it() {
    let data = case1();
    let seed = parse(CASE1_PUBLISHED, Notation::Prefix, &ParseMode::free()).unwrap();
    let mut c = config(Algorithm::Sa, 3, Notation::Postfix, TokenSet::VarsConst);
    c.objective.threshold = 0.0;
    c.seed_expr = Some(seed.clone());
    c.max_evals = Some(150);
    let r = run_search(&c, &data);
    let start = objective(&seed, &data, &[], &c.objective).total;
    assert!(r.best_mse() <= start);
    assert_eq!(r.worker_logs[0][0].1, start);
}

// Test objective mean((C x - 2 x)^2) on x in [-1, 1]; the optimum is C = 2.
#[test]
fn constant_fit_on_convex_bowl() {
    let data = Dataset::new(
        [Axis::new(-1.0, 1.0, 21), Axis::point(0.0), Axis::point(0.0)],
        Bounds { x: (-1.0, 1.0), y: (0.0, 0.0), t: (0.0, 0.0) },
        |_, _| [0.0; 6],
    );
    let e = parse("C x *", Notation::Postfix, &ParseMode::Search).unwrap();
    let xs = Axis::new(-1.0, 1.0, 21).values();
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, _, ()) = pso_minimize(
            |c| {
                let g = eval_grid(&e, &data, c).unwrap();
                let m = g.values.iter().zip(&xs).map(|(v, x)| (v - 2.0 * x).powi(2)).sum::<f64>()
                    / xs.len() as f64;
                (m, ())
            },
            1,
            &ConstFitParams::default(),
            &mut rng,
        );
        if (1.0..=3.0).contains(&c[0]) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn cached_fit_costs_no_evaluations() {
    let data = case1();
    let cfg = ObjectiveConfig::default();
    let shared = SharedState::new(Duration::from_secs(60), None);
    let e = parse("* C + x t", Notation::Prefix, &ParseMode::Search).unwrap();
    let p = Prepared::new(&e, cfg.ic_derivatives);
    let params = ConstFitParams::default();
    let first = fit_constants(&p, &data, &shared, &params, &cfg);
    assert_eq!(shared.evaluations(), 120);
    let second = fit_constants(&p, &data, &shared, &params, &cfg);
    assert_eq!(shared.evaluations(), 120);
    assert_eq!(first.consts, second.consts);
    assert_eq!(first.breakdown.total.to_bits(), second.breakdown.total.to_bits());
    let direct = objective(&e, &data, &first.consts, &cfg);
    assert_eq!(direct.total.to_bits(), first.breakdown.total.to_bits());
}

#[test]
fn zero_particle_takes_first_legal_actions() {
    let a = Alphabet::for_token_set(TokenSet::Vars);
    let e = decode_particle(&[0.0; 7], Notation::Prefix, 2, &a);
    assert_eq!(e.to_text(), "x");
    let e = decode_particle(&[4.0, 0.0, 1.0], Notation::Prefix, 2, &a);
    assert_eq!(e.tokens()[0], Token::Unary(padesr_core::expr::UnaryOp::ALL[0]));
    assert_eq!(decode_particle(&[], Notation::Postfix, 3, &a).to_text(), "x");
}

fn depth_ok(e: &Expr, budget: usize) -> bool {
    sequence_depth(e.tokens(), e.notation()).map_or(false, |d| d <= budget)
}

fn slots_in_order(e: &Expr) -> bool {
    e.tokens()
        .iter()
        .filter_map(|t| match t {
            Token::Learnable(s) => Some(*s as usize),
            _ => None,
        })
        .enumerate()
        .all(|(i, s)| i == s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decoded_particles_fit_budget(
        xs in prop::collection::vec(-100.0f64..100.0, 0..80),
        depth in 0usize..6,
        postfix in any::<bool>(),
    ) {
        let n = if postfix { Notation::Postfix } else { Notation::Prefix };
        let a = Alphabet::for_token_set(TokenSet::VarsConstOpt);
        let e = decode_particle(&xs, n, depth, &a);
        prop_assert!(depth_ok(&e, depth));
        prop_assert!(slots_in_order(&e));
    }

    #[test]
    fn span_operators_respect_depth(seed in any::<u64>(), depth in 0usize..7, postfix in any::<bool>()) {
        let n = if postfix { Notation::Postfix } else { Notation::Prefix };
        let a = Alphabet::for_token_set(TokenSet::VarsConstOpt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample_complete(&mut rng, n, depth, &a);
        let y = sample_complete(&mut rng, n, depth, &a);
        let m = mutate(&x, &a, &mut rng);
        prop_assert!(depth_ok(&m, depth));
        prop_assert!(slots_in_order(&m));
        if let Some((c, d)) = crossover(&x, &y, &mut rng) {
            prop_assert!(depth_ok(&c, depth) && depth_ok(&d, depth));
            prop_assert!(slots_in_order(&c) && slots_in_order(&d));
            prop_assert_eq!(c.len() + d.len(), x.len() + y.len());
        }
    }
}
