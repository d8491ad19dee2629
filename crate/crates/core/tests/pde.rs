use padesr_core::diff::IcDerivatives;
use padesr_core::eval::{eval_grid, Axis};
use padesr_core::expr::{parse, Bindings, Notation, ParseMode, Var};
use padesr_core::pde::{
    boundary_mse, build_case, components, initial_mse, interior_mse, nontriviality_gate, objective,
    objective_prepared, residual_expression, CaseData, CaseId, InitialTime, MseBreakdown, ObjectiveConfig,
    Prepared,
};

const CASE1_PUBLISHED: &str = "- ^ I ^ tanh I sqrt t * sech + I / t * 0.2 y sech + x + y ^ 2 I";
const CASE2_PUBLISHED: &str = "+ I sech / + / 1 3.141592653589793 + x y * 20 ^ t 2";
const CASE1_ANNEALED: &str =
    "- ^ I ^ sech y_0 asin 0.1 * sech - - y x / sech 0.103287 ^ 0.1 I / / t sin sech 1.1 - t ^ 0.1 1.2";
const CASE2_ANNEALED: &str =
    "+ ^ I ^ y_0 log / 6.283185 6.283185 sech / + acos 0.819757 + x y * * t 20.0 ^ 12.499170 2";

fn px(s: &str) -> padesr_core::expr::Expr {
    parse(s, Notation::Prefix, &ParseMode::free()).unwrap()
}

fn bound(s: &str, y0: &str) -> padesr_core::expr::Expr {
    let mut b = Bindings::new();
    b.bind_assignment(&format!("y_0={y0}")).unwrap();
    parse(s, Notation::Prefix, &ParseMode::Free(b)).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

// Reference components from an independent sympy/numpy evaluation of the same model.
#[test]
fn case1_published_components_match_reference() {
    let cfg = ObjectiveConfig::default();
    let d = build_case(CaseId::Case1, &cfg);
    let r = objective(&px(CASE1_PUBLISHED), &d, &[], &cfg);
    assert!(!r.gate_rejected);
    let want_b = [2.9241003675e-04, 7.6499635445e-07, 5.4428239731e-04, 4.4810718218e-04];
    assert!(close(r.interior, 5.3228190389e-04, 1e-8), "{r:?}");
    for (g, w) in r.boundary.iter().zip(want_b) {
        assert!(close(*g, w, 1e-8), "{r:?}");
    }
    assert!(close(r.initial, 3.6679477269e-04, 1e-8));
    assert!(close(r.total, 2.1846412892e-03, 1e-8));
}

#[test]
fn case2_published_components_match_reference() {
    let cfg = ObjectiveConfig::default();
    let d = build_case(CaseId::Case2, &cfg);
    let r = objective(&px(CASE2_PUBLISHED), &d, &[], &cfg);
    assert!(!r.gate_rejected);
    assert!(close(r.interior, 4.3218326189e-04, 1e-8), "{r:?}");
    assert!(close(r.boundary[1], 5.4308929809e-03, 1e-8));
    assert_eq!(r.initial, 0.0);
    assert!(close(r.total, 1.1741474165e-02, 1e-8));
}

#[test]
fn annealed_expressions_on_fine_mesh() {
    let cfg = ObjectiveConfig { threshold: 0.0, mesh: [50, 50, 50], ..Default::default() };
    let d1 = build_case(CaseId::Case1, &cfg);
    let r = objective(&bound(CASE1_ANNEALED, "0"), &d1, &[], &cfg);
    assert!(r.total < 1e-15, "{r:?}");
    let r = objective(&bound(CASE1_ANNEALED, "y_min"), &d1, &[], &cfg);
    assert!(close(r.initial, 5.1565580537e-01, 1e-8), "{r:?}");
    let d2 = build_case(CaseId::Case2, &cfg);
    let r = objective(&bound(CASE2_ANNEALED, "y_min"), &d2, &[], &cfg);
    assert!(close(r.total, 1.0726508461e-06, 1e-6), "{r:?}");
}

#[test]
fn initial_of_zero_is_mean_square_gaussian() {
    let cfg = ObjectiveConfig::default();
    for id in CaseId::ALL {
        let d = build_case(id, &cfg);
        let b = d.case.bounds;
        let g = d.case.ic;
        let xs = Axis::new(b.x.0, b.x.1, 10).values();
        let ys = Axis::new(b.y.0, b.y.1, 10).values();
        let mut s = 0.0;
        for &x in &xs {
            for &y in &ys {
                let v = (-((x - g.xc).powi(2) + (y - g.yc).powi(2))).exp() / 0.08;
                s += v * v;
            }
        }
        let got = initial_mse(&Prepared::new(&px("0"), IcDerivatives::Frozen), &d, &[]);
        assert!(close(got, s / 100.0, 1e-12));
    }
}

#[test]
fn i_alone_has_positive_residual() {
    let cfg = ObjectiveConfig { ic_derivatives: IcDerivatives::Analytic, ..Default::default() };
    let d = build_case(CaseId::Case1, &cfg);
    let p = Prepared::new(&px("I"), IcDerivatives::Analytic);
    let m = interior_mse(&p, &d, &[]);
    assert!(m.is_finite() && m > 0.0);
    let frozen = Prepared::new(&px("I"), IcDerivatives::Frozen);
    assert_eq!(interior_mse(&frozen, &d, &[]), 0.0);
}

#[test]
fn gate_on_product() {
    let cfg = ObjectiveConfig::default();
    let d = build_case(CaseId::Case2, &cfg);
    let p = Prepared::new(&px("* x * y t"), IcDerivatives::Frozen);
    let out = nontriviality_gate(&p, &d, &[], 0.1);
    assert!(out.pass);
    let b = d.case.bounds;
    assert!(close(out.norms[0], b.y.1 * b.t.1, 1e-12));
    assert!(close(out.norms[2], b.x.1 * b.y.1, 1e-12));
    let c = Prepared::new(&px("1"), IcDerivatives::Frozen);
    assert!(!nontriviality_gate(&c, &d, &[], cfg.threshold).pass);
    assert!(nontriviality_gate(&c, &d, &[], 0.0).pass);
}

#[test]
fn faulted_candidates_score_infinity() {
    let cfg = ObjectiveConfig { threshold: 0.0, ..Default::default() };
    let d = build_case(CaseId::Case1, &cfg);
    let r = objective(&px("log - x 1"), &d, &[], &cfg);
    assert_eq!(r.total, f64::INFINITY);
    let r = objective(&px("/ 1 - x x"), &d, &[], &cfg);
    assert_eq!(r.total, f64::INFINITY);
}

#[test]
fn residual_expression_matches_grid_combination() {
    let cfg = ObjectiveConfig::default();
    for (id, text) in [(CaseId::Case1, CASE1_PUBLISHED), (CaseId::Case2, CASE2_PUBLISHED)] {
        let d = build_case(id, &cfg);
        for notation in [Notation::Prefix, Notation::Postfix] {
            let e = px(text).to_notation(notation);
            let p = Prepared::new(&e, IcDerivatives::Frozen);
            let r = residual_expression(&p, &d.case).unwrap();
            let g = eval_grid(&r, &d.interior, &[]).unwrap();
            let m: f64 = g.values.iter().map(|v| v * v).sum::<f64>() / g.values.len() as f64;
            assert!(close(m, interior_mse(&p, &d, &[]), 1e-12));
        }
    }
}

#[test]
fn total_is_left_to_right_sum() {
    let cfg = ObjectiveConfig::default();
    let d = build_case(CaseId::Case1, &cfg);
    let r = objective(&px(CASE1_PUBLISHED), &d, &[], &cfg);
    assert_eq!(r.total, MseBreakdown::sum(r.interior, &r.boundary, r.initial));
    let c = components(&Prepared::new(&px(CASE1_PUBLISHED), IcDerivatives::Frozen), &d, &[]);
    assert_eq!(c.total, r.total);
}

#[test]
fn mesh_refinement_is_bounded() {
    let coarse = ObjectiveConfig::default();
    let fine = ObjectiveConfig { mesh: [20, 20, 20], ..coarse };
    let a = objective(&px(CASE1_PUBLISHED), &build_case(CaseId::Case1, &coarse), &[], &coarse).total;
    let b = objective(&px(CASE1_PUBLISHED), &build_case(CaseId::Case1, &fine), &[], &fine).total;
    assert!(close(b, 6.8193009548e-04, 1e-8));
    assert!(a / b < 10.0 && b / a < 10.0);
}

#[test]
fn initial_plane_time_is_configurable() {
    let d = CaseData::new(CaseId::Case1, [10, 10, 10], InitialTime::Lower);
    assert_eq!(d.initial.axis(Var::T).value(0), 0.1);
    let z = CaseData::new(CaseId::Case1, [10, 10, 10], InitialTime::Zero);
    assert_eq!(z.initial.axis(Var::T).value(0), 0.0);
    let p = Prepared::new(&px(CASE2_PUBLISHED), IcDerivatives::Frozen);
    let _ = boundary_mse(&p, &d, &[]);
}

#[test]
fn objective_is_deterministic() {
    let cfg = ObjectiveConfig::default();
    let d = build_case(CaseId::Case2, &cfg);
    let p = Prepared::new(&px(CASE2_PUBLISHED), IcDerivatives::Frozen);
    let a = objective_prepared(&p, &d, &[], &cfg);
    let b = objective_prepared(&p, &d, &[], &cfg);
    assert_eq!(a, b);
}
