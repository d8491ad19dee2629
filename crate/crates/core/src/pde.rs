//! Advection-diffusion cases and the composite residual objective.
//!
//! For `T_t + u·∇T = κ∇²T` the objective is the unweighted sum of the mean squared
//! interior residual, one mean squared error per boundary condition, and the mean
//! squared initial-condition mismatch. Candidates whose derivatives stay below a
//! threshold everywhere are rejected with an infinite score.

use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use crate::diff::{differentiate_with, DiffError, IcDerivatives};
use crate::eval::{Axis, Bounds, Dataset, EvalError, Evaluator};
use crate::expr::{Expr, Notation, Side, Token, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    Case1,
    Case2,
}

impl CaseId {
    pub const ALL: [CaseId; 2] = [CaseId::Case1, CaseId::Case2];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown case '{s}' (expected case1|case2)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `∂T/∂axis = 0` on the plane `axis = side`.
    DerivativeZero(Var, Side),
    /// `T(axis_lo) = T(axis_hi)`.
    PeriodicValue(Var),
    /// `∂T/∂axis(axis_lo) = ∂T/∂axis(axis_hi)`.
    PeriodicDerivative(Var),
}

/// `I = exp(−((x−xc)² + (y−yc)²)) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub xc: f64,
    pub yc: f64,
    pub scale: f64,
}

impl Gaussian {
    /// `[I, I_x, I_y, I_xx, I_xy, I_yy]`.
    pub fn family(&self, x: f64, y: f64) -> [f64; 6] {
        let dx = x - self.xc;
        let dy = y - self.yc;
        let i = (-(dx * dx + dy * dy)).exp() / self.scale;
        [
            i,
            -2.0 * dx * i,
            -2.0 * dy * i,
            (4.0 * dx * dx - 2.0) * i,
            4.0 * dx * dy * i,
            (4.0 * dy * dy - 2.0) * i,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeCase {
    pub id: CaseId,
    pub bounds: Bounds,
    pub kappa: f64,
    pub ic: Gaussian,
    pub boundaries: Vec<BoundaryKind>,
}

impl PdeCase {
    pub fn new(id: CaseId) -> Self {
        match id {
            CaseId::Case1 => PdeCase {
                id,
                bounds: Bounds { x: (0.1, 2.1), y: (-1.1, 1.1), t: (0.1, 20.0) },
                kappa: 1.0,
                ic: Gaussian { xc: 1.1, yc: 0.0, scale: 0.08 },
                boundaries: vec![
                    BoundaryKind::DerivativeZero(Var::Y, Side::Min),
                    BoundaryKind::DerivativeZero(Var::Y, Side::Max),
                    BoundaryKind::PeriodicValue(Var::X),
                    BoundaryKind::PeriodicDerivative(Var::X),
                ],
            },
            CaseId::Case2 => PdeCase {
                id,
                bounds: Bounds { x: (0.1, 2.0 * PI), y: (0.1, 2.0 * PI), t: (0.1, 20.0) },
                kappa: 1.0,
                ic: Gaussian { xc: PI, yc: PI, scale: 0.08 },
                boundaries: vec![
                    BoundaryKind::PeriodicValue(Var::X),
                    BoundaryKind::PeriodicDerivative(Var::X),
                    BoundaryKind::PeriodicValue(Var::Y),
                    BoundaryKind::PeriodicDerivative(Var::Y),
                ],
            },
        }
    }

    pub fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        match self.id {
            CaseId::Case1 => (1.0 - y * y, 0.0),
            CaseId::Case2 => ((4.0 * y).sin(), (4.0 * x).cos()),
        }
    }

    /// Velocity components as prefix token text over `x` and `y`.
    pub fn velocity_text(&self) -> (&'static str, &'static str) {
        match self.id {
            CaseId::Case1 => ("- 1 ^ y 2", "0"),
            CaseId::Case2 => ("sin * 4 y", "cos * 4 x"),
        }
    }
}

/// Time at which the initial-condition mismatch is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialTime {
    #[default]
    Zero,
    /// The lower end of the time domain.
    Lower,
}

impl InitialTime {
    pub fn name(self) -> &'static str {
        match self {
            InitialTime::Zero => "zero",
            InitialTime::Lower => "lower",
        }
    }
}

impl std::str::FromStr for InitialTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(InitialTime::Zero),
            "lower" => Ok(InitialTime::Lower),
            other => Err(format!("unknown initial time '{other}' (expected zero|lower)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveConfig {
    /// Gate threshold τ; 0 disables the magnitude test (faults still reject).
    pub threshold: f64,
    pub mesh: [usize; 3],
    /// IC derivative handling in the residual and boundary terms. The gate always
    /// uses analytic derivatives.
    pub ic_derivatives: IcDerivatives,
    pub initial_time: InitialTime,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            threshold: FRAC_1_SQRT_2,
            mesh: [10, 10, 10],
            ic_derivatives: IcDerivatives::Frozen,
            initial_time: InitialTime::Zero,
        }
    }
}

#[derive(Clone, Debug)]
enum Planes {
    Single(Dataset),
    Pair(Dataset, Dataset),
}

/// A case with its interior mesh, boundary planes and initial-condition plane.
#[derive(Clone, Debug)]
pub struct CaseData {
    pub case: PdeCase,
    pub interior: Dataset,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    planes: Vec<Planes>,
    pub initial: Dataset,
}

fn mesh_axes(b: &Bounds, mesh: [usize; 3]) -> [Axis; 3] {
    [Axis::new(b.x.0, b.x.1, mesh[0]), Axis::new(b.y.0, b.y.1, mesh[1]), Axis::new(b.t.0, b.t.1, mesh[2])]
}

impl CaseData {
    pub fn new(id: CaseId, mesh: [usize; 3], initial_time: InitialTime) -> Self {
        assert!(mesh.iter().all(|&n| n >= 2), "mesh needs at least 2 points per axis");
        let case = PdeCase::new(id);
        let b = case.bounds;
        let g = case.ic;
        let family = move |x: f64, y: f64| g.family(x, y);
        let axes = mesh_axes(&b, mesh);
        let interior = Dataset::new(axes, b, family);
        let (ux, uy) = (0..interior.len())
            .map(|i| {
                let (x, y, _) = interior.point(i);
                case.velocity(x, y)
            })
            .unzip();
        let plane = |v: Var, side: Side| {
            let mut a = axes;
            a[v as usize] = Axis::point(b.get(v, side));
            Dataset::new(a, b, family)
        };
        let planes = case
            .boundaries
            .iter()
            .map(|bc| match *bc {
                BoundaryKind::DerivativeZero(v, side) => Planes::Single(plane(v, side)),
                BoundaryKind::PeriodicValue(v) | BoundaryKind::PeriodicDerivative(v) => {
                    Planes::Pair(plane(v, Side::Min), plane(v, Side::Max))
                }
            })
            .collect();
        let t0 = match initial_time {
            InitialTime::Zero => 0.0,
            InitialTime::Lower => b.t.0,
        };
        let mut a = axes;
        a[2] = Axis::point(t0);
        let initial = Dataset::new(a, b, family);
        CaseData { case, interior, ux, uy, planes, initial }
    }
}

pub fn build_case(id: CaseId, config: &ObjectiveConfig) -> CaseData {
    CaseData::new(id, config.mesh, config.initial_time)
}

/// A candidate with every derivative the objective needs, computed once.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub expr: Expr,
    pub t: Expr,
    pub x: Result<Expr, DiffError>,
    pub y: Result<Expr, DiffError>,
    pub xx: Result<Expr, DiffError>,
    pub yy: Result<Expr, DiffError>,
    pub gate_x: Result<Expr, DiffError>,
    pub gate_y: Result<Expr, DiffError>,
}

impl Prepared {
    pub fn new(expr: &Expr, ic: IcDerivatives) -> Self {
        let d = |e: &Expr, v| differentiate_with(e, v, ic);
        let t = d(expr, Var::T).expect("time derivatives never raise IC order");
        let x = d(expr, Var::X);
        let y = d(expr, Var::Y);
        let xx = x.clone().and_then(|e| d(&e, Var::X));
        let yy = y.clone().and_then(|e| d(&e, Var::Y));
        let has_ic = expr.contains(|t| matches!(t, Token::Ic(_)));
        let (gate_x, gate_y) = if ic == IcDerivatives::Analytic || !has_ic {
            (x.clone(), y.clone())
        } else {
            (
                differentiate_with(expr, Var::X, IcDerivatives::Analytic),
                differentiate_with(expr, Var::Y, IcDerivatives::Analytic),
            )
        };
        Prepared { expr: expr.clone(), t, x, y, xx, yy, gate_x, gate_y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseBreakdown {
    pub interior: f64,
    pub boundary: Vec<f64>,
    pub initial: f64,
    pub total: f64,
    pub gate_rejected: bool,
    /// A derivative or value grid contained a non-finite entry.
    pub fault: bool,
}

impl MseBreakdown {
    pub fn rejected(boundaries: usize) -> Self {
        MseBreakdown {
            interior: f64::NAN,
            boundary: vec![f64::NAN; boundaries],
            initial: f64::NAN,
            total: f64::INFINITY,
            gate_rejected: true,
            fault: false,
        }
    }

    /// `interior + Σ boundary + initial`, summed left to right.
    pub fn sum(interior: f64, boundary: &[f64], initial: f64) -> f64 {
        let mut s = interior;
        for &b in boundary {
            s += b;
        }
        s + initial
    }
}

/// Gate decision with the max-norm of each first derivative over the interior mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateOutcome {
    pub pass: bool,
    /// `max |∂T/∂v|` for x, y, t; NaN when the derivative faulted or failed.
    pub norms: [f64; 3],
}

thread_local! {
    static EVALUATOR: RefCell<Evaluator> = RefCell::new(Evaluator::new());
}

fn with_eval<R>(f: impl FnOnce(&mut Evaluator) -> R) -> R {
    EVALUATOR.with(|e| f(&mut e.borrow_mut()))
}

fn values(ev: &mut Evaluator, e: &Expr, data: &Dataset, consts: &[f64]) -> Result<Vec<f64>, EvalError> {
    ev.eval_values(e.tokens(), e.notation(), data, consts)
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn mean_sq(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut s = 0.0;
    for v in it {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        s += v * v;
    }
    finite_or_inf(s / n as f64)
}

fn grid(ev: &mut Evaluator, e: &Result<Expr, DiffError>, data: &Dataset, consts: &[f64]) -> Option<Vec<f64>> {
    let e = e.as_ref().ok()?;
    let v = values(ev, e, data, consts).ok()?;
    if v.iter().all(|x| x.is_finite()) {
        Some(v)
    } else {
        ev.recycle(v);
        None
    }
}

pub fn nontriviality_gate(p: &Prepared, data: &CaseData, consts: &[f64], tau: f64) -> GateOutcome {
    with_eval(|ev| {
        let mut norms = [f64::NAN; 3];
        let mut pass = true;
        let t = Ok(p.t.clone());
        for (k, d) in [&p.gate_x, &p.gate_y, &t].into_iter().enumerate() {
            match grid(ev, d, &data.interior, consts) {
                Some(g) => {
                    norms[k] = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    pass &= norms[k] >= tau;
                    ev.recycle(g);
                }
                None => pass = false,
            }
        }
        GateOutcome { pass, norms }
    })
}

pub fn interior_mse(p: &Prepared, data: &CaseData, consts: &[f64]) -> f64 {
    with_eval(|ev| {
        let dom = &data.interior;
        let t = Ok(p.t.clone());
        let mut grids = Vec::with_capacity(5);
        for d in [&t, &p.x, &p.y, &p.xx, &p.yy] {
            match grid(ev, d, dom, consts) {
                Some(g) => grids.push(g),
                None => {
                    grids.into_iter().for_each(|g| ev.recycle(g));
                    return f64::INFINITY;
                }
            }
        }
        let k = data.case.kappa;
        let (ux, uy) = (&data.ux, &data.uy);
        let [gt, gx, gy, gxx, gyy] = <[Vec<f64>; 5]>::try_from(grids).unwrap();
        let r = (0..dom.len()).map(|i| gt[i] + ux[i] * gx[i] + uy[i] * gy[i] - k * (gxx[i] + gyy[i]));
        let m = mean_sq(r, dom.len());
        for g in [gt, gx, gy, gxx, gyy] {
            ev.recycle(g);
        }
        m
    })
}

pub fn boundary_mse(p: &Prepared, data: &CaseData, consts: &[f64]) -> Vec<f64> {
    with_eval(|ev| {
        let value = Ok(p.expr.clone());
        let pick = |v: Var| match v {
            Var::X => &p.x,
            Var::Y => &p.y,
            Var::T => unreachable!("no boundary condition along t"),
        };
        data.case
            .boundaries
            .iter()
            .zip(&data.planes)
            .map(|(bc, planes)| {
                let e = match *bc {
                    BoundaryKind::DerivativeZero(v, _) | BoundaryKind::PeriodicDerivative(v) => pick(v),
                    BoundaryKind::PeriodicValue(_) => &value,
                };
                match planes {
                    Planes::Single(d) => match grid(ev, e, d, consts) {
                        Some(g) => {
                            let m = mean_sq(g.iter().copied(), g.len());
                            ev.recycle(g);
                            m
                        }
                        None => f64::INFINITY,
                    },
                    Planes::Pair(lo, hi) => {
                        let (Some(a), Some(b)) = (grid(ev, e, lo, consts), grid(ev, e, hi, consts)) else {
                            return f64::INFINITY;
                        };
                        let m = mean_sq(a.iter().zip(&b).map(|(u, v)| u - v), a.len());
                        ev.recycle(a);
                        ev.recycle(b);
                        m
                    }
                }
            })
            .collect()
    })
}

pub fn initial_mse(p: &Prepared, data: &CaseData, consts: &[f64]) -> f64 {
    with_eval(|ev| {
        let d = &data.initial;
        let target = d.ic(crate::expr::IcOrder::FIELD).expect("I grid");
        match grid(ev, &Ok(p.expr.clone()), d, consts) {
            Some(g) => {
                let m = mean_sq(g.iter().zip(target).map(|(u, v)| u - v), g.len());
                ev.recycle(g);
                m
            }
            None => f64::INFINITY,
        }
    })
}

/// All three components regardless of the gate.
pub fn components(p: &Prepared, data: &CaseData, consts: &[f64]) -> MseBreakdown {
    let interior = interior_mse(p, data, consts);
    let boundary = boundary_mse(p, data, consts);
    let initial = initial_mse(p, data, consts);
    let total = MseBreakdown::sum(interior, &boundary, initial);
    let fault = !total.is_finite();
    MseBreakdown {
        interior,
        boundary,
        initial,
        total: if fault { f64::INFINITY } else { total },
        gate_rejected: false,
        fault,
    }
}

/// Gate first, then the composite score.
pub fn objective_prepared(
    p: &Prepared,
    data: &CaseData,
    consts: &[f64],
    config: &ObjectiveConfig,
) -> MseBreakdown {
    let nb = data.case.boundaries.len();
    if !nontriviality_gate(p, data, consts, config.threshold).pass {
        return MseBreakdown::rejected(nb);
    }
    let interior = interior_mse(p, data, consts);
    if !interior.is_finite() {
        return MseBreakdown {
            interior,
            boundary: vec![f64::NAN; nb],
            initial: f64::NAN,
            total: f64::INFINITY,
            gate_rejected: false,
            fault: true,
        };
    }
    let boundary = boundary_mse(p, data, consts);
    let initial = initial_mse(p, data, consts);
    let total = MseBreakdown::sum(interior, &boundary, initial);
    let fault = !total.is_finite();
    MseBreakdown {
        interior,
        boundary,
        initial,
        total: if fault { f64::INFINITY } else { total },
        gate_rejected: false,
        fault,
    }
}

pub fn objective(e: &Expr, data: &CaseData, consts: &[f64], config: &ObjectiveConfig) -> MseBreakdown {
    objective_prepared(&Prepared::new(e, config.ic_derivatives), data, consts, config)
}

/// The residual `T_t + u_x T_x + u_y T_y − κ(T_xx + T_yy)` as one expression.
pub fn residual_expression(p: &Prepared, case: &PdeCase) -> Result<Expr, DiffError> {
    use crate::expr::{parse, ParseMode};
    let pre = |e: &Expr| e.to_notation(Notation::Prefix).into_tokens();
    let (ux, uy) = case.velocity_text();
    let ux = parse(ux, Notation::Prefix, &ParseMode::Search).expect("velocity text");
    let uy = parse(uy, Notation::Prefix, &ParseMode::Search).expect("velocity text");
    let tok = |s: &str| Token::from_spelling(s).expect("fixed spelling");
    let mut out = vec![tok("-"), tok("+"), tok("+")];
    out.extend(pre(&p.t));
    out.push(tok("*"));
    out.extend(pre(&ux));
    out.extend(pre(p.x.as_ref().map_err(Clone::clone)?));
    out.push(tok("*"));
    out.extend(pre(&uy));
    out.extend(pre(p.y.as_ref().map_err(Clone::clone)?));
    out.push(tok("*"));
    out.push(Token::lit(case.kappa));
    out.push(tok("+"));
    out.extend(pre(p.xx.as_ref().map_err(Clone::clone)?));
    out.extend(pre(p.yy.as_ref().map_err(Clone::clone)?));
    let e = Expr::new(Notation::Prefix, out).expect("residual is complete");
    Ok(e.to_notation(p.expr.notation()))
}
