//! Riccati equations along a trajectory of a homogeneous system.
//!
//! With `B = P - S`, the ratio `y = ψ/φ` solves
//! `y' + Q y² + B y - R = 0` and `z = φ/ψ` solves `z' + R z² - B z - Q = 0`,
//! coefficients frozen along `(φ(t), ψ(t))`. The solution is recovered from
//! `y` by
//!
//! ```text
//! φ(t) = φ(t0)·exp{∫_{t0}^{t} [P(τ) + y(τ) Q(τ)] dτ},   ψ = y φ
//! ```
//!
//! (and symmetrically from `z`). The ratio inside the integral is taken at
//! the integration variable `τ`. Holding it at the upper limit `t` instead
//! does not reproduce `cos t` on the harmonic oscillator, see the
//! `frozen_ratio_reading_fails` test.
//!
//! Poles of `y` are zeros of `φ`; they are recorded as `escape` data, not
//! as errors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{dopri5, IntegrationConfig, Stage, Status, Trajectory};
use crate::quadrature::{cumulative_raw, derivative, exp_weighted_raw, fmt17, GridFunction};
use crate::system::{check_finite, CoefficientSample, PseudoLinearSystem};

/// Norm at which a Riccati trace is declared to have escaped.
pub const ESCAPE_NORM: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiKind {
    /// `y = ψ/φ`
    Y,
    /// `z = φ/ψ`
    Z,
}

impl RiccatiKind {
    fn rhs(self, c: &CoefficientSample, x: f64) -> f64 {
        match self {
            RiccatiKind::Y => -c.q * x * x - c.b * x + c.r,
            RiccatiKind::Z => -c.r * x * x + c.b * x + c.q,
        }
    }

    /// Coefficient of the linear form: `H = Q y + B` or `L = R z - B`.
    fn linear_coefficient(self, c: &CoefficientSample, x: f64) -> f64 {
        match self {
            RiccatiKind::Y => c.q * x + c.b,
            RiccatiKind::Z => c.r * x - c.b,
        }
    }

    /// Source term of the linear form: `R` for `y`, `Q` for `z`.
    fn source(self, c: &CoefficientSample) -> f64 {
        match self {
            RiccatiKind::Y => c.r,
            RiccatiKind::Z => c.q,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiTrace {
    pub kind: RiccatiKind,
    pub init: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `Q y + B` for kind Y, `R z - B` for kind Z.
    pub h_values: Vec<f64>,
    /// Estimated pole time when the trace escaped before the trajectory end.
    pub escape: Option<f64>,
    pub status: Status,
}

impl RiccatiTrace {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn as_grid_function(&self) -> Result<GridFunction> {
        GridFunction::new(self.nodes.clone(), self.values.clone())
    }

    /// CSV with header `t,value,h_value`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value", "h_value"])?;
        for i in 0..self.len() {
            wr.write_record([fmt17(self.nodes[i]), fmt17(self.values[i]), fmt17(self.h_values[i])])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn coefficients_along(traj: &Trajectory, system: &PseudoLinearSystem, t: f64) -> Result<CoefficientSample> {
    let (u, v) = traj.eval_clamped(t);
    let c = system.eval_raw(t, u, v);
    check_finite(&c, t, u, v)?;
    Ok(c)
}

/// Integrates the Riccati equation of `kind` along `traj` from `init`,
/// reporting values on the trajectory's shared grid.
pub fn solve_riccati(
    traj: &Trajectory,
    system: &PseudoLinearSystem,
    kind: RiccatiKind,
    init: f64,
    cfg: &IntegrationConfig,
) -> Result<RiccatiTrace> {
    if !init.is_finite() {
        return Err(Error::InvalidInput("riccati initial value must be finite".into()));
    }
    let grid = traj.shared_grid();
    if grid.len() < 2 {
        return Err(Error::InvalidInput("trajectory has a single node".into()));
    }
    let rcfg = IntegrationConfig { blowup_norm: ESCAPE_NORM, ..*cfg };
    let rhs = |t: f64, x: &[f64; 1]| -> Result<Stage<1>> {
        let c = coefficients_along(traj, system, t)?;
        Ok(Stage::Ok([kind.rhs(&c, x[0])]))
    };
    let t0 = grid[0];
    let t_end = *grid.last().unwrap();
    let raw = dopri5(rhs, t0, [init], t_end, &rcfg, &grid[1..])?;

    let usable = match raw.status {
        Status::BlewUp { .. } => raw.nodes.len() - 1,
        _ => raw.nodes.len(),
    };
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let mut j = 0;
    for (t, s) in raw.nodes[..usable].iter().zip(&raw.states) {
        while j < grid.len() && grid[j] < *t {
            j += 1;
        }
        if j < grid.len() && grid[j] == *t {
            nodes.push(*t);
            values.push(s[0]);
        }
    }
    let mut h_values = Vec::with_capacity(nodes.len());
    for (&t, &x) in nodes.iter().zip(&values) {
        let c = coefficients_along(traj, system, t)?;
        h_values.push(kind.linear_coefficient(&c, x));
    }
    let escape = match raw.status {
        Status::BlewUp { t_blow } => Some(t_blow),
        _ => None,
    };
    Ok(RiccatiTrace { kind, init, nodes, values, h_values, escape, status: raw.status })
}

/// `(φ̂, ψ̂)` rebuilt from a Riccati trace.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub phi: GridFunction,
    pub psi: GridFunction,
}

impl Reconstruction {
    /// Max-norm deviation from the trajectory relative to the trajectory's
    /// max norm on the same nodes, for `φ` and `ψ` separately.
    pub fn relative_deviation(&self, traj: &Trajectory) -> Result<(f64, f64)> {
        let (phi, psi) = traj.sample(self.phi.nodes())?;
        Ok((rel_dev(self.phi.values(), &phi), rel_dev(self.psi.values(), &psi)))
    }
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Rebuilds the solution from a trace via the exponential representation.
pub fn reconstruct_solution(
    traj: &Trajectory,
    trace: &RiccatiTrace,
    system: &PseudoLinearSystem,
) -> Result<Reconstruction> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput("trace has fewer than 2 nodes".into()));
    }
    let (phi0, psi0) = traj.initial();
    let (num, den) = match trace.kind {
        RiccatiKind::Y => (psi0, phi0),
        RiccatiKind::Z => (phi0, psi0),
    };
    if den == 0.0 {
        return Err(Error::InvalidInput(format!("{:?} representation needs a non-zero denominator at t0", trace.kind)));
    }
    let expected = num / den;
    if (trace.init - expected).abs() > 1e-12 * expected.abs().max(1.0) {
        return Err(Error::InitMismatch { init: trace.init, expected });
    }
    let mut integrand = Vec::with_capacity(trace.len());
    for (&t, &x) in trace.nodes.iter().zip(&trace.values) {
        let c = coefficients_along(traj, system, t)?;
        integrand.push(match trace.kind {
            RiccatiKind::Y => c.p + x * c.q,
            RiccatiKind::Z => c.s + x * c.r,
        });
    }
    let (e, err) = cumulative_raw(&trace.nodes, &integrand);
    let base: Vec<f64> = e.iter().map(|ei| den * ei.exp()).collect();
    let other: Vec<f64> = base.iter().zip(&trace.values).map(|(b, x)| b * x).collect();
    let base_err: Vec<f64> = base.iter().zip(&err).map(|(b, e)| (b * e).abs()).collect();
    let other_err: Vec<f64> = base_err.iter().zip(&trace.values).map(|(e, x)| (e * x).abs()).collect();
    let base = GridFunction::with_error(trace.nodes.clone(), base, base_err)?;
    let other = GridFunction::with_error(trace.nodes.clone(), other, other_err)?;
    Ok(match trace.kind {
        RiccatiKind::Y => Reconstruction { phi: base, psi: other },
        RiccatiKind::Z => Reconstruction { phi: other, psi: base },
    })
}

#[derive(Debug, Clone)]
pub struct LinearFormReport {
    pub max_abs_dev: f64,
    /// `max_abs_dev / max(1, max |trace|)`.
    pub max_rel_dev: f64,
    pub rhs: Vec<f64>,
}

/// Re-evaluates the trace through its linear Cauchy form with the linear
/// coefficient frozen from the trace:
/// `y(t) = exp{-∫H}[y(t0) + ∫ exp{∫_{t0}^{τ} H} R dτ]`.
pub fn linear_form_check(
    trace: &RiccatiTrace,
    traj: &Trajectory,
    system: &PseudoLinearSystem,
) -> Result<LinearFormReport> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput("trace has fewer than 2 nodes".into()));
    }
    let mut source = Vec::with_capacity(trace.len());
    for &t in &trace.nodes {
        source.push(trace.kind.source(&coefficients_along(traj, system, t)?));
    }
    let neg_h: Vec<f64> = trace.h_values.iter().map(|h| -h).collect();
    let (e, _) = cumulative_raw(&trace.nodes, &neg_h);
    let ew = exp_weighted_raw(&trace.nodes, &e, &source);
    let rhs: Vec<f64> = e.iter().zip(&ew.values).map(|(ei, w)| trace.init * ei.exp() + w).collect();
    let max_abs_dev = rhs.iter().zip(&trace.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = trace.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(LinearFormReport { max_abs_dev, max_rel_dev: max_abs_dev / scale, rhs })
}

/// Last time `t1` such that `Q ≥ 0` and `R ≥ 0` at every shared-grid node
/// of `[t0, t1]`; `None` if they fail already at `t0`.
pub fn nonnegative_prefix(traj: &Trajectory, system: &PseudoLinearSystem) -> Result<Option<f64>> {
    let mut last = None;
    for t in traj.shared_grid() {
        let c = coefficients_along(traj, system, t)?;
        if c.q >= 0.0 && c.r >= 0.0 {
            last = Some(t);
        } else {
            break;
        }
    }
    Ok(last)
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One Riccati equation `y' + f y² + g y + h = 0` with time-only
/// coefficients.
#[derive(Clone)]
pub struct RiccatiCoefficients {
    pub f: TimeFn,
    pub g: TimeFn,
    pub h: TimeFn,
}

impl std::fmt::Debug for RiccatiCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RiccatiCoefficients { .. }")
    }
}

impl RiccatiCoefficients {
    pub fn new<F, G, H>(f: F, g: G, h: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { f: Arc::new(f), g: Arc::new(g), h: Arc::new(h) }
    }

    pub fn constant(f: f64, g: f64, h: f64) -> Self {
        Self::new(move |_| f, move |_| g, move |_| h)
    }

    /// The trajectory's own equation (`h_scale = 1`) or its truncation with
    /// the source term removed (`h_scale = 0`).
    pub fn along_trajectory(traj: &Trajectory, system: &PseudoLinearSystem, kind: RiccatiKind, h_scale: f64) -> Self {
        let pick = move |traj: Trajectory, system: PseudoLinearSystem, which: u8| -> TimeFn {
            Arc::new(move |t: f64| {
                let (u, v) = traj.eval_clamped(t);
                let c = system.eval_raw(t, u, v);
                match (kind, which) {
                    (RiccatiKind::Y, 0) => c.q,
                    (RiccatiKind::Y, 1) => c.b,
                    (RiccatiKind::Y, _) => -h_scale * c.r,
                    (RiccatiKind::Z, 0) => c.r,
                    (RiccatiKind::Z, 1) => -c.b,
                    (RiccatiKind::Z, _) => -h_scale * c.q,
                }
            })
        };
        Self {
            f: pick(traj.clone(), system.clone(), 0),
            g: pick(traj.clone(), system.clone(), 1),
            h: pick(traj.clone(), system.clone(), 2),
        }
    }

    /// `η' + f η² + g η + h` at the nodes of `eta`.
    pub fn inequality_residual(&self, eta: &GridFunction) -> Vec<f64> {
        let d = derivative(eta);
        eta.nodes()
            .iter()
            .zip(eta.values())
            .zip(d)
            .map(|((&t, &x), dx)| dx + (self.f)(t) * x * x + (self.g)(t) * x + (self.h)(t))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub f1_nonnegative: bool,
    pub min_f1: f64,
    pub eta1_min_residual: f64,
    pub eta2_min_residual: f64,
    pub eta1_satisfies: bool,
    pub eta2_satisfies: bool,
    /// `y2(t0) ≤ η_k(t0)` for both k.
    pub initial_order: bool,
    /// Minimum over the grid of the hypothesis expression, squared form.
    pub min_expression: f64,
    /// Same with `(f2 - f1)·y2²` in place of `(f2 - f1)²·y2²`.
    pub min_expression_alt: f64,
    pub holds: bool,
    pub holds_alt: bool,
}

/// Tolerance on inequality residuals computed through numerical derivatives.
const RESIDUAL_TOL: f64 = 1e-6;

/// Evaluates the comparison hypothesis
/// `γ - y2(t0) + ∫ exp{∫[f1(η1+η2) + g1]}[(f2-f1)² y2² + (g2-g1) y2 + h2 - h1] dτ ≥ 0`
/// on the common grid of `y2`, `eta1`, `eta2`.
pub fn theorem21_condition(
    pair1: &RiccatiCoefficients,
    pair2: &RiccatiCoefficients,
    y2: &GridFunction,
    eta1: &GridFunction,
    eta2: &GridFunction,
    gamma: f64,
) -> Result<ConditionReport> {
    if y2.nodes() != eta1.nodes() || y2.nodes() != eta2.nodes() {
        return Err(Error::InvalidInput("y2, eta1, eta2 must share one grid".into()));
    }
    if y2.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 nodes".into()));
    }
    let (lo, hi) = (y2.values()[0], eta1.values()[0]);
    if !(gamma >= lo && gamma <= hi) {
        return Err(Error::GammaOutOfRange { gamma, lo, hi });
    }
    let nodes = y2.nodes();
    let f1: Vec<f64> = nodes.iter().map(|&t| (pair1.f)(t)).collect();
    let min_f1 = f1.iter().cloned().fold(f64::INFINITY, f64::min);

    let r1 = pair1.inequality_residual(eta1);
    let r2 = pair2.inequality_residual(eta2);
    let eta1_min_residual = r1.iter().cloned().fold(f64::INFINITY, f64::min);
    let eta2_min_residual = r2.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut weight = Vec::with_capacity(nodes.len());
    let mut diff = Vec::with_capacity(nodes.len());
    let mut diff_alt = Vec::with_capacity(nodes.len());
    for (i, &t) in nodes.iter().enumerate() {
        let y = y2.values()[i];
        weight.push(f1[i] * (eta1.values()[i] + eta2.values()[i]) + (pair1.g)(t));
        let df = (pair2.f)(t) - f1[i];
        let rest = ((pair2.g)(t) - (pair1.g)(t)) * y + (pair2.h)(t) - (pair1.h)(t);
        diff.push(df * df * y * y + rest);
        diff_alt.push(df * y * y + rest);
    }
    let (w, _) = cumulative_raw(nodes, &weight);
    let expression = |d: &[f64]| -> f64 {
        let integrand: Vec<f64> = w.iter().zip(d).map(|(wi, di)| wi.exp() * di).collect();
        let (acc, _) = cumulative_raw(nodes, &integrand);
        acc.iter().map(|a| gamma - lo + a).fold(f64::INFINITY, f64::min)
    };
    let min_expression = expression(&diff);
    let min_expression_alt = expression(&diff_alt);
    Ok(ConditionReport {
        f1_nonnegative: min_f1 >= 0.0,
        min_f1,
        eta1_min_residual,
        eta2_min_residual,
        eta1_satisfies: eta1_min_residual >= -RESIDUAL_TOL,
        eta2_satisfies: eta2_min_residual >= -RESIDUAL_TOL,
        initial_order: lo <= eta1.values()[0] && lo <= eta2.values()[0],
        min_expression,
        min_expression_alt,
        holds: min_expression >= -1e-12,
        holds_alt: min_expression_alt >= -1e-12,
    })
}

/// The comparison used for nonnegativity of Riccati traces: the trace
/// equation against its source-free truncation, whose zero solution is
/// `y2`. `η2 ≡ 0` and `η1` solves the linear part `η' = -g η - h` from `γ`.
pub fn nonnegativity_comparison(
    traj: &Trajectory,
    system: &PseudoLinearSystem,
    kind: RiccatiKind,
    gamma: f64,
) -> Result<ConditionReport> {
    let pair1 = RiccatiCoefficients::along_trajectory(traj, system, kind, 1.0);
    let pair2 = RiccatiCoefficients::along_trajectory(traj, system, kind, 0.0);
    let grid = traj.shared_grid();
    let zero = GridFunction::from_fn(grid.clone(), |_| 0.0)?;
    let neg_g: Vec<f64> = grid.iter().map(|&t| -(pair1.g)(t)).collect();
    let neg_h: Vec<f64> = grid.iter().map(|&t| -(pair1.h)(t)).collect();
    let (e, _) = cumulative_raw(&grid, &neg_g);
    let ew = exp_weighted_raw(&grid, &e, &neg_h);
    if let Some(i) = ew.overflow_at {
        return Err(Error::OverflowGuard { t: grid[i - 1] });
    }
    let eta1: Vec<f64> = e.iter().zip(&ew.values).map(|(ei, w)| gamma * ei.exp() + w).collect();
    let eta1 = GridFunction::new(grid, eta1)?;
    theorem21_condition(&pair1, &pair2, &zero, &eta1, &zero, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Label;
    use crate::integrator::integrate;
    use std::f64::consts::FRAC_PI_2;

    fn harmonic() -> PseudoLinearSystem {
        PseudoLinearSystem::zero(0.0).with_const(Label::Q, 1.0).with_const(Label::R, -1.0)
    }

    #[test]
    fn harmonic_trace_escapes_at_quarter_period() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 3.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.0, &Default::default()).unwrap();
        let pole = tr.escape.expect("y = -tan t must escape");
        assert!((pole - FRAC_PI_2).abs() < 1e-3, "pole={pole}");
        for (t, y) in tr.nodes.iter().zip(&tr.values) {
            if *t < 1.5 {
                assert!((y + t.tan()).abs() < 1e-6 * (1.0 + t.tan().powi(2)), "t={t}");
            }
        }
        // the pole coincides with the zero of φ
        let (phi, _) = traj.dense_eval(pole).unwrap();
        assert!(phi.abs() < 1e-3);
    }

    #[test]
    fn linear_case_closed_form() {
        // Q = R = 0, B = 1  =>  y = y0·exp(-t)
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::P, 1.0);
        let traj = integrate(&sys, 1.0, 1.0, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 1.0, &Default::default()).unwrap();
        assert!(tr.escape.is_none());
        assert_eq!(*tr.nodes.last().unwrap(), 1.0);
        assert!((tr.values.last().unwrap() - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn reconstruction_matches_cosine_before_pole() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.0, &Default::default()).unwrap();
        let rec = reconstruct_solution(&traj, &tr, &sys).unwrap();
        for (t, v) in rec.phi.nodes().iter().zip(rec.phi.values()) {
            assert!((v - t.cos()).abs() < 1e-6);
        }
        let (dp, dq) = rec.relative_deviation(&traj).unwrap();
        assert!(dp < 1e-6 && dq < 1e-6, "{dp} {dq}");
    }

    #[test]
    fn frozen_ratio_reading_fails() {
        // Holding y at the upper limit t: φ̃(t) = φ0·exp{∫P + y(t)∫Q}.
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.0, &Default::default()).unwrap();
        let worst = tr.nodes.iter().zip(&tr.values).map(|(t, y)| ((y * t).exp() - t.cos()).abs()).fold(0.0, f64::max);
        assert!(worst > 0.1, "frozen reading unexpectedly accurate: {worst}");
    }

    #[test]
    fn decoupled_reconstruction_ignores_ratio() {
        // Q ≡ 0: φ̂ = φ0·exp∫P regardless of y.
        let sys = PseudoLinearSystem::zero(0.0)
            .with_fn(Label::P, |t, _, _| t.cos())
            .with_const(Label::R, 0.5)
            .with_const(Label::S, -0.2);
        let traj = integrate(&sys, 2.0, 1.0, (0.0, 2.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.5, &Default::default()).unwrap();
        let rec = reconstruct_solution(&traj, &tr, &sys).unwrap();
        for (t, v) in rec.phi.nodes().iter().zip(rec.phi.values()) {
            assert!((v - 2.0 * t.sin().exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_rejects_mismatched_init() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.5, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.4, &Default::default()).unwrap();
        assert!(matches!(reconstruct_solution(&traj, &tr, &sys), Err(Error::InitMismatch { .. })));
    }

    #[test]
    fn linear_form_without_source() {
        let sys =
            PseudoLinearSystem::zero(0.0).with_fn(Label::P, |t, _, _| 1.0 + 0.5 * t.sin()).with_const(Label::Q, 0.3);
        let traj = integrate(&sys, 1.0, 2.0, (0.0, 2.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 2.0, &Default::default()).unwrap();
        let rep = linear_form_check(&tr, &traj, &sys).unwrap();
        assert!(rep.max_abs_dev < 1e-8, "{}", rep.max_abs_dev);
    }

    #[test]
    fn linear_form_harmonic() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Y, 0.0, &Default::default()).unwrap();
        assert!(linear_form_check(&tr, &traj, &sys).unwrap().max_abs_dev < 1e-6);
    }

    #[test]
    fn z_trace_constant_without_q_and_b() {
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::R, 0.0);
        let traj = integrate(&sys, 3.0, 2.0, (0.0, 1.0), &Default::default()).unwrap();
        let tr = solve_riccati(&traj, &sys, RiccatiKind::Z, 1.5, &Default::default()).unwrap();
        assert!(tr.values.iter().all(|&z| z == 1.5));
        assert!(linear_form_check(&tr, &traj, &sys).unwrap().max_abs_dev == 0.0);
    }

    #[test]
    fn nonnegative_traces_under_sign_conditions() {
        // Q = 1, R = 0.5 + 0.4 sin t, both nonnegative.
        let sys = PseudoLinearSystem::zero(0.0)
            .with_const(Label::Q, 1.0)
            .with_fn(Label::R, |t, _, _| 0.5 + 0.4 * t.sin())
            .with_const(Label::S, -0.3);
        let traj = integrate(&sys, 1.0, 1.0, (0.0, 5.0), &Default::default()).unwrap();
        for gamma in [0.0, 0.5, 1.0] {
            for kind in [RiccatiKind::Y, RiccatiKind::Z] {
                let tr = solve_riccati(&traj, &sys, kind, gamma, &Default::default()).unwrap();
                assert!(tr.min_value() >= -1e-9);
            }
        }
    }

    #[test]
    fn condition_identical_pairs_margin_zero() {
        let pair = RiccatiCoefficients::new(|t| 1.0 + t, |t| t.sin(), |_| -0.5);
        let nodes = crate::quadrature::uniform_grid(0.0, 1.0, 100);
        let y2 = GridFunction::from_fn(nodes, |t| 0.3 * t).unwrap();
        let rep = theorem21_condition(&pair, &pair, &y2, &y2, &y2, 0.0).unwrap();
        assert_eq!(rep.min_expression, 0.0);
        assert!(rep.holds && rep.f1_nonnegative);
    }

    #[test]
    fn condition_negative_source_difference_fails() {
        let p1 = RiccatiCoefficients::constant(0.0, 0.0, 1.0);
        let p2 = RiccatiCoefficients::constant(0.0, 0.0, 0.0);
        let nodes = crate::quadrature::uniform_grid(0.0, 1.0, 50);
        let zero = GridFunction::from_fn(nodes, |_| 0.0).unwrap();
        let rep = theorem21_condition(&p1, &p2, &zero, &zero, &zero, 0.0).unwrap();
        assert!((rep.min_expression + 1.0).abs() < 1e-14);
        assert!(!rep.holds);
    }

    #[test]
    fn condition_gamma_range() {
        let p = RiccatiCoefficients::constant(0.0, 0.0, 0.0);
        let nodes = crate::quadrature::uniform_grid(0.0, 1.0, 10);
        let zero = GridFunction::from_fn(nodes, |_| 0.0).unwrap();
        assert!(matches!(theorem21_condition(&p, &p, &zero, &zero, &zero, 0.5), Err(Error::GammaOutOfRange { .. })));
    }

    #[test]
    fn nonnegativity_comparison_holds_with_nonnegative_q_r() {
        let sys = PseudoLinearSystem::zero(0.0)
            .with_const(Label::Q, 1.0)
            .with_fn(Label::R, |t, _, _| 0.5 + 0.4 * t.sin())
            .with_const(Label::P, 0.1);
        let traj = integrate(&sys, 1.0, 1.0, (0.0, 2.0), &Default::default()).unwrap();
        for kind in [RiccatiKind::Y, RiccatiKind::Z] {
            for gamma in [0.0, 1.0] {
                let rep = nonnegativity_comparison(&traj, &sys, kind, gamma).unwrap();
                assert!(rep.holds && rep.f1_nonnegative, "{rep:?}");
                assert!(rep.eta1_satisfies && rep.eta2_satisfies, "{rep:?}");
            }
        }
    }
}
