//! Global-solvability certificates.
//!
//! Two criteria are checked numerically:
//!
//! * **T31**: `P ≤ P0`, `|Q| ≤ Q0`, `|R| ≤ R0`, `S ≤ S0`, `|F| ≤ F0`,
//!   `|G| ≤ G0` for all `(u, v)`. Every solution then exists on `[t0, ∞)`
//!   and obeys the a-priori bound `m_j·exp{M_j (T - t0)}`.
//! * **T32** (homogeneous systems): on the box `(0, K+ε] × (0, L+ε]`,
//!   `P ≤ P0`, `S ≤ S0`, `0 ≤ Q ≤ Q0`, `0 ≤ R ≤ R0`, `B1 ≤ P - S ≤ B2`.
//!   The solution from `(c1, c2)` then satisfies `0 < φ ≤ K`, `0 < ψ ≤ L`.
//!
//! Hypotheses quantified over all states are probed by seeded sampling.
//! A negative margin falsifies; a clean run only means "unfalsified under
//! this plan". The conclusion is then verified on an integrated trajectory
//! up to the finite horizon `T`.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envelope::EnvelopeSet;
use crate::error::{Error, Label, Result};
use crate::integrator::{integrate, IntegrationConfig, Status, Trajectory};
use crate::quadrature::{cumulative_raw, exp_weighted_raw, fmt17, uniform_grid};
use crate::system::{CoefficientSample, PseudoLinearSystem};
use crate::volterra::{envelope_bounds, Component, VolterraBound};

/// Relative tolerance on the containment conclusions.
pub const CONTAINMENT_TOL: f64 = 1e-6;

/// Relative slack below which a negative margin is treated as rounding.
pub const MARGIN_TOL: f64 = 1e-12;

/// Intervals of the uniform part of the bound-curve grid.
pub const CURVE_GRID_INTERVALS: usize = 1024;

/// Default box width for the positive-cone criterion.
pub const DEFAULT_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    T31,
    T32,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::T31 => "T31",
            Theorem::T32 => "T32",
        }
    }
}

/// One sampled state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// Finite falsification plan for the state-quantified hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub t_nodes: usize,
    /// `(u_min, u_max, v_min, v_max)`; used by T31 only.
    pub uv_box: (f64, f64, f64, f64),
    pub uv_samples: usize,
    pub rng_seed: u64,
    /// Extra states checked on every run, e.g. earlier falsifiers.
    pub retained: Vec<Sample>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { t_nodes: 64, uv_box: (-10.0, 10.0, -10.0, 10.0), uv_samples: 256, rng_seed: 42, retained: Vec::new() }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c, d) = self.uv_box;
        if self.t_nodes == 0 || self.uv_samples == 0 {
            return Err(Error::InvalidInput("sampling counts must be >= 1".into()));
        }
        if !(a < b && c < d) || ![a, b, c, d].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput(format!("degenerate uv box {:?}", self.uv_box)));
        }
        Ok(())
    }

    /// Adds the falsifying samples of `report` to `retained`.
    pub fn retain_falsifiers(&mut self, report: &HypothesisReport) {
        for s in &report.falsifying {
            if !self.retained.contains(s) {
                self.retained.push(*s);
            }
        }
    }

    fn t_grid(&self, t0: f64, t_end: f64) -> Vec<f64> {
        if self.t_nodes == 1 {
            vec![t0]
        } else {
            uniform_grid(t0, t_end, self.t_nodes - 1)
        }
    }
}

/// Identifiers of the individual inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    PUpper,
    QAbs,
    RAbs,
    SUpper,
    FAbs,
    GAbs,
    QNonneg,
    QUpper,
    RNonneg,
    RUpper,
    BLower,
    BUpper,
}

impl Inequality {
    pub const T31: [Inequality; 6] = [
        Inequality::PUpper,
        Inequality::QAbs,
        Inequality::RAbs,
        Inequality::SUpper,
        Inequality::FAbs,
        Inequality::GAbs,
    ];
    pub const T32: [Inequality; 8] = [
        Inequality::PUpper,
        Inequality::SUpper,
        Inequality::QNonneg,
        Inequality::QUpper,
        Inequality::RNonneg,
        Inequality::RUpper,
        Inequality::BLower,
        Inequality::BUpper,
    ];

    pub fn text(self) -> &'static str {
        match self {
            Inequality::PUpper => "P <= P0",
            Inequality::QAbs => "|Q| <= Q0",
            Inequality::RAbs => "|R| <= R0",
            Inequality::SUpper => "S <= S0",
            Inequality::FAbs => "|F| <= F0",
            Inequality::GAbs => "|G| <= G0",
            Inequality::QNonneg => "0 <= Q",
            Inequality::QUpper => "Q <= Q0",
            Inequality::RNonneg => "0 <= R",
            Inequality::RUpper => "R <= R0",
            Inequality::BLower => "B1 <= B",
            Inequality::BUpper => "B <= B2",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Inequality::PUpper => "p_upper",
            Inequality::QAbs => "q_abs",
            Inequality::RAbs => "r_abs",
            Inequality::SUpper => "s_upper",
            Inequality::FAbs => "f_abs",
            Inequality::GAbs => "g_abs",
            Inequality::QNonneg => "q_nonneg",
            Inequality::QUpper => "q_upper",
            Inequality::RNonneg => "r_nonneg",
            Inequality::RUpper => "r_upper",
            Inequality::BLower => "b_lower",
            Inequality::BUpper => "b_upper",
        }
    }

    /// `(margin, scale)`; the inequality holds iff `margin ≥ 0`.
    fn margin(self, c: &CoefficientSample, env: &EnvValues) -> (f64, f64) {
        let (bound, value) = match self {
            Inequality::PUpper => (env.p0, c.p),
            Inequality::QAbs => (env.q0, c.q.abs()),
            Inequality::RAbs => (env.r0, c.r.abs()),
            Inequality::SUpper => (env.s0, c.s),
            Inequality::FAbs => (env.f0, c.f.abs()),
            Inequality::GAbs => (env.g0, c.g.abs()),
            Inequality::QNonneg => (c.q, 0.0),
            Inequality::QUpper => (env.q0, c.q),
            Inequality::RNonneg => (c.r, 0.0),
            Inequality::RUpper => (env.r0, c.r),
            Inequality::BLower => (c.b, env.b1),
            Inequality::BUpper => (env.b2, c.b),
        };
        (bound - value, bound.abs().max(value.abs()).max(1.0))
    }
}

struct EnvValues {
    p0: f64,
    q0: f64,
    r0: f64,
    s0: f64,
    f0: f64,
    g0: f64,
    b1: f64,
    b2: f64,
}

impl EnvValues {
    fn at(env: &EnvelopeSet, t: f64) -> Self {
        Self {
            p0: env.p0.eval(t),
            q0: env.q0.eval(t),
            r0: env.r0.eval(t),
            s0: env.s0.eval(t),
            f0: env.f0.eval(t),
            g0: env.g0.eval(t),
            b1: env.b1.as_ref().map_or(f64::NEG_INFINITY, |b| b.eval(t)),
            b2: env.b2.as_ref().map_or(f64::INFINITY, |b| b.eval(t)),
        }
    }
}

/// Minimum margin of one inequality over all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub inequality: Inequality,
    pub min_margin: f64,
    pub worst: Option<Sample>,
    pub violations: usize,
}

/// Falsification report for one hypothesis set.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<InequalityCheck>,
    /// Distinct falsifying samples, at most [`MAX_FALSIFIERS`].
    pub falsifying: Vec<Sample>,
    pub samples: usize,
    /// An envelope with the wrong sign or a non-finite value.
    pub envelope_violation: Option<(Label, f64, f64)>,
}

/// Cap on the falsifying samples kept in a report.
pub const MAX_FALSIFIERS: usize = 32;

impl HypothesisReport {
    fn new(list: &[Inequality]) -> Self {
        Self {
            checks: list
                .iter()
                .map(|&inequality| InequalityCheck {
                    inequality,
                    min_margin: f64::INFINITY,
                    worst: None,
                    violations: 0,
                })
                .collect(),
            falsifying: Vec::new(),
            samples: 0,
            envelope_violation: None,
        }
    }

    fn record(&mut self, s: Sample, c: &CoefficientSample, env: &EnvValues) {
        self.samples += 1;
        let mut bad = false;
        for check in &mut self.checks {
            let (m, scale) = check.inequality.margin(c, env);
            let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
            if m < check.min_margin {
                check.min_margin = m;
                check.worst = Some(s);
            }
            if m < -MARGIN_TOL * scale {
                check.violations += 1;
                bad = true;
            }
        }
        if bad && self.falsifying.len() < MAX_FALSIFIERS && !self.falsifying.contains(&s) {
            self.falsifying.push(s);
        }
    }

    pub fn falsified(&self) -> bool {
        self.envelope_violation.is_some() || self.checks.iter().any(|c| c.violations > 0)
    }

    /// The violated check with the most negative margin.
    pub fn worst_violation(&self) -> Option<&InequalityCheck> {
        self.checks.iter().filter(|c| c.violations > 0).min_by(|a, b| a.min_margin.total_cmp(&b.min_margin))
    }
}

/// `K` or `L` on a grid, stored through its exponent:
/// `value = c·exp(exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub c: f64,
    pub grid: Vec<f64>,
    pub exponent: Vec<f64>,
    pub values: Vec<f64>,
    pub quad_error: Vec<f64>,
}

impl BoundCurve {
    /// Linear interpolation of the exponent; `+∞` past an overflow.
    pub fn eval(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return self.values[0];
        }
        let j = g.partition_point(|&x| x < t);
        if j >= g.len() {
            return *self.values.last().unwrap();
        }
        if g[j] == t {
            return self.values[j];
        }
        let w = (t - g[j - 1]) / (g[j] - g[j - 1]);
        let e = self.exponent[j - 1] + w * (self.exponent[j] - self.exponent[j - 1]);
        self.c * e.exp()
    }

    /// Value at a grid node, if `t` is one.
    pub fn at_node(&self, t: f64) -> Option<f64> {
        self.grid.binary_search_by(|x| x.total_cmp(&t)).ok().map(|i| self.values[i])
    }

    /// First grid time where the curve is `+∞`.
    pub fn overflow_at(&self) -> Option<f64> {
        self.values.iter().position(|v| !v.is_finite()).map(|i| self.grid[i])
    }

    /// CSV with header `t,value,error_est`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value", "error_est"])?;
        for i in 0..self.grid.len() {
            wr.write_record([fmt17(self.grid[i]), fmt17(self.values[i]), fmt17(self.quad_error[i])])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `c·exp{E_A + ∫ W·w}` with `w = ratio·e^{sign·E_B} + ∫ e^{sign(E_B(τ)-E_B(ζ))} V(ζ) dζ`.
fn bound_curve(
    grid: &[f64],
    c: f64,
    ratio: f64,
    a: &[f64],
    w_outer: &[f64],
    v_inner: &[f64],
    b: &[f64],
    sign: f64,
) -> BoundCurve {
    let n = grid.len();
    let (e_a, err_a) = cumulative_raw(grid, a);
    let sb: Vec<f64> = b.iter().map(|x| sign * x).collect();
    let (e_b, _) = cumulative_raw(grid, &sb);
    let inner = exp_weighted_raw(grid, &e_b, v_inner);
    let mut valid = inner.overflow_at.unwrap_or(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..valid {
        let x = ratio * e_b[i].exp() + inner.values[i];
        if !x.is_finite() {
            valid = i;
            break;
        }
        w.push(x);
    }
    let prod: Vec<f64> = (0..valid).map(|i| w_outer[i] * w[i]).collect();
    let (e_w, err_w) = cumulative_raw(&grid[..valid], &prod);
    let mut exponent = vec![f64::INFINITY; n];
    let mut values = vec![f64::INFINITY; n];
    let mut quad_error = vec![f64::INFINITY; n];
    for i in 0..valid {
        exponent[i] = e_a[i] + e_w[i];
        values[i] = c * exponent[i].exp();
        let inner_err = inner.error[i] * w_outer[i].abs();
        quad_error[i] = values[i] * (err_a[i] + err_w[i] + inner_err);
    }
    BoundCurve { c, grid: grid.to_vec(), exponent, values, quad_error }
}

/// The bound curves `K(t, c1, c2)` and `L(t, c1, c2)` on `grid`.
pub fn compute_kl_curves(env: &EnvelopeSet, c1: f64, c2: f64, grid: &[f64]) -> Result<(BoundCurve, BoundCurve)> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidInput(format!("need c1, c2 > 0, got {c1}, {c2}")));
    }
    crate::quadrature::validate_nodes(grid)?;
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 nodes".into()));
    }
    let (b1, b2) = env.bracket().ok_or(Error::MissingBracket)?;
    let s = |f: &crate::envelope::EnvelopeFn| f.sample(grid);
    let (p0, q0, r0, s0) = (s(&env.p0), s(&env.q0), s(&env.r0), s(&env.s0));
    let (b1, b2) = (s(b1), s(b2));
    for xs in [&p0, &q0, &r0, &s0, &b1, &b2] {
        if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("envelope not finite at t={}", grid[i])));
        }
    }
    let k = bound_curve(grid, c1, c2 / c1, &p0, &q0, &r0, &b1, -1.0);
    let l = bound_curve(grid, c2, c1 / c2, &s0, &r0, &q0, &b2, 1.0);
    Ok((k, l))
}

/// Checking mode for [`check_envelope_domination`].
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    T31,
    T32 { k: &'a BoundCurve, l: &'a BoundCurve, eps: f64 },
}

fn log_uniform(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    let lo = hi * 1e-12;
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Samples the hypotheses of `mode` on `[t0, t_end]`.
pub fn check_envelope_domination(
    system: &PseudoLinearSystem,
    env: &EnvelopeSet,
    plan: &SamplingPlan,
    mode: Mode<'_>,
    t_end: f64,
) -> Result<HypothesisReport> {
    plan.validate()?;
    let t0 = system.t0;
    if !(t0 < t_end) {
        return Err(Error::InvalidInput(format!("need t0 < T, got [{t0}, {t_end}]")));
    }
    let list: &[Inequality] = match mode {
        Mode::T31 => &Inequality::T31,
        Mode::T32 { .. } => {
            if env.bracket().is_none() {
                return Err(Error::MissingBracket);
            }
            &Inequality::T32
        }
    };
    let mut report = HypothesisReport::new(list);
    let t_grid = plan.t_grid(t0, t_end);
    if let Mode::T31 = mode {
        report.envelope_violation = env.sign_violation(&t_grid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let probe = |report: &mut HypothesisReport, s: Sample| {
        let c = system.eval_raw(s.t, s.u, s.v);
        report.record(s, &c, &EnvValues::at(env, s.t));
    };
    for &t in &t_grid {
        match mode {
            Mode::T31 => {
                let (a, b, c, d) = plan.uv_box;
                for (u, v) in [(a, c), (a, d), (b, c), (b, d), (0.5 * (a + b), 0.5 * (c + d))] {
                    probe(&mut report, Sample { t, u, v });
                }
                for _ in 0..plan.uv_samples {
                    let u = rng.gen_range(a..=b);
                    let v = rng.gen_range(c..=d);
                    probe(&mut report, Sample { t, u, v });
                }
            }
            Mode::T32 { k, l, eps } => {
                let (ub, vb) = (k.eval(t) + eps, l.eval(t) + eps);
                if !(ub.is_finite() && vb.is_finite()) {
                    continue;
                }
                for (u, v) in [(ub, vb), (ub, vb * 1e-12), (ub * 1e-12, vb), (ub * 1e-12, vb * 1e-12)] {
                    probe(&mut report, Sample { t, u, v });
                }
                for _ in 0..plan.uv_samples {
                    let u = log_uniform(&mut rng, ub);
                    let v = log_uniform(&mut rng, vb);
                    probe(&mut report, Sample { t, u, v });
                }
            }
        }
    }
    for &s in &plan.retained {
        if s.t >= t0 && s.t <= t_end {
            probe(&mut report, s);
        }
    }
    Ok(report)
}

/// The same inequalities evaluated along the trajectory's own states.
pub fn check_along_trajectory(
    system: &PseudoLinearSystem,
    env: &EnvelopeSet,
    traj: &Trajectory,
    theorem: Theorem,
) -> HypothesisReport {
    let list: &[Inequality] = match theorem {
        Theorem::T31 => &Inequality::T31,
        Theorem::T32 => &Inequality::T32,
    };
    let mut report = HypothesisReport::new(list);
    for i in 0..traj.len() {
        let s = Sample { t: traj.nodes()[i], u: traj.phi()[i], v: traj.psi()[i] };
        let c = system.eval_raw(s.t, s.u, s.v);
        report.record(s, &c, &EnvValues::at(env, s.t));
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Certified,
    HypothesisFalsified { what: String, sample: Option<Sample>, margin: f64 },
    BoundViolated { t: f64, which: Component, ratio: f64 },
    BlewUp { t_blow: f64 },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Certified => "Certified",
            Verdict::HypothesisFalsified { .. } => "HypothesisFalsified",
            Verdict::BoundViolated { .. } => "BoundViolated",
            Verdict::BlewUp { .. } => "BlewUp",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }

    fn detail(&self) -> String {
        match self {
            Verdict::Certified => String::new(),
            Verdict::HypothesisFalsified { what, sample: Some(s), margin } => {
                format!(
                    "{what} fails at t={} u={} v={} (margin {})",
                    fmt17(s.t),
                    fmt17(s.u),
                    fmt17(s.v),
                    fmt17(*margin)
                )
            }
            Verdict::HypothesisFalsified { what, sample: None, margin } => format!("{what} (value {})", fmt17(*margin)),
            Verdict::BoundViolated { t, which, ratio } => {
                format!("{} exceeds its bound at t={} (ratio {})", component_name(*which), fmt17(*t), fmt17(*ratio))
            }
            Verdict::BlewUp { t_blow } => format!("solution escapes near t={}", fmt17(*t_blow)),
            Verdict::Inconclusive { reason } => reason.clone(),
        }
    }
}

fn component_name(c: Component) -> &'static str {
    match c {
        Component::Phi => "phi",
        Component::Psi => "psi",
    }
}

/// Conclusion checks on the integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundReport {
    T31 { bound: VolterraBound, max_abs_phi: f64, max_abs_psi: f64 },
    T32 { max_ratio_phi: f64, max_ratio_psi: f64, min_phi: f64, min_psi: f64 },
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub theorem: Theorem,
    pub t0: f64,
    pub horizon: f64,
    pub initial: (f64, f64),
    pub plan: SamplingPlan,
    pub hypotheses: HypothesisReport,
    /// Informational: the inequalities at the trajectory's own states.
    pub along_trajectory: HypothesisReport,
    pub bounds: BoundReport,
    pub trajectory: Trajectory,
    pub curves: Option<(BoundCurve, BoundCurve)>,
    pub verdict: Verdict,
}

fn falsified_verdict(h: &HypothesisReport) -> Option<Verdict> {
    if let Some((label, t, value)) = h.envelope_violation {
        return Some(Verdict::HypothesisFalsified {
            what: format!("envelope {label}0 has the wrong sign or is not finite at t={}", fmt17(t)),
            sample: None,
            margin: value,
        });
    }
    h.worst_violation().map(|c| Verdict::HypothesisFalsified {
        what: c.inequality.text().to_string(),
        sample: c.worst,
        margin: c.min_margin,
    })
}

fn trajectory_verdict(traj: &Trajectory) -> Option<Verdict> {
    match traj.status() {
        Status::Completed => None,
        Status::BlewUp { t_blow } => Some(Verdict::BlewUp { t_blow }),
        Status::ToleranceFailure { t_fail } => Some(Verdict::Inconclusive {
            reason: format!("integrator step collapsed without growth at t={}", fmt17(t_fail)),
        }),
    }
}

/// Envelope criterion for the general system.
pub fn certify_t31(
    system: &PseudoLinearSystem,
    env: &EnvelopeSet,
    phi0: f64,
    psi0: f64,
    t_end: f64,
    plan: &SamplingPlan,
    cfg: &IntegrationConfig,
) -> Result<Certificate> {
    let hypotheses = check_envelope_domination(system, env, plan, Mode::T31, t_end)?;
    let bound = envelope_bounds(env, phi0, psi0, system.t0, t_end)?;
    let trajectory = integrate(system, phi0, psi0, (system.t0, t_end), cfg)?;
    let along_trajectory = check_along_trajectory(system, env, &trajectory, Theorem::T31);
    let (max_abs_phi, max_abs_psi) = (trajectory.max_abs_phi(), trajectory.max_abs_psi());

    let contained = |which: Component, x: f64| bound.contains(which, x, CONTAINMENT_TOL);
    let violation = || {
        for i in 0..trajectory.len() {
            for (which, x) in [(Component::Phi, trajectory.phi()[i]), (Component::Psi, trajectory.psi()[i])] {
                if !contained(which, x) {
                    let lb = if which == Component::Phi { bound.log_bound1 } else { bound.log_bound2 };
                    let ratio = (x.abs().ln() - lb).exp();
                    return Some(Verdict::BoundViolated { t: trajectory.nodes()[i], which, ratio });
                }
            }
        }
        None
    };
    let verdict = falsified_verdict(&hypotheses)
        .or_else(|| trajectory_verdict(&trajectory))
        .or_else(violation)
        .unwrap_or(Verdict::Certified);
    Ok(Certificate {
        theorem: Theorem::T31,
        t0: system.t0,
        horizon: t_end,
        initial: (phi0, psi0),
        plan: plan.clone(),
        hypotheses,
        along_trajectory,
        bounds: BoundReport::T31 { bound, max_abs_phi, max_abs_psi },
        trajectory,
        curves: None,
        verdict,
    })
}

/// Uniform grid on `[t0, T]` merged with the trajectory's nodes.
fn curve_grid(t0: f64, t_end: f64, traj: &Trajectory) -> Vec<f64> {
    let mut g = uniform_grid(t0, t_end, CURVE_GRID_INTERVALS);
    g.extend_from_slice(traj.nodes());
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Bound-curve criterion for homogeneous systems from `(c1, c2)`.
#[allow(clippy::too_many_arguments)]
pub fn certify_t32(
    system: &PseudoLinearSystem,
    env: &EnvelopeSet,
    c1: f64,
    c2: f64,
    eps: f64,
    t_end: f64,
    plan: &SamplingPlan,
    cfg: &IntegrationConfig,
) -> Result<Certificate> {
    if !system.homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    if env.bracket().is_none() {
        return Err(Error::MissingBracket);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("need eps > 0, got {eps}")));
    }
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidInput(format!("need c1, c2 > 0, got {c1}, {c2}")));
    }
    let trajectory = integrate(system, c1, c2, (system.t0, t_end), cfg)?;
    let grid = curve_grid(system.t0, t_end, &trajectory);
    let (k, l) = compute_kl_curves(env, c1, c2, &grid)?;
    let hypotheses = check_envelope_domination(system, env, plan, Mode::T32 { k: &k, l: &l, eps }, t_end)?;
    let along_trajectory = check_along_trajectory(system, env, &trajectory, Theorem::T32);

    let mut max_ratio_phi = 0.0f64;
    let mut max_ratio_psi = 0.0f64;
    let mut min_phi = f64::INFINITY;
    let mut min_psi = f64::INFINITY;
    let mut first_violation = None;
    for i in 0..trajectory.len() {
        let t = trajectory.nodes()[i];
        let (phi, psi) = (trajectory.phi()[i], trajectory.psi()[i]);
        let kt = k.at_node(t).expect("trajectory nodes lie on the curve grid");
        let lt = l.at_node(t).expect("trajectory nodes lie on the curve grid");
        let (rp, rq) = (phi / kt, psi / lt);
        max_ratio_phi = max_ratio_phi.max(rp);
        max_ratio_psi = max_ratio_psi.max(rq);
        min_phi = min_phi.min(phi);
        min_psi = min_psi.min(psi);
        if first_violation.is_none() {
            if !(phi > 0.0 && rp <= 1.0 + CONTAINMENT_TOL) {
                first_violation = Some(Verdict::BoundViolated { t, which: Component::Phi, ratio: rp });
            } else if !(psi > 0.0 && rq <= 1.0 + CONTAINMENT_TOL) {
                first_violation = Some(Verdict::BoundViolated { t, which: Component::Psi, ratio: rq });
            }
        }
    }
    let overflow = k.overflow_at().into_iter().chain(l.overflow_at()).reduce(f64::min).map(|t| Verdict::Inconclusive {
        reason: format!("bound curve overflows at t={}; the sampling box is unbounded", fmt17(t)),
    });
    let verdict = falsified_verdict(&hypotheses)
        .or_else(|| trajectory_verdict(&trajectory))
        .or(overflow)
        .or(first_violation)
        .unwrap_or(Verdict::Certified);
    Ok(Certificate {
        theorem: Theorem::T32,
        t0: system.t0,
        horizon: t_end,
        initial: (c1, c2),
        plan: plan.clone(),
        hypotheses,
        along_trajectory,
        bounds: BoundReport::T32 { max_ratio_phi, max_ratio_psi, min_phi, min_psi },
        trajectory,
        curves: Some((k, l)),
        verdict,
    })
}

impl Certificate {
    /// Flat `key=value` lines in a fixed order.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("theorem", self.theorem.name().into());
        kv("verdict", self.verdict.name().into());
        kv("verdict.detail", self.verdict.detail());
        kv("t0", fmt17(self.t0));
        kv("horizon", fmt17(self.horizon));
        kv("phi0", fmt17(self.initial.0));
        kv("psi0", fmt17(self.initial.1));
        kv("plan.seed", self.plan.rng_seed.to_string());
        kv("plan.t_nodes", self.plan.t_nodes.to_string());
        kv("plan.uv_samples", self.plan.uv_samples.to_string());
        kv("plan.retained", self.plan.retained.len().to_string());
        for (prefix, rep) in [("hyp", &self.hypotheses), ("traj_hyp", &self.along_trajectory)] {
            kv(&format!("{prefix}.samples"), rep.samples.to_string());
            kv(&format!("{prefix}.falsified"), rep.falsified().to_string());
            for c in &rep.checks {
                let base = format!("{prefix}.{}", c.inequality.key());
                kv(&format!("{base}.min_margin"), fmt17(c.min_margin));
                kv(&format!("{base}.violations"), c.violations.to_string());
                if let Some(s) = c.worst {
                    kv(&format!("{base}.worst"), format!("{},{},{}", fmt17(s.t), fmt17(s.u), fmt17(s.v)));
                }
            }
        }
        match &self.bounds {
            BoundReport::T31 { bound, max_abs_phi, max_abs_psi } => {
                kv("bound.m1", fmt17(bound.m1));
                kv("bound.m2", fmt17(bound.m2));
                kv("bound.M1", fmt17(bound.M1));
                kv("bound.M2", fmt17(bound.M2));
                kv("bound.log_bound1", fmt17(bound.log_bound1));
                kv("bound.log_bound2", fmt17(bound.log_bound2));
                kv("bound.bound1", fmt17(bound.bound1));
                kv("bound.bound2", fmt17(bound.bound2));
                kv("bound.overflow", bound.overflow.to_string());
                kv("traj.max_abs_phi", fmt17(*max_abs_phi));
                kv("traj.max_abs_psi", fmt17(*max_abs_psi));
            }
            BoundReport::T32 { max_ratio_phi, max_ratio_psi, min_phi, min_psi } => {
                kv("bound.max_ratio_phi", fmt17(*max_ratio_phi));
                kv("bound.max_ratio_psi", fmt17(*max_ratio_psi));
                kv("traj.min_phi", fmt17(*min_phi));
                kv("traj.min_psi", fmt17(*min_psi));
            }
        }
        kv("traj.status", self.trajectory.status().name().into());
        kv("traj.nodes", self.trajectory.len().to_string());
        kv("traj.t_end", fmt17(self.trajectory.t_end()));
        out
    }

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "criterion   {}", self.theorem.name());
        let _ = writeln!(s, "verdict     {}", self.verdict.name());
        if !self.verdict.is_certified() {
            let _ = writeln!(s, "            {}", self.verdict.detail());
        }
        let _ = writeln!(s, "interval    [{}, {}]", self.t0, self.horizon);
        let _ = writeln!(s, "initial     ({}, {})", self.initial.0, self.initial.1);
        let _ = writeln!(
            s,
            "sampling    seed {}, {} t-nodes x {} states, {} retained",
            self.plan.rng_seed,
            self.plan.t_nodes,
            self.plan.uv_samples,
            self.plan.retained.len()
        );
        for (title, rep) in
            [("hypotheses (sampled)", &self.hypotheses), ("along trajectory (informational)", &self.along_trajectory)]
        {
            let _ = writeln!(s, "\n{title}: {} samples", rep.samples);
            if let Some((label, t, v)) = rep.envelope_violation {
                let _ = writeln!(s, "  envelope {label}0 = {v} at t = {t}");
            }
            for c in &rep.checks {
                let flag = if c.violations > 0 { "FAIL" } else { "ok" };
                let _ = write!(s, "  {:<10} min margin {:>24}  {flag}", c.inequality.text(), fmt17(c.min_margin));
                if c.violations > 0 {
                    if let Some(w) = c.worst {
                        let _ = write!(
                            s,
                            "  ({} violations, worst t={:.6} u={:.6e} v={:.6e})",
                            c.violations, w.t, w.u, w.v
                        );
                    }
                }
                s.push('\n');
            }
        }
        let _ = writeln!(s, "\nconclusion");
        match &self.bounds {
            BoundReport::T31 { bound, max_abs_phi, max_abs_psi } => {
                let _ = writeln!(
                    s,
                    "  m1 = {}, M1 = {}, ln bound1 = {}",
                    fmt17(bound.m1),
                    fmt17(bound.M1),
                    fmt17(bound.log_bound1)
                );
                let _ = writeln!(
                    s,
                    "  m2 = {}, M2 = {}, ln bound2 = {}",
                    fmt17(bound.m2),
                    fmt17(bound.M2),
                    fmt17(bound.log_bound2)
                );
                let _ = writeln!(s, "  max |phi| = {}, max |psi| = {}", fmt17(*max_abs_phi), fmt17(*max_abs_psi));
            }
            BoundReport::T32 { max_ratio_phi, max_ratio_psi, min_phi, min_psi } => {
                let _ = writeln!(s, "  max phi/K = {}, max psi/L = {}", fmt17(*max_ratio_phi), fmt17(*max_ratio_psi));
                let _ = writeln!(s, "  min phi = {}, min psi = {}", fmt17(*min_phi), fmt17(*min_psi));
            }
        }
        let _ = writeln!(
            s,
            "  trajectory {} with {} nodes, last t = {}",
            self.trajectory.status().name(),
            self.trajectory.len(),
            self.trajectory.t_end()
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_get, emden_fowler_l_closed_form, EmdenFowlerParams};
    use crate::envelope::EnvelopeFn;

    fn vdp_env(s0: f64) -> EnvelopeSet {
        EnvelopeSet::zero().with_const(Label::Q, 1.0).with_const(Label::R, 1.2).with_const(Label::S, s0)
    }

    #[test]
    fn vdp_envelopes_unfalsified() {
        let sys = corpus_get("vdp-parametric", &[]).unwrap().system();
        let rep = check_envelope_domination(&sys, &vdp_env(0.1), &SamplingPlan::default(), Mode::T31, 50.0).unwrap();
        assert!(!rep.falsified());
        assert!(rep.checks.iter().all(|c| c.min_margin >= 0.0));
        assert_eq!(rep.samples, 64 * 261);
    }

    #[test]
    fn vdp_tight_s_envelope_falsified() {
        let sys = corpus_get("vdp-parametric", &[]).unwrap().system();
        let rep = check_envelope_domination(&sys, &vdp_env(0.01), &SamplingPlan::default(), Mode::T31, 50.0).unwrap();
        let worst = rep.worst_violation().unwrap();
        assert_eq!(worst.inequality, Inequality::SUpper);
        assert!(worst.min_margin < 0.0 && worst.worst.unwrap().u.abs() < 0.95);
    }

    #[test]
    fn equality_case_margin_zero() {
        let p = EmdenFowlerParams::new(0.0, -3.0, 2.0, 1.0).unwrap();
        let grid = uniform_grid(1.0, 2.0, 16);
        let (k, l) = compute_kl_curves(&p.envelopes(), 0.5, 0.9, &grid).unwrap();
        let rep = check_envelope_domination(
            &p.system(),
            &p.envelopes(),
            &SamplingPlan { t_nodes: 8, uv_samples: 16, ..Default::default() },
            Mode::T32 { k: &k, l: &l, eps: 0.1 },
            2.0,
        )
        .unwrap();
        let q = rep.checks.iter().find(|c| c.inequality == Inequality::QUpper).unwrap();
        assert_eq!(q.min_margin, 0.0);
    }

    #[test]
    fn zero_envelope_curves_constant() {
        let env = EnvelopeSet::zero().with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let (k, l) = compute_kl_curves(&env, 0.3, 0.7, &uniform_grid(0.0, 5.0, 10)).unwrap();
        assert!(k.values.iter().all(|&x| x == 0.3));
        assert!(l.values.iter().all(|&x| x == 0.7));
    }

    #[test]
    fn single_exponential_curve() {
        let env = EnvelopeSet::zero().with_const(Label::P, 1.0).with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let (k, _) = compute_kl_curves(&env, 0.5, 1.0, &uniform_grid(1.0, 3.0, 64)).unwrap();
        for (t, v) in k.grid.iter().zip(&k.values) {
            assert!((v - 0.5 * (t - 1.0).exp()).abs() < 1e-12 * v);
        }
    }

    #[test]
    fn curves_start_at_initial_values() {
        let p = EmdenFowlerParams::new(0.3, -2.5, 2.0, 1.5).unwrap();
        let (k, l) = compute_kl_curves(&p.envelopes(), 0.4, 0.6, &uniform_grid(1.5, 4.0, 50)).unwrap();
        assert_eq!((k.values[0], l.values[0]), (0.4, 0.6));
    }

    #[test]
    fn missing_bracket() {
        let env = EnvelopeSet::zero();
        assert_eq!(compute_kl_curves(&env, 1.0, 1.0, &[0.0, 1.0]).unwrap_err(), Error::MissingBracket);
    }

    #[test]
    fn emden_fowler_l_matches_closed_form() {
        let p = EmdenFowlerParams::new(0.0, -3.0, 2.0, 1.0).unwrap();
        let grid = uniform_grid(1.0, 10.0, 4096);
        let (_, l) = compute_kl_curves(&p.envelopes(), 0.5, 0.9, &grid).unwrap();
        for (t, v) in grid.iter().zip(&l.values) {
            let exact = emden_fowler_l_closed_form(*t, 0.5, 0.9, &p).unwrap();
            assert!((v - exact).abs() <= 1e-8 * exact, "t={t}");
        }
    }

    #[test]
    fn overflow_curve_is_sentinel() {
        let env = EnvelopeSet::zero().with_const(Label::P, 100.0).with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let (k, _) = compute_kl_curves(&env, 1.0, 1.0, &uniform_grid(0.0, 20.0, 100)).unwrap();
        let t = k.overflow_at().unwrap();
        assert!(t > 7.0 && t <= 7.2 + 1e-12, "t={t}");
        assert!(k.values.last().unwrap().is_infinite());
    }

    #[test]
    fn curve_interpolation() {
        let env = EnvelopeSet::zero().with_const(Label::P, 1.0).with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let (k, _) = compute_kl_curves(&env, 1.0, 1.0, &uniform_grid(0.0, 1.0, 4)).unwrap();
        assert!((k.eval(0.6) - 0.6f64.exp()).abs() < 1e-12);
        assert_eq!(k.eval(-1.0), 1.0);
    }

    #[test]
    fn vdp_certified() {
        let sys = corpus_get("vdp-parametric", &[]).unwrap().system();
        let c =
            certify_t31(&sys, &vdp_env(0.1), 2.0, 0.0, 50.0, &SamplingPlan::default(), &Default::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Certified, "{}", c.to_text());
    }

    #[test]
    fn dishonest_envelope_falsified() {
        let sys = PseudoLinearSystem::zero(0.0).with_fn(Label::P, |_, u, _| u);
        let env = EnvelopeSet::zero().with_const(Label::P, 1.0);
        let c = certify_t31(&sys, &env, 1.0, 0.0, 2.0, &SamplingPlan::default(), &Default::default()).unwrap();
        match c.verdict {
            Verdict::HypothesisFalsified { sample: Some(s), .. } => assert!(s.u > 1.0),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn zero_system_certified_both_ways() {
        let sys = PseudoLinearSystem::zero(0.0);
        let env = EnvelopeSet::zero().with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let plan = SamplingPlan { t_nodes: 4, uv_samples: 8, ..Default::default() };
        let c = certify_t31(&sys, &env, 1.5, -2.0, 3.0, &plan, &Default::default()).unwrap();
        assert!(c.verdict.is_certified());
        assert!(c.trajectory.phi().iter().all(|&x| x == 1.5));
        let c = certify_t32(&sys, &env, 0.4, 0.8, 0.1, 3.0, &plan, &Default::default()).unwrap();
        assert!(c.verdict.is_certified(), "{}", c.to_text());
        let (k, l) = c.curves.unwrap();
        assert!(k.values.iter().all(|&x| x == 0.4) && l.values.iter().all(|&x| x == 0.8));
    }

    #[test]
    fn t32_rejects_inhomogeneous() {
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::F, 1.0);
        let env = EnvelopeSet::zero().with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero());
        let err = certify_t32(&sys, &env, 1.0, 1.0, 0.1, 1.0, &Default::default(), &Default::default()).unwrap_err();
        assert_eq!(err, Error::NotHomogeneous);
    }

    #[test]
    fn retained_falsifier_survives_new_plan() {
        let sys = corpus_get("vdp-parametric", &[]).unwrap().system();
        let env = vdp_env(0.01);
        let mut plan = SamplingPlan { t_nodes: 3, uv_samples: 4, ..Default::default() };
        let rep = check_envelope_domination(&sys, &env, &plan, Mode::T31, 10.0).unwrap();
        assert!(rep.falsified());
        plan.retain_falsifiers(&rep);
        plan.rng_seed = 7;
        plan.uv_box = (5.0, 10.0, 5.0, 10.0); // S < 0 on this box
        let again = check_envelope_domination(&sys, &env, &plan, Mode::T31, 10.0).unwrap();
        assert!(again.falsified());
    }

    #[test]
    fn kv_is_deterministic() {
        let sys = corpus_get("vdp-parametric", &[]).unwrap().system();
        let plan = SamplingPlan { t_nodes: 4, uv_samples: 8, ..Default::default() };
        let a = certify_t31(&sys, &vdp_env(0.1), 1.0, 1.0, 5.0, &plan, &Default::default()).unwrap();
        let b = certify_t31(&sys, &vdp_env(0.1), 1.0, 1.0, 5.0, &plan, &Default::default()).unwrap();
        assert_eq!(a.to_kv(), b.to_kv());
        assert!(a.to_kv().starts_with("theorem=T31\nverdict=Certified\n"));
    }
}
