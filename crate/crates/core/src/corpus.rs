//! Built-in oscillators and the Emden–Fowler system as ready-made
//! pseudo-linear systems.
//!
//! Every second-order entry `φ'' = A φ + Bc φ' + Fc` becomes `φ' = ψ`,
//! `ψ' = A φ + Bc ψ + Fc`. Terms in `sin φ` are factored as
//! `(sin φ / φ)·φ` with the removable singularity patched.

use std::fmt;

use crate::envelope::{EnvelopeFn, EnvelopeSet};
use crate::error::{Error, Label, Result};
use crate::system::{from_second_order, sinc, PseudoLinearSystem, SecondOrderForm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

const fn p(name: &'static str, default: f64, doc: &'static str) -> ParamSpec {
    ParamSpec { name, default, doc }
}

/// Named parameter values in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(Vec<(&'static str, f64)>);

impl Params {
    pub fn get(&self, name: &str) -> f64 {
        self.0.iter().find(|(n, _)| *n == name).map(|&(_, v)| v).unwrap_or_else(|| panic!("no parameter `{name}`"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().copied()
    }
}

type Build = fn(&Params) -> PseudoLinearSystem;
type Envelopes = fn(&Params) -> Option<EnvelopeSet>;
type Validate = fn(&Params) -> Result<()>;

struct Spec {
    name: &'static str,
    equation: &'static str,
    params: &'static [ParamSpec],
    initial: (f64, f64),
    build: Build,
    envelopes: Envelopes,
    validate: Validate,
}

/// A registry entry with its parameters merged over the defaults.
#[derive(Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    /// The equation in text form.
    pub equation: &'static str,
    pub param_specs: &'static [ParamSpec],
    pub params: Params,
    /// Default `(φ0, ψ0)`.
    pub initial: (f64, f64),
    build: Build,
    envelopes: Envelopes,
}

impl fmt::Debug for CorpusEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorpusEntry").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl CorpusEntry {
    pub fn system(&self) -> PseudoLinearSystem {
        (self.build)(&self.params)
    }

    /// Default envelope set, when the coefficients admit one.
    pub fn default_envelopes(&self) -> Option<EnvelopeSet> {
        (self.envelopes)(&self.params)
    }

    pub fn t0(&self) -> f64 {
        self.params.get("t0")
    }
}

const T0: ParamSpec = p("t0", 0.0, "initial time");

fn ok(_: &Params) -> Result<()> {
    Ok(())
}

fn second_order(
    t0: f64,
    a: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    bc: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
) -> PseudoLinearSystem {
    from_second_order(SecondOrderForm::new(a, bc), t0)
}

fn constant_envelopes(q0: f64, r0: f64, s0: f64, g0: f64) -> EnvelopeSet {
    EnvelopeSet::zero()
        .with_const(Label::Q, q0)
        .with_const(Label::R, r0)
        .with_const(Label::S, s0)
        .with_const(Label::G, g0)
}

fn positive(ps: &Params, name: &'static str) -> Result<()> {
    let value = ps.get(name);
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam { name: name.into(), value, reason: "must be > 0".into() })
    }
}

// ---- van der Pol with parametric excitation ---------------------------

fn vdp_parametric(ps: &Params) -> PseudoLinearSystem {
    let (eps, beta) = (ps.get("epsilon"), ps.get("beta"));
    second_order(ps.get("t0"), move |t, _, _| -(1.0 + beta * t.cos()), move |_, u, _| -eps * (u * u - 1.0))
}

fn vdp_parametric_env(ps: &Params) -> Option<EnvelopeSet> {
    let eps = ps.get("epsilon");
    (eps >= 0.0).then(|| constant_envelopes(1.0, 1.0 + ps.get("beta").abs(), eps, 0.0))
}

// ---- forced van der Pol ----------------------------------------------

fn vdp_forced(ps: &Params) -> PseudoLinearSystem {
    let (eps, gamma, omega) = (ps.get("epsilon"), ps.get("Gamma"), ps.get("omega"));
    second_order(ps.get("t0"), |_, _, _| -1.0, move |_, u, _| -eps * (u * u - 1.0))
        .with_fn(Label::G, move |t, _, _| gamma * (omega * t).cos())
}

fn vdp_forced_env(ps: &Params) -> Option<EnvelopeSet> {
    let eps = ps.get("epsilon");
    (eps >= 0.0).then(|| constant_envelopes(1.0, 1.0, eps, ps.get("Gamma").abs()))
}

// ---- electronic contour -----------------------------------------------

fn electronic_contour(ps: &Params) -> PseudoLinearSystem {
    let (l1, l2) = (ps.get("lambda1"), ps.get("lambda2"));
    let (w, h, nu) = (ps.get("omega"), ps.get("h"), ps.get("nu"));
    second_order(
        ps.get("t0"),
        move |t, _, _| -w * w * (1.0 - h * (nu * t).cos()),
        move |_, u, _| -2.0 * (l1 + l2 * u * u),
    )
}

fn electronic_contour_env(ps: &Params) -> Option<EnvelopeSet> {
    let w2 = ps.get("omega").powi(2);
    (ps.get("lambda2") >= 0.0)
        .then(|| constant_envelopes(1.0, w2 * (1.0 + ps.get("h").abs()), -2.0 * ps.get("lambda1"), 0.0))
}

// ---- van der Pol–Mathieu ------------------------------------------------

fn vdp_mathieu(ps: &Params) -> PseudoLinearSystem {
    let (alpha, beta) = (ps.get("alpha"), ps.get("beta"));
    let (w0, h, gamma) = (ps.get("omega0"), ps.get("h"), ps.get("gamma"));
    second_order(
        ps.get("t0"),
        move |t, _, _| -w0 * w0 * (1.0 + h * (gamma * t).cos()),
        move |_, u, _| alpha - beta * u * u,
    )
}

fn vdp_mathieu_env(ps: &Params) -> Option<EnvelopeSet> {
    let w2 = ps.get("omega0").powi(2);
    (ps.get("beta") >= 0.0).then(|| constant_envelopes(1.0, w2 * (1.0 + ps.get("h").abs()), ps.get("alpha"), 0.0))
}

// ---- Lienard ----------------------------------------------------------

fn lienard(ps: &Params) -> PseudoLinearSystem {
    let (eps, w, kappa) = (ps.get("epsilon"), ps.get("omega"), ps.get("kappa"));
    lienard_system(move |_, v| eps * (v * v - 1.0), move |u| w * w + kappa * u * u, ps.get("t0"))
}

fn lienard_env(ps: &Params) -> Option<EnvelopeSet> {
    let eps = ps.get("epsilon");
    (eps >= 0.0 && ps.get("kappa") == 0.0).then(|| constant_envelopes(1.0, ps.get("omega").powi(2), eps, 0.0))
}

/// `φ'' + f(t, φ') φ' + g(φ) = 0` with user damping `f` and `g(u)/u`
/// supplied directly (removable singularity already patched).
pub fn lienard_system<F, G>(f: F, g_over_u: G, t0: f64) -> PseudoLinearSystem
where
    F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    second_order(t0, move |_, u, _| -g_over_u(u), move |t, _, v| -f(t, v))
}

// ---- pendulum with a light -------------------------------------------

fn pendulum_light(ps: &Params) -> PseudoLinearSystem {
    let (g, eps, a, w) = (ps.get("g"), ps.get("epsilon"), ps.get("a"), ps.get("omega"));
    second_order(ps.get("t0"), move |t, u, _| (g / 2.0 - eps / a * (w * t).cos()) * sinc(u), |_, _, _| 0.0)
}

fn pendulum_light_env(ps: &Params) -> Option<EnvelopeSet> {
    let r0 = (ps.get("g") / 2.0).abs() + (ps.get("epsilon") / ps.get("a")).abs();
    Some(constant_envelopes(1.0, r0, 0.0, 0.0))
}

fn pendulum_light_validate(ps: &Params) -> Result<()> {
    if ps.get("a") == 0.0 {
        return Err(Error::InvalidParam { name: "a".into(), value: 0.0, reason: "must be non-zero".into() });
    }
    Ok(())
}

// ---- pendulum of variable length --------------------------------------

/// `l(t) = l0 (1 + δ sin νt)` and `l'(t)`.
fn pendulum_length(ps: &Params) -> (impl Fn(f64) -> f64 + Clone, impl Fn(f64) -> f64 + Clone) {
    let (l0, delta, nu) = (ps.get("l0"), ps.get("delta"), ps.get("nu"));
    (move |t: f64| l0 * (1.0 + delta * (nu * t).sin()), move |t: f64| l0 * delta * nu * (nu * t).cos())
}

fn pendulum(ps: &Params) -> PseudoLinearSystem {
    let (m, g) = (ps.get("m"), ps.get("g"));
    let (l, dl) = pendulum_length(ps);
    let l2 = l.clone();
    second_order(ps.get("t0"), move |t, u, _| -g / (m * l(t)) * sinc(u), move |t, _, _| -2.0 * dl(t) / l2(t))
}

fn pendulum_env(ps: &Params) -> Option<EnvelopeSet> {
    let (m, g) = (ps.get("m"), ps.get("g"));
    let (l, dl) = pendulum_length(ps);
    let l2 = l.clone();
    Some(
        EnvelopeSet::zero()
            .with_const(Label::Q, 1.0)
            .with(Label::R, EnvelopeFn::new("|g|/(m l(t))", move |t| (g / (m * l(t))).abs()))
            .with(Label::S, EnvelopeFn::new("-2 l'(t)/l(t)", move |t| -2.0 * dl(t) / l2(t))),
    )
}

fn pendulum_validate(ps: &Params) -> Result<()> {
    positive(ps, "m")?;
    positive(ps, "l0")?;
    let delta = ps.get("delta");
    if delta.abs() >= 1.0 {
        return Err(Error::InvalidParam {
            name: "delta".into(),
            value: delta,
            reason: "|delta| < 1 keeps the length positive".into(),
        });
    }
    Ok(())
}

// ---- pendulum on a moving support -------------------------------------

fn moving_support(ps: &Params) -> PseudoLinearSystem {
    let (a, g) = (ps.get("a"), ps.get("g"));
    let (z, nu, h, mu) = (ps.get("Z"), ps.get("nu"), ps.get("H"), ps.get("mu"));
    second_order(ps.get("t0"), move |t, u, _| -(g - z * nu * nu * (nu * t).cos()) / a * sinc(u), |_, _, _| 0.0)
        .with_fn(Label::G, move |t, u, _| h * mu * mu * (mu * t).cos() * u.cos() / a)
}

fn moving_support_env(ps: &Params) -> Option<EnvelopeSet> {
    let (a, g) = (ps.get("a"), ps.get("g"));
    let (z, nu, h, mu) = (ps.get("Z"), ps.get("nu"), ps.get("H"), ps.get("mu"));
    Some(
        EnvelopeSet::zero()
            .with_const(Label::Q, 1.0)
            .with(
                Label::R,
                EnvelopeFn::new("|g + zeta''(t)|/|a|", move |t| ((g - z * nu * nu * (nu * t).cos()) / a).abs()),
            )
            .with(Label::G, EnvelopeFn::new("|eta''(t)|/|a|", move |t| (h * mu * mu * (mu * t).cos() / a).abs())),
    )
}

// ---- Duffing ----------------------------------------------------------

fn duffing(ps: &Params) -> PseudoLinearSystem {
    let (k, alpha, beta) = (ps.get("k"), ps.get("alpha"), ps.get("beta"));
    let (gamma, omega) = (ps.get("Gamma"), ps.get("omega"));
    let form = SecondOrderForm::new(move |_, u, _| -alpha - beta * u * u, move |_, _, _| -k)
        .with_forcing(move |t, _, _| gamma * (omega * t).cos());
    from_second_order(form, ps.get("t0"))
}

fn duffing_env(ps: &Params) -> Option<EnvelopeSet> {
    (ps.get("beta") == 0.0).then(|| constant_envelopes(1.0, ps.get("alpha").abs(), -ps.get("k"), ps.get("Gamma").abs()))
}

// ---- damped pendulum with forced pivot --------------------------------

fn damped_pendulum(ps: &Params) -> PseudoLinearSystem {
    let (eps, gamma, k) = (ps.get("epsilon"), ps.get("gamma"), ps.get("k"));
    second_order(ps.get("t0"), move |t, u, _| (eps * gamma * t.sin() - 1.0) * sinc(u), move |_, _, _| -eps * k)
}

fn damped_pendulum_env(ps: &Params) -> Option<EnvelopeSet> {
    let eps = ps.get("epsilon");
    Some(constant_envelopes(1.0, 1.0 + (eps * ps.get("gamma")).abs(), -eps * ps.get("k"), 0.0))
}

// ---- Rayleigh ---------------------------------------------------------

fn rayleigh(ps: &Params) -> PseudoLinearSystem {
    let eps = ps.get("epsilon");
    second_order(ps.get("t0"), |_, _, _| -1.0, move |_, _, v| -eps * (v * v / 3.0 - 1.0))
}

fn rayleigh_env(ps: &Params) -> Option<EnvelopeSet> {
    let eps = ps.get("epsilon");
    (eps >= 0.0).then(|| constant_envelopes(1.0, 1.0, eps, 0.0))
}

// ---- relativistic orbit -----------------------------------------------

fn relativistic(ps: &Params) -> PseudoLinearSystem {
    let (k, eps) = (ps.get("k"), ps.get("epsilon"));
    let form = SecondOrderForm::new(move |_, u, _| -1.0 + k * eps * u, |_, _, _| 0.0).with_forcing(move |_, _, _| k);
    from_second_order(form, ps.get("t0"))
}

fn relativistic_env(ps: &Params) -> Option<EnvelopeSet> {
    (ps.get("k") * ps.get("epsilon") == 0.0).then(|| constant_envelopes(1.0, 1.0, 0.0, ps.get("k").abs()))
}

// ---- coupled planar system -------------------------------------------

fn coupled(ps: &Params) -> PseudoLinearSystem {
    let a = ps.get("a");
    let radial = |_: f64, u: f64, v: f64| -(u * u + v * v - 1.0);
    PseudoLinearSystem::zero(ps.get("t0"))
        .with_fn(Label::P, radial)
        .with_fn(Label::S, radial)
        .with_fn(Label::Q, move |t, _, _| a * t.sin())
        .with_fn(Label::R, move |t, _, _| -a * t.sin())
}

fn coupled_env(ps: &Params) -> Option<EnvelopeSet> {
    let a = ps.get("a").abs();
    Some(
        EnvelopeSet::zero()
            .with_const(Label::P, 1.0)
            .with_const(Label::S, 1.0)
            .with_const(Label::Q, a)
            .with_const(Label::R, a),
    )
}

// ---- Emden–Fowler -----------------------------------------------------

/// `(t^ρ φ')' = t^σ φ^n`, `t ≥ t0 > 0`, `n > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmdenFowlerParams {
    pub rho: f64,
    pub sigma: f64,
    pub n: f64,
    pub t0: f64,
}

impl EmdenFowlerParams {
    pub fn new(rho: f64, sigma: f64, n: f64, t0: f64) -> Result<Self> {
        let p = Self { rho, sigma, n, t0 };
        p.validate()?;
        Ok(p)
    }

    fn from_params(ps: &Params) -> Self {
        Self { rho: ps.get("rho"), sigma: ps.get("sigma"), n: ps.get("n"), t0: ps.get("t0") }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidParam { name: "t0".into(), value: self.t0, reason: "must be > 0".into() });
        }
        if !(self.n > 1.0) {
            return Err(Error::InvalidParam { name: "n".into(), value: self.n, reason: "must be > 1".into() });
        }
        Ok(())
    }

    /// `u^{n-1}`: an integer power when `n` is an integer, `|u|^{n-1}`
    /// otherwise.
    pub fn power(&self, u: f64) -> f64 {
        let e = self.n - 1.0;
        if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
            u.powi(e as i32)
        } else {
            u.abs().powf(e)
        }
    }

    pub fn system(&self) -> PseudoLinearSystem {
        let p = *self;
        PseudoLinearSystem::zero(self.t0)
            .with_fn(Label::Q, move |t, _, _| t.powf(-p.rho))
            .with_fn(Label::R, move |t, u, _| t.powf(p.sigma) * p.power(u))
    }

    /// `P0 = S0 = 0`, `Q0 = t^{-ρ}`, `R0 = t^σ`, `B1 = B2 = 0`.
    pub fn envelopes(&self) -> EnvelopeSet {
        let (rho, sigma) = (self.rho, self.sigma);
        EnvelopeSet::zero()
            .with(Label::Q, EnvelopeFn::new(format!("t^{}", -rho), move |t| t.powf(-rho)))
            .with(Label::R, EnvelopeFn::new(format!("t^{sigma}"), move |t| t.powf(sigma)))
            .with_bracket(EnvelopeFn::zero(), EnvelopeFn::zero())
    }
}

fn emden_fowler(ps: &Params) -> PseudoLinearSystem {
    EmdenFowlerParams::from_params(ps).system()
}

fn emden_fowler_env(ps: &Params) -> Option<EnvelopeSet> {
    Some(EmdenFowlerParams::from_params(ps).envelopes())
}

fn emden_fowler_validate(ps: &Params) -> Result<()> {
    EmdenFowlerParams::from_params(ps).validate()
}

/// Closed form of the `L` bound curve for the Emden–Fowler envelopes.
///
/// Covers `ρ ≠ 1, σ ≠ -1, 2 + σ - ρ ≠ 0` and `ρ = 1, σ ≠ -1`.
pub fn emden_fowler_l_closed_form(t: f64, c1: f64, c2: f64, p: &EmdenFowlerParams) -> Result<f64> {
    p.validate()?;
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidInput(format!("need c1, c2 > 0, got {c1}, {c2}")));
    }
    if !(t >= p.t0) {
        return Err(Error::InvalidInput(format!("t={t} precedes t0={}", p.t0)));
    }
    let (rho, sigma, t0) = (p.rho, p.sigma, p.t0);
    if sigma == -1.0 {
        return Err(Error::UnsupportedParameterCase(format!("sigma = -1 (rho = {rho})")));
    }
    let a = sigma + 1.0;
    let pow_diff = |e: f64| t.powf(e) - t0.powf(e);
    let exponent = if rho == 1.0 {
        c1 / c2 * pow_diff(a) / a + emden_fowler_log_integral(t, t0, sigma)
    } else {
        let d = 2.0 + sigma - rho;
        if d == 0.0 {
            return Err(Error::UnsupportedParameterCase(format!("2 + sigma - rho = 0 (rho = {rho})")));
        }
        let k = t0.powf(1.0 - rho) / (1.0 - rho);
        (c1 / c2 - k) * pow_diff(a) / a + pow_diff(d) / ((1.0 - rho) * d)
    };
    Ok(c2 * exponent.exp())
}

/// `∫_{t0}^{t} τ^σ ln(τ/t0) dτ` for `σ ≠ -1`.
pub fn emden_fowler_log_integral(t: f64, t0: f64, sigma: f64) -> f64 {
    let a = sigma + 1.0;
    t.powf(a) * (t / t0).ln() / a - (t.powf(a) - t0.powf(a)) / (a * a)
}

/// One evaluated sub-inequality: holds iff `margin > 0` (strict) or
/// `margin ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub name: &'static str,
    pub margin: f64,
    pub strict: bool,
}

impl Margin {
    fn strict(name: &'static str, margin: f64) -> Self {
        Self { name, margin, strict: true }
    }

    fn weak(name: &'static str, margin: f64) -> Self {
        Self { name, margin, strict: false }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.margin > 0.0
        } else {
            self.margin >= 0.0
        }
    }
}

/// Which of the three Emden–Fowler parameter regimes hold.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdenFowlerConditions {
    pub cond1: bool,
    /// Upper bound on `c1` as printed.
    pub cond2: bool,
    /// Same with the upper bound on `c2` instead.
    pub cond2_c2: bool,
    pub cond3: bool,
    pub cond1_margins: Vec<Margin>,
    pub cond2_margins: Vec<Margin>,
    pub cond2_c2_margins: Vec<Margin>,
    pub cond3_margins: Vec<Margin>,
}

impl EmdenFowlerConditions {
    pub fn any(&self) -> bool {
        self.cond1 || self.cond2 || self.cond3
    }
}

pub fn emden_fowler_condition_check(p: &EmdenFowlerParams, c1: f64, c2: f64) -> EmdenFowlerConditions {
    let (rho, sigma, t0) = (p.rho, p.sigma, p.t0);
    let d = 2.0 + sigma - rho;
    let k = t0.powf(1.0 - rho) / (1.0 - rho);
    let common = vec![
        Margin::strict("rho < 1", 1.0 - rho),
        Margin::strict("sigma < -1", -1.0 - sigma),
        Margin::strict("2 + sigma - rho < 0", -d),
        Margin::strict("c1 > 0", c1),
    ];
    let mut m1 = common.clone();
    m1.push(Margin::strict("c2 > 0", c2));
    m1.push(Margin::strict("c2 < 1", 1.0 - c2));
    m1.push(Margin::weak("c1/c2 <= t0^(1-rho)/(1-rho)", k - c1 / c2));

    let cap = (t0.powf(sigma + 1.0) / (sigma + 1.0)).exp();
    let mut m2 = common.clone();
    m2.push(Margin::strict("c1 < exp(t0^(sigma+1)/(sigma+1))", cap - c1));
    m2.push(Margin::strict("c1/c2 > t0^(1-rho)/(1-rho)", c1 / c2 - k));
    let mut m2b = common.clone();
    m2b.push(Margin::strict("c2 > 0", c2));
    m2b.push(Margin::strict("c2 < exp(t0^(sigma+1)/(sigma+1))", cap - c2));
    m2b.push(Margin::strict("c1/c2 > t0^(1-rho)/(1-rho)", c1 / c2 - k));

    let a = sigma + 1.0;
    // ∫_{t0}^{∞} τ^σ ln(τ/t0) dτ = t0^a / a² for a < 0
    let tail = t0.powf(a) / (a * a);
    let cap3 = (c1 / c2 * t0.powf(a) / a - tail).exp();
    let m3 = vec![
        Margin::weak("rho = 1", -(rho - 1.0).abs()),
        Margin::strict("sigma < -1", -1.0 - sigma),
        Margin::strict("c1 > 0", c1),
        Margin::strict("c2 > 0", c2),
        Margin::strict("c2 < exp((c1/c2) t0^(sigma+1)/(sigma+1) - tail)", cap3 - c2),
    ];
    let all = |m: &[Margin]| m.iter().all(Margin::holds);
    EmdenFowlerConditions {
        cond1: all(&m1),
        cond2: all(&m2),
        cond2_c2: all(&m2b),
        cond3: all(&m3),
        cond1_margins: m1,
        cond2_margins: m2,
        cond2_c2_margins: m2b,
        cond3_margins: m3,
    }
}

// ---- registry ---------------------------------------------------------

static REGISTRY: &[Spec] = &[
    Spec {
        name: "vdp-parametric",
        equation: "phi'' + epsilon (phi^2 - 1) phi' + (1 + beta cos t) phi = 0",
        params: &[p("epsilon", 0.1, "damping"), p("beta", 0.2, "excitation depth"), T0],
        initial: (2.0, 0.0),
        build: vdp_parametric,
        envelopes: vdp_parametric_env,
        validate: ok,
    },
    Spec {
        name: "vdp-forced",
        equation: "phi'' + epsilon (phi^2 - 1) phi' + phi = Gamma cos(omega t)",
        params: &[
            p("epsilon", 0.1, "damping"),
            p("Gamma", 0.5, "forcing amplitude"),
            p("omega", 1.0, "forcing frequency"),
            T0,
        ],
        initial: (2.0, 0.0),
        build: vdp_forced,
        envelopes: vdp_forced_env,
        validate: ok,
    },
    Spec {
        name: "electronic-contour",
        equation: "phi'' + 2 (lambda1 + lambda2 phi^2) phi' + omega^2 (1 - h cos(nu t)) phi = 0",
        params: &[
            p("lambda1", 0.05, "linear damping"),
            p("lambda2", 0.1, "cubic damping"),
            p("omega", 1.0, "natural frequency"),
            p("h", 0.3, "modulation depth"),
            p("nu", 2.0, "modulation frequency"),
            T0,
        ],
        initial: (1.0, 0.0),
        build: electronic_contour,
        envelopes: electronic_contour_env,
        validate: ok,
    },
    Spec {
        name: "vdp-mathieu",
        equation: "phi'' - (alpha - beta phi^2) phi' + omega0^2 (1 + h cos(gamma t)) phi = 0",
        params: &[
            p("alpha", 0.1, "negative damping"),
            p("beta", 0.5, "cubic damping"),
            p("omega0", 1.0, "natural frequency"),
            p("h", 0.2, "modulation depth"),
            p("gamma", 2.0, "modulation frequency"),
            T0,
        ],
        initial: (1.0, 0.0),
        build: vdp_mathieu,
        envelopes: vdp_mathieu_env,
        validate: ok,
    },
    Spec {
        name: "lienard",
        equation: "phi'' + f(t, phi') phi' + g(phi) = 0, f = epsilon (v^2 - 1), g = omega^2 u + kappa u^3",
        params: &[
            p("epsilon", 0.1, "damping"),
            p("omega", 1.0, "linear restoring frequency"),
            p("kappa", 0.0, "cubic restoring"),
            T0,
        ],
        initial: (1.0, 0.0),
        build: lienard,
        envelopes: lienard_env,
        validate: ok,
    },
    Spec {
        name: "pendulum-light",
        equation: "phi'' + (-g/2 + (epsilon/a) cos(omega t)) sin phi = 0",
        params: &[
            p("g", 9.81, "gravity"),
            p("epsilon", 0.1, "support amplitude"),
            p("a", 1.0, "length"),
            p("omega", 2.0, "support frequency"),
            T0,
        ],
        initial: (0.5, 0.0),
        build: pendulum_light,
        envelopes: pendulum_light_env,
        validate: pendulum_light_validate,
    },
    Spec {
        name: "pendulum",
        equation: "(m l(t)^2 phi')' + g l(t) sin phi = 0, l = l0 (1 + delta sin(nu t))",
        params: &[
            p("m", 1.0, "mass"),
            p("l0", 1.0, "mean length"),
            p("delta", 0.1, "relative length modulation"),
            p("nu", 1.0, "modulation frequency"),
            p("g", 9.81, "gravity"),
            T0,
        ],
        initial: (0.5, 0.0),
        build: pendulum,
        envelopes: pendulum_env,
        validate: pendulum_validate,
    },
    Spec {
        name: "pendulum-moving-support",
        equation: "a phi'' + (g + zeta''(t)) sin phi + eta''(t) cos phi = 0, zeta = Z cos(nu t), eta = H cos(mu t)",
        params: &[
            p("a", 1.0, "suspension length"),
            p("g", 9.81, "gravity"),
            p("Z", 0.1, "vertical amplitude"),
            p("nu", 2.0, "vertical frequency"),
            p("H", 0.1, "horizontal amplitude"),
            p("mu", 1.5, "horizontal frequency"),
            T0,
        ],
        initial: (0.5, 0.0),
        build: moving_support,
        envelopes: moving_support_env,
        validate: pendulum_light_validate,
    },
    Spec {
        name: "duffing",
        equation: "phi'' + k phi' + alpha phi + beta phi^3 = Gamma cos(omega t)",
        params: &[
            p("k", 0.3, "damping"),
            p("alpha", -1.0, "linear stiffness"),
            p("beta", 1.0, "cubic stiffness"),
            p("Gamma", 0.5, "forcing amplitude"),
            p("omega", 1.2, "forcing frequency"),
            T0,
        ],
        initial: (1.0, 0.0),
        build: duffing,
        envelopes: duffing_env,
        validate: ok,
    },
    Spec {
        name: "damped-pendulum-forced",
        equation: "phi'' + sin phi = epsilon (gamma sin t sin phi - k phi')",
        params: &[p("epsilon", 0.1, "perturbation size"), p("gamma", 1.0, "pivot forcing"), p("k", 0.5, "damping"), T0],
        initial: (0.5, 0.0),
        build: damped_pendulum,
        envelopes: damped_pendulum_env,
        validate: ok,
    },
    Spec {
        name: "rayleigh",
        equation: "phi'' + epsilon ((phi')^3 / 3 - phi') + phi = 0",
        params: &[p("epsilon", 0.1, "damping"), T0],
        initial: (1.0, 0.0),
        build: rayleigh,
        envelopes: rayleigh_env,
        validate: ok,
    },
    Spec {
        name: "relativistic-orbit",
        equation: "phi'' + phi = k (1 + epsilon phi^2)",
        params: &[p("k", 1.0, "inverse semi-latus rectum"), p("epsilon", 0.01, "relativistic correction"), T0],
        initial: (1.2, 0.0),
        build: relativistic,
        envelopes: relativistic_env,
        validate: ok,
    },
    Spec {
        name: "coupled-1.15",
        equation: "phi' = -(phi^2 + psi^2 - 1) phi + a sin t psi, psi' = -a sin t phi - (phi^2 + psi^2 - 1) psi",
        params: &[p("a", 1.0, "rotation rate"), T0],
        initial: (0.5, 0.5),
        build: coupled,
        envelopes: coupled_env,
        validate: ok,
    },
    Spec {
        name: "emden-fowler",
        equation: "(t^rho phi')' - t^sigma phi^n = 0, t >= t0 > 0, n > 1",
        params: &[
            p("rho", 0.0, "weight exponent"),
            p("sigma", -3.0, "source exponent"),
            p("n", 2.0, "nonlinearity"),
            p("t0", 1.0, "initial time"),
        ],
        initial: (0.5, 0.9),
        build: emden_fowler,
        envelopes: emden_fowler_env,
        validate: emden_fowler_validate,
    },
];

/// Names of all registered entries, in registry order.
pub fn corpus_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.name).collect()
}

/// Looks up `name` and merges `overrides` over its defaults.
pub fn corpus_get(name: &str, overrides: &[(&str, f64)]) -> Result<CorpusEntry> {
    let spec = REGISTRY.iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownEntry(name.into()))?;
    let mut values: Vec<(&'static str, f64)> = spec.params.iter().map(|p| (p.name, p.default)).collect();
    for &(key, value) in overrides {
        let slot = values.iter_mut().find(|(n, _)| *n == key).ok_or_else(|| Error::InvalidParam {
            name: key.into(),
            value,
            reason: format!("not a parameter of {name}"),
        })?;
        if !value.is_finite() {
            return Err(Error::InvalidParam { name: key.into(), value, reason: "must be finite".into() });
        }
        slot.1 = value;
    }
    let params = Params(values);
    (spec.validate)(&params)?;
    Ok(CorpusEntry {
        name: spec.name,
        equation: spec.equation,
        param_specs: spec.params,
        params,
        initial: spec.initial,
        build: spec.build,
        envelopes: spec.envelopes,
    })
}
