//! Pseudo-linear systems
//!
//! ```text
//! φ' = P(t,φ,ψ)·φ + Q(t,φ,ψ)·ψ + F(t,φ,ψ)
//! ψ' = R(t,φ,ψ)·φ + S(t,φ,ψ)·ψ + G(t,φ,ψ),   t ≥ t0
//! ```
//!
//! Each coefficient is an opaque pointwise evaluator. The system is
//! homogeneous when both F and G are the zero field.
//!
//! Continuous differentiability of the fields in (u, v), which uniqueness of
//! solutions relies on, is a caller obligation and is not checked.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Label, Result};

pub type FieldFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// One coefficient field `(t, u, v) -> real`.
#[derive(Clone)]
pub struct CoefficientField {
    label: Label,
    eval: FieldFn,
    is_zero: bool,
}

impl CoefficientField {
    pub fn new<F>(label: Label, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { label, eval: Arc::new(f), is_zero: false }
    }

    /// The zero field. Returns exactly `0.0` for every input.
    pub fn zero(label: Label) -> Self {
        Self { label, eval: Arc::new(|_, _, _| 0.0), is_zero: true }
    }

    pub fn constant(label: Label, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(label);
        }
        Self::new(label, move |_, _, _| c)
    }

    pub fn from_arc(label: Label, eval: FieldFn) -> Self {
        Self { label, eval, is_zero: false }
    }

    #[inline]
    pub fn eval(&self, t: f64, u: f64, v: f64) -> f64 {
        (self.eval)(t, u, v)
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    fn relabel(mut self, label: Label) -> Self {
        self.label = label;
        self
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField").field("label", &self.label).field("is_zero", &self.is_zero).finish()
    }
}

/// The six coefficient values at one point, plus `b = p - s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub f: f64,
    pub g: f64,
    pub b: f64,
}

impl CoefficientSample {
    /// Right-hand side `(φ', ψ')` at the state `(u, v)`.
    #[inline]
    pub fn rhs(&self, u: f64, v: f64) -> (f64, f64) {
        (self.p * u + self.q * v + self.f, self.r * u + self.s * v + self.g)
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::P => self.p,
            Label::Q => self.q,
            Label::R => self.r,
            Label::S => self.s,
            Label::F => self.f,
            Label::G => self.g,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PseudoLinearSystem {
    pub p: CoefficientField,
    pub q: CoefficientField,
    pub r: CoefficientField,
    pub s: CoefficientField,
    pub f: CoefficientField,
    pub g: CoefficientField,
    pub t0: f64,
}

impl PseudoLinearSystem {
    /// All six fields zero.
    pub fn zero(t0: f64) -> Self {
        Self {
            p: CoefficientField::zero(Label::P),
            q: CoefficientField::zero(Label::Q),
            r: CoefficientField::zero(Label::R),
            s: CoefficientField::zero(Label::S),
            f: CoefficientField::zero(Label::F),
            g: CoefficientField::zero(Label::G),
            t0,
        }
    }

    /// Replaces one field; the field is relabelled to the slot it occupies.
    pub fn with(mut self, label: Label, field: CoefficientField) -> Self {
        let field = field.relabel(label);
        match label {
            Label::P => self.p = field,
            Label::Q => self.q = field,
            Label::R => self.r = field,
            Label::S => self.s = field,
            Label::F => self.f = field,
            Label::G => self.g = field,
        }
        self
    }

    pub fn with_fn<F>(self, label: Label, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.with(label, CoefficientField::new(label, f))
    }

    pub fn with_const(self, label: Label, c: f64) -> Self {
        self.with(label, CoefficientField::constant(label, c))
    }

    pub fn field(&self, label: Label) -> &CoefficientField {
        match label {
            Label::P => &self.p,
            Label::Q => &self.q,
            Label::R => &self.r,
            Label::S => &self.s,
            Label::F => &self.f,
            Label::G => &self.g,
        }
    }

    /// True when F and G are the zero field.
    pub fn homogeneous(&self) -> bool {
        self.f.is_zero() && self.g.is_zero()
    }

    /// Evaluates all six fields without any finiteness check.
    #[inline]
    pub fn eval_raw(&self, t: f64, u: f64, v: f64) -> CoefficientSample {
        let p = self.p.eval(t, u, v);
        let s = self.s.eval(t, u, v);
        CoefficientSample {
            p,
            q: self.q.eval(t, u, v),
            r: self.r.eval(t, u, v),
            s,
            f: self.f.eval(t, u, v),
            g: self.g.eval(t, u, v),
            b: p - s,
        }
    }

    /// Evaluates the coefficients at `(t, u, v)`, rejecting non-finite values.
    pub fn eval_coefficients(&self, t: f64, u: f64, v: f64) -> Result<CoefficientSample> {
        if !(t >= self.t0) {
            return Err(Error::InvalidInput(format!("t={t} precedes t0={}", self.t0)));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite state u={u}, v={v}")));
        }
        let sample = self.eval_raw(t, u, v);
        check_finite(&sample, t, u, v)?;
        Ok(sample)
    }
}

pub(crate) fn check_finite(sample: &CoefficientSample, t: f64, u: f64, v: f64) -> Result<()> {
    for label in Label::ALL {
        if !sample.get(label).is_finite() {
            return Err(Error::NonFiniteCoefficient { label, t, u, v });
        }
    }
    Ok(())
}

/// Factored second-order equation `φ'' = A·φ + Bc·φ' + Fc`.
///
/// The split of the right-hand side into the three parts is a modelling
/// choice of the caller. Removable singularities (e.g. `sin u / u`) must
/// already be patched in the supplied closures.
#[derive(Clone)]
pub struct SecondOrderForm {
    pub a: FieldFn,
    pub bc: FieldFn,
    pub fc: Option<FieldFn>,
}

impl SecondOrderForm {
    pub fn new<A, B>(a: A, bc: B) -> Self
    where
        A: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { a: Arc::new(a), bc: Arc::new(bc), fc: None }
    }

    pub fn with_forcing<F>(mut self, fc: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.fc = Some(Arc::new(fc));
        self
    }
}

/// `φ' = ψ`, `ψ' = A·φ + Bc·ψ + Fc`.
pub fn from_second_order(form: SecondOrderForm, t0: f64) -> PseudoLinearSystem {
    let mut sys = PseudoLinearSystem::zero(t0)
        .with_const(Label::Q, 1.0)
        .with(Label::R, CoefficientField::from_arc(Label::R, form.a))
        .with(Label::S, CoefficientField::from_arc(Label::S, form.bc));
    if let Some(fc) = form.fc {
        sys = sys.with(Label::G, CoefficientField::from_arc(Label::G, fc));
    }
    sys
}

/// `sin(u)/u`, continuous at 0.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_linear_sample() {
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::P, 1.0);
        let s = sys.eval_coefficients(0.0, 2.0, 3.0).unwrap();
        assert_eq!((s.p, s.q, s.r, s.s, s.f, s.g, s.b), (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn non_finite_field_is_reported_with_label() {
        let sys = PseudoLinearSystem::zero(0.0).with_fn(Label::R, |_, u, _| u.ln());
        let err = sys.eval_coefficients(1.0, -1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCoefficient { label: Label::R, .. }));
    }

    #[test]
    fn time_before_origin_rejected() {
        let sys = PseudoLinearSystem::zero(1.0);
        assert!(sys.eval_coefficients(0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn homogeneous_flag_tracks_zero_fields() {
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::Q, 1.0);
        assert!(sys.homogeneous());
        let forced = sys.clone().with_fn(Label::G, |t, _, _| t.cos());
        assert!(!forced.homogeneous());
        // constant 0 is still the zero field
        assert!(sys.with_const(Label::F, 0.0).homogeneous());
    }

    #[test]
    fn second_order_zero_rhs() {
        let sys = from_second_order(SecondOrderForm::new(|_, _, _| 0.0, |_, _, _| 0.0), 0.0);
        let s = sys.eval_coefficients(0.3, 1.0, -2.0).unwrap();
        assert_eq!((s.p, s.q, s.r, s.s, s.f, s.g), (0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
        assert!(sys.homogeneous());
    }

    #[test]
    fn second_order_duffing_fields() {
        let (k, alpha, beta, gamma, omega) = (0.3, -1.0, 1.0, 0.5, 1.2);
        let form = SecondOrderForm::new(move |_, u, _| -alpha - beta * u * u, move |_, _, _| -k)
            .with_forcing(move |t, _, _| gamma * (omega * t).cos());
        let sys = from_second_order(form, 0.0);
        let s = sys.eval_coefficients(2.0, 1.5, 0.7).unwrap();
        assert_eq!(s.q, 1.0);
        assert_eq!(s.r, -alpha - beta * 2.25);
        assert_eq!(s.s, -k);
        assert_eq!(s.g, gamma * (omega * 2.0_f64).cos());
        assert!(!sys.homogeneous());
    }

    #[test]
    fn pendulum_factor_continuous_at_zero() {
        let sys = from_second_order(SecondOrderForm::new(|_, u, _| -sinc(u), |_, _, _| 0.0), 0.0);
        assert_eq!(sys.eval_coefficients(0.0, 0.0, 0.0).unwrap().r, -1.0);
        // series oracle: sin u / u = Σ (-1)^k u^{2k} / (2k+1)!
        for &u in &[1e-6, 5e-5, 9.9e-5, 1.01e-4, 1e-3, 0.5] {
            let mut term = 1.0;
            let mut series = 0.0;
            for k in 0..12 {
                series += term;
                term *= -u * u / (((2 * k + 2) * (2 * k + 3)) as f64);
            }
            let r = sys.eval_coefficients(0.0, u, 0.0).unwrap().r;
            assert!((r + series).abs() < 1e-15, "u={u}");
        }
    }
}
