//! Time-only envelope functions dominating the coefficient fields.

use std::fmt;
use std::sync::Arc;

use crate::error::Label;

type EnvEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One envelope function of `t`, with a printable description.
#[derive(Clone)]
pub struct EnvelopeFn {
    eval: EnvEval,
    text: String,
}

impl EnvelopeFn {
    pub fn new<F>(text: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), text: text.into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(crate::quadrature::fmt17(c), move |_| c)
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }
}

impl fmt::Debug for EnvelopeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EnvelopeFn({})", self.text)
    }
}

/// `P0 … G0` and the optional bracket `B1 ≤ P - S ≤ B2`.
///
/// `P0` and `S0` bound `P` and `S` from above; the others bound absolute
/// values (or, in the positive-cone setting, the values themselves).
#[derive(Clone, Debug)]
pub struct EnvelopeSet {
    pub p0: EnvelopeFn,
    pub q0: EnvelopeFn,
    pub r0: EnvelopeFn,
    pub s0: EnvelopeFn,
    pub f0: EnvelopeFn,
    pub g0: EnvelopeFn,
    pub b1: Option<EnvelopeFn>,
    pub b2: Option<EnvelopeFn>,
}

impl Default for EnvelopeSet {
    fn default() -> Self {
        Self::zero()
    }
}

impl EnvelopeSet {
    pub fn zero() -> Self {
        Self {
            p0: EnvelopeFn::zero(),
            q0: EnvelopeFn::zero(),
            r0: EnvelopeFn::zero(),
            s0: EnvelopeFn::zero(),
            f0: EnvelopeFn::zero(),
            g0: EnvelopeFn::zero(),
            b1: None,
            b2: None,
        }
    }

    pub fn with(mut self, label: Label, f: EnvelopeFn) -> Self {
        match label {
            Label::P => self.p0 = f,
            Label::Q => self.q0 = f,
            Label::R => self.r0 = f,
            Label::S => self.s0 = f,
            Label::F => self.f0 = f,
            Label::G => self.g0 = f,
        }
        self
    }

    pub fn with_const(self, label: Label, c: f64) -> Self {
        self.with(label, EnvelopeFn::constant(c))
    }

    pub fn with_bracket(mut self, b1: EnvelopeFn, b2: EnvelopeFn) -> Self {
        self.b1 = Some(b1);
        self.b2 = Some(b2);
        self
    }

    pub fn get(&self, label: Label) -> &EnvelopeFn {
        match label {
            Label::P => &self.p0,
            Label::Q => &self.q0,
            Label::R => &self.r0,
            Label::S => &self.s0,
            Label::F => &self.f0,
            Label::G => &self.g0,
        }
    }

    pub fn bracket(&self) -> Option<(&EnvelopeFn, &EnvelopeFn)> {
        Some((self.b1.as_ref()?, self.b2.as_ref()?))
    }

    /// First grid point where one of `Q0, R0, F0, G0` is negative or any
    /// envelope is non-finite.
    pub fn sign_violation(&self, grid: &[f64]) -> Option<(Label, f64, f64)> {
        for &t in grid {
            for label in Label::ALL {
                let x = self.get(label).eval(t);
                let must_be_nonneg = !matches!(label, Label::P | Label::S);
                if !x.is_finite() || (must_be_nonneg && x < 0.0) {
                    return Some((label, t, x));
                }
            }
        }
        None
    }
}
