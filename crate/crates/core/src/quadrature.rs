//! Cumulative quadrature on non-uniform grids.
//!
//! Every interval `[t_i, t_{i+1}]` is integrated exactly against the cubic
//! through four neighbouring nodes (fewer near short grids), which is fourth
//! order globally. The per-node error estimate accumulates the local
//! difference between that rule and the trapezoid rule.
//!
//! Exponentially weighted integrals
//! `y(t) = ∫_{t0}^{t} exp{E(t) - E(τ)} f(τ) dτ`, `E = ∫ w`, are evaluated by
//! the running recurrence
//! `y_{i+1} = exp{E_{i+1} - E_i}·y_i + ∫_{t_i}^{t_{i+1}} exp{E_{i+1} - E(τ)} f(τ) dτ`,
//! so only exponentials of differences inside one stencil are formed and the
//! cost stays linear in the number of nodes.

use std::io::Write;

use crate::error::{Error, Result};

/// Largest exponent difference allowed inside one quadrature window.
pub const MAX_WINDOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    error_est: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::with_error(nodes, values, vec![0.0; n])
    }

    pub fn with_error(nodes: Vec<f64>, values: Vec<f64>, error_est: Vec<f64>) -> Result<Self> {
        validate_nodes(&nodes)?;
        if values.len() != nodes.len() || error_est.len() != nodes.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} nodes but {} values and {} error estimates",
                nodes.len(),
                values.len(),
                error_est.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {} at t={}", values[i], nodes[i])));
        }
        if error_est.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidInput("error estimates must be non-negative".into()));
        }
        Ok(Self { nodes, values, error_est })
    }

    pub fn from_fn(nodes: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = nodes.iter().map(|&t| f(t)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn error_est(&self) -> &[f64] {
        &self.error_est
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("grid functions are non-empty")
    }

    pub fn max_error(&self) -> f64 {
        self.error_est.iter().cloned().fold(0.0, f64::max)
    }

    /// Pointwise map onto a new grid function on the same nodes.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self.nodes.iter().zip(&self.values).map(|(&t, &v)| f(t, v)).collect();
        Self::new(self.nodes.clone(), values)
    }

    /// CSV with header `t,value,error_est`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value", "error_est"])?;
        for i in 0..self.len() {
            wr.write_record([fmt17(self.nodes[i]), fmt17(self.values[i]), fmt17(self.error_est[i])])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn validate_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if nodes.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite grid node".into()));
    }
    if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!("grid nodes not strictly increasing ({} then {})", w[0], w[1])));
    }
    Ok(())
}

/// `n_intervals + 1` equispaced nodes with exact endpoints.
pub fn uniform_grid(a: f64, b: f64, n_intervals: usize) -> Vec<f64> {
    assert!(n_intervals >= 1 && b > a);
    let h = (b - a) / n_intervals as f64;
    let mut g: Vec<f64> = (0..n_intervals).map(|i| a + i as f64 * h).collect();
    g.push(b);
    g
}

/// Integration weights of one interval against a Lagrange interpolant.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub start: usize,
    pub len: usize,
    pub w: [f64; 4],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len).map(|k| self.w[k] * f(self.start + k)).sum()
    }
}

/// Rule for `∫_{x_i}^{x_{i+1}}` using nodes restricted to `lo..=hi`.
pub(crate) fn interval_rule(nodes: &[f64], i: usize, lo: usize, hi: usize) -> Stencil {
    debug_assert!(lo <= i && i < hi && hi < nodes.len());
    let avail = hi - lo + 1;
    let len = avail.min(4);
    let start = if len == 4 { i.saturating_sub(1).clamp(lo, hi - 3) } else { lo };
    let a = nodes[i];
    let h = nodes[i + 1] - a;
    let d: Vec<f64> = (0..len).map(|k| nodes[start + k] - a).collect();
    let mut w = [0.0; 4];
    for j in 0..len {
        // numerator Π_{m≠j} (s - d_m), ascending coefficients
        let mut poly = [0.0f64; 4];
        poly[0] = 1.0;
        let mut deg = 0;
        let mut denom = 1.0;
        for m in 0..len {
            if m == j {
                continue;
            }
            for c in (0..=deg).rev() {
                poly[c + 1] += poly[c];
                poly[c] *= -d[m];
            }
            deg += 1;
            denom *= d[j] - d[m];
        }
        let mut integral = 0.0;
        let mut hp = h;
        for (c, coeff) in poly.iter().enumerate().take(deg + 1) {
            integral += coeff * hp / (c + 1) as f64;
            hp *= h;
        }
        w[j] = integral / denom;
    }
    Stencil { start, len, w }
}

/// Cumulative integral of nodal values; returns `(F, error_est)`.
pub(crate) fn cumulative_raw(nodes: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    let mut err = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let st = interval_rule(nodes, i, 0, n - 1);
        let local = st.apply(|k| values[k]);
        let trap = 0.5 * (nodes[i + 1] - nodes[i]) * (values[i] + values[i + 1]);
        out[i + 1] = out[i] + local;
        err[i + 1] = err[i] + (local - trap).abs();
    }
    (out, err)
}

/// Result of a running exponentially weighted integral. Values past
/// `overflow_at` are `+∞`.
pub(crate) struct ExpWeighted {
    pub values: Vec<f64>,
    pub error: Vec<f64>,
    pub overflow_at: Option<usize>,
}

/// `y_i = ∫_{t_0}^{t_i} exp{E_i - E(τ)} f(τ) dτ` from nodal `E` and `f`.
pub(crate) fn exp_weighted_raw(nodes: &[f64], e: &[f64], f: &[f64]) -> ExpWeighted {
    let n = nodes.len();
    let mut values = vec![0.0; n];
    let mut error = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let st = interval_rule(nodes, i, 0, n - 1);
        let exceeds = (0..st.len).any(|k| e[i + 1] - e[st.start + k] > MAX_WINDOW_EXPONENT);
        let factor = (e[i + 1] - e[i]).exp();
        let local = st.apply(|k| (e[i + 1] - e[k]).exp() * f[k]);
        let next = factor * values[i] + local;
        if exceeds || !next.is_finite() {
            for v in values.iter_mut().skip(i + 1) {
                *v = f64::INFINITY;
            }
            for v in error.iter_mut().skip(i + 1) {
                *v = f64::INFINITY;
            }
            return ExpWeighted { values, error, overflow_at: Some(i + 1) };
        }
        let trap = 0.5 * (nodes[i + 1] - nodes[i]) * (factor * f[i] + f[i + 1]);
        values[i + 1] = next;
        error[i + 1] = factor * error[i] + (local - trap).abs();
    }
    ExpWeighted { values, error, overflow_at: None }
}

/// `F(t_i) = ∫_{t_0}^{t_i} f`, with `F(t_0) = 0`.
pub fn cumulative_integral(f: &GridFunction) -> Result<GridFunction> {
    if f.len() < 2 {
        return Err(Error::InvalidInput("cumulative integral needs at least 2 nodes".into()));
    }
    let (values, mut err) = cumulative_raw(&f.nodes, &f.values);
    let (carried, _) = cumulative_raw(&f.nodes, &f.error_est);
    for (e, c) in err.iter_mut().zip(carried) {
        *e += c.abs();
    }
    GridFunction::with_error(f.nodes.clone(), values, err)
}

/// As [`cumulative_integral`], failing when the error estimate exceeds `cap`.
pub fn cumulative_integral_capped(f: &GridFunction, cap: f64) -> Result<GridFunction> {
    let out = cumulative_integral(f)?;
    let estimate = out.max_error();
    if estimate > cap {
        return Err(Error::GridTooCoarse { estimate, cap });
    }
    Ok(out)
}

/// `t ↦ ∫_{t0}^{t} exp{E(t) - E(τ)}·inner(τ) dτ` with `E = ∫ weight_exponent`;
/// the solution of `y' = w·y + inner`, `y(t0) = 0`.
pub fn exp_weighted_integral(inner: &GridFunction, weight_exponent: &GridFunction) -> Result<GridFunction> {
    if inner.nodes != weight_exponent.nodes {
        return Err(Error::InvalidInput("inner and weight grids differ".into()));
    }
    let e = cumulative_integral(weight_exponent)?;
    let r = exp_weighted_raw(&inner.nodes, &e.values, &inner.values);
    if let Some(i) = r.overflow_at {
        return Err(Error::OverflowGuard { t: inner.nodes[i - 1] });
    }
    GridFunction::with_error(inner.nodes.clone(), r.values, r.error)
}

/// Derivative at every node from the degree-4 interpolant on five
/// neighbouring nodes (fewer on short grids).
pub fn derivative(f: &GridFunction) -> Vec<f64> {
    derivative_raw(&f.nodes, &f.values)
}

pub(crate) fn derivative_raw(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let len = n.min(5);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(2).min(n - len);
            let x = nodes[i];
            let mut acc = 0.0;
            for j in start..start + len {
                // L_j'(x) = Σ_{m≠j} 1/(x_j - x_m) Π_{l≠j,m} (x - x_l)/(x_j - x_l)
                let mut dl = 0.0;
                for m in start..start + len {
                    if m == j {
                        continue;
                    }
                    let mut prod = 1.0 / (nodes[j] - nodes[m]);
                    for l in start..start + len {
                        if l != j && l != m {
                            prod *= (x - nodes[l]) / (nodes[j] - nodes[l]);
                        }
                    }
                    dl += prod;
                }
                acc += dl * values[j];
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_integrand_exact_on_any_grid() {
        let nodes = vec![0.0, 0.013, 0.2, 0.21, 0.5, 0.77, 1.0];
        let f = GridFunction::from_fn(nodes, |_| 1.0).unwrap();
        let out = cumulative_integral(&f).unwrap();
        assert_eq!(out.values()[0], 0.0);
        assert!((out.last() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_exact_on_33_nodes() {
        let f = GridFunction::from_fn(uniform_grid(0.0, 1.0, 32), |t| t.powi(3)).unwrap();
        let out = cumulative_integral(&f).unwrap();
        assert!((out.last() - 0.25).abs() < 1e-10);
        for (t, v) in out.nodes().iter().zip(out.values()) {
            assert!((v - t.powi(4) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_over_period() {
        let f = GridFunction::from_fn(uniform_grid(0.0, 2.0 * PI, 400), f64::cos).unwrap();
        assert!(cumulative_integral(&f).unwrap().last().abs() < 1e-10);
    }

    #[test]
    fn two_and_three_node_grids() {
        let f = GridFunction::from_fn(vec![0.0, 2.0], |t| 3.0 * t + 1.0).unwrap();
        assert!((cumulative_integral(&f).unwrap().last() - 8.0).abs() < 1e-14);
        let f = GridFunction::from_fn(vec![0.0, 0.5, 2.0], |t| t * t).unwrap();
        assert!((cumulative_integral(&f).unwrap().last() - 8.0 / 3.0).abs() < 1e-14);
        let single = GridFunction::from_fn(vec![0.0], |_| 1.0).unwrap();
        assert!(cumulative_integral(&single).is_err());
    }

    #[test]
    fn grid_too_coarse_is_reported() {
        let f = GridFunction::from_fn(uniform_grid(0.0, 10.0, 8), |t| (3.0 * t).sin()).unwrap();
        assert!(matches!(cumulative_integral_capped(&f, 1e-12), Err(Error::GridTooCoarse { .. })));
        let fine = GridFunction::from_fn(uniform_grid(0.0, 1.0, 8), |_| 2.0).unwrap();
        assert!(cumulative_integral_capped(&fine, 1e-12).is_ok());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GridFunction::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(GridFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn zero_weight_reduces_to_cumulative() {
        let nodes = uniform_grid(0.0, 3.0, 50);
        let inner = GridFunction::from_fn(nodes.clone(), |t| (2.0 * t).sin() + t).unwrap();
        let zero = GridFunction::from_fn(nodes, |_| 0.0).unwrap();
        let a = exp_weighted_integral(&inner, &zero).unwrap();
        let b = cumulative_integral(&inner).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_weight_unit_inner() {
        let nodes = uniform_grid(0.0, 1.0, 1000);
        let one = GridFunction::from_fn(nodes, |_| 1.0).unwrap();
        let y = exp_weighted_integral(&one, &one).unwrap();
        assert!((y.last() - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn decaying_weight_long_horizon_no_overflow() {
        let nodes = uniform_grid(0.0, 50.0, 20000);
        let one = GridFunction::from_fn(nodes.clone(), |_| 1.0).unwrap();
        let minus = GridFunction::from_fn(nodes, |_| -1.0).unwrap();
        let y = exp_weighted_integral(&one, &minus).unwrap();
        assert!((y.last() - (1.0 - (-50.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn overflow_guard_trips() {
        let nodes = uniform_grid(0.0, 10.0, 4);
        let one = GridFunction::from_fn(nodes.clone(), |_| 1.0).unwrap();
        let huge = GridFunction::from_fn(nodes, |_| 200.0).unwrap();
        assert!(matches!(exp_weighted_integral(&one, &huge), Err(Error::OverflowGuard { .. })));
    }

    #[test]
    fn derivative_of_quartic_exact() {
        let nodes = vec![0.0, 0.1, 0.25, 0.4, 0.7, 0.75, 1.0];
        let f = GridFunction::from_fn(nodes.clone(), |t| t.powi(4) - t).unwrap();
        for (d, t) in derivative(&f).iter().zip(&nodes) {
            assert!((d - (4.0 * t.powi(3) - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_shape() {
        let f = GridFunction::from_fn(vec![0.0, 1.0], |t| t).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "t,value,error_est\n\
             0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0\n\
             1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0\n"
        );
    }
}
