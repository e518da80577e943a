//! Adaptive Dormand–Prince 5(4) integration with dense output and
//! finite-time blow-up detection.

use std::io::Write;

use crate::error::{Error, Result};
use crate::quadrature::{fmt17, GridFunction};
use crate::system::{check_finite, PseudoLinearSystem};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Number of trailing accepted steps whose norms must increase for a step
/// collapse to count as blow-up.
const GROWTH_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step; `None` means `1e-12·(T - t0)`.
    pub h_min: Option<f64>,
    pub blowup_norm: f64,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h_min: None, blowup_norm: 1e8, max_steps: 10_000_000 }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidInput("rtol and atol must be positive".into()));
        }
        if !(self.blowup_norm > 1.0) {
            return Err(Error::InvalidInput("blowup_norm must exceed 1".into()));
        }
        if let Some(h) = self.h_min {
            if !(h > 0.0) {
                return Err(Error::InvalidInput("h_min must be positive".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Completed,
    /// The solution escaped; `t_blow` is the last accepted time plus the
    /// extrapolated remaining time to escape.
    BlewUp {
        t_blow: f64,
    },
    /// The step collapsed without norm growth, or the step budget ran out.
    ToleranceFailure {
        t_fail: f64,
    },
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Completed => "Completed",
            Status::BlewUp { .. } => "BlewUp",
            Status::ToleranceFailure { .. } => "ToleranceFailure",
        }
    }
}

/// Right-hand side outcome of a stage evaluation.
pub(crate) enum Stage<const N: usize> {
    Ok([f64; N]),
    /// The stage state is out of the meaningful range; shrink the step.
    Reject,
}

pub(crate) struct RawSolution<const N: usize> {
    pub nodes: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Per-interval dense coefficients.
    pub dense: Vec<[[f64; N]; 5]>,
    pub status: Status,
}

fn norm<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Core stepper. `stops` must be increasing and lie in `(t0, t_end]`; each
/// one is hit exactly by an accepted step.
pub(crate) fn dopri5<const N: usize, F>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegrationConfig,
    stops: &[f64],
) -> Result<RawSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<Stage<N>>,
{
    cfg.validate()?;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("need finite t0 < T, got [{t0}, {t_end}]")));
    }
    if !finite(&y0) {
        return Err(Error::InvalidInput("initial values must be finite".into()));
    }
    let span = t_end - t0;
    let h_min = cfg.h_min.unwrap_or(1e-12 * span);
    let h_max = span;
    let (safe, fac1, fac2, beta): (f64, f64, f64, f64) = (0.9, 0.2, 10.0, 0.04);
    let expo1 = 0.2 - beta * 0.75;

    let mut nodes = vec![t0];
    let mut states = vec![y0];
    let mut dense = Vec::new();
    let mut norms = vec![norm(&y0)];

    let mut k1 = match rhs(t0, &y0)? {
        Stage::Ok(k) if finite(&k) => k,
        _ => return Err(Error::InvalidInput("right-hand side not finite at t0".into())),
    };

    let mut t = t0;
    let mut y = y0;
    let mut h = initial_step(&mut rhs, t0, &y0, &k1, cfg, h_max)?;
    let mut facold: f64 = 1e-4;
    let mut stop_idx = 0;
    let mut steps = 0usize;
    let mut last_reject = false;

    let status = loop {
        if steps >= cfg.max_steps {
            break Status::ToleranceFailure { t_fail: t };
        }
        while stop_idx < stops.len() && stops[stop_idx] <= t {
            stop_idx += 1;
        }
        let target = if stop_idx < stops.len() { stops[stop_idx].min(t_end) } else { t_end };
        let mut hit_target = false;
        if t + h >= target - 1e-14 * target.abs().max(1.0) {
            h = target - t;
            hit_target = true;
        }
        if h < h_min && !hit_target {
            break classify_collapse(t, &norms);
        }
        steps += 1;

        let attempt = (|| -> Result<Option<([f64; N], [f64; N], [[f64; N]; 5], f64)>> {
            macro_rules! stage {
                ($t:expr, $y:expr) => {{
                    let yy = $y;
                    if !finite(&yy) {
                        return Ok(None);
                    }
                    match rhs($t, &yy)? {
                        Stage::Ok(k) if finite(&k) => k,
                        _ => return Ok(None),
                    }
                }};
            }
            let k2 = stage!(t + C2 * h, axpy(&y, h, &[(A21, &k1)]));
            let k3 = stage!(t + C3 * h, axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = stage!(t + C4 * h, axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = stage!(t + C5 * h, axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = stage!(t + h, axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let t_new = if hit_target { target } else { t + h };
            let k7 = stage!(t_new, y_new);

            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                return Ok(None);
            }
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k7[i] - bspl;
                cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            Ok(Some((y_new, k7, cont, err)))
        })()?;

        match attempt {
            Some((y_new, k7, cont, err)) if err <= 1.0 => {
                let fac11 = err.max(1e-300).powf(expo1);
                let mut fac = fac11 / facold.powf(beta);
                fac = (1.0 / fac2).max((1.0 / fac1).min(fac / safe));
                let mut h_new = h / fac;
                facold = err.max(1e-4);
                let t_new = if hit_target { target } else { t + h };
                nodes.push(t_new);
                states.push(y_new);
                dense.push(cont);
                let n_new = norm(&y_new);
                norms.push(n_new);
                if n_new > cfg.blowup_norm {
                    let remaining = escape_remaining(&y, &k1, &y_new, &k7);
                    break Status::BlewUp { t_blow: t_new + remaining };
                }
                if last_reject {
                    h_new = h_new.min(h);
                }
                last_reject = false;
                t = t_new;
                y = y_new;
                k1 = k7;
                if hit_target && target >= t_end {
                    break Status::Completed;
                }
                h = h_new.min(h_max);
            }
            Some((_, _, _, err)) => {
                let fac11 = err.powf(expo1);
                h /= (1.0 / fac1).min(fac11 / safe);
                last_reject = true;
            }
            None => {
                h *= 0.25;
                last_reject = true;
            }
        }
    };

    Ok(RawSolution { nodes, states, dense, status })
}

fn classify_collapse(t: f64, norms: &[f64]) -> Status {
    let window = &norms[norms.len().saturating_sub(GROWTH_WINDOW + 1)..];
    let growing = window.len() >= 2 && window.windows(2).all(|w| w[1] > w[0]);
    if growing {
        Status::BlewUp { t_blow: t }
    } else {
        Status::ToleranceFailure { t_fail: t }
    }
}

/// Remaining time to escape assuming local power growth `‖y‖' ∝ ‖y‖^p`,
/// with `p` fitted from the last two accepted states.
fn escape_remaining<const N: usize>(y0: &[f64; N], f0: &[f64; N], y1: &[f64; N], f1: &[f64; N]) -> f64 {
    let (n0, n1) = (norm(y0), norm(y1));
    let (d0, d1) = (norm(f0), norm(f1));
    if !(n1 > n0 && n0 > 0.0 && d0 > 0.0 && d1 > 0.0) {
        return 0.0;
    }
    let p = (d1 / d0).ln() / (n1 / n0).ln();
    if !(p > 1.0 + 1e-9) {
        return 0.0;
    }
    let r = n1 / ((p - 1.0) * d1);
    if r.is_finite() && r >= 0.0 {
        r
    } else {
        0.0
    }
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    cfg: &IntegrationConfig,
    h_max: f64,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<Stage<N>>,
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = cfg.atol + cfg.rtol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(h_max);
    let y1 = axpy(y0, h, &[(1.0, f0)]);
    let der2 = match rhs(t0 + h, &y1)? {
        Stage::Ok(f1) if finite(&f1) => {
            let mut d = 0.0;
            for i in 0..N {
                let sk = cfg.atol + cfg.rtol * y0[i].abs();
                d += ((f1[i] - f0[i]) / sk).powi(2);
            }
            d.sqrt() / h
        }
        _ => return Ok(h * 1e-3),
    };
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    Ok((100.0 * h).min(h1).min(h_max))
}

/// Evaluates a dense interval at `theta ∈ [0, 1]`.
#[inline]
pub(crate) fn dense_value<const N: usize>(c: &[[f64; N]; 5], theta: f64, i: usize) -> f64 {
    let s1 = 1.0 - theta;
    c[0][i] + theta * (c[1][i] + s1 * (c[2][i] + theta * (c[3][i] + s1 * c[4][i])))
}

/// Numerical solution `(φ(t), ψ(t))` with dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    horizon: f64,
    nodes: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    dense: Vec<[[f64; 2]; 5]>,
    status: Status,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Last node reached.
    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// The requested end of the integration interval.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.phi[0], self.psi[0])
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_psi(&self) -> f64 {
        self.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Interpolated `(φ(t), ψ(t))`; exact stored values at nodes.
    pub fn dense_eval(&self, t: f64) -> Result<(f64, f64)> {
        let t_end = self.t_end();
        if !(t >= self.t0 && t <= t_end) {
            return Err(Error::OutOfRange { t, t0: self.t0, t_end });
        }
        match self.nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => Ok((self.phi[i], self.psi[i])),
            Err(j) => {
                let i = j - 1;
                let theta = (t - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
                let c = &self.dense[i];
                Ok((dense_value(c, theta, 0), dense_value(c, theta, 1)))
            }
        }
    }

    /// Like [`dense_eval`](Self::dense_eval) but clamps `t` into the domain.
    pub(crate) fn eval_clamped(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(self.t0, self.t_end());
        self.dense_eval(t).expect("clamped time lies in the domain")
    }

    /// Accepted nodes refined so that no spacing exceeds `max_spacing`.
    pub fn refined_grid(&self, max_spacing: f64) -> Vec<f64> {
        let mut grid = Vec::with_capacity(self.nodes.len() * 2);
        grid.push(self.nodes[0]);
        for w in self.nodes.windows(2) {
            let len = w[1] - w[0];
            let parts = (len / max_spacing).ceil().max(1.0) as usize;
            for k in 1..parts {
                let t = w[0] + len * k as f64 / parts as f64;
                if t > *grid.last().unwrap() && t < w[1] {
                    grid.push(t);
                }
            }
            grid.push(w[1]);
        }
        grid
    }

    /// The grid shared by all quadrature along this trajectory: accepted
    /// nodes with spacing capped at `(t_end - t0) / 512`.
    pub fn shared_grid(&self) -> Vec<f64> {
        self.refined_grid((self.t_end() - self.t0) / 512.0)
    }

    /// `(φ, ψ)` sampled on `grid`.
    pub fn sample(&self, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut phi = Vec::with_capacity(grid.len());
        let mut psi = Vec::with_capacity(grid.len());
        for &t in grid {
            let (a, b) = self.dense_eval(t)?;
            phi.push(a);
            psi.push(b);
        }
        Ok((phi, psi))
    }

    pub fn phi_on(&self, grid: &[f64]) -> Result<GridFunction> {
        let (phi, _) = self.sample(grid)?;
        GridFunction::new(grid.to_vec(), phi)
    }

    pub fn psi_on(&self, grid: &[f64]) -> Result<GridFunction> {
        let (_, psi) = self.sample(grid)?;
        GridFunction::new(grid.to_vec(), psi)
    }

    /// Prefix of the trajectory ending at the last node `≤ t1`.
    pub fn truncated(&self, t1: f64) -> Trajectory {
        let keep = self.nodes.partition_point(|&t| t <= t1).max(1);
        let status = if keep == self.nodes.len() { self.status } else { Status::Completed };
        Trajectory {
            t0: self.t0,
            horizon: if keep == self.nodes.len() { self.horizon } else { self.nodes[keep - 1] },
            nodes: self.nodes[..keep].to_vec(),
            phi: self.phi[..keep].to_vec(),
            psi: self.psi[..keep].to_vec(),
            dense: self.dense[..keep - 1].to_vec(),
            status,
        }
    }

    /// CSV with header `t,phi,psi`, one row per node.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "phi", "psi"])?;
        for i in 0..self.len() {
            wr.write_record([fmt17(self.nodes[i]), fmt17(self.phi[i]), fmt17(self.psi[i])])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Integrates the system from `(phi0, psi0)` at `t_span.0` to `t_span.1`.
pub fn integrate(
    system: &PseudoLinearSystem,
    phi0: f64,
    psi0: f64,
    t_span: (f64, f64),
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    let (t0, t_end) = t_span;
    if t0 < system.t0 {
        return Err(Error::InvalidInput(format!("integration starts at {t0}, before the system origin {}", system.t0)));
    }
    let limit = cfg.blowup_norm;
    let rhs = |t: f64, y: &[f64; 2]| -> Result<Stage<2>> {
        let (u, v) = (y[0], y[1]);
        let c = system.eval_raw(t, u, v);
        if check_finite(&c, t, u, v).is_err() {
            if u.abs().max(v.abs()) <= limit {
                check_finite(&c, t, u, v)?;
            }
            return Ok(Stage::Reject);
        }
        let (du, dv) = c.rhs(u, v);
        Ok(Stage::Ok([du, dv]))
    };
    let raw = dopri5(rhs, t0, [phi0, psi0], t_end, cfg, &[])?;
    Ok(Trajectory {
        t0,
        horizon: t_end,
        phi: raw.states.iter().map(|s| s[0]).collect(),
        psi: raw.states.iter().map(|s| s[1]).collect(),
        nodes: raw.nodes,
        dense: raw.dense,
        status: raw.status,
    })
}

/// Free-standing wrapper over [`Trajectory::dense_eval`].
pub fn dense_eval(traj: &Trajectory, t: f64) -> Result<(f64, f64)> {
    traj.dense_eval(t)
}
