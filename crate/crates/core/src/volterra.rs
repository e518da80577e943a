//! Volterra representations of a trajectory and the a-priori bounds built
//! from envelope-dominated kernels.
//!
//! Substituting the Cauchy formula for `ψ` into the one for `φ` gives
//!
//! ```text
//! φ(t) = v1(t) + ∫_{t0}^{t} K1(t,ζ) φ(ζ) dζ
//! v1(t) = φ0·e^{∫_{t0}^{t}P} + ∫_{t0}^{t} e^{∫_τ^t P} [F(τ) + Q(τ)(ψ0·e^{∫_{t0}^{τ}S} + ∫_{t0}^{τ} e^{∫_s^τ S} G(s) ds)] dτ
//! K1(t,ζ) = R(ζ) ∫_ζ^t e^{∫_τ^t P + ∫_ζ^τ S} Q(τ) dτ
//! ```
//!
//! and symmetrically `ψ = v2 + ∫ K2 ψ` with `P ↔ S`, `Q ↔ R`, `F ↔ G`.
//! `v1_printed` / `v2_printed` keep the variant that drops the `Q` factor
//! on the `ψ0` term and integrates `G` unweighted up to `t`; its residual
//! does not vanish unless those terms are zero.
//!
//! All coefficients are frozen along the trajectory and sampled on its
//! shared grid. Each kernel row is one backward running product in `ζ`,
//! so a row costs `O(N)` and a table `O(N²)`.

use crate::envelope::EnvelopeSet;
use crate::error::{Error, Label, Result};
use crate::integrator::Trajectory;
use crate::quadrature::{cumulative_raw, exp_weighted_raw, interval_rule, uniform_grid, Stencil, MAX_WINDOW_EXPONENT};
use crate::system::{check_finite, PseudoLinearSystem};

/// Kernel tables are materialized up to this many nodes.
pub const MAX_STORED_NODES: usize = 4096;

/// Grid resolution used by [`envelope_bounds`].
pub const BOUND_GRID_INTERVALS: usize = 1024;

/// Nodal coefficient arrays on one grid.
#[derive(Debug, Clone)]
struct Coefficients {
    nodes: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    s: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Phi,
    Psi,
}

/// Cached full-grid interval rules; rows re-derive the last few.
#[derive(Debug, Clone)]
struct Rules {
    full: Vec<Stencil>,
}

impl Rules {
    fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        Self { full: (0..n.saturating_sub(1)).map(|k| interval_rule(nodes, k, 0, n - 1)).collect() }
    }

    /// Rule for interval `k` using nodes `0..=hi`.
    fn get(&self, nodes: &[f64], k: usize, hi: usize) -> Stencil {
        if k + 3 > hi || hi < 3 {
            interval_rule(nodes, k, 0, hi)
        } else {
            self.full[k]
        }
    }
}

struct Core {
    c: Coefficients,
    e_p: Vec<f64>,
    e_s: Vec<f64>,
    rules: Rules,
}

struct Sources {
    v1: Vec<f64>,
    v2: Vec<f64>,
    v1_printed: Vec<f64>,
    v2_printed: Vec<f64>,
    overflow: bool,
}

impl Core {
    fn new(c: Coefficients) -> Self {
        let (e_p, _) = cumulative_raw(&c.nodes, &c.p);
        let (e_s, _) = cumulative_raw(&c.nodes, &c.s);
        let rules = Rules::new(&c.nodes);
        Self { c, e_p, e_s, rules }
    }

    fn n(&self) -> usize {
        self.c.nodes.len()
    }

    fn sources(&self, phi0: f64, psi0: f64) -> Sources {
        let nodes = &self.c.nodes;
        let mut overflow = false;
        let mut ewi = |e: &[f64], f: &[f64]| {
            let r = exp_weighted_raw(nodes, e, f);
            overflow |= r.overflow_at.is_some();
            r.values
        };
        let gamma_g = ewi(&self.e_s, &self.c.g);
        let gamma_f = ewi(&self.e_p, &self.c.f);
        let inner1: Vec<f64> =
            (0..self.n()).map(|k| self.c.q[k] * (psi0 * self.e_s[k].exp() + gamma_g[k]) + self.c.f[k]).collect();
        let inner2: Vec<f64> =
            (0..self.n()).map(|k| self.c.r[k] * (phi0 * self.e_p[k].exp() + gamma_f[k]) + self.c.g[k]).collect();
        let w1 = ewi(&self.e_p, &inner1);
        let w2 = ewi(&self.e_s, &inner2);
        let v1: Vec<f64> = (0..self.n()).map(|i| phi0 * self.e_p[i].exp() + w1[i]).collect();
        let v2: Vec<f64> = (0..self.n()).map(|i| psi0 * self.e_s[i].exp() + w2[i]).collect();

        let (ig, _) = cumulative_raw(nodes, &self.c.g);
        let (i_f, _) = cumulative_raw(nodes, &self.c.f);
        let plain1: Vec<f64> = (0..self.n()).map(|k| psi0 * self.e_s[k].exp() + self.c.f[k]).collect();
        let plain2: Vec<f64> = (0..self.n()).map(|k| phi0 * self.e_p[k].exp() + self.c.g[k]).collect();
        let a1 = ewi(&self.e_p, &plain1);
        let b1 = ewi(&self.e_p, &self.c.q);
        let a2 = ewi(&self.e_s, &plain2);
        let b2 = ewi(&self.e_s, &self.c.r);
        let v1_printed = (0..self.n()).map(|i| phi0 * self.e_p[i].exp() + a1[i] + ig[i] * b1[i]).collect();
        let v2_printed = (0..self.n()).map(|i| psi0 * self.e_s[i].exp() + a2[i] + i_f[i] * b2[i]).collect();
        Sources { v1, v2, v1_printed, v2_printed, overflow }
    }

    /// Row `i` of `K1` (or `K2`): values at `ζ = t_0 … t_i`. `None` on
    /// exponent overflow.
    fn kernel_row(&self, which: Component, i: usize) -> Option<Vec<f64>> {
        let (ea, eb, w, front) = match which {
            Component::Phi => (&self.e_p, &self.e_s, &self.c.q, &self.c.r),
            Component::Psi => (&self.e_s, &self.e_p, &self.c.r, &self.c.q),
        };
        let nodes = &self.c.nodes;
        let mut row = vec![0.0; i + 1];
        let mut kappa = 0.0;
        for k in (0..i).rev() {
            let st = self.rules.get(nodes, k, i);
            let mut local = 0.0;
            for m in 0..st.len {
                let j = st.start + m;
                let x = ea[i] - ea[j] + eb[j] - eb[k];
                if x > MAX_WINDOW_EXPONENT {
                    return None;
                }
                local += st.w[m] * x.exp() * w[j];
            }
            kappa = (eb[k + 1] - eb[k]).exp() * kappa + local;
            if !kappa.is_finite() {
                return None;
            }
            row[k] = front[k] * kappa;
        }
        Some(row)
    }

    /// `∫_{t0}^{t_i} row(ζ)·x(ζ) dζ` with rules restricted to `0..=i`.
    fn row_integral(&self, row: &[f64], x: &[f64], i: usize) -> f64 {
        (0..i).map(|k| self.rules.get(&self.c.nodes, k, i).apply(|m| row[m] * x[m])).sum()
    }
}

/// `v1, v2, K1, K2` sampled along one trajectory.
pub struct VolterraData {
    core: Core,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v1_printed: Vec<f64>,
    pub v2_printed: Vec<f64>,
    /// Lower-triangular `K1(t_i, t_k)`, row `i` of length `i + 1`; `None`
    /// above [`MAX_STORED_NODES`].
    pub k1: Option<Vec<Vec<f64>>>,
    pub k2: Option<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for VolterraData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VolterraData").field("nodes", &self.core.n()).field("stored", &self.k1.is_some()).finish()
    }
}

impl VolterraData {
    pub fn nodes(&self) -> &[f64] {
        &self.core.c.nodes
    }

    /// Row `i` of the kernel for `which`, from the table or recomputed.
    pub fn kernel_row(&self, which: Component, i: usize) -> Result<Vec<f64>> {
        let table = match which {
            Component::Phi => &self.k1,
            Component::Psi => &self.k2,
        };
        if let Some(t) = table {
            return Ok(t[i].clone());
        }
        self.core.kernel_row(which, i).ok_or(Error::OverflowGuard { t: self.core.c.nodes[i] })
    }
}

fn sample_along(traj: &Trajectory, system: &PseudoLinearSystem) -> Result<Coefficients> {
    let nodes = traj.shared_grid();
    let n = nodes.len();
    let mut c = Coefficients {
        nodes: Vec::new(),
        p: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
    };
    for &t in &nodes {
        let (u, v) = traj.eval_clamped(t);
        let x = system.eval_raw(t, u, v);
        check_finite(&x, t, u, v)?;
        c.p.push(x.p);
        c.q.push(x.q);
        c.r.push(x.r);
        c.s.push(x.s);
        c.f.push(x.f);
        c.g.push(x.g);
    }
    c.nodes = nodes;
    Ok(c)
}

/// Evaluates `v1, v2, K1, K2` along `traj` on its shared grid.
pub fn compute_volterra_data(traj: &Trajectory, system: &PseudoLinearSystem) -> Result<VolterraData> {
    let core = Core::new(sample_along(traj, system)?);
    if core.n() < 2 {
        return Err(Error::InvalidInput("trajectory has a single node".into()));
    }
    let (phi0, psi0) = traj.initial();
    let src = core.sources(phi0, psi0);
    if src.overflow {
        return Err(Error::OverflowGuard { t: traj.t_end() });
    }
    let (k1, k2) = if core.n() <= MAX_STORED_NODES {
        let mut k1 = Vec::with_capacity(core.n());
        let mut k2 = Vec::with_capacity(core.n());
        for i in 0..core.n() {
            let t = core.c.nodes[i];
            k1.push(core.kernel_row(Component::Phi, i).ok_or(Error::OverflowGuard { t })?);
            k2.push(core.kernel_row(Component::Psi, i).ok_or(Error::OverflowGuard { t })?);
        }
        (Some(k1), Some(k2))
    } else {
        (None, None)
    };
    Ok(VolterraData { v1: src.v1, v2: src.v2, v1_printed: src.v1_printed, v2_printed: src.v2_printed, k1, k2, core })
}

fn residual_with(traj: &Trajectory, data: &VolterraData, v1: &[f64], v2: &[f64]) -> Result<(f64, f64)> {
    let (phi, psi) = traj.sample(data.nodes())?;
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for i in 0..data.nodes().len() {
        let row1 = data.kernel_row(Component::Phi, i)?;
        let row2 = data.kernel_row(Component::Psi, i)?;
        let i1 = data.core.row_integral(&row1, &phi, i);
        let i2 = data.core.row_integral(&row2, &psi, i);
        r1 = r1.max((phi[i] - v1[i] - i1).abs());
        r2 = r2.max((psi[i] - v2[i] - i2).abs());
    }
    Ok((r1, r2))
}

/// Max over nodes of `|φ - v1 - ∫K1 φ|` and `|ψ - v2 - ∫K2 ψ|`.
pub fn volterra_residual(traj: &Trajectory, data: &VolterraData) -> Result<(f64, f64)> {
    residual_with(traj, data, &data.v1, &data.v2)
}

/// The same residuals with the printed source terms.
pub fn volterra_residual_printed(traj: &Trajectory, data: &VolterraData) -> Result<(f64, f64)> {
    residual_with(traj, data, &data.v1_printed, &data.v2_printed)
}

/// A-priori bounds `m_j·exp{M_j (T - t0)}` from the envelope majorants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct VolterraBound {
    pub m1: f64,
    pub m2: f64,
    pub M1: f64,
    pub M2: f64,
    /// `ln m_j + M_j (T - t0)`; finite even when the bound itself is not.
    pub log_bound1: f64,
    pub log_bound2: f64,
    pub bound1: f64,
    pub bound2: f64,
    /// An intermediate exponent exceeded the quadrature window; the
    /// affected quantities are `+∞`.
    pub overflow: bool,
}

impl VolterraBound {
    /// `|x| ≤ bound_j·(1 + rel_tol)`, compared in log space.
    pub fn contains(&self, which: Component, x: f64, rel_tol: f64) -> bool {
        let lb = match which {
            Component::Phi => self.log_bound1,
            Component::Psi => self.log_bound2,
        };
        x == 0.0 || x.abs().ln() <= lb + rel_tol.ln_1p()
    }
}

/// Envelope majorants `v̊̊_j`, `K̊̊_j` on an explicit grid.
pub struct EnvelopeMajorants {
    core: Core,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub overflow: bool,
}

impl EnvelopeMajorants {
    pub fn nodes(&self) -> &[f64] {
        &self.core.c.nodes
    }

    /// Row `i` of `K̊̊_1` or `K̊̊_2`; `None` on overflow.
    pub fn kernel_row(&self, which: Component, i: usize) -> Option<Vec<f64>> {
        self.core.kernel_row(which, i)
    }
}

pub fn envelope_majorants(env: &EnvelopeSet, phi0: f64, psi0: f64, grid: &[f64]) -> Result<EnvelopeMajorants> {
    crate::quadrature::validate_nodes(grid)?;
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 nodes".into()));
    }
    let s = |l: Label| env.get(l).sample(grid);
    let c = Coefficients {
        nodes: grid.to_vec(),
        p: s(Label::P),
        q: s(Label::Q),
        r: s(Label::R),
        s: s(Label::S),
        f: s(Label::F),
        g: s(Label::G),
    };
    for (label, xs) in [(Label::P, &c.p), (Label::Q, &c.q), (Label::R, &c.r), (Label::S, &c.s)] {
        if let Some(k) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("envelope {label}0 is not finite at t={}", grid[k])));
        }
    }
    let core = Core::new(c);
    let src = core.sources(phi0.abs(), psi0.abs());
    Ok(EnvelopeMajorants { core, v1: src.v1, v2: src.v2, overflow: src.overflow })
}

/// Bounds on `[t0, T]` from envelope majorants on a uniform grid of
/// [`BOUND_GRID_INTERVALS`] intervals.
pub fn envelope_bounds(env: &EnvelopeSet, phi0: f64, psi0: f64, t0: f64, t_end: f64) -> Result<VolterraBound> {
    if !(t0 < t_end) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("need t0 < T finite, got [{t0}, {t_end}]")));
    }
    envelope_bounds_on(env, phi0, psi0, &uniform_grid(t0, t_end, BOUND_GRID_INTERVALS))
}

#[allow(non_snake_case)]
pub fn envelope_bounds_on(env: &EnvelopeSet, phi0: f64, psi0: f64, grid: &[f64]) -> Result<VolterraBound> {
    let maj = envelope_majorants(env, phi0, psi0, grid)?;
    let sup = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut overflow = maj.overflow;
    let mut m1 = if overflow { f64::INFINITY } else { sup(&maj.v1) };
    let mut m2 = if overflow { f64::INFINITY } else { sup(&maj.v2) };
    if !m1.is_finite() || !m2.is_finite() {
        overflow = true;
        m1 = f64::INFINITY;
        m2 = f64::INFINITY;
    }
    let mut M1 = 0.0f64;
    let mut M2 = 0.0f64;
    for i in 0..grid.len() {
        match (maj.kernel_row(Component::Phi, i), maj.kernel_row(Component::Psi, i)) {
            (Some(a), Some(b)) => {
                M1 = M1.max(sup(&a));
                M2 = M2.max(sup(&b));
            }
            _ => {
                overflow = true;
                M1 = f64::INFINITY;
                M2 = f64::INFINITY;
                break;
            }
        }
    }
    let span = grid[grid.len() - 1] - grid[0];
    let log_bound = |m: f64, big_m: f64| {
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            m.ln() + big_m * span
        }
    };
    let log_bound1 = log_bound(m1, M1);
    let log_bound2 = log_bound(m2, M2);
    Ok(VolterraBound {
        m1,
        m2,
        M1,
        M2,
        log_bound1,
        log_bound2,
        bound1: m1 * (M1 * span).exp(),
        bound2: m2 * (M2 * span).exp(),
        overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::EnvelopeFn;
    use crate::integrator::integrate;

    fn harmonic() -> PseudoLinearSystem {
        PseudoLinearSystem::zero(0.0).with_const(Label::Q, 1.0).with_const(Label::R, -1.0)
    }

    #[test]
    fn decoupled_kernel_is_difference() {
        let sys = PseudoLinearSystem::zero(0.0).with_const(Label::Q, 1.0).with_const(Label::R, 1.0);
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 1.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        let nodes = d.nodes().to_vec();
        let k1 = d.k1.as_ref().unwrap();
        for i in (0..nodes.len()).step_by(37) {
            for k in 0..=i {
                assert!((k1[i][k] - (nodes[i] - nodes[k])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn kernel_diagonal_zero() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.3, (0.0, 2.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        for (i, row) in d.k1.as_ref().unwrap().iter().enumerate() {
            assert_eq!(row[i], 0.0);
            assert_eq!(d.k2.as_ref().unwrap()[i][i], 0.0);
        }
    }

    #[test]
    fn q_zero_collapses_to_cauchy_formula() {
        let sys = PseudoLinearSystem::zero(0.0)
            .with_fn(Label::P, |t, _, _| -0.5 + 0.2 * t.cos())
            .with_const(Label::R, 0.7)
            .with_const(Label::S, 0.1);
        let traj = integrate(&sys, 1.5, -1.0, (0.0, 3.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        assert!(d.k1.as_ref().unwrap().iter().all(|row| row.iter().all(|&x| x == 0.0)));
        let (r1, r2) = volterra_residual(&traj, &d).unwrap();
        assert!(r1 < 1e-8, "r1={r1}");
        assert!(r2 < 1e-6, "r2={r2}");
    }

    #[test]
    fn harmonic_residual() {
        let sys = harmonic();
        let traj = integrate(&sys, 1.0, 0.5, (0.0, 5.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        let (r1, r2) = volterra_residual(&traj, &d).unwrap();
        assert!(r1 < 1e-5 && r2 < 1e-5, "{r1} {r2}");
    }

    #[test]
    fn printed_sources_fail_with_forcing() {
        let sys = harmonic().with_const(Label::S, -0.2).with_fn(Label::G, |t, _, _| (1.3 * t).cos());
        let traj = integrate(&sys, 1.0, 0.5, (0.0, 4.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        let (r1, r2) = volterra_residual(&traj, &d).unwrap();
        assert!(r1 < 1e-5 && r2 < 1e-5, "{r1} {r2}");
        let (p1, _) = volterra_residual_printed(&traj, &d).unwrap();
        assert!(p1 > 1e-2, "printed variant unexpectedly exact: {p1}");
    }

    #[test]
    fn streaming_rows_match_table() {
        let sys = harmonic().with_const(Label::P, 0.1);
        let traj = integrate(&sys, 1.0, 0.0, (0.0, 1.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        let i = d.nodes().len() - 1;
        assert_eq!(d.core.kernel_row(Component::Psi, i).unwrap(), d.kernel_row(Component::Psi, i).unwrap());
    }

    #[test]
    fn zero_envelopes_bound_is_initial_value() {
        let b = envelope_bounds(&EnvelopeSet::zero(), -2.0, 3.0, 0.0, 5.0).unwrap();
        assert_eq!((b.m1, b.m2, b.M1, b.M2), (2.0, 3.0, 0.0, 0.0));
        assert_eq!((b.bound1, b.bound2), (2.0, 3.0));
        assert!(!b.overflow);
    }

    #[test]
    fn unit_cross_envelopes_hand_value() {
        let env = EnvelopeSet::zero().with_const(Label::Q, 1.0).with_const(Label::R, 1.0);
        let b = envelope_bounds(&env, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert!((b.M1 - 1.0).abs() < 1e-13 && (b.m1 - 2.0).abs() < 1e-13);
        assert!((b.bound1 - 2.0 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn huge_envelope_reports_log_bound() {
        let env = EnvelopeSet::zero().with_const(Label::Q, 1.0).with_const(Label::R, 1.2).with_const(Label::S, 0.1);
        let b = envelope_bounds(&env, 2.0, 0.0, 0.0, 50.0).unwrap();
        assert!(b.bound1.is_infinite() && b.log_bound1.is_finite());
        // K̊̊_1 = 12 (e^{0.1 (t-ζ)} - 1), maximal on the full span
        assert!((b.M1 - 12.0 * (5.0f64.exp() - 1.0)).abs() < 1e-6 * b.M1);
        assert!(b.contains(Component::Phi, 1e300, 1e-6));
    }

    #[test]
    fn overflowing_envelope_is_flagged() {
        let env = EnvelopeSet::zero().with(Label::P, EnvelopeFn::new("100", |_| 100.0));
        let b = envelope_bounds(&env, 1.0, 1.0, 0.0, 20.0).unwrap();
        assert!(b.overflow && b.bound1.is_infinite());
    }

    #[test]
    fn majorants_dominate_along_harmonic() {
        let sys = harmonic().with_fn(Label::S, |_, u, _| -0.1 * u * u);
        let env = EnvelopeSet::zero().with_const(Label::Q, 1.0).with_const(Label::R, 1.0);
        let traj = integrate(&sys, 1.0, -0.5, (0.0, 3.0), &Default::default()).unwrap();
        let d = compute_volterra_data(&traj, &sys).unwrap();
        let maj = envelope_majorants(&env, 1.0, -0.5, d.nodes()).unwrap();
        for i in 0..d.nodes().len() {
            assert!(d.v1[i].abs() <= maj.v1[i] + 1e-12);
            assert!(d.v2[i].abs() <= maj.v2[i] + 1e-12);
            let (a, b) = (d.kernel_row(Component::Phi, i).unwrap(), maj.kernel_row(Component::Phi, i).unwrap());
            assert!(a.iter().zip(&b).all(|(x, y)| x.abs() <= y + 1e-12));
        }
    }
}
