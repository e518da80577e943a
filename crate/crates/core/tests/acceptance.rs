//! Acceptance suite: one PASS/FAIL line per criterion at the stated
//! tolerances. Exits non-zero when any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pseudolin::corpus::{
    corpus_get, corpus_names, emden_fowler_condition_check, emden_fowler_l_closed_form, EmdenFowlerParams,
};
use pseudolin::criteria::{certify_t31, certify_t32, compute_kl_curves, BoundReport, SamplingPlan, Verdict};
use pseudolin::envelope::EnvelopeSet;
use pseudolin::integrator::{integrate, IntegrationConfig, Status};
use pseudolin::quadrature::{cumulative_integral, uniform_grid, GridFunction};
use pseudolin::riccati::{linear_form_check, nonnegative_prefix, reconstruct_solution, solve_riccati, RiccatiKind};
use pseudolin::system::PseudoLinearSystem;
use pseudolin::volterra::{compute_volterra_data, envelope_bounds, volterra_residual};
use pseudolin::Label;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn harmonic() -> PseudoLinearSystem {
    PseudoLinearSystem::zero(0.0).with_const(Label::Q, 1.0).with_const(Label::R, -1.0)
}

fn ef_default() -> EmdenFowlerParams {
    EmdenFowlerParams::new(0.0, -3.0, 2.0, 1.0).unwrap()
}

fn c1_vdp_parametric() -> Outcome {
    let entry = corpus_get("vdp-parametric", &[("epsilon", 0.1), ("beta", 0.2)]).unwrap();
    let (sys, env) = (entry.system(), entry.default_envelopes().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let start = Instant::now();
    let mut bad = Vec::new();
    for _ in 0..10 {
        let (phi0, psi0) = (rng.gen_range(-5.0..=5.0), rng.gen_range(-5.0..=5.0));
        let c = certify_t31(&sys, &env, phi0, psi0, 50.0, &SamplingPlan::default(), &Default::default()).unwrap();
        if !c.verdict.is_certified() {
            bad.push(format!("({phi0:.3},{psi0:.3}) {}", c.verdict.name()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 10.0,
        format!("10 initial values, {} not certified {bad:?}, {secs:.2}s", bad.len()),
    )
}

fn t32_ratios(c: &pseudolin::criteria::Certificate) -> (f64, f64) {
    match c.bounds {
        BoundReport::T32 { max_ratio_phi, max_ratio_psi, .. } => (max_ratio_phi, max_ratio_psi),
        _ => unreachable!(),
    }
}

fn c2_emden_fowler_t32() -> Outcome {
    let start = Instant::now();
    let p = ef_default();
    let plan = SamplingPlan::default();
    let c = certify_t32(&p.system(), &p.envelopes(), 0.5, 0.9, 0.1, 10.0, &plan, &Default::default()).unwrap();
    let (rp, rq) = t32_ratios(&c);
    let main_ok = c.verdict.is_certified() && rp <= 1.0 + 1e-6 && rq <= 1.0 + 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut certified = 0;
    let mut first_failure = None;
    let mut tried = 0;
    while tried < 20 {
        let rho = rng.gen_range(-1.0..0.9);
        let sigma = rng.gen_range(rho - 4.0..rho - 2.1);
        let c2 = rng.gen_range(0.05..0.95);
        let c1 = c2 * rng.gen_range(0.05..1.0) / (1.0 - rho);
        let q = EmdenFowlerParams::new(rho, sigma, 2.0, 1.0).unwrap();
        if !emden_fowler_condition_check(&q, c1, c2).cond1 {
            continue;
        }
        tried += 1;
        let cert = certify_t32(&q.system(), &q.envelopes(), c1, c2, 0.1, 10.0, &plan, &Default::default()).unwrap();
        if cert.verdict.is_certified() {
            certified += 1;
        } else if first_failure.is_none() {
            first_failure = Some(format!("rho={rho:.3} sigma={sigma:.3}: {}", cert.verdict.name()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        main_ok && certified == 20 && secs < 60.0,
        format!(
            "default: {} (max phi/K={rp:.4}, max psi/L={rq:.4}); sweep {certified}/20 certified{}; {secs:.2}s",
            c.verdict.name(),
            first_failure.map(|f| format!(", e.g. {f}")).unwrap_or_default()
        ),
    )
}

fn max_rel_l_error(p: &EmdenFowlerParams, c1: f64, c2: f64) -> f64 {
    let grid = uniform_grid(p.t0, 10.0, 4096);
    let (_, l) = compute_kl_curves(&p.envelopes(), c1, c2, &grid).unwrap();
    grid.iter()
        .zip(&l.values)
        .map(|(&t, v)| {
            let exact = emden_fowler_l_closed_form(t, c1, c2, p).unwrap();
            (v - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

fn c3_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 10 {
        let rho: f64 = rng.gen_range(-1.0..2.0);
        let sigma: f64 = rng.gen_range(-4.0..-1.2);
        if (rho - 1.0).abs() < 0.05 || (2.0 + sigma - rho).abs() < 0.05 {
            continue;
        }
        let (c1, c2) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        worst = worst.max(max_rel_l_error(&EmdenFowlerParams::new(rho, sigma, 2.0, 1.0).unwrap(), c1, c2));
        n += 1;
    }
    let mut worst_one = 0.0f64;
    for _ in 0..5 {
        let sigma = rng.gen_range(-4.0..-1.2);
        let (c1, c2) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        worst_one = worst_one.max(max_rel_l_error(&EmdenFowlerParams::new(1.0, sigma, 2.0, 1.0).unwrap(), c1, c2));
    }
    outcome(
        worst <= 1e-8 && worst_one <= 1e-7,
        format!("rho != 1: max rel err {worst:.2e} (10 sets); rho = 1: {worst_one:.2e} (5 sets)"),
    )
}

fn riccati_case(sys: &PseudoLinearSystem, phi0: f64, psi0: f64, t_end: f64) -> (f64, f64) {
    let traj = integrate(sys, phi0, psi0, (sys.t0, t_end), &IntegrationConfig::default().with_tolerances(1e-11, 1e-13))
        .unwrap();
    let mut rec = 0.0f64;
    let mut lin = 0.0f64;
    for (kind, init) in [(RiccatiKind::Y, psi0 / phi0), (RiccatiKind::Z, phi0 / psi0)] {
        let trace = solve_riccati(&traj, sys, kind, init, &Default::default()).unwrap();
        let r = reconstruct_solution(&traj, &trace, sys).unwrap();
        let (a, b) = r.relative_deviation(&traj).unwrap();
        rec = rec.max(a).max(b);
        lin = lin.max(linear_form_check(&trace, &traj, sys).unwrap().max_rel_dev);
    }
    (rec, lin)
}

fn c4_riccati_identity() -> Outcome {
    let (r1, l1) = riccati_case(&harmonic(), 0.3f64.cos(), -0.3f64.sin(), 1.0);
    let (r2, l2) = riccati_case(&ef_default().system(), 0.5, 0.9, 3.0);
    let rec = r1.max(r2);
    let lin = l1.max(l2);
    outcome(
        rec <= 1e-6 && lin <= 1e-6,
        format!("reconstruction {rec:.2e} (harmonic {r1:.1e}, EF {r2:.1e}); linear form {lin:.2e}"),
    )
}

fn c5_nonnegative_traces() -> Outcome {
    let cases: [(&str, &[(&str, f64)], (f64, f64)); 5] = [
        ("emden-fowler", &[], (0.5, 0.9)),
        ("duffing", &[("alpha", -1.0), ("beta", 1.0)], (0.5, 0.0)),
        ("pendulum-light", &[], (0.5, 0.0)),
        ("vdp-parametric", &[("beta", -2.0)], (1.0, 0.5)),
        ("vdp-mathieu", &[("h", -2.0)], (1.0, 0.5)),
    ];
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, params, (phi0, psi0)) in cases {
        let entry = corpus_get(name, params).unwrap();
        let sys = entry.system();
        let t0 = sys.t0;
        let traj = integrate(&sys, phi0, psi0, (t0, t0 + 10.0), &Default::default()).unwrap();
        let Some(t1) = nonnegative_prefix(&traj, &sys).unwrap().filter(|&t1| t1 > t0 + 0.1) else {
            ok = false;
            notes.push(format!("{name}: no Q,R >= 0 prefix"));
            continue;
        };
        let traj = traj.truncated(t1);
        for gamma in [0.0, 0.5, 1.0] {
            for kind in [RiccatiKind::Y, RiccatiKind::Z] {
                let trace = solve_riccati(&traj, &sys, kind, gamma, &Default::default()).unwrap();
                worst = worst.min(trace.min_value());
            }
        }
        notes.push(format!("{name} [{t0}, {t1:.2}]"));
    }
    outcome(ok && worst >= -1e-9, format!("min trace value {worst:.2e} over {}", notes.join(", ")))
}

fn c6_volterra() -> Outcome {
    let vdp = corpus_get("vdp-parametric", &[]).unwrap();
    let ef = ef_default();
    let runs: [(&str, PseudoLinearSystem, (f64, f64), f64); 3] = [
        ("harmonic", harmonic(), (1.0, 0.0), 10.0),
        ("vdp", vdp.system(), (2.0, 0.0), 10.0),
        ("emden-fowler", ef.system(), (0.5, 0.9), 3.0),
    ];
    let mut worst = 0.0f64;
    for (_, sys, (a, b), t_end) in &runs {
        let traj = integrate(sys, *a, *b, (sys.t0, *t_end), &Default::default()).unwrap();
        let data = compute_volterra_data(&traj, sys).unwrap();
        let (r1, r2) = volterra_residual(&traj, &data).unwrap();
        worst = worst.max(r1).max(r2);
    }

    let bound_cases: [(PseudoLinearSystem, EnvelopeSet, (f64, f64)); 2] = [
        (harmonic(), EnvelopeSet::zero().with_const(Label::Q, 1.0).with_const(Label::R, 1.0), (1.0, 0.0)),
        (vdp.system(), vdp.default_envelopes().unwrap(), (2.0, 0.0)),
    ];
    let mut bound_ok = true;
    let mut ratio = 0.0f64;
    for (sys, env, (a, b)) in &bound_cases {
        let c = certify_t31(sys, env, *a, *b, 10.0, &SamplingPlan::default(), &Default::default()).unwrap();
        if c.hypotheses.falsified() {
            continue;
        }
        let bound = envelope_bounds(env, *a, *b, 0.0, 10.0).unwrap();
        let r1 = c.trajectory.max_abs_phi().ln() - bound.log_bound1;
        let r2 = c.trajectory.max_abs_psi().ln() - bound.log_bound2;
        ratio = ratio.max(r1.exp()).max(r2.exp());
        bound_ok &= r1 <= 1e-6 && r2 <= 1e-6;
    }
    outcome(worst <= 1e-5 && bound_ok, format!("max residual {worst:.2e}; max sup-norm/bound {ratio:.3e}"))
}

fn c7_blow_up() -> Outcome {
    let sys = PseudoLinearSystem::zero(0.0).with_fn(Label::P, |_, u, _| u);
    let mut worst = 0.0f64;
    let mut statuses_ok = true;
    for phi0 in [0.5, 1.0, 2.0] {
        let traj = integrate(&sys, phi0, 0.0, (0.0, 2.0 / phi0), &Default::default()).unwrap();
        match traj.status() {
            Status::BlewUp { t_blow } => worst = worst.max((t_blow - 1.0 / phi0).abs()),
            _ => statuses_ok = false,
        }
    }
    let plan = SamplingPlan::default();
    let dishonest = EnvelopeSet::zero().with_const(Label::P, 1.0);
    let v1 = certify_t31(&sys, &dishonest, 1.0, 0.0, 2.0, &plan, &Default::default()).unwrap().verdict;
    let loose = EnvelopeSet::zero().with_const(Label::P, 100.0);
    let v2 = certify_t31(&sys, &loose, 1.0, 0.0, 2.0, &plan, &Default::default()).unwrap().verdict;
    let falsified = matches!(v1, Verdict::HypothesisFalsified { .. });
    outcome(
        statuses_ok && worst <= 1e-3 && falsified && !v2.is_certified(),
        format!("max |t_blow - 1/phi0| = {worst:.2e}; P0=1: {}; P0=100 on the default box: {}", v1.name(), v2.name()),
    )
}

fn quadrature_order() -> f64 {
    let f = |t: f64| t.exp() * (3.0 * t).cos();
    let exact = |t: f64| t.exp() * ((3.0 * t).cos() + 3.0 * (3.0 * t).sin()) / 10.0;
    let (a, b) = (0.0, 2.0);
    let mut pts = Vec::new();
    for n in [16, 32, 64, 128, 256] {
        let g = GridFunction::from_fn(uniform_grid(a, b, n), f).unwrap();
        let err = (cumulative_integral(&g).unwrap().last() - (exact(b) - exact(a))).abs();
        pts.push((((b - a) / n as f64).ln(), err.ln()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

fn self_convergence() -> (usize, Vec<String>) {
    let coarse = IntegrationConfig::default();
    let fine = coarse.with_tolerances(coarse.rtol / 2.0, coarse.atol / 2.0);
    let mut failures = Vec::new();
    let names = corpus_names();
    for name in &names {
        let e = corpus_get(name, &[]).unwrap();
        let sys = e.system();
        let span = (sys.t0, sys.t0 + 10.0);
        let a = integrate(&sys, e.initial.0, e.initial.1, span, &coarse).unwrap();
        let b = integrate(&sys, e.initial.0, e.initial.1, span, &fine).unwrap();
        let (pa, pb) = (*a.phi().last().unwrap(), *b.phi().last().unwrap());
        let tol = coarse.rtol * pa.abs().max(1.0) + coarse.atol;
        if !(a.is_completed() && b.is_completed() && (pa - pb).abs() < 10.0 * tol) {
            failures.push(format!("{name}: |dphi|={:.2e} vs {:.2e}", (pa - pb).abs(), 10.0 * tol));
        }
    }
    (names.len(), failures)
}

fn cli_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let bin = env!("CARGO_BIN_EXE_pseudolin");
    let runs: [&[&str]; 3] = [
        &["certify-t31", "--system", "vdp-parametric", "--T", "20"],
        &["certify-t32", "--system", "emden-fowler", "--c1", "0.5", "--c2", "0.9", "--T", "10"],
        &["integrate", "--system", "duffing", "--T", "50"],
    ];
    let mut files = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let out = dir.join(format!("run{i}"));
        let status = Command::new(bin)
            .args(*args)
            .arg("--out")
            .arg(&out)
            .env_remove("PSEUDOLIN_SEED")
            .output()
            .expect("run cli");
        files.push((format!("run{i}.stdout"), status.stdout));
        let mut entries: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            files.push((format!("run{i}/{}", p.file_name().unwrap().to_string_lossy()), fs::read(&p).unwrap()));
        }
    }
    files
}

fn c8_hygiene() -> Outcome {
    let order = quadrature_order();
    let (n, failures) = self_convergence();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, fb) = (cli_outputs(a.path()), cli_outputs(b.path()));
    let identical = fa == fb && fa.len() > 3;
    outcome(
        order >= 3.7 && failures.is_empty() && identical,
        format!(
            "quadrature order {order:.2}; self-convergence {}/{n} entries{}; CLI outputs {} ({} files)",
            n - failures.len(),
            if failures.is_empty() { String::new() } else { format!(" (failed: {})", failures.join("; ")) },
            if identical { "byte-identical" } else { "DIFFER" },
            fa.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 8] = [
        ("1", "vdP parametric envelope certificates", c1_vdp_parametric),
        ("2", "Emden-Fowler bound-curve certificates", c2_emden_fowler_t32),
        ("3", "L curve vs closed form", c3_closed_form),
        ("4", "Riccati reconstruction identity", c4_riccati_identity),
        ("5", "nonnegative Riccati traces", c5_nonnegative_traces),
        ("6", "Volterra identity and a-priori bound", c6_volterra),
        ("7", "blow-up detection", c7_blow_up),
        ("8", "numerical hygiene", c8_hygiene),
    ];
    let mut failed = 0;
    for (id, title, f) in criteria {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !res.pass {
            failed += 1;
        }
        println!(
            "{} criterion {id}: {title}: {} [{:.2}s]",
            if res.pass { "PASS" } else { "FAIL" },
            res.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
