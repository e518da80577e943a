//! The `pseudolin` command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{value_parser, Arg, ArgMatches, Command};

use crate::config::{parse_box, Config, ResolvedSystem, RunOptions, SystemSpec};
use crate::corpus::{corpus_get, corpus_names};
use crate::criteria::{certify_t31, certify_t32, compute_kl_curves, Certificate, SamplingPlan, Verdict, DEFAULT_EPS};
use crate::envelope::EnvelopeSet;
use crate::error::Error;
use crate::integrator::{integrate, IntegrationConfig, Status, Trajectory};
use crate::quadrature::{fmt17, uniform_grid};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "PSEUDOLIN_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;

const DEFAULT_SPAN: f64 = 10.0;
const KL_INTERVALS: usize = 1024;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Every parameter name used by some corpus entry.
fn param_names() -> Vec<&'static str> {
    let mut names = BTreeSet::new();
    for entry in corpus_names() {
        let e = corpus_get(entry, &[]).expect("registered entry");
        names.extend(e.param_specs.iter().map(|p| p.name));
    }
    names.into_iter().collect()
}

fn num_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("X").value_parser(value_parser!(f64)).allow_negative_numbers(true).help(help)
}

fn system_args(cmd: Command) -> Command {
    let mut cmd = cmd
        .arg(Arg::new("system").long("system").value_name("NAME").help("corpus entry"))
        .arg(Arg::new("config").long("config").value_name("FILE").help("INI file with [system], [envelopes], [run]"))
        .arg(num_arg("phi0", "initial phi"))
        .arg(num_arg("psi0", "initial psi"))
        .arg(num_arg("T", "horizon (default t0 + 10)"))
        .arg(num_arg("rtol", "relative tolerance"))
        .arg(num_arg("atol", "absolute tolerance"))
        .arg(Arg::new("out").long("out").value_name("DIR").help("output directory (default .)"));
    for name in param_names() {
        cmd = cmd.arg(num_arg(name, "corpus parameter").hide(true));
    }
    cmd
}

fn sampling_args(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("seed")
            .long("seed")
            .value_name("N")
            .value_parser(value_parser!(u64))
            .help(format!("sampling seed (overridden by {SEED_ENV})")),
    )
    .arg(
        Arg::new("t-nodes")
            .long("t-nodes")
            .value_name("N")
            .value_parser(value_parser!(usize))
            .help("time nodes sampled (default 64)"),
    )
    .arg(
        Arg::new("uv-samples")
            .long("uv-samples")
            .value_name("N")
            .value_parser(value_parser!(usize))
            .help("state samples per time node (default 256)"),
    )
}

fn cone_args(cmd: Command) -> Command {
    cmd.arg(num_arg("c1", "initial phi > 0 (default: entry's initial value)"))
        .arg(num_arg("c2", "initial psi > 0 (default: entry's initial value)"))
}

pub fn command() -> Command {
    Command::new("pseudolin")
        .about("Global solvability certificates for 2D pseudo-linear ODE systems")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(Command::new("corpus-list").about("list corpus entries"))
        .subcommand(
            Command::new("corpus-info")
                .about("show an entry's equation and parameters")
                .arg(Arg::new("system").long("system").value_name("NAME").required(true)),
        )
        .subcommand(system_args(Command::new("integrate").about("integrate and write trajectory.csv")))
        .subcommand(
            sampling_args(system_args(Command::new("certify-t31").about("envelope criterion"))).arg(
                Arg::new("box")
                    .long("box")
                    .value_name("UMIN,UMAX,VMIN,VMAX")
                    .allow_hyphen_values(true)
                    .help("state sampling box (default -10,10,-10,10)"),
            ),
        )
        .subcommand(
            cone_args(sampling_args(system_args(Command::new("certify-t32").about("bound-curve criterion"))))
                .arg(num_arg("eps", "box margin (default 0.1)")),
        )
        .subcommand(cone_args(system_args(Command::new("kl-curves").about("write K.csv and L.csv"))))
}

/// Runs the CLI on `args` (including the program name); returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
                _ => {
                    let msg = e.to_string();
                    let line = msg.lines().next().unwrap_or("error: invalid usage");
                    let _ = writeln!(err, "{line}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&matches, out) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn dispatch(m: &ArgMatches, out: &mut dyn Write) -> CliResult<i32> {
    match m.subcommand() {
        Some(("corpus-list", _)) => corpus_list(out),
        Some(("corpus-info", sub)) => corpus_info(sub, out),
        Some(("integrate", sub)) => cmd_integrate(&Setup::new(sub)?, out),
        Some(("certify-t31", sub)) => cmd_t31(&Setup::new(sub)?, out),
        Some(("certify-t32", sub)) => cmd_t32(&Setup::new(sub)?, out),
        Some(("kl-curves", sub)) => cmd_kl(&Setup::new(sub)?, out),
        _ => Err(CliError::Usage("unknown command".into())),
    }
}

fn corpus_list(out: &mut dyn Write) -> CliResult<i32> {
    for name in corpus_names() {
        let e = corpus_get(name, &[])?;
        writeln!(out, "{:<24} {}", name, e.equation)?;
    }
    Ok(EXIT_OK)
}

fn corpus_info(m: &ArgMatches, out: &mut dyn Write) -> CliResult<i32> {
    let name = m.get_one::<String>("system").expect("required");
    let e = corpus_get(name, &[])?;
    writeln!(out, "name      {}", e.name)?;
    writeln!(out, "equation  {}", e.equation)?;
    writeln!(out, "initial   phi0={} psi0={}", e.initial.0, e.initial.1)?;
    writeln!(
        out,
        "envelopes {}",
        if e.default_envelopes().is_some() { "built in" } else { "none (supply via --config)" }
    )?;
    writeln!(out, "parameters")?;
    for p in e.param_specs {
        writeln!(out, "  --{:<10} {:>8}  {}", p.name, p.default, p.doc)?;
    }
    Ok(EXIT_OK)
}

/// Everything a run command needs, after merging flags and config.
struct Setup {
    resolved: ResolvedSystem,
    envelopes: Option<EnvelopeSet>,
    opts: RunOptions,
    system_name: String,
    out_dir: PathBuf,
    cfg: IntegrationConfig,
}

fn flag_f64(m: &ArgMatches, name: &str) -> Option<f64> {
    m.try_get_one::<f64>(name).ok().flatten().copied()
}

fn flag_usize(m: &ArgMatches, name: &str) -> Option<usize> {
    m.try_get_one::<usize>(name).ok().flatten().copied()
}

impl Setup {
    fn new(m: &ArgMatches) -> CliResult<Self> {
        let config = match m.get_one::<String>("config") {
            Some(path) => Some(Config::load(Path::new(path))?),
            None => None,
        };
        let flag_params: Vec<(String, f64)> =
            param_names().into_iter().filter_map(|p| flag_f64(m, p).map(|x| (p.to_string(), x))).collect();

        let spec = match (m.get_one::<String>("system"), config.as_ref().and_then(|c| c.system.clone())) {
            (Some(name), _) => SystemSpec::Corpus { name: name.clone(), params: flag_params },
            (None, Some(SystemSpec::Corpus { name, mut params })) => {
                for (k, v) in flag_params {
                    params.retain(|(p, _)| *p != k);
                    params.push((k, v));
                }
                SystemSpec::Corpus { name, params }
            }
            (None, Some(custom)) => {
                if let Some((k, _)) = flag_params.first() {
                    return Err(CliError::Usage(format!("--{k} applies to corpus entries only")));
                }
                custom
            }
            (None, None) => return Err(CliError::Usage("missing --system (or a --config with [system])".into())),
        };
        let system_name = match &spec {
            SystemSpec::Corpus { name, .. } => name.clone(),
            SystemSpec::Custom { .. } => "custom".into(),
        };
        let resolved = spec.resolve()?;
        let envelopes = match &config {
            Some(c) => c.apply_envelopes(resolved.envelopes.clone()),
            None => resolved.envelopes.clone(),
        };

        let base = config.map(|c| c.run).unwrap_or_default();
        let seed = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?,
            ),
            Err(_) => m.try_get_one::<u64>("seed").ok().flatten().copied().or(base.seed),
        };
        let uv_box = match m.try_get_one::<String>("box").ok().flatten() {
            Some(s) => Some(parse_box(s)?),
            None => base.uv_box,
        };
        let opts = RunOptions {
            phi0: flag_f64(m, "phi0").or(base.phi0),
            psi0: flag_f64(m, "psi0").or(base.psi0),
            t_end: flag_f64(m, "T").or(base.t_end),
            rtol: flag_f64(m, "rtol").or(base.rtol),
            atol: flag_f64(m, "atol").or(base.atol),
            seed,
            c1: flag_f64(m, "c1").or(base.c1),
            c2: flag_f64(m, "c2").or(base.c2),
            eps: flag_f64(m, "eps").or(base.eps),
            t_nodes: flag_usize(m, "t-nodes").or(base.t_nodes),
            uv_samples: flag_usize(m, "uv-samples").or(base.uv_samples),
            uv_box,
            out: m.get_one::<String>("out").cloned().or(base.out),
        };
        let mut cfg = IntegrationConfig::default();
        cfg.rtol = opts.rtol.unwrap_or(cfg.rtol);
        cfg.atol = opts.atol.unwrap_or(cfg.atol);
        cfg.validate()?;
        let out_dir = PathBuf::from(opts.out.clone().unwrap_or_else(|| ".".into()));
        Ok(Self { resolved, envelopes, opts, system_name, out_dir, cfg })
    }

    fn t0(&self) -> f64 {
        self.resolved.system.t0
    }

    fn t_end(&self) -> CliResult<f64> {
        let t = self.opts.t_end.unwrap_or(self.t0() + DEFAULT_SPAN);
        if !(t > self.t0()) {
            return Err(CliError::Usage(format!("--T {t} must exceed t0 = {}", self.t0())));
        }
        Ok(t)
    }

    fn initial(&self) -> (f64, f64) {
        let (a, b) = self.resolved.initial;
        (self.opts.phi0.unwrap_or(a), self.opts.psi0.unwrap_or(b))
    }

    fn cone_initial(&self) -> (f64, f64) {
        let (a, b) = self.initial();
        (self.opts.c1.unwrap_or(a), self.opts.c2.unwrap_or(b))
    }

    fn plan(&self) -> SamplingPlan {
        let d = SamplingPlan::default();
        SamplingPlan {
            t_nodes: self.opts.t_nodes.unwrap_or(d.t_nodes),
            uv_box: self.opts.uv_box.unwrap_or(d.uv_box),
            uv_samples: self.opts.uv_samples.unwrap_or(d.uv_samples),
            rng_seed: self.opts.seed.unwrap_or(d.rng_seed),
            retained: Vec::new(),
        }
    }

    fn envelopes(&self) -> CliResult<&EnvelopeSet> {
        self.envelopes.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "`{}` has no built-in envelopes for these parameters; supply [envelopes] via --config",
                self.system_name
            ))
        })
    }

    fn create(&self, file: &str) -> CliResult<BufWriter<File>> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(BufWriter::new(File::create(self.out_dir.join(file))?))
    }

    fn write_trajectory(&self, traj: &Trajectory) -> CliResult<()> {
        let mut w = self.create("trajectory.csv")?;
        traj.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn write_text(&self, file: &str, text: &str) -> CliResult<()> {
        let mut w = self.create(file)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn write_certificate(&self, cert: &Certificate, out: &mut dyn Write) -> CliResult<i32> {
        self.write_trajectory(&cert.trajectory)?;
        if let Some((k, l)) = &cert.curves {
            let mut w = self.create("K.csv")?;
            k.write_csv(&mut w)?;
            w.flush()?;
            let mut w = self.create("L.csv")?;
            l.write_csv(&mut w)?;
            w.flush()?;
        }
        let text = format!("system      {}\n{}", self.system_name, cert.to_text());
        self.write_text("certificate.txt", &text)?;
        self.write_text("certificate.kv", &format!("system={}\n{}", self.system_name, cert.to_kv()))?;
        out.write_all(text.as_bytes())?;
        Ok(verdict_code(&cert.verdict))
    }
}

fn verdict_code(v: &Verdict) -> i32 {
    if v.is_certified() {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIED
    }
}

fn cmd_integrate(s: &Setup, out: &mut dyn Write) -> CliResult<i32> {
    let (phi0, psi0) = s.initial();
    let traj = integrate(&s.resolved.system, phi0, psi0, (s.t0(), s.t_end()?), &s.cfg)?;
    s.write_trajectory(&traj)?;
    let last = traj.len() - 1;
    writeln!(out, "system   {}", s.system_name)?;
    writeln!(out, "status   {}", traj.status().name())?;
    match traj.status() {
        Status::Completed => {}
        Status::BlewUp { t_blow } => writeln!(out, "t_blow   {}", fmt17(t_blow))?,
        Status::ToleranceFailure { t_fail } => writeln!(out, "t_fail   {}", fmt17(t_fail))?,
    }
    writeln!(out, "nodes    {}", traj.len())?;
    writeln!(
        out,
        "final    t={} phi={} psi={}",
        fmt17(traj.t_end()),
        fmt17(traj.phi()[last]),
        fmt17(traj.psi()[last])
    )?;
    Ok(if traj.is_completed() { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

fn cmd_t31(s: &Setup, out: &mut dyn Write) -> CliResult<i32> {
    let (phi0, psi0) = s.initial();
    let cert = certify_t31(&s.resolved.system, s.envelopes()?, phi0, psi0, s.t_end()?, &s.plan(), &s.cfg)?;
    s.write_certificate(&cert, out)
}

fn cmd_t32(s: &Setup, out: &mut dyn Write) -> CliResult<i32> {
    let (c1, c2) = s.cone_initial();
    let eps = s.opts.eps.unwrap_or(DEFAULT_EPS);
    let cert = certify_t32(&s.resolved.system, s.envelopes()?, c1, c2, eps, s.t_end()?, &s.plan(), &s.cfg)?;
    s.write_certificate(&cert, out)
}

fn cmd_kl(s: &Setup, out: &mut dyn Write) -> CliResult<i32> {
    let (c1, c2) = s.cone_initial();
    let t_end = s.t_end()?;
    let grid = uniform_grid(s.t0(), t_end, KL_INTERVALS);
    let (k, l) = compute_kl_curves(s.envelopes()?, c1, c2, &grid)?;
    let mut w = s.create("K.csv")?;
    k.write_csv(&mut w)?;
    w.flush()?;
    let mut w = s.create("L.csv")?;
    l.write_csv(&mut w)?;
    w.flush()?;
    writeln!(out, "system   {}", s.system_name)?;
    writeln!(out, "K(T)     {}", fmt17(*k.values.last().unwrap()))?;
    writeln!(out, "L(T)     {}", fmt17(*l.values.last().unwrap()))?;
    if let Some(t) = k.overflow_at().into_iter().chain(l.overflow_at()).reduce(f64::min) {
        writeln!(out, "overflow at t={}", fmt17(t))?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["pseudolin"];
        argv.extend_from_slice(args);
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn lists_fourteen_entries() {
        let (code, out, _) = run(&["corpus-list"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 14);
    }

    #[test]
    fn unknown_flag_is_one_line() {
        let (code, _, err) = run(&["integrate", "--system", "rayleigh", "--bogus", "1"]);
        assert_eq!(code, 1);
        assert_eq!(err.lines().count(), 1);
        assert!(err.contains("--bogus"), "{err}");
    }

    #[test]
    fn foreign_parameter_rejected() {
        let (code, _, err) = run(&["integrate", "--system", "rayleigh", "--rho", "1"]);
        assert_eq!(code, 1);
        assert!(err.contains("rho"), "{err}");
    }

    #[test]
    fn missing_envelopes_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run(&["certify-t31", "--system", "rayleigh", "--out", dir.path().to_str().unwrap()]);
        // rayleigh has envelopes for eps >= 0
        assert_eq!(code, 0, "{err}");
        let (code, _, err) = run(&["certify-t31", "--system", "duffing", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("--config"), "{err}");
    }

    #[test]
    fn info_lists_parameters() {
        let (code, out, _) = run(&["corpus-info", "--system", "emden-fowler"]);
        assert_eq!(code, 0);
        for p in ["--rho", "--sigma", "--n", "--t0"] {
            assert!(out.contains(p), "{out}");
        }
    }
}
