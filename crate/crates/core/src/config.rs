//! INI-style run configuration.
//!
//! ```ini
//! [system]
//! name = duffing        ; a corpus entry, remaining keys are its parameters
//! k = 0.3
//!
//! [envelopes]
//! Q0 = 1
//! R0 = 1 + 0.2*cos(t)
//!
//! [run]
//! phi0 = 1
//! T = 50
//! ```
//!
//! Without `name`, `[system]` lists the fields `P, Q, R, S, F, G` as
//! expressions in `t, u, v` (missing fields are zero) plus an optional `t0`.

use std::path::Path;

use ini::Ini;

use crate::corpus::corpus_get;
use crate::envelope::EnvelopeSet;
use crate::error::{Error, Label, Result};
use crate::expr::Expr;
use crate::system::{CoefficientField, PseudoLinearSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Corpus { name: String, params: Vec<(String, f64)> },
    Custom { fields: Vec<(Label, Expr)>, t0: f64, initial: Option<(f64, f64)> },
}

/// A resolved system with its default envelopes and initial values.
#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub system: PseudoLinearSystem,
    pub envelopes: Option<EnvelopeSet>,
    pub initial: (f64, f64),
}

impl SystemSpec {
    pub fn corpus(name: &str, params: &[(&str, f64)]) -> Self {
        SystemSpec::Corpus { name: name.into(), params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    pub fn resolve(&self) -> Result<ResolvedSystem> {
        match self {
            SystemSpec::Corpus { name, params } => {
                let ps: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                let e = corpus_get(name, &ps)?;
                Ok(ResolvedSystem { system: e.system(), envelopes: e.default_envelopes(), initial: e.initial })
            }
            SystemSpec::Custom { fields, t0, initial } => {
                let mut sys = PseudoLinearSystem::zero(*t0);
                for (label, e) in fields {
                    sys = sys.with(*label, CoefficientField::new(*label, e.to_field()));
                }
                Ok(ResolvedSystem { system: sys, envelopes: None, initial: initial.unwrap_or((1.0, 0.0)) })
            }
        }
    }
}

/// Optional `[run]` values; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub phi0: Option<f64>,
    pub psi0: Option<f64>,
    pub t_end: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub seed: Option<u64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub eps: Option<f64>,
    pub t_nodes: Option<usize>,
    pub uv_samples: Option<usize>,
    pub uv_box: Option<(f64, f64, f64, f64)>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub system: Option<SystemSpec>,
    /// `(key, expression)` with keys `P0 … G0, B1, B2`.
    pub envelopes: Vec<(String, Expr)>,
    pub run: RunOptions,
}

const ENVELOPE_KEYS: [&str; 8] = ["P0", "Q0", "R0", "S0", "F0", "G0", "B1", "B2"];

fn num(section: &str, key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("[{section}] {key} = `{value}` is not a finite number")))
}

fn count<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("[{section}] {key} = `{value}` is not a count")))
}

/// Parses `a,b,c,d` into a sampling box.
pub fn parse_box(s: &str) -> Result<(f64, f64, f64, f64)> {
    let xs: Vec<f64> = s.split(',').map(|x| num("run", "box", x)).collect::<Result<_>>()?;
    match xs[..] {
        [a, b, c, d] => Ok((a, b, c, d)),
        _ => Err(Error::Config(format!("box `{s}` needs four comma-separated numbers"))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Config { system: None, envelopes: Vec::new(), run: RunOptions::default() };
        for (section, props) in ini.iter() {
            match section {
                None if props.is_empty() => {}
                None => return Err(Error::Config("keys outside of a section".into())),
                Some("system") => cfg.system = Some(parse_system(props)?),
                Some("envelopes") => {
                    for (k, v) in props.iter() {
                        if !ENVELOPE_KEYS.contains(&k) {
                            return Err(Error::Config(format!("[envelopes] unknown key `{k}`")));
                        }
                        cfg.envelopes.push((k.to_string(), Expr::parse_time_only(v)?));
                    }
                }
                Some("run") => cfg.run = parse_run(props)?,
                Some(other) => return Err(Error::Config(format!("unknown section [{other}]"))),
            }
        }
        Ok(cfg)
    }

    /// `base` with the configured envelopes substituted.
    pub fn apply_envelopes(&self, base: Option<EnvelopeSet>) -> Option<EnvelopeSet> {
        if self.envelopes.is_empty() {
            return base;
        }
        let mut env = base.unwrap_or_default();
        for (k, e) in &self.envelopes {
            let f = e.to_envelope();
            match k.as_str() {
                "B1" => env.b1 = Some(f),
                "B2" => env.b2 = Some(f),
                _ => {
                    let label = Label::ALL.into_iter().find(|l| l.as_str() == &k[..1]).expect("validated key");
                    env = env.with(label, f);
                }
            }
        }
        Some(env)
    }
}

fn parse_system(props: &ini::Properties) -> Result<SystemSpec> {
    if let Some(name) = props.get("name") {
        let params = props
            .iter()
            .filter(|(k, _)| *k != "name")
            .map(|(k, v)| Ok((k.to_string(), num("system", k, v)?)))
            .collect::<Result<_>>()?;
        return Ok(SystemSpec::Corpus { name: name.trim().to_string(), params });
    }
    let mut fields = Vec::new();
    let mut t0 = 0.0;
    let (mut phi0, mut psi0) = (None, None);
    for (k, v) in props.iter() {
        match k {
            "t0" => t0 = num("system", k, v)?,
            "phi0" => phi0 = Some(num("system", k, v)?),
            "psi0" => psi0 = Some(num("system", k, v)?),
            _ => {
                let label = Label::ALL
                    .into_iter()
                    .find(|l| l.as_str() == k)
                    .ok_or_else(|| Error::Config(format!("[system] unknown key `{k}`")))?;
                fields.push((label, Expr::parse(v)?));
            }
        }
    }
    let initial = match (phi0, psi0) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(0.0), b.unwrap_or(0.0))),
    };
    Ok(SystemSpec::Custom { fields, t0, initial })
}

fn parse_run(props: &ini::Properties) -> Result<RunOptions> {
    let mut r = RunOptions::default();
    for (k, v) in props.iter() {
        let f = || num("run", k, v);
        match k {
            "phi0" => r.phi0 = Some(f()?),
            "psi0" => r.psi0 = Some(f()?),
            "T" => r.t_end = Some(f()?),
            "rtol" => r.rtol = Some(f()?),
            "atol" => r.atol = Some(f()?),
            "c1" => r.c1 = Some(f()?),
            "c2" => r.c2 = Some(f()?),
            "eps" => r.eps = Some(f()?),
            "seed" => r.seed = Some(count("run", k, v)?),
            "t_nodes" => r.t_nodes = Some(count("run", k, v)?),
            "uv_samples" => r.uv_samples = Some(count("run", k, v)?),
            "box" => r.uv_box = Some(parse_box(v)?),
            "out" => r.out = Some(v.trim().to_string()),
            _ => return Err(Error::Config(format!("[run] unknown key `{k}`"))),
        }
    }
    Ok(r)
}
