//! Run configuration: a TOML file with dotted section keys, overridden by
//! `key=value` pairs from the command line, on top of scenario defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scenarios::{
    crookes2d_scenario, default_resolution, plates_scenario, roots_blower_with, EndCondition,
    LobeProfile, Resolution, RootsOptions, ScenarioSpec, SCENARIO_NAMES,
};
use crate::solver::{CflMode, Integrator};

/// Recognised keys, their value type and meaning.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    (
        "scenario.name",
        "string",
        "plates | crookes2d | roots_blower",
    ),
    ("scenario.kn", "float", "Knudsen number (plates)"),
    (
        "scenario.lobe_radius",
        "float",
        "generating-circle radius r in m (roots_blower)",
    ),
    (
        "scenario.lobe_gap",
        "float",
        "minimum lobe and casing clearance in m (roots_blower)",
    ),
    (
        "scenario.lobe_profile",
        "string",
        "standard | printed (roots_blower)",
    ),
    ("grid.nx", "integer", "cells along x"),
    ("grid.ny", "integer", "cells along y"),
    ("grid.nv", "integer", "velocity points per axis"),
    ("solver.integrator", "string", "explicit | semi_implicit"),
    ("solver.cfl", "string", "strict | relaxed"),
    ("solver.cfl_number", "float", "C of the relaxed condition"),
    ("run.steps", "integer", "stop after this many steps"),
    ("run.t_end", "float", "stop once t reaches this time"),
    (
        "run.stationary",
        "bool",
        "stop when the tracked body speed settles",
    ),
    (
        "run.stationary_threshold",
        "float",
        "relative speed change over the window",
    ),
    ("run.stationary_window", "integer", "window length in steps"),
    (
        "run.max_steps",
        "integer",
        "step limit of the stationary and t_end modes",
    ),
    ("run.threads", "integer", "worker threads, 0 for all cores"),
    (
        "run.deterministic",
        "bool",
        "omit wall-clock data from outputs",
    ),
    ("output.dir", "string", "output directory"),
    ("output.every", "integer", "time-series cadence in steps"),
    (
        "output.fields_every",
        "integer",
        "field snapshot cadence in steps, 0 for none",
    ),
    ("output.prefix", "string", "field snapshot file prefix"),
];

/// Flat `dotted.key → value` table.
pub type KeyValues = BTreeMap<String, toml::Value>;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub threads: usize,
    pub deterministic: bool,
    pub output_dir: PathBuf,
    pub fields_every: u64,
    pub prefix: String,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut KeyValues) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

pub fn parse_text(text: &str) -> Result<KeyValues> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    let mut out = KeyValues::new();
    flatten("", &table, &mut out);
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&text)
}

/// Applies a `key=value` override. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(kv: &mut KeyValues, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{item}' is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    kv.insert(key.to_string(), value);
    Ok(())
}

struct Reader<'a>(&'a KeyValues);

impl Reader<'_> {
    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(v) => Err(Error::config(format!("{key}: expected a number, got {v}"))),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if *n >= 0 => Ok(Some(*n as u64)),
            Some(v) => Err(Error::config(format!(
                "{key}: expected a non-negative integer, got {v}"
            ))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(Error::config(format!("{key}: expected a string, got {v}"))),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(Error::config(format!(
                "{key}: expected true or false, got {v}"
            ))),
        }
    }
}

/// Builds the run configuration. Unknown keys are rejected.
pub fn build(kv: &KeyValues) -> Result<RunConfig> {
    if let Some(key) = kv.keys().find(|k| !SCHEMA.iter().any(|(s, _, _)| s == k)) {
        return Err(Error::config(format!("unknown configuration key '{key}'")));
    }
    let r = Reader(kv);
    let name = r
        .string("scenario.name")?
        .ok_or_else(|| Error::config("scenario.name is required"))?;
    let mut res = default_resolution(&name).ok_or_else(|| {
        Error::config(format!(
            "unknown scenario '{name}'; available: {}",
            SCENARIO_NAMES.join(", ")
        ))
    })?;
    let dim =
        |key: &str, dflt: usize| -> Result<usize> { Ok(r.uint(key)?.map_or(dflt, |v| v as usize)) };
    res = Resolution {
        nx: dim("grid.nx", res.nx)?,
        ny: dim("grid.ny", res.ny)?,
        nv: dim("grid.nv", res.nv)?,
    };

    let mut spec = match name.as_str() {
        "plates" => plates_scenario(r.float("scenario.kn")?.unwrap_or(0.5), res)?,
        "crookes2d" => crookes2d_scenario(res)?,
        _ => {
            let mut opts = RootsOptions::default();
            if let Some(x) = r.float("scenario.lobe_radius")? {
                opts.lobe_radius = x;
            }
            if let Some(x) = r.float("scenario.lobe_gap")? {
                opts.gap = x;
            }
            opts.profile = match r.string("scenario.lobe_profile")?.as_deref() {
                None | Some("standard") => LobeProfile::Standard,
                Some("printed") => LobeProfile::Printed,
                Some(other) => {
                    return Err(Error::config(format!(
                        "scenario.lobe_profile: unknown profile '{other}'"
                    )))
                }
            };
            roots_blower_with(res, opts)?
        }
    };
    let scenario_keys = [
        "scenario.kn",
        "scenario.lobe_radius",
        "scenario.lobe_gap",
        "scenario.lobe_profile",
    ];
    let own: &[&str] = match name.as_str() {
        "plates" => &["scenario.kn"],
        "roots_blower" => &scenario_keys[1..],
        _ => &[],
    };
    if let Some(key) = scenario_keys
        .iter()
        .find(|k| kv.contains_key(**k) && !own.contains(k))
    {
        return Err(Error::config(format!(
            "{key} does not apply to scenario '{name}'"
        )));
    }

    match r.string("solver.integrator")?.as_deref() {
        None => {}
        Some("explicit") => spec.solver.integrator = Integrator::Explicit,
        Some("semi_implicit") => spec.solver.integrator = Integrator::SemiImplicit,
        Some(other) => {
            return Err(Error::config(format!(
                "solver.integrator: unknown integrator '{other}'"
            )))
        }
    }
    let c = r.float("solver.cfl_number")?;
    match r.string("solver.cfl")?.as_deref() {
        None => {
            if let (Some(c), CflMode::Relaxed { .. }) = (c, spec.solver.cfl) {
                spec.solver.cfl = CflMode::Relaxed { c };
            }
        }
        Some("strict") => spec.solver.cfl = CflMode::Strict,
        Some("relaxed") => {
            spec.solver.cfl = CflMode::Relaxed {
                c: c.unwrap_or(0.5),
            }
        }
        Some(other) => return Err(Error::config(format!("solver.cfl: unknown mode '{other}'"))),
    }
    if let CflMode::Relaxed { c } = spec.solver.cfl {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::config("solver.cfl_number must lie in (0, 1]"));
        }
    }

    let steps = r.uint("run.steps")?;
    let t_end = r.float("run.t_end")?;
    let stationary = r.boolean("run.stationary")?.unwrap_or(false);
    let max_steps = r.uint("run.max_steps")?.unwrap_or(100_000);
    let active = steps.is_some() as u8 + t_end.is_some() as u8 + stationary as u8;
    if active > 1 {
        return Err(Error::config(
            "set exactly one of run.steps, run.t_end and run.stationary",
        ));
    }
    if let Some(n) = steps {
        spec.end = EndCondition::Steps(n);
    } else if let Some(t) = t_end {
        spec.end = EndCondition::Time(t);
    } else if stationary {
        if spec.tracked_body.is_none() {
            return Err(Error::config(
                "run.stationary needs a scenario with a moving body",
            ));
        }
        spec.end = EndCondition::Stationary {
            threshold: r.float("run.stationary_threshold")?.unwrap_or(1e-5),
            window: r.uint("run.stationary_window")?.unwrap_or(100).max(1),
            max_steps,
        };
    }
    if let Some(every) = r.uint("output.every")? {
        spec.output_every = every.max(1);
    }

    Ok(RunConfig {
        scenario: spec,
        threads: r.uint("run.threads")?.unwrap_or(0) as usize,
        deterministic: r.boolean("run.deterministic")?.unwrap_or(false),
        output_dir: PathBuf::from(r.string("output.dir")?.unwrap_or_else(|| "output".into())),
        fields_every: r.uint("output.fields_every")?.unwrap_or(0),
        prefix: r
            .string("output.prefix")?
            .unwrap_or_else(|| "fields".into()),
    })
}

/// Reads an optional file, applies overrides and builds the configuration.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut kv = match path {
        Some(p) => read_file(p)?,
        None => KeyValues::new(),
    };
    for o in overrides {
        apply_override(&mut kv, o)?;
    }
    build(&kv)
}
