//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma-separated.
//! Unknown keys are rejected by name. [`RunConfig::to_text`] prints every key
//! so that parse, print, parse is the identity.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrands::parse_spec;
use crate::model::HurstIndex;
use crate::stats::{Experiment, Theorem};

pub const KEYS: [&str; 13] = [
    "h",
    "integrand",
    "theorem",
    "n_list",
    "t_list",
    "replications",
    "refine_m",
    "base_seed",
    "horizon",
    "variance_tol",
    "output_dir",
    "workers",
    "dump_samples",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub dump_samples: bool,
}

fn value_err(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("`{key}`: cannot parse `{value}` as {what}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| value_err(key, v.trim(), what)))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| value_err(key, value, what))
}

fn join<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut get = std::collections::HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey(key.to_string()));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            get.insert(key, value.to_string());
        }
        let required = |k: &str| get.get(k).cloned().ok_or_else(|| Error::Config(format!("missing key `{k}`")));

        let h = HurstIndex::new(parse_one("h", &required("h")?, "a real")?)?;
        let integrand = parse_spec(&required("integrand")?)?;
        let theorem: Theorem = required("theorem")?.parse()?;
        let mut e = Experiment::new(h, integrand, theorem);
        if let Some(v) = get.get("n_list") {
            e.n_list = parse_list("n_list", v, "an integer list")?;
        }
        if let Some(v) = get.get("t_list") {
            e.t_list = parse_list("t_list", v, "a real list")?;
        }
        if let Some(v) = get.get("replications") {
            e.replications = parse_one("replications", v, "an integer")?;
        }
        if let Some(v) = get.get("refine_m") {
            e.refine_m = parse_one("refine_m", v, "an integer")?;
        }
        if let Some(v) = get.get("base_seed") {
            e.base_seed = parse_one("base_seed", v, "an integer")?;
        }
        if let Some(v) = get.get("horizon") {
            e.horizon = parse_one("horizon", v, "a real")?;
        }
        if let Some(v) = get.get("variance_tol") {
            e.variance_tol = parse_one("variance_tol", v, "a real")?;
        }
        let output_dir = get.get("output_dir").map_or_else(|| PathBuf::from("out"), PathBuf::from);
        let workers = match get.get("workers") {
            Some(v) => parse_one("workers", v, "an integer")?,
            None => 1,
        };
        let dump_samples = match get.get("dump_samples") {
            Some(v) => parse_one("dump_samples", v, "true or false")?,
            None => false,
        };
        Ok(RunConfig { experiment: e, output_dir, workers, dump_samples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text with every key.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("h", format!("{:?}", e.h.value()));
        line("integrand", e.integrand.to_string());
        line("theorem", e.theorem.to_string());
        line("n_list", join(&e.n_list));
        line("t_list", join(&e.t_list));
        line("replications", e.replications.to_string());
        line("refine_m", e.refine_m.to_string());
        line("base_seed", e.base_seed.to_string());
        line("horizon", format!("{:?}", e.horizon));
        line("variance_tol", format!("{:?}", e.variance_tol));
        line("output_dir", self.output_dir.display().to_string());
        line("workers", self.workers.to_string());
        line("dump_samples", self.dump_samples.to_string());
        out
    }
}
