//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # four-variant comparison
//! noise_sd = 1
//! c0 = 0.3
//! iterations = 20
//! runs = 20000
//! algorithm = all
//! prior.kind = kde
//! prior.samples_path = roots.txt
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys and repeated keys
//! are errors. Missing keys take the [`Scenario`] defaults. Relative paths are
//! resolved against the directory holding the config file.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::csvio::{read_grid_csv, read_mixture_csv};
use crate::error::{Error, Result};
use crate::experiments::{Algorithm, Scenario, StartMode};
use crate::priors::{
    kde_from_samples, read_samples_file, silverman_bandwidth, GaussianPrior, Prior, TabulatedPrior,
    UniformPrior,
};

/// Which algorithms a `simulate` run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmChoice {
    One(Algorithm),
    /// Both algorithms from both start laws.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithms: AlgorithmChoice,
}

const SCENARIO_KEYS: [&str; 14] = [
    "prior_mean",
    "prior_sd",
    "slope_log_mean",
    "slope_log_sd",
    "s1_log10_low",
    "s1_log10_high",
    "noise_sd",
    "c0",
    "iterations",
    "runs",
    "batches",
    "start_mode",
    "algorithm",
    "seed",
];

const PRIOR_KEYS: [&str; 8] = [
    "prior.kind",
    "prior.mu",
    "prior.sigma",
    "prior.samples_path",
    "prior.bandwidth",
    "prior.mixture_path",
    "prior.grid_path",
    "prior.J",
];

fn kind_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "gaussian" => &["prior.mu", "prior.sigma"],
        "mixture" => &["prior.mixture_path"],
        "kde" => &["prior.samples_path", "prior.bandwidth"],
        "uniform" => &[],
        "tabulated" => &["prior.grid_path", "prior.J"],
        _ => return None,
    })
}

fn parse_pairs(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !SCENARIO_KEYS.contains(&k) && !PRIOR_KEYS.contains(&k) {
            return Err(Error::Parse(format!("line {}: unknown key '{k}'", n + 1)));
        }
        if v.is_empty() {
            return Err(Error::Parse(format!("line {}: empty value for '{k}'", n + 1)));
        }
        if map.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key '{k}'", n + 1)));
        }
    }
    Ok(map)
}

fn take<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad value '{v}' for '{key}'")))
        })
        .transpose()
}

fn set<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str, slot: &mut T) -> Result<()> {
    if let Some(v) = take(map, key)? {
        *slot = v;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are taken from `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let mut sc = Scenario::default();
        set(&map, "prior_mean", &mut sc.prior_mean)?;
        set(&map, "prior_sd", &mut sc.prior_sd)?;
        set(&map, "slope_log_mean", &mut sc.slope_log_mean)?;
        set(&map, "slope_log_sd", &mut sc.slope_log_sd)?;
        set(&map, "s1_log10_low", &mut sc.s1_log10_low)?;
        set(&map, "s1_log10_high", &mut sc.s1_log10_high)?;
        set(&map, "noise_sd", &mut sc.noise_sd)?;
        set(&map, "c0", &mut sc.c0)?;
        set(&map, "iterations", &mut sc.iterations)?;
        set(&map, "runs", &mut sc.runs)?;
        set(&map, "batches", &mut sc.batches)?;
        set(&map, "seed", &mut sc.seed)?;
        if let Some(v) = map.get("start_mode") {
            sc.start_mode = v.parse::<StartMode>()?;
        }
        let algorithms = match map.get("algorithm").map(String::as_str) {
            None | Some("all") => AlgorithmChoice::All,
            Some(v) => {
                let alg = v.parse::<Algorithm>()?;
                sc.algorithm = alg;
                AlgorithmChoice::One(alg)
            }
        };
        sc.prior = parse_prior(&map, &sc, base_dir)?;
        sc.validate()?;
        Ok(Self {
            scenario: sc,
            algorithms,
        })
    }
}

fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

fn required(map: &HashMap<String, String>, key: &str, kind: &str) -> Result<String> {
    map.get(key)
        .cloned()
        .ok_or_else(|| Error::Parse(format!("prior.kind = {kind} needs '{key}'")))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_prior(map: &HashMap<String, String>, sc: &Scenario, base_dir: &Path) -> Result<Option<Prior>> {
    let kind = match map.get("prior.kind") {
        Some(k) => k.as_str(),
        None => {
            if let Some(k) = PRIOR_KEYS.iter().find(|k| map.contains_key(**k)) {
                return Err(Error::Parse(format!("'{k}' given without prior.kind")));
            }
            return Ok(None);
        }
    };
    let allowed = kind_keys(kind).ok_or_else(|| {
        Error::Parse(format!(
            "unknown prior.kind '{kind}' (gaussian|mixture|kde|uniform|tabulated)"
        ))
    })?;
    for k in PRIOR_KEYS.iter().skip(1) {
        if map.contains_key(*k) && !allowed.contains(k) {
            return Err(Error::Parse(format!("'{k}' does not apply to prior.kind = {kind}")));
        }
    }
    let prior = match kind {
        "gaussian" => {
            let mu = take(map, "prior.mu")?.unwrap_or(sc.prior_mean);
            let sigma = take(map, "prior.sigma")?.unwrap_or(sc.prior_sd);
            Prior::Gaussian(GaussianPrior::new(mu, sigma)?)
        }
        "mixture" => {
            let path = resolve(base_dir, &required(map, "prior.mixture_path", kind)?);
            Prior::Mixture(read_mixture_csv(open(&path)?)?)
        }
        "kde" => {
            let path = resolve(base_dir, &required(map, "prior.samples_path", kind)?);
            let samples = read_samples_file(&path)?;
            let h = match take(map, "prior.bandwidth")? {
                Some(h) => h,
                None => silverman_bandwidth(&samples)?,
            };
            Prior::Mixture(kde_from_samples(&samples, h)?)
        }
        "uniform" => Prior::Uniform(UniformPrior),
        "tabulated" => {
            let path = resolve(base_dir, &required(map, "prior.grid_path", kind)?);
            let (x, l) = read_grid_csv(open(&path)?)?;
            match take::<f64>(map, "prior.J")? {
                Some(j) => Prior::Tabulated(TabulatedPrior::new(x, l, j)?),
                None => Prior::Tabulated(TabulatedPrior::with_certified_bound(x, l)?),
            }
        }
        _ => unreachable!("kind validated above"),
    };
    Ok(Some(prior))
}
