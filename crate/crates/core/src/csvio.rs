//! Shared CSV helpers. Numbers are written with Rust's shortest round-trip
//! formatting, which is locale independent and never exceeds 17 significant
//! digits.

use std::io::Read;

use crate::error::{Error, Result};
use crate::priors::{GaussianMixturePrior, MixtureComponent};

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn parse_header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    Ok(rdr.headers()?.iter().map(str::to_owned).collect())
}

/// Column indices of `wanted` within `header`.
pub(crate) fn require_columns(header: &[String], wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == w)
                .ok_or_else(|| Error::Parse(format!("missing column '{w}'")))
        })
        .collect()
}

pub const MIXTURE_HEADER: [&str; 3] = ["weight", "mean", "sigma"];
pub const GRID_HEADER: [&str; 2] = ["x", "log_density"];

/// Writes one `weight,mean,sigma` row per component.
pub fn write_mixture_csv(mut w: impl std::io::Write, prior: &GaussianMixturePrior) -> Result<()> {
    writeln!(w, "{}", MIXTURE_HEADER.join(","))?;
    let sigma = fmt_f64(prior.sigma());
    for c in prior.components() {
        writeln!(w, "{},{},{}", fmt_f64(c.weight), fmt_f64(c.mean), sigma)?;
    }
    Ok(())
}

/// Weight sums further than this from 1 are rejected; closer ones are
/// renormalised (equal weights written as `1/L` do not sum to 1 exactly).
const MIXTURE_FILE_WEIGHT_TOL: f64 = 1e-9;

pub fn read_mixture_csv(reader: impl Read) -> Result<GaussianMixturePrior> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = parse_header(&mut rdr)?;
    let idx = require_columns(&header, &MIXTURE_HEADER)?;
    let mut components = Vec::new();
    let mut sigma: Option<f64> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| -> Result<f64> {
            rec.get(idx[k])
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {}: bad {}", line + 2, MIXTURE_HEADER[k])))
        };
        let s = get(2)?;
        match sigma {
            None => sigma = Some(s),
            Some(prev) if prev != s => {
                return Err(Error::Parse(format!(
                    "row {}: components must share one sigma ({prev} vs {s})",
                    line + 2
                )))
            }
            _ => {}
        }
        components.push(MixtureComponent {
            weight: get(0)?,
            mean: get(1)?,
        });
    }
    let sigma = sigma.ok_or_else(|| Error::Parse("mixture file has no components".into()))?;
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() <= MIXTURE_FILE_WEIGHT_TOL {
        for c in &mut components {
            c.weight /= total;
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > crate::priors::WEIGHT_SUM_TOL {
            // equal weights that still drift: rebuild as a KDE
            let first = components[0].weight;
            if components.iter().all(|c| c.weight == first) {
                let means: Vec<f64> = components.iter().map(|c| c.mean).collect();
                return crate::priors::kde_from_samples(&means, sigma);
            }
        }
    }
    GaussianMixturePrior::new(components, sigma)
}

/// Reads an `x,log_density` table.
pub fn read_grid_csv(reader: impl Read) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = parse_header(&mut rdr)?;
    let idx = require_columns(&header, &GRID_HEADER)?;
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| -> Result<f64> {
            rec.get(idx[k])
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad {}", line + 2, GRID_HEADER[k])))
        };
        xs.push(get(0)?);
        ls.push(get(1)?);
    }
    Ok((xs, ls))
}
