//! Prior distributions over the location of the root.
//!
//! Every prior exposes its natural-log density, the derivative of that log
//! density, and a bound `J` on `|d/dx ln P(x)|` over its support. The bound is
//! what lets the general posterior argmax confine its search to
//! `[m - J c^2, m + J c^2]` around the Robbins-Monro proposal `m`.

use std::f64::consts::PI;
use std::io::BufRead;
use std::path::Path;

use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Tolerance on the mixture weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Supremum of `|d/dx ln P(x)|` over a prior's support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeBound {
    Finite(f64),
    Unbounded,
}

impl SlopeBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            SlopeBound::Finite(j) => Some(j),
            SlopeBound::Unbounded => None,
        }
    }
}

/// Normal prior `N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    mu: f64,
    sigma: f64,
}

impl GaussianPrior {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return domain(format!("prior mean must be finite, got {mu}"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return domain(format!("prior sd must be positive and finite, got {sigma}"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn sd(&self) -> f64 {
        self.sigma
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - LN_SQRT_2PI
    }

    pub fn log_density_slope(&self, x: f64) -> f64 {
        -(x - self.mu) / (self.sigma * self.sigma)
    }
}

/// One weighted component of a [`GaussianMixturePrior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
}

/// Weighted sum of normals sharing one standard deviation.
///
/// A kernel density estimate with a Gaussian kernel is the special case of
/// equal weights, with `sigma` playing the role of the bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixturePrior {
    components: Vec<MixtureComponent>,
    sigma: f64,
}

impl GaussianMixturePrior {
    pub fn new(components: Vec<MixtureComponent>, sigma: f64) -> Result<Self> {
        if components.is_empty() {
            return domain("mixture needs at least one component");
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return domain(format!("mixture sd must be positive and finite, got {sigma}"));
        }
        for (r, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return domain(format!("component {r} weight {} not in (0, 1]", c.weight));
            }
            if !c.mean.is_finite() {
                return domain(format!("component {r} mean must be finite"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("mixture weights sum to {total}, expected 1"));
        }
        Ok(Self { components, sigma })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Per-component `ln w_r - (x - mu_r)^2 / (2 sigma^2)`, without the shared
    /// normalising constant.
    fn component_exponents(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        let inv_two_var = 0.5 / (self.sigma * self.sigma);
        self.components.iter().map(move |c| {
            let d = x - c.mean;
            c.weight.ln() - d * d * inv_two_var
        })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let max = self
            .component_exponents(x)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self.component_exponents(x).map(|e| (e - max).exp()).sum();
        max + sum.ln() - self.sigma.ln() - LN_SQRT_2PI
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Responsibility-weighted average of the component log-slopes.
    pub fn log_density_slope(&self, x: f64) -> f64 {
        let max = self
            .component_exponents(x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, e) in self.components.iter().zip(self.component_exponents(x)) {
            let r = (e - max).exp();
            num += r * (c.mean - x);
            den += r;
        }
        num / (den * self.sigma * self.sigma)
    }
}

/// Flat, improper prior. Its log density is 0 everywhere by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UniformPrior;

/// Prior given by log-density values on a grid, linearly interpolated in log
/// space (so the density is piecewise exponential and never touches zero).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPrior {
    grid: Vec<f64>,
    log_density: Vec<f64>,
    slope_bound: f64,
}

impl TabulatedPrior {
    /// Builds a tabulated prior with a caller-certified slope bound `j`.
    ///
    /// Every cell's log-density slope must satisfy `|slope| <= j`.
    pub fn new(grid: Vec<f64>, log_density: Vec<f64>, j: f64) -> Result<Self> {
        Self::validate_table(&grid, &log_density)?;
        if !(j.is_finite() && j > 0.0) {
            return domain(format!("slope bound J must be positive and finite, got {j}"));
        }
        let observed = Self::max_cell_slope(&grid, &log_density);
        // relative slack for the rounding in (l1 - l0) / (x1 - x0)
        if observed > j * (1.0 + 1e-12) {
            return domain(format!(
                "tabulated log-density slope reaches {observed}, exceeding the declared J = {j}"
            ));
        }
        Ok(Self {
            grid,
            log_density,
            slope_bound: j,
        })
    }

    /// Builds a tabulated prior whose slope bound is the tightest one the table
    /// admits, i.e. the largest absolute cell slope (floored at a tiny positive
    /// value for flat tables).
    pub fn with_certified_bound(grid: Vec<f64>, log_density: Vec<f64>) -> Result<Self> {
        Self::validate_table(&grid, &log_density)?;
        let j = Self::max_cell_slope(&grid, &log_density).max(f64::MIN_POSITIVE);
        Ok(Self {
            grid,
            log_density,
            slope_bound: j,
        })
    }

    /// Samples `ln_pdf` on `points` evenly spaced knots over `[lo, hi]`.
    pub fn from_log_fn(lo: f64, hi: f64, points: usize, ln_pdf: impl Fn(f64) -> f64) -> Result<Self> {
        if points < 2 {
            return domain("tabulated prior needs at least two grid points");
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return domain(format!("invalid grid range [{lo}, {hi}]"));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points)
            .map(|k| if k + 1 == points { hi } else { lo + step * k as f64 })
            .collect();
        let values = grid.iter().map(|&x| ln_pdf(x)).collect();
        Self::with_certified_bound(grid, values)
    }

    fn validate_table(grid: &[f64], log_density: &[f64]) -> Result<()> {
        if grid.len() < 2 {
            return domain("tabulated prior needs at least two grid points");
        }
        if grid.len() != log_density.len() {
            return domain(format!(
                "grid has {} points but {} log-density values",
                grid.len(),
                log_density.len()
            ));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return domain("grid points must be finite");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return domain("grid must be strictly increasing");
        }
        // finite log density <=> 0 < P < inf
        if log_density.iter().any(|v| !v.is_finite()) {
            return domain("tabulated density must be strictly positive and finite");
        }
        Ok(())
    }

    fn max_cell_slope(grid: &[f64], log_density: &[f64]) -> f64 {
        grid.windows(2)
            .zip(log_density.windows(2))
            .map(|(x, l)| ((l[1] - l[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn log_density_values(&self) -> &[f64] {
        &self.log_density
    }

    pub fn slope_bound(&self) -> f64 {
        self.slope_bound
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    /// Index of the cell `[grid[k], grid[k+1])` holding `x`; the upper
    /// endpoint belongs to the last cell.
    fn cell(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return domain(format!(
                "x = {x} lies outside the tabulated support [{}, {}]",
                self.lower(),
                self.upper()
            ));
        }
        let k = self.grid.partition_point(|&g| g <= x);
        Ok(k.saturating_sub(1).min(self.grid.len() - 2))
    }

    fn cell_slope(&self, k: usize) -> f64 {
        (self.log_density[k + 1] - self.log_density[k]) / (self.grid[k + 1] - self.grid[k])
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        let k = self.cell(x)?;
        Ok(self.log_density[k] + self.cell_slope(k) * (x - self.grid[k]))
    }

    pub fn log_density_slope(&self, x: f64) -> Result<f64> {
        let k = self.cell(x)?;
        Ok(self.cell_slope(k))
    }

    /// Copy of this prior with the grid shifted by `t`.
    pub fn shifted(&self, t: f64) -> Self {
        Self {
            grid: self.grid.iter().map(|x| x + t).collect(),
            log_density: self.log_density.clone(),
            slope_bound: self.slope_bound,
        }
    }
}

/// Any prior the solver can consume.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Gaussian(GaussianPrior),
    Mixture(GaussianMixturePrior),
    Uniform(UniformPrior),
    Tabulated(TabulatedPrior),
}

impl Prior {
    pub fn kind(&self) -> &'static str {
        match self {
            Prior::Gaussian(_) => "gaussian",
            Prior::Mixture(_) => "mixture",
            Prior::Uniform(_) => "uniform",
            Prior::Tabulated(_) => "tabulated",
        }
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return domain(format!("prior evaluated at non-finite x = {x}"));
        }
        match self {
            Prior::Gaussian(p) => Ok(p.log_density(x)),
            Prior::Mixture(p) => Ok(p.log_density(x)),
            Prior::Uniform(_) => Ok(0.0),
            Prior::Tabulated(p) => p.log_density(x),
        }
    }

    pub fn log_density_slope(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return domain(format!("prior evaluated at non-finite x = {x}"));
        }
        match self {
            Prior::Gaussian(p) => Ok(p.log_density_slope(x)),
            Prior::Mixture(p) => Ok(p.log_density_slope(x)),
            Prior::Uniform(_) => Ok(0.0),
            Prior::Tabulated(p) => p.log_density_slope(x),
        }
    }

    pub fn slope_bound(&self) -> SlopeBound {
        match self {
            Prior::Gaussian(_) | Prior::Mixture(_) => SlopeBound::Unbounded,
            Prior::Uniform(_) => SlopeBound::Finite(0.0),
            Prior::Tabulated(p) => SlopeBound::Finite(p.slope_bound()),
        }
    }
}

impl From<GaussianPrior> for Prior {
    fn from(p: GaussianPrior) -> Self {
        Prior::Gaussian(p)
    }
}

impl From<GaussianMixturePrior> for Prior {
    fn from(p: GaussianMixturePrior) -> Self {
        Prior::Mixture(p)
    }
}

impl From<UniformPrior> for Prior {
    fn from(p: UniformPrior) -> Self {
        Prior::Uniform(p)
    }
}

impl From<TabulatedPrior> for Prior {
    fn from(p: TabulatedPrior) -> Self {
        Prior::Tabulated(p)
    }
}

/// Gaussian-kernel density estimate: one equal-weight component per sample.
pub fn kde_from_samples(samples: &[f64], bandwidth: f64) -> Result<GaussianMixturePrior> {
    if samples.is_empty() {
        return domain("KDE needs at least one sample");
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return domain(format!("KDE bandwidth must be positive, got {bandwidth}"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return domain("KDE samples must be finite");
    }
    let weight = 1.0 / samples.len() as f64;
    let components = samples
        .iter()
        .map(|&mean| MixtureComponent { weight, mean })
        .collect();
    // skip the weight-sum check: L * (1/L) can drift by more than an ulp per term
    Ok(GaussianMixturePrior {
        components,
        sigma: bandwidth,
    })
}

/// Normal-reference bandwidth `1.06 * sd * L^(-1/5)`, with the sample sd
/// using the `L - 1` denominator.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return domain("bandwidth rule needs at least two samples");
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd.is_finite() && sd > 0.0) {
        return domain("samples have zero spread; cannot choose a bandwidth");
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Upper bound `1 / (sqrt(2 pi) sigma)` on any equal-variance mixture density.
pub fn mixture_density_bound(sigma: f64) -> f64 {
    1.0 / ((2.0 * PI).sqrt() * sigma)
}

/// Reads one decimal number per line. Blank lines and lines starting with `#`
/// are skipped.
pub fn parse_samples(reader: impl BufRead) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            Error::Parse(format!("line {}: '{trimmed}' is not a number", lineno + 1))
        })?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("line {}: non-finite sample", lineno + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_samples_file(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_samples(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_log_density_at_mode() {
        let p = Prior::from(GaussianPrior::new(0.0, 1.0).unwrap());
        assert!(close(p.log_density(0.0).unwrap(), -0.5 * (2.0 * PI).ln(), 1e-15));
        assert!(close(p.log_density(0.0).unwrap(), -0.918_938_5, 1e-7));
    }

    #[test]
    fn single_component_mixture_matches_gaussian() {
        let m = GaussianMixturePrior::new(vec![MixtureComponent { weight: 1.0, mean: 0.0 }], 1.0)
            .unwrap();
        assert!(close(m.log_density(0.0), -0.918_938_533_204_672_8, 1e-15));
    }

    #[test]
    fn symmetric_mixture_log_density() {
        let m = GaussianMixturePrior::new(
            vec![
                MixtureComponent { weight: 0.5, mean: -1.0 },
                MixtureComponent { weight: 0.5, mean: 1.0 },
            ],
            1.0,
        )
        .unwrap();
        let direct = ((-0.5f64).exp() / (2.0 * PI).sqrt()).ln();
        assert!(close(m.log_density(0.0), direct, 1e-15));
        assert!(close(m.log_density(0.0), -1.418_938_5, 1e-7));
    }

    #[test]
    fn slope_examples() {
        let g = Prior::from(GaussianPrior::new(0.0, 1.0).unwrap());
        assert_eq!(g.log_density_slope(0.0).unwrap(), 0.0);
        let g = Prior::from(GaussianPrior::new(0.5, 0.25).unwrap());
        assert!(close(g.log_density_slope(0.75).unwrap(), -4.0, 1e-14));
        let u = Prior::from(UniformPrior);
        for x in [-1e6, -3.0, 0.0, 17.5] {
            assert_eq!(u.log_density_slope(x).unwrap(), 0.0);
            assert_eq!(u.log_density(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn slope_bound_examples() {
        assert_eq!(Prior::from(UniformPrior).slope_bound(), SlopeBound::Finite(0.0));
        let t = TabulatedPrior::new(vec![0.0, 1.0], vec![0.0, 5.0], 5.0).unwrap();
        assert_eq!(Prior::from(t).slope_bound(), SlopeBound::Finite(5.0));
        let g = GaussianPrior::new(0.0, 1.0).unwrap();
        assert_eq!(Prior::from(g).slope_bound(), SlopeBound::Unbounded);
        let k = kde_from_samples(&[0.0, 1.0], 0.3).unwrap();
        assert_eq!(Prior::from(k).slope_bound(), SlopeBound::Unbounded);
    }

    #[test]
    fn kde_examples() {
        let k = kde_from_samples(&[0.0], 1.0).unwrap();
        assert!(close(k.density(0.0), 0.398_942_280_401_432_7, 1e-15));

        let k = kde_from_samples(&[-1.0, 1.0], 1.0).unwrap();
        assert_eq!(
            k.components(),
            &[
                MixtureComponent { weight: 0.5, mean: -1.0 },
                MixtureComponent { weight: 0.5, mean: 1.0 }
            ]
        );
        assert_eq!(k.sigma(), 1.0);

        let k = kde_from_samples(&[0.0, 0.0, 0.0], 0.5).unwrap();
        assert!(close(k.density(0.0), mixture_density_bound(0.5), 1e-15));
        assert!(close(k.density(0.0), 0.797_884_560_802_865_4, 1e-15));
    }

    #[test]
    fn kde_errors() {
        assert!(kde_from_samples(&[], 1.0).is_err());
        assert!(kde_from_samples(&[1.0], 0.0).is_err());
        assert!(kde_from_samples(&[1.0], -2.0).is_err());
        assert!(kde_from_samples(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn kde_density_matches_kernel_sum() {
        let samples = [-0.3, 0.1, 0.4, 1.7, 2.0];
        let h = 0.35;
        let k = kde_from_samples(&samples, h).unwrap();
        for x in [-1.0, 0.0, 0.25, 1.0, 3.0] {
            let direct: f64 = samples
                .iter()
                .map(|s| (-0.5 * ((s - x) / h).powi(2)).exp() / (2.0 * PI).sqrt())
                .sum::<f64>()
                / (samples.len() as f64 * h);
            assert!(close(k.density(x), direct, 1e-14 * direct.max(1.0)));
        }
    }

    /// Samples with mean 0 and sample sd exactly 1 (n - 1 denominator).
    fn unit_sd_samples(n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        raw.iter().map(|v| (v - mean) / sd).collect()
    }

    #[test]
    fn silverman_examples() {
        let h = silverman_bandwidth(&unit_sd_samples(32)).unwrap();
        assert!(close(h, 0.53, 1e-12));

        let quarter: Vec<f64> = unit_sd_samples(1000).iter().map(|v| v * 0.25).collect();
        let h = silverman_bandwidth(&quarter).unwrap();
        assert!(close(h, 1.06 * 0.25 * 1000f64.powf(-0.2), 1e-12));
        assert!(close(h, 0.066_565, 1e-6));

        assert!(silverman_bandwidth(&[0.0, 0.0]).is_err());
        assert!(silverman_bandwidth(&[1.0]).is_err());
    }

    #[test]
    fn tabulated_interpolation_and_hull() {
        let t = TabulatedPrior::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
        assert!(close(t.log_density(0.5).unwrap(), 0.5, 1e-15));
        assert!(close(t.log_density(2.0).unwrap(), 0.5, 1e-15));
        assert_eq!(t.log_density_slope(0.5).unwrap(), 1.0);
        assert_eq!(t.log_density_slope(2.0).unwrap(), -0.5);
        assert_eq!(t.log_density(3.0).unwrap(), 0.0);
        assert!(matches!(t.log_density(3.0001), Err(Error::Domain(_))));
        assert!(matches!(t.log_density_slope(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn tabulated_validation() {
        // slope 2 exceeds the declared bound
        assert!(TabulatedPrior::new(vec![0.0, 1.0], vec![0.0, 2.0], 1.0).is_err());
        assert!(TabulatedPrior::new(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(TabulatedPrior::new(vec![0.0, 1.0], vec![0.0, f64::NEG_INFINITY], 1.0).is_err());
        assert!(TabulatedPrior::new(vec![0.0], vec![0.0], 1.0).is_err());
        assert!(TabulatedPrior::new(vec![0.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
        let t = TabulatedPrior::with_certified_bound(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, -0.5])
            .unwrap();
        assert!(close(t.slope_bound(), 3.0, 1e-15));
    }

    #[test]
    fn parse_samples_skips_comments() {
        let text = "# header\n1.5\n\n  -2\n# trailing\n3e-1\n";
        assert_eq!(parse_samples(text.as_bytes()).unwrap(), vec![1.5, -2.0, 0.3]);
        assert!(parse_samples("1\nabc\n".as_bytes()).is_err());
        assert!(parse_samples("# nothing\n".as_bytes()).unwrap().is_empty());
    }
}
