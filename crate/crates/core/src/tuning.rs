//! Choosing the initial spread `c0` from the noise level and iteration budget.
//!
//! The rule is linear, `c0 = coef_d * d + coef_iter * iterations + intercept`,
//! clamped below so the spread stays positive. The shipped coefficients come
//! from a large Monte-Carlo sweep with prior `N(0.5, 0.25^2)`, noise sd in
//! `[0, 2]` and 6 to 100 iterations; [`fit_c0_regression`] refits them from new
//! sweep data.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::csvio::{fmt_f64, parse_header, require_columns};
use crate::error::{domain, Error, Result};

/// Smallest `c0` [`recommend_c0`] will return.
pub const C0_FLOOR: f64 = 0.01;

/// Coefficients of the linear `c0` rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C0Regression {
    pub coef_d: f64,
    pub coef_iter: f64,
    pub intercept: f64,
}

impl C0Regression {
    /// `c0 = 1.32 d - 0.0089 iterations + 0.13`.
    pub const PUBLISHED: C0Regression = C0Regression {
        coef_d: 1.32,
        coef_iter: -0.0089,
        intercept: 0.13,
    };

    /// Unclamped value of the linear rule.
    pub fn predict(&self, d: f64, iterations: f64) -> f64 {
        self.coef_d * d + self.coef_iter * iterations + self.intercept
    }
}

impl Default for C0Regression {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// One row of an optimal-`c0` surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C0Row {
    pub d: f64,
    pub iteration: u64,
    pub optimal_c0: f64,
}

/// Least-squares fit with its quality measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C0Fit {
    pub regression: C0Regression,
    /// `sqrt(SSE / (n - 3))`, or 0 when the fit has no residual degrees of freedom.
    pub rmse: f64,
    pub r2: f64,
}

pub fn recommend_c0(reg: &C0Regression, d: f64, planned_iterations: u64) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return domain(format!("noise sd must be finite and non-negative, got {d}"));
    }
    if planned_iterations == 0 {
        return domain("planned iterations must be at least 1");
    }
    Ok(reg.predict(d, planned_iterations as f64).max(C0_FLOOR))
}

pub fn fit_c0_regression(rows: &[C0Row]) -> Result<C0Fit> {
    let n = rows.len();
    if n < 3 {
        return domain(format!("need at least 3 rows to fit 3 coefficients, got {n}"));
    }
    if rows
        .iter()
        .any(|r| !(r.d.is_finite() && r.optimal_c0.is_finite()))
    {
        return domain("regression rows must be finite");
    }
    let distinct = |vals: Vec<f64>| {
        let first = vals[0];
        vals.iter().any(|&v| v != first)
    };
    if !distinct(rows.iter().map(|r| r.d).collect()) {
        return domain("rows must span at least two distinct noise levels");
    }
    if !distinct(rows.iter().map(|r| r.iteration as f64).collect()) {
        return domain("rows must span at least two distinct iteration counts");
    }

    let design = DMatrix::from_fn(n, 3, |r, col| match col {
        0 => rows[r].d,
        1 => rows[r].iteration as f64,
        _ => 1.0,
    });
    let target = DVector::from_iterator(n, rows.iter().map(|r| r.optimal_c0));

    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if sv.min() <= smax * 1e-12 {
        return domain("design matrix is rank deficient (predictors are collinear)");
    }
    let beta = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;

    let fitted = &design * &beta;
    let sse: f64 = (&target - &fitted).iter().map(|e| e * e).sum();
    let mean = target.mean();
    let sst: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
    let rmse = if n > 3 { (sse / (n - 3) as f64).sqrt() } else { 0.0 };
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };

    Ok(C0Fit {
        regression: C0Regression {
            coef_d: beta[0],
            coef_iter: beta[1],
            intercept: beta[2],
        },
        rmse,
        r2,
    })
}

pub const ROWS_HEADER: [&str; 3] = ["d", "iteration", "optimal_c0"];
pub const COEF_HEADER: [&str; 5] = ["coef_d", "coef_iter", "intercept", "rmse", "r2"];

/// Reads `d,iteration,optimal_c0` rows.
pub fn read_rows_csv(reader: impl Read) -> Result<Vec<C0Row>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = parse_header(&mut rdr)?;
    let idx = require_columns(&header, &ROWS_HEADER)?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(idx[k])
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {}", line + 2, ROWS_HEADER[k])))
        };
        let parse_f = |k: usize| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad {}", line + 2, ROWS_HEADER[k])))
        };
        let iteration: u64 = field(1)?
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad iteration", line + 2)))?;
        rows.push(C0Row {
            d: parse_f(0)?,
            iteration,
            optimal_c0: parse_f(2)?,
        });
    }
    Ok(rows)
}

pub fn write_rows_csv(mut w: impl Write, rows: &[C0Row]) -> Result<()> {
    writeln!(w, "{}", ROWS_HEADER.join(","))?;
    for r in rows {
        writeln!(w, "{},{},{}", fmt_f64(r.d), r.iteration, fmt_f64(r.optimal_c0))?;
    }
    Ok(())
}

pub fn write_coefficients_csv(mut w: impl Write, fit: &C0Fit) -> Result<()> {
    writeln!(w, "{}", COEF_HEADER.join(","))?;
    let r = &fit.regression;
    writeln!(
        w,
        "{},{},{},{},{}",
        fmt_f64(r.coef_d),
        fmt_f64(r.coef_iter),
        fmt_f64(r.intercept),
        fmt_f64(fit.rmse),
        fmt_f64(fit.r2)
    )?;
    Ok(())
}

/// Reads the first data row of a coefficients file. Only `coef_d`,
/// `coef_iter` and `intercept` are required; extra columns are ignored.
pub fn read_coefficients_csv(reader: impl Read) -> Result<C0Regression> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = parse_header(&mut rdr)?;
    let idx = require_columns(&header, &COEF_HEADER[..3])?;
    let rec = rdr
        .records()
        .next()
        .ok_or_else(|| Error::Parse("coefficient file has no data row".into()))??;
    let get = |k: usize| -> Result<f64> {
        let v: f64 = rec
            .get(idx[k])
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad or missing {}", COEF_HEADER[k])))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("{} must be finite", COEF_HEADER[k])));
        }
        Ok(v)
    };
    Ok(C0Regression {
        coef_d: get(0)?,
        coef_iter: get(1)?,
        intercept: get(2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recommend_examples() {
        let p = C0Regression::PUBLISHED;
        assert!((recommend_c0(&p, 0.3, 10).unwrap() - 0.437).abs() < 1e-12);
        assert!((p.predict(0.0, 100.0) - (-0.76)).abs() < 1e-12);
        assert_eq!(recommend_c0(&p, 0.0, 100).unwrap(), 0.01);
        let constant = C0Regression {
            coef_d: 0.0,
            coef_iter: 0.0,
            intercept: 0.5,
        };
        for (d, n) in [(0.0, 1), (1.7, 33), (5.0, 1000)] {
            assert_eq!(recommend_c0(&constant, d, n).unwrap(), 0.5);
        }
    }

    #[test]
    fn recommend_rejects_bad_inputs() {
        let p = C0Regression::PUBLISHED;
        assert!(recommend_c0(&p, -1.0, 10).is_err());
        assert!(recommend_c0(&p, f64::NAN, 10).is_err());
        assert!(recommend_c0(&p, 0.5, 0).is_err());
    }

    #[test]
    fn fit_hand_solved_system() {
        let rows = [
            C0Row { d: 0.0, iteration: 1, optimal_c0: 1.0 },
            C0Row { d: 1.0, iteration: 1, optimal_c0: 2.0 },
            C0Row { d: 0.0, iteration: 2, optimal_c0: 1.0 },
        ];
        let fit = fit_c0_regression(&rows).unwrap();
        assert!((fit.regression.coef_d - 1.0).abs() < 1e-12);
        assert!(fit.regression.coef_iter.abs() < 1e-12);
        assert!((fit.regression.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_published_coefficients() {
        let p = C0Regression::PUBLISHED;
        let mut rows = vec![];
        for d in [0.0, 0.25, 0.5, 1.0, 1.75, 2.0] {
            for it in [6u64, 10, 25, 50, 100] {
                rows.push(C0Row { d, iteration: it, optimal_c0: p.predict(d, it as f64) });
            }
        }
        let fit = fit_c0_regression(&rows).unwrap();
        assert!((fit.regression.coef_d - 1.32).abs() < 1e-9);
        assert!((fit.regression.coef_iter + 0.0089).abs() < 1e-9);
        assert!((fit.regression.intercept - 0.13).abs() < 1e-9);
        assert!(fit.rmse <= 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        let same_d = [
            C0Row { d: 0.5, iteration: 1, optimal_c0: 1.0 },
            C0Row { d: 0.5, iteration: 2, optimal_c0: 2.0 },
            C0Row { d: 0.5, iteration: 3, optimal_c0: 1.0 },
        ];
        assert!(fit_c0_regression(&same_d).is_err());
        // d and iteration perfectly collinear
        let collinear = [
            C0Row { d: 1.0, iteration: 1, optimal_c0: 1.0 },
            C0Row { d: 2.0, iteration: 2, optimal_c0: 2.0 },
            C0Row { d: 3.0, iteration: 3, optimal_c0: 1.5 },
        ];
        assert!(fit_c0_regression(&collinear).is_err());
        assert!(fit_c0_regression(&same_d[..2]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            C0Row { d: 0.25, iteration: 6, optimal_c0: 0.35 },
            C0Row { d: 1.75, iteration: 100, optimal_c0: 1.2000000000000002 },
        ];
        let mut buf = vec![];
        write_rows_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("d,iteration,optimal_c0\n"));
        assert_eq!(read_rows_csv(buf.as_slice()).unwrap(), rows);

        let fit = C0Fit { regression: C0Regression::PUBLISHED, rmse: 0.317, r2: 0.865 };
        let mut buf = vec![];
        write_coefficients_csv(&mut buf, &fit).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "coef_d,coef_iter,intercept,rmse,r2\n1.32,-0.0089,0.13,0.317,0.865\n"
        );
        assert_eq!(read_coefficients_csv(buf.as_slice()).unwrap(), C0Regression::PUBLISHED);
    }

    #[test]
    fn malformed_coefficients_rejected() {
        assert!(read_coefficients_csv("coef_d,coef_iter\n1,2\n".as_bytes()).is_err());
        assert!(read_coefficients_csv("coef_d,coef_iter,intercept\n".as_bytes()).is_err());
        assert!(read_coefficients_csv("coef_d,coef_iter,intercept\n1,x,3\n".as_bytes()).is_err());
    }
}
