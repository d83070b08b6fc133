//! Accuracy metrics, the mild-average benchmark and report artifacts.

mod metrics;
mod report;

pub use metrics::{
    benchmark_average_mild, hourly_error_stats, hourly_errors, mean_std, nee, nmae,
    nmae_histogram, quantile_sorted, rating_from_truth, FiveNumber, Histogram, HIST_BINS,
    HIST_BIN_WIDTH,
};
pub use report::{
    histogram_svg, hourly_svg, read_fig6_csv, read_fig8_csv, read_table1_csv, read_table2_csv,
    write_fig6_csv, write_fig8_csv, write_table1_csv, write_table2_csv, Table1Row, Table2Row,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::SLOTS_PER_DAY;

/// One customer's estimates and truth over the scored days.
#[derive(Debug, Clone)]
pub struct CustomerEstimate {
    pub id: String,
    pub rating_kw: f64,
    /// N×M, kW.
    pub estimate: DMatrix<f64>,
    /// N×M, kW.
    pub truth: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomerScore {
    pub id: String,
    pub rating_kw: f64,
    pub days: usize,
    /// Percent.
    pub nmae: f64,
    /// Percent.
    pub nee: f64,
    /// nMAE per day, percent.
    pub daily_nmae: Vec<f64>,
}

impl CustomerScore {
    /// nMAE divided by N·M instead of M, as a fraction.
    pub fn per_sample_nmae(&self) -> f64 {
        self.nmae / 100.0 / SLOTS_PER_DAY as f64
    }
}

/// Scores of one method over all customers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub customers: Vec<CustomerScore>,
    pub nmae_mean: f64,
    pub nmae_std: f64,
    pub nee_mean: f64,
    pub nee_std: f64,
    /// Per-hour summary of hourly errors pooled over all customers and days.
    pub hourly: Vec<FiveNumber>,
}

impl EvalReport {
    pub fn histogram(&self) -> Result<Histogram> {
        let v: Vec<f64> = self.customers.iter().map(|c| c.per_sample_nmae()).collect();
        nmae_histogram(&v)
    }
}

/// Scores `method` for every customer.
pub fn evaluate_method(method: &str, customers: &[CustomerEstimate]) -> Result<EvalReport> {
    if customers.is_empty() {
        return Err(Error::EmptyInput("no customers to evaluate"));
    }
    let mut scores = Vec::with_capacity(customers.len());
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); crate::HOURS_PER_DAY];
    for c in customers {
        let daily_nmae = (0..c.estimate.ncols())
            .map(|j| {
                nmae(
                    &c.estimate.columns(j, 1).into_owned(),
                    &c.truth.columns(j, 1).into_owned(),
                    c.rating_kw,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, row) in hourly_errors(&c.estimate, &c.truth, c.rating_kw)?.into_iter().enumerate() {
            pooled[k].extend(row);
        }
        scores.push(CustomerScore {
            id: c.id.clone(),
            rating_kw: c.rating_kw,
            days: c.estimate.ncols(),
            nmae: nmae(&c.estimate, &c.truth, c.rating_kw)?,
            nee: nee(&c.estimate, &c.truth)?,
            daily_nmae,
        });
    }
    let (nmae_mean, nmae_std) = mean_std(&scores.iter().map(|s| s.nmae).collect::<Vec<_>>());
    let (nee_mean, nee_std) = mean_std(&scores.iter().map(|s| s.nee).collect::<Vec<_>>());
    let hourly = pooled
        .iter()
        .map(|r| FiveNumber::of(r).ok_or(Error::EmptyInput("no days to score")))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        method: method.to_string(),
        customers: scores,
        nmae_mean,
        nmae_std,
        nee_mean,
        nee_std,
        hourly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer(id: &str, offset: f64) -> CustomerEstimate {
        let truth = DMatrix::from_fn(96, 3, |i, j| ((i + j) % 5) as f64);
        CustomerEstimate {
            id: id.into(),
            rating_kw: 4.0,
            estimate: truth.add_scalar(offset),
            truth,
        }
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let r = evaluate_method("x", &[customer("a", 0.0), customer("b", 0.0)]).unwrap();
        assert_eq!(r.nmae_mean, 0.0);
        assert_eq!(r.nee_mean, 0.0);
        assert!(r.hourly.iter().all(|h| h.max == 0.0));
    }

    #[test]
    fn per_customer_and_daily() {
        let r = evaluate_method("x", &[customer("a", 0.01), customer("b", 0.02)]).unwrap();
        assert!((r.customers[0].nmae - 24.0).abs() < 1e-9);
        assert!((r.customers[1].nmae - 48.0).abs() < 1e-9);
        assert!(r.customers[0].daily_nmae.iter().all(|d| (d - 24.0).abs() < 1e-9));
        assert!((r.nmae_mean - 36.0).abs() < 1e-9);
        assert!((r.customers[0].per_sample_nmae() - 0.0025).abs() < 1e-12);
    }
}
