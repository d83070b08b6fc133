use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::DailyLoadMatrix;
use crate::{HOURS_PER_DAY, SLOTS_PER_HOUR};

fn check_shapes(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<()> {
    if est.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    Ok(())
}

fn check_rating(rating_kw: f64) -> Result<()> {
    if !(rating_kw.is_finite() && rating_kw > 0.0) {
        return Err(Error::InvalidRating(rating_kw));
    }
    Ok(())
}

/// `(1/M)·Σ_j Σ_i |est − truth| / rating`, in percent, with M the number of
/// day columns.
///
/// The sum runs over all N·M samples but only M divides it, so a constant
/// error of x·rating on every sample of a 96-slot day scores 96·x·100 %.
pub fn nmae(est: &DMatrix<f64>, truth: &DMatrix<f64>, rating_kw: f64) -> Result<f64> {
    check_shapes(est, truth)?;
    check_rating(rating_kw)?;
    if est.ncols() == 0 {
        return Err(Error::EmptyInput("no days to score"));
    }
    let abs: f64 = est.iter().zip(truth.iter()).map(|(e, t)| (e - t).abs()).sum();
    Ok(abs / rating_kw / est.ncols() as f64 * 100.0)
}

/// `|Σ est − Σ truth| / Σ truth`, in percent.
pub fn nee(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    check_shapes(est, truth)?;
    let t = truth.sum();
    if t <= 0.0 {
        return Err(Error::ZeroTruthEnergy);
    }
    Ok((est.sum() - t).abs() / t * 100.0)
}

/// Minimum, quartiles and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Per (hour, day) error `mean_{slot∈hour} |est − truth| / rating` as a
/// fraction, one row per hour with the values of every day column.
pub fn hourly_errors(est: &DMatrix<f64>, truth: &DMatrix<f64>, rating_kw: f64) -> Result<Vec<Vec<f64>>> {
    check_shapes(est, truth)?;
    check_rating(rating_kw)?;
    if est.nrows() != HOURS_PER_DAY * SLOTS_PER_HOUR {
        return Err(Error::ShapeMismatch(format!("expected 96 rows, got {}", est.nrows())));
    }
    Ok((0..HOURS_PER_DAY)
        .map(|k| {
            (0..est.ncols())
                .map(|j| {
                    (k * SLOTS_PER_HOUR..(k + 1) * SLOTS_PER_HOUR)
                        .map(|i| (est[(i, j)] - truth[(i, j)]).abs())
                        .sum::<f64>()
                        / SLOTS_PER_HOUR as f64
                        / rating_kw
                })
                .collect()
        })
        .collect())
}

/// Five-number summary of [`hourly_errors`] for each hour of the day.
pub fn hourly_error_stats(est: &DMatrix<f64>, truth: &DMatrix<f64>, rating_kw: f64) -> Result<Vec<FiveNumber>> {
    let rows = hourly_errors(est, truth, rating_kw)?;
    rows.iter()
        .map(|r| FiveNumber::of(r).ok_or(Error::EmptyInput("no days to score")))
        .collect()
}

/// HVAC estimate `max(0, hot − mean of all mild days)` for each hot day.
pub fn benchmark_average_mild(hot: &DailyLoadMatrix, mild: &DailyLoadMatrix) -> Result<DMatrix<f64>> {
    if mild.ndays() == 0 {
        return Err(Error::NoMildDays);
    }
    let mean = mild.samples().column_mean();
    let mut out = hot.samples().clone();
    for mut col in out.column_iter_mut() {
        for (v, m) in col.iter_mut().zip(mean.iter()) {
            *v = (*v - m).max(0.0);
        }
    }
    Ok(out)
}

pub const HIST_BIN_WIDTH: f64 = 0.05;
pub const HIST_BINS: usize = 10;

/// Counts over `[0, 0.05), …, [0.45, 0.5)` plus values at or above 0.5.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub counts: [usize; HIST_BINS],
    pub overflow: usize,
}

impl Histogram {
    pub fn bin_edges(i: usize) -> (f64, f64) {
        (i as f64 * HIST_BIN_WIDTH, (i + 1) as f64 * HIST_BIN_WIDTH)
    }
}

/// Bins per-customer errors given as fractions.
pub fn nmae_histogram(values: &[f64]) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no customers to bin"));
    }
    let mut h = Histogram {
        counts: [0; HIST_BINS],
        overflow: 0,
    };
    for &v in values {
        // The nudge keeps values such as 0.15 out of the bin below them.
        let bin = (v.max(0.0) / HIST_BIN_WIDTH + 1e-9).floor() as usize;
        match h.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => h.overflow += 1,
        }
    }
    Ok(h)
}

/// 99th percentile of the ground-truth HVAC samples.
pub fn rating_from_truth(truth: &[f64]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("no ground-truth samples"));
    }
    let mut v = truth.to_vec();
    v.sort_by(f64::total_cmp);
    let r = quantile_sorted(&v, 0.99);
    check_rating(r)?;
    Ok(r)
}

/// Sample mean and standard deviation (denominator n − 1; zero for n = 1).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn identical_is_zero() {
        let t = DMatrix::from_fn(96, 3, |i, j| (i + j) as f64 * 0.1);
        assert_eq!(nmae(&t, &t, 3.0).unwrap(), 0.0);
        assert_eq!(nee(&t, &t).unwrap(), 0.0);
        assert!(hourly_error_stats(&t, &t, 3.0)
            .unwrap()
            .iter()
            .all(|s| s.max == 0.0));
    }

    #[test]
    fn constant_offset_arithmetic() {
        let t = DMatrix::from_element(96, 1, 1.0);
        let e = t.add_scalar(0.01);
        let v = nmae(&e, &t, 4.0).unwrap();
        assert!((v - 24.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn ten_percent_energy() {
        let t = DMatrix::from_fn(96, 2, |i, _| 1.0 + i as f64 * 0.01);
        assert!((nee(&(&t * 1.1), &t).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let t = DMatrix::from_element(96, 1, 1.0);
        assert!(matches!(nmae(&t, &t, 0.0), Err(Error::InvalidRating(_))));
        let z = DMatrix::zeros(96, 1);
        assert!(matches!(nee(&t, &z), Err(Error::ZeroTruthEnergy)));
        assert!(nmae(&t, &DMatrix::zeros(96, 2), 1.0).is_err());
    }

    #[test]
    fn single_day_quartiles_collapse() {
        let t = DMatrix::from_element(96, 1, 1.0);
        let e = DMatrix::from_fn(96, 1, |i, _| 1.0 + i as f64 * 0.01);
        for s in hourly_error_stats(&e, &t, 2.0).unwrap() {
            assert_eq!(s.q1, s.median);
            assert_eq!(s.median, s.q3);
        }
    }

    #[test]
    fn evening_bias_peaks_at_18() {
        let t = DMatrix::from_element(96, 5, 1.0);
        let e = DMatrix::from_fn(96, 5, |i, j| {
            let hour = (i / 4) as f64;
            1.0 + 0.01 * (j + 1) as f64 * (1.0 + 5.0 * (-((hour - 18.0) / 2.0).powi(2)).exp())
        });
        let s = hourly_error_stats(&e, &t, 3.0).unwrap();
        let best = (0..24)
            .max_by(|&a, &b| s[a].median.total_cmp(&s[b].median))
            .unwrap();
        assert_eq!(best, 18);
    }

    fn days(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| NaiveDate::from_ymd_opt(2020, 7, 1).unwrap() + chrono::Days::new(i as u64))
            .collect()
    }

    #[test]
    fn average_benchmark() {
        let mild = DailyLoadMatrix::new(DMatrix::from_fn(96, 2, |i, j| 0.5 + (i % 7) as f64 * 0.1 + j as f64), days(2)).unwrap();
        let mean = mild.samples().column_mean();
        let hot = DailyLoadMatrix::new(DMatrix::from_fn(96, 2, |i, j| mean[i] + 2.0 * j as f64), days(2)).unwrap();
        let est = benchmark_average_mild(&hot, &mild).unwrap();
        assert!(est.column(0).iter().all(|&v| v == 0.0));
        assert!(est.column(1).iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn histogram_bins() {
        let h = nmae_histogram(&[0.10; 7]).unwrap();
        assert_eq!(h.counts[2], 7);
        assert_eq!(h.counts.iter().sum::<usize>(), 7);
        let h = nmae_histogram(&[0.0, 0.049, 0.5, 0.9]).unwrap();
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.overflow, 2);
        assert!(nmae_histogram(&[]).is_err());
    }

    #[test]
    fn rating_percentile() {
        let mut v = vec![0.0; 50];
        v.extend(vec![3.0; 50]);
        assert_eq!(rating_from_truth(&v).unwrap(), 3.0);
        assert!(matches!(rating_from_truth(&[0.0; 10]), Err(Error::InvalidRating(_))));
    }

    proptest! {
        #[test]
        fn nonnegative_and_scale_consistent(
            e in proptest::collection::vec(0.0f64..5.0, 96),
            t in proptest::collection::vec(0.1f64..5.0, 96),
            s in 0.1f64..10.0,
        ) {
            let e = DMatrix::from_vec(96, 1, e);
            let t = DMatrix::from_vec(96, 1, t);
            let a = nmae(&e, &t, 2.0).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!(nee(&e, &t).unwrap() >= 0.0);
            let b = nmae(&(&e * s), &(&t * s), 2.0 * s).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn benchmark_within_hot(
            hot in proptest::collection::vec(0.0f64..5.0, 96),
            mild in proptest::collection::vec(0.0f64..5.0, 192),
        ) {
            let h = DailyLoadMatrix::new(DMatrix::from_vec(96, 1, hot), days(1)).unwrap();
            let m = DailyLoadMatrix::new(DMatrix::from_vec(96, 2, mild), days(2)).unwrap();
            let est = benchmark_average_mild(&h, &m).unwrap();
            for (e, p) in est.iter().zip(h.samples().iter()) {
                prop_assert!(*e >= 0.0 && e <= p);
            }
        }
    }
}
