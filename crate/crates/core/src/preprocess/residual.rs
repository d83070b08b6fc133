use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::DailyLoadMatrix;

/// Minimum number of mild days in an ensemble.
pub const MIN_ENSEMBLE: usize = 3;

/// Hot-day profile minus each selected mild-day profile, one column each.
/// Entries are signed; nothing is clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEnsemble {
    pub residuals: DMatrix<f64>,
    pub hot_date: NaiveDate,
    pub mild_dates: Vec<NaiveDate>,
    /// Column indices of the selected days in the mild matrix.
    pub mild_indices: Vec<usize>,
}

impl ResidualEnsemble {
    pub fn width(&self) -> usize {
        self.residuals.ncols()
    }

    /// Row means: the hot profile minus the average selected mild profile.
    pub fn mean_residual(&self) -> DVector<f64> {
        self.residuals.column_mean()
    }
}

/// Indices of the `k_use` mild days closest in calendar distance to `hot`,
/// returned in date order. Ties go to the earlier day.
pub fn nearest_mild_days(mild_dates: &[NaiveDate], hot: NaiveDate, k_use: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mild_dates.len()).collect();
    idx.sort_by_key(|&k| ((mild_dates[k] - hot).num_days().abs(), mild_dates[k]));
    idx.truncate(k_use);
    idx.sort_unstable();
    idx
}

/// Builds the residual ensemble for one hot day from the `k_use` calendar
/// nearest mild days (all of them when fewer are available).
pub fn build_residual_ensemble(
    hot_profile: &DVector<f64>,
    hot_date: NaiveDate,
    mild: &DailyLoadMatrix,
    k_use: usize,
) -> Result<ResidualEnsemble> {
    let k = mild.ndays();
    if k < MIN_ENSEMBLE {
        return Err(Error::InsufficientEnsemble(k));
    }
    if k_use < MIN_ENSEMBLE {
        return Err(Error::Config(format!(
            "k_use must be at least {MIN_ENSEMBLE}, got {k_use}"
        )));
    }
    if hot_profile.len() != mild.samples().nrows() {
        return Err(Error::ShapeMismatch(format!(
            "hot profile has {} samples, mild days {}",
            hot_profile.len(),
            mild.samples().nrows()
        )));
    }
    let mild_indices = nearest_mild_days(mild.dates(), hot_date, k_use.min(k));
    let x = mild.samples();
    let residuals = DMatrix::from_fn(hot_profile.len(), mild_indices.len(), |i, c| {
        hot_profile[i] - x[(i, mild_indices[c])]
    });
    Ok(ResidualEnsemble {
        residuals,
        hot_date,
        mild_dates: mild_indices.iter().map(|&j| mild.dates()[j]).collect(),
        mild_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 7, d).unwrap()
    }

    fn mild(cols: Vec<DVector<f64>>, days: &[u32]) -> DailyLoadMatrix {
        DailyLoadMatrix::from_columns(&cols, days.iter().map(|&d| date(d)).collect()).unwrap()
    }

    fn shape() -> DVector<f64> {
        DVector::from_fn(96, |i, _| 0.6 + 0.3 * ((i as f64) / 10.0).cos().abs())
    }

    #[test]
    fn self_subtraction_is_zero() {
        let m = mild(vec![shape(), shape(), shape()], &[1, 2, 3]);
        let e = build_residual_ensemble(&shape(), date(5), &m, 3).unwrap();
        assert_eq!(e.residuals.shape(), (96, 3));
        assert!(e.residuals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_offset() {
        let m = mild(vec![shape(), shape(), shape()], &[1, 2, 3]);
        let hot = shape().add_scalar(2.0);
        let e = build_residual_ensemble(&hot, date(5), &m, 10).unwrap();
        assert!(e.residuals.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn hvac_wave_plus_base_difference() {
        let bases: Vec<DVector<f64>> = (0..4).map(|k| shape() * (0.9 + 0.05 * k as f64)).collect();
        let hvac = DVector::from_fn(96, |i, _| if (i / 3) % 2 == 0 && i > 40 { 3.0 } else { 0.0 });
        let base_hot = shape() * 1.1;
        let hot = &hvac + &base_hot;
        let m = mild(bases.clone(), &[1, 2, 3, 4]);
        let e = build_residual_ensemble(&hot, date(6), &m, 4).unwrap();
        for (c, b) in bases.iter().enumerate() {
            let expected = &hvac + (&base_hot - b);
            assert!((e.residuals.column(c) - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn picks_nearest_days() {
        let cols = vec![shape(); 6];
        let m = mild(cols, &[1, 2, 10, 12, 20, 30]);
        let e = build_residual_ensemble(&shape(), date(11), &m, 3).unwrap();
        // Day 2 and day 20 tie at distance 9; the earlier one wins.
        assert_eq!(e.mild_dates, vec![date(2), date(10), date(12)]);
    }

    #[test]
    fn too_few_mild_days() {
        let m = mild(vec![shape(), shape()], &[1, 2]);
        assert!(matches!(
            build_residual_ensemble(&shape(), date(5), &m, 3),
            Err(Error::InsufficientEnsemble(2))
        ));
    }

    proptest! {
        #[test]
        fn residuals_reconstruct_hot(
            hot in proptest::collection::vec(0.0f64..5.0, 96),
            base in proptest::collection::vec(0.0f64..3.0, 96 * 4),
        ) {
            let cols: Vec<DVector<f64>> = base.chunks(96).map(|c| DVector::from_column_slice(c)).collect();
            let m = mild(cols, &[3, 8, 9, 15]);
            let hot = DVector::from_vec(hot);
            let e = build_residual_ensemble(&hot, date(10), &m, 4).unwrap();
            for (c, &j) in e.mild_indices.iter().enumerate() {
                let rebuilt = e.residuals.column(c) + m.samples().column(j);
                prop_assert!((rebuilt - &hot).amax() <= 1e-12);
            }
        }
    }
}
