use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use nalgebra::{DMatrix, DVector};

use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::{HOURS_PER_DAY, SLOTS_PER_DAY, SLOT_MINUTES};

/// One column of 15-minute average power (kW) per calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyLoadMatrix {
    samples: DMatrix<f64>,
    dates: Vec<NaiveDate>,
}

impl DailyLoadMatrix {
    pub fn new(samples: DMatrix<f64>, dates: Vec<NaiveDate>) -> Result<Self> {
        if samples.nrows() != SLOTS_PER_DAY {
            return Err(Error::ShapeMismatch(format!(
                "day matrix has {} rows, expected {SLOTS_PER_DAY}",
                samples.nrows()
            )));
        }
        check_dates(samples.ncols(), &dates)?;
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::ShapeMismatch(
                "day matrix cells must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { samples, dates })
    }

    pub fn from_columns(columns: &[DVector<f64>], dates: Vec<NaiveDate>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyInput("day matrix needs at least one column"));
        }
        Self::new(DMatrix::from_columns(columns), dates)
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn ndays(&self) -> usize {
        self.dates.len()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.samples.column(j).into_owned()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Columns at `indices` (must be increasing, so dates stay sorted).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let cols: Vec<DVector<f64>> = indices.iter().map(|&j| self.column(j)).collect();
        let dates = indices.iter().map(|&j| self.dates[j]).collect();
        Self::from_columns(&cols, dates)
    }

    /// Flattens back to a 15-minute series.
    pub fn to_series(&self) -> TimeSeries {
        let mut ts = Vec::with_capacity(self.samples.len());
        let mut vs = Vec::with_capacity(self.samples.len());
        for (j, d) in self.dates.iter().enumerate() {
            let midnight = d.and_hms_opt(0, 0, 0).expect("midnight exists");
            for i in 0..SLOTS_PER_DAY {
                ts.push(midnight + TimeDelta::minutes((i * SLOT_MINUTES) as i64));
                vs.push(self.samples[(i, j)]);
            }
        }
        TimeSeries::new(ts, vs).expect("dates sorted and unique")
    }
}

/// Hourly outdoor temperature (°C), 24 rows per day column.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureMatrix {
    temps: DMatrix<f64>,
    dates: Vec<NaiveDate>,
}

impl TemperatureMatrix {
    pub fn new(temps: DMatrix<f64>, dates: Vec<NaiveDate>) -> Result<Self> {
        if temps.nrows() != HOURS_PER_DAY {
            return Err(Error::ShapeMismatch(format!(
                "temperature matrix has {} rows, expected {HOURS_PER_DAY}",
                temps.nrows()
            )));
        }
        check_dates(temps.ncols(), &dates)?;
        for (j, d) in dates.iter().enumerate() {
            for h in 0..HOURS_PER_DAY {
                let v = temps[(h, j)];
                if !v.is_finite() || !(-40.0..=60.0).contains(&v) {
                    return Err(Error::TemperatureOutOfRange {
                        at: d.and_hms_opt(h as u32, 0, 0).expect("valid hour"),
                        value: v,
                    });
                }
            }
        }
        Ok(Self { temps, dates })
    }

    pub fn temps(&self) -> &DMatrix<f64> {
        &self.temps
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.temps.column(j).into_owned()
    }

    pub fn daily_max(&self, j: usize) -> f64 {
        self.temps.column(j).max()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn to_series(&self) -> TimeSeries {
        let mut ts = Vec::with_capacity(self.temps.len());
        let mut vs = Vec::with_capacity(self.temps.len());
        for (j, d) in self.dates.iter().enumerate() {
            for h in 0..HOURS_PER_DAY {
                ts.push(d.and_hms_opt(h as u32, 0, 0).expect("valid hour"));
                vs.push(self.temps[(h, j)]);
            }
        }
        TimeSeries::new(ts, vs).expect("dates sorted and unique")
    }
}

fn check_dates(ncols: usize, dates: &[NaiveDate]) -> Result<()> {
    if ncols != dates.len() {
        return Err(Error::ShapeMismatch(format!(
            "{ncols} columns but {} dates",
            dates.len()
        )));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Misaligned("day dates must be unique and sorted".into()));
    }
    Ok(())
}

/// A day removed by [`build_day_matrix`] for exceeding the missing-bin limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub missing_bins: usize,
}

/// Fills `None` gaps by linear interpolation between the nearest present
/// neighbours; leading and trailing gaps copy the nearest value.
pub(crate) fn fill_linear(slots: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = vec![0.0; slots.len()];
    for i in 0..slots.len() {
        out[i] = match slots[i] {
            Some(v) => v,
            None if i < first => slots[first].unwrap(),
            None if i > last => slots[last].unwrap(),
            None => {
                let lo = (0..i).rev().find(|&k| slots[k].is_some()).unwrap();
                let hi = (i + 1..slots.len()).find(|&k| slots[k].is_some()).unwrap();
                let (a, b) = (slots[lo].unwrap(), slots[hi].unwrap());
                a + (b - a) * (i - lo) as f64 / (hi - lo) as f64
            }
        };
    }
    Some(out)
}

fn slot_of(t: NaiveDateTime) -> Result<usize> {
    if t.second() != 0 || t.nanosecond() != 0 || !(t.minute() as usize).is_multiple_of(SLOT_MINUTES) {
        return Err(Error::OffGrid(t));
    }
    Ok((t.hour() as usize * 60 + t.minute() as usize) / SLOT_MINUTES)
}

/// Assembles a 15-minute series into day columns.
///
/// Days whose fraction of empty bins is at most `max_missing_fraction` are
/// kept with the gaps linearly interpolated; the rest are dropped and
/// returned alongside the matrix. Calendar days with no samples at all
/// between the first and last day are reported as dropped.
pub fn build_day_matrix(
    ts: &TimeSeries,
    max_missing_fraction: f64,
) -> Result<(DailyLoadMatrix, Vec<DroppedDay>)> {
    let mut days: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (t, v) in ts.iter() {
        let slot = slot_of(t)?;
        days.entry(t.date()).or_insert_with(|| vec![None; SLOTS_PER_DAY])[slot] = Some(v);
    }
    let (&first, &last) = match (days.keys().next(), days.keys().next_back()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptySeries),
    };

    let mut columns = Vec::new();
    let mut dates = Vec::new();
    let mut dropped = Vec::new();
    for date in first.iter_days().take_while(|d| *d <= last) {
        let Some(slots) = days.get(&date) else {
            dropped.push(DroppedDay {
                date,
                missing_bins: SLOTS_PER_DAY,
            });
            continue;
        };
        let missing = slots.iter().filter(|s| s.is_none()).count();
        if missing as f64 > max_missing_fraction * SLOTS_PER_DAY as f64 {
            dropped.push(DroppedDay {
                date,
                missing_bins: missing,
            });
            continue;
        }
        let filled = fill_linear(slots).expect("day has at least one sample");
        columns.push(DVector::from_vec(filled));
        dates.push(date);
    }
    if columns.is_empty() {
        return Err(Error::NoUsableDays {
            dropped: dropped.len(),
        });
    }
    Ok((DailyLoadMatrix::from_columns(&columns, dates)?, dropped))
}

/// Arranges an hourly temperature series as 24 × D, aligned with `dates`.
///
/// Readings are averaged within each clock hour. Up to six missing hours per
/// day are interpolated.
pub fn build_temperature_matrix(ts: &TimeSeries, dates: &[NaiveDate]) -> Result<TemperatureMatrix> {
    let mut hours: BTreeMap<NaiveDate, Vec<(f64, usize)>> = BTreeMap::new();
    for (t, v) in ts.iter() {
        let e = &mut hours.entry(t.date()).or_insert_with(|| vec![(0.0, 0); HOURS_PER_DAY])
            [t.hour() as usize];
        e.0 += v;
        e.1 += 1;
    }
    let mut temps = DMatrix::zeros(HOURS_PER_DAY, dates.len());
    for (j, &date) in dates.iter().enumerate() {
        let Some(acc) = hours.get(&date) else {
            return Err(Error::UncoveredDate(date));
        };
        let slots: Vec<Option<f64>> = acc
            .iter()
            .map(|&(s, n)| (n > 0).then(|| s / n as f64))
            .collect();
        let missing = slots.iter().filter(|s| s.is_none()).count();
        if missing > 6 {
            return Err(Error::TooManyMissingHours { date, missing });
        }
        let filled = fill_linear(&slots).expect("day has readings");
        temps.column_mut(j).copy_from_slice(&filled);
    }
    TemperatureMatrix::new(temps, dates.to_vec())
}
