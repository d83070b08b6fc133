//! Large infrequently used load (LIUL) removal.
//!
//! A LIUL is a rectangular pulse: a rise of at least `min_jump_kw` within one
//! slot followed, at most `max_duration_slots` later, by a fall of comparable
//! size. Detected pulses are replaced by the straight line joining the
//! samples just outside the pulse, never raising any sample.

use chrono::NaiveDate;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ingest::DailyLoadMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiulParams {
    pub min_jump_kw: f64,
    pub max_duration_slots: usize,
    /// The closing fall must be at least this fraction of the opening rise.
    pub fall_ratio: f64,
    /// A pulse is only removed when fewer than this fraction of days show a
    /// qualifying rise near the same time of day.
    pub max_day_fraction: f64,
    /// Half-width, in slots, of the time-of-day neighbourhood used for the
    /// rarity count.
    pub rarity_window_slots: usize,
}

impl Default for LiulParams {
    fn default() -> Self {
        Self {
            min_jump_kw: 2.0,
            max_duration_slots: 12,
            fall_ratio: 0.5,
            max_day_fraction: 0.20,
            rarity_window_slots: 8,
        }
    }
}

/// A detected pulse covering slots `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub start: usize,
    pub end: usize,
    /// Height of the opening rise, kW.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiulEvent {
    pub date: NaiveDate,
    pub start_index: usize,
    pub end_index: usize,
    pub magnitude: f64,
    pub appliance_hint: String,
}

impl LiulEvent {
    fn new(date: NaiveDate, p: Pulse) -> Self {
        let duration = p.end - p.start + 1;
        let hint = if duration >= 3 && p.magnitude < 4.0 {
            "dryer"
        } else {
            "water heater"
        };
        Self {
            date,
            start_index: p.start,
            end_index: p.end,
            magnitude: p.magnitude,
            appliance_hint: hint.to_string(),
        }
    }
}

fn detect<F>(profile: &[f64], params: &LiulParams, mut keep: F) -> (Vec<f64>, Vec<Pulse>)
where
    F: FnMut(usize) -> bool,
{
    let n = profile.len();
    let mut out = profile.to_vec();
    let mut pulses = Vec::new();
    let mut i = 1;
    while i < n {
        let rise = profile[i] - profile[i - 1];
        if rise < params.min_jump_kw {
            i += 1;
            continue;
        }
        let last = (i + params.max_duration_slots).min(n - 1);
        let fall_at = (i + 1..=last)
            .find(|&j| profile[j - 1] - profile[j] >= params.fall_ratio * rise);
        let Some(j) = fall_at else {
            i += 1;
            continue;
        };
        if !keep(i) {
            i += 1;
            continue;
        }
        let (left, right) = (profile[i - 1], profile[j]);
        let span = (j - (i - 1)) as f64;
        for (k, v) in out.iter_mut().enumerate().take(j).skip(i) {
            let line = left + (right - left) * (k - (i - 1)) as f64 / span;
            *v = v.min(line);
        }
        pulses.push(Pulse {
            start: i,
            end: j - 1,
            magnitude: rise,
        });
        i = j;
    }
    (out, pulses)
}

/// Removes rectangular pulses from a single day profile.
///
/// No rarity check is applied; use [`filter_liul_days`] when the other days
/// of the household are available.
pub fn filter_liul(profile: &[f64], params: &LiulParams) -> (Vec<f64>, Vec<Pulse>) {
    detect(profile, params, |_| true)
}

/// Per-slot fraction of days showing a qualifying rise within the rarity
/// window around that slot.
pub fn jump_frequency(days: &DailyLoadMatrix, params: &LiulParams) -> Vec<f64> {
    let x = days.samples();
    let (n, d) = x.shape();
    let w = params.rarity_window_slots;
    let mut freq = vec![0.0; n];
    for (slot, f) in freq.iter_mut().enumerate() {
        let lo = slot.saturating_sub(w).max(1);
        let hi = (slot + w).min(n - 1);
        let hits = (0..d)
            .filter(|&j| (lo..=hi).any(|i| x[(i, j)] - x[(i - 1, j)] >= params.min_jump_kw))
            .count();
        *f = hits as f64 / d as f64;
    }
    freq
}

/// Filters every day of a household, removing only pulses whose start slot
/// is rare across days.
pub fn filter_liul_days(
    days: &DailyLoadMatrix,
    params: &LiulParams,
) -> (DailyLoadMatrix, Vec<LiulEvent>) {
    let freq = jump_frequency(days, params);
    let mut cols = Vec::with_capacity(days.ndays());
    let mut events = Vec::new();
    for (j, &date) in days.dates().iter().enumerate() {
        let col = days.column(j);
        let (filtered, pulses) = detect(col.as_slice(), params, |i| {
            freq[i] < params.max_day_fraction
        });
        events.extend(pulses.into_iter().map(|p| LiulEvent::new(date, p)));
        cols.push(DVector::from_vec(filtered));
    }
    let filtered = DailyLoadMatrix::from_columns(&cols, days.dates().to_vec())
        .expect("filtering keeps cells finite and nonnegative");
    (filtered, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_profile_unchanged() {
        let p = vec![1.0; 96];
        let (f, ev) = filter_liul(&p, &LiulParams::default());
        assert_eq!(f, p);
        assert!(ev.is_empty());
    }

    #[test]
    fn block_removed() {
        let mut p = vec![0.5; 96];
        for v in p.iter_mut().skip(40).take(4) {
            *v = 4.5;
        }
        let (f, ev) = filter_liul(&p, &LiulParams::default());
        assert_eq!(f, vec![0.5; 96]);
        assert_eq!(
            ev,
            vec![Pulse {
                start: 40,
                end: 43,
                magnitude: 4.0
            }]
        );
    }

    #[test]
    fn long_block_kept() {
        let mut p = vec![0.5; 96];
        for v in p.iter_mut().skip(20).take(13) {
            *v = 4.5;
        }
        let (f, ev) = filter_liul(&p, &LiulParams::default());
        assert_eq!(f, p);
        assert!(ev.is_empty());
    }

    #[test]
    fn sinusoid_unchanged() {
        let p: Vec<f64> = (0..96)
            .map(|i| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 / 96.0).sin())
            .collect();
        // Largest slot-to-slot step of the sinusoid, computed directly.
        let max_step = p
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_step < 2.0);
        let (f, ev) = filter_liul(&p, &LiulParams::default());
        assert_eq!(f, p);
        assert!(ev.is_empty());
    }

    #[test]
    fn frequent_pulses_survive_rarity_gate() {
        let dates: Vec<NaiveDate> = (1..=10)
            .map(|d| NaiveDate::from_ymd_opt(2019, 7, d).unwrap())
            .collect();
        let cols: Vec<DVector<f64>> = (0..10)
            .map(|_| {
                let mut p = vec![0.5; 96];
                for v in p.iter_mut().skip(60).take(3) {
                    *v = 3.5;
                }
                DVector::from_vec(p)
            })
            .collect();
        let m = DailyLoadMatrix::from_columns(&cols, dates).unwrap();
        let (f, ev) = filter_liul_days(&m, &LiulParams::default());
        assert!(ev.is_empty());
        assert_eq!(f, m);
    }

    #[test]
    fn rare_pulse_removed_across_days() {
        let dates: Vec<NaiveDate> = (1..=10)
            .map(|d| NaiveDate::from_ymd_opt(2019, 7, d).unwrap())
            .collect();
        let mut cols: Vec<DVector<f64>> = (0..10).map(|_| DVector::from_element(96, 0.5)).collect();
        for i in 30..34 {
            cols[4][i] = 4.0;
        }
        let m = DailyLoadMatrix::from_columns(&cols, dates.clone()).unwrap();
        let (f, ev) = filter_liul_days(&m, &LiulParams::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].date, dates[4]);
        assert_eq!((ev[0].start_index, ev[0].end_index), (30, 33));
        assert!(f.samples().iter().all(|&v| v == 0.5));
    }

    proptest! {
        #[test]
        fn never_raises_and_stays_nonnegative(p in proptest::collection::vec(0.0f64..6.0, 96)) {
            let (f, _) = filter_liul(&p, &LiulParams::default());
            for (a, b) in f.iter().zip(&p) {
                prop_assert!(a <= b);
                prop_assert!(*a >= 0.0);
            }
        }

        #[test]
        fn small_steps_untouched(p in proptest::collection::vec(0.0f64..1.9, 96)) {
            let (f, ev) = filter_liul(&p, &LiulParams::default());
            prop_assert!(ev.is_empty());
            prop_assert_eq!(f, p);
        }
    }
}
