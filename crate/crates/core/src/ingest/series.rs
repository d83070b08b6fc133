use std::io::{Read, Write};

use chrono::{NaiveDateTime, TimeDelta, Timelike};

use crate::error::{Error, Result, RowError};

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Format used for every timestamp this crate writes.
pub const TIMESTAMP_OUT: &str = "%Y-%m-%dT%H:%M:%S";

/// The three CSV flavours the pipeline reads and the generator writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// `timestamp,kw`
    Power,
    /// `timestamp,temp_c`
    Temperature,
    /// `timestamp,kw_hvac`
    HvacTruth,
}

impl SeriesKind {
    pub fn value_column(self) -> &'static str {
        match self {
            SeriesKind::Power => "kw",
            SeriesKind::Temperature => "temp_c",
            SeriesKind::HvacTruth => "kw_hvac",
        }
    }

    pub fn header(self) -> String {
        format!("timestamp,{}", self.value_column())
    }

    fn check_value(self, v: f64) -> std::result::Result<(), String> {
        if !v.is_finite() {
            return Err(format!("non-finite value {v}"));
        }
        match self {
            SeriesKind::Power | SeriesKind::HvacTruth if v < 0.0 => {
                Err(format!("negative power {v}"))
            }
            SeriesKind::Temperature if !(-40.0..=60.0).contains(&v) => {
                Err(format!("temperature {v} outside [-40, 60]"))
            }
            _ => Ok(()),
        }
    }
}

/// How repeated timestamps are treated after sorting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicatePolicy {
    /// Any repeated timestamp is an error.
    #[default]
    Reject,
    /// Keep the first row in file order (DST fall-back hour).
    FirstWins,
}

/// Timestamped samples in local naive time, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::DuplicateTimestamp(w[1]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmptyInput("series contains non-finite values"));
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDateTime, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.values.iter().copied())
    }

    pub fn write_csv<W: Write>(&self, kind: SeriesKind, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", kind.value_column()])?;
        for (t, v) in self.iter() {
            w.write_record([t.format(TIMESTAMP_OUT).to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Parses a two-column `timestamp,<value>` CSV.
///
/// Every bad row is collected and reported together, with 1-based row numbers
/// where the header is row 1.
pub fn read_series<R: Read>(
    source: R,
    kind: SeriesKind,
    duplicates: DuplicatePolicy,
) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        None => {
            return Err(Error::Header {
                expected: kind.header(),
                found: String::new(),
            })
        }
        Some(Err(e)) => {
            return Err(Error::Header {
                expected: kind.header(),
                found: e.to_string(),
            })
        }
        Some(Ok(h)) => h,
    };
    let found: Vec<&str> = header.iter().collect();
    let first = found.first().map(|s| s.trim_start_matches('\u{feff}'));
    if found.len() != 2 || first != Some("timestamp") || found[1] != kind.value_column() {
        return Err(Error::Header {
            expected: kind.header(),
            found: found.join(","),
        });
    }

    let mut rows: Vec<(NaiveDateTime, f64, usize)> = Vec::new();
    let mut bad = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                bad.push(RowError {
                    row,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            bad.push(RowError {
                row,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
            continue;
        }
        let Some(t) = parse_timestamp(&rec[0]) else {
            bad.push(RowError {
                row,
                message: format!("unparseable timestamp `{}`", &rec[0]),
            });
            continue;
        };
        let v = match rec[1].parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                bad.push(RowError {
                    row,
                    message: format!("unparseable value `{}`", &rec[1]),
                });
                continue;
            }
        };
        if let Err(message) = kind.check_value(v) {
            bad.push(RowError { row, message });
            continue;
        }
        rows.push((t, v, row));
    }
    if !bad.is_empty() {
        return Err(Error::Rows(bad));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }

    // Stable sort keeps file order among equal timestamps.
    rows.sort_by_key(|r| r.0);
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (t, v, _) in rows {
        if timestamps.last() == Some(&t) {
            match duplicates {
                DuplicatePolicy::Reject => return Err(Error::DuplicateTimestamp(t)),
                DuplicatePolicy::FirstWins => continue,
            }
        }
        timestamps.push(t);
        values.push(v);
    }
    TimeSeries::new(timestamps, values)
}

/// Reads a `timestamp,kw` meter export, rejecting duplicate timestamps.
pub fn load_power_csv<R: Read>(source: R) -> Result<TimeSeries> {
    read_series(source, SeriesKind::Power, DuplicatePolicy::Reject)
}

pub fn load_temperature_csv<R: Read>(source: R) -> Result<TimeSeries> {
    read_series(source, SeriesKind::Temperature, DuplicatePolicy::Reject)
}

pub fn load_truth_csv<R: Read>(source: R) -> Result<TimeSeries> {
    read_series(source, SeriesKind::HvacTruth, DuplicatePolicy::Reject)
}

/// Bin-averages `ts` onto a grid of `interval` anchored at midnight.
///
/// Each output sample is the mean of the inputs in `[t, t + interval)`.
/// Empty bins are omitted; downstream day assembly treats them as missing.
pub fn resample_mean(ts: &TimeSeries, interval: TimeDelta) -> Result<TimeSeries> {
    let secs = interval.num_seconds();
    if secs <= 0 || secs % 60 != 0 || interval.subsec_nanos() != 0 || 86_400 % secs != 0 {
        return Err(Error::InvalidInterval(interval.num_minutes()));
    }

    let bin_of = |t: NaiveDateTime| {
        let sod = i64::from(t.num_seconds_from_midnight());
        let start = t.date().and_hms_opt(0, 0, 0).expect("midnight exists");
        start + TimeDelta::seconds(sod - sod % secs)
    };

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut current: Option<(NaiveDateTime, f64, usize)> = None;
    for (t, v) in ts.iter() {
        let bin = bin_of(t);
        match &mut current {
            Some((b, sum, n)) if *b == bin => {
                *sum += v;
                *n += 1;
            }
            _ => {
                if let Some((b, sum, n)) = current.take() {
                    timestamps.push(b);
                    values.push(sum / n as f64);
                }
                current = Some((bin, v, 1));
            }
        }
    }
    if let Some((b, sum, n)) = current {
        timestamps.push(b);
        values.push(sum / n as f64);
    }
    TimeSeries::new(timestamps, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 7, 1)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let csv = "timestamp,kw\n2019-07-01T00:00:00,1.0\n2019-07-01T00:01:00,2.0\n2019-07-01T00:02:00,3.0\n";
        let ts = load_power_csv(csv.as_bytes()).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn header_only_is_empty_series() {
        let err = load_power_csv("timestamp,kw\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptySeries));
        assert_eq!(err.to_string(), "empty series");
    }

    #[test]
    fn duplicate_timestamp_is_named() {
        let csv = "timestamp,kw\n2019-07-01 00:00,1\n2019-07-01 00:01,2\n2019-07-01 00:01,3\n";
        let err = load_power_csv(csv.as_bytes()).unwrap_err();
        match err {
            Error::DuplicateTimestamp(t) => assert_eq!(t, at(0, 1)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(load_power_csv(csv.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("00:01"));
    }

    #[test]
    fn first_wins_keeps_file_order() {
        let csv = "timestamp,kw\n2019-07-01 00:01,5\n2019-07-01 00:00,1\n2019-07-01 00:01,3\n";
        let ts = read_series(csv.as_bytes(), SeriesKind::Power, DuplicatePolicy::FirstWins).unwrap();
        assert_eq!(ts.values(), &[1.0, 5.0]);
    }

    #[test]
    fn bad_rows_are_reported_with_numbers() {
        let csv = "timestamp,kw\n2019-07-01 00:00,1\nnot-a-time,2\n2019-07-01 00:02,abc\n2019-07-01 00:03,-1\n";
        match load_power_csv(csv.as_bytes()).unwrap_err() {
            Error::Rows(rows) => {
                assert_eq!(rows.iter().map(|r| r.row).collect::<Vec<_>>(), vec![3, 4, 5]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let err = load_power_csv("time,kw\n2019-07-01 00:00,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
        let err = load_temperature_csv("timestamp,kw\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let csv = "timestamp,kw\n2019-07-01 00:02,3\n2019-07-01 00:00,1\n";
        let ts = load_power_csv(csv.as_bytes()).unwrap();
        assert_eq!(ts.timestamps(), &[at(0, 0), at(0, 2)]);
    }

    fn minutes(values: &[f64]) -> TimeSeries {
        let ts = (0..values.len()).map(|i| at(0, 0) + TimeDelta::minutes(i as i64)).collect();
        TimeSeries::new(ts, values.to_vec()).unwrap()
    }

    #[test]
    fn resample_constant() {
        let r = resample_mean(&minutes(&[2.0; 15]), TimeDelta::minutes(15)).unwrap();
        assert_eq!(r.values(), &[2.0]);
    }

    #[test]
    fn resample_ramp_mean() {
        let vals: Vec<f64> = (0..15).map(f64::from).collect();
        let oracle = vals.iter().sum::<f64>() / vals.len() as f64;
        let r = resample_mean(&minutes(&vals), TimeDelta::minutes(15)).unwrap();
        assert_eq!(r.values(), &[oracle]);
        assert_eq!(oracle, 7.0);
    }

    #[test]
    fn resample_partial_bin_emitted() {
        let r = resample_mean(&minutes(&[1.0, 2.0, 3.0, 4.0, 5.0]), TimeDelta::minutes(15)).unwrap();
        assert_eq!(r.timestamps(), &[at(0, 0)]);
        assert_eq!(r.values(), &[3.0]);
    }

    #[test]
    fn resample_rejects_bad_interval() {
        let ts = minutes(&[1.0]);
        assert!(resample_mean(&ts, TimeDelta::minutes(7)).is_err());
        assert!(resample_mean(&ts, TimeDelta::seconds(90)).is_err());
        assert!(resample_mean(&ts, TimeDelta::zero()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ts = minutes(&[0.1, 1.0 / 3.0, 2.675e-5]);
        let mut buf = Vec::new();
        ts.write_csv(SeriesKind::Power, &mut buf).unwrap();
        assert_eq!(load_power_csv(buf.as_slice()).unwrap(), ts);
    }
}
