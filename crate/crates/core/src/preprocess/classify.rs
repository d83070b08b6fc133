use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ks::verify_mild_distribution;
use crate::error::{Error, Result, RowError};
use crate::ingest::{DailyLoadMatrix, TemperatureMatrix};

pub const REASON_HOT: &str = "temperature-hot";
pub const REASON_MILD: &str = "temperature-mild";
pub const REASON_BAND: &str = "temperature-band";
pub const REASON_MATCH: &str = "distribution-match";
pub const REASON_MISMATCH: &str = "distribution-mismatch";

/// Temperature bands (°C) and distribution check for hot/mild labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// 85 °F.
    pub hot_max_c: f64,
    /// 55 °F.
    pub mild_lo_c: f64,
    /// 70 °F.
    pub mild_hi_c: f64,
    pub max_ks: f64,
    pub min_mild_days: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            hot_max_c: 29.4,
            mild_lo_c: 12.8,
            mild_hi_c: 21.1,
            max_ks: 0.30,
            min_mild_days: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Hot,
    Mild,
    Excluded,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Hot => "hot",
            Label::Mild => "mild",
            Label::Excluded => "excluded",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hot" => Ok(Label::Hot),
            "mild" => Ok(Label::Mild),
            "excluded" => Ok(Label::Excluded),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayLabel {
    pub date: NaiveDate,
    pub label: Label,
    pub reasons: Vec<String>,
    /// KS statistic for mild candidates.
    pub ks_stat: Option<f64>,
}

/// Labels each day Hot, Mild or Excluded.
///
/// Temperature decides the pre-label from the daily maximum. Each mild
/// candidate is then compared with the pooled samples of the other mild
/// candidates; a KS statistic above `max_ks` excludes it.
pub fn classify_days(
    loads: &DailyLoadMatrix,
    temps: &TemperatureMatrix,
    params: &ClassifyParams,
) -> Result<Vec<DayLabel>> {
    if loads.dates() != temps.dates() {
        return Err(Error::Misaligned(
            "load and temperature day dates differ".into(),
        ));
    }
    let n = loads.ndays();
    let mut labels: Vec<DayLabel> = (0..n)
        .map(|j| {
            let tmax = temps.daily_max(j);
            let (label, reason) = if tmax >= params.hot_max_c {
                (Label::Hot, REASON_HOT)
            } else if (params.mild_lo_c..=params.mild_hi_c).contains(&tmax) {
                (Label::Mild, REASON_MILD)
            } else {
                (Label::Excluded, REASON_BAND)
            };
            DayLabel {
                date: loads.dates()[j],
                label,
                reasons: vec![reason.to_string()],
                ks_stat: None,
            }
        })
        .collect();

    let candidates: Vec<usize> = (0..n).filter(|&j| labels[j].label == Label::Mild).collect();
    let x = loads.samples();
    for &j in &candidates {
        let pool: Vec<f64> = candidates
            .iter()
            .filter(|&&k| k != j)
            .flat_map(|&k| x.column(k).iter().copied().collect::<Vec<_>>())
            .collect();
        let l = &mut labels[j];
        if pool.is_empty() {
            l.label = Label::Excluded;
            l.reasons.push(REASON_MISMATCH.to_string());
            continue;
        }
        let cand: Vec<f64> = x.column(j).iter().copied().collect();
        let (pass, ks) = verify_mild_distribution(&cand, &pool, params.max_ks)?;
        l.ks_stat = Some(ks);
        if pass {
            l.reasons.push(REASON_MATCH.to_string());
        } else {
            l.label = Label::Excluded;
            l.reasons.push(REASON_MISMATCH.to_string());
        }
    }

    let mild = labels.iter().filter(|l| l.label == Label::Mild).count();
    if mild < params.min_mild_days {
        return Err(Error::InsufficientMildDays {
            found: mild,
            required: params.min_mild_days,
        });
    }
    Ok(labels)
}

/// Writes `date,label,reasons` with reasons joined by `;`.
pub fn write_labels_csv<W: Write>(labels: &[DayLabel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "label", "reasons"])?;
    for l in labels {
        w.write_record([
            l.date.to_string(),
            l.label.to_string(),
            l.reasons.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(source: R) -> Result<Vec<DayLabel>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["date", "label", "reasons"] {
        return Err(Error::Header {
            expected: "date,label,reasons".into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let row = idx + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != 3 {
                return Err(format!("expected 3 fields, found {}", rec.len()));
            }
            let date = NaiveDate::from_str(&rec[0]).map_err(|e| format!("bad date: {e}"))?;
            let label = Label::from_str(&rec[1])?;
            let reasons = rec[2]
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            Ok(DayLabel {
                date,
                label,
                reasons,
                ks_stat: None,
            })
        });
        match parsed {
            Ok(l) => out.push(l),
            Err(message) => bad.push(RowError { row, message }),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Rows(bad));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| NaiveDate::from_ymd_opt(2019, 6, 1).unwrap() + chrono::Days::new(i as u64))
            .collect()
    }

    fn setup(maxes: &[f64], loads: Vec<DVector<f64>>) -> (DailyLoadMatrix, TemperatureMatrix) {
        let d = dates(maxes.len());
        let mut t = DMatrix::zeros(24, maxes.len());
        for (j, &m) in maxes.iter().enumerate() {
            for h in 0..24 {
                t[(h, j)] = m - 8.0 * ((h as f64 - 15.0) / 12.0).powi(2);
            }
        }
        (
            DailyLoadMatrix::from_columns(&loads, d.clone()).unwrap(),
            TemperatureMatrix::new(t, d).unwrap(),
        )
    }

    fn wavy(offset: f64) -> DVector<f64> {
        DVector::from_fn(96, |i, _| offset + 0.5 + 0.4 * ((i as f64) * 0.3).sin())
    }

    #[test]
    fn bands_and_verification() {
        let maxes = [35.0, 18.0, 25.0, 17.0, 19.0, 16.0, 18.5, 20.0];
        let mut loads = vec![wavy(2.0)];
        loads.extend((0..6).map(|_| wavy(0.0)));
        loads.push(wavy(3.0));
        let (l, t) = setup(&maxes, loads);
        let labels = classify_days(&l, &t, &ClassifyParams::default()).unwrap();
        assert_eq!(labels[0].label, Label::Hot);
        assert_eq!(labels[1].label, Label::Mild);
        // Four identical pool days plus one disjoint: KS = 1/5.
        assert!((labels[1].ks_stat.unwrap() - 1.0 / 5.0).abs() < 1e-12);
        assert_eq!(labels[2].label, Label::Excluded);
        assert_eq!(labels[2].reasons, vec![REASON_BAND]);
        // Shifted by 3 kW: disjoint from the other mild candidates.
        assert_eq!(labels[7].label, Label::Excluded);
        assert!(labels[7].reasons.contains(&REASON_MISMATCH.to_string()));
    }

    #[test]
    fn too_few_mild_days() {
        let (l, t) = setup(&[35.0, 18.0, 34.0], vec![wavy(1.0), wavy(0.0), wavy(1.0)]);
        assert!(matches!(
            classify_days(&l, &t, &ClassifyParams::default()),
            Err(Error::InsufficientMildDays { found: 0, required: 3 })
        ));
    }

    #[test]
    fn labels_round_trip() {
        let (l, t) = setup(
            &[35.0, 18.0, 17.0, 19.0, 25.0],
            vec![wavy(2.0), wavy(0.0), wavy(0.0), wavy(0.0), wavy(1.0)],
        );
        let labels = classify_days(&l, &t, &ClassifyParams::default()).unwrap();
        let mut buf = Vec::new();
        write_labels_csv(&labels, &mut buf).unwrap();
        let back = read_labels_csv(buf.as_slice()).unwrap();
        for (a, b) in labels.iter().zip(&back) {
            assert_eq!((a.date, a.label, &a.reasons), (b.date, b.label, &b.reasons));
        }
    }
}
