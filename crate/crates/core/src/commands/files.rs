//! Per-customer run-directory files written by `disaggregate`.

use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

use crate::error::{Error, Result, RowError};
use crate::ingest::{parse_timestamp, TIMESTAMP_OUT};
use crate::pipeline::{DayEstimates, HouseholdRun};
use crate::{SLOTS_PER_DAY, SLOT_MINUTES};

pub const RESULTS_HEADER: [&str; 6] = ["timestamp", "total", "hvac_avg", "hvac_ica", "hvac_hat", "base_hat"];

fn slot_time(date: NaiveDate, slot: usize) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).expect("midnight exists") + TimeDelta::minutes((slot * SLOT_MINUTES) as i64)
}

/// Writes one row per 15-minute slot of every day.
pub fn write_results_csv<W: Write>(days: &[DayEstimates], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for d in days {
        for i in 0..d.total.len() {
            w.write_record([
                slot_time(d.date, i).format(TIMESTAMP_OUT).to_string(),
                d.total[i].to_string(),
                d.hvac_avg[i].to_string(),
                d.hvac_ica[i].to_string(),
                d.hvac_hat[i].to_string(),
                d.base_hat[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a file written by [`write_results_csv`].
///
/// Every day must be complete: 96 rows on the 15-minute grid in slot order.
/// Values must be finite and nonnegative.
pub fn read_results_csv<R: Read>(source: R) -> Result<Vec<DayEstimates>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = r.records();
    let found = match records.next() {
        Some(Ok(h)) => h.iter().collect::<Vec<_>>().join(","),
        Some(Err(e)) => e.to_string(),
        None => String::new(),
    };
    if found != RESULTS_HEADER.join(",") {
        return Err(Error::Header {
            expected: RESULTS_HEADER.join(","),
            found,
        });
    }

    let mut days: Vec<DayEstimates> = Vec::new();
    let mut bad = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != RESULTS_HEADER.len() {
                return Err(format!("expected {} fields, found {}", RESULTS_HEADER.len(), rec.len()));
            }
            let t = parse_timestamp(&rec[0]).ok_or_else(|| format!("unparseable timestamp `{}`", &rec[0]))?;
            let mut v = [0.0; 5];
            for (k, slot) in v.iter_mut().enumerate() {
                let s = &rec[k + 1];
                *slot = match s.parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => x,
                    _ => return Err(format!("`{s}` is not a finite nonnegative number")),
                };
            }
            Ok((t, v))
        });
        let (t, v) = match parsed {
            Ok(p) => p,
            Err(message) => {
                bad.push(RowError { row, message });
                continue;
            }
        };
        let date = t.date();
        let day = match days.last_mut() {
            Some(d) if d.date == date && d.total.len() < SLOTS_PER_DAY => d,
            last => {
                if let Some(d) = last {
                    if d.date >= date {
                        bad.push(RowError {
                            row,
                            message: format!("day {date} out of order"),
                        });
                        continue;
                    }
                }
                days.push(DayEstimates {
                    date,
                    total: Vec::with_capacity(SLOTS_PER_DAY),
                    hvac_avg: Vec::with_capacity(SLOTS_PER_DAY),
                    hvac_ica: Vec::with_capacity(SLOTS_PER_DAY),
                    hvac_hat: Vec::with_capacity(SLOTS_PER_DAY),
                    base_hat: Vec::with_capacity(SLOTS_PER_DAY),
                });
                days.last_mut().expect("just pushed")
            }
        };
        if t != slot_time(date, day.total.len()) {
            bad.push(RowError {
                row,
                message: format!("expected {}", slot_time(date, day.total.len()).format(TIMESTAMP_OUT)),
            });
            continue;
        }
        day.total.push(v[0]);
        day.hvac_avg.push(v[1]);
        day.hvac_ica.push(v[2]);
        day.hvac_hat.push(v[3]);
        day.base_hat.push(v[4]);
    }
    if !bad.is_empty() {
        return Err(Error::Rows(bad));
    }
    if let Some(d) = days.iter().find(|d| d.total.len() != SLOTS_PER_DAY) {
        return Err(Error::ShapeMismatch(format!(
            "{} has {} slots, expected {SLOTS_PER_DAY}",
            d.date,
            d.total.len()
        )));
    }
    Ok(days)
}

/// One row per hot day: solver diagnostics for completed days, the error
/// for failed or skipped ones.
pub fn write_days_csv<W: Write>(run: &HouseholdRun, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "date",
        "status",
        "feasible",
        "converged",
        "iterations",
        "max_violation",
        "alpha",
        "gamma1",
        "gamma2",
        "ica_correlation",
        "weak_linkage",
        "message",
    ])?;
    let mut rows: Vec<(NaiveDate, Vec<String>)> = Vec::new();
    for (d, o) in run.analysis.hot.iter().zip(&run.outcomes) {
        let mut rec = vec![d.date.to_string()];
        match &o.result {
            Ok(r) => rec.extend([
                if r.feasible { "ok" } else { "infeasible" }.to_string(),
                r.feasible.to_string(),
                r.converged.to_string(),
                r.iterations.to_string(),
                format!("{:.3e}", r.max_violation),
                r.vars.alpha.to_string(),
                r.vars.gamma1.to_string(),
                r.vars.gamma2.to_string(),
            ]),
            Err(_) => rec.extend(["failed".to_string(), "false".into(), "false".into()]
                .into_iter()
                .chain(std::iter::repeat_n(String::new(), 5))),
        }
        rec.push(d.ica_correlation.to_string());
        rec.push(d.weak_linkage.to_string());
        rec.push(o.result.as_ref().err().cloned().unwrap_or_default());
        rows.push((d.date, rec));
    }
    for (date, reason) in &run.analysis.skipped {
        let mut rec = vec![date.to_string(), "skipped".to_string(), "false".into(), "false".into()];
        rec.extend(std::iter::repeat_n(String::new(), 7));
        rec.push(reason.clone());
        rows.push((*date, rec));
    }
    rows.sort_by_key(|r| r.0);
    for (_, rec) in rows {
        w.write_record(rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `date,start_index,end_index,magnitude,appliance_hint`.
pub fn write_liul_csv<W: Write>(run: &HouseholdRun, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "start_index", "end_index", "magnitude", "appliance_hint"])?;
    for e in &run.analysis.liul_events {
        w.write_record([
            e.date.to_string(),
            e.start_index.to_string(),
            e.end_index.to_string(),
            format!("{:.6}", e.magnitude),
            e.appliance_hint.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(date: NaiveDate, k: f64) -> DayEstimates {
        let v = |o: f64| (0..SLOTS_PER_DAY).map(|i| k * i as f64 / 7.0 + o).collect();
        DayEstimates {
            date,
            total: v(3.0),
            hvac_avg: v(1.0),
            hvac_ica: v(0.5),
            hvac_hat: v(0.25),
            base_hat: v(0.1),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let d0 = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap();
        let days = vec![day(d0, 0.3), day(d0 + TimeDelta::days(2), 1.0 / 3.0)];
        let mut buf = Vec::new();
        write_results_csv(&days, &mut buf).unwrap();
        assert_eq!(read_results_csv(buf.as_slice()).unwrap(), days);
    }

    #[test]
    fn header_only_is_empty() {
        let text = RESULTS_HEADER.join(",") + "\n";
        assert!(read_results_csv(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_results_csv("a,b\n".as_bytes()), Err(Error::Header { .. })));
        let d0 = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&[day(d0, 1.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(50).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_results_csv(truncated.as_bytes()), Err(Error::ShapeMismatch(_))));
        let negative = text.replacen(",3,", ",-3,", 1);
        assert!(matches!(read_results_csv(negative.as_bytes()), Err(Error::Rows(_))));
    }
}
