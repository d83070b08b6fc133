use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::{Matrix2, Vector2};

use super::{EvalReport, FiveNumber, Histogram, HIST_BINS};
use crate::error::{Error, Result, RowError};
use crate::finetune::BivariateGaussian;
use crate::HOURS_PER_DAY;

/// One line of `table1.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub method: String,
    pub nmae_mean: f64,
    pub nee_mean: f64,
    pub nmae_std: f64,
}

impl From<&EvalReport> for Table1Row {
    fn from(r: &EvalReport) -> Self {
        Self {
            method: r.method.clone(),
            nmae_mean: r.nmae_mean,
            nee_mean: r.nee_mean,
            nmae_std: r.nmae_std,
        }
    }
}

const TABLE1_HEADER: [&str; 4] = ["method", "nmae_mean", "nee_mean", "nmae_std"];
const TABLE2_HEADER: [&str; 6] = ["source", "mu_di", "mu_noc", "sigma_di_di", "sigma_di_noc", "sigma_noc_noc"];
const FIG6_HEADER: [&str; 7] = ["method", "hour", "min", "q1", "median", "q3", "max"];
const FIG8_HEADER: [&str; 4] = ["method", "bin_lo", "bin_hi", "count"];

/// Writes `method,nmae_mean,nee_mean,nmae_std` rows.
pub fn write_table1_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE1_HEADER)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            fmt(r.nmae_mean),
            fmt(r.nee_mean),
            fmt(r.nmae_std),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_table1_csv<R: Read>(source: R) -> Result<Vec<Table1Row>> {
    parse_rows(source, &TABLE1_HEADER, |rec| {
        Ok(Table1Row {
            method: rec[0].to_string(),
            nmae_mean: number(&rec[1])?,
            nee_mean: number(&rec[2])?,
            nmae_std: number(&rec[3])?,
        })
    })
}

/// Base-load energy distribution of one source of base profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub source: String,
    pub stats: BivariateGaussian,
}

/// Writes `source,mu_di,mu_noc,sigma_di_di,sigma_di_noc,sigma_noc_noc`.
pub fn write_table2_csv<W: Write>(rows: &[Table2Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE2_HEADER)?;
    for r in rows {
        let (mu, s) = (r.stats.mu(), r.stats.sigma());
        w.write_record([
            r.source.clone(),
            fmt(mu[0]),
            fmt(mu[1]),
            fmt(s[(0, 0)]),
            fmt(s[(0, 1)]),
            fmt(s[(1, 1)]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads rows written by [`write_table2_csv`]; each covariance must be
/// symmetric positive definite.
pub fn read_table2_csv<R: Read>(source: R) -> Result<Vec<Table2Row>> {
    parse_rows(source, &TABLE2_HEADER, |rec| {
        let v: Vec<f64> = (1..6).map(|i| number(&rec[i])).collect::<Result<_, _>>()?;
        let stats = BivariateGaussian::new(
            Vector2::new(v[0], v[1]),
            Matrix2::new(v[2], v[3], v[3], v[4]),
        )
        .map_err(|e| e.to_string())?;
        Ok(Table2Row {
            source: rec[0].to_string(),
            stats,
        })
    })
}

/// Writes `method,hour,min,q1,median,q3,max`.
pub fn write_fig6_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIG6_HEADER)?;
    for r in reports {
        for (h, s) in r.hourly.iter().enumerate() {
            w.write_record([
                r.method.clone(),
                h.to_string(),
                fmt(s.min),
                fmt(s.q1),
                fmt(s.median),
                fmt(s.q3),
                fmt(s.max),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Hourly summaries per method, in file order. Each method needs hours
/// 0..24 in order with `min ≤ q1 ≤ median ≤ q3 ≤ max`.
pub fn read_fig6_csv<R: Read>(source: R) -> Result<Vec<(String, Vec<FiveNumber>)>> {
    let rows = parse_rows(source, &FIG6_HEADER, |rec| {
        let hour: usize = rec[1].parse().map_err(|_| format!("bad hour `{}`", &rec[1]))?;
        let v: Vec<f64> = (2..7).map(|i| number(&rec[i])).collect::<Result<_, _>>()?;
        if v.windows(2).any(|w| w[0] > w[1]) {
            return Err("summary values must be nondecreasing".to_string());
        }
        let s = FiveNumber {
            min: v[0],
            q1: v[1],
            median: v[2],
            q3: v[3],
            max: v[4],
        };
        Ok((rec[0].to_string(), hour, s))
    })?;
    let mut out: Vec<(String, Vec<FiveNumber>)> = Vec::new();
    for (method, hour, s) in rows {
        match out.last_mut() {
            Some((m, v)) if *m == method && v.len() < HOURS_PER_DAY => {
                if hour != v.len() {
                    return Err(Error::ShapeMismatch(format!("{method}: hour {hour} out of order")));
                }
                v.push(s);
            }
            _ => {
                if hour != 0 {
                    return Err(Error::ShapeMismatch(format!("{method}: first hour is {hour}")));
                }
                out.push((method, vec![s]));
            }
        }
    }
    if let Some((m, v)) = out.iter().find(|(_, v)| v.len() != HOURS_PER_DAY) {
        return Err(Error::ShapeMismatch(format!("{m}: {} hours, expected {HOURS_PER_DAY}", v.len())));
    }
    Ok(out)
}

/// Writes `method,bin_lo,bin_hi,count`; the last row per method counts
/// values of 0.5 and above, with an empty upper edge.
pub fn write_fig8_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIG8_HEADER)?;
    for r in reports {
        let h = r.histogram()?;
        for i in 0..HIST_BINS {
            let (lo, hi) = Histogram::bin_edges(i);
            w.write_record([r.method.clone(), fmt2(lo), fmt2(hi), h.counts[i].to_string()])?;
        }
        let (lo, _) = Histogram::bin_edges(HIST_BINS);
        w.write_record([r.method.clone(), fmt2(lo), String::new(), h.overflow.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Histograms per method, in file order; each method needs its
/// `HIST_BINS + 1` rows in bin order.
pub fn read_fig8_csv<R: Read>(source: R) -> Result<Vec<(String, Histogram)>> {
    let rows = parse_rows(source, &FIG8_HEADER, |rec| {
        let lo = number(&rec[1])?;
        let count: usize = rec[3].parse().map_err(|_| format!("bad count `{}`", &rec[3]))?;
        Ok((rec[0].to_string(), lo, rec[2].is_empty(), count))
    })?;
    let per = HIST_BINS + 1;
    if rows.len() % per != 0 {
        return Err(Error::ShapeMismatch(format!("{} rows is not a multiple of {per}", rows.len())));
    }
    rows.chunks(per)
        .map(|chunk| {
            let method = chunk[0].0.clone();
            let mut h = Histogram {
                counts: [0; HIST_BINS],
                overflow: 0,
            };
            for (i, (m, lo, open, count)) in chunk.iter().enumerate() {
                let expect_lo = Histogram::bin_edges(i).0;
                if *m != method || (lo - expect_lo).abs() > 1e-9 || *open != (i == HIST_BINS) {
                    return Err(Error::ShapeMismatch(format!("{method}: bin {i} malformed")));
                }
                if i < HIST_BINS {
                    h.counts[i] = *count;
                } else {
                    h.overflow = *count;
                }
            }
            Ok((method, h))
        })
        .collect()
}

/// Reads a headed CSV, converting each record with `f` and collecting
/// every failing row.
fn parse_rows<R: Read, T>(
    source: R,
    header: &[&str],
    mut f: impl FnMut(&csv::StringRecord) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
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
    if found != header.join(",") {
        return Err(Error::Header {
            expected: header.join(","),
            found,
        });
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != header.len() {
                return Err(format!("expected {} fields, found {}", header.len(), rec.len()));
            }
            f(&rec)
        });
        match parsed {
            Ok(v) => out.push(v),
            Err(message) => bad.push(RowError { row, message }),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Rows(bad));
    }
    Ok(out)
}

fn number(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad number `{s}`")),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD / 2.0
    );
    s
}

/// Box plot of hourly errors for one method.
pub fn hourly_svg(method: &str, hourly: &[FiveNumber]) -> String {
    let top = hourly
        .iter()
        .map(|s| s.max)
        .fold(0.0, f64::max)
        .max(1e-9);
    let plot_h = H - 2.0 * PAD;
    let y = |v: f64| H - PAD - v / top * plot_h;
    let slot = (W - 1.5 * PAD) / hourly.len().max(1) as f64;
    let mut s = svg_open(&format!("Hourly error, {method}"));
    for (h, FiveNumber { min, q1, median, q3, max }) in hourly.iter().enumerate() {
        let cx = PAD + slot * (h as f64 + 0.5);
        let half = slot * 0.3;
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="gray"/>"#,
            y(*min),
            y(*max)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="lightsteelblue" stroke="black"/>"#,
            cx - half,
            y(*q3),
            2.0 * half,
            (y(*q1) - y(*q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(*median),
            cx + half,
            y(*median)
        );
        if h % 3 == 0 {
            let _ = writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{h}</text>"#, H - PAD + 14.0);
        }
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{top:.3}</text>"#, PAD - 4.0, PAD + 4.0);
    s.push_str("</svg>\n");
    s
}

/// Side-by-side histogram bars for each method.
pub fn histogram_svg(hists: &[(String, Histogram)]) -> String {
    const COLORS: [&str; 4] = ["#999999", "#4477aa", "#cc6677", "#228833"];
    let top = hists
        .iter()
        .flat_map(|(_, h)| h.counts.iter().copied().chain([h.overflow]))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let plot_h = H - 2.0 * PAD;
    let group = (W - 1.5 * PAD) / (HIST_BINS + 1) as f64;
    let bar = group * 0.8 / hists.len().max(1) as f64;
    let mut s = svg_open("Per-customer error distribution");
    for (m, (method, h)) in hists.iter().enumerate() {
        let color = COLORS[m % COLORS.len()];
        for (i, &c) in h.counts.iter().chain([&h.overflow]).enumerate() {
            let x = PAD + group * i as f64 + group * 0.1 + bar * m as f64;
            let height = c as f64 / top * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{bar:.1}" height="{height:.1}" fill="{color}"/>"#,
                H - PAD - height
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            W - 160.0,
            PAD + 14.0 * m as f64,
            method
        );
    }
    for i in 0..=HIST_BINS {
        let label = if i == HIST_BINS {
            "≥0.50".to_string()
        } else {
            format!("{:.2}", Histogram::bin_edges(i).0)
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            PAD + group * (i as f64 + 0.5),
            H - PAD + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}
