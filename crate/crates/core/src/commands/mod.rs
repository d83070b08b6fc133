//! The `synth`, `disaggregate`, `evaluate` and `report` commands.
//!
//! Run directory layout:
//!
//! ```text
//! <out>/config.resolved.toml       every command
//! <out>/manifest.json              synth
//! <out>/<id>/power.csv             synth
//! <out>/<id>/temperature.csv       synth
//! <out>/<id>/truth.csv             synth
//! <out>/<id>/labels.csv            disaggregate
//! <out>/<id>/results.csv           disaggregate
//! <out>/<id>/days.csv              disaggregate
//! <out>/<id>/liul.csv              disaggregate
//! <out>/table1.csv, table2.csv     evaluate
//! <out>/fig6_hourly.csv            evaluate
//! <out>/fig8_hist.csv              evaluate
//! <out>/*.svg                      evaluate, report
//! <out>/report.md                  report
//! ```

mod files;

pub use files::{read_results_csv, write_days_csv, write_liul_csv, write_results_csv, RESULTS_HEADER};

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{self, FiveNumber, Histogram, Table1Row, Table2Row};
use crate::ingest::{read_series, SeriesKind};
use crate::pipeline::{self, CustomerResults, CustomerTruth, Evaluation, HouseholdInput};
use crate::preprocess::write_labels_csv;
use crate::synth::{self, daily_energy, intended_label, HouseholdSpec, TempProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const MANIFEST: &str = "manifest.json";

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

/// Writes the config into the run directory with `out_dir` set to `out` and
/// every path made absolute, so the file can be loaded from anywhere.
fn write_resolved(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let mut resolved = cfg.clone();
    resolved.out_dir = absolute(out)?;
    let input = &mut resolved.input;
    if let Some(d) = input.corpus_dir.as_mut() {
        *d = absolute(d)?;
    }
    for c in &mut input.customers {
        c.power = absolute(&c.power)?;
        c.temperature = absolute(&c.temperature)?;
        if let Some(t) = c.truth.as_mut() {
            *t = absolute(t)?;
        }
    }
    write_file(&out.join(RESOLVED_CONFIG), &resolved.to_toml())
}

#[derive(Debug, Serialize)]
struct ManifestDay {
    date: NaiveDate,
    profile: TempProfile,
}

#[derive(Debug, Serialize)]
struct ManifestHousehold<'a> {
    id: &'a str,
    spec: &'a HouseholdSpec,
    /// Label a classifier should assign to each day.
    intended: Vec<(NaiveDate, String)>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    seed: u64,
    days: Vec<ManifestDay>,
    households: Vec<ManifestHousehold<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub households: usize,
    pub days: usize,
    pub files: Vec<PathBuf>,
}

/// Generates the corpus described by `cfg.synth`, seeded by `cfg.seed`.
///
/// The resolved config written alongside points `input.corpus_dir` at the
/// run directory, so it can be passed straight to `disaggregate`. Both
/// paths are relative to the file.
pub fn synth(cfg: &PipelineConfig, out: &Path) -> Result<SynthSummary> {
    cfg.validate()?;
    let spec = synth::CorpusSpec {
        seed: cfg.seed,
        ..cfg.synth.clone()
    };
    let corpus = synth::generate_corpus(&spec)?;
    create_dir(out)?;
    let temperature = corpus.temps.to_series();
    let mut files = Vec::new();
    for h in &corpus.households {
        let dir = out.join(&h.id);
        create_dir(&dir)?;
        for (name, series, kind) in [
            ("power.csv", h.loads.total.to_series(), SeriesKind::Power),
            ("temperature.csv", temperature.clone(), SeriesKind::Temperature),
            ("truth.csv", h.loads.hvac.to_series(), SeriesKind::HvacTruth),
        ] {
            let path = dir.join(name);
            series.write_csv(kind, create(&path)?)?;
            files.push(path);
        }
    }

    let dates = corpus.temps.dates();
    let manifest = Manifest {
        seed: cfg.seed,
        days: dates
            .iter()
            .zip(&corpus.profiles)
            .map(|(&date, &profile)| ManifestDay { date, profile })
            .collect(),
        households: corpus
            .households
            .iter()
            .map(|h| ManifestHousehold {
                id: &h.id,
                spec: &h.spec,
                intended: dates
                    .iter()
                    .zip(daily_energy(h.loads.hvac.samples()))
                    .map(|(&d, e)| (d, intended_label(e).to_string()))
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_file(&out.join(MANIFEST), &(json + "\n"))?;

    // Relative paths keep the generated corpus relocatable.
    let mut resolved = cfg.clone();
    resolved.out_dir = PathBuf::from(".");
    resolved.input.corpus_dir = Some(PathBuf::from("."));
    resolved.input.customers.clear();
    write_file(&out.join(RESOLVED_CONFIG), &resolved.to_toml())?;
    Ok(SynthSummary {
        households: corpus.households.len(),
        days: dates.len(),
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisaggregateSummary {
    pub customers: usize,
    pub hot_days: usize,
    pub feasible: usize,
    /// Hot days that ended infeasible, failed in fine-tuning or were
    /// skipped by ICA.
    pub not_feasible: usize,
}

impl DisaggregateSummary {
    pub fn exit_code(&self) -> i32 {
        if self.not_feasible > 0 {
            EXIT_INFEASIBLE
        } else {
            EXIT_OK
        }
    }
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Vec<HouseholdInput>> {
    let policy = cfg.ingest.duplicate_policy;
    cfg.input
        .resolve_customers()?
        .into_iter()
        .map(|c| {
            let load = || -> Result<HouseholdInput> {
                Ok(HouseholdInput {
                    power: read_series(open(&c.power)?, SeriesKind::Power, policy)?,
                    temperature: read_series(open(&c.temperature)?, SeriesKind::Temperature, policy)?,
                    id: c.id.clone(),
                })
            };
            load().map_err(|e| e.for_customer(&c.id))
        })
        .collect()
}

/// Runs the pipeline on every configured customer and writes the
/// per-customer files.
pub fn disaggregate(cfg: &PipelineConfig, out: &Path, workers: usize) -> Result<DisaggregateSummary> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let runs = pipeline::run_households(&inputs, cfg, workers)?;
    create_dir(out)?;
    let mut summary = DisaggregateSummary {
        customers: runs.len(),
        hot_days: 0,
        feasible: 0,
        not_feasible: 0,
    };
    for run in &runs {
        let dir = out.join(&run.analysis.id);
        create_dir(&dir)?;
        write_labels_csv(&run.analysis.labels, create(&dir.join("labels.csv"))?)?;
        write_results_csv(&run.estimates().days, create(&dir.join("results.csv"))?)?;
        write_days_csv(run, create(&dir.join("days.csv"))?)?;
        write_liul_csv(run, create(&dir.join("liul.csv"))?)?;
        let bad = run.infeasible_days();
        summary.hot_days += run.outcomes.len() + run.analysis.skipped.len();
        summary.not_feasible += bad;
        if bad > 0 {
            log::warn!("{}: {bad} hot day(s) without a feasible result", run.analysis.id);
        }
    }
    summary.feasible = summary.hot_days - summary.not_feasible;
    write_resolved(cfg, out)?;
    Ok(summary)
}

/// Scores the results under `out` against each customer's truth file and
/// writes the report CSVs (and SVGs when enabled).
pub fn evaluate(cfg: &PipelineConfig, out: &Path) -> Result<Evaluation> {
    cfg.validate()?;
    let customers = cfg.input.resolve_customers()?;
    let mut results = Vec::with_capacity(customers.len());
    let mut truth = Vec::with_capacity(customers.len());
    for c in &customers {
        let path = c.truth.as_ref().ok_or_else(|| Error::MissingTruth(c.id.clone()))?;
        let load = || -> Result<(CustomerResults, CustomerTruth)> {
            let hvac = read_series(open(path)?, SeriesKind::HvacTruth, cfg.ingest.duplicate_policy)?;
            let days = read_results_csv(open(&out.join(&c.id).join("results.csv"))?)?;
            Ok((
                CustomerResults {
                    id: c.id.clone(),
                    days,
                },
                CustomerTruth {
                    id: c.id.clone(),
                    hvac,
                },
            ))
        };
        let (r, t) = load().map_err(|e| e.for_customer(&c.id))?;
        results.push(r);
        truth.push(t);
    }
    let ev = pipeline::evaluate_results(&results, &truth, cfg)?;
    eval::write_table1_csv(&ev.reports, create(&out.join("table1.csv"))?)?;
    eval::write_table2_csv(&ev.table2, create(&out.join("table2.csv"))?)?;
    eval::write_fig6_csv(&ev.reports, create(&out.join("fig6_hourly.csv"))?)?;
    eval::write_fig8_csv(&ev.reports, create(&out.join("fig8_hist.csv"))?)?;
    if cfg.eval.svg {
        let hourly: Vec<(String, Vec<FiveNumber>)> =
            ev.reports.iter().map(|r| (r.method.clone(), r.hourly.clone())).collect();
        let hists = ev
            .reports
            .iter()
            .map(|r| Ok((r.method.clone(), r.histogram()?)))
            .collect::<Result<Vec<_>>>()?;
        write_svgs(out, &hourly, &hists)?;
    }
    write_resolved(cfg, out)?;
    Ok(ev)
}

fn write_svgs(out: &Path, hourly: &[(String, Vec<FiveNumber>)], hists: &[(String, Histogram)]) -> Result<()> {
    for (method, h) in hourly {
        write_file(&out.join(format!("fig6_{method}.svg")), &eval::hourly_svg(method, h))?;
    }
    write_file(&out.join("fig8_hist.svg"), &eval::histogram_svg(hists))
}

/// Renders `report.md` and the SVG plots from the report CSVs under `out`.
/// Returns the markdown.
pub fn report(out: &Path) -> Result<String> {
    let table1 = eval::read_table1_csv(open(&out.join("table1.csv"))?)?;
    let table2 = eval::read_table2_csv(open(&out.join("table2.csv"))?)?;
    let hourly = eval::read_fig6_csv(open(&out.join("fig6_hourly.csv"))?)?;
    let hists = eval::read_fig8_csv(open(&out.join("fig8_hist.csv"))?)?;
    write_svgs(out, &hourly, &hists)?;
    let md = render_markdown(&table1, &table2, &hourly, &hists);
    write_file(&out.join("report.md"), &md)?;
    Ok(md)
}

fn render_markdown(
    table1: &[Table1Row],
    table2: &[Table2Row],
    hourly: &[(String, Vec<FiveNumber>)],
    hists: &[(String, Histogram)],
) -> String {
    let mut s = String::from("# Disaggregation report\n\n## Accuracy\n\n");
    s.push_str("nMAE is the per-day sum of |error| / rating averaged over days (percent).\n\n");
    s.push_str("| method | nMAE mean | nEE mean | nMAE std |\n|---|---:|---:|---:|\n");
    for r in table1 {
        let _ = writeln!(s, "| {} | {:.2} | {:.2} | {:.2} |", r.method, r.nmae_mean, r.nee_mean, r.nmae_std);
    }
    s.push_str("\n## Base-load energy (kWh)\n\n");
    s.push_str("| source | μ diurnal | μ nocturnal | Σ di,di | Σ di,noc | Σ noc,noc |\n|---|---:|---:|---:|---:|---:|\n");
    for r in table2 {
        let (mu, sg) = (r.stats.mu(), r.stats.sigma());
        let _ = writeln!(
            s,
            "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
            r.source,
            mu[0],
            mu[1],
            sg[(0, 0)],
            sg[(0, 1)],
            sg[(1, 1)]
        );
    }
    s.push_str("\n## Hourly error (median, fraction of rating)\n\n| hour |");
    for (m, _) in hourly {
        let _ = write!(s, " {m} |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(hourly.len()));
    s.push('\n');
    for h in 0..crate::HOURS_PER_DAY {
        let _ = write!(s, "| {h} |");
        for (_, v) in hourly {
            let _ = write!(s, " {:.4} |", v[h].median);
        }
        s.push('\n');
    }
    s.push_str("\n## Customers per error bin\n\n| bin |");
    for (m, _) in hists {
        let _ = write!(s, " {m} |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(hists.len()));
    s.push('\n');
    for i in 0..=eval::HIST_BINS {
        let (lo, hi) = Histogram::bin_edges(i);
        if i < eval::HIST_BINS {
            let _ = write!(s, "| [{lo:.2}, {hi:.2}) |");
        } else {
            let _ = write!(s, "| ≥ {lo:.2} |");
        }
        for (_, h) in hists {
            let c = if i < eval::HIST_BINS { h.counts[i] } else { h.overflow };
            let _ = write!(s, " {c} |");
        }
        s.push('\n');
    }
    s.push_str("\nPlots: `fig6_<method>.svg`, `fig8_hist.svg`.\n");
    s
}
