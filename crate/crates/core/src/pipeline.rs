//! Per-household analysis and corpus-level fine-tuning.
//!
//! [`analyze_household`] runs everything up to the ICA estimate for one
//! customer. [`run_households`] analyzes all customers in parallel, fits the
//! base-energy distribution the configured mode asks for and fine-tunes
//! every hot day, recomputing the candidate-side covariance between outer
//! passes.

use std::collections::HashMap;

use chrono::{Datelike, NaiveDate, TimeDelta};
use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{self, CustomerEstimate, EvalReport, Table2Row};
use crate::finetune::{
    energy_points, estimate_base_stats, gaussian_from_points, initial_gamma, BivariateGaussian,
    DisaggregationResult, FineTuneProblem, PdfMode,
};
use crate::ica::{extract_hvac, IcaOptions};
use crate::ingest::{
    build_day_matrix, build_temperature_matrix, resample_mean, DailyLoadMatrix, DroppedDay,
    TemperatureMatrix, TimeSeries,
};
use crate::preprocess::{
    build_residual_ensemble, classify_days, filter_liul_days, DayLabel, Label, LiulEvent,
};
use crate::synth::derive_seed;
use crate::SLOT_MINUTES;

/// Raw inputs of one customer.
#[derive(Debug, Clone)]
pub struct HouseholdInput {
    pub id: String,
    pub power: TimeSeries,
    pub temperature: TimeSeries,
}

/// A hot day after ICA.
#[derive(Debug, Clone, PartialEq)]
pub struct HotDay {
    pub date: NaiveDate,
    /// LIUL-filtered total load, kW.
    pub total: DVector<f64>,
    pub temps: Vec<f64>,
    /// Mild-average benchmark estimate.
    pub hvac_avg: DVector<f64>,
    pub hvac_ica: DVector<f64>,
    pub ica_correlation: f64,
    pub weak_linkage: bool,
    pub ica_converged: bool,
    /// Columns of the filtered mild matrix used for this day.
    pub mild_indices: Vec<usize>,
}

/// Everything known about a customer before fine-tuning.
#[derive(Debug, Clone)]
pub struct HouseholdAnalysis {
    pub id: String,
    pub labels: Vec<DayLabel>,
    pub dropped: Vec<DroppedDay>,
    pub liul_events: Vec<LiulEvent>,
    pub temps: TemperatureMatrix,
    /// LIUL-filtered mild days.
    pub mild: DailyLoadMatrix,
    pub hot: Vec<HotDay>,
    /// Hot days ICA could not process, with the reason.
    pub skipped: Vec<(NaiveDate, String)>,
}

fn ingest(input: &HouseholdInput, cfg: &PipelineConfig) -> Result<(DailyLoadMatrix, Vec<DroppedDay>, TemperatureMatrix)> {
    let power = resample_mean(&input.power, TimeDelta::minutes(SLOT_MINUTES as i64))?;
    let (loads, dropped) = build_day_matrix(&power, cfg.ingest.max_missing_fraction)?;
    let temps = build_temperature_matrix(&input.temperature, loads.dates())?;
    Ok((loads, dropped, temps))
}

/// Classification, LIUL filtering, residual ensembles and ICA for one
/// customer. `index` is the customer's position in the sorted run and seeds
/// the per-day ICA starts.
pub fn analyze_household(input: &HouseholdInput, index: usize, cfg: &PipelineConfig) -> Result<HouseholdAnalysis> {
    let (loads, dropped, temps) = ingest(input, cfg)?;
    let labels = classify_days(&loads, &temps, &cfg.classify)?;
    let (filtered, liul_events) = filter_liul_days(&loads, &cfg.liul);
    let of = |l: Label| -> Vec<usize> { (0..labels.len()).filter(|&j| labels[j].label == l).collect() };
    let (hot_idx, mild_idx) = (of(Label::Hot), of(Label::Mild));
    if hot_idx.is_empty() {
        return Err(Error::NoHotDays);
    }
    if mild_idx.is_empty() {
        return Err(Error::NoMildDays);
    }
    let mild = filtered.select(&mild_idx)?;
    let mild_mean = mild.samples().column_mean();
    let household_seed = derive_seed(cfg.seed ^ cfg.ica.seed, index as u64);

    let mut hot = Vec::with_capacity(hot_idx.len());
    let mut skipped = Vec::new();
    for &j in &hot_idx {
        let date = filtered.dates()[j];
        let total = filtered.column(j);
        let day_temps: Vec<f64> = temps.column(j).iter().copied().collect();
        let opts = IcaOptions {
            seed: derive_seed(household_seed, date.num_days_from_ce() as u64),
            ..cfg.ica.clone()
        };
        let outcome = build_residual_ensemble(&total, date, &mild, cfg.residual.k_use)
            .and_then(|ens| extract_hvac(&ens, &day_temps, &opts).map(|r| (ens, r)));
        match outcome {
            Ok((ens, (model, est))) => {
                let hvac_avg = total.zip_map(&mild_mean, |p, m| (p - m).max(0.0));
                hot.push(HotDay {
                    date,
                    total,
                    temps: day_temps,
                    hvac_avg,
                    hvac_ica: est.profile,
                    ica_correlation: est.correlation,
                    weak_linkage: est.weak_linkage,
                    ica_converged: model.converged,
                    mild_indices: ens.mild_indices,
                });
            }
            Err(e) => {
                log::warn!("{}: skipping {date}: {e}", input.id);
                skipped.push((date, e.to_string()));
            }
        }
    }
    Ok(HouseholdAnalysis {
        id: input.id.clone(),
        labels,
        dropped,
        liul_events,
        temps,
        mild,
        hot,
        skipped,
    })
}

/// Fine-tuning outcome of one hot day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayOutcome {
    pub date: NaiveDate,
    pub result: std::result::Result<DisaggregationResult, String>,
}

/// One customer's analysis with its fine-tuned days (aligned with
/// `analysis.hot`).
#[derive(Debug, Clone)]
pub struct HouseholdRun {
    pub analysis: HouseholdAnalysis,
    pub outcomes: Vec<DayOutcome>,
    /// Target distribution the KL term used for this customer.
    pub base_stats: BivariateGaussian,
}

impl HouseholdRun {
    /// Hot days that were neither skipped nor failed, with their results.
    pub fn completed(&self) -> impl Iterator<Item = (&HotDay, &DisaggregationResult)> {
        self.analysis
            .hot
            .iter()
            .zip(&self.outcomes)
            .filter_map(|(d, o)| o.result.as_ref().ok().map(|r| (d, r)))
    }

    pub fn infeasible_days(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| !matches!(&o.result, Ok(r) if r.feasible))
            .count()
            + self.analysis.skipped.len()
    }
}

fn base_energy_points(a: &HouseholdAnalysis, cfg: &PipelineConfig) -> Vec<Vector2<f64>> {
    energy_points(
        a.mild.samples(),
        &cfg.finetune.diurnal_window,
        &cfg.finetune.nocturnal_window,
    )
}

/// Per-customer Gaussians that keep each customer's own mean but share one
/// covariance, estimated from every customer's points around their mean.
fn pooled_within(per: &[Vec<Vector2<f64>>]) -> Result<Vec<BivariateGaussian>> {
    let means: Vec<Vector2<f64>> = per
        .iter()
        .map(|p| p.iter().sum::<Vector2<f64>>() / p.len().max(1) as f64)
        .collect();
    let centered: Vec<Vector2<f64>> = per
        .iter()
        .zip(&means)
        .flat_map(|(p, m)| p.iter().map(move |x| x - m))
        .collect();
    let pooled = gaussian_from_points(&centered)?;
    Ok(means.iter().map(|m| pooled.with_mean(*m)).collect())
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Analyzes and fine-tunes every customer. Inputs are processed in the order
/// given; results do not depend on `workers`.
pub fn run_households(inputs: &[HouseholdInput], cfg: &PipelineConfig, workers: usize) -> Result<Vec<HouseholdRun>> {
    cfg.validate()?;
    with_pool(workers, || run_inner(inputs, cfg))?
}

fn run_inner(inputs: &[HouseholdInput], cfg: &PipelineConfig) -> Result<Vec<HouseholdRun>> {
    let analyses = inputs
        .par_iter()
        .enumerate()
        .map(|(k, input)| analyze_household(input, k, cfg).map_err(|e| e.for_customer(&input.id)))
        .collect::<Result<Vec<_>>>()?;
    fine_tune_households(analyses, cfg)
}

/// Fits the base-energy targets and fine-tunes every analyzed hot day.
pub fn fine_tune_households(analyses: Vec<HouseholdAnalysis>, cfg: &PipelineConfig) -> Result<Vec<HouseholdRun>> {
    let ft = &cfg.finetune;
    let (di, noc) = (&ft.diurnal_window, &ft.nocturnal_window);
    let stats: Vec<BivariateGaussian> = match ft.pdf_mode {
        PdfMode::MultiUser => {
            let per: Vec<Vec<Vector2<f64>>> = analyses.iter().map(|a| base_energy_points(a, cfg)).collect();
            pooled_within(&per)?
        }
        PdfMode::SingleUser | PdfMode::Off => analyses
            .iter()
            .map(|a| estimate_base_stats(a.mild.samples(), di, noc).map_err(|e| e.for_customer(&a.id)))
            .collect::<Result<_>>()?,
    };
    let gammas: Vec<(f64, f64)> = analyses
        .iter()
        .map(|a| initial_gamma(a.hot.iter().map(|d| (d.hvac_ica.as_slice(), d.temps.as_slice()))))
        .collect();
    let mild_subsets: Vec<Vec<DMatrix<f64>>> = analyses
        .iter()
        .map(|a| {
            a.hot
                .iter()
                .map(|d| a.mild.select(&d.mild_indices).map(|m| m.samples().clone()))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = analyses
        .iter()
        .enumerate()
        .flat_map(|(h, a)| (0..a.hot.len()).map(move |d| (h, d)))
        .collect();
    let mut candidates: Vec<BivariateGaussian> = stats.clone();
    let mut results: HashMap<(usize, usize), std::result::Result<DisaggregationResult, String>> = HashMap::new();
    for pass in 0..ft.solver.outer_passes {
        if pass > 0 {
            candidates = candidate_stats(&analyses, &results, &stats, cfg);
        }
        let solved: Vec<_> = jobs
            .par_iter()
            .map(|&(h, d)| {
                let a = &analyses[h];
                let day = &a.hot[d];
                let r = FineTuneProblem::new(
                    day.total.as_slice(),
                    day.hvac_ica.as_slice(),
                    &mild_subsets[h][d],
                    &day.temps,
                    &stats[h],
                    ft,
                )
                .map(|p| p.with_candidate(candidates[h]))
                .and_then(|p| p.solve(p.initial_vars(gammas[h])))
                .map_err(|e| {
                    log::warn!("{}: fine-tuning {} failed: {e}", a.id, day.date);
                    e.to_string()
                });
                ((h, d), r)
            })
            .collect();
        results = solved.into_iter().collect();
    }

    Ok(analyses
        .into_iter()
        .enumerate()
        .map(|(h, analysis)| {
            let outcomes = (0..analysis.hot.len())
                .map(|d| DayOutcome {
                    date: analysis.hot[d].date,
                    result: results.remove(&(h, d)).expect("every job ran"),
                })
                .collect();
            HouseholdRun {
                analysis,
                outcomes,
                base_stats: stats[h],
            }
        })
        .collect())
}

/// Candidate-side covariance from the previous pass' fine-tuned base
/// profiles; falls back to the target where too few are available.
fn candidate_stats(
    analyses: &[HouseholdAnalysis],
    results: &HashMap<(usize, usize), std::result::Result<DisaggregationResult, String>>,
    stats: &[BivariateGaussian],
    cfg: &PipelineConfig,
) -> Vec<BivariateGaussian> {
    let ft = &cfg.finetune;
    let points_of = |h: usize| -> Vec<Vector2<f64>> {
        (0..analyses[h].hot.len())
            .filter_map(|d| results.get(&(h, d)).and_then(|r| r.as_ref().ok()))
            .map(|r| {
                let b = r.base_hat.as_slice();
                Vector2::new(ft.diurnal_window.energy(b), ft.nocturnal_window.energy(b))
            })
            .collect()
    };
    match ft.pdf_mode {
        PdfMode::MultiUser => {
            let per: Vec<_> = (0..analyses.len()).map(points_of).collect();
            pooled_within(&per).unwrap_or_else(|_| stats.to_vec())
        }
        _ => (0..analyses.len())
            .map(|h| gaussian_from_points(&points_of(h)).unwrap_or(stats[h]))
            .collect(),
    }
}

/// Per-day estimates of one customer, as written to `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DayEstimates {
    pub date: NaiveDate,
    pub total: Vec<f64>,
    pub hvac_avg: Vec<f64>,
    pub hvac_ica: Vec<f64>,
    pub hvac_hat: Vec<f64>,
    pub base_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerResults {
    pub id: String,
    pub days: Vec<DayEstimates>,
}

impl HouseholdRun {
    /// Estimates of every completed hot day.
    pub fn estimates(&self) -> CustomerResults {
        CustomerResults {
            id: self.analysis.id.clone(),
            days: self
                .completed()
                .map(|(d, r)| DayEstimates {
                    date: d.date,
                    total: d.total.as_slice().to_vec(),
                    hvac_avg: d.hvac_avg.as_slice().to_vec(),
                    hvac_ica: d.hvac_ica.as_slice().to_vec(),
                    hvac_hat: r.hvac_hat.as_slice().to_vec(),
                    base_hat: r.base_hat.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

pub const METHOD_AVERAGE: &str = "average";
pub const METHOD_ICA: &str = "ica";
pub const METHOD_FINE_TUNED: &str = "fine-tuned";

/// Scores of the three methods plus the base-energy distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Average, ICA, fine-tuned.
    pub reports: Vec<EvalReport>,
    /// Actual, ICA, proposed.
    pub table2: Vec<Table2Row>,
}

/// Ground truth for one customer: the full 15-minute HVAC series.
#[derive(Debug, Clone)]
pub struct CustomerTruth {
    pub id: String,
    pub hvac: TimeSeries,
}

/// Scores the Average, ICA and fine-tuned estimates against truth.
///
/// Ratings come from the 99th percentile of each customer's truth, or
/// `nameplate_kw` when that percentile is zero.
pub fn evaluate_results(
    results: &[CustomerResults],
    truth: &[CustomerTruth],
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let ft = &cfg.finetune;
    let mut per_method: [Vec<CustomerEstimate>; 3] = Default::default();
    let mut bases: [Vec<DVector<f64>>; 3] = Default::default();
    for c in results {
        if c.days.is_empty() {
            continue;
        }
        let t = truth
            .iter()
            .find(|t| t.id == c.id)
            .ok_or_else(|| Error::MissingTruth(c.id.clone()))?;
        let series = resample_mean(&t.hvac, TimeDelta::minutes(SLOT_MINUTES as i64))?;
        let rating = match eval::rating_from_truth(series.values()) {
            Ok(r) => r,
            Err(e) => cfg.eval.nameplate_kw.ok_or(e).map_err(|e| e.for_customer(&c.id))?,
        };
        let (truth_days, _) = build_day_matrix(&series, 0.0)?;
        let n = c.days[0].total.len();
        let mut truth_m = DMatrix::zeros(n, c.days.len());
        for (j, d) in c.days.iter().enumerate() {
            let col = truth_days
                .position(d.date)
                .ok_or_else(|| Error::MissingTruth(format!("{} on {}", c.id, d.date)))?;
            truth_m.set_column(j, &truth_days.column(col));
            let total = DVector::from_column_slice(&d.total);
            bases[0].push(&total - truth_days.column(col));
            bases[1].push(total.zip_map(&DVector::from_column_slice(&d.hvac_ica), |p, h| p - h));
            bases[2].push(DVector::from_column_slice(&d.base_hat));
        }
        let est = |f: fn(&DayEstimates) -> &Vec<f64>| {
            DMatrix::from_fn(n, c.days.len(), |i, j| f(&c.days[j])[i])
        };
        for (m, f) in [
            (0, (|d: &DayEstimates| &d.hvac_avg) as fn(&DayEstimates) -> &Vec<f64>),
            (1, |d: &DayEstimates| &d.hvac_ica),
            (2, |d: &DayEstimates| &d.hvac_hat),
        ] {
            per_method[m].push(CustomerEstimate {
                id: c.id.clone(),
                rating_kw: rating,
                estimate: est(f),
                truth: truth_m.clone(),
            });
        }
    }
    let reports = [METHOD_AVERAGE, METHOD_ICA, METHOD_FINE_TUNED]
        .iter()
        .zip(&per_method)
        .map(|(name, c)| eval::evaluate_method(name, c))
        .collect::<Result<Vec<_>>>()?;
    let table2 = ["actual", METHOD_ICA, "proposed"]
        .iter()
        .zip(&bases)
        .map(|(name, cols)| {
            let m = DMatrix::from_columns(cols);
            estimate_base_stats(&m, &ft.diurnal_window, &ft.nocturnal_window).map(|stats| Table2Row {
                source: name.to_string(),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { reports, table2 })
}

/// Pipeline inputs and truth for a generated corpus, without touching disk.
pub fn corpus_inputs(corpus: &crate::synth::Corpus) -> (Vec<HouseholdInput>, Vec<CustomerTruth>) {
    let temperature = corpus.temps.to_series();
    corpus
        .households
        .iter()
        .map(|h| {
            (
                HouseholdInput {
                    id: h.id.clone(),
                    power: h.loads.total.to_series(),
                    temperature: temperature.clone(),
                },
                CustomerTruth {
                    id: h.id.clone(),
                    hvac: h.loads.hvac.to_series(),
                },
            )
        })
        .unzip()
}
