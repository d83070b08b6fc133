//! Seeded synthetic households with known HVAC and base loads.

mod household;

pub use household::{
    generate_household, simulate_hvac_minutes, HouseholdLoads, HouseholdSpec, MINUTES_PER_DAY,
};

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TemperatureMatrix;
use crate::preprocess::Label;
use crate::{HOURS_PER_DAY, SLOT_MINUTES};

/// Weather regime of a generated day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TempProfile {
    /// Daily maximum 32–38 °C.
    Hot,
    /// Daily maximum 16–21 °C.
    Mild,
    /// Daily maximum 23–28 °C.
    Shoulder,
}

impl TempProfile {
    pub fn peak_range(self) -> (f64, f64) {
        match self {
            TempProfile::Hot => (32.0, 38.0),
            TempProfile::Mild => (16.0, 21.0),
            TempProfile::Shoulder => (23.0, 28.0),
        }
    }
}

pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date")
}

/// Independent seed for stream `index` of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

/// One day of hourly temperatures: a cosine peaking at 15:00 with seeded
/// wiggle, shifted so the maximum equals a peak drawn from the profile band.
fn temperature_day(profile: TempProfile, rng: &mut ChaCha8Rng) -> [f64; HOURS_PER_DAY] {
    let (lo, hi) = profile.peak_range();
    let peak = rng.random_range(lo..=hi);
    let swing = rng.random_range(8.0..12.0);
    let wiggle = Normal::new(0.0, 0.3).expect("finite sigma");
    let mut out = [0.0; HOURS_PER_DAY];
    let mut w = 0.0;
    for (h, v) in out.iter_mut().enumerate() {
        w = 0.6 * w + wiggle.sample(rng);
        let phase = std::f64::consts::TAU * (h as f64 - 15.0) / HOURS_PER_DAY as f64;
        *v = -swing * (1.0 - phase.cos()) / 2.0 + w;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in out.iter_mut() {
        *v += peak - max;
    }
    out
}

fn temperature_matrix(profiles: &[TempProfile], start: NaiveDate, seed: u64) -> TemperatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = DMatrix::zeros(HOURS_PER_DAY, profiles.len());
    for (j, &p) in profiles.iter().enumerate() {
        let day = temperature_day(p, &mut rng);
        t.column_mut(j).copy_from_slice(&day);
    }
    let dates = (0..profiles.len())
        .map(|j| start + Days::new(j as u64))
        .collect();
    TemperatureMatrix::new(t, dates).expect("generated temperatures are within bounds")
}

/// `days` consecutive days of one weather regime, starting at
/// [`default_start`].
pub fn generate_temperature(days: usize, profile: TempProfile, seed: u64) -> TemperatureMatrix {
    temperature_matrix(&vec![profile; days], default_start(), seed)
}

/// Size and seed of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub households: usize,
    pub hot_days: usize,
    pub mild_days: usize,
    pub shoulder_days: usize,
    pub start_date: NaiveDate,
    /// Household seeds and the weather calendar derive from this. Set from
    /// the run's global seed rather than the config table.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            households: 20,
            hot_days: 30,
            mild_days: 24,
            shoulder_days: 2,
            start_date: default_start(),
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn days(&self) -> usize {
        self.hot_days + self.mild_days + self.shoulder_days
    }

    pub fn validate(&self) -> Result<()> {
        if self.households == 0 {
            return Err(Error::Config("corpus needs at least one household".into()));
        }
        if self.days() == 0 {
            return Err(Error::Config("corpus needs at least one day".into()));
        }
        Ok(())
    }
}

/// A generated household with its identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHousehold {
    pub id: String,
    pub spec: HouseholdSpec,
    pub loads: HouseholdLoads,
}

/// Households sharing one weather calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub temps: TemperatureMatrix,
    /// Weather regime of each day column.
    pub profiles: Vec<TempProfile>,
    pub households: Vec<SyntheticHousehold>,
}

pub fn household_id(index: usize) -> String {
    format!("h{index:03}")
}

/// Generates the weather calendar (regimes shuffled over consecutive
/// dates) and every household, in parallel.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut profiles = Vec::with_capacity(spec.days());
    profiles.extend(std::iter::repeat_n(TempProfile::Hot, spec.hot_days));
    profiles.extend(std::iter::repeat_n(TempProfile::Mild, spec.mild_days));
    profiles.extend(std::iter::repeat_n(TempProfile::Shoulder, spec.shoulder_days));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    profiles.shuffle(&mut rng);
    let temps = temperature_matrix(&profiles, spec.start_date, derive_seed(spec.seed, 1));
    let households = (0..spec.households)
        .into_par_iter()
        .map(|k| {
            let hs = HouseholdSpec::random(derive_seed(spec.seed, 1000 + k as u64));
            let loads = generate_household(&hs, &temps)?;
            Ok(SyntheticHousehold {
                id: household_id(k),
                spec: hs,
                loads,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        temps,
        profiles,
        households,
    })
}

/// Label a classifier should give a day with this much HVAC energy (kWh):
/// hot above 0.5, mild at zero, neither in between.
pub fn intended_label(hvac_kwh: f64) -> Label {
    if hvac_kwh > 0.5 {
        Label::Hot
    } else if hvac_kwh == 0.0 {
        Label::Mild
    } else {
        Label::Excluded
    }
}

/// Daily energy (kWh) of each column of a 15-minute kW matrix.
pub fn daily_energy(samples: &DMatrix<f64>) -> Vec<f64> {
    samples
        .column_iter()
        .map(|c| c.sum() * SLOT_MINUTES as f64 / 60.0)
        .collect()
}
