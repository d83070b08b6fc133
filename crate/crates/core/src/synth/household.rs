use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DailyLoadMatrix, TemperatureMatrix};
use crate::{SLOTS_PER_DAY, SLOT_MINUTES};

/// Physical and behavioural parameters of one synthetic household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseholdSpec {
    /// Electrical draw of the compressor when on, kW.
    pub hvac_rating_kw: f64,
    /// Coefficient of performance: kW of heat removed per kW drawn.
    pub cop: f64,
    /// °C/kW.
    pub thermal_resistance: f64,
    /// kWh/°C.
    pub thermal_capacitance: f64,
    pub setpoint_c: f64,
    pub deadband_c: f64,
    /// Typical base load per slot, kW.
    pub base_day_shape: Vec<f64>,
    /// Standard deviation of the per-day multiplicative scale on the shape.
    pub base_scale_sigma: f64,
    /// Amplitude of the slow seasonal drift of the base scale.
    pub base_drift: f64,
    /// Marginal standard deviation of the AR(1) slot noise, kW.
    pub base_noise_sigma: f64,
    /// Lag-one correlation of the slot noise.
    pub base_noise_ar: f64,
    pub fridge_period_slots: usize,
    pub fridge_amplitude_kw: f64,
    pub liul_events_per_week: f64,
    pub seed: u64,
}

impl HouseholdSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hvac_rating_kw", self.hvac_rating_kw),
            ("cop", self.cop),
            ("thermal_resistance", self.thermal_resistance),
            ("thermal_capacitance", self.thermal_capacitance),
            ("deadband_c", self.deadband_c),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.base_day_shape.len() != SLOTS_PER_DAY
            || self.base_day_shape.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Config(format!(
                "base_day_shape needs {SLOTS_PER_DAY} finite nonnegative values"
            )));
        }
        let nonneg = [
            ("base_scale_sigma", self.base_scale_sigma),
            ("base_drift", self.base_drift),
            ("base_noise_sigma", self.base_noise_sigma),
            ("fridge_amplitude_kw", self.fridge_amplitude_kw),
            ("liul_events_per_week", self.liul_events_per_week),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.base_noise_ar) {
            return Err(Error::Config("base_noise_ar must lie in [0, 1)".into()));
        }
        if self.fridge_period_slots < 2 {
            return Err(Error::Config("fridge_period_slots must be at least 2".into()));
        }
        Ok(())
    }

    /// A plausible household drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let night = rng.random_range(0.35..0.7);
        let morning = rng.random_range(0.4..1.0);
        let morning_at = rng.random_range(6.5..8.5);
        let evening = rng.random_range(0.8..1.8);
        let evening_at = rng.random_range(18.0..20.5);
        let midday = rng.random_range(0.1..0.5);
        let base_day_shape = (0..SLOTS_PER_DAY)
            .map(|i| {
                let h = (i as f64 + 0.5) * SLOT_MINUTES as f64 / 60.0;
                let bump = |a: f64, at: f64, w: f64| a * (-((h - at) / w).powi(2)).exp();
                night + bump(morning, morning_at, 1.2) + bump(midday, 13.0, 3.0) + bump(evening, evening_at, 2.0)
            })
            .collect();
        Self {
            hvac_rating_kw: rng.random_range(2.5..4.0),
            cop: rng.random_range(2.7..3.3),
            thermal_resistance: rng.random_range(1.6..2.4),
            thermal_capacitance: rng.random_range(0.8..1.5),
            setpoint_c: rng.random_range(23.0..25.0),
            deadband_c: rng.random_range(0.4..0.8),
            base_day_shape,
            base_scale_sigma: rng.random_range(0.10..0.18),
            base_drift: rng.random_range(0.10..0.20),
            base_noise_sigma: rng.random_range(0.03..0.06),
            base_noise_ar: 0.7,
            fridge_period_slots: rng.random_range(3..6),
            fridge_amplitude_kw: rng.random_range(0.1..0.2),
            liul_events_per_week: rng.random_range(1.0..3.0),
            seed: rng.random(),
        }
    }
}

/// Ground-truth day matrices of one generated household.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdLoads {
    pub total: DailyLoadMatrix,
    pub hvac: DailyLoadMatrix,
    pub base: DailyLoadMatrix,
}

/// Outdoor temperature `minute` minutes into day `j`, interpolated between
/// hourly readings (the last hour of the final day is held).
fn outdoor_at(temps: &DMatrix<f64>, j: usize, minute: usize) -> f64 {
    let h = minute / 60;
    let frac = (minute % 60) as f64 / 60.0;
    let now = temps[(h, j)];
    let next = if h + 1 < temps.nrows() {
        temps[(h + 1, j)]
    } else if j + 1 < temps.ncols() {
        temps[(0, j + 1)]
    } else {
        now
    };
    now + (next - now) * frac
}

pub const MINUTES_PER_DAY: usize = 1440;

/// Compressor draw (kW) minute by minute over the consecutive day columns
/// of `temps`, one day after another.
///
/// Indoor temperature follows a first-order RC model toward the outdoor
/// temperature, pulled down by `R·COP·rating` while the compressor runs.
/// The thermostat switches on above `setpoint + deadband/2` and off below
/// `setpoint − deadband/2`.
pub fn simulate_hvac_minutes(spec: &HouseholdSpec, temps: &DMatrix<f64>) -> Vec<f64> {
    let dt = 1.0 / 60.0;
    let decay = (-dt / (spec.thermal_resistance * spec.thermal_capacitance)).exp();
    let cooling_c = spec.thermal_resistance * spec.cop * spec.hvac_rating_kw;
    let (upper, lower) = (
        spec.setpoint_c + spec.deadband_c / 2.0,
        spec.setpoint_c - spec.deadband_c / 2.0,
    );
    let mut indoor = spec.setpoint_c;
    let mut on = false;
    let mut out = Vec::with_capacity(temps.ncols() * MINUTES_PER_DAY);
    for j in 0..temps.ncols() {
        for m in 0..MINUTES_PER_DAY {
            if indoor > upper {
                on = true;
            } else if indoor < lower {
                on = false;
            }
            out.push(if on { spec.hvac_rating_kw } else { 0.0 });
            let equilibrium = outdoor_at(temps, j, m) - if on { cooling_c } else { 0.0 };
            indoor = equilibrium + (indoor - equilibrium) * decay;
        }
    }
    out
}

/// Simulates the household over the consecutive day columns of `temps`.
///
/// HVAC comes from [`simulate_hvac_minutes`] averaged to 15-minute slots.
/// Base load is the standby floor of the day shape plus the activity above
/// it times a per-day scale with slow drift, plus a
/// fridge square wave, AR(1) noise and occasional rectangular high-power
/// pulses.
pub fn generate_household(spec: &HouseholdSpec, temps: &TemperatureMatrix) -> Result<HouseholdLoads> {
    spec.validate()?;
    let t = temps.temps();
    let days = t.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let minutes = simulate_hvac_minutes(spec, t);
    let hvac = DMatrix::from_fn(SLOTS_PER_DAY, days, |i, j| {
        let start = j * MINUTES_PER_DAY + i * SLOT_MINUTES;
        minutes[start..start + SLOT_MINUTES].iter().sum::<f64>() / SLOT_MINUTES as f64
    });

    let scale_noise = Normal::new(0.0, spec.base_scale_sigma).expect("finite sigma");
    let innovation = Normal::new(0.0, spec.base_noise_sigma * (1.0 - spec.base_noise_ar.powi(2)).sqrt())
        .expect("finite sigma");
    let events_per_day = spec.liul_events_per_week / 7.0;
    let arrivals = (events_per_day > 0.0).then(|| Poisson::new(events_per_day).expect("positive rate"));
    let drift_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let standby = spec.base_day_shape.iter().copied().fold(f64::INFINITY, f64::min);
    let mut noise = 0.0;
    let mut base = DMatrix::zeros(SLOTS_PER_DAY, days);
    for j in 0..days {
        let drift = spec.base_drift * (std::f64::consts::TAU * j as f64 / 60.0 + drift_phase).sin();
        let scale = (1.0 + drift + scale_noise.sample(&mut rng)).max(0.3);
        let phase = rng.random_range(0..spec.fridge_period_slots);
        let mut col = DVector::from_fn(SLOTS_PER_DAY, |i, _| {
            let fridge = if (i + phase) % spec.fridge_period_slots < spec.fridge_period_slots / 2 {
                spec.fridge_amplitude_kw
            } else {
                0.0
            };
            standby + scale * (spec.base_day_shape[i] - standby) + fridge
        });
        for v in col.iter_mut() {
            noise = spec.base_noise_ar * noise + innovation.sample(&mut rng);
            *v = (*v + noise).max(0.0);
        }
        let n_events = arrivals.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_events {
            let len = rng.random_range(2..=8);
            let start = rng.random_range(4 * 7..SLOTS_PER_DAY - len);
            let kw = rng.random_range(2.0..5.0);
            for v in col.rows_mut(start, len).iter_mut() {
                *v += kw;
            }
        }
        base.set_column(j, &col);
    }

    let total = &hvac + &base;
    let dates = temps.dates().to_vec();
    Ok(HouseholdLoads {
        total: DailyLoadMatrix::new(total, dates.clone())?,
        hvac: DailyLoadMatrix::new(hvac, dates.clone())?,
        base: DailyLoadMatrix::new(base, dates)?,
    })
}
