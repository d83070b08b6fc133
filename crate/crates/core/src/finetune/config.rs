use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{SLOTS_PER_DAY, SLOT_MINUTES};

/// Half-open range of 15-minute slots, `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotWindow {
    pub start: usize,
    pub end: usize,
}

impl SlotWindow {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, slot: usize) -> bool {
        (self.start..self.end).contains(&slot)
    }

    pub fn overlaps(&self, other: &SlotWindow) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// kWh over the window: ¼ Σ of the kW samples.
    pub fn energy(&self, profile: &[f64]) -> f64 {
        profile[self.start..self.end].iter().sum::<f64>() * SLOT_MINUTES as f64 / 60.0
    }
}

/// Which base-load distribution the KL term compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdfMode {
    /// No distribution term.
    Off,
    /// The customer's own mild days.
    SingleUser,
    /// Mild days pooled over every customer in the run.
    MultiUser,
}

/// Sign applied to the KL term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlSign {
    /// `+λ3·KL`: pull the base-load energies toward the mild-day distribution.
    Penalize,
    /// `−λ3·KL`: rewards divergence from the mild-day distribution.
    Reward,
}

impl KlSign {
    pub fn factor(self) -> f64 {
        match self {
            KlSign::Penalize => 1.0,
            KlSign::Reward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Initial and largest step multiplier on the diagonally scaled gradient.
    pub step: f64,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// The hourly-bound penalty weight doubles after this many iterations
    /// while the bound is still violated.
    pub penalty_interval: usize,
    /// Passes over all hot days; later passes refresh the candidate-side
    /// covariance from the previous pass' base estimates.
    pub outer_passes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step: 1.0,
            tol: 1e-7,
            initial_penalty: 10.0,
            max_penalty: 1e9,
            penalty_interval: 50,
            outer_passes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    /// Weight on ‖θʰ‖².
    pub lambda1: f64,
    /// Weight on ‖θᵇ‖².
    pub lambda2: f64,
    /// Weight on the KL term.
    pub lambda3: f64,
    /// Allowed gap (kWh) between an hour's HVAC energy and the temperature model.
    pub epsilon_kwh: f64,
    pub pdf_mode: PdfMode,
    pub kl_sign: KlSign,
    /// 09:00–17:00.
    pub diurnal_window: SlotWindow,
    /// 00:00–05:00.
    pub nocturnal_window: SlotWindow,
    pub solver: SolverOptions,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.1,
            lambda3: 1.0,
            epsilon_kwh: 0.25,
            pdf_mode: PdfMode::MultiUser,
            kl_sign: KlSign::Penalize,
            diurnal_window: SlotWindow::new(36, 68),
            nocturnal_window: SlotWindow::new(0, 20),
            solver: SolverOptions::default(),
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        for (name, w) in [("diurnal", &self.diurnal_window), ("nocturnal", &self.nocturnal_window)] {
            if w.is_empty() || w.end > SLOTS_PER_DAY {
                return Err(Error::Config(format!(
                    "{name} window {}..{} must be nonempty and within 0..{SLOTS_PER_DAY}",
                    w.start, w.end
                )));
            }
        }
        if self.diurnal_window.overlaps(&self.nocturnal_window) {
            return bad("diurnal and nocturnal windows overlap");
        }
        if [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .any(|l| !l.is_finite() || *l < 0.0)
        {
            return bad("lambda weights must be finite and nonnegative");
        }
        if !(self.epsilon_kwh.is_finite() && self.epsilon_kwh > 0.0) {
            return bad("epsilon_kwh must be positive");
        }
        let s = &self.solver;
        if !(s.step > 0.0 && s.step.is_finite()) || s.tol.is_nan() || s.tol <= 0.0 {
            return bad("solver step and tol must be positive");
        }
        if !(s.initial_penalty > 0.0 && s.max_penalty >= s.initial_penalty) {
            return bad("penalty weights must be positive and max_penalty ≥ initial_penalty");
        }
        if s.penalty_interval == 0 || s.outer_passes == 0 {
            return bad("penalty_interval and outer_passes must be at least 1");
        }
        Ok(())
    }
}
