//! Constrained fine-tuning of the ICA HVAC estimate and the mild-day base
//! model.
//!
//! For one hot day with total load `p`, ICA estimate `s` and mild-day matrix
//! `M` the program is
//!
//! ```text
//! min ‖p − h − b‖² + λ1‖θʰ‖² + λ2‖θᵇ‖² ± λ3·KL
//!   h = α·s + θʰ,  b = M·β + θᵇ,  α, β ≥ 0,  0 ≤ h, b ≤ p
//!   |¼·Σ_{hour k} h − (γ1·T_k + γ2·T_k²)| ≤ ε
//! ```
//!
//! where KL compares the day's (diurnal, nocturnal) base energy with the
//! mild-day distribution. The hourly constraint is handled by a growing
//! quadratic penalty, the rest by projection.

mod bound;
mod config;
mod gaussian;
mod solver;

pub use bound::{fit_gamma, fit_gamma_clipped, hourly_bound_model};
pub use config::{FineTuneConfig, KlSign, PdfMode, SlotWindow, SolverOptions};
pub use gaussian::{
    diurnal_nocturnal_energy, energy_points, estimate_base_stats, gaussian_from_points,
    kl_bivariate_gaussian, BivariateGaussian, MIN_EIGENVALUE, RIDGE,
};
pub use solver::{fine_tune, initial_gamma, DisaggregationResult, FineTuneProblem, FineTuneVars};
