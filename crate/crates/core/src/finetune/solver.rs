use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::bound::{fit_gamma_clipped, hourly_bound_model};
use super::config::{FineTuneConfig, PdfMode};
use super::gaussian::{kl_bivariate_gaussian, BivariateGaussian};
use crate::error::{Error, Result};
use crate::{HOURS_PER_DAY, SLOTS_PER_HOUR};

/// Decision variables of the fine-tuning program.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneVars {
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub theta_h: DVector<f64>,
    pub theta_b: DVector<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl FineTuneVars {
    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite()
            && self.gamma1.is_finite()
            && self.gamma2.is_finite()
            && self.beta.iter().all(|v| v.is_finite())
            && self.theta_h.iter().all(|v| v.is_finite())
            && self.theta_b.iter().all(|v| v.is_finite())
    }

    /// Flattened as `[α, β…, θʰ…, θᵇ…, γ1, γ2]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 + self.beta.len() + 2 * self.theta_h.len());
        out.push(self.alpha);
        out.extend(self.beta.iter());
        out.extend(self.theta_h.iter());
        out.extend(self.theta_b.iter());
        out.push(self.gamma1);
        out.push(self.gamma2);
        out
    }

    /// Inverse of [`to_vec`](Self::to_vec) for `k` mild days and `n` slots.
    pub fn from_slice(x: &[f64], k: usize, n: usize) -> Self {
        assert_eq!(x.len(), 3 + k + 2 * n);
        Self {
            alpha: x[0],
            beta: DVector::from_column_slice(&x[1..1 + k]),
            theta_h: DVector::from_column_slice(&x[1 + k..1 + k + n]),
            theta_b: DVector::from_column_slice(&x[1 + k + n..1 + k + 2 * n]),
            gamma1: x[1 + k + 2 * n],
            gamma2: x[2 + k + 2 * n],
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            alpha: f(self.alpha, other.alpha),
            beta: self.beta.zip_map(&other.beta, &f),
            theta_h: self.theta_h.zip_map(&other.theta_h, &f),
            theta_b: self.theta_b.zip_map(&other.theta_b, &f),
            gamma1: f(self.gamma1, other.gamma1),
            gamma2: f(self.gamma2, other.gamma2),
        }
    }

    fn dot(&self, other: &Self) -> f64 {
        self.alpha * other.alpha
            + self.beta.dot(&other.beta)
            + self.theta_h.dot(&other.theta_h)
            + self.theta_b.dot(&other.theta_b)
            + self.gamma1 * other.gamma1
            + self.gamma2 * other.gamma2
    }
}

/// Fine-tuned HVAC and base profiles for one hot day.
#[derive(Debug, Clone, PartialEq)]
pub struct DisaggregationResult {
    /// kW, within `[0, total]`.
    pub hvac_hat: DVector<f64>,
    /// kW, within `[0, total]`.
    pub base_hat: DVector<f64>,
    /// kWh per hour from the final `(γ1, γ2)`.
    pub hourly_hvac_bound: Vec<f64>,
    /// Objective after every accepted step. The penalty weight changes at the
    /// indices in `penalty_raises`; the trace is non-increasing between them.
    pub objective_trace: Vec<f64>,
    pub penalty_raises: Vec<usize>,
    /// Largest `|hourly HVAC energy − bound| − ε` at termination, kWh.
    pub max_violation: f64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub vars: FineTuneVars,
}

/// One day's fine-tuning program.
#[derive(Debug, Clone)]
pub struct FineTuneProblem<'a> {
    total: &'a [f64],
    ica: &'a [f64],
    mild: &'a DMatrix<f64>,
    temps: &'a [f64],
    target: BivariateGaussian,
    target_precision: Matrix2<f64>,
    candidate: BivariateGaussian,
    cfg: &'a FineTuneConfig,
}

impl<'a> FineTuneProblem<'a> {
    /// The candidate-side covariance starts as `mild_stats`' own.
    pub fn new(
        total: &'a [f64],
        ica_hvac: &'a [f64],
        mild: &'a DMatrix<f64>,
        temps: &'a [f64],
        mild_stats: &BivariateGaussian,
        cfg: &'a FineTuneConfig,
    ) -> Result<Self> {
        let n = total.len();
        if ica_hvac.len() != n || mild.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "total has {n} slots, ICA estimate {}, mild matrix {}",
                ica_hvac.len(),
                mild.nrows()
            )));
        }
        if n != HOURS_PER_DAY * SLOTS_PER_HOUR || temps.len() != HOURS_PER_DAY {
            return Err(Error::ShapeMismatch(format!(
                "expected {} slots and {HOURS_PER_DAY} temperatures, got {n} and {}",
                HOURS_PER_DAY * SLOTS_PER_HOUR,
                temps.len()
            )));
        }
        if mild.ncols() == 0 {
            return Err(Error::NoMildDays);
        }
        if total.iter().chain(ica_hvac).chain(mild.iter()).chain(temps).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("inputs contain non-finite values".into()));
        }
        cfg.validate()?;
        Ok(Self {
            total,
            ica: ica_hvac,
            mild,
            temps,
            target: *mild_stats,
            target_precision: mild_stats.precision(),
            candidate: *mild_stats,
            cfg,
        })
    }

    /// Replaces the candidate-side covariance used by the KL term.
    pub fn with_candidate(mut self, candidate: BivariateGaussian) -> Self {
        self.candidate = candidate;
        self
    }

    pub fn slots(&self) -> usize {
        self.total.len()
    }

    pub fn mild_days(&self) -> usize {
        self.mild.ncols()
    }

    /// α = 1, β = 1/K, θ = 0 and the given `(γ1, γ2)`.
    pub fn initial_vars(&self, gamma: (f64, f64)) -> FineTuneVars {
        let (n, k) = (self.slots(), self.mild_days());
        FineTuneVars {
            alpha: 1.0,
            beta: DVector::from_element(k, 1.0 / k as f64),
            theta_h: DVector::zeros(n),
            theta_b: DVector::zeros(n),
            gamma1: gamma.0,
            gamma2: gamma.1,
        }
    }

    /// `(α·ICA + θʰ, mild·β + θᵇ)`.
    pub fn profiles(&self, v: &FineTuneVars) -> (DVector<f64>, DVector<f64>) {
        let h = DVector::from_fn(self.slots(), |i, _| v.alpha * self.ica[i] + v.theta_h[i]);
        let b = self.mild * &v.beta + &v.theta_b;
        (h, b)
    }

    fn hourly_energy(h: &DVector<f64>) -> Vec<f64> {
        h.as_slice()
            .chunks(SLOTS_PER_HOUR)
            .map(|c| c.iter().sum::<f64>() / SLOTS_PER_HOUR as f64)
            .collect()
    }

    fn energies(&self, b: &DVector<f64>) -> Vector2<f64> {
        let s = b.as_slice();
        Vector2::new(
            self.cfg.diurnal_window.energy(s),
            self.cfg.nocturnal_window.energy(s),
        )
    }

    fn kl_active(&self) -> bool {
        self.cfg.pdf_mode != PdfMode::Off && self.cfg.lambda3 > 0.0
    }

    /// Signed, weighted KL term for base profile `b`.
    fn kl_term(&self, b: &DVector<f64>) -> f64 {
        if !self.kl_active() {
            return 0.0;
        }
        let p = self.candidate.with_mean(self.energies(b));
        self.cfg.kl_sign.factor() * self.cfg.lambda3 * kl_bivariate_gaussian(&p, &self.target)
    }

    /// Shape loss, regularizers and the KL term.
    pub fn smooth_objective(&self, v: &FineTuneVars) -> f64 {
        let (h, b) = self.profiles(v);
        let shape: f64 = (0..self.slots())
            .map(|i| (self.total[i] - h[i] - b[i]).powi(2))
            .sum();
        shape
            + self.cfg.lambda1 * v.theta_h.norm_squared()
            + self.cfg.lambda2 * v.theta_b.norm_squared()
            + self.kl_term(&b)
    }

    /// Gradient of [`smooth_objective`](Self::smooth_objective).
    pub fn smooth_gradient(&self, v: &FineTuneVars) -> FineTuneVars {
        let (h, b) = self.profiles(v);
        let mut gh = DVector::from_fn(self.slots(), |i, _| -2.0 * (self.total[i] - h[i] - b[i]));
        let mut gb = gh.clone();
        if self.kl_active() {
            let gx = self.target_precision * (self.energies(&b) - self.target.mu())
                * (self.cfg.kl_sign.factor() * self.cfg.lambda3);
            let quarter = 1.0 / SLOTS_PER_HOUR as f64;
            for i in 0..self.slots() {
                if self.cfg.diurnal_window.contains(i) {
                    gb[i] += quarter * gx[0];
                }
                if self.cfg.nocturnal_window.contains(i) {
                    gb[i] += quarter * gx[1];
                }
            }
        }
        let alpha = gh.iter().zip(self.ica).map(|(g, s)| g * s).sum();
        let beta = self.mild.tr_mul(&gb);
        gh.axpy(2.0 * self.cfg.lambda1, &v.theta_h, 1.0);
        gb.axpy(2.0 * self.cfg.lambda2, &v.theta_b, 1.0);
        FineTuneVars {
            alpha,
            beta,
            theta_h: gh,
            theta_b: gb,
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    /// Per-hour `|H_k − B_k| − ε`, positive where the hourly bound is violated.
    pub fn hourly_gaps(&self, v: &FineTuneVars) -> Vec<f64> {
        let (h, _) = self.profiles(v);
        let bound = hourly_bound_model(self.temps, v.gamma1, v.gamma2);
        Self::hourly_energy(&h)
            .iter()
            .zip(&bound)
            .map(|(e, b)| (e - b).abs() - self.cfg.epsilon_kwh)
            .collect()
    }

    pub fn max_violation(&self, v: &FineTuneVars) -> f64 {
        self.hourly_gaps(v).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ρ·Σ_k max(0, |H_k − B_k| − ε)²`.
    pub fn penalty(&self, v: &FineTuneVars, rho: f64) -> f64 {
        rho * self
            .hourly_gaps(v)
            .iter()
            .map(|g| g.max(0.0).powi(2))
            .sum::<f64>()
    }

    pub fn objective(&self, v: &FineTuneVars, rho: f64) -> f64 {
        self.smooth_objective(v) + self.penalty(v, rho)
    }

    /// Gradient of [`objective`](Self::objective); the clip at zero in the
    /// bound model contributes nothing where it is active.
    pub fn gradient(&self, v: &FineTuneVars, rho: f64) -> FineTuneVars {
        let mut g = self.smooth_gradient(v);
        let (h, _) = self.profiles(v);
        let hourly = Self::hourly_energy(&h);
        let quarter = 1.0 / SLOTS_PER_HOUR as f64;
        for (k, &t) in self.temps.iter().enumerate() {
            let raw = v.gamma1 * t + v.gamma2 * t * t;
            let diff = hourly[k] - raw.max(0.0);
            let gap = diff.abs() - self.cfg.epsilon_kwh;
            if gap <= 0.0 {
                continue;
            }
            let dh = 2.0 * rho * gap * diff.signum();
            for i in k * SLOTS_PER_HOUR..(k + 1) * SLOTS_PER_HOUR {
                g.theta_h[i] += dh * quarter;
                g.alpha += dh * quarter * self.ica[i];
            }
            if raw > 0.0 {
                g.gamma1 -= dh * t;
                g.gamma2 -= dh * t * t;
            }
        }
        g
    }

    /// Diagonal curvature estimate used to scale gradient steps.
    fn preconditioner(&self, rho: f64) -> FineTuneVars {
        const FLOOR: f64 = 1e-8;
        let quarter = 1.0 / SLOTS_PER_HOUR as f64;
        let pen_slot = 2.0 * rho * quarter * quarter;
        let ica_hourly: f64 = self
            .ica
            .chunks(SLOTS_PER_HOUR)
            .map(|c| (c.iter().sum::<f64>() * quarter).powi(2))
            .sum();
        let alpha = 2.0 * self.ica.iter().map(|s| s * s).sum::<f64>() + 2.0 * rho * ica_hourly;
        let beta = DVector::from_fn(self.mild_days(), |j, _| {
            (2.0 * self.mild.column(j).norm_squared()).max(FLOOR)
        });
        let theta_h = DVector::from_element(self.slots(), 2.0 + 2.0 * self.cfg.lambda1 + pen_slot);
        let kl = if self.kl_active() {
            self.cfg.lambda3 * quarter * quarter
        } else {
            0.0
        };
        let theta_b = DVector::from_fn(self.slots(), |i, _| {
            let mut d = 2.0 + 2.0 * self.cfg.lambda2;
            if self.cfg.diurnal_window.contains(i) {
                d += kl * self.target_precision[(0, 0)].abs();
            }
            if self.cfg.nocturnal_window.contains(i) {
                d += kl * self.target_precision[(1, 1)].abs();
            }
            d
        });
        let t2: f64 = self.temps.iter().map(|t| t * t).sum();
        let t4: f64 = self.temps.iter().map(|t| t.powi(4)).sum();
        FineTuneVars {
            alpha: alpha.max(FLOOR),
            beta,
            theta_h,
            theta_b,
            gamma1: (2.0 * rho * t2).max(FLOOR),
            gamma2: (2.0 * rho * t4).max(FLOOR),
        }
    }

    /// Nonnegative α, β, then clamps both assembled profiles into
    /// `[0, total]`, folding the corrections into θʰ and θᵇ.
    pub fn project(&self, v: &mut FineTuneVars) {
        v.alpha = v.alpha.max(0.0);
        v.beta.apply(|b| *b = b.max(0.0));
        let (h, b) = self.profiles(v);
        for i in 0..self.slots() {
            let p = self.total[i];
            v.theta_h[i] += h[i].clamp(0.0, p) - h[i];
            v.theta_b[i] += b[i].clamp(0.0, p) - b[i];
        }
    }

    /// Shifts each violating hour of the HVAC profile uniformly (with
    /// clamping to `[0, total]`) onto the nearest edge of its band.
    fn repair_hours(&self, v: &mut FineTuneVars) {
        let (h, _) = self.profiles(v);
        let bound = hourly_bound_model(self.temps, v.gamma1, v.gamma2);
        let eps = self.cfg.epsilon_kwh;
        let quarter = 1.0 / SLOTS_PER_HOUR as f64;
        for (k, &bk) in bound.iter().enumerate() {
            let slots = k * SLOTS_PER_HOUR..(k + 1) * SLOTS_PER_HOUR;
            let energy_at = |delta: f64| -> f64 {
                slots
                    .clone()
                    .map(|i| (h[i] + delta).clamp(0.0, self.total[i]))
                    .sum::<f64>()
                    * quarter
            };
            let current = energy_at(0.0);
            let target = if current > bk + eps {
                bk + eps
            } else if current < bk - eps {
                bk - eps
            } else {
                continue;
            };
            let span = slots
                .clone()
                .map(|i| h[i].abs().max(self.total[i]))
                .fold(0.0, f64::max)
                + 1.0;
            let (mut lo, mut hi) = (-span, span);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if energy_at(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let delta = if current > target { hi } else { lo };
            for i in slots {
                let moved = (h[i] + delta).clamp(0.0, self.total[i]);
                v.theta_h[i] += moved - h[i];
            }
        }
    }

    /// Projected, diagonally scaled gradient descent with Armijo backtracking
    /// on the penalized objective, followed by an hourly repair of any
    /// remaining bound violation.
    pub fn solve(&self, init: FineTuneVars) -> Result<DisaggregationResult> {
        let opts = &self.cfg.solver;
        let mut v = init;
        self.project(&mut v);
        let mut rho = opts.initial_penalty;
        let mut f = self.objective(&v, rho);
        if !f.is_finite() {
            return Err(Error::Divergence { iteration: 0 });
        }
        let mut trace = vec![f];
        let mut raises = Vec::new();
        let mut diag = self.preconditioner(rho);
        let mut since_raise = 0;
        let mut t_last = opts.step;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < opts.max_iters {
            iterations += 1;
            let g = self.gradient(&v, rho);
            let dir = g.zip_with(&diag, |g, d| -g / d);
            let mut t = (2.0 * t_last).min(opts.step);
            let mut accepted = None;
            while t > 1e-12 {
                let mut cand = v.zip_with(&dir, |x, d| x + t * d);
                self.project(&mut cand);
                let fc = self.objective(&cand, rho);
                if !fc.is_finite() || !cand.is_finite() {
                    return Err(Error::Divergence { iteration: iterations });
                }
                let moved = cand.zip_with(&v, |a, b| a - b);
                if fc <= f + 1e-4 * g.dot(&moved) && fc <= f {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            let stalled = match accepted {
                Some((cand, fc)) => {
                    let small = (f - fc).abs() <= opts.tol * f.abs().max(1e-12);
                    v = cand;
                    f = fc;
                    t_last = t;
                    trace.push(f);
                    small
                }
                None => true,
            };
            since_raise += 1;
            let violated = self.max_violation(&v) > 0.0;
            let can_raise = violated && rho < opts.max_penalty;
            if stalled && !can_raise {
                converged = true;
                break;
            }
            if can_raise && (stalled || since_raise >= opts.penalty_interval) {
                rho = (2.0 * rho).min(opts.max_penalty);
                diag = self.preconditioner(rho);
                f = self.objective(&v, rho);
                raises.push(trace.len());
                trace.push(f);
                since_raise = 0;
                t_last = opts.step;
            }
        }

        if self.max_violation(&v) > 0.0 {
            self.repair_hours(&mut v);
        }
        let (hvac_hat, base_hat) = self.profiles(&v);
        // Exact box feasibility, whatever rounding the θ folding left behind.
        let hvac_hat = DVector::from_fn(hvac_hat.len(), |i, _| hvac_hat[i].clamp(0.0, self.total[i]));
        let base_hat = DVector::from_fn(base_hat.len(), |i, _| base_hat[i].clamp(0.0, self.total[i]));
        let hourly_hvac_bound = hourly_bound_model(self.temps, v.gamma1, v.gamma2);
        let max_violation = Self::hourly_energy(&hvac_hat)
            .iter()
            .zip(&hourly_hvac_bound)
            .map(|(e, b)| (e - b).abs() - self.cfg.epsilon_kwh)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(DisaggregationResult {
            hvac_hat,
            base_hat,
            hourly_hvac_bound,
            objective_trace: trace,
            penalty_raises: raises,
            max_violation,
            feasible: max_violation <= 1e-6,
            converged,
            iterations,
            vars: v,
        })
    }
}

/// `(γ1, γ2)` fitted to the hourly energies of the given HVAC profiles.
pub fn initial_gamma<'a>(days: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> (f64, f64) {
    let mut t = Vec::new();
    let mut e = Vec::new();
    for (profile, temps) in days {
        for (k, c) in profile.chunks(SLOTS_PER_HOUR).enumerate() {
            t.push(temps[k]);
            e.push(c.iter().sum::<f64>() / SLOTS_PER_HOUR as f64);
        }
    }
    fit_gamma_clipped(&t, &e)
}

/// Fine-tunes one day from the standard starting point, with `(γ1, γ2)`
/// fitted to this day's ICA estimate alone.
pub fn fine_tune(
    total: &[f64],
    ica_hvac: &[f64],
    mild_matrix: &DMatrix<f64>,
    temps: &[f64],
    mild_stats: &BivariateGaussian,
    cfg: &FineTuneConfig,
) -> Result<DisaggregationResult> {
    let problem = FineTuneProblem::new(total, ica_hvac, mild_matrix, temps, mild_stats, cfg)?;
    let gamma = initial_gamma([(ica_hvac, temps)]);
    problem.solve(problem.initial_vars(gamma))
}
