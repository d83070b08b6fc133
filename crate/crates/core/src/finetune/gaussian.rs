use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};

use super::config::SlotWindow;
use crate::error::{Error, Result};

/// Smallest admissible covariance eigenvalue.
pub const MIN_EIGENVALUE: f64 = 1e-9;
/// Added to the diagonal of a near-singular sample covariance.
pub const RIDGE: f64 = 1e-6;

/// Distribution of (diurnal, nocturnal) daily base energy, kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateGaussian {
    mu: Vector2<f64>,
    sigma: Matrix2<f64>,
}

impl BivariateGaussian {
    pub fn new(mu: Vector2<f64>, sigma: Matrix2<f64>) -> Result<Self> {
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NotSpd);
        }
        let asym = (sigma[(0, 1)] - sigma[(1, 0)]).abs();
        if asym > 1e-12 * sigma.amax().max(1.0) {
            return Err(Error::NotSpd);
        }
        let sym = (sigma + sigma.transpose()) * 0.5;
        if SymmetricEigen::new(sym).eigenvalues.min() <= MIN_EIGENVALUE {
            return Err(Error::NotSpd);
        }
        Ok(Self { mu, sigma: sym })
    }

    pub fn mu(&self) -> &Vector2<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix2<f64> {
        &self.sigma
    }

    pub fn with_mean(&self, mu: Vector2<f64>) -> Self {
        Self { mu, sigma: self.sigma }
    }

    pub(crate) fn precision(&self) -> Matrix2<f64> {
        inverse(&self.sigma)
    }
}

fn det(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn inverse(m: &Matrix2<f64>) -> Matrix2<f64> {
    let d = det(m);
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d
}

/// Closed-form KL(p ‖ q) between bivariate Gaussians:
/// ½[tr(Σq⁻¹Σp) + (μq−μp)ᵀΣq⁻¹(μq−μp) − 2 + ln(det Σq / det Σp)].
pub fn kl_bivariate_gaussian(p: &BivariateGaussian, q: &BivariateGaussian) -> f64 {
    if p == q {
        return 0.0;
    }
    let qi = q.precision();
    let dmu = q.mu - p.mu;
    let tr = (qi * p.sigma).trace();
    let maha = dmu.dot(&(qi * dmu));
    let kl = 0.5 * (tr + maha - 2.0 + (det(&q.sigma) / det(&p.sigma)).ln());
    kl.max(0.0)
}

/// Base energy (kWh) in the two windows: ¼ Σ of 15-minute kW samples.
pub fn diurnal_nocturnal_energy(
    profile: &[f64],
    diurnal: &SlotWindow,
    nocturnal: &SlotWindow,
) -> (f64, f64) {
    (diurnal.energy(profile), nocturnal.energy(profile))
}

/// Per-day (diurnal, nocturnal) energies of the columns of `profiles`.
pub fn energy_points(
    profiles: &DMatrix<f64>,
    diurnal: &SlotWindow,
    nocturnal: &SlotWindow,
) -> Vec<Vector2<f64>> {
    profiles
        .column_iter()
        .map(|c| {
            let c: Vec<f64> = c.iter().copied().collect();
            let (d, n) = diurnal_nocturnal_energy(&c, diurnal, nocturnal);
            Vector2::new(d, n)
        })
        .collect()
}

/// Sample mean and covariance (denominator D − 1) of energy points, with a
/// ridge added when the covariance is near singular.
pub fn gaussian_from_points(points: &[Vector2<f64>]) -> Result<BivariateGaussian> {
    let d = points.len();
    if d < 3 {
        return Err(Error::InsufficientDays(d));
    }
    let mean = points.iter().sum::<Vector2<f64>>() / d as f64;
    let mut cov = Matrix2::zeros();
    for p in points {
        let c = p - mean;
        cov += c * c.transpose();
    }
    cov /= d as f64 - 1.0;
    cov = (cov + cov.transpose()) * 0.5;
    if SymmetricEigen::new(cov).eigenvalues.min() < RIDGE {
        cov += Matrix2::identity() * RIDGE;
    }
    BivariateGaussian::new(mean, cov)
}

/// Fits the (diurnal, nocturnal) base-energy Gaussian over D ≥ 3 day columns.
pub fn estimate_base_stats(
    base_profiles: &DMatrix<f64>,
    diurnal: &SlotWindow,
    nocturnal: &SlotWindow,
) -> Result<BivariateGaussian> {
    gaussian_from_points(&energy_points(base_profiles, diurnal, nocturnal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finetune::FineTuneConfig;
    use proptest::prelude::*;

    fn g(mu: [f64; 2], s: [f64; 3]) -> BivariateGaussian {
        BivariateGaussian::new(Vector2::new(mu[0], mu[1]), Matrix2::new(s[0], s[1], s[1], s[2])).unwrap()
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let p = g([16.45, 3.22], [91.30, 10.56, 3.75]);
        assert_eq!(kl_bivariate_gaussian(&p, &p), 0.0);
    }

    #[test]
    fn kl_unit_shift() {
        let p = g([0.0, 0.0], [1.0, 0.0, 1.0]);
        let q = g([1.0, 0.0], [1.0, 0.0, 1.0]);
        assert!((kl_bivariate_gaussian(&p, &q) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_spd() {
        assert!(BivariateGaussian::new(Vector2::zeros(), Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
        assert!(BivariateGaussian::new(Vector2::zeros(), Matrix2::new(1.0, 0.5, 0.4, 1.0)).is_err());
        assert!(BivariateGaussian::new(Vector2::zeros(), Matrix2::zeros()).is_err());
    }

    #[test]
    fn window_energies() {
        let cfg = FineTuneConfig::default();
        let ones = vec![1.0; 96];
        let (d, n) = diurnal_nocturnal_energy(&ones, &cfg.diurnal_window, &cfg.nocturnal_window);
        assert_eq!(cfg.diurnal_window.len(), 32);
        assert_eq!(d, 8.0);
        assert_eq!(n, 5.0);
        assert_eq!(
            diurnal_nocturnal_energy(&[0.0; 96], &cfg.diurnal_window, &cfg.nocturnal_window),
            (0.0, 0.0)
        );
    }

    #[test]
    fn identical_days_get_ridge() {
        let cfg = FineTuneConfig::default();
        let day: Vec<f64> = (0..96).map(|i| 0.5 + 0.01 * i as f64).collect();
        let m = DMatrix::from_fn(96, 5, |i, _| day[i]);
        let st = estimate_base_stats(&m, &cfg.diurnal_window, &cfg.nocturnal_window).unwrap();
        let (d, n) = diurnal_nocturnal_energy(&day, &cfg.diurnal_window, &cfg.nocturnal_window);
        assert!((st.mu()[0] - d).abs() < 1e-12 && (st.mu()[1] - n).abs() < 1e-12);
        assert!((st.sigma() - Matrix2::identity() * RIDGE).amax() < 1e-18);
    }

    #[test]
    fn two_clusters_grand_mean() {
        let pts: Vec<Vector2<f64>> = (0..6)
            .map(|i| if i % 2 == 0 { Vector2::new(10.0, 2.0) } else { Vector2::new(20.0, 4.0) })
            .collect();
        let st = gaussian_from_points(&pts).unwrap();
        assert!((st.mu() - Vector2::new(15.0, 3.0)).amax() < 1e-12);
    }

    #[test]
    fn too_few_days() {
        assert!(matches!(
            gaussian_from_points(&[Vector2::zeros(), Vector2::zeros()]),
            Err(Error::InsufficientDays(2))
        ));
    }

    proptest! {
        #[test]
        fn kl_nonnegative(
            m in proptest::array::uniform4(-5.0f64..5.0),
            a in proptest::array::uniform3(0.1f64..3.0),
            b in proptest::array::uniform3(0.1f64..3.0),
            ca in -0.9f64..0.9, cb in -0.9f64..0.9,
        ) {
            let s = |v: [f64; 3], c: f64| {
                let off = c * (v[0] * v[2]).sqrt();
                Matrix2::new(v[0], off, off, v[2])
            };
            let p = BivariateGaussian::new(Vector2::new(m[0], m[1]), s(a, ca)).unwrap();
            let q = BivariateGaussian::new(Vector2::new(m[2], m[3]), s(b, cb)).unwrap();
            prop_assert!(kl_bivariate_gaussian(&p, &q) >= 0.0);
            prop_assert_eq!(kl_bivariate_gaussian(&q, &q), 0.0);
        }
    }
}
