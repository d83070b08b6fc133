use nalgebra::{Matrix2, Vector2};

/// Hourly HVAC energy (kWh) predicted from outdoor temperature:
/// `γ1·T + γ2·T²`, clipped below at zero.
pub fn hourly_bound_model(temps: &[f64], gamma1: f64, gamma2: f64) -> Vec<f64> {
    temps
        .iter()
        .map(|&t| (gamma1 * t + gamma2 * t * t).max(0.0))
        .collect()
}

/// Least-squares `(γ1, γ2)` for `energy ≈ γ1·T + γ2·T²` with no intercept.
///
/// Returns zeros when the pairs do not determine both coefficients.
pub fn fit_gamma(temps: &[f64], energy: &[f64]) -> (f64, f64) {
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (&t, &e) in temps.iter().zip(energy) {
        let row = Vector2::new(t, t * t);
        ata += row * row.transpose();
        atb += row * e;
    }
    let det = ata.determinant();
    if !det.is_finite() || det.abs() <= 1e-12 * ata.norm_squared().max(f64::MIN_POSITIVE) {
        return (0.0, 0.0);
    }
    match ata.try_inverse() {
        Some(inv) => {
            let g = inv * atb;
            (g[0], g[1])
        }
        None => (0.0, 0.0),
    }
}

fn clipped_sse(temps: &[f64], energy: &[f64], g: (f64, f64)) -> f64 {
    hourly_bound_model(temps, g.0, g.1)
        .iter()
        .zip(energy)
        .map(|(b, e)| (b - e).powi(2))
        .sum()
}

/// Least-squares fit of the clipped model [`hourly_bound_model`].
///
/// Starts from [`fit_gamma`] and refits on the pairs where the model is
/// positive until the active set stops changing or the error stops falling.
/// Hours the model clips to zero contribute no slope, so a threshold-like
/// relation (no cooling below some temperature) is not dragged down by them.
pub fn fit_gamma_clipped(temps: &[f64], energy: &[f64]) -> (f64, f64) {
    let mut g = fit_gamma(temps, energy);
    let mut sse = clipped_sse(temps, energy, g);
    for _ in 0..50 {
        let (t, e): (Vec<f64>, Vec<f64>) = temps
            .iter()
            .zip(energy)
            .filter(|(&t, _)| g.0 * t + g.1 * t * t > 0.0)
            .map(|(&t, &e)| (t, e))
            .unzip();
        let next = fit_gamma(&t, &e);
        if next == (0.0, 0.0) {
            break;
        }
        let next_sse = clipped_sse(temps, energy, next);
        if next_sse >= sse * (1.0 - 1e-12) {
            break;
        }
        g = next;
        sse = next_sse;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients() {
        assert_eq!(hourly_bound_model(&[30.0; 24], 0.0, 0.0), vec![0.0; 24]);
    }

    #[test]
    fn quadratic_only() {
        let b = hourly_bound_model(&[30.0], 0.0, 0.001);
        assert!((b[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn negative_prediction_clipped() {
        assert_eq!(hourly_bound_model(&[20.0], -0.1, 0.0), vec![0.0]);
    }

    #[test]
    fn recovers_exact_quadratic() {
        let t: Vec<f64> = (0..48).map(|i| 22.0 + 0.3 * i as f64).collect();
        let e: Vec<f64> = t.iter().map(|t| -0.05 * t + 0.003 * t * t).collect();
        let (g1, g2) = fit_gamma(&t, &e);
        assert!((g1 + 0.05).abs() < 1e-9 && (g2 - 0.003).abs() < 1e-10);
    }

    #[test]
    fn clipped_fit_follows_threshold() {
        let t: Vec<f64> = (0..60).map(|i| 20.0 + 0.3 * i as f64).collect();
        let truth = |t: f64| (0.15 * (t - 26.0)).max(0.0);
        let e: Vec<f64> = t.iter().map(|&t| truth(t)).collect();
        let lin = fit_gamma(&t, &e);
        let clip = fit_gamma_clipped(&t, &e);
        assert!(clipped_sse(&t, &e, clip) < 0.5 * clipped_sse(&t, &e, lin));
        let at_22 = hourly_bound_model(&[22.0], clip.0, clip.1)[0];
        assert!(at_22 < 0.05, "{at_22}");
    }

    #[test]
    fn clipped_fit_keeps_exact_quadratic() {
        let t: Vec<f64> = (0..48).map(|i| 22.0 + 0.3 * i as f64).collect();
        let e: Vec<f64> = t.iter().map(|t| -0.05 * t + 0.003 * t * t).collect();
        let (g1, g2) = fit_gamma_clipped(&t, &e);
        assert!((g1 + 0.05).abs() < 1e-9 && (g2 - 0.003).abs() < 1e-10);
    }

    #[test]
    fn degenerate_input() {
        assert_eq!(fit_gamma(&[], &[]), (0.0, 0.0));
        assert_eq!(fit_gamma(&[0.0, 0.0], &[1.0, 2.0]), (0.0, 0.0));
    }
}
