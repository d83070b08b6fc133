use nalgebra::DVector;

use super::fastica::IcaModel;
use crate::error::{Error, Result};
use crate::{HOURS_PER_DAY, SLOTS_PER_HOUR};

/// Below this absolute correlation with temperature a component is
/// considered weakly linked.
pub const WEAK_LINKAGE: f64 = 0.1;

/// The HVAC component picked out of an [`IcaModel`], rescaled to kW.
#[derive(Debug, Clone, PartialEq)]
pub struct HvacIcaEstimate {
    /// N-vector, kW, clipped at zero.
    pub profile: DVector<f64>,
    pub component: usize,
    /// Correlation of the chosen (sign-corrected) source's hourly sums with
    /// hourly temperature.
    pub correlation: f64,
    pub scale: f64,
    pub weak_linkage: bool,
}

pub fn hourly_sums(profile: &[f64]) -> Vec<f64> {
    profile
        .chunks(SLOTS_PER_HOUR)
        .map(|c| c.iter().sum())
        .collect()
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Chooses the source whose hourly sums track the day's temperature,
/// orients it to correlate positively, rescales it by a nonnegative least
/// squares fit to the mean residual and clips it at zero.
pub fn select_hvac(
    model: &IcaModel,
    hot_temps: &[f64],
    residual_mean: &DVector<f64>,
) -> Result<HvacIcaEstimate> {
    if model.sources.ncols() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "expected 2 sources, found {}",
            model.sources.ncols()
        )));
    }
    if hot_temps.len() != HOURS_PER_DAY || residual_mean.len() != model.sources.nrows() {
        return Err(Error::ShapeMismatch(
            "temperature or residual length does not match the sources".into(),
        ));
    }
    let corrs: Vec<f64> = (0..2)
        .map(|c| {
            let col: Vec<f64> = model.sources.column(c).iter().copied().collect();
            pearson(&hourly_sums(&col), hot_temps)
        })
        .collect();
    let component = if corrs[1].abs() > corrs[0].abs() { 1 } else { 0 };
    let weak_linkage = corrs.iter().all(|c| c.abs() < WEAK_LINKAGE);
    if weak_linkage {
        log::warn!(
            "weak temperature linkage: source correlations {:.3}, {:.3}",
            corrs[0],
            corrs[1]
        );
    }
    let sign = if corrs[component] < 0.0 { -1.0 } else { 1.0 };
    let source = model.sources.column(component) * sign;
    let ss = source.norm_squared();
    let scale = if ss > 0.0 {
        (source.dot(residual_mean) / ss).max(0.0)
    } else {
        0.0
    };
    let profile = (source * scale).map(|v| v.max(0.0));
    Ok(HvacIcaEstimate {
        profile,
        component,
        correlation: corrs[component] * sign,
        scale,
        weak_linkage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, Matrix2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn temps() -> Vec<f64> {
        (0..24)
            .map(|h| 27.0 + 7.0 * (std::f64::consts::PI * (h as f64 - 9.0) / 12.0).sin())
            .collect()
    }

    /// Square wave whose duty follows the afternoon heat.
    fn hvac_wave(amplitude: f64) -> DVector<f64> {
        DVector::from_fn(96, |i, _| {
            let hour = i / 4;
            let on = (11..=20).contains(&hour) && i % 3 != 0;
            if on {
                amplitude
            } else {
                0.0
            }
        })
    }

    fn model_with(sources: DMatrix<f64>) -> IcaModel {
        IcaModel {
            unmixing: DMatrix::zeros(3, 2),
            mixing: DMatrix::zeros(2, 3),
            rotation: Matrix2::identity(),
            sources,
            iterations: 1,
            converged: true,
        }
    }

    fn noise(seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(96, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn picks_temperature_linked_source() {
        let h = hvac_wave(1.0);
        let n = noise(2);
        // Oracle: correlation of each true source's hourly sums with temperature.
        let t = temps();
        let c_h = pearson(&hourly_sums(h.as_slice()), &t);
        let c_n = pearson(&hourly_sums(n.as_slice()), &t);
        assert!(c_h.abs() > c_n.abs());
        let m = model_with(DMatrix::from_columns(&[n, h.clone()]));
        let est = select_hvac(&m, &t, &(h * 3.0)).unwrap();
        assert_eq!(est.component, 1);
    }

    #[test]
    fn flipped_sign_is_corrected() {
        let h = hvac_wave(1.0);
        let m = model_with(DMatrix::from_columns(&[noise(4), -h.clone()]));
        let est = select_hvac(&m, &temps(), &h).unwrap();
        assert!(est.correlation > 0.0);
        assert!(pearson(&hourly_sums(est.profile.as_slice()), &temps()) > 0.0);
        assert!((est.profile - h).amax() < 1e-12);
    }

    #[test]
    fn amplitude_restored_from_residual_mean() {
        let unit = hvac_wave(1.0);
        let std = {
            let m = unit.mean();
            (unit.map(|v| (v - m).powi(2)).sum() / 95.0).sqrt()
        };
        let source = &unit / std;
        let truth = hvac_wave(3.0);
        let resid = &truth + noise(9) * 0.2;
        let m = model_with(DMatrix::from_columns(&[source, noise(10)]));
        let est = select_hvac(&m, &temps(), &resid).unwrap();
        let amp = est.profile.max();
        assert!((amp - 3.0).abs() <= 0.3, "{amp}");
    }

    #[test]
    fn sign_flip_of_either_source_changes_nothing() {
        let h = hvac_wave(0.7).add_scalar(0.1);
        let n = noise(12);
        let r = &h * 2.0 + &n * 0.1;
        let base = select_hvac(&model_with(DMatrix::from_columns(&[h.clone(), n.clone()])), &temps(), &r).unwrap();
        for flip in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            let m = model_with(DMatrix::from_columns(&[&h * flip.0, &n * flip.1]));
            let est = select_hvac(&m, &temps(), &r).unwrap();
            assert_eq!(est.profile, base.profile);
        }
    }

    #[test]
    fn weak_linkage_flagged() {
        let flat_t = vec![25.0; 24];
        let m = model_with(DMatrix::from_columns(&[noise(1), noise(2)]));
        let est = select_hvac(&m, &flat_t, &noise(3)).unwrap();
        assert!(est.weak_linkage);
    }
}
