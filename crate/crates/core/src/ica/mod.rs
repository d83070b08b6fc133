//! HVAC extraction from residual ensembles with two-component FastICA.

mod fastica;
mod select;
mod whiten;

pub use fastica::{fastica_2comp, random_rotation, IcaModel, IcaOptions};
pub use select::{hourly_sums, pearson, select_hvac, HvacIcaEstimate, WEAK_LINKAGE};
pub use whiten::{center_and_whiten, covariance, WhiteningModel};

use crate::error::Result;
use crate::preprocess::ResidualEnsemble;

/// Whitening, FastICA and HVAC selection for one hot day.
pub fn extract_hvac(
    ensemble: &ResidualEnsemble,
    hot_temps: &[f64],
    opts: &IcaOptions,
) -> Result<(IcaModel, HvacIcaEstimate)> {
    let (z, w) = center_and_whiten(&ensemble.residuals)?;
    let model = fastica_2comp(&z, &w, opts);
    let est = select_hvac(&model, hot_temps, &ensemble.mean_residual())?;
    Ok((model, est))
}
