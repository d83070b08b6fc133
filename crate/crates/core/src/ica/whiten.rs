use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::preprocess::MIN_ENSEMBLE;

/// Relative eigenvalue floor below which the second principal direction is
/// treated as absent.
const RANK_TOL: f64 = 1e-10;

/// Centering and two-component PCA whitening of an N×K ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    /// Column means of the ensemble (length K).
    pub mean: DVector<f64>,
    /// 2×K; whitened = (X − mean)·whiteningᵀ.
    pub whitening: DMatrix<f64>,
    /// K×2; whitened·dewhiteningᵀ is the rank-2 projection of the centered data.
    pub dewhitening: DMatrix<f64>,
    /// The two retained covariance eigenvalues, largest first.
    pub eigenvalues: [f64; 2],
}

impl WhiteningModel {
    pub fn center(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        xc
    }
}

/// Sample covariance with denominator N − 1 of the columns of `x`.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    xc.transpose() * &xc / (n as f64 - 1.0)
}

/// Removes column means and projects onto the top two principal directions,
/// each scaled to unit variance. Returns the N×2 whitened data.
pub fn center_and_whiten(residuals: &DMatrix<f64>) -> Result<(DMatrix<f64>, WhiteningModel)> {
    let (n, k) = residuals.shape();
    if k < MIN_ENSEMBLE {
        return Err(Error::InsufficientEnsemble(k));
    }
    if n < 3 || residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientRank);
    }
    let mean = residuals.row_mean().transpose();
    let mut xc = residuals.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let cov = xc.transpose() * &xc / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if l1.is_nan() || l1 <= 0.0 || l2 <= RANK_TOL * l1 {
        return Err(Error::InsufficientRank);
    }

    let mut whitening = DMatrix::zeros(2, k);
    let mut dewhitening = DMatrix::zeros(k, 2);
    for (r, (&idx, lambda)) in order.iter().zip([l1, l2]).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // Fix the eigenvector sign so the output does not depend on the solver.
        let pivot = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.neg_mut();
        }
        let s = lambda.sqrt();
        whitening.row_mut(r).copy_from(&(v.transpose() / s));
        dewhitening.column_mut(r).copy_from(&(v * s));
    }
    let whitened = &xc * whitening.transpose();
    Ok((
        whitened,
        WhiteningModel {
            mean,
            whitening,
            dewhitening,
            eigenvalues: [l1, l2],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_pattern_copies_whiten_exactly() {
        let a = DVector::from_fn(96, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let b = DVector::from_fn(96, |i, _| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!(a.dot(&b), 0.0);
        let x = DMatrix::from_columns(&[a.clone(), b.clone(), a.clone(), b.clone(), a]);
        let (z, _) = center_and_whiten(&x).unwrap();
        assert!((covariance(&z) - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn identical_columns_rank_error() {
        let a = DVector::from_fn(96, |i, _| (i as f64 * 0.2).sin());
        let x = DMatrix::from_columns(&[a.clone(), a.clone(), a]);
        assert!(matches!(center_and_whiten(&x), Err(Error::InsufficientRank)));
    }

    #[test]
    fn narrow_ensemble_rejected() {
        let x = DMatrix::from_fn(96, 2, |i, j| (i * (j + 1)) as f64);
        assert!(matches!(center_and_whiten(&x), Err(Error::InsufficientEnsemble(2))));
    }

    #[test]
    fn random_matrix_whitens_and_projects() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(96, 10, |_, _| StandardNormal.sample(&mut rng));
        let (z, m) = center_and_whiten(&x).unwrap();
        assert!((covariance(&z) - DMatrix::identity(2, 2)).norm() < 1e-8);

        // dewhitening ∘ whitening equals projection onto the top-2 eigenvectors.
        let xc = m.center(&x);
        let p = &z * m.dewhitening.transpose();
        let e = m.dewhitening.clone();
        let basis = DMatrix::from_columns(&[
            e.column(0).normalize(),
            e.column(1).normalize(),
        ]);
        let proj = &xc * &basis * basis.transpose();
        assert!((p - proj).norm() < 1e-10 * xc.norm());
    }
}
