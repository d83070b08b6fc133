use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::whiten::WhiteningModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Seeds the initial rotation. The pipeline derives per-day seeds from it.
    pub seed: u64,
}

impl Default for IcaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 500,
            seed: 0,
        }
    }
}

/// Two-component ICA fit of one residual ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaModel {
    /// K×2. `sources = residuals · unmixing`.
    pub unmixing: DMatrix<f64>,
    /// 2×K. Centered sources times this reproduce the rank-2 part of the
    /// centered residuals.
    pub mixing: DMatrix<f64>,
    /// Orthogonal 2×2 rotation of the whitened space; rows are unmixing
    /// directions.
    pub rotation: Matrix2<f64>,
    /// N×2, uncentered.
    pub sources: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IcaModel {
    /// Sources with their column means removed.
    pub fn centered_sources(&self) -> DMatrix<f64> {
        let mut s = self.sources.clone();
        let mean = s.row_mean();
        for mut row in s.row_iter_mut() {
            row -= &mean;
        }
        s
    }
}

/// Rotation by a seeded uniform angle.
pub fn random_rotation(seed: u64) -> Matrix2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// (W Wᵀ)^{-1/2} W
fn symmetric_decorrelation(w: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let d = eig.eigenvalues.map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    let v = eig.eigenvectors;
    v * Matrix2::from_diagonal(&d) * v.transpose() * w
}

/// Symmetric fixed-point FastICA with the log-cosh contrast on N×2 whitened
/// data.
///
/// Iterates `w ← E[z g(wᵀz)] − E[g'(wᵀz)] w` for both rows with symmetric
/// decorrelation, stopping once every row moves by less than `opts.tol`
/// (measured as `1 − |⟨w_new, w_old⟩|`). Running out of iterations is not an
/// error; `converged` records the outcome. The unmixing matrix is composed
/// with `whitening` so that sources come straight from the residuals.
pub fn fastica_2comp(
    whitened: &DMatrix<f64>,
    whitening: &WhiteningModel,
    opts: &IcaOptions,
) -> IcaModel {
    let n = whitened.nrows() as f64;
    let mut rot = random_rotation(opts.seed);
    let mut converged = false;
    let mut iterations = 0;

    let mut y = DMatrix::zeros(whitened.nrows(), 2);
    while iterations < opts.max_iters {
        whitened.mul_to(&rot.transpose(), &mut y);
        let mut gz = Matrix2::zeros();
        let mut dg = [0.0; 2];
        for i in 0..whitened.nrows() {
            for c in 0..2 {
                let g = y[(i, c)].tanh();
                dg[c] += 1.0 - g * g;
                gz[(c, 0)] += g * whitened[(i, 0)];
                gz[(c, 1)] += g * whitened[(i, 1)];
            }
        }
        let mut next = gz / n;
        for c in 0..2 {
            let scale = dg[c] / n;
            next[(c, 0)] -= scale * rot[(c, 0)];
            next[(c, 1)] -= scale * rot[(c, 1)];
        }
        let next = symmetric_decorrelation(&next);
        let change = (0..2)
            .map(|c| (1.0 - next.row(c).dot(&rot.row(c)).abs()).abs())
            .fold(0.0, f64::max);
        rot = next;
        iterations += 1;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let rot_dyn = DMatrix::from_column_slice(2, 2, rot.as_slice());
    let unmixing = whitening.whitening.transpose() * rot_dyn.transpose();
    let mixing = &rot_dyn * whitening.dewhitening.transpose();
    let mut sources = whitened * rot_dyn.transpose();
    let offset = whitening.mean.transpose() * &unmixing;
    for mut row in sources.row_iter_mut() {
        row += &offset;
    }
    IcaModel {
        unmixing,
        mixing,
        rotation: rot,
        sources,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ica::center_and_whiten;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn laplace(rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = Exp1.sample(rng);
        if rng.random::<bool>() {
            e
        } else {
            -e
        }
    }

    fn mixture(seed: u64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let square: Vec<f64> = (0..96).map(|i| if (i / 4) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let noise: Vec<f64> = (0..96).map(|_| laplace(&mut rng)).collect();
        let x = DMatrix::from_fn(96, 10, |i, k| {
            let a = 1.0 + 0.1 * k as f64;
            let b = -1.0 + 0.2 * k as f64;
            a * square[i] + b * noise[i]
        });
        (x, square, noise)
    }

    #[test]
    fn recovers_square_wave_and_laplace() {
        let (x, square, noise) = mixture(3);
        let (z, w) = center_and_whiten(&x).unwrap();
        let m = fastica_2comp(&z, &w, &IcaOptions::default());
        assert!(m.converged);
        let s0: Vec<f64> = m.sources.column(0).iter().copied().collect();
        let s1: Vec<f64> = m.sources.column(1).iter().copied().collect();
        let best = corr(&s0, &square).abs().max(corr(&s1, &square).abs());
        let best_noise = corr(&s0, &noise).abs().max(corr(&s1, &noise).abs());
        assert!(best >= 0.95, "{best}");
        assert!(best_noise >= 0.95, "{best_noise}");
    }

    #[test]
    fn rotation_is_orthonormal_and_sources_match_unmixing() {
        let (x, _, _) = mixture(8);
        let (z, w) = center_and_whiten(&x).unwrap();
        let m = fastica_2comp(&z, &w, &IcaOptions::default());
        assert!((m.rotation * m.rotation.transpose() - Matrix2::identity()).norm() < 1e-8);
        assert!((&x * &m.unmixing - &m.sources).norm() < 1e-9 * m.sources.norm());
    }

    #[test]
    fn reconstruction_of_rank_two_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(96, 10, |_, _| StandardNormal.sample(&mut rng));
        let (z, w) = center_and_whiten(&x).unwrap();
        let m = fastica_2comp(&z, &w, &IcaOptions::default());
        let target = &z * w.dewhitening.transpose();
        let rebuilt = m.centered_sources() * &m.mixing;
        assert!((rebuilt - &target).norm() <= 1e-6 * target.norm());
    }

    #[test]
    fn zero_iterations_returns_initial_rotation() {
        let (x, _, _) = mixture(5);
        let (z, w) = center_and_whiten(&x).unwrap();
        let opts = IcaOptions {
            max_iters: 0,
            seed: 99,
            ..IcaOptions::default()
        };
        let m = fastica_2comp(&z, &w, &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 0);
        assert_eq!(m.rotation, random_rotation(99));
    }

    #[test]
    fn gaussian_input_does_not_crash() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(96, 5, |_, _| StandardNormal.sample(&mut rng));
        let (z, w) = center_and_whiten(&x).unwrap();
        let m = fastica_2comp(&z, &w, &IcaOptions { max_iters: 20, ..Default::default() });
        assert!(m.sources.iter().all(|v| v.is_finite()));
        assert!(m.iterations <= 20);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, _, _) = mixture(4);
        let (z, w) = center_and_whiten(&x).unwrap();
        let opts = IcaOptions { seed: 7, ..Default::default() };
        assert_eq!(fastica_2comp(&z, &w, &opts), fastica_2comp(&z, &w, &opts));
    }
}
