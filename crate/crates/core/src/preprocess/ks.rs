use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov statistic: the largest vertical gap between
/// the two empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        // Step over every tie at v in both samples before measuring.
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Compares a candidate mild day's samples against the pooled mild samples.
/// Passes when the KS statistic does not exceed `max_ks`.
pub fn verify_mild_distribution(
    candidate: &[f64],
    mild_pool_samples: &[f64],
    max_ks: f64,
) -> Result<(bool, f64)> {
    if mild_pool_samples.is_empty() {
        return Err(Error::EmptyInput("mild pool is empty"));
    }
    let ks = ks_statistic(candidate, mild_pool_samples);
    Ok((ks <= max_ks, ks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Direct definition: evaluate both ECDFs at every observed point.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_constant_samples() {
        let (pass, ks) = verify_mild_distribution(&[1.2; 96], &[1.2; 960], 0.3).unwrap();
        assert_eq!(ks, 0.0);
        assert!(pass);
    }

    #[test]
    fn disjoint_supports() {
        let pool: Vec<f64> = (0..200).map(|i| (i % 17) as f64 * 0.1).collect();
        let cand: Vec<f64> = pool.iter().take(96).map(|v| v + 3.0).collect();
        let (pass, ks) = verify_mild_distribution(&cand, &pool, 0.3).unwrap();
        assert_eq!(ks, 1.0);
        assert!(!pass);
    }

    #[test]
    fn empty_pool_errors() {
        assert!(verify_mild_distribution(&[1.0], &[], 0.3).is_err());
    }

    #[test]
    fn same_gaussian_passes_with_high_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let normal = Normal::new(1.0, 0.4).unwrap();
        let trials = 10_000;
        let mut below = 0;
        let mut a = vec![0.0; 96];
        let mut b = vec![0.0; 96];
        for _ in 0..trials {
            a.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            b.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            if ks_statistic(&a, &b) < 0.3 {
                below += 1;
            }
        }
        assert!(below as f64 / trials as f64 >= 0.99, "{below}/{trials}");
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            a in proptest::collection::vec(0u8..20, 1..40),
            b in proptest::collection::vec(0u8..20, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let fast = ks_statistic(&a, &b);
            prop_assert!((fast - brute_force(&a, &b)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }
    }
}
