//! Goodness-of-fit helpers for the verification reports: Pearson
//! chi-square against an exact law, the two-sample chi-square, and the
//! one-sample Kolmogorov–Smirnov statistic.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a chi-square test after pooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Minimum expected count per cell; sparser cells are pooled into their
/// successor so the chi-square approximation stays trustworthy.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square of observed counts against expected probabilities.
/// The probabilities must cover the whole sample (sum to 1 within 1e-9);
/// cells are pooled left-to-right until each pool's expected count reaches
/// [`MIN_EXPECTED`], with a deficient final pool merged backwards.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected_probs.len() || observed.is_empty() {
        return Err(Error::domain(
            "observed and expected cells must align and be nonempty",
        ));
    }
    let psum: f64 = expected_probs.iter().sum();
    if (psum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "expected probabilities must sum to 1, got {psum}"
        )));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::domain("no observations"));
    }
    let n = total as f64;

    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_obs += o as f64;
        acc_exp += p * n;
        if acc_exp >= MIN_EXPECTED {
            pooled.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            pooled.push((acc_obs, acc_exp));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::domain(
            "fewer than two cells remain after pooling; the test is vacuous",
        ));
    }

    let statistic: f64 = pooled
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = pooled.len() - 1;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value: chi_square_sf(statistic, df),
    })
}

/// Two-sample chi-square for homogeneity: do two sets of category counts
/// come from the same law? Cells where both samples expect fewer than
/// [`MIN_EXPECTED`] under the pooled law are merged left-to-right.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::domain("category counts must align and be nonempty"));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::domain("both samples need observations"));
    }
    let (na, nb) = (na as f64, nb as f64);
    let total = na + nb;

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for (&oa, &ob) in a.iter().zip(b) {
        acc_a += oa as f64;
        acc_b += ob as f64;
        let pooled_p = (acc_a + acc_b) / total;
        if pooled_p * na >= MIN_EXPECTED && pooled_p * nb >= MIN_EXPECTED {
            pooled.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a > 0.0 || acc_b > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_a;
            last.1 += acc_b;
        } else {
            pooled.push((acc_a, acc_b));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::domain(
            "fewer than two cells remain after pooling; the test is vacuous",
        ));
    }

    let mut statistic = 0.0;
    for &(oa, ob) in &pooled {
        let p = (oa + ob) / total;
        let (ea, eb) = (p * na, p * nb);
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let df = pooled.len() - 1;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value: chi_square_sf(statistic, df),
    })
}

fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}

/// One-sample Kolmogorov–Smirnov statistic sup |F̂(x) − F(x)| against the
/// given CDF. The asymptotic critical value at level α is
/// sqrt(-ln(α/2)/2)/√n (1.63/√n at α = 0.01).
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("no samples"));
    }
    samples.sort_by(|x, y| x.total_cmp(y));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    Ok(d)
}

/// Critical value of the KS statistic at level α for n samples
/// (asymptotic form, accurate for n ≳ 50).
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gof_accepts_true_law_and_rejects_wrong_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = [0.5, 0.3, 0.2];
        let mut counts = [0u64; 3];
        for _ in 0..10_000 {
            let u: f64 = rng.random();
            let k = if u < 0.5 {
                0
            } else if u < 0.8 {
                1
            } else {
                2
            };
            counts[k] += 1;
        }
        let ok = chi_square_gof(&counts, &probs).unwrap();
        assert!(ok.p_value > 0.001, "p={}", ok.p_value);
        assert_eq!(ok.degrees_of_freedom, 2);

        let wrong = [0.4, 0.4, 0.2];
        let bad = chi_square_gof(&counts, &wrong).unwrap();
        assert!(bad.p_value < 1e-6, "p={}", bad.p_value);
    }

    #[test]
    fn gof_pools_sparse_tail() {
        // geometric-ish tail with tiny expected counts gets pooled
        let probs = [0.6, 0.3, 0.06, 0.03, 0.007, 0.002, 0.001];
        let counts = [610u64, 290, 58, 32, 7, 2, 1];
        let t = chi_square_gof(&counts, &probs).unwrap();
        assert!(t.degrees_of_freedom < 6);
        assert!(t.p_value > 0.001);
    }

    #[test]
    fn gof_validates_inputs() {
        assert!(chi_square_gof(&[1, 2], &[0.5]).is_err());
        assert!(chi_square_gof(&[1, 2], &[0.5, 0.4]).is_err());
        assert!(chi_square_gof(&[0, 0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn two_sample_agrees_on_identical_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = [0u64; 4];
        let mut b = [0u64; 4];
        for _ in 0..8_000 {
            a[rng.random_range(0..4)] += 1;
            b[rng.random_range(0..4)] += 1;
        }
        let t = chi_square_two_sample(&a, &b).unwrap();
        assert!(t.p_value > 0.001, "p={}", t.p_value);

        // grossly different laws are caught
        let c = [4000u64, 2000, 1500, 500];
        let d = [500u64, 1500, 2000, 4000];
        let t = chi_square_two_sample(&c, &d).unwrap();
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn ks_statistic_on_uniform_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples: Vec<f64> = (0..5_000).map(|_| rng.random()).collect();
        let d = ks_statistic(&mut samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < ks_critical_value(5_000, 0.01), "d={d}");
        // against a wrong CDF the statistic blows past the critical value
        let d_wrong = ks_statistic(&mut samples, |x| (x * x).clamp(0.0, 1.0)).unwrap();
        assert!(d_wrong > ks_critical_value(5_000, 0.001));
    }
}
