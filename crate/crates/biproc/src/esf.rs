//! The sampling formula over counts-of-counts, sequential arrival
//! sampling, and the Poisson conditioning relations.
//!
//! The sampling formula gives the law of the family-size spectrum
//! (c_1, c_2, …) of an n-sample; the sequential model realizes it one
//! arrival at a time, each newcomer founding a new family with probability
//! θ/(θ+m) after m arrivals, otherwise joining a family size-biasedly.
//! Conditioning independent Poisson counts with means θx^i/i on a weighted
//! sum recovering n yields the same law, which the rejection checks here
//! verify empirically.

use crate::distributions::ModelParams;
use crate::error::{Error, Result};
use crate::interval::SampleSizes;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::fmt;

/// A counts-of-counts vector: entry j−1 is the number of families of size
/// j. Stored in canonical form with trailing zeros trimmed, so two
/// spectra compare equal regardless of padding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountsOfCounts {
    counts: Vec<u64>,
}

impl CountsOfCounts {
    pub fn new(mut counts: Vec<u64>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        Self { counts }
    }

    pub fn from_family_sizes(sizes: &[u64]) -> Self {
        let max = sizes.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; max as usize];
        for &s in sizes {
            if s > 0 {
                counts[s as usize - 1] += 1;
            }
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of families of size j.
    pub fn count_of_size(&self, j: u64) -> u64 {
        if j == 0 || j as usize > self.counts.len() {
            0
        } else {
            self.counts[j as usize - 1]
        }
    }

    /// Σ j·c_j, the number of individuals represented.
    pub fn weighted_total(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64 + 1) * c)
            .sum()
    }

    /// Σ c_j, the number of families.
    pub fn families(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Whether this vector is a partition of n (Σ j·c_j = n).
    pub fn is_partition_of(&self, n: u64) -> bool {
        self.weighted_total() == n
    }

    /// The counts padded with zeros out to length n.
    pub fn padded(&self, n: usize) -> Vec<u64> {
        let mut v = self.counts.clone();
        v.resize(v.len().max(n), 0);
        v
    }
}

impl fmt::Display for CountsOfCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of n as counts-of-counts vectors, in the deterministic
/// order produced by the descending-part recursion. p(n) grows quickly;
/// enumeration stays comfortable for n ≤ 30 or so.
pub fn partitions(n: u64) -> Vec<CountsOfCounts> {
    let mut out = Vec::new();
    let mut counts = vec![0u64; n as usize];
    fn descend(remaining: u64, max_part: u64, counts: &mut [u64], out: &mut Vec<CountsOfCounts>) {
        if remaining == 0 {
            out.push(CountsOfCounts::new(counts.to_vec()));
            return;
        }
        let mut k = remaining.min(max_part);
        while k >= 1 {
            counts[k as usize - 1] += 1;
            descend(remaining - k, k, counts, out);
            counts[k as usize - 1] -= 1;
            k -= 1;
        }
    }
    if n > 0 {
        descend(n, n, &mut counts, &mut out);
    } else {
        out.push(CountsOfCounts::new(vec![]));
    }
    out
}

/// ln θ_(n) = ln(θ(θ+1)⋯(θ+n−1)); exact product below 50 factors,
/// log-gamma differences beyond, where the product would overflow.
fn ln_rising_factorial(theta: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else if n <= 50 {
        (0..n).map(|i| (theta + i as f64).ln()).sum()
    } else {
        ln_gamma(theta + n as f64) - ln_gamma(theta)
    }
}

/// Probability of a counts-of-counts configuration for an n-sample:
///
/// (n!/θ_(n)) Π_{j=1}^n (θ/j)^{c_j} / c_j!
///
/// Configurations that fail Σ j·c_j = n do not partition the sample and
/// get probability 0 (the indicator in the formula), not an error; callers
/// can distinguish that structural zero via
/// [`CountsOfCounts::is_partition_of`].
pub fn esf_pmf(params: &ModelParams, n: u64, config: &CountsOfCounts) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("the sample size n must be at least 1"));
    }
    if !config.is_partition_of(n) {
        return Ok(0.0);
    }
    let theta = params.theta();
    let mut ln_p = ln_gamma(n as f64 + 1.0) - ln_rising_factorial(theta, n);
    for (i, &c) in config.counts().iter().enumerate() {
        if c == 0 {
            continue;
        }
        let j = (i + 1) as f64;
        ln_p += c as f64 * (theta.ln() - j.ln()) - ln_gamma(c as f64 + 1.0);
    }
    Ok(ln_p.exp())
}

/// Sequential arrival state: the sizes of the families in founding order
/// plus the number of arrivals so far. Family identity is the stable index
/// into `family_sizes`; counts-of-counts views forget it.
#[derive(Debug, Clone, Default)]
pub struct CrpState {
    family_sizes: Vec<u64>,
    arrivals: u64,
}

impl CrpState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn family_sizes(&self) -> &[u64] {
        &self.family_sizes
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn counts_of_counts(&self) -> CountsOfCounts {
        CountsOfCounts::from_family_sizes(&self.family_sizes)
    }

    /// Advance by one arrival: found a new family with probability
    /// θ/(θ+m), otherwise join an existing family with probability
    /// proportional to its size. Returns the index of the family the
    /// arrival ended up in.
    pub fn step(&mut self, params: &ModelParams, rng: &mut impl Rng) -> usize {
        let theta = params.theta();
        let m = self.arrivals as f64;
        self.arrivals += 1;
        if rng.random::<f64>() * (theta + m) < theta {
            self.family_sizes.push(1);
            return self.family_sizes.len() - 1;
        }
        // pick a uniform individual and grow its family
        let mut pick = rng.random_range(0..self.arrivals - 1);
        for (idx, &size) in self.family_sizes.iter().enumerate() {
            if pick < size {
                self.family_sizes[idx] += 1;
                return idx;
            }
            pick -= size;
        }
        unreachable!("family sizes sum to the arrival count");
    }
}

/// Number of distinct families represented in each of p consecutive
/// arrival batches of the given sizes, from a single sequential run. A
/// family counts in a batch when at least one arrival of that batch
/// founded or joined it.
pub fn crp_sequential_counts(
    params: &ModelParams,
    sizes: &SampleSizes,
    rng: &mut impl Rng,
) -> Vec<u64> {
    let mut state = CrpState::new();
    let mut out = Vec::with_capacity(sizes.count());
    for &batch in sizes.sizes() {
        let mut touched: Vec<bool> = vec![false; state.family_sizes.len()];
        let mut distinct = 0u64;
        for _ in 0..batch {
            let idx = state.step(params, rng);
            if idx >= touched.len() {
                touched.resize(idx + 1, false);
            }
            if !touched[idx] {
                touched[idx] = true;
                distinct += 1;
            }
        }
        out.push(distinct);
    }
    out
}

/// Counts-of-counts snapshots after the given cumulative arrival numbers
/// (strictly increasing), from a single sequential run.
pub fn crp_counts_at(
    params: &ModelParams,
    checkpoints: &[u64],
    rng: &mut impl Rng,
) -> Vec<CountsOfCounts> {
    let mut state = CrpState::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        while state.arrivals < target {
            state.step(params, rng);
        }
        out.push(state.counts_of_counts());
    }
    out
}

/// Which weighted sum the Poisson counts are conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonConditioning {
    /// Condition on Σ_{i≤n} i·π_i(x) = n; valid for x ∈ (0, 1].
    FiniteSum,
    /// Condition on Σ_{i≥1} i·π_i(x) = n (truncated where the remaining
    /// Poisson mass is below 1e−12); valid for x ∈ (0, 1) only.
    InfiniteSum,
}

/// Empirical and exact weight of one partition in a conditioning run.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStat {
    pub partition: CountsOfCounts,
    pub count: u64,
    pub empirical: f64,
    pub exact: f64,
}

/// Outcome of a rejection-sampled conditioning experiment: the empirical
/// law over partitions next to the exact sampling-formula law, their total
/// variation distance, and the rejection accounting.
#[derive(Debug, Clone)]
pub struct ConditioningReport {
    pub tv_distance: f64,
    pub accepted: u64,
    pub attempts: u64,
    pub acceptance_rate: f64,
    /// Per-partition statistics in the deterministic enumeration order.
    pub law: Vec<PartitionStat>,
}

/// Estimated acceptance rates below this floor abort the rejection loop.
pub const ACCEPTANCE_FLOOR: f64 = 1e-6;

/// Simulate independent Poisson counts π_i with means θx^i/i, keep
/// realizations whose weighted sum equals n, and compare the law of the
/// accepted (π_1, …, π_n) against the sampling formula.
pub fn poisson_conditioning_check(
    params: &ModelParams,
    x: f64,
    n: u64,
    accepted_target: u64,
    mode: PoissonConditioning,
    rng: &mut impl Rng,
) -> Result<ConditioningReport> {
    if n == 0 {
        return Err(Error::domain("the sample size n must be at least 1"));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain(format!("x must lie in (0,1], got {x}")));
    }
    if mode == PoissonConditioning::InfiniteSum && x == 1.0 {
        return Err(Error::domain(
            "the infinite-sum conditioning needs x < 1 (the sum is infinite at x = 1)",
        ));
    }
    if accepted_target == 0 {
        return Err(Error::domain("need at least one accepted sample"));
    }

    let theta = params.theta();
    let top = match mode {
        PoissonConditioning::FiniteSum => n,
        PoissonConditioning::InfiniteSum => {
            // smallest m ≥ n with remaining Poisson mass θ x^{m+1}/((m+1)(1−x)) < 1e−12
            let mut m = n;
            while theta * x.powi(m as i32 + 1) / ((m as f64 + 1.0) * (1.0 - x)) >= 1e-12 {
                m += 1;
            }
            m
        }
    };
    let samplers: Vec<Poisson<f64>> = (1..=top)
        .map(|i| {
            Poisson::new(theta * x.powi(i as i32) / i as f64)
                .map_err(|e| Error::domain(format!("poisson mean for index {i}: {e}")))
        })
        .collect::<Result<_>>()?;

    let mut counts: HashMap<CountsOfCounts, u64> = HashMap::new();
    let mut accepted = 0u64;
    let mut attempts = 0u64;
    let mut draw = vec![0u64; top as usize];
    while accepted < accepted_target {
        attempts += 1;
        let mut total = 0u64;
        let mut overshoot = false;
        for (i, sampler) in samplers.iter().enumerate() {
            let v = sampler.sample(rng) as u64;
            draw[i] = v;
            total += (i as u64 + 1) * v;
            if total > n {
                overshoot = true;
                break;
            }
        }
        if !overshoot && total == n {
            accepted += 1;
            *counts
                .entry(CountsOfCounts::new(draw[..n as usize].to_vec()))
                .or_insert(0) += 1;
        }
        if attempts.is_multiple_of(1_000_000) {
            let rate = accepted as f64 / attempts as f64;
            if rate < ACCEPTANCE_FLOOR {
                return Err(Error::AcceptanceFloor {
                    rate,
                    attempts,
                    floor: ACCEPTANCE_FLOOR,
                });
            }
        }
    }

    let mut law = Vec::new();
    let mut tv = 0.0;
    for partition in partitions(n) {
        let exact = esf_pmf(params, n, &partition)?;
        let count = counts.get(&partition).copied().unwrap_or(0);
        let empirical = count as f64 / accepted as f64;
        tv += (empirical - exact).abs();
        law.push(PartitionStat {
            partition,
            count,
            empirical,
            exact,
        });
    }
    Ok(ConditioningReport {
        tv_distance: tv / 2.0,
        accepted,
        attempts,
        acceptance_rate: accepted as f64 / attempts as f64,
        law,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(theta: f64) -> ModelParams {
        ModelParams::new(theta).unwrap()
    }

    #[test]
    fn counts_canonicalize() {
        let a = CountsOfCounts::new(vec![2, 0, 0]);
        let b = CountsOfCounts::new(vec![2]);
        assert_eq!(a, b);
        assert_eq!(a.weighted_total(), 2);
        assert_eq!(a.families(), 2);
        assert_eq!(a.padded(4), vec![2, 0, 0, 0]);
        let c = CountsOfCounts::from_family_sizes(&[3, 1, 1]);
        assert_eq!(c.counts(), &[2, 0, 1]);
        assert_eq!(c.count_of_size(3), 1);
        assert_eq!(c.count_of_size(7), 0);
        assert!(c.is_partition_of(5));
        assert_eq!(c.to_string(), "(2,0,1)");
    }

    #[test]
    fn partition_counts_match_known_values() {
        // p(n) for n = 1..9
        let expected = [1usize, 2, 3, 5, 7, 11, 15, 22, 30];
        for (n, &count) in (1u64..=9).zip(&expected) {
            let parts = partitions(n);
            assert_eq!(parts.len(), count, "n={n}");
            assert!(parts.iter().all(|c| c.is_partition_of(n)));
        }
    }

    #[test]
    fn esf_two_sample_split() {
        let p1 = params(1.0);
        // second arrival founds a new family with probability θ/(θ+1) = 1/2
        let singletons = CountsOfCounts::new(vec![2]);
        let pair = CountsOfCounts::new(vec![0, 1]);
        assert!((esf_pmf(&p1, 2, &singletons).unwrap() - 0.5).abs() < 1e-14);
        assert!((esf_pmf(&p1, 2, &pair).unwrap() - 0.5).abs() < 1e-14);
        // one individual, one family
        let single = CountsOfCounts::new(vec![1]);
        assert!((esf_pmf(&p1, 1, &single).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn esf_sums_to_one_over_partitions() {
        for &theta in &[0.5, 1.0, 2.5] {
            let p = params(theta);
            for n in 1..=8u64 {
                let total: f64 = partitions(n)
                    .iter()
                    .map(|c| esf_pmf(&p, n, c).unwrap())
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "theta={theta}, n={n}");
            }
        }
    }

    #[test]
    fn esf_frozen_table_entries() {
        // frozen from the enumeration oracle at n=5, θ=1
        let p1 = params(1.0);
        assert!((esf_pmf(&p1, 5, &CountsOfCounts::new(vec![0, 0, 0, 0, 1])).unwrap() - 0.2)
            .abs()
            < 1e-14);
        assert!(
            (esf_pmf(&p1, 5, &CountsOfCounts::new(vec![1, 2])).unwrap() - 0.125).abs() < 1e-14
        );
        assert!(
            (esf_pmf(&p1, 5, &CountsOfCounts::new(vec![5])).unwrap() - 1.0 / 120.0).abs() < 1e-14
        );
    }

    #[test]
    fn esf_non_partition_is_zero() {
        let p1 = params(1.0);
        let bad = CountsOfCounts::new(vec![1, 1]); // represents 3 individuals, not 2
        assert!(!bad.is_partition_of(2));
        assert_eq!(esf_pmf(&p1, 2, &bad).unwrap(), 0.0);
        assert!(esf_pmf(&p1, 0, &bad).is_err());
    }

    #[test]
    fn esf_large_n_uses_log_gamma_branch() {
        // continuity across the product/log-gamma switch at n = 50: the
        // all-singletons configuration has probability θ^n / θ_(n)
        let p = params(0.7);
        for n in [49u64, 50, 51, 120] {
            let config = CountsOfCounts::new(vec![n]);
            let direct = esf_pmf(&p, n, &config).unwrap();
            let expected =
                (n as f64 * 0.7f64.ln() - super::ln_rising_factorial(0.7, n)).exp();
            assert!((direct - expected).abs() < 1e-15 * expected.max(1.0), "n={n}");
        }
    }

    #[test]
    fn crp_step_preserves_arrival_invariant() {
        let p = params(2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = CrpState::new();
        for m in 0..200u64 {
            assert_eq!(state.arrivals(), m);
            assert_eq!(state.family_sizes().iter().sum::<u64>(), m);
            state.step(&p, &mut rng);
        }
        assert!(state.counts_of_counts().is_partition_of(200));
    }

    #[test]
    fn crp_first_arrival_always_founds() {
        let p = params(0.01);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = CrpState::new();
            state.step(&p, &mut rng);
            assert_eq!(state.family_sizes(), &[1]);
        }
    }

    #[test]
    fn crp_second_arrival_splits_evenly_at_theta_one() {
        let p1 = params(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 100_000;
        let mut new_family = 0u64;
        for _ in 0..reps {
            let mut state = CrpState::new();
            state.step(&p1, &mut rng);
            if state.step(&p1, &mut rng) == 1 {
                new_family += 1;
            }
        }
        let phat = new_family as f64 / reps as f64;
        let se = (0.25f64 / reps as f64).sqrt();
        assert!((phat - 0.5).abs() < 4.0 * se, "phat={phat}");
    }

    #[test]
    fn sequential_counts_first_batch_mean() {
        // E(distinct families in one batch of n) = Σ_{i=1}^n θ/(θ+i−1);
        // frozen at θ=1, n=5: 1 + 1/2 + 1/3 + 1/4 + 1/5
        let p1 = params(1.0);
        let sizes = SampleSizes::new(vec![5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..reps {
            let s = crp_sequential_counts(&p1, &sizes, &mut rng)[0] as f64;
            sum += s;
            sumsq += s * s;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        let exact = 2.283333333333333;
        let z = (mean - exact) / (var / reps as f64).sqrt();
        assert!(z.abs() < 4.0, "mean={mean}, z={z}");

        let single = SampleSizes::new(vec![1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(crp_sequential_counts(&p1, &single, &mut rng), vec![1]);
    }

    #[test]
    fn crp_counts_at_checkpoints_are_partitions() {
        let p = params(1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let snaps = crp_counts_at(&p, &[2, 4, 9], &mut rng);
        assert!(snaps[0].is_partition_of(2));
        assert!(snaps[1].is_partition_of(4));
        assert!(snaps[2].is_partition_of(9));
    }

    #[test]
    fn conditioning_check_validates_inputs() {
        let p1 = params(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(poisson_conditioning_check(
            &p1, 0.0, 2, 10, PoissonConditioning::FiniteSum, &mut rng
        )
        .is_err());
        assert!(poisson_conditioning_check(
            &p1, 1.1, 2, 10, PoissonConditioning::FiniteSum, &mut rng
        )
        .is_err());
        assert!(poisson_conditioning_check(
            &p1, 1.0, 2, 10, PoissonConditioning::InfiniteSum, &mut rng
        )
        .is_err());
        assert!(poisson_conditioning_check(
            &p1, 1.0, 2, 10, PoissonConditioning::FiniteSum, &mut rng
        )
        .is_ok());
    }

    #[test]
    fn conditioning_check_converges_to_sampling_formula() {
        let p1 = params(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let report = poisson_conditioning_check(
            &p1,
            0.5,
            2,
            20_000,
            PoissonConditioning::FiniteSum,
            &mut rng,
        )
        .unwrap();
        assert!(report.tv_distance < 0.02, "tv={}", report.tv_distance);
        assert_eq!(report.accepted, 20_000);
        assert!(report.acceptance_rate > 0.01);

        let report = poisson_conditioning_check(
            &p1,
            0.7,
            2,
            20_000,
            PoissonConditioning::InfiniteSum,
            &mut rng,
        )
        .unwrap();
        assert!(report.tv_distance < 0.02, "tv={}", report.tv_distance);
    }

    #[test]
    fn infinite_sum_acceptance_matches_population_law() {
        // the truncated weighted sum follows the negative-binomial
        // population law with x = 1 − e^{−t}
        let p1 = params(1.0);
        let x = 0.7f64;
        let t = -(-x).ln_1p();
        let n = 2u64;
        let exact = crate::distributions::population_size_pmf(&p1, t, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let report = poisson_conditioning_check(
            &p1,
            x,
            n,
            5_000,
            PoissonConditioning::InfiniteSum,
            &mut rng,
        )
        .unwrap();
        let se = (exact * (1.0 - exact) / report.attempts as f64).sqrt();
        assert!(
            (report.acceptance_rate - exact).abs() < 4.0 * se,
            "rate={}, exact={exact}",
            report.acceptance_rate
        );
    }
}
