//! Closed-form means, covariances and sample-variance expectations for the
//! number of families observable in disjoint time windows, together with
//! the matching multi-sample designs (log-equal spacing, count-matched
//! grids) and the gap-time law of a randomly chosen family.
//!
//! A family is *observable* in a window when at least one of its birth
//! events (the founding arrival included) falls inside it. All formulas
//! are evaluated through `ln_signed_exp_sum`, so cut points far beyond
//! ln(f64::MAX) remain finite.

use crate::distributions::{polylog, LogSeriesLaw, ModelParams};
use crate::error::{Error, Result};
use crate::numeric::ln_signed_exp_sum;

/// A time window [lo, hi] with 0 ≤ lo ≤ hi. Zero-length windows are valid
/// and carry zero event probability; they arise as boundary cases of the
/// window calculus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi) || !hi.is_finite() {
            return Err(Error::domain(format!(
                "interval needs 0 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    /// Half-open membership (lo, hi]; the fixed convention that makes the
    /// per-realization counting identities exact.
    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t <= self.hi
    }
}

/// Ordered cut points 0 = t_0 < t_1 < … < t_p defining p sampling windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    cuts: Vec<f64>,
}

impl TimeGrid {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::domain("a time grid needs at least one window"));
        }
        if cuts[0] != 0.0 {
            return Err(Error::domain(format!(
                "the first cut point must be 0, got {}",
                cuts[0]
            )));
        }
        for w in cuts.windows(2) {
            if !(w[0] < w[1]) || !w[1].is_finite() {
                return Err(Error::domain(format!(
                    "cut points must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of windows p.
    pub fn windows(&self) -> usize {
        self.cuts.len() - 1
    }

    /// The i-th window (t_i, t_{i+1}], zero-indexed.
    pub fn window(&self, i: usize) -> Interval {
        Interval {
            lo: self.cuts[i],
            hi: self.cuts[i + 1],
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.cuts.last().unwrap()
    }
}

/// Per-window sample sizes n_1, …, n_p (all ≥ 1) with their running totals.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizes {
    sizes: Vec<u64>,
}

impl SampleSizes {
    pub fn new(sizes: Vec<u64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::domain("sample sizes must be nonempty"));
        }
        if sizes.contains(&0) {
            return Err(Error::domain("every sample size must be at least 1"));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Running totals l_1 < l_2 < … < l_p.
    pub fn cumulative(&self) -> Vec<u64> {
        let mut total = 0;
        self.sizes
            .iter()
            .map(|&n| {
                total += n;
                total
            })
            .collect()
    }
}

fn require_ordered(founded: Interval, window: Interval) -> Result<()> {
    if founded.hi > window.lo {
        return Err(Error::domain(format!(
            "windows must be ordered and disjoint: ({}, {}] must end before ({}, {}] starts",
            founded.lo, founded.hi, window.lo, window.hi
        )));
    }
    Ok(())
}

/// Expected number of families founded in `founded` = (a, b] that have no
/// birth in the later window (c, d]:
/// θ ln( (e^d − e^c + e^b) / (e^d − e^c + e^a) ). Poisson-distributed.
pub fn mean_unobservable(
    params: &ModelParams,
    founded: Interval,
    window: Interval,
) -> Result<f64> {
    require_ordered(founded, window)?;
    let (a, b) = (founded.lo, founded.hi);
    let (c, d) = (window.lo, window.hi);
    let num = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b)]);
    let den = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, a)]);
    Ok(params.theta() * (num - den))
}

/// Expected number of families founded in (0, a] with no birth in either
/// (a, b] or (c, d], for a ≤ b ≤ c ≤ d:
/// θ ln( (e^d − e^c + e^b) / (e^d − e^c + e^b − e^a + 1) ). Poisson.
pub fn mean_unobservable_two_windows(
    params: &ModelParams,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= c && c <= d) || !d.is_finite() {
        return Err(Error::domain(format!(
            "need 0 <= a <= b <= c <= d, got ({a}, {b}, {c}, {d})"
        )));
    }
    let num = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b)]);
    let den = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b), (-1.0, a), (1.0, 0.0)]);
    Ok(params.theta() * (num - den))
}

/// Expected number of families founded in `founded` = (a, b] that are
/// observable in the later window (c, d]:
/// θ ln( e^b (e^d − e^c + e^a) / (e^a (e^d − e^c + e^b)) ). Poisson, and
/// complementary to `mean_unobservable`: the two sum to θ(b − a).
pub fn mean_observable_from(
    params: &ModelParams,
    founded: Interval,
    window: Interval,
) -> Result<f64> {
    require_ordered(founded, window)?;
    let (a, b) = (founded.lo, founded.hi);
    let (c, d) = (window.lo, window.hi);
    let num = b + ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, a)]);
    let den = a + ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b)]);
    Ok(params.theta() * (num - den))
}

/// E S(a, b) = θ ln(e^b − e^a + 1), the Poisson mean of the number of
/// families observable in (a, b].
pub fn mean_observable(params: &ModelParams, window: Interval) -> Result<f64> {
    let (a, b) = (window.lo, window.hi);
    Ok(params.theta() * ln_signed_exp_sum(&[(1.0, b), (-1.0, a), (1.0, 0.0)]))
}

/// Means of the independent Poisson counts splitting two windows'
/// observability: families seen in both, in the first only, and in the
/// second only. `S(first) = both + first_only` and symmetrically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilitySplit {
    pub both: f64,
    pub first_only: f64,
    pub second_only: f64,
}

/// The three split means for ordered disjoint windows (a,b], (c,d].
pub fn kt_decomposition(
    params: &ModelParams,
    first: Interval,
    second: Interval,
) -> Result<ObservabilitySplit> {
    require_ordered(first, second)?;
    let theta = params.theta();
    let (a, b) = (first.lo, first.hi);
    let (c, d) = (second.lo, second.hi);
    let ln_d1 = ln_signed_exp_sum(&[(1.0, b), (-1.0, a), (1.0, 0.0)]);
    let ln_d2 = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, 0.0)]);
    let ln_d12 = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b), (-1.0, a), (1.0, 0.0)]);
    Ok(ObservabilitySplit {
        both: theta * (ln_d1 + ln_d2 - ln_d12),
        first_only: theta * (ln_d12 - ln_d2),
        second_only: theta * (ln_d12 - ln_d1),
    })
}

/// Cov(S(a,b), S(c,d)) = θ ln( (e^b−e^a+1)(e^d−e^c+1) / (e^d−e^c+e^b−e^a+1) ),
/// which equals the `both` component of the split (the shared Poisson count
/// is the only source of dependence). Nonnegative.
pub fn covariance_observable(
    params: &ModelParams,
    first: Interval,
    second: Interval,
) -> Result<f64> {
    require_ordered(first, second)?;
    let (a, b) = (first.lo, first.hi);
    let (c, d) = (second.lo, second.hi);
    let ln_d12 = ln_signed_exp_sum(&[(1.0, d), (-1.0, c), (1.0, b), (-1.0, a), (1.0, 0.0)]);
    Ok(mean_observable(params, first)? + mean_observable(params, second)?
        - params.theta() * ln_d12)
}

/// Expected sample variance E V_p of the window counts, with the
/// 1/(p(p−1)) normalization:
///
/// E V_p = (1/(p(p−1))) Σ_{i<j} { θ ln(D_{ij}²/(D_i D_j)) + θ² ln²(D_i/D_j) },
///
/// where D_i = e^{t_i} − e^{t_{i−1}} + 1 and D_{ij} = D_i + D_j − 1.
pub fn expected_sample_variance(params: &ModelParams, grid: &TimeGrid) -> Result<f64> {
    let p = grid.windows();
    if p < 2 {
        return Err(Error::domain(
            "the sample variance needs at least two windows",
        ));
    }
    let theta = params.theta();
    let cuts = grid.cuts();
    let ln_d: Vec<f64> = (0..p)
        .map(|i| ln_signed_exp_sum(&[(1.0, cuts[i + 1]), (-1.0, cuts[i]), (1.0, 0.0)]))
        .collect();
    let mut total = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let ln_dij = ln_signed_exp_sum(&[
                (1.0, cuts[j + 1]),
                (-1.0, cuts[j]),
                (1.0, cuts[i + 1]),
                (-1.0, cuts[i]),
                (1.0, 0.0),
            ]);
            let diff = ln_d[i] - ln_d[j];
            total += theta * (2.0 * ln_dij - ln_d[i] - ln_d[j]) + theta * theta * diff * diff;
        }
    }
    Ok(total / (p * (p - 1)) as f64)
}

/// The grid e^{t_i} = iγ + 1 on which the window counts are identically
/// distributed: t_i = ln(iγ + 1).
pub fn log_equal_grid(gamma: f64, p: usize) -> Result<TimeGrid> {
    check_gamma(gamma)?;
    if p == 0 {
        return Err(Error::domain("need at least one window"));
    }
    TimeGrid::new((0..=p).map(|i| (i as f64 * gamma).ln_1p()).collect())
}

/// Pairwise correlation of the window counts under the log-equal grid:
/// ρ = 2 − ln(2γ+1)/ln(γ+1).
pub fn log_equal_correlation(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(2.0 - (2.0 * gamma).ln_1p() / gamma.ln_1p())
}

/// Moment estimator of θ from window counts under the log-equal design:
/// the mean count divided by ln(1 + γ). Unbiased but not consistent in p.
pub fn watterson_estimator(observations: &[u64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if observations.is_empty() {
        return Err(Error::domain("need at least one observed count"));
    }
    let mean = observations.iter().map(|&s| s as f64).sum::<f64>() / observations.len() as f64;
    Ok(mean / gamma.ln_1p())
}

/// Exact variance of the θ estimator under the log-equal design:
/// (θ / (p ln(γ+1))) (1 + (p−1)ρ). Tends to θρ/ln(γ+1) as p → ∞, which is
/// why the estimator is not consistent.
pub fn watterson_variance(params: &ModelParams, gamma: f64, p: usize) -> Result<f64> {
    check_gamma(gamma)?;
    if p == 0 {
        return Err(Error::domain("need at least one window"));
    }
    let rho = log_equal_correlation(gamma)?;
    let l = gamma.ln_1p();
    Ok(params.theta() * (1.0 + (p as f64 - 1.0) * rho) / (p as f64 * l))
}

/// Cut points matching the expected population size to the running totals
/// of the given sample sizes: t_i = ln((θ + l_i)/θ).
pub fn fisher_grid(params: &ModelParams, sizes: &SampleSizes) -> Result<TimeGrid> {
    let theta = params.theta();
    let mut cuts = Vec::with_capacity(sizes.count() + 1);
    cuts.push(0.0);
    cuts.extend(
        sizes
            .cumulative()
            .iter()
            .map(|&l| (l as f64 / theta).ln_1p()),
    );
    TimeGrid::new(cuts)
}

/// Expected window count under the count-matched grid, as a function of
/// that window's sample size: θ ln((θ + n)/θ).
pub fn fisher_mean(params: &ModelParams, n: f64) -> Result<f64> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::domain(format!(
            "sample size must be nonnegative, got {n}"
        )));
    }
    Ok(params.theta() * (n / params.theta()).ln_1p())
}

/// Exact first and second moments of the window counts under the
/// count-matched grid, in the simplified forms that avoid composing the
/// window formulas through the cut points.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMoments {
    /// E S̃_i = θ ln((θ + n_i)/θ).
    pub means: Vec<f64>,
    /// Full covariance matrix; off-diagonal entries are
    /// θ ln((θ+n_i)(θ+n_j)/(θ(θ+n_i+n_j))), the diagonal is the Poisson
    /// variance (= mean).
    pub covariance: Vec<Vec<f64>>,
    /// E Ṽ_p = (1/(p(p−1))) Σ_{i<j} { θ ln((θ+n_i+n_j)²/((θ+n_i)(θ+n_j)))
    ///                                + θ² ln²((θ+n_i)/(θ+n_j)) }.
    pub expected_sample_variance: f64,
}

pub fn fisher_moments(params: &ModelParams, sizes: &SampleSizes) -> Result<FisherMoments> {
    let p = sizes.count();
    if p < 2 {
        return Err(Error::domain(
            "the covariance and sample variance need at least two samples",
        ));
    }
    let theta = params.theta();
    let n: Vec<f64> = sizes.sizes().iter().map(|&v| v as f64).collect();
    let means: Vec<f64> = n.iter().map(|&ni| theta * (ni / theta).ln_1p()).collect();
    let mut covariance = vec![vec![0.0; p]; p];
    let mut ev = 0.0;
    for i in 0..p {
        covariance[i][i] = means[i];
        for j in (i + 1)..p {
            let cov = theta
                * ((theta + n[i]).ln() + (theta + n[j]).ln()
                    - theta.ln()
                    - (theta + n[i] + n[j]).ln());
            covariance[i][j] = cov;
            covariance[j][i] = cov;
            let log_ratio = ((theta + n[i]) / (theta + n[j])).ln();
            ev += theta
                * (2.0 * (theta + n[i] + n[j]).ln()
                    - (theta + n[i]).ln()
                    - (theta + n[j]).ln())
                + theta * theta * log_ratio * log_ratio;
        }
    }
    ev /= (p * (p - 1)) as f64;
    Ok(FisherMoments {
        means,
        covariance,
        expected_sample_variance: ev,
    })
}

/// Large-sample limit of E Ṽ_p when the sample sizes grow proportionally
/// to the given weights q_1, …, q_p (positive, summing to 1):
///
/// (1/(p(p−1))) Σ_{i<j} { θ ln((q_i+q_j)²/(q_i q_j)) + θ² ln²(q_i/q_j) }.
///
/// Equal weights give θ ln 2 for every p.
pub fn fisher_asymptotics(params: &ModelParams, proportions: &[f64]) -> Result<f64> {
    let p = proportions.len();
    if p < 2 {
        return Err(Error::domain("need at least two proportions"));
    }
    if proportions.iter().any(|&q| !(q > 0.0) || !q.is_finite()) {
        return Err(Error::domain("all proportions must be positive"));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "proportions must sum to 1 within 1e-12, got {total}"
        )));
    }
    let q: Vec<f64> = proportions.iter().map(|&v| v / total).collect();
    let theta = params.theta();
    let mut sum = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let s = q[i] + q[j];
            let log_ratio = (q[i] / q[j]).ln();
            sum += theta * (s * s / (q[i] * q[j])).ln() + theta * theta * log_ratio * log_ratio;
        }
    }
    Ok(sum / (p * (p - 1)) as f64)
}

/// Density of the waiting time until a uniformly chosen family's next
/// birth after time t. The size of that family is log-series(q_t), and
/// given size n the wait is the minimum of n unit exponentials, so the
/// mixture sums to the closed form
///
/// f_t(s) = q_t e^{−s} / (t (1 − q_t e^{−s})),  q_t = 1 − e^{−t}.
pub fn gap_time_density(t: f64, s: f64) -> Result<f64> {
    let law = LogSeriesLaw::from_time(t)?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!(
            "waiting time s must be nonnegative, got {s}"
        )));
    }
    let qe = law.q() * (-s).exp();
    Ok(qe / (law.time() * (1.0 - qe)))
}

/// Moments of the waiting time. Two variance formulas are reported: the
/// one implied by the exponential-mixture representation,
/// 2·Li₃(q)/t − (Li₂(q)/t)², and the simpler Li₃(q)/t. They disagree;
/// Monte Carlo comparison of sampled gaps shows which one the data follow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapTimeMoments {
    /// E W = Li₂(q)/t.
    pub mean: f64,
    /// E W² = 2·Li₃(q)/t, from E[W² | size n] = 2/n².
    pub second_moment: f64,
    /// E W² − (E W)², the mixture-law variance.
    pub variance: f64,
    /// The alternative expression Li₃(q)/t, reported alongside.
    pub variance_li3: f64,
}

pub fn gap_time_moments(t: f64) -> Result<GapTimeMoments> {
    gap_time_moments_for(&LogSeriesLaw::from_time(t)?)
}

/// Moments computed from a log-series size law directly; the normalizer is
/// the law's own −ln(1−q), so a law built from q behaves identically.
pub fn gap_time_moments_for(law: &LogSeriesLaw) -> Result<GapTimeMoments> {
    let norm = law.time();
    let li2 = polylog(2, law.q())?;
    let li3 = polylog(3, law.q())?;
    let mean = li2 / norm;
    let second_moment = 2.0 * li3 / norm;
    Ok(GapTimeMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
        variance_li3: li3 / norm,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "gamma must be a positive finite real, got {gamma}"
        )));
    }
    Ok(())
}
