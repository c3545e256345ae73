//! Exact scalar laws for the birth process with immigration.
//!
//! Families arrive at Poisson rate θ and each individual gives birth at
//! rate 1 (time is scaled so the birth rate is unity). This module holds
//! the closed-form building blocks: the geometric family-size law, its
//! transition probabilities and generating function, the Φ integral, the
//! negative-binomial population-size law, the log-series law of a randomly
//! chosen family's size, and the polylogarithms that give gap-time moments.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use statrs::function::gamma::ln_gamma;

/// Model parameters: the immigration rate θ. The per-individual birth rate
/// is fixed at 1 by the time scaling, so θ is the only free parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    theta: f64,
}

impl ModelParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::domain(format!(
                "immigration rate theta must be a positive finite real, got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// P(family has j members after growing for time t from one founder).
///
/// Geometric with success probability e^{-t}. `t == 0` is treated as the
/// limit: a point mass at j = 1.
pub fn family_size_pmf(t: f64, j: u64) -> Result<f64> {
    check_time(t)?;
    if j == 0 {
        return Err(Error::domain("family size j must be at least 1"));
    }
    if t == 0.0 {
        return Ok(if j == 1 { 1.0 } else { 0.0 });
    }
    let log_q = (-(-t).exp_m1()).ln(); // ln(1 - e^{-t})
    Ok((-t + (j - 1) as f64 * log_q).exp())
}

/// P(family has k members at time t | it had j members at time 0).
///
/// Negative binomial: each of the j lines grows independently by the
/// geometric law, so the transition is the j-fold convolution
/// C(k-1, j-1) e^{-jt} (1-e^{-t})^{k-j}.
pub fn family_transition_pmf(t: f64, j: u64, k: u64) -> Result<f64> {
    check_time(t)?;
    if j == 0 {
        return Err(Error::domain("initial size j must be at least 1"));
    }
    if k < j {
        return Err(Error::domain(format!(
            "family size cannot shrink: k = {k} < j = {j}"
        )));
    }
    if k == j {
        return Ok((-(j as f64) * t).exp());
    }
    let q = -(-t).exp_m1();
    if q == 0.0 {
        return Ok(0.0); // no time has passed, no births
    }
    let ln_choose = ln_gamma(k as f64) - ln_gamma(j as f64) - ln_gamma((k - j + 1) as f64);
    Ok((ln_choose - j as f64 * t + (k - j) as f64 * q.ln()).exp())
}

/// Probability generating function E[s^{B(t)}] = e^{-t} s / (1 - (1-e^{-t}) s).
pub fn family_pgf(t: f64, s: f64) -> Result<f64> {
    check_time(t)?;
    check_unit_interval(s, "pgf argument s")?;
    let q = -(-t).exp_m1();
    Ok((-t).exp() * s / (1.0 - q * s))
}

/// Φ(a,b,c; s) = ∫_a^b φ(c-u; s) du
///             = ln( (1 - (1-e^{-(c-b)}) s) / (1 - (1-e^{-(c-a)}) s) ).
///
/// Requires 0 ≤ a ≤ b ≤ c and s ∈ [0, 1]. Both factors are evaluated as
/// (1-s) + s e^{-x}, which stays accurate for s near 1 and large spans.
pub fn phi_integral(a: f64, b: f64, c: f64, s: f64) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= c) || !c.is_finite() {
        return Err(Error::domain(format!(
            "phi integral needs 0 <= a <= b <= c, got a={a}, b={b}, c={c}"
        )));
    }
    check_unit_interval(s, "pgf argument s")?;
    let factor = |x: f64| (1.0 - s) + s * (-x).exp();
    Ok(factor(c - b).ln() - factor(c - a).ln())
}

/// P(Z(t) = n): negative binomial with the generalized coefficient
/// C(θ+n-1, n) e^{-θt} (1-e^{-t})^n, computed through log-gamma so that
/// non-integer θ and large n stay finite.
pub fn population_size_pmf(params: &ModelParams, t: f64, n: u64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time t must be positive, got {t}")));
    }
    let theta = params.theta();
    if n == 0 {
        return Ok((-theta * t).exp());
    }
    let q = -(-t).exp_m1();
    let ln_coeff =
        ln_gamma(theta + n as f64) - ln_gamma(theta) - ln_gamma(n as f64 + 1.0);
    Ok((ln_coeff - theta * t + n as f64 * q.ln()).exp())
}

/// E Z(t) = θ (e^t - 1).
pub fn expected_population_size(params: &ModelParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "time t must be nonnegative, got {t}"
        )));
    }
    Ok(params.theta() * t.exp_m1())
}

/// E C_i(t) = θ (1-e^{-t})^i / i, the Poisson mean of the number of
/// families of size i at time t.
pub fn family_count_mean(params: &ModelParams, t: f64, i: u64) -> Result<f64> {
    check_time(t)?;
    if i == 0 {
        return Err(Error::domain("family size index i must be at least 1"));
    }
    let q = -(-t).exp_m1();
    Ok(params.theta() * q.powi(i as i32) / i as f64)
}

/// The log-series law of the size of a family chosen uniformly among those
/// founded in (0, t): P(N = j) = q^j / (j · (-ln(1-q))) with q = 1 - e^{-t}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSeriesLaw {
    q: f64,
    t: f64,
}

impl LogSeriesLaw {
    /// Construct from the sampling time t > 0, setting q = 1 - e^{-t}.
    pub fn from_time(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time t must be positive, got {t}")));
        }
        Ok(Self { q: -(-t).exp_m1(), t })
    }

    /// Construct from the parameter q ∈ (0, 1); the normalizer is
    /// -ln(1-q), which doubles as the implied sampling time.
    pub fn from_q(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!(
                "log-series parameter q must lie in (0,1), got {q}"
            )));
        }
        Ok(Self { q, t: -(-q).ln_1p() })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The normalizer -ln(1-q); equals the sampling time under `from_time`.
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn pmf(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::domain("log-series support starts at 1"));
        }
        Ok((j as f64 * self.q.ln()).exp() / (j as f64 * self.t))
    }

    /// E N = q / ((1-q) · (-ln(1-q))).
    pub fn mean(&self) -> f64 {
        self.q / ((1.0 - self.q) * self.t)
    }
}

const ZETA_2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
const ZETA_3: f64 = 1.202_056_903_159_594_3;

/// Li_n(x) = Σ_{k≥1} x^k / k^n for n ∈ {2, 3} and x ∈ [0, 1].
///
/// Evaluated by direct compensated summation with a geometric tail bound.
/// The term count scales like 1/(1-x), so for x beyond 1 - 1e-6 the value
/// is obtained instead from the Euler reflection (n=2) and Landen (n=3)
/// identities, whose auxiliary arguments are tiny there.
pub fn polylog(order: u32, x: f64) -> Result<f64> {
    if order != 2 && order != 3 {
        return Err(Error::domain(format!(
            "polylog supports orders 2 and 3 only, got {order}"
        )));
    }
    check_unit_interval(x, "polylog argument x")?;
    if x == 1.0 {
        return Ok(if order == 2 { ZETA_2 } else { ZETA_3 });
    }
    if x > 1.0 - 1e-6 {
        return Ok(polylog_near_one(order, x));
    }
    Ok(polylog_series(order, x))
}

/// Direct series with Kahan compensation; valid for |x| < 1 with the term
/// count growing like 1/(1-|x|).
fn polylog_series(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut acc = KahanSum::new();
    let mut power = 1.0f64;
    let geom = 1.0 / (1.0 - x.abs());
    for k in 1..u32::MAX {
        power *= x;
        let kf = f64::from(k);
        let term = power / kf.powi(order as i32);
        acc.add(term);
        // remaining mass < |term| · x / (1-x)
        if term.abs() * geom < 1e-16 * acc.value().abs() + f64::MIN_POSITIVE {
            break;
        }
    }
    acc.value()
}

fn polylog_near_one(order: u32, x: f64) -> f64 {
    let y = 1.0 - x;
    let lx = x.ln();
    if order == 2 {
        // Li2(x) = π²/6 − ln(x) ln(1−x) − Li2(1−x)
        ZETA_2 - lx * y.ln() - polylog_series(2, y)
    } else {
        // Li3(x) = ζ(3) + ln³x/6 + π²/6·ln x − ln²x·ln(1−x)/2
        //          − Li3(1−x) − Li3(1−1/x)
        ZETA_3 + lx.powi(3) / 6.0 + ZETA_2 * lx - 0.5 * lx * lx * y.ln()
            - polylog_series(3, y)
            - polylog_series(3, -y / x)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "time t must be nonnegative, got {t}"
        )));
    }
    Ok(())
}

fn check_unit_interval(v: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{what} must lie in [0,1], got {v}")));
    }
    Ok(())
}
