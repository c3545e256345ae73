//! Small numeric helpers used throughout the crate.

/// Compensated (Kahan) accumulator. The Monte Carlo reductions sum up to
/// 10^7 terms; plain summation would already cost a few digits there.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// ln(Σ sign_k · e^{x_k}), computed by factoring out the largest exponent.
///
/// The caller guarantees the true sum is positive; every expression fed in
/// here is of the form e^d − e^c + e^b − e^a + … with the positive exponents
/// dominating, so the scaled sum stays in [e^{-1100}, k]. This keeps the
/// interval formulas finite for cut points far beyond ln(f64::MAX).
pub fn ln_signed_exp_sum(terms: &[(f64, f64)]) -> f64 {
    debug_assert!(!terms.is_empty());
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let mut acc = KahanSum::new();
    for &(sign, x) in terms {
        acc.add(sign * (x - m).exp());
    }
    m + acc.value().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_small_increments() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-9)).abs() < 1e-15);
    }

    #[test]
    fn ln_signed_exp_sum_matches_direct_small_args() {
        // ln(e^2 - e^1 + e^0)
        let direct = (2.0f64.exp() - 1.0f64.exp() + 1.0).ln();
        let stable = ln_signed_exp_sum(&[(1.0, 2.0), (-1.0, 1.0), (1.0, 0.0)]);
        assert!((direct - stable).abs() < 1e-14);
    }

    #[test]
    fn ln_signed_exp_sum_survives_huge_exponents() {
        // ln(e^2000 - e^1999 + 1) = 2000 + ln(1 - e^-1 + e^-2000)
        let stable = ln_signed_exp_sum(&[(1.0, 2000.0), (-1.0, 1999.0), (1.0, 0.0)]);
        let expected = 2000.0 + (1.0 - (-1.0f64).exp()).ln();
        assert!((stable - expected).abs() < 1e-12);
    }
}
