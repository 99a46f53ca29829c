//! Small special-function helpers shared by the pmf and POVM kernels.

use statrs::function::gamma::ln_gamma;

/// ln Γ(n + k) − ln Γ(k) − ln n!, i.e. the log of the negative-binomial
/// coefficient Γ(n+k)/(n! Γ(k)).
///
/// Short products are summed directly; the gamma-function route loses a few
/// digits to cancellation when `k` is large and `n` small.
pub(crate) fn ln_rising_over_factorial(n: usize, k: f64) -> f64 {
    if n <= 64 {
        (0..n)
            .map(|r| ((k + r as f64) / (r as f64 + 1.0)).ln())
            .sum()
    } else {
        ln_gamma(n as f64 + k) - ln_gamma(k) - ln_gamma(n as f64 + 1.0)
    }
}

/// Table of ln m! for m = 0..=max.
#[derive(Clone, Debug)]
pub(crate) struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub(crate) fn new(max: usize) -> Self {
        let mut v = Vec::with_capacity(max + 1);
        let mut acc = 0.0;
        v.push(0.0);
        for m in 1..=max {
            acc += (m as f64).ln();
            v.push(acc);
        }
        LnFactorials(v)
    }

    pub(crate) fn get(&self, m: usize) -> f64 {
        match self.0.get(m) {
            Some(v) => *v,
            None => ln_gamma(m as f64 + 1.0),
        }
    }

    pub(crate) fn ln_binom(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

/// Binomial pmf over m = 0..=n with success probability `p`, evaluated in
/// log space.
pub(crate) fn binomial_pmf(n: usize, p: f64, lnf: &LnFactorials) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    (0..=n)
        .map(|m| (lnf.ln_binom(n, m) + m as f64 * lp + (n - m) as f64 * lq).exp())
        .collect()
}

/// log Σ exp(x_i); returns −∞ for an empty or all −∞ input.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Binomial coefficient as f64 for the small orders used in moment algebra.
pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rising_ratio_matches_gamma_route() {
        for &k in &[1.0, 2.5, 50.0, 110.0] {
            for n in [0usize, 1, 5, 64] {
                let direct = ln_rising_over_factorial(n, k);
                let gamma = ln_gamma(n as f64 + k) - ln_gamma(k) - ln_gamma(n as f64 + 1.0);
                assert!((direct - gamma).abs() < 1e-9 * (1.0 + gamma.abs()));
            }
        }
    }

    #[test]
    fn lse_handles_empty_and_infinite() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let lnf = LnFactorials::new(200);
        let s: f64 = binomial_pmf(200, 0.23, &lnf).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(binom(6, 3), 20.0);
    }
}
