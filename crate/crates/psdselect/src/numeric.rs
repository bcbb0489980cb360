//! Shared numerical helpers: stable log-sum-exp, gamma log-density,
//! float formatting for CSV output.

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// log Σ exp(x_i) by max-subtraction. Empty input yields -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// log Σ exp(x_i) accumulated over a fixed pairwise tree.
///
/// The reduction order depends only on the slice length, so results are
/// bit-reproducible regardless of how callers parallelize the production
/// of `xs`.
pub fn log_sum_exp_pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NEG_INFINITY,
        1 => xs[0],
        2 => log_add_exp(xs[0], xs[1]),
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            log_add_exp(log_sum_exp_pairwise(lo), log_sum_exp_pairwise(hi))
        }
    }
}

/// Normalized gamma log-density with shape/rate parameters.
///
/// shape·log(rate) − lnΓ(shape) + (shape−1)·log(value) − rate·value.
/// Arguments are assumed positive; `evidence::gamma_logpdf` is the
/// validating public entry point.
pub(crate) fn gamma_logpdf_unchecked(value: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * value.ln()
        - rate * value
}

/// Fixed 17-significant-digit scientific formatting.
///
/// Round-trips every finite f64 and keeps CSV output byte-stable across
/// runs and thread counts.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_naive_on_small_values() {
        let xs = [0.3f64, -1.2, 2.5, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        assert!((log_sum_exp_pairwise(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let xs = [1e4, 1e4 - 3.0, 1e4 - 700.0];
        let v = log_sum_exp(&xs);
        assert!(v.is_finite());
        assert!((v - (1e4 + (1.0 + (-3.0f64).exp() + (-700.0f64).exp()).ln())).abs() < 1e-10);
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp_pairwise(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[1.5]), 1.5);
    }

    #[test]
    fn fmt_g17_round_trips() {
        for &x in &[0.0, 1.0, -1.0 / 3.0, 6.02e23, 1e-300, std::f64::consts::PI] {
            let s = fmt_g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn gamma_logpdf_unit_exponential() {
        // shape=1, rate=1 is Exp(1); log-density at 1 is exactly -1.
        assert!((gamma_logpdf_unchecked(1.0, 1.0, 1.0) + 1.0).abs() < 1e-15);
    }
}
