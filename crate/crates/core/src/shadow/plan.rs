//! Sample-size planning for eigenvalue learning followed by recovery.

use serde::Serialize;

use crate::observable::norm_constant;
use crate::pauli::count_low_weight;

use super::ShadowError;

/// Inputs and intermediate quantities of a sample-size bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub lambda_min: f64,
    /// `C(k, d)`.
    pub norm_constant: f64,
    /// Number of Paulis of weight at most `k`.
    pub paulis: u128,
    /// Per-eigenvalue accuracy `λ_min C(k,d) ε / 3`.
    pub eps_tilde: f64,
    /// Accuracy of the underlying `x̂_P`, `ε̃ / 3^k`.
    pub eps_tilde_prime: f64,
    pub samples: u128,
}

/// `N = ⌈2·3^{2k} ln(2T(n,k)/δ) / ε̃′²⌉`.
pub fn plan_sample_size(
    epsilon: f64,
    delta: f64,
    n: usize,
    k: usize,
    d: usize,
    lambda_min: f64,
) -> Result<SamplePlan, ShadowError> {
    let bad = |msg: String| Err(ShadowError::InvalidArgument(msg));
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return bad(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return bad(format!("delta must lie in (0, 1), got {delta}"));
    }
    if lambda_min.is_nan() || lambda_min <= 0.0 {
        return bad(format!("lambda_min must be positive for recovery to be possible, got {lambda_min}"));
    }
    if lambda_min > 1.0 {
        return bad(format!("lambda_min cannot exceed 1, got {lambda_min}"));
    }
    if k == 0 || k > n {
        return bad(format!("locality k must satisfy 1 <= k <= n, got k={k}, n={n}"));
    }
    if d == 0 {
        return bad("degree d must be at least 1".into());
    }
    let c = norm_constant(k, d);
    let paulis = count_low_weight(n, k);
    let eps_tilde = lambda_min * c * epsilon / 3.0;
    let eps_tilde_prime = eps_tilde / 3f64.powi(k as i32);
    let raw = 2.0 * 9f64.powi(k as i32) * (2.0 * paulis as f64 / delta).ln() / (eps_tilde_prime * eps_tilde_prime);
    if !raw.is_finite() || raw >= u128::MAX as f64 {
        return bad(format!("sample size overflows: {raw:e}"));
    }
    Ok(SamplePlan {
        epsilon,
        delta,
        n,
        k,
        d,
        lambda_min,
        norm_constant: c,
        paulis,
        eps_tilde,
        eps_tilde_prime,
        samples: raw.ceil() as u128,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling() {
        let a = plan_sample_size(0.1, 0.1, 2, 2, 4, 0.384).unwrap();
        let b = plan_sample_size(0.2, 0.1, 2, 2, 4, 0.384).unwrap();
        let ratio = a.samples as f64 / b.samples as f64;
        assert!((ratio - 4.0).abs() < 1e-6, "{ratio}");
        let c = plan_sample_size(0.1, 0.2, 2, 2, 4, 0.384).unwrap();
        let d = plan_sample_size(0.1, 0.1, 2, 2, 4, 0.5).unwrap();
        assert!(c.samples < a.samples && d.samples < a.samples);
    }

    #[test]
    fn grows_logarithmically_in_n() {
        let small = plan_sample_size(0.1, 0.1, 10, 2, 4, 0.5).unwrap();
        let big = plan_sample_size(0.1, 0.1, 40, 2, 4, 0.5).unwrap();
        let log_ratio = (2.0 * big.paulis as f64 / 0.1).ln() / (2.0 * small.paulis as f64 / 0.1).ln();
        let ratio = big.samples as f64 / small.samples as f64;
        assert!((ratio - log_ratio).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(plan_sample_size(0.1, 0.1, 2, 2, 4, 0.0).is_err());
        assert!(plan_sample_size(0.0, 0.1, 2, 2, 4, 0.5).is_err());
        assert!(plan_sample_size(0.1, 1.0, 2, 2, 4, 0.5).is_err());
        assert!(plan_sample_size(0.1, 0.1, 2, 3, 4, 0.5).is_err());
        assert!(plan_sample_size(0.1, 0.1, 2, 2, 0, 0.5).is_err());
    }
}
