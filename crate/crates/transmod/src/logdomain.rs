//! Log-domain scalar helpers.
//!
//! Doubly exponential schedule constants overflow or underflow f64 long
//! before the inequalities built from them become hard; every comparison
//! involving them goes through natural logarithms of positive quantities.

/// log(exp(a) + exp(b)) without leaving the log domain.
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

/// log(2^k) for possibly large k.
pub fn log_pow2(k: f64) -> f64 {
    k * std::f64::consts::LN_2
}

/// ln(ln(1 + 2^-m)) computed stably for large m.
pub fn ln_log1p_pow2_neg(m: f64) -> f64 {
    if m < 500.0 {
        (2.0f64.powf(-m)).ln_1p().ln()
    } else {
        // log1p(x) ~ x - x^2/2; the correction is below resolution here
        -m * std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let (a, b): (f64, f64) = (1.3, -0.7);
        let direct = (a.exp() + b.exp()).ln();
        assert!((log_add_exp(a, b) - direct).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, b), b);
    }

    #[test]
    fn ln_log1p_row() {
        for m in [3.0, 20.0, 100.0, 400.0] {
            let direct = (2.0f64.powf(-m)).ln_1p().ln();
            assert!((ln_log1p_pow2_neg(m) - direct).abs() < 1e-10);
        }
    }
}
