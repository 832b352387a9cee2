//! Scalar math shims and numerically stable reductions.
//!
//! With the `std` feature the platform `libm` is used through the inherent
//! `f64` methods; otherwise the pure-Rust [`libm`] crate.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
}

pub use imp::{exp, ln, ln_1p, sqrt};

/// Gamma function.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + exp(-x)
    } else if x < -30.0 {
        exp(x)
    } else {
        ln_1p(exp(x))
    }
}

/// Derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln Σ e^{x_i}`. Entries equal to `-inf` contribute nothing; an empty or
/// all `-inf` input yields `-inf`.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = iter.map(|v| exp(v - max)).sum();
    max + ln(sum)
}

/// `ln x`, mapping exact zero to `-inf` rather than relying on platform
/// behaviour for `ln(0)`.
#[inline]
pub fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        ln(x)
    } else {
        f64::NEG_INFINITY
    }
}

/// In-place softmax of `values`.
pub fn softmax_in_place(values: &mut [f64]) {
    let lse = log_sum_exp(values.iter().copied());
    for v in values.iter_mut() {
        *v = exp(*v - lse);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lse_matches_naive_and_survives_large_inputs() {
        let v: [f64; 3] = [0.5, -1.0, 2.0];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(v), naive, epsilon = 1e-12);
        let big = [1000.0, 1000.0];
        assert_relative_eq!(log_sum_exp(big), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, 0.0]), 0.0);
        assert_eq!(log_sum_exp::<[f64; 0]>([]), f64::NEG_INFINITY);
    }

    #[test]
    fn softplus_and_sigmoid() {
        assert_relative_eq!(softplus(0.0), 2f64.ln());
        assert_relative_eq!(softplus(50.0), 50.0);
        assert!(softplus(-50.0) > 0.0);
        assert_relative_eq!(sigmoid(0.0), 0.5);
        let h = 1e-6;
        let fd = (softplus(0.3 + h) - softplus(0.3 - h)) / (2.0 * h);
        assert_relative_eq!(fd, sigmoid(0.3), epsilon = 1e-9);
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(1.5), 0.886_226_925_452_758, epsilon = 1e-12);
        assert_relative_eq!(gamma(2.0), 1.0, epsilon = 1e-12);
    }
}
