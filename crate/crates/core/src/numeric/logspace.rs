//! Small log-space arithmetic helpers.

use std::f64::consts::LN_2;

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(exp(a) - exp(b))` for `a >= b`. Returns `-inf` when equal and `NaN`
/// when `b > a`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b > a {
        return f64::NAN;
    }
    a + log1m_exp(b - a)
}

/// `log(1 - exp(x))` for `x <= 0`, accurate near both ends.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log((exp(a) + exp(b)) / 2)`: log of the arithmetic midpoint.
pub fn log_mid(a: f64, b: f64) -> f64 {
    log_add_exp(a, b) - LN_2
}

/// Time accumulator with a compensation term (TwoSum), so that increments far
/// below one ulp of the running time are not lost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensatedTime {
    hi: f64,
    lo: f64,
}

impl CompensatedTime {
    pub fn new(t: f64) -> Self {
        CompensatedTime { hi: t, lo: 0.0 }
    }

    pub fn add(&mut self, h: f64) {
        let s = self.hi + h;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (h - bp);
        let lo = self.lo + err;
        self.hi = s + lo;
        self.lo = lo - (self.hi - s);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// `self - other`, accurate even when both are large and close.
    pub fn offset_from(&self, other: &CompensatedTime) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_sub() {
        let a = 1000.0f64;
        let b = 999.0f64;
        let s = log_add_exp(a, b);
        assert!((s - (1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
        let d = log_sub_exp(a, b);
        assert!((d - (1000.0 + (1.0 - (-1.0f64).exp()).ln())).abs() < 1e-12);
        assert_eq!(log_sub_exp(3.0, 3.0), f64::NEG_INFINITY);
        assert!(log_sub_exp(2.0, 3.0).is_nan());
    }

    #[test]
    fn log1m_exp_small_argument() {
        let x = -1e-20;
        assert!((log1m_exp(x) - (1e-20f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn compensated_time_keeps_tiny_steps() {
        let mut t = CompensatedTime::new(2.5e8);
        let start = t;
        for _ in 0..1000 {
            t.add(1e-9);
        }
        assert!((t.offset_from(&start) - 1e-6).abs() < 1e-18);
    }
}
