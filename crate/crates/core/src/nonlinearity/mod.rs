//! Source terms `f` and the numerical checks of the structural hypotheses
//! (monotone, convex, ODE blow-up at infinity, scaling near zero) together with
//! the integral criterion `∫_0+ f(u) / u^(2+α/n) du`.
//!
//! Every nonlinearity evaluates both directly and in log-space; the log-space
//! path is the primary one near zero, where the distinguishing construction
//! lives far below the smallest representable double.

mod criterion;
mod hypotheses;

pub(crate) use criterion::log_partial;
pub use criterion::{
    classify, criterion_integral, criterion_integral_with, CriterionOptions, CriterionOutcome, CriterionResult,
    GrowthLaw, GrowthModel,
};
pub use hypotheses::{check_hypotheses, Counterexample, HypothesisReport, SampleGrid, ScalingCheck};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example4::{ExampleConstruction, ExampleParams};
use crate::numeric::golden_section_min;

/// The critical exponent `p_α = 1 + α/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponent {
    pub alpha: f64,
    pub n: u32,
    pub p_alpha: f64,
}

impl CriticalExponent {
    pub fn new(alpha: f64, n: u32) -> Result<Self> {
        validate_alpha_n(alpha, n)?;
        Ok(CriticalExponent {
            alpha,
            n,
            p_alpha: 1.0 + alpha / n as f64,
        })
    }
}

pub(crate) fn validate_alpha_n(alpha: f64, n: u32) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0, 2]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dimension n must be >= 1".into()));
    }
    Ok(())
}

/// `u^{p_α} (log 1/u)^{-β}` on `(0, c0)`, continued above `c0` by the convex
/// quadratic `f(c0) + f'(c0)(u - c0) + (u - c0)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCorrected {
    pub alpha: f64,
    pub n: u32,
    pub beta: f64,
    pub c0: f64,
    p_alpha: f64,
    f_c0: f64,
    slope_c0: f64,
}

impl LogCorrected {
    pub fn new(alpha: f64, n: u32, beta: f64, c0: f64) -> Result<Self> {
        let crit = CriticalExponent::new(alpha, n)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be > 0")));
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::InvalidParameter(format!("c0 = {c0} not in (0, 1)")));
        }
        let p_alpha = crit.p_alpha;
        let l0 = -c0.ln();
        let f_c0 = c0.powf(p_alpha) * l0.powf(-beta);
        // d log f / d log u = p_α + β / log(1/u)
        let slope_c0 = f_c0 / c0 * (p_alpha + beta / l0);
        Ok(LogCorrected {
            alpha,
            n,
            beta,
            c0,
            p_alpha,
            f_c0,
            slope_c0,
        })
    }

    pub fn p_alpha(&self) -> f64 {
        self.p_alpha
    }

    fn eval(&self, u: f64) -> f64 {
        if u < self.c0 {
            u.powf(self.p_alpha) * (-u.ln()).powf(-self.beta)
        } else {
            quadratic_extension(u, self.c0, self.f_c0, self.slope_c0)
        }
    }

    fn eval_log(&self, log_u: f64) -> f64 {
        if log_u < self.c0.ln() {
            self.p_alpha * log_u - self.beta * (-log_u).ln()
        } else {
            quadratic_extension_log(log_u, self.c0, self.f_c0, self.slope_c0)
        }
    }
}

/// `f0 + s0 (u - x0) + (u - x0)^2` for `u >= x0`.
pub(crate) fn quadratic_extension(u: f64, x0: f64, f0: f64, s0: f64) -> f64 {
    let d = u - x0;
    f0 + d * (s0 + d)
}

pub(crate) fn quadratic_extension_log(log_u: f64, x0: f64, f0: f64, s0: f64) -> f64 {
    if log_u < 300.0 {
        quadratic_extension(log_u.exp(), x0, f0, s0).ln()
    } else {
        // (u - x0)^2 + s0 (u - x0) + f0 = u^2 (1 + (s0 - 2 x0)/u + O(u^-2))
        let inv = (-log_u).exp();
        2.0 * log_u + ((s0 - 2.0 * x0) * inv).ln_1p()
    }
}

/// Tabulated nonlinearity: `log f` is interpolated linearly in `log u` and
/// extrapolated with the end slopes (piecewise power law).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub log_u: Vec<f64>,
    pub log_f: Vec<f64>,
}

impl Tabulated {
    pub fn new(log_u: Vec<f64>, log_f: Vec<f64>) -> Result<Self> {
        if log_u.len() < 2 || log_u.len() != log_f.len() {
            return Err(Error::InvalidParameter(
                "custom nonlinearity needs >= 2 matching samples".into(),
            ));
        }
        if log_u.iter().chain(&log_f).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("custom samples must be finite".into()));
        }
        if log_u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "custom log_u must be strictly increasing".into(),
            ));
        }
        Ok(Tabulated { log_u, log_f })
    }

    /// Builds a table by sampling `f` at the given log-abscissae.
    pub fn from_fn(log_u: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let log_f = log_u.iter().map(|&lu| f(lu.exp()).ln()).collect();
        Tabulated::new(log_u, log_f)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.log_f[k + 1] - self.log_f[k]) / (self.log_u[k + 1] - self.log_u[k])
    }

    fn eval_log(&self, log_u: f64) -> f64 {
        let n = self.log_u.len();
        let k = match self.log_u.partition_point(|&x| x <= log_u) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        self.log_f[k] + self.slope(k) * (log_u - self.log_u[k])
    }

    fn segment_slopes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.log_u.len() - 1).map(|k| self.slope(k))
    }
}

/// An evaluable source term `f` with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NonlinearitySpec", into = "NonlinearitySpec")]
pub enum Nonlinearity {
    /// `u^p`, `p > 1`.
    PowerLaw {
        p: f64,
    },
    /// `c·u`, `c >= 0` (`c = 0` is the zero source). Boundary case of convexity.
    Linear {
        c: f64,
    },
    LogCorrected(LogCorrected),
    /// The piecewise construction of the `example4` module.
    Stepwise(Box<ExampleConstruction>),
    Custom(Tabulated),
}

/// JSON description of a nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NonlinearitySpec {
    Power { p: f64 },
    Linear { c: f64 },
    LogCorrected { alpha: f64, n: u32, beta: f64, c0: f64 },
    Stepwise(ExampleParams),
    Custom { log_u: Vec<f64>, log_f: Vec<f64> },
}

impl TryFrom<NonlinearitySpec> for Nonlinearity {
    type Error = Error;

    fn try_from(spec: NonlinearitySpec) -> Result<Self> {
        match spec {
            NonlinearitySpec::Power { p } => Nonlinearity::power(p),
            NonlinearitySpec::Linear { c } => Nonlinearity::linear(c),
            NonlinearitySpec::LogCorrected { alpha, n, beta, c0 } => {
                Ok(Nonlinearity::LogCorrected(LogCorrected::new(alpha, n, beta, c0)?))
            }
            NonlinearitySpec::Stepwise(params) => {
                Ok(Nonlinearity::Stepwise(Box::new(crate::example4::build(&params)?)))
            }
            NonlinearitySpec::Custom { log_u, log_f } => Ok(Nonlinearity::Custom(Tabulated::new(log_u, log_f)?)),
        }
    }
}

impl From<Nonlinearity> for NonlinearitySpec {
    fn from(f: Nonlinearity) -> Self {
        match f {
            Nonlinearity::PowerLaw { p } => NonlinearitySpec::Power { p },
            Nonlinearity::Linear { c } => NonlinearitySpec::Linear { c },
            Nonlinearity::LogCorrected(lc) => NonlinearitySpec::LogCorrected {
                alpha: lc.alpha,
                n: lc.n,
                beta: lc.beta,
                c0: lc.c0,
            },
            Nonlinearity::Stepwise(c) => NonlinearitySpec::Stepwise(c.params().clone()),
            Nonlinearity::Custom(t) => NonlinearitySpec::Custom {
                log_u: t.log_u,
                log_f: t.log_f,
            },
        }
    }
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power-law exponent p = {p} must be > 1"
            )));
        }
        Ok(Nonlinearity::PowerLaw { p })
    }

    pub fn linear(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "linear coefficient c = {c} must be >= 0"
            )));
        }
        Ok(Nonlinearity::Linear { c })
    }

    pub fn zero() -> Self {
        Nonlinearity::Linear { c: 0.0 }
    }

    pub fn log_corrected(alpha: f64, n: u32, beta: f64, c0: f64) -> Result<Self> {
        Ok(Nonlinearity::LogCorrected(LogCorrected::new(alpha, n, beta, c0)?))
    }

    pub fn stepwise(params: &ExampleParams) -> Result<Self> {
        Ok(Nonlinearity::Stepwise(Box::new(crate::example4::build(params)?)))
    }

    pub fn custom(log_u: Vec<f64>, log_f: Vec<f64>) -> Result<Self> {
        Ok(Nonlinearity::Custom(Tabulated::new(log_u, log_f)?))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::Linear { c } if *c == 0.0)
    }

    /// `f(u)` for `u >= 0`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::NegativeInput(u));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Nonlinearity::PowerLaw { p } => u.powf(*p),
            Nonlinearity::Linear { c } => c * u,
            Nonlinearity::LogCorrected(lc) => lc.eval(u),
            Nonlinearity::Stepwise(c) => c.eval(u)?,
            Nonlinearity::Custom(t) => t.eval_log(u.ln()).exp(),
        })
    }

    /// `log f(u)` as a function of `log u`. Returns `-inf` where `f = 0`.
    pub fn eval_log(&self, log_u: f64) -> Result<f64> {
        if log_u.is_nan() {
            return Err(Error::InvalidParameter("log u is NaN".into()));
        }
        if log_u == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match self {
            Nonlinearity::PowerLaw { p } => p * log_u,
            Nonlinearity::Linear { c } => c.ln() + log_u,
            Nonlinearity::LogCorrected(lc) => lc.eval_log(log_u),
            Nonlinearity::Stepwise(c) => c.eval_log(log_u)?,
            Nonlinearity::Custom(t) => t.eval_log(log_u),
        })
    }

    /// `log f(u) - p·log u` as a function of `log u`, arranged so that the
    /// power-law factor cancels exactly when `p` matches the local exponent
    /// (needed when `|log u|` is astronomically large).
    pub fn log_ratio_to_power(&self, log_u: f64, p: f64) -> Result<f64> {
        if log_u.is_nan() {
            return Err(Error::InvalidParameter("log u is NaN".into()));
        }
        Ok(match self {
            Nonlinearity::PowerLaw { p: q } => (q - p) * log_u,
            Nonlinearity::Linear { c } => c.ln() + (1.0 - p) * log_u,
            Nonlinearity::LogCorrected(lc) if log_u < lc.c0.ln() => (lc.p_alpha - p) * log_u - lc.beta * (-log_u).ln(),
            Nonlinearity::Stepwise(c) => c.log_ratio_to_power(log_u, p)?,
            _ => self.eval_log(log_u)? - p * log_u,
        })
    }

    /// Abscissae (in `log u`) where `f` is not smooth; quadratures split there.
    pub fn kinks_log_u(&self) -> Vec<f64> {
        match self {
            Nonlinearity::PowerLaw { .. } | Nonlinearity::Linear { .. } => Vec::new(),
            Nonlinearity::LogCorrected(lc) => vec![lc.c0.ln()],
            Nonlinearity::Stepwise(c) => c.kinks_log_u(),
            Nonlinearity::Custom(t) => t.log_u.clone(),
        }
    }

    /// `f(u)/u`, evaluated through log-space.
    pub fn ratio(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Err(Error::NegativeInput(u));
        }
        let lu = u.ln();
        Ok((self.eval_log(lu)? - lu).exp())
    }

    /// Whether convexity holds by construction (no sampling needed).
    pub fn known_convex(&self) -> bool {
        !matches!(self, Nonlinearity::Custom(_))
    }

    /// Whether `L(u) = f(u)/u` is non-decreasing on `(0, ∞)`. Holds for every
    /// convex `f` with `f(0) = 0`; for tables it is read off the segment
    /// slopes (all >= 1).
    pub fn ratio_nondecreasing(&self) -> bool {
        match self {
            Nonlinearity::Custom(t) => t.segment_slopes().all(|s| s >= 1.0),
            _ => true,
        }
    }

    /// Default `(p, c0)` for the scaling check through `f/u^p` non-decreasing
    /// on `(0, c0)`.
    pub fn default_scaling(&self) -> (f64, f64) {
        match self {
            Nonlinearity::PowerLaw { p } => (*p, 1.0),
            Nonlinearity::Linear { .. } => (1.0 + 1e-9, 1.0),
            Nonlinearity::LogCorrected(lc) => (lc.p_alpha, lc.c0),
            Nonlinearity::Stepwise(c) => (c.params().p, c.delta()),
            Nonlinearity::Custom(t) => {
                let c0 = t.log_u.last().copied().unwrap_or(0.0).min(0.0).exp();
                let p = t
                    .segment_slopes()
                    .zip(&t.log_u)
                    .filter(|(_, lu)| **lu < c0.ln())
                    .map(|(s, _)| s)
                    .fold(t.slope(0), f64::min);
                (p.max(1.0 + 1e-9), c0)
            }
        }
    }
}

/// `ℓ(u) = sup_{0 < s <= u} f(s)/s`.
///
/// For convex `f` the ratio is non-decreasing, so the supremum sits at `u`.
/// Otherwise a log-spaced grid over 300 decades below `u` is scanned and the
/// best sample refined by golden-section search.
pub fn ell(f: &Nonlinearity, u: f64) -> Result<f64> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::NegativeInput(u));
    }
    if u == 0.0 {
        return Err(Error::InvalidRange("ell requires u > 0".into()));
    }
    if f.ratio_nondecreasing() {
        return f.ratio(u);
    }
    let lu = u.ln();
    let log_ratio = |ls: f64| f.eval_log(ls).map(|lf| lf - ls).unwrap_or(f64::NEG_INFINITY);
    if let Nonlinearity::Custom(t) = f {
        // piecewise linear in log-space: unbounded near zero if the first slope is < 1
        if t.slope(0) < 1.0 {
            return Ok(f64::INFINITY);
        }
    }
    let points = 4000;
    let span = 700.0;
    let mut best = (log_ratio(lu), lu);
    for k in 0..points {
        let ls = lu - span * (k as f64) / (points as f64);
        let r = log_ratio(ls);
        if r > best.0 {
            best = (r, ls);
        }
    }
    let h = span / points as f64;
    let (_, neg) = golden_section_min(|ls| -log_ratio(ls.min(lu)), best.1 - h, (best.1 + h).min(lu), 60);
    Ok((-neg).max(best.0).exp())
}

/// Estimates `liminf_{u→0} f(u)/u^{p_α}` along `log(1/u) = 10^{k/4}`,
/// `k = 4..1200` (and, for the stepwise construction, additionally along the
/// joints `u = v_i`). The estimate is the minimum over the second half of the
/// sequence.
pub fn sugitani_liminf(f: &Nonlinearity, alpha: f64, n: u32) -> Result<f64> {
    let crit = CriticalExponent::new(alpha, n)?;
    let mut tail = Vec::new();
    for k in 4..=1200 {
        let s = 10f64.powf(k as f64 / 4.0);
        let lu = -s;
        let lr = f.log_ratio_to_power(lu, crit.p_alpha)?;
        tail.push(lr);
    }
    let mut est = tail[tail.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min);
    if let Nonlinearity::Stepwise(c) = f {
        for lr in c.ratio_along_joints(crit.p_alpha)? {
            est = est.min(lr);
        }
    }
    Ok(est.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn critical_exponent() {
        let c = CriticalExponent::new(2.0, 1).unwrap();
        assert_eq!(c.p_alpha, 3.0);
        assert_eq!(CriticalExponent::new(1.0, 2).unwrap().p_alpha, 1.5);
        assert!(CriticalExponent::new(2.5, 1).is_err());
        assert!(CriticalExponent::new(1.0, 0).is_err());
    }

    #[test]
    fn eval_examples() {
        let f = Nonlinearity::power(2.0).unwrap();
        assert_eq!(f.eval(3.0).unwrap(), 9.0);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert!(matches!(f.eval(-1.0), Err(Error::NegativeInput(_))));
        assert_eq!(f.eval_log(-100.0).unwrap(), -200.0);
        let g = Nonlinearity::power(3.0).unwrap();
        assert_eq!(g.eval_log(-100.0).unwrap(), -300.0);
    }

    #[test]
    fn log_corrected_value() {
        let f = Nonlinearity::log_corrected(2.0, 1, 1.0, 0.01).unwrap();
        let u = (-10.0f64).exp();
        let expected = (-30.0f64).exp() / 10.0;
        assert_relative_eq!(f.eval(u).unwrap(), expected, max_relative = 1e-13);
        assert_relative_eq!(f.eval_log(-10.0).unwrap(), -30.0 - 10f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn log_corrected_extension_is_c1() {
        let lc = LogCorrected::new(2.0, 1, 1.0, 0.05).unwrap();
        let h = 1e-9;
        let left = (lc.eval(0.05 - h) - lc.eval(0.05 - 2.0 * h)) / h;
        let right = (lc.eval(0.05 + 2.0 * h) - lc.eval(0.05 + h)) / h;
        assert_relative_eq!(left, right, max_relative = 1e-4);
    }

    #[test]
    fn ell_examples() {
        let f = Nonlinearity::power(2.0).unwrap();
        assert_relative_eq!(ell(&f, 0.5).unwrap(), 0.5, max_relative = 1e-15);
        let g = Nonlinearity::power(3.0).unwrap();
        assert_relative_eq!(ell(&g, 2.0).unwrap(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn ell_of_concave_table_is_grid_supremum() {
        // f(u) = u on (0, 1], then sqrt-like growth: f(s)/s maximal on (0, 1]
        let t = Nonlinearity::custom(vec![-10.0, 0.0, 5.0], vec![-10.0, 0.0, 2.5]).unwrap();
        assert!(!t.ratio_nondecreasing());
        let l = ell(&t, 100.0).unwrap();
        assert_relative_eq!(l, 1.0, max_relative = 1e-9);
        assert!(l >= t.ratio(100.0).unwrap());
    }

    #[test]
    fn liminf_power_laws() {
        let crit = Nonlinearity::power(3.0).unwrap();
        assert_relative_eq!(sugitani_liminf(&crit, 2.0, 1).unwrap(), 1.0, max_relative = 1e-12);
        let sup = Nonlinearity::power(3.5).unwrap();
        assert_eq!(sugitani_liminf(&sup, 2.0, 1).unwrap(), 0.0);
        let lc = Nonlinearity::log_corrected(2.0, 1, 1.0, 0.01).unwrap();
        assert!(sugitani_liminf(&lc, 2.0, 1).unwrap() < 1e-200);
    }

    #[test]
    fn json_descriptions() {
        let f: Nonlinearity = serde_json::from_str(r#"{"kind": "power", "p": 2.0}"#).unwrap();
        assert_eq!(f, Nonlinearity::PowerLaw { p: 2.0 });
        let g: Nonlinearity =
            serde_json::from_str(r#"{"kind": "logcorrected", "alpha": 2, "n": 1, "beta": 1.0, "c0": 0.01}"#).unwrap();
        assert!(matches!(g, Nonlinearity::LogCorrected(_)));
        let back = serde_json::to_value(&g).unwrap();
        assert_eq!(back["kind"], "logcorrected");
        let bad: std::result::Result<Nonlinearity, _> = serde_json::from_str(r#"{"kind": "power", "p": 1.0}"#);
        assert!(bad.is_err());
        let c: Nonlinearity = serde_json::from_str(r#"{"kind":"custom", "log_u":[-1,0], "log_f":[-2,0]}"#).unwrap();
        assert!(matches!(c, Nonlinearity::Custom(_)));
    }
}
