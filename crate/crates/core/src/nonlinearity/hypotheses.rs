//! Sampled checks of (M), (C), (B) and the sufficient form of (S).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Nonlinearity;
use crate::error::{Error, Result};
use crate::numeric::{log_integrate, log_mid};

const MAX_PAIRS: usize = 100_000;
const TOLERANCE: f64 = 1e-10;
/// Upper end of the direct quadrature for `∫_1^∞ du/f`, in `log u`.
const B_LOG_U_MAX: f64 = 690.0;
/// Decay rate of `log(1/f(u)) + log u` in `log u` required for a tail bound.
const B_MIN_DECAY: f64 = 0.01;

/// Log-spaced sampling specification: `points` abscissae uniform in `log u`
/// on `[log_u_min, log_u_max]`, merged with optional extra abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub log_u_min: f64,
    pub log_u_max: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<f64>,
}

impl SampleGrid {
    /// `[1e-300, 1e3]` with `10⁴` points.
    pub fn standard() -> Self {
        SampleGrid {
            log_u_min: 1e-300f64.ln(),
            log_u_max: 1e3f64.ln(),
            points: 10_000,
            extra: Vec::new(),
        }
    }

    /// The standard grid plus dense samples around every resolvable interval
    /// of the stepwise construction (which lies partly below `1e-300`).
    pub fn for_nonlinearity(f: &Nonlinearity) -> Self {
        let mut grid = SampleGrid::standard();
        if let Nonlinearity::Stepwise(c) = f {
            let kinks = c.kinks_log_u();
            for w in kinks.windows(2) {
                let (a, b) = (w[0], w[1]);
                for k in 0..=64 {
                    grid.extra.push(a + (b - a) * k as f64 / 64.0);
                }
            }
        }
        grid
    }

    /// Doubles the resolution; every old abscissa is kept.
    pub fn refined(&self) -> Self {
        SampleGrid {
            points: 2 * self.points - 1,
            ..self.clone()
        }
    }

    pub fn log_points(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let step = (self.log_u_max - self.log_u_min) / (n - 1) as f64;
        let mut pts: Vec<f64> = (0..n).map(|k| self.log_u_min + step * k as f64).collect();
        pts.extend(self.extra.iter().copied().filter(|v| v.is_finite()));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn validate(&self) -> Result<()> {
        if !(self.log_u_min <= 1e-300f64.ln() && self.log_u_max >= 1e3f64.ln()) {
            return Err(Error::InvalidParameter(format!(
                "sample grid [{}, {}] in log u must cover [log 1e-300, log 1e3]",
                self.log_u_min, self.log_u_max
            )));
        }
        if self.points < 10_000 {
            return Err(Error::InvalidParameter(format!(
                "sample grid needs >= 10000 points, got {}",
                self.points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub holds: bool,
    pub p_used: f64,
    pub c0_used: f64,
}

/// A pair of abscissae (in `log u`) on which a flag failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub flag: String,
    pub log_a: f64,
    pub log_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub monotone_m: bool,
    pub convex_c: bool,
    pub ode_blowup_b: bool,
    pub scaling_s: ScalingCheck,
    pub samples_used: usize,
    pub pairs_tested: usize,
    pub tolerance: f64,
    pub grid: SampleGrid,
    /// `∫_1^∞ du/f` including the tail bound (infinite when (B) fails).
    pub b_integral: f64,
    pub b_certificate: String,
    pub counterexamples: Vec<Counterexample>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.monotone_m && self.convex_c && self.ode_blowup_b && self.scaling_s.holds
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        if !self.monotone_m {
            Some("M")
        } else if !self.convex_c {
            Some("C")
        } else if !self.ode_blowup_b {
            Some("B")
        } else if !self.scaling_s.holds {
            Some("S")
        } else {
            None
        }
    }

    /// Re-runs the checks at twice the resolution, re-testing every stored
    /// counterexample so that false flags stay false.
    pub fn refine(&self, f: &Nonlinearity) -> Result<HypothesisReport> {
        check_hypotheses_with(
            f,
            &self.grid.refined(),
            self.scaling_s.p_used,
            self.scaling_s.c0_used,
            &self.counterexamples,
        )
    }
}

/// Checks the four structural hypotheses on a sampled grid:
/// (M) pairwise monotonicity of consecutive samples, (C) midpoint convexity on
/// pairs `(i, i + 2^k)`, (B) quadrature of `∫_1^∞ du/f` with a tail bound,
/// (S) through `log f - p·log u` non-decreasing on `(0, c0)`.
pub fn check_hypotheses(f: &Nonlinearity, grid: &SampleGrid, p_for_s: f64, c0: f64) -> Result<HypothesisReport> {
    check_hypotheses_with(f, grid, p_for_s, c0, &[])
}

fn nondecreasing(a: f64, b: f64) -> bool {
    b >= a || b >= a - TOLERANCE * (1.0 + a.abs())
}

pub(crate) fn check_hypotheses_with(
    f: &Nonlinearity,
    grid: &SampleGrid,
    p_for_s: f64,
    c0: f64,
    carry: &[Counterexample],
) -> Result<HypothesisReport> {
    grid.validate()?;
    if !(p_for_s > 1.0) {
        return Err(Error::InvalidParameter(format!("p_for_S = {p_for_s} must be > 1")));
    }
    if !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!("c0 = {c0} must be > 0")));
    }
    let pts = grid.log_points();
    let log_f: Vec<f64> = pts.par_iter().map(|&lu| f.eval_log(lu)).collect::<Result<_>>()?;
    let mut counterexamples = Vec::new();

    // (M)
    let m_fail = (0..pts.len() - 1)
        .into_par_iter()
        .find_first(|&k| !nondecreasing(log_f[k], log_f[k + 1]));
    let carried_m = carry.iter().filter(|c| c.flag == "M").find(|c| {
        !nondecreasing(
            f.eval_log(c.log_a).unwrap_or(f64::NAN),
            f.eval_log(c.log_b).unwrap_or(f64::NAN),
        )
    });
    if let Some(k) = m_fail {
        counterexamples.push(Counterexample {
            flag: "M".into(),
            log_a: pts[k],
            log_b: pts[k + 1],
        });
    }
    if let Some(c) = carried_m {
        counterexamples.push(c.clone());
    }
    let monotone_m = m_fail.is_none() && carried_m.is_none();

    // (C)
    let convex_violation = |la: f64, lb: f64| -> bool {
        let (fa, fb) = match (f.eval_log(la), f.eval_log(lb)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return true,
        };
        let lhs = match f.eval_log(log_mid(la, lb)) {
            Ok(v) => v,
            Err(_) => return true,
        };
        let rhs = log_mid(fa, fb);
        // log f carries rounding of order ε|log f|, which dominates far from 1
        let noise = 16.0 * f64::EPSILON * (fa.abs() + fb.abs() + lhs.abs());
        !(lhs <= rhs + TOLERANCE + noise || lhs == f64::NEG_INFINITY)
    };
    let pairs = convexity_pairs(pts.len());
    let pairs_tested = pairs.len();
    let c_fail = pairs.par_iter().find_first(|&&(a, b)| convex_violation(pts[a], pts[b]));
    let carried_c = carry
        .iter()
        .filter(|c| c.flag == "C")
        .find(|c| convex_violation(c.log_a, c.log_b));
    if let Some(&(a, b)) = c_fail {
        counterexamples.push(Counterexample {
            flag: "C".into(),
            log_a: pts[a],
            log_b: pts[b],
        });
    }
    if let Some(c) = carried_c {
        counterexamples.push(c.clone());
    }
    let convex_c = c_fail.is_none() && carried_c.is_none();

    // (S)
    let log_c0 = c0.ln();
    let scaled: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&lu| lu < log_c0)
        .map(|lu| f.log_ratio_to_power(lu, p_for_s).map(|g| (lu, g)))
        .collect::<Result<_>>()?;
    let s_fail = scaled.windows(2).find(|w| !nondecreasing(w[0].1, w[1].1));
    let carried_s = carry.iter().filter(|c| c.flag == "S").find(|c| {
        !nondecreasing(
            f.log_ratio_to_power(c.log_a, p_for_s).unwrap_or(f64::NAN),
            f.log_ratio_to_power(c.log_b, p_for_s).unwrap_or(f64::NAN),
        )
    });
    if let Some(w) = s_fail {
        counterexamples.push(Counterexample {
            flag: "S".into(),
            log_a: w[0].0,
            log_b: w[1].0,
        });
    }
    if let Some(c) = carried_s {
        counterexamples.push(c.clone());
    }
    let scaling_holds = s_fail.is_none() && carried_s.is_none();

    // (B)
    let (ode_blowup_b, b_integral, b_certificate) = check_b(f)?;

    Ok(HypothesisReport {
        monotone_m,
        convex_c,
        ode_blowup_b,
        scaling_s: ScalingCheck {
            holds: scaling_holds,
            p_used: p_for_s,
            c0_used: c0,
        },
        samples_used: pts.len(),
        pairs_tested,
        tolerance: TOLERANCE,
        grid: grid.clone(),
        b_integral,
        b_certificate,
        counterexamples,
    })
}

/// Pairs `(i, i + d)` for `d = 1, 2, 4, ...`, thinned by a uniform stride to at
/// most `MAX_PAIRS`.
fn convexity_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut all = Vec::new();
    let mut d = 1;
    while d < n {
        for i in 0..n - d {
            all.push((i, i + d));
        }
        d *= 2;
    }
    if all.len() <= MAX_PAIRS {
        return all;
    }
    let stride = all.len().div_ceil(MAX_PAIRS);
    all.into_iter().step_by(stride).collect()
}

/// `∫_1^∞ du/f = ∫_0^∞ exp(v - log f(e^v)) dv`, integrated up to
/// `v = 690` with the remainder bounded by `exp(h(V))/|h'(V)|` when
/// `h(v) = v - log f` decays at least at rate `0.01`.
fn check_b(f: &Nonlinearity) -> Result<(bool, f64, String)> {
    let h = |v: f64| v - f.eval_log(v).unwrap_or(f64::NAN);
    if f.eval_log(0.0)? == f64::NEG_INFINITY {
        return Ok((false, f64::INFINITY, "f(1) = 0, so 1/f is not integrable".into()));
    }
    let v_max = B_LOG_U_MAX;
    let slope = h(v_max) - h(v_max - 1.0);
    if slope >= 0.0 {
        return Ok((
            false,
            f64::INFINITY,
            format!("u/f(u) non-decreasing near u = e^{v_max} (log-slope {slope:.3e}): integral diverges"),
        ));
    }
    if slope > -B_MIN_DECAY {
        return Err(Error::QuadratureNoConvergence(format!(
            "tail of the integral of 1/f decays too slowly to bound (log-slope {slope:.3e})"
        )));
    }
    let mut total = crate::numeric::LogIntegral::zero();
    let mut a = 0.0;
    while a < v_max {
        let b = (a + 10.0).min(v_max);
        total = total.combine(log_integrate(h, a, b, 1e-10, 40)?);
        a = b;
    }
    let tail = h(v_max) - (-slope).ln();
    let value = total.value() + tail.exp();
    Ok((
        true,
        value,
        format!(
            "integral over [1, e^{v_max}] = {:.6e}; tail <= {:.3e} (log-slope {slope:.3})",
            total.value(),
            tail.exp()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_satisfies_all() {
        let f = Nonlinearity::power(2.0).unwrap();
        let r = check_hypotheses(&f, &SampleGrid::standard(), 1.5, 1.0).unwrap();
        assert!(r.all_hold(), "{r:?}");
        assert!((r.b_integral - 1.0).abs() < 1e-8);
        assert!(r.pairs_tested <= MAX_PAIRS);
        assert_eq!(r.samples_used, 10_000);
    }

    #[test]
    fn log_corrected_satisfies_all() {
        let f = Nonlinearity::log_corrected(2.0, 1, 1.0, 0.01).unwrap();
        let r = check_hypotheses(&f, &SampleGrid::standard(), 2.0, 0.01).unwrap();
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn concave_table_is_not_convex() {
        let log_u: Vec<f64> = (0..=200).map(|k| -700.0 + 3.5 * k as f64).collect();
        let log_f = log_u
            .iter()
            .map(|&lu: &f64| {
                if lu <= 0.0 {
                    0.5 * lu
                } else {
                    ((1.0 + lu.exp()) / 2.0).ln()
                }
            })
            .collect();
        let f = Nonlinearity::custom(log_u, log_f).unwrap();
        let r = check_hypotheses(&f, &SampleGrid::standard(), 1.5, 1.0).unwrap();
        assert!(!r.convex_c);
        assert!(r.monotone_m);
        assert!(r.counterexamples.iter().any(|c| c.flag == "C"));
        let refined = r.refine(&f).unwrap();
        assert!(!refined.convex_c);
        assert_eq!(refined.samples_used, 19_999);
    }

    #[test]
    fn linear_source_fails_b() {
        let f = Nonlinearity::linear(2.0).unwrap();
        let r = check_hypotheses(&f, &SampleGrid::standard(), 1.5, 1.0).unwrap();
        assert!(!r.ode_blowup_b);
        assert_eq!(r.first_failure(), Some("B"));
        let z = Nonlinearity::zero();
        let r = check_hypotheses(&z, &SampleGrid::standard(), 1.5, 1.0).unwrap();
        assert!(r.monotone_m && r.convex_c && !r.ode_blowup_b);
    }

    #[test]
    fn slow_growth_leaves_b_undetermined() {
        // f = u^{1.005} for large u: 1/f decays too slowly to certify either way
        let f = Nonlinearity::custom(vec![-10.0, 0.0, 10.0], vec![-20.0, 0.0, 10.05]).unwrap();
        assert!(matches!(
            check_hypotheses(&f, &SampleGrid::standard(), 1.5, 1.0),
            Err(Error::QuadratureNoConvergence(_))
        ));
    }

    #[test]
    fn coarse_grid_rejected() {
        let f = Nonlinearity::power(2.0).unwrap();
        let mut g = SampleGrid::standard();
        g.points = 100;
        assert!(check_hypotheses(&f, &g, 1.5, 1.0).is_err());
        let mut g = SampleGrid::standard();
        g.log_u_min = -10.0;
        assert!(check_hypotheses(&f, &g, 1.5, 1.0).is_err());
    }
}
