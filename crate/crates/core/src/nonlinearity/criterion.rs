//! The dichotomy integral `∫_0+ f(u) u^{-(2+α/n)} du` and its divergence test.
//!
//! With `v = log u` the integral is `∫ exp(log f(e^v) - p_α v) dv`. Near zero
//! the substitution `v = -e^t` (`t = log log(1/u)`) is used instead, so that
//! the lower cut can reach `log(1/u) = 10^300`. Partial integrals are tracked
//! as logarithms throughout.

use serde::{Deserialize, Serialize};

use super::{check_hypotheses, CriticalExponent, Nonlinearity, SampleGrid};
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, log_integrate_above, LogIntegral};
use crate::verdict::Verdict;

/// Below `v = -1` the integral is carried out in `t = log(-v)`.
const V_SWITCH: f64 = -1.0;
const LN_10: f64 = std::f64::consts::LN_10;

/// Tunables of the divergence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOptions {
    /// Cuts at `log(1/u) = 10^k` for `k` in `[k_first, k_last]`.
    pub k_first: u32,
    pub k_last: u32,
    /// Required `P_last / P_first` for a divergence verdict.
    pub growth_factor: f64,
    /// Largest admissible relative RMS residual of the growth fit.
    pub residual_tol: f64,
    /// Relative size below which trailing increments count as converged.
    pub converge_tol: f64,
    /// Number of trailing increments examined for convergence.
    pub converge_window: usize,
    pub rel_tol: f64,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            k_first: 4,
            k_last: 300,
            growth_factor: 50.0,
            residual_tol: 0.01,
            converge_tol: 1e-6,
            converge_window: 10,
            rel_tol: 1e-10,
        }
    }
}

/// Growth models fitted to the partial integrals `P_k`, `k = log10 log(1/u_cut)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// `P ≈ a + b k`: growth like `log log(1/u)`.
    LogLog,
    /// `log P ≈ a + b k`: growth like a power of `log(1/u)`; the exponent 1
    /// is the logarithmic divergence of `∫ du/u`.
    PowerOfLog,
    /// `log log P ≈ a + γ log k`: faster than any power of `log log(1/u)`,
    /// slower than any power of `log(1/u)` when `γ < 1`.
    StretchedLog,
    /// `log log P ≈ a + b k`: faster than every power of `log(1/u)`.
    SuperPowerOfLog,
    /// `P` left the double range.
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthLaw {
    pub model: GrowthModel,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual relative to the largest `|y|` of the fitted variable.
    pub residual: f64,
}

impl GrowthLaw {
    pub fn describe(&self) -> String {
        match self.model {
            GrowthModel::LogLog => format!(
                "P ~ {:.4} log log(1/u) (log-log growth, residual {:.2e})",
                self.slope / LN_10,
                self.residual
            ),
            GrowthModel::PowerOfLog => {
                let e = self.slope / LN_10;
                let kind = if (e - 1.0).abs() < 0.01 {
                    "logarithmic divergence in u"
                } else {
                    "power of log(1/u)"
                };
                format!("P ~ (log 1/u)^{e:.4} ({kind}, residual {:.2e})", self.residual)
            }
            GrowthModel::StretchedLog => format!(
                "log P ~ (log10 log 1/u)^{:.4} (stretched growth, residual {:.2e})",
                self.slope, self.residual
            ),
            GrowthModel::SuperPowerOfLog => format!(
                "log P ~ (log 1/u)^{:.4} (super-power growth, residual {:.2e})",
                self.slope / LN_10,
                self.residual
            ),
            GrowthModel::Overflow => "partial integral exceeds 1e300".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CriterionOutcome {
    Converges { value: f64 },
    Diverges { law: GrowthLaw },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    /// `∫_{lower_cut}^{upper}` of the integrand.
    pub partial_value: f64,
    pub log_partial_value: f64,
    pub outcome: CriterionOutcome,
    pub certificate: String,
    /// `(k, log P_k)` along the cut schedule.
    pub schedule: Vec<(u32, f64)>,
    /// False if any piece stopped at the depth limit before meeting tolerance.
    pub quadrature_converged: bool,
}

impl CriterionResult {
    pub fn diverges(&self) -> bool {
        matches!(self.outcome, CriterionOutcome::Diverges { .. })
    }

    pub fn converges(&self) -> bool {
        matches!(self.outcome, CriterionOutcome::Converges { .. })
    }
}

/// `log ∫_{e^{lo}}^{e^{hi}} f(u) u^{-1-p} du`, split at the kinks of `f`.
///
/// Pieces are integrated from `hi` downwards; once a running total exists,
/// segments below `rel_tol · 1e-6` of `prior + total` are not refined.
/// `prior` is the log of an already accumulated value (or `-inf`).
pub(crate) fn log_partial(f: &Nonlinearity, p: f64, lo: f64, hi: f64, rel_tol: f64, prior: f64) -> Result<LogIntegral> {
    let floor_gap = (rel_tol * 1e-6).ln();
    if !(lo < hi) {
        return Ok(LogIntegral::zero());
    }
    let kinks = f.kinks_log_u();
    let mut total = LogIntegral::zero();
    // v-space piece
    if hi > V_SWITCH {
        let a = lo.max(V_SWITCH);
        let mut cuts = vec![a];
        let mut x = a.ceil();
        while x < hi {
            if x > a {
                cuts.push(x);
            }
            x += 1.0;
        }
        cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2).rev() {
            let floor = crate::numeric::log_add_exp(prior, total.log_value) + floor_gap;
            let piece = log_integrate_above(
                |v| f.log_ratio_to_power(v, p).unwrap_or(f64::NAN),
                w[0],
                w[1],
                rel_tol,
                50,
                floor,
            )?;
            total = total.combine(piece);
        }
    }
    // t-space piece: v = -e^t, dv = -e^t dt
    if lo < V_SWITCH {
        let t_lo = (-hi.min(V_SWITCH)).ln();
        let t_hi = (-lo).ln();
        let mut cuts = vec![t_lo];
        let mut x = t_lo.floor() + 0.5;
        while x < t_hi {
            if x > t_lo {
                cuts.push(x);
            }
            x += 0.5;
        }
        cuts.extend(
            kinks
                .iter()
                .filter(|&&k| k < V_SWITCH)
                .map(|k| (-k).ln())
                .filter(|&t| t > t_lo && t < t_hi),
        );
        cuts.push(t_hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let floor = crate::numeric::log_add_exp(prior, total.log_value) + floor_gap;
            let piece = log_integrate_above(
                |t: f64| f.log_ratio_to_power(-t.exp(), p).unwrap_or(f64::NAN) + t,
                w[0],
                w[1],
                rel_tol,
                50,
                floor,
            )?;
            total = total.combine(piece);
        }
    }
    Ok(total)
}

/// Evaluates the integral on `[lower_cut, upper]` and decides divergence at
/// zero from the cut schedule, with default options.
pub fn criterion_integral(f: &Nonlinearity, alpha: f64, n: u32, lower_cut: f64, upper: f64) -> Result<CriterionResult> {
    if !(lower_cut > 0.0 && lower_cut < upper && upper.is_finite()) {
        return Err(Error::InvalidRange(format!(
            "need 0 < lower_cut < upper, got [{lower_cut}, {upper}]"
        )));
    }
    criterion_integral_with(f, alpha, n, lower_cut.ln(), upper.ln(), &CriterionOptions::default())
}

/// As [`criterion_integral`], with the range given in `log u` (so cuts far
/// below the double range can be requested) and explicit options.
pub fn criterion_integral_with(
    f: &Nonlinearity,
    alpha: f64,
    n: u32,
    log_lower: f64,
    log_upper: f64,
    opts: &CriterionOptions,
) -> Result<CriterionResult> {
    if !(log_lower < log_upper && log_lower.is_finite() && log_upper.is_finite()) {
        return Err(Error::InvalidRange(format!(
            "need log_lower < log_upper, got [{log_lower}, {log_upper}]"
        )));
    }
    if opts.k_first >= opts.k_last || opts.k_last > 300 {
        return Err(Error::InvalidParameter(
            "cut schedule must satisfy k_first < k_last <= 300".into(),
        ));
    }
    let crit = CriticalExponent::new(alpha, n)?;
    let p = crit.p_alpha;
    let partial = log_partial(f, p, log_lower, log_upper, opts.rel_tol, f64::NEG_INFINITY)?;
    let mut converged = partial.converged;

    // cut schedule: P_k = ∫ from u = exp(-10^k) to upper
    let mut schedule = Vec::new();
    let mut acc = LogIntegral::zero();
    let mut prev_cut = log_upper;
    let mut overflow = false;
    for k in opts.k_first..=opts.k_last {
        let cut = -(10f64.powi(k as i32));
        if cut >= log_upper {
            continue;
        }
        let piece = log_partial(f, p, cut, prev_cut, opts.rel_tol, acc.log_value)?;
        converged &= piece.converged;
        acc = acc.combine(piece);
        prev_cut = cut;
        schedule.push((k, acc.log_value));
        if acc.log_value > 300.0 * LN_10 {
            overflow = true;
            break;
        }
    }

    let (outcome, certificate) = decide(&schedule, overflow, opts);
    Ok(CriterionResult {
        partial_value: partial.value(),
        log_partial_value: partial.log_value,
        outcome,
        certificate,
        schedule,
        quadrature_converged: converged,
    })
}

fn decide(schedule: &[(u32, f64)], overflow: bool, opts: &CriterionOptions) -> (CriterionOutcome, String) {
    if overflow {
        let (k, lp) = *schedule.last().expect("overflow implies a sample");
        let law = GrowthLaw {
            model: GrowthModel::Overflow,
            slope: f64::INFINITY,
            intercept: lp,
            residual: 0.0,
        };
        return (
            CriterionOutcome::Diverges { law },
            format!("log P = {lp:.1} exceeds log 1e300 at log(1/u) = 1e{k}"),
        );
    }
    if schedule.len() < 3 {
        return (
            CriterionOutcome::Inconclusive,
            "fewer than three cuts below the upper limit".into(),
        );
    }
    let first = schedule[0].1;
    let last = schedule[schedule.len() - 1].1;
    if last == f64::NEG_INFINITY {
        return (
            CriterionOutcome::Converges { value: 0.0 },
            "integrand vanishes identically".into(),
        );
    }
    // convergence: the trailing increments are negligible
    let w = opts.converge_window.min(schedule.len() - 1);
    let tail_start = schedule[schedule.len() - 1 - w].1;
    let rel_tail = 1.0 - (tail_start - last).exp();
    if rel_tail <= opts.converge_tol && last - first < opts.growth_factor.ln() {
        return (
            CriterionOutcome::Converges { value: last.exp() },
            format!(
                "partial integrals settle at {:.12e}: last {w} cuts add {rel_tail:.2e} relative",
                last.exp()
            ),
        );
    }
    if last - first > opts.growth_factor.ln() {
        if let Some(law) = best_growth_law(schedule) {
            if law.residual < opts.residual_tol && law.slope > 0.0 {
                let cert = format!(
                    "P grows by a factor {:.3e} between log(1/u) = 1e{} and 1e{}; {}",
                    (last - first).exp(),
                    schedule[0].0,
                    schedule[schedule.len() - 1].0,
                    law.describe()
                );
                return (CriterionOutcome::Diverges { law }, cert);
            }
        }
    }
    (
        CriterionOutcome::Inconclusive,
        format!(
            "growth factor {:.3e}, trailing relative increment {rel_tail:.2e}: no convergence and no growth fit",
            (last - first).exp()
        ),
    )
}

fn best_growth_law(schedule: &[(u32, f64)]) -> Option<GrowthLaw> {
    let ks: Vec<f64> = schedule.iter().map(|s| s.0 as f64).collect();
    let log_p: Vec<f64> = schedule.iter().map(|s| s.1).collect();
    let top = log_p[log_p.len() - 1];
    let mut candidates = Vec::new();
    let fit = |model: GrowthModel, xs: &[f64], ys: &[f64]| -> Option<GrowthLaw> {
        let lf = linear_fit(xs, ys)?;
        let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        if !(scale > 0.0) {
            return None;
        }
        Some(GrowthLaw {
            model,
            slope: lf.slope,
            intercept: lf.intercept,
            residual: lf.rms / scale,
        })
    };
    // P normalised by its final value keeps the linear fit well scaled
    let p_norm: Vec<f64> = log_p.iter().map(|lp| (lp - top).exp()).collect();
    if let Some(mut law) = fit(GrowthModel::LogLog, &ks, &p_norm) {
        law.slope *= top.exp();
        law.intercept *= top.exp();
        candidates.push(law);
    }
    candidates.extend(fit(GrowthModel::PowerOfLog, &ks, &log_p));
    if log_p.iter().all(|&lp| lp > 0.0) {
        let ll: Vec<f64> = log_p.iter().map(|lp| lp.ln()).collect();
        let log_k: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        candidates.extend(fit(GrowthModel::StretchedLog, &log_k, &ll));
        candidates.extend(fit(GrowthModel::SuperPowerOfLog, &ks, &ll));
    }
    candidates
        .into_iter()
        .filter(|l| l.slope > 0.0)
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
}

/// Criterion-level verdict: `BlowUp(None)` when the dichotomy integral
/// diverges, `Global(None)` when it converges.
///
/// Fails with `HypothesesUnmet` when a sampled hypothesis is false; an
/// undeterminable (B) or an inconclusive integral yields `Undetermined`.
pub fn classify(f: &Nonlinearity, alpha: f64, n: u32) -> Result<Verdict> {
    CriticalExponent::new(alpha, n)?;
    let (p_s, c0) = f.default_scaling();
    let report = match check_hypotheses(f, &SampleGrid::for_nonlinearity(f), p_s, c0) {
        Ok(r) => r,
        Err(Error::QuadratureNoConvergence(msg)) => {
            return Ok(Verdict::undetermined(format!("hypothesis (B) undetermined: {msg}")))
        }
        Err(e) => return Err(e),
    };
    if let Some(flag) = report.first_failure() {
        let detail = report
            .counterexamples
            .iter()
            .find(|c| c.flag == flag)
            .map(|c| format!("fails between log u = {} and {}", c.log_a, c.log_b))
            .unwrap_or_else(|| report.b_certificate.clone());
        return Err(Error::HypothesesUnmet { flag, detail });
    }
    let upper = 0.1f64.min(c0);
    let result = criterion_integral(f, alpha, n, upper * 1e-8, upper)?;
    Ok(match result.outcome {
        CriterionOutcome::Diverges { .. } => Verdict::blow_up(None),
        CriterionOutcome::Converges { .. } => Verdict::global(None),
        CriterionOutcome::Inconclusive => Verdict::undetermined(result.certificate),
    })
}
