//! A convex nonlinearity that satisfies the scaling hypothesis through
//! `f/u^p` non-decreasing, makes the dichotomy integral diverge, yet has
//! `liminf f(u)/u^{p_α} = 0`.
//!
//! With `σ_i = e^{-i²}`, `u_i = e^{-e^{i²}}`, `v_i = θ u_{i+1}`:
//!
//! ```text
//! f(u) = b_i u - a_i       on J_i = [u_{i+1}, v_i)
//! f(u) = σ_i u^{p_α}       on M_i = [v_i, u_i)
//! ```
//!
//! for `i >= i_min`, continued above `δ = u_{i_min}` by a convex quadratic.
//! All quantities are kept in log-space; `log u_i = -e^{i²}` itself is stored
//! through its double logarithm `i²` because it overflows for `i >= 27`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{validate_alpha_n, CriticalExponent};
use crate::numeric::{log1m_exp, log_add_exp};

/// Relative slack for interval membership tests in log-space, a few ulp of
/// the computed endpoints; ties go to the interval lying closer to zero.
/// Anything wider misplaces points just above `u_{i+1}`, where `log f` has
/// log-slope of order `e^{2i+1}`.
const TIE_SLACK: f64 = 4.0 * f64::EPSILON;

fn default_q() -> f64 {
    0.75
}

fn default_i_min() -> u32 {
    1
}

fn default_i_max() -> u32 {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub alpha: f64,
    pub n: u32,
    pub p: f64,
    pub theta: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_i_min")]
    pub i_min: u32,
    #[serde(default = "default_i_max")]
    pub i_max: u32,
    /// `log δ`; always `log u_{i_min}`. Filled in by `build` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_log: Option<f64>,
}

impl ExampleParams {
    pub fn new(alpha: f64, n: u32, p: f64, theta: f64) -> Self {
        ExampleParams {
            alpha,
            n,
            p,
            theta,
            q: default_q(),
            i_min: default_i_min(),
            i_max: default_i_max(),
            delta_log: None,
        }
    }

    pub fn p_alpha(&self) -> f64 {
        1.0 + self.alpha / self.n as f64
    }

    /// The admissible open interval for `θ`: `(p_α/(p_α-1), p/(p-1))`.
    pub fn theta_window(&self) -> (f64, f64) {
        let pa = self.p_alpha();
        (pa / (pa - 1.0), self.p / (self.p - 1.0))
    }

    fn validate_window(&self) -> Result<()> {
        validate_alpha_n(self.alpha, self.n)?;
        let pa = self.p_alpha();
        if !(self.p > 1.0 && self.p < pa) {
            return Err(Error::WindowViolation(format!(
                "p = {} not in (1, p_alpha = {pa})",
                self.p
            )));
        }
        let (lo, hi) = self.theta_window();
        if !(self.theta > lo && self.theta < hi) {
            return Err(Error::WindowViolation(format!(
                "theta = {} not in ({lo}, {hi})",
                self.theta
            )));
        }
        Ok(())
    }

    fn validate_indices(&self) -> Result<()> {
        if self.i_min < 1 || self.i_max <= self.i_min {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= i_min < i_max, got {}..{}",
                self.i_min, self.i_max
            )));
        }
        if !(self.q > 0.5 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!("q = {} not in (1/2, 1)", self.q)));
        }
        Ok(())
    }
}

/// `σ_{i+1}/σ_i = e^{-(2i+1)}`.
fn rho(i: u32) -> f64 {
    (-(2.0 * i as f64 + 1.0)).exp()
}

/// `log u_i = -e^{i²}`; `-inf` once `e^{i²}` overflows.
pub fn log_u(i: u32) -> f64 {
    -((i as f64).powi(2)).exp()
}

/// Whether `θ u_{i+1} < u_i`, evaluated through double logarithms:
/// `e^{i²}(e^{2i+1} - 1) > log θ`.
fn ordering_holds(theta: f64, i: u32) -> bool {
    let i = i as f64;
    i * i + (2.0 * i + 1.0).exp_m1().ln() > theta.ln().ln()
}

/// Per-index log-space data of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogIntervalData {
    pub i: u32,
    pub log_sigma: f64,
    /// `log(-log u_i) = i²`, finite for every index.
    pub loglog_u: f64,
    pub log_u: f64,
    pub log_v: f64,
    pub log_a: f64,
    pub log_b: f64,
}

/// Which branch of the construction covers a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Affine piece on `J_i`.
    Affine(u32),
    /// Scaled critical power on `M_i`.
    Power(u32),
    /// Quadratic continuation above `δ`.
    Extension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleConstruction {
    params: ExampleParams,
    p_alpha: f64,
    log_theta: f64,
    log_theta_pa: f64,
    log_delta: f64,
    data: Vec<LogIntervalData>,
}

/// Builds the construction after checking the parameter window and the
/// ordering `u_{i+1} < v_i < u_i` on `[i_min, i_max]`.
pub fn build(params: &ExampleParams) -> Result<ExampleConstruction> {
    params.validate_window()?;
    params.validate_indices()?;
    for i in params.i_min..=params.i_max {
        if !ordering_holds(params.theta, i) {
            return Err(Error::OrderingViolation { index: i });
        }
    }
    let p_alpha = params.p_alpha();
    let log_theta = params.theta.ln();
    let log_delta = log_u(params.i_min);
    if let Some(d) = params.delta_log {
        if (d - log_delta).abs() > 1e-12 * log_delta.abs() {
            return Err(Error::InvalidParameter(format!(
                "delta_log = {d} must equal log u_(i_min) = {log_delta}"
            )));
        }
    }
    let mut params = params.clone();
    params.delta_log = Some(log_delta);
    let mut c = ExampleConstruction {
        params,
        p_alpha,
        log_theta,
        log_theta_pa: p_alpha * log_theta,
        log_delta,
        data: Vec::new(),
    };
    c.data = (c.params.i_min..=c.params.i_max).map(|i| c.interval_data(i)).collect();
    Ok(c)
}

impl ExampleConstruction {
    pub fn params(&self) -> &ExampleParams {
        &self.params
    }

    pub fn p_alpha(&self) -> f64 {
        self.p_alpha
    }

    /// `δ = u_{i_min}` (zero when it underflows).
    pub fn delta(&self) -> f64 {
        self.log_delta.exp()
    }

    pub fn log_delta(&self) -> f64 {
        self.log_delta
    }

    pub fn intervals(&self) -> &[LogIntervalData] {
        &self.data
    }

    /// `log(θ^{p_α} - ρ_i)`.
    fn log_slope_factor(&self, i: u32) -> f64 {
        self.log_theta_pa + log1m_exp(-(2.0 * i as f64 + 1.0) - self.log_theta_pa)
    }

    /// `log σ_i + log(θ^{p_α} - ρ_i) - log(θ - 1)`.
    fn affine_offset(&self, i: u32) -> f64 {
        -(i as f64).powi(2) + self.log_slope_factor(i) - self.log_theta.exp_m1().ln()
    }

    /// `(θ-1)ρ_i / (θ^{p_α} - ρ_i)`: value of `e^w - R_i` at `w = 0`.
    fn affine_floor(&self, i: u32) -> f64 {
        let r = rho(i);
        self.log_theta.exp_m1() * r / (self.log_theta_pa.exp() - r)
    }

    pub fn interval_data(&self, i: u32) -> LogIntervalData {
        let log_u_next = log_u(i + 1);
        let log_sigma = -(i as f64).powi(2);
        let r = rho(i);
        let theta = self.params.theta;
        let log_den = self.log_theta.exp_m1().ln();
        let log_b = (self.p_alpha - 1.0) * log_u_next + log_sigma + self.log_slope_factor(i) - log_den;
        let log_a = self.p_alpha * log_u_next
            + log_sigma
            + self.log_theta_pa
            + (-(theta.ln() + r.ln() - self.log_theta_pa).exp()).ln_1p()
            - log_den;
        LogIntervalData {
            i,
            log_sigma,
            loglog_u: (i as f64).powi(2),
            log_u: log_u(i),
            log_v: self.log_theta + log_u_next,
            log_a,
            log_b,
        }
    }

    /// Locates the branch covering `log_u`, with ties resolved towards zero.
    pub fn locate(&self, log_u_val: f64) -> Branch {
        if log_u_val >= self.log_delta {
            return Branch::Extension;
        }
        // u_{i+1} <= u < u_i  ⇔  i² < log(-log u) <= (i+1)²
        let ll = (-log_u_val).ln();
        let mut i = (ll.sqrt().floor() as u32).max(self.params.i_min);
        loop {
            let upper = log_u(i);
            if i > self.params.i_min && log_u_val > upper + TIE_SLACK * upper.abs() {
                i -= 1;
                continue;
            }
            let lower = log_u(i + 1);
            if log_u_val <= lower + TIE_SLACK * lower.abs() {
                i += 1;
                continue;
            }
            break;
        }
        let log_v = self.log_theta + log_u(i + 1);
        if log_u_val <= log_v + TIE_SLACK * log_v.abs() {
            Branch::Affine(i)
        } else {
            Branch::Power(i)
        }
    }

    /// `log f(u) - p·log u` on the affine branch of `J_i`.
    ///
    /// Writing `u = u_{i+1} e^w`,
    /// `b_i u - a_i = σ_i u_{i+1}^{p_α} (θ^{p_α} - ρ_i)/(θ-1) · (expm1(w) + (θ-1)ρ_i/(θ^{p_α}-ρ_i))`,
    /// a sum of non-negative terms, so no cancellation occurs. `w` is clamped
    /// to `[0, log θ]` where the double-precision `log u` cannot resolve `J_i`.
    fn affine_log_ratio(&self, i: u32, log_u_val: f64, p: f64) -> Result<f64> {
        let log_u_next = log_u(i + 1);
        let w = (log_u_val - log_u_next).min(self.log_theta);
        if !(w >= 0.0) {
            return Err(Error::LogDomainError { log_u: log_u_val });
        }
        let arg = w.exp_m1() + self.affine_floor(i);
        if !(arg > 0.0) {
            return Err(Error::LogDomainError { log_u: log_u_val });
        }
        // p_α log u_{i+1} - p log u = (p_α - p) log u - p_α w
        Ok((self.p_alpha - p) * log_u_val - self.p_alpha * w + self.affine_offset(i) + arg.ln())
    }

    /// `log f(u) - p·log u` on the quadratic continuation above `δ`:
    /// `f(δ) + f'(δ⁻)(u-δ) + (u-δ)²`.
    fn extension_log(&self, log_u_val: f64) -> f64 {
        let i = self.params.i_min;
        let log_sigma = -(i as f64).powi(2);
        let log_f_delta = log_sigma + self.p_alpha * self.log_delta;
        let log_slope = self.p_alpha.ln() + log_sigma + (self.p_alpha - 1.0) * self.log_delta;
        if log_u_val == self.log_delta {
            return log_f_delta;
        }
        // log(u - δ) = log u + log(1 - δ/u)
        let log_d = log_u_val + log1m_exp(self.log_delta - log_u_val);
        log_add_exp(log_add_exp(log_f_delta, log_slope + log_d), 2.0 * log_d)
    }

    /// `log f(u) - p·log u`, the scaled log-value used by the criteria. For
    /// `p = p_α` the power-law factor cancels exactly.
    pub fn log_ratio_to_power(&self, log_u_val: f64, p: f64) -> Result<f64> {
        match self.locate(log_u_val) {
            Branch::Extension => Ok(self.extension_log(log_u_val) - p * log_u_val),
            Branch::Power(i) => Ok(-(i as f64).powi(2) + (self.p_alpha - p) * log_u_val),
            Branch::Affine(i) => self.affine_log_ratio(i, log_u_val, p),
        }
    }

    pub fn eval_log(&self, log_u_val: f64) -> Result<f64> {
        match self.locate(log_u_val) {
            Branch::Extension => Ok(self.extension_log(log_u_val)),
            Branch::Power(i) => Ok(-(i as f64).powi(2) + self.p_alpha * log_u_val),
            Branch::Affine(i) => Ok(self.affine_log_ratio(i, log_u_val, 0.0)?),
        }
    }

    /// Log-value of a specific branch at `log_u`, regardless of membership.
    pub fn branch_log(&self, branch: Branch, log_u_val: f64) -> Result<f64> {
        match branch {
            Branch::Extension => Ok(self.extension_log(log_u_val)),
            Branch::Power(i) => Ok(-(i as f64).powi(2) + self.p_alpha * log_u_val),
            Branch::Affine(i) => self.affine_log_ratio(i, log_u_val, 0.0),
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::NegativeInput(u));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let delta = self.delta();
        if delta > 0.0 && u >= delta {
            let i = self.params.i_min as f64;
            let sigma = (-i * i).exp();
            let f_delta = sigma * delta.powf(self.p_alpha);
            let slope = self.p_alpha * sigma * delta.powf(self.p_alpha - 1.0);
            return Ok(crate::nonlinearity::quadratic_extension(u, delta, f_delta, slope));
        }
        Ok(self.eval_log(u.ln())?.exp())
    }

    /// Interval endpoints `log u_i`, `log v_i` that are finite in double
    /// precision and resolvable (at least one part in 1e12 of `|log u|`).
    pub fn kinks_log_u(&self) -> Vec<f64> {
        let mut out = vec![self.log_delta];
        for i in self.params.i_min..=self.params.i_max {
            let lu = log_u(i + 1);
            if !lu.is_finite() || self.log_theta < 1e-12 * lu.abs() {
                break;
            }
            out.push(self.log_theta + lu);
            out.push(lu);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// `log(f(v_i)/v_i^{p}) = log σ_i` along the joints `u = v_i`.
    pub fn ratio_along_joints(&self, p: f64) -> Result<Vec<f64>> {
        if (p - self.p_alpha).abs() > 1e-15 {
            return Err(Error::InvalidParameter(
                "joint ratios are defined against p_alpha".into(),
            ));
        }
        Ok(self.data.iter().map(|d| d.log_sigma).collect())
    }

    /// One-sided slopes at the two joints of `J_i`, divided by
    /// `σ_i u_{i+1}^{p_α - 1}` and in log form: the slope of `M_{i+1}` arriving
    /// at `u_{i+1}`, the affine slope `b_i`, and the slope of `M_i` leaving
    /// `v_i`. Convexity at the joints means this triple is non-decreasing.
    pub fn joint_slopes(&self, i: u32) -> (f64, f64, f64) {
        let left = self.p_alpha.ln() - (2.0 * i as f64 + 1.0);
        let mid = self.log_slope_factor(i) - self.log_theta.exp_m1().ln();
        let right = self.p_alpha.ln() + (self.p_alpha - 1.0) * self.log_theta;
        (left, mid, right)
    }

    /// Continuity defects at `v_i` and `u_{i+1}`, both reduced by
    /// `p_α log u_{i+1}` so that they stay meaningful for every index.
    pub fn joint_defects(&self, i: u32) -> (f64, f64) {
        let offset = self.affine_offset(i);
        let floor = self.affine_floor(i);
        let affine_at_v = -self.p_alpha * self.log_theta + offset + (self.log_theta.exp_m1() + floor).ln();
        let power_at_v = -(i as f64).powi(2);
        let affine_at_u = offset + floor.ln();
        let power_at_u = -((i + 1) as f64).powi(2);
        // affine_at_v is (log f - p_α log v_i) + ... ; compare on the same scale
        ((affine_at_v - power_at_v).abs(), (affine_at_u - power_at_u).abs())
    }
}

/// Outcome of the convexity window search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWindow {
    pub holds_from: u32,
    pub lower: f64,
    pub upper: f64,
}

/// Lower and upper ends of the window on `σ_{i+1}/σ_i` that makes the joints
/// convex, in the conservative form `θ^{p_α-1}(θ - p_α(θ-1))` and
/// `θ^{p_α}/(1 + p_α(θ^{p_α}-1))`.
pub fn convexity_bounds(theta: f64, p_alpha: f64) -> (f64, f64) {
    let tp = theta.powf(p_alpha);
    (
        theta.powf(p_alpha - 1.0) * (theta - p_alpha * (theta - 1.0)),
        tp / (1.0 + p_alpha * (tp - 1.0)),
    )
}

/// Smallest `i >= i_min` at which `σ_{i+1}/σ_i = e^{-(2i+1)}` lies inside the
/// convexity window, checked for every stored index from there on.
///
/// Accepts `θ` on the closed window so that boundary inputs can be examined.
pub fn check_convexity_window(params: &ExampleParams) -> Result<ConvexityWindow> {
    validate_alpha_n(params.alpha, params.n)?;
    params.validate_indices()?;
    let (lower, upper) = convexity_bounds(params.theta, params.p_alpha());
    let holds = |i: u32| {
        let r = rho(i);
        lower <= r && r <= upper
    };
    let first = (params.i_min..=params.i_max)
        .find(|&i| holds(i))
        .ok_or(Error::NeverHolds { i_max: params.i_max })?;
    if let Some(bad) = (first..=params.i_max).find(|&i| !holds(i)) {
        return Err(Error::NeverHolds { i_max: bad });
    }
    Ok(ConvexityWindow {
        holds_from: first,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FMonotone {
    pub holds_from: u32,
    pub limit_ratio: f64,
}

/// `r_i = p a_i / ((p-1) b_i v_i)`, in closed form in `ρ_i = e^{-(2i+1)}`.
pub fn f_monotone_ratio(params: &ExampleParams, i: u32) -> f64 {
    let (p, theta) = (params.p, params.theta);
    let tp = theta.powf(params.p_alpha());
    let r = rho(i);
    p * (tp - theta * r) / (theta * (p - 1.0) * (tp - r))
}

/// First index with `r_i >= 1` (so `f/u^p` is non-decreasing on `J_i`) and the
/// limit `p/(θ(p-1))` of `r_i`.
pub fn check_f_monotone(params: &ExampleParams) -> Result<FMonotone> {
    validate_alpha_n(params.alpha, params.n)?;
    params.validate_indices()?;
    let limit_ratio = params.p / (params.theta * (params.p - 1.0));
    if !(limit_ratio > 1.0) {
        return Err(Error::LimitNotAboveOne { limit: limit_ratio });
    }
    let holds_from = (params.i_min..=params.i_max)
        .find(|&i| f_monotone_ratio(params, i) >= 1.0)
        .ok_or(Error::NeverHolds { i_max: params.i_max })?;
    Ok(FMonotone {
        holds_from,
        limit_ratio,
    })
}

/// `Σ_{i=i_min}^{I} σ_i log(u_i/(θ u_{i+1})) = Σ (e^{2i+1} - 1 - e^{-i²} log θ)`,
/// the contribution of the `M_i` pieces to the dichotomy integral.
pub fn step3_divergence(params: &ExampleParams, upto: u32) -> Result<f64> {
    if upto > params.i_max {
        return Err(Error::InvalidRange(format!(
            "I = {upto} exceeds i_max = {}",
            params.i_max
        )));
    }
    let log_theta = params.theta.ln();
    Ok((params.i_min..=upto)
        .map(|i| {
            let i = i as f64;
            (2.0 * i + 1.0).exp_m1() - (-i * i).exp() * log_theta
        })
        .sum())
}

/// Membership of `λ_i = v_i^q` in `M_i` and of `λ_i²` in `M_{i+1}`, as the
/// three inequalities `λ_i < u_i`, `λ_i² < u_{i+1}`, `λ_i² > v_{i+1}`
/// (`λ_i > v_i` is automatic). Evaluated through double logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step4Membership {
    pub lambda_below_u_i: bool,
    pub lambda_sq_below_u_next: bool,
    pub lambda_sq_above_v_next: bool,
}

impl Step4Membership {
    pub fn all(&self) -> bool {
        self.lambda_below_u_i && self.lambda_sq_below_u_next && self.lambda_sq_above_v_next
    }
}

pub fn step4_membership(params: &ExampleParams, i: u32) -> Step4Membership {
    let q = params.q;
    let log_theta = params.theta.ln();
    let fi = i as f64;
    let e_next_ll = (fi + 1.0).powi(2);
    // q(log θ - E_{i+1}) < -E_i  ⇔  E_i (q e^{2i+1} - 1) > q log θ
    let g = q * (2.0 * fi + 1.0).exp() - 1.0;
    let lambda_below_u_i = g > 0.0 && fi * fi + g.ln() > (q * log_theta).ln();
    // 2q(log θ - E_{i+1}) < -E_{i+1}  ⇔  (2q - 1) E_{i+1} > 2q log θ
    let lambda_sq_below_u_next = e_next_ll + (2.0 * q - 1.0).ln() > (2.0 * q * log_theta).ln();
    // 2q(log θ - E_{i+1}) > log θ - E_{i+2}  ⇔  E_{i+1}(e^{2i+3} - 2q) > (1 - 2q) log θ
    let h = (2.0 * fi + 3.0).exp() - 2.0 * q;
    let rhs = (1.0 - 2.0 * q) * log_theta;
    let lambda_sq_above_v_next = if h > 0.0 {
        rhs < 0.0 || e_next_ll + h.ln() > rhs.ln()
    } else {
        false
    };
    Step4Membership {
        lambda_below_u_i,
        lambda_sq_below_u_next,
        lambda_sq_above_v_next,
    }
}

/// `log(f(λ_i²) / (λ_i^{p_α} f(λ_i)))` for `λ_i = v_i^q`. Once `λ_i ∈ M_i` and
/// `λ_i² ∈ M_{i+1}` the power-law factors cancel identically and the value is
/// `log σ_{i+1} - log σ_i = -(2i+1)`.
pub fn step4_diagonal_ratio(params: &ExampleParams, i: u32) -> Result<f64> {
    if i < params.i_min || i >= params.i_max {
        return Err(Error::InvalidRange(format!(
            "i = {i} outside [{}, {})",
            params.i_min, params.i_max
        )));
    }
    let m = step4_membership(params, i);
    if !m.all() {
        return Err(Error::MembershipViolation {
            index: i,
            detail: format!("{m:?}"),
        });
    }
    let log_sigma_i = -(i as f64).powi(2);
    let log_sigma_next = -((i + 1) as f64).powi(2);
    Ok(log_sigma_next - log_sigma_i)
}

/// Smallest `i` from which every Step-4 inclusion holds up to `i_max - 1`.
pub fn step4_threshold(params: &ExampleParams) -> Option<u32> {
    let last = params.i_max.checked_sub(1)?;
    let mut threshold = None;
    for i in (params.i_min..=last).rev() {
        if step4_membership(params, i).all() {
            threshold = Some(i);
        } else {
            break;
        }
    }
    threshold
}

/// One row of the per-index report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub i: u32,
    pub ordering: bool,
    pub window: bool,
    pub r_i: f64,
    pub partial_sum: f64,
    pub log_ratio: Option<f64>,
    pub membership: Step4Membership,
}

pub fn report_rows(c: &ExampleConstruction) -> Vec<ExampleRow> {
    let params = c.params();
    let (lower, upper) = convexity_bounds(params.theta, c.p_alpha());
    (params.i_min..=params.i_max)
        .map(|i| {
            let r = rho(i);
            ExampleRow {
                i,
                ordering: ordering_holds(params.theta, i),
                window: lower <= r && r <= upper,
                r_i: f_monotone_ratio(params, i),
                partial_sum: step3_divergence(params, i).unwrap_or(f64::NAN),
                log_ratio: if i < params.i_max {
                    step4_diagonal_ratio(params, i).ok()
                } else {
                    None
                },
                membership: step4_membership(params, i),
            }
        })
        .collect()
}

/// CSV table: `i,ordering,window,r_i,partial_sum,log_ratio,lambda_in_M_i,lambda_sq_in_M_next`.
pub fn report_csv(c: &ExampleConstruction) -> String {
    let mut out = String::from("i,ordering,window,r_i,partial_sum,log_ratio,lambda_in_M_i,lambda_sq_in_M_next\n");
    for row in report_rows(c) {
        let m = row.membership;
        let _ = writeln!(
            out,
            "{},{},{},{:.15e},{:.15e},{},{},{}",
            row.i,
            row.ordering,
            row.window,
            row.r_i,
            row.partial_sum,
            row.log_ratio.map(|v| v.to_string()).unwrap_or_default(),
            m.lambda_below_u_i,
            m.lambda_sq_below_u_next && m.lambda_sq_above_v_next,
        );
    }
    out
}

/// Convenience: the critical exponent of the construction.
pub fn critical_exponent(params: &ExampleParams) -> Result<CriticalExponent> {
    CriticalExponent::new(params.alpha, params.n)
}
