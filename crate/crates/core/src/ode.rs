//! The auxiliary ODE `x' = f(x) - (n/(αt)) x`, `x(t0) = x0`, its companion
//! `y' = y L(y t^{-n/α})` for `y = t^{n/α} x`, and the integral form
//! `x(t) = (t/t0)^{-n/α} x0 + ∫_{t0}^t (t/s)^{-n/α} f(x(s)) ds`.
//!
//! Integration is Dormand-Prince 5(4) with PI step control on a compensated
//! time axis, so that steps far below one ulp of `t` near a blow-up time
//! still advance the clock.
//!
//! A run is declared global only with a certificate: if `L = f/u` is
//! non-decreasing and
//!
//! ```text
//! I = (α/n) (2ȳ)^{α/n} ∫_0^{2x̄} f(u) u^{-2-α/n} du < log 2
//! ```
//!
//! at some `(t̄, x̄)`, `ȳ = t̄^{n/α} x̄`, then `y < 2ȳ` for all later times.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{validate_alpha_n, Nonlinearity};
use crate::numeric::{fit_blowup, linear_fit, log_add_exp, CompensatedTime};
use crate::verdict::{aggregate_property, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct OdeProblem {
    pub f: Nonlinearity,
    pub alpha: f64,
    pub n: u32,
    pub t0: f64,
    pub x0: f64,
}

impl OdeProblem {
    pub fn new(f: Nonlinearity, alpha: f64, n: u32, t0: f64, x0: f64) -> Result<Self> {
        let p = OdeProblem { f, alpha, n, t0, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha_n(self.alpha, self.n)?;
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidParameter(format!("t0 = {} must be positive", self.t0)));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidParameter(format!("x0 = {} must be positive", self.x0)));
        }
        Ok(())
    }

    /// `n/α`.
    pub fn decay(&self) -> f64 {
        self.n as f64 / self.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeBudget {
    pub t_max: f64,
    pub x_blowup: f64,
    /// Step collapse threshold relative to the elapsed time `t - t0`.
    pub min_step: f64,
    /// Horizon extension for undecided runs, reached in factors of ten.
    pub t_max_stretch: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for OdeBudget {
    fn default() -> Self {
        OdeBudget {
            t_max: 1e4,
            x_blowup: 1e8,
            min_step: 1e-6,
            t_max_stretch: 1e12,
            rtol: 1e-10,
            max_steps: 5_000_000,
        }
    }
}

impl OdeBudget {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_max > 0.0
            && self.x_blowup > 0.0
            && self.min_step > 0.0
            && self.rtol > 0.0
            && self.t_max_stretch > 0.0
            && self.max_steps > 0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "budget fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn horizon(&self) -> f64 {
        self.t_max.max(self.t_max_stretch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    /// Values are `x(t)`.
    X,
    /// Values are `y(t) = t^{n/α} x(t)`.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalCertificate {
    pub t: f64,
    pub x: f64,
    /// The bootstrap integral `I`; global existence follows from `I < log 2`.
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrace {
    pub coordinates: Coordinates,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Size of the step that produced each sample (zero for the first).
    pub steps: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub verdict: Verdict,
    pub certificate: Option<GlobalCertificate>,
    /// `n/α`, used to move between `x` and `y`.
    pub decay: f64,
}

impl OdeTrace {
    pub fn x_at(&self, k: usize) -> f64 {
        match self.coordinates {
            Coordinates::X => self.values[k],
            Coordinates::Y => self.values[k] * self.times[k].powf(-self.decay),
        }
    }

    pub fn x_values(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.x_at(k)).collect()
    }

    pub fn y_values(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| self.x_at(k) * self.times[k].powf(self.decay))
            .collect()
    }

    /// CSV with columns `t,x,step,order`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,step,order\n");
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.6e},5",
                self.times[k],
                self.x_at(k),
                self.steps[k]
            )
            .expect("write to string");
        }
        out
    }
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rhs(prob: &OdeProblem, coords: Coordinates, t: f64, z: f64) -> f64 {
    if !(z > 0.0) {
        return f64::NAN;
    }
    let e = prob.decay();
    match coords {
        Coordinates::X => prob.f.eval(z).unwrap_or(f64::NAN) - e / t * z,
        Coordinates::Y => {
            let s = t.powf(e);
            s * prob.f.eval(z / s).unwrap_or(f64::NAN)
        }
    }
}

/// An upper estimate of `log ∫_0^x f(u) u^{-1-p} du`, or `None` when the
/// integral is not seen to converge at zero.
///
/// Below `log x - 10⁴` the range is taken one decade of `|log u|` at a time.
/// The sum stops once a decade adds less than `1e-10` of the total while
/// shrinking geometrically with ratio `r < 0.9`; the remaining decades are
/// bounded by the geometric tail `r/(1 - r)` times the last one.
pub(crate) fn log_integral_from_zero(f: &Nonlinearity, p: f64, x: f64) -> Result<Option<f64>> {
    let top = x.ln();
    let near = crate::nonlinearity::log_partial(f, p, top - 1e4, top, 1e-10, f64::NEG_INFINITY)?;
    if !near.converged {
        return Ok(None);
    }
    // integrand in t = log(-v): exp(log f - p v + t)
    let remote = |v: f64| f.log_ratio_to_power(v, p).map(|h| h + (-v).ln());
    let mut total = near.log_value;
    let mut prev = f64::INFINITY;
    for k in 4..300 {
        let (a, b) = (top - 10f64.powi(k + 1), top - 10f64.powi(k));
        if remote(a)? > total + 1.0 {
            return Ok(None);
        }
        let piece = crate::nonlinearity::log_partial(f, p, a, b, 1e-10, total)?;
        if !piece.converged {
            return Ok(None);
        }
        total = log_add_exp(total, piece.log_value);
        let log_r = piece.log_value - prev;
        if piece.log_value < total + (1e-10f64).ln() && log_r < (0.9f64).ln() {
            let r = log_r.exp();
            return Ok(Some(log_add_exp(total, piece.log_value + (r / (1.0 - r)).ln())));
        }
        prev = piece.log_value;
    }
    Ok(None)
}

/// The bootstrap integral `I` at `(t, x)`, or `None` when `L = f/u` is not
/// known to be non-decreasing or the integral does not converge at zero.
pub fn global_certificate(f: &Nonlinearity, alpha: f64, n: u32, t: f64, x: f64) -> Result<Option<f64>> {
    validate_alpha_n(alpha, n)?;
    if !(t > 0.0 && x > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "certificate needs t, x > 0, got {t}, {x}"
        )));
    }
    if !f.ratio_nondecreasing() {
        return Ok(None);
    }
    let an = alpha / n as f64;
    let Some(log_int) = log_integral_from_zero(f, 1.0 + an, 2.0 * x)? else {
        return Ok(None);
    };
    let y = t.powf(1.0 / an) * x;
    Ok(Some((an.ln() + an * (2.0 * y).ln() + log_int).exp()))
}

/// Solution of the autonomous equation `u' = f(u)` after time `tau`, by
/// adaptive Dormand-Prince steps; `None` if it leaves the finite range.
pub(crate) fn autonomous_flow(f: &Nonlinearity, u0: f64, tau: f64, rtol: f64) -> Option<f64> {
    if u0 == 0.0 || tau == 0.0 {
        return Some(u0);
    }
    let g = |u: f64| {
        if u >= 0.0 {
            f.eval(u).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        }
    };
    let (mut t, mut u, mut k1) = (0.0, u0, g(u0));
    let mut h = if k1 > 0.0 { (0.01 * u0 / k1).min(tau) } else { tau };
    let mut tries = 0;
    while t < tau {
        tries += 1;
        if tries > 100_000 {
            return None;
        }
        h = h.min(tau - t);
        let mut k = [0.0; 7];
        k[0] = k1;
        for s in 1..7 {
            k[s] = g(u + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>());
        }
        let u_new = u + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let err = (h * (0..7).map(|j| E[j] * k[j]).sum::<f64>() / (rtol * u_new.abs().max(u))).abs();
        if !(err.is_finite() && u_new.is_finite()) {
            h *= 0.25;
            if h < tau * 1e-14 {
                return None;
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            u = u_new;
            k1 = k[6];
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    Some(u)
}

struct Run<'a> {
    prob: &'a OdeProblem,
    budget: &'a OdeBudget,
    coords: Coordinates,
    start: CompensatedTime,
    t: CompensatedTime,
    z: f64,
    k1: f64,
    h: f64,
    err_prev: f64,
    times: Vec<CompensatedTime>,
    values: Vec<f64>,
    steps: Vec<f64>,
    accepted: usize,
    rejected: usize,
}

enum StepOutcome {
    Accepted,
    Rejected,
}

impl<'a> Run<'a> {
    fn new(prob: &'a OdeProblem, budget: &'a OdeBudget, coords: Coordinates) -> Result<Self> {
        let z0 = match coords {
            Coordinates::X => prob.x0,
            Coordinates::Y => prob.x0 * prob.t0.powf(prob.decay()),
        };
        let k1 = rhs(prob, coords, prob.t0, z0);
        if !k1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "right-hand side not finite at x0 = {}",
                prob.x0
            )));
        }
        // initial step from the local time scales
        let scale = (z0 / k1.abs().max(f64::MIN_POSITIVE)).min(prob.t0);
        let start = CompensatedTime::new(prob.t0);
        Ok(Run {
            prob,
            budget,
            coords,
            start,
            t: start,
            z: z0,
            k1,
            h: 1e-3 * scale,
            err_prev: 1e-4,
            times: vec![start],
            values: vec![z0],
            steps: vec![0.0],
            accepted: 0,
            rejected: 0,
        })
    }

    fn x(&self) -> f64 {
        match self.coords {
            Coordinates::X => self.z,
            Coordinates::Y => self.z * self.t.value().powf(-self.prob.decay()),
        }
    }

    fn elapsed(&self) -> f64 {
        self.t.offset_from(&self.start)
    }

    fn step(&mut self, t_end: f64) -> StepOutcome {
        let t = self.t.value();
        let h = self.h.min(t_end - t).max(0.0);
        let mut k = [0.0; 7];
        k[0] = self.k1;
        for s in 1..7 {
            let zs = self.z + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = rhs(self.prob, self.coords, t + C[s] * h, zs);
        }
        let z_new = self.z + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let err_abs = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let scale = self.budget.rtol * self.z.abs().max(z_new.abs());
        let err = (err_abs / scale).abs();
        if !(err.is_finite() && z_new > 0.0 && k[6].is_finite()) {
            self.h = h * 0.25;
            self.rejected += 1;
            return StepOutcome::Rejected;
        }
        if err <= 1.0 {
            self.t.add(h);
            self.z = z_new;
            self.k1 = k[6];
            let factor = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0);
            self.h = h * factor.clamp(0.2, 5.0);
            self.err_prev = err.max(1e-4);
            self.times.push(self.t);
            self.values.push(self.z);
            self.steps.push(h);
            self.accepted += 1;
            StepOutcome::Accepted
        } else {
            let factor = 0.9 * err.powf(-0.2);
            self.h = h * factor.clamp(0.1, 0.9);
            self.rejected += 1;
            StepOutcome::Rejected
        }
    }

    fn finish(self, verdict: Verdict, certificate: Option<GlobalCertificate>) -> OdeTrace {
        OdeTrace {
            coordinates: self.coords,
            times: self.times.iter().map(|t| t.value()).collect(),
            values: self.values,
            steps: self.steps,
            steps_accepted: self.accepted,
            steps_rejected: self.rejected,
            verdict,
            certificate,
            decay: self.prob.decay(),
        }
    }

    /// `(offset from the window start, log x)` over the final decade of growth.
    fn growth_window(&self) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..self.values.len())
            .map(|k| match self.coords {
                Coordinates::X => self.values[k],
                Coordinates::Y => self.values[k] * self.times[k].value().powf(-self.prob.decay()),
            })
            .collect();
        let last = *xs.last().expect("non-empty trace");
        let first = xs.iter().rposition(|&x| x < last / 10.0).map_or(0, |k| k + 1);
        let origin = self.times[first];
        let offsets = self.times[first..].iter().map(|t| t.offset_from(&origin)).collect();
        let log_x = xs[first..].iter().map(|x| x.ln()).collect();
        (offsets, log_x)
    }

    /// Decay exponent `-d log x / d log t` over the last decade if it is
    /// stable to ±0.05 between the two halves of that decade.
    fn decay_exponent(&self) -> Option<f64> {
        let t_end = self.t.value();
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(t, z)| {
                let tv = t.value();
                let x = match self.coords {
                    Coordinates::X => *z,
                    Coordinates::Y => z * tv.powf(-self.prob.decay()),
                };
                (tv.ln(), x.ln())
            })
            .filter(|(lt, _)| *lt >= (t_end / 10.0).ln())
            .collect();
        if pts.len() < 6 || self.times[0].value() > t_end / 10.0 {
            return None;
        }
        let mid = (t_end / 10f64.sqrt()).ln();
        let slope = |sel: &dyn Fn(f64) -> bool| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().filter(|p| sel(p.0)).copied().unzip();
            linear_fit(&xs, &ys).map(|f| f.slope)
        };
        let whole = slope(&|_| true)?;
        let a = slope(&|lt| lt <= mid)?;
        let b = slope(&|lt| lt >= mid)?;
        ((a - b).abs() <= 0.05).then_some(-whole)
    }
}

fn run(prob: &OdeProblem, budget: &OdeBudget, coords: Coordinates) -> Result<OdeTrace> {
    prob.validate()?;
    budget.validate()?;
    let mut r = Run::new(prob, budget, coords)?;
    let horizon = budget.horizon();
    let mut checkpoint = prob.t0;
    let mut certificate: Option<GlobalCertificate> = None;
    let mut stage_end = budget.t_max.min(horizon);
    let mut consecutive_rejects = 0;
    loop {
        if r.accepted + r.rejected >= budget.max_steps {
            return Ok(r.finish(
                Verdict::undetermined(format!("step budget {} exhausted", budget.max_steps)),
                certificate,
            ));
        }
        match r.step(stage_end) {
            StepOutcome::Accepted => consecutive_rejects = 0,
            StepOutcome::Rejected => {
                consecutive_rejects += 1;
                let x = r.x();
                if r.h < r.elapsed().max(r.t.value() * 1e-300) * 1e-300 || consecutive_rejects > 200 {
                    if x >= budget.x_blowup {
                        return finish_blowup(r, "step size collapsed and f overflowed");
                    }
                    return Err(Error::StepUnderflow { t: r.t.value(), h: r.h });
                }
                continue;
            }
        }
        let x = r.x();
        let t = r.t.value();
        if x >= budget.x_blowup {
            if r.h < budget.min_step * r.elapsed() {
                return finish_blowup(r, "step size collapsed");
            }
            if x > 1e300 {
                return Ok(r.finish(
                    Verdict::undetermined("x exceeded 1e300 without step collapse"),
                    certificate,
                ));
            }
        }
        // logarithmic checkpoints for the global certificate
        if certificate.is_none() && t >= checkpoint && x < budget.x_blowup {
            checkpoint = 2.0 * t;
            if let Some(i) = global_certificate(&prob.f, prob.alpha, prob.n, t, x)? {
                if i < std::f64::consts::LN_2 * (1.0 - 1e-6) {
                    certificate = Some(GlobalCertificate { t, x, integral: i });
                }
            }
        }
        if let Some(c) = certificate {
            if t >= 10.0 * c.t {
                if let Some(e) = r.decay_exponent() {
                    return Ok(r.finish(Verdict::global(Some(e)), certificate));
                }
            }
        }
        if t >= stage_end {
            if stage_end >= horizon {
                let verdict = match certificate {
                    Some(_) => Verdict::global(r.decay_exponent()),
                    None => Verdict::undetermined(format!(
                        "horizon t = {horizon:.3e} reached at x = {x:.3e} without blow-up or global certificate"
                    )),
                };
                return Ok(r.finish(verdict, certificate));
            }
            stage_end = (10.0 * stage_end).min(horizon);
        }
    }
}

fn finish_blowup(r: Run<'_>, how: &str) -> Result<OdeTrace> {
    let (offsets, log_x) = r.growth_window();
    let origin = r.times[r.times.len() - offsets.len()];
    match fit_blowup(&offsets, &log_x) {
        Some(fit) if fit.gamma > 0.0 && fit.rms < 1e-2 => {
            let mut t_star = origin;
            t_star.add(fit.t_star_offset);
            log::debug!("{how}: t* = {}, gamma = {}", t_star.value(), fit.gamma);
            Ok(r.finish(Verdict::blow_up(Some(t_star.value())), None))
        }
        other => Ok(r.finish(
            Verdict::undetermined(format!(
                "{how}, but no power-law singularity fits the final decade: {other:?}"
            )),
            None,
        )),
    }
}

/// Integrates `x' = f(x) - (n/(αt)) x`.
pub fn integrate(prob: &OdeProblem, budget: &OdeBudget) -> Result<OdeTrace> {
    run(prob, budget, Coordinates::X)
}

/// Integrates `y' = t^{n/α} f(t^{-n/α} y)`, `y(t0) = t0^{n/α} x0`.
pub fn integrate_y(prob: &OdeProblem, budget: &OdeBudget) -> Result<OdeTrace> {
    run(prob, budget, Coordinates::Y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolterraResidual {
    pub max_residual: f64,
    /// Samples from this time on were excluded (blow-up runs).
    pub excluded_from: Option<f64>,
    pub samples: usize,
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Largest relative deviation between `x(t)` and the right side of the
/// integral form, evaluated along the trace with cubic Hermite interpolation
/// of `x` and five-point Gauss quadrature per step.
///
/// In blow-up runs, samples after `x` first exceeds `10³ max(x0, 1)` are
/// excluded and reported.
pub fn volterra_residual(trace: &OdeTrace, prob: &OdeProblem) -> Result<VolterraResidual> {
    prob.validate()?;
    let e = prob.decay();
    let xs = trace.x_values();
    let ts = &trace.times;
    if ts.is_empty() || (ts[0] - prob.t0).abs() > 1e-12 * prob.t0 {
        return Err(Error::InvalidParameter("trace does not start at t0".into()));
    }
    let cutoff = if trace.verdict.is_blow_up() {
        let limit = 1e3 * prob.x0.max(1.0);
        xs.iter().position(|&x| x > limit)
    } else {
        None
    };
    let end = cutoff.unwrap_or(xs.len());
    let dx: Vec<f64> = (0..end).map(|k| rhs(prob, Coordinates::X, ts[k], xs[k])).collect();
    let mut acc = 0.0; // ∫_{t0}^{t_k} s^{n/α} f(x(s)) ds
    let mut worst = 0.0f64;
    for k in 1..end {
        let (a, b) = (ts[k - 1], ts[k]);
        let h = b - a;
        let mut piece = 0.0;
        for (node, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let u = 0.5 * (node + 1.0);
            let (h00, h10, h01, h11) = (
                (1.0 + 2.0 * u) * (1.0 - u).powi(2),
                u * (1.0 - u).powi(2),
                u * u * (3.0 - 2.0 * u),
                u * u * (u - 1.0),
            );
            let x = h00 * xs[k - 1] + h10 * h * dx[k - 1] + h01 * xs[k] + h11 * h * dx[k];
            let s = a + u * h;
            piece += w * s.powf(e) * prob.f.eval(x)?;
        }
        acc += 0.5 * h * piece;
        let t = b;
        let rhs_value = (t / prob.t0).powf(-e) * prob.x0 + t.powf(-e) * acc;
        worst = worst.max(((rhs_value - xs[k]) / xs[k]).abs());
    }
    Ok(VolterraResidual {
        max_residual: worst,
        excluded_from: cutoff.map(|k| ts[k]),
        samples: end,
    })
}

/// Sampled initial data for [`ode_blowup_property`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSample {
    pub x0: Vec<f64>,
    pub t0: Vec<f64>,
}

impl OdeSample {
    /// `x0 ∈ {0.1, ..., 1000}`, `t0 ∈ {0.1, 1, 10}`.
    pub fn standard() -> Self {
        OdeSample {
            x0: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            t0: vec![0.1, 1.0, 10.0],
        }
    }

    fn decades(v: &[f64]) -> f64 {
        let max = v.iter().copied().fold(f64::MIN, f64::max);
        let min = v.iter().copied().fold(f64::MAX, f64::min);
        (max / min).log10()
    }

    /// At least four decades of `x0` and two of `t0`.
    pub fn validate(&self) -> Result<()> {
        if Self::decades(&self.x0) < 4.0 - 1e-9 || Self::decades(&self.t0) < 2.0 - 1e-9 {
            return Err(Error::InvalidParameter(
                "sample must span >= 4 decades of x0 and >= 2 decades of t0".into(),
            ));
        }
        Ok(())
    }
}

/// One cell of a sampled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRun {
    pub x0: f64,
    pub t0: f64,
    pub verdict: Verdict,
}

/// Combines sampled verdicts: any global run is a witness against the
/// blow-up property; otherwise all runs must blow up.
pub fn aggregate_runs(runs: &[SampledRun]) -> Verdict {
    if let Some(g) = runs.iter().find(|r| r.verdict.is_global()) {
        log::info!("global witness x0 = {}, t0 = {}", g.x0, g.t0);
    }
    aggregate_property(runs.iter().map(|r| &r.verdict))
}

/// Runs every `(x0, t0)` pair of the sample in parallel.
pub fn ode_sweep(
    f: &Nonlinearity,
    alpha: f64,
    n: u32,
    sample: &OdeSample,
    budget: &OdeBudget,
) -> Result<Vec<SampledRun>> {
    validate_alpha_n(alpha, n)?;
    if sample.x0.is_empty() || sample.t0.is_empty() {
        return Err(Error::InvalidParameter("empty ODE sample".into()));
    }
    let cells: Vec<(f64, f64)> = sample
        .t0
        .iter()
        .flat_map(|&t0| sample.x0.iter().map(move |&x0| (x0, t0)))
        .collect();
    cells
        .par_iter()
        .map(|&(x0, t0)| {
            let prob = OdeProblem::new(f.clone(), alpha, n, t0, x0)?;
            let verdict = match integrate(&prob, budget) {
                Ok(trace) => trace.verdict,
                Err(Error::StepUnderflow { t, h }) => {
                    Verdict::undetermined(format!("step underflow at t = {t} (h = {h})"))
                }
                Err(e) => return Err(e),
            };
            Ok(SampledRun { x0, t0, verdict })
        })
        .collect()
}

/// The sampled ODE blow-up property. The sample must span at least four
/// decades of `x0` and two of `t0`.
pub fn ode_blowup_property(
    f: &Nonlinearity,
    alpha: f64,
    n: u32,
    sample: &OdeSample,
    budget: &OdeBudget,
) -> Result<Verdict> {
    sample.validate()?;
    Ok(aggregate_runs(&ode_sweep(f, alpha, n, sample, budget)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// For `f = u^p`: `y^{1-p} = y0^{1-p} - (p-1) ∫_{t0}^t s^{-(p-1)n/α} ds`.
    fn power_y(p: f64, e: f64, t0: f64, x0: f64, t: f64) -> f64 {
        let y0 = t0.powf(e) * x0;
        let k = (p - 1.0) * e;
        let int = if (k - 1.0).abs() < 1e-15 {
            (t / t0).ln()
        } else {
            (t.powf(1.0 - k) - t0.powf(1.0 - k)) / (1.0 - k)
        };
        (y0.powf(1.0 - p) - (p - 1.0) * int).powf(1.0 / (1.0 - p))
    }

    fn problem(p: f64, alpha: f64, n: u32, t0: f64, x0: f64) -> OdeProblem {
        OdeProblem::new(Nonlinearity::power(p).unwrap(), alpha, n, t0, x0).unwrap()
    }

    #[test]
    fn square_blows_up_at_analytic_time() {
        let prob = problem(2.0, 2.0, 1, 1.0, 1.0);
        let tr = integrate(&prob, &OdeBudget::default()).unwrap();
        // y = √t x, 1/y = 1 - 2(√t - 1), so t* = 2.25
        assert_relative_eq!(tr.verdict.t_star().unwrap(), 2.25, max_relative = 1e-6);
        for k in (0..tr.times.len()).step_by(7) {
            let t = tr.times[k];
            if t < 2.2 {
                let exact = power_y(2.0, 0.5, 1.0, 1.0, t) / t.sqrt();
                assert_relative_eq!(tr.values[k], exact, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn quartic_small_data_is_global() {
        let prob = problem(4.0, 2.0, 1, 1.0, 0.1);
        let tr = integrate(&prob, &OdeBudget::default()).unwrap();
        assert!(tr.certificate.is_some());
        let e = tr.verdict.decay_exponent().expect("stable decay exponent");
        assert!((e - 0.5).abs() < 0.05, "{e}");
        assert!(tr.values.iter().all(|&x| x > 0.0));
        // x' <= 0 from the start and stays so
        assert!(tr.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quartic_large_data_blows_up() {
        let prob = problem(4.0, 2.0, 1, 1.0, 10.0);
        let tr = integrate(&prob, &OdeBudget::default()).unwrap();
        // 1/y³ = 1/1000 - 3·2(1 - t^{-1/2})
        let t_star = (1.0 - 1.0 / 6000.0f64).powi(-2);
        assert_relative_eq!(tr.verdict.t_star().unwrap(), t_star, max_relative = 1e-6);
    }

    #[test]
    fn y_coordinates_agree() {
        for (p, x0) in [(2.0, 1.0), (4.0, 0.1)] {
            let prob = problem(p, 2.0, 1, 1.0, x0);
            let bx = integrate(&prob, &OdeBudget::default()).unwrap();
            let by = integrate_y(&prob, &OdeBudget::default()).unwrap();
            assert_eq!(by.values[0], prob.x0 * prob.t0.powf(0.5));
            assert_eq!(bx.verdict.kind(), by.verdict.kind());
            let ys = by.y_values();
            assert!(ys.windows(2).all(|w| w[1] >= w[0]));
            // compare at the y-trace times through the analytic x
            for (k, &t) in by.times.iter().enumerate() {
                let x = by.x_at(k);
                if x < 1e6 && (p != 2.0 || t < 2.2) {
                    let exact = power_y(p, 0.5, 1.0, x0, t) / t.sqrt();
                    assert_relative_eq!(x, exact, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn global_y_stays_bounded() {
        // with a convergent ∫ s^{-3/2}, y tends to a finite limit
        let prob = problem(4.0, 2.0, 1, 1.0, 0.1);
        let tr = integrate_y(&prob, &OdeBudget::default()).unwrap();
        let limit = (1000.0f64 - 6.0).powf(-1.0 / 3.0);
        let last = *tr.y_values().last().unwrap();
        assert!(last <= limit * (1.0 + 1e-9));
        assert!(last > 0.99 * limit);
    }

    #[test]
    fn volterra_zero_source() {
        let prob = OdeProblem::new(Nonlinearity::zero(), 1.5, 2, 0.5, 3.0).unwrap();
        let budget = OdeBudget {
            t_max: 50.0,
            t_max_stretch: 50.0,
            ..OdeBudget::default()
        };
        let tr = integrate(&prob, &budget).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.values) {
            assert_relative_eq!(*x, 3.0 * (t / 0.5).powf(-4.0 / 3.0), max_relative = 1e-9);
        }
        assert!(volterra_residual(&tr, &prob).unwrap().max_residual < 1e-10);
    }

    #[test]
    fn volterra_global_and_blowup() {
        let prob = problem(4.0, 2.0, 1, 1.0, 0.1);
        let tr = integrate(&prob, &OdeBudget::default()).unwrap();
        let v = volterra_residual(&tr, &prob).unwrap();
        assert!(v.max_residual < 1e-6, "{v:?}");
        assert!(v.excluded_from.is_none());
        let prob = problem(2.0, 2.0, 1, 1.0, 1.0);
        let tr = integrate(&prob, &OdeBudget::default()).unwrap();
        let v = volterra_residual(&tr, &prob).unwrap();
        assert!(v.excluded_from.unwrap() < 2.25);
        assert!(v.max_residual < 1e-6, "{v:?}");
    }

    #[test]
    fn log_tail_integral_closed_form() {
        // ∫_0^x du / (u (log 1/u)^{3/2}) = 2 / sqrt(log 1/x) below c0
        let f = Nonlinearity::log_corrected(2.0, 1, 1.5, 0.01).unwrap();
        let x: f64 = 1e-3;
        let v = log_integral_from_zero(&f, 3.0, x).unwrap().unwrap().exp();
        assert_relative_eq!(v, 2.0 / (1.0 / x).ln().sqrt(), max_relative = 1e-8);
        let critical = Nonlinearity::log_corrected(2.0, 1, 1.0, 0.01).unwrap();
        assert!(log_integral_from_zero(&critical, 3.0, x).unwrap().is_none());
        let sub = Nonlinearity::power(2.5).unwrap();
        assert!(log_integral_from_zero(&sub, 3.0, x).unwrap().is_none());
    }

    #[test]
    fn certificate_values() {
        // f = u^4, α = 2, n = 1: I = 2 (2y)^2 (2x)^{1} / 1
        let f = Nonlinearity::power(4.0).unwrap();
        let i = global_certificate(&f, 2.0, 1, 4.0, 0.01).unwrap().unwrap();
        let y: f64 = 2.0 * 0.01;
        assert_relative_eq!(i, 2.0 * (2.0 * y).powi(2) * 0.02, max_relative = 1e-8);
        // critical and subcritical powers have no certificate
        for p in [2.0, 3.0] {
            let f = Nonlinearity::power(p).unwrap();
            assert!(global_certificate(&f, 2.0, 1, 4.0, 0.01).unwrap().is_none());
        }
    }

    #[test]
    fn verdict_stable_under_tolerance_halving() {
        for (p, x0) in [(2.0, 0.5), (4.0, 0.1), (4.0, 10.0)] {
            let prob = problem(p, 2.0, 1, 1.0, x0);
            let a = integrate(&prob, &OdeBudget::default()).unwrap();
            let b = integrate(
                &prob,
                &OdeBudget {
                    rtol: 0.5e-10,
                    ..OdeBudget::default()
                },
            )
            .unwrap();
            assert_eq!(a.verdict.kind(), b.verdict.kind());
        }
    }

    #[test]
    fn monotone_comparison() {
        // u^3 <= u^2 on (0, 1): starting below one the cubic stays below
        let a = integrate(&problem(3.0, 1.0, 1, 1.0, 0.5), &OdeBudget::default()).unwrap();
        let b = integrate(&problem(2.0, 1.0, 1, 1.0, 0.5), &OdeBudget::default()).unwrap();
        let t_end = a.times.last().unwrap().min(*b.times.last().unwrap());
        for (k, &t) in a.times.iter().enumerate() {
            if t > t_end {
                break;
            }
            let j = b.times.partition_point(|&s| s < t).min(b.times.len() - 1);
            if (b.times[j] - t).abs() < 1e-12 {
                assert!(a.values[k] <= b.values[j] * (1.0 + 1e-9));
            }
        }
        assert!(a.values.last().unwrap() < &1.0);
    }

    #[test]
    fn sweep_verdicts() {
        let budget = OdeBudget::default();
        let sample = OdeSample {
            x0: vec![1e-4, 1e-2, 1.0, 1e2],
            t0: vec![0.1, 1.0, 10.0],
        };
        let glob = ode_blowup_property(&Nonlinearity::power(4.0).unwrap(), 2.0, 1, &sample, &budget).unwrap();
        assert!(glob.is_global());
        let short = OdeSample {
            x0: vec![1.0, 10.0],
            t0: vec![1.0],
        };
        assert!(ode_blowup_property(&Nonlinearity::power(2.0).unwrap(), 2.0, 1, &short, &budget).is_err());
    }

    #[test]
    fn autonomous_flow_matches_closed_form() {
        // u' = u^2: u(τ) = u0 / (1 - u0 τ)
        let f = Nonlinearity::power(2.0).unwrap();
        let u = autonomous_flow(&f, 0.5, 1.5, 1e-12).unwrap();
        assert_relative_eq!(u, 2.0, max_relative = 1e-10);
        assert!(autonomous_flow(&f, 0.5, 2.5, 1e-12).is_none());
        let lin = Nonlinearity::linear(0.7).unwrap();
        assert_relative_eq!(
            autonomous_flow(&lin, 2.0, 3.0, 1e-12).unwrap(),
            2.0 * 2.1f64.exp(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn rejects_bad_problems() {
        let f = Nonlinearity::power(2.0).unwrap();
        assert!(OdeProblem::new(f.clone(), 2.0, 1, 0.0, 1.0).is_err());
        assert!(OdeProblem::new(f, 2.0, 1, 1.0, -1.0).is_err());
    }

    #[test]
    fn csv_columns() {
        let tr = integrate(&problem(2.0, 2.0, 1, 1.0, 1.0), &OdeBudget::default()).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x,step,order\n"));
        assert_eq!(csv.lines().count(), tr.times.len() + 1);
    }
}
