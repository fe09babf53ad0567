//! `u_t = Δ_α u + f(u)`, `u(0) = φ`, on periodic boxes in one and two
//! dimensions.
//!
//! Each step is a Strang splitting: half a step of the pointwise flow
//! `u' = f(u)`, a full step of `S_α`, and another half step of the flow.
//! The flow is exact for power laws, `u(τ) = (u^{1-p} - (p-1)τ)^{-1/(p-1)}`,
//! so splitting is the only time error. Steps are controlled by step
//! doubling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_radial, Field, GridSpec, KernelSpec, SpectralOperator, CLAMP_TOLERANCE};
use crate::nonlinearity::{ell, Nonlinearity};
use crate::numeric::{fit_blowup, linear_fit};
use crate::ode::{autonomous_flow, log_integral_from_zero};
use crate::verdict::{aggregate_property, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub f: Nonlinearity,
    pub spec: KernelSpec,
    pub grid: GridSpec,
    pub phi: Field,
}

impl PdeProblem {
    pub fn new(f: Nonlinearity, spec: KernelSpec, grid: GridSpec, phi: Field) -> Result<Self> {
        let p = PdeProblem { f, spec, grid, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.grid.validate()?;
        if self.spec.n > 2 {
            return Err(Error::InvalidParameter(format!(
                "PDE runs need n in {{1, 2}}, got {}",
                self.spec.n
            )));
        }
        if self.phi.grid != self.grid || self.phi.dim != self.spec.n {
            return Err(Error::InvalidParameter(
                "initial data is not on the problem grid".into(),
            ));
        }
        if self.phi.min() < 0.0 || !(self.phi.sup_norm() > 0.0) {
            return Err(Error::InvalidParameter(
                "initial data must be non-negative and non-trivial".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdeBudget {
    pub t_max: f64,
    pub sup_blowup: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    /// Step-doubling tolerance on the relative sup-norm error per step.
    pub tol: f64,
    /// Times at which full snapshots are stored; steps are shortened to hit
    /// them exactly. `t = 0` is always stored.
    pub snapshot_times: Vec<f64>,
    pub max_steps: usize,
    /// Required mass fraction inside `|x_i| < L/2` before blow-up; zero
    /// disables the check.
    pub min_inner_mass: f64,
}

impl Default for PdeBudget {
    fn default() -> Self {
        PdeBudget {
            t_max: 100.0,
            sup_blowup: 1e6,
            dt_init: 1e-2,
            dt_min: 1e-5,
            tol: 1e-6,
            snapshot_times: Vec::new(),
            max_steps: 200_000,
            min_inner_mass: 0.9999,
        }
    }
}

impl PdeBudget {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_max > 0.0
            && self.sup_blowup > 0.0
            && self.dt_init > 0.0
            && self.dt_min > 0.0
            && self.tol > 0.0
            && self.max_steps > 0
            && (0.0..=1.0).contains(&self.min_inner_mass)
            && self.snapshot_times.iter().all(|t| *t >= 0.0 && t.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid PDE budget {self:?}")));
        }
        Ok(())
    }

    /// Same run with every time tolerance tightened so that steps roughly
    /// halve (second-order splitting: tolerance / 8).
    pub fn refined(&self) -> PdeBudget {
        PdeBudget {
            dt_init: self.dt_init / 2.0,
            dt_min: self.dt_min / 2.0,
            tol: self.tol / 8.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PdeDiagnostics {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Rejections caused by the pointwise flow blowing up inside a step.
    pub substep_overflows: usize,
    /// Most negative grid value seen (spectral round-off).
    pub most_negative: f64,
    pub min_inner_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeTrace {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub l1_norms: Vec<f64>,
    /// Moment functional `z(t) = ∫ K_α(x, t) u(x, t) dx`; at `t = 0` the
    /// value `u(0, 0)`.
    pub z_values: Vec<f64>,
    pub dts: Vec<f64>,
    pub verdict: Verdict,
    pub diagnostics: PdeDiagnostics,
    #[serde(skip)]
    pub snapshots: Vec<Field>,
}

impl PdeTrace {
    /// CSV with columns `t,sup,l1,z,dt`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup,l1,z,dt\n");
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}",
                self.times[k], self.sup_norms[k], self.l1_norms[k], self.z_values[k], self.dts[k]
            )
            .expect("write to string");
        }
        out
    }

    pub fn snapshot_at(&self, t: f64) -> Result<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-12 * t.max(1.0))
            .ok_or(Error::MissingSnapshot(t))
    }
}

/// The pointwise flow of `u' = f(u)` over `tau`; `None` if some point blows
/// up within `tau`. Non-positive values (round-off) are left unchanged.
fn nonlinear_flow(f: &Nonlinearity, values: &mut [f64], tau: f64) -> bool {
    let step = |u: f64| -> Option<f64> {
        if u <= 0.0 {
            return Some(u);
        }
        match f {
            Nonlinearity::PowerLaw { p } => {
                // u (1 - (p-1) τ u^{p-1})^{-1/(p-1)}
                let q = p - 1.0;
                let a = q * tau * u.powf(q);
                if a >= 1.0 {
                    None
                } else {
                    Some(u * (-(-a).ln_1p() / q).exp())
                }
            }
            Nonlinearity::Linear { c } => Some(u * (c * tau).exp()),
            _ => autonomous_flow(f, u, tau, 1e-12),
        }
    };
    let ok = |v: &mut f64| match step(*v) {
        Some(x) if x.is_finite() => {
            *v = x;
            true
        }
        _ => false,
    };
    if values.len() > 1 << 14 {
        values.par_iter_mut().map(ok).reduce(|| true, |a, b| a && b)
    } else {
        values.iter_mut().fold(true, |acc, v| ok(v) && acc)
    }
}

fn strang(op: &SpectralOperator, f: &Nonlinearity, u: &[f64], dt: f64) -> Option<Vec<f64>> {
    let mut v = u.to_vec();
    if !nonlinear_flow(f, &mut v, dt / 2.0) {
        return None;
    }
    op.apply_values(&mut v, dt);
    if !nonlinear_flow(f, &mut v, dt / 2.0) {
        return None;
    }
    Some(v)
}

/// Largest accepted growth of the sup-norm in one step, so that the final
/// decade before blow-up is resolved by enough samples to fit.
const MAX_GROWTH: f64 = 1.25;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Recorder {
    op: SpectralOperator,
    inner: Vec<bool>,
    localized: bool,
    trace: PdeTrace,
}

impl Recorder {
    fn new(prob: &PdeProblem, budget: &PdeBudget) -> Result<Self> {
        let op = SpectralOperator::new(prob.spec, prob.grid)?;
        let half = prob.grid.half_width / 2.0;
        let inner: Vec<bool> = (0..prob.phi.values.len())
            .map(|k| prob.phi.point(k).iter().all(|x| x.abs() < half))
            .collect();
        let mut r = Recorder {
            op,
            inner,
            localized: true,
            trace: PdeTrace {
                times: Vec::new(),
                sup_norms: Vec::new(),
                l1_norms: Vec::new(),
                z_values: Vec::new(),
                dts: Vec::new(),
                verdict: Verdict::undetermined("not started"),
                diagnostics: PdeDiagnostics {
                    min_inner_mass: 1.0,
                    ..PdeDiagnostics::default()
                },
                snapshots: Vec::new(),
            },
        };
        // data that is not concentrated to begin with (e.g. constants) is
        // exempt from the domain check
        r.localized = budget.min_inner_mass > 0.0 && r.inner_fraction(&prob.phi.values) >= budget.min_inner_mass;
        Ok(r)
    }

    fn inner_fraction(&self, u: &[f64]) -> f64 {
        let total: f64 = u.iter().map(|v| v.abs()).sum();
        let inside: f64 = u
            .iter()
            .zip(&self.inner)
            .filter(|(_, i)| **i)
            .map(|(v, _)| v.abs())
            .sum();
        if total > 0.0 {
            inside / total
        } else {
            1.0
        }
    }

    fn record(&mut self, prob: &PdeProblem, u: &[f64], t: f64, dt: f64) -> Result<()> {
        let mut field = prob.phi.clone();
        field.values = u.to_vec();
        field.time = t;
        field.alpha = Some(prob.spec.alpha);
        let z = if t > 0.0 {
            self.op.kernel_field(t)?.pairing(&field)
        } else {
            field.values[origin_index(&field)]
        };
        let d = &mut self.trace.diagnostics;
        d.most_negative = d.most_negative.min(field.min());
        self.trace.times.push(t);
        self.trace.sup_norms.push(field.sup_norm());
        self.trace.l1_norms.push(field.l1_norm());
        self.trace.z_values.push(z);
        self.trace.dts.push(dt);
        Ok(())
    }

    fn snapshot(&mut self, prob: &PdeProblem, u: &[f64], t: f64) {
        let mut field = prob.phi.clone();
        field.values = u.to_vec();
        field.time = t;
        field.alpha = Some(prob.spec.alpha);
        self.trace.snapshots.push(field);
    }

    fn finish(mut self, verdict: Verdict) -> PdeTrace {
        if self.trace.diagnostics.most_negative < -CLAMP_TOLERANCE {
            log::warn!(
                "negative values down to {:.3e} during the run",
                self.trace.diagnostics.most_negative
            );
        }
        self.trace.verdict = verdict;
        self.trace
    }

    fn blowup_verdict(&self) -> Verdict {
        let s = &self.trace.sup_norms;
        let last = *s.last().expect("non-empty trace");
        let first = s.iter().rposition(|&x| x < last / 10.0).map_or(0, |k| k + 1);
        let t0 = self.trace.times[first];
        let offsets: Vec<f64> = self.trace.times[first..].iter().map(|t| t - t0).collect();
        let log_s: Vec<f64> = s[first..].iter().map(|x| x.ln()).collect();
        match fit_blowup(&offsets, &log_s) {
            Some(fit) if fit.gamma > 0.0 && fit.rms < 1e-2 => Verdict::blow_up(Some(t0 + fit.t_star_offset)),
            other => Verdict::undetermined(format!("sup-norm above threshold but no power-law fit: {other:?}")),
        }
    }

    /// Global when the log-log slope of the sup-norm over the last decade is
    /// stable to ±0.05 and within 0.05 of `-n/α`.
    fn global_verdict(&self, decay: f64) -> Verdict {
        let t_end = *self.trace.times.last().expect("non-empty trace");
        let pts: Vec<(f64, f64)> = self
            .trace
            .times
            .iter()
            .zip(&self.trace.sup_norms)
            .filter(|(t, _)| **t >= t_end / 10.0 && **t > 0.0)
            .map(|(t, s)| (t.ln(), s.ln()))
            .collect();
        let mid = (t_end / 10f64.sqrt()).ln();
        let slope = |sel: &dyn Fn(f64) -> bool| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().filter(|p| sel(p.0)).copied().unzip();
            linear_fit(&xs, &ys).map(|f| f.slope)
        };
        match (slope(&|_| true), slope(&|lt| lt <= mid), slope(&|lt| lt >= mid)) {
            (Some(w), Some(a), Some(b)) if (a - b).abs() <= 0.05 && (w + decay).abs() <= 0.05 => {
                Verdict::global(Some(-w))
            }
            (w, _, _) => Verdict::undetermined(format!(
                "t_max = {t_end} reached without a stable decay slope -{decay} (slope {w:?})"
            )),
        }
    }
}

fn origin_index(f: &Field) -> usize {
    let n = f.grid.points;
    if f.dim == 1 {
        n / 2
    } else {
        (n / 2) * n + n / 2
    }
}

/// Evolves the problem until blow-up, `t_max`, or the step budget.
pub fn evolve(prob: &PdeProblem, budget: &PdeBudget) -> Result<PdeTrace> {
    prob.validate()?;
    budget.validate()?;
    let mut rec = Recorder::new(prob, budget)?;
    let mut targets: Vec<f64> = budget
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= budget.t_max)
        .collect();
    targets.push(budget.t_max);
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut next = 0;
    let mut u = prob.phi.values.clone();
    let mut t = 0.0;
    let mut dt = budget.dt_init;
    rec.record(prob, &u, t, 0.0)?;
    rec.snapshot(prob, &u, t);
    let decay = prob.spec.decay_exponent();
    loop {
        let d = rec.trace.diagnostics;
        if d.steps_accepted + d.steps_rejected >= budget.max_steps {
            let reason = format!("step budget {} exhausted at t = {t}", budget.max_steps);
            return Ok(rec.finish(Verdict::undetermined(reason)));
        }
        let target = targets[next];
        let truncated = dt >= target - t;
        let h = if truncated { target - t } else { dt };
        let attempt = strang(&rec.op, &prob.f, &u, h).and_then(|big| {
            let half = strang(&rec.op, &prob.f, &u, h / 2.0)?;
            Some((big, strang(&rec.op, &prob.f, &half, h / 2.0)?))
        });
        let Some((big, small)) = attempt else {
            rec.trace.diagnostics.substep_overflows += 1;
            rec.trace.diagnostics.steps_rejected += 1;
            dt = h / 4.0;
            if dt < budget.dt_min {
                if sup(&u) >= budget.sup_blowup {
                    let v = rec.blowup_verdict();
                    return Ok(rec.finish(v));
                }
                if dt < budget.dt_min * 1e-6 {
                    return Err(Error::NonlinearSubstepOverflow { t, dt: h });
                }
            }
            continue;
        };
        let scale = sup(&small);
        let diff = big.iter().zip(&small).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let err = diff / scale / 3.0;
        let factor = if err > 0.0 {
            (0.9 * (budget.tol / err).powf(1.0 / 3.0)).clamp(0.1, 4.0)
        } else {
            4.0
        };
        if !(err <= budget.tol) {
            rec.trace.diagnostics.steps_rejected += 1;
            dt = h * factor.min(0.9);
            continue;
        }
        if scale > MAX_GROWTH * sup(&u) {
            rec.trace.diagnostics.steps_rejected += 1;
            dt = h * 0.5;
            continue;
        }
        rec.trace.diagnostics.steps_accepted += 1;
        u = small;
        t = if truncated { target } else { t + h };
        let dt_next = h * factor;
        dt = if truncated { dt.max(dt_next) } else { dt_next };
        rec.record(prob, &u, t, h)?;
        let s = scale;
        if truncated && next + 1 < targets.len() {
            rec.snapshot(prob, &u, t);
            next += 1;
        } else if truncated && budget.snapshot_times.contains(&t) {
            rec.snapshot(prob, &u, t);
        }
        if !s.is_finite() || s > 1e300 {
            let v = rec.blowup_verdict();
            return Ok(rec.finish(v));
        }
        if s >= budget.sup_blowup {
            if dt_next < budget.dt_min {
                let v = rec.blowup_verdict();
                return Ok(rec.finish(v));
            }
        } else if rec.localized {
            let fraction = rec.inner_fraction(&u);
            let d = &mut rec.trace.diagnostics;
            d.min_inner_mass = d.min_inner_mass.min(fraction);
            if fraction < budget.min_inner_mass {
                return Err(Error::DomainTooSmall { t, fraction });
            }
        }
        if t >= budget.t_max {
            let v = rec.global_verdict(decay);
            return Ok(rec.finish(v));
        }
    }
}

/// Largest relative sup-norm deviation, over `t_check`, between the
/// snapshot `u(t)` and `S(t)φ + ∫_0^t S(t-s) f(u(s)) ds`, with the time
/// integral by the trapezoid rule on the stored snapshots in `[0, t]`.
pub fn duhamel_residual(trace: &PdeTrace, prob: &PdeProblem, t_check: &[f64]) -> Result<f64> {
    prob.validate()?;
    let op = SpectralOperator::new(prob.spec, prob.grid)?;
    let mut worst = 0.0f64;
    for &t in t_check {
        let target = trace.snapshot_at(t)?;
        let nodes: Vec<&Field> = trace.snapshots.iter().filter(|s| s.time <= target.time).collect();
        if nodes.first().map(|s| s.time) != Some(0.0) {
            return Err(Error::MissingSnapshot(0.0));
        }
        let terms: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|s| {
                let mut v = s
                    .values
                    .iter()
                    .map(|&x| prob.f.eval(x.max(0.0)))
                    .collect::<Result<Vec<f64>>>()?;
                op.apply_values(&mut v, target.time - s.time);
                Ok(v)
            })
            .collect::<Result<_>>()?;
        let mut rhs = op.apply(&prob.phi, target.time)?.values;
        for j in 1..nodes.len() {
            let w = 0.5 * (nodes[j].time - nodes[j - 1].time);
            for (r, (a, b)) in rhs.iter_mut().zip(terms[j - 1].iter().zip(&terms[j])) {
                *r += w * (a + b);
            }
        }
        let dev = rhs
            .iter()
            .zip(&target.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(dev / target.sup_norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuhamelOrder {
    /// Residual with every stored snapshot in `[0, t]` as a node.
    pub fine: f64,
    /// Residual with every second node.
    pub coarse: f64,
}

impl DuhamelOrder {
    pub fn ratio(&self) -> f64 {
        self.coarse / self.fine
    }
}

/// Duhamel residual at `t` on the stored nodes and on every second node;
/// the trapezoid rule makes the ratio close to four once the time-stepping
/// error is below the quadrature error. Needs an even number of intervals.
pub fn duhamel_order(trace: &PdeTrace, prob: &PdeProblem, t: f64) -> Result<DuhamelOrder> {
    let target = trace.snapshot_at(t)?.time;
    let count = trace.snapshots.iter().filter(|s| s.time <= target).count();
    if count < 3 || count % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "node doubling needs an even number of intervals on [0, {t}], got {}",
            count.saturating_sub(1)
        )));
    }
    let fine = duhamel_residual(trace, prob, &[t])?;
    let mut thinned = trace.clone();
    let mut k = 0;
    thinned.snapshots.retain(|s| {
        let keep = s.time > target || k % 2 == 0;
        if s.time <= target {
            k += 1;
        }
        keep
    });
    let coarse = duhamel_residual(&thinned, prob, &[t])?;
    Ok(DuhamelOrder { fine, coarse })
}

/// `(t, z(t))` for every stored snapshot.
pub fn moment_functional(trace: &PdeTrace, prob: &PdeProblem) -> Result<Vec<(f64, f64)>> {
    let op = SpectralOperator::new(prob.spec, prob.grid)?;
    trace
        .snapshots
        .iter()
        .map(|s| {
            let z = if s.time > 0.0 {
                op.kernel_field(s.time)?.pairing(s)
            } else {
                s.values[origin_index(s)]
            };
            Ok((s.time, z))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenCheck {
    pub lhs: f64,
    pub rhs: f64,
}

/// `lhs = ∫ K_α(y, t) f(v(y)) dy` against `rhs = f(∫ K_α(y, t) v(y) dy)`,
/// with the periodised kernel as a probability vector on the grid.
pub fn jensen_check(snapshot: &Field, prob: &PdeProblem, t: f64) -> Result<JensenCheck> {
    if snapshot.grid != prob.grid || snapshot.dim != prob.spec.n {
        return Err(Error::InvalidParameter("snapshot is not on the problem grid".into()));
    }
    if snapshot.min() < -CLAMP_TOLERANCE * snapshot.sup_norm().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "snapshot has negative values down to {}",
            snapshot.min()
        )));
    }
    let op = SpectralOperator::new(prob.spec, prob.grid)?;
    let kernel = op.kernel_field(t)?;
    let weights: Vec<f64> = kernel.values.iter().map(|k| k.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut mean = 0.0;
    let mut lhs = 0.0;
    for (w, v) in weights.iter().zip(&snapshot.values) {
        let v = v.max(0.0);
        mean += w / total * v;
        lhs += w / total * prob.f.eval(v)?;
    }
    let rhs = prob.f.eval(mean)?;
    if lhs < rhs - 1e-10 * (1.0 + lhs.abs()) {
        return Err(Error::ConvexityViolation { lhs, rhs });
    }
    Ok(JensenCheck { lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupersolutionOptions {
    pub horizon: f64,
    /// Number of time intervals of the trapezoid rule on `[0, horizon]`.
    pub intervals: usize,
    pub iterations: usize,
    /// Budget of the reference evolution; its snapshot times are replaced by
    /// the quadrature nodes.
    pub budget: PdeBudget,
}

impl Default for SupersolutionOptions {
    fn default() -> Self {
        SupersolutionOptions {
            horizon: 10.0,
            intervals: 100,
            iterations: 6,
            budget: PdeBudget {
                t_max: 10.0,
                tol: 1e-8,
                ..PdeBudget::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub ell_2: f64,
    pub tau: f64,
    /// `L^∞` contraction constant (one for a positive unit-mass kernel).
    pub c1: f64,
    /// `L^1 → L^∞` constant `K_α(0, 1)`, and the value fitted on `φ`.
    pub c2: f64,
    pub c2_fitted: f64,
    /// Largest `ρ` for which the supersolution bound closes.
    pub rho: f64,
    pub data_norm: f64,
    pub nodes: Vec<f64>,
    /// Sup-norm of each iterate at the last node, starting with `w`.
    pub iterate_sups: Vec<f64>,
    pub monotone: bool,
    /// `max (F(w) - w)` over all nodes and points; non-positive.
    pub supersolution_slack: f64,
    pub limit_gap: f64,
}

/// Largest `ρ ≤ 1/C₁` with
/// `2ℓ(2)τ - 1 + (α/n) 2^{p_α} (C₂ρ)^{α/n} ∫_0^{2C₂ρτ^{-n/α}} x^{-p_α} ℓ(x) dx ≤ 0`.
fn admissible_rho(f: &Nonlinearity, spec: &KernelSpec, ell2: f64, tau: f64, c1: f64, c2: f64) -> Result<f64> {
    let an = spec.alpha / spec.n as f64;
    let p = 1.0 + an;
    let base = 2.0 * ell2 * tau - 1.0;
    let excess = |rho: f64| -> Result<f64> {
        let top = 2.0 * c2 * rho * tau.powf(-1.0 / an);
        let log_int = log_integral_from_zero(f, p, top)?.ok_or_else(|| Error::HypothesesUnmet {
            flag: "B2fin",
            detail: "the integral of u^(-p_alpha) l(u) diverges at zero".into(),
        })?;
        Ok(base + (an.ln() + p * 2f64.ln() + an * (c2 * rho).ln() + log_int).exp())
    };
    let hi = 1.0 / c1;
    if excess(hi)? <= 0.0 {
        return Ok(hi);
    }
    let (mut lo, mut hi) = (hi * 1e-30, hi);
    if excess(lo)? > 0.0 {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if excess(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok(lo)
}

/// The Duhamel map `F(u)(t_k) = S(t_k)φ + ∫_0^{t_k} S(t_k - s) f(u(s)) ds` on
/// the nodes, trapezoid rule in `s`.
fn duhamel_map(op: &SpectralOperator, prob: &PdeProblem, nodes: &[f64], u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let fu: Vec<Vec<f64>> = u
        .iter()
        .map(|v| v.iter().map(|&x| prob.f.eval(x.max(0.0))).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let mut out = prob.phi.values.clone();
            op.apply_values(&mut out, nodes[k]);
            for j in 0..=k {
                let w = 0.5
                    * (if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 }
                        + if j < k { nodes[j + 1] - nodes[j] } else { 0.0 });
                if w == 0.0 {
                    continue;
                }
                let mut term = fu[j].clone();
                op.apply_values(&mut term, nodes[k] - nodes[j]);
                for (o, t) in out.iter_mut().zip(&term) {
                    *o += w * t;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Monotone iteration `u_{k+1} = F(u_k)` from the supersolution
/// `w = 2 S_α(t)φ`, with the constants of the small-data argument.
pub fn supersolution_iterate(prob: &PdeProblem, opts: &SupersolutionOptions) -> Result<SupersolutionReport> {
    prob.validate()?;
    if !(opts.horizon > 0.0) || opts.intervals == 0 {
        return Err(Error::InvalidParameter(
            "supersolution needs horizon > 0 and intervals > 0".into(),
        ));
    }
    let op = SpectralOperator::new(prob.spec, prob.grid)?;
    let ell_2 = ell(&prob.f, 2.0)?;
    let tau = if ell_2 > 0.0 {
        1.0 / (4.0 * ell_2)
    } else {
        f64::INFINITY
    };
    let nodes: Vec<f64> = (0..=opts.intervals)
        .map(|j| opts.horizon * j as f64 / opts.intervals as f64)
        .collect();
    let linear: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&t| {
            let mut v = prob.phi.values.clone();
            op.apply_values(&mut v, t);
            v
        })
        .collect();
    let sup_phi = prob.phi.sup_norm();
    let c1 = linear.iter().map(|v| sup(v) / sup_phi).fold(1.0, f64::max);
    let c2 = kernel_radial(&prob.spec, 0.0, 1.0)?;
    let e = prob.spec.decay_exponent();
    let l1 = prob.phi.l1_norm();
    let c2_fitted = nodes[1..]
        .iter()
        .zip(&linear[1..])
        .map(|(t, v)| sup(v) * t.powf(e) / l1)
        .fold(0.0, f64::max);
    let rho = if prob.f.is_zero() {
        1.0 / c1
    } else if prob.f.ratio_nondecreasing() {
        admissible_rho(&prob.f, &prob.spec, ell_2, tau.min(1e300), c1, c2.max(c2_fitted))?
    } else {
        return Err(Error::InvalidParameter(
            "supersolution constants need f(u)/u non-decreasing".into(),
        ));
    };
    let data_norm = l1 + sup_phi;
    if data_norm > rho {
        log::info!("data norm {data_norm:.3e} exceeds the admissible rho {rho:.3e}");
    }
    let w: Vec<Vec<f64>> = linear.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
    let fw = duhamel_map(&op, prob, &nodes, &w)?;
    let mut slack = f64::NEG_INFINITY;
    for (k, (a, b)) in fw.iter().zip(&w).enumerate() {
        let tol = 1e-12 * (1.0 + sup(b));
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            slack = slack.max(d);
            if d > tol {
                return Err(Error::SupersolutionViolation { t: nodes[k], excess: d });
            }
        }
    }
    let mut iterate_sups = vec![sup(w.last().expect("nodes"))];
    let mut current = w;
    let mut next = fw;
    let mut monotone = true;
    for _ in 0..opts.iterations {
        iterate_sups.push(sup(next.last().expect("nodes")));
        for (a, b) in next.iter().zip(&current) {
            let tol = 1e-12 * (1.0 + sup(b));
            monotone &= a.iter().zip(b).all(|(x, y)| *x <= y + tol);
        }
        current = next;
        next = duhamel_map(&op, prob, &nodes, &current)?;
    }
    let budget = PdeBudget {
        t_max: opts.horizon,
        snapshot_times: nodes.clone(),
        ..opts.budget.clone()
    };
    let trace = evolve(prob, &budget)?;
    let mut limit_gap = 0.0f64;
    for (t, v) in nodes.iter().zip(&current) {
        let snap = trace.snapshot_at(*t)?;
        limit_gap = limit_gap.max(snap.values.iter().zip(v).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
    }
    Ok(SupersolutionReport {
        ell_2,
        tau,
        c1,
        c2,
        c2_fitted,
        rho,
        data_norm,
        nodes,
        iterate_sups,
        monotone,
        supersolution_slack: slack,
        limit_gap,
    })
}

/// Shapes of initial data used by [`pde_blowup_property`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiShape {
    /// `A e^{-|x|²}`.
    Gaussian,
    /// `A (1 - tanh((|x| - 1)/0.1)) / 2`, a smoothed indicator of the unit ball.
    MollifiedIndicator,
}

impl PhiShape {
    pub fn field(&self, grid: GridSpec, dim: u32, amplitude: f64) -> Result<Field> {
        let r2 = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
        match self {
            PhiShape::Gaussian => Field::from_fn(grid, dim, |x| amplitude * (-r2(x)).exp()),
            PhiShape::MollifiedIndicator => Field::from_fn(grid, dim, |x| {
                amplitude * 0.5 * (1.0 - ((r2(x).sqrt() - 1.0) / 0.1).tanh())
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFamily {
    pub amplitudes: Vec<f64>,
    pub shapes: Vec<PhiShape>,
}

impl PhiFamily {
    pub fn validate(&self) -> Result<()> {
        let max = self.amplitudes.iter().copied().fold(f64::MIN, f64::max);
        let min = self.amplitudes.iter().copied().fold(f64::MAX, f64::min);
        let both = self.shapes.contains(&PhiShape::Gaussian) && self.shapes.contains(&PhiShape::MollifiedIndicator);
        if !(min > 0.0) || (max / min).log10() < 4.0 - 1e-9 || !both {
            return Err(Error::InvalidParameter(
                "family must span >= 4 decades of positive amplitudes and both shapes".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSampledRun {
    pub shape: PhiShape,
    pub amplitude: f64,
    pub verdict: Verdict,
}

/// Runs every member of the family in parallel. Domain and overflow
/// failures become undetermined verdicts.
pub fn pde_sweep(
    f: &Nonlinearity,
    spec: &KernelSpec,
    grid: GridSpec,
    family: &PhiFamily,
    budget: &PdeBudget,
) -> Result<Vec<PdeSampledRun>> {
    let cells: Vec<(PhiShape, f64)> = family
        .shapes
        .iter()
        .flat_map(|&s| family.amplitudes.iter().map(move |&a| (s, a)))
        .collect();
    cells
        .par_iter()
        .map(|&(shape, amplitude)| {
            let phi = shape.field(grid, spec.n, amplitude)?;
            let prob = PdeProblem::new(f.clone(), *spec, grid, phi)?;
            let verdict = match evolve(&prob, budget) {
                Ok(tr) => tr.verdict,
                Err(e @ (Error::DomainTooSmall { .. } | Error::NonlinearSubstepOverflow { .. })) => {
                    Verdict::undetermined(e.to_string())
                }
                Err(e) => return Err(e),
            };
            Ok(PdeSampledRun {
                shape,
                amplitude,
                verdict,
            })
        })
        .collect()
}

/// Sampled PDE blow-up property, aggregated as for the ODE.
pub fn pde_blowup_property(
    f: &Nonlinearity,
    spec: &KernelSpec,
    grid: GridSpec,
    family: &PhiFamily,
    budget: &PdeBudget,
) -> Result<Verdict> {
    family.validate()?;
    let runs = pde_sweep(f, spec, grid, family, budget)?;
    Ok(aggregate_property(runs.iter().map(|r| &r.verdict)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::semigroup_apply;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gaussian_problem(f: Nonlinearity, amplitude: f64, grid: GridSpec) -> PdeProblem {
        let spec = KernelSpec::new(2.0, 1).unwrap();
        let phi = PhiShape::Gaussian.field(grid, 1, amplitude).unwrap();
        PdeProblem::new(f, spec, grid, phi).unwrap()
    }

    #[test]
    fn zero_source_is_the_semigroup() {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let prob = gaussian_problem(Nonlinearity::zero(), 1.0, grid);
        let budget = PdeBudget {
            t_max: 5.0,
            snapshot_times: vec![1.0, 5.0],
            ..PdeBudget::default()
        };
        let tr = evolve(&prob, &budget).unwrap();
        for t in [1.0, 5.0] {
            let exact = semigroup_apply(&prob.spec, grid, &prob.phi, t).unwrap();
            assert!(tr.snapshot_at(t).unwrap().sup_distance(&exact) < 1e-13);
        }
        // sup of the Gaussian solution is (1 + 4t)^{-1/2}
        assert_relative_eq!(*tr.sup_norms.last().unwrap(), 21f64.powf(-0.5), max_relative = 1e-10);
        assert!(duhamel_residual(&tr, &prob, &[1.0, 5.0]).unwrap() < 1e-10);
    }

    #[test]
    fn constant_data_follows_the_ode() {
        let grid = GridSpec::new(10.0, 64).unwrap();
        let spec = KernelSpec::new(1.5, 1).unwrap();
        let phi = Field::constant(grid, 1, 0.5).unwrap();
        let prob = PdeProblem::new(Nonlinearity::power(2.0).unwrap(), spec, grid, phi).unwrap();
        let tr = evolve(
            &prob,
            &PdeBudget {
                t_max: 1.5,
                ..PdeBudget::default()
            },
        )
        .unwrap();
        for (t, s) in tr.times.iter().zip(&tr.sup_norms) {
            assert_relative_eq!(*s, 0.5 / (1.0 - 0.5 * t), max_relative = 1e-8);
        }
        // and blows up at t = 2
        let tr = evolve(
            &prob,
            &PdeBudget {
                t_max: 5.0,
                ..PdeBudget::default()
            },
        )
        .unwrap();
        assert_relative_eq!(tr.verdict.t_star().unwrap(), 2.0, max_relative = 1e-4);
    }

    #[test]
    fn constant_data_two_dimensions() {
        let grid = GridSpec::new(10.0, 64).unwrap();
        let spec = KernelSpec::new(1.0, 2).unwrap();
        let phi = Field::constant(grid, 2, 0.25).unwrap();
        let f = Nonlinearity::log_corrected(1.0, 2, 0.5, 0.5).unwrap();
        let prob = PdeProblem::new(f.clone(), spec, grid, phi).unwrap();
        let tr = evolve(
            &prob,
            &PdeBudget {
                t_max: 0.5,
                ..PdeBudget::default()
            },
        )
        .unwrap();
        let ode = autonomous_flow(&f, 0.25, 0.5, 1e-13).unwrap();
        assert_relative_eq!(*tr.sup_norms.last().unwrap(), ode, max_relative = 1e-8);
    }

    #[test]
    fn moment_functional_closed_form() {
        // φ = K(·, τ0): z(t) = K(0, 2t + τ0) = (4π(2t + τ0))^{-1/2}
        let grid = GridSpec::new(40.0, 1024).unwrap();
        let spec = KernelSpec::new(2.0, 1).unwrap();
        let tau0 = 0.5;
        let phi = Field::from_fn(grid, 1, |x| {
            (-x[0] * x[0] / (4.0 * tau0)).exp() / (4.0 * PI * tau0).sqrt()
        })
        .unwrap();
        let prob = PdeProblem::new(Nonlinearity::zero(), spec, grid, phi).unwrap();
        let budget = PdeBudget {
            t_max: 4.0,
            snapshot_times: vec![0.5, 1.0, 2.0, 4.0],
            ..PdeBudget::default()
        };
        let tr = evolve(&prob, &budget).unwrap();
        let z = moment_functional(&tr, &prob).unwrap();
        for &(t, v) in &z[1..] {
            assert_relative_eq!(v, (4.0 * PI * (2.0 * t + tau0)).powf(-0.5), max_relative = 1e-10);
        }
        for (zv, s) in tr.z_values.iter().zip(&tr.sup_norms) {
            assert!(*zv <= s * (1.0 + 1e-12) && *zv > 0.0);
        }
    }

    #[test]
    fn jensen_cases() {
        let grid = GridSpec::new(20.0, 256).unwrap();
        let spec = KernelSpec::new(1.5, 1).unwrap();
        let v = Field::from_fn(grid, 1, |x| 0.3 + 0.2 * (x[0] / 3.0).sin().powi(2)).unwrap();
        let lin = PdeProblem::new(Nonlinearity::linear(2.0).unwrap(), spec, grid, v.clone()).unwrap();
        let j = jensen_check(&v, &lin, 0.7).unwrap();
        assert_relative_eq!(j.lhs, j.rhs, max_relative = 1e-14);
        let sq = PdeProblem::new(Nonlinearity::power(2.0).unwrap(), spec, grid, v.clone()).unwrap();
        let j = jensen_check(&v, &sq, 0.7).unwrap();
        // lhs - rhs is the variance of v under the kernel weights
        let op = SpectralOperator::new(spec, grid).unwrap();
        let k = op.kernel_field(0.7).unwrap();
        let w: Vec<f64> = k.values.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>() / total;
        let var: f64 = w
            .iter()
            .zip(&v.values)
            .map(|(a, b)| a * (b - mean).powi(2))
            .sum::<f64>()
            / total;
        assert_relative_eq!(j.lhs - j.rhs, var, max_relative = 1e-8);
        assert!(var > 0.0);
    }

    #[test]
    fn jensen_on_stepwise() {
        use crate::example4::ExampleParams;
        let f = Nonlinearity::stepwise(&ExampleParams::new(2.0, 1, 2.0, 1.75)).unwrap();
        let grid = GridSpec::new(10.0, 128).unwrap();
        let spec = KernelSpec::new(2.0, 1).unwrap();
        let v = Field::from_fn(grid, 1, |x| 1e-3 * (-x[0] * x[0]).exp() + 1e-9).unwrap();
        let prob = PdeProblem::new(f, spec, grid, v.clone()).unwrap();
        let j = jensen_check(&v, &prob, 0.3).unwrap();
        assert!(j.lhs >= j.rhs);
    }

    #[test]
    fn order_preserved() {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let f = Nonlinearity::power(2.0).unwrap();
        let budget = PdeBudget {
            t_max: 3.0,
            snapshot_times: vec![1.0, 2.0, 3.0],
            min_inner_mass: 0.0,
            ..PdeBudget::default()
        };
        let a = evolve(&gaussian_problem(f.clone(), 0.2, grid), &budget).unwrap();
        let b = evolve(&gaussian_problem(f, 0.4, grid), &budget).unwrap();
        for t in [1.0, 2.0, 3.0] {
            let (sa, sb) = (a.snapshot_at(t).unwrap(), b.snapshot_at(t).unwrap());
            assert!(sa
                .values
                .iter()
                .zip(&sb.values)
                .all(|(x, y)| *x <= y + 1e-6 * sb.sup_norm()));
        }
    }

    #[test]
    fn square_blows_up_quickly_at_large_amplitude() {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let prob = gaussian_problem(Nonlinearity::power(2.0).unwrap(), 5.0, grid);
        let tr = evolve(&prob, &PdeBudget::default()).unwrap();
        let t_star = tr.verdict.t_star().expect("blow-up");
        // bounded by the spatially constant solution from the peak value
        assert!(t_star > 0.2 && t_star < 1.0, "{t_star}");
        let z: Vec<f64> = tr.z_values.iter().rev().take(20).copied().collect();
        assert!(z.windows(2).all(|w| w[0] >= w[1]));
        for s in &tr.snapshots {
            jensen_check(s, &prob, s.time.max(0.1)).unwrap();
        }
    }

    #[test]
    fn small_quartic_is_global_with_duhamel_order() {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let prob = gaussian_problem(Nonlinearity::power(4.0).unwrap(), 0.5, grid);
        let nodes: Vec<f64> = (1..=64).map(|j| j as f64 / 32.0).collect();
        let budget = PdeBudget {
            t_max: 2.0,
            tol: 1e-10,
            snapshot_times: nodes,
            ..PdeBudget::default()
        };
        let tr = evolve(&prob, &budget).unwrap();
        let order = duhamel_order(&tr, &prob, 2.0).unwrap();
        let (fine, coarse, ratio) = (order.fine, order.coarse, order.ratio());
        assert!(fine < 1e-4, "{fine}");
        assert!((3.5..4.5).contains(&ratio), "{coarse} / {fine} = {ratio}");
    }

    #[test]
    fn supersolution_zero_source() {
        let grid = GridSpec::new(20.0, 256).unwrap();
        let prob = gaussian_problem(Nonlinearity::zero(), 0.1, grid);
        let r = supersolution_iterate(
            &prob,
            &SupersolutionOptions {
                horizon: 2.0,
                intervals: 8,
                iterations: 2,
                ..SupersolutionOptions::default()
            },
        )
        .unwrap();
        assert!(r.monotone);
        // F(w) = S(t)φ = w/2 and the iteration is constant afterwards
        assert_relative_eq!(r.iterate_sups[1], r.iterate_sups[0] / 2.0, max_relative = 1e-12);
        assert_relative_eq!(r.iterate_sups[2], r.iterate_sups[1], max_relative = 1e-12);
        assert!(r.limit_gap < 1e-12);
    }

    #[test]
    fn supersolution_small_quartic() {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let prob = gaussian_problem(Nonlinearity::power(4.0).unwrap(), 1e-3, grid);
        let r = supersolution_iterate(
            &prob,
            &SupersolutionOptions {
                horizon: 4.0,
                intervals: 40,
                iterations: 6,
                ..SupersolutionOptions::default()
            },
        )
        .unwrap();
        assert!(r.monotone);
        assert!(r.supersolution_slack <= 1e-12);
        assert!(r.data_norm <= r.rho, "{r:?}");
        assert!(r.iterate_sups.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.limit_gap < 1e-4, "{}", r.limit_gap);
        assert_relative_eq!(r.c2, (4.0 * PI).powf(-0.5), max_relative = 1e-14);
    }

    #[test]
    fn budget_and_problem_validation() {
        let grid = GridSpec::new(10.0, 64).unwrap();
        let spec = KernelSpec::new(2.0, 1).unwrap();
        let neg = Field::from_fn(grid, 1, |x| x[0]).unwrap();
        assert!(PdeProblem::new(Nonlinearity::zero(), spec, grid, neg).is_err());
        let zero = Field::zeros(grid, 1).unwrap();
        assert!(PdeProblem::new(Nonlinearity::zero(), spec, grid, zero).is_err());
        let prob = gaussian_problem(Nonlinearity::zero(), 1.0, grid);
        assert!(evolve(
            &prob,
            &PdeBudget {
                tol: 0.0,
                ..PdeBudget::default()
            }
        )
        .is_err());
        let fam = PhiFamily {
            amplitudes: vec![1.0, 10.0],
            shapes: vec![PhiShape::Gaussian, PhiShape::MollifiedIndicator],
        };
        let f = Nonlinearity::power(2.0).unwrap();
        assert!(pde_blowup_property(&f, &spec, grid, &fam, &PdeBudget::default()).is_err());
    }

    #[test]
    fn domain_too_small_for_heavy_tails() {
        let grid = GridSpec::new(10.0, 256).unwrap();
        let spec = KernelSpec::new(1.0, 1).unwrap();
        let phi = PhiShape::Gaussian.field(grid, 1, 0.01).unwrap();
        let prob = PdeProblem::new(Nonlinearity::power(3.0).unwrap(), spec, grid, phi).unwrap();
        assert!(matches!(
            evolve(&prob, &PdeBudget::default()),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn csv_columns() {
        let grid = GridSpec::new(10.0, 64).unwrap();
        let prob = gaussian_problem(Nonlinearity::zero(), 1.0, grid);
        let tr = evolve(
            &prob,
            &PdeBudget {
                t_max: 0.1,
                ..PdeBudget::default()
            },
        )
        .unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,sup,l1,z,dt\n"));
        assert_eq!(csv.lines().count(), tr.times.len() + 1);
    }
}
