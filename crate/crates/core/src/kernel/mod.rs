//! The fractional heat kernel `K_α(x, t)`, the inverse Fourier transform of
//! `e^{-t|ξ|^α}`, and the semigroup `S_α(t)` on periodic boxes.
//!
//! Pointwise values use closed forms for `α = 1, 2` and otherwise a cached
//! radial profile at `t = 1` combined with the scaling
//! `K_α(x, t) = t^{-n/α} K_α(t^{-1/α} x, 1)`.

mod field;
mod profile;
mod spectral;

pub use field::{clamp_nonnegative, ClampReport, Field, GridSpec, CLAMP_TOLERANCE};
pub use profile::{inversion, RadialProfile};
pub use spectral::{semigroup_apply, smoothing_constants, truncation_change, SmoothingFit, SpectralOperator};

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::validate_alpha_n;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
    pub n: u32,
}

impl KernelSpec {
    pub fn new(alpha: f64, n: u32) -> Result<Self> {
        validate_alpha_n(alpha, n)?;
        Ok(KernelSpec { alpha, n })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        validate_alpha_n(self.alpha, self.n)
    }

    /// The exponent `n/α` of the on-diagonal decay `K(0, t) ∝ t^{-n/α}`.
    pub fn decay_exponent(&self) -> f64 {
        self.n as f64 / self.alpha
    }
}

/// `K_α(x, 1)` as a function of `r = |x|`.
fn unit_profile(spec: &KernelSpec, r: f64) -> Result<f64> {
    if let Some(v) = profile::closed_form(spec.alpha, spec.n, r) {
        return Ok(v);
    }
    Ok(RadialProfile::cached(spec.alpha, spec.n)?.eval(r))
}

/// `K_α(x, t)` at a point with `|x| = r`.
pub fn kernel_radial(spec: &KernelSpec, r: f64, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("kernel time t = {t} must be positive")));
    }
    let scale = t.powf(1.0 / spec.alpha);
    Ok(unit_profile(spec, r / scale)? * t.powf(-spec.decay_exponent()))
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], t: f64) -> Result<f64> {
    if x.len() != spec.n as usize {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, kernel dimension is {}",
            x.len(),
            spec.n
        )));
    }
    kernel_radial(spec, x.iter().map(|c| c * c).sum::<f64>().sqrt(), t)
}

/// `log K_α(x, t)`; exact for the Gaussian far in its tail, where the
/// value itself underflows.
pub fn kernel_log_radial(spec: &KernelSpec, r: f64, t: f64) -> Result<f64> {
    if spec.alpha == 2.0 {
        spec.validate()?;
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel time t = {t} must be positive")));
        }
        return Ok(-(spec.n as f64) / 2.0 * (4.0 * PI * t).ln() - r * r / (4.0 * t));
    }
    Ok(kernel_radial(spec, r, t)?.ln())
}

/// The kernel sampled pointwise on the grid (not periodised).
pub fn kernel_samples(spec: &KernelSpec, grid: GridSpec, t: f64) -> Result<Field> {
    kernel_radial(spec, 0.0, t)?;
    let mut f = Field::from_fn(grid, spec.n, |_| 0.0)?;
    let values: Vec<f64> = (0..f.values.len())
        .into_par_iter()
        .map(|k| kernel_radial(spec, f.radius(k), t))
        .collect::<Result<_>>()?;
    f.values = values;
    f.time = t;
    f.alpha = Some(spec.alpha);
    Ok(f)
}

/// Whether `r ↦ K_α(r, t)` is non-increasing on `r_j = j · t^{1/α}/100`,
/// `j = 0..5000`, up to relative noise `1e-12`.
pub fn radial_monotone_check(spec: &KernelSpec, t: f64) -> Result<bool> {
    let step = t.powf(1.0 / spec.alpha) / 100.0;
    let mut prev = kernel_radial(spec, 0.0, t)?;
    for j in 1..=5000 {
        let v = kernel_radial(spec, j as f64 * step, t)?;
        if v > prev * (1.0 + 1e-12) {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub min_ratio: f64,
    /// Grid point where the minimum is attained.
    pub at: Vec<f64>,
}

/// Minimum over grid points `y` of
/// `K_α(y, 2t-s) / (2^{-n/α} (t/s)^{-n/α} K_α(y, s))`, which is at least one.
pub fn kernel_ratio_bound_check(spec: &KernelSpec, grid: GridSpec, s: f64, t: f64) -> Result<RatioBound> {
    if !(s > 0.0 && s <= t) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < s <= t, got s = {s}, t = {t}"
        )));
    }
    let field = Field::zeros(grid, spec.n)?;
    let log_factor = -spec.decay_exponent() * (2f64.ln() + (t / s).ln());
    let (k_min, log_min) = (0..field.values.len())
        .into_par_iter()
        .map(|k| {
            let r = field.radius(k);
            let lr = kernel_log_radial(spec, r, 2.0 * t - s)? - kernel_log_radial(spec, r, s)? - log_factor;
            Ok((k, lr))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty grid");
    let bound = RatioBound {
        min_ratio: log_min.exp(),
        at: field.point(k_min),
    };
    if bound.min_ratio < 1.0 - 1e-6 {
        return Err(Error::BoundViolated {
            y: bound.at,
            ratio: bound.min_ratio,
        });
    }
    Ok(bound)
}

/// `∫ K_α(x, t) dx` by quadrature of the radial profile in `log r` up to
/// `r = 1e12 t^{1/α}`, plus the leading-order tail `ω_n R^n K(R, t)/α`.
pub fn kernel_mass(spec: &KernelSpec, t: f64) -> Result<f64> {
    kernel_radial(spec, 0.0, t)?;
    let n = spec.n as f64;
    // surface area of the unit sphere in R^n, n ∈ {1, 2}: 2 and 2π
    let omega = if spec.n == 1 { 2.0 } else { 2.0 * PI };
    let scale = t.powf(1.0 / spec.alpha);
    let (lo, hi) = (-40.0, 1e12f64.ln());
    let mut total = 0.0;
    let mut a = lo;
    let mut err = None;
    while a < hi {
        let b = (a + 1.0).min(hi);
        let piece = crate::numeric::integrate(
            |s| {
                let r = scale * s.exp();
                kernel_radial(spec, r, t)
                    .map(|k| omega * r.powf(n) * k)
                    .unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        0.0
                    })
            },
            a,
            b,
            1e-13,
            1e-12,
            400,
        )?;
        total += piece.value;
        a = b;
    }
    if let Some(e) = err {
        return Err(e);
    }
    let r_end = scale * hi.exp();
    total += omega * r_end.powf(n) * kernel_radial(spec, r_end, t)? / spec.alpha;
    Ok(total)
}

/// CSV `r,K` of the profile at time `t` on `points` radii in `[0, r_max]`.
pub fn radial_profile_csv(spec: &KernelSpec, t: f64, r_max: f64, points: usize) -> Result<String> {
    if points < 2 || !(r_max > 0.0) {
        return Err(Error::InvalidRange(format!(
            "need r_max > 0 and >= 2 points, got {r_max}, {points}"
        )));
    }
    let mut out = String::from("r,K\n");
    for j in 0..points {
        let r = r_max * j as f64 / (points - 1) as f64;
        writeln!(out, "{r:.10e},{:.16e}", kernel_radial(spec, r, t)?).expect("write to string");
    }
    Ok(out)
}
