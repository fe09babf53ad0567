use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::field::{Field, GridSpec};
use super::KernelSpec;
use crate::error::{Error, Result};

/// `S_α(t)` on the periodic box as the Fourier multiplier `e^{-t|ξ|^α}`,
/// `ξ = π k / L`. Holds the FFT plans and the symbol `|ξ|^α`.
pub struct SpectralOperator {
    spec: KernelSpec,
    grid: GridSpec,
    symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("spec", &self.spec)
            .field("grid", &self.grid)
            .finish()
    }
}

fn wavenumber(k: usize, n: usize, half_width: f64) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    PI * signed / half_width
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

impl SpectralOperator {
    pub fn new(spec: KernelSpec, grid: GridSpec) -> Result<Self> {
        spec.validate()?;
        grid.validate()?;
        if spec.n > 2 {
            return Err(Error::InvalidParameter(format!(
                "gridded semigroup needs n in {{1, 2}}, got {}",
                spec.n
            )));
        }
        let n = grid.points;
        let half = spec.alpha / 2.0;
        let xi2: Vec<f64> = (0..n).map(|k| wavenumber(k, n, grid.half_width).powi(2)).collect();
        let symbol = if spec.n == 1 {
            xi2.iter().map(|x| x.powf(half)).collect()
        } else {
            (0..n * n).map(|k| (xi2[k / n] + xi2[k % n]).powf(half)).collect()
        };
        let mut planner = FftPlanner::new();
        Ok(SpectralOperator {
            spec,
            grid,
            symbol,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.grid.points;
        if self.spec.n == 1 {
            plan.process(buf);
            return;
        }
        for _ in 0..2 {
            buf.par_chunks_mut(n * 16).for_each(|rows| plan.process(rows));
            transpose(buf, n);
        }
    }

    fn check_field(&self, phi: &Field) -> Result<()> {
        if phi.grid != self.grid || phi.dim != self.spec.n {
            return Err(Error::InvalidParameter(format!(
                "field on {:?} (n = {}) does not match operator grid {:?} (n = {})",
                phi.grid, phi.dim, self.grid, self.spec.n
            )));
        }
        Ok(())
    }

    /// Multiplies every Fourier mode by `e^{-t|ξ|^α}`. Linear and exact on
    /// the zero mode; no clamping of negative values.
    pub fn apply(&self, phi: &Field, t: f64) -> Result<Field> {
        self.check_field(phi)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("semigroup time t = {t} must be >= 0")));
        }
        let mut out = phi.clone();
        out.time = phi.time + t;
        out.alpha = Some(self.spec.alpha);
        if t == 0.0 {
            return Ok(out);
        }
        self.apply_values(&mut out.values, t);
        Ok(out)
    }

    /// In-place version of [`apply`](Self::apply) on raw grid values.
    pub fn apply_values(&self, values: &mut [f64], t: f64) {
        if t == 0.0 {
            return;
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        let norm = 1.0 / buf.len() as f64;
        for (c, m) in buf.iter_mut().zip(&self.symbol) {
            *c *= (-t * m).exp() * norm;
        }
        self.transform(&mut buf, true);
        for (v, c) in values.iter_mut().zip(&buf) {
            *v = c.re;
        }
    }

    /// The periodised kernel `Σ_m K_α(x + 2Lm, t)` on the grid, summed
    /// spectrally; its discrete mass is one.
    pub fn kernel_field(&self, t: f64) -> Result<Field> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel time t = {t} must be positive")));
        }
        let n = self.grid.points;
        let vol = (2.0 * self.grid.half_width).powi(self.spec.n as i32);
        // x_0 = -L contributes the phase e^{-iπk} = (-1)^k
        let parity = |k: usize| if self.spec.n == 1 { k % 2 } else { (k / n + k % n) % 2 };
        let mut buf: Vec<Complex<f64>> = self
            .symbol
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let sign = if parity(k) == 0 { 1.0 } else { -1.0 };
                Complex::new(sign * (-t * m).exp() / vol, 0.0)
            })
            .collect();
        self.transform(&mut buf, true);
        let mut f = Field::zeros(self.grid, self.spec.n)?;
        for (v, c) in f.values.iter_mut().zip(&buf) {
            *v = c.re;
        }
        f.time = t;
        f.alpha = Some(self.spec.alpha);
        Ok(f)
    }
}

/// One-shot `S_α(t)φ`.
pub fn semigroup_apply(spec: &KernelSpec, grid: GridSpec, phi: &Field, t: f64) -> Result<Field> {
    SpectralOperator::new(*spec, grid)?.apply(phi, t)
}

/// Observed constants `C(t) = ‖S(t)φ‖_∞ t^{n/α} / ‖φ‖_1` of the `L¹ → L^∞`
/// smoothing estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub times: Vec<f64>,
    pub constants: Vec<f64>,
    /// Largest observed constant.
    pub constant: f64,
    /// `max C / min C - 1`.
    pub spread: f64,
}

pub fn smoothing_constants(op: &SpectralOperator, phi: &Field, times: &[f64]) -> Result<SmoothingFit> {
    let l1 = phi.l1_norm();
    if !(l1 > 0.0) || times.is_empty() {
        return Err(Error::InvalidParameter(
            "smoothing fit needs non-zero data and times".into(),
        ));
    }
    let e = op.spec().decay_exponent();
    let constants = times
        .iter()
        .map(|&t| Ok(op.apply(phi, t)?.sup_norm() * t.powf(e) / l1))
        .collect::<Result<Vec<f64>>>()?;
    let max = constants.iter().copied().fold(f64::MIN, f64::max);
    let min = constants.iter().copied().fold(f64::MAX, f64::min);
    Ok(SmoothingFit {
        times: times.to_vec(),
        constants,
        constant: max,
        spread: max / min - 1.0,
    })
}

/// Sup-norm change of `S_α(t)φ` on the inner half-box `|x_i| < L/2` when the
/// box is doubled at fixed spacing. A convergence diagnostic for compactly
/// supported `φ`.
pub fn truncation_change<G: Fn(&[f64]) -> f64>(spec: &KernelSpec, grid: GridSpec, phi: G, t: f64) -> Result<f64> {
    let big = grid.doubled();
    let small = semigroup_apply(spec, grid, &Field::from_fn(grid, spec.n, &phi)?, t)?;
    let large = semigroup_apply(spec, big, &Field::from_fn(big, spec.n, &phi)?, t)?;
    let n = grid.points;
    let (lo, hi) = (n / 4, 3 * n / 4);
    let shift = n / 2;
    let mut worst = 0.0f64;
    if spec.n == 1 {
        for j in lo..hi {
            worst = worst.max((small.values[j] - large.values[j + shift]).abs());
        }
    } else {
        let nb = big.points;
        for i in lo..hi {
            for j in lo..hi {
                let a = small.values[i * n + j];
                let b = large.values[(i + shift) * nb + j + shift];
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}
