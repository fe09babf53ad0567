//! Least-squares fits used for growth certificates and blow-up asymptotes.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`. Needs at least two
/// distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    let mut max_residual = 0.0f64;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss += r * r;
        max_residual = max_residual.max(r.abs());
    }
    Some(LinearFit {
        slope,
        intercept,
        rms: (ss / nf).sqrt(),
        max_residual,
    })
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Result of fitting `x(t) ≈ C (t* - t)^(-γ)` to trailing samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    /// Asymptote measured from the reference time of the offsets.
    pub t_star_offset: f64,
    pub gamma: f64,
    pub log_c: f64,
    /// RMS residual in `log x`.
    pub rms: f64,
}

/// Three-parameter fit of a power-law singularity. `offsets` are sample times
/// measured from a common reference (so that tiny remaining times stay
/// resolvable) and must be increasing; `log_x` are the matching `log x`.
///
/// For a fixed asymptote the problem is linear in `(log C, γ)`; the asymptote
/// itself is found by golden-section search over `log(t* - t_last)`.
pub fn fit_blowup(offsets: &[f64], log_x: &[f64]) -> Option<BlowupFit> {
    let n = offsets.len();
    if n < 4 || log_x.len() != n {
        return None;
    }
    let last = offsets[n - 1];
    let span = last - offsets[0];
    if !(span > 0.0) {
        return None;
    }
    let eval = |eta: f64| -> Option<LinearFit> {
        let t_star = last + eta.exp();
        let xs: Vec<f64> = offsets.iter().map(|t| (t_star - t).ln()).collect();
        linear_fit(&xs, log_x)
    };
    let min_gap = offsets
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let lo = (min_gap * 1e-6).max(f64::MIN_POSITIVE).ln();
    let hi = (span * 10.0).ln();
    // coarse scan, then refine around the best bracket
    let steps = 200;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=steps {
        let eta = lo + (hi - lo) * k as f64 / steps as f64;
        if let Some(fit) = eval(eta) {
            if fit.rms < best.0 {
                best = (fit.rms, eta);
            }
        }
    }
    let width = (hi - lo) / steps as f64;
    let (eta, _) = golden_section_min(
        |e| eval(e).map(|f| f.rms).unwrap_or(f64::INFINITY),
        best.1 - width,
        best.1 + width,
        80,
    );
    let fit = eval(eta)?;
    Some(BlowupFit {
        t_star_offset: last + eta.exp(),
        gamma: -fit.slope,
        log_c: fit.intercept,
        rms: fit.rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.rms < 1e-14);
    }

    #[test]
    fn recovers_blowup_asymptote() {
        // x = 3 (0.7 - t)^-1.5 sampled geometrically towards the singularity
        let t_star = 0.7;
        let offsets: Vec<f64> = (0..30).map(|k| t_star - 0.5 * 0.7f64.powi(k)).collect();
        let log_x: Vec<f64> = offsets.iter().map(|t| 3f64.ln() - 1.5 * (t_star - t).ln()).collect();
        let fit = fit_blowup(&offsets, &log_x).unwrap();
        assert!((fit.t_star_offset - t_star).abs() < 1e-9, "{fit:?}");
        assert!((fit.gamma - 1.5).abs() < 1e-6);
    }
}
