//! Typed parameters of each command. Every struct is filled from defaults
//! field by field, so a manifest only lists what it changes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example4::ExampleParams;
use crate::kernel::{GridSpec, KernelSpec};
use crate::nonlinearity::{validate_alpha_n, Nonlinearity};
use crate::ode::{OdeBudget, OdeSample};
use crate::pde::{PdeBudget, PdeProblem, PhiFamily, PhiShape, SupersolutionOptions};
use crate::verdict::VerdictKind;

fn p_alpha(alpha: f64, n: u32) -> f64 {
    1.0 + alpha / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaCase {
    pub f: Nonlinearity,
    pub alpha: f64,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<VerdictKind>,
}

/// `classify` on a list of cases. Default: the power-law boundary at
/// `p_α` and `p_α + 0.01` for four `(α, n)` cells, and the log-corrected
/// family around `β = 1` at `α = 2` and `α = 1` in one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaParams {
    pub cases: Vec<CriteriaCase>,
}

impl Default for CriteriaParams {
    fn default() -> Self {
        let mut cases = Vec::new();
        for (alpha, n) in [(2.0, 1), (1.0, 1), (1.0, 2), (0.5, 1)] {
            let pa = p_alpha(alpha, n);
            for (p, kind) in [(pa, VerdictKind::BlowUp), (pa + 0.01, VerdictKind::Global)] {
                cases.push(CriteriaCase {
                    f: Nonlinearity::PowerLaw { p },
                    alpha,
                    n,
                    expected: Some(kind),
                });
            }
        }
        for alpha in [2.0, 1.0] {
            for beta in [0.5, 0.9, 1.0, 1.1, 1.5] {
                let kind = if beta <= 1.0 {
                    VerdictKind::BlowUp
                } else {
                    VerdictKind::Global
                };
                cases.push(CriteriaCase {
                    f: Nonlinearity::log_corrected(alpha, 1, beta, 0.01).expect("valid log-corrected f"),
                    alpha,
                    n: 1,
                    expected: Some(kind),
                });
            }
        }
        CriteriaParams { cases }
    }
}

impl CriteriaParams {
    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Manifest("criteria: no cases".into()));
        }
        self.cases.iter().try_for_each(|c| validate_alpha_n(c.alpha, c.n))
    }
}

/// Sampled ODE runs per nonlinearity, compared with `classify`. Default:
/// `u^p` for `p ∈ {1.5, ..., 4}` at `α = 2`, `n = 1` (boundary at `p = 3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeParams {
    pub alpha: f64,
    pub n: u32,
    pub nonlinearities: Vec<Nonlinearity>,
    pub sample: OdeSample,
    pub budget: OdeBudget,
    pub compare_criterion: bool,
    /// Bound on the Volterra residual of every global run.
    pub volterra_tol: f64,
    pub write_traces: bool,
}

impl Default for OdeParams {
    fn default() -> Self {
        OdeParams {
            alpha: 2.0,
            n: 1,
            nonlinearities: [1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
                .into_iter()
                .map(|p| Nonlinearity::PowerLaw { p })
                .collect(),
            sample: OdeSample::standard(),
            budget: OdeBudget::default(),
            compare_criterion: true,
            volterra_tol: 1e-6,
            write_traces: false,
        }
    }
}

impl OdeParams {
    pub fn validate(&self) -> Result<()> {
        validate_alpha_n(self.alpha, self.n)?;
        if self.nonlinearities.is_empty() {
            return Err(Error::Manifest("ode: no nonlinearities".into()));
        }
        self.sample.validate()?;
        self.budget.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiParams {
    pub shape: PhiShape,
    pub amplitude: f64,
}

/// `u(t) <= factor · S(t)φ + tol` on every snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalBoundCheck {
    pub factor: f64,
    pub tol: f64,
}

impl Default for GlobalBoundCheck {
    fn default() -> Self {
        GlobalBoundCheck { factor: 2.0, tol: 1e-8 }
    }
}

/// Log-log slope of the sup-norm over `[t_from, t_to]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeCheck {
    pub t_from: f64,
    pub t_to: f64,
    pub slope: f64,
    pub tol: f64,
}

impl Default for SlopeCheck {
    fn default() -> Self {
        SlopeCheck {
            t_from: 1.0,
            t_to: 100.0,
            slope: -0.5,
            tol: 0.05,
        }
    }
}

/// Duhamel residual at `t` and its reduction when the nodes are doubled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelCheck {
    pub t: f64,
    pub tol: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for DuhamelCheck {
    fn default() -> Self {
        DuhamelCheck {
            t: 2.0,
            tol: 1e-4,
            ratio_min: 3.5,
            ratio_max: 4.5,
        }
    }
}

/// Re-run with `N → 2N` and the refined time budget; the verdict must
/// repeat and `t*` move by at most `t_star_tol` relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementCheck {
    pub t_star_tol: f64,
}

impl Default for RefinementCheck {
    fn default() -> Self {
        RefinementCheck { t_star_tol: 0.05 }
    }
}

/// One PDE evolution with optional checks. Default: the small-data global
/// bound for `u⁴`, `α = 2`, `n = 1` (Gaussian of amplitude 0.1 on
/// `[-160, 160)` with 2048 points, `t ≤ 100`); about a minute in release
/// builds, dominated by the supersolution iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeParams {
    pub f: Nonlinearity,
    pub alpha: f64,
    pub n: u32,
    pub grid: GridSpec,
    pub phi: PhiParams,
    pub budget: PdeBudget,
    pub expected: Option<VerdictKind>,
    pub global_bound: Option<GlobalBoundCheck>,
    pub decay_slope: Option<SlopeCheck>,
    pub supersolution: Option<SupersolutionOptions>,
    pub duhamel: Option<DuhamelCheck>,
    /// Jensen inequality on every stored snapshot (convex `f` only).
    pub jensen: bool,
    pub refinement: Option<RefinementCheck>,
}

impl Default for PdeParams {
    fn default() -> Self {
        let mut snapshot_times: Vec<f64> = (1..=64).map(|j| j as f64 / 32.0).collect();
        snapshot_times.extend((3..=100).map(f64::from));
        PdeParams {
            f: Nonlinearity::PowerLaw { p: 4.0 },
            alpha: 2.0,
            n: 1,
            grid: GridSpec {
                half_width: 160.0,
                points: 2048,
            },
            phi: PhiParams {
                shape: PhiShape::Gaussian,
                amplitude: 0.1,
            },
            budget: PdeBudget {
                t_max: 100.0,
                tol: 1e-10,
                snapshot_times,
                ..PdeBudget::default()
            },
            expected: Some(VerdictKind::Global),
            global_bound: Some(GlobalBoundCheck::default()),
            decay_slope: Some(SlopeCheck::default()),
            supersolution: Some(SupersolutionOptions::default()),
            duhamel: Some(DuhamelCheck::default()),
            jensen: true,
            refinement: None,
        }
    }
}

impl PdeParams {
    pub fn problem(&self) -> Result<PdeProblem> {
        let spec = KernelSpec::new(self.alpha, self.n)?;
        let phi = self.phi.shape.field(self.grid, self.n, self.phi.amplitude)?;
        PdeProblem::new(self.f.clone(), spec, self.grid, phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.amplitude > 0.0 && self.phi.amplitude.is_finite()) {
            return Err(Error::Manifest(format!(
                "pde: amplitude {} must be positive",
                self.phi.amplitude
            )));
        }
        self.problem()?;
        self.budget.validate()
    }
}

/// The construction checks. Default: `α = 2`, `n = 1`, `p = 2`, `θ = 1.75`,
/// `q = 0.75`; a few seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example4Params {
    pub construction: ExampleParams,
    pub hypotheses: bool,
    /// The partial sums up to this index must exceed `partial_sum_threshold`.
    pub partial_sum_index: u32,
    pub partial_sum_threshold: f64,
    /// Tolerance on the continuity defects at the joints, in `log f`.
    pub joint_tol: f64,
}

impl Default for Example4Params {
    fn default() -> Self {
        Example4Params {
            construction: ExampleParams::new(2.0, 1, 2.0, 1.75),
            hypotheses: true,
            partial_sum_index: 8,
            partial_sum_threshold: 1e6,
            joint_tol: 1e-10,
        }
    }
}

impl Example4Params {
    /// Only the shape is checked here; window violations are reported as
    /// failed checks of the run.
    pub fn validate(&self) -> Result<()> {
        validate_alpha_n(self.construction.alpha, self.construction.n)?;
        if self.partial_sum_index < self.construction.i_min || self.partial_sum_index > self.construction.i_max {
            return Err(Error::Manifest(format!(
                "example4: partial_sum_index {} outside [{}, {}]",
                self.partial_sum_index, self.construction.i_min, self.construction.i_max
            )));
        }
        Ok(())
    }
}

/// A one-parameter family of nonlinearities for the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `u^p` for each `p`.
    Power { p: Vec<f64> },
    /// `u^{p_α + δ}` for each offset `δ`, relative to the cell's `p_α`.
    PowerOffset { offsets: Vec<f64> },
    /// `u^{p_α} (log 1/u)^{-β}` near zero for each `β`.
    LogCorrected { beta: Vec<f64>, c0: f64 },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Power { .. } => "power",
            FamilySpec::PowerOffset { .. } => "power_offset",
            FamilySpec::LogCorrected { .. } => "log_corrected",
        }
    }

    /// `(parameter, f)` for each member in the cell `(α, n)`.
    pub fn members(&self, alpha: f64, n: u32) -> Vec<(f64, Result<Nonlinearity>)> {
        match self {
            FamilySpec::Power { p } => p.iter().map(|&p| (p, Nonlinearity::power(p))).collect(),
            FamilySpec::PowerOffset { offsets } => offsets
                .iter()
                .map(|&d| (d, Nonlinearity::power(p_alpha(alpha, n) + d)))
                .collect(),
            FamilySpec::LogCorrected { beta, c0 } => beta
                .iter()
                .map(|&b| (b, Nonlinearity::log_corrected(alpha, n, b, *c0)))
                .collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            FamilySpec::Power { p } => p.len(),
            FamilySpec::PowerOffset { offsets } => offsets.len(),
            FamilySpec::LogCorrected { beta, .. } => beta.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub alpha: f64,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSweepParams {
    /// Defaults to `GridSpec::default_for(n)`.
    pub grid: Option<GridSpec>,
    pub family: PhiFamily,
    pub budget: PdeBudget,
}

impl Default for PdeSweepParams {
    fn default() -> Self {
        PdeSweepParams {
            grid: None,
            family: PhiFamily {
                amplitudes: vec![1e-3, 1e-2, 0.1, 1.0, 10.0],
                shapes: vec![PhiShape::Gaussian, PhiShape::MollifiedIndicator],
            },
            budget: PdeBudget::default(),
        }
    }
}

/// Criterion, ODE and (optionally) PDE verdicts on every family member in
/// every cell. Default: `u^p`, `p ∈ {1.5, ..., 4}`, and the log-corrected
/// family with `β ∈ {0.5, 1, 1.5}`, at `α = 2`, `n = 1`; ODE only, a few
/// seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub families: Vec<FamilySpec>,
    pub cells: Vec<SweepCell>,
    pub sample: OdeSample,
    pub ode_budget: OdeBudget,
    pub pde: Option<PdeSweepParams>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            families: vec![
                FamilySpec::Power {
                    p: vec![1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
                },
                FamilySpec::LogCorrected {
                    beta: vec![0.5, 1.0, 1.5],
                    c0: 0.01,
                },
            ],
            cells: vec![SweepCell { alpha: 2.0, n: 1 }],
            sample: OdeSample::standard(),
            ode_budget: OdeBudget::default(),
            pde: None,
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.families.iter().all(|f| f.len() == 0) || self.cells.is_empty() {
            return Err(Error::Manifest("dichotomy-sweep: empty families or cells".into()));
        }
        for c in &self.cells {
            validate_alpha_n(c.alpha, c.n)?;
            if self.pde.is_some() && c.n > 2 {
                return Err(Error::Manifest(format!(
                    "dichotomy-sweep: PDE runs need n <= 2, got {}",
                    c.n
                )));
            }
            for fam in &self.families {
                for (_, f) in fam.members(c.alpha, c.n) {
                    f?;
                }
            }
        }
        self.sample.validate()?;
        self.ode_budget.validate()?;
        if let Some(pde) = &self.pde {
            pde.family.validate()?;
            pde.budget.validate()?;
            if let Some(g) = pde.grid {
                g.validate()?;
            }
        }
        Ok(())
    }
}

/// Kernel identities. Default tolerances: mass `1e-9`, scaling `1e-8`
/// (relative), semigroup composition `1e-10`, ratio bound `1e-6`, Cauchy
/// profile `1e-8`; under a minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelVerifyParams {
    pub kernels: Vec<KernelSpec>,
    pub grid_1d: GridSpec,
    pub grid_2d: GridSpec,
    pub ratio_alphas: Vec<f64>,
    pub ratio_s: Vec<f64>,
    pub ratio_t: Vec<f64>,
    pub mass_tol: f64,
    pub scaling_tol: f64,
    pub semigroup_tol: f64,
    pub ratio_tol: f64,
    pub cauchy_tol: f64,
    pub profile_r_max: f64,
    pub profile_points: usize,
}

impl Default for KernelVerifyParams {
    fn default() -> Self {
        KernelVerifyParams {
            kernels: [(2.0, 1), (1.5, 1), (1.0, 1), (0.5, 1), (2.0, 2), (1.5, 2), (1.0, 2)]
                .into_iter()
                .map(|(alpha, n)| KernelSpec { alpha, n })
                .collect(),
            grid_1d: GridSpec {
                half_width: 40.0,
                points: 2048,
            },
            grid_2d: GridSpec {
                half_width: 16.0,
                points: 128,
            },
            ratio_alphas: vec![0.5, 1.0, 2.0],
            ratio_s: vec![0.1, 0.5, 1.0],
            ratio_t: vec![1.0, 2.0, 4.0],
            mass_tol: 1e-9,
            scaling_tol: 1e-8,
            semigroup_tol: 1e-10,
            ratio_tol: 1e-6,
            cauchy_tol: 1e-8,
            profile_r_max: 20.0,
            profile_points: 401,
        }
    }
}

impl KernelVerifyParams {
    pub fn validate(&self) -> Result<()> {
        for k in &self.kernels {
            k.validate()?;
            if k.n > 2 {
                return Err(Error::Manifest(format!("kernel-verify: n = {} not supported", k.n)));
            }
        }
        self.grid_1d.validate()?;
        self.grid_2d.validate()?;
        for &a in &self.ratio_alphas {
            validate_alpha_n(a, 1)?;
        }
        for &s in &self.ratio_s {
            for &t in &self.ratio_t {
                if !(s > 0.0 && s <= t) {
                    return Err(Error::Manifest(format!(
                        "kernel-verify: need 0 < s <= t, got s = {s}, t = {t}"
                    )));
                }
            }
        }
        if self.profile_points < 2 || !(self.profile_r_max > 0.0) {
            return Err(Error::Manifest(
                "kernel-verify: profile needs r_max > 0 and >= 2 points".into(),
            ));
        }
        Ok(())
    }
}
