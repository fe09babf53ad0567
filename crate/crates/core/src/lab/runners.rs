//! One runner per command. Runners never abort on a module error: the error
//! becomes a failed check and the remaining work continues.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{CriteriaParams, Example4Params, KernelVerifyParams, OdeParams, PdeParams, SweepParams};
use super::{Checks, OutputFile};
use crate::error::{Error, Result};
use crate::example4::{
    build, check_convexity_window, check_f_monotone, report_csv, report_rows, step3_divergence, step4_diagonal_ratio,
    step4_threshold,
};
use crate::kernel::{
    inversion, kernel_mass, kernel_radial, kernel_ratio_bound_check, radial_monotone_check, radial_profile_csv, Field,
    GridSpec, KernelSpec, RadialProfile, SpectralOperator,
};
use crate::nonlinearity::{check_hypotheses, classify, sugitani_liminf, Nonlinearity, SampleGrid};
use crate::numeric::linear_fit;
use crate::ode::{aggregate_runs, integrate, ode_blowup_property, volterra_residual, OdeProblem, OdeTrace, SampledRun};
use crate::pde::{
    duhamel_order, evolve, jensen_check, moment_functional, pde_blowup_property, supersolution_iterate, PdeProblem,
};
use crate::verdict::{Verdict, VerdictKind};

/// Short description of a nonlinearity, free of commas.
pub fn label(f: &Nonlinearity) -> String {
    match f {
        Nonlinearity::PowerLaw { p } => format!("u^{p}"),
        Nonlinearity::Linear { c } => format!("{c}u"),
        Nonlinearity::LogCorrected(lc) => format!("log_corrected beta={} c0={}", lc.beta, lc.c0),
        Nonlinearity::Stepwise(c) => {
            let p = c.params();
            format!("stepwise p={} theta={}", p.p, p.theta)
        }
        Nonlinearity::Custom(t) => format!("custom {} knots", t.log_u.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    /// At least one side is undetermined.
    NotComparable,
}

impl Agreement {
    pub fn name(&self) -> &'static str {
        match self {
            Agreement::Agree => "agree",
            Agreement::Disagree => "disagree",
            Agreement::NotComparable => "not_comparable",
        }
    }
}

/// Compares a run verdict with the criterion verdict; undetermined verdicts
/// are never counted as disagreements.
pub fn agreement(criterion: &Verdict, other: &Verdict) -> Agreement {
    if !criterion.is_determined() || !other.is_determined() {
        Agreement::NotComparable
    } else if criterion.kind() == other.kind() {
        Agreement::Agree
    } else {
        Agreement::Disagree
    }
}

fn kind_name(k: VerdictKind) -> &'static str {
    match k {
        VerdictKind::BlowUp => "blow_up",
        VerdictKind::Global => "global",
        VerdictKind::Undetermined => "undetermined",
    }
}

fn cell(r: &Result<Verdict>) -> &'static str {
    match r {
        Ok(v) => kind_name(v.kind()),
        Err(_) => "error",
    }
}

fn describe(r: &Result<Verdict>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => format!("error: {e}"),
    }
}

/// Quotes a free-text CSV field.
fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'").replace('\n', " "))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn push_file(files: &mut Vec<OutputFile>, name: impl Into<String>, contents: String) {
    files.push(OutputFile {
        name: name.into(),
        contents,
    });
}

pub(super) fn criteria(p: &CriteriaParams, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    let results: Vec<Result<Verdict>> = p.cases.par_iter().map(|c| classify(&c.f, c.alpha, c.n)).collect();
    let mut csv = String::from("f,alpha,n,p_alpha,verdict,expected,detail\n");
    for (c, r) in p.cases.iter().zip(&results) {
        let expected = c.expected.map(kind_name).unwrap_or("");
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            label(&c.f),
            c.alpha,
            c.n,
            1.0 + c.alpha / c.n as f64,
            cell(r),
            expected,
            quoted(&describe(r))
        )
        .expect("write to string");
        let name = format!("criterion {} at alpha={} n={}", label(&c.f), c.alpha, c.n);
        match (r, c.expected) {
            (Ok(v), Some(k)) => checks.push(name, v.kind() == k, format!("{v}; expected {}", kind_name(k))),
            (Ok(v), None) => checks.push(name, true, v.to_string()),
            (Err(e), _) => checks.push(name, false, e.to_string()),
        }
    }
    push_file(files, "criteria.csv", csv);
}

struct OdeCell {
    run: SampledRun,
    trace: Option<OdeTrace>,
    volterra: Option<f64>,
}

fn ode_cells(f: &Nonlinearity, p: &OdeParams) -> Result<Vec<OdeCell>> {
    let pairs: Vec<(f64, f64)> = p
        .sample
        .t0
        .iter()
        .flat_map(|&t0| p.sample.x0.iter().map(move |&x0| (x0, t0)))
        .collect();
    pairs
        .par_iter()
        .map(|&(x0, t0)| {
            let prob = OdeProblem::new(f.clone(), p.alpha, p.n, t0, x0)?;
            let (verdict, trace) = match integrate(&prob, &p.budget) {
                Ok(tr) => (tr.verdict.clone(), Some(tr)),
                Err(Error::StepUnderflow { t, h }) => (
                    Verdict::undetermined(format!("step underflow at t = {t} (h = {h})")),
                    None,
                ),
                Err(e) => return Err(e),
            };
            let volterra = match &trace {
                Some(tr) if tr.verdict.is_global() => Some(volterra_residual(tr, &prob)?.max_residual),
                _ => None,
            };
            Ok(OdeCell {
                run: SampledRun { x0, t0, verdict },
                trace: if p.write_traces { trace } else { None },
                volterra,
            })
        })
        .collect()
}

/// The rule for a sampled ODE verdict against the criterion: determined
/// verdicts must agree; an undetermined ODE verdict is accepted only when
/// the criterion predicts blow-up (a horizon-limited run without a global
/// witness).
fn judge_against_criterion(criterion: &Result<Verdict>, ode: &Verdict) -> (bool, String) {
    let c = match criterion {
        Ok(c) => c,
        Err(e) => return (false, format!("criterion error: {e}")),
    };
    let detail = format!("ode {ode}; criterion {c}");
    match agreement(c, ode) {
        Agreement::Agree => (true, detail),
        Agreement::Disagree => (false, detail),
        Agreement::NotComparable if !ode.is_determined() && c.is_blow_up() => {
            (true, format!("{detail} (horizon-limited, no global witness)"))
        }
        Agreement::NotComparable if !c.is_determined() => (true, format!("{detail} (criterion undetermined)")),
        Agreement::NotComparable => (false, format!("{detail} (no global witness within budget)")),
    }
}

pub(super) fn ode(p: &OdeParams, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    let mut runs_csv = String::from("f,x0,t0,verdict,t_star,decay_exponent,volterra_residual\n");
    let mut summary = String::from("f,ode,criterion,agree\n");
    for (idx, f) in p.nonlinearities.iter().enumerate() {
        let name = label(f);
        let Some(cells) = checks.ok(&format!("ode {name}"), ode_cells(f, p)) else {
            continue;
        };
        for (k, c) in cells.iter().enumerate() {
            let v = &c.run.verdict;
            writeln!(
                runs_csv,
                "{name},{},{},{},{},{},{}",
                c.run.x0,
                c.run.t0,
                kind_name(v.kind()),
                opt(v.t_star()),
                opt(v.decay_exponent()),
                opt(c.volterra)
            )
            .expect("write to string");
            if let Some(tr) = &c.trace {
                push_file(files, format!("ode_trace_{idx}_{k}.csv"), tr.to_csv());
            }
        }
        let runs: Vec<SampledRun> = cells.iter().map(|c| c.run.clone()).collect();
        let verdict = aggregate_runs(&runs);
        if p.compare_criterion {
            let criterion = classify(f, p.alpha, p.n);
            let (passed, detail) = judge_against_criterion(&criterion, &verdict);
            let agree = match &criterion {
                Ok(c) => agreement(c, &verdict).name(),
                Err(_) => "error",
            };
            writeln!(
                summary,
                "{name},{},{},{agree}",
                kind_name(verdict.kind()),
                cell(&criterion)
            )
            .expect("write to string");
            checks.push(format!("ode {name}"), passed, detail);
        } else {
            writeln!(summary, "{name},{},,", kind_name(verdict.kind())).expect("write to string");
            checks.push(format!("ode {name}"), true, verdict.to_string());
        }
        let residuals: Vec<f64> = cells.iter().filter_map(|c| c.volterra).collect();
        if !residuals.is_empty() {
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            checks.push(
                format!("volterra {name}"),
                worst <= p.volterra_tol,
                format!(
                    "max residual {worst:.3e} over {} global runs (tol {:.1e})",
                    residuals.len(),
                    p.volterra_tol
                ),
            );
        }
    }
    push_file(files, "ode_runs.csv", runs_csv);
    push_file(files, "ode_summary.csv", summary);
}

fn profile_csv(u: &Field) -> String {
    let mut out = if u.dim == 1 {
        String::from("x,u\n")
    } else {
        String::from("x,y,u\n")
    };
    for (k, v) in u.values.iter().enumerate() {
        let x = u.point(k);
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{v:e}", coords.join(",")).expect("write to string");
    }
    out
}

pub(super) fn pde(p: &PdeParams, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    let Some(prob) = checks.ok("pde problem", p.problem()) else {
        return;
    };
    let trace = match evolve(&prob, &p.budget) {
        Ok(t) => t,
        Err(e) => {
            checks.push("pde evolve", false, e.to_string());
            return;
        }
    };
    push_file(files, "pde_trace.csv", trace.to_csv());
    if let Some(last) = trace.snapshots.last() {
        push_file(files, "profile_final.csv", profile_csv(last));
    }
    if let Some(z) = checks.ok("moment functional", moment_functional(&trace, &prob)) {
        let mut csv = String::from("t,z\n");
        for (t, v) in z {
            writeln!(csv, "{t},{v:e}").expect("write to string");
        }
        push_file(files, "moments.csv", csv);
    }
    let d = trace.diagnostics;
    let verdict_detail = format!(
        "{}; {} steps accepted, {} rejected; inner mass fraction >= {}",
        trace.verdict, d.steps_accepted, d.steps_rejected, d.min_inner_mass
    );
    match p.expected {
        Some(k) => checks.push(
            "pde verdict",
            trace.verdict.kind() == k,
            format!("{verdict_detail}; expected {}", kind_name(k)),
        ),
        None => checks.push("pde verdict", true, verdict_detail),
    }

    if let Some(gb) = p.global_bound {
        match global_bound(&trace.snapshots, &prob, gb.factor) {
            Ok((worst, at, csv)) => {
                push_file(files, "global_bound.csv", csv);
                checks.push(
                    "global bound",
                    worst <= gb.tol,
                    format!(
                        "max(u - {}S(t)phi) = {worst:.3e} at t = {at} over {} snapshots (tol {:.1e})",
                        gb.factor,
                        trace.snapshots.len(),
                        gb.tol
                    ),
                );
            }
            Err(e) => checks.push("global bound", false, e.to_string()),
        }
    }

    if let Some(sc) = p.decay_slope {
        let reached = trace.times.last().copied().unwrap_or(0.0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = trace
            .times
            .iter()
            .zip(&trace.sup_norms)
            .filter(|(t, s)| **t >= sc.t_from && **t <= sc.t_to && **s > 0.0)
            .map(|(t, s)| (t.ln(), s.ln()))
            .unzip();
        match linear_fit(&xs, &ys) {
            Some(fit) if reached >= sc.t_to * (1.0 - 1e-12) => checks.push(
                "decay slope",
                (fit.slope - sc.slope).abs() <= sc.tol,
                format!(
                    "slope {:.4} on [{}, {}] from {} samples (expected {} +- {})",
                    fit.slope,
                    sc.t_from,
                    sc.t_to,
                    xs.len(),
                    sc.slope,
                    sc.tol
                ),
            ),
            _ => checks.push(
                "decay slope",
                false,
                format!("run ended at t = {reached} with {} samples in the window", xs.len()),
            ),
        }
    }

    if let Some(opts) = &p.supersolution {
        match supersolution_iterate(&prob, opts) {
            Ok(r) => {
                let mut csv = String::from("iterate,sup\n");
                for (k, s) in r.iterate_sups.iter().enumerate() {
                    writeln!(csv, "{k},{s:e}").expect("write to string");
                }
                push_file(files, "supersolution.csv", csv);
                checks.push(
                    "supersolution monotone",
                    r.monotone,
                    format!("iterate sups {:?}", r.iterate_sups),
                );
                let w_sup = r.iterate_sups.first().copied().unwrap_or(0.0);
                checks.push(
                    "supersolution inequality",
                    r.supersolution_slack <= 1e-12 * (1.0 + w_sup),
                    format!(
                        "max(F(w) - w) = {:.3e}; limit gap {:.3e}",
                        r.supersolution_slack, r.limit_gap
                    ),
                );
                checks.push(
                    "small data",
                    r.data_norm <= r.rho,
                    format!(
                        "data norm {:.4e} <= rho {:.4e} (tau {:.4e}, c2 {:.4e}, fitted {:.4e})",
                        r.data_norm, r.rho, r.tau, r.c2, r.c2_fitted
                    ),
                );
            }
            Err(e) => checks.push("supersolution", false, e.to_string()),
        }
    }

    if let Some(dc) = p.duhamel {
        match duhamel_order(&trace, &prob, dc.t) {
            Ok(o) => checks.push(
                "duhamel residual",
                o.fine <= dc.tol && (dc.ratio_min..=dc.ratio_max).contains(&o.ratio()),
                format!(
                    "residual {:.3e} (tol {:.1e}); doubled-spacing residual {:.3e}, ratio {:.3} in [{}, {}]",
                    o.fine,
                    dc.tol,
                    o.coarse,
                    o.ratio(),
                    dc.ratio_min,
                    dc.ratio_max
                ),
            ),
            Err(e) => checks.push("duhamel residual", false, e.to_string()),
        }
    }

    if p.jensen && prob.f.known_convex() {
        let results: Vec<Result<f64>> = trace
            .snapshots
            .par_iter()
            .filter(|s| s.time > 0.0)
            .map(|s| jensen_check(s, &prob, s.time).map(|j| j.lhs - j.rhs))
            .collect();
        let failures: Vec<String> = results
            .iter()
            .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
            .collect();
        let margin = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .copied()
            .fold(f64::INFINITY, f64::min);
        checks.push(
            "jensen",
            failures.is_empty() && !results.is_empty(),
            if failures.is_empty() {
                format!("{} snapshots; smallest margin {margin:.3e}", results.len())
            } else {
                failures.join("; ")
            },
        );
    }

    if let Some(rc) = p.refinement {
        let refined = PdeParams {
            grid: p.grid.refined(),
            budget: p.budget.refined(),
            ..p.clone()
        };
        let result = refined.problem().and_then(|prob| evolve(&prob, &refined.budget));
        match result {
            Ok(fine) => {
                let same = fine.verdict.kind() == trace.verdict.kind();
                let (passed, detail) = match (trace.verdict.t_star(), fine.verdict.t_star()) {
                    (Some(a), Some(b)) => {
                        let rel = (a - b).abs() / a;
                        (
                            same && rel <= rc.t_star_tol,
                            format!("t* = {a} -> {b} (relative change {rel:.3e}, tol {})", rc.t_star_tol),
                        )
                    }
                    _ => (same, format!("{} -> {}", trace.verdict, fine.verdict)),
                };
                checks.push("refinement", passed, detail);
            }
            Err(e) => checks.push("refinement", false, e.to_string()),
        }
    }
}

/// Largest `u - factor·S(t)φ` over the snapshots, its time, and the CSV
/// `t,excess`.
fn global_bound(snapshots: &[Field], prob: &PdeProblem, factor: f64) -> Result<(f64, f64, String)> {
    let op = SpectralOperator::new(prob.spec, prob.grid)?;
    let excess: Vec<(f64, f64)> = snapshots
        .par_iter()
        .map(|s| {
            let bound = op.apply(&prob.phi, s.time)?;
            let e = s
                .values
                .iter()
                .zip(&bound.values)
                .fold(f64::NEG_INFINITY, |m, (u, b)| m.max(u - factor * b));
            Ok((s.time, e))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("t,excess\n");
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for &(t, e) in &excess {
        writeln!(csv, "{t},{e:e}").expect("write to string");
        if e > worst.0 {
            worst = (e, t);
        }
    }
    Ok((worst.0, worst.1, csv))
}

pub(super) fn example4(p: &Example4Params, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    let params = &p.construction;
    let c = match build(params) {
        Ok(c) => c,
        Err(e) => {
            checks.push("construction", false, e.to_string());
            return;
        }
    };
    let (lo, hi) = params.theta_window();
    checks.push(
        "construction",
        true,
        format!(
            "theta = {} in ({lo}, {hi}); log delta = {}",
            params.theta,
            c.log_delta()
        ),
    );
    push_file(files, "example4_table.csv", report_csv(&c));
    let rows = report_rows(&c);
    let bad: Vec<u32> = rows.iter().filter(|r| !r.ordering).map(|r| r.i).collect();
    checks.push(
        "ordering",
        bad.is_empty(),
        format!(
            "u_(i+1) < v_i < u_i for i in [{}, {}]; failures {bad:?}",
            params.i_min, params.i_max
        ),
    );

    let (worst_defect, worst_i) = (params.i_min..=params.i_max)
        .map(|i| {
            let (dv, du) = c.joint_defects(i);
            (dv.max(du), i)
        })
        .fold((0.0f64, params.i_min), |a, b| if b.0 > a.0 { b } else { a });
    checks.push(
        "joint continuity",
        worst_defect <= p.joint_tol,
        format!(
            "largest log defect {worst_defect:.3e} at i = {worst_i} (tol {:.1e})",
            p.joint_tol
        ),
    );
    let kinks: Vec<u32> = (params.i_min..=params.i_max)
        .filter(|&i| {
            let (l, m, r) = c.joint_slopes(i);
            !(l <= m && m <= r)
        })
        .collect();
    checks.push("joint slopes", kinks.is_empty(), format!("non-convex joints {kinks:?}"));

    match check_convexity_window(params) {
        Ok(w) => checks.push(
            "convexity window",
            w.holds_from == params.i_min,
            format!(
                "holds from i = {} with bounds [{:.6}, {:.6}]",
                w.holds_from, w.lower, w.upper
            ),
        ),
        Err(e) => checks.push("convexity window", false, e.to_string()),
    }
    match check_f_monotone(params) {
        Ok(m) => checks.push(
            "F monotone",
            m.limit_ratio > 1.0,
            format!(
                "limit p/(theta(p-1)) = {:.6}; ratio >= 1 from i = {}",
                m.limit_ratio, m.holds_from
            ),
        ),
        Err(e) => checks.push("F monotone", false, e.to_string()),
    }
    match step3_divergence(params, p.partial_sum_index) {
        Ok(s) => checks.push(
            "partial sums",
            s > p.partial_sum_threshold,
            format!(
                "sum up to I = {} is {s:.6e} (threshold {:.1e})",
                p.partial_sum_index, p.partial_sum_threshold
            ),
        ),
        Err(e) => checks.push("partial sums", false, e.to_string()),
    }
    match step4_threshold(params) {
        Some(i0) => {
            let wrong: Vec<u32> = (i0..params.i_max)
                .filter(|&i| {
                    step4_diagonal_ratio(params, i)
                        .map(|r| r != -(2.0 * i as f64 + 1.0))
                        .unwrap_or(true)
                })
                .collect();
            checks.push(
                "diagonal ratio",
                wrong.is_empty(),
                format!(
                    "log ratio = -(2i+1) for i in [{i0}, {}), so the ratio falls to e^-{}; mismatches {wrong:?}",
                    params.i_max,
                    2 * params.i_max - 1
                ),
            );
        }
        None => checks.push("diagonal ratio", false, "membership fails at the last index"),
    }

    let f = Nonlinearity::Stepwise(Box::new(c.clone()));
    let mut ratio_csv = String::from("log_u,log_ratio\n");
    for k in 0..=480 {
        let lu = -(10f64.powf(k as f64 / 40.0));
        if let Ok(r) = f.log_ratio_to_power(lu, c.p_alpha()) {
            writeln!(ratio_csv, "{lu:e},{r:e}").expect("write to string");
        }
    }
    push_file(files, "example4_ratio.csv", ratio_csv);
    match sugitani_liminf(&f, params.alpha, params.n) {
        Ok(l) => checks.push("sugitani liminf", l == 0.0, format!("liminf f/u^p_alpha = {l:e}")),
        Err(e) => checks.push("sugitani liminf", false, e.to_string()),
    }
    if p.hypotheses {
        let (p_s, c0) = f.default_scaling();
        match check_hypotheses(&f, &SampleGrid::for_nonlinearity(&f), p_s, c0) {
            Ok(h) => checks.push(
                "hypotheses",
                h.all_hold(),
                format!(
                    "M {} C {} B {} S {}; {} samples, {} pairs",
                    h.monotone_m, h.convex_c, h.ode_blowup_b, h.scaling_s.holds, h.samples_used, h.pairs_tested
                ),
            ),
            Err(e) => checks.push("hypotheses", false, e.to_string()),
        }
    }
    let v = classify(&f, params.alpha, params.n);
    checks.push("classify", matches!(&v, Ok(v) if v.is_blow_up()), describe(&v));
}

pub(super) fn kernel_verify(p: &KernelVerifyParams, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    for spec in &p.kernels {
        let tag = format!("alpha={} n={}", spec.alpha, spec.n);
        let grid = if spec.n == 1 { p.grid_1d } else { p.grid_2d };

        let mass = kernel_mass(spec, 1.0);
        let periodic = SpectralOperator::new(*spec, grid)
            .and_then(|op| op.kernel_field(1.0))
            .map(|k| k.mass());
        match (mass, periodic) {
            (Ok(m), Ok(pm)) => checks.push(
                format!("mass {tag}"),
                (m - 1.0).abs() <= p.mass_tol && (pm - 1.0).abs() <= p.mass_tol,
                format!(
                    "profile mass {m:.15}; periodic kernel mass {pm:.15} (tol {:.1e})",
                    p.mass_tol
                ),
            ),
            (Err(e), _) | (_, Err(e)) => checks.push(format!("mass {tag}"), false, e.to_string()),
        }

        match scaling_deviation(spec) {
            Ok(dev) => checks.push(
                format!("scaling {tag}"),
                dev <= p.scaling_tol,
                format!(
                    "max relative deviation {dev:.3e} from t^(-n/alpha) P(t^(-1/alpha) r) (tol {:.1e})",
                    p.scaling_tol
                ),
            ),
            Err(e) => checks.push(format!("scaling {tag}"), false, e.to_string()),
        }

        match composition_deviation(spec, grid) {
            Ok(dev) => checks.push(
                format!("semigroup {tag}"),
                dev <= p.semigroup_tol,
                format!(
                    "sup |S(0.7)S(0.3)phi - S(1)phi| = {dev:.3e} (tol {:.1e})",
                    p.semigroup_tol
                ),
            ),
            Err(e) => checks.push(format!("semigroup {tag}"), false, e.to_string()),
        }

        match radial_monotone_check(spec, 1.0) {
            Ok(ok) => checks.push(format!("radial monotone {tag}"), ok, "r -> K(r, 1) on 5000 radii"),
            Err(e) => checks.push(format!("radial monotone {tag}"), false, e.to_string()),
        }

        if let Some(csv) = checks.ok(
            &format!("profile {tag}"),
            radial_profile_csv(spec, 1.0, p.profile_r_max, p.profile_points),
        ) {
            push_file(
                files,
                format!("kernel_profile_alpha{}_n{}.csv", spec.alpha, spec.n),
                csv,
            );
        }
    }

    let mut cells = Vec::new();
    for &alpha in &p.ratio_alphas {
        for &s in &p.ratio_s {
            for &t in &p.ratio_t {
                cells.push((alpha, s, t));
            }
        }
    }
    let ratios: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(alpha, s, t)| {
            let spec = KernelSpec::new(alpha, 1)?;
            match kernel_ratio_bound_check(&spec, p.grid_1d, s, t) {
                Ok(b) => Ok(b.min_ratio),
                Err(Error::BoundViolated { ratio, .. }) => Ok(ratio),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut csv = String::from("alpha,s,t,min_ratio\n");
    let mut worst = f64::INFINITY;
    let mut errors = Vec::new();
    for (&(alpha, s, t), r) in cells.iter().zip(&ratios) {
        match r {
            Ok(m) => {
                writeln!(csv, "{alpha},{s},{t},{m:.15}").expect("write to string");
                worst = worst.min(*m);
            }
            Err(e) => errors.push(format!("alpha={alpha} s={s} t={t}: {e}")),
        }
    }
    push_file(files, "ratio_bound.csv", csv);
    checks.push(
        "kernel ratio bound",
        errors.is_empty() && worst >= 1.0 - p.ratio_tol,
        if errors.is_empty() {
            format!(
                "smallest ratio {worst:.12} over {} (alpha, s, t) cells (tol {:.1e})",
                cells.len(),
                p.ratio_tol
            )
        } else {
            errors.join("; ")
        },
    );

    match cauchy_deviation() {
        Ok(dev) => checks.push(
            "cauchy profile",
            dev <= p.cauchy_tol,
            format!(
                "max relative deviation of the alpha = 1 profile from 1/(pi(1+r^2)): {dev:.3e} (tol {:.1e})",
                p.cauchy_tol
            ),
        ),
        Err(e) => checks.push("cauchy profile", false, e.to_string()),
    }
}

/// Compares `K(r, t)` with `t^{-n/α}` times the directly integrated unit
/// profile at `t^{-1/α} r`.
fn scaling_deviation(spec: &KernelSpec) -> Result<f64> {
    let mut worst = 0.0f64;
    // off the table nodes of the profile
    for rho in [0.0, 0.3713, 1.9131, 7.7077] {
        for t in [0.1f64, 1.0, 10.0] {
            let r = rho * t.powf(1.0 / spec.alpha);
            let lhs = kernel_radial(spec, r, t)?;
            let rhs = t.powf(-(spec.n as f64) / spec.alpha) * inversion(spec.alpha, spec.n, rho)?;
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    Ok(worst)
}

fn composition_deviation(spec: &KernelSpec, grid: GridSpec) -> Result<f64> {
    let op = SpectralOperator::new(*spec, grid)?;
    let w = PI / grid.half_width * 4.0;
    let phi = Field::from_fn(grid, spec.n, |x| {
        x.iter().map(|c| (w * c).cos()).product::<f64>() + 1.0 + (-x.iter().map(|c| c * c).sum::<f64>()).exp()
    })?;
    let two = op.apply(&op.apply(&phi, 0.3)?, 0.7)?;
    let one = op.apply(&phi, 1.0)?;
    Ok(two.sup_distance(&one))
}

fn cauchy_deviation() -> Result<f64> {
    let profile = RadialProfile::build(1.0, 1)?;
    let mut worst = 0.0f64;
    let mut r = 0.0;
    while r <= 60.0 {
        let exact = 1.0 / (PI * (1.0 + r * r));
        worst = worst.max((profile.eval(r) - exact).abs() / exact);
        r += 0.0731;
    }
    for r in [0.0, 1.0, 7.5, 100.0] {
        let exact = 1.0 / (PI * (1.0 + r * r));
        worst = worst.max((inversion(1.0, 1, r)? - exact).abs() / exact);
    }
    Ok(worst)
}

struct SweepRow {
    family: &'static str,
    param: f64,
    alpha: f64,
    n: u32,
    criterion: Result<Verdict>,
    ode: Result<Verdict>,
    pde: Option<Result<Verdict>>,
}

impl SweepRow {
    fn agree(&self) -> &'static str {
        let Ok(c) = &self.criterion else { return "n/a" };
        let mut any = false;
        for v in std::iter::once(&self.ode).chain(self.pde.as_ref()).flatten() {
            match agreement(c, v) {
                Agreement::Disagree => return "no",
                Agreement::Agree => any = true,
                Agreement::NotComparable => {}
            }
        }
        if any {
            "yes"
        } else {
            "n/a"
        }
    }

    fn errors(&self) -> Vec<String> {
        std::iter::once(("criterion", &self.criterion))
            .chain(std::iter::once(("ode", &self.ode)))
            .chain(self.pde.as_ref().map(|p| ("pde", p)))
            .filter_map(|(k, r)| r.as_ref().err().map(|e| format!("{k}: {e}")))
            .collect()
    }
}

pub(super) fn sweep(p: &SweepParams, checks: &mut Checks, files: &mut Vec<OutputFile>) {
    let mut tasks = Vec::new();
    for c in &p.cells {
        for fam in &p.families {
            for (param, f) in fam.members(c.alpha, c.n) {
                tasks.push((fam.name(), param, c.alpha, c.n, f));
            }
        }
    }
    let rows: Vec<SweepRow> = tasks
        .into_par_iter()
        .map(|(family, param, alpha, n, f)| {
            let f = match f {
                Ok(f) => f,
                Err(e) => {
                    let msg = e.to_string();
                    return SweepRow {
                        family,
                        param,
                        alpha,
                        n,
                        criterion: Err(Error::InvalidParameter(msg.clone())),
                        ode: Err(Error::InvalidParameter(msg)),
                        pde: None,
                    };
                }
            };
            let criterion = classify(&f, alpha, n);
            let ode = ode_blowup_property(&f, alpha, n, &p.sample, &p.ode_budget);
            let pde = p.pde.as_ref().map(|ps| {
                let spec = KernelSpec::new(alpha, n)?;
                let grid = ps.grid.unwrap_or_else(|| GridSpec::default_for(n));
                pde_blowup_property(&f, &spec, grid, &ps.family, &ps.budget)
            });
            log::info!("{family} {param} at alpha = {alpha}, n = {n} done");
            SweepRow {
                family,
                param,
                alpha,
                n,
                criterion,
                ode,
                pde,
            }
        })
        .collect();

    let mut csv = String::from("family,param,alpha,n,criterion,ode,pde,agree\n");
    let (mut agree, mut disagree, mut open) = (0, 0, 0);
    for r in &rows {
        let pde = r.pde.as_ref().map(cell).unwrap_or("");
        writeln!(
            csv,
            "{},{},{},{},{},{},{pde},{}",
            r.family,
            r.param,
            r.alpha,
            r.n,
            cell(&r.criterion),
            cell(&r.ode),
            r.agree()
        )
        .expect("write to string");
        match r.agree() {
            "yes" => agree += 1,
            "no" => disagree += 1,
            _ => open += 1,
        }
        let errors = r.errors();
        let mut detail = format!("criterion {}; ode {}", describe(&r.criterion), describe(&r.ode));
        if let Some(pde) = &r.pde {
            write!(detail, "; pde {}", describe(pde)).expect("write to string");
        }
        checks.push(
            format!("cell {} {} at alpha={} n={}", r.family, r.param, r.alpha, r.n),
            errors.is_empty() && r.agree() != "no",
            detail,
        );
    }
    push_file(files, "agreement.csv", csv);
    checks.push(
        "agreement matrix",
        disagree == 0,
        format!("{agree} agree, {disagree} disagree, {open} not comparable"),
    );
}
