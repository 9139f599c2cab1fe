//! Projection-type solver for the sample-average equilibrium inclusion
//! `0 ∈ F(f) + N_D(f)`, together with the residual, minimum OD disutilities
//! and complementarity diagnostics used to certify a solution.

use crate::disutility::{PenaltyMode, SaaOperator, ScenarioSet};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on [`natural_residual`].
    pub tol: f64,
    pub max_iter: usize,
    pub step0: f64,
    /// Step shrink factor on a rejected trial, in `(0, 1)`.
    pub backtrack: f64,
    /// Step growth factor after an accepted iteration, `>= 1`.
    pub growth: f64,
    /// Acceptance ratio `γ‖F(f) − F(y)‖ ≤ ν‖f − y‖`.
    pub nu: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            step0: 1.0,
            backtrack: 0.5,
            growth: 1.05,
            nu: 0.9,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || !(self.growth >= 1.0)
            || !(self.step0 > 0.0)
            || !(self.nu > 0.0 && self.nu < 1.0)
        {
            return Err(Error::InvalidParameter(format!("bad solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub f: Vec<f64>,
    pub v: Vec<f64>,
    /// Sample-average disutility at `f`.
    pub expected_disutility: Vec<f64>,
    /// Minimum disutility per OD pair.
    pub z_min: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖f − P_D(f − γ₀ F(f))‖∞` with the probe step `γ₀ = 1 / (1 + ‖F(f)‖∞)`.
pub fn natural_residual(net: &Network, f: &[f64], fval: &[f64]) -> Result<f64> {
    if fval.len() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: fval.len(),
        });
    }
    let scale = fval.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let gamma = 1.0 / (1.0 + scale);
    let trial: Vec<f64> = f.iter().zip(fval).map(|(x, g)| x - gamma * g).collect();
    let p = net.project_feasible(&trial)?;
    Ok(f.iter().zip(&p).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

pub fn min_od_disutilities(net: &Network, disutility: &[f64]) -> Vec<f64> {
    net.od_paths()
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|&r| disutility[r])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Solves the sample-average equilibrium from the uniform demand split.
pub fn solve(inst: &Instance, scenarios: &ScenarioSet, opts: &SolverOptions) -> Result<EquilibriumResult> {
    let op = SaaOperator::new(inst, scenarios)?;
    solve_operator(&op, &inst.network.uniform_split(), opts)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Extragradient iteration with Armijo-type step control, started from the
/// projection of `start`. A run that hits `max_iter` returns its best iterate
/// with `converged = false`.
pub fn solve_operator(op: &SaaOperator, start: &[f64], opts: &SolverOptions) -> Result<EquilibriumResult> {
    opts.validate()?;
    let net = op.network();
    let n = net.num_paths();
    let mut f = net.project_feasible(start)?;
    let mut ff = op.eval(&f)?;
    if ff.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(0));
    }
    let mut residual = natural_residual(net, &f, &ff)?;
    let mut best = (residual, f.clone(), ff.clone());
    let mut gamma = opts.step0;
    let mut trial = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut iterations = 0;

    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut dist;
        loop {
            for ((t, x), g) in trial.iter_mut().zip(&f).zip(&ff) {
                *t = x - gamma * g;
            }
            net.project_into(&trial, &mut y)?;
            op.eval_into(&y, &mut fy)?;
            if fy.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(iterations));
            }
            dist = l2(&f, &y);
            if dist == 0.0 || gamma * l2(&ff, &fy) <= opts.nu * dist {
                break;
            }
            gamma *= opts.backtrack;
            if gamma < f64::MIN_POSITIVE {
                return Err(Error::NonFinite(iterations));
            }
        }
        if dist == 0.0 {
            // f is a fixed point of the projected step
            residual = natural_residual(net, &f, &ff)?;
            best = (residual, f.clone(), ff.clone());
            break;
        }
        for ((t, x), g) in trial.iter_mut().zip(&f).zip(&fy) {
            *t = x - gamma * g;
        }
        net.project_into(&trial, &mut f)?;
        op.eval_into(&f, &mut ff)?;
        if ff.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(iterations));
        }
        residual = natural_residual(net, &f, &ff)?;
        if residual <= best.0 {
            best = (residual, f.clone(), ff.clone());
        }
        gamma *= opts.growth;
    }

    let (residual, f, fval) = best;
    let v = net.path_to_arc_flows(&f)?;
    let z_min = min_od_disutilities(net, &fval);
    Ok(EquilibriumResult {
        f,
        v,
        expected_disutility: fval,
        z_min,
        residual,
        iterations,
        converged: residual <= opts.tol,
    })
}

/// Role of a path at an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathClass {
    /// Carries flow at the minimum OD disutility.
    Used,
    /// Zero flow at the minimum OD disutility.
    Degenerate,
    /// Zero flow with a strictly larger disutility.
    Unused,
}

impl PathClass {
    pub fn classify(flow: f64, gap: f64, tol_flow: f64, tol_gap: f64) -> Self {
        if flow > tol_flow && gap.abs() <= tol_gap {
            PathClass::Used
        } else if flow <= tol_flow && gap > tol_gap {
            PathClass::Unused
        } else {
            PathClass::Degenerate
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PathClass::Used => "used",
            PathClass::Degenerate => "degenerate",
            PathClass::Unused => "unused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path: usize,
    pub od: usize,
    pub flow: f64,
    /// Expected disutility minus the OD minimum.
    pub gap: f64,
    pub class: PathClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityReport {
    pub records: Vec<PathRecord>,
    pub tol_gap: f64,
    violations: Vec<usize>,
}

impl ComplementarityReport {
    /// Paths breaking `gap ≥ −tol` or `f·gap ≤ tol·q`.
    pub fn violations(&self) -> &[usize] {
        &self.violations
    }

    pub fn verify(&self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Complementarity {
                paths: self.violations.clone(),
            })
        }
    }

    /// Largest gap among paths carrying more than `tol_flow`.
    pub fn max_used_gap(&self, tol_flow: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.flow > tol_flow)
            .map(|r| r.gap.abs())
            .fold(0.0, f64::max)
    }
}

pub fn complementarity_report(
    result: &EquilibriumResult,
    net: &Network,
    tol_flow: f64,
    tol_gap: f64,
) -> ComplementarityReport {
    let demands = net.demands();
    let mut violations = Vec::new();
    let records = net
        .paths()
        .iter()
        .enumerate()
        .map(|(r, p)| {
            let flow = result.f[r];
            let gap = result.expected_disutility[r] - result.z_min[p.od];
            if gap < -tol_gap || flow * gap > tol_gap * demands[p.od].max(1.0) {
                violations.push(r);
            }
            PathRecord {
                path: r,
                od: p.od,
                flow,
                gap,
                class: PathClass::classify(flow, gap, tol_flow, tol_gap),
            }
        })
        .collect();
    ComplementarityReport {
        records,
        tol_gap,
        violations,
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub t: f64,
    pub result: EquilibriumResult,
    /// `‖Δf_t − Δf_max‖∞`.
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Continuation {
    pub steps: Vec<ContinuationStep>,
    /// Solution under the max penalty.
    pub limit: EquilibriumResult,
}

/// Solves the smoothed problem for each `t` in a descending list, each solve
/// warm-started from the previous one, then the max-penalty problem from the
/// last solution; reports arc-flow distances to that limit.
pub fn t_continuation(
    inst: &Instance,
    scenarios: &ScenarioSet,
    t_list: &[f64],
    opts: &SolverOptions,
) -> Result<Continuation> {
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("continuation needs positive t values".into()));
    }
    if t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("continuation t values must be strictly descending".into()));
    }
    let base = SaaOperator::new(inst, scenarios)?;
    let mut start = inst.network.uniform_split();
    let mut solved = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let op = base.clone().with_penalty(inst.smoothed(t)?.penalty)?;
        let result = solve_operator(&op, &start, opts)?;
        start = result.f.clone();
        solved.push((t, result));
    }
    let mut max_cfg = inst.penalty.clone();
    max_cfg.mode = PenaltyMode::Max;
    let limit = solve_operator(&base.with_penalty(max_cfg)?, &start, opts)?;
    let steps = solved
        .into_iter()
        .map(|(t, result)| {
            let distance = result
                .v
                .iter()
                .zip(&limit.v)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            ContinuationStep { t, result, distance }
        })
        .collect();
    Ok(Continuation { steps, limit })
}

/// Largest componentwise relative deviation `|f_r − ref_r| / max(|ref_r|, 1)`.
pub fn relative_deviation(f: &[f64], reference: &[f64]) -> f64 {
    f.iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}
