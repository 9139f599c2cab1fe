//! Sensitivity of equilibria to the capacity distribution: the generalized
//! influence function from the active-set linearization, a finite-difference
//! influence oracle, outlier sweeps and the distribution-shift experiment.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::disutility::{SaaOperator, ScenarioSet};
use crate::equilibrium::{solve, solve_operator, EquilibriumResult, PathClass, SolverOptions};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::Network;
use crate::stochastics::{contaminate, kantorovich_1d, sample_scenarios, CapacityModel, EmpiricalDistribution};

/// Largest degenerate set whose sign patterns are enumerated.
pub const MAX_DEGENERATE: usize = 12;

/// Partition of path indices at an equilibrium.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSets {
    /// Used paths at the OD minimum.
    pub i_plus: Vec<usize>,
    /// Unused paths at the OD minimum, plus any path fitting neither other set.
    pub i_zero: Vec<usize>,
    /// Unused paths with a strictly larger disutility.
    pub i_minus: Vec<usize>,
}

impl ActiveSets {
    pub fn is_strictly_complementary(&self) -> bool {
        self.i_zero.is_empty()
    }
}

/// Tolerances scaled to the problem: `1e-6·max q` on flows and
/// `1e-6·(1 + ‖û‖∞)` on gaps.
pub fn default_tolerances(net: &Network, result: &EquilibriumResult) -> (f64, f64) {
    let qmax = net.demands().into_iter().fold(0.0, f64::max);
    let umax = result.expected_disutility.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
    (1e-6 * qmax.max(1.0), 1e-6 * (1.0 + umax))
}

pub fn active_sets(result: &EquilibriumResult, net: &Network, tol_flow: f64, tol_gap: f64) -> ActiveSets {
    let mut sets = ActiveSets::default();
    for (r, p) in net.paths().iter().enumerate() {
        let gap = result.expected_disutility[r] - result.z_min[p.od];
        match PathClass::classify(result.f[r], gap, tol_flow, tol_gap) {
            PathClass::Used => sets.i_plus.push(r),
            PathClass::Degenerate => sets.i_zero.push(r),
            PathClass::Unused => sets.i_minus.push(r),
        }
    }
    sets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GifMethod {
    ActiveSet,
    FiniteDifference,
}

impl GifMethod {
    pub fn label(self) -> &'static str {
        match self {
            GifMethod::ActiveSet => "active-set-lcp",
            GifMethod::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GifResult {
    /// Path-flow change per unit contamination mass.
    pub direction: Vec<f64>,
    /// Change of the minimum OD disutilities.
    pub multiplier_direction: Vec<f64>,
    pub solved_by: GifMethod,
    pub sets: ActiveSets,
    /// `‖A⁻¹‖₂` of the accepted active-set system; infinite for the oracle.
    pub inverse_norm: f64,
}

/// Solution of one linearized active-set system.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetSolution {
    pub direction: Vec<f64>,
    pub multiplier_direction: Vec<f64>,
    pub inverse_norm: f64,
}

/// Solves, for `(Δf, Δz)`,
///
/// * `Σ_{r∈R_k} Δf_r = 0` for every OD pair `k`,
/// * `(J Δf)_r − Δz_k = b_r` on `I₊`,
/// * `Δf_r = 0` on `I₋`,
/// * `0 ≤ Δf_r ⊥ (J Δf − b)_r − Δz_k ≥ 0` on `I₀`,
///
/// the last by trying the `2^|I₀|` sign patterns in order and keeping the
/// first consistent one.
pub fn solve_active_set_system(
    net: &Network,
    jac: &DMatrix<f64>,
    b: &[f64],
    sets: &ActiveSets,
) -> Result<ActiveSetSolution> {
    let (n, w) = (net.num_paths(), net.num_od_pairs());
    if jac.nrows() != n || jac.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let degenerate = sets.i_zero.len();
    if degenerate > MAX_DEGENERATE {
        return Err(Error::DegenerateSetTooLarge {
            size: degenerate,
            cap: MAX_DEGENERATE,
        });
    }
    let od_of: Vec<usize> = net.paths().iter().map(|p| p.od).collect();
    let scale = 1.0 + jac.amax() + b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let slack = 1e-9 * scale;
    let mut any_regular = false;

    for mask in 0u32..(1u32 << degenerate) {
        // `free[r]` marks paths whose equilibrium equation is imposed
        let mut free = vec![false; n];
        for &r in &sets.i_plus {
            free[r] = true;
        }
        for (bit, &r) in sets.i_zero.iter().enumerate() {
            free[r] = mask & (1 << bit) != 0;
        }
        let mut a = DMatrix::zeros(n + w, n + w);
        let mut rhs = DVector::zeros(n + w);
        for r in 0..n {
            if free[r] {
                for s in 0..n {
                    a[(r, s)] = jac[(r, s)];
                }
                a[(r, n + od_of[r])] = -1.0;
                rhs[r] = b[r];
            } else {
                a[(r, r)] = 1.0;
            }
        }
        for (r, &k) in od_of.iter().enumerate() {
            a[(n + k, r)] = 1.0;
        }
        let sv = a.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-12 * smax) {
            continue;
        }
        any_regular = true;
        let Some(x) = a.lu().solve(&rhs) else { continue };
        let direction: Vec<f64> = x.rows(0, n).iter().copied().collect();
        let multiplier_direction: Vec<f64> = x.rows(n, w).iter().copied().collect();
        let consistent = sets.i_zero.iter().all(|&r| {
            if free[r] {
                direction[r] >= -slack
            } else {
                let row: f64 = (0..n).map(|s| jac[(r, s)] * direction[s]).sum();
                row - b[r] - multiplier_direction[od_of[r]] >= -slack
            }
        });
        if consistent {
            return Ok(ActiveSetSolution {
                direction,
                multiplier_direction,
                inverse_norm: 1.0 / smin,
            });
        }
    }
    Err(if any_regular {
        Error::NoConsistentPattern
    } else {
        Error::SingularActiveSet
    })
}

/// Generalized influence function of the equilibrium `result` of `op`
/// towards a point mass at the capacity scenario `outlier`.
///
/// The right-hand side is `b = φ(f*) − û(f*, ξ̃)`, the gap between the
/// sample-average disutility and the disutility under the outlier alone.
pub fn gif_solve(op: &SaaOperator, result: &EquilibriumResult, outlier: &[f64], sets: &ActiveSets) -> Result<GifResult> {
    let phi = op.eval(&result.f)?;
    let single = op.mixed_with(outlier, 1.0)?.eval(&result.f)?;
    let b: Vec<f64> = phi.iter().zip(&single).map(|(p, u)| p - u).collect();
    let jac = op.jacobian(&result.f)?;
    let sol = solve_active_set_system(op.network(), &jac, &b, sets)?;
    Ok(GifResult {
        direction: sol.direction,
        multiplier_direction: sol.multiplier_direction,
        solved_by: GifMethod::ActiveSet,
        sets: sets.clone(),
        inverse_norm: sol.inverse_norm,
    })
}

/// Difference quotients of the equilibrium under the mixture
/// `(1 − ε)P_M + ε δ_ξ̃`, realized as a weighted sample average.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifference {
    pub direction: Vec<f64>,
    pub multiplier_direction: Vec<f64>,
    pub base: EquilibriumResult,
    pub mixed: EquilibriumResult,
}

/// Finite-difference influence at mass `eps` from an already solved `base`.
pub fn if_finite_difference_from(
    op: &SaaOperator,
    base: &EquilibriumResult,
    outlier: &[f64],
    eps: f64,
    opts: &SolverOptions,
) -> Result<FiniteDifference> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!("eps {eps} outside (0, 0.5)")));
    }
    let mixed = solve_operator(&op.mixed_with(outlier, eps)?, &base.f, opts)?;
    let quotient = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / eps).collect::<Vec<_>>();
    Ok(FiniteDifference {
        direction: quotient(&mixed.f, &base.f),
        multiplier_direction: quotient(&mixed.z_min, &base.z_min),
        base: base.clone(),
        mixed,
    })
}

/// Finite-difference influence at mass `eps`, solving the clean problem first.
pub fn if_finite_difference(
    op: &SaaOperator,
    outlier: &[f64],
    eps: f64,
    opts: &SolverOptions,
) -> Result<FiniteDifference> {
    let base = solve_operator(op, &op.network().uniform_split(), opts)?;
    if_finite_difference_from(op, &base, outlier, eps, opts)
}

/// Active-set influence at `base`, or the finite-difference oracle when the
/// equilibrium is too degenerate or not strongly regular.
pub fn influence(
    op: &SaaOperator,
    base: &EquilibriumResult,
    outlier: &[f64],
    eps: f64,
    opts: &SolverOptions,
) -> Result<GifResult> {
    let (tol_flow, tol_gap) = default_tolerances(op.network(), base);
    let sets = active_sets(base, op.network(), tol_flow, tol_gap);
    match gif_solve(op, base, outlier, &sets) {
        Ok(g) => Ok(g),
        Err(Error::DegenerateSetTooLarge { .. } | Error::SingularActiveSet | Error::NoConsistentPattern) => {
            let fd = if_finite_difference_from(op, base, outlier, eps, opts)?;
            Ok(GifResult {
                direction: fd.direction,
                multiplier_direction: fd.multiplier_direction,
                solved_by: GifMethod::FiniteDifference,
                sets,
                inverse_norm: f64::INFINITY,
            })
        }
        Err(e) => Err(e),
    }
}

/// One contamination level of a breakdown sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub m: usize,
    pub result: EquilibriumResult,
    /// `‖v_m − v_0‖∞` against the clean solve.
    pub deviation: f64,
}

/// Replaces the capacity of `arc` by `outlier` in `m` scenarios for every
/// `m` in `m_list` and solves each contaminated problem from the uniform
/// split. The contaminated index sets are nested in `m`.
pub fn breakdown_sweep(
    inst: &Instance,
    scenarios: &ScenarioSet,
    arc: usize,
    m_list: &[usize],
    outlier: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(EquilibriumResult, Vec<BreakdownRow>)> {
    let clean = solve(inst, scenarios, opts)?;
    let rows = m_list
        .par_iter()
        .map(|&m| {
            let contaminated = contaminate(scenarios, arc, m, outlier, seed)?;
            let result = solve(inst, &contaminated, opts)?;
            let deviation = result
                .v
                .iter()
                .zip(&clean.v)
                .fold(0.0_f64, |d, (a, b)| d.max((a - b).abs()));
            Ok(BreakdownRow { m, result, deviation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((clean, rows))
}

/// Default outlier for a breakdown sweep on an arc: six standard deviations
/// below the nominal capacity, floored like a sample.
pub fn default_outlier(model: &CapacityModel) -> f64 {
    match model {
        CapacityModel::Normal { sigma, .. } | CapacityModel::PerturbedTail { sigma, .. } => {
            model.quantile(0.0).max(model.nominal() - 6.0 * sigma)
        }
        CapacityModel::Mixture { base, .. } => default_outlier(base),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftExperimentConfig {
    /// Number of replications.
    pub l: usize,
    /// Scenarios per replication.
    pub m: usize,
    /// Replication counts at which the ratio is reported; each at most `l`.
    pub l_grid: Vec<usize>,
    pub target_arc: usize,
    /// Law of the target arc under the perturbed distribution. All other
    /// arcs keep their instance laws.
    pub perturbed: CapacityModel,
    pub seed: u64,
    /// Size of the quantile grids representing both laws.
    pub grid_points: usize,
    pub opts: SolverOptions,
}

impl ShiftExperimentConfig {
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.l < 2 || self.m < 1 {
            return Err(Error::InvalidParameter(format!(
                "shift experiment needs L >= 2 and M >= 1 (L={}, M={})",
                self.l, self.m
            )));
        }
        if self.l_grid.iter().any(|&x| x == 0 || x > self.l) {
            return Err(Error::InvalidParameter(format!("L grid {:?} must lie in 1..={}", self.l_grid, self.l)));
        }
        if self.target_arc >= inst.network.num_arcs() {
            return Err(Error::DimensionMismatch {
                expected: inst.network.num_arcs(),
                got: self.target_arc,
            });
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidParameter("quantile grid needs at least one point".into()));
        }
        self.perturbed.validate()?;
        self.opts.validate()
    }
}

/// Seed of replication `index`, read from a dedicated stream of the master seed.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(u64::MAX);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReplication {
    pub index: usize,
    pub seed: u64,
    /// Target-arc flow at the equilibrium under the base sample.
    pub v_base: f64,
    /// Target-arc flow at the equilibrium under the perturbed sample.
    pub v_perturbed: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRatio {
    pub l: usize,
    pub delta1: f64,
    /// `None` when the two capacity laws coincide.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOutcome {
    /// W1 distance between the two target-arc capacity laws.
    pub delta2: f64,
    pub replications: Vec<ShiftReplication>,
    pub ratios: Vec<ShiftRatio>,
    pub base_flows: EmpiricalDistribution,
    pub perturbed_flows: EmpiricalDistribution,
}

/// For each replication, draws one base and one perturbed sample from the
/// same seed (common random numbers) and records the target-arc equilibrium
/// flow under each; then compares the flow distributions against the
/// distance between the capacity laws.
pub fn shift_ratio_experiment(inst: &Instance, cfg: &ShiftExperimentConfig) -> Result<ShiftOutcome> {
    cfg.validate(inst)?;
    let arc = cfg.target_arc;
    let base_law = &inst.capacity[arc];
    let delta2 = kantorovich_1d(
        &EmpiricalDistribution::from_quantile_grid(base_law, cfg.grid_points)?,
        &EmpiricalDistribution::from_quantile_grid(&cfg.perturbed, cfg.grid_points)?,
    );
    let mut perturbed_models = inst.capacity.clone();
    perturbed_models[arc] = cfg.perturbed.clone();

    let replications = (0..cfg.l)
        .into_par_iter()
        .map(|index| {
            let seed = replication_seed(cfg.seed, index);
            let base = solve(inst, &sample_scenarios(&inst.capacity, cfg.m, seed)?, &cfg.opts)?;
            let shifted = solve(inst, &sample_scenarios(&perturbed_models, cfg.m, seed)?, &cfg.opts)?;
            Ok(ShiftReplication {
                index,
                seed,
                v_base: base.v[arc],
                v_perturbed: shifted.v[arc],
                converged: base.converged && shifted.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ratios = cfg
        .l_grid
        .iter()
        .map(|&l| {
            let p = EmpiricalDistribution::new(replications[..l].iter().map(|r| r.v_base).collect())?;
            let q = EmpiricalDistribution::new(replications[..l].iter().map(|r| r.v_perturbed).collect())?;
            let delta1 = kantorovich_1d(&p, &q);
            Ok(ShiftRatio {
                l,
                delta1,
                ratio: (delta2 > 0.0).then(|| delta1 / delta2),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ShiftOutcome {
        delta2,
        base_flows: EmpiricalDistribution::new(replications.iter().map(|r| r.v_base).collect())?,
        perturbed_flows: EmpiricalDistribution::new(replications.iter().map(|r| r.v_perturbed).collect())?,
        replications,
        ratios,
    })
}
