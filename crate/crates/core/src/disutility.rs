//! Arc travel times under random capacity, the lateness penalty, the path
//! disutility field with its Jacobian, and their sample averages.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::Network;

/// Generalized BPR parameters of one arc: `t0 (1 + b (v / cap)^n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gbpr {
    pub t0: f64,
    pub b: f64,
    pub n: f64,
}

impl Gbpr {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.b >= 0.0 && self.n >= 1.0) || !self.t0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "GBPR needs t0 > 0, b >= 0, n >= 1 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// Quadratically smoothed lateness penalty with parameter `t`.
    Smooth,
    /// The nonsmooth `max(z, 0)` penalty.
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Flow-independent path attribute, one entry per path.
    pub d: Vec<f64>,
    /// Acceptable travel time per OD pair.
    pub tau: Vec<f64>,
    pub t: f64,
    pub mode: PenaltyMode,
}

impl PenaltyConfig {
    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.theta1 > 0.0) {
            return Err(Error::InvalidParameter("theta1 must be positive".into()));
        }
        if !(self.theta0 >= 0.0 && self.theta2 >= 0.0) {
            return Err(Error::InvalidParameter("theta0 and theta2 must be nonnegative".into()));
        }
        if self.mode == PenaltyMode::Smooth && !(self.t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameter must be positive, got {}",
                self.t
            )));
        }
        if self.d.len() != net.num_paths() {
            return Err(Error::DimensionMismatch {
                expected: net.num_paths(),
                got: self.d.len(),
            });
        }
        if self.tau.len() != net.num_od_pairs() {
            return Err(Error::DimensionMismatch {
                expected: net.num_od_pairs(),
                got: self.tau.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn value(&self, z: f64) -> f64 {
        match self.mode {
            PenaltyMode::Smooth => smooth_penalty(z, self.t),
            PenaltyMode::Max => z.max(0.0),
        }
    }

    /// Derivative of the penalty; the max mode takes the lower subgradient at 0.
    #[inline]
    fn deriv(&self, z: f64) -> f64 {
        match self.mode {
            PenaltyMode::Smooth => smooth_penalty_deriv(z, self.t),
            PenaltyMode::Max => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Sampled capacities, one row of `num_arcs` entries per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    num_arcs: usize,
    capacities: Vec<f64>,
    pub seed: u64,
    pub source: String,
}

impl ScenarioSet {
    pub fn new(num_arcs: usize, capacities: Vec<f64>, seed: u64, source: impl Into<String>) -> Result<Self> {
        if num_arcs == 0 || capacities.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        if !capacities.len().is_multiple_of(num_arcs) {
            return Err(Error::DimensionMismatch {
                expected: num_arcs * (capacities.len() / num_arcs + 1),
                got: capacities.len(),
            });
        }
        if let Some(&c) = capacities.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::NonPositiveCapacity(c));
        }
        Ok(Self {
            num_arcs,
            capacities,
            seed,
            source: source.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64, source: impl Into<String>) -> Result<Self> {
        let num_arcs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_arcs) {
            return Err(Error::InvalidParameter("ragged scenario rows".into()));
        }
        Self::new(num_arcs, rows.concat(), seed, source)
    }

    pub fn num_scenarios(&self) -> usize {
        self.capacities.len() / self.num_arcs
    }

    pub fn num_arcs(&self) -> usize {
        self.num_arcs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.capacities[i * self.num_arcs..(i + 1) * self.num_arcs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.capacities.chunks_exact(self.num_arcs)
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.capacities[i * self.num_arcs..(i + 1) * self.num_arcs]
    }

    /// Per-arc sample mean.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.num_arcs];
        for row in self.rows() {
            for (m, c) in mean.iter_mut().zip(row) {
                *m += c;
            }
        }
        let m = self.num_scenarios() as f64;
        mean.iter_mut().for_each(|x| *x /= m);
        mean
    }

    /// Concatenation of two scenario sets over the same arcs.
    pub fn concat(&self, other: &ScenarioSet) -> Result<ScenarioSet> {
        if self.num_arcs != other.num_arcs {
            return Err(Error::DimensionMismatch {
                expected: self.num_arcs,
                got: other.num_arcs,
            });
        }
        let mut capacities = self.capacities.clone();
        capacities.extend_from_slice(&other.capacities);
        Self::new(self.num_arcs, capacities, self.seed, format!("{}+{}", self.source, other.source))
    }
}

pub fn gbpr_time(v: f64, cap: f64, p: &Gbpr) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::NonPositiveCapacity(cap));
    }
    Ok(p.t0 * (1.0 + p.b * (v / cap).powf(p.n)))
}

/// `d/dv` of [`gbpr_time`].
pub fn gbpr_time_deriv(v: f64, cap: f64, p: &Gbpr) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::NonPositiveCapacity(cap));
    }
    Ok(p.t0 * p.n * p.b * v.powf(p.n - 1.0) / cap.powf(p.n))
}

pub fn arc_times(v: &[f64], caps: &[f64], params: &[Gbpr]) -> Result<Vec<f64>> {
    check_arcs(v, caps, params)?;
    v.iter()
        .zip(caps)
        .zip(params)
        .map(|((&v, &c), p)| gbpr_time(v, c, p))
        .collect()
}

/// Diagonal Jacobian of the arc travel times with respect to arc flows.
pub fn arc_time_jacobian(v: &[f64], caps: &[f64], params: &[Gbpr]) -> Result<DMatrix<f64>> {
    check_arcs(v, caps, params)?;
    let diag = v
        .iter()
        .zip(caps)
        .zip(params)
        .map(|((&v, &c), p)| gbpr_time_deriv(v, c, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

fn check_arcs(v: &[f64], caps: &[f64], params: &[Gbpr]) -> Result<()> {
    for len in [caps.len(), params.len()] {
        if len != v.len() {
            return Err(Error::DimensionMismatch { expected: v.len(), got: len });
        }
    }
    Ok(())
}

/// Smoothed lateness penalty `h(z, t)`: `z` above `t`, `(z + t)^2 / 4t` on
/// `[-t, t]`, zero below `-t`.
pub fn penalty(z: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(smooth_penalty(z, t))
}

pub fn penalty_deriv(z: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(smooth_penalty_deriv(z, t))
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter must be positive, got {t}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn smooth_penalty(z: f64, t: f64) -> f64 {
    if z > t {
        z
    } else if z >= -t {
        // t u² with u = (z + t) / 2t keeps h(0) = t/4 and h(t) = t exact
        let u = (z + t) / (2.0 * t);
        t * u * u
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn smooth_penalty_deriv(z: f64, t: f64) -> f64 {
    if z > t {
        1.0
    } else if z >= -t {
        (z + t) / (2.0 * t)
    } else {
        0.0
    }
}

/// Path travel times `C = Δᵀ T(Δ f, ξ)` for one capacity scenario.
pub fn path_costs(inst: &Instance, f: &[f64], caps: &[f64]) -> Result<Vec<f64>> {
    let net = &inst.network;
    let v = net.path_to_arc_flows(f)?;
    let times = arc_times(&v, caps, &inst.gbpr)?;
    Ok(net
        .paths()
        .iter()
        .map(|p| p.arcs.iter().map(|&a| times[a]).sum())
        .collect())
}

/// Path disutility for one capacity scenario.
pub fn disutility(inst: &Instance, f: &[f64], caps: &[f64]) -> Result<Vec<f64>> {
    let cfg = &inst.penalty;
    let costs = path_costs(inst, f, caps)?;
    Ok(inst
        .network
        .paths()
        .iter()
        .zip(&costs)
        .zip(&cfg.d)
        .map(|((p, &c), &d)| {
            cfg.theta0 * d + cfg.theta1 * c + cfg.theta2 * cfg.value(c - cfg.tau[p.od])
        })
        .collect())
}

/// `diag(b) Δᵀ ∇T Δ` for one capacity scenario, where `b_r` is the penalty
/// chain-rule coefficient of path `r`.
pub fn disutility_jacobian(inst: &Instance, f: &[f64], caps: &[f64]) -> Result<DMatrix<f64>> {
    let cfg = &inst.penalty;
    let net = &inst.network;
    let inc = net.build_incidence();
    let v = net.path_to_arc_flows(f)?;
    let grad_t = arc_time_jacobian(&v, caps, &inst.gbpr)?;
    let costs = path_costs(inst, f, caps)?;
    let coeffs: Vec<f64> = net
        .paths()
        .iter()
        .zip(&costs)
        .map(|(p, &c)| cfg.theta1 + cfg.theta2 * cfg.deriv(c - cfg.tau[p.od]))
        .collect();
    let core = inc.delta.transpose() * grad_t * &inc.delta;
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(coeffs));
    Ok(b * core)
}

/// Sample mean of [`disutility`] over all scenarios.
pub fn saa_disutility(inst: &Instance, f: &[f64], scenarios: &ScenarioSet) -> Result<Vec<f64>> {
    SaaOperator::new(inst, scenarios)?.eval(f)
}

/// Sample mean of [`disutility_jacobian`] over all scenarios.
pub fn saa_jacobian(inst: &Instance, f: &[f64], scenarios: &ScenarioSet) -> Result<DMatrix<f64>> {
    SaaOperator::new(inst, scenarios)?.jacobian(f)
}

/// Weighted sample-average disutility operator.
///
/// Arc times are stored as `t0 + k_ia v_a^n` with `k_ia = t0 b / cap_ia^n`
/// so that a single evaluation costs one power per arc plus one pass over the
/// path-arc incidences per scenario.
#[derive(Debug, Clone)]
pub struct SaaOperator {
    network: Network,
    gbpr: Vec<crate::disutility::Gbpr>,
    penalty: PenaltyConfig,
    weights: Vec<f64>,
    coef: Vec<f64>,
    free_flow: Vec<f64>,
    path_tau: Vec<f64>,
    arc_paths: Vec<Vec<usize>>,
}

impl SaaOperator {
    /// Equal-weight operator over a scenario set.
    pub fn new(inst: &Instance, scenarios: &ScenarioSet) -> Result<Self> {
        let m = scenarios.num_scenarios();
        Self::weighted(inst, scenarios, vec![1.0 / m as f64; m])
    }

    pub fn weighted(inst: &Instance, scenarios: &ScenarioSet, weights: Vec<f64>) -> Result<Self> {
        let net = &inst.network;
        inst.penalty.validate(net)?;
        let a = net.num_arcs();
        if scenarios.num_arcs() != a {
            return Err(Error::DimensionMismatch {
                expected: a,
                got: scenarios.num_arcs(),
            });
        }
        if weights.len() != scenarios.num_scenarios() {
            return Err(Error::DimensionMismatch {
                expected: scenarios.num_scenarios(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("scenario weights must be nonnegative".into()));
        }
        let mut coef = Vec::with_capacity(scenarios.num_scenarios() * a);
        for row in scenarios.rows() {
            for (c, p) in row.iter().zip(&inst.gbpr) {
                coef.push(p.t0 * p.b / c.powf(p.n));
            }
        }
        let free_flow = net
            .paths()
            .iter()
            .map(|p| p.arcs.iter().map(|&arc| inst.gbpr[arc].t0).sum())
            .collect();
        let path_tau = net.paths().iter().map(|p| inst.penalty.tau[p.od]).collect();
        let mut arc_paths = vec![Vec::new(); a];
        for (r, p) in net.paths().iter().enumerate() {
            for &arc in &p.arcs {
                arc_paths[arc].push(r);
            }
        }
        Ok(Self {
            network: net.clone(),
            gbpr: inst.gbpr.clone(),
            penalty: inst.penalty.clone(),
            weights,
            coef,
            free_flow,
            path_tau,
            arc_paths,
        })
    }

    /// Appends one scenario with weight `eps`, scaling existing weights by `1 - eps`.
    pub fn mixed_with(&self, caps: &[f64], eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("mixture weight {eps} outside [0, 1]")));
        }
        if caps.len() != self.network.num_arcs() {
            return Err(Error::DimensionMismatch {
                expected: self.network.num_arcs(),
                got: caps.len(),
            });
        }
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= 1.0 - eps);
        out.weights.push(eps);
        for (c, p) in caps.iter().zip(&self.gbpr) {
            if !(*c > 0.0) {
                return Err(Error::NonPositiveCapacity(*c));
            }
            out.coef.push(p.t0 * p.b / c.powf(p.n));
        }
        Ok(out)
    }

    pub fn with_penalty(mut self, penalty: PenaltyConfig) -> Result<Self> {
        penalty.validate(&self.network)?;
        self.path_tau = self.network.paths().iter().map(|p| penalty.tau[p.od]).collect();
        self.penalty = penalty;
        Ok(self)
    }

    pub fn penalty(&self) -> &PenaltyConfig {
        &self.penalty
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn num_scenarios(&self) -> usize {
        self.weights.len()
    }

    fn powers(&self, f: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.network.num_arcs()];
        self.network.arc_flows_into(f, &mut v);
        v.iter().zip(&self.gbpr).map(|(&v, p)| v.powf(p.n)).collect()
    }

    pub fn eval(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.network.num_paths()];
        self.eval_into(f, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let net = &self.network;
        if f.len() != net.num_paths() || out.len() != net.num_paths() {
            return Err(Error::DimensionMismatch {
                expected: net.num_paths(),
                got: f.len(),
            });
        }
        let a = net.num_arcs();
        let pw = self.powers(f);
        let cfg = &self.penalty;
        out.fill(0.0);
        let mut extra = vec![0.0; a];
        let mut mean_cost = vec![0.0; net.num_paths()];
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let k = &self.coef[i * a..(i + 1) * a];
            for ((e, &ki), &p) in extra.iter_mut().zip(k).zip(&pw) {
                *e = ki * p;
            }
            for (r, path) in net.paths().iter().enumerate() {
                let c = self.free_flow[r] + path.arcs.iter().map(|&arc| extra[arc]).sum::<f64>();
                mean_cost[r] += w * c;
                if cfg.theta2 != 0.0 {
                    out[r] += w * cfg.value(c - self.path_tau[r]);
                }
            }
        }
        for r in 0..out.len() {
            out[r] = cfg.theta0 * cfg.d[r] + cfg.theta1 * mean_cost[r] + cfg.theta2 * out[r];
        }
        Ok(())
    }

    pub fn jacobian(&self, f: &[f64]) -> Result<DMatrix<f64>> {
        let net = &self.network;
        let (a, n) = (net.num_arcs(), net.num_paths());
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.len() });
        }
        let mut v = vec![0.0; a];
        net.arc_flows_into(f, &mut v);
        let pw: Vec<f64> = v.iter().zip(&self.gbpr).map(|(&v, p)| v.powf(p.n)).collect();
        let dpw: Vec<f64> = v
            .iter()
            .zip(&self.gbpr)
            .map(|(&v, p)| p.n * v.powf(p.n - 1.0))
            .collect();
        let cfg = &self.penalty;

        // weighted[r][j] = sum_i w_i b_ir k_{i, arc j of r}
        let mut weighted: Vec<Vec<f64>> = net.paths().iter().map(|p| vec![0.0; p.arcs.len()]).collect();
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let k = &self.coef[i * a..(i + 1) * a];
            for (r, path) in net.paths().iter().enumerate() {
                let c = self.free_flow[r] + path.arcs.iter().map(|&arc| k[arc] * pw[arc]).sum::<f64>();
                let b = cfg.theta1 + cfg.theta2 * cfg.deriv(c - self.path_tau[r]);
                for (acc, &arc) in weighted[r].iter_mut().zip(&path.arcs) {
                    *acc += w * b * k[arc];
                }
            }
        }
        let mut jac = DMatrix::zeros(n, n);
        for (r, path) in net.paths().iter().enumerate() {
            for (&g, &arc) in weighted[r].iter().zip(&path.arcs) {
                let val = g * dpw[arc];
                for &s in &self.arc_paths[arc] {
                    jac[(r, s)] += val;
                }
            }
        }
        Ok(jac)
    }
}
