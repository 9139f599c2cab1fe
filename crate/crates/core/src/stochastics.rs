//! Capacity laws, seeded scenario sampling, outlier contamination, empirical
//! distributions and the one-dimensional Kantorovich (W1) metric.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::disutility::ScenarioSet;
use crate::error::{Error, Result};

pub const DEFAULT_FLOOR_FRACTION: f64 = 0.01;

/// Second component of an ε-mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum Contaminant {
    Point(f64),
    Normal { mu: f64, sigma: f64 },
}

/// Per-arc capacity law.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacityModel {
    Normal {
        mu: f64,
        sigma: f64,
        floor_fraction: f64,
    },
    /// Normal below its `q`-quantile `x0`, then uniform with density `beta`
    /// on `[x0, x0 + (1 - q) / beta]`.
    PerturbedTail {
        mu: f64,
        sigma: f64,
        q: f64,
        beta: f64,
        floor_fraction: f64,
    },
    Mixture {
        base: Box<CapacityModel>,
        contaminant: Contaminant,
        eps: f64,
    },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if x >= mu { 1.0 } else { 0.0 };
    }
    std_normal_cdf((x - mu) / sigma)
}

fn normal_quantile(u: f64, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mu;
    }
    mu + sigma * std_normal_quantile(u)
}

/// CDF of the normal law with its upper tail above the `q`-quantile replaced
/// by a uniform segment of slope `beta`.
pub fn perturbed_cdf(x: f64, mu: f64, sigma: f64, q: f64, beta: f64) -> Result<f64> {
    check_tail(mu, sigma, q, beta)?;
    let x0 = normal_quantile(q, mu, sigma);
    let x1 = x0 + (1.0 - q) / beta;
    Ok(if x <= x0 {
        normal_cdf(x, mu, sigma).min(q)
    } else if x <= x1 {
        // rounding of x0 and x1 at large magnitudes can overshoot the segment
        (q + beta * (x - x0)).min(1.0)
    } else {
        1.0
    })
}

pub fn perturbed_quantile(u: f64, mu: f64, sigma: f64, q: f64, beta: f64) -> Result<f64> {
    check_tail(mu, sigma, q, beta)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("probability {u} outside [0, 1]")));
    }
    let x0 = normal_quantile(q, mu, sigma);
    Ok(if u <= q {
        if u == q {
            x0
        } else {
            normal_quantile(u, mu, sigma)
        }
    } else {
        x0 + (u - q) / beta
    })
}

fn check_tail(mu: f64, sigma: f64, q: f64, beta: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) || !(beta > 0.0) || !(sigma >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "perturbed tail needs q in (0,1), beta > 0, sigma >= 0 (q={q}, beta={beta}, sigma={sigma})"
        )));
    }
    Ok(())
}

impl CapacityModel {
    pub fn normal(mu: f64, sigma: f64) -> Self {
        Self::Normal {
            mu,
            sigma,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
        }
    }

    pub fn perturbed_tail(mu: f64, sigma: f64, q: f64, beta: f64) -> Self {
        Self::PerturbedTail {
            mu,
            sigma,
            q,
            beta,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Normal { mu, sigma, floor_fraction } => {
                if !(*mu > 0.0 && *sigma >= 0.0 && (0.0..1.0).contains(floor_fraction)) || !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "normal capacity needs mu > 0, sigma >= 0 (mu={mu}, sigma={sigma})"
                    )));
                }
                Ok(())
            }
            Self::PerturbedTail { mu, sigma, q, beta, floor_fraction } => {
                if !(*mu > 0.0) || !(0.0..1.0).contains(floor_fraction) {
                    return Err(Error::InvalidParameter(format!("capacity mean must be positive, got {mu}")));
                }
                check_tail(*mu, *sigma, *q, *beta)
            }
            Self::Mixture { base, contaminant, eps } => {
                base.validate()?;
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::InvalidParameter(format!("mixture weight {eps} outside [0, 1]")));
                }
                match contaminant {
                    Contaminant::Point(x) if !(*x > 0.0) => Err(Error::NonPositiveCapacity(*x)),
                    Contaminant::Normal { mu, sigma } if !(*mu > 0.0 && *sigma >= 0.0) => Err(
                        Error::InvalidParameter(format!("contaminant needs mu > 0, sigma >= 0 (mu={mu})")),
                    ),
                    _ => Ok(()),
                }
            }
        }
    }

    fn floor(&self) -> f64 {
        match self {
            Self::Normal { mu, floor_fraction, .. } | Self::PerturbedTail { mu, floor_fraction, .. } => {
                mu * floor_fraction
            }
            Self::Mixture { base, .. } => base.floor(),
        }
    }

    /// Location parameter of the nominal law.
    pub fn nominal(&self) -> f64 {
        match self {
            Self::Normal { mu, .. } | Self::PerturbedTail { mu, .. } => *mu,
            Self::Mixture { base, .. } => base.nominal(),
        }
    }

    /// Mean of the law before flooring.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Normal { mu, .. } => *mu,
            Self::PerturbedTail { mu, sigma, q, beta, .. } => {
                let z0 = std_normal_quantile(*q);
                let x0 = mu + sigma * z0;
                let x1 = x0 + (1.0 - q) / beta;
                mu * q - sigma * std_normal_pdf(z0) + (1.0 - q) * 0.5 * (x0 + x1)
            }
            Self::Mixture { base, contaminant, eps } => {
                let c = match contaminant {
                    Contaminant::Point(x) => *x,
                    Contaminant::Normal { mu, .. } => *mu,
                };
                (1.0 - eps) * base.mean() + eps * c
            }
        }
    }

    /// CDF of the law before flooring.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mu, sigma, .. } => normal_cdf(x, *mu, *sigma),
            Self::PerturbedTail { mu, sigma, q, beta, .. } => {
                perturbed_cdf(x, *mu, *sigma, *q, *beta).expect("validated")
            }
            Self::Mixture { base, contaminant, eps } => {
                let c = match contaminant {
                    Contaminant::Point(p) => {
                        if x >= *p {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Contaminant::Normal { mu, sigma } => normal_cdf(x, *mu, *sigma),
                };
                (1.0 - eps) * base.cdf(x) + eps * c
            }
        }
    }

    /// Generalized inverse CDF, floored at the model's capacity floor.
    pub fn quantile(&self, u: f64) -> f64 {
        self.raw_quantile(u).max(self.floor())
    }

    fn raw_quantile(&self, u: f64) -> f64 {
        match self {
            Self::Normal { mu, sigma, .. } => normal_quantile(u, *mu, *sigma),
            Self::PerturbedTail { mu, sigma, q, beta, .. } => {
                perturbed_quantile(u, *mu, *sigma, *q, *beta).expect("validated")
            }
            Self::Mixture { base, contaminant, .. } => {
                let (lo_c, hi_c) = match contaminant {
                    Contaminant::Point(p) => (*p, *p),
                    Contaminant::Normal { mu, sigma } => (
                        normal_quantile(1e-15, *mu, *sigma),
                        normal_quantile(1.0 - 1e-15, *mu, *sigma),
                    ),
                };
                let mut lo = base.raw_quantile(1e-15).min(lo_c) - 1.0;
                let mut hi = base.raw_quantile(1.0 - 1e-15).max(hi_c) + 1.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
                        break;
                    }
                }
                hi
            }
        }
    }

    /// Draws one capacity from two independent uniforms in `(0, 1)`.
    fn draw(&self, u1: f64, u2: f64) -> f64 {
        match self {
            Self::Mixture { base, contaminant, eps } => {
                if u1 < *eps {
                    let x = match contaminant {
                        Contaminant::Point(p) => *p,
                        Contaminant::Normal { mu, sigma } => normal_quantile(u2, *mu, *sigma),
                    };
                    x.max(self.floor())
                } else {
                    base.quantile(u2)
                }
            }
            _ => self.quantile(u1),
        }
    }
}

fn open_uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Draws `m` capacity scenarios. Arc `a` reads ChaCha stream `a` of the seed,
/// and scenario `i` always consumes the same four words of that stream, so the
/// output does not depend on evaluation order.
pub fn sample_scenarios(models: &[CapacityModel], m: usize, seed: u64) -> Result<ScenarioSet> {
    if m == 0 {
        return Err(Error::EmptyScenarioSet);
    }
    for model in models {
        model.validate()?;
    }
    let a = models.len();
    let mut caps = vec![0.0; m * a];
    for (arc, model) in models.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(arc as u64);
        for i in 0..m {
            rng.set_word_pos(4 * i as u128);
            let u1 = open_uniform(rng.next_u64());
            let u2 = open_uniform(rng.next_u64());
            caps[i * a + arc] = model.draw(u1, u2);
        }
    }
    ScenarioSet::new(a, caps, seed, describe(models))
}

fn describe(models: &[CapacityModel]) -> String {
    let kinds: Vec<&str> = models
        .iter()
        .map(|m| match m {
            CapacityModel::Normal { .. } => "normal",
            CapacityModel::PerturbedTail { .. } => "perturbed_tail",
            CapacityModel::Mixture { .. } => "mixture",
        })
        .collect();
    kinds.join("|")
}

/// Single deterministic scenario at the per-arc means.
pub fn mean_scenario(models: &[CapacityModel]) -> Result<ScenarioSet> {
    for model in models {
        model.validate()?;
    }
    ScenarioSet::new(models.len(), models.iter().map(CapacityModel::mean).collect(), 0, "mean")
}

/// Replaces the capacity of `arc` with `outlier` in `m` scenarios. The chosen
/// indices are the first `m` entries of a seeded permutation, so the sets are
/// nested in `m` for a fixed seed.
pub fn contaminate(
    scenarios: &ScenarioSet,
    arc: usize,
    m: usize,
    outlier: f64,
    seed: u64,
) -> Result<ScenarioSet> {
    let total = scenarios.num_scenarios();
    if m > total {
        return Err(Error::InvalidParameter(format!(
            "cannot contaminate {m} of {total} scenarios"
        )));
    }
    if arc >= scenarios.num_arcs() {
        return Err(Error::DimensionMismatch {
            expected: scenarios.num_arcs(),
            got: arc,
        });
    }
    if !(outlier > 0.0) {
        return Err(Error::NonPositiveCapacity(outlier));
    }
    let mut out = scenarios.clone();
    for &i in &contamination_order(total, seed)[..m] {
        out.row_mut(i)[arc] = outlier;
    }
    out.source = format!("{} contaminated m={m} arc={arc}", scenarios.source);
    Ok(out)
}

fn contamination_order(total: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Uniformly weighted sample, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empirical distribution needs a sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("empirical sample contains non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Equally spaced quantile-grid representation of a capacity law.
    pub fn from_quantile_grid(model: &CapacityModel, points: usize) -> Result<Self> {
        model.validate()?;
        let g = points as f64;
        Self::new((0..points).map(|j| model.quantile((j as f64 + 0.5) / g)).collect())
    }
}

/// W1 distance as the area between the two empirical CDFs, integrated over
/// the merged breakpoints.
pub fn kantorovich_1d(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (a.values(), b.values());
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut area = 0.0;
    let mut prev = x[0].min(y[0]);
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&xi), Some(&yj)) => xi.min(yj),
            (Some(&xi), None) => xi,
            (None, Some(&yj)) => yj,
            (None, None) => unreachable!(),
        };
        let fx = i as f64 / nx;
        let fy = j as f64 / ny;
        area += (fx - fy).abs() * (next - prev);
        while i < x.len() && x[i] == next {
            i += 1;
        }
        while j < y.len() && y[j] == next {
            j += 1;
        }
        prev = next;
    }
    area
}

/// W1 between equal-size samples as the mean gap of matched order statistics.
pub fn kantorovich_equal_count(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let total: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_sigma_is_degenerate() {
        let s = sample_scenarios(&[CapacityModel::normal(1500.0, 0.0)], 50, 3).unwrap();
        assert!(s.rows().all(|r| r[0] == 1500.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let models = vec![CapacityModel::normal(1500.0, 5.0), CapacityModel::normal(3600.0, 80.0)];
        let a = sample_scenarios(&models, 100, 42).unwrap();
        let b = sample_scenarios(&models, 100, 42).unwrap();
        let c = sample_scenarios(&models, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // a prefix of a longer draw is the shorter draw
        let longer = sample_scenarios(&models, 150, 42).unwrap();
        assert_eq!(longer.row(99), a.row(99));
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let s = sample_scenarios(&[CapacityModel::normal(1500.0, 5.0)], 100_000, 11).unwrap();
        let mean = s.mean_row()[0];
        assert!((mean - 1500.0).abs() <= 0.1, "mean {mean}");
    }

    #[test]
    fn perturbed_quantile_endpoints() {
        let (mu, sigma, q, beta) = (1500.0, 5.0, 0.9, 0.002);
        let x0 = normal_quantile(q, mu, sigma);
        assert_eq!(perturbed_quantile(q, mu, sigma, q, beta).unwrap(), x0);
        assert_relative_eq!(
            perturbed_quantile(1.0, mu, sigma, q, beta).unwrap(),
            x0 + (1.0 - q) / beta,
            epsilon = 1e-9
        );
        assert!(perturbed_quantile(1.2, mu, sigma, q, beta).is_err());
        assert!(perturbed_quantile(-0.1, mu, sigma, q, beta).is_err());
        assert!(perturbed_cdf(0.0, mu, sigma, 1.0, beta).is_err());
        assert!(perturbed_cdf(0.0, mu, sigma, 0.5, 0.0).is_err());
    }

    #[test]
    fn perturbed_mean_matches_quadrature() {
        let model = CapacityModel::perturbed_tail(1500.0, 5.0, 0.9, 0.002);
        let g = 200_000;
        let grid: f64 = (0..g).map(|j| model.raw_quantile((j as f64 + 0.5) / g as f64)).sum::<f64>() / g as f64;
        assert_relative_eq!(model.mean(), grid, max_relative = 1e-6);
    }

    #[test]
    fn contamination_counts() {
        let models = vec![CapacityModel::normal(1500.0, 5.0); 2];
        let base = sample_scenarios(&models, 1000, 1).unwrap();
        assert_eq!(contaminate(&base, 0, 0, 1470.0, 9).unwrap().rows().collect::<Vec<_>>(), base.rows().collect::<Vec<_>>());
        let ten = contaminate(&base, 0, 10, 1470.0, 9).unwrap();
        let differing = base.rows().zip(ten.rows()).filter(|(a, b)| a != b).count();
        assert_eq!(differing, 10);
        let all = contaminate(&base, 0, 1000, 1470.0, 9).unwrap();
        assert!(all.rows().all(|r| r[0] == 1470.0));
        assert!(all.rows().zip(base.rows()).all(|(a, b)| a[1] == b[1]));
        assert!(contaminate(&base, 0, 1001, 1470.0, 9).is_err());
        // nested in m
        let twenty = contaminate(&base, 0, 20, 1470.0, 9).unwrap();
        assert!(ten.rows().zip(twenty.rows()).all(|(a, b)| a[0] != 1470.0 || b[0] == 1470.0));
    }

    #[test]
    fn kantorovich_basic_cases() {
        let e = |v: &[f64]| EmpiricalDistribution::new(v.to_vec()).unwrap();
        assert_eq!(kantorovich_1d(&e(&[1.0, 2.0, 3.0]), &e(&[3.0, 1.0, 2.0])), 0.0);
        assert_eq!(kantorovich_1d(&e(&[2.0]), &e(&[-3.5])), 5.5);
        assert_eq!(kantorovich_1d(&e(&[0.0, 1.0]), &e(&[0.0, 2.0])), 0.5);
        assert_eq!(kantorovich_equal_count(&e(&[0.0, 1.0]), &e(&[0.0, 2.0])).unwrap(), 0.5);
        assert!(kantorovich_equal_count(&e(&[0.0]), &e(&[0.0, 2.0])).is_err());
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn mixture_quantile_inverts_cdf() {
        let model = CapacityModel::Mixture {
            base: Box::new(CapacityModel::normal(1500.0, 5.0)),
            contaminant: Contaminant::Point(1470.0),
            eps: 0.1,
        };
        model.validate().unwrap();
        assert_relative_eq!(model.quantile(0.05), 1470.0, epsilon = 1e-6);
        let x = model.quantile(0.6);
        assert_relative_eq!(model.cdf(x), 0.6, epsilon = 1e-9);
        assert_relative_eq!(model.mean(), 0.9 * 1500.0 + 0.1 * 1470.0);
    }
}
