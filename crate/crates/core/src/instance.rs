use crate::disutility::{Gbpr, PenaltyConfig, PenaltyMode};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::stochastics::CapacityModel;

/// A network together with its arc performance data, penalty settings and
/// per-arc capacity laws.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub gbpr: Vec<Gbpr>,
    pub penalty: PenaltyConfig,
    pub capacity: Vec<CapacityModel>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        network: Network,
        gbpr: Vec<Gbpr>,
        penalty: PenaltyConfig,
        capacity: Vec<CapacityModel>,
    ) -> Result<Self> {
        let a = network.num_arcs();
        for len in [gbpr.len(), capacity.len()] {
            if len != a {
                return Err(Error::DimensionMismatch { expected: a, got: len });
            }
        }
        for p in &gbpr {
            p.validate()?;
        }
        for c in &capacity {
            c.validate()?;
        }
        penalty.validate(&network)?;
        Ok(Self {
            name: name.into(),
            network,
            gbpr,
            penalty,
            capacity,
        })
    }

    /// Copy with the lateness term removed (plain user equilibrium).
    pub fn user_equilibrium(&self) -> Self {
        let mut out = self.clone();
        out.penalty.theta2 = 0.0;
        out
    }

    /// Copy using the nonsmooth max penalty.
    pub fn max_penalty(&self) -> Self {
        let mut out = self.clone();
        out.penalty.mode = PenaltyMode::Max;
        out
    }

    /// Copy using the smoothed penalty with parameter `t`.
    pub fn smoothed(&self, t: f64) -> Result<Self> {
        let mut out = self.clone();
        out.penalty.mode = PenaltyMode::Smooth;
        out.penalty.t = t;
        out.penalty.validate(&out.network)?;
        Ok(out)
    }
}
