//! JSON network configuration.
//!
//! ```json
//! {
//!   "name": "two-route",
//!   "nodes": [1, 2],
//!   "arcs": [
//!     {"id": 1, "tail": 1, "head": 2, "t0": 10, "b": 0.15, "n": 4,
//!      "capacity": {"kind": "normal", "mu": 1500, "sigma": 5}}
//!   ],
//!   "od_pairs": [{"origin": 1, "destination": 2, "demand": 1000}],
//!   "paths": [[[1]]],
//!   "penalty": {"theta0": 0, "theta1": 1, "theta2": 2, "tau": [27], "t": 0.01, "mode": "smooth"}
//! }
//! ```
//!
//! `paths` lists arc-id sequences grouped per OD pair. When it is absent all
//! simple paths are enumerated, up to `max_paths` per OD pair.

use std::path::Path as FsPath;

use serde::Deserialize;

use crate::disutility::{Gbpr, PenaltyConfig, PenaltyMode};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::{Arc, Network, OdPair};
use crate::stochastics::{CapacityModel, Contaminant, DEFAULT_FLOOR_FRACTION};

pub const DEFAULT_MAX_PATHS: usize = 64;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    nodes: Vec<u32>,
    arcs: Vec<RawArc>,
    od_pairs: Vec<RawOd>,
    #[serde(default)]
    paths: Option<Vec<Vec<Vec<u32>>>>,
    #[serde(default)]
    max_paths: Option<usize>,
    penalty: RawPenalty,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    id: u32,
    tail: u32,
    head: u32,
    t0: f64,
    #[serde(default = "default_b")]
    b: f64,
    #[serde(default = "default_n")]
    n: f64,
    capacity: CapacitySpec,
}

fn default_b() -> f64 {
    0.15
}

fn default_n() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOd {
    origin: u32,
    destination: u32,
    demand: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPenalty {
    #[serde(default)]
    theta0: f64,
    #[serde(default = "default_theta1")]
    theta1: f64,
    #[serde(default)]
    theta2: f64,
    tau: Vec<f64>,
    #[serde(default = "default_t")]
    t: f64,
    #[serde(default)]
    mode: RawMode,
    #[serde(default)]
    d: Option<Vec<f64>>,
}

fn default_theta1() -> f64 {
    1.0
}

fn default_t() -> f64 {
    0.01
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    #[default]
    Smooth,
    Max,
}

/// Serialized form of a [`CapacityModel`].
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CapacitySpec {
    Normal {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        floor_fraction: Option<f64>,
    },
    PerturbedTail {
        mu: f64,
        sigma: f64,
        q: f64,
        beta: f64,
        #[serde(default)]
        floor_fraction: Option<f64>,
    },
    Mixture {
        base: Box<CapacitySpec>,
        eps: f64,
        #[serde(default)]
        outlier: Option<f64>,
        #[serde(default)]
        contaminant: Option<ContaminantSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContaminantSpec {
    mu: f64,
    sigma: f64,
}

impl CapacitySpec {
    fn into_model(self) -> Result<CapacityModel> {
        let model = match self {
            CapacitySpec::Normal { mu, sigma, floor_fraction } => CapacityModel::Normal {
                mu,
                sigma,
                floor_fraction: floor_fraction.unwrap_or(DEFAULT_FLOOR_FRACTION),
            },
            CapacitySpec::PerturbedTail { mu, sigma, q, beta, floor_fraction } => CapacityModel::PerturbedTail {
                mu,
                sigma,
                q,
                beta,
                floor_fraction: floor_fraction.unwrap_or(DEFAULT_FLOOR_FRACTION),
            },
            CapacitySpec::Mixture { base, eps, outlier, contaminant } => {
                let contaminant = match (outlier, contaminant) {
                    (Some(x), None) => Contaminant::Point(x),
                    (None, Some(c)) => Contaminant::Normal { mu: c.mu, sigma: c.sigma },
                    _ => {
                        return Err(Error::Config(
                            "mixture needs exactly one of `outlier` or `contaminant`".into(),
                        ))
                    }
                };
                CapacityModel::Mixture {
                    base: Box::new(base.into_model()?),
                    contaminant,
                    eps,
                }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

/// Parses one capacity-law section, e.g. `{"kind":"normal","mu":1500,"sigma":5}`.
pub fn parse_capacity_model(json: &str) -> Result<CapacityModel> {
    let spec: CapacitySpec = serde_json::from_str(json)?;
    spec.into_model()
}

/// Parses a full network configuration.
pub fn parse_instance(json: &str) -> Result<Instance> {
    let raw: RawConfig = serde_json::from_str(json)?;
    let arcs: Vec<Arc> = raw
        .arcs
        .iter()
        .map(|a| Arc { id: a.id, tail: a.tail, head: a.head })
        .collect();
    let ods: Vec<OdPair> = raw
        .od_pairs
        .iter()
        .map(|o| OdPair {
            origin: o.origin,
            destination: o.destination,
            demand: o.demand,
        })
        .collect();
    let network = match &raw.paths {
        Some(per_od) => Network::with_arc_id_paths(raw.nodes.clone(), arcs, ods, per_od)?,
        None => Network::with_enumerated_paths(
            raw.nodes.clone(),
            arcs,
            ods,
            raw.max_paths.unwrap_or(DEFAULT_MAX_PATHS),
        )?,
    };
    let gbpr = raw
        .arcs
        .iter()
        .map(|a| Gbpr { t0: a.t0, b: a.b, n: a.n })
        .collect();
    let capacity = raw
        .arcs
        .into_iter()
        .map(|a| a.capacity.into_model())
        .collect::<Result<Vec<_>>>()?;
    let p = raw.penalty;
    let penalty = PenaltyConfig {
        theta0: p.theta0,
        theta1: p.theta1,
        theta2: p.theta2,
        d: p.d.unwrap_or_else(|| vec![0.0; network.num_paths()]),
        tau: p.tau,
        t: p.t,
        mode: match p.mode {
            RawMode::Smooth => PenaltyMode::Smooth,
            RawMode::Max => PenaltyMode::Max,
        },
    };
    Instance::new(raw.name.unwrap_or_default(), network, gbpr, penalty, capacity)
}

pub fn load_instance(path: impl AsRef<FsPath>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

/// Configurations shipped with the crate.
pub mod builtin {
    use super::*;

    pub const NETWORK1_JSON: &str = include_str!("../data/network1.json");
    pub const NGUYEN_DUPUIS_JSON: &str = include_str!("../data/nguyen_dupuis.json");

    /// Two OD pairs over six arcs with normally distributed capacities.
    pub fn network1() -> Instance {
        parse_instance(NETWORK1_JSON).expect("bundled config is valid")
    }

    /// The 13-node, 19-arc Nguyen-Dupuis network with 25 paths.
    pub fn nguyen_dupuis() -> Instance {
        parse_instance(NGUYEN_DUPUIS_JSON).expect("bundled config is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_specs() {
        assert_eq!(
            parse_capacity_model(r#"{"kind":"normal","mu":1500,"sigma":5}"#).unwrap(),
            CapacityModel::normal(1500.0, 5.0)
        );
        let tail = parse_capacity_model(r#"{"kind":"perturbed_tail","mu":1500,"sigma":5,"q":0.9,"beta":0.002}"#).unwrap();
        assert_eq!(tail, CapacityModel::perturbed_tail(1500.0, 5.0, 0.9, 0.002));
        let mix = parse_capacity_model(
            r#"{"kind":"mixture","eps":0.05,"outlier":1470,"base":{"kind":"normal","mu":1500,"sigma":5}}"#,
        )
        .unwrap();
        assert!(matches!(mix, CapacityModel::Mixture { contaminant: Contaminant::Point(x), .. } if x == 1470.0));
        assert!(parse_capacity_model(r#"{"kind":"normal","mu":-1,"sigma":5}"#).is_err());
        assert!(parse_capacity_model(r#"{"kind":"mixture","eps":0.1,"base":{"kind":"normal","mu":1,"sigma":0}}"#).is_err());
        assert!(parse_capacity_model(r#"{"kind":"gamma","mu":1}"#).is_err());
    }

    #[test]
    fn bundled_configs_parse() {
        let n1 = builtin::network1();
        assert_eq!(n1.network.num_paths(), 4);
        assert_eq!(n1.network.num_arcs(), 6);
        let nd = builtin::nguyen_dupuis();
        assert_eq!(nd.network.num_paths(), 25);
        assert_eq!(nd.network.num_arcs(), 19);
        assert_eq!(nd.network.demands(), vec![400.0, 800.0, 600.0, 200.0]);
    }

    #[test]
    fn enumeration_when_paths_absent() {
        let json = builtin::NETWORK1_JSON;
        let mut value: serde_json::Value = serde_json::from_str(json).unwrap();
        value.as_object_mut().unwrap().remove("paths");
        let inst = parse_instance(&value.to_string()).unwrap();
        assert_eq!(inst.network.num_paths(), 4);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_instance("{}").is_err());
        assert!(parse_instance("not json").is_err());
        let mut value: serde_json::Value = serde_json::from_str(builtin::NETWORK1_JSON).unwrap();
        value["penalty"]["tau"] = serde_json::json!([27.0]);
        assert!(matches!(parse_instance(&value.to_string()), Err(Error::DimensionMismatch { .. })));
    }
}
