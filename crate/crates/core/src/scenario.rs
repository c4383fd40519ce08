//! TOML scenario files.
//!
//! A file names the scenario, lists the vehicles and may override any field
//! of the parameter blocks. Unknown keys are rejected and the assembled
//! configuration is validated before it is returned.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Policy, ResumeTimestamp, SimConfig, VehicleSpec};
use crate::error::{Error, Result};
use crate::gate::GateParams;
use crate::geometry::{IntersectionParams, LaneId, ManeuverKind};
use crate::opinion::OpinionParams;
use crate::optimizer::OptimizerParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    policy: Option<Policy>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    max_time: Option<f64>,
    #[serde(default)]
    resume_timestamp: Option<ResumeTimestamp>,
    #[serde(default)]
    intersection: Option<IntersectionParams>,
    #[serde(default)]
    opinion: Option<OpinionParams>,
    #[serde(default)]
    gate: Option<GateParams>,
    #[serde(default)]
    optimizer: Option<OptimizerParams>,
    vehicles: Vec<VehicleSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub config: SimConfig,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        let defaults = SimConfig::default();
        let config = SimConfig {
            dt: file.dt.unwrap_or(defaults.dt),
            max_time: file.max_time.unwrap_or(defaults.max_time),
            policy: file.policy.unwrap_or(defaults.policy),
            resume_timestamp: file.resume_timestamp.unwrap_or(defaults.resume_timestamp),
            intersection: file.intersection.unwrap_or(defaults.intersection),
            opinion: file.opinion.unwrap_or(defaults.opinion),
            gate: file.gate.unwrap_or(defaults.gate),
            optimizer: file.optimizer.unwrap_or(defaults.optimizer),
            vehicles: file.vehicles,
        };
        config.validate()?;
        Ok(Self {
            name: file.name,
            config,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Full TOML rendering with every parameter spelled out.
    pub fn to_toml(&self) -> Result<String> {
        let c = &self.config;
        let file = ScenarioFile {
            name: self.name.clone(),
            policy: Some(c.policy),
            dt: Some(c.dt),
            max_time: Some(c.max_time),
            resume_timestamp: Some(c.resume_timestamp),
            intersection: Some(c.intersection),
            opinion: Some(c.opinion),
            gate: Some(c.gate),
            optimizer: Some(c.optimizer),
            vehicles: c.vehicles.clone(),
        };
        toml::to_string(&file).map_err(|e| Error::Scenario(e.to_string()))
    }
}

/// Every assignment of right/straight/left to the base vehicles, keeping
/// their lanes, distances and speeds. Assignments are enumerated with the
/// first vehicle varying slowest, in the order right, straight, left.
pub fn maneuver_sweep(base: &SimConfig) -> Result<Vec<(Vec<ManeuverKind>, SimConfig)>> {
    let n = base.vehicles.len();
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|code| {
            let kinds: Vec<ManeuverKind> = (0..n)
                .map(|k| ManeuverKind::ALL[(code / 3usize.pow((n - 1 - k) as u32)) % 3])
                .collect();
            let mut config = base.clone();
            for (veh, kind) in config.vehicles.iter_mut().zip(&kinds) {
                veh.out_lane = kind.out_lane_from(LaneId::new(veh.in_lane)?)?.get();
            }
            config.validate()?;
            Ok((kinds, config))
        })
        .collect()
}
