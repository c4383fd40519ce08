//! Scalar GO/YIELD opinion dynamics on the dual signed network.
//!
//! Each vehicle carries `z` in `[0, 1]` (1 leans GO, 0 leans YIELD). Committed
//! neighbors act through three channels selected by the conflict and belief
//! matrices; the aggregated internal state drives a damped saturating ODE
//! whose gain grows with the zone and with distance from neutral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ChannelSets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpinionParams {
    /// Opinion time constant (s).
    pub tau_z: f64,
    pub damping: f64,
    pub u0_evolution: f64,
    pub u0_decision: f64,
    /// Gain of the quadratic attention term.
    pub k_u: f64,
    pub alpha_self: f64,
    pub alpha_suppression: f64,
    pub alpha_permission: f64,
    pub alpha_coordination: f64,
}

impl Default for OpinionParams {
    fn default() -> Self {
        Self {
            tau_z: 0.1,
            damping: 1.0,
            u0_evolution: 0.5,
            u0_decision: 0.8,
            k_u: 2.0,
            alpha_self: 2.0,
            alpha_suppression: 4.0,
            alpha_permission: 2.5,
            alpha_coordination: 1.0,
        }
    }
}

impl OpinionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_suppression > self.alpha_permission
            && self.alpha_permission > self.alpha_coordination
            && self.alpha_coordination > 0.0)
        {
            return Err(Error::invalid(
                "opinion",
                "alpha_suppression > alpha_permission > alpha_coordination > 0",
            ));
        }
        if !(self.tau_z > 0.0 && self.damping > 0.0 && self.k_u >= 0.0) {
            return Err(Error::invalid(
                "opinion",
                "tau_z > 0, damping > 0, k_u >= 0",
            ));
        }
        if !(self.alpha_self.is_finite() && self.u0_evolution >= 0.0 && self.u0_decision >= 0.0) {
            return Err(Error::invalid(
                "opinion",
                "finite alpha_self, non-negative u0",
            ));
        }
        Ok(())
    }
}

/// Attention regime: the pre-zone approach uses the evolution gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionZone {
    Evolution,
    Decision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionState {
    z: f64,
    frozen: Option<f64>,
}

impl Default for OpinionState {
    fn default() -> Self {
        Self::neutral()
    }
}

impl OpinionState {
    pub fn neutral() -> Self {
        Self::new(0.5)
    }

    pub fn new(z: f64) -> Self {
        Self {
            z: z.clamp(0.0, 1.0),
            frozen: None,
        }
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn frozen_value(&self) -> Option<f64> {
        self.frozen
    }
}

/// Committed outcome an opinion is frozen to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Go,
    Yield,
}

pub fn attention(zone: AttentionZone, z: f64, params: &OpinionParams) -> f64 {
    let u0 = match zone {
        AttentionZone::Evolution => params.u0_evolution,
        AttentionZone::Decision => params.u0_decision,
    };
    u0 + params.k_u * (z - 0.5).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelSignals {
    pub suppression: f64,
    pub permission: f64,
    pub coordination: f64,
}

/// Channel signals for one vehicle; `z_of` looks up a neighbor's broadcast
/// opinion. Empty channels contribute 0.
pub fn channel_signals(channels: &ChannelSets, z_of: impl Fn(usize) -> f64) -> ChannelSignals {
    let mean = |values: Vec<f64>| {
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    ChannelSignals {
        suppression: channels
            .suppression
            .iter()
            .map(|&j| z_of(j))
            .fold(0.0, f64::max),
        permission: mean(channels.permission.iter().map(|&j| 1.0 - z_of(j)).collect()),
        coordination: mean(channels.coordination.iter().map(|&j| z_of(j)).collect()),
    }
}

pub fn internal_state(z: f64, signals: ChannelSignals, params: &OpinionParams) -> f64 {
    params.alpha_self * (z - 0.5) - params.alpha_suppression * signals.suppression
        + params.alpha_permission * signals.permission
        + params.alpha_coordination * signals.coordination
}

/// Right-hand side of the opinion ODE, `dz/dt`.
pub fn opinion_rate(z: f64, internal: f64, attention: f64, params: &OpinionParams) -> f64 {
    (-params.damping * z + 0.5 * (1.0 + (attention * internal).tanh())) / params.tau_z
}

/// One explicit Euler step; frozen opinions are left untouched.
pub fn step_opinion(
    state: OpinionState,
    internal: f64,
    attention: f64,
    dt: f64,
    params: &OpinionParams,
) -> OpinionState {
    debug_assert!(dt > 0.0 && dt <= params.tau_z);
    if state.is_frozen() {
        return state;
    }
    let z = state.z + dt * opinion_rate(state.z, internal, attention, params);
    OpinionState {
        z: z.clamp(0.0, 1.0),
        frozen: None,
    }
}

pub fn freeze(state: OpinionState, decision: Decision) -> Result<OpinionState> {
    if state.is_frozen() {
        return Err(Error::AlreadyFrozen);
    }
    let value = match decision {
        Decision::Go => 1.0,
        Decision::Yield => 0.0,
    };
    Ok(OpinionState {
        z: value,
        frozen: Some(value),
    })
}

/// Releases a YIELD freeze back to neutral.
pub fn unfreeze(state: OpinionState) -> Result<OpinionState> {
    match state.frozen {
        None => Err(Error::NotFrozen),
        Some(v) if v >= 0.5 => Err(Error::CannotUnfreezeGo),
        Some(_) => Ok(OpinionState::neutral()),
    }
}
