//! Zones, the commitment state machine and the closed-form predictive gate.
//!
//! On entering the decision zone a negotiating vehicle defers to any
//! earlier-arrived conflicting vehicle that has not decided yet. Otherwise it
//! projects its earliest occupancy window at its maneuver speed limit and
//! commits GO when that window is compatible with every GO-committed crossing
//! neighbor and its merge-point arrival is separated from every GO-committed
//! merge neighbor; failing either, it commits YIELD.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::BroadcastFrame;
use crate::geometry::{IntersectionParams, PathSpec};
use crate::network::ConflictTopology;

/// Commitment state broadcast by each vehicle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sigma {
    #[default]
    Negotiate,
    Go,
    Yield,
    Exit,
}

impl Sigma {
    pub fn letter(self) -> char {
        match self {
            Sigma::Negotiate => 'N',
            Sigma::Go => 'G',
            Sigma::Yield => 'Y',
            Sigma::Exit => 'E',
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sigma::Negotiate => "NEGOTIATE",
            Sigma::Go => "GO",
            Sigma::Yield => "YIELD",
            Sigma::Exit => "EXIT",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    /// Approaching, outside the evolution radius.
    Approach,
    Evolution,
    Decision,
    Exited,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Zone::Approach => "APPROACH",
            Zone::Evolution => "EVOLUTION",
            Zone::Decision => "DECISION",
            Zone::Exited => "EXITED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyWindow {
    pub start: f64,
    pub end: f64,
}

impl OccupancyWindow {
    /// Signed overlap length; negative when the windows are disjoint.
    pub fn overlap(&self, other: &OccupancyWindow) -> f64 {
        self.end.min(other.end) - self.start.max(other.start)
    }

    pub fn contains(&self, t: f64) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParams {
    /// Tolerated occupancy-window overlap (s).
    pub epsilon: f64,
    /// Minimum separation of merge-point arrivals (s).
    pub t_margin: f64,
    /// Box traversal length; `None` derives `2 * decision_radius + vehicle_length`.
    pub box_length: Option<f64>,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            epsilon: 0.6,
            t_margin: 1.5,
            box_length: None,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.t_margin > 0.0) {
            return Err(Error::invalid("gate", "epsilon > 0, t_margin > 0"));
        }
        if let Some(l) = self.box_length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid("gate", "box_length > 0"));
            }
        }
        Ok(())
    }

    pub fn l_box(&self, geometry: &IntersectionParams) -> f64 {
        self.box_length
            .unwrap_or(2.0 * geometry.decision_radius + geometry.vehicle_length)
    }
}

/// Per-vehicle commitment bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommitmentState {
    pub sigma: Sigma,
    /// Decision-zone entry time.
    pub t_dz: Option<f64>,
    /// Window stored on GO.
    pub window: Option<OccupancyWindow>,
    /// GO vehicles that caused the current YIELD.
    pub blockers: BTreeSet<usize>,
    pub exit_time: Option<f64>,
}

impl CommitmentState {
    pub fn sigma(&self) -> Sigma {
        self.sigma
    }

    /// Applies a transition, rejecting anything outside N->G, N->Y, Y->N, G->E.
    pub fn transition(&mut self, to: Sigma) -> Result<Sigma> {
        let from = self.sigma();
        let legal = matches!(
            (from, to),
            (Sigma::Negotiate, Sigma::Go)
                | (Sigma::Negotiate, Sigma::Yield)
                | (Sigma::Yield, Sigma::Negotiate)
                | (Sigma::Go, Sigma::Exit)
        );
        if !legal {
            return Err(Error::Scenario(format!(
                "illegal commitment transition {from} -> {to}"
            )));
        }
        self.sigma = to;
        if to != Sigma::Go {
            self.window = None;
        }
        if to != Sigma::Yield {
            self.blockers.clear();
        }
        Ok(from)
    }
}

/// Zone of a vehicle at center distance `d` and arc length `s` on `path`.
pub fn classify_zone(d: f64, s: f64, path: &PathSpec, params: &IntersectionParams) -> Zone {
    let approaching = s < path.s_center;
    if d <= params.decision_radius {
        Zone::Decision
    } else if !approaching {
        Zone::Exited
    } else if d < params.evolution_radius {
        Zone::Evolution
    } else {
        Zone::Approach
    }
}

/// Earliest occupancy window from center distance `d` at speed `v_max`.
pub fn project_window(d: f64, v_max: f64, now: f64, l_box: f64) -> OccupancyWindow {
    debug_assert!(d >= 0.0 && v_max > 0.0);
    OccupancyWindow {
        start: now + d / v_max,
        end: now + (d + l_box) / v_max,
    }
}

/// Crossing feasibility: the overlap of the two windows stays below epsilon.
pub fn crossing_feasible(a: &OccupancyWindow, b: &OccupancyWindow, params: &GateParams) -> bool {
    a.overlap(b) < params.epsilon
}

pub fn merge_feasible(eta_i: f64, eta_j: f64, params: &GateParams) -> bool {
    (eta_i - eta_j).abs() >= params.t_margin
}

/// Declared route knowledge every vehicle shares about every other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteInfo {
    pub s_merge: f64,
    pub v_max: f64,
}

/// Predicted arrival at the merge point at the speed limit.
pub fn merge_eta(frame: &BroadcastFrame, route: &RouteInfo, now: f64) -> f64 {
    now + (route.s_merge - frame.s) / route.v_max
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateDecision {
    CommitGo(OccupancyWindow),
    CommitYield { blockers: BTreeSet<usize> },
    Hold,
}

/// Priority key: earlier decision-zone entry first, vehicle index on ties.
pub fn arrives_before(a: &BroadcastFrame, b: &BroadcastFrame) -> bool {
    match (a.t_dz, b.t_dz) {
        (Some(ta), Some(tb)) => (ta, a.id) < (tb, b.id),
        (Some(_), None) => true,
        _ => false,
    }
}

/// Proposed gate for vehicle `i` against the current (possibly partially
/// updated) frame view.
pub fn evaluate_gate(
    i: usize,
    frames: &[BroadcastFrame],
    topology: &ConflictTopology,
    routes: &[RouteInfo],
    now: f64,
    l_box: f64,
    params: &GateParams,
) -> Result<GateDecision> {
    let me = &frames[i];
    if me.t_dz.is_none() {
        return Err(Error::MissingTimestamp(i));
    }
    let conflicting = || (0..frames.len()).filter(move |&j| j != i && topology.conflicts(i, j));

    let defer = conflicting().any(|j| {
        let other = &frames[j];
        other.sigma == Sigma::Negotiate && other.zone == Zone::Decision && arrives_before(other, me)
    });
    if defer {
        return Ok(GateDecision::Hold);
    }

    let window = project_window(me.d, routes[i].v_max, now, l_box);
    let my_eta = merge_eta(me, &routes[i], now);
    let mut blockers = BTreeSet::new();
    for j in conflicting().filter(|&j| frames[j].sigma == Sigma::Go) {
        if topology.crosses(i, j) {
            let ok = frames[j]
                .window
                .is_none_or(|w| crossing_feasible(&window, &w, params));
            if !ok {
                blockers.insert(j);
            }
        }
        if topology.merges(i, j) {
            let eta_j = merge_eta(&frames[j], &routes[j], now);
            if !merge_feasible(my_eta, eta_j, params) {
                blockers.insert(j);
            }
        }
    }
    Ok(if blockers.is_empty() {
        GateDecision::CommitGo(window)
    } else {
        GateDecision::CommitYield { blockers }
    })
}

/// First-come-first-served baseline: GO once every conflicting vehicle that
/// entered the decision zone earlier has exited, YIELD to them otherwise.
/// Windows are projected only so GO frames carry one; they never reorder.
pub fn fcfs_baseline_gate(
    i: usize,
    frames: &[BroadcastFrame],
    topology: &ConflictTopology,
    routes: &[RouteInfo],
    now: f64,
    l_box: f64,
) -> Result<GateDecision> {
    let me = &frames[i];
    if me.t_dz.is_none() {
        return Err(Error::MissingTimestamp(i));
    }
    let blockers: BTreeSet<usize> = (0..frames.len())
        .filter(|&j| j != i && topology.conflicts(i, j))
        .filter(|&j| frames[j].sigma != Sigma::Exit && arrives_before(&frames[j], me))
        .collect();
    Ok(if blockers.is_empty() {
        GateDecision::CommitGo(project_window(me.d, routes[i].v_max, now, l_box))
    } else {
        GateDecision::CommitYield { blockers }
    })
}

/// A yielding vehicle resumes once every recorded blocker has exited.
pub fn check_resumption(blockers: &BTreeSet<usize>, frames: &[BroadcastFrame]) -> bool {
    blockers.iter().all(|&j| frames[j].sigma == Sigma::Exit)
}

pub fn check_exit(sigma: Sigma, zone: Zone) -> bool {
    sigma == Sigma::Go && zone == Zone::Exited
}
