//! Deterministic tick loop tying the modules together.
//!
//! Each tick takes a broadcast snapshot, refreshes beliefs and zones, runs the
//! commitment gate in arrival order, steps opinions, picks accelerations,
//! integrates, checks exits and collisions and records a trace row per
//! vehicle. Opinion and acceleration stages read only the snapshot taken at
//! the start of the tick, so no vehicle sees another's same-tick update.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collision::collision_check;
use crate::error::{Error, Result};
use crate::frame::BroadcastFrame;
use crate::gate::{
    check_exit, check_resumption, classify_zone, crossing_feasible, evaluate_gate,
    fcfs_baseline_gate, CommitmentState, GateDecision, GateParams, OccupancyWindow, RouteInfo,
    Sigma, Zone,
};
use crate::geometry::{build_path, maneuver, IntersectionParams, Maneuver, PathSpec, Pose};
use crate::network::{build_conflict_topology, channel_sets, update_beliefs, ConflictTopology};
use crate::opinion::{
    attention, channel_signals, freeze, internal_state, step_opinion, unfreeze, AttentionZone,
    Decision, OpinionParams, OpinionState,
};
use crate::optimizer::{
    advance, prediction_instants, select_acceleration, Ego, Neighbor, OptimizerParams, Relation,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Proposed,
    Fcfs,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::Fcfs => "fcfs",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which decision-zone timestamp a vehicle carries after a YIELD is released.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResumeTimestamp {
    /// Keep the first decision-zone entry time.
    #[default]
    Original,
    /// Restamp with the release time.
    Resumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub in_lane: u8,
    pub out_lane: u8,
    pub initial_distance: f64,
    pub initial_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub max_time: f64,
    pub policy: Policy,
    /// Applies to the proposed policy; the baseline always keeps the original.
    pub resume_timestamp: ResumeTimestamp,
    pub intersection: IntersectionParams,
    pub opinion: OpinionParams,
    pub gate: GateParams,
    pub optimizer: OptimizerParams,
    pub vehicles: Vec<VehicleSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_time: 60.0,
            policy: Policy::Proposed,
            resume_timestamp: ResumeTimestamp::default(),
            intersection: IntersectionParams::default(),
            opinion: OpinionParams::default(),
            gate: GateParams::default(),
            optimizer: OptimizerParams::default(),
            vehicles: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.intersection.validate()?;
        self.opinion.validate()?;
        self.gate.validate()?;
        self.optimizer.validate()?;
        if !(self.dt > 0.0 && self.dt <= self.opinion.tau_z) {
            return Err(Error::invalid("simulation", "0 < dt <= tau_z"));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(Error::invalid("simulation", "max_time > 0"));
        }
        let mut used = [false; 9];
        for (k, v) in self.vehicles.iter().enumerate() {
            maneuver(v.in_lane, v.out_lane)?;
            if !(v.initial_distance > self.intersection.evolution_radius
                && v.initial_distance.is_finite())
            {
                return Err(Error::invalid(
                    "vehicle",
                    format!("vehicle {}: initial_distance > evolution_radius", k + 1),
                ));
            }
            if !(v.initial_speed >= 0.0 && v.initial_speed.is_finite()) {
                return Err(Error::invalid(
                    "vehicle",
                    format!("vehicle {}: initial_speed >= 0", k + 1),
                ));
            }
            let lane = v.in_lane as usize;
            if used[lane] {
                return Err(Error::invalid(
                    "vehicle",
                    format!("vehicle {}: at most one vehicle per in-lane", k + 1),
                ));
            }
            used[lane] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub maneuver: Maneuver,
    pub v_max: f64,
    pub s: f64,
    pub v: f64,
    /// Acceleration applied during the last tick.
    pub a: f64,
    pub pose: Pose,
    pub d: f64,
    pub zone: Zone,
    pub commitment: CommitmentState,
    pub opinion: OpinionState,
}

impl VehicleState {
    pub fn sigma(&self) -> Sigma {
        self.commitment.sigma()
    }

    fn place(&mut self, path: &PathSpec, params: &IntersectionParams) {
        self.pose = path.pose_extended(self.s);
        self.d = self.pose.point().norm();
        self.zone = if self.sigma() == Sigma::Exit {
            Zone::Exited
        } else {
            classify_zone(self.d, self.s, path, params)
        };
    }

    pub fn frame(&self) -> BroadcastFrame {
        BroadcastFrame {
            id: self.id,
            sigma: self.sigma(),
            z: self.opinion.z(),
            position: self.pose.point(),
            v: self.v,
            s: self.s,
            d: self.d,
            t_dz: self.commitment.t_dz,
            window: self.commitment.window,
            zone: self.zone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub a: f64,
    pub z: f64,
    pub sigma: char,
    pub zone: String,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitEvent {
    pub t: f64,
    pub id: usize,
    pub transition: String,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
}

impl CommitEvent {
    fn new(t: f64, id: usize, from: Sigma, to: Sigma, window: Option<OccupancyWindow>) -> Self {
        Self {
            t,
            id,
            transition: format!("{}->{}", from.letter(), to.letter()),
            window_start: window.map(|w| w.start),
            window_end: window.map(|w| w.end),
        }
    }

    pub fn is_go(&self) -> bool {
        self.transition == "N->G"
    }
}

/// Everything a run produces. Vehicle ids in the output are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: Policy,
    pub trace: Vec<TraceRow>,
    pub events: Vec<CommitEvent>,
    pub exit_times: Vec<Option<f64>>,
    /// First decision-zone entry time of each vehicle.
    pub first_t_dz: Vec<Option<f64>>,
    pub last_exit_time: Option<f64>,
    pub min_clearance: f64,
    pub collision: bool,
    pub timeout: bool,
    pub end_time: f64,
    /// Ticks at which two GO crossing-conflict vehicles held incompatible windows.
    pub window_violations: usize,
    /// Ticks at which a YIELD vehicle was inside `decision_radius - 0.2` while
    /// a conflicting GO window was active.
    pub yield_intrusions: usize,
}

impl SimResult {
    /// 1-based ids in the order they committed GO.
    pub fn go_order(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter(|e| e.is_go())
            .map(|e| e.id)
            .collect()
    }

    pub fn go_time(&self, id: usize) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.is_go() && e.id == id)
            .map(|e| e.t)
    }
}

/// Per-tick outputs of [`World::tick`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub rows: Vec<TraceRow>,
    pub events: Vec<CommitEvent>,
    pub min_clearance: f64,
    pub window_violations: usize,
    pub yield_intrusions: usize,
}

#[derive(Debug, Clone)]
pub struct World {
    pub t: f64,
    pub vehicles: Vec<VehicleState>,
    pub paths: Vec<PathSpec>,
    pub topology: ConflictTopology,
    pub routes: Vec<RouteInfo>,
    pub first_t_dz: Vec<Option<f64>>,
    /// Arc length of each path's hold line.
    hold_s: Vec<f64>,
    l_box: f64,
    /// Completed steps; time is derived from it so that it does not drift.
    ticks: u64,
}

/// Margin inside the decision radius a yielding vehicle must not cross.
pub const YIELD_MARGIN: f64 = 0.2;

impl World {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let geo = &config.intersection;
        let maneuvers: Vec<Maneuver> = config
            .vehicles
            .iter()
            .map(|v| maneuver(v.in_lane, v.out_lane))
            .collect::<Result<_>>()?;
        let paths: Vec<PathSpec> = config
            .vehicles
            .iter()
            .zip(&maneuvers)
            .map(|(v, m)| build_path(*m, geo, v.initial_distance))
            .collect::<Result<_>>()?;
        let topology = build_conflict_topology(&maneuvers, &paths, geo);
        let routes = paths
            .iter()
            .zip(&maneuvers)
            .map(|(p, m)| RouteInfo {
                s_merge: p.s_merge,
                v_max: config.optimizer.v_max(m.kind),
            })
            .collect::<Vec<_>>();
        let vehicles = config
            .vehicles
            .iter()
            .zip(&maneuvers)
            .enumerate()
            .map(|(id, (spec, m))| {
                let v_max = routes[id].v_max;
                let mut state = VehicleState {
                    id,
                    maneuver: *m,
                    v_max,
                    s: 0.0,
                    v: spec.initial_speed.min(v_max),
                    a: 0.0,
                    pose: Pose::default(),
                    d: spec.initial_distance,
                    zone: Zone::Approach,
                    commitment: CommitmentState::default(),
                    opinion: OpinionState::neutral(),
                };
                state.place(&paths[id], geo);
                state
            })
            .collect::<Vec<_>>();
        let hold_radius = (geo.decision_radius - config.optimizer.hold_offset).max(0.0);
        let hold_s = paths.iter().map(|p| p.s_entering(hold_radius)).collect();
        Ok(Self {
            t: 0.0,
            ticks: 0,
            hold_s,
            first_t_dz: vec![None; vehicles.len()],
            vehicles,
            paths,
            topology,
            routes,
            l_box: config.gate.l_box(geo),
        })
    }

    pub fn frames(&self) -> Vec<BroadcastFrame> {
        self.vehicles.iter().map(VehicleState::frame).collect()
    }

    pub fn all_exited(&self) -> bool {
        self.vehicles.iter().all(|v| v.sigma() == Sigma::Exit)
    }

    pub fn tick(&mut self, config: &SimConfig) -> Result<TickReport> {
        let geo = &config.intersection;
        let now = self.t;
        let dt = config.dt;
        let n = self.vehicles.len();
        let mut report = TickReport {
            min_clearance: f64::INFINITY,
            ..Default::default()
        };

        // (1) broadcast snapshot and (2) beliefs
        let snapshot = self.frames();
        let beliefs = update_beliefs(&snapshot.iter().map(|f| f.sigma).collect::<Vec<_>>());

        // (3) zones and first decision-zone entry
        for (k, veh) in self.vehicles.iter_mut().enumerate() {
            veh.place(&self.paths[k], geo);
            if veh.zone == Zone::Decision && veh.commitment.t_dz.is_none() {
                veh.commitment.t_dz = Some(now);
                self.first_t_dz[k] = Some(now);
            }
        }

        // (4) gate in ascending (t_dz, id) order on a working view
        let mut working = self.frames();
        let mut order: Vec<usize> = (0..n)
            .filter(|&k| {
                matches!(self.vehicles[k].sigma(), Sigma::Negotiate | Sigma::Yield)
                    && self.vehicles[k].commitment.t_dz.is_some()
            })
            .collect();
        order.sort_by(|&a, &b| {
            let ta = self.vehicles[a].commitment.t_dz.unwrap_or(f64::INFINITY);
            let tb = self.vehicles[b].commitment.t_dz.unwrap_or(f64::INFINITY);
            ta.total_cmp(&tb).then(a.cmp(&b))
        });
        for i in order {
            let veh = &mut self.vehicles[i];
            if veh.sigma() == Sigma::Yield {
                if !check_resumption(&veh.commitment.blockers, &working) {
                    continue;
                }
                veh.commitment.transition(Sigma::Negotiate)?;
                veh.opinion = unfreeze(veh.opinion)?;
                if config.policy == Policy::Proposed
                    && config.resume_timestamp == ResumeTimestamp::Resumption
                {
                    veh.commitment.t_dz = Some(now);
                }
                report.events.push(CommitEvent::new(
                    now,
                    i + 1,
                    Sigma::Yield,
                    Sigma::Negotiate,
                    None,
                ));
                working[i] = veh.frame();
            }
            let decision = match config.policy {
                Policy::Proposed => evaluate_gate(
                    i,
                    &working,
                    &self.topology,
                    &self.routes,
                    now,
                    self.l_box,
                    &config.gate,
                )?,
                Policy::Fcfs => {
                    fcfs_baseline_gate(i, &working, &self.topology, &self.routes, now, self.l_box)?
                }
            };
            let veh = &mut self.vehicles[i];
            match decision {
                GateDecision::Hold => continue,
                GateDecision::CommitGo(window) => {
                    veh.commitment.transition(Sigma::Go)?;
                    veh.commitment.window = Some(window);
                    veh.opinion = freeze(veh.opinion, Decision::Go)?;
                    report.events.push(CommitEvent::new(
                        now,
                        i + 1,
                        Sigma::Negotiate,
                        Sigma::Go,
                        Some(window),
                    ));
                }
                GateDecision::CommitYield { blockers } => {
                    veh.commitment.transition(Sigma::Yield)?;
                    veh.commitment.blockers = blockers;
                    veh.opinion = freeze(veh.opinion, Decision::Yield)?;
                    report.events.push(CommitEvent::new(
                        now,
                        i + 1,
                        Sigma::Negotiate,
                        Sigma::Yield,
                        None,
                    ));
                }
            }
            working[i] = veh.frame();
        }

        // (5) opinions of unfrozen negotiating vehicles, from the snapshot
        for i in 0..n {
            let veh = &self.vehicles[i];
            if veh.sigma() != Sigma::Negotiate || veh.opinion.is_frozen() {
                continue;
            }
            let sets = channel_sets(i, &self.topology, &beliefs);
            let signals = channel_signals(&sets, |j| snapshot[j].z);
            let z = veh.opinion.z();
            let internal = internal_state(z, signals, &config.opinion);
            let zone = if veh.zone == Zone::Decision {
                AttentionZone::Decision
            } else {
                AttentionZone::Evolution
            };
            let u = attention(zone, z, &config.opinion);
            self.vehicles[i].opinion = step_opinion(veh.opinion, internal, u, dt, &config.opinion);
        }

        // (6) accelerations, from the snapshot
        let instants = prediction_instants(&config.optimizer);
        let accels: Vec<f64> = (0..n)
            .map(|i| {
                let veh = &self.vehicles[i];
                if veh.sigma() == Sigma::Exit {
                    return 0.0;
                }
                let neighbors = self.neighbors(i, &snapshot, &instants, geo);
                let path = &self.paths[i];
                let ego = Ego {
                    s: veh.s,
                    v: veh.v,
                    v_max: veh.v_max,
                    d: veh.d,
                    dist_to_go: (path.s_leaving(geo.decision_radius) - veh.s).max(0.0),
                    sigma: veh.sigma(),
                    z: veh.opinion.z(),
                    stop_gap: self.stop_gap(i, &snapshot, config),
                };
                select_acceleration(&ego, path, &neighbors, dt, &config.optimizer, geo).0
            })
            .collect();

        // (7) integration and (8) exit checks
        let t_next = ((self.ticks + 1) as f64 * dt * 1e9).round() / 1e9;
        for (i, veh) in self.vehicles.iter_mut().enumerate() {
            let (ds, v) = advance(veh.v, accels[i], dt, veh.v_max);
            veh.s += ds;
            veh.v = v;
            veh.a = accels[i];
            veh.place(&self.paths[i], geo);
            if check_exit(veh.sigma(), veh.zone) {
                veh.commitment.transition(Sigma::Exit)?;
                veh.commitment.exit_time = Some(t_next);
                veh.opinion = OpinionState::new(veh.opinion.z());
                report.events.push(CommitEvent::new(
                    t_next,
                    i + 1,
                    Sigma::Go,
                    Sigma::Exit,
                    None,
                ));
            }
        }
        self.t = t_next;
        self.ticks += 1;

        // (9) safety checks
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&self.vehicles[i], &self.vehicles[j]);
                if a.sigma() == Sigma::Exit && b.sigma() == Sigma::Exit {
                    continue;
                }
                let (c, _) = collision_check(&[a.pose, b.pose], geo);
                report.min_clearance = report.min_clearance.min(c);
                if a.sigma() == Sigma::Go && b.sigma() == Sigma::Go && self.topology.crosses(i, j) {
                    if let (Some(wa), Some(wb)) = (a.commitment.window, b.commitment.window) {
                        if !crossing_feasible(&wa, &wb, &config.gate) {
                            report.window_violations += 1;
                        }
                    }
                }
            }
        }
        for (i, veh) in self.vehicles.iter().enumerate() {
            if veh.sigma() != Sigma::Yield
                || veh.d >= geo.decision_radius - YIELD_MARGIN
                || veh.zone == Zone::Exited
            {
                continue;
            }
            let active = (0..n).any(|j| {
                self.topology.conflicts(i, j)
                    && self.vehicles[j].sigma() == Sigma::Go
                    && self.vehicles[j]
                        .commitment
                        .window
                        .is_some_and(|w| w.contains(t_next))
            });
            if active {
                report.yield_intrusions += 1;
            }
        }

        // (10) trace rows
        report.rows = self
            .vehicles
            .iter()
            .map(|veh| TraceRow {
                t: t_next,
                id: veh.id + 1,
                x: veh.pose.x,
                y: veh.pose.y,
                heading: veh.pose.heading,
                v: veh.v,
                a: veh.a,
                z: veh.opinion.z(),
                sigma: veh.sigma().letter(),
                zone: veh.zone.to_string(),
                d: veh.d,
            })
            .collect();
        Ok(report)
    }

    /// Distance left to the hold line while `i` negotiates on the approach
    /// with a conflicting vehicle that is inside the evolution radius and has
    /// not exited. Such a vehicle might still win the intersection, so `i`
    /// keeps the option of stopping.
    fn stop_gap(&self, i: usize, snapshot: &[BroadcastFrame], config: &SimConfig) -> Option<f64> {
        let params = &config.optimizer;
        let veh = &self.vehicles[i];
        if !params.stop_line_readiness
            || veh.sigma() != Sigma::Negotiate
            || veh.s >= self.paths[i].s_center
        {
            return None;
        }
        let r_dec = config.intersection.decision_radius;
        // the ego at its current speed against each rival at its quickest
        let mine = (snapshot[i].d - r_dec).max(0.0) / snapshot[i].v.max(0.1);
        let contested = snapshot.iter().enumerate().any(|(j, f)| {
            if j == i || !self.topology.conflicts(i, j) {
                return false;
            }
            match f.zone {
                Zone::Decision => true,
                Zone::Evolution => {
                    let theirs =
                        time_to_cover(f.d - r_dec, f.v, params.a_max, self.routes[j].v_max);
                    theirs <= mine + params.readiness_margin
                }
                _ => false,
            }
        });
        contested.then(|| self.hold_s[i] - veh.s)
    }

    /// Conflicting neighbors of `i` as seen in the snapshot. Crossing partners
    /// always count; merge partners only while both are near the shared lane.
    fn neighbors(
        &self,
        i: usize,
        snapshot: &[BroadcastFrame],
        instants: &[f64],
        geo: &IntersectionParams,
    ) -> Vec<Neighbor> {
        let me = &snapshot[i];
        (0..snapshot.len())
            .filter(|&j| j != i)
            .filter_map(|j| {
                let other = &snapshot[j];
                let relation = if self.topology.crosses(i, j) {
                    Relation::Crossing
                } else if self.topology.merges(i, j)
                    && me.d < geo.evolution_radius
                    && other.d < geo.evolution_radius
                {
                    Relation::Merge
                } else {
                    return None;
                };
                Some(Neighbor {
                    sigma: other.sigma,
                    z: other.z,
                    d: other.d,
                    position: other.position,
                    predicted: instants
                        .iter()
                        .map(|tau| self.paths[j].pose_extended(other.s + other.v * tau).point())
                        .collect(),
                    relation,
                })
            })
            .collect()
    }
}

/// Shortest time to travel `distance` from speed `v` accelerating at `a`
/// up to `v_max`.
fn time_to_cover(distance: f64, v: f64, a: f64, v_max: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let v = v.min(v_max);
    let t_sat = (v_max - v) / a;
    let d_sat = v * t_sat + 0.5 * a * t_sat * t_sat;
    if distance >= d_sat {
        t_sat + (distance - d_sat) / v_max
    } else {
        (-v + (v * v + 2.0 * a * distance).sqrt()) / a
    }
}

/// Runs until every vehicle has exited or `max_time` is reached.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    let mut world = World::new(config)?;
    let mut result = SimResult {
        policy: config.policy,
        trace: Vec::new(),
        events: Vec::new(),
        exit_times: Vec::new(),
        first_t_dz: Vec::new(),
        last_exit_time: None,
        min_clearance: f64::INFINITY,
        collision: false,
        timeout: false,
        end_time: 0.0,
        window_violations: 0,
        yield_intrusions: 0,
    };
    let max_ticks = (config.max_time / config.dt).round() as u64;
    let mut ticks = 0;
    while !world.all_exited() && ticks < max_ticks {
        let report = world.tick(config)?;
        ticks += 1;
        result.trace.extend(report.rows);
        result.events.extend(report.events);
        result.min_clearance = result.min_clearance.min(report.min_clearance);
        result.window_violations += report.window_violations;
        result.yield_intrusions += report.yield_intrusions;
    }
    result.exit_times = world
        .vehicles
        .iter()
        .map(|v| v.commitment.exit_time)
        .collect();
    result.first_t_dz = world.first_t_dz.clone();
    result.timeout = !world.all_exited();
    result.last_exit_time = if result.timeout {
        None
    } else {
        result.exit_times.iter().flatten().copied().reduce(f64::max)
    };
    result.collision = result.min_clearance <= 0.0;
    result.end_time = world.t;
    Ok(result)
}
