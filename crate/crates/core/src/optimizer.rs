//! Single-step velocity selection over a uniform acceleration grid.
//!
//! Every candidate is scored by four terms: progress toward the exit,
//! acceleration comfort, repulsion from conflicting neighbors and a braking
//! cost while yielding. Progress and neighbor weights are modulated by the
//! vehicle's own opinion and its neighbors' broadcast opinions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::Sigma;
use crate::geometry::{IntersectionParams, ManeuverKind, PathSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerParams {
    pub a_min: f64,
    pub a_max: f64,
    pub n_candidates: usize,
    pub w_p: f64,
    pub w_c: f64,
    pub w_com: f64,
    pub w_dec: f64,
    pub w_evo: f64,
    pub d_safe: f64,
    pub v_max_straight: f64,
    pub v_max_left: f64,
    pub v_max_right: f64,
    pub yield_decay_length: f64,
    pub yield_far_scale: f64,
    /// Look-ahead over which neighbor separation is predicted (s).
    pub horizon: f64,
    pub progress_distance: ProgressDistance,
    /// Measure neighbor separation between positions predicted over the
    /// horizon instead of current positions.
    pub predict_separation: bool,
    /// Evenly spaced prediction instants in `(0, horizon]` whose repulsion
    /// terms are averaged.
    pub separation_samples: usize,
    /// While a conflicting vehicle could reach the decision zone first, a
    /// negotiating vehicle only picks accelerations that keep it able to
    /// stop at the hold line.
    pub stop_line_readiness: bool,
    /// Deceleration assumed when checking that the hold line is reachable (m/s^2).
    pub readiness_decel: f64,
    /// Slack (s) by which a rival may trail the ego to the decision zone
    /// and still force the ego to stay ready to stop.
    pub readiness_margin: f64,
    /// How far inside the decision radius the hold line sits (m).
    pub hold_offset: f64,
    /// Place a stop-constrained vehicle no further than its hold line when
    /// predicting separations, since it is able to stop there.
    pub cap_at_hold_line: bool,
    /// Keep repulsion between two GO vehicles on crossing paths inside the
    /// decision zone. Off by default: committed crossers rely on their
    /// windows alone. Windows assume travel at the speed limit, though, so a
    /// vehicle that commits from a crawl occupies the box longer than its
    /// window says, and this restores a spacing incentive for that case.
    pub go_repulsion: bool,
}

/// Distance that the progress term divides by the predicted speed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressDistance {
    /// Straight-line distance to the intersection center.
    Center,
    /// Remaining path length until the vehicle leaves the decision zone.
    #[default]
    ToGo,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            a_min: -5.0,
            a_max: 2.5,
            n_candidates: 15,
            w_p: 1.0,
            w_c: 0.5,
            w_com: 1000.0,
            w_dec: 10.0,
            w_evo: 1.0,
            d_safe: 3.0,
            v_max_straight: 11.1,
            v_max_left: 8.0,
            v_max_right: 7.0,
            yield_decay_length: 6.0,
            yield_far_scale: 0.05,
            horizon: 1.0,
            progress_distance: ProgressDistance::ToGo,
            predict_separation: true,
            separation_samples: 4,
            stop_line_readiness: true,
            readiness_decel: 3.0,
            readiness_margin: 0.0,
            hold_offset: 0.1,
            cap_at_hold_line: true,
            go_repulsion: false,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min < 0.0 && 0.0 < self.a_max && self.n_candidates >= 2) {
            return Err(Error::invalid(
                "optimizer",
                "a_min < 0 < a_max, n_candidates >= 2",
            ));
        }
        if !(self.w_com > self.w_dec && self.w_dec > self.w_evo && self.w_evo > 0.0) {
            return Err(Error::invalid("optimizer", "w_com > w_dec > w_evo > 0"));
        }
        if !(self.v_max_straight > self.v_max_left
            && self.v_max_left > self.v_max_right
            && self.v_max_right > 0.0)
        {
            return Err(Error::invalid(
                "optimizer",
                "v_max_straight > v_max_left > v_max_right > 0",
            ));
        }
        if !(self.w_p > 0.0 && self.w_c >= 0.0 && self.d_safe >= 0.0) {
            return Err(Error::invalid(
                "optimizer",
                "w_p > 0, w_c >= 0, d_safe >= 0",
            ));
        }
        let horizon_ok =
            self.horizon > 0.0 && self.horizon.is_finite() && self.separation_samples >= 1;
        if !(self.yield_decay_length > 0.0 && self.yield_far_scale >= 0.0 && horizon_ok) {
            return Err(Error::invalid(
                "optimizer",
                "yield_decay_length > 0, yield_far_scale >= 0, horizon > 0, separation_samples >= 1",
            ));
        }
        if !(self.readiness_decel > 0.0
            && self.readiness_decel <= -self.a_min
            && self.hold_offset >= 0.0
            && self.readiness_margin >= 0.0)
        {
            return Err(Error::invalid(
                "optimizer",
                "0 < readiness_decel <= -a_min, hold_offset >= 0, readiness_margin >= 0",
            ));
        }
        Ok(())
    }

    pub fn v_max(&self, kind: ManeuverKind) -> f64 {
        match kind {
            ManeuverKind::Straight => self.v_max_straight,
            ManeuverKind::Left => self.v_max_left,
            ManeuverKind::Right => self.v_max_right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub j_prog: f64,
    pub j_comf: f64,
    pub j_spat: f64,
    pub j_yield: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn new(j_prog: f64, j_comf: f64, j_spat: f64, j_yield: f64) -> Self {
        Self {
            j_prog,
            j_comf,
            j_spat,
            j_yield,
            total: j_prog + j_comf + j_spat + j_yield,
        }
    }
}

/// The deciding vehicle as seen by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ego {
    pub s: f64,
    pub v: f64,
    pub v_max: f64,
    /// Distance from the intersection center.
    pub d: f64,
    /// Remaining path length to the exit boundary.
    pub dist_to_go: f64,
    pub sigma: Sigma,
    pub z: f64,
    /// Remaining path length to the hold line when the ego must stay able to
    /// stop there; `None` when unconstrained.
    pub stop_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Crossing,
    Merge,
}

/// A conflicting neighbor from the broadcast snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub sigma: Sigma,
    pub z: f64,
    pub d: f64,
    pub position: Point,
    /// Positions extrapolated along the neighbor's path at its current speed,
    /// one per instant of [`prediction_instants`].
    pub predicted: Vec<Point>,
    pub relation: Relation,
}

/// The instants `horizon * k / samples` for `k = 1..=samples`.
pub fn prediction_instants(params: &OptimizerParams) -> Vec<f64> {
    let k = params.separation_samples;
    (1..=k)
        .map(|i| params.horizon * i as f64 / k as f64)
        .collect()
}

/// Uniform grid over `[a_min, a_max]`, both ends included.
pub fn candidate_grid(params: &OptimizerParams) -> Vec<f64> {
    let n = params.n_candidates;
    let step = (params.a_max - params.a_min) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                params.a_max
            } else {
                params.a_min + k as f64 * step
            }
        })
        .collect()
}

/// Exact constant-acceleration motion over `dt` with speed saturated to
/// `[0, v_max]`; returns (distance travelled, final speed).
pub fn advance(v: f64, a: f64, dt: f64, v_max: f64) -> (f64, f64) {
    let v_end = v + a * dt;
    if v_end < 0.0 {
        let t_stop = if a < 0.0 { v / -a } else { 0.0 };
        (0.5 * v * t_stop, 0.0)
    } else if v_end > v_max {
        let t_sat = if a > 0.0 {
            ((v_max - v) / a).max(0.0)
        } else {
            0.0
        };
        (
            v * t_sat + 0.5 * a * t_sat * t_sat + v_max * (dt - t_sat),
            v_max,
        )
    } else {
        (v * dt + 0.5 * a * dt * dt, v_end)
    }
}

pub fn predicted_speed(v: f64, a: f64, dt: f64, v_max: f64) -> f64 {
    (v + a * dt).min(v_max).max(0.0)
}

pub fn progress_weight(sigma: Sigma, z: f64, d: f64, decision_radius: f64, w_p: f64) -> f64 {
    match sigma {
        Sigma::Go if d <= decision_radius => 10.0 * w_p,
        Sigma::Negotiate => (0.5 + z) * w_p,
        _ => w_p,
    }
}

pub fn progress_cost(
    a: f64,
    ego: &Ego,
    dt: f64,
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> f64 {
    let v_pred = predicted_speed(ego.v, a, dt, ego.v_max);
    let w = progress_weight(
        ego.sigma,
        ego.z,
        ego.d,
        geometry.decision_radius,
        params.w_p,
    );
    let distance = match params.progress_distance {
        ProgressDistance::Center => ego.d,
        ProgressDistance::ToGo => ego.dist_to_go,
    };
    w * distance / v_pred.max(0.1)
}

pub fn comfort_cost(a: f64, params: &OptimizerParams) -> f64 {
    params.w_c * a * a
}

pub fn neighbor_weight(
    n: &Neighbor,
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> f64 {
    match n.sigma {
        Sigma::Go => params.w_com,
        Sigma::Negotiate if n.d < geometry.evolution_radius => params.w_dec * (0.5 + n.z),
        _ => params.w_evo,
    }
}

/// Repulsion from conflicting neighbors at the given separations. Crossing
/// terms vanish while the ego is GO inside the decision zone.
pub fn spatial_cost(
    ego_sigma: Sigma,
    ego_d: f64,
    terms: &[(&Neighbor, f64)],
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> f64 {
    let committed_inside = ego_sigma == Sigma::Go && ego_d <= geometry.decision_radius;
    let suppressed = |n: &Neighbor| {
        committed_inside
            && n.relation == Relation::Crossing
            && !(params.go_repulsion && n.sigma == Sigma::Go)
    };
    terms
        .iter()
        .filter(|(n, _)| !suppressed(n))
        .map(|(n, d_ij)| {
            neighbor_weight(n, params, geometry) * (-0.5 * (d_ij - params.d_safe)).exp()
        })
        .sum()
}

pub fn yield_cost(
    a: f64,
    ego: &Ego,
    dt: f64,
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> f64 {
    if ego.sigma != Sigma::Yield {
        return 0.0;
    }
    let v_pred = predicted_speed(ego.v, a, dt, ego.v_max);
    let r = geometry.decision_radius;
    if ego.d <= r {
        params.w_com * v_pred
    } else {
        params.yield_far_scale
            * params.w_com
            * v_pred
            * (-(ego.d - r) / params.yield_decay_length).exp()
    }
}

/// Full cost of candidate `a`. `path` is the ego's own route and places the
/// candidate's predicted positions; `dt` is the step used for `v_pred`.
pub fn evaluate_candidate(
    a: f64,
    ego: &Ego,
    path: &PathSpec,
    neighbors: &[Neighbor],
    dt: f64,
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> CostBreakdown {
    let j_spat = if params.predict_separation {
        let instants = prediction_instants(params);
        let total: f64 = instants
            .iter()
            .enumerate()
            .map(|(k, &tau)| {
                let mut ds = advance(ego.v, a, tau, ego.v_max).0;
                if let (true, Some(gap)) = (params.cap_at_hold_line, ego.stop_gap) {
                    ds = ds.min(gap.max(0.0));
                }
                let me = path.pose_extended(ego.s + ds).point();
                let terms: Vec<(&Neighbor, f64)> = neighbors
                    .iter()
                    .map(|n| (n, me.distance(n.predicted[k])))
                    .collect();
                spatial_cost(ego.sigma, ego.d, &terms, params, geometry)
            })
            .sum();
        total / instants.len() as f64
    } else {
        let me = path.pose_extended(ego.s).point();
        let terms: Vec<(&Neighbor, f64)> = neighbors
            .iter()
            .map(|n| (n, me.distance(n.position)))
            .collect();
        spatial_cost(ego.sigma, ego.d, &terms, params, geometry)
    };
    CostBreakdown::new(
        progress_cost(a, ego, dt, params, geometry),
        comfort_cost(a, params),
        j_spat,
        yield_cost(a, ego, dt, params, geometry),
    )
}

/// Whether candidate `a` leaves the ego able to stop within its stop gap
/// when braking at `readiness_decel`.
pub fn stop_admissible(a: f64, ego: &Ego, dt: f64, params: &OptimizerParams) -> bool {
    let Some(gap) = ego.stop_gap else {
        return true;
    };
    let (ds, v) = advance(ego.v, a, dt, ego.v_max);
    v * v <= 2.0 * params.readiness_decel * (gap - ds).max(0.0) + 1e-9
}

/// Grid argmin over the stop-admissible candidates; exact ties go to the
/// smaller |a|, then the smaller a. When no candidate is admissible the
/// hardest braking is returned.
pub fn select_acceleration(
    ego: &Ego,
    path: &PathSpec,
    neighbors: &[Neighbor],
    dt: f64,
    params: &OptimizerParams,
    geometry: &IntersectionParams,
) -> (f64, CostBreakdown) {
    let mut best: Option<(f64, CostBreakdown)> = None;
    for a in candidate_grid(params) {
        if !stop_admissible(a, ego, dt, params) {
            continue;
        }
        let cost = evaluate_candidate(a, ego, path, neighbors, dt, params, geometry);
        let better = match &best {
            None => true,
            Some((ba, bc)) => {
                cost.total < bc.total || (cost.total == bc.total && (a.abs(), a) < (ba.abs(), *ba))
            }
        };
        if better {
            best = Some((a, cost));
        }
    }
    best.unwrap_or_else(|| {
        let a = params.a_min;
        (
            a,
            evaluate_candidate(a, ego, path, neighbors, dt, params, geometry),
        )
    })
}
