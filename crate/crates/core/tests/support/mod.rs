//! Reference implementations shared by the oracle tests and the acceptance
//! target. Each one is written from the model definitions and avoids the
//! library code it is checking.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigcross_core::engine::SimConfig;
use sigcross_core::gate::OccupancyWindow;
use sigcross_core::geometry::{build_path, maneuver, IntersectionParams, PathSpec, Point};
use sigcross_core::opinion::{
    attention, internal_state, step_opinion, AttentionZone, ChannelSignals, OpinionParams,
    OpinionState,
};
use sigcross_core::optimizer::{
    select_acceleration, Ego, Neighbor, OptimizerParams, ProgressDistance, Relation,
};
use sigcross_core::scenario::Scenario;
use sigcross_core::Sigma;

pub const DT: f64 = 0.05;

pub fn bundled(name: &str) -> SimConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    Scenario::load(&path).unwrap().config
}

// ---- opinion ----

pub fn signals(suppression: f64, permission: f64, coordination: f64) -> ChannelSignals {
    ChannelSignals {
        suppression,
        permission,
        coordination,
    }
}

/// Runs the coupled update (internal state and attention re-evaluated at the
/// current opinion) for `steps` ticks and returns the whole trajectory.
pub fn trajectory(
    z0: f64,
    s: ChannelSignals,
    zone: AttentionZone,
    steps: usize,
    p: &OpinionParams,
) -> Vec<f64> {
    let mut state = OpinionState::new(z0);
    let mut out = vec![state.z()];
    for _ in 0..steps {
        let i = internal_state(state.z(), s, p);
        let u = attention(zone, state.z(), p);
        state = step_opinion(state, i, u, DT, p);
        out.push(state.z());
    }
    out
}

/// Root of `damping * z - (1 + tanh(u(z) * I(z))) / 2` on [0, 1] by bisection.
pub fn equilibrium_by_bisection(s: ChannelSignals, zone: AttentionZone, p: &OpinionParams) -> f64 {
    let residual = |z: f64| {
        let u0 = match zone {
            AttentionZone::Evolution => p.u0_evolution,
            AttentionZone::Decision => p.u0_decision,
        };
        let u = u0 + p.k_u * (z - 0.5) * (z - 0.5);
        let i = p.alpha_self * (z - 0.5) - p.alpha_suppression * s.suppression
            + p.alpha_permission * s.permission
            + p.alpha_coordination * s.coordination;
        p.damping * z - 0.5 * (1.0 + (u * i).tanh())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---- occupancy windows ----

/// Window endpoints live on a 1/64 s lattice, so counting 1/1024 s cells
/// measures the overlap exactly, and no overlap can equal 0.6 exactly.
pub const LATTICE: f64 = 64.0;
const CELLS_PER_UNIT: i64 = 1024;

pub fn lattice_window(rng: &mut ChaCha8Rng) -> OccupancyWindow {
    let start = rng.gen_range(0..20 * LATTICE as i64) as f64 / LATTICE;
    let len = rng.gen_range(1..4 * LATTICE as i64) as f64 / LATTICE;
    OccupancyWindow {
        start,
        end: start + len,
    }
}

pub fn brute_force_overlap(a: &OccupancyWindow, b: &OccupancyWindow) -> f64 {
    let lo = (a.start.min(b.start) * CELLS_PER_UNIT as f64) as i64;
    let hi = (a.end.max(b.end) * CELLS_PER_UNIT as f64) as i64;
    let inside = |w: &OccupancyWindow, t: f64| w.start <= t && t <= w.end;
    let shared = (lo..hi)
        .filter(|&k| {
            let mid = (k as f64 + 0.5) / CELLS_PER_UNIT as f64;
            inside(a, mid) && inside(b, mid)
        })
        .count();
    shared as f64 / CELLS_PER_UNIT as f64
}

// ---- acceleration choice ----

/// Distance covered in `tau` seconds from speed `v` under constant `a`, with
/// the speed held inside `[0, v_max]`.
pub fn travelled(v: f64, a: f64, tau: f64, v_max: f64) -> f64 {
    // split the interval where the speed would leave [0, v_max]
    let limit = if a > 0.0 {
        (v_max - v) / a
    } else if a < 0.0 {
        v / -a
    } else {
        f64::INFINITY
    };
    let t1 = limit.clamp(0.0, tau);
    let moving = v * t1 + 0.5 * a * t1 * t1;
    let held_speed = if a > 0.0 {
        v_max
    } else if a < 0.0 {
        0.0
    } else {
        v
    };
    moving + held_speed * (tau - t1)
}

pub fn speed_after(v: f64, a: f64, tau: f64, v_max: f64) -> f64 {
    (v + a * tau).clamp(0.0, v_max)
}

pub fn oracle_cost(
    a: f64,
    ego: &Ego,
    path: &PathSpec,
    neighbors: &[Neighbor],
    p: &OptimizerParams,
    g: &IntersectionParams,
) -> f64 {
    let r = g.decision_radius;
    let vp = speed_after(ego.v, a, DT, ego.v_max);

    let w_prog = match ego.sigma {
        Sigma::Go if ego.d <= r => 10.0 * p.w_p,
        Sigma::Negotiate => (0.5 + ego.z) * p.w_p,
        _ => p.w_p,
    };
    let dist = match p.progress_distance {
        ProgressDistance::Center => ego.d,
        ProgressDistance::ToGo => ego.dist_to_go,
    };
    let progress = w_prog * dist / vp.max(0.1);

    let comfort = p.w_c * a * a;

    let inside_go = ego.sigma == Sigma::Go && ego.d <= r;
    let k = p.separation_samples;
    let mut spatial = 0.0;
    for step in 1..=k {
        let tau = p.horizon * step as f64 / k as f64;
        let mut ahead = travelled(ego.v, a, tau, ego.v_max);
        if p.cap_at_hold_line {
            if let Some(gap) = ego.stop_gap {
                ahead = ahead.min(gap.max(0.0));
            }
        }
        let me = path.pose_extended(ego.s + ahead).point();
        for n in neighbors {
            let skip = inside_go
                && n.relation == Relation::Crossing
                && !(p.go_repulsion && n.sigma == Sigma::Go);
            if skip {
                continue;
            }
            let w = match n.sigma {
                Sigma::Go => p.w_com,
                Sigma::Negotiate if n.d < g.evolution_radius => p.w_dec * (0.5 + n.z),
                _ => p.w_evo,
            };
            let gap = me.distance(n.predicted[step - 1]);
            spatial += w * (-(gap - p.d_safe) / 2.0).exp();
        }
    }
    spatial /= k as f64;

    let yielding = match ego.sigma {
        Sigma::Yield if ego.d <= r => p.w_com * vp,
        Sigma::Yield => 0.05 * p.w_com * vp * (-(ego.d - r) / 6.0).exp(),
        _ => 0.0,
    };
    progress + comfort + spatial + yielding
}

pub fn admissible(a: f64, ego: &Ego, p: &OptimizerParams) -> bool {
    match ego.stop_gap {
        None => true,
        Some(gap) => {
            let v1 = speed_after(ego.v, a, DT, ego.v_max);
            let room = (gap - travelled(ego.v, a, DT, ego.v_max)).max(0.0);
            v1 * v1 <= 2.0 * p.readiness_decel * room + 1e-9
        }
    }
}

/// Returns the oracle's choice and its cost.
pub fn oracle(
    ego: &Ego,
    path: &PathSpec,
    neighbors: &[Neighbor],
    p: &OptimizerParams,
    g: &IntersectionParams,
) -> (f64, f64) {
    let n = p.n_candidates;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..n {
        let a = p.a_min + (p.a_max - p.a_min) * k as f64 / (n - 1) as f64;
        if !admissible(a, ego, p) {
            continue;
        }
        let c = oracle_cost(a, ego, path, neighbors, p, g);
        best = match best {
            Some((ba, bc)) => {
                let tied = (bc - c).abs() <= 1e-12 * bc.abs().max(1.0);
                let keep = if tied {
                    (ba.abs(), ba) <= (a.abs(), a)
                } else {
                    bc < c
                };
                Some(if keep { (ba, bc) } else { (a, c) })
            }
            None => Some((a, c)),
        };
    }
    best.unwrap_or_else(|| (p.a_min, oracle_cost(p.a_min, ego, path, neighbors, p, g)))
}

fn random_sigma(rng: &mut ChaCha8Rng) -> Sigma {
    [Sigma::Negotiate, Sigma::Go, Sigma::Yield][rng.gen_range(0..3)]
}

fn random_point(rng: &mut ChaCha8Rng, span: f64) -> Point {
    Point::new(rng.gen_range(-span..span), rng.gen_range(-span..span))
}

/// Every route of the default layout, extended 60 m upstream.
pub fn all_routes(g: &IntersectionParams) -> Vec<PathSpec> {
    [1u8, 3, 5, 7]
        .iter()
        .flat_map(|&i| [1u8, 3, 5].map(move |off| (i, (i - 1 + off) % 8 + 1)))
        .map(|(i, o)| build_path(maneuver(i, o).unwrap(), g, 60.0).unwrap())
        .collect()
}

pub enum Agreement {
    Exact,
    /// The choices differ but their costs tie to floating-point precision.
    Tie,
}

/// Draws one random optimizer state and compares the library's choice with
/// the oracle's.
pub fn compare_random_state(
    rng: &mut ChaCha8Rng,
    routes: &[PathSpec],
    g: &IntersectionParams,
) -> Result<Agreement, String> {
    let mut p = OptimizerParams {
        horizon: rng.gen_range(0.5..2.5),
        separation_samples: rng.gen_range(1..6),
        go_repulsion: rng.gen_bool(0.5),
        cap_at_hold_line: rng.gen_bool(0.5),
        ..OptimizerParams::default()
    };
    if rng.gen_bool(0.3) {
        p.progress_distance = ProgressDistance::Center;
    }
    let path = &routes[rng.gen_range(0..routes.len())];
    let s = rng.gen_range(0.0..path.total_length);
    let v_max = rng.gen_range(6.0..11.5);
    let ego = Ego {
        s,
        v: rng.gen_range(0.0..v_max),
        v_max,
        d: path.pose_clamped(s).point().norm(),
        dist_to_go: rng.gen_range(0.0..40.0),
        sigma: random_sigma(rng),
        z: rng.gen_range(0.0..1.0),
        stop_gap: rng.gen_bool(0.4).then(|| rng.gen_range(-1.0..15.0)),
    };
    let neighbors: Vec<Neighbor> = (0..rng.gen_range(0..4))
        .map(|_| Neighbor {
            sigma: random_sigma(rng),
            z: rng.gen_range(0.0..1.0),
            d: rng.gen_range(0.0..30.0),
            position: random_point(rng, 12.0),
            predicted: (0..p.separation_samples)
                .map(|_| random_point(rng, 12.0))
                .collect(),
            relation: if rng.gen_bool(0.5) {
                Relation::Crossing
            } else {
                Relation::Merge
            },
        })
        .collect();

    let (a, cost) = select_acceleration(&ego, path, &neighbors, DT, &p, g);
    let (a_ref, cost_ref) = oracle(&ego, path, &neighbors, &p, g);
    let same_cost = (cost.total - cost_ref).abs() <= 1e-9 * cost_ref.abs().max(1.0);
    match ((a - a_ref).abs() <= 1e-9, same_cost) {
        (true, true) => Ok(Agreement::Exact),
        (false, true) => Ok(Agreement::Tie),
        _ => Err(format!(
            "chose {a} ({}) but oracle {a_ref} ({cost_ref})",
            cost.total
        )),
    }
}
