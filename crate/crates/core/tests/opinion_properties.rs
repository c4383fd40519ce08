mod support;

use proptest::prelude::*;
use sigcross_core::opinion::{
    attention, freeze, internal_state, step_opinion, AttentionZone, Decision, OpinionParams,
    OpinionState,
};
use support::{equilibrium_by_bisection, signals, trajectory, DT};

#[test]
fn neutral_is_an_exact_fixed_point() {
    let p = OpinionParams::default();
    for zone in [AttentionZone::Evolution, AttentionZone::Decision] {
        let traj = trajectory(0.5, signals(0.0, 0.0, 0.0), zone, 2000, &p);
        assert!(traj.iter().all(|&z| z == 0.5));
    }
}

#[test]
fn suppression_decreases_strictly_until_settled() {
    let p = OpinionParams::default();
    let traj = trajectory(
        0.5,
        signals(1.0, 0.0, 0.0),
        AttentionZone::Decision,
        400,
        &p,
    );
    let z_star = *traj.last().unwrap();
    assert!(z_star < 0.5);
    for w in traj.windows(2) {
        if (w[0] - z_star).abs() > 1e-12 {
            assert!(w[1] < w[0], "not strictly decreasing: {} -> {}", w[0], w[1]);
        }
        assert!(w[1] >= z_star - 1e-12, "overshot the equilibrium");
    }
}

#[test]
fn permission_increases_strictly_until_settled() {
    let p = OpinionParams::default();
    let traj = trajectory(
        0.5,
        signals(0.0, 1.0, 0.0),
        AttentionZone::Decision,
        400,
        &p,
    );
    let z_star = *traj.last().unwrap();
    assert!(z_star > 0.5);
    for w in traj.windows(2) {
        if (w[0] - z_star).abs() > 1e-12 {
            assert!(w[1] > w[0], "not strictly increasing: {} -> {}", w[0], w[1]);
        }
        assert!(w[1] <= z_star + 1e-12, "overshot the equilibrium");
    }
}

#[test]
fn converged_opinions_satisfy_the_fixed_point_equation() {
    let p = OpinionParams::default();
    let cases = [
        signals(1.0, 0.0, 0.0),
        signals(0.0, 1.0, 0.0),
        signals(0.0, 0.0, 1.0),
        signals(0.6, 0.4, 0.3),
        signals(0.2, 0.9, 0.7),
    ];
    for s in cases {
        for zone in [AttentionZone::Evolution, AttentionZone::Decision] {
            let z = *trajectory(0.5, s, zone, 4000, &p).last().unwrap();
            let u = attention(zone, z, &p);
            let i = internal_state(z, s, &p);
            let residual = (p.damping * z - 0.5 * (1.0 + (u * i).tanh())).abs();
            assert!(residual < 1e-6, "{s:?} {zone:?}: residual {residual}");
            let z_ref = equilibrium_by_bisection(s, zone, &p);
            assert!(
                (z - z_ref).abs() < 1e-6,
                "{s:?} {zone:?}: {z} vs bisection {z_ref}"
            );
        }
    }
}

#[test]
fn frozen_states_absorb() {
    let p = OpinionParams::default();
    for (decision, value) in [(Decision::Go, 1.0), (Decision::Yield, 0.0)] {
        let mut state = freeze(OpinionState::new(0.37), decision).unwrap();
        for k in 0..500 {
            let i = if k % 2 == 0 { -40.0 } else { 40.0 };
            state = step_opinion(state, i, 3.0, DT, &p);
            assert_eq!(state.z(), value);
            assert_eq!(state.frozen_value(), Some(value));
        }
    }
}

proptest! {
    #[test]
    fn opinion_stays_in_unit_interval(
        z0 in 0.0f64..=1.0,
        s in 0.0f64..=1.0,
        perm in 0.0f64..=1.0,
        c in 0.0f64..=1.0,
        decision_zone in any::<bool>(),
    ) {
        let p = OpinionParams::default();
        let zone = if decision_zone { AttentionZone::Decision } else { AttentionZone::Evolution };
        for z in trajectory(z0, signals(s, perm, c), zone, 200, &p) {
            prop_assert!((0.0..=1.0).contains(&z));
        }
    }

    #[test]
    fn attention_is_minimal_at_neutral(z in 0.0f64..=1.0) {
        let p = OpinionParams::default();
        for zone in [AttentionZone::Evolution, AttentionZone::Decision] {
            let u = attention(zone, z, &p);
            let u_neutral = attention(zone, 0.5, &p);
            prop_assert!(u >= u_neutral);
            if z != 0.5 {
                prop_assert!(u > u_neutral);
            }
        }
    }
}
