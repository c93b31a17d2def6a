//! Shared proptest strategies for the unit tests.

use proptest::prelude::*;

use crate::model::{
    EnergyParams, OffloadDecision, RadioParams, ScenarioInstance, TaskSpec, UserState,
    DEFAULT_FADE_FLOOR,
};

pub(crate) fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn arb_task() -> impl Strategy<Value = TaskSpec> {
    (0.0..10.0f64, 0.0..20.0f64, 0.0..5.0f64, 0.0..5.0f64)
        .prop_map(|(l, b, c, y)| TaskSpec::new(l, b, c, y))
}

fn arb_user() -> impl Strategy<Value = UserState> {
    (DEFAULT_FADE_FLOOR..5.0f64, 0.0..10.0f64).prop_map(|(beta, g)| UserState::new(beta, g))
}

pub(crate) fn arb_scenario(max_users: usize) -> impl Strategy<Value = ScenarioInstance> {
    let radio = (0.5..2.0f64, 0.5..2.0f64, 0.5..10.0f64, 0.5..10.0f64).prop_map(
        |(bandwidth, noise, snr_bs, snr_user)| RadioParams {
            bandwidth,
            noise,
            snr_bs,
            snr_user,
        },
    );
    (1..=max_users)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(arb_task(), k),
                proptest::collection::vec(arb_user(), k),
            )
        })
        .prop_flat_map(move |(tasks, users)| {
            (Just(tasks), Just(users), radio.clone(), 0.0..3.0f64, 1.0..60.0f64)
        })
        .prop_map(|(tasks, users, radio, g0, slot)| ScenarioInstance {
            radio,
            energy: EnergyParams {
                server_energy_per_cycle: g0,
            },
            tasks,
            users,
            slot,
            fade_floor: DEFAULT_FADE_FLOOR,
        })
}

pub(crate) fn arb_scenario_with_decision(
    max_users: usize,
) -> impl Strategy<Value = (ScenarioInstance, OffloadDecision)> {
    arb_scenario(max_users).prop_flat_map(|s| {
        let k = s.num_users();
        (Just(s), proptest::collection::vec(any::<bool>(), k))
            .prop_map(|(s, flags)| (s, OffloadDecision::new(flags)))
    })
}
