use adaug_core::safe::acc::{run_acc_scenario, AccScenarioConfig, AccVariant};

#[test]
fn adaptive_filter_keeps_the_following_distance_safe() {
    let cfg = AccScenarioConfig::default();
    let ignore = run_acc_scenario(AccVariant::IgnoreUncertainty, &cfg).unwrap();
    let adaptive = run_acc_scenario(AccVariant::Adaptive, &cfg).unwrap();
    assert!(
        ignore.min_h < 0.0,
        "ignoring the disturbance should violate h >= 0, min h {}",
        ignore.min_h
    );
    assert!(adaptive.min_h >= 0.0, "min h {}", adaptive.min_h);
    assert_eq!(adaptive.infeasible_steps, 0);
    let err = adaptive.estimate_error_sup.unwrap();
    assert!(err <= adaptive.gamma, "{err} > {}", adaptive.gamma);
    assert!(ignore.estimate_error_sup.is_none());
    assert!(adaptive.final_state.iter().all(|v| v.is_finite()));
}

#[test]
fn known_disturbance_stays_near_the_boundary() {
    // discrete-time filtering of the exact disturbance only overshoots slightly
    let t = run_acc_scenario(AccVariant::TrueUncertainty, &AccScenarioConfig::default()).unwrap();
    assert!(t.min_h > -0.1, "min h {}", t.min_h);
    assert_eq!(t.gamma, 0.0);
}
