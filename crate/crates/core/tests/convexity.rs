mod common;

#[test]
fn squared_distance_hessians_are_psd() {
    common::distance_hessians(1000, 21).unwrap();
}

#[test]
fn rate_in_slack_is_midpoint_convex() {
    common::rate_slack_midpoint_convexity(1000, 22).unwrap();
}

#[test]
fn aligned_phases_reach_the_coherent_maximum() {
    common::phase_optimality(1000, 8, 23).unwrap();
}
