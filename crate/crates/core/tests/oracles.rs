mod common;

use common::{augmentation, gradients, mixing, optim, presets};

fn run(check: common::Check) {
    match check {
        Ok(summary) => println!("{summary}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn optimizers_match_scalar_oracles() {
    run(optim::optimizer_oracles());
}

#[test]
fn rmsprop_square_average_starts_at_one() {
    run(optim::rmsprop_one_init());
}

#[test]
fn gradients_match_finite_differences() {
    run(gradients::gradient_suite());
}

#[test]
fn mix_events() {
    run(mixing::event_invariants());
}

#[test]
fn batchwise_switch_rate() {
    run(mixing::switch_frequency());
}

#[test]
fn zero_magnitude_is_identity() {
    run(augmentation::zero_magnitude_identity());
}

#[test]
fn magnitude_maps_are_monotone() {
    run(augmentation::magnitude_monotone());
}

#[test]
fn erased_regions_are_standard_normal() {
    run(augmentation::erasing_stats());
}

#[test]
fn presets_match_table() {
    run(presets::golden_table());
}

#[test]
fn configs_round_trip() {
    run(presets::round_trip());
}
