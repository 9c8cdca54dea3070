mod common;

use logarch::shrinkage::TauConditional;

#[test]
fn standard_sampler_passes_joint_distribution_test() {
    match common::check_geweke() {
        Ok(d) => println!("{d}"),
        Err(d) => panic!("{d}"),
    }
}

#[test]
fn shrinkage_sampler_passes_joint_distribution_test() {
    let z = common::geweke_shrinkage(TauConditional::Exact, 100_000, 200_000, 93);
    println!("{z:.2?}");
    assert!(z.iter().all(|v| v.abs() < 4.0), "{z:.2?}");
}

#[test]
fn printed_scale_update_fails_joint_distribution_test() {
    let z = common::geweke_shrinkage(TauConditional::Printed, 100_000, 200_000, 93);
    println!("{z:.2?}");
    assert!(z.iter().any(|v| v.abs() > 4.0), "{z:.2?}");
}
