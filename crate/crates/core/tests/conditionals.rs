mod common;

use common::Check;

fn assert_check(c: Check) {
    match c {
        Ok(detail) => println!("{detail}"),
        Err(detail) => panic!("{detail}"),
    }
}

#[test]
fn indicator_frequencies_match_ten_point_posterior() {
    assert_check(common::check_z());
}

#[test]
fn beta_matches_dense_gls() {
    assert_check(common::check_beta());
}

#[test]
fn factors_match_scalar_conjugate_update() {
    assert_check(common::check_factors());
}

#[test]
fn loadings_match_scalar_conjugate_update() {
    assert_check(common::check_loadings());
}

#[test]
fn phi_matches_stacked_gls() {
    assert_check(common::check_phi());
}

#[test]
fn truncated_phi_matches_rejection_oracle() {
    assert_check(common::check_phi_truncated());
}

#[test]
fn rho_chain_matches_grid_quadrature() {
    assert_check(common::check_rho_grid());
}

#[test]
fn likelihood_matches_reduced_form() {
    assert_check(common::check_likelihood());
}

#[test]
fn marginal_likelihood_sums_over_every_indicator_configuration() {
    use logarch::sampler::{log_likelihood, marginal_log_likelihood};
    use logarch::MixtureTable;
    let table = MixtureTable::standard();
    let data = common::small_data(3, 1, 2, 21);
    let mut state = common::small_state(3, 1, 2, 1, 22);
    let mut terms = Vec::with_capacity(1000);
    for code in 0..1000usize {
        let z = [code % 10, (code / 10) % 10, code / 100];
        state.z = z.iter().map(|&j| j as u8).collect();
        let prior: f64 = z.iter().map(|&j| table.p[j].ln()).sum();
        terms.push(prior + log_likelihood(&data, &state, &table).unwrap());
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let brute = max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let common = &state.lambda * &state.factors;
    let got = marginal_log_likelihood(
        &data,
        state.rho,
        state.gamma,
        state.delta,
        state.beta.as_slice(),
        Some(&common),
        &table,
    )
    .unwrap();
    assert!((got - brute).abs() < 1e-10, "{got} vs {brute}");
}
