use hetdata_core::model::ModelParams;
use hetdata_core::statics::{log_output_ratio, theorem1_report, threshold_sensitivity};
use hetdata_core::threshold::{provider_utility, solve_threshold, user_utility};
use hetdata_core::wealth::{expected_capital, solve_lambda, InitialShocks};
use hetdata_core::ModelParams32;

#[test]
fn threshold_in_f32_tracks_f64() {
    let p32 = ModelParams32::reference();
    let p64 = ModelParams::<f64>::reference();
    for tau in [0.2f32, 0.5, 0.8] {
        let a = solve_threshold(tau, &p32).unwrap();
        let b = solve_threshold(tau as f64, &p64).unwrap();
        assert!((a.mu_k as f64 - b.mu_k).abs() < 1e-5, "tau={tau}");
        assert!((a.m as f64 - b.m).abs() < 1e-5);
    }
}

#[test]
fn indifference_in_f32() {
    let p = ModelParams32::reference();
    let sol = solve_threshold(0.4f32, &p).unwrap();
    let vu = user_utility(sol.k, 0.4, &p).unwrap();
    let vs = provider_utility(0.4, sol.m, sol.tail_mean, &p).unwrap();
    assert!((vu - vs).abs() < 1e-5 * vs.abs());
}

#[test]
fn statics_and_wealth_in_f32() {
    let p = ModelParams32::reference();
    assert!(threshold_sensitivity(0.5f32, &p).unwrap() > 0.0);
    assert!(log_output_ratio(1.0f32, 1.0).unwrap() > log_output_ratio(0.5f32, 1.0).unwrap());
    let ek = expected_capital(&p, 1.0f32, 2.0).unwrap();
    assert!((ek - 0.287_407_9).abs() < 1e-6);
    let shocks = InitialShocks::at_means(&p);
    let lo = solve_lambda(0.0f32, &p, &shocks).unwrap().lambda;
    let hi = solve_lambda(0.5f32, &p, &shocks).unwrap().lambda;
    assert!(hi > lo && lo >= 1.0);
    assert!(theorem1_report(0.3f32, 0.6, &p).unwrap().verdicts.all());
}
