//! Reference values computed independently at 40-digit precision.

use hetdata_core::statics::{aggregate_output, theorem1_report, threshold_sensitivity};
use hetdata_core::threshold::{f_threshold, solve_threshold, tail_expectation};
use hetdata_core::wealth::expected_capital;
use hetdata_core::ModelParams;

fn close(got: f64, want: f64, rel: f64) {
    assert!(((got - want) / want).abs() <= rel, "got {got}, want {want}");
}

#[test]
fn thresholds_at_reference_parameters() {
    let p = ModelParams::reference();
    for (tau, mu_k, m) in [
        (0.3, 0.084_693_409_581_323_63, 0.466_250_f64),
        (0.5, 0.501_302_272_166_653_9, 0.308_079_203_215_256_8),
        (0.6, 0.701_826_932_051_050_3, 0.241_393_550_437_103_6),
    ] {
        let sol = solve_threshold(tau, &p).unwrap();
        assert!((sol.mu_k - mu_k).abs() < 1e-10, "tau={tau}");
        assert!((sol.m - m).abs() < 1e-5);
        assert!(sol.residual.abs() < 1e-12);
    }
    close(f_threshold(0.6, 0.3, &p).unwrap(), 1.112_479_730_708_360_5, 1e-12);
}

#[test]
fn tail_mean_at_zero() {
    close(tail_expectation(0.0, 0.0, 1.0).unwrap(), 2.774_285_957_670_009_5, 1e-13);
}

#[test]
fn sensitivity_against_numerical_derivative() {
    let p = ModelParams::reference();
    close(threshold_sensitivity(0.5, &p).unwrap(), 1.981_844_984_738_256_5, 1e-10);
    close(threshold_sensitivity(0.2, &p).unwrap(), 2.922_178_005_628_832, 1e-10);
}

#[test]
fn aggregate_output_value() {
    let p = ModelParams::reference();
    close(aggregate_output(0.3, -0.02, &p).unwrap(), 1.225_043_137_574_081_5, 1e-13);
}

#[test]
fn expected_capital_worked_example() {
    let p = ModelParams::reference();
    close(expected_capital(&p, 1.0, 2.0).unwrap(), 0.287_407_899_555_405_84, 1e-14);
}

#[test]
fn high_low_report_values() {
    let r = theorem1_report(0.3, 0.6, &ModelParams::reference()).unwrap();
    close(r.lambda_h, 3.112_068_830_691_026_3, 1e-10);
    close(r.lambda_l, 2.108_954_330_956_154_8, 1e-10);
    assert_eq!((r.d_l, r.d_h), (0.3, 0.6));
    close(r.z_h, 0.6f64.sqrt(), 1e-15);
}
