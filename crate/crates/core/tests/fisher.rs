use proptest::prelude::*;

use starkprobe::eigensolve::{self, SolverOptions};
use starkprobe::metrology::{self, FisherOptions};
use starkprobe::oracle;
use starkprobe::{Eta, ProbeParams, SectorOperator};

#[test]
fn two_site_closed_forms() {
    let fisher = FisherOptions::default();
    for k in 0..20 {
        let h = 0.01 * 1.4f64.powi(k);
        let p = ProbeParams::unit(2, 1, Eta::Finite(0.0), h).unwrap();
        let sol = eigensolve::ground_state(
            &SectorOperator::build(p).unwrap(),
            &SolverOptions::default(),
            true,
        )
        .unwrap();
        let root = (4.0 + h * h).sqrt();
        assert!((sol.energy0 + 1.0 + root).abs() < 1e-8);
        assert!((sol.gap().unwrap() - 2.0 * root).abs() < 1e-8);
        let f = metrology::qfi(&p, &fisher).unwrap();
        let exact = metrology::two_level_qfi(1.0, h);
        assert!(
            ((f.qfi - exact) / exact).abs() < 1e-4,
            "h={h} {} vs {exact}",
            f.qfi
        );
        assert!(((f.cfi.unwrap() - exact) / exact).abs() < 1e-4);
    }
}

#[test]
fn exchange_scales_the_two_site_qfi() {
    let p = ProbeParams::new(2, 1, Eta::Infinite, 0.5, 0.2).unwrap();
    let f = metrology::qfi(&p, &FisherOptions::default()).unwrap();
    let exact = metrology::two_level_qfi(0.5, 0.2);
    assert!(((f.qfi - exact) / exact).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn overlap_qfi_matches_derivative_oracle(
        l in prop::sample::select(vec![4usize, 6, 8]),
        eta in prop::sample::select(vec![Eta::Finite(0.0), Eta::Finite(0.5), Eta::Finite(2.0), Eta::Infinite]),
        log_h in -3.0f64..0.3,
    ) {
        let h = 10f64.powf(log_h);
        let p = ProbeParams::unit(l, l / 2, eta, h).unwrap();
        let fast = metrology::qfi(&p, &FisherOptions::default()).unwrap();
        let slow = oracle::qfi_by_differentiation(&p, 1e-4 * h.max(1e-2)).unwrap();
        prop_assert!(((fast.qfi - slow) / slow).abs() < 5e-3, "{} vs {}", fast.qfi, slow);
    }

    #[test]
    fn classical_bound_holds(
        l in 3usize..=10,
        eta in prop::sample::select(vec![Eta::Finite(0.0), Eta::Finite(1.0), Eta::Finite(5.0), Eta::Infinite]),
        log_h in -4.0f64..0.0,
    ) {
        let p = ProbeParams::unit(l, l / 2, eta, 10f64.powf(log_h)).unwrap();
        let f = metrology::qfi(&p, &FisherOptions::default()).unwrap();
        prop_assert!(f.cfi.unwrap() <= f.qfi * (1.0 + 1e-6), "{:?}", f);
    }
}

#[test]
fn warm_and_cold_lanczos_agree() {
    // above the dense limit, so the Krylov path is exercised
    let p = ProbeParams::unit(12, 6, Eta::Finite(1.0), 0.2).unwrap();
    let op = SectorOperator::build(p).unwrap();
    let cold = eigensolve::ground_state(&op, &SolverOptions::default(), true).unwrap();
    let shifted = op.at_field(0.2001);
    let warm =
        eigensolve::ground_state_from(&shifted, &cold.vector0, &SolverOptions::default(), false)
            .unwrap();
    let again = eigensolve::ground_state(&shifted, &SolverOptions::default(), false).unwrap();
    assert!((warm.energy0 - again.energy0).abs() < 1e-10);
    let overlap: f64 = warm
        .vector0
        .iter()
        .zip(&again.vector0)
        .map(|(a, b)| a * b)
        .sum();
    assert!((overlap.abs() - 1.0).abs() < 1e-10);
    assert!(cold.residual <= 1e-10);
}
