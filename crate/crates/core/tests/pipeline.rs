use cvpriv_core::fisher::{qfim_phase_family, qfim_pure_phase, qfim_tree, DerivativeMethod};
use cvpriv_core::fock::{apply_loss_fock, qfim_fock_mixed, tmss_fock};
use cvpriv_core::measurement::{homodyne_fisher, quadrature_angle, TwoModeScheme};
use cvpriv_core::network::{build_tree_state, encode_phases, split_through_tree};
use cvpriv_core::phase_space::{apply_loss, displace, two_mode_squeezed};
use cvpriv_core::privacy::{analyze, average_direction, KernelTol};
use cvpriv_core::{Complex, DVector, Regime, TreeSpec};
use proptest::prelude::*;

#[test]
fn tree_report_marks_every_mode_private() {
    let spec = TreeSpec::new(3, 0.8).unwrap();
    let q = qfim_pure_phase(&build_tree_state(&spec).unwrap()).unwrap();
    let rep = analyze(&q, &average_direction(8), KernelTol::default()).unwrap();
    assert_eq!(rep.kernel_dim, 1);
    assert_eq!(rep.regime, Regime::Partial);
    assert!(rep.private_flags.iter().all(|&f| f));
    let s = DVector::from_vec(spec.s_vector()) / 8f64.sqrt();
    assert!((rep.kernel_basis.column(0).dot(&s).abs() - 1.0).abs() < 1e-10);
}

#[test]
fn lossy_input_keeps_tree_kernel() {
    let lossy = apply_loss(&two_mode_squeezed(1.0), &[0.6, 0.6]).unwrap();
    let state = split_through_tree(&lossy, 1).unwrap();
    let q = qfim_phase_family(&state, &[0.0; 4], DerivativeMethod::Analytic).unwrap();
    let rep = analyze(&q, &average_direction(4), KernelTol::default()).unwrap();
    assert_eq!(rep.kernel_dim, 1);
    let s = DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]);
    assert!(q.quadratic_form(&s).abs() < 1e-10);
}

#[test]
fn displacement_removes_the_kernel() {
    let s = displace(&two_mode_squeezed(1.0), &[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]).unwrap();
    let rep = analyze(&qfim_pure_phase(&s).unwrap(), &average_direction(2), KernelTol::default()).unwrap();
    assert_eq!(rep.kernel_dim, 0);
    assert_eq!(rep.regime, Regime::None);
}

#[test]
fn homodyne_stays_below_exact_mixed_qfi() {
    for &(r, eta) in &[(0.5, 0.5), (0.75, 0.8)] {
        let scheme = TwoModeScheme::new(r, eta).unwrap();
        let phi = quadrature_angle(r, eta, 0.0, 0.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let f = homodyne_fisher(scheme.probe(), &[0.0, 0.0], &[h, h], &TwoModeScheme::spec(phi)).unwrap();
        let q = qfim_fock_mixed(&apply_loss_fock(&tmss_fock(r, 40).unwrap(), &[eta, eta]).unwrap()).unwrap();
        let v = average_direction(2);
        assert!(f < v.dot(&(&q * &v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_routes_agree(depth in 2u32..=5, r in 0.05f64..2.0) {
        let t = qfim_tree(depth, r).unwrap();
        prop_assert!(t.max_deviation <= 1e-10 * t.direct.max_eigenvalue().max(1.0));
    }

    #[test]
    fn encoding_preserves_privacy(r in 0.1f64..1.5, t in proptest::collection::vec(-3.0f64..3.0, 4)) {
        let tree = build_tree_state(&TreeSpec::new(2, r).unwrap()).unwrap();
        let v = average_direction(4);
        let p0 = analyze(&qfim_pure_phase(&tree).unwrap(), &v, KernelTol::default()).unwrap().p.unwrap();
        let p1 = analyze(&qfim_pure_phase(&encode_phases(&tree, &t).unwrap()).unwrap(), &v, KernelTol::default())
            .unwrap()
            .p
            .unwrap();
        prop_assert!((p0 - p1).abs() < 1e-10);
    }
}
