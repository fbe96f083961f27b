use minep::*;

fn grid() -> Vec<GaussianDist> {
    let mut out = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let mean = -2.0 + 0.45 * i as f64;
            let var = 0.2 + 0.3 * j as f64;
            out.push(GaussianDist::new(mean, var).unwrap());
        }
    }
    out
}

#[test]
fn parities_coincide_without_drive() {
    let even = OUModel::new(0.0, 1.3, 0.8, Parity::Even).unwrap();
    let odd = even.with_parity(Parity::Odd);
    for mu in grid() {
        let (a, b) = (ou_entropy_production(&even, &mu), ou_entropy_production(&odd, &mu));
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        assert!((ou_dv_rate(&even, &mu) - 0.25 * a).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn odd_drive_breaks_quarter_identity_but_not_modified_one() {
    let odd = OUModel::new(0.7, 1.1, 1.5, Parity::Odd).unwrap();
    let even = odd.with_parity(Parity::Even);
    let rho = odd.stationary();
    let mut broken = 0;
    for mu in grid() {
        let rate = ou_dv_rate(&odd, &mu);
        let sigma = ou_entropy_production(&odd, &mu);
        if (sigma - 4.0 * rate).abs() > 1e-6 {
            broken += 1;
        }
        assert!(ou_modified_identity_check(&odd, &mu).unwrap().abs() <= 1e-12 * sigma.max(1.0));
        let even_sigma = ou_entropy_production(&even, &mu);
        assert!((ou_dv_rate(&even, &mu) - 0.25 * even_sigma).abs() <= 1e-12 * even_sigma.max(1.0));
    }
    assert_eq!(broken, 100);
    assert!(ou_dv_rate(&odd, &rho).abs() <= 1e-15);
    assert!(ou_stationary_entropy_production(&odd) > 0.0);
    assert!(ou_modified_identity_check(&even, &rho).is_err());
}

#[test]
fn closed_forms_match_quadrature() {
    for parity in [Parity::Even, Parity::Odd] {
        let m = OUModel::new(0.4, 0.9, 2.0, parity).unwrap();
        for mu in grid().into_iter().step_by(7) {
            let a = ou_dv_rate(&m, &mu);
            let b = ou_dv_rate_quadrature(&m, &mu).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} {b}");
            let a = ou_entropy_production(&m, &mu);
            let b = ou_entropy_production_quadrature(&m, &mu).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} {b}");
        }
    }
}

#[test]
fn contraction_matches_numerical_minimum() {
    let c = CircuitModel::new(2.0, 0.5, 1.0, 3.0).unwrap();
    let j0 = c.stationary_current();
    assert!(circuit_contracted_rate(&c, j0).abs() <= 1e-15);
    for i in 0..50 {
        let jbar = j0 - 1.5 + 3.0 * i as f64 / 49.0;
        let closed = circuit_contracted_rate(&c, jbar);
        let (numerical, _) = circuit_contracted_rate_numerical(&c, jbar).unwrap();
        assert!((closed - numerical).abs() <= 1e-9 * closed.max(1e-3), "{jbar}: {closed} {numerical}");
    }
}

#[test]
fn maximum_ep_principle_holds_on_constraint_set() {
    let m = OUModel::new(0.8, 1.2, 1.0, Parity::Odd).unwrap();
    // Feasible band here is (var - 1)^2 / var <= 1/9.
    let variances: Vec<f64> = (0..31).map(|i| 0.75 + 0.02 * i as f64).collect();
    assert!(constrained_means(&m, 0.05).is_err());
    let check = ou_max_ep_principle_check(&m, &variances).unwrap();
    assert!(check.holds);
    assert!(check.max_excess <= 1e-12 * check.sigma_rho);
    assert!(check.max_constraint_residual <= 1e-10);
    assert!(check.points.len() > 1);
}
