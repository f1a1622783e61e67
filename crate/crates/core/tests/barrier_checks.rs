//! Cutoff family, exhaustion certification, and conformal stretch.

use krflow::barriers::{
    b_of_kappa, build_cutoff, build_exhaustion, conformal_stretch, eval_f, StretchBoundParams,
};
use krflow::error::KrfError;
use krflow::geometry::{Background, MetricState, RadialGrid};

#[test]
fn f_closed_form_examples() {
    // f(1 - kappa) = 0 for any kappa
    for kappa in [0.01, 0.05, 0.09, 0.12] {
        assert_eq!(eval_f(kappa, 1.0 - kappa).unwrap(), 0.0);
        assert_eq!(eval_f(kappa, -5.0).unwrap(), 0.0);
    }
    // kappa = 0.1, s = 0.95: -log(1 - 1/4) = log(4/3)
    let v = eval_f(0.1, 0.95).unwrap();
    assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    // blow-up toward s = 1
    assert!(eval_f(0.1, 1.0 - 1e-13).unwrap() > 25.0);
    assert!(eval_f(0.1, 1.0).is_err());
    assert!(eval_f(0.1, 1.5).is_err());
}

#[test]
fn cutoff_rejects_kappa_out_of_range() {
    assert!(build_cutoff(0.0).is_err());
    assert!(build_cutoff(0.125).is_err());
    assert!(build_cutoff(0.2).is_err());
    assert!(build_cutoff(0.05).is_ok());
}

#[test]
fn frak_f_vanishes_below_one_minus_kappa_exactly() {
    for kappa in [0.01, 0.05, 0.09] {
        let fam = build_cutoff(kappa).unwrap();
        for i in 0..=1000 {
            let s = (1.0 - kappa) * i as f64 / 1000.0;
            assert_eq!(fam.frak_f(s).unwrap(), 0.0);
        }
    }
}

#[test]
fn frak_f_matches_f_up_to_a_constant_past_the_transition() {
    // phi = 1 there, so frakF' = f' and differences agree with f
    for kappa in [0.01, 0.05, 0.09] {
        let fam = build_cutoff(kappa).unwrap();
        let j2 = 1.0 - kappa + 2.0 * kappa * kappa;
        let base = fam.frak_f(j2).unwrap();
        let f_base = eval_f(kappa, j2).unwrap();
        for i in 1..=50 {
            let s = j2 + (1.0 - 1e-6 - j2) * i as f64 / 50.0;
            let lhs = fam.frak_f(s).unwrap() - base;
            let rhs = eval_f(kappa, s).unwrap() - f_base;
            assert!((lhs - rhs).abs() < 1e-9, "kappa {kappa}, s {s}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn frak_f_prime_is_nonnegative_and_consistent_with_quadrature() {
    let fam = build_cutoff(0.1).unwrap_or_else(|_| build_cutoff(0.09).unwrap());
    let kappa = fam.kappa;
    let h = 1e-6;
    for i in 0..10_000 {
        let s = (1.0 - 1e-5) * i as f64 / 10_000.0;
        let fp = fam.frak_f_prime(s);
        assert!(fp >= 0.0);
        if s > h && s < 1.0 - kappa * 0.5 {
            let numeric =
                (fam.frak_f(s + h).unwrap() - fam.frak_f(s - h).unwrap()) / (2.0 * h);
            assert!(
                (numeric - fp).abs() < 1e-6 * (1.0 + fp.abs()),
                "s = {s}: {numeric} vs {fp}"
            );
        }
    }
}

#[test]
fn b_of_kappa_is_finite_and_sample_stable() {
    for kappa in [0.01, 0.05, 0.09] {
        let fam = build_cutoff(kappa).unwrap();
        let b1 = b_of_kappa(&fam, 10_000);
        let b2 = b_of_kappa(&fam, 20_000);
        assert!(b1.is_finite() && b1 > 0.0);
        assert!((b2 - b1).abs() / b1 < 0.01, "kappa {kappa}: {b1} vs {b2}");
        // the region s <= 1 - kappa contributes nothing
        for i in 0..100 {
            let s = (1.0 - kappa) * i as f64 / 100.0;
            assert_eq!(fam.weighted_derivative_sum(s).unwrap(), 0.0);
        }
    }
}

#[test]
fn bump_slope_stays_under_the_stated_bound() {
    for kappa in [0.01, 0.05, 0.09, 0.12] {
        let fam = build_cutoff(kappa).unwrap();
        let j1 = 1.0 - kappa + kappa * kappa;
        let limit = 2.0 / (kappa * kappa);
        let mut max_slope = 0.0f64;
        for i in 0..=5000 {
            let s = j1 + kappa * kappa * i as f64 / 5000.0;
            max_slope = max_slope.max(fam.bump_deriv(s));
        }
        assert!(max_slope <= limit);
        // quintic peak is 1.875/kappa^2
        assert!((max_slope * kappa * kappa - 1.875).abs() < 1e-3);
    }
}

#[test]
fn flat_exhaustion_is_certified() {
    let grid = RadialGrid::new(-2.0, 2.0, 257).unwrap();
    let bg = Background::flat(2, grid.clone()).unwrap();
    let exh = build_exhaustion(&bg).unwrap();
    assert!(exh.certified_bound <= 1.0 + 1e-12);
    let rho = exh.values();
    assert!(rho.iter().all(|&v| v >= 1.0 - 1e-12));
    for w in rho.windows(2) {
        assert!(w[1] > w[0]);
    }
    // |d rho|^2 = |z|^2/(4(1+|z|^2)) <= 1/4 for the unscaled sqrt(1+e^s)
    let raw = grid.sample(|s| (1.0 + s.exp()).sqrt());
    let draw = grid.deriv(&raw);
    for i in 4..253 {
        let grad_sq = draw[i] * draw[i] / bg.xi_h_prime()[i];
        let s = grid.node(i);
        let expect = s.exp() / (4.0 * (1.0 + s.exp()));
        assert!((grad_sq - expect).abs() < 1e-6);
        assert!(grad_sq <= 0.25 + 1e-12);
    }
}

#[test]
fn hyperbolic_exhaustion_is_certified() {
    let grid = RadialGrid::new(-3.0, -0.3, 257).unwrap();
    let bg = Background::complex_hyperbolic(2, grid, -1.0).unwrap();
    let exh = build_exhaustion(&bg).unwrap();
    assert!(exh.certified_bound <= 1.0 + 1e-12);
    assert!(exh.values().iter().all(|&v| v >= 1.0 - 1e-12));
}

#[test]
fn stretch_is_identity_inside_and_diverges_at_the_edge() {
    let nodes = 769;
    let grid = RadialGrid::new(-2.0, 10.0, nodes).unwrap();
    let bg = Background::flat(2, grid.clone()).unwrap();
    let xi0 = grid.sample(f64::exp);
    let st = MetricState::new(bg.clone(), xi0, 0.0, vec![0.0; nodes]).unwrap();
    let fam = build_cutoff(0.1).unwrap_or_else(|_| build_cutoff(0.09).unwrap());
    let exh = build_exhaustion(&bg).unwrap();
    let r_edge = exh.rho_at(grid.s_max());
    let r_param = r_edge - 10.0; // R + 1 well inside the exhaustion range
    let ledger = StretchBoundParams {
        c1_curv: 1.0,
        c_prime_n: 1.0,
        lambda_cap: 2.0,
        b_kappa: 5.0,
        t_k: 0.1,
    };
    let (stretched, report) =
        conformal_stretch(&st, r_param, &fam, &exh, 1e3, Some(&ledger)).unwrap();
    // (a) equality region: multiplication by exactly 1.0
    assert!(report.equal_region_nodes > 100);
    assert_eq!(report.equal_region_drift, 0.0);
    let (rad, sph) = st.eigenvalues().unwrap();
    for i in 0..report.equal_region_nodes {
        assert_eq!(stretched.lambda_rad[i], rad[i]);
        assert_eq!(stretched.lambda_sph[i], sph[i]);
    }
    // (c) e^{2F} >= 1: stretched eigenvalues never fall below the originals
    for (i, f) in stretched.stretch.iter().enumerate() {
        assert!(*f >= 1.0);
        assert!(stretched.lambda_rad[i] >= rad[i] * (1.0 - 1e-15));
    }
    // (b) completeness probe: the log-divergent tail exceeds the threshold
    assert!(report.diverged, "probe distances: {:?}", report.distance_probe);
    for (_, d) in &report.distance_probe {
        assert!(*d >= 1e3);
    }
    assert!(report.ledger_bound.unwrap() > 0.0);
    assert!(report.sup_rm_equal_region < 1e-4); // flat metric
}

#[test]
fn stretch_domain_errors() {
    let nodes = 257;
    let grid = RadialGrid::new(-2.0, 2.0, nodes).unwrap();
    let bg = Background::flat(2, grid.clone()).unwrap();
    let xi0 = grid.sample(f64::exp);
    let st = MetricState::new(bg.clone(), xi0, 0.0, vec![0.0; nodes]).unwrap();
    let fam = build_cutoff(0.09).unwrap();
    let exh = build_exhaustion(&bg).unwrap();
    // R below rho(s_min) + 1
    assert!(matches!(
        conformal_stretch(&st, 0.5, &fam, &exh, 1e3, None),
        Err(KrfError::DomainError(_))
    ));
    // R + 1 beyond the grid's exhaustion range
    assert!(matches!(
        conformal_stretch(&st, 1e6, &fam, &exh, 1e3, None),
        Err(KrfError::DomainError(_))
    ));
}
