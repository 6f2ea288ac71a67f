use conedet::conekernel::cone_trace_excess;
use conedet::geometry::build_z;
use conedet::heattrace::FitBasis;
use conedet::renorm::*;
use std::f64::consts::PI;

fn z07() -> conedet::geometry::Profile {
    build_z(0.7, "polyblend", &[]).unwrap()
}

#[test]
fn plane_pipeline_is_exactly_zero() {
    let z = build_z(1.0, "polyblend", &[]).unwrap();
    let zc = RenormZetaConfig {
        tau_min: 1e-3,
        small_max: 0.05,
        large_window: (25.0, 400.0),
        ..Default::default()
    };
    let m = RenormModel::build(&z, zc.tau_min, zc.large_window.1, &RenormConfig::default()).unwrap();
    for t in conedet::heattrace::log_grid(1e-3, 400.0, 11) {
        assert!(m.eval(t).unwrap().value.abs() < 1e-8);
    }
    let r = renorm_zeta(&m, &zc).unwrap();
    assert!(r.pole.abs() < 1e-12);
    assert!(r.rzeta0.abs() < 1e-6, "{}", r.rzeta0);
    assert!(r.log_rdet.abs() < 1e-6, "{}", r.log_rdet);
    assert!(r.large_fit.unwrap().f_infty.abs() < 1e-8);
}

#[test]
fn three_routes_agree_at_unit_time() {
    let z = z07();
    let cfg = RenormConfig::default();
    let d = renorm_trace(&z, &[1.0], &cfg).unwrap()[0];
    let split = renorm_trace_split(&z, 1.0, &[0.5, 1.0], 32.0, &cfg).unwrap();
    // split-radius independence
    assert!((split[0].value - split[1].value).abs() < 1e-10);
    assert!((split[0].value - d.value).abs() < 2e-6, "{} {}", split[0].value, d.value);
    let cut = cutoff_regularized_trace(&z, 1.0, &[0.25, 0.125], &cfg).unwrap();
    for c in &cut {
        assert!((c.finite - d.value).abs() < 2e-6, "{} {}", c.finite, d.value);
    }
}

#[test]
fn truncation_and_mesh_doubling() {
    let z = z07();
    let base = renorm_trace(&z, &[0.5], &RenormConfig::default()).unwrap()[0];
    let wide = RenormConfig { margin: 16.0, points_per_wavelength: 24.0, ..Default::default() };
    let other = renorm_trace(&z, &[0.5], &wide).unwrap()[0];
    assert!(other.radius > base.radius);
    assert!((base.value - other.value).abs() < 1e-7, "{} {}", base.value, other.value);
}

#[test]
fn leading_small_time_coefficient_is_renormalized_area() {
    let z = z07();
    let m = RenormModel::build(&z, 1e-3, 0.05, &RenormConfig::default()).unwrap();
    let zc = RenormZetaConfig {
        tau_min: 1e-3,
        small_max: 0.05,
        small_basis: FitBasis { n: 2, k_max: 8, include_odd: true, allow_log: false },
        ..Default::default()
    };
    let f = fit_small_tau(&m, &zc).unwrap();
    let a0 = renormalized_area(&z).unwrap() / (4.0 * PI);
    assert!((f.a(0) - a0).abs() < 1e-3 * a0, "{} {}", f.a(0), a0);
    assert!((f.a(2) - curvature_coefficient(&z).unwrap()).abs() < 5e-3);
}

#[test]
fn large_time_limit_is_cone_constant() {
    let z = z07();
    let m = RenormModel::build(&z, 25.0, 400.0, &RenormConfig::default()).unwrap();
    let zc = RenormZetaConfig::default();
    let pts = large_tau_samples(&m, &zc).unwrap();
    // decays monotonically to f_∞
    assert!(pts.windows(2).all(|w| w[1].value < w[0].value));
    let f = fit_large_tau(&pts, &[1.0, 2.0], false).unwrap();
    assert!((f.f_infty - cone_trace_excess(0.7).unwrap()).abs() < 1e-6);
    // no log τ growth
    let g = fit_large_tau(&pts, &[1.0, 2.0], true).unwrap();
    assert!(g.log_coeff.unwrap().abs() < 1e-5, "{:?}", g.log_coeff);
}
