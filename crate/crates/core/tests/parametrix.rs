use conedet::heattrace::log_grid;
use conedet::parametrix::*;

fn report() -> ParametrixReport {
    let g = default_glued(0.7, 0.125).unwrap();
    let cfg = ParametrixConfig { m_max: 6, times: log_grid(0.05, 0.5, 4), ..Default::default() };
    parametrix_report(&g, &cfg).unwrap()
}

#[test]
fn three_terms_reconstruct_the_trace() {
    let rep = report();
    assert!(rep.all_match);
    for r in &rep.rows {
        assert!(r.difference.abs() <= r.error, "t = {}: {} > {}", r.t, r.difference, r.error);
        assert!(r.error < 1e-9 * r.spectral);
    }
    // the correction terms fall off as t → 0
    let first = &rep.rows[0];
    let last = rep.rows.last().unwrap();
    assert!(first.tr_eg.abs() < 1e-3 * last.tr_eg.abs());
    assert!(first.tr_keg.abs() < first.tr_eg.abs());
}

#[test]
fn parametrix_trace_error_decays_fast() {
    let rep = report();
    assert!(rep.slope_g_minus_h >= 3.0, "slope {}", rep.slope_g_minus_h);
}

#[test]
fn neumann_series_obeys_factorial_envelope() {
    let rep = report();
    assert!(rep.envelope_ok && rep.ratio_ok);
    for n in &rep.neumann {
        assert!(n.converged);
        assert!(n.resolved >= 3);
        assert!(n.partial_sum_gap < 1e-8 * n.k_sup);
    }
}

#[test]
fn grids_expose_support_and_weights() {
    let g = default_glued(0.7, 0.125).unwrap();
    let cfg = ParametrixConfig { m_max: 2, lambda_mesh: 400.0, ..Default::default() };
    let k = component_heat_kernels(&g, &cfg).unwrap();
    let e = error_kernel(&k, &[0.1, 0.2]);
    let gp = build_parametrix(&k, &[0.1, 0.2]);
    assert_eq!(e.rows, k.band);
    let w = WeightFunction { epsilon: 0.125 };
    assert_eq!(e.weighted_sup(1, 0, &w, 0.0), e.sup(1, 0));
    // G carries a trace of the right size: area/4πt at leading order
    let area = conedet::geometry::area(&g.profile, None).unwrap().value;
    let tr = gp.trace(0);
    assert!(tr > 0.0 && tr < 2.0 * area / (4.0 * std::f64::consts::PI * 0.1));
    assert!(e.kernel(0, 1, 0, 0).is_finite());
}
