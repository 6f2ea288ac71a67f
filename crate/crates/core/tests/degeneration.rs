use conedet::degeneration::*;
use conedet::report::csv_string;
use proptest::prelude::*;

fn ladder() -> Vec<f64> {
    (3..=7).map(|k| 2f64.powi(-k)).collect()
}

#[test]
fn rows_are_deterministic() {
    let c = SweepConfig::default();
    let (a, _) = measure_rows(&c).unwrap();
    let (b, _) = measure_rows(&c).unwrap();
    assert_eq!(csv_string(&a).unwrap(), csv_string(&b).unwrap());
}

#[test]
fn measured_slope_is_stable_when_dropping_the_largest_eps() {
    let (rows, excluded) = measure_rows(&SweepConfig::default()).unwrap();
    assert!(excluded.is_empty());
    let f = fit_model(&rows, true, 0.0).unwrap();
    assert!(f.coeffs[0].abs() < 1e-3);
    assert!(f.drop_change[1] < f.sigma[1] && f.drop_change[2] < f.sigma[2]);
    // successive differences shrink like ε²
    let r = f.remainder.unwrap();
    assert!((r.delta - 2.0).abs() < 0.2, "{}", r.delta);
}

#[test]
fn small_family_converges() {
    let sweep = SweepConfig { epsilons: ladder()[..3].to_vec(), ..Default::default() };
    let fam = FamilyConfig { lambda_max: 30.0, i_max: 6, ..Default::default() };
    let r = family_convergence(&sweep, &fam).unwrap();
    assert!(r.gaps_decrease);
    assert!(r.trace_decreases);
    assert!(r.decay_ok);
    assert!(r.lambda01 > 0.5 && r.lambda01 < 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_models_are_recovered(c2 in -0.1f64..0.1, c1 in -1.0f64..1.0, c0 in -5.0f64..5.0) {
        let rows: Vec<SweepRow> = ladder()
            .into_iter()
            .map(|e| {
                let x = e.ln();
                SweepRow { epsilon: e, log_epsilon: x, log_det: c2 * x * x + c1 * x + c0, uncertainty: 0.0, area: 1.0 }
            })
            .collect();
        let f = fit_model(&rows, false, 0.0).unwrap();
        prop_assert!((f.coeffs[0] - c2).abs() < 1e-9);
        prop_assert!((f.coeffs[1] - c1).abs() < 1e-8);
        prop_assert!((f.coeffs[2] - c0).abs() < 1e-8);
    }

    #[test]
    fn shifting_log_det_moves_only_c0(shift in -3.0f64..3.0) {
        let (rows, _) = cached_rows();
        let moved: Vec<SweepRow> = rows.iter().map(|r| SweepRow { log_det: r.log_det + shift, ..*r }).collect();
        let a = fit_model(&rows, false, 0.0).unwrap();
        let b = fit_model(&moved, false, 0.0).unwrap();
        prop_assert!((b.coeffs[2] - a.coeffs[2] - shift).abs() < 1e-9);
        prop_assert!((b.coeffs[1] - a.coeffs[1]).abs() < 1e-9);
    }
}

fn cached_rows() -> (Vec<SweepRow>, Vec<ExcludedRow>) {
    static ROWS: std::sync::OnceLock<(Vec<SweepRow>, Vec<ExcludedRow>)> = std::sync::OnceLock::new();
    ROWS.get_or_init(|| measure_rows(&SweepConfig::default()).unwrap()).clone()
}
