use soliton_lab::classify::{chaos_onset, regime_report};
use soliton_lab::closed_forms::{audit_catalog, Variant, Verdict};
use soliton_lab::maps::MapFamily;
use soliton_lab::pde::{evolve, soliton_fidelity_tracked, soliton_setup, EvolveConfig};
use soliton_lab::reductions::to_difference_map;
use soliton_lab::{EquationSpec, Family, Regime};

#[test]
fn every_corrected_form_passes_the_audit() {
    let reports = audit_catalog(1e-8).unwrap();
    assert!(!reports.is_empty());
    for r in reports.iter().filter(|r| r.variant == Variant::Corrected) {
        assert_eq!(
            r.verdict,
            Verdict::Pass,
            "{:?} residual {:e}",
            r.form_id,
            r.max_abs_residual
        );
    }
}

#[test]
fn quadratic_cascade_brackets_its_accumulation_point() {
    let onset = chaos_onset(MapFamily::Quadratic).unwrap();
    assert!((onset.thresholds[0] - 0.75).abs() < 1e-6);
    assert!((onset.thresholds[1] - 1.25).abs() < 1e-6);
    let acc = onset.accumulation.unwrap();
    assert!(onset.thresholds.iter().all(|&t| t < acc));
    assert!((acc - 1.401155).abs() < 1e-4, "{acc}");
}

#[test]
fn regime_reports_use_the_derived_map_parameter() {
    let eqs = [
        EquationSpec::KdV { sigma: 6.0, u: 4.0 },
        EquationSpec::QuarticOscillator { h: 1.0, b: 1.0 },
        EquationSpec::Logistic { alpha_e: 1.0 },
    ];
    for eq in eqs {
        let report = regime_report(&eq).unwrap();
        assert_eq!(report.mu, to_difference_map(&eq).unwrap().map.parameter);
        if report.regime == Regime::Chaotic {
            assert!(report.lyapunov > 0.0, "{report:?}");
        }
    }
}

#[test]
fn kdv_soliton_keeps_shape_and_speed() {
    let eq = EquationSpec::KdV { sigma: 6.0, u: 4.0 };
    let setup = soliton_setup(&eq, 256, 40.0).unwrap();
    let cfg = EvolveConfig::new(Family::KdV, 1e-4, 10_000, 10_000);
    let run = evolve(&eq, &setup.state, &cfg).unwrap();
    let f = soliton_fidelity_tracked(&setup.state, run.last(), setup.expected_speed, setup.tracking).unwrap();
    assert!((f.peak_speed_estimate.unwrap() - 4.0).abs() < 0.04, "{f:?}");
    assert!(f.shape_l2_error < 1e-3, "{f:?}");
    assert!(run.ledger.max_drift("integral").unwrap() < 1e-8);
}
