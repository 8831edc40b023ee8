//! Fixtures shared by the benchmarks.

use soliton_lab::closed_forms::{ClosedFormEntry, FormId};
use soliton_lab::pde::{soliton_setup, SolitonSetup};
use soliton_lab::reductions::{travelling_wave_reduce, IntegrationConstants};
use soliton_lab::{EquationSpec, QuadratureOde, Variant};

pub fn kdv() -> EquationSpec {
    EquationSpec::KdV { sigma: 6.0, u: 4.0 }
}

pub fn nls() -> EquationSpec {
    EquationSpec::Nls {
        k: 2.0,
        u_e: 1.0,
        u_c: -1.2,
        phi0: 0.0,
    }
}

pub fn sine_gordon() -> EquationSpec {
    EquationSpec::SineGordon { lambda: 0.5, u: 0.5 }
}

/// Desk-scale soliton for `eq`: KdV and NLS on 256 points, fields on 512.
pub fn setup(eq: &EquationSpec) -> SolitonSetup {
    let (n, length) = match eq {
        EquationSpec::KdV { .. } => (256, 40.0),
        EquationSpec::Nls { .. } => (256, 60.0),
        _ => (512, 80.0),
    };
    soliton_setup(eq, n, length).expect("bench fixture")
}

/// KdV travelling-wave quadrature with the soliton's vanishing constants.
pub fn kdv_quadrature() -> QuadratureOde {
    travelling_wave_reduce(&kdv(), IntegrationConstants::default()).expect("bench fixture")
}

pub fn kdv_profile() -> ClosedFormEntry {
    ClosedFormEntry::canonical(FormId::KdvSech2, Variant::PaperLiteral).expect("bench fixture")
}
