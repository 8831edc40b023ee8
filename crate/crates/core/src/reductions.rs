//! Continuum equation families, their travelling-wave reductions to
//! `phi'^2 = P(phi)`, and the difference maps associated with them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classify::{CHAOS_ONSET_QUOTED, FULL_REGION_MAX, SINGLE_SOLUTION_MAX, TWO_BRANCH_MAX};
use crate::error::{Error, Result};
use crate::maps::MapSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Nls,
    KdV,
    CubicKleinGordon,
    QuarticOscillator,
    NonlinearDiracDensity,
    Logistic,
    SineGordon,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Nls,
        Family::KdV,
        Family::CubicKleinGordon,
        Family::QuarticOscillator,
        Family::NonlinearDiracDensity,
        Family::Logistic,
        Family::SineGordon,
    ];

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Family::Nls => "nls",
            Family::KdV => "kdv",
            Family::CubicKleinGordon => "kg",
            Family::QuarticOscillator => "quartic",
            Family::NonlinearDiracDensity => "dirac",
            Family::Logistic => "logistic",
            Family::SineGordon => "sg",
        }
    }

    /// Parameter names accepted by [`EquationSpec::from_params`], with defaults.
    pub fn parameter_defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::Nls => &[("k", 2.0), ("u_e", 1.0), ("u_c", -1.5), ("phi0", 1.0)],
            Family::KdV => &[("sigma", 6.0), ("u", 4.0)],
            Family::CubicKleinGordon => &[("m", 1.0), ("a", 2.0), ("u", 0.0)],
            Family::QuarticOscillator => &[("H", 2.0), ("b", 1.0)],
            Family::NonlinearDiracDensity => &[("l0", 1.0)],
            Family::Logistic => &[("alphaE", 1.0)],
            Family::SineGordon => &[("lambda", 0.5), ("u", 0.0)],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let f = match s.to_ascii_lowercase().as_str() {
            "nls" => Family::Nls,
            "kdv" => Family::KdV,
            "kg" | "klein-gordon" | "cubic-kg" => Family::CubicKleinGordon,
            "quartic" | "quartic-oscillator" => Family::QuarticOscillator,
            "dirac" | "dirac-density" => Family::NonlinearDiracDensity,
            "logistic" => Family::Logistic,
            "sg" | "sine-gordon" => Family::SineGordon,
            other => return Err(Error::InvalidArgument(format!("unknown equation `{other}`"))),
        };
        Ok(f)
    }
}

/// An equation family with its physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum EquationSpec {
    /// `phi_xx + i phi_t + k |phi|^2 phi = 0`
    Nls { k: f64, u_e: f64, u_c: f64, phi0: f64 },
    /// `psi_t + sigma psi psi_x + psi_xxx = 0`
    KdV { sigma: f64, u: f64 },
    /// `phi_xx - phi_tt - m^2 phi + a phi^3 = 0`
    CubicKleinGordon { m: f64, a: f64, u: f64 },
    /// `phi'' + H phi - b phi^3 = 0`, and the field `phi_xx - phi_tt + H phi - b phi^3 = 0`
    QuarticOscillator {
        #[serde(rename = "H")]
        h: f64,
        b: f64,
    },
    /// `d rho / d eta = l0^2 rho (2 rho - 1)`
    NonlinearDiracDensity { l0: f64 },
    /// `dF/dt = F (alphaE - F)`
    Logistic {
        #[serde(rename = "alphaE")]
        alpha_e: f64,
    },
    /// `phi_xx - phi_tt = (pi lambda^2 / 2) sin(2 pi phi)`
    SineGordon { lambda: f64, u: f64 },
}

impl EquationSpec {
    pub fn family(&self) -> Family {
        match self {
            EquationSpec::Nls { .. } => Family::Nls,
            EquationSpec::KdV { .. } => Family::KdV,
            EquationSpec::CubicKleinGordon { .. } => Family::CubicKleinGordon,
            EquationSpec::QuarticOscillator { .. } => Family::QuarticOscillator,
            EquationSpec::NonlinearDiracDensity { .. } => Family::NonlinearDiracDensity,
            EquationSpec::Logistic { .. } => Family::Logistic,
            EquationSpec::SineGordon { .. } => Family::SineGordon,
        }
    }

    /// Builds a spec from named parameters, filling the family defaults.
    pub fn from_params(family: Family, params: &BTreeMap<String, f64>) -> Result<Self> {
        let defaults = family.parameter_defaults();
        if let Some(unknown) = params.keys().find(|k| !defaults.iter().any(|(n, _)| n == k)) {
            return Err(Error::InvalidArgument(format!(
                "parameter `{unknown}` is not defined for {family}"
            )));
        }
        let get = |name: &str| {
            params.get(name).copied().unwrap_or_else(|| {
                defaults
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| *v)
                    .expect("default exists")
            })
        };
        let spec = match family {
            Family::Nls => EquationSpec::Nls {
                k: get("k"),
                u_e: get("u_e"),
                u_c: get("u_c"),
                phi0: get("phi0"),
            },
            Family::KdV => EquationSpec::KdV {
                sigma: get("sigma"),
                u: get("u"),
            },
            Family::CubicKleinGordon => EquationSpec::CubicKleinGordon {
                m: get("m"),
                a: get("a"),
                u: get("u"),
            },
            Family::QuarticOscillator => EquationSpec::QuarticOscillator {
                h: get("H"),
                b: get("b"),
            },
            Family::NonlinearDiracDensity => EquationSpec::NonlinearDiracDensity { l0: get("l0") },
            Family::Logistic => EquationSpec::Logistic { alpha_e: get("alphaE") },
            Family::SineGordon => EquationSpec::SineGordon {
                lambda: get("lambda"),
                u: get("u"),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Named parameter values, keyed as in [`Family::parameter_defaults`].
    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            EquationSpec::Nls { k, u_e, u_c, phi0 } => vec![("k", k), ("u_e", u_e), ("u_c", u_c), ("phi0", phi0)],
            EquationSpec::KdV { sigma, u } => vec![("sigma", sigma), ("u", u)],
            EquationSpec::CubicKleinGordon { m, a, u } => vec![("m", m), ("a", a), ("u", u)],
            EquationSpec::QuarticOscillator { h, b } => vec![("H", h), ("b", b)],
            EquationSpec::NonlinearDiracDensity { l0 } => vec![("l0", l0)],
            EquationSpec::Logistic { alpha_e } => vec![("alphaE", alpha_e)],
            EquationSpec::SineGordon { lambda, u } => vec![("lambda", lambda), ("u", u)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Checks finiteness and the relativistic speed limit.
    pub fn validate(&self) -> Result<()> {
        if let Some((name, v)) = self.params().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {name} = {v} is not finite")));
        }
        match *self {
            EquationSpec::CubicKleinGordon { u, .. } | EquationSpec::SineGordon { u, .. } if u.abs() >= 1.0 => Err(
                Error::InvalidArgument(format!("speed |u| = {} must be below 1", u.abs())),
            ),
            _ => Ok(()),
        }
    }

    /// Whether the parameters sit in the regime where the family's soliton exists.
    pub fn soliton_regime(&self) -> bool {
        match *self {
            EquationSpec::Nls { k, u_e, u_c, .. } => k > 0.0 && nls_a(u_e, u_c) > 0.0,
            EquationSpec::KdV { sigma, u } => u > 0.0 && sigma != 0.0,
            EquationSpec::CubicKleinGordon { m, a, u } => a > 0.0 && m != 0.0 && u.abs() < 1.0,
            EquationSpec::QuarticOscillator { h, b } => h > 0.0 && b > 0.0,
            EquationSpec::NonlinearDiracDensity { l0 } => l0 != 0.0,
            EquationSpec::Logistic { alpha_e } => alpha_e > 0.0,
            EquationSpec::SineGordon { lambda, u } => lambda != 0.0 && u.abs() < 1.0,
        }
    }
}

/// `a = (u_e/2)^2 - u_e u_c / 2`, the linear coefficient of the reduced NLS envelope equation.
pub fn nls_a(u_e: f64, u_c: f64) -> f64 {
    (u_e / 2.0).powi(2) - u_e * u_c / 2.0
}

/// Integration constants of the reduction; `None` selects the soliton choice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConstants {
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "C0", skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(rename = "C1", skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

impl IntegrationConstants {
    pub fn with_c(c: f64) -> Self {
        Self {
            c: Some(c),
            ..Self::default()
        }
    }

    pub fn with_c0_c1(c0: f64, c1: f64) -> Self {
        Self {
            c0: Some(c0),
            c1: Some(c1),
            ..Self::default()
        }
    }
}

/// `dphi/deta = branch_sign * sqrt(P(phi))` with `P` of degree at most four.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOde {
    /// `c0..c4` of `P(phi) = c0 + c1 phi + c2 phi^2 + c3 phi^3 + c4 phi^4`.
    pub poly_coeffs: [f64; 5],
    pub branch_sign: f64,
    pub source: EquationSpec,
    /// Constants actually used, defaults resolved.
    pub constants: IntegrationConstants,
}

impl QuadratureOde {
    pub fn p(&self, phi: f64) -> f64 {
        let c = &self.poly_coeffs;
        c[0] + phi * (c[1] + phi * (c[2] + phi * (c[3] + phi * c[4])))
    }

    pub fn dp(&self, phi: f64) -> f64 {
        let c = &self.poly_coeffs;
        c[1] + phi * (2.0 * c[2] + phi * (3.0 * c[3] + phi * 4.0 * c[4]))
    }

    /// `phi''` implied by differentiating `phi'^2 = P(phi)`.
    pub fn second_derivative(&self, phi: f64) -> f64 {
        0.5 * self.dp(phi)
    }

    pub fn with_branch(mut self, sign: f64) -> Self {
        self.branch_sign = if sign < 0.0 { -1.0 } else { 1.0 };
        self
    }
}

/// Substitutes a travelling-wave ansatz and integrates once.
pub fn travelling_wave_reduce(eq: &EquationSpec, constants: IntegrationConstants) -> Result<QuadratureOde> {
    eq.validate()?;
    let (poly_coeffs, resolved) = match *eq {
        EquationSpec::Nls { k, u_e, u_c, .. } => {
            let c = constants.c.unwrap_or(0.0);
            let a = nls_a(u_e, u_c);
            ([c, 0.0, a, 0.0, -k / 2.0], IntegrationConstants::with_c(c))
        }
        EquationSpec::KdV { sigma, u } => {
            let c0 = constants.c0.unwrap_or(0.0);
            let c1 = constants.c1.unwrap_or(0.0);
            ([c1, c0, u, -sigma / 3.0, 0.0], IntegrationConstants::with_c0_c1(c0, c1))
        }
        EquationSpec::CubicKleinGordon { m, a, .. } => {
            let c = constants.c.unwrap_or(0.0);
            ([c, 0.0, m * m, 0.0, -a / 2.0], IntegrationConstants::with_c(c))
        }
        EquationSpec::QuarticOscillator { h, b } => {
            let c = match constants.c {
                Some(c) => c,
                None if b != 0.0 => h * h / (2.0 * b),
                None => {
                    return Err(Error::InvalidArgument(
                        "b = 0 has no default integration constant H^2/2b".into(),
                    ))
                }
            };
            ([c, 0.0, -h, 0.0, b / 2.0], IntegrationConstants::with_c(c))
        }
        EquationSpec::NonlinearDiracDensity { .. }
        | EquationSpec::Logistic { .. }
        | EquationSpec::SineGordon { .. } => return Err(Error::UnsupportedFamily(eq.family())),
    };
    Ok(QuadratureOde {
        poly_coeffs,
        branch_sign: 1.0,
        source: *eq,
        constants: resolved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuFormula {
    HalfH,
    L0FourthOverFour,
    UOverFour,
    AlphaESquaredOverFour,
    DirectLambda,
}

impl MuFormula {
    pub fn expression(self) -> &'static str {
        match self {
            MuFormula::HalfH => "mu = H/2",
            MuFormula::L0FourthOverFour => "mu = l0^4/4",
            MuFormula::UOverFour => "mu = u/4",
            MuFormula::AlphaESquaredOverFour => "mu = (alphaE)^2/4",
            MuFormula::DirectLambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDerivation {
    pub source: EquationSpec,
    pub map: MapSpec,
    pub mu_formula: MuFormula,
    pub substitution_note: String,
}

/// The difference map associated with an equation family.
pub fn to_difference_map(eq: &EquationSpec) -> Result<MapDerivation> {
    eq.validate()?;
    let (map, mu_formula, note) = match *eq {
        EquationSpec::QuarticOscillator { h, .. } => (
            MapSpec::quadratic(h / 2.0),
            MuFormula::HalfH,
            "phi = H x / sqrt(2b) applied to phi' = sqrt(b/2) (H/b - phi^2)",
        ),
        EquationSpec::NonlinearDiracDensity { l0 } => (
            MapSpec::quadratic(l0.powi(4) / 4.0),
            MuFormula::L0FourthOverFour,
            "rho = (2 - l0^2 x) / 8 applied to d rho/d eta = l0^2 rho (2 rho - 1); eta = alpha (gamma_a x_a - u gamma_0 t) kept opaque",
        ),
        EquationSpec::KdV { u, .. } => (
            MapSpec::quadratic(u / 4.0),
            MuFormula::UOverFour,
            "psi = 3u [1 - (u/4)(-x)^2] / sigma applied to psi' = psi (u - sigma psi / 3)^(1/2)",
        ),
        EquationSpec::Logistic { alpha_e } => (
            MapSpec::quadratic(alpha_e * alpha_e / 4.0),
            MuFormula::AlphaESquaredOverFour,
            "dF/dt = F (alphaE - F) associated with X' = 1 - (alphaE)^2 X^2 / 4",
        ),
        EquationSpec::SineGordon { lambda, .. } => (
            MapSpec::sine(lambda),
            MuFormula::DirectLambda,
            "X' = lambda sin(pi X) associated with phi_xx - phi_tt = (pi lambda^2 / 2) sin(2 pi phi)",
        ),
        EquationSpec::Nls { .. } | EquationSpec::CubicKleinGordon { .. } => {
            return Err(Error::UnsupportedFamily(eq.family()))
        }
    };
    Ok(MapDerivation {
        source: *eq,
        map,
        mu_formula,
        substitution_note: note.to_string(),
    })
}

/// Region boundaries expressed as the amplitude bound `mu^(-1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub mu: f64,
    /// `mu^(-1/2)`, infinite at `mu = 0`.
    pub amplitude_bound: f64,
    pub full_region: f64,
    pub single_solution: f64,
    pub two_branch: f64,
    pub four_branch_to_chaos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_text: String,
    pub satisfied: bool,
    pub critical_values: CriticalValues,
}

pub fn inverse_sqrt(mu: f64) -> f64 {
    1.0 / mu.sqrt()
}

/// Necessary condition `mu <= 1` (inclusive) for the soliton to coexist with the map.
pub fn soliton_existence_condition(eq: &EquationSpec) -> Result<ConditionReport> {
    let derivation = to_difference_map(eq)?;
    let mu = derivation.map.parameter;
    let condition_text = match derivation.mu_formula {
        MuFormula::DirectLambda => "lambda <= 1".to_string(),
        f => format!("mu <= 1 with {}", f.expression()),
    };
    Ok(ConditionReport {
        condition_text,
        satisfied: mu <= 1.0,
        critical_values: CriticalValues {
            mu,
            amplitude_bound: inverse_sqrt(mu),
            full_region: inverse_sqrt(FULL_REGION_MAX),
            single_solution: inverse_sqrt(SINGLE_SOLUTION_MAX),
            two_branch: inverse_sqrt(TWO_BRANCH_MAX),
            four_branch_to_chaos: inverse_sqrt(CHAOS_ONSET_QUOTED),
        },
    })
}
