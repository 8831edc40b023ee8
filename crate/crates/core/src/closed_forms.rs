//! Catalogue of closed-form solutions, each with analytic first and second
//! derivatives, and a residual audit against its governing equation.
//!
//! Where the printed form does not satisfy its equation for generic
//! parameters, the catalogue carries a minimally corrected variant next to
//! the literal one. The audit reports both.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormId {
    #[serde(rename = "NLS_Soliton")]
    NlsSoliton,
    #[serde(rename = "V_Sech")]
    VSech,
    #[serde(rename = "Tanh_Bell")]
    TanhBell,
    #[serde(rename = "Dirac_Density")]
    DiracDensity,
    #[serde(rename = "KdV_Sech2")]
    KdvSech2,
    #[serde(rename = "KG_Kink")]
    KgKink,
    #[serde(rename = "Quad_Tanh")]
    QuadTanh,
    #[serde(rename = "Logistic_Sigmoid")]
    LogisticSigmoid,
    #[serde(rename = "SG_Kink")]
    SgKink,
    #[serde(rename = "Sine_ODE")]
    SineOde,
}

impl FormId {
    pub const ALL: [FormId; 10] = [
        FormId::NlsSoliton,
        FormId::VSech,
        FormId::TanhBell,
        FormId::DiracDensity,
        FormId::KdvSech2,
        FormId::KgKink,
        FormId::QuadTanh,
        FormId::LogisticSigmoid,
        FormId::SgKink,
        FormId::SineOde,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FormId::NlsSoliton => "NLS_Soliton",
            FormId::VSech => "V_Sech",
            FormId::TanhBell => "Tanh_Bell",
            FormId::DiracDensity => "Dirac_Density",
            FormId::KdvSech2 => "KdV_Sech2",
            FormId::KgKink => "KG_Kink",
            FormId::QuadTanh => "Quad_Tanh",
            FormId::LogisticSigmoid => "Logistic_Sigmoid",
            FormId::SgKink => "SG_Kink",
            FormId::SineOde => "Sine_ODE",
        }
    }

    /// Variants present in the catalogue for this form.
    pub fn variants(self) -> &'static [Variant] {
        match self {
            FormId::NlsSoliton | FormId::VSech | FormId::TanhBell | FormId::DiracDensity | FormId::QuadTanh => {
                &[Variant::PaperLiteral, Variant::Corrected]
            }
            FormId::KdvSech2 | FormId::KgKink | FormId::LogisticSigmoid | FormId::SgKink => &[Variant::PaperLiteral],
            FormId::SineOde => &[Variant::Corrected],
        }
    }

    /// Governing equation the audit substitutes into.
    pub fn governing_equation(self) -> &'static str {
        match self {
            FormId::NlsSoliton => "phi_xx + i phi_t + k |phi|^2 phi = 0",
            FormId::VSech => "v'^2 = a v^2 - (k/2) v^4",
            FormId::TanhBell => "phi'' + H phi - b phi^3 = 0",
            FormId::DiracDensity => "rho' = l0^2 rho (2 rho - 1)",
            FormId::KdvSech2 => "psi'^2 = psi^2 (u - sigma psi / 3)",
            FormId::KgKink => "phi'' - m^2 phi + a phi^3 = 0",
            FormId::QuadTanh => "x' = 1 - mu x^2",
            FormId::LogisticSigmoid => "F' = F (alphaE - F)",
            FormId::SgKink => "phi_xx - phi_tt = (pi lambda^2 / 2) sin(2 pi phi)",
            FormId::SineOde => "x' = sqrt(a) sin x",
        }
    }
}

impl fmt::Display for FormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for FormId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase().replace('-', "_");
        FormId::ALL
            .into_iter()
            .find(|f| f.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown closed form `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    PaperLiteral,
    Corrected,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::PaperLiteral => "PaperLiteral",
            Variant::Corrected => "Corrected",
        })
    }
}

/// Parameters of each catalogued form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum FormParams {
    /// Literal amplitude is `phi0`; the corrected form pins it to `sqrt(2a/k)`.
    NlsSoliton {
        k: f64,
        u_e: f64,
        u_c: f64,
        phi0: f64,
    },
    VSech {
        k: f64,
        a: f64,
    },
    TanhBell {
        h: f64,
        b: f64,
        c0: f64,
        u: f64,
    },
    DiracDensity {
        l0: f64,
        c: f64,
    },
    KdvSech2 {
        sigma: f64,
        u: f64,
    },
    KgKink {
        m: f64,
        a: f64,
        c0: f64,
        u: f64,
    },
    QuadTanh {
        mu: f64,
        c: f64,
    },
    LogisticSigmoid {
        alpha_e: f64,
        c: f64,
    },
    /// `sign` selects the kink (+1) or antikink (-1).
    SgKink {
        lambda: f64,
        u: f64,
        sign: f64,
    },
    SineOde {
        a: f64,
        c: f64,
    },
}

impl FormParams {
    pub fn form_id(&self) -> FormId {
        match self {
            FormParams::NlsSoliton { .. } => FormId::NlsSoliton,
            FormParams::VSech { .. } => FormId::VSech,
            FormParams::TanhBell { .. } => FormId::TanhBell,
            FormParams::DiracDensity { .. } => FormId::DiracDensity,
            FormParams::KdvSech2 { .. } => FormId::KdvSech2,
            FormParams::KgKink { .. } => FormId::KgKink,
            FormParams::QuadTanh { .. } => FormId::QuadTanh,
            FormParams::LogisticSigmoid { .. } => FormId::LogisticSigmoid,
            FormParams::SgKink { .. } => FormId::SgKink,
            FormParams::SineOde { .. } => FormId::SineOde,
        }
    }

    fn named(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FormParams::NlsSoliton { k, u_e, u_c, phi0 } => vec![("k", k), ("u_e", u_e), ("u_c", u_c), ("phi0", phi0)],
            FormParams::VSech { k, a } => vec![("k", k), ("a", a)],
            FormParams::TanhBell { h, b, c0, u } => vec![("H", h), ("b", b), ("C0", c0), ("u", u)],
            FormParams::DiracDensity { l0, c } => vec![("l0", l0), ("c", c)],
            FormParams::KdvSech2 { sigma, u } => vec![("sigma", sigma), ("u", u)],
            FormParams::KgKink { m, a, c0, u } => vec![("m", m), ("a", a), ("C0", c0), ("u", u)],
            FormParams::QuadTanh { mu, c } => vec![("mu", mu), ("C", c)],
            FormParams::LogisticSigmoid { alpha_e, c } => vec![("alphaE", alpha_e), ("C", c)],
            FormParams::SgKink { lambda, u, sign } => vec![("lambda", lambda), ("u", u), ("sign", sign)],
            FormParams::SineOde { a, c } => vec![("a", a), ("C", c)],
        }
    }
}

/// Value and first two derivatives along the reduced coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Real(f64),
    Complex(Complex64),
}

impl FieldValue {
    pub fn abs(self) -> f64 {
        match self {
            FieldValue::Real(v) => v.abs(),
            FieldValue::Complex(z) => z.norm(),
        }
    }

    pub fn re(self) -> f64 {
        match self {
            FieldValue::Real(v) => v,
            FieldValue::Complex(z) => z.re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    /// Reduced coordinate `eta` (time `t` for the logistic sigmoid).
    Reduced(f64),
    SpaceTime(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormEntry {
    pub form_id: FormId,
    pub variant: Variant,
    pub params: FormParams,
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn gamma(u: f64) -> f64 {
    1.0 / (1.0 - u * u).sqrt()
}

impl ClosedFormEntry {
    pub fn new(variant: Variant, params: FormParams) -> Result<Self> {
        let form_id = params.form_id();
        if !form_id.variants().contains(&variant) {
            return Err(Error::InvalidArgument(format!("{form_id} has no {variant} variant")));
        }
        if let Some((name, v)) = params.named().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{form_id}: parameter {name} = {v} is not finite"
            )));
        }
        let entry = Self {
            form_id,
            variant,
            params,
        };
        entry.check_params()?;
        Ok(entry)
    }

    fn check_params(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("{}: {why}", self.form_id)));
        match self.params {
            FormParams::NlsSoliton { k, u_e, u_c, .. } if self.variant == Variant::Corrected => {
                if !(k > 0.0 && crate::reductions::nls_a(u_e, u_c) > 0.0) {
                    return bad("corrected soliton needs k > 0 and a > 0");
                }
            }
            FormParams::NlsSoliton { k, .. } if k < 0.0 => return bad("sech width needs k >= 0"),
            FormParams::VSech { k, a } if !(k > 0.0 && a > 0.0) => return bad("needs k > 0 and a > 0"),
            FormParams::TanhBell { h, b, u, .. } if !(h > 0.0 && b > 0.0 && u.abs() < 1.0) => {
                return bad("needs H > 0, b > 0, |u| < 1")
            }
            FormParams::KdvSech2 { sigma, u } if !(u > 0.0 && sigma != 0.0) => return bad("needs u > 0, sigma != 0"),
            FormParams::KgKink { a, u, .. } if !(a > 0.0 && u.abs() < 1.0) => return bad("needs a > 0 and |u| < 1"),
            FormParams::QuadTanh { mu, .. } if !(mu > 0.0) => return bad("needs mu > 0"),
            FormParams::SgKink { u, .. } if u.abs() >= 1.0 => return bad("needs |u| < 1"),
            FormParams::SineOde { a, .. } if !(a >= 0.0) => return bad("needs a >= 0"),
            _ => {}
        }
        Ok(())
    }

    /// Catalogue entry at the audit's canonical, deliberately generic parameters.
    pub fn canonical(form_id: FormId, variant: Variant) -> Result<Self> {
        let params = match form_id {
            FormId::NlsSoliton => FormParams::NlsSoliton {
                k: 2.0,
                u_e: 1.0,
                u_c: -1.2,
                phi0: 0.9,
            },
            FormId::VSech => FormParams::VSech { k: 2.0, a: 0.85 },
            FormId::TanhBell => FormParams::TanhBell {
                h: 2.0,
                b: 1.0,
                c0: 0.0,
                u: 0.0,
            },
            FormId::DiracDensity => FormParams::DiracDensity { l0: 1.0, c: -9.0 },
            FormId::KdvSech2 => FormParams::KdvSech2 { sigma: 6.0, u: 4.0 },
            FormId::KgKink => FormParams::KgKink {
                m: 1.0,
                a: 2.0,
                c0: 0.0,
                u: 0.0,
            },
            FormId::QuadTanh => FormParams::QuadTanh { mu: 1.5, c: 0.0 },
            FormId::LogisticSigmoid => FormParams::LogisticSigmoid { alpha_e: 1.0, c: 1.0 },
            FormId::SgKink => FormParams::SgKink {
                lambda: 0.5,
                u: 0.5,
                sign: 1.0,
            },
            FormId::SineOde => FormParams::SineOde { a: 2.0, c: 0.3 },
        };
        Self::new(variant, params)
    }

    /// Parameters as named values; the corrected NLS soliton reports its pinned amplitude.
    pub fn param_map(&self) -> BTreeMap<String, f64> {
        let mut map: BTreeMap<String, f64> = self
            .params
            .named()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        if let (FormParams::NlsSoliton { .. }, Variant::Corrected) = (self.params, self.variant) {
            map.insert("phi0".into(), self.nls_amplitude());
        }
        map
    }

    fn nls_amplitude(&self) -> f64 {
        match (self.params, self.variant) {
            (FormParams::NlsSoliton { phi0, .. }, Variant::PaperLiteral) => phi0,
            (FormParams::NlsSoliton { k, u_e, u_c, .. }, Variant::Corrected) => {
                (2.0 * crate::reductions::nls_a(u_e, u_c) / k).sqrt()
            }
            _ => unreachable!("only called for the NLS soliton"),
        }
    }

    /// Temporal phase rate `beta` in `exp(i (u_e/2) x - i beta t)`.
    fn nls_phase_rate(&self) -> f64 {
        match (self.params, self.variant) {
            (FormParams::NlsSoliton { u_e, .. }, Variant::PaperLiteral) => u_e * u_e / 2.0,
            (FormParams::NlsSoliton { u_e, u_c, .. }, Variant::Corrected) => u_e * u_c / 2.0,
            _ => unreachable!("only called for the NLS soliton"),
        }
    }

    pub fn is_space_time(&self) -> bool {
        matches!(self.form_id, FormId::NlsSoliton | FormId::SgKink)
    }

    /// Reduced-coordinate domain check. Only the sigmoid is restricted (`t >= 0`).
    fn check_domain(&self, s: f64) -> Result<()> {
        let violation = || Error::DomainViolation {
            what: self.form_id.to_string(),
            point: s,
        };
        if !s.is_finite() && !(self.form_id == FormId::LogisticSigmoid && s == f64::INFINITY) {
            return Err(violation());
        }
        match self.params {
            FormParams::LogisticSigmoid { alpha_e, c } => {
                if s < 0.0 || (1.0 + c * (-alpha_e * s).exp()) == 0.0 {
                    return Err(violation());
                }
            }
            FormParams::DiracDensity { .. } if self.singularities().contains(&s) => return Err(violation()),
            _ => {}
        }
        Ok(())
    }

    /// Reduced-coordinate poles of the profile.
    pub fn singularities(&self) -> Vec<f64> {
        match self.params {
            // 2 - exp(-+(l0^2 eta - c)) vanishes at eta = (c + ln 2) / l0^2 in both variants
            FormParams::DiracDensity { l0, c } if l0 != 0.0 => vec![(c + LN_2) / (l0 * l0)],
            FormParams::LogisticSigmoid { alpha_e, c } if c < 0.0 && alpha_e != 0.0 => {
                vec![(-c).ln() / alpha_e]
            }
            _ => Vec::new(),
        }
    }

    /// Profile with analytic derivatives along the reduced coordinate.
    ///
    /// For the NLS soliton this is the real envelope; for the sine-Gordon
    /// kink it is the profile in `xi = gamma (x - u t)`.
    pub fn jet(&self, s: f64) -> Result<Jet> {
        self.check_domain(s)?;
        let jet = match self.params {
            FormParams::NlsSoliton { k, .. } => {
                let amp = self.nls_amplitude();
                let kappa = (k / 2.0).sqrt() * amp;
                let (sh, th) = (sech(kappa * s), (kappa * s).tanh());
                Jet {
                    value: amp * sh,
                    d1: -amp * kappa * sh * th,
                    d2: amp * kappa * kappa * (sh - 2.0 * sh.powi(3)),
                }
            }
            FormParams::VSech { k, a } => {
                let amp = (2.0 * a / k).sqrt();
                match self.variant {
                    Variant::PaperLiteral => {
                        // amp sech(s)^(1/2)
                        let sh = sech(s);
                        let th = s.tanh();
                        let r = sh.sqrt();
                        Jet {
                            value: amp * r,
                            d1: -0.5 * amp * r * th,
                            d2: amp * r * (0.25 * th * th - 0.5 * sh * sh),
                        }
                    }
                    Variant::Corrected => {
                        let kappa = a.sqrt();
                        let (sh, th) = (sech(kappa * s), (kappa * s).tanh());
                        Jet {
                            value: amp * sh,
                            d1: -amp * kappa * sh * th,
                            d2: amp * kappa * kappa * (sh - 2.0 * sh.powi(3)),
                        }
                    }
                }
            }
            FormParams::TanhBell { h, b, c0, .. } => {
                let amp = (h / b).sqrt();
                let kappa = match self.variant {
                    Variant::PaperLiteral => (b / 2.0).sqrt(),
                    Variant::Corrected => (h / 2.0).sqrt(),
                };
                let arg = kappa * s + c0;
                let (sh, th) = (sech(arg), arg.tanh());
                Jet {
                    value: amp * th,
                    d1: amp * kappa * sh * sh,
                    d2: -2.0 * amp * kappa * kappa * sh * sh * th,
                }
            }
            FormParams::DiracDensity { l0, c } => {
                let l2 = l0 * l0;
                let (e, de) = match self.variant {
                    Variant::PaperLiteral => {
                        let e = (-l2 * s + c).exp();
                        (e, -l2 * e)
                    }
                    Variant::Corrected => {
                        let e = (l2 * s - c).exp();
                        (e, l2 * e)
                    }
                };
                let rho = 1.0 / (2.0 - e);
                Jet {
                    value: rho,
                    d1: de * rho * rho,
                    d2: l2 * l2 * e * rho * rho + 2.0 * de * de * rho.powi(3),
                }
            }
            FormParams::KdvSech2 { sigma, u } => {
                let amp = 3.0 * u / sigma;
                let kappa = u.sqrt() / 2.0;
                let (sh, th) = (sech(kappa * s), (kappa * s).tanh());
                let s2 = sh * sh;
                Jet {
                    value: amp * s2,
                    d1: -2.0 * amp * kappa * s2 * th,
                    d2: amp * kappa * kappa * (4.0 * s2 - 6.0 * s2 * s2),
                }
            }
            FormParams::KgKink { m, a, c0, .. } => {
                let amp = (2.0 / a).sqrt() * m;
                let arg = m * s + c0;
                let (sh, th) = (sech(arg), arg.tanh());
                Jet {
                    value: amp * sh,
                    d1: -amp * m * sh * th,
                    d2: amp * m * m * (sh - 2.0 * sh.powi(3)),
                }
            }
            FormParams::QuadTanh { mu, c } => {
                let kappa = match self.variant {
                    Variant::PaperLiteral => mu,
                    Variant::Corrected => mu.sqrt(),
                };
                let amp = 1.0 / mu.sqrt();
                let arg = kappa * s + c;
                let (sh, th) = (sech(arg), arg.tanh());
                Jet {
                    value: amp * th,
                    d1: amp * kappa * sh * sh,
                    d2: -2.0 * amp * kappa * kappa * sh * sh * th,
                }
            }
            FormParams::LogisticSigmoid { alpha_e, c } => {
                let e = if s == f64::INFINITY {
                    0.0
                } else {
                    c * (-alpha_e * s).exp()
                };
                let d = 1.0 + e;
                Jet {
                    value: alpha_e / d,
                    d1: alpha_e * alpha_e * e / (d * d),
                    d2: alpha_e.powi(3) * e * (e - 1.0) / d.powi(3),
                }
            }
            FormParams::SgKink { lambda, sign, .. } => {
                let kappa = sign.signum() * PI * lambda;
                let (sh, th) = (sech(kappa * s), (kappa * s).tanh());
                Jet {
                    value: 2.0 / PI * (kappa * s).exp().atan(),
                    d1: kappa / PI * sh,
                    d2: -kappa * kappa / PI * sh * th,
                }
            }
            FormParams::SineOde { a, c } => {
                let ra = a.sqrt();
                let arg = ra * s + c;
                let (sh, th) = (sech(arg), arg.tanh());
                Jet {
                    value: 2.0 * arg.exp().atan(),
                    d1: ra * sh,
                    d2: -a * sh * th,
                }
            }
        };
        Ok(jet)
    }

    /// Profile value at a point.
    pub fn evaluate(&self, point: Point) -> Result<FieldValue> {
        match point {
            Point::Reduced(s) => Ok(FieldValue::Real(self.jet(s)?.value)),
            Point::SpaceTime(x, t) => self.space_time(x, t),
        }
    }

    /// Speed of the travelling profile when lifted to a field on `(x, t)`.
    pub fn speed(&self) -> f64 {
        match self.params {
            FormParams::NlsSoliton { u_e, .. } => u_e,
            FormParams::KdvSech2 { u, .. } => u,
            FormParams::TanhBell { u, .. } | FormParams::KgKink { u, .. } | FormParams::SgKink { u, .. } => u,
            _ => 0.0,
        }
    }

    /// Reduced coordinate of `(x, t)`, Lorentz-contracted for the relativistic fields.
    pub fn reduced_coordinate(&self, x: f64, t: f64) -> f64 {
        match self.params {
            FormParams::TanhBell { u, .. } | FormParams::KgKink { u, .. } | FormParams::SgKink { u, .. } => {
                gamma(u) * (x - u * t)
            }
            _ => x - self.speed() * t,
        }
    }

    fn coordinate_rates(&self) -> (f64, f64) {
        // (d s/dx, d s/dt)
        match self.params {
            FormParams::TanhBell { u, .. } | FormParams::KgKink { u, .. } | FormParams::SgKink { u, .. } => {
                (gamma(u), -u * gamma(u))
            }
            _ => (1.0, -self.speed()),
        }
    }

    /// Field value on `(x, t)`; complex for the NLS soliton.
    pub fn space_time(&self, x: f64, t: f64) -> Result<FieldValue> {
        let s = self.reduced_coordinate(x, t);
        let jet = self.jet(s)?;
        match self.params {
            FormParams::NlsSoliton { u_e, .. } => {
                let theta = 0.5 * u_e * x - self.nls_phase_rate() * t;
                Ok(FieldValue::Complex(Complex64::from_polar(jet.value, theta)))
            }
            FormParams::QuadTanh { .. }
            | FormParams::LogisticSigmoid { .. }
            | FormParams::DiracDensity { .. }
            | FormParams::VSech { .. }
            | FormParams::SineOde { .. } => Err(Error::InvalidArgument(format!(
                "{} is an ODE solution with no (x, t) field",
                self.form_id
            ))),
            _ => Ok(FieldValue::Real(jet.value)),
        }
    }

    /// `d/dt` of the real field at `(x, t)`.
    pub fn time_derivative(&self, x: f64, t: f64) -> Result<f64> {
        if matches!(self.params, FormParams::NlsSoliton { .. }) {
            return Err(Error::InvalidArgument(
                "NLS field is complex and first order in time".into(),
            ));
        }
        self.space_time(x, t)?;
        let (_, st) = self.coordinate_rates();
        Ok(self.jet(self.reduced_coordinate(x, t))?.d1 * st)
    }

    /// Location of the interior extremum of `|profile|`, for bell-shaped forms.
    pub fn extremum(&self) -> Option<f64> {
        match self.params {
            FormParams::KdvSech2 { .. } | FormParams::VSech { .. } | FormParams::NlsSoliton { .. } => Some(0.0),
            FormParams::KgKink { m, c0, .. } if m != 0.0 => Some(-c0 / m),
            _ => None,
        }
    }

    /// Governing-equation residual at a point, using the analytic derivatives.
    pub fn residual_at(&self, point: Point) -> Result<f64> {
        match (self.params, point) {
            (FormParams::NlsSoliton { k, u_e, .. }, Point::SpaceTime(x, t)) => {
                let s = x - u_e * t;
                let v = self.jet(s)?;
                let alpha = 0.5 * u_e;
                let beta = self.nls_phase_rate();
                let phase = Complex64::from_polar(1.0, alpha * x - beta * t);
                let i = Complex64::i();
                let phi = v.value * phase;
                let phi_xx = (v.d2 + 2.0 * i * alpha * v.d1 - alpha * alpha * v.value) * phase;
                let phi_t = (-u_e * v.d1 - i * beta * v.value) * phase;
                Ok((phi_xx + i * phi_t + k * phi.norm_sqr() * phi).norm())
            }
            (FormParams::SgKink { lambda, u, .. }, Point::SpaceTime(x, t)) => {
                let g = gamma(u);
                let j = self.jet(self.reduced_coordinate(x, t))?;
                let phi_xx = g * g * j.d2;
                let phi_tt = g * g * u * u * j.d2;
                Ok((phi_xx - phi_tt - 0.5 * PI * lambda * lambda * (2.0 * PI * j.value).sin()).abs())
            }
            (FormParams::NlsSoliton { .. } | FormParams::SgKink { .. }, Point::Reduced(_)) => Err(
                Error::InvalidArgument(format!("{} is audited on (x, t) probes", self.form_id)),
            ),
            (_, Point::SpaceTime(..)) => Err(Error::InvalidArgument(format!(
                "{} is audited on reduced-coordinate probes",
                self.form_id
            ))),
            (params, Point::Reduced(s)) => {
                let j = self.jet(s)?;
                let r = match params {
                    FormParams::VSech { k, a } => j.d1 * j.d1 - (a * j.value.powi(2) - 0.5 * k * j.value.powi(4)),
                    FormParams::TanhBell { h, b, .. } => j.d2 + h * j.value - b * j.value.powi(3),
                    FormParams::DiracDensity { l0, .. } => j.d1 - l0 * l0 * j.value * (2.0 * j.value - 1.0),
                    FormParams::KdvSech2 { sigma, u } => j.d1 * j.d1 - j.value * j.value * (u - sigma * j.value / 3.0),
                    FormParams::KgKink { m, a, .. } => j.d2 - m * m * j.value + a * j.value.powi(3),
                    FormParams::QuadTanh { mu, .. } => j.d1 - (1.0 - mu * j.value * j.value),
                    FormParams::LogisticSigmoid { alpha_e, .. } => j.d1 - j.value * (alpha_e - j.value),
                    FormParams::SineOde { a, .. } => j.d1 - a.sqrt() * j.value.sin(),
                    FormParams::NlsSoliton { .. } | FormParams::SgKink { .. } => unreachable!(),
                };
                Ok(r.abs())
            }
        }
    }

    /// Parameter relation under which the form satisfies its equation, where one is known.
    pub fn constraint_note(&self) -> String {
        let note = match (self.form_id, self.variant) {
            (FormId::NlsSoliton, Variant::PaperLiteral) => {
                "temporal phase must be (u_e^2/4 - k phi0^2/2) t; the printed u_e^2 t/2 phase fits only k phi0^2 = -u_e^2/2 (k < 0)"
            }
            (FormId::NlsSoliton, Variant::Corrected) => {
                "u_c in the temporal phase; amplitude pinned to phi0 = sqrt(2a/k), a = (u_e/2)^2 - u_e u_c/2"
            }
            (FormId::VSech, Variant::PaperLiteral) => {
                "fails for all a, k > 0: needs sech to the first power with argument sqrt(a) eta"
            }
            (FormId::TanhBell, Variant::PaperLiteral) => "requires H = b (slope must be sqrt(H/2))",
            (FormId::DiracDensity, Variant::PaperLiteral) => {
                "fails for all l0 != 0: exponent sign must be +l0^2 eta"
            }
            (FormId::QuadTanh, Variant::PaperLiteral) => "requires mu = 1 (argument must be sqrt(mu) eta)",
            _ => "",
        };
        note.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "Pass",
            Verdict::Fail => "Fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub form_id: FormId,
    pub variant: Variant,
    pub params: BTreeMap<String, f64>,
    /// Reduced-coordinate probes, or the `x` probes of space-time forms.
    pub grid: Vec<f64>,
    /// Probe times of space-time forms, paired with `grid`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_times: Option<Vec<f64>>,
    pub max_abs_residual: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub constraint_note: String,
}

/// Chebyshev points of the first kind on `[lo, hi]`, ascending. `offset` in
/// `[0, 1)` rotates the nodes.
pub fn chebyshev_grid(lo: f64, hi: f64, n: usize, offset: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut pts: Vec<f64> = (0..n)
        .map(|j| mid - half * (PI * (2.0 * j as f64 + 1.0 + 2.0 * offset) / (2.0 * n as f64)).cos())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts
}

pub const PROBE_HALF_WIDTH: f64 = 8.0;
pub const PROBE_TIME_SPAN: f64 = 10.0;
const SINGULARITY_EXCLUSION: f64 = 1e-6;
const PROBE_TIMES: [f64; 4] = [0.0, 0.35, 0.8, 1.3];

pub fn residual(entry: &ClosedFormEntry, n_probes: usize, tolerance: f64) -> Result<ResidualReport> {
    residual_with_offset(entry, n_probes, tolerance, 0.0)
}

pub fn residual_with_offset(
    entry: &ClosedFormEntry,
    n_probes: usize,
    tolerance: f64,
    offset: f64,
) -> Result<ResidualReport> {
    if n_probes < 16 {
        return Err(Error::InvalidArgument(format!(
            "n_probes = {n_probes} must be at least 16"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    let (lo, hi) = match entry.form_id {
        FormId::LogisticSigmoid => (0.0, PROBE_TIME_SPAN),
        _ => (-PROBE_HALF_WIDTH, PROBE_HALF_WIDTH),
    };
    let singular = entry.singularities();
    let grid: Vec<f64> = chebyshev_grid(lo, hi, n_probes, offset)
        .into_iter()
        .filter(|p| singular.iter().all(|s| (p - s).abs() > SINGULARITY_EXCLUSION))
        .collect();

    let mut max_abs_residual: f64 = 0.0;
    let probe_times = if entry.is_space_time() {
        let times: Vec<f64> = (0..grid.len()).map(|j| PROBE_TIMES[j % PROBE_TIMES.len()]).collect();
        for (&x, &t) in grid.iter().zip(&times) {
            max_abs_residual = max_abs_residual.max(entry.residual_at(Point::SpaceTime(x, t))?);
        }
        Some(times)
    } else {
        for &s in &grid {
            max_abs_residual = max_abs_residual.max(entry.residual_at(Point::Reduced(s))?);
        }
        None
    };
    // NaN must not pass
    let verdict = if max_abs_residual < tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ResidualReport {
        form_id: entry.form_id,
        variant: entry.variant,
        params: entry.param_map(),
        grid,
        probe_times,
        max_abs_residual,
        verdict,
        tolerance,
        constraint_note: entry.constraint_note(),
    })
}

pub const DEFAULT_AUDIT_PROBES: usize = 64;

/// One report per (form, variant) at canonical parameters, ordered by form then variant.
pub fn audit_catalog(tolerance: f64) -> Result<Vec<ResidualReport>> {
    audit_forms(&FormId::ALL, tolerance)
}

pub fn audit_forms(forms: &[FormId], tolerance: f64) -> Result<Vec<ResidualReport>> {
    let mut forms = forms.to_vec();
    forms.sort();
    forms.dedup();
    let mut reports = Vec::new();
    for form in forms {
        for &variant in form.variants() {
            let entry = ClosedFormEntry::canonical(form, variant)?;
            reports.push(residual(&entry, DEFAULT_AUDIT_PROBES, tolerance)?);
        }
    }
    Ok(reports)
}

fn format_params(params: &BTreeMap<String, f64>) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Aligned text table of audit results.
pub fn audit_table(reports: &[ResidualReport]) -> String {
    let header = [
        "form_id",
        "variant",
        "params",
        "max_residual",
        "verdict",
        "constraint_note",
    ];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.form_id.to_string(),
                r.variant.to_string(),
                format_params(&r.params),
                format!("{:.3e}", r.max_abs_residual),
                r.verdict.to_string(),
                r.constraint_note.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&header.map(String::from));
    for row in &rows {
        line(row);
    }
    out
}

/// Residual as text with exact round-trip digits.
pub fn residual_csv_row(r: &ResidualReport) -> String {
    format!(
        "{},{},{},{}",
        r.form_id,
        r.variant,
        sig17(r.max_abs_residual),
        r.verdict
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entry(variant: Variant, params: FormParams) -> ClosedFormEntry {
        ClosedFormEntry::new(variant, params).unwrap()
    }

    fn fd_derivatives(e: &ClosedFormEntry, s: f64, h: f64) -> (f64, f64) {
        let f = |x: f64| e.jet(x).unwrap().value;
        let (fm2, fm1, f0, fp1, fp2) = (f(s - 2.0 * h), f(s - h), f(s), f(s + h), f(s + 2.0 * h));
        let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
        let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
        (d1, d2)
    }

    fn all_canonical() -> Vec<ClosedFormEntry> {
        FormId::ALL
            .iter()
            .flat_map(|&f| {
                f.variants()
                    .iter()
                    .map(move |&v| ClosedFormEntry::canonical(f, v).unwrap())
            })
            .collect()
    }

    #[test]
    fn evaluate_examples() {
        let kdv = entry(Variant::PaperLiteral, FormParams::KdvSech2 { sigma: 6.0, u: 4.0 });
        assert_eq!(kdv.evaluate(Point::Reduced(0.0)).unwrap(), FieldValue::Real(2.0));

        let logistic = entry(
            Variant::PaperLiteral,
            FormParams::LogisticSigmoid { alpha_e: 1.0, c: 1.0 },
        );
        assert_eq!(
            logistic.evaluate(Point::Reduced(f64::INFINITY)).unwrap(),
            FieldValue::Real(1.0)
        );
        assert_eq!(logistic.evaluate(Point::Reduced(1e3)).unwrap(), FieldValue::Real(1.0));
        assert_eq!(logistic.evaluate(Point::Reduced(0.0)).unwrap(), FieldValue::Real(0.5));
        assert!(matches!(
            logistic.evaluate(Point::Reduced(-0.1)),
            Err(Error::DomainViolation { .. })
        ));

        let quad = entry(Variant::Corrected, FormParams::QuadTanh { mu: 1.0, c: 0.0 });
        assert_eq!(quad.evaluate(Point::Reduced(0.0)).unwrap(), FieldValue::Real(0.0));
    }

    #[test]
    fn derivative_tables_match_finite_differences() {
        for e in all_canonical() {
            let grid = if e.form_id == FormId::LogisticSigmoid {
                chebyshev_grid(0.1, 10.0, 32, 0.0)
            } else {
                chebyshev_grid(-6.0, 6.0, 32, 0.0)
            };
            for s in grid {
                let j = e.jet(s).unwrap();
                let (d1, d2) = fd_derivatives(&e, s, 1e-3);
                let scale = 1.0 + j.value.abs();
                assert!(
                    (j.d1 - d1).abs() <= 1e-6 * (scale + j.d1.abs()),
                    "{} {} d1 at {s}",
                    e.form_id,
                    e.variant
                );
                assert!(
                    (j.d2 - d2).abs() <= 1e-6 * (scale + j.d2.abs()),
                    "{} {} d2 at {s}",
                    e.form_id,
                    e.variant
                );
            }
        }
    }

    #[test]
    fn residual_examples() {
        let kdv = entry(Variant::PaperLiteral, FormParams::KdvSech2 { sigma: 6.0, u: 4.0 });
        let r = residual(&kdv, 64, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.max_abs_residual < 1e-10);

        let lit = entry(Variant::PaperLiteral, FormParams::QuadTanh { mu: 2.0, c: 0.0 });
        let cor = entry(Variant::Corrected, FormParams::QuadTanh { mu: 2.0, c: 0.0 });
        assert_eq!(residual(&lit, 64, 1e-8).unwrap().verdict, Verdict::Fail);
        assert_eq!(residual(&cor, 64, 1e-8).unwrap().verdict, Verdict::Pass);

        let bell = |variant, h| {
            entry(
                variant,
                FormParams::TanhBell {
                    h,
                    b: 1.0,
                    c0: 0.0,
                    u: 0.0,
                },
            )
        };
        assert_eq!(
            residual(&bell(Variant::PaperLiteral, 1.0), 64, 1e-8).unwrap().verdict,
            Verdict::Pass
        );
        let r = residual(&bell(Variant::PaperLiteral, 2.0), 64, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.constraint_note.contains("requires H = b"));
        assert_eq!(
            residual(&bell(Variant::Corrected, 2.0), 64, 1e-8).unwrap().verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn audit_verdicts() {
        let reports = audit_catalog(1e-8).unwrap();
        let verdict = |f: FormId, v: Variant| {
            reports
                .iter()
                .find(|r| r.form_id == f && r.variant == v)
                .unwrap()
                .verdict
        };
        for (f, v) in [
            (FormId::KgKink, Variant::PaperLiteral),
            (FormId::SgKink, Variant::PaperLiteral),
            (FormId::KdvSech2, Variant::PaperLiteral),
            (FormId::LogisticSigmoid, Variant::PaperLiteral),
        ] {
            assert_eq!(verdict(f, v), Verdict::Pass, "{f}");
        }
        for f in [
            FormId::NlsSoliton,
            FormId::VSech,
            FormId::TanhBell,
            FormId::DiracDensity,
            FormId::QuadTanh,
        ] {
            assert_eq!(verdict(f, Variant::PaperLiteral), Verdict::Fail, "{f}");
            assert_eq!(verdict(f, Variant::Corrected), Verdict::Pass, "{f}");
        }
        assert_eq!(verdict(FormId::SineOde, Variant::Corrected), Verdict::Pass);

        // ordering: form then variant
        let keys: Vec<(FormId, Variant)> = reports.iter().map(|r| (r.form_id, r.variant)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn dirac_literal_has_flipped_derivative() {
        // literal profile satisfies rho' = -l0^2 rho (2 rho - 1) instead
        let e = entry(Variant::PaperLiteral, FormParams::DiracDensity { l0: 1.3, c: -12.0 });
        for s in chebyshev_grid(-5.0, 5.0, 20, 0.0) {
            let j = e.jet(s).unwrap();
            let flipped = -1.69 * j.value * (2.0 * j.value - 1.0);
            assert!((j.d1 - flipped).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotics_and_peaks() {
        let (sigma, u) = (6.0, 4.0);
        let kdv = entry(Variant::PaperLiteral, FormParams::KdvSech2 { sigma, u });
        let far = 40.0 / u.sqrt();
        for s in [-far, far] {
            assert!(kdv.jet(s).unwrap().value < 1e-12);
        }
        assert!((kdv.jet(0.0).unwrap().value - 3.0 * u / sigma).abs() < 1e-12);

        let dirac = entry(Variant::PaperLiteral, FormParams::DiracDensity { l0: 1.0, c: 0.5 });
        assert!((dirac.jet(60.0).unwrap().value - 0.5).abs() < 1e-12);
        assert!((dirac.jet(0.0).unwrap().value - 1.0 / (2.0 - 0.5f64.exp())).abs() < 1e-15);

        let logistic = entry(
            Variant::PaperLiteral,
            FormParams::LogisticSigmoid { alpha_e: 1.7, c: 3.0 },
        );
        assert!((logistic.jet(60.0).unwrap().value - 1.7).abs() < 1e-12);

        let (m, a) = (1.3, 0.7);
        let kg = entry(Variant::PaperLiteral, FormParams::KgKink { m, a, c0: 0.0, u: 0.0 });
        assert!((kg.jet(0.0).unwrap().value - (2.0 / a).sqrt() * m).abs() < 1e-12);
    }

    #[test]
    fn verdicts_stable_across_probe_counts_and_offsets() {
        for e in all_canonical() {
            let base = residual(&e, 16, 1e-8).unwrap().verdict;
            for n in [64, 256] {
                for offset in [0.0, 0.3, 0.77] {
                    let r = residual_with_offset(&e, n, 1e-8, offset).unwrap();
                    assert_eq!(r.verdict, base, "{} {} n={n} offset={offset}", e.form_id, e.variant);
                }
            }
        }
    }

    #[test]
    fn probe_grid_skips_singularities() {
        // pole of the literal density at eta = (c + ln 2) / l0^2; put one on a probe
        let grid = chebyshev_grid(-8.0, 8.0, 17, 0.0);
        let pole = grid[8];
        let e = entry(
            Variant::PaperLiteral,
            FormParams::DiracDensity {
                l0: 1.0,
                c: pole - LN_2,
            },
        );
        let r = residual(&e, 17, 1e-8).unwrap();
        assert_eq!(r.grid.len(), 16);
        assert!(r.grid.iter().all(|p| (p - pole).abs() > 1e-6));
        assert!(matches!(
            e.jet(e.singularities()[0]),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn corrected_variants_pass_at_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let k = rng.gen_range(0.5..3.0);
            let u_e = rng.gen_range(0.5..2.0);
            let u_c = rng.gen_range(-2.0..-0.1);
            let l0: f64 = rng.gen_range(0.5..1.2);
            let cases = [
                FormParams::NlsSoliton { k, u_e, u_c, phi0: 1.0 },
                FormParams::VSech {
                    k,
                    a: rng.gen_range(0.2..2.0),
                },
                FormParams::TanhBell {
                    h: rng.gen_range(0.2..3.0),
                    b: rng.gen_range(0.2..3.0),
                    c0: rng.gen_range(-1.0..1.0),
                    u: 0.0,
                },
                FormParams::DiracDensity {
                    l0,
                    c: -8.0 * l0 * l0 - rng.gen_range(1.0..4.0),
                },
                FormParams::QuadTanh {
                    mu: rng.gen_range(0.1..2.0),
                    c: rng.gen_range(-1.0..1.0),
                },
                FormParams::SineOde {
                    a: rng.gen_range(0.1..3.0),
                    c: rng.gen_range(-1.0..1.0),
                },
            ];
            for params in cases {
                let e = entry(Variant::Corrected, params);
                let r = residual(&e, 64, 1e-8).unwrap();
                assert!(r.max_abs_residual < 1e-8, "{:?}: {}", params, r.max_abs_residual);
            }
        }
    }

    #[test]
    fn literal_passes_on_its_constraint_surface() {
        let e = entry(Variant::PaperLiteral, FormParams::QuadTanh { mu: 1.0, c: 0.2 });
        assert_eq!(residual(&e, 32, 1e-8).unwrap().verdict, Verdict::Pass);
        // degenerate case u_e = 0, k = 0: constant amplitude, no phase
        let e = entry(
            Variant::PaperLiteral,
            FormParams::NlsSoliton {
                k: 0.0,
                u_e: 0.0,
                u_c: 0.3,
                phi0: 1.0,
            },
        );
        assert_eq!(residual(&e, 32, 1e-8).unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn space_time_lift_and_velocity() {
        let sg = entry(
            Variant::PaperLiteral,
            FormParams::SgKink {
                lambda: 0.5,
                u: 0.6,
                sign: 1.0,
            },
        );
        let (x, t, h) = (0.3, 0.2, 1e-5);
        let f = |t: f64| sg.space_time(x, t).unwrap().re();
        let fd = (f(t + h) - f(t - h)) / (2.0 * h);
        assert!((sg.time_derivative(x, t).unwrap() - fd).abs() < 1e-8);
        assert!(ClosedFormEntry::canonical(FormId::QuadTanh, Variant::Corrected)
            .unwrap()
            .space_time(0.0, 0.0)
            .is_err());
    }

    #[test]
    fn rejects_missing_variants_and_bad_parameters() {
        assert!(ClosedFormEntry::new(Variant::Corrected, FormParams::KdvSech2 { sigma: 6.0, u: 4.0 }).is_err());
        assert!(ClosedFormEntry::new(Variant::PaperLiteral, FormParams::SineOde { a: 1.0, c: 0.0 }).is_err());
        assert!(ClosedFormEntry::new(Variant::PaperLiteral, FormParams::KdvSech2 { sigma: 6.0, u: -1.0 }).is_err());
        assert!(residual(
            &ClosedFormEntry::canonical(FormId::KdvSech2, Variant::PaperLiteral).unwrap(),
            8,
            1e-8
        )
        .is_err());
    }

    #[test]
    fn table_lists_every_report() {
        let reports = audit_catalog(1e-8).unwrap();
        let table = audit_table(&reports);
        assert_eq!(table.lines().count(), reports.len() + 1);
        assert!(table.starts_with("form_id"));
        assert!(residual_csv_row(&reports[0]).starts_with("NLS_Soliton,PaperLiteral,"));
    }
}
