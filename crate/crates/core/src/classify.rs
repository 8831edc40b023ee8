//! Per-equation regime reports: soliton existence (`mu <= 1`) combined with the
//! dynamical regime of the associated difference map.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::maps::{
    detect_period_in, iterate_orbit, lyapunov_exponent, period_doubling_points, MapFamily, MapSpec, PeriodResult,
};
use crate::reductions::{inverse_sqrt, soliton_existence_condition, to_difference_map, EquationSpec};

/// Upper end of the quadratic map's working region.
pub const FULL_REGION_MAX: f64 = 2.0;
/// End of the single stable solution region (first doubling).
pub const SINGLE_SOLUTION_MAX: f64 = 0.75;
/// End of the two-branch region (second doubling).
pub const TWO_BRANCH_MAX: f64 = 1.25;
/// Quoted onset of chaos of the quadratic map.
pub const CHAOS_ONSET_QUOTED: f64 = 1.401152;

/// Lyapunov band around zero reported as a marginal bifurcation.
pub const MARGINAL_BAND: f64 = 0.02;
pub const DEFAULT_CASCADE_DEPTH: usize = 5;
pub const DEFAULT_CASCADE_TOL: f64 = 1e-8;

const X0: f64 = 0.1;
const PERIOD_TOL: f64 = 1e-6;
const LYAPUNOV_N_ITER: usize = 20_000;
const LYAPUNOV_TRANSIENT: usize = 1000;
// (transient, samples) tried in turn until a period is found
const PROTOCOLS: [(usize, usize); 3] = [(1000, 256), (20_000, 1024), (200_000, 4096)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    FixedPoint,
    Period(usize),
    Chaotic,
    Divergent,
}

impl Regime {
    fn from_period(p: usize) -> Self {
        if p == 1 {
            Regime::FixedPoint
        } else {
            Regime::Period(p)
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::FixedPoint => f.write_str("FixedPoint"),
            Regime::Period(k) => write!(f, "Period({k})"),
            Regime::Chaotic => f.write_str("Chaotic"),
            Regime::Divergent => f.write_str("Divergent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub period_detected: Option<usize>,
    pub lyapunov_n_iter: usize,
    pub transient_len: usize,
    pub sample_len: usize,
    /// Largest `|x|` on the sampled attractor, to set against `mu^(-1/2)`.
    pub max_orbit_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub eq: EquationSpec,
    pub mu: f64,
    pub soliton_supported: bool,
    pub soliton_condition: String,
    pub regime: Regime,
    pub marginal_bifurcation: bool,
    /// `-inf` on a superstable orbit; `+inf` when the orbit escapes.
    pub lyapunov: f64,
    pub evidence: Evidence,
}

fn attractor_period(map: &MapSpec) -> Result<(Option<usize>, usize, usize, Vec<f64>)> {
    let mut last = (0, 0, Vec::new());
    for (transient, samples) in PROTOCOLS {
        let orbit = iterate_orbit(map, X0, transient, samples)?;
        if let PeriodResult::Period(p) = detect_period_in(&orbit.samples, PERIOD_TOL)? {
            return Ok((Some(p), transient, samples, orbit.samples));
        }
        last = (transient, samples, orbit.samples);
    }
    Ok((None, last.0, last.1, last.2))
}

fn map_lyapunov(map: &MapSpec) -> Result<f64> {
    match lyapunov_exponent(map, X0, LYAPUNOV_N_ITER, LYAPUNOV_TRANSIENT) {
        // the orbit landed on the critical point: superstable
        Err(Error::DerivativeSingular { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

pub fn regime_report(eq: &EquationSpec) -> Result<RegimeReport> {
    let derivation = to_difference_map(eq)?;
    let condition = soliton_existence_condition(eq)?;
    let map = derivation.map;

    let base = |regime, lyapunov, evidence| RegimeReport {
        eq: *eq,
        mu: map.parameter,
        soliton_supported: condition.satisfied,
        soliton_condition: condition.condition_text.clone(),
        regime,
        marginal_bifurcation: false,
        lyapunov,
        evidence,
    };

    let (period, transient_len, sample_len, samples) = match attractor_period(&map) {
        Ok(found) => found,
        Err(Error::DivergedOrbit { .. }) => {
            let evidence = Evidence {
                period_detected: None,
                lyapunov_n_iter: 0,
                transient_len: PROTOCOLS[0].0,
                sample_len: PROTOCOLS[0].1,
                max_orbit_amplitude: None,
            };
            return Ok(base(Regime::Divergent, f64::INFINITY, evidence));
        }
        Err(e) => return Err(e),
    };
    let lyapunov = match map_lyapunov(&map) {
        Ok(l) => l,
        Err(Error::DivergedOrbit { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let max_orbit_amplitude = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let regime = match period {
        Some(p) => Regime::from_period(p),
        None if lyapunov > 0.0 => Regime::Chaotic,
        // slowly converging orbit at a bifurcation: accept a looser match
        None => [1e-4, 1e-3, 1e-2]
            .iter()
            .find_map(|&tol| detect_period_in(&samples, tol).ok().and_then(PeriodResult::period))
            .map(Regime::from_period)
            .unwrap_or(Regime::Chaotic),
    };
    let mut report = base(
        regime,
        lyapunov,
        Evidence {
            period_detected: period,
            lyapunov_n_iter: LYAPUNOV_N_ITER,
            transient_len,
            sample_len,
            max_orbit_amplitude: Some(max_orbit_amplitude),
        },
    );
    report.marginal_bifurcation = lyapunov.abs() < MARGINAL_BAND;
    Ok(report)
}

/// Reports for many equations, in input order.
pub fn regime_reports(eqs: &[EquationSpec]) -> Result<Vec<RegimeReport>> {
    eqs.par_iter().map(regime_report).collect()
}

/// Cascade values expressed in each source family's own parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackConverted {
    pub u: Vec<f64>,
    #[serde(rename = "alphaE")]
    pub alpha_e: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub l0: Vec<f64>,
}

impl BackConverted {
    pub fn from_mu(mus: &[f64]) -> Self {
        Self {
            u: mus.iter().map(|m| 4.0 * m).collect(),
            alpha_e: mus.iter().map(|m| 2.0 * m.sqrt()).collect(),
            h: mus.iter().map(|m| 2.0 * m).collect(),
            l0: mus.iter().map(|m| (4.0 * m).powf(0.25)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosOnset {
    pub family: MapFamily,
    pub thresholds: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accumulation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feigenbaum_delta: Option<f64>,
    /// `[mu_1, mu_2, mu_inf]` per source family; quadratic family only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub back_converted: Option<BackConverted>,
}

impl ChaosOnset {
    /// Accumulation point, failing when too few thresholds were requested.
    pub fn mu_inf(&self) -> Result<f64> {
        self.accumulation
            .ok_or_else(|| Error::CascadeNotFound("accumulation needs at least two thresholds".into()))
    }
}

pub fn chaos_onset(family: MapFamily) -> Result<ChaosOnset> {
    chaos_onset_with(family, DEFAULT_CASCADE_DEPTH, DEFAULT_CASCADE_TOL)
}

pub fn chaos_onset_with(family: MapFamily, k_max: usize, tol: f64) -> Result<ChaosOnset> {
    let cascade = period_doubling_points(family, k_max, tol)?;
    let back_converted = (family == MapFamily::Quadratic).then(|| {
        let mut mus: Vec<f64> = cascade.thresholds.iter().take(2).copied().collect();
        mus.extend(cascade.accumulation_estimate);
        BackConverted::from_mu(&mus)
    });
    Ok(ChaosOnset {
        family,
        thresholds: cascade.thresholds,
        accumulation: cascade.accumulation_estimate,
        feigenbaum_delta: cascade.feigenbaum_delta,
        back_converted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub region: String,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// `mu_hi^(-1/2)`
    pub inv_sqrt_lo: f64,
    /// `mu_lo^(-1/2)`, infinite when `mu_lo = 0`
    pub inv_sqrt_hi: f64,
}

/// The four parameter regions of the quadratic map and their amplitude bounds `mu^(-1/2)`.
pub fn region_table() -> Vec<RegionRow> {
    let row = |name: &str, lo: f64, hi: f64| RegionRow {
        region: name.to_string(),
        mu_lo: lo,
        mu_hi: hi,
        inv_sqrt_lo: inverse_sqrt(hi),
        inv_sqrt_hi: inverse_sqrt(lo),
    };
    vec![
        row("single-solution", 0.0, SINGLE_SOLUTION_MAX),
        row("two-branch", SINGLE_SOLUTION_MAX, TWO_BRANCH_MAX),
        row("four-branch-to-chaos", TWO_BRANCH_MAX, CHAOS_ONSET_QUOTED),
        row("full-region", 0.0, FULL_REGION_MAX),
    ]
}

fn show_bound(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.4}")
    }
}

pub fn region_table_text(rows: &[RegionRow]) -> String {
    let mut out = format!("{:<22}  {:<20}  {}\n", "region", "mu", "mu^(-1/2)");
    for r in rows {
        let mu = format!("[{}, {}]", r.mu_lo, r.mu_hi);
        let inv = format!("[{}, {}]", show_bound(r.inv_sqrt_lo), show_bound(r.inv_sqrt_hi));
        out.push_str(&format!("{:<22}  {:<20}  {}\n", r.region, mu, inv));
    }
    out
}

pub fn region_table_csv(rows: &[RegionRow]) -> String {
    let mut out = String::from("region,mu_lo,mu_hi,inv_sqrt_lo,inv_sqrt_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.region,
            sig17(r.mu_lo),
            sig17(r.mu_hi),
            sig17(r.inv_sqrt_lo),
            sig17(r.inv_sqrt_hi)
        ));
    }
    out
}
