//! Adaptive Dormand-Prince 5(4) integration of the first-order reduced ODEs,
//! including quadratures `phi' = ±sqrt(P(phi))` through their turning points.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::closed_forms::ClosedFormEntry;
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::reductions::QuadratureOde;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Hairer's coefficients for the 4th-order continuous extension
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub const BLOW_UP_LIMIT: f64 = 1e6;
pub const MIN_STEP: f64 = 1e-14;
/// `P` below this counts as a root.
pub const EPS_TURN: f64 = 1e-12;
/// `|P'|` below this at a root marks it double.
pub const DOUBLE_ROOT_DP: f64 = 1e-8;
/// Time-to-root below which a simple turning point is crossed by series.
const TURN_WINDOW: f64 = 0.05;
const SERIES_ORDER: usize = 24;
const DENSE_POINTS: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FirstOrderRhs {
    /// `rho' = sign l0^2 rho (2 rho - 1)`; `sign = +1` is the equation as printed.
    DiracDensity { l0: f64, sign: f64 },
    /// `x' = 1 - mu x^2`
    QuadRicatti { mu: f64 },
    /// `F' = F (alphaE - F)`
    Logistic { alpha_e: f64 },
    /// `x' = sqrt(a) sin x`
    SineFlow { a: f64 },
}

impl FirstOrderRhs {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FirstOrderRhs::DiracDensity { l0, sign } => sign * l0 * l0 * x * (2.0 * x - 1.0),
            FirstOrderRhs::QuadRicatti { mu } => 1.0 - mu * x * x,
            FirstOrderRhs::Logistic { alpha_e } => x * (alpha_e - x),
            FirstOrderRhs::SineFlow { a } => a.sqrt() * x.sin(),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            FirstOrderRhs::DiracDensity { l0, sign } => l0.is_finite() && (sign == 1.0 || sign == -1.0),
            FirstOrderRhs::QuadRicatti { mu } => mu.is_finite(),
            FirstOrderRhs::Logistic { alpha_e } => alpha_e.is_finite(),
            FirstOrderRhs::SineFlow { a } => a.is_finite() && a >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid right-hand side {self:?}")))
        }
    }
}

impl fmt::Display for FirstOrderRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FirstOrderRhs::DiracDensity { l0, sign } => {
                let s = if sign < 0.0 { "-" } else { "" };
                write!(f, "rho' = {s}l0^2 rho (2 rho - 1), l0 = {l0}")
            }
            FirstOrderRhs::QuadRicatti { mu } => write!(f, "x' = 1 - mu x^2, mu = {mu}"),
            FirstOrderRhs::Logistic { alpha_e } => write!(f, "F' = F (alphaE - F), alphaE = {alpha_e}"),
            FirstOrderRhs::SineFlow { a } => write!(f, "x' = sqrt(a) sin x, a = {a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps_taken: usize,
    pub steps_rejected: usize,
    pub max_step: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub eta_points: Vec<f64>,
    pub values: Vec<f64>,
    /// Right-hand side evaluated along the dense output.
    pub derivatives: Vec<f64>,
    pub source: String,
    pub step_stats: StepStats,
    /// Reduced coordinates where the quadrature reversed branch.
    pub turning_points: Vec<f64>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eta,value")?;
        for (e, v) in self.eta_points.iter().zip(&self.values) {
            writeln!(out, "{},{}", sig17(*e), sig17(*v))?;
        }
        Ok(())
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("trajectories hold at least one point")
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Rk {
        start: f64,
        h: f64,
        cont: [f64; 5],
        branch: f64,
    },
    /// `phi = root + sum_m coeffs[m] (eta - center)^m` around a simple root
    Series {
        start: f64,
        root: f64,
        center: f64,
        coeffs: TurnSeries,
    },
}

impl Segment {
    fn start(&self) -> f64 {
        match *self {
            Segment::Rk { start, .. } | Segment::Series { start, .. } => start,
        }
    }
}

/// Taylor series of `z = phi - root` in `delta = eta - eta_turn`, from
/// `z'' = P'(root + z) / 2` with `z(0) = z'(0) = 0`. Only even powers appear.
#[derive(Debug, Clone, Copy)]
struct TurnSeries([f64; SERIES_ORDER + 1]);

impl TurnSeries {
    fn new(q: &QuadratureOde, root: f64) -> Self {
        // Taylor coefficients of P(root + z)
        let mut shifted = [0.0; 5];
        for (k, &ck) in q.poly_coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for (j, slot) in shifted.iter_mut().enumerate().take(k + 1) {
                *slot += ck * binom * root.powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        let dq: Vec<f64> = (0..4).map(|j| (j + 1) as f64 * shifted[j + 1]).collect();
        let mut c = [0.0; SERIES_ORDER + 1];
        for m in 0..=SERIES_ORDER - 2 {
            // coefficient m of P'(root + z(delta))
            let mut power = [0.0; SERIES_ORDER + 1];
            power[0] = 1.0;
            let mut acc = dq[0] * power[m];
            for &qj in &dq[1..] {
                let mut next = [0.0; SERIES_ORDER + 1];
                for (i, &pi) in power.iter().enumerate().take(m + 1) {
                    if pi != 0.0 {
                        for (l, &cl) in c.iter().enumerate().take(m + 1 - i) {
                            next[i + l] += pi * cl;
                        }
                    }
                }
                power = next;
                acc += qj * power[m];
            }
            c[m + 2] = 0.5 * acc / ((m + 2) * (m + 1)) as f64;
        }
        Self(c)
    }

    fn value(&self, delta: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * delta + c)
    }

    fn slope(&self, delta: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (m, &c)| acc * delta + m as f64 * c)
    }

    /// Time `tau >= 0` with `z(tau) = z`.
    fn time_to(&self, z: f64) -> f64 {
        let mut tau = 2.0 * (z / (4.0 * self.0[2])).max(0.0).sqrt();
        for _ in 0..50 {
            let slope = self.slope(tau);
            if slope == 0.0 {
                break;
            }
            let dt = (self.value(tau) - z) / slope;
            tau -= dt;
            if dt.abs() <= 1e-15 * tau.abs().max(1e-300) {
                break;
            }
        }
        tau.abs()
    }
}

#[derive(Clone, Copy)]
enum Rhs<'a> {
    First(&'a FirstOrderRhs),
    Quad(&'a QuadratureOde),
}

impl Rhs<'_> {
    fn eval(&self, y: f64, branch: f64) -> f64 {
        match self {
            Rhs::First(f) => f.eval(y),
            Rhs::Quad(q) => branch * q.p(y).max(0.0).sqrt(),
        }
    }
}

struct Step {
    y1: f64,
    err: f64,
    cont: [f64; 5],
}

fn dopri_step(rhs: Rhs<'_>, branch: f64, y0: f64, k1: f64, h: f64, rtol: f64, atol: f64) -> Step {
    let mut k = [0.0; 7];
    k[0] = k1;
    for s in 1..7 {
        let y = y0 + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
        k[s] = rhs.eval(y, branch);
    }
    // stage 7 is evaluated at the 5th-order solution (FSAL)
    let y1 = y0 + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
    let err_abs = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
    let scale = atol + rtol * y0.abs().max(y1.abs());
    let ydiff = y1 - y0;
    let bspl = h * k[0] - ydiff;
    let cont = [
        y0,
        ydiff,
        bspl,
        ydiff - h * k[6] - bspl,
        h * (0..7).map(|j| D[j] * k[j]).sum::<f64>(),
    ];
    Step {
        y1,
        err: (err_abs / scale).abs(),
        cont,
    }
}

fn dense(cont: &[f64; 5], theta: f64) -> f64 {
    let t1 = 1.0 - theta;
    cont[0] + theta * (cont[1] + t1 * (cont[2] + theta * (cont[3] + t1 * cont[4])))
}

struct Integration {
    segments: Vec<Segment>,
    stats: StepStats,
    turning_points: Vec<f64>,
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if (1e-12..=1e-4).contains(&rel_tol) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rel_tol = {rel_tol} must lie in [1e-12, 1e-4]"
        )))
    }
}

fn check_span(span: (f64, f64)) -> Result<()> {
    if span.0.is_finite() && span.1.is_finite() && span.1 >= span.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "span [{}, {}] must be finite and ordered",
            span.0, span.1
        )))
    }
}

fn p_second(q: &QuadratureOde, phi: f64) -> f64 {
    let c = &q.poly_coeffs;
    2.0 * c[2] + phi * (6.0 * c[3] + 12.0 * c[4] * phi)
}

/// Newton's method on `P` from `phi`, for a nearby simple root.
fn simple_root(q: &QuadratureOde, phi: f64) -> f64 {
    let mut x = phi;
    for _ in 0..60 {
        let dp = q.dp(x);
        if dp == 0.0 {
            break;
        }
        let dx = q.p(x) / dp;
        x -= dx;
        if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn integrate(rhs: Rhs<'_>, y0: f64, mut branch: f64, span: (f64, f64), rtol: f64) -> Result<Integration> {
    let (start, end) = span;
    let atol = rtol;
    let length = end - start;
    let h_max = length / 8.0;
    let mut segments = Vec::new();
    let mut turning_points = Vec::new();
    let mut stats = StepStats {
        steps_taken: 0,
        steps_rejected: 0,
        max_step: 0.0,
        min_step: f64::INFINITY,
    };
    let mut eta = start;
    let mut y = y0;

    if let Rhs::Quad(q) = rhs {
        let dp = q.dp(y);
        if q.p(y) <= EPS_TURN && dp.abs() >= DOUBLE_ROOT_DP && length > 0.0 {
            // starting on a simple root: leave along the series into the allowed side
            let root = simple_root(q, y);
            let coeffs = TurnSeries::new(q, root);
            let w = TURN_WINDOW.min(length);
            segments.push(Segment::Series {
                start: eta,
                root,
                center: eta,
                coeffs,
            });
            turning_points.push(eta);
            branch = dp.signum();
            y = root + coeffs.value(w);
            eta += w;
        }
    }

    let mut h = (1e-2 * length).min(h_max).max(0.0);
    while eta < end {
        if let Rhs::Quad(q) = rhs {
            let p = q.p(y).max(0.0);
            let dp = q.dp(y);
            if branch * dp < 0.0 && dp.abs() >= DOUBLE_ROOT_DP {
                let tau = 2.0 * p.sqrt() / dp.abs();
                let root = simple_root(q, y);
                // P'^2 / (P |P''|) grows without bound at a simple root and stays at 2 near a
                // double root, where P itself is mostly rounding noise
                let noise = 16.0
                    * f64::EPSILON
                    * q.poly_coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c.abs() * y.abs().powi(k as i32))
                        .sum::<f64>();
                let simple = dp * dp > 8.0 * p.max(noise) * p_second(q, y).abs()
                    && (root - y) * branch >= 0.0
                    && q.dp(root).abs() >= DOUBLE_ROOT_DP
                    && q.p(root).abs() <= EPS_TURN;
                if simple && tau < TURN_WINDOW {
                    let coeffs = TurnSeries::new(q, root);
                    let tau = coeffs.time_to(y - root);
                    segments.push(Segment::Series {
                        start: eta,
                        root,
                        center: eta + tau,
                        coeffs,
                    });
                    if eta + tau <= end {
                        turning_points.push(eta + tau);
                    }
                    eta += 2.0 * tau;
                    branch = -branch;
                    if tau > 0.0 {
                        h = h.min(0.25 * tau);
                    }
                    continue;
                }
                if simple {
                    h = h.min(0.5 * tau);
                }
            }
        }
        h = h.min(end - eta).min(h_max);
        let k1 = rhs.eval(y, branch);
        let step = dopri_step(rhs, branch, y, k1, h, rtol, atol);
        let mut accept = step.err <= 1.0 && step.y1.is_finite();
        if let (Rhs::Quad(q), true) = (rhs, accept) {
            // never step across the extremum of P at a double root
            let (d0, d1) = (q.dp(y), q.dp(step.y1));
            if d0.signum() != d1.signum() && q.p(y).min(q.p(step.y1)) < 1e-6 * (1.0 + q.p(y0).abs()) && d0 != 0.0 {
                accept = false;
            }
        }
        if accept {
            segments.push(Segment::Rk {
                start: eta,
                h,
                cont: step.cont,
                branch,
            });
            stats.steps_taken += 1;
            stats.max_step = stats.max_step.max(h);
            stats.min_step = stats.min_step.min(h);
            eta = if end - eta - h <= 1e-15 * length.max(1.0) {
                end
            } else {
                eta + h
            };
            y = step.y1;
            if y.abs() > BLOW_UP_LIMIT {
                return Err(Error::BlowUp { eta, value: y });
            }
            let fac = if step.err == 0.0 {
                5.0
            } else {
                (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.steps_rejected += 1;
            h *= if step.err.is_finite() && step.err > 1.0 {
                (0.9 * step.err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            if h < MIN_STEP * eta.abs().max(1.0) {
                return Err(Error::StiffnessAbort { eta, step: h });
            }
        }
    }
    if stats.steps_taken == 0 {
        stats.min_step = 0.0;
    }
    Ok(Integration {
        segments,
        stats,
        turning_points,
    })
}

fn sample(rhs: Rhs<'_>, run: &Integration, span: (f64, f64), y0: f64, source: String) -> Trajectory {
    let (start, end) = span;
    let length = end - start;
    if length == 0.0 || run.segments.is_empty() {
        return Trajectory {
            eta_points: vec![start],
            values: vec![y0],
            derivatives: vec![rhs.eval(y0, 1.0)],
            source,
            step_stats: run.stats,
            turning_points: run.turning_points.clone(),
        };
    }
    let mut grid: Vec<f64> = (0..DENSE_POINTS)
        .map(|j| {
            if j + 1 == DENSE_POINTS {
                end
            } else {
                start + length * j as f64 / (DENSE_POINTS - 1) as f64
            }
        })
        .collect();
    grid.extend(run.turning_points.iter().copied().filter(|&t| t >= start && t <= end));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * length);

    let mut values = Vec::with_capacity(grid.len());
    let mut derivatives = Vec::with_capacity(grid.len());
    for &eta in &grid {
        let idx = run.segments.partition_point(|s| s.start() <= eta).max(1) - 1;
        let (v, d) = match run.segments[idx] {
            Segment::Rk { start, h, cont, branch } => {
                let v = dense(&cont, ((eta - start) / h).clamp(0.0, 1.0));
                (v, rhs.eval(v, branch))
            }
            Segment::Series {
                root, center, coeffs, ..
            } => {
                let dx = eta - center;
                (root + coeffs.value(dx), coeffs.slope(dx))
            }
        };
        values.push(v);
        derivatives.push(d);
    }
    Trajectory {
        eta_points: grid,
        values,
        derivatives,
        source,
        step_stats: run.stats,
        turning_points: run.turning_points.clone(),
    }
}

/// Integrates a first-order reduced ODE with dense output at 129 uniform points.
pub fn integrate_first_order(rhs: FirstOrderRhs, x0: f64, eta_span: (f64, f64), rel_tol: f64) -> Result<Trajectory> {
    rhs.check()?;
    check_tol(rel_tol)?;
    check_span(eta_span)?;
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("x0 = {x0} is not finite")));
    }
    let run = integrate(Rhs::First(&rhs), x0, 1.0, eta_span, rel_tol)?;
    Ok(sample(Rhs::First(&rhs), &run, eta_span, x0, rhs.to_string()))
}

/// Integrates `phi' = branch sqrt(P(phi))`, reversing the branch at simple roots of `P`.
pub fn integrate_quadrature(q: &QuadratureOde, phi0: f64, eta_span: (f64, f64), rel_tol: f64) -> Result<Trajectory> {
    check_tol(rel_tol)?;
    check_span(eta_span)?;
    if !phi0.is_finite() {
        return Err(Error::InvalidArgument(format!("phi0 = {phi0} is not finite")));
    }
    let p0 = q.p(phi0);
    if p0 < -EPS_TURN {
        return Err(Error::NegativeP { value: p0 });
    }
    let source = format!(
        "phi' = {}sqrt(P(phi)), P coefficients {:?}",
        if q.branch_sign < 0.0 { "-" } else { "+" },
        q.poly_coeffs
    );
    let run = integrate(Rhs::Quad(q), phi0, q.branch_sign, eta_span, rel_tol)?;
    let mut traj = sample(Rhs::Quad(q), &run, eta_span, phi0, source);
    if traj.eta_points.len() == 1 {
        traj.derivatives[0] = q.branch_sign * p0.max(0.0).sqrt();
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alignment {
    None,
    PeakShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub shift_used: f64,
}

/// Interior extremum of `|values|`, refined by a parabola through its neighbours.
fn trajectory_extremum(traj: &Trajectory) -> Option<f64> {
    let n = traj.values.len();
    let i = (0..n).max_by(|&a, &b| traj.values[a].abs().total_cmp(&traj.values[b].abs()))?;
    if i == 0 || i + 1 == n {
        return None;
    }
    if traj.turning_points.iter().any(|&t| t == traj.eta_points[i]) {
        return Some(traj.eta_points[i]);
    }
    let (x0, x1, x2) = (traj.eta_points[i - 1], traj.eta_points[i], traj.eta_points[i + 1]);
    let (y0, y1, y2) = (traj.values[i - 1].abs(), traj.values[i].abs(), traj.values[i + 1].abs());
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if curv >= 0.0 {
        return Some(x1);
    }
    // vertex of the interpolating parabola
    Some((0.5 * (x0 + x1) - d01 / (2.0 * curv)).clamp(x0, x2))
}

pub fn compare_to_closed_form(traj: &Trajectory, entry: &ClosedFormEntry, alignment: Alignment) -> Result<ErrorReport> {
    let shift = match alignment {
        Alignment::None => 0.0,
        Alignment::PeakShift => {
            let target = entry.extremum().ok_or(Error::AlignmentFailed)?;
            trajectory_extremum(traj).ok_or(Error::AlignmentFailed)? - target
        }
    };
    let mut sup: f64 = 0.0;
    let mut diffs = Vec::with_capacity(traj.values.len());
    for (&eta, &v) in traj.eta_points.iter().zip(&traj.values) {
        let d = v - entry.jet(eta - shift)?.value;
        sup = sup.max(d.abs());
        diffs.push(d * d);
    }
    let l2 = traj
        .eta_points
        .windows(2)
        .zip(diffs.windows(2))
        .map(|(e, d)| 0.5 * (e[1] - e[0]) * (d[0] + d[1]))
        .sum::<f64>()
        .sqrt();
    Ok(ErrorReport {
        sup_norm: sup,
        l2_norm: l2,
        shift_used: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{FormParams, Variant};
    use crate::reductions::{travelling_wave_reduce, EquationSpec, IntegrationConstants};
    use proptest::prelude::*;

    fn kdv_quadrature() -> QuadratureOde {
        travelling_wave_reduce(
            &EquationSpec::KdV { sigma: 6.0, u: 4.0 },
            IntegrationConstants::default(),
        )
        .unwrap()
    }

    fn kdv_entry() -> ClosedFormEntry {
        ClosedFormEntry::new(Variant::PaperLiteral, FormParams::KdvSech2 { sigma: 6.0, u: 4.0 }).unwrap()
    }

    #[test]
    fn logistic_saturates() {
        let t = integrate_first_order(FirstOrderRhs::Logistic { alpha_e: 1.0 }, 0.5, (0.0, 20.0), 1e-9).unwrap();
        assert!((t.last_value() - 1.0).abs() < 1e-6);
        assert!(t.eta_points.len() >= 128);
        assert!(t.eta_points.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ricatti_matches_tanh() {
        let t = integrate_first_order(FirstOrderRhs::QuadRicatti { mu: 1.0 }, 0.0, (0.0, 10.0), 1e-10).unwrap();
        let entry = ClosedFormEntry::new(Variant::Corrected, FormParams::QuadTanh { mu: 1.0, c: 0.0 }).unwrap();
        let r = compare_to_closed_form(&t, &entry, Alignment::None).unwrap();
        assert!(r.sup_norm < 1e-7, "{}", r.sup_norm);
    }

    #[test]
    fn dirac_half_is_an_equilibrium() {
        for sign in [1.0, -1.0] {
            let t =
                integrate_first_order(FirstOrderRhs::DiracDensity { l0: 1.0, sign }, 0.5, (-3.0, 7.0), 1e-8).unwrap();
            assert!(t.values.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn dirac_sign_conventions_match_their_closed_forms() {
        // the form as printed solves the flipped-sign equation, the corrected one the printed equation
        for (variant, sign) in [(Variant::PaperLiteral, -1.0), (Variant::Corrected, 1.0)] {
            let entry = ClosedFormEntry::new(variant, FormParams::DiracDensity { l0: 0.8, c: 2.0 }).unwrap();
            let x0 = entry.jet(-3.0).unwrap().value;
            let t =
                integrate_first_order(FirstOrderRhs::DiracDensity { l0: 0.8, sign }, x0, (-3.0, 0.5), 1e-10).unwrap();
            let r = compare_to_closed_form(&t, &entry, Alignment::None).unwrap();
            assert!(r.sup_norm < 1e-7, "{variant}: {}", r.sup_norm);
        }
    }

    #[test]
    fn kdv_quadrature_turns_at_the_peak() {
        let t = integrate_quadrature(&kdv_quadrature(), 2.0 - 1e-9, (0.0, 10.0), 1e-10).unwrap();
        assert_eq!(t.turning_points.len(), 1);
        let r = compare_to_closed_form(&t, &kdv_entry(), Alignment::PeakShift).unwrap();
        assert!(r.sup_norm < 1e-6, "{r:?}");
        assert!(r.shift_used.abs() < 1e-3);
    }

    #[test]
    fn quartic_approaches_the_double_root() {
        let q = travelling_wave_reduce(
            &EquationSpec::QuarticOscillator { h: 2.0, b: 1.0 },
            IntegrationConstants::default(),
        )
        .unwrap();
        let t = integrate_quadrature(&q, 0.0, (0.0, 20.0), 1e-10).unwrap();
        let bound = 2f64.sqrt();
        assert!(t.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.values.iter().all(|&v| v <= bound));
        assert!(bound - t.last_value() < 1e-6);
        assert!(t.turning_points.is_empty());
    }

    #[test]
    fn root_start_cases() {
        let q = kdv_quadrature();
        let t = integrate_quadrature(&q, 2.0, (1.5, 1.5), 1e-9).unwrap();
        assert_eq!(t.eta_points, vec![1.5]);
        assert_eq!(t.values, vec![2.0]);

        // starting exactly on the peak: leave into the allowed region
        let t = integrate_quadrature(&q, 2.0, (0.0, 6.0), 1e-10).unwrap();
        assert!(t.values[1..].iter().all(|&v| v < 2.0));
        let r = compare_to_closed_form(&t, &kdv_entry(), Alignment::None).unwrap();
        assert!(r.sup_norm < 1e-6, "{r:?}");
    }

    #[test]
    fn closed_form_comparisons() {
        let (alpha_e, f0) = (1.3, 0.2);
        let t = integrate_first_order(FirstOrderRhs::Logistic { alpha_e }, f0, (0.0, 15.0), 1e-10).unwrap();
        let entry = ClosedFormEntry::new(
            Variant::PaperLiteral,
            FormParams::LogisticSigmoid {
                alpha_e,
                c: alpha_e / f0 - 1.0,
            },
        )
        .unwrap();
        assert!(compare_to_closed_form(&t, &entry, Alignment::None).unwrap().sup_norm < 1e-7);
        assert_eq!(
            compare_to_closed_form(&t, &entry, Alignment::PeakShift),
            Err(Error::AlignmentFailed)
        );

        let eta_points: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        let zero = Trajectory {
            values: vec![0.0; eta_points.len()],
            derivatives: vec![0.0; eta_points.len()],
            eta_points,
            source: "zero".into(),
            step_stats: StepStats {
                steps_taken: 0,
                steps_rejected: 0,
                max_step: 0.0,
                min_step: 0.0,
            },
            turning_points: vec![],
        };
        let r = compare_to_closed_form(&zero, &kdv_entry(), Alignment::None).unwrap();
        assert_eq!(r.sup_norm, 2.0);
        assert_eq!(
            compare_to_closed_form(&zero, &kdv_entry(), Alignment::PeakShift),
            Err(Error::AlignmentFailed)
        );
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            integrate_first_order(FirstOrderRhs::QuadRicatti { mu: 1.0 }, -2.0, (0.0, 5.0), 1e-8),
            Err(Error::BlowUp { .. })
        ));
        assert!(matches!(
            integrate_quadrature(&kdv_quadrature(), 3.0, (0.0, 1.0), 1e-8),
            Err(Error::NegativeP { .. })
        ));
        assert!(integrate_first_order(FirstOrderRhs::Logistic { alpha_e: 1.0 }, 0.5, (0.0, 1.0), 1e-3).is_err());
        assert!(integrate_first_order(FirstOrderRhs::Logistic { alpha_e: 1.0 }, f64::NAN, (0.0, 1.0), 1e-8).is_err());
        assert!(integrate_first_order(FirstOrderRhs::Logistic { alpha_e: 1.0 }, 0.5, (1.0, 0.0), 1e-8).is_err());
    }

    #[test]
    fn equilibria_stay_put() {
        let cases = [
            (FirstOrderRhs::DiracDensity { l0: 1.1, sign: 1.0 }, 0.0),
            (FirstOrderRhs::DiracDensity { l0: 1.1, sign: -1.0 }, 0.5),
            (FirstOrderRhs::QuadRicatti { mu: 4.0 }, 0.5),
            (FirstOrderRhs::QuadRicatti { mu: 4.0 }, -0.5),
            (FirstOrderRhs::Logistic { alpha_e: 1.7 }, 1.7),
            (FirstOrderRhs::Logistic { alpha_e: 1.7 }, 0.0),
            (FirstOrderRhs::SineFlow { a: 2.0 }, 0.0),
            (FirstOrderRhs::SineFlow { a: 2.0 }, std::f64::consts::PI),
        ];
        for (rhs, root) in cases {
            let t = integrate_first_order(rhs, root, (0.0, 10.0), 1e-9).unwrap();
            assert!(t.values.iter().all(|v| (v - root).abs() < 1e-10), "{rhs}");
        }
        // double root of the quartic quadrature
        let q = travelling_wave_reduce(
            &EquationSpec::QuarticOscillator { h: 1.0, b: 1.0 },
            IntegrationConstants::default(),
        )
        .unwrap();
        let t = integrate_quadrature(&q, 1.0, (0.0, 10.0), 1e-9).unwrap();
        assert!(t.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn observed_order_on_kdv() {
        let run = |tol| {
            let t = integrate_quadrature(&kdv_quadrature(), 2.0 - 1e-9, (0.0, 8.0), tol).unwrap();
            let err = compare_to_closed_form(&t, &kdv_entry(), Alignment::PeakShift)
                .unwrap()
                .sup_norm;
            (err, 8.0 / t.step_stats.steps_taken as f64)
        };
        let (e1, h1) = run(1e-5);
        let (e2, h2) = run(1e-8);
        let order = (e1 / e2).ln() / (h1 / h2).ln();
        assert!(order >= 3.5, "order {order}: errors {e1} {e2}, steps {h1} {h2}");
    }

    #[test]
    fn csv_has_header_and_exact_digits() {
        let t = integrate_first_order(FirstOrderRhs::SineFlow { a: 1.0 }, 0.3, (0.0, 2.0), 1e-9).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("eta,value"));
        let row: Vec<f64> = lines.nth(5).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![t.eta_points[5], t.values[5]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quadrature_identity(sigma in 1.0f64..8.0, u in 0.5f64..5.0, frac in 0.05f64..0.95, tol_exp in 6i32..11) {
            let q = travelling_wave_reduce(&EquationSpec::KdV { sigma, u }, IntegrationConstants::default()).unwrap();
            let peak = 3.0 * u / sigma;
            let rel_tol = 10f64.powi(-tol_exp);
            let t = integrate_quadrature(&q, frac * peak, (0.0, 6.0), rel_tol).unwrap();
            for (v, d) in t.values.iter().zip(&t.derivatives) {
                let p = q.p(*v);
                prop_assert!((d * d - p).abs() < 10.0 * rel_tol * (1.0 + p.abs()));
            }
        }

        #[test]
        fn translation_invariance(shift in -50.0f64..50.0, x0 in 0.05f64..1.9) {
            let rhs = FirstOrderRhs::Logistic { alpha_e: 2.0 };
            let a = integrate_first_order(rhs, x0, (0.0, 5.0), 1e-9).unwrap();
            let b = integrate_first_order(rhs, x0, (shift, shift + 5.0), 1e-9).unwrap();
            prop_assert_eq!(a.values.len(), b.values.len());
            for i in 0..a.values.len() {
                prop_assert!((a.eta_points[i] - (b.eta_points[i] - shift)).abs() < 1e-10);
                prop_assert!((a.values[i] - b.values[i]).abs() < 1e-10);
            }
        }
    }
}
