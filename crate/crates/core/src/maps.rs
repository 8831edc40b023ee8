//! Discrete maps: the quadratic family `x -> 1 - mu x^2` and the sine family
//! `x -> lambda sin(pi x)`.
//!
//! Everything here is a pure function of its arguments. Parameter scans run
//! in parallel but are merged in parameter order, so results never depend on
//! scheduling.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orbits leaving `[-DIVERGENCE_BOUND, DIVERGENCE_BOUND]` are reported as diverged.
pub const DIVERGENCE_BOUND: f64 = 10.0;

/// Universal period-doubling ratio, used only when too few thresholds are
/// available to measure it.
pub const FEIGENBAUM_DELTA: f64 = 4.669_201_609_102_99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapFamily {
    Quadratic,
    Sine,
}

impl MapFamily {
    /// Parameter range in which the family maps its invariant interval into itself.
    pub fn working_region(self) -> (f64, f64) {
        match self {
            MapFamily::Quadratic => (0.0, 2.0),
            MapFamily::Sine => (0.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MapFamily::Quadratic => "quadratic",
            MapFamily::Sine => "sine",
        }
    }

    pub fn with_parameter(self, parameter: f64) -> MapSpec {
        MapSpec {
            family: self,
            parameter,
        }
    }
}

impl std::str::FromStr for MapFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" => Ok(MapFamily::Quadratic),
            "sine" => Ok(MapFamily::Sine),
            other => Err(Error::InvalidArgument(format!("unknown map family `{other}`"))),
        }
    }
}

/// A map family together with its control parameter (`mu` or `lambda`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub family: MapFamily,
    pub parameter: f64,
}

impl MapSpec {
    pub fn quadratic(mu: f64) -> Self {
        MapFamily::Quadratic.with_parameter(mu)
    }

    pub fn sine(lambda: f64) -> Self {
        MapFamily::Sine.with_parameter(lambda)
    }

    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Quadratic => 1.0 - self.parameter * x * x,
            MapFamily::Sine => self.parameter * (PI * x).sin(),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::Quadratic => -2.0 * self.parameter * x,
            MapFamily::Sine => self.parameter * PI * (PI * x).cos(),
        }
    }

    pub fn in_working_region(&self) -> bool {
        let (lo, hi) = self.family.working_region();
        (lo..=hi).contains(&self.parameter)
    }

    /// Interval the map sends into itself when the parameter is in the working region.
    pub fn invariant_interval(&self) -> (f64, f64) {
        match self.family {
            MapFamily::Quadratic => (-1.0, 1.0),
            MapFamily::Sine => {
                let l = self.parameter.abs().min(1.0);
                (-l, l)
            }
        }
    }
}

/// Free-function form of [`MapSpec::step`].
pub fn step(map: &MapSpec, x: f64) -> f64 {
    map.step(x)
}

/// Iteration protocol shared by scans and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationProtocol {
    pub x0: f64,
    pub transient_len: usize,
    pub sample_len: usize,
}

impl Default for IterationProtocol {
    fn default() -> Self {
        Self {
            x0: 0.1,
            transient_len: 1000,
            sample_len: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub map: MapSpec,
    pub x0: f64,
    pub transient_len: usize,
    pub samples: Vec<f64>,
}

fn check_bounded(map: &MapSpec, iteration: usize, x: f64) -> Result<()> {
    if x.is_finite() && x.abs() <= DIVERGENCE_BOUND {
        Ok(())
    } else {
        Err(Error::DivergedOrbit {
            parameter: map.parameter,
            iteration,
            value: x.abs(),
        })
    }
}

/// Discards `transient_len` iterates and records the next `sample_len`.
pub fn iterate_orbit(map: &MapSpec, x0: f64, transient_len: usize, sample_len: usize) -> Result<Orbit> {
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("x0 = {x0} is not finite")));
    }
    if sample_len == 0 {
        return Err(Error::InvalidArgument("sample_len must be at least 1".into()));
    }
    let mut x = x0;
    for i in 0..transient_len {
        x = map.step(x);
        check_bounded(map, i + 1, x)?;
    }
    let mut samples = Vec::with_capacity(sample_len);
    for i in 0..sample_len {
        x = map.step(x);
        check_bounded(map, transient_len + i + 1, x)?;
        samples.push(x);
    }
    Ok(Orbit {
        map: *map,
        x0,
        transient_len,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    /// `f'(x*)`; the point attracts iff its magnitude is below one.
    pub multiplier: f64,
}

/// All fixed points in `[-1, 1]`, sorted ascending.
pub fn fixed_points(map: &MapSpec) -> Result<Vec<FixedPoint>> {
    let mu = map.parameter;
    let mut xs = match map.family {
        MapFamily::Quadratic => {
            if mu == 0.0 {
                vec![1.0]
            } else {
                let disc = 1.0 + 4.0 * mu;
                if disc < 0.0 {
                    return Err(Error::NoRealFixedPoint(mu));
                }
                let s = disc.sqrt();
                // 2 / (1 + s) is the rationalised (-1 + s) / (2 mu); no cancellation for small mu
                vec![2.0 / (1.0 + s), -(1.0 + s) / (2.0 * mu)]
            }
        }
        MapFamily::Sine => sine_fixed_points(mu),
    };
    xs.retain(|x| x.abs() <= 1.0 + 1e-12);
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    Ok(xs
        .into_iter()
        .map(|x| FixedPoint {
            x,
            multiplier: map.derivative(x),
        })
        .collect())
}

fn sine_fixed_points(lambda: f64) -> Vec<f64> {
    let g = |x: f64| x - lambda * (PI * x).sin();
    let mut roots = vec![0.0];
    const CELLS: usize = 2000;
    let mut a = 1e-9;
    let mut ga = g(a);
    for i in 1..=CELLS {
        let b = i as f64 / CELLS as f64;
        let gb = g(b);
        if gb == 0.0 {
            roots.push(b);
        } else if ga * gb < 0.0 {
            roots.push(bisect_root(g, a, b));
        }
        a = b;
        ga = gb;
    }
    let positive: Vec<f64> = roots[1..].to_vec();
    roots.extend(positive.iter().map(|x| -x));
    roots
}

fn bisect_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodResult {
    Period(usize),
    Aperiodic,
}

impl PeriodResult {
    pub fn period(self) -> Option<usize> {
        match self {
            PeriodResult::Period(k) => Some(k),
            PeriodResult::Aperiodic => None,
        }
    }
}

/// Smallest `k <= len/4` such that every recorded sample repeats after `k`
/// steps within `max(tol, tol |x|)`.
pub fn detect_period(orbit: &Orbit, tol: f64) -> Result<PeriodResult> {
    detect_period_in(&orbit.samples, tol)
}

pub(crate) fn detect_period_in(samples: &[f64], tol: f64) -> Result<PeriodResult> {
    if samples.len() < 8 {
        return Err(Error::InsufficientSamples {
            needed: 8,
            got: samples.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let n = samples.len();
    let close = |a: f64, b: f64| (b - a).abs() < tol.max(tol * a.abs());
    for k in 1..=n / 4 {
        // successive repeats, and no slow drift away from the first cycle
        let repeats = samples.iter().zip(&samples[k..]).all(|(&a, &b)| close(a, b))
            && samples.iter().enumerate().all(|(i, &x)| close(samples[i % k], x));
        if repeats {
            return Ok(PeriodResult::Period(k));
        }
    }
    Ok(PeriodResult::Aperiodic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub family: MapFamily,
    pub parameter_grid: Vec<f64>,
    pub attractor_samples: Vec<Vec<f64>>,
    pub transient_len: usize,
    pub sample_len: usize,
}

impl BifurcationDiagram {
    /// `mu,x` rows, one per attractor sample.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "mu,x")?;
        for (mu, xs) in self.parameter_grid.iter().zip(&self.attractor_samples) {
            let mu = crate::format::sig17(*mu);
            for x in xs {
                writeln!(out, "{mu},{}", crate::format::sig17(*x))?;
            }
        }
        Ok(())
    }
}

/// Evenly spaced grid of `n` points from `lo` to `hi` inclusive.
pub fn parameter_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
                }
            })
            .collect(),
    }
}

pub fn bifurcation_scan(
    family: MapFamily,
    param_lo: f64,
    param_hi: f64,
    n_params: usize,
    protocol: IterationProtocol,
) -> Result<BifurcationDiagram> {
    if n_params == 0 {
        return Err(Error::InvalidArgument("n_params must be at least 1".into()));
    }
    if !(param_lo.is_finite() && param_hi.is_finite()) {
        return Err(Error::InvalidArgument("parameter range must be finite".into()));
    }
    if n_params > 1 && !(param_lo < param_hi) {
        return Err(Error::InvalidArgument(format!(
            "parameter range [{param_lo}, {param_hi}] is empty"
        )));
    }
    if n_params == 1 && param_lo > param_hi {
        return Err(Error::InvalidArgument(format!(
            "parameter range [{param_lo}, {param_hi}] is empty"
        )));
    }
    let grid = parameter_grid(param_lo, param_hi, n_params);
    let results: Vec<Result<Vec<f64>>> = grid
        .par_iter()
        .map(|&p| {
            iterate_orbit(
                &family.with_parameter(p),
                protocol.x0,
                protocol.transient_len,
                protocol.sample_len,
            )
            .map(|o| o.samples)
        })
        .collect();
    let attractor_samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BifurcationDiagram {
        family,
        parameter_grid: grid,
        attractor_samples,
        transient_len: protocol.transient_len,
        sample_len: protocol.sample_len,
    })
}

/// Orbit average of `ln |f'(x)|` over `n_iter` post-transient iterates.
pub fn lyapunov_exponent(map: &MapSpec, x0: f64, n_iter: usize, transient_len: usize) -> Result<f64> {
    if n_iter == 0 {
        return Err(Error::InvalidArgument("n_iter must be at least 1".into()));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("x0 = {x0} is not finite")));
    }
    let mut x = x0;
    for i in 0..transient_len {
        x = map.step(x);
        check_bounded(map, i + 1, x)?;
    }
    let mut sum = 0.0;
    for i in 0..n_iter {
        let d = map.derivative(x).abs();
        if d < 1e-300 {
            return Err(Error::DerivativeSingular {
                x,
                iteration: transient_len + i,
            });
        }
        sum += d.ln();
        x = map.step(x);
        check_bounded(map, transient_len + i + 1, x)?;
    }
    Ok(sum / n_iter as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingCascade {
    pub family: MapFamily,
    /// `mu_k`: the attractor period doubles from `2^(k-1)` to `2^k`.
    pub thresholds: Vec<f64>,
    /// Extrapolated accumulation point; absent with a single threshold.
    pub accumulation_estimate: Option<f64>,
    /// Ratio of the last two threshold gaps; needs three thresholds.
    pub feigenbaum_delta: Option<f64>,
}

const PRESCAN_POINTS: usize = 512;
const PRESCAN_TOL: f64 = 1e-6;

/// Locates the first `k_max` period-doubling thresholds of a family.
///
/// A 512-point detect-period pre-scan brackets each transition `2^(k-1) -> 2^k`.
/// The threshold itself is then bisected on the stability multiplier of the
/// period-`2^(k-1)` orbit, which crosses `-1` exactly at the doubling. The orbit
/// is followed by Newton continuation, so the bisection is not limited by the
/// slow convergence of iterates near the bifurcation.
pub fn period_doubling_points(family: MapFamily, k_max: usize, tol: f64) -> Result<DoublingCascade> {
    if !(1..=7).contains(&k_max) {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} must lie in 1..=7")));
    }
    if !(tol >= 1e-8) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be at least 1e-8")));
    }
    let (lo, hi) = family.working_region();
    let mut window = (lo, hi);
    let mut thresholds: Vec<f64> = Vec::with_capacity(k_max);

    for k in 1..=k_max {
        let period = 1usize << (k - 1);
        let protocol = IterationProtocol {
            x0: 0.1,
            transient_len: 1000.max(500 * period),
            sample_len: 256.max(16 * period),
        };
        let grid = parameter_grid(window.0, window.1, PRESCAN_POINTS);
        let periods: Vec<Option<usize>> = grid
            .par_iter()
            .map(|&p| {
                iterate_orbit(
                    &family.with_parameter(p),
                    protocol.x0,
                    protocol.transient_len,
                    protocol.sample_len,
                )
                .ok()
                .and_then(|o| detect_period_in(&o.samples, PRESCAN_TOL).ok())
                .and_then(PeriodResult::period)
            })
            .collect();

        let first_doubled = periods
            .iter()
            .enumerate()
            .position(|(i, p)| *p == Some(2 * period) && periods[..i].contains(&Some(period)))
            .ok_or_else(|| {
                Error::CascadeNotFound(format!(
                    "no period {period} -> {} transition in [{}, {}]",
                    2 * period,
                    window.0,
                    window.1
                ))
            })?;
        let seed_idx = periods[..first_doubled]
            .iter()
            .rposition(|p| *p == Some(period))
            .expect("checked above");
        let seed_param = grid[seed_idx];
        let seed_orbit = iterate_orbit(
            &family.with_parameter(seed_param),
            protocol.x0,
            protocol.transient_len,
            protocol.sample_len,
        )?;
        let seed_x = *seed_orbit.samples.last().expect("sample_len >= 1");
        let spacing = (window.1 - window.0) / (PRESCAN_POINTS - 1) as f64;
        let mu_k = locate_flip(family, period, seed_param, seed_x, spacing, tol)?;
        if let Some(&prev) = thresholds.last() {
            if mu_k <= prev {
                return Err(Error::CascadeNotFound(format!(
                    "threshold {k} at {mu_k} does not exceed the previous one at {prev}"
                )));
            }
        }
        thresholds.push(mu_k);

        window = match thresholds.len() {
            1 => (mu_k, hi),
            n => {
                let gap = mu_k - thresholds[n - 2];
                (mu_k, (mu_k + 0.6 * gap).min(hi))
            }
        };
    }

    let n = thresholds.len();
    let feigenbaum_delta =
        (n >= 3).then(|| (thresholds[n - 2] - thresholds[n - 3]) / (thresholds[n - 1] - thresholds[n - 2]));
    let accumulation_estimate = (n >= 2).then(|| {
        let delta = feigenbaum_delta.unwrap_or(FEIGENBAUM_DELTA);
        thresholds[n - 1] + (thresholds[n - 1] - thresholds[n - 2]) / (delta - 1.0)
    });
    Ok(DoublingCascade {
        family,
        thresholds,
        accumulation_estimate,
        feigenbaum_delta,
    })
}

/// Point on a period-`period` orbit (refined by Newton) and its multiplier.
fn periodic_orbit(map: &MapSpec, period: usize, guess: f64) -> Option<(f64, f64)> {
    let mut x = guess;
    for _ in 0..100 {
        let (fx, dfx) = compose(map, period, x);
        let g = fx - x;
        let dg = dfx - 1.0;
        if dg == 0.0 || !dg.is_finite() {
            return None;
        }
        let dx = g / dg;
        x -= dx;
        if !x.is_finite() || x.abs() > DIVERGENCE_BOUND {
            return None;
        }
        if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    let (fx, multiplier) = compose(map, period, x);
    if (fx - x).abs() > 1e-10 {
        return None;
    }
    if period > 1 {
        // must not have collapsed onto the half-period orbit
        let (half, _) = compose(map, period / 2, x);
        if (half - x).abs() < 1e-9 {
            return None;
        }
    }
    Some((x, multiplier))
}

/// `f^n(x)` and its derivative by the chain rule.
fn compose(map: &MapSpec, n: usize, x0: f64) -> (f64, f64) {
    let mut x = x0;
    let mut d = 1.0;
    for _ in 0..n {
        d *= map.derivative(x);
        x = map.step(x);
    }
    (x, d)
}

fn locate_flip(family: MapFamily, period: usize, seed_param: f64, seed_x: f64, spacing: f64, tol: f64) -> Result<f64> {
    let not_found =
        |why: &str| Error::CascadeNotFound(format!("period-{period} orbit near parameter {seed_param}: {why}"));
    let orbit_at = |p: f64, guess: f64| periodic_orbit(&family.with_parameter(p), period, guess);
    let (x_seed, m_seed) = orbit_at(seed_param, seed_x).ok_or_else(|| not_found("Newton failed at seed"))?;

    // march away from the seed until the multiplier brackets -1
    let upward = m_seed > -1.0;
    let dir = if upward { 1.0 } else { -1.0 };
    let (lo_bound, hi_bound) = family.working_region();
    let mut prev = (seed_param, x_seed);
    let mut h = spacing;
    let mut steps = 0usize;
    let (mut stable, mut unstable) = loop {
        steps += 1;
        if steps > 20_000 || h < tol * 1e-3 {
            return Err(not_found("multiplier never crossed -1"));
        }
        let p = prev.0 + dir * h;
        if p < lo_bound - spacing || p > hi_bound + spacing {
            return Err(not_found("left the working region"));
        }
        match orbit_at(p, prev.1) {
            Some((x, m)) => {
                let crossed = (m > -1.0) != upward;
                if crossed {
                    break if upward { (prev, (p, x)) } else { ((p, x), prev) };
                }
                prev = (p, x);
            }
            None => h *= 0.5,
        }
    };

    while (unstable.0 - stable.0).abs() > tol {
        let mid = 0.5 * (stable.0 + unstable.0);
        if mid == stable.0 || mid == unstable.0 {
            break;
        }
        let (x, m) = orbit_at(mid, stable.1)
            .or_else(|| orbit_at(mid, unstable.1))
            .ok_or_else(|| not_found("continuation lost the orbit"))?;
        if m > -1.0 {
            stable = (mid, x);
        } else {
            unstable = (mid, x);
        }
    }
    Ok(0.5 * (stable.0 + unstable.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_examples() {
        assert_eq!(MapSpec::quadratic(1.0).step(0.0), 1.0);
        assert_eq!(MapSpec::quadratic(2.0).step(1.0), -1.0);
        assert!((MapSpec::sine(0.5).step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orbit_examples() {
        let o = iterate_orbit(&MapSpec::quadratic(0.0), 0.3, 10, 3).unwrap();
        assert_eq!(o.samples, vec![1.0, 1.0, 1.0]);

        // mu x^2 + x - 1 = 0 at mu = 1/2
        let expected = 3f64.sqrt() - 1.0;
        let o = iterate_orbit(&MapSpec::quadratic(0.5), 0.1, 1000, 4).unwrap();
        for x in o.samples {
            assert!((x - expected).abs() < 1e-12);
        }

        let err = iterate_orbit(&MapSpec::quadratic(2.5), 0.9, 1000, 4).unwrap_err();
        assert!(matches!(err, Error::DivergedOrbit { parameter, .. } if parameter == 2.5));
    }

    #[test]
    fn orbit_rejects_empty_sample() {
        assert!(iterate_orbit(&MapSpec::quadratic(1.0), 0.1, 10, 0).is_err());
        assert!(iterate_orbit(&MapSpec::quadratic(1.0), f64::NAN, 10, 1).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let fp = fixed_points(&MapSpec::quadratic(0.0)).unwrap();
        assert_eq!(
            fp,
            vec![FixedPoint {
                x: 1.0,
                multiplier: -0.0
            }]
        );

        let fp = fixed_points(&MapSpec::quadratic(0.75)).unwrap();
        assert_eq!(fp.len(), 1);
        assert!((fp[0].x - 2.0 / 3.0).abs() < 1e-15);
        assert!((fp[0].multiplier + 1.0).abs() < 1e-15);

        let fp = fixed_points(&MapSpec::sine(0.1)).unwrap();
        assert_eq!(fp.len(), 1);
        assert_eq!(fp[0].x, 0.0);
        assert!((fp[0].multiplier - 0.1 * PI).abs() < 1e-15);

        assert_eq!(
            fixed_points(&MapSpec::quadratic(-0.3)).unwrap_err(),
            Error::NoRealFixedPoint(-0.3)
        );
    }

    #[test]
    fn sine_fixed_points_against_bisection_oracle() {
        // independent oracle: dense sign scan of x - lambda sin(pi x) on [-1, 1]
        for &lambda in &[0.2, 0.5, 0.8, 1.0] {
            let g = |x: f64| x - lambda * (PI * x).sin();
            let n = 200_001;
            let mut oracle = Vec::new();
            for i in 0..n - 1 {
                let a = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                let b = -1.0 + 2.0 * (i + 1) as f64 / (n - 1) as f64;
                if g(a) == 0.0 {
                    oracle.push(a);
                } else if g(a) * g(b) < 0.0 {
                    oracle.push(0.5 * (a + b));
                }
            }
            let fp = fixed_points(&MapSpec::sine(lambda)).unwrap();
            assert_eq!(fp.len(), oracle.len(), "lambda = {lambda}");
            for (p, o) in fp.iter().zip(&oracle) {
                assert!((p.x - o).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn detect_period_examples() {
        let period_at = |mu: f64| {
            let o = iterate_orbit(&MapSpec::quadratic(mu), 0.1, 1000, 256).unwrap();
            detect_period(&o, 1e-7).unwrap()
        };
        assert_eq!(period_at(0.5), PeriodResult::Period(1));
        assert_eq!(period_at(1.0), PeriodResult::Period(2));
        assert_eq!(period_at(1.3), PeriodResult::Period(4));
        assert_eq!(period_at(2.0), PeriodResult::Aperiodic);

        let short = iterate_orbit(&MapSpec::quadratic(0.5), 0.1, 10, 7).unwrap();
        assert_eq!(
            detect_period(&short, 1e-7).unwrap_err(),
            Error::InsufficientSamples { needed: 8, got: 7 }
        );
    }

    #[test]
    fn scan_examples() {
        let d = bifurcation_scan(
            MapFamily::Quadratic,
            0.0,
            0.7,
            8,
            IterationProtocol {
                x0: 0.1,
                transient_len: 1000,
                sample_len: 64,
            },
        )
        .unwrap();
        assert_eq!(d.parameter_grid.len(), 8);
        for xs in &d.attractor_samples {
            assert_eq!(xs.len(), 64);
            assert!(xs.iter().all(|x| (x - xs[0]).abs() < 1e-9));
        }

        let d = bifurcation_scan(MapFamily::Quadratic, 1.0, 1.0, 1, IterationProtocol::default()).unwrap();
        let mut distinct = d.attractor_samples[0].clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-7);
        assert_eq!(distinct.len(), 2);

        // first doubling of the sine family sits above 0.7
        let d = bifurcation_scan(MapFamily::Sine, 0.0, 0.7, 15, IterationProtocol::default()).unwrap();
        for xs in &d.attractor_samples {
            assert!(xs.iter().all(|x| (x - xs[0]).abs() < 1e-7));
        }
    }

    #[test]
    fn scan_propagates_divergence_with_parameter() {
        let err = bifurcation_scan(MapFamily::Quadratic, 1.9, 2.5, 4, IterationProtocol::default()).unwrap_err();
        match err {
            Error::DivergedOrbit { parameter, .. } => assert!(parameter > 2.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(bifurcation_scan(MapFamily::Quadratic, 1.0, 0.5, 4, IterationProtocol::default()).is_err());
    }

    #[test]
    fn scan_period_coherence() {
        let d = bifurcation_scan(MapFamily::Quadratic, 0.1, 1.39, 60, IterationProtocol::default()).unwrap();
        let tol = 1e-7;
        for (mu, xs) in d.parameter_grid.iter().zip(&d.attractor_samples) {
            if let PeriodResult::Period(k) = detect_period_in(xs, tol).unwrap() {
                let same = |a: f64, b: f64| (a - b).abs() < tol.max(tol * a.abs());
                // every sample sits on one of k representatives, which are pairwise distinct
                assert!(xs.iter().enumerate().all(|(i, &x)| same(xs[i % k], x)), "mu = {mu}");
                for i in 0..k {
                    for j in 0..i {
                        assert!(!same(xs[i], xs[j]), "mu = {mu}: {} and {} coincide", xs[i], xs[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn lyapunov_examples() {
        let l = lyapunov_exponent(&MapSpec::quadratic(0.5), 0.1, 10_000, 1000).unwrap();
        assert!((l - (3f64.sqrt() - 1.0).ln()).abs() < 1e-9);

        // 1 - 2x^2 is conjugate to the tent map, whose exponent is ln 2
        let l = lyapunov_exponent(&MapSpec::quadratic(2.0), 0.1, 100_000, 1000).unwrap();
        assert!((l - 2f64.ln()).abs() < 0.01, "{l}");

        let l = lyapunov_exponent(&MapSpec::quadratic(0.75), 0.1, 10_000, 1000).unwrap();
        assert!(l.abs() < 0.02, "{l}");

        // superstable 2-cycle through x = 0
        let err = lyapunov_exponent(&MapSpec::quadratic(1.0), 0.1, 10_000, 1000).unwrap_err();
        assert!(matches!(err, Error::DerivativeSingular { .. }));
    }

    #[test]
    fn cascade_first_two_thresholds() {
        let c = period_doubling_points(MapFamily::Quadratic, 2, 1e-7).unwrap();
        assert_eq!(c.thresholds.len(), 2);
        assert!((c.thresholds[0] - 0.75).abs() < 1e-6);
        assert!((c.thresholds[1] - 1.25).abs() < 1e-6);
        assert!(c.feigenbaum_delta.is_none());
        assert!(c.accumulation_estimate.unwrap() > c.thresholds[1]);
    }

    #[test]
    fn cascade_accumulation_and_delta() {
        let c = period_doubling_points(MapFamily::Quadratic, 5, 1e-7).unwrap();
        assert!(c.thresholds.windows(2).all(|w| w[0] < w[1]));
        let acc = c.accumulation_estimate.unwrap();
        assert!(c.thresholds.iter().all(|&t| t < acc));
        assert!((acc - 1.40115).abs() < 1e-3, "{acc}");
        let delta = c.feigenbaum_delta.unwrap();
        assert!((delta - 4.669).abs() < 0.05 * 4.669, "{delta}");
    }

    #[test]
    fn cascade_single_threshold_has_no_delta() {
        let c = period_doubling_points(MapFamily::Quadratic, 1, 1e-7).unwrap();
        assert_eq!(c.thresholds.len(), 1);
        assert!(c.accumulation_estimate.is_none());
        assert!(c.feigenbaum_delta.is_none());
    }

    #[test]
    fn sine_cascade_is_increasing_below_one() {
        let c = period_doubling_points(MapFamily::Sine, 4, 1e-7).unwrap();
        assert!(c.thresholds.windows(2).all(|w| w[0] < w[1]));
        assert!(c.thresholds.iter().all(|&t| t > 1.0 / PI && t < 1.0));
        // the first flip is where lambda pi cos(pi x*) = -1 on the nonzero fixed point
        let fp = fixed_points(&MapSpec::sine(c.thresholds[0])).unwrap();
        let m = fp.iter().map(|p| p.multiplier).fold(f64::INFINITY, f64::min);
        assert!((m + 1.0).abs() < 1e-5, "{m}");
    }

    #[test]
    fn cascade_rejects_bad_arguments() {
        assert!(period_doubling_points(MapFamily::Quadratic, 0, 1e-7).is_err());
        assert!(period_doubling_points(MapFamily::Quadratic, 8, 1e-7).is_err());
        assert!(period_doubling_points(MapFamily::Quadratic, 2, 1e-9).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_interval_closure(mu in 0.0f64..=2.0, x in -1.0f64..=1.0) {
            let y = MapSpec::quadratic(mu).step(x);
            prop_assert!((-1.0..=1.0).contains(&y));
        }

        #[test]
        fn sine_interval_closure(lambda in 0.0f64..=1.0, x in -1.0f64..=1.0) {
            let map = MapSpec::sine(lambda);
            let (lo, hi) = map.invariant_interval();
            let y = map.step(x);
            prop_assert!(y >= lo && y <= hi);
        }

        #[test]
        fn orbits_are_bitwise_reproducible(mu in 0.0f64..=2.0, x0 in -1.0f64..=1.0) {
            let map = MapSpec::quadratic(mu);
            let a = iterate_orbit(&map, x0, 50, 40).unwrap();
            let b = iterate_orbit(&map, x0, 50, 40).unwrap();
            prop_assert_eq!(
                a.samples.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.samples.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            let mut x = a.samples[0];
            for s in &a.samples[1..] {
                x = map.step(x);
                prop_assert_eq!(x.to_bits(), s.to_bits());
            }
        }

        #[test]
        fn fixed_points_are_fixed(mu in 0.0f64..=2.0, lambda in 0.0f64..=1.0) {
            for map in [MapSpec::quadratic(mu), MapSpec::sine(lambda)] {
                for p in fixed_points(&map).unwrap() {
                    prop_assert!((map.step(p.x) - p.x).abs() < 1e-12);
                }
            }
        }
    }
}
