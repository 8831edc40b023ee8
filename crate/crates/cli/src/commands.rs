use std::collections::BTreeMap;

use clap::Args;
use serde::Serialize;

use soliton_lab::classify::{
    chaos_onset_with, regime_report, region_table, region_table_csv, region_table_text, DEFAULT_CASCADE_DEPTH,
    DEFAULT_CASCADE_TOL,
};
use soliton_lab::closed_forms::{
    audit_table, residual, ClosedFormEntry, FormId, Variant, Verdict, DEFAULT_AUDIT_PROBES,
};
use soliton_lab::maps::{bifurcation_scan, IterationProtocol, MapFamily};
use soliton_lab::pde::{
    analyse_collision, default_dt, evolve as run_evolution, kdv_phase_shifts, kdv_two_soliton_state,
    soliton_fidelity_tracked, soliton_setup, CollisionReport, EvolveConfig, FidelityReport, Tracking,
};
use soliton_lab::{EquationSpec, Family};

use crate::config::{parse_param, read_config, Settings};
use crate::output::{resolve_out_dir, OutputDir};
use crate::{CliError, Common};

fn open(common: &Common) -> Result<(Settings, OutputDir), CliError> {
    let file = match &common.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let out = OutputDir::create(resolve_out_dir(common.out.clone(), &file))?;
    Ok((Settings::new(file), out))
}

fn parse<T: std::str::FromStr<Err = soliton_lab::Error>>(what: &str, raw: &str) -> Result<T, CliError> {
    raw.parse().map_err(|e| CliError::Usage(format!("--{what}: {e}")))
}

#[derive(Debug, Args)]
pub struct BifurcateArgs {
    /// quadratic | sine
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// Number of parameter values
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    transient: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn gnuplot_script(family: MapFamily) -> String {
    let axis = match family {
        MapFamily::Quadratic => "mu",
        MapFamily::Sine => "lambda",
    };
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 1200,800\n\
         set output 'bifurcation.png'\n\
         set xlabel '{axis}'\n\
         set ylabel 'x'\n\
         set key off\n\
         plot 'bifurcation.csv' every ::1 using 1:2 with dots lc rgb 'black'\n"
    )
}

pub fn bifurcate(args: BifurcateArgs) -> Result<(), CliError> {
    let (mut s, mut out) = open(&args.common)?;
    let family: MapFamily = parse("family", &s.get("family", args.family, "quadratic".to_string())?)?;
    let (lo0, hi0) = family.working_region();
    let defaults = IterationProtocol::default();
    let lo = s.get("lo", args.lo, lo0)?;
    let hi = s.get("hi", args.hi, hi0)?;
    let n = s.get("n", args.n, 400)?;
    let protocol = IterationProtocol {
        x0: s.get("x0", args.x0, defaults.x0)?,
        transient_len: s.get("transient", args.transient, defaults.transient_len)?,
        sample_len: s.get("samples", args.samples, defaults.sample_len)?,
    };
    let diagram = bifurcation_scan(family, lo, hi, n, protocol)?;
    out.write_with("bifurcation.csv", |w| diagram.write_csv(w))?;
    out.write("bifurcation.gp", gnuplot_script(family).as_bytes())?;
    println!(
        "{} parameter values, {} samples each -> {}",
        diagram.parameter_grid.len(),
        protocol.sample_len,
        out.path().join("bifurcation.csv").display()
    );
    out.finish("bifurcate", s.resolved())
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[arg(long)]
    family: Option<String>,
    /// Number of doubling thresholds to locate
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn cascade(args: CascadeArgs) -> Result<(), CliError> {
    let (mut s, mut out) = open(&args.common)?;
    let family: MapFamily = parse("family", &s.get("family", args.family, "quadratic".to_string())?)?;
    let kmax = s.get("kmax", args.kmax, DEFAULT_CASCADE_DEPTH)?;
    let tol = s.get("tol", args.tol, DEFAULT_CASCADE_TOL)?;
    let onset = chaos_onset_with(family, kmax, tol)?;
    out.write_json("cascade.json", &onset)?;
    for (k, t) in onset.thresholds.iter().enumerate() {
        println!("mu_{} = {t:.10}", k + 1);
    }
    if let Some(a) = onset.accumulation {
        println!("mu_inf = {a:.10}");
    }
    if let Some(d) = onset.feigenbaum_delta {
        println!("delta = {d:.6}");
    }
    out.finish("cascade", s.resolved())
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Residual tolerance for a pass
    #[arg(long)]
    tol: Option<f64>,
    /// Restrict to these forms (repeatable), e.g. kdv_sech2
    #[arg(long)]
    form: Vec<String>,
    /// Chebyshev probe points per window
    #[arg(long)]
    probes: Option<usize>,
    #[command(flatten)]
    common: Common,
}

pub fn audit(args: AuditArgs) -> Result<(), CliError> {
    let (mut s, mut out) = open(&args.common)?;
    let tol = s.get("tol", args.tol, 1e-8)?;
    let probes = s.get("probes", args.probes, DEFAULT_AUDIT_PROBES)?;
    let form_list = if args.form.is_empty() {
        None
    } else {
        Some(args.form.join(","))
    };
    let form_list = s.get_opt::<String>("form", form_list)?;
    let mut forms: Vec<FormId> = match form_list {
        Some(list) => list
            .split(',')
            .map(|f| parse("form", f.trim()))
            .collect::<Result<_, _>>()?,
        None => FormId::ALL.to_vec(),
    };
    forms.sort();
    forms.dedup();

    let mut reports = Vec::new();
    for form in forms {
        for &variant in form.variants() {
            reports.push(residual(&ClosedFormEntry::canonical(form, variant)?, probes, tol)?);
        }
    }
    out.write_json("audit.json", &reports)?;
    let table = audit_table(&reports);
    out.write("audit.txt", table.as_bytes())?;
    print!("{table}");
    let failed = reports
        .iter()
        .filter(|r| r.variant == Variant::Corrected && r.verdict == Verdict::Fail)
        .count();
    out.finish("audit", s.resolved())?;
    if failed > 0 {
        return Err(CliError::AuditFailed(failed));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// nls | kdv | kg | sg | quartic
    #[arg(long)]
    eq: Option<String>,
    /// Equation parameter, repeatable: --param u=4
    #[arg(long, value_parser = parse_param)]
    param: Vec<(String, f64)>,
    /// Grid points (power of two, at least 64)
    #[arg(long)]
    n: Option<usize>,
    /// Periodic domain length
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Snapshot every this many steps; must divide --steps
    #[arg(long)]
    record: Option<usize>,
    /// 2/3-rule dealiasing (default: on for kdv only)
    #[arg(long)]
    dealias: Option<bool>,
    /// Safety constant c in the KdV bound dt < c dx^3
    #[arg(long)]
    kdv_cfl: Option<f64>,
    /// KdV collision of a tall (speed u) and a short (speed --short-u) soliton
    #[arg(long)]
    two_soliton: bool,
    #[arg(long)]
    short_u: Option<f64>,
    /// Also run a 4x finer reference for the collision
    #[arg(long)]
    reference: bool,
    #[command(flatten)]
    common: Common,
}

fn default_grid(family: Family) -> (usize, f64) {
    match family {
        Family::KdV => (256, 40.0),
        Family::Nls | Family::CubicKleinGordon => (256, 60.0),
        _ => (512, 80.0),
    }
}

#[derive(Serialize)]
struct SingleFidelity {
    expected_speed: f64,
    tracking: Tracking,
    #[serde(flatten)]
    report: FidelityReport,
}

#[derive(Serialize)]
struct CollisionFidelity {
    /// Free-flight phase shifts `(tall, short)` of the exact two-soliton solution.
    exact_phase_shifts: [f64; 2],
    collision: CollisionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<CollisionReport>,
}

pub fn evolve(args: EvolveArgs) -> Result<(), CliError> {
    let (mut s, mut out) = open(&args.common)?;
    let family: Family = parse("eq", &s.get("eq", args.eq, "kdv".to_string())?)?;
    let params = s.params(&args.param)?;
    let eq = EquationSpec::from_params(family, &params)?;
    let two = s.switch("two-soliton", args.two_soliton)?;
    if two && family != Family::KdV {
        return Err(CliError::Usage("--two-soliton needs --eq kdv".into()));
    }
    let (n0, l0) = if two { (256, 80.0) } else { default_grid(family) };
    let n = s.get("n", args.n, n0)?;
    let length = s.get("length", args.length, l0)?;
    let dt = s.get("dt", args.dt, default_dt(family, length / n as f64))?;
    let default_steps = if two {
        (12.0 / dt).round().max(1.0) as usize
    } else {
        1000
    };
    let steps = s.get("steps", args.steps, default_steps)?;
    let record = s.get("record", args.record, if steps % 10 == 0 { steps / 10 } else { steps })?;
    let mut cfg = EvolveConfig::new(family, dt, steps, record);
    cfg.dealias = s.get("dealias", args.dealias, cfg.dealias)?;
    cfg.kdv_cfl = s.get("kdv-cfl", args.kdv_cfl, cfg.kdv_cfl)?;

    let (initial, tracking, expected_speed, collision) = if two {
        let EquationSpec::KdV { sigma, u } = eq else {
            unreachable!()
        };
        let short_u = s.get("short-u", args.short_u, 1.0)?;
        let with_reference = s.switch("reference", args.reference)?;
        let tall = (u, -0.25 * length);
        let short = (short_u, 0.0);
        let state = kdv_two_soliton_state(sigma, tall, short, n, length)?;
        let reference = if with_reference {
            let fine = kdv_two_soliton_state(sigma, tall, short, 4 * n, length)?;
            let run = run_evolution(
                &eq,
                &fine,
                &EvolveConfig {
                    record_every: steps,
                    ..cfg
                },
            )?;
            Some(analyse_collision(sigma, tall, short, run.last())?)
        } else {
            None
        };
        (state, Tracking::Amplitude, u, Some((sigma, tall, short, reference)))
    } else {
        let setup = soliton_setup(&eq, n, length)?;
        (setup.state, setup.tracking, setup.expected_speed, None)
    };

    let run = run_evolution(&eq, &initial, &cfg)?;
    for (i, snap) in run.snapshots.iter().enumerate() {
        out.write_with(&format!("snap_{i:04}.csv"), |w| snap.write_csv(w))?;
        out.write_json(&format!("snap_{i:04}.json"), &snap.sidecar(&eq))?;
    }
    out.write_with("ledger.csv", |w| run.ledger.write_csv(w))?;
    match collision {
        Some((sigma, tall, short, reference)) => {
            let report = analyse_collision(sigma, tall, short, run.last())?;
            let (d1, d2) = kdv_phase_shifts(tall.0, short.0);
            println!(
                "tall: phase shift {:.6}, shape error {:.3e}; short: phase shift {:.6}, shape error {:.3e}",
                report.tall.phase_shift,
                report.tall.shape_l2_error,
                report.short.phase_shift,
                report.short.shape_l2_error
            );
            out.write_json(
                "fidelity.json",
                &CollisionFidelity {
                    exact_phase_shifts: [d1, d2],
                    collision: report,
                    reference,
                },
            )?;
        }
        None => {
            let report = soliton_fidelity_tracked(&initial, run.last(), expected_speed, tracking)?;
            println!(
                "speed {}, shape error {:.3e}",
                report
                    .peak_speed_estimate
                    .map_or("n/a".to_string(), |v| format!("{v:.6}")),
                report.shape_l2_error
            );
            out.write_json(
                "fidelity.json",
                &SingleFidelity {
                    expected_speed,
                    tracking,
                    report,
                },
            )?;
        }
    }
    for q in run.ledger.quantities() {
        println!(
            "{q}: max relative drift {:.3e}",
            run.ledger.max_drift(&q).unwrap_or(0.0)
        );
    }
    out.finish("evolve", s.resolved())
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// nls | kdv | kg | sg | quartic | dirac | logistic
    #[arg(long)]
    eq: Option<String>,
    #[arg(long, value_parser = parse_param)]
    param: Vec<(String, f64)>,
    /// Write the parameter region table instead
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    common: Common,
}

pub fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let (mut s, mut out) = open(&args.common)?;
    if s.switch("table", args.table)? {
        let rows = region_table();
        let text = region_table_text(&rows);
        out.write("region_table.txt", text.as_bytes())?;
        out.write("region_table.csv", region_table_csv(&rows).as_bytes())?;
        print!("{text}");
        return out.finish("classify", s.resolved());
    }
    let raw = s
        .get_opt::<String>("eq", args.eq)?
        .ok_or_else(|| CliError::Usage("classify needs --eq or --table".into()))?;
    let family: Family = parse("eq", &raw)?;
    let params = s.params(&args.param)?;
    let report = regime_report(&EquationSpec::from_params(family, &params)?)?;
    out.write_json("regime.json", &report)?;
    println!(
        "mu = {}, soliton supported: {}, regime: {}, lyapunov = {}",
        report.mu, report.soliton_supported, report.regime, report.lyapunov
    );
    out.finish("classify", s.resolved())
}
