//! One function per subcommand. Stdout carries the summary (text or JSON),
//! stderr carries notices about written files, and all tables land as CSV
//! under the output directory in a fixed row order.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use morphfront::pde::Boundary;
use morphfront::spectral::Regime;
use morphfront::{equilibria as eqs, model, pde, spectral};
use morphfront::{Density2, EquilibriumKind, Error, ModelParams};

use crate::config::{parse_boundary, validate_sim, BoundaryChoice, RunConfig, SimSettings};
use crate::{CliError, SimArgs};

pub struct Context {
    pub run: RunConfig,
    pub out: Option<PathBuf>,
    pub json: bool,
}

fn out_dir(ctx: &Context) -> PathBuf {
    ctx.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("cannot serialise result: {e}")))
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CliError> {
    let mut text =
        String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_with(
    path: &Path,
    write: impl FnOnce(&mut io::BufWriter<std::fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let cannot =
        |e: io::Error| CliError::Validation(format!("cannot write {}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(cannot)?;
    let mut w = io::BufWriter::new(file);
    write(&mut w).and_then(|()| w.flush()).map_err(cannot)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Logarithmically spaced grid hitting both endpoints exactly.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Minimal speed of the linearised leading edge; with an output directory,
/// also samples the dispersion curve around the minimiser.
pub fn speed(ctx: &Context) -> Result<(), CliError> {
    let sp = spectral::min_speed(&ctx.run.params)?;
    if ctx.json {
        println!("{}", to_json(&sp)?);
    } else {
        match sp.q_ratio() {
            Some(q) => println!(
                "c* = {:.9} at beta = {:.9}, q_d/q_e = {:.6}",
                sp.c_star, sp.beta_min, q
            ),
            None => println!(
                "c* = {:.9} at beta = {:.9} (mutation-free envelope)",
                sp.c_star, sp.beta_min
            ),
        }
    }
    if ctx.out.is_some() {
        let rows = log_grid(sp.beta_min / 10.0, sp.beta_min * 10.0, 201)
            .into_iter()
            .map(|beta| {
                let pt = spectral::dispersion(&ctx.run.params, beta)?;
                Ok(format!("{},{}", pt.beta, pt.eta))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        write_csv(&out_dir(ctx).join("dispersion.csv"), "beta,eta", &rows)?;
    }
    Ok(())
}

/// Small-mutation limit of the minimised speed: crossing point, branch
/// slopes, limiting composition and first derivatives.
pub fn limits(ctx: &Context) -> Result<(), CliError> {
    let ls = spectral::limit_summary(&ctx.run.params, &ctx.run.scaling)?;
    if ctx.json {
        println!("{}", to_json(&ls)?);
    } else {
        println!(
            "beta* = {:.9}, eta_0 = {:.9}; v_e = {:.7}, v_d = {:.7}, v_f = {:.7}; \
             q_d/q_e -> {:.7}; eta'(0) = {:.6e}, beta'(0) = {:.6e}",
            ls.beta_star,
            ls.eta_0,
            ls.v_e,
            ls.v_d,
            ls.v_f,
            ls.q_ratio,
            ls.eta_prime_0,
            ls.beta_prime_0
        );
    }
    Ok(())
}

/// Mutation-free regime label with the limiting speeds behind it.
pub fn classify(ctx: &Context) -> Result<(), CliError> {
    let p = &ctx.run.params;
    let regime = spectral::classify_regime(p)?;
    let lim = spectral::speed_limits(p);
    let selected = regime
        .limit_speed(&lim)
        .ok_or_else(|| CliError::Numerical("selected limiting speed undefined".into()))?;
    if ctx.json {
        let payload = serde_json::json!({
            "regime": format!("{regime}"),
            "limits": lim,
            "selected": selected,
        });
        println!("{}", to_json(&payload)?);
    } else {
        let v_f = match lim.v_f {
            Some(v) => format!("{v:.7}"),
            None => "undefined".into(),
        };
        println!(
            "regime: {regime}; v_e = {:.7}, v_d = {:.7}, v_f = {v_f}; selected limit = {selected:.7}",
            lim.v_e, lim.v_d
        );
    }
    Ok(())
}

/// Equilibria of the mutationless and full reactions plus the bounding
/// states. An unavailable lower-bound state is reported, not an error.
pub fn equilibria(ctx: &Context, grid: usize) -> Result<(), CliError> {
    let p = &ctx.run.params;
    let gs = eqs::equilibria_of_g(p)?;
    let fs = eqs::find_equilibria_of_f(p, &eqs::SearchBox::default_for(p), grid)?;
    let kp = eqs::k_plus(p)?;
    let km = match eqs::k_minus(p) {
        Ok(v) => Ok(v),
        Err(e @ Error::ConditionFailed { .. }) => Err(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    if ctx.json {
        let payload = serde_json::json!({
            "mutation_free": gs,
            "full": fs,
            "k_plus": kp,
            "k_minus": km.as_ref().ok(),
            "k_minus_unavailable": km.as_ref().err(),
        });
        println!("{}", to_json(&payload)?);
        return Ok(());
    }
    println!("mutation-free equilibria:");
    for eq in &gs {
        println!(
            "  ({:+.9}, {:+.9})  {:?} {:?}  residual {:.1e}",
            eq.point.n_e, eq.point.n_d, eq.kind, eq.stability, eq.residual
        );
    }
    println!("full-reaction equilibria:");
    for eq in &fs {
        println!(
            "  ({:+.9}, {:+.9})  {:?} {:?}  residual {:.1e}",
            eq.point.n_e, eq.point.n_d, eq.kind, eq.stability, eq.residual
        );
    }
    println!("k+ = ({:.9}, {:.9})", kp.n_e, kp.n_d);
    match &km {
        Ok(v) => println!("k- = ({:.9}, {:.9})", v.n_e, v.n_d),
        Err(why) => println!("k- unavailable: {why}"),
    }
    Ok(())
}

/// Margins for every lower-bound condition; failing conditions are part of
/// the report, so the command still exits successfully.
pub fn conditions(ctx: &Context) -> Result<(), CliError> {
    let rep = model::check_conditions(&ctx.run.params);
    if ctx.json {
        println!("{}", to_json(&rep)?);
        return Ok(());
    }
    for (name, c) in [
        ("parms_rd", rep.parms_rd),
        ("compe", rep.compe),
        ("asymproot", rep.asymproot),
        ("fastersp", rep.fastersp),
        ("intersmall", rep.intersmall),
        ("musmall", rep.musmall),
        ("rootswitch", rep.rootswitch),
    ] {
        let verdict = if c.satisfied { "PASS" } else { "FAIL" };
        println!("{name:<11} {verdict}  margin {:+.6e}", c.margin);
    }
    println!(
        "density bounds: N_e = {:.9}, N_d = {:.9}",
        rep.n_e_bound, rep.n_d_bound
    );
    println!(
        "lower-bound prerequisites: {}",
        if rep.theorem3_satisfied {
            "satisfied"
        } else {
            "not satisfied"
        }
    );
    Ok(())
}

/// Minimised speed, minimiser and composition along a logarithmic mutation
/// grid, written as one CSV row per grid point.
pub fn mu_curve(ctx: &Context, mu_min: f64, mu_max: f64, points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Validation(format!(
            "--points must be at least 2 (got {points})"
        )));
    }
    if !(mu_min > 0.0 && mu_min.is_finite() && mu_max > mu_min && mu_max.is_finite()) {
        return Err(CliError::Validation(format!(
            "need 0 < --mu-min < --mu-max, got {mu_min} and {mu_max}"
        )));
    }
    let grid = log_grid(mu_min, mu_max, points);
    let curve = spectral::mu_curve(&ctx.run.params, &ctx.run.scaling, &grid)?;
    let rows: Vec<String> = curve
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.mu, r.eta, r.beta, r.q_ratio, r.eta_prime, r.beta_prime
            )
        })
        .collect();
    write_csv(
        &out_dir(ctx).join("mu_curve.csv"),
        "mu,eta,beta,q_ratio,eta_prime,beta_prime",
        &rows,
    )?;
    if ctx.json {
        println!("{}", to_json(&curve)?);
    } else {
        let (first, last) = (&curve.rows[0], &curve.rows[curve.rows.len() - 1]);
        println!(
            "{points} points, mu in [{mu_min:e}, {mu_max:e}]: eta falls {:.9} -> {:.9}",
            first.eta, last.eta
        );
    }
    Ok(())
}

/// Regime and leading-edge composition over the (r_d/r_e, D_e/D_d) unit
/// square, anchored at r_e = 1 and D_d = 1. The composition column is empty
/// outside the anomalous zone, where the ratio has no limit.
pub fn sweep(ctx: &Context, grid: usize) -> Result<(), CliError> {
    if !(2..=2000).contains(&grid) {
        return Err(CliError::Validation(format!(
            "--grid must be between 2 and 2000 (got {grid})"
        )));
    }
    let p = ctx.run.params;
    let m = ctx.run.scaling.e / ctx.run.scaling.d;
    let cells: Vec<(f64, f64, Regime, f64, Option<f64>)> = (0..grid * grid)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / grid, idx % grid);
            let r_ratio = (i + 1) as f64 / (grid + 1) as f64;
            let d_ratio = (j + 1) as f64 / (grid + 1) as f64;
            let q = ModelParams::new(
                d_ratio, 1.0, 1.0, r_ratio, p.m_ee, p.m_dd, p.m_ed, p.m_de, p.mu_e, p.mu_d,
            )?;
            let regime = spectral::classify_regime(&q)?;
            let v_limit = regime
                .limit_speed(&spectral::speed_limits(&q))
                .ok_or_else(|| {
                    CliError::Numerical(format!(
                        "limiting speed undefined at r_d/r_e = {r_ratio}, D_e/D_d = {d_ratio}"
                    ))
                })?;
            let q_ratio = match spectral::q_ratio_from_ratios(r_ratio, d_ratio, m) {
                Ok(v) => Some(v),
                Err(Error::ZoneViolated) => None,
                Err(e) => return Err(e.into()),
            };
            Ok((r_ratio, d_ratio, regime, v_limit, q_ratio))
        })
        .collect::<Result<_, CliError>>()?;

    let regime_rows: Vec<String> = cells
        .iter()
        .map(|(r, d, regime, v, _)| format!("{r},{d},{regime},{v}"))
        .collect();
    let dir = out_dir(ctx);
    write_csv(
        &dir.join("sweep_regime.csv"),
        "r_ratio,D_ratio,regime,v_limit",
        &regime_rows,
    )?;
    let composition_rows: Vec<String> = cells
        .iter()
        .map(|(r, d, _, _, q)| match q {
            Some(q) => format!("{r},{d},{q}"),
            None => format!("{r},{d},"),
        })
        .collect();
    write_csv(
        &dir.join("sweep_composition.csv"),
        "r_ratio,D_ratio,q_ratio",
        &composition_rows,
    )?;

    let count = |want: Regime| cells.iter().filter(|c| c.2 == want).count();
    println!(
        "{} points: {} anomalous, {} establisher, {} disperser",
        grid * grid,
        count(Regime::Anomalous),
        count(Regime::Establisher),
        count(Regime::Disperser)
    );
    Ok(())
}

/// The back state seeding the initial condition: the positive coexistence
/// point of the mutationless competition.
fn back_state(p: &ModelParams) -> Result<Density2, CliError> {
    let point = eqs::equilibria_of_g(p)?
        .into_iter()
        .find(|eq| eq.kind == EquilibriumKind::Coexistence)
        .map(|eq| eq.point)
        .ok_or_else(|| {
            CliError::Validation("the competition matrix admits no coexistence state".into())
        })?;
    if !(point.n_e > 0.0 && point.n_d > 0.0) {
        return Err(CliError::Validation(format!(
            "the coexistence state ({:.6}, {:.6}) is not positive; \
             these parameters cannot seed a front",
            point.n_e, point.n_d
        )));
    }
    Ok(point)
}

struct PreparedSim {
    grid: pde::Grid1D,
    cfg: pde::SimConfig,
    ic: pde::FieldState,
    left: Density2,
}

fn prepare_sim(ctx: &Context, args: &SimArgs) -> Result<PreparedSim, CliError> {
    let mut s: SimSettings = ctx.run.sim.clone();
    if let Some(v) = args.length {
        s.length = v;
    }
    if let Some(v) = args.nx {
        s.nx = v;
    }
    if let Some(v) = args.t_end {
        s.t_end = v;
    }
    if let Some(v) = args.cfl_safety {
        s.cfl_safety = v;
    }
    if let Some(v) = args.threshold_frac {
        s.threshold_frac = v;
    }
    if let Some(v) = args.x0 {
        s.x0 = v;
    }
    if let Some(name) = &args.boundary {
        s.boundary = parse_boundary(name)?;
    }
    validate_sim(&s)?;

    let left = back_state(&ctx.run.params)?;
    let grid = pde::Grid1D::new(s.length, s.nx)?;
    let mut cfg = pde::SimConfig::new(s.t_end, s.threshold_frac * (left.n_e + left.n_d))?;
    cfg.cfl_safety = s.cfl_safety;
    cfg.boundary = match s.boundary {
        BoundaryChoice::Neumann => Boundary::NeumannZeroFlux,
        BoundaryChoice::DirichletLeft => Boundary::DirichletLeft(left),
    };
    cfg.validate()?;
    let ic = pde::heaviside_ic(&grid, s.x0, left)?;
    Ok(PreparedSim {
        grid,
        cfg,
        ic,
        left,
    })
}

/// Runs the front simulation, writes the front trace and the final profile,
/// and summarises the speed estimate and the invariant-region check.
pub fn simulate(ctx: &Context, args: &SimArgs) -> Result<(), CliError> {
    let sim = prepare_sim(ctx, args)?;
    let (state, trace, bounds) = pde::simulate(&ctx.run.params, &sim.grid, &sim.cfg, &sim.ic)?;

    let dir = out_dir(ctx);
    write_with(&dir.join("trace.csv"), |w| pde::write_trace_csv(w, &trace))?;
    write_with(&dir.join("profile.csv"), |w| {
        pde::write_profile_csv(w, &sim.grid, &state)
    })?;

    let estimate = pde::estimate_speed(&trace, 0.5, &sim.grid);
    let front = trace.samples.last().map(|(_, x)| *x);
    if ctx.json {
        let payload = serde_json::json!({
            "t": state.t,
            "front": front,
            "left_state": sim.left,
            "speed": estimate.as_ref().ok(),
            "bounds": bounds,
        });
        println!("{}", to_json(&payload)?);
        return Ok(());
    }
    let front_text = match front {
        Some(x) => format!("front at x = {x:.4}"),
        None => "front level never crossed".into(),
    };
    let bounds_text = if bounds.violated {
        "VIOLATED"
    } else {
        "respected"
    };
    match estimate {
        Ok(est) => println!(
            "t = {:.2}: {front_text}, speed ~= {:.6} (stderr {:.1e}), invariant region {bounds_text}",
            state.t, est.speed, est.stderr
        ),
        Err(why) => println!(
            "t = {:.2}: {front_text}, speed estimate unavailable ({why}), \
             invariant region {bounds_text}",
            state.t
        ),
    }
    Ok(())
}

/// Measures the front speed and compares it against the linearised value.
/// Boundary contamination exits with code 3, a conclusive mismatch with 2.
pub fn verify(ctx: &Context, args: &SimArgs, tolerance: f64) -> Result<(), CliError> {
    let sim = prepare_sim(ctx, args)?;
    let report =
        pde::verify_linear_determinacy(&ctx.run.params, &sim.grid, &sim.cfg, &sim.ic, tolerance)?;
    if ctx.json {
        println!("{}", to_json(&report)?);
    } else {
        let verdict = if !report.conclusive {
            "INCONCLUSIVE"
        } else if report.pass {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "c* = {:.9}; measured = {:.6} +/- {:.1e} over the trailing {:.0}% window; \
             relative error {:.3}% (tolerance {:.2}%): {verdict}",
            report.c_star,
            report.measured.speed,
            report.measured.stderr,
            100.0 * report.measured.window,
            100.0 * report.relative_error,
            100.0 * report.tolerance
        );
    }
    if !report.conclusive {
        return Err(CliError::Inconclusive(
            "the front reached the far boundary; enlarge the domain or shorten the run".into(),
        ));
    }
    if !report.pass {
        return Err(CliError::Numerical(format!(
            "measured speed differs from the linearised value by {:.3}%, tolerance {:.2}%",
            100.0 * report.relative_error,
            100.0 * report.tolerance
        )));
    }
    Ok(())
}
