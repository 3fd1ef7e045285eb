//! Finite-difference simulation of the full nonlinear system on a 1D line,
//! with front tracking and empirical speed estimation.
//!
//! Method of lines: second-order central Laplacian in space, explicit Euler
//! in time under the diffusion CFL bound. The reactions are non-stiff at the
//! rates of interest, so nothing fancier is warranted; what matters for the
//! speed measurements is a long enough domain and run time, not the order of
//! the integrator. The front position is read off as the rightmost falling
//! crossing of the total density through a threshold, and the speed is a
//! least-squares slope over the trailing part of the position trace.

use std::io;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::equilibria::k_plus;
use crate::error::{Error, Result};
use crate::model::{reaction_f, Density2, ModelParams};
use crate::spectral::min_speed;

/// Uniform 1D grid over `[0, length]` with `nx` points including both ends.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub length: f64,
    pub nx: usize,
}

impl Grid1D {
    /// Coarser grids than this cannot resolve a front at all.
    pub const MIN_POINTS: usize = 16;

    pub fn new(length: f64, nx: usize) -> Result<Self> {
        if length <= 0.0 || !length.is_finite() {
            return Err(Error::InvalidParameter {
                name: "length",
                requirement: "positive and finite",
                value: length,
            });
        }
        if nx < Self::MIN_POINTS {
            return Err(Error::Precondition(format!(
                "grid needs at least {} points, got {nx}",
                Self::MIN_POINTS
            )));
        }
        Ok(Grid1D { length, nx })
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Time step for the diffusion CFL bound scaled by a safety factor in
    /// `(0, 1]`: `dt = safety * dx^2 / (2 max(D_e, D_d))`.
    pub fn cfl_dt(&self, p: &ModelParams, cfl_safety: f64) -> f64 {
        let dx = self.dx();
        cfl_safety * dx * dx / (2.0 * p.d_e.max(p.d_d))
    }
}

/// Boundary handling for the two domain ends.
#[derive(Copy, Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Ghost-value reflection at both ends (no flux).
    #[default]
    NeumannZeroFlux,
    /// The left end is pinned to a fixed density; the right end stays
    /// zero-flux.
    DirichletLeft(Density2),
}

/// Run settings for [`simulate`]: how long, how cautious a time step, which
/// boundaries, how often to sample the front and at which density level.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Fraction of the diffusion CFL limit used for the time step.
    pub cfl_safety: f64,
    pub boundary: Boundary,
    /// Steps between front samples; `None` picks a stride of roughly 0.1
    /// time units.
    pub sample_stride: Option<usize>,
    /// Total-density level whose rightmost falling crossing is "the front".
    pub threshold: f64,
}

impl SimConfig {
    pub fn new(t_end: f64, threshold: f64) -> Result<Self> {
        let cfg = SimConfig {
            t_end,
            cfl_safety: 0.4,
            boundary: Boundary::default(),
            sample_stride: None,
            threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value, ok) in [
            (
                "t_end",
                self.t_end,
                self.t_end > 0.0 && self.t_end.is_finite(),
            ),
            (
                "cfl_safety",
                self.cfl_safety,
                self.cfl_safety > 0.0 && self.cfl_safety <= 1.0,
            ),
            (
                "threshold",
                self.threshold,
                self.threshold > 0.0 && self.threshold.is_finite(),
            ),
        ] {
            if !ok {
                return Err(Error::InvalidParameter {
                    name,
                    requirement: "positive, finite and within range",
                    value,
                });
            }
        }
        if self.sample_stride == Some(0) {
            return Err(Error::Precondition(
                "sample_stride must be at least 1 when given".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete state: densities of both morphs over the grid at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub n_e: Vec<f64>,
    pub n_d: Vec<f64>,
}

impl FieldState {
    pub fn uniform(grid: &Grid1D, value: Density2) -> FieldState {
        FieldState {
            t: 0.0,
            n_e: vec![value.n_e; grid.nx],
            n_d: vec![value.n_d; grid.nx],
        }
    }

    fn assert_on_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.n_e.len() != grid.nx || self.n_d.len() != grid.nx {
            return Err(Error::Precondition(format!(
                "state arrays ({}, {}) do not match the grid ({} points)",
                self.n_e.len(),
                self.n_d.len(),
                grid.nx
            )));
        }
        Ok(())
    }
}

/// Step-function initial data: `left` on `[0, x0]`, empty beyond.
pub fn heaviside_ic(grid: &Grid1D, x0: f64, left: Density2) -> Result<FieldState> {
    if !(x0 > 0.0 && x0 < grid.length) {
        return Err(Error::InvalidParameter {
            name: "x0",
            requirement: "strictly inside the domain",
            value: x0,
        });
    }
    let mut state = FieldState::uniform(grid, Density2::ZERO);
    for i in 0..grid.nx {
        if grid.x(i) <= x0 {
            state.n_e[i] = left.n_e;
            state.n_d[i] = left.n_d;
        }
    }
    Ok(state)
}

/// Componentwise running extrema of a simulation.
#[derive(Copy, Clone, Debug)]
struct Extrema {
    min_e: f64,
    max_e: f64,
    min_d: f64,
    max_d: f64,
}

impl Extrema {
    fn new() -> Extrema {
        Extrema {
            min_e: f64::INFINITY,
            max_e: f64::NEG_INFINITY,
            min_d: f64::INFINITY,
            max_d: f64::NEG_INFINITY,
        }
    }

    fn absorb(&mut self, n_e: f64, n_d: f64) {
        self.min_e = self.min_e.min(n_e);
        self.max_e = self.max_e.max(n_e);
        self.min_d = self.min_d.min(n_d);
        self.max_d = self.max_d.max(n_d);
    }

    fn absorb_state(&mut self, state: &FieldState) -> Result<()> {
        for (&n_e, &n_d) in state.n_e.iter().zip(&state.n_d) {
            if !n_e.is_finite() || !n_d.is_finite() {
                return Err(Error::BlowUp { t: state.t });
            }
            self.absorb(n_e, n_d);
        }
        Ok(())
    }
}

/// One explicit Euler step without allocation; `dst` receives the new state.
/// Returns an error on blow-up (non-finite values).
fn advance(
    p: &ModelParams,
    src: &FieldState,
    dst: &mut FieldState,
    dx: f64,
    dt: f64,
    boundary: &Boundary,
    extrema: &mut Extrema,
) -> Result<()> {
    let nx = src.n_e.len();
    let inv_dx2 = 1.0 / (dx * dx);
    dst.t = src.t + dt;
    let mut finite = true;
    for i in 0..nx {
        // Ghost-value reflection at both ends; a pinned left value is
        // overwritten below.
        let il = if i == 0 { 1 } else { i - 1 };
        let ir = if i == nx - 1 { nx - 2 } else { i + 1 };
        let lap_e = (src.n_e[il] - 2.0 * src.n_e[i] + src.n_e[ir]) * inv_dx2;
        let lap_d = (src.n_d[il] - 2.0 * src.n_d[i] + src.n_d[ir]) * inv_dx2;
        let f = reaction_f(
            p,
            Density2 {
                n_e: src.n_e[i],
                n_d: src.n_d[i],
            },
        );
        let n_e = src.n_e[i] + dt * (p.d_e * lap_e + f.x);
        let n_d = src.n_d[i] + dt * (p.d_d * lap_d + f.y);
        dst.n_e[i] = n_e;
        dst.n_d[i] = n_d;
        finite &= n_e.is_finite() && n_d.is_finite();
        extrema.absorb(n_e, n_d);
    }
    if let Boundary::DirichletLeft(pinned) = boundary {
        dst.n_e[0] = pinned.n_e;
        dst.n_d[0] = pinned.n_d;
        extrema.absorb(pinned.n_e, pinned.n_d);
    }
    if !finite {
        return Err(Error::BlowUp { t: dst.t });
    }
    Ok(())
}

/// One explicit Euler step of the reaction-diffusion system. The time step
/// must respect the diffusion CFL bound `dt <= dx^2 / (2 max D)`.
pub fn step(
    p: &ModelParams,
    state: &FieldState,
    dx: f64,
    dt: f64,
    boundary: &Boundary,
) -> Result<FieldState> {
    if dx <= 0.0 || !dx.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dx",
            requirement: "positive and finite",
            value: dx,
        });
    }
    let limit = dx * dx / (2.0 * p.d_e.max(p.d_d));
    if dt <= 0.0 || !dt.is_finite() || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolated { dt, limit });
    }
    if state.n_e.len() != state.n_d.len() || state.n_e.len() < 2 {
        return Err(Error::Precondition(
            "state needs equal-length component arrays with at least 2 points".into(),
        ));
    }
    let mut dst = state.clone();
    let mut extrema = Extrema::new();
    advance(p, state, &mut dst, dx, dt, boundary, &mut extrema)?;
    Ok(dst)
}

/// Front position samples `(t, x_front)` at a fixed threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub threshold: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Componentwise extrema over a whole run, checked against the invariant
/// region `[-1e-10, k_plus + 1e-8]`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub min_e: f64,
    pub max_e: f64,
    pub min_d: f64,
    pub max_d: f64,
    /// Upper limits `k_plus + 1e-8`; infinite when that equilibrium is
    /// unavailable for the given parameters (the lower check still applies).
    pub upper_e: f64,
    pub upper_d: f64,
    pub violated: bool,
}

const LOWER_SLACK: f64 = -1e-10;
const UPPER_SLACK: f64 = 1e-8;

fn bounds_report(p: &ModelParams, extrema: &Extrema) -> BoundsReport {
    let (upper_e, upper_d) = match k_plus(p) {
        Ok(k) => (k.n_e + UPPER_SLACK, k.n_d + UPPER_SLACK),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    BoundsReport {
        min_e: extrema.min_e,
        max_e: extrema.max_e,
        min_d: extrema.min_d,
        max_d: extrema.max_d,
        upper_e,
        upper_d,
        violated: extrema.min_e < LOWER_SLACK
            || extrema.min_d < LOWER_SLACK
            || extrema.max_e > upper_e
            || extrema.max_d > upper_d,
    }
}

/// Integrates from `ic` to `cfg.t_end`, sampling the front along the way.
///
/// The time step is the CFL bound scaled by `cfg.cfl_safety`; the final step
/// is shortened to land on `t_end` exactly. The trace holds a sample for the
/// initial state, every `sample_stride`-th step and the final state, except
/// where the threshold crossing does not exist (a state entirely above or
/// below the threshold contributes no sample). Blow-up aborts with the time
/// at which non-finite values first appeared.
pub fn simulate(
    p: &ModelParams,
    grid: &Grid1D,
    cfg: &SimConfig,
    ic: &FieldState,
) -> Result<(FieldState, FrontTrace, BoundsReport)> {
    cfg.validate()?;
    ic.assert_on_grid(grid)?;
    if cfg.t_end <= ic.t {
        return Err(Error::Precondition(format!(
            "t_end {} is not beyond the initial time {}",
            cfg.t_end, ic.t
        )));
    }
    let dx = grid.dx();
    let dt = grid.cfl_dt(p, cfg.cfl_safety);
    let stride = cfg
        .sample_stride
        .unwrap_or_else(|| ((0.1 / dt).round() as usize).max(1));

    let mut trace = FrontTrace {
        threshold: cfg.threshold,
        samples: Vec::new(),
    };
    let push_sample = |state: &FieldState, trace: &mut FrontTrace| -> Result<()> {
        if let Some(x) = track_front(state, grid, cfg.threshold)? {
            trace.samples.push((state.t, x));
        }
        Ok(())
    };

    let mut extrema = Extrema::new();
    extrema.absorb_state(ic)?;
    push_sample(ic, &mut trace)?;

    let mut cur = ic.clone();
    let mut next = ic.clone();
    let mut steps = 0usize;
    loop {
        let remaining = cfg.t_end - cur.t;
        if remaining <= dt * 1e-9 {
            break;
        }
        let this_dt = remaining.min(dt);
        advance(p, &cur, &mut next, dx, this_dt, &cfg.boundary, &mut extrema)?;
        std::mem::swap(&mut cur, &mut next);
        steps += 1;
        if steps.is_multiple_of(stride) {
            push_sample(&cur, &mut trace)?;
        }
        if this_dt < dt {
            break;
        }
    }
    if trace.samples.last().map(|&(t, _)| t) != Some(cur.t) {
        push_sample(&cur, &mut trace)?;
    }
    let report = bounds_report(p, &extrema);
    Ok((cur, trace, report))
}

/// Rightmost falling crossing of the total density through `threshold`,
/// linearly interpolated between the two bracketing grid points. `None` when
/// the state never falls through the threshold (all above, all below, or
/// rising crossings only).
pub fn track_front(state: &FieldState, grid: &Grid1D, threshold: f64) -> Result<Option<f64>> {
    if threshold <= 0.0 || !threshold.is_finite() {
        return Err(Error::InvalidParameter {
            name: "threshold",
            requirement: "positive and finite",
            value: threshold,
        });
    }
    state.assert_on_grid(grid)?;
    let total = |i: usize| state.n_e[i] + state.n_d[i];
    let dx = grid.dx();
    for i in (0..grid.nx - 1).rev() {
        let here = total(i);
        let right = total(i + 1);
        if here >= threshold && right < threshold {
            let frac = (here - threshold) / (here - right);
            return Ok(Some(grid.x(i) + frac * dx));
        }
    }
    Ok(None)
}

/// Least-squares front speed over the trailing part of a trace.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub speed: f64,
    pub stderr: f64,
    /// Trailing fraction of the trace used for the fit.
    pub window: f64,
    /// True when any fitted sample sits within ten grid spacings of the
    /// right end, where the zero-flux wall distorts the front.
    pub boundary_contaminated: bool,
}

/// Fits `x_front = a + speed * t` by ordinary least squares over the trailing
/// `window` fraction of the trace (at least 10 samples required), and flags
/// samples too close to the right boundary to be trusted.
pub fn estimate_speed(trace: &FrontTrace, window: f64, grid: &Grid1D) -> Result<SpeedEstimate> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            requirement: "a fraction in (0, 1]",
            value: window,
        });
    }
    let n = trace.samples.len();
    let count = ((n as f64) * window).ceil() as usize;
    if count < 10 {
        return Err(Error::TooFewSamples {
            have: count,
            need: 10,
        });
    }
    let used = &trace.samples[n - count..];
    let m = count as f64;
    let t_mean = used.iter().map(|&(t, _)| t).sum::<f64>() / m;
    let x_mean = used.iter().map(|&(_, x)| x).sum::<f64>() / m;
    let mut stt = 0.0;
    let mut stx = 0.0;
    for &(t, x) in used {
        stt += (t - t_mean) * (t - t_mean);
        stx += (t - t_mean) * (x - x_mean);
    }
    if stt == 0.0 {
        return Err(Error::Precondition(
            "trace samples share a single time; cannot fit a slope".into(),
        ));
    }
    let speed = stx / stt;
    let mut ssr = 0.0;
    for &(t, x) in used {
        let fit = x_mean + speed * (t - t_mean);
        ssr += (x - fit) * (x - fit);
    }
    let stderr = (ssr / ((m - 2.0) * stt)).sqrt();
    let cutoff = grid.length - 10.0 * grid.dx();
    let boundary_contaminated = used.iter().any(|&(_, x)| x > cutoff);
    Ok(SpeedEstimate {
        speed,
        stderr,
        window,
        boundary_contaminated,
    })
}

/// Outcome of comparing a measured front speed against the minimised
/// dispersion relation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminacyReport {
    /// Speed predicted by the linearised leading edge.
    pub c_star: f64,
    pub measured: SpeedEstimate,
    /// `|measured / c_star - 1|`.
    pub relative_error: f64,
    pub tolerance: f64,
    /// False when boundary contamination makes the measurement untrustworthy.
    pub conclusive: bool,
    /// Conclusive and within tolerance.
    pub pass: bool,
    pub bounds: BoundsReport,
}

/// Fraction of the trace the speed fit uses.
const FIT_WINDOW: f64 = 0.5;

/// Runs a simulation from `ic` and checks whether the measured front speed
/// matches the linear prediction within `tolerance` (relative). Boundary
/// contamination yields an inconclusive report rather than a failure.
pub fn verify_linear_determinacy(
    p: &ModelParams,
    grid: &Grid1D,
    cfg: &SimConfig,
    ic: &FieldState,
    tolerance: f64,
) -> Result<DeterminacyReport> {
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tolerance",
            requirement: "positive and finite",
            value: tolerance,
        });
    }
    let c_star = min_speed(p)?.c_star;
    let (_, trace, bounds) = simulate(p, grid, cfg, ic)?;
    let measured = estimate_speed(&trace, FIT_WINDOW, grid)?;
    let relative_error = (measured.speed / c_star - 1.0).abs();
    let conclusive = !measured.boundary_contaminated;
    Ok(DeterminacyReport {
        c_star,
        measured,
        relative_error,
        tolerance,
        conclusive,
        pass: conclusive && relative_error <= tolerance,
        bounds,
    })
}

/// Writes a front trace as CSV with header `t,x_front`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &FrontTrace) -> io::Result<()> {
    writeln!(w, "t,x_front")?;
    for &(t, x) in &trace.samples {
        writeln!(w, "{t},{x}")?;
    }
    Ok(())
}

/// Writes a density profile as CSV with header `x,n_e,n_d`.
pub fn write_profile_csv<W: Write>(mut w: W, grid: &Grid1D, state: &FieldState) -> io::Result<()> {
    writeln!(w, "x,n_e,n_d")?;
    for i in 0..grid.nx {
        writeln!(w, "{},{},{}", grid.x(i), state.n_e[i], state.n_d[i])?;
    }
    Ok(())
}
