//! The linear spreading-speed engine.
//!
//! Exponential front ansatz with decay rate `beta` turns the linearisation at
//! the leading edge into a 2x2 eigenvalue problem. With mutation switched on
//! the relevant matrix has positive off-diagonals and a distinguished
//! Perron-Frobenius eigenvalue `eta(beta)`; the candidate front speed is the
//! minimum of `eta` over `beta`, and the minimiser also fixes the morph
//! composition of the leading edge. Without mutation the two morphs decouple
//! and the same construction degenerates to the upper envelope of two
//! independent dispersion curves, whose minimum selects one of three limiting
//! speeds. This module computes the matrix, its eigenpairs, the minimised
//! speed, the limiting-speed classification and the small-mutation expansion
//! of the minimum, plus speed curves over a mutation grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{bisect_root, golden_section_min, Mat2, Vec2};
use crate::model::{ModelParams, MutationScaling};

/// Number of points in the coarse logarithmic scan over decay rates.
const SCAN_POINTS: usize = 200;
/// Scan range for the decay rate, log-uniform.
const SCAN_LO: f64 = 1e-3;
const SCAN_HI: f64 = 1e3;
/// Relative bracket width at which golden-section refinement stops.
const GOLDEN_REL_WIDTH: f64 = 1e-11;

/// The front decay-rate matrix: growth and mutation exchange seen by an
/// exponentially decaying front tail with decay rate `beta`, travelling-frame
/// contribution included.
///
/// Entries: `[[beta D_e + (r_e - mu_e)/beta, mu_d/beta],
///            [mu_e/beta, beta D_d + (r_d - mu_d)/beta]]`.
pub fn h_matrix(p: &ModelParams, beta: f64) -> Result<Mat2> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            requirement: "positive and finite",
            value: beta,
        });
    }
    Ok(Mat2::new(
        beta * p.d_e + (p.r_e - p.mu_e) / beta,
        p.mu_d / beta,
        p.mu_e / beta,
        beta * p.d_d + (p.r_d - p.mu_d) / beta,
    ))
}

/// Closed-form Perron-Frobenius eigenpair of a 2x2 matrix with non-negative
/// off-diagonals: the eigenvalue of largest real part, which is real, at
/// least `max(h11, h22)`, and carries a non-negative eigenvector. The
/// eigenvector is returned with unit Euclidean norm.
///
/// With both off-diagonals zero the matrix is reducible, the eigenvector is
/// not pinned down, and the caller should fall back to envelope reasoning;
/// that case is rejected.
pub fn pf_eigenpair(h: &Mat2) -> Result<(f64, Vec2)> {
    if h.a12 < 0.0 {
        return Err(Error::NegativeOffDiagonal { value: h.a12 });
    }
    if h.a21 < 0.0 {
        return Err(Error::NegativeOffDiagonal { value: h.a21 });
    }
    if h.a12 == 0.0 && h.a21 == 0.0 {
        return Err(Error::ReducibleMatrix);
    }
    let mean = 0.5 * (h.a11 + h.a22);
    let delta = 0.5 * (h.a11 - h.a22);
    let radius = (delta * delta + h.a12 * h.a21).sqrt();
    // The true eigenvalue never sits below either diagonal entry, but the
    // square root can round a hair under |delta|; clamp so callers can rely
    // on the bound exactly.
    let eta = (mean + radius).max(h.a11).max(h.a22);
    // Each branch adds quantities of the same sign, so neither cancels; pick
    // by the sign of delta and fall back if a zero off-diagonal zeroes the
    // chosen branch out.
    let mut q = if delta <= 0.0 {
        Vec2::new(h.a12, radius - delta)
    } else {
        Vec2::new(radius + delta, h.a21)
    };
    if q.norm() == 0.0 {
        q = if delta <= 0.0 {
            Vec2::new(radius + delta, h.a21)
        } else {
            Vec2::new(h.a12, radius - delta)
        };
    }
    let q = q.scale(1.0 / q.norm());
    Ok((eta, q))
}

/// One point of the dispersion relation: the decay rate, the candidate speed
/// and, when mutation couples the morphs, the leading-edge composition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub beta: f64,
    pub eta: f64,
    /// Unit-norm leading-edge composition `(q_e, q_d)`. `None` in envelope
    /// mode, i.e. when both mutation rates vanish and the morphs decouple.
    pub q: Option<Vec2>,
}

impl DispersionPoint {
    /// Disperser-to-establisher composition ratio `q_d / q_e`, when defined.
    pub fn q_ratio(&self) -> Option<f64> {
        self.q.map(|q| q.y / q.x)
    }
}

fn envelope_branches(p: &ModelParams, beta: f64) -> (f64, f64) {
    (beta * p.d_e + p.r_e / beta, beta * p.d_d + p.r_d / beta)
}

fn uses_envelope(p: &ModelParams) -> bool {
    p.mu_e + p.mu_d == 0.0
}

/// Candidate speed at a fixed decay rate, without allocating the eigenvector.
fn eta_at(p: &ModelParams, beta: f64) -> f64 {
    if uses_envelope(p) {
        let (eta_e, eta_d) = envelope_branches(p, beta);
        eta_e.max(eta_d)
    } else {
        let h11 = beta * p.d_e + (p.r_e - p.mu_e) / beta;
        let h22 = beta * p.d_d + (p.r_d - p.mu_d) / beta;
        let delta = 0.5 * (h11 - h22);
        let coupling = p.mu_e * p.mu_d / (beta * beta);
        0.5 * (h11 + h22) + (delta * delta + coupling).sqrt()
    }
}

/// Derivative of [`eta_at`] in `beta`; piecewise (active branch) in envelope
/// mode, which is all the bisection polish needs.
fn eta_derivative(p: &ModelParams, beta: f64) -> f64 {
    if uses_envelope(p) {
        let (eta_e, eta_d) = envelope_branches(p, beta);
        if eta_e >= eta_d {
            p.d_e - p.r_e / (beta * beta)
        } else {
            p.d_d - p.r_d / (beta * beta)
        }
    } else {
        let bb = beta * beta;
        let h11p = p.d_e - (p.r_e - p.mu_e) / bb;
        let h22p = p.d_d - (p.r_d - p.mu_d) / bb;
        let delta = 0.5
            * ((beta * p.d_e + (p.r_e - p.mu_e) / beta) - (beta * p.d_d + (p.r_d - p.mu_d) / beta));
        let delta_p = 0.5 * (h11p - h22p);
        let coupling = p.mu_e * p.mu_d / bb;
        let radius = (delta * delta + coupling).sqrt();
        0.5 * (h11p + h22p) + (delta * delta_p - p.mu_e * p.mu_d / (bb * beta)) / radius
    }
}

/// Evaluates the dispersion relation at one decay rate. Perron-Frobenius
/// mode when any mutation is present, envelope mode (`q = None`) otherwise.
pub fn dispersion(p: &ModelParams, beta: f64) -> Result<DispersionPoint> {
    let h = h_matrix(p, beta)?;
    if uses_envelope(p) {
        let (eta_e, eta_d) = envelope_branches(p, beta);
        Ok(DispersionPoint {
            beta,
            eta: eta_e.max(eta_d),
            q: None,
        })
    } else {
        let (eta, q) = pf_eigenpair(&h)?;
        Ok(DispersionPoint {
            beta,
            eta,
            q: Some(q),
        })
    }
}

/// The minimised dispersion relation: candidate spreading speed, minimising
/// decay rate and (in Perron-Frobenius mode) leading-edge composition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedPoint {
    pub c_star: f64,
    pub beta_min: f64,
    pub q: Option<Vec2>,
}

impl SpeedPoint {
    /// Disperser-to-establisher composition ratio at the minimiser.
    pub fn q_ratio(&self) -> Option<f64> {
        self.q.map(|q| q.y / q.x)
    }
}

/// Minimises the dispersion relation over decay rates in `[1e-3, 1e3]`.
///
/// A 200-point logarithmic scan brackets the minimum, golden-section search
/// narrows the bracket to relative width 1e-11, and a final bisection on the
/// analytic derivative pins the minimiser to machine precision. The last
/// step matters: at small mutation rates the composition ratio varies so
/// steeply in `beta` that value-based search alone cannot place the
/// minimiser accurately enough.
///
/// Requires `mu_e < r_e` and `mu_d < r_d` so that the dispersion relation
/// grows without bound at both ends of the scan; a scan whose smallest value
/// sits on the boundary is reported as a bracket failure.
pub fn min_speed(p: &ModelParams) -> Result<SpeedPoint> {
    if p.mu_e >= p.r_e || p.mu_d >= p.r_d {
        return Err(Error::Precondition(format!(
            "min_speed needs mu_e < r_e and mu_d < r_d, got mu_e={}, r_e={}, mu_d={}, r_d={}",
            p.mu_e, p.r_e, p.mu_d, p.r_d
        )));
    }
    let beta_of = |i: usize| -> f64 {
        let t = i as f64 / (SCAN_POINTS - 1) as f64;
        SCAN_LO * (SCAN_HI / SCAN_LO).powf(t)
    };
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..SCAN_POINTS {
        let val = eta_at(p, beta_of(i));
        if val < best_val {
            best_val = val;
            best_idx = i;
        }
    }
    if best_idx == 0 || best_idx == SCAN_POINTS - 1 {
        return Err(Error::BracketFailure {
            beta: beta_of(best_idx),
        });
    }
    let cell = (beta_of(best_idx - 1), beta_of(best_idx + 1));
    let (mut beta_min, mut c_star, _) =
        golden_section_min(|beta| eta_at(p, beta), cell.0, cell.1, GOLDEN_REL_WIDTH);
    // Value comparisons saturate at the floating-point noise floor well
    // before the minimiser is pinned down, so polish with a bisection on the
    // analytic derivative over the whole scan cell (where the sign change is
    // guaranteed), keeping the polished point only if it is at least as good.
    if let Some(root) = bisect_root(|beta| eta_derivative(p, beta), cell.0, cell.1, 200) {
        let val = eta_at(p, root);
        if val <= c_star + 1e-12 * c_star.abs() {
            beta_min = root;
            c_star = val;
        }
    }
    let q = if uses_envelope(p) {
        None
    } else {
        Some(pf_eigenpair(&h_matrix(p, beta_min)?)?.1)
    };
    Ok(SpeedPoint {
        c_star,
        beta_min,
        q,
    })
}

/// The three limiting speeds: each morph's solo Fisher speed, and (when
/// defined) the speed obtained at the crossing of the two envelope branches.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub v_e: f64,
    pub v_d: f64,
    /// Crossing speed `|r_e D_d - r_d D_e| / sqrt((r_e - r_d)(D_d - D_e))`;
    /// `None` when the radicand is non-positive.
    pub v_f: Option<f64>,
}

pub fn speed_limits(p: &ModelParams) -> SpeedLimits {
    let radicand = (p.r_e - p.r_d) * (p.d_d - p.d_e);
    let v_f = if radicand > 0.0 {
        Some((p.r_e * p.d_d - p.r_d * p.d_e).abs() / radicand.sqrt())
    } else {
        None
    };
    SpeedLimits {
        v_e: 2.0 * (p.r_e * p.d_e).sqrt(),
        v_d: 2.0 * (p.r_d * p.d_d).sqrt(),
        v_f,
    }
}

/// Which limiting speed the mutation-free front selects.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// The faster-growing morph's solo speed `v_e` wins.
    Establisher,
    /// The faster-diffusing morph's solo speed `v_d` wins.
    Disperser,
    /// The crossing speed `v_f` exceeds both solo speeds.
    Anomalous,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Establisher => "establisher",
            Regime::Disperser => "disperser",
            Regime::Anomalous => "anomalous",
        })
    }
}

impl Regime {
    /// The selected limiting speed for this regime.
    pub fn limit_speed(&self, limits: &SpeedLimits) -> Option<f64> {
        match self {
            Regime::Establisher => Some(limits.v_e),
            Regime::Disperser => Some(limits.v_d),
            Regime::Anomalous => limits.v_f,
        }
    }
}

/// Classifies the mutation-free front under the standing assumption that the
/// establisher grows faster (`r_e > r_d`) and the disperser diffuses faster
/// (`D_d > D_e`). Anomalous means both of
///
/// ```text
/// D_d/D_e + r_d/r_e > 2    and    D_e/D_d + r_e/r_d > 2
/// ```
///
/// hold strictly; otherwise the faster solo speed names the regime. The
/// verdict is cross-checked by minimising the mutation-free envelope
/// numerically, which must land on the selected limiting speed to 1e-10 (and
/// on the crossing decay rate to 1e-8 in the anomalous case).
pub fn classify_regime(p: &ModelParams) -> Result<Regime> {
    if !(p.r_e > p.r_d && p.d_d > p.d_e) {
        return Err(Error::Precondition(format!(
            "regime classification assumes r_e > r_d and D_d > D_e, \
             got r_e={}, r_d={}, D_e={}, D_d={}",
            p.r_e, p.r_d, p.d_e, p.d_d
        )));
    }
    let anomalous = p.d_d / p.d_e + p.r_d / p.r_e > 2.0 && p.d_e / p.d_d + p.r_e / p.r_d > 2.0;
    let limits = speed_limits(p);
    let regime = if anomalous {
        Regime::Anomalous
    } else if limits.v_e >= limits.v_d {
        Regime::Establisher
    } else {
        Regime::Disperser
    };
    let expected = regime.limit_speed(&limits).ok_or_else(|| {
        Error::Inconsistency("crossing speed undefined despite r_e > r_d and D_d > D_e".into())
    })?;
    let envelope = min_speed(&p.without_mutation())?;
    if (envelope.c_star - expected).abs() > 1e-10 {
        return Err(Error::Inconsistency(format!(
            "envelope minimum {} disagrees with the {regime} limit {expected}",
            envelope.c_star
        )));
    }
    if anomalous {
        let beta_star = ((p.r_e - p.r_d) / (p.d_d - p.d_e)).sqrt();
        if (envelope.beta_min - beta_star).abs() > 1e-8 {
            return Err(Error::Inconsistency(format!(
                "envelope minimiser {} disagrees with the crossing decay rate {beta_star}",
                envelope.beta_min
            )));
        }
    }
    Ok(regime)
}

/// Small-mutation expansion of the minimised speed around `mu = 0` in the
/// anomalous regime, where the limit is the crossing speed.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    /// Crossing decay rate `sqrt((r_e - r_d)/(D_d - D_e))`.
    pub beta_star: f64,
    /// Limiting speed at `mu = 0`; equals `v_f`.
    pub eta_0: f64,
    pub v_e: f64,
    pub v_d: f64,
    pub v_f: f64,
    /// Branch slopes at the crossing: `a = beta*^2 D_d - r_d`,
    /// `b = r_e - beta*^2 D_e`; both positive exactly in the anomalous zone.
    pub a: f64,
    pub b: f64,
    /// Limiting composition ratio `q_d/q_e = sqrt(b e / (a d))`.
    pub q_ratio: f64,
    /// Derivative of the minimised speed in `mu` at `mu = 0`.
    pub eta_prime_0: f64,
    /// Derivative of the minimising decay rate in `mu` at `mu = 0`.
    pub beta_prime_0: f64,
    pub regime: Regime,
}

/// Computes the `mu -> 0` limit of the minimised dispersion relation for
/// mutation rates `(mu e, mu d)`: the crossing decay rate and speed, the
/// branch slopes, the limiting composition ratio, and the first derivatives
/// of the speed and its minimiser in `mu`. Only the relative rates of `s`
/// enter; its magnitude and the mutation entries of `p` are ignored.
///
/// The derivatives solve a 2x2 linear system: one equation from
/// differentiating the eigenvalue stationarity condition, one from the
/// eigenvector balance at the crossing with the limiting composition
/// substituted. A third, redundant balance relation is evaluated as a
/// residual and must vanish to 1e-8.
pub fn limit_summary(p: &ModelParams, s: &MutationScaling) -> Result<LimitSummary> {
    let regime = classify_regime(p)?;
    if regime != Regime::Anomalous {
        return Err(Error::NotAnomalous);
    }
    let limits = speed_limits(p);
    let v_f = limits.v_f.ok_or_else(|| {
        Error::Inconsistency("crossing speed undefined in anomalous regime".into())
    })?;
    let beta_star = ((p.r_e - p.r_d) / (p.d_d - p.d_e)).sqrt();
    let eta_e = beta_star * p.d_e + p.r_e / beta_star;
    let eta_d = beta_star * p.d_d + p.r_d / beta_star;
    if (eta_e - eta_d).abs() > 1e-12 * eta_d.abs().max(1.0) {
        return Err(Error::Inconsistency(format!(
            "envelope branches fail to cross at beta* ({eta_e} vs {eta_d})"
        )));
    }
    let eta_0 = 0.5 * (eta_e + eta_d);
    let a = beta_star * beta_star * p.d_d - p.r_d;
    let b = p.r_e - beta_star * beta_star * p.d_e;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::NotAnomalous);
    }
    let q_ratio = (b * s.e / (a * s.d)).sqrt();
    let system = Mat2::new(
        -b / beta_star,
        -beta_star,
        2.0 * beta_star * (b * p.d_d - a * p.d_e) + eta_0 * (a - b),
        beta_star * (a - b),
    );
    let rhs = Vec2::new(s.e - s.d * q_ratio, b * s.d - a * s.e);
    let sol = system.solve(rhs)?;
    let (beta_prime_0, eta_prime_0) = (sol.x, sol.y);
    let residual = (a / beta_star * beta_prime_0 - beta_star * eta_prime_0 - s.d) * q_ratio + s.e;
    if residual.abs() > 1e-8 {
        return Err(Error::Inconsistency(format!(
            "redundant balance relation violated: residual {residual}"
        )));
    }
    if eta_prime_0 > 0.0 {
        return Err(Error::Inconsistency(format!(
            "speed derivative in mu must be non-positive, got {eta_prime_0}"
        )));
    }
    Ok(LimitSummary {
        beta_star,
        eta_0,
        v_e: limits.v_e,
        v_d: limits.v_d,
        v_f,
        a,
        b,
        q_ratio,
        eta_prime_0,
        beta_prime_0,
        regime,
    })
}

/// The limiting composition ratio as a function of the three dimensionless
/// ratios `r = r_d/r_e`, `D = D_e/D_d` and `m = e/d`:
///
/// ```text
/// sqrt( (2D - rD - 1) / (2r - rD - 1) * m )
/// ```
///
/// Inside the anomalous zone numerator and denominator are both negative;
/// anywhere else the quotient is non-positive and the ratio undefined.
pub fn q_ratio_from_ratios(r: f64, d: f64, m: f64) -> Result<f64> {
    for (name, value, requirement) in [
        ("r", r, "positive and finite"),
        ("D", d, "positive and finite"),
    ] {
        if value <= 0.0 || !value.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                requirement,
                value,
            });
        }
    }
    if m < 0.0 || !m.is_finite() {
        return Err(Error::InvalidParameter {
            name: "m",
            requirement: "non-negative and finite",
            value: m,
        });
    }
    let numerator = 2.0 * d - r * d - 1.0;
    let denominator = 2.0 * r - r * d - 1.0;
    if numerator >= 0.0 || denominator >= 0.0 {
        return Err(Error::ZoneViolated);
    }
    Ok((numerator / denominator * m).sqrt())
}

/// One row of a minimised-speed curve over a mutation grid.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuCurveRow {
    pub mu: f64,
    pub eta: f64,
    pub beta: f64,
    pub q_ratio: f64,
    /// Finite-difference derivative of `eta` in `mu` (central at interior
    /// rows, one-sided at the ends).
    pub eta_prime: f64,
    /// Finite-difference derivative of `beta` in `mu`.
    pub beta_prime: f64,
}

/// Minimised speed, minimiser and composition ratio along a mutation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuCurve {
    pub rows: Vec<MuCurveRow>,
}

/// Evaluates [`min_speed`] at mutation rates `(mu e, mu d)` for each `mu` in
/// `mu_grid`, holding everything else in `p_base` fixed, and appends
/// finite-difference derivative columns. The grid must hold at least two
/// strictly increasing positive values. Rows are computed in parallel;
/// values and ordering do not depend on scheduling. Only the relative rates
/// of `s` are used; the mutation entries of `p_base` are overridden.
pub fn mu_curve(p_base: &ModelParams, s: &MutationScaling, mu_grid: &[f64]) -> Result<MuCurve> {
    let ascending = mu_grid.windows(2).all(|w| w[0] < w[1]);
    if mu_grid.len() < 2 || !ascending || mu_grid.iter().any(|m| *m <= 0.0 || !m.is_finite()) {
        return Err(Error::BadMuGrid);
    }
    let points: Vec<(f64, SpeedPoint)> = mu_grid
        .par_iter()
        .map(|&mu| {
            let scaled = p_base.with_mutation(&MutationScaling::new(mu, s.e, s.d)?);
            Ok((mu, min_speed(&scaled)?))
        })
        .collect::<Result<_>>()?;
    let n = points.len();
    let slope = |get: &dyn Fn(&SpeedPoint) -> f64, i: usize, j: usize| -> f64 {
        (get(&points[j].1) - get(&points[i].1)) / (points[j].0 - points[i].0)
    };
    let rows = (0..n)
        .map(|i| {
            let (mu, sp) = points[i];
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let q_ratio = sp.q_ratio().ok_or_else(|| {
                Error::Inconsistency("positive mutation produced an envelope point".into())
            })?;
            Ok(MuCurveRow {
                mu,
                eta: sp.c_star,
                beta: sp.beta_min,
                q_ratio,
                eta_prime: slope(&|s| s.c_star, lo, hi),
                beta_prime: slope(&|s| s.beta_min, lo, hi),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuCurve { rows })
}
