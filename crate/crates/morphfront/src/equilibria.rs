//! Equilibria of the reaction terms and their response to weak mutation.
//!
//! The mutation-free competition dynamics `g` has four equilibria in closed
//! form: extinction, one monoculture per morph and (for non-degenerate
//! competition) a coexistence state. Turning on a small mutation exchange
//! shifts each of them at a rate given by a linear solve against the Jacobian;
//! the monocultures are pushed off the non-negative quadrant, which is why
//! the full reaction `f` keeps only two relevant equilibria. The bounding
//! reactions contribute one distinguished equilibrium each: `k_plus` for the
//! cooperative upper bound and `k_minus` for the saturated lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{newton2, Mat2, Vec2};
use crate::model::{
    check_conditions, density_bounds, jacobian_f, jacobian_f_minus_star, jacobian_f_plus,
    jacobian_g, reaction_f, reaction_f_minus_star, reaction_f_plus, reaction_g, Density2,
    ModelParams, MutationScaling,
};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Structural position of an equilibrium in the quadrant.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    /// Both densities zero.
    Extinction,
    /// Establisher monoculture.
    AxisE,
    /// Disperser monoculture.
    AxisD,
    /// Both densities away from zero.
    Coexistence,
}

/// Linear stability read off the Jacobian's trace and determinant.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Degenerate,
}

/// An equilibrium of one of the reaction terms, with its classification and
/// the residual of the defining reaction at the stored point.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub point: Density2,
    pub kind: EquilibriumKind,
    pub stability: Stability,
    pub residual: f64,
}

/// Classifies a planar equilibrium: determinant below 1e-12 in magnitude is
/// degenerate, negative determinant a saddle, negative trace with positive
/// determinant stable, anything else unstable.
pub fn classify_stability(j: &Mat2) -> Stability {
    let det = j.det();
    if det.abs() <= 1e-12 {
        Stability::Degenerate
    } else if det < 0.0 {
        Stability::Saddle
    } else if j.trace() < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

fn classify_kind(point: Density2, scale: f64) -> EquilibriumKind {
    let zero_tol = 1e-9 * scale.max(1.0);
    match (point.n_e.abs() <= zero_tol, point.n_d.abs() <= zero_tol) {
        (true, true) => EquilibriumKind::Extinction,
        (false, true) => EquilibriumKind::AxisE,
        (true, false) => EquilibriumKind::AxisD,
        (false, false) => EquilibriumKind::Coexistence,
    }
}

fn make_equilibrium(
    p: &ModelParams,
    reaction: impl Fn(&ModelParams, Density2) -> Vec2,
    jac: impl Fn(&ModelParams, Density2) -> Mat2,
    point: Density2,
    kind: EquilibriumKind,
) -> Equilibrium {
    Equilibrium {
        point,
        kind,
        stability: classify_stability(&jac(p, point)),
        residual: reaction(p, point).norm_inf(),
    }
}

/// The four closed-form equilibria of the mutation-free competition dynamics,
/// in the order extinction, establisher monoculture, disperser monoculture,
/// coexistence. Errors when the competition determinant
/// `m_ee m_dd - m_ed m_de` is degenerate and the coexistence point escapes to
/// infinity.
pub fn equilibria_of_g(p: &ModelParams) -> Result<Vec<Equilibrium>> {
    let det = p.m_ee * p.m_dd - p.m_ed * p.m_de;
    if det.abs() <= 1e-12 * (p.m_ee * p.m_dd + p.m_ed * p.m_de) {
        return Err(Error::DegenerateCompetition { det });
    }
    let coex = Density2 {
        n_e: (p.m_dd - p.m_ed) / det,
        n_d: (p.m_ee - p.m_de) / det,
    };
    let points = [
        (Density2::ZERO, EquilibriumKind::Extinction),
        (
            Density2 {
                n_e: 1.0 / p.m_ee,
                n_d: 0.0,
            },
            EquilibriumKind::AxisE,
        ),
        (
            Density2 {
                n_e: 0.0,
                n_d: 1.0 / p.m_dd,
            },
            EquilibriumKind::AxisD,
        ),
        (coex, EquilibriumKind::Coexistence),
    ];
    Ok(points
        .into_iter()
        .map(|(pt, kind)| make_equilibrium(p, reaction_g, jacobian_g, pt, kind))
        .collect())
}

/// First-order displacement of a mutation-free equilibrium per unit mutation
/// magnitude: the derivative of the equilibrium position with respect to `mu`
/// at `mu = 0`, holding the relative rates `(e, d)` fixed. Computed as
/// `-J_g(eq)^{-1} M eq` with `M` the unit-rate exchange matrix. Errors when
/// `eq` is not an equilibrium of `g` (residual above 1e-9) or when the
/// Jacobian is singular there.
pub fn perturbation_theta(p: &ModelParams, s: &MutationScaling, eq: Density2) -> Result<Vec2> {
    let residual = reaction_g(p, eq).norm_inf();
    if residual > 1e-9 {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let rhs = s.rate_matrix().mul_vec(eq.as_vec());
    Ok(jacobian_g(p, eq).solve(rhs)?.scale(-1.0))
}

/// Rectangular search region for [`find_equilibria_of_f`].
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo_e: f64,
    pub hi_e: f64,
    pub lo_d: f64,
    pub hi_d: f64,
}

impl SearchBox {
    pub fn new(lo_e: f64, hi_e: f64, lo_d: f64, hi_d: f64) -> Result<Self> {
        let all = [lo_e, hi_e, lo_d, hi_d];
        if all.iter().any(|v| !v.is_finite()) || hi_e <= lo_e || hi_d <= lo_d {
            return Err(Error::Precondition(format!(
                "search box must be finite with positive extent, got \
                 [{lo_e}, {hi_e}] x [{lo_d}, {hi_d}]"
            )));
        }
        Ok(SearchBox {
            lo_e,
            hi_e,
            lo_d,
            hi_d,
        })
    }

    /// Default box: slightly below zero (to catch equilibria pushed off the
    /// axes) up to 1.1 times the uniform density bounds.
    pub fn default_for(p: &ModelParams) -> SearchBox {
        let (cap_e, cap_d) = density_bounds(p);
        SearchBox {
            lo_e: -0.05,
            hi_e: 1.1 * cap_e,
            lo_d: -0.05,
            hi_d: 1.1 * cap_d,
        }
    }

    fn diameter(&self) -> f64 {
        (self.hi_e - self.lo_e).hypot(self.hi_d - self.lo_d)
    }

    fn contains(&self, pt: Density2, slack: f64) -> bool {
        pt.n_e >= self.lo_e - slack
            && pt.n_e <= self.hi_e + slack
            && pt.n_d >= self.lo_d - slack
            && pt.n_d <= self.hi_d + slack
    }
}

/// Finds the equilibria of the full reaction `f` inside `search` by Newton
/// iteration seeded from a `grid_n` by `grid_n` lattice of starting points.
/// Converged roots inside the box are deduplicated at a distance of 1e-6
/// times the box diameter, classified through the Jacobian of `f` and
/// returned sorted lexicographically by (n_e, n_d). `grid_n` below 10 is
/// rejected as too coarse to be trustworthy.
pub fn find_equilibria_of_f(
    p: &ModelParams,
    search: &SearchBox,
    grid_n: usize,
) -> Result<Vec<Equilibrium>> {
    if grid_n < 10 {
        return Err(Error::Precondition(format!(
            "seed grid must be at least 10x10, got {grid_n}x{grid_n}"
        )));
    }
    let diam = search.diameter();
    let dedup_dist = 1e-6 * diam;
    let mut roots: Vec<Density2> = Vec::new();
    for i in 0..grid_n {
        for j in 0..grid_n {
            let frac_e = i as f64 / (grid_n - 1) as f64;
            let frac_d = j as f64 / (grid_n - 1) as f64;
            let seed = Vec2::new(
                search.lo_e + frac_e * (search.hi_e - search.lo_e),
                search.lo_d + frac_d * (search.hi_d - search.lo_d),
            );
            let found = newton2(
                |v| reaction_f(p, v.into()),
                |v| jacobian_f(p, v.into()),
                seed,
                NEWTON_TOL,
                NEWTON_MAX_ITER,
            );
            let root: Density2 = match found {
                Ok(v) => v.into(),
                // Seeds that diverge or hit a singular Jacobian are simply
                // uninformative; other seeds cover the box.
                Err(_) => continue,
            };
            if !search.contains(root, 1e-9 * diam) {
                continue;
            }
            if roots
                .iter()
                .all(|r| (r.as_vec() - root.as_vec()).norm() > dedup_dist)
            {
                roots.push(root);
            }
        }
    }
    let scale = search.hi_e.abs().max(search.hi_d.abs());
    let mut out: Vec<Equilibrium> = roots
        .into_iter()
        .map(|pt| make_equilibrium(p, reaction_f, jacobian_f, pt, classify_kind(pt, scale)))
        .collect();
    out.sort_by(|a, b| {
        (a.point.n_e, a.point.n_d)
            .partial_cmp(&(b.point.n_e, b.point.n_d))
            .expect("equilibrium coordinates are finite")
    });
    Ok(out)
}

/// The positive equilibrium of the cooperative upper bound `f_plus`, found by
/// Newton iteration from 1.1 times the single-morph fixed point estimate.
/// Requires `mu_e < r_e` and `mu_d < r_d` so that growth wins at low density.
pub fn k_plus(p: &ModelParams) -> Result<Density2> {
    if p.mu_e >= p.r_e || p.mu_d >= p.r_d {
        return Err(Error::Precondition(format!(
            "k_plus needs mu_e < r_e and mu_d < r_d, got mu_e={}, r_e={}, mu_d={}, r_d={}",
            p.mu_e, p.r_e, p.mu_d, p.r_d
        )));
    }
    let guess = Vec2::new(
        1.1 * (p.r_e - p.mu_e) / (p.r_e * p.m_ee),
        1.1 * (p.r_d - p.mu_d) / (p.r_d * p.m_dd),
    );
    let root = newton2(
        |v| reaction_f_plus(p, v.into()),
        |v| jacobian_f_plus(p, v.into()),
        guess,
        NEWTON_TOL,
        NEWTON_MAX_ITER,
    )?;
    Ok(root.into())
}

/// The coexistence equilibrium of the saturated lower-bound reaction, which
/// is also an equilibrium of `f_minus` proper because its coordinates clear
/// the cutoff switching thresholds. Only defined when the small-competition
/// and small-mutation conditions hold; errors with the name of the first
/// failing condition otherwise.
pub fn k_minus(p: &ModelParams) -> Result<Density2> {
    let report = check_conditions(p);
    if !report.intersmall.satisfied {
        return Err(Error::ConditionFailed {
            name: "intersmall",
            margin: report.intersmall.margin,
        });
    }
    if !report.musmall.satisfied {
        return Err(Error::ConditionFailed {
            name: "musmall",
            margin: report.musmall.margin,
        });
    }
    let (cap_e, cap_d) = density_bounds(p);
    // Seed at the non-zero roots of the saturated single-morph nullclines.
    let guess = Vec2::new(
        (p.r_e - p.mu_e - p.r_e * p.m_ed * cap_d) / (p.r_e * p.m_ee),
        (p.r_d - p.mu_d - p.r_d * p.m_de * cap_e) / (p.r_d * p.m_dd),
    );
    let root: Density2 = newton2(
        |v| reaction_f_minus_star(p, v.into()),
        |v| jacobian_f_minus_star(p, v.into()),
        guess,
        NEWTON_TOL,
        NEWTON_MAX_ITER,
    )?
    .into();
    // The saturated and cutoff forms agree only above the switching
    // thresholds; below them the computed point would not be an equilibrium
    // of f_minus at all.
    let switch_e = p.mu_d / (2.0 * p.r_e * p.m_ed);
    let switch_d = p.mu_e / (2.0 * p.r_d * p.m_de);
    if root.n_e <= switch_e || root.n_d <= switch_d {
        return Err(Error::Inconsistency(format!(
            "saturated equilibrium ({}, {}) does not clear the cutoff \
             switching thresholds ({switch_e}, {switch_d})",
            root.n_e, root.n_d
        )));
    }
    Ok(root)
}
