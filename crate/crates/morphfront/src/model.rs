//! Reaction terms and parameter handling for the two-morph model.
//!
//! Two phenotypes of one species compete for a shared resource while
//! diffusing and mutating into each other: an "establisher" (e) with high
//! growth rate and a "disperser" (d) with high diffusivity. The reaction part
//! of the dynamics is Lotka-Volterra competition plus a linear mutation
//! exchange:
//!
//! ```text
//! f_e = r_e n_e (1 - m_ee n_e - m_ed n_d) - mu_e n_e + mu_d n_d
//! f_d = r_d n_d (1 - m_de n_e - m_dd n_d) + mu_e n_e - mu_d n_d
//! ```
//!
//! Alongside `f` this module provides the mutation-free reaction `g`, the
//! cooperative upper bound `f_plus` (inter-morph competition dropped) and the
//! lower bound `f_minus` (inter-morph competition saturated at the uniform
//! density bounds except near the axes, where a smooth cutoff keeps the
//! off-diagonal partial derivatives non-negative).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat2, Vec2};

/// The ten model parameters: diffusivities, growth rates, competition
/// coefficients and mutation rates. `d_e`/`d_d` are the diffusivities of the
/// establisher and disperser morphs.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "D_e")]
    pub d_e: f64,
    #[serde(rename = "D_d")]
    pub d_d: f64,
    pub r_e: f64,
    pub r_d: f64,
    pub m_ee: f64,
    pub m_dd: f64,
    pub m_ed: f64,
    pub m_de: f64,
    pub mu_e: f64,
    pub mu_d: f64,
}

impl ModelParams {
    /// Builds a parameter set, rejecting non-finite values, non-positive
    /// diffusivities, growth rates or intra-morph competition, and negative
    /// mutation or inter-morph competition. Zero mutation and zero inter-morph
    /// competition stay representable because the decoupled and mutation-free
    /// limits are legitimate objects of study.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d_e: f64,
        d_d: f64,
        r_e: f64,
        r_d: f64,
        m_ee: f64,
        m_dd: f64,
        m_ed: f64,
        m_de: f64,
        mu_e: f64,
        mu_d: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            d_e,
            d_d,
            r_e,
            r_d,
            m_ee,
            m_dd,
            m_ed,
            m_de,
            mu_e,
            mu_d,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the construction invariants; see [`ModelParams::new`].
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("D_e", self.d_e),
            ("D_d", self.d_d),
            ("r_e", self.r_e),
            ("r_d", self.r_d),
            ("m_ee", self.m_ee),
            ("m_dd", self.m_dd),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    requirement: "finite and positive",
                    value,
                });
            }
        }
        let non_negative = [
            ("m_ed", self.m_ed),
            ("m_de", self.m_de),
            ("mu_e", self.mu_e),
            ("mu_d", self.mu_d),
        ];
        for (name, value) in non_negative {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    requirement: "finite and non-negative",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Same parameters with the mutation rates replaced by `s.mu * s.e` and
    /// `s.mu * s.d`.
    pub fn with_mutation(&self, s: &MutationScaling) -> ModelParams {
        ModelParams {
            mu_e: s.mu * s.e,
            mu_d: s.mu * s.d,
            ..*self
        }
    }

    /// Same parameters with both mutation rates set to zero (the reaction
    /// then coincides with `reaction_g` and the linearised problem decouples
    /// into two scalar branches).
    pub fn without_mutation(&self) -> ModelParams {
        ModelParams {
            mu_e: 0.0,
            mu_d: 0.0,
            ..*self
        }
    }
}

/// Mutation written as an overall magnitude times fixed relative rates:
/// `mu_e = mu * e`, `mu_d = mu * d`. The small-mutation expansions hold `e`
/// and `d` fixed and send `mu` to zero.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationScaling {
    pub mu: f64,
    pub e: f64,
    pub d: f64,
}

impl MutationScaling {
    pub fn new(mu: f64, e: f64, d: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                requirement: "finite and non-negative",
                value: mu,
            });
        }
        for (name, value) in [("e", e), ("d", d)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    requirement: "finite and positive",
                    value,
                });
            }
        }
        Ok(MutationScaling { mu, e, d })
    }

    /// The exchange matrix `[[-e, d], [e, -d]]` scaled by unit magnitude;
    /// the full mutation term is `mu` times this matrix applied to (n_e, n_d).
    pub fn rate_matrix(&self) -> Mat2 {
        Mat2::new(-self.e, self.d, self.e, -self.d)
    }
}

/// A density pair (n_e, n_d).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density2 {
    pub n_e: f64,
    pub n_d: f64,
}

impl Density2 {
    pub const ZERO: Density2 = Density2 { n_e: 0.0, n_d: 0.0 };

    /// Rejects non-finite components so the reaction evaluations stay total.
    pub fn new(n_e: f64, n_d: f64) -> Result<Self> {
        if !n_e.is_finite() {
            return Err(Error::InvalidParameter {
                name: "n_e",
                requirement: "finite",
                value: n_e,
            });
        }
        if !n_d.is_finite() {
            return Err(Error::InvalidParameter {
                name: "n_d",
                requirement: "finite",
                value: n_d,
            });
        }
        Ok(Density2 { n_e, n_d })
    }

    pub fn as_vec(self) -> Vec2 {
        Vec2::new(self.n_e, self.n_d)
    }

    pub fn total(self) -> f64 {
        self.n_e + self.n_d
    }
}

impl From<Vec2> for Density2 {
    fn from(v: Vec2) -> Self {
        Density2 { n_e: v.x, n_d: v.y }
    }
}

/// Full reaction: competition plus mutation exchange.
#[inline]
pub fn reaction_f(p: &ModelParams, n: Density2) -> Vec2 {
    let Density2 { n_e, n_d } = n;
    Vec2::new(
        p.r_e * n_e * (1.0 - p.m_ee * n_e - p.m_ed * n_d) - p.mu_e * n_e + p.mu_d * n_d,
        p.r_d * n_d * (1.0 - p.m_de * n_e - p.m_dd * n_d) + p.mu_e * n_e - p.mu_d * n_d,
    )
}

/// Mutation-free reaction: plain two-species Lotka-Volterra competition.
#[inline]
pub fn reaction_g(p: &ModelParams, n: Density2) -> Vec2 {
    let Density2 { n_e, n_d } = n;
    Vec2::new(
        p.r_e * n_e * (1.0 - p.m_ee * n_e - p.m_ed * n_d),
        p.r_d * n_d * (1.0 - p.m_de * n_e - p.m_dd * n_d),
    )
}

/// Cooperative upper bound: `f` with the inter-morph competition terms
/// removed. Dominates `f` on the non-negative quadrant and its off-diagonal
/// partials are the constant mutation rates.
#[inline]
pub fn reaction_f_plus(p: &ModelParams, n: Density2) -> Vec2 {
    let Density2 { n_e, n_d } = n;
    Vec2::new(
        p.r_e * n_e * (1.0 - p.m_ee * n_e) - p.mu_e * n_e + p.mu_d * n_d,
        p.r_d * n_d * (1.0 - p.m_dd * n_d) + p.mu_e * n_e - p.mu_d * n_d,
    )
}

/// Smooth cutoff used by `reaction_f_minus`: 1 below `lo`, 0 above `hi`,
/// and the C^2 quintic smoothstep in between (monotone non-increasing).
pub fn cutoff_gamma(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if x <= lo {
        return Ok(1.0);
    }
    if x >= hi {
        return Ok(0.0);
    }
    let s = (x - lo) / (hi - lo);
    Ok(1.0 - s * s * s * (10.0 + s * (6.0 * s - 15.0)))
}

/// Cutoff thresholds for the lower-bound reaction. The competitor density is
/// frozen at its uniform bound once the partner density clears
/// `mu / (2 r m)`, which keeps the off-diagonal partials of `f_minus` at or
/// above zero (cooperativity on the region of interest).
fn minus_thresholds(p: &ModelParams) -> Result<((f64, f64), (f64, f64))> {
    if p.m_ed <= 0.0 || p.m_de <= 0.0 || p.mu_e <= 0.0 || p.mu_d <= 0.0 {
        return Err(Error::ThresholdUndefined);
    }
    let lo_e = p.mu_d / (4.0 * p.r_e * p.m_ed);
    let lo_d = p.mu_e / (4.0 * p.r_d * p.m_de);
    Ok(((lo_e, 2.0 * lo_e), (lo_d, 2.0 * lo_d)))
}

/// Cooperative lower bound: the inter-morph competition density is replaced
/// by `h = gamma n + (1 - gamma) N`, interpolating between the true density
/// (near the axes, where the mutation inflow dominates) and the uniform bound
/// `N` elsewhere. Coincides with `f` when both densities sit below the lower
/// cutoff thresholds.
pub fn reaction_f_minus(p: &ModelParams, n: Density2) -> Result<Vec2> {
    let ((lo_e, hi_e), (lo_d, hi_d)) = minus_thresholds(p)?;
    let (cap_e, cap_d) = density_bounds(p);
    let Density2 { n_e, n_d } = n;
    // gamma_d switches on n_e because n_e multiplies the term being bounded,
    // and vice versa.
    let gamma_d = cutoff_gamma(n_e, lo_e, hi_e)?;
    let gamma_e = cutoff_gamma(n_d, lo_d, hi_d)?;
    let h_d = gamma_d * n_d + (1.0 - gamma_d) * cap_d;
    let h_e = gamma_e * n_e + (1.0 - gamma_e) * cap_e;
    Ok(Vec2::new(
        p.r_e * n_e * (1.0 - p.m_ee * n_e - p.m_ed * h_d) - p.mu_e * n_e + p.mu_d * n_d,
        p.r_d * n_d * (1.0 - p.m_de * h_e - p.m_dd * n_d) + p.mu_e * n_e - p.mu_d * n_d,
    ))
}

/// The saturated form of `reaction_f_minus`, with the inter-morph competitor
/// frozen at the uniform density bounds everywhere. `f_minus` equals this
/// wherever both densities clear the upper cutoff thresholds.
pub(crate) fn reaction_f_minus_star(p: &ModelParams, n: Density2) -> Vec2 {
    let (cap_e, cap_d) = density_bounds(p);
    let Density2 { n_e, n_d } = n;
    Vec2::new(
        p.r_e * n_e * (1.0 - p.m_ee * n_e - p.m_ed * cap_d) - p.mu_e * n_e + p.mu_d * n_d,
        p.r_d * n_d * (1.0 - p.m_de * cap_e - p.m_dd * n_d) + p.mu_e * n_e - p.mu_d * n_d,
    )
}

pub(crate) fn jacobian_f_minus_star(p: &ModelParams, n: Density2) -> Mat2 {
    let (cap_e, cap_d) = density_bounds(p);
    Mat2::new(
        p.r_e * (1.0 - 2.0 * p.m_ee * n.n_e - p.m_ed * cap_d) - p.mu_e,
        p.mu_d,
        p.mu_e,
        p.r_d * (1.0 - p.m_de * cap_e - 2.0 * p.m_dd * n.n_d) - p.mu_d,
    )
}

/// Jacobian of `reaction_f`.
pub fn jacobian_f(p: &ModelParams, n: Density2) -> Mat2 {
    let Density2 { n_e, n_d } = n;
    Mat2::new(
        p.r_e * (1.0 - 2.0 * p.m_ee * n_e - p.m_ed * n_d) - p.mu_e,
        p.mu_d - p.r_e * p.m_ed * n_e,
        p.mu_e - p.r_d * p.m_de * n_d,
        p.r_d * (1.0 - p.m_de * n_e - 2.0 * p.m_dd * n_d) - p.mu_d,
    )
}

/// Jacobian of `reaction_g`.
pub fn jacobian_g(p: &ModelParams, n: Density2) -> Mat2 {
    let Density2 { n_e, n_d } = n;
    Mat2::new(
        p.r_e * (1.0 - 2.0 * p.m_ee * n_e - p.m_ed * n_d),
        -p.r_e * p.m_ed * n_e,
        -p.r_d * p.m_de * n_d,
        p.r_d * (1.0 - p.m_de * n_e - 2.0 * p.m_dd * n_d),
    )
}

pub(crate) fn jacobian_f_plus(p: &ModelParams, n: Density2) -> Mat2 {
    Mat2::new(
        p.r_e * (1.0 - 2.0 * p.m_ee * n.n_e) - p.mu_e,
        p.mu_d,
        p.mu_e,
        p.r_d * (1.0 - 2.0 * p.m_dd * n.n_d) - p.mu_d,
    )
}

/// Uniform density bounds `(N_e, N_d)` valid for all sufficiently late times
/// regardless of mutation strength:
///
/// ```text
/// N_e = (1 + sqrt(1 + r_d m_ee / (r_e m_dd))) / (2 m_ee)
/// N_d = (1 + sqrt(1 + r_e m_dd / (r_d m_ee))) / (2 m_dd)
/// ```
pub fn density_bounds(p: &ModelParams) -> (f64, f64) {
    let n_e = (1.0 + (1.0 + p.r_d * p.m_ee / (p.r_e * p.m_dd)).sqrt()) / (2.0 * p.m_ee);
    let n_d = (1.0 + (1.0 + p.r_e * p.m_dd / (p.r_d * p.m_ee)).sqrt()) / (2.0 * p.m_dd);
    (n_e, n_d)
}

/// One inequality from the standing assumptions, reported rather than
/// enforced. `margin` is positive exactly when the (strict) inequality holds;
/// for paired inequalities it is the smaller of the two margins.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub satisfied: bool,
    pub margin: f64,
}

impl Condition {
    fn from_margins(a: f64, b: f64) -> Condition {
        let margin = a.min(b);
        Condition {
            satisfied: margin > 0.0,
            margin,
        }
    }
}

/// Signed report of every standing assumption and sufficient condition used
/// by the bounding construction. Nothing here is enforced; callers decide
/// what to do with failures.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// r_e > r_d and D_d > D_e: establisher grows faster, disperser moves faster.
    pub parms_rd: Condition,
    /// m_dd > m_ed and m_ee > m_de: intra-morph competition dominates.
    pub compe: Condition,
    /// Mutation small enough that the single-morph fixed points survive.
    pub asymproot: Condition,
    /// D_d/D_e + r_d/r_e > 2 and D_e/D_d + r_e/r_d > 2: the anomalous zone.
    pub fastersp: Condition,
    /// m_ed < 1/N_d and m_de < 1/N_e: inter-morph competition small.
    pub intersmall: Condition,
    /// Mutation below the thresholds required by the lower-bound argument.
    pub musmall: Condition,
    /// The saturated nullcline roots clear the cutoff switching thresholds.
    pub rootswitch: Condition,
    /// True when `intersmall` and `musmall` both hold, which is what the
    /// lower-bound equilibrium construction needs.
    pub theorem3_satisfied: bool,
    /// Uniform density bound N_e.
    pub n_e_bound: f64,
    /// Uniform density bound N_d.
    pub n_d_bound: f64,
}

/// Evaluates every condition in [`ConditionReport`] for `p`.
pub fn check_conditions(p: &ModelParams) -> ConditionReport {
    let (cap_e, cap_d) = density_bounds(p);

    let parms_rd = Condition::from_margins(p.r_e - p.r_d, p.d_d - p.d_e);
    let compe = Condition::from_margins(p.m_dd - p.m_ed, p.m_ee - p.m_de);

    // Off-axis fixed points of the single-morph logistic dynamics survive the
    // mutation inflow only if the inflow-balance roots stay ordered.
    let asymproot = if p.m_ed > 0.0 && p.m_de > 0.0 {
        Condition::from_margins(
            (p.r_e - p.mu_e) / (p.r_e * p.m_ee) - p.mu_d / (p.r_e * p.m_ed),
            (p.r_d - p.mu_d) / (p.r_d * p.m_dd) - p.mu_e / (p.r_d * p.m_de),
        )
    } else {
        Condition {
            satisfied: false,
            margin: f64::NEG_INFINITY,
        }
    };

    let fastersp = Condition::from_margins(
        p.d_d / p.d_e + p.r_d / p.r_e - 2.0,
        p.d_e / p.d_d + p.r_e / p.r_d - 2.0,
    );

    let intersmall = Condition::from_margins(1.0 / cap_d - p.m_ed, 1.0 / cap_e - p.m_de);

    let mue_limit = (p.r_e * (1.0 - p.m_ed * cap_d) / 2.0)
        .min(p.r_d * p.m_de * (1.0 - p.m_de * cap_e) / p.m_dd);
    let mud_limit = (p.r_d * (1.0 - p.m_de * cap_e) / 2.0)
        .min(p.r_e * p.m_ed * (1.0 - p.m_ed * cap_d) / p.m_ee);
    let musmall = Condition::from_margins(mue_limit - p.mu_e, mud_limit - p.mu_d);

    let rootswitch = if p.m_ed > 0.0 && p.m_de > 0.0 {
        Condition::from_margins(
            (p.r_e - p.mu_e - p.r_e * p.m_ed * cap_d) / (p.r_e * p.m_ee)
                - p.mu_d / (2.0 * p.r_e * p.m_ed),
            (p.r_d - p.mu_d - p.r_d * p.m_de * cap_e) / (p.r_d * p.m_dd)
                - p.mu_e / (2.0 * p.r_d * p.m_de),
        )
    } else {
        Condition {
            satisfied: false,
            margin: f64::NEG_INFINITY,
        }
    };

    ConditionReport {
        parms_rd,
        compe,
        asymproot,
        fastersp,
        intersmall,
        musmall,
        rootswitch,
        theorem3_satisfied: intersmall.satisfied && musmall.satisfied,
        n_e_bound: cap_e,
        n_d_bound: cap_d,
    }
}
