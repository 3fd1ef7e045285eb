//! Spreading speeds and front composition for a two-morph
//! competition-diffusion-mutation model.

pub mod equilibria;
pub mod error;
pub mod math;
pub mod model;
pub mod pde;
pub mod spectral;

pub use equilibria::{Equilibrium, EquilibriumKind, SearchBox, Stability};
pub use error::{Error, Result};
pub use math::{Mat2, Vec2};
pub use model::{Condition, ConditionReport, Density2, ModelParams, MutationScaling};
pub use pde::{
    Boundary, BoundsReport, DeterminacyReport, FieldState, FrontTrace, Grid1D, SimConfig,
    SpeedEstimate,
};
pub use spectral::{
    DispersionPoint, LimitSummary, MuCurve, MuCurveRow, Regime, SpeedLimits, SpeedPoint,
};
