//! Maximum-likelihood engine for first-order probit-normal marginalized
//! transition random-effects models on multivariate longitudinal binary data.
//!
//! The model has three levels per (subject `i`, time `t`, response `j`):
//!
//! * a marginal probit regression `Φ(X β)`,
//! * a first-order transition model `Φ(Δ + α·Z y_lag)` whose intercept `Δ`
//!   is tied to the marginal level through the marginal constraint,
//! * a random-effects model `Φ(Δ* + λ_j b_it)` with `b_it = σ_t z_i`.
//!
//! Baseline observations have their own marginal and random-effects
//! levels. Estimation is two-stage: the baseline parameters are fitted first
//! and their marginal coefficients are then frozen into the constraint for the
//! first main-model occasion.
//!
//! Indexing convention: every time index in this crate is zero-based, so
//! `t = 0` is the baseline occasion and `t >= 1` belongs to the main model.

pub mod constraint;
pub mod data;
pub mod eb;
pub mod error;
pub mod fit;
pub mod glm;
pub mod kernels;
pub mod likelihood;
mod linalg;
pub mod params;
pub mod sim;

pub use constraint::{Anchor, ConstraintSolution};
pub use data::{ModelSpec, PanelData};
pub use eb::{AccuracyMetrics, ProbabilitySurface, SubjectEffects};
pub use error::{Error, Result};
pub use fit::{FitControls, FitResult, StageFit};
pub use glm::GlmFit;
pub use kernels::QuadratureRule;
pub use params::{BaselineParams, MainParams};
pub use sim::{McSummary, TruthConfig};
