//! Semantics-guided adversarial training for vehicle trajectory prediction.
//!
//! The core is generic over the scalar type; the aliases below fix it to
//! `f64` (the default) or `f32`.

pub mod attack;
pub mod autodiff;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod scalar;
pub mod scenario;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Scene = scenario::Scene<f64>;
pub type Trajectory = scenario::Trajectory<f64>;
pub type Waypoint = scenario::Waypoint<f64>;
pub type PredictorModel = predictor::PredictorModel<f64>;
pub type LatentState = predictor::LatentState<f64>;

pub mod f32 {
    pub type Scene = crate::scenario::Scene<f32>;
    pub type Trajectory = crate::scenario::Trajectory<f32>;
    pub type Waypoint = crate::scenario::Waypoint<f32>;
    pub type PredictorModel = crate::predictor::PredictorModel<f32>;
    pub type LatentState = crate::predictor::LatentState<f32>;
}
