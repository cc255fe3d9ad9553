//! Trajectory predictor with a semantic latent space.

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod prior;

pub use checkpoint::{load_checkpoint, save_checkpoint, SCHEMA_VERSION};
pub use gradcheck::gradient_check;
pub use model::{
    BoundParams, ForwardVars, LatentState, LatentVars, ModelConfig, PredictorModel, SceneContext,
};
pub use params::{ParamGroup, Tensor};
pub use prior::{lognormal_pdf, sample_prior, LatentGroup, PriorSpec, HEADWAY_MU, HEADWAY_SIGMA};

use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::scenario::Scene;

/// Anything the attack can differentiate through: maps a target-history
/// node to a predicted future node on the same tape.
pub trait TrajectoryPredictor<T: Real>: Sync {
    fn predict_on_tape(&self, tape: &mut Tape<T>, scene: &Scene<T>, history: Var) -> Var;
}

impl<T: Real> TrajectoryPredictor<T> for PredictorModel<T> {
    fn predict_on_tape(&self, tape: &mut Tape<T>, scene: &Scene<T>, history: Var) -> Var {
        let p = self.bind(tape);
        self.forward_on_tape(tape, &p, scene, history).future
    }
}
