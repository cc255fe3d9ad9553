//! Parameter updates: plain gradient descent or Adam, per parameter group.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predictor::ParamGroup;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Optimizer state for a fixed number of parameter groups.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    state: Vec<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, groups: usize) -> Self {
        Self {
            kind,
            state: vec![Moments::default(); groups],
        }
    }

    /// Descends `grad` on group `slot` with learning rate `lr`. Gradients are
    /// rescaled to global norm `clip` first when given.
    pub fn step<T: Real>(
        &mut self,
        slot: usize,
        group: &mut ParamGroup<T>,
        grad: &[T],
        lr: f64,
        clip: Option<f64>,
    ) {
        let mut g: Vec<f64> = grad.iter().map(|v| v.as_f64()).collect();
        if let Some(c) = clip {
            let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > c {
                g.iter_mut().for_each(|x| *x *= c / n);
            }
        }
        let mut flat = group.flatten();
        assert_eq!(flat.len(), g.len(), "gradient length");
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, d) in flat.iter_mut().zip(&g) {
                    *p -= T::lit(lr * d);
                }
            }
            OptimizerKind::Adam => {
                let s = &mut self.state[slot];
                if s.m.len() != g.len() {
                    s.m = vec![0.0; g.len()];
                    s.v = vec![0.0; g.len()];
                    s.t = 0;
                }
                s.t += 1;
                let c1 = 1.0 - BETA1.powi(s.t);
                let c2 = 1.0 - BETA2.powi(s.t);
                for i in 0..g.len() {
                    s.m[i] = BETA1 * s.m[i] + (1.0 - BETA1) * g[i];
                    s.v[i] = BETA2 * s.v[i] + (1.0 - BETA2) * g[i] * g[i];
                    let upd = lr * (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + ADAM_EPS);
                    flat[i] -= T::lit(upd);
                }
            }
        }
        group.assign(&flat);
    }
}
