//! Heavy-ball SGD: `v ← μ·v − η·g`, `θ ← θ + v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{NamedTensors, Tensor};

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub velocity: NamedTensors,
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::param(format!("learning rate must be positive, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self {
            velocity: NamedTensors::new(),
            learning_rate,
            momentum,
        })
    }
}

/// One momentum step over every parameter. Velocities start at zero the
/// first time a parameter is seen.
pub fn sgd_momentum_step(
    params: &mut NamedTensors,
    grads: &NamedTensors,
    state: &mut OptimizerState,
) -> Result<()> {
    if let Some(extra) = grads.keys().find(|k| !params.contains_key(*k)) {
        return Err(Error::param(format!("gradient `{extra}` has no matching parameter")));
    }
    for (name, param) in params.iter_mut() {
        let grad = grads
            .get(name)
            .ok_or_else(|| Error::param(format!("missing gradient for parameter `{name}`")))?;
        grad.expect_dims(param.dims(), &format!("gradient `{name}`"))?;
        let v = state
            .velocity
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.dims()));
        v.expect_dims(param.dims(), &format!("velocity `{name}`"))?;
        for ((vi, gi), pi) in v.data_mut().iter_mut().zip(grad.data()).zip(param.data_mut()) {
            *vi = state.momentum * *vi - state.learning_rate * gi;
            *pi += *vi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(v: Vec<f64>) -> NamedTensors {
        let mut m = NamedTensors::new();
        m.insert("theta".into(), Tensor::from_vec(v));
        m
    }

    #[test]
    fn plain_gradient_step() {
        let mut p = named(vec![0.0, 0.0]);
        let mut s = OptimizerState::new(1.0, 0.0).unwrap();
        sgd_momentum_step(&mut p, &named(vec![1.0, 2.0]), &mut s).unwrap();
        assert_eq!(p["theta"].data(), &[-1.0, -2.0]);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = named(vec![0.3, -0.7]);
        let mut s = OptimizerState::new(0.5, 0.9).unwrap();
        sgd_momentum_step(&mut p, &named(vec![0.0, 0.0]), &mut s).unwrap();
        assert_eq!(p["theta"].data(), &[0.3, -0.7]);
    }

    #[test]
    fn two_step_momentum_recurrence() {
        // v1 = -0.1, θ1 = -0.1; v2 = 0.9·(-0.1) - 0.1 = -0.19, θ2 = -0.29
        let mut p = named(vec![0.0]);
        let mut s = OptimizerState::new(0.1, 0.9).unwrap();
        sgd_momentum_step(&mut p, &named(vec![1.0]), &mut s).unwrap();
        assert!((p["theta"].data()[0] + 0.1).abs() < 1e-15);
        sgd_momentum_step(&mut p, &named(vec![1.0]), &mut s).unwrap();
        assert!((p["theta"].data()[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_param_error() {
        let mut p = named(vec![0.0]);
        p.insert("other".into(), Tensor::zeros(&[1]));
        let mut s = OptimizerState::new(0.1, 0.0).unwrap();
        let err = sgd_momentum_step(&mut p, &named(vec![1.0]), &mut s).unwrap_err();
        assert!(matches!(err, Error::Param(m) if m.contains("other")));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(OptimizerState::new(0.0, 0.5).is_err());
        assert!(OptimizerState::new(0.1, 1.0).is_err());
    }
}
