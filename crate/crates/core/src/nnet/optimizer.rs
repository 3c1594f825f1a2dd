use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum: `v <- m*v + g; theta <- theta - lr*v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    momentum: f64,
    velocity: Gradients,
}

impl Sgd {
    pub fn new(model: &Mlp, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(
                "momentum",
                format!("must lie in [0, 1), got {momentum}"),
            ));
        }
        Ok(Self {
            momentum,
            velocity: Gradients::zeros_like(model),
        })
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &Gradients {
        &self.velocity
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.same_shape(model) || !self.velocity.same_shape(model) {
            return Err(Error::shape(
                "sgd_step",
                format!("{:?}", model.dims()),
                "mismatched gradient buffers",
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::invalid(
                "lr",
                format!("must be finite and >= 0, got {lr}"),
            ));
        }
        let m = self.momentum;
        for (l, layer) in model.layers_mut().iter_mut().enumerate() {
            let pairs = [
                (
                    &mut layer.weights,
                    &mut self.velocity.weights[l],
                    &grads.weights[l],
                ),
                (
                    &mut layer.bias,
                    &mut self.velocity.biases[l],
                    &grads.biases[l],
                ),
            ];
            for (params, vel, g) in pairs {
                for ((p, v), &gi) in params.iter_mut().zip(vel.iter_mut()).zip(g) {
                    *v = m * *v + gi;
                    *p -= lr * *v;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads_filled(model: &Mlp, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(model);
        g.weights
            .iter_mut()
            .chain(g.biases.iter_mut())
            .for_each(|v| v.fill(value));
        g
    }

    #[test]
    fn vanilla_step() {
        let mut m = Mlp::new(&[2, 2], 0).unwrap();
        let before = m.params_flat();
        let mut opt = Sgd::new(&m, 0.0).unwrap();
        let g = grads_filled(&m, 0.5);
        opt.step(&mut m, &g, 0.1).unwrap();
        for (a, b) in before.iter().zip(m.params_flat()) {
            assert!((a - 0.1 * 0.5 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_lr_still_accumulates_velocity() {
        let mut m = Mlp::new(&[2, 3, 1], 1).unwrap();
        let before = m.params_flat();
        let mut opt = Sgd::new(&m, 0.9).unwrap();
        let g = grads_filled(&m, 1.0);
        opt.step(&mut m, &g, 0.0).unwrap();
        opt.step(&mut m, &g, 0.0).unwrap();
        assert_eq!(m.params_flat(), before);
        assert!(opt
            .velocity()
            .flat()
            .iter()
            .all(|&v| (v - 1.9).abs() < 1e-15));
    }

    #[test]
    fn velocity_approaches_geometric_limit() {
        let mut m = Mlp::new(&[1, 1], 2).unwrap();
        let mut opt = Sgd::new(&m, 0.9).unwrap();
        let g = grads_filled(&m, 2.0);
        for _ in 0..400 {
            opt.step(&mut m, &g, 0.0).unwrap();
        }
        // sum of 0.9^k * g over k -> g / (1 - 0.9)
        assert!(opt
            .velocity()
            .flat()
            .iter()
            .all(|&v| (v - 20.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_non_finite_gradient_without_mutation() {
        let mut m = Mlp::new(&[2, 2], 3).unwrap();
        let before = m.clone();
        let mut opt = Sgd::new(&m, 0.9).unwrap();
        let mut g = grads_filled(&m, 1.0);
        g.biases[0][1] = f64::NAN;
        assert!(matches!(
            opt.step(&mut m, &g, 0.1),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(m, before);
        assert!(Sgd::new(&m, 1.0).is_err());
    }
}
