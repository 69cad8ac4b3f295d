use crate::error::{Error, Result};
use crate::nn::Tensor;

/// A fixed collection of named parameter tensors.
///
/// Gradients are represented with the same type as the parameters, so
/// `tensors()` on a parameter set and on its gradient line up one-to-one.
pub trait ParamSet {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

impl ParamSet for Tensor {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![(String::from("tensor"), self)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![self]
    }
}

/// Plain SGD: `p <- p - lr * g` for every parameter.
pub fn sgd_step<P: ParamSet>(params: &mut P, grads: &P, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    let gs = grads.tensors();
    let ps = params.tensors_mut();
    if gs.len() != ps.len() {
        return Err(Error::Config(format!(
            "gradient has {} tensors, parameters have {}",
            gs.len(),
            ps.len()
        )));
    }
    for (p, (name, g)) in ps.into_iter().zip(gs) {
        if p.shape() != g.shape() {
            return Err(Error::Config(format!(
                "gradient {name} shape {:?} does not match parameter shape {:?}",
                g.shape(),
                p.shape()
            )));
        }
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(vec![1.0, -2.0, 3.5]);
        let before = p.clone();
        sgd_step(&mut p, &Tensor::from_vec(vec![9.0, 9.0, 9.0]), 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn scalar_step() {
        let mut p = Tensor::from_vec(vec![1.0]);
        sgd_step(&mut p, &Tensor::from_vec(vec![2.0]), 0.1).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::from_vec(vec![1.0, 2.0]);
        let err = sgd_step(&mut p, &Tensor::from_vec(vec![1.0]), 0.1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(sgd_step(&mut p, &Tensor::from_vec(vec![1.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn quadratic_objective_decreases_monotonically() {
        // f(p) = 0.5 * a * (p - c)^2, gradient a * (p - c)
        let (a, c) = (3.0, -1.5);
        let f = |p: f64| 0.5 * a * (p - c) * (p - c);
        let mut p = Tensor::from_vec(vec![4.0]);
        let mut prev = f(p.data()[0]);
        for _ in 0..50 {
            let g = Tensor::from_vec(vec![a * (p.data()[0] - c)]);
            sgd_step(&mut p, &g, 0.1).unwrap();
            let cur = f(p.data()[0]);
            assert!(cur < prev || cur == 0.0, "{cur} !< {prev}");
            prev = cur;
        }
        assert!(prev < 1e-10);
    }
}
