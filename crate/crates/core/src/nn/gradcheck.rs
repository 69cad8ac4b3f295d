use crate::error::{Error, Result};
use crate::nn::ParamSet;

/// A scalar objective with an analytic gradient.
pub trait Objective<P> {
    fn loss(&self, params: &P) -> Result<f64>;
    fn loss_and_grad(&self, params: &P) -> Result<(f64, P)>;
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Maximum relative error over all parameters.
    pub max_rel_error: f64,
    /// `(tensor name, max relative error within that tensor)`.
    pub per_tensor: Vec<(String, f64)>,
    pub num_params: usize,
}

impl GradCheckReport {
    pub fn worst_tensor(&self) -> Option<&(String, f64)> {
        self.per_tensor
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Compares the analytic gradient against central differences for every
/// scalar parameter.
///
/// The error for one parameter is `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<P, O>(objective: &O, params: &P, eps: f64) -> Result<GradCheckReport>
where
    P: ParamSet + Clone,
    O: Objective<P> + ?Sized,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("eps must be positive and finite, got {eps}")));
    }
    let (base, analytic) = objective.loss_and_grad(params)?;
    if !base.is_finite() {
        return Err(Error::Numerical(format!("loss is {base}")));
    }
    let analytic_tensors = analytic.tensors();
    let mut probe = params.clone();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    if analytic_tensors.len() != names.len() {
        return Err(Error::Config("gradient and parameter sets differ".into()));
    }
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut max_rel_error = 0.0f64;
    let mut num_params = 0;
    for (ti, name) in names.into_iter().enumerate() {
        let grad = analytic_tensors[ti].1.data();
        let mut worst = 0.0f64;
        for (j, &ana) in grad.iter().enumerate() {
            let orig = probe.tensors_mut()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + eps;
            let plus = objective.loss(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig - eps;
            let minus = objective.loss(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::Numerical(format!("loss is non-finite around {name}[{j}]")));
            }
            let num = (plus - minus) / (2.0 * eps);
            let rel = (ana - num).abs() / 1f64.max(ana.abs()).max(num.abs());
            worst = worst.max(rel);
            num_params += 1;
        }
        max_rel_error = max_rel_error.max(worst);
        per_tensor.push((name, worst));
    }
    Ok(GradCheckReport {
        max_rel_error,
        per_tensor,
        num_params,
    })
}
