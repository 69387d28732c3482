//! Analytic-vs-numeric gradient verification.
//!
//! [`grad_check`] compares the hand-written reverse pass against central
//! finite differences of the loss over *every* parameter and reports the
//! worst relative error. This is the module's correctness oracle: any new
//! head or activation must keep the worst error at the 1e-4 level or better.

use super::{HeadOutput, Mlp, ParamStore};
use crate::error::Result;

/// A scalar loss over head outputs, differentiable w.r.t. the heads' raw
/// affine outputs.
pub trait HeadLoss {
    /// Loss value.
    fn value(&self, heads: &[HeadOutput]) -> Result<f64>;
    /// Gradient of the value w.r.t. every head's raw outputs.
    fn raw_grad(&self, heads: &[HeadOutput]) -> Result<Vec<Vec<f64>>>;
}

/// Negative log-likelihood of per-head observations; heads with `None`
/// contribute nothing (used to mask unselected branch heads).
pub struct NegLogLik {
    obs: Vec<Option<Vec<f64>>>,
}

impl NegLogLik {
    pub fn new(obs: Vec<Option<Vec<f64>>>) -> NegLogLik {
        NegLogLik { obs }
    }
}

impl HeadLoss for NegLogLik {
    fn value(&self, heads: &[HeadOutput]) -> Result<f64> {
        let mut total = 0.0;
        for (head, obs) in heads.iter().zip(&self.obs) {
            if let Some(obs) = obs {
                total -= head.log_prob(obs)?;
            }
        }
        Ok(total)
    }

    fn raw_grad(&self, heads: &[HeadOutput]) -> Result<Vec<Vec<f64>>> {
        let mut grads = Vec::with_capacity(heads.len());
        for (head, obs) in heads.iter().zip(&self.obs) {
            match obs {
                Some(obs) => {
                    let mut d = head.dlogprob_draw(obs)?;
                    d.iter_mut().for_each(|g| *g = -*g);
                    grads.push(d);
                }
                None => grads.push(vec![0.0; head_raw_width(head)]),
            }
        }
        Ok(grads)
    }
}

fn head_raw_width(head: &HeadOutput) -> usize {
    match head {
        HeadOutput::Bernoulli { logit, .. } => logit.len(),
        HeadOutput::Gaussian { mean, .. } => 2 * mean.len(),
        HeadOutput::Categorical { logits, .. } => logits.len(),
    }
}

/// Result of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error `|a - n| / max(1e-8, |a| + |n|)` over all params.
    pub max_rel_err: f64,
    /// Layer name and in-layer offset of the worst parameter.
    pub worst_param: String,
    pub n_params: usize,
}

/// Compare the analytic gradient of `loss` (via the reverse pass) against
/// central finite differences with step `h`, over every parameter.
pub fn grad_check(
    mlp: &Mlp,
    params: &mut ParamStore,
    input: &[f64],
    loss: &dyn HeadLoss,
    h: f64,
) -> Result<GradCheckReport> {
    params.clear_grads();
    let (heads, trace) = mlp.forward(params, input)?;
    mlp.backward(params, &trace, &heads, loss)?;
    let analytic = params.grads.clone();
    params.clear_grads();

    let mut max_rel = 0.0;
    let mut worst = String::from("<none>");
    for i in 0..params.len() {
        let saved = params.values[i];
        params.values[i] = saved + h;
        let (heads_p, _) = mlp.forward(params, input)?;
        let up = loss.value(&heads_p)?;
        params.values[i] = saved - h;
        let (heads_m, _) = mlp.forward(params, input)?;
        let down = loss.value(&heads_m)?;
        params.values[i] = saved;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
            let name = params.layout().name_of(i);
            let off = i - params.layout().entry(name).map(|e| e.offset).unwrap_or(0);
            worst = format!("{name}[{off}]");
        }
    }
    Ok(GradCheckReport { max_rel_err: max_rel, worst_param: worst, n_params: params.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, HeadSpec, MlpSpec};
    use crate::rng::stream;

    #[test]
    fn mixed_head_network_passes_grad_check() {
        let mlp = Mlp::new(MlpSpec {
            input_dim: 4,
            hidden: vec![10, 6],
            activation: Activation::Elu,
            heads: vec![HeadSpec::gaussian(3), HeadSpec::bernoulli(2), HeadSpec::categorical(1, 3)],
        })
        .unwrap();
        let mut rng = stream(31, "gc");
        let mut params = mlp.init_params(&mut rng);
        let input = [0.4, -1.2, 0.8, 0.1];
        let loss = NegLogLik::new(vec![
            Some(vec![0.3, -0.5, 1.0]),
            Some(vec![1.0, 0.0]),
            Some(vec![2.0]),
        ]);
        let report = grad_check(&mlp, &mut params, &input, &loss, 1e-5).unwrap();
        assert!(
            report.max_rel_err <= 1e-4,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_param
        );
    }

    #[test]
    fn relu_network_with_masked_head_passes_grad_check() {
        // One masked head mimics how branch heads train: only the selected
        // branch receives gradient.
        let mlp = Mlp::new(MlpSpec {
            input_dim: 3,
            hidden: vec![7],
            activation: Activation::Relu,
            heads: vec![HeadSpec::gaussian(2), HeadSpec::gaussian(2)],
        })
        .unwrap();
        let mut params = mlp.init_params(&mut stream(32, "gc-mask"));
        let loss = NegLogLik::new(vec![None, Some(vec![0.9, -0.2])]);
        let report = grad_check(&mlp, &mut params, &[0.5, 0.25, -0.75], &loss, 1e-5).unwrap();
        assert!(report.max_rel_err <= 1e-4, "max rel err {}", report.max_rel_err);
        // The masked head's affine must receive exactly zero gradient.
        params.clear_grads();
        let (heads, trace) = mlp.forward(&params, &[0.5, 0.25, -0.75]).unwrap();
        mlp.backward(&mut params, &trace, &heads, &loss).unwrap();
        let e = params.layout().entry("o00.w").unwrap();
        assert!(params.grads[e.offset..e.offset + e.len()].iter().all(|g| *g == 0.0));
    }
}
