//! ELBO evaluation and gradient training for the causal-effect VAE.
//!
//! One training step maximizes, per record, the reparameterized bound
//!
//! ```text
//! ELBO_i = [log p(z) − log q(z|a,b,x,r)]  (reg, at the sampled z)
//!        + log p(x|b,a,z) + log p(r|b,a,x,z) + log p(y|b,a,r,x,z)
//! ```
//!
//! with `z = μ + σ·ε` and decoder terms teacher-forced on the observed
//! record. Gradients flow through the decoders into the sampled `z` and from
//! there into the inference network; everything is accumulated by hand into
//! the parameter stores and stepped with Adam. Divergence policy: a
//! non-finite bound aborts the run, which falls back to the last completed
//! epoch's checkpoint (an error only if no epoch ever completed).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nnet::{sample_gaussian_reparam, HeadOutput, OptState, Trace};
use crate::rng::stream;

use super::{CevaeCheckpoint, CevaeModel, ProfileIndex, RoleProfile, TarNet, TrainConfig};

/// The evidence lower bound, split into its named components. All four are
/// means over the evaluated records (and MC samples); `total` is their exact
/// sum, stored rather than recomputed so serialized logs are self-consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboTerms {
    pub reg: f64,
    pub rec_x: f64,
    pub rec_r: f64,
    pub rec_y: f64,
    pub total: f64,
}

impl ElboTerms {
    fn assemble(reg: f64, rec_x: f64, rec_r: f64, rec_y: f64) -> ElboTerms {
        ElboTerms { reg, rec_x, rec_r, rec_y, total: reg + rec_x + rec_r + rec_y }
    }
}

/// Training diagnostics for one epoch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub terms: ElboTerms,
    /// Max per-dimension gap between group posterior means; the
    /// latent-sensitivity diagnostic.
    pub latent_gap: f64,
}

/// Full epoch log of one training run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    /// Epoch at which training aborted on a non-finite bound, if any. The
    /// run's model is then the checkpoint of the preceding epoch.
    pub diverged_at: Option<usize>,
}

/// A trained model together with its epoch log.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model: CevaeModel,
    pub log: TrainLog,
}

/// Intermediate state of one reparameterized draw, kept alive between the
/// forward and backward halves of a step.
struct DrawState {
    eps: Vec<f64>,
    z: Vec<f64>,
    x_heads: Vec<HeadOutput>,
    x_trace: Trace,
    r_pass: Option<(Vec<HeadOutput>, Trace)>,
    y_heads: Vec<HeadOutput>,
    y_trace: Trace,
}

/// Per-record observation slices, pre-extracted for teacher forcing.
struct RecordObs {
    branch: usize,
    x: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn gather_obs(
    model: &CevaeModel,
    ds: &Dataset,
    pix: &ProfileIndex,
    i: usize,
) -> Result<RecordObs> {
    let branch = model.branch_of(ds.columns[pix.a][i], i)?;
    let grab = |idx: &[usize]| idx.iter().map(|&j| vec![ds.columns[j][i]]).collect::<Vec<_>>();
    Ok(RecordObs {
        branch,
        x: grab(&pix.x),
        r: grab(&pix.r),
        y: vec![ds.columns[pix.outcome()?][i]],
    })
}

/// Forward pass for one record and one MC draw. Returns the four ELBO terms
/// for this draw plus everything backward needs.
fn draw_forward(
    model: &CevaeModel,
    infer_heads: &[HeadOutput],
    b_enc: &[f64],
    obs: &RecordObs,
    eps: Vec<f64>,
) -> Result<(f64, f64, f64, f64, DrawState)> {
    let (mu, sd) = infer_heads[0].as_gaussian()?;
    let z = sample_gaussian_reparam(mu, sd, &eps);

    // reg = log p(z) − log q(z) at the sampled z; the 2π constants cancel.
    let mut reg = 0.0;
    for d in 0..z.len() {
        reg += -0.5 * z[d] * z[d] + sd[d].ln() + 0.5 * eps[d] * eps[d];
    }

    let mut x_in = Vec::with_capacity(model.x_net.net.mlp.spec().input_dim);
    x_in.extend_from_slice(&z);
    x_in.extend_from_slice(b_enc);
    let (x_heads, x_trace) = model.x_net.net.forward(&x_in)?;
    let mut rec_x = 0.0;
    for (c, obs_c) in obs.x.iter().enumerate() {
        rec_x += x_heads[model.x_net.head_index(c, obs.branch)].log_prob(obs_c)?;
    }

    // Teacher forcing: downstream decoders read the *observed* x and r.
    let mut xr_enc = Vec::new();
    for (col, obs_c) in model.profile.covariates.iter().zip(&obs.x) {
        col.encode_into(obs_c[0], &mut xr_enc)?;
    }
    let mut rec_r = 0.0;
    let mut r_pass = None;
    if let Some(r_net) = &model.r_net {
        let mut r_in = Vec::with_capacity(r_net.net.mlp.spec().input_dim);
        r_in.extend_from_slice(&z);
        r_in.extend_from_slice(b_enc);
        r_in.extend_from_slice(&xr_enc);
        let (r_heads, r_trace) = r_net.net.forward(&r_in)?;
        for (c, obs_c) in obs.r.iter().enumerate() {
            rec_r += r_heads[r_net.head_index(c, obs.branch)].log_prob(obs_c)?;
        }
        r_pass = Some((r_heads, r_trace));
    }

    let mut y_in = Vec::with_capacity(model.y_net.net.mlp.spec().input_dim);
    y_in.extend_from_slice(&z);
    y_in.extend_from_slice(b_enc);
    y_in.extend_from_slice(&xr_enc);
    for (col, obs_c) in model.profile.resolving.iter().zip(&obs.r) {
        col.encode_into(obs_c[0], &mut y_in)?;
    }
    let (y_heads, y_trace) = model.y_net.net.forward(&y_in)?;
    let rec_y = y_heads[model.y_net.head_index(0, obs.branch)].log_prob(&obs.y)?;

    Ok((reg, rec_x, rec_r, rec_y, DrawState { eps, z, x_heads, x_trace, r_pass, y_heads, y_trace }))
}

/// Backward pass for one draw: accumulate `∂(−scale·ELBO)/∂θ` into every
/// network's gradient buffer.
fn draw_backward(
    model: &mut CevaeModel,
    infer_heads: &[HeadOutput],
    infer_trace: &Trace,
    obs: &RecordObs,
    state: &DrawState,
    scale: f64,
) -> Result<()> {
    let d_z_dim = state.z.len();
    let mut dz = vec![0.0; d_z_dim];

    // Decoders: d_raw = −scale · ∂log p/∂raw for the selected branch head,
    // zero for the other branch. The z-slice of the returned input gradient
    // feeds the inference network.
    fn decoder(
        net: &mut TarNet,
        heads: &[HeadOutput],
        trace: &Trace,
        obs_cols: &[Vec<f64>],
        branch: usize,
        scale: f64,
        dz: &mut [f64],
    ) -> Result<()> {
        let mut d_raw: Vec<Vec<f64>> =
            net.net.mlp.spec().heads.iter().map(|h| vec![0.0; h.raw_width()]).collect();
        for (c, obs_c) in obs_cols.iter().enumerate() {
            let h = net.head_index(c, branch);
            let mut d = heads[h].dlogprob_draw(obs_c)?;
            d.iter_mut().for_each(|g| *g *= -scale);
            d_raw[h] = d;
        }
        let d_in = net.net.mlp.backward_raw(&mut net.net.params, trace, &d_raw)?;
        for d in 0..dz.len() {
            dz[d] += d_in[d];
        }
        Ok(())
    }

    decoder(&mut model.x_net, &state.x_heads, &state.x_trace, &obs.x, obs.branch, scale, &mut dz)?;
    if let Some(r_net) = &mut model.r_net {
        let (r_heads, r_trace) = state.r_pass.as_ref().expect("resolving pass recorded");
        decoder(r_net, r_heads, r_trace, &obs.r, obs.branch, scale, &mut dz)?;
    }
    decoder(
        &mut model.y_net,
        &state.y_heads,
        &state.y_trace,
        std::slice::from_ref(&obs.y),
        obs.branch,
        scale,
        &mut dz,
    )?;

    // reg contributes −scale·(−z) to dz and −scale·(1/σ) to dσ.
    for d in 0..d_z_dim {
        dz[d] += scale * state.z[d];
    }
    let (_, sd) = infer_heads[0].as_gaussian()?;
    let d_mu = dz.clone();
    let mut d_sd = vec![0.0; d_z_dim];
    for d in 0..d_z_dim {
        d_sd[d] = dz[d] * state.eps[d] - scale / sd[d];
    }
    let d_raw_inf = infer_heads[0].gaussian_param_grad_to_raw(&d_mu, &d_sd)?;
    model.infer.mlp.backward_raw(&mut model.infer.params, infer_trace, &[d_raw_inf])?;
    Ok(())
}

/// Evaluate (and, when `grad` is set, differentiate) the batch ELBO.
/// `eps_rng` is consumed in record order regardless of `grad`, so an
/// evaluation and a gradient pass over the same stream see the same draws.
fn batch_pass(
    model: &mut CevaeModel,
    ds: &Dataset,
    pix: &ProfileIndex,
    batch: &[usize],
    eps_rng: &mut ChaCha8Rng,
    grad: bool,
) -> Result<ElboTerms> {
    if batch.is_empty() {
        return Err(Error::Validation("ELBO over an empty batch".into()));
    }
    let k = model.config.n_mc_samples;
    let d_z = model.config.d_z;
    let scale = 1.0 / (batch.len() * k) as f64;
    let (mut reg, mut rec_x, mut rec_r, mut rec_y) = (0.0, 0.0, 0.0, 0.0);

    for &i in batch {
        let infer_in = model.encode_infer_input(&ds.columns, pix, i)?;
        let (infer_heads, infer_trace) = model.infer.forward(&infer_in)?;
        let obs = gather_obs(model, ds, pix, i)?;
        let mut b_enc = Vec::new();
        for (col, &j) in model.profile.base.iter().zip(&pix.b) {
            col.encode_into(ds.columns[j][i], &mut b_enc)?;
        }

        for _ in 0..k {
            let eps: Vec<f64> =
                (0..d_z).map(|_| eps_rng.sample::<f64, _>(StandardNormal)).collect();
            let (t_reg, t_x, t_r, t_y, state) =
                draw_forward(model, &infer_heads, &b_enc, &obs, eps)?;
            let draw_total = t_reg + t_x + t_r + t_y;
            if !draw_total.is_finite() {
                return Err(Error::Numeric(format!(
                    "ELBO became non-finite at record {i} \
                     (reg {t_reg:.3e}, rec_x {t_x:.3e}, rec_r {t_r:.3e}, rec_y {t_y:.3e})"
                )));
            }
            reg += t_reg;
            rec_x += t_x;
            rec_r += t_r;
            rec_y += t_y;
            if grad {
                draw_backward(model, &infer_heads, &infer_trace, &obs, &state, scale)?;
            }
        }
    }

    Ok(ElboTerms::assemble(reg * scale, rec_x * scale, rec_r * scale, rec_y * scale))
}

impl CevaeModel {
    /// Monte Carlo ELBO of the whole dataset under this model, using
    /// `n_mc_samples` reparameterized draws per record from the seed's
    /// evaluation stream. Deterministic given `(model, dataset, seed)`.
    pub fn elbo(&self, ds: &Dataset, seed: u64) -> Result<ElboTerms> {
        let pix = self.profile.resolve(&ds.schema, true)?;
        let batch: Vec<usize> = (0..ds.len()).collect();
        let mut eps_rng = stream(seed, "eps/eval");
        // The pass only mutates parameters under `grad`; clone to keep the
        // public signature borrow-friendly.
        let mut scratch = self.clone();
        batch_pass(&mut scratch, ds, &pix, &batch, &mut eps_rng, false)
    }
}

pub(crate) fn shuffled_indices(n: usize, seed: u64, label: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, label);
    // Fisher–Yates.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Train a freshly constructed model for a dataset's schema.
pub fn train_from_schema(config: &TrainConfig, ds: &Dataset) -> Result<TrainRun> {
    let profile = RoleProfile::from_schema(&ds.schema)?;
    let model = CevaeModel::new(config.clone(), profile)?;
    train(model, ds)
}

/// Run the Adam training loop on an existing model.
///
/// Each epoch shuffles the records, walks minibatches, and records the mean
/// ELBO terms plus the latent-sensitivity gap. If the bound or any parameter
/// turns non-finite the run stops, `diverged_at` is set, and the returned
/// model is the last completed epoch's checkpoint; divergence in the very
/// first epoch is an error since there is nothing to fall back to.
pub fn train(mut model: CevaeModel, ds: &Dataset) -> Result<TrainRun> {
    model.config.validate()?;
    if ds.is_empty() {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    let config = model.config.clone();
    let pix = model.profile.resolve(&ds.schema, true)?;

    let mut opt_infer = OptState::adam(config.learning_rate, model.infer.params.len());
    let mut opt_x = OptState::adam(config.learning_rate, model.x_net.net.params.len());
    let mut opt_r =
        model.r_net.as_ref().map(|r| OptState::adam(config.learning_rate, r.net.params.len()));
    let mut opt_y = OptState::adam(config.learning_rate, model.y_net.net.params.len());

    let mut log = TrainLog::default();
    let mut fallback: Option<CevaeCheckpoint> = None;

    for epoch in 1..=config.epochs {
        let idx = shuffled_indices(ds.len(), config.seed, &format!("shuffle/{epoch}"));
        let mut eps_rng = stream(config.seed, &format!("eps/{epoch}"));
        let (mut sums, mut seen) = ([0.0f64; 4], 0usize);

        for batch in idx.chunks(config.batch_size) {
            model.infer.params.clear_grads();
            model.x_net.net.params.clear_grads();
            if let Some(r) = &mut model.r_net {
                r.net.params.clear_grads();
            }
            model.y_net.net.params.clear_grads();

            let terms = match batch_pass(&mut model, ds, &pix, batch, &mut eps_rng, true) {
                Ok(t) => t,
                Err(e) if e.is_numeric() => return diverge(log, fallback, epoch, &e.to_string()),
                Err(e) => return Err(e),
            };

            opt_infer.step(&mut model.infer.params)?;
            opt_x.step(&mut model.x_net.net.params)?;
            if let (Some(opt), Some(r)) = (&mut opt_r, &mut model.r_net) {
                opt.step(&mut r.net.params)?;
            }
            opt_y.step(&mut model.y_net.net.params)?;

            let w = batch.len() as f64;
            for (s, t) in sums.iter_mut().zip([terms.reg, terms.rec_x, terms.rec_r, terms.rec_y])
            {
                *s += w * t;
            }
            seen += batch.len();
        }

        // Every check must pass before this epoch's state becomes the
        // fallback; a poisoned snapshot would defeat the rollback.
        let n = seen as f64;
        let terms = ElboTerms::assemble(sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n);
        if !terms.total.is_finite() {
            return diverge(log, fallback, epoch, "epoch mean ELBO is non-finite");
        }
        let finite = [&model.infer.params, &model.x_net.net.params, &model.y_net.net.params]
            .into_iter()
            .chain(model.r_net.as_ref().map(|r| &r.net.params))
            .all(|p| p.values.iter().all(|v| v.is_finite()));
        if !finite {
            return diverge(log, fallback, epoch, "non-finite parameter after optimizer step");
        }
        let latent_gap = model.latent_gap(ds)?.max;
        log.epochs.push(EpochStats { epoch, terms, latent_gap });
        fallback = Some(CevaeCheckpoint::capture(&model));
    }

    Ok(TrainRun { model, log })
}

/// Shared divergence exit: fall back to the last completed epoch's state.
fn diverge(
    mut log: TrainLog,
    fallback: Option<CevaeCheckpoint>,
    epoch: usize,
    detail: &str,
) -> Result<TrainRun> {
    match fallback {
        Some(ckpt) => {
            log.diverged_at = Some(epoch);
            Ok(TrainRun { model: ckpt.restore()?, log })
        }
        None => Err(Error::Diverged { epoch, detail: detail.into() }),
    }
}
