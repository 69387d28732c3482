//! Reconstruction and counterfactual decoding for a trained model.
//!
//! Every operation here shares one stream discipline: the latent draw comes
//! from the `recon/z` substream and each decoded column from its own
//! `recon/<group>/<name>` substream, consumed in record order. The streams
//! never depend on the sensitive-attribute policy, so a factual and a
//! counterfactual pass over the same dataset and seed see *identical*
//! randomness — the two outputs differ only through the decoders' TAR
//! branches and `a`-inputs, which is exactly the comparison the auditing
//! layer relies on.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DistKind};
use crate::error::{Error, Result};
use crate::nnet::HeadOutput;
use crate::rng::stream;

use super::{CevaeModel, ColumnRef, ProfileIndex};

/// How the sensitive attribute is set during decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum APolicy {
    /// Keep each record's observed value (factual reconstruction).
    Observed,
    /// Flip each record's value: counterfactual world `a → 1 − a`.
    Switch,
    /// Force one value for every record.
    Set(f64),
}

impl APolicy {
    /// The decode-time sensitive value for one record.
    pub fn apply(self, observed: f64) -> f64 {
        match self {
            APolicy::Observed => observed,
            APolicy::Switch => 1.0 - observed,
            APolicy::Set(v) => v,
        }
    }

    fn validate(self) -> Result<()> {
        if let APolicy::Set(v) = self {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Validation(format!("policy value {v} is not 0/1")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for APolicy {
    type Err = Error;

    /// Accepts `observed`, `switch`, `set=0`, `set=1`.
    fn from_str(s: &str) -> Result<APolicy> {
        match s {
            "observed" => Ok(APolicy::Observed),
            "switch" => Ok(APolicy::Switch),
            _ => match s.strip_prefix("set=") {
                Some(v) => {
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::Validation(format!("bad policy value in '{s}'")))?;
                    let p = APolicy::Set(v);
                    p.validate()?;
                    Ok(p)
                }
                None => Err(Error::Validation(format!(
                    "unknown sensitive-attribute policy '{s}' \
                     (expected observed, switch, or set=0/1)"
                ))),
            },
        }
    }
}

/// Whether decoding emits distribution summaries or samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMode {
    /// Posterior mean for `z`; per-column means/modes for decoded values.
    Mean,
    /// One posterior sample for `z`; per-column distribution draws.
    Sample,
}

/// Latent-sensitivity diagnostic: per-dimension absolute gap between the
/// group means of the posterior mean vectors, plus its maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentGap {
    pub per_dim: Vec<f64>,
    pub max: f64,
}

/// Per-column decode streams for one role group.
struct GroupRngs(Vec<ChaCha8Rng>);

impl GroupRngs {
    fn new(seed: u64, group: &str, cols: &[ColumnRef]) -> GroupRngs {
        GroupRngs(
            cols.iter().map(|c| stream(seed, &format!("recon/{group}/{}", c.name))).collect(),
        )
    }
}

/// Decode one column value from its head under the chosen mode. Binary
/// columns round the Bernoulli probability so mean-mode output stays 0/1
/// (ties go to 1, matching the prediction convention elsewhere).
fn decode_value(head: &HeadOutput, kind: DistKind, mode: ReconMode, rng: &mut ChaCha8Rng) -> f64 {
    match mode {
        ReconMode::Sample => head.sample(rng)[0],
        ReconMode::Mean => {
            let v = head.mean_or_mode()[0];
            match kind {
                DistKind::Binary => {
                    if v >= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => v,
            }
        }
    }
}

impl CevaeModel {
    /// Posterior `(μ, σ)` for every record. The outcome column may be
    /// absent; it is never an inference input.
    pub fn posterior(&self, ds: &Dataset) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let pix = self.profile.resolve(&ds.schema, false)?;
        (0..ds.len())
            .map(|i| {
                let input = self.encode_infer_input(&ds.columns, &pix, i)?;
                self.posterior_of(&input)
            })
            .collect()
    }

    /// Posterior mean vectors for every record; the frozen representation
    /// consumed by downstream predictors.
    pub fn posterior_means(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        Ok(self.posterior(ds)?.into_iter().map(|(mu, _)| mu).collect())
    }

    /// Gap between the sensitive groups' mean posterior locations.
    pub fn latent_gap(&self, ds: &Dataset) -> Result<LatentGap> {
        let pix = self.profile.resolve(&ds.schema, false)?;
        let d_z = self.config.d_z;
        let mut sums = [vec![0.0; d_z], vec![0.0; d_z]];
        let mut counts = [0usize; 2];
        let posteriors = self.posterior(ds)?;
        for (i, (mu, _)) in posteriors.iter().enumerate() {
            let g = self.branch_of(ds.columns[pix.a][i], i)?;
            counts[g] += 1;
            for d in 0..d_z {
                sums[g][d] += mu[d];
            }
        }
        for (g, c) in counts.iter().enumerate() {
            if *c == 0 {
                return Err(Error::Validation(format!(
                    "latent gap needs both sensitive groups; group a={g} is empty"
                )));
            }
        }
        let per_dim: Vec<f64> = (0..d_z)
            .map(|d| (sums[0][d] / counts[0] as f64 - sums[1][d] / counts[1] as f64).abs())
            .collect();
        let max = per_dim.iter().cloned().fold(0.0, f64::max);
        Ok(LatentGap { per_dim, max })
    }

    /// Factual reconstruction: infer `z` per record, then re-decode every
    /// modeled column through the generative chain with the observed `a`.
    pub fn reconstruct(&self, ds: &Dataset, mode: ReconMode, seed: u64) -> Result<Dataset> {
        self.counterfactual_reconstruct(ds, APolicy::Observed, mode, seed)
    }

    /// Counterfactual reconstruction: `z` comes from the factual record,
    /// decoding uses the policy value of `a` at every TAR head. Downstream
    /// columns are re-decoded ancestrally — decoded covariates feed the
    /// resolving decoder, both feed the outcome decoder. Columns outside the
    /// modeled roles (latent ground truth, extras) are copied through.
    pub fn counterfactual_reconstruct(
        &self,
        ds: &Dataset,
        policy: APolicy,
        mode: ReconMode,
        seed: u64,
    ) -> Result<Dataset> {
        policy.validate()?;
        self.decode_dataset(ds, mode, seed, |a_obs| policy.apply(a_obs))
    }

    /// Nested decode for path-specific inputs: `R*` is the resolving value
    /// with the baseline `a_base` propagated *only along the sensitive →
    /// covariate edges*. Covariates are decoded under `a_base`, but the
    /// resolving decoder keeps each record's observed branch, so the direct
    /// sensitive → resolving influence stays factual. Returns one column per
    /// resolving variable.
    pub fn nested_r_star(
        &self,
        ds: &Dataset,
        a_base: f64,
        mode: ReconMode,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if a_base != 0.0 && a_base != 1.0 {
            return Err(Error::Validation(format!("baseline value {a_base} is not 0/1")));
        }
        let r_net = self.r_net.as_ref().ok_or_else(|| {
            Error::Validation(
                "nested resolving decode needs resolving columns, and this model has none".into(),
            )
        })?;
        let pix = self.profile.resolve(&ds.schema, false)?;
        let n = ds.len();

        let mut z_rng = stream(seed, "recon/z");
        let mut x_rngs = GroupRngs::new(seed, "x", &self.profile.covariates);
        let mut r_rngs = GroupRngs::new(seed, "r", &self.profile.resolving);
        let mut out = vec![Vec::with_capacity(n); self.profile.resolving.len()];

        for i in 0..n {
            let rec = self.decode_record(
                ds,
                &pix,
                i,
                mode,
                &mut z_rng,
                &mut x_rngs,
                DecodeUpTo::Covariates { a_decode: a_base },
            )?;
            // Resolving pass under the *observed* branch.
            let branch = self.branch_of(ds.columns[pix.a][i], i)?;
            let mut r_in = Vec::with_capacity(r_net.net.mlp.spec().input_dim);
            r_in.extend_from_slice(&rec.z);
            r_in.extend_from_slice(&rec.b_enc);
            r_in.extend_from_slice(&rec.x_enc);
            let (r_heads, _) = r_net.net.forward(&r_in)?;
            for (c, col) in self.profile.resolving.iter().enumerate() {
                let head = &r_heads[r_net.head_index(c, branch)];
                out[c].push(decode_value(head, col.kind, mode, &mut r_rngs.0[c]));
            }
        }
        Ok(out)
    }

    /// Shared decode core. `a_map` sends each record's observed sensitive
    /// value to its decode-time value; the sampling streams are independent
    /// of the map, which makes policy composition behave like composition of
    /// the maps themselves.
    fn decode_dataset(
        &self,
        ds: &Dataset,
        mode: ReconMode,
        seed: u64,
        a_map: impl Fn(f64) -> f64,
    ) -> Result<Dataset> {
        let pix = self.profile.resolve(&ds.schema, true)?;
        let y_col = pix.outcome()?;
        let n = ds.len();
        let y_net = &self.y_net;

        let mut z_rng = stream(seed, "recon/z");
        let mut x_rngs = GroupRngs::new(seed, "x", &self.profile.covariates);
        let mut r_rngs = GroupRngs::new(seed, "r", &self.profile.resolving);
        let mut y_rng = stream(seed, &format!("recon/y/{}", self.profile.outcome.name));

        let mut columns = ds.columns.clone();
        for j in pix.x.iter().chain(pix.r.iter()).chain([&pix.a, &y_col]) {
            columns[*j].clear();
        }

        for i in 0..n {
            let a_obs = ds.columns[pix.a][i];
            self.branch_of(a_obs, i)?; // validate even though the map may ignore it
            let a_decode = a_map(a_obs);
            let branch = self.branch_of(a_decode, i)?;

            let rec = self.decode_record(
                ds,
                &pix,
                i,
                mode,
                &mut z_rng,
                &mut x_rngs,
                DecodeUpTo::Covariates { a_decode },
            )?;
            columns[pix.a].push(a_decode);
            for (c, &j) in pix.x.iter().enumerate() {
                columns[j].push(rec.x_vals[c]);
            }

            // Resolving columns under the same branch, fed the decoded x.
            let mut r_enc = Vec::new();
            if let Some(r_net) = &self.r_net {
                let mut r_in = Vec::with_capacity(r_net.net.mlp.spec().input_dim);
                r_in.extend_from_slice(&rec.z);
                r_in.extend_from_slice(&rec.b_enc);
                r_in.extend_from_slice(&rec.x_enc);
                let (r_heads, _) = r_net.net.forward(&r_in)?;
                for (c, col) in self.profile.resolving.iter().enumerate() {
                    let head = &r_heads[r_net.head_index(c, branch)];
                    let v = decode_value(head, col.kind, mode, &mut r_rngs.0[c]);
                    col.encode_into(v, &mut r_enc)?;
                    columns[pix.r[c]].push(v);
                }
            }

            let mut y_in = Vec::with_capacity(y_net.net.mlp.spec().input_dim);
            y_in.extend_from_slice(&rec.z);
            y_in.extend_from_slice(&rec.b_enc);
            y_in.extend_from_slice(&rec.x_enc);
            y_in.extend_from_slice(&r_enc);
            let (y_heads, _) = y_net.net.forward(&y_in)?;
            let head = &y_heads[y_net.head_index(0, branch)];
            columns[y_col].push(decode_value(head, self.profile.outcome.kind, mode, &mut y_rng));
        }

        Ok(Dataset { schema: ds.schema.clone(), columns, noise: None })
    }

    /// Infer `z` and decode the covariate group for one record.
    fn decode_record(
        &self,
        ds: &Dataset,
        pix: &ProfileIndex,
        i: usize,
        mode: ReconMode,
        z_rng: &mut ChaCha8Rng,
        x_rngs: &mut GroupRngs,
        upto: DecodeUpTo,
    ) -> Result<DecodedRecord> {
        use rand::Rng;
        use rand_distr::StandardNormal;

        let infer_in = self.encode_infer_input(&ds.columns, pix, i)?;
        let (mu, sd) = self.posterior_of(&infer_in)?;
        let z = match mode {
            ReconMode::Mean => mu,
            ReconMode::Sample => {
                let eps: Vec<f64> =
                    (0..sd.len()).map(|_| z_rng.sample::<f64, _>(StandardNormal)).collect();
                crate::nnet::sample_gaussian_reparam(&mu, &sd, &eps)
            }
        };

        let mut b_enc = Vec::new();
        for (col, &j) in self.profile.base.iter().zip(&pix.b) {
            col.encode_into(ds.columns[j][i], &mut b_enc)?;
        }

        let DecodeUpTo::Covariates { a_decode } = upto;
        let branch = self.branch_of(a_decode, i)?;
        let mut x_in = Vec::with_capacity(self.x_net.net.mlp.spec().input_dim);
        x_in.extend_from_slice(&z);
        x_in.extend_from_slice(&b_enc);
        let (x_heads, _) = self.x_net.net.forward(&x_in)?;
        let mut x_vals = Vec::with_capacity(self.profile.covariates.len());
        let mut x_enc = Vec::new();
        for (c, col) in self.profile.covariates.iter().enumerate() {
            let head = &x_heads[self.x_net.head_index(c, branch)];
            let v = decode_value(head, col.kind, mode, &mut x_rngs.0[c]);
            col.encode_into(v, &mut x_enc)?;
            x_vals.push(v);
        }

        Ok(DecodedRecord { z, b_enc, x_vals, x_enc })
    }
}

/// How far [`CevaeModel::decode_record`] decodes. A single variant today;
/// the enum keeps the call sites explicit about what they consume.
enum DecodeUpTo {
    Covariates { a_decode: f64 },
}

struct DecodedRecord {
    z: Vec<f64>,
    b_enc: Vec<f64>,
    x_vals: Vec<f64>,
    x_enc: Vec<f64>,
}
