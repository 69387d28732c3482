//! Causal-effect VAE over role-labeled tabular data.
//!
//! The model family mirrors the causal ordering of the roles: an inference
//! network reads the observed record (sensitive attribute, base variables,
//! covariates, resolving variables — never the outcome) and produces a
//! diagonal-Gaussian posterior over a latent confounder `z`; generative
//! networks then decode covariates from `(z, b)`, resolving variables from
//! `(z, b, x)`, and the outcome from `(z, b, x, r)`. The sensitive attribute
//! enters the decoders through treatment-agnostic-representation (TAR) heads:
//! each decoded column owns two output heads on a shared trunk, and the value
//! of `a` selects which head is read. Training maximizes the usual evidence
//! lower bound with reparameterized latent samples.
//!
//! Submodules: [`train`] holds the ELBO and the optimizer loop, [`recon`]
//! holds factual/counterfactual reconstruction and latent diagnostics.

mod recon;
mod train;

pub use recon::{APolicy, LatentGap, ReconMode};
pub(crate) use train::shuffled_indices;
pub use train::{train, train_from_schema, ElboTerms, EpochStats, TrainLog, TrainRun};

use serde::{Deserialize, Serialize};

use crate::data::{ColumnSchema, DistKind};
use crate::error::{Error, Result};
use crate::graph::Role;
use crate::nnet::{Activation, HeadOutput, HeadSpec, Mlp, MlpCheckpoint, MlpSpec, ParamStore, Trace};
use crate::rng::stream;

/// Hyperparameters for model construction and training.
///
/// Defaults are the desk-scale settings: learning rate `1e-4`, batch size
/// 512, one Monte Carlo sample per record, 30 epochs, five latent
/// dimensions, and one hidden layer of width 100 in every network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_mc_samples: usize,
    pub epochs: usize,
    pub seed: u64,
    pub d_z: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 512,
            n_mc_samples: 1,
            epochs: 30,
            seed: 0,
            d_z: 5,
            hidden: 100,
        }
    }
}

impl TrainConfig {
    /// Reject non-positive sizes and rates. Zero epochs is allowed (the
    /// model stays at initialization), zero anything else is not.
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Validation(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        for (what, v) in [
            ("batch size", self.batch_size),
            ("n_mc_samples", self.n_mc_samples),
            ("latent dimension", self.d_z),
            ("hidden width", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("{what} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Activation used by every hidden layer. Fixed rather than configurable:
/// ELU keeps the sd heads smooth near zero, which the gradient checks rely
/// on.
pub const ACTIVATION: Activation = Activation::Elu;

/// Name and distribution kind of one modeled column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub name: String,
    pub kind: DistKind,
}

impl ColumnRef {
    fn from_schema(c: &ColumnSchema) -> ColumnRef {
        ColumnRef { name: c.name.clone(), kind: c.kind }
    }

    /// Width this column occupies when fed to a network (one-hot for
    /// categorical, a single value otherwise).
    pub(crate) fn input_width(&self) -> usize {
        match self.kind {
            DistKind::Categorical { k } => k,
            _ => 1,
        }
    }

    /// Append the network encoding of one observed value.
    pub(crate) fn encode_into(&self, v: f64, out: &mut Vec<f64>) -> Result<()> {
        match self.kind {
            DistKind::Categorical { k } => {
                if v.fract() != 0.0 || v < 0.0 || v >= k as f64 {
                    return Err(Error::Validation(format!(
                        "column '{}': categorical value {v} outside 0..{k}",
                        self.name
                    )));
                }
                let start = out.len();
                out.resize(start + k, 0.0);
                out[start + v as usize] = 1.0;
            }
            _ => out.push(v),
        }
        Ok(())
    }

    /// Output head that models this column.
    fn head_spec(&self) -> HeadSpec {
        match self.kind {
            DistKind::Binary => HeadSpec::bernoulli(1),
            DistKind::Continuous => HeadSpec::gaussian(1),
            DistKind::Categorical { k } => HeadSpec::categorical(1, k),
        }
    }
}

/// Which dataset columns play which role in the model, in schema order.
///
/// Built from a dataset schema alone; the causal graph is implicit in the
/// role labels. Latent ground-truth columns kept by synthetic generators are
/// deliberately absent — they exist to validate the model, not to feed it.
/// Treatment columns are folded into the covariate group (they sit at the
/// same depth of the causal ordering: children of `a` and `z` only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub sensitive: ColumnRef,
    pub base: Vec<ColumnRef>,
    pub covariates: Vec<ColumnRef>,
    pub resolving: Vec<ColumnRef>,
    pub outcome: ColumnRef,
}

impl RoleProfile {
    /// Derive the profile from a dataset schema.
    ///
    /// Requires exactly one binary sensitive column, exactly one outcome
    /// column, and at least one covariate; base and resolving groups may be
    /// empty. Latent and `Other` columns are ignored.
    pub fn from_schema(schema: &[ColumnSchema]) -> Result<RoleProfile> {
        let mut sensitive = None;
        let mut outcome = None;
        let mut base = Vec::new();
        let mut covariates = Vec::new();
        let mut resolving = Vec::new();
        for c in schema {
            match c.role {
                Role::Sensitive => {
                    if sensitive.is_some() {
                        return Err(Error::Validation(
                            "schema has more than one sensitive column".into(),
                        ));
                    }
                    if c.kind != DistKind::Binary {
                        return Err(Error::Validation(format!(
                            "sensitive column '{}' must be binary",
                            c.name
                        )));
                    }
                    sensitive = Some(ColumnRef::from_schema(c));
                }
                Role::Outcome => {
                    if outcome.is_some() {
                        return Err(Error::Validation(
                            "schema has more than one outcome column".into(),
                        ));
                    }
                    outcome = Some(ColumnRef::from_schema(c));
                }
                Role::Base => base.push(ColumnRef::from_schema(c)),
                Role::Covariate | Role::Treatment => covariates.push(ColumnRef::from_schema(c)),
                Role::Resolving => resolving.push(ColumnRef::from_schema(c)),
                Role::Latent | Role::Other => {}
            }
        }
        let sensitive =
            sensitive.ok_or_else(|| Error::Validation("schema has no sensitive column".into()))?;
        let outcome =
            outcome.ok_or_else(|| Error::Validation("schema has no outcome column".into()))?;
        if covariates.is_empty() {
            return Err(Error::Validation("schema has no covariate columns".into()));
        }
        Ok(RoleProfile { sensitive, base, covariates, resolving, outcome })
    }

    fn width(group: &[ColumnRef]) -> usize {
        group.iter().map(ColumnRef::input_width).sum()
    }

    /// Resolve the profile's columns against a concrete dataset schema,
    /// checking both presence and distribution kind. The outcome column is
    /// optional for inference-only passes (`need_y = false`).
    pub(crate) fn resolve(&self, schema: &[ColumnSchema], need_y: bool) -> Result<ProfileIndex> {
        let lookup = |r: &ColumnRef| -> Result<usize> {
            let i = schema
                .iter()
                .position(|c| c.name == r.name)
                .ok_or_else(|| Error::UnknownName(format!("column '{}'", r.name)))?;
            if schema[i].kind != r.kind {
                return Err(Error::Validation(format!(
                    "column '{}' has kind {:?}, model expects {:?}",
                    r.name, schema[i].kind, r.kind
                )));
            }
            Ok(i)
        };
        let y = if need_y {
            Some(lookup(&self.outcome)?)
        } else if schema.iter().any(|c| c.name == self.outcome.name) {
            Some(lookup(&self.outcome)?)
        } else {
            None
        };
        Ok(ProfileIndex {
            a: lookup(&self.sensitive)?,
            b: self.base.iter().map(&lookup).collect::<Result<_>>()?,
            x: self.covariates.iter().map(&lookup).collect::<Result<_>>()?,
            r: self.resolving.iter().map(&lookup).collect::<Result<_>>()?,
            y,
        })
    }
}

/// Column indices of one dataset, aligned with a [`RoleProfile`].
#[derive(Debug, Clone)]
pub(crate) struct ProfileIndex {
    pub a: usize,
    pub b: Vec<usize>,
    pub x: Vec<usize>,
    pub r: Vec<usize>,
    pub y: Option<usize>,
}

impl ProfileIndex {
    pub(crate) fn outcome(&self) -> Result<usize> {
        self.y.ok_or_else(|| Error::Validation("dataset lacks the outcome column".into()))
    }
}

/// One network with its parameters.
#[derive(Debug, Clone)]
pub struct NetBlock {
    pub mlp: Mlp,
    pub params: ParamStore,
}

impl NetBlock {
    fn new<R: rand::Rng>(spec: MlpSpec, rng: &mut R) -> Result<NetBlock> {
        let mlp = Mlp::new(spec)?;
        let params = mlp.init_params(rng);
        Ok(NetBlock { mlp, params })
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Result<(Vec<HeadOutput>, Trace)> {
        self.mlp.forward(&self.params, input)
    }
}

/// Generative network with two output heads per decoded column, indexed by
/// the sensitive attribute: column `c` under branch `a` is head `2c + a`.
#[derive(Debug, Clone)]
pub struct TarNet {
    pub net: NetBlock,
    n_cols: usize,
}

impl TarNet {
    fn new<R: rand::Rng>(
        input_dim: usize,
        hidden: usize,
        cols: &[ColumnRef],
        rng: &mut R,
    ) -> Result<TarNet> {
        let mut heads = Vec::with_capacity(2 * cols.len());
        for c in cols {
            heads.push(c.head_spec());
            heads.push(c.head_spec());
        }
        let spec = MlpSpec { input_dim, hidden: vec![hidden], activation: ACTIVATION, heads };
        Ok(TarNet { net: NetBlock::new(spec, rng)?, n_cols: cols.len() })
    }

    /// Head index for one decoded column under one branch of `a`.
    pub fn head_index(&self, col: usize, branch: usize) -> usize {
        debug_assert!(col < self.n_cols && branch < 2);
        2 * col + branch
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
}

/// The assembled model: inference network plus role-structured decoders.
#[derive(Debug, Clone)]
pub struct CevaeModel {
    pub config: TrainConfig,
    pub profile: RoleProfile,
    /// `q(z | a, b, x, r)`: one Gaussian head of dimension `d_z`.
    pub infer: NetBlock,
    /// `p(x | b, a, z)` with TAR heads over `a`.
    pub x_net: TarNet,
    /// `p(r | b, a, x, z)`; absent when the profile has no resolving columns.
    pub r_net: Option<TarNet>,
    /// `p(y | b, a, r, x, z)` with TAR heads over `a`.
    pub y_net: TarNet,
}

impl CevaeModel {
    /// Build a freshly initialized model for the given roles. Weights are
    /// drawn from per-network substreams of `config.seed`.
    pub fn new(config: TrainConfig, profile: RoleProfile) -> Result<CevaeModel> {
        config.validate()?;
        let wb = RoleProfile::width(&profile.base);
        let wx = RoleProfile::width(&profile.covariates);
        let wr = RoleProfile::width(&profile.resolving);
        let d_z = config.d_z;

        let infer_spec = MlpSpec {
            input_dim: 1 + wb + wx + wr,
            hidden: vec![config.hidden],
            activation: ACTIVATION,
            heads: vec![HeadSpec::gaussian(d_z)],
        };
        let infer = NetBlock::new(infer_spec, &mut stream(config.seed, "init/infer"))?;

        let x_net = TarNet::new(
            d_z + wb,
            config.hidden,
            &profile.covariates,
            &mut stream(config.seed, "init/x"),
        )?;
        let r_net = if profile.resolving.is_empty() {
            None
        } else {
            Some(TarNet::new(
                d_z + wb + wx,
                config.hidden,
                &profile.resolving,
                &mut stream(config.seed, "init/r"),
            )?)
        };
        let y_net = TarNet::new(
            d_z + wb + wx + wr,
            config.hidden,
            std::slice::from_ref(&profile.outcome),
            &mut stream(config.seed, "init/y"),
        )?;

        Ok(CevaeModel { config, profile, infer, x_net, r_net, y_net })
    }

    /// Encode the inference-network input `(a, b, x, r)` for record `i`.
    pub(crate) fn encode_infer_input(
        &self,
        columns: &[Vec<f64>],
        pix: &ProfileIndex,
        i: usize,
    ) -> Result<Vec<f64>> {
        let mut input = Vec::with_capacity(self.infer.mlp.spec().input_dim);
        let a = columns[pix.a][i];
        self.branch_of(a, i)?;
        input.push(a);
        for (r, &j) in self.profile.base.iter().zip(&pix.b) {
            r.encode_into(columns[j][i], &mut input)?;
        }
        for (r, &j) in self.profile.covariates.iter().zip(&pix.x) {
            r.encode_into(columns[j][i], &mut input)?;
        }
        for (r, &j) in self.profile.resolving.iter().zip(&pix.r) {
            r.encode_into(columns[j][i], &mut input)?;
        }
        Ok(input)
    }

    /// TAR branch selected by a sensitive value, validating it is 0/1.
    pub(crate) fn branch_of(&self, a: f64, record: usize) -> Result<usize> {
        if a == 0.0 {
            Ok(0)
        } else if a == 1.0 {
            Ok(1)
        } else {
            Err(Error::Validation(format!(
                "sensitive column '{}' must be 0/1, found {a} at record {record}",
                self.profile.sensitive.name
            )))
        }
    }

    /// Posterior parameters `(μ, σ)` for one already-encoded record.
    pub(crate) fn posterior_of(&self, infer_input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (heads, _) = self.infer.forward(infer_input)?;
        let (mu, sd) = heads[0].as_gaussian()?;
        Ok((mu.to_vec(), sd.to_vec()))
    }
}

/// Serialized form of a [`CevaeModel`]: a versioned JSON document embedding
/// one checkpoint per network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CevaeCheckpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub profile: RoleProfile,
    pub infer: MlpCheckpoint,
    pub x_net: MlpCheckpoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_net: Option<MlpCheckpoint>,
    pub y_net: MlpCheckpoint,
}

/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

impl CevaeCheckpoint {
    pub fn capture(model: &CevaeModel) -> CevaeCheckpoint {
        let snap = |b: &NetBlock| MlpCheckpoint::capture(&b.mlp, &b.params);
        CevaeCheckpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            profile: model.profile.clone(),
            infer: snap(&model.infer),
            x_net: snap(&model.x_net.net),
            r_net: model.r_net.as_ref().map(|t| snap(&t.net)),
            y_net: snap(&model.y_net.net),
        }
    }

    pub fn restore(&self) -> Result<CevaeModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.config.validate()?;
        let block = |c: &MlpCheckpoint| -> Result<NetBlock> {
            let (mlp, params) = c.restore()?;
            Ok(NetBlock { mlp, params })
        };
        let r_net = match &self.r_net {
            Some(c) => {
                if self.profile.resolving.is_empty() {
                    return Err(Error::Validation(
                        "checkpoint has a resolving network but no resolving columns".into(),
                    ));
                }
                Some(TarNet { net: block(c)?, n_cols: self.profile.resolving.len() })
            }
            None => {
                if !self.profile.resolving.is_empty() {
                    return Err(Error::Validation(
                        "checkpoint lists resolving columns but lacks their network".into(),
                    ));
                }
                None
            }
        };
        Ok(CevaeModel {
            config: self.config.clone(),
            profile: self.profile.clone(),
            infer: block(&self.infer)?,
            x_net: TarNet { net: block(&self.x_net)?, n_cols: self.profile.covariates.len() },
            r_net,
            y_net: TarNet { net: block(&self.y_net)?, n_cols: 1 },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("checkpoint serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<CevaeCheckpoint> {
        serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("checkpoint parse failed: {e}")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<CevaeCheckpoint> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        CevaeCheckpoint::from_json(&text)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    //! Shared fixtures for the cevae test modules.

    use super::*;
    use crate::data::{ColumnSchema, Dataset, DistKind};
    use crate::graph::Role;

    pub fn col(name: &str, role: Role, kind: DistKind) -> ColumnSchema {
        ColumnSchema { name: name.into(), role, kind }
    }

    /// Schema with every group populated: a, one base, two covariates
    /// (continuous + binary), one resolving, binary outcome.
    pub fn full_schema() -> Vec<ColumnSchema> {
        vec![
            col("A", Role::Sensitive, DistKind::Binary),
            col("B", Role::Base, DistKind::Continuous),
            col("X1", Role::Covariate, DistKind::Continuous),
            col("X2", Role::Covariate, DistKind::Binary),
            col("R", Role::Resolving, DistKind::Continuous),
            col("Y", Role::Outcome, DistKind::Binary),
        ]
    }

    /// Small deterministic dataset over [`full_schema`].
    pub fn full_dataset(n: usize) -> Dataset {
        let mut columns = vec![Vec::with_capacity(n); 6];
        for i in 0..n {
            let fi = i as f64;
            columns[0].push((i % 2) as f64);
            columns[1].push((fi * 0.37).sin());
            columns[2].push(0.5 * (fi * 0.11).cos() - 0.2);
            columns[3].push(((i / 2) % 2) as f64);
            columns[4].push(0.3 * (fi * 0.53).sin() + 0.1);
            columns[5].push(((i / 3) % 2) as f64);
        }
        Dataset { schema: full_schema(), columns, noise: None }
    }

    pub fn tiny_config(seed: u64) -> TrainConfig {
        TrainConfig { d_z: 2, hidden: 6, batch_size: 4, seed, ..TrainConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::data::DistKind;
    use crate::graph::Role;

    #[test]
    fn profile_extracts_groups_in_schema_order() {
        let p = RoleProfile::from_schema(&full_schema()).unwrap();
        assert_eq!(p.sensitive.name, "A");
        assert_eq!(p.base.len(), 1);
        assert_eq!(
            p.covariates.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            ["X1", "X2"]
        );
        assert_eq!(p.resolving.len(), 1);
        assert_eq!(p.outcome.name, "Y");
    }

    #[test]
    fn profile_folds_treatment_into_covariates_and_skips_latent() {
        let schema = vec![
            col("A", Role::Sensitive, DistKind::Binary),
            col("Z", Role::Latent, DistKind::Continuous),
            col("X", Role::Covariate, DistKind::Continuous),
            col("T", Role::Treatment, DistKind::Binary),
            col("Y", Role::Outcome, DistKind::Continuous),
        ];
        let p = RoleProfile::from_schema(&schema).unwrap();
        assert_eq!(
            p.covariates.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            ["X", "T"]
        );
        assert!(p.base.is_empty() && p.resolving.is_empty());
    }

    #[test]
    fn profile_rejects_malformed_schemas() {
        let base = full_schema();

        let no_a: Vec<_> = base.iter().filter(|c| c.name != "A").cloned().collect();
        assert!(RoleProfile::from_schema(&no_a).unwrap_err().to_string().contains("sensitive"));

        let mut two_a = base.clone();
        two_a.push(col("A2", Role::Sensitive, DistKind::Binary));
        assert!(RoleProfile::from_schema(&two_a)
            .unwrap_err()
            .to_string()
            .contains("more than one sensitive"));

        let mut cont_a = base.clone();
        cont_a[0].kind = DistKind::Continuous;
        assert!(RoleProfile::from_schema(&cont_a)
            .unwrap_err()
            .to_string()
            .contains("must be binary"));

        let no_y: Vec<_> = base.iter().filter(|c| c.name != "Y").cloned().collect();
        assert!(RoleProfile::from_schema(&no_y).unwrap_err().to_string().contains("outcome"));

        let no_x: Vec<_> =
            base.iter().filter(|c| !c.name.starts_with('X')).cloned().collect();
        assert!(RoleProfile::from_schema(&no_x).unwrap_err().to_string().contains("covariate"));
    }

    #[test]
    fn model_dimensions_follow_the_role_groups() {
        let profile = RoleProfile::from_schema(&full_schema()).unwrap();
        let m = CevaeModel::new(tiny_config(1), profile).unwrap();
        // infer: a(1) + b(1) + x(2) + r(1).
        assert_eq!(m.infer.mlp.spec().input_dim, 5);
        assert_eq!(m.infer.mlp.spec().heads.len(), 1);
        // x: z(2) + b(1); two covariates → four TAR heads.
        assert_eq!(m.x_net.net.mlp.spec().input_dim, 3);
        assert_eq!(m.x_net.net.mlp.spec().heads.len(), 4);
        // r: z + b + x(2).
        let r = m.r_net.as_ref().unwrap();
        assert_eq!(r.net.mlp.spec().input_dim, 5);
        assert_eq!(r.net.mlp.spec().heads.len(), 2);
        // y: z + b + x + r.
        assert_eq!(m.y_net.net.mlp.spec().input_dim, 6);
        assert_eq!(m.y_net.net.mlp.spec().heads.len(), 2);
        assert_eq!(m.y_net.head_index(0, 1), 1);
    }

    #[test]
    fn absent_groups_shrink_the_networks() {
        let schema = vec![
            col("A", Role::Sensitive, DistKind::Binary),
            col("X", Role::Covariate, DistKind::Continuous),
            col("Y", Role::Outcome, DistKind::Binary),
        ];
        let profile = RoleProfile::from_schema(&schema).unwrap();
        let m = CevaeModel::new(tiny_config(3), profile).unwrap();
        assert!(m.r_net.is_none());
        assert_eq!(m.infer.mlp.spec().input_dim, 2); // a + x
        assert_eq!(m.x_net.net.mlp.spec().input_dim, 2); // z only
        assert_eq!(m.y_net.net.mlp.spec().input_dim, 3); // z + x
    }

    #[test]
    fn config_validation_rejects_degenerate_values() {
        let mut c = TrainConfig::default();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.d_z = 0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_deserializes_with_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "seed": 9}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.seed, 9);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.batch_size, 512);
        assert_eq!(c.n_mc_samples, 1);
        assert_eq!(c.d_z, 5);
        assert_eq!(c.hidden, 100);
    }

    #[test]
    fn categorical_inputs_are_one_hot_encoded() {
        let r = ColumnRef { name: "C".into(), kind: DistKind::Categorical { k: 3 } };
        assert_eq!(r.input_width(), 3);
        let mut buf = vec![9.0];
        r.encode_into(2.0, &mut buf).unwrap();
        assert_eq!(buf, [9.0, 0.0, 0.0, 1.0]);
        assert!(r.encode_into(3.0, &mut buf).is_err());
        assert!(r.encode_into(0.5, &mut buf).is_err());
    }

    #[test]
    fn checkpoint_round_trips_through_json() {
        let ds = full_dataset(8);
        let profile = RoleProfile::from_schema(&ds.schema).unwrap();
        let m = CevaeModel::new(tiny_config(11), profile).unwrap();

        let json = CevaeCheckpoint::capture(&m).to_json().unwrap();
        let restored = CevaeCheckpoint::from_json(&json).unwrap().restore().unwrap();

        assert_eq!(restored.config, m.config);
        assert_eq!(restored.profile, m.profile);
        assert_eq!(restored.infer.params.values, m.infer.params.values);
        assert_eq!(restored.x_net.net.params.values, m.x_net.net.params.values);
        let (r0, r1) = (m.r_net.as_ref().unwrap(), restored.r_net.as_ref().unwrap());
        assert_eq!(r1.net.params.values, r0.net.params.values);
        assert_eq!(restored.y_net.net.params.values, m.y_net.net.params.values);

        // Round trip is idempotent at the byte level.
        let again = CevaeCheckpoint::capture(&restored).to_json().unwrap();
        assert_eq!(json, again);
    }

    #[test]
    fn checkpoint_rejects_unknown_version() {
        let ds = full_dataset(4);
        let profile = RoleProfile::from_schema(&ds.schema).unwrap();
        let m = CevaeModel::new(tiny_config(2), profile).unwrap();
        let mut ckpt = CevaeCheckpoint::capture(&m);
        ckpt.version = 99;
        let err = ckpt.restore().unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }

    #[test]
    fn resolve_checks_presence_and_kind() {
        let ds = full_dataset(4);
        let profile = RoleProfile::from_schema(&ds.schema).unwrap();

        let mut schema = ds.schema.clone();
        schema[2].kind = DistKind::Binary; // X1 was continuous
        let err = profile.resolve(&schema, true).unwrap_err().to_string();
        assert!(err.contains("X1"), "{err}");

        let brief: Vec<_> = ds.schema.iter().filter(|c| c.name != "Y").cloned().collect();
        assert!(profile.resolve(&brief, true).is_err());
        let pix = profile.resolve(&brief, false).unwrap();
        assert!(pix.y.is_none());
        assert!(pix.outcome().is_err());
    }
}
