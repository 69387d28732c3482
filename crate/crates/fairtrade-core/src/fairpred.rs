//! Auxiliary outcome predictors whose *input selection* encodes a fairness
//! constraint.
//!
//! The idea: once a causal-effect VAE has been trained, the latent posterior
//! `z` is (approximately) a sensitive-blind summary of a record. A predictor
//! that reads only `z` — or `z` plus other variables untouched by the
//! sensitive attribute — cannot transmit the attribute's influence, while a
//! predictor that also reads covariates, resolving variables, or the
//! attribute itself trades that guarantee away for accuracy. The admissible
//! sources are:
//!
//! * `Z` — the latent posterior mean vector (never re-sampled, never a
//!   function of hypothetical edits to the record),
//! * `B` — observed base variables,
//! * `R` — observed resolving variables,
//! * `R*` — the *nested* resolving decode: the value the resolving variables
//!   would have taken had the covariates been generated under a fixed base
//!   sensitive value (mutually exclusive with `R`),
//! * `X` — observed covariates,
//! * `A` — the sensitive attribute itself.
//!
//! [`build_inputs`] turns a selection into a feature matrix,
//! [`train_aux`] fits the auxiliary classifier, and [`baselines`] fits the
//! unconstrained reference models everything is compared against.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cevae::{shuffled_indices, CevaeModel, ColumnRef, ReconMode};
use crate::data::{Dataset, DistKind};
use crate::error::{Error, Result};
use crate::graph::Role;
use crate::nnet::{Activation, HeadSpec, Mlp, MlpCheckpoint, MlpSpec, NegLogLik, OptState, ParamStore};
use crate::rng::{derive_seed, stream};
use crate::stats;

/// One input source for an auxiliary predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSource {
    /// Latent posterior mean vector from the trained VAE.
    Z,
    /// Observed base columns.
    B,
    /// Observed resolving columns.
    R,
    /// Nested resolving decode under a fixed base sensitive value.
    RStar,
    /// Observed covariate columns.
    X,
    /// The observed sensitive attribute.
    A,
}

impl fmt::Display for InputSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InputSource::Z => "Z",
            InputSource::B => "B",
            InputSource::R => "R",
            InputSource::RStar => "R*",
            InputSource::X => "X",
            InputSource::A => "A",
        };
        f.write_str(s)
    }
}

impl FromStr for InputSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<InputSource> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Z" => Ok(InputSource::Z),
            "B" => Ok(InputSource::B),
            "R" => Ok(InputSource::R),
            "R*" => Ok(InputSource::RStar),
            "X" => Ok(InputSource::X),
            "A" => Ok(InputSource::A),
            other => Err(Error::Validation(format!(
                "unknown input source '{other}' (expected one of Z, B, R, R*, X, A)"
            ))),
        }
    }
}

/// An ordered, duplicate-free list of input sources, with the base sensitive
/// value required by `R*`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSelection {
    sources: Vec<InputSource>,
    base_a: Option<f64>,
}

impl InputSelection {
    pub fn new(sources: Vec<InputSource>, base_a: Option<f64>) -> Result<InputSelection> {
        if sources.is_empty() {
            return Err(Error::Validation("selection needs at least one input source".into()));
        }
        for (i, s) in sources.iter().enumerate() {
            if sources[..i].contains(s) {
                return Err(Error::Validation(format!("duplicate input source {s} in selection")));
            }
        }
        if sources.contains(&InputSource::R) && sources.contains(&InputSource::RStar) {
            return Err(Error::Validation(
                "R and R* cannot both be selected; R* replaces the observed resolving values"
                    .into(),
            ));
        }
        let wants_base = sources.contains(&InputSource::RStar);
        match (wants_base, base_a) {
            (true, None) => {
                return Err(Error::Validation(
                    "selection includes R* and needs a base sensitive value".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::Validation(
                    "a base sensitive value only applies when R* is selected".into(),
                ))
            }
            (true, Some(v)) if v != 0.0 && v != 1.0 => {
                return Err(Error::Validation(format!(
                    "base sensitive value must be 0 or 1, got {v}"
                )))
            }
            _ => {}
        }
        Ok(InputSelection { sources, base_a })
    }

    /// Parse a comma-separated source list such as `"Z,B,R*"`.
    pub fn parse(spec: &str, base_a: Option<f64>) -> Result<InputSelection> {
        let sources =
            spec.split(',').map(InputSource::from_str).collect::<Result<Vec<InputSource>>>()?;
        InputSelection::new(sources, base_a)
    }

    pub fn sources(&self) -> &[InputSource] {
        &self.sources
    }

    pub fn base_a(&self) -> Option<f64> {
        self.base_a
    }

    /// Canonical comma-separated label, e.g. `"Z,B,R*"`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.sources.iter().map(|s| s.to_string()).collect();
        parts.join(",")
    }

    /// The five-step constraint ladder used by the evaluation sweep, from the
    /// most constrained selection to the unconstrained one.
    pub fn standard_sweep(base_a: f64) -> Result<Vec<InputSelection>> {
        use InputSource::*;
        Ok(vec![
            InputSelection::new(vec![Z], None)?,
            InputSelection::new(vec![Z, B], None)?,
            InputSelection::new(vec![Z, B, RStar], Some(base_a))?,
            InputSelection::new(vec![Z, B, R, X], None)?,
            InputSelection::new(vec![Z, B, R, X, A], None)?,
        ])
    }
}

impl fmt::Display for InputSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn group_width(cols: &[ColumnRef]) -> usize {
    cols.iter().map(ColumnRef::input_width).sum()
}

/// Reject sources whose role group is empty in this model.
fn validate_selection(model: &CevaeModel, selection: &InputSelection) -> Result<()> {
    for s in selection.sources() {
        let missing = match s {
            InputSource::B => model.profile.base.is_empty().then_some("base"),
            InputSource::R | InputSource::RStar => {
                model.profile.resolving.is_empty().then_some("resolving")
            }
            _ => None,
        };
        if let Some(group) = missing {
            return Err(Error::Validation(format!(
                "selection includes {s}, but the model has no {group} columns"
            )));
        }
    }
    Ok(())
}

/// Width of the feature matrix [`build_inputs`] produces for `selection`.
pub fn selection_width(model: &CevaeModel, selection: &InputSelection) -> Result<usize> {
    validate_selection(model, selection)?;
    let mut w = 0;
    for s in selection.sources() {
        w += match s {
            InputSource::Z => model.config.d_z,
            InputSource::B => group_width(&model.profile.base),
            InputSource::R | InputSource::RStar => group_width(&model.profile.resolving),
            InputSource::X => group_width(&model.profile.covariates),
            InputSource::A => 1,
        };
    }
    Ok(w)
}

/// Build the feature matrix for `selection`, one row per record.
///
/// Deterministic: `Z` is the posterior mean and `R*` is the mean-mode nested
/// decode. Columns appear in selection order; multi-column groups keep their
/// schema order, and categorical columns are one-hot encoded exactly as the
/// VAE sees them.
pub fn build_inputs(
    model: &CevaeModel,
    ds: &Dataset,
    selection: &InputSelection,
) -> Result<Vec<Vec<f64>>> {
    build_features(model, ds, ds, selection, ReconMode::Mean, 0)
}

/// [`build_inputs`] with latent-derived columns taken from a different
/// dataset.
///
/// `Z` and `R*` are computed from `latent_source` while `B`, `R`, `X`, and
/// `A` are read from `records`. This is the evaluation-time semantics of the
/// auxiliary predictor: its latent features are *defined* with respect to the
/// factual record, so scoring a counterfactually edited copy of the records
/// must not re-infer them.
pub fn build_inputs_against(
    model: &CevaeModel,
    latent_source: &Dataset,
    records: &Dataset,
    selection: &InputSelection,
) -> Result<Vec<Vec<f64>>> {
    build_features(model, latent_source, records, selection, ReconMode::Mean, 0)
}

/// Sampling variant of [`build_inputs`]: `Z` is drawn from the posterior and
/// `R*` uses sample-mode decoding, both seeded.
pub fn build_inputs_sampled(
    model: &CevaeModel,
    ds: &Dataset,
    selection: &InputSelection,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    build_features(model, ds, ds, selection, ReconMode::Sample, seed)
}

fn build_features(
    model: &CevaeModel,
    latent_source: &Dataset,
    records: &Dataset,
    selection: &InputSelection,
    mode: ReconMode,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    validate_selection(model, selection)?;
    if latent_source.len() != records.len() {
        return Err(Error::Dimension(format!(
            "latent source has {} records, feature records have {}",
            latent_source.len(),
            records.len()
        )));
    }
    let pix = model.profile.resolve(&records.schema, false)?;
    let n = records.len();

    let z_rows: Option<Vec<Vec<f64>>> = if selection.sources().contains(&InputSource::Z) {
        Some(match mode {
            ReconMode::Mean => model.posterior_means(latent_source)?,
            ReconMode::Sample => {
                let mut rng = stream(seed, "feat/z");
                model
                    .posterior(latent_source)?
                    .into_iter()
                    .map(|(mu, sd)| {
                        let eps: Vec<f64> =
                            (0..sd.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                        crate::nnet::sample_gaussian_reparam(&mu, &sd, &eps)
                    })
                    .collect()
            }
        })
    } else {
        None
    };
    // Column-major: one vector per resolving column.
    let rstar_cols: Option<Vec<Vec<f64>>> =
        if selection.sources().contains(&InputSource::RStar) {
            let base = selection.base_a().expect("validated: R* carries a base value");
            Some(model.nested_r_star(latent_source, base, mode, derive_seed(seed, "feat/rstar"))?)
        } else {
            None
        };

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        for s in selection.sources() {
            match s {
                InputSource::Z => {
                    row.extend_from_slice(&z_rows.as_ref().expect("built above")[i])
                }
                InputSource::B => {
                    for (col, &j) in model.profile.base.iter().zip(&pix.b) {
                        col.encode_into(records.columns[j][i], &mut row)?;
                    }
                }
                InputSource::R => {
                    for (col, &j) in model.profile.resolving.iter().zip(&pix.r) {
                        col.encode_into(records.columns[j][i], &mut row)?;
                    }
                }
                InputSource::RStar => {
                    let cols = rstar_cols.as_ref().expect("built above");
                    for (c, col) in model.profile.resolving.iter().enumerate() {
                        col.encode_into(cols[c][i], &mut row)?;
                    }
                }
                InputSource::X => {
                    for (col, &j) in model.profile.covariates.iter().zip(&pix.x) {
                        col.encode_into(records.columns[j][i], &mut row)?;
                    }
                }
                InputSource::A => {
                    model.profile.sensitive.encode_into(records.columns[pix.a][i], &mut row)?
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Hyperparameters for the auxiliary classifier (and the baseline models,
/// which reuse the same optimizer settings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuxConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AuxConfig {
    fn default() -> AuxConfig {
        AuxConfig { hidden: 100, learning_rate: 1e-3, batch_size: 128, epochs: 40, seed: 0 }
    }
}

impl AuxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Validation(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.hidden == 0 {
            return Err(Error::Validation("hidden width must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// A trained auxiliary classifier bound to its input selection.
#[derive(Debug, Clone)]
pub struct AuxModel {
    pub selection: InputSelection,
    net: Mlp,
    params: ParamStore,
}

impl AuxModel {
    pub fn input_dim(&self) -> usize {
        self.net.spec().input_dim
    }

    /// Bernoulli probabilities, one per feature row. Strictly inside (0, 1).
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        predict_probs(&self.net, &self.params, features)
    }

    /// Fraction of records whose rounded prediction equals the label.
    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
        accuracy_of(&self.net, &self.params, features, labels)
    }

    /// Snapshot the model for serialization. The VAE that defines the `Z` and
    /// `R*` features is stored separately; a restored model must be paired
    /// with the same VAE checkpoint it was trained against.
    pub fn checkpoint(&self) -> AuxCheckpoint {
        AuxCheckpoint {
            version: AUX_CHECKPOINT_VERSION,
            selection: self.selection.label(),
            base_a: self.selection.base_a(),
            net: MlpCheckpoint::capture(&self.net, &self.params),
        }
    }
}

/// Current aux-checkpoint format version.
pub const AUX_CHECKPOINT_VERSION: u32 = 1;

/// Serialized form of an [`AuxModel`]: the selection spec plus the network
/// checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxCheckpoint {
    pub version: u32,
    pub selection: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_a: Option<f64>,
    pub net: MlpCheckpoint,
}

impl AuxCheckpoint {
    pub fn restore(&self) -> Result<AuxModel> {
        if self.version != AUX_CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "aux checkpoint version {} unsupported (expected {AUX_CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let selection = InputSelection::parse(&self.selection, self.base_a)?;
        let (net, params) = self.net.restore()?;
        Ok(AuxModel { selection, net, params })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("aux checkpoint serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<AuxCheckpoint> {
        serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("aux checkpoint parse failed: {e}")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<AuxCheckpoint> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        AuxCheckpoint::from_json(&text)
    }
}

/// Result of [`train_aux`]: the model, its per-epoch mean training loss, and
/// any warnings raised along the way.
#[derive(Debug, Clone)]
pub struct AuxOutcome {
    pub model: AuxModel,
    pub loss_curve: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Round a probability to a hard label at threshold 0.5; exactly 0.5 → 1.
pub fn round_label(p: f64) -> f64 {
    if p >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Fit the auxiliary classifier on a prebuilt feature matrix.
///
/// One hidden ReLU layer, sigmoid output head, cross-entropy loss, RMSprop.
/// Single-class label sets are reported as a warning but train anyway.
pub fn train_aux(
    features: &[Vec<f64>],
    labels: &[f64],
    selection: InputSelection,
    config: &AuxConfig,
) -> Result<AuxOutcome> {
    let fit = fit_classifier(features, labels, Some(config.hidden), config, "aux")?;
    Ok(AuxOutcome {
        model: AuxModel { selection, net: fit.net, params: fit.params },
        loss_curve: fit.loss_curve,
        warnings: fit.warnings,
    })
}

pub(crate) struct FitOutcome {
    pub(crate) net: Mlp,
    pub(crate) params: ParamStore,
    pub(crate) loss_curve: Vec<f64>,
    pub(crate) warnings: Vec<String>,
}

pub(crate) fn check_training_data(features: &[Vec<f64>], labels: &[f64]) -> Result<Vec<String>> {
    if features.is_empty() {
        return Err(Error::Validation("training needs at least one record".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let width = features[0].len();
    for (i, row) in features.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Dimension(format!(
                "feature row {i} has width {}, expected {width}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "feature {j} of record {i} is not finite"
            )));
        }
    }
    for (i, &y) in labels.iter().enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Validation(format!("labels must be 0 or 1, got {y} at record {i}")));
        }
    }
    let mut warnings = Vec::new();
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        warnings.push(format!(
            "training labels are all {}; the classifier degenerates to a constant — training anyway",
            labels[0]
        ));
    }
    Ok(warnings)
}

/// Shared supervised loop for the auxiliary classifier and the baselines.
/// `hidden = None` gives a plain logistic regression.
pub(crate) fn fit_classifier(
    features: &[Vec<f64>],
    labels: &[f64],
    hidden: Option<usize>,
    config: &AuxConfig,
    ns: &str,
) -> Result<FitOutcome> {
    config.validate()?;
    let warnings = check_training_data(features, labels)?;
    let spec = MlpSpec {
        input_dim: features[0].len(),
        hidden: hidden.map(|h| vec![h]).unwrap_or_default(),
        activation: Activation::Relu,
        heads: vec![HeadSpec::bernoulli(1)],
    };
    let net = Mlp::new(spec)?;
    let mut params = net.init_params(&mut stream(config.seed, &format!("{ns}/init")));
    let mut opt = OptState::rmsprop(config.learning_rate, params.len());

    let n = features.len();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let idx = shuffled_indices(n, config.seed, &format!("{ns}/shuffle/{epoch}"));
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(config.batch_size) {
            params.clear_grads();
            for &i in batch {
                let (heads, trace) = net.forward(&params, &features[i])?;
                let loss = NegLogLik::new(vec![Some(vec![labels[i]])]);
                let (value, _) = net.backward(&mut params, &trace, &heads, &loss)?;
                epoch_loss += value;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut params.grads {
                *g *= scale;
            }
            opt.step(&mut params)?;
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "classifier loss became non-finite at epoch {}",
                epoch + 1
            )));
        }
        loss_curve.push(mean_loss);
    }
    Ok(FitOutcome { net, params, loss_curve, warnings })
}

pub(crate) fn predict_probs(net: &Mlp, params: &ParamStore, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    let want = net.spec().input_dim;
    let mut out = Vec::with_capacity(features.len());
    for (i, row) in features.iter().enumerate() {
        if row.len() != want {
            return Err(Error::Dimension(format!(
                "feature row {i} has width {}, model expects {want}",
                row.len()
            )));
        }
        let (heads, _) = net.forward(params, row)?;
        out.push(heads[0].as_bernoulli()?[0]);
    }
    Ok(out)
}

fn accuracy_of(net: &Mlp, params: &ParamStore, features: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
    if features.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::Validation("accuracy needs at least one record".into()));
    }
    let probs = predict_probs(net, params, features)?;
    let correct =
        probs.iter().zip(labels).filter(|(p, &y)| round_label(**p) == y).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Settings for [`baselines`]: repetition count, split fraction, and the
/// shared optimizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub reps: usize,
    pub train_frac: f64,
    pub aux: AuxConfig,
}

impl Default for BaselineConfig {
    fn default() -> BaselineConfig {
        BaselineConfig { reps: 20, train_frac: 0.9, aux: AuxConfig::default() }
    }
}

/// Mean ± standard deviation of test accuracy over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

/// Unconstrained reference accuracies on raw observed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub mlp: BaselineSummary,
    pub logistic: BaselineSummary,
    /// Which dataset columns fed the models, in schema order.
    pub feature_names: Vec<String>,
}

/// Encode every observed non-outcome column (including the sensitive
/// attribute) as a feature row per record.
pub(crate) fn raw_feature_rows(ds: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut refs = Vec::new();
    for c in &ds.schema {
        match c.role {
            Role::Latent | Role::Outcome => {}
            _ => refs.push((
                ds.column_index(&c.name)?,
                ColumnRef { name: c.name.clone(), kind: c.kind },
            )),
        }
    }
    if refs.is_empty() {
        return Err(Error::Validation("dataset has no observed feature columns".into()));
    }
    let mut rows = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let mut row = Vec::new();
        for (j, col) in &refs {
            col.encode_into(ds.columns[*j][i], &mut row)?;
        }
        rows.push(row);
    }
    let names = refs.into_iter().map(|(_, c)| c.name).collect();
    Ok((rows, names))
}

/// Hard 0/1 labels from the dataset's unique binary outcome column.
pub fn outcome_labels(ds: &Dataset) -> Result<Vec<f64>> {
    let mut outcomes = ds.schema.iter().filter(|c| c.role == Role::Outcome);
    let col = outcomes
        .next()
        .ok_or_else(|| Error::Validation("dataset has no outcome column".into()))?;
    if outcomes.next().is_some() {
        return Err(Error::Validation("dataset has more than one outcome column".into()));
    }
    if col.kind != DistKind::Binary {
        return Err(Error::Validation(format!(
            "baseline classifiers need a binary outcome; '{}' is {:?}",
            col.name, col.kind
        )));
    }
    Ok(ds.column(&col.name)?.to_vec())
}

/// Train the unconstrained reference models — a one-hidden-layer MLP and a
/// logistic regression, both on raw observed features including the
/// sensitive attribute — over repeated random splits, and summarize test
/// accuracy as mean ± std.
pub fn baselines(ds: &Dataset, config: &BaselineConfig) -> Result<BaselineReport> {
    if config.reps == 0 {
        return Err(Error::Validation("baselines need at least one repetition".into()));
    }
    if !(config.train_frac > 0.0 && config.train_frac < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must be in (0, 1), got {}",
            config.train_frac
        )));
    }
    let mut mlp_acc = Vec::with_capacity(config.reps);
    let mut lr_acc = Vec::with_capacity(config.reps);
    let mut names = Vec::new();
    for rep in 0..config.reps {
        let split_seed = derive_seed(config.aux.seed, &format!("baseline/split/{rep}"));
        let (train, test) = ds.split(config.train_frac, split_seed);
        let (train_x, feature_names) = raw_feature_rows(&train)?;
        let train_y = outcome_labels(&train)?;
        let (test_x, _) = raw_feature_rows(&test)?;
        let test_y = outcome_labels(&test)?;
        names = feature_names;

        let mlp = fit_classifier(
            &train_x,
            &train_y,
            Some(config.aux.hidden),
            &config.aux,
            &format!("baseline/mlp/{rep}"),
        )?;
        mlp_acc.push(accuracy_of(&mlp.net, &mlp.params, &test_x, &test_y)?);
        let lr = fit_classifier(
            &train_x,
            &train_y,
            None,
            &config.aux,
            &format!("baseline/lr/{rep}"),
        )?;
        lr_acc.push(accuracy_of(&lr.net, &lr.params, &test_x, &test_y)?);
    }
    Ok(BaselineReport {
        mlp: BaselineSummary {
            mean: stats::mean(&mlp_acc),
            std: stats::std_dev(&mlp_acc),
            reps: config.reps,
        },
        logistic: BaselineSummary {
            mean: stats::mean(&lr_acc),
            std: stats::std_dev(&lr_acc),
            reps: config.reps,
        },
        feature_names: names,
    })
}

/// An auxiliary model paired with the VAE that defines its latent features;
/// predicts directly on record sets.
///
/// `predict_records(latent_source, records)` reads `Z`/`R*` from
/// `latent_source` and everything observed from `records`; passing the same
/// dataset twice gives ordinary prediction.
#[derive(Debug, Clone, Copy)]
pub struct SelectionPredictor<'a> {
    pub cevae: &'a CevaeModel,
    pub aux: &'a AuxModel,
}

impl SelectionPredictor<'_> {
    pub fn predict_records(
        &self,
        latent_source: &Dataset,
        records: &Dataset,
    ) -> Result<Vec<f64>> {
        let features =
            build_inputs_against(self.cevae, latent_source, records, &self.aux.selection)?;
        self.aux.predict(&features)
    }
}
