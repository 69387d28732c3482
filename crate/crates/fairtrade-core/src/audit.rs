//! Black-box auditing harness.
//!
//! The audit asks one question of an arbitrary classifier: *do its
//! predictions move when we hand it a counterfactual version of each
//! record?* A trained mechanism model generates the two record sets — the
//! factual reconstruction of a held-out test set and its counterfactual twin
//! with the sensitive attribute switched — which by construction differ only
//! in the sensitive value and what is causally downstream of it. The model
//! under audit never has to expose its internals: built-in classifiers
//! (logistic regression, a sensitive-masked variant, a random forest) are
//! provided for reference pipelines, and any external model can be plugged
//! in as a child process speaking CSV-in/probabilities-out.
//!
//! Because the comparison only means something when the reconstructions are
//! faithful, every audit also runs a sanity check: the black box's accuracy
//! on the reconstructed records must not fall more than
//! [`SANITY_DROP_LIMIT`] below its accuracy on the originals.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cevae::{APolicy, CevaeModel, ReconMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairpred::{
    self, check_training_data, fit_classifier, predict_probs, round_label, AuxConfig,
};
use crate::metrics::{cf_score, statistical_parity_score, CfMode, PredictionPair};
use crate::nnet::{Mlp, ParamStore};
use crate::rng::{derive_seed, stream};
use crate::stats;

/// Accuracy loss (original → reconstructed) above which audit scores are
/// flagged as unreliable.
pub const SANITY_DROP_LIMIT: f64 = 0.05;

/// Plain logistic regression: a zero-hidden-layer sigmoid net.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    net: Mlp,
    params: ParamStore,
}

impl LogisticModel {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[f64],
        config: &AuxConfig,
        ns: &str,
    ) -> Result<LogisticModel> {
        let fit = fit_classifier(rows, labels, None, config, ns)?;
        Ok(LogisticModel { net: fit.net, params: fit.params })
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        predict_probs(&self.net, &self.params, rows)
    }
}

/// Random-forest hyperparameters. `mtry` is fixed at ⌈√d⌉.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 8, seed: 0 }
    }
}

#[derive(Debug, Clone)]
enum TreeNode {
    Leaf { p: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn prob(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { p } => return *p,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn vote(&self, row: &[f64]) -> f64 {
        round_label(self.prob(row))
    }
}

/// Bagged CART classifier: Gini splits on ⌈√d⌉ random feature candidates per
/// node, majority vote across trees. The predicted "probability" is the
/// fraction of trees voting class 1.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_features: usize,
    oob_accuracy: Option<f64>,
}

fn gini(ones: f64, n: f64) -> f64 {
    let p = ones / n;
    2.0 * p * (1.0 - p)
}

/// Grow one subtree over `idx`; returns its root slot in `nodes`.
fn grow_tree(
    nodes: &mut Vec<TreeNode>,
    rows: &[Vec<f64>],
    labels: &[f64],
    idx: &[usize],
    depth: usize,
    config: &ForestConfig,
    mtry: usize,
    rng: &mut impl Rng,
) -> usize {
    let n = idx.len() as f64;
    let ones: f64 = idx.iter().map(|&i| labels[i]).sum();
    let leaf = TreeNode::Leaf { p: ones / n };
    if depth >= config.max_depth || ones == 0.0 || ones == n || idx.len() < 2 {
        nodes.push(leaf);
        return nodes.len() - 1;
    }

    let d = rows[0].len();
    let mut feats: Vec<usize> = (0..d).collect();
    for k in 0..mtry.min(d) {
        let j = rng.gen_range(k..d);
        feats.swap(k, j);
    }
    let parent = gini(ones, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
    for &f in &feats[..mtry.min(d)] {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (rows[i][f], labels[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_n = 0.0;
        let mut left_ones = 0.0;
        for w in 0..sorted.len() - 1 {
            left_n += 1.0;
            left_ones += sorted[w].1;
            if sorted[w].0 == sorted[w + 1].0 {
                continue;
            }
            let score = (left_n * gini(left_ones, left_n)
                + (n - left_n) * gini(ones - left_ones, n - left_n))
                / n;
            let accept = match best {
                None => score < parent - 1e-12,
                Some((b, _, _)) => score < b,
            };
            if accept {
                best = Some((score, f, 0.5 * (sorted[w].0 + sorted[w + 1].0)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        nodes.push(leaf);
        return nodes.len() - 1;
    };
    let (li, ri): (Vec<usize>, Vec<usize>) =
        idx.iter().copied().partition(|&i| rows[i][feature] <= threshold);
    if li.is_empty() || ri.is_empty() {
        // Midpoint rounded onto one side; treat as unsplittable.
        nodes.push(leaf);
        return nodes.len() - 1;
    }
    let slot = nodes.len();
    nodes.push(TreeNode::Leaf { p: 0.0 });
    let left = grow_tree(nodes, rows, labels, &li, depth + 1, config, mtry, rng);
    let right = grow_tree(nodes, rows, labels, &ri, depth + 1, config, mtry, rng);
    nodes[slot] = TreeNode::Split { feature, threshold, left, right };
    slot
}

impl RandomForest {
    pub fn fit(rows: &[Vec<f64>], labels: &[f64], config: &ForestConfig) -> Result<RandomForest> {
        if config.n_trees == 0 {
            return Err(Error::Validation("forest needs at least one tree".into()));
        }
        check_training_data(rows, labels)?;
        let n = rows.len();
        let d = rows[0].len();
        let mtry = (d as f64).sqrt().ceil() as usize;
        let mut trees = Vec::with_capacity(config.n_trees);
        // Out-of-bag votes: (votes for class 1, trees that saw the record OOB).
        let mut oob = vec![(0usize, 0usize); n];
        for t in 0..config.n_trees {
            let mut rng = stream(config.seed, &format!("rf/tree/{t}"));
            let mut in_bag = vec![false; n];
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.gen_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let mut nodes = Vec::new();
            grow_tree(&mut nodes, rows, labels, &idx, 0, config, mtry, &mut rng);
            let tree = Tree { nodes };
            for (i, row) in rows.iter().enumerate() {
                if !in_bag[i] {
                    oob[i].0 += (tree.vote(row) == 1.0) as usize;
                    oob[i].1 += 1;
                }
            }
            trees.push(tree);
        }
        let scored: Vec<f64> = oob
            .iter()
            .zip(labels)
            .filter(|((_, total), _)| *total > 0)
            .map(|((one, total), &y)| {
                f64::from(round_label(*one as f64 / *total as f64) == y)
            })
            .collect();
        let oob_accuracy = (!scored.is_empty()).then(|| stats::mean(&scored));
        Ok(RandomForest { trees, n_features: d, oob_accuracy })
    }

    /// Fraction of trees voting class 1, per row.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = self.trees.len() as f64;
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != self.n_features {
                    return Err(Error::Dimension(format!(
                        "feature row {i} has width {}, forest expects {}",
                        row.len(),
                        self.n_features
                    )));
                }
                Ok(self.trees.iter().map(|t| t.vote(row)).sum::<f64>() / m)
            })
            .collect()
    }

    /// Accuracy of the majority vote over the trees that did *not* train on
    /// each record; `None` if no record was ever out of bag.
    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }
}

/// A model reachable as a child process: reads a CSV (header + one row per
/// record) on standard input, writes one probability in `[0, 1]` per line on
/// standard output, and exits. A fresh process is spawned per prediction
/// call, so the adapter is stateless across calls.
#[derive(Debug, Clone)]
pub struct ExternalModel {
    command: Vec<String>,
    timeout: Duration,
}

fn excerpt(s: &str) -> String {
    let t = s.trim();
    if t.chars().count() > 400 {
        let head: String = t.chars().take(400).collect();
        format!("{head}…")
    } else {
        t.to_string()
    }
}

impl ExternalModel {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<ExternalModel> {
        if command.is_empty() {
            return Err(Error::Validation("external adapter needs a command".into()));
        }
        Ok(ExternalModel { command, timeout })
    }

    pub fn command_line(&self) -> String {
        self.command.join(" ")
    }

    fn csv_payload(names: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(names)?;
        for row in rows {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.into_inner().map_err(|e| Error::Adapter(format!("csv buffer: {e}")))
    }

    fn predict(&self, names: &[String], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let payload = Self::csv_payload(names, rows)?;
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start '{}': {e}", self.command[0])))?;

        // Feed stdin and drain both output pipes on their own threads so a
        // chatty or slow model cannot deadlock on a full pipe.
        let mut stdin = child.stdin.take().expect("stdin was piped");
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&payload);
        });
        let mut stdout_pipe = child.stdout.take().expect("stdout was piped");
        let out_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout_pipe.read_to_string(&mut s);
            s
        });
        let mut stderr_pipe = child.stderr.take().expect("stderr was piped");
        let err_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr_pipe.read_to_string(&mut s);
            s
        });

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {}
                Err(e) => return Err(Error::Adapter(format!("waiting on adapter: {e}"))),
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                let _ = writer.join();
                let partial = out_thread.join().unwrap_or_default();
                return Err(Error::Adapter(format!(
                    "'{}' timed out after {:?}; partial output: {}",
                    self.command_line(),
                    self.timeout,
                    excerpt(&partial)
                )));
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let _ = writer.join();
        let stdout = out_thread.join().unwrap_or_default();
        let stderr = err_thread.join().unwrap_or_default();

        if !status.success() {
            return Err(Error::Adapter(format!(
                "'{}' exited with {status}; stderr: {}",
                self.command_line(),
                excerpt(&stderr)
            )));
        }
        let values: Vec<f64> = stdout
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>().map_err(|_| {
                    Error::Adapter(format!(
                        "'{}' wrote a non-numeric prediction line: {}",
                        self.command_line(),
                        excerpt(l)
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != rows.len() {
            return Err(Error::Adapter(format!(
                "'{}' returned {} predictions, expected {}; output: {}",
                self.command_line(),
                values.len(),
                rows.len(),
                excerpt(&stdout)
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Adapter(format!(
                "'{}' returned prediction {v}, outside [0, 1]",
                self.command_line()
            )));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone)]
enum ModelKind {
    Logistic(LogisticModel),
    /// Logistic regression whose sensitive input is pinned to a constant
    /// (0.0) at both training and prediction time.
    LogisticFixedA { inner: LogisticModel, a_slot: usize },
    Forest(RandomForest),
    External(ExternalModel),
}

/// A classifier under audit: a model plus the ordered dataset columns it
/// consumes.
#[derive(Debug, Clone)]
pub struct BlackBoxAdapter {
    features: Vec<String>,
    model: ModelKind,
}

fn zero_slot(rows: &[Vec<f64>], slot: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            r[slot] = 0.0;
            r
        })
        .collect()
}

fn validate_feature_names(names: &[String], width: usize) -> Result<()> {
    if names.len() != width {
        return Err(Error::Dimension(format!(
            "{} feature names for rows of width {width}",
            names.len()
        )));
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::Validation(format!("duplicate feature name '{n}'")));
        }
    }
    Ok(())
}

impl BlackBoxAdapter {
    /// Dataset columns the model reads, in model input order.
    pub fn features(&self) -> &[String] {
        &self.features
    }

    /// Short identifier for reports.
    pub fn label(&self) -> String {
        match &self.model {
            ModelKind::Logistic(_) => "lr".into(),
            ModelKind::LogisticFixedA { .. } => "lr_fixed_a".into(),
            ModelKind::Forest(_) => "random_forest".into(),
            ModelKind::External(x) => format!("external:{}", x.command_line()),
        }
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        match &self.model {
            ModelKind::Logistic(m) => m.predict(rows),
            ModelKind::LogisticFixedA { inner, a_slot } => inner.predict(&zero_slot(rows, *a_slot)),
            ModelKind::Forest(f) => f.predict(rows),
            ModelKind::External(x) => x.predict(&self.features, rows),
        }
    }

    /// Predict on a dataset by extracting the adapter's feature columns.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let cols: Vec<&[f64]> = self
            .features
            .iter()
            .map(|n| ds.column(n))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> =
            (0..ds.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        self.predict_rows(&rows)
    }
}

/// Observed feature columns — everything except latent ground truth and the
/// outcome — as rows plus their column names, in schema order.
pub fn feature_matrix(ds: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    fairpred::raw_feature_rows(ds)
}

/// Train the plain logistic-regression reference model.
pub fn train_lr(
    rows: &[Vec<f64>],
    labels: &[f64],
    names: &[String],
    config: &AuxConfig,
) -> Result<BlackBoxAdapter> {
    validate_feature_names(names, rows.first().map_or(0, Vec::len))?;
    let model = LogisticModel::fit(rows, labels, config, "audit/lr")?;
    Ok(BlackBoxAdapter { features: names.to_vec(), model: ModelKind::Logistic(model) })
}

/// Train the sensitive-masked logistic regression: the `a_name` feature is
/// forced to 0.0 both while fitting and at prediction time, so the model is
/// exactly invariant to that column.
pub fn train_lr_fixed_a(
    rows: &[Vec<f64>],
    labels: &[f64],
    names: &[String],
    a_name: &str,
    config: &AuxConfig,
) -> Result<BlackBoxAdapter> {
    validate_feature_names(names, rows.first().map_or(0, Vec::len))?;
    let a_slot = names.iter().position(|n| n == a_name).ok_or_else(|| {
        Error::Validation(format!("masked logistic needs '{a_name}' among its features"))
    })?;
    let masked = zero_slot(rows, a_slot);
    let inner = LogisticModel::fit(&masked, labels, config, "audit/lr_fixed_a")?;
    Ok(BlackBoxAdapter {
        features: names.to_vec(),
        model: ModelKind::LogisticFixedA { inner, a_slot },
    })
}

/// Train the random-forest reference model.
pub fn train_rf(
    rows: &[Vec<f64>],
    labels: &[f64],
    names: &[String],
    config: &ForestConfig,
) -> Result<BlackBoxAdapter> {
    validate_feature_names(names, rows.first().map_or(0, Vec::len))?;
    let forest = RandomForest::fit(rows, labels, config)?;
    Ok(BlackBoxAdapter { features: names.to_vec(), model: ModelKind::Forest(forest) })
}

/// Wrap an external child-process model.
pub fn external_adapter(
    command: Vec<String>,
    features: Vec<String>,
    timeout: Duration,
) -> Result<BlackBoxAdapter> {
    validate_feature_names(&features, features.len())?;
    let model = ExternalModel::new(command, timeout)?;
    Ok(BlackBoxAdapter { features, model: ModelKind::External(model) })
}

fn label_accuracy(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Validation("accuracy needs at least one record".into()));
    }
    if let Some(v) = labels.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Validation(format!("label {v} is not 0 or 1")));
    }
    let hits = probs.iter().zip(labels).filter(|(p, y)| round_label(**p) == **y).count();
    Ok(hits as f64 / probs.len() as f64)
}

/// Accuracy of the black box on the original records versus their
/// reconstructions, with a warning when the drop exceeds
/// [`SANITY_DROP_LIMIT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityOutcome {
    pub accuracy_original: f64,
    pub accuracy_reconstructed: f64,
    pub warning: Option<String>,
}

/// Compare the adapter's accuracy on original and reconstructed records
/// against the same labels.
pub fn sanity_check(
    adapter: &BlackBoxAdapter,
    original: &Dataset,
    reconstructed: &Dataset,
    labels: &[f64],
) -> Result<SanityOutcome> {
    let acc_orig = label_accuracy(&adapter.predict(original)?, labels)?;
    let acc_recon = label_accuracy(&adapter.predict(reconstructed)?, labels)?;
    Ok(sanity_outcome(acc_orig, acc_recon))
}

fn sanity_outcome(acc_orig: f64, acc_recon: f64) -> SanityOutcome {
    let warning = (acc_orig - acc_recon > SANITY_DROP_LIMIT).then(|| {
        format!(
            "reconstruction drops accuracy from {acc_orig:.3} to {acc_recon:.3} \
             (more than {SANITY_DROP_LIMIT}); audit scores for this model are unreliable"
        )
    });
    SanityOutcome { accuracy_original: acc_orig, accuracy_reconstructed: acc_recon, warning }
}

/// The factual reconstruction of `test` and its counterfactual twin under
/// the switched sensitive attribute. Both use the same sampling streams, so
/// they differ only in the sensitive value and its causal descendants; base
/// columns and pass-through columns are byte-identical.
pub fn audit_pair(model: &CevaeModel, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let factual = model.reconstruct(test, ReconMode::Sample, seed)?;
    let counterfactual =
        model.counterfactual_reconstruct(test, APolicy::Switch, ReconMode::Sample, seed)?;
    Ok((factual, counterfactual))
}

/// Audit repetitions and base seed. Each repetition redraws the
/// reconstruction samples from its own substream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub reps: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { reps: 20, seed: 0 }
    }
}

/// Mean/std over audit repetitions, with the raw per-repetition values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub std: f64,
    pub per_rep: Vec<f64>,
}

fn summarize(per_rep: Vec<f64>) -> ScoreSummary {
    ScoreSummary { mean: stats::mean(&per_rep), std: stats::std_dev(&per_rep), per_rep }
}

/// Outcome of one audit: counterfactual agreement in both modes,
/// statistical parity of the factual predictions, and the reconstruction
/// sanity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub version: u32,
    pub model: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub cf_mean_abs: ScoreSummary,
    pub cf_flip_rate: ScoreSummary,
    pub statistical_parity: ScoreSummary,
    pub sanity: SanityOutcome,
}

impl AuditReport {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("audit report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<AuditReport> {
        serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("audit report parse failed: {e}")))
    }
}

/// Run the full audit: for every repetition, reconstruct the test set
/// factually and counterfactually (fresh reconstruction samples per
/// repetition), score the adapter on both, and aggregate. The sanity
/// accuracies compare the originals against the factual reconstructions,
/// averaged over repetitions.
pub fn run_audit(
    model: &CevaeModel,
    test: &Dataset,
    adapter: &BlackBoxAdapter,
    config: &AuditConfig,
) -> Result<AuditReport> {
    if config.reps == 0 {
        return Err(Error::Validation("audit needs at least one repetition".into()));
    }
    let a = test.column(&model.profile.sensitive.name)?.to_vec();
    let labels = fairpred::outcome_labels(test)?;
    let acc_orig = label_accuracy(&adapter.predict(test)?, &labels)?;

    let mut cf_abs = Vec::with_capacity(config.reps);
    let mut cf_flip = Vec::with_capacity(config.reps);
    let mut parity = Vec::with_capacity(config.reps);
    let mut acc_recon = Vec::with_capacity(config.reps);
    for r in 0..config.reps {
        let rep_seed = derive_seed(config.seed, &format!("audit/rep/{r}"));
        let (factual, counterfactual) = audit_pair(model, test, rep_seed)?;
        let y_f = adapter.predict(&factual)?;
        let y_c = adapter.predict(&counterfactual)?;
        let pair = PredictionPair::new(y_f.clone(), y_c, a.clone())?;
        cf_abs.push(cf_score(&pair, CfMode::MeanAbs));
        cf_flip.push(cf_score(&pair, CfMode::FlipRate));
        parity.push(statistical_parity_score(&y_f, &a)?);
        acc_recon.push(label_accuracy(&y_f, &labels)?);
    }

    Ok(AuditReport {
        version: AuditReport::VERSION,
        model: adapter.label(),
        n: test.len(),
        reps: config.reps,
        seed: config.seed,
        cf_mean_abs: summarize(cf_abs),
        cf_flip_rate: summarize(cf_flip),
        statistical_parity: summarize(parity),
        sanity: sanity_outcome(acc_orig, stats::mean(&acc_recon)),
    })
}
