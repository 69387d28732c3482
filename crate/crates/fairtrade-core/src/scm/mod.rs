//! Structural causal models: ground-truth mechanisms over a causal graph.
//!
//! An [`Scm`] attaches one mechanism per graph node and supports
//!
//! * ancestral sampling with retained exogenous noise ([`Scm::sample_dataset`]),
//! * hard interventions at sampling time ([`Scm::intervene_sample`]),
//! * exact per-record counterfactuals by re-evaluating mechanisms under the
//!   retained noise ([`Scm::counterfactual_row`]), and
//! * path-specific effects via nested counterfactuals ([`Scm::pse`]), where
//!   the sensitive value propagates only along an active path set.
//!
//! Because noise is retained, counterfactuals are deterministic functions of
//! the factual record: an empty intervention reproduces it bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ColumnSchema, Dataset, DistKind, NoiseBlock};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Identifiability, PathSet, Role};
use crate::rng;

pub mod generators;

/// Distribution of a node's exogenous noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Standard normal draw.
    StdNormal,
    /// Uniform draw on `[0, 1)`, used as a threshold for discrete nodes.
    Uniform01,
}

type FormulaFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Structural mechanism for one node.
///
/// Coefficient maps are keyed by parent name; a parent omitted from the map
/// contributes with coefficient zero. Referencing a non-parent is an error at
/// construction time.
#[derive(Clone)]
pub enum Mechanism {
    /// `intercept + Σ coeff·parent + noise_scale·u`, with `u ~ N(0,1)`.
    Linear {
        intercept: f64,
        coeffs: BTreeMap<String, f64>,
        noise_scale: f64,
    },
    /// `1[u < σ(intercept + Σ coeff·parent)]`, with `u ~ U(0,1)`.
    Logistic {
        intercept: f64,
        coeffs: BTreeMap<String, f64>,
    },
    /// `1[u < p]`, with `u ~ U(0,1)`; for root binary nodes.
    BernoulliConst { p: f64 },
    /// Arbitrary function of the parent values (in sorted-name order) and the
    /// noise draw.
    Formula { noise: NoiseKind, f: FormulaFn },
}

impl Mechanism {
    /// Linear mechanism from `(parent, coefficient)` pairs.
    pub fn linear(intercept: f64, coeffs: &[(&str, f64)], noise_scale: f64) -> Mechanism {
        Mechanism::Linear {
            intercept,
            coeffs: coeffs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            noise_scale,
        }
    }

    /// Logistic-threshold mechanism from `(parent, coefficient)` pairs.
    pub fn logistic(intercept: f64, coeffs: &[(&str, f64)]) -> Mechanism {
        Mechanism::Logistic {
            intercept,
            coeffs: coeffs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Free-form mechanism; `f` receives parent values in sorted-name order
    /// plus the noise draw.
    pub fn formula(
        noise: NoiseKind,
        f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Mechanism {
        Mechanism::Formula {
            noise,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Linear {
                intercept, coeffs, ..
            } => write!(f, "Linear {{ intercept: {intercept}, coeffs: {coeffs:?} }}"),
            Mechanism::Logistic { intercept, coeffs } => {
                write!(f, "Logistic {{ intercept: {intercept}, coeffs: {coeffs:?} }}")
            }
            Mechanism::BernoulliConst { p } => write!(f, "BernoulliConst {{ p: {p} }}"),
            Mechanism::Formula { noise, .. } => write!(f, "Formula {{ noise: {noise:?} }}"),
        }
    }
}

/// Mechanism compiled against the graph: coefficients aligned with the
/// sorted-name parent order used everywhere else.
#[derive(Clone)]
enum CompiledKind {
    Linear {
        intercept: f64,
        coeffs: Vec<f64>,
        noise_scale: f64,
    },
    Logistic {
        intercept: f64,
        coeffs: Vec<f64>,
    },
    BernoulliConst {
        p: f64,
    },
    Formula(FormulaFn),
}

#[derive(Clone)]
struct CompiledMech {
    noise: NoiseKind,
    kind: CompiledKind,
}

impl CompiledMech {
    fn eval(&self, parents: &[f64], u: f64) -> f64 {
        match &self.kind {
            CompiledKind::Linear {
                intercept,
                coeffs,
                noise_scale,
            } => {
                let mut v = *intercept;
                for (c, p) in coeffs.iter().zip(parents) {
                    v += c * p;
                }
                v + noise_scale * u
            }
            CompiledKind::Logistic { intercept, coeffs } => {
                let mut t = *intercept;
                for (c, p) in coeffs.iter().zip(parents) {
                    t += c * p;
                }
                let p1 = 1.0 / (1.0 + (-t).exp());
                if u < p1 {
                    1.0
                } else {
                    0.0
                }
            }
            CompiledKind::BernoulliConst { p } => {
                if u < *p {
                    1.0
                } else {
                    0.0
                }
            }
            CompiledKind::Formula(f) => f(parents, u),
        }
    }
}

/// A Monte-Carlo estimate of a path-specific effect.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PseEstimate {
    /// Mean of the per-record nested differences.
    pub value: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Number of Monte-Carlo records.
    pub n: usize,
}

/// A structural causal model: a causal graph plus one mechanism per node.
#[derive(Clone)]
pub struct Scm {
    graph: CausalGraph,
    mechs: Vec<CompiledMech>,
    kinds: Vec<DistKind>,
    /// Parent indices per node, aligned with sorted-name parent order.
    parent_idx: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl fmt::Debug for Scm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scm")
            .field("nodes", &self.graph.nodes().len())
            .field("edges", &self.graph.edges().len())
            .finish()
    }
}

impl Scm {
    /// Builds an SCM over `graph`. `mechanisms` and `kinds` must cover every
    /// node; linear/logistic coefficient keys must be parents of the node
    /// they belong to.
    pub fn new(
        graph: CausalGraph,
        mechanisms: BTreeMap<String, Mechanism>,
        kinds: BTreeMap<String, DistKind>,
    ) -> Result<Self> {
        for name in mechanisms.keys() {
            graph.node_index(name)?;
        }
        for name in kinds.keys() {
            graph.node_index(name)?;
        }

        let mut mechs = Vec::with_capacity(graph.len());
        let mut kind_vec = Vec::with_capacity(graph.len());
        let mut parent_idx = Vec::with_capacity(graph.len());
        for node in graph.nodes() {
            let name = &node.name;
            let mech = mechanisms
                .get(name)
                .ok_or_else(|| Error::Validation(format!("node '{name}' has no mechanism")))?;
            let kind = kinds.get(name).ok_or_else(|| {
                Error::Validation(format!("node '{name}' has no distribution kind"))
            })?;
            let parents = graph.parents_of(name)?;
            let pidx: Vec<usize> = parents
                .iter()
                .map(|p| graph.node_index(p).expect("parent name is a node"))
                .collect();

            mechs.push(compile_mechanism(name, mech, &parents)?);
            validate_kind(name, mech, kind)?;
            kind_vec.push(*kind);
            parent_idx.push(pidx);
        }

        let topo: Vec<usize> = graph.validate_dag()?;

        Ok(Scm {
            graph,
            mechs,
            kinds: kind_vec,
            parent_idx,
            topo,
        })
    }

    /// The underlying causal graph.
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// Name of the unique sensitive node.
    pub fn sensitive(&self) -> Result<String> {
        Ok(self.graph.unique_role(Role::Sensitive)?.name.clone())
    }

    fn draw_noise(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut noise = Vec::with_capacity(self.graph.len());
        for (j, node) in self.graph.nodes().iter().enumerate() {
            let mut rng = rng::stream(seed, &format!("sample/{}", node.name));
            let mut col = Vec::with_capacity(n);
            for _ in 0..n {
                let u = match self.mechs[j].noise {
                    NoiseKind::StdNormal => {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        v
                    }
                    NoiseKind::Uniform01 => rng.gen::<f64>(),
                };
                col.push(u);
            }
            noise.push(col);
        }
        noise
    }

    fn eval_row(
        &self,
        noise_at: impl Fn(usize) -> f64,
        fixed: &BTreeMap<usize, f64>,
        out: &mut [f64],
    ) {
        let mut buf: Vec<f64> = Vec::new();
        for &v in &self.topo {
            if let Some(&val) = fixed.get(&v) {
                out[v] = val;
                continue;
            }
            buf.clear();
            buf.extend(self.parent_idx[v].iter().map(|&p| out[p]));
            out[v] = self.mechs[v].eval(&buf, noise_at(v));
        }
    }

    fn dataset_from(&self, values: Vec<Vec<f64>>, noise: Vec<Vec<f64>>) -> Dataset {
        let names: Vec<String> = self.graph.nodes().iter().map(|n| n.name.clone()).collect();
        let schema: Vec<ColumnSchema> = self
            .graph
            .nodes()
            .iter()
            .zip(&self.kinds)
            .map(|(node, kind)| ColumnSchema {
                name: node.name.clone(),
                role: node.role,
                kind: *kind,
            })
            .collect();
        Dataset {
            schema,
            columns: values,
            noise: Some(NoiseBlock {
                nodes: names,
                values: noise,
            }),
        }
    }

    /// Draws `n` records by ancestral sampling, retaining every node's
    /// exogenous noise so records can be reconstructed or counterfactually
    /// altered later.
    pub fn sample_dataset(&self, n: usize, seed: u64) -> Dataset {
        self.intervened_dataset(n, seed, &BTreeMap::new())
            .expect("empty intervention is always valid")
    }

    /// Like [`Scm::sample_dataset`] but with `do(node = value)` applied during
    /// sampling: intervened nodes ignore their mechanism and take the fixed
    /// value in every record.
    pub fn intervene_sample(
        &self,
        n: usize,
        seed: u64,
        interventions: &BTreeMap<String, f64>,
    ) -> Result<Dataset> {
        self.intervened_dataset(n, seed, interventions)
    }

    fn intervened_dataset(
        &self,
        n: usize,
        seed: u64,
        interventions: &BTreeMap<String, f64>,
    ) -> Result<Dataset> {
        let fixed = self.fixed_map(interventions)?;
        let noise = self.draw_noise(n, seed);
        let k = self.graph.len();
        let mut values = vec![vec![0.0; n]; k];
        let mut row = vec![0.0; k];
        for i in 0..n {
            self.eval_row(|v| noise[v][i], &fixed, &mut row);
            for (j, col) in values.iter_mut().enumerate() {
                col[i] = row[j];
            }
        }
        Ok(self.dataset_from(values, noise))
    }

    fn fixed_map(&self, interventions: &BTreeMap<String, f64>) -> Result<BTreeMap<usize, f64>> {
        let mut fixed = BTreeMap::new();
        for (name, &value) in interventions {
            fixed.insert(self.graph.node_index(name)?, value);
        }
        Ok(fixed)
    }

    /// Maps this SCM's node order onto the retained-noise block of `dataset`.
    fn noise_index(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        let block = dataset.noise.as_ref().ok_or_else(|| {
            Error::Validation(
                "dataset lacks retained noise; counterfactuals need a noise block".to_string(),
            )
        })?;
        self.graph
            .nodes()
            .iter()
            .map(|node| {
                block.nodes.iter().position(|b| *b == node.name).ok_or_else(|| {
                    Error::Validation(format!(
                        "dataset noise block is missing node '{}'",
                        node.name
                    ))
                })
            })
            .collect()
    }

    /// Recomputes record `i` of `dataset` under `do(node = value)` for each
    /// entry of `interventions`, holding the record's exogenous noise fixed.
    ///
    /// With an empty intervention map this reproduces the factual record
    /// exactly. Returned values follow this SCM's node order.
    pub fn counterfactual_row(
        &self,
        dataset: &Dataset,
        i: usize,
        interventions: &BTreeMap<String, f64>,
    ) -> Result<Vec<f64>> {
        let map = self.noise_index(dataset)?;
        let fixed = self.fixed_map(interventions)?;
        let block = dataset.noise.as_ref().expect("checked by noise_index");
        if i >= dataset.len() {
            return Err(Error::Validation(format!(
                "record index {i} out of range for {} records",
                dataset.len()
            )));
        }
        let mut row = vec![0.0; self.graph.len()];
        self.eval_row(|v| block.values[map[v]][i], &fixed, &mut row);
        Ok(row)
    }

    /// Prepares the edge bookkeeping for nested counterfactual evaluation of
    /// the active path set `pi`, rejecting non-identifiable path sets.
    pub fn nested_plan(&self, pi: &PathSet) -> Result<NestedPlan<'_>> {
        match self.graph.check_identifiability(pi)? {
            Identifiability::Identifiable => {}
            Identifiability::NonIdentifiable { witness } => {
                return Err(Error::NonIdentifiable { witness });
            }
        }
        let a_idx = self.graph.node_index(&self.sensitive()?)?;
        let y_idx = self
            .graph
            .node_index(&self.graph.unique_role(Role::Outcome)?.name.clone())?;

        // tagged[v][slot] marks parent edges that carry the active world.
        let mut tagged: Vec<Vec<bool>> = self
            .parent_idx
            .iter()
            .map(|ps| vec![false; ps.len()])
            .collect();
        for path in pi.iter() {
            for (from, to) in path.edges() {
                let f = self.graph.node_index(from)?;
                let t = self.graph.node_index(to)?;
                let slot = self.parent_idx[t]
                    .iter()
                    .position(|&p| p == f)
                    .ok_or_else(|| {
                        Error::Validation(format!("path edge {from}->{to} is not a graph edge"))
                    })?;
                tagged[t][slot] = true;
            }
        }
        // to_y_active[v]: does v feed the outcome through an active edge?
        let mut to_y_active = vec![false; self.graph.len()];
        for (slot, &p) in self.parent_idx[y_idx].iter().enumerate() {
            if tagged[y_idx][slot] {
                to_y_active[p] = true;
            }
        }
        Ok(NestedPlan {
            scm: self,
            tagged,
            to_y_active,
            a_idx,
            y_idx,
        })
    }

    /// Estimates the path-specific effect of the active path set `pi`: the
    /// mean outcome difference between the nested world, where the sensitive
    /// value `a_active` propagates only along `pi` while every other path
    /// sees `a_base`, and the reference world with `a_base` everywhere.
    ///
    /// Both worlds share each record's exogenous noise, so path-set effects
    /// add exactly: disjoint path sets whose union covers all paths decompose
    /// the total effect.
    pub fn pse(
        &self,
        pi: &PathSet,
        a_active: f64,
        a_base: f64,
        n: usize,
        seed: u64,
    ) -> Result<PseEstimate> {
        if n == 0 {
            return Err(Error::Validation(
                "path-specific effect needs at least one record".to_string(),
            ));
        }
        let plan = self.nested_plan(pi)?;
        let noise = self.draw_noise(n, seed);
        let k = self.graph.len();
        let mut diffs = Vec::with_capacity(n);
        let mut act = vec![0.0; k];
        let mut base = vec![0.0; k];
        let mut noise_row = vec![0.0; k];
        for i in 0..n {
            for (v, dst) in noise_row.iter_mut().enumerate() {
                *dst = noise[v][i];
            }
            plan.worlds_into(&noise_row, a_active, a_base, &mut act, &mut base);
            diffs.push(act[plan.y_idx] - base[plan.y_idx]);
        }
        let value = crate::stats::mean(&diffs);
        let stderr = if n > 1 {
            crate::stats::std_err(&diffs)
        } else {
            f64::INFINITY
        };
        Ok(PseEstimate { value, stderr, n })
    }
}

fn compile_mechanism(node: &str, mech: &Mechanism, parents: &[&str]) -> Result<CompiledMech> {
    let align = |coeffs: &BTreeMap<String, f64>| -> Result<Vec<f64>> {
        for key in coeffs.keys() {
            if !parents.iter().any(|p| p == key) {
                return Err(Error::Validation(format!(
                    "mechanism for '{node}' references '{key}', which is not a parent"
                )));
            }
        }
        Ok(parents
            .iter()
            .map(|p| coeffs.get(*p).copied().unwrap_or(0.0))
            .collect())
    };
    Ok(match mech {
        Mechanism::Linear {
            intercept,
            coeffs,
            noise_scale,
        } => CompiledMech {
            noise: NoiseKind::StdNormal,
            kind: CompiledKind::Linear {
                intercept: *intercept,
                coeffs: align(coeffs)?,
                noise_scale: *noise_scale,
            },
        },
        Mechanism::Logistic { intercept, coeffs } => CompiledMech {
            noise: NoiseKind::Uniform01,
            kind: CompiledKind::Logistic {
                intercept: *intercept,
                coeffs: align(coeffs)?,
            },
        },
        Mechanism::BernoulliConst { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Validation(format!(
                    "node '{node}': Bernoulli probability {p} outside [0, 1]"
                )));
            }
            CompiledMech {
                noise: NoiseKind::Uniform01,
                kind: CompiledKind::BernoulliConst { p: *p },
            }
        }
        Mechanism::Formula { noise, f } => CompiledMech {
            noise: *noise,
            kind: CompiledKind::Formula(Arc::clone(f)),
        },
    })
}

fn validate_kind(node: &str, mech: &Mechanism, kind: &DistKind) -> Result<()> {
    let ok = match mech {
        Mechanism::Linear { .. } => matches!(kind, DistKind::Continuous),
        Mechanism::Logistic { .. } | Mechanism::BernoulliConst { .. } => {
            matches!(kind, DistKind::Binary)
        }
        Mechanism::Formula { .. } => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "node '{node}': mechanism output does not match declared kind {kind:?}"
        )))
    }
}

/// Precomputed edge bookkeeping for nested counterfactuals of one path set.
pub struct NestedPlan<'a> {
    scm: &'a Scm,
    /// Per node, per parent slot: does this edge carry the active world?
    tagged: Vec<Vec<bool>>,
    /// Per node: does it feed the outcome through an active edge?
    to_y_active: Vec<bool>,
    a_idx: usize,
    y_idx: usize,
}

impl NestedPlan<'_> {
    /// Evaluates the active and base worlds for one noise row.
    ///
    /// The base world intervenes `a_base` on the sensitive node everywhere.
    /// In the active world the sensitive node takes `a_active`, but a node
    /// reads its parent's active value only across edges on an active path;
    /// every other edge reads the base world.
    fn worlds_into(
        &self,
        noise_row: &[f64],
        a_active: f64,
        a_base: f64,
        act: &mut [f64],
        base: &mut [f64],
    ) {
        let scm = self.scm;
        let mut buf: Vec<f64> = Vec::new();
        for &v in &scm.topo {
            if v == self.a_idx {
                act[v] = a_active;
                base[v] = a_base;
                continue;
            }
            buf.clear();
            buf.extend(scm.parent_idx[v].iter().map(|&p| base[p]));
            base[v] = scm.mechs[v].eval(&buf, noise_row[v]);
            buf.clear();
            buf.extend(
                scm.parent_idx[v]
                    .iter()
                    .zip(&self.tagged[v])
                    .map(|(&p, &on)| if on { act[p] } else { base[p] }),
            );
            act[v] = scm.mechs[v].eval(&buf, noise_row[v]);
        }
    }

    /// Builds the nested counterfactual record for record `i` of `dataset`:
    /// each node takes its active-world value if it feeds the outcome through
    /// an active edge, its base-world value otherwise; the outcome slot
    /// carries the nested outcome itself.
    pub fn nested_row(
        &self,
        dataset: &Dataset,
        i: usize,
        a_active: f64,
        a_base: f64,
    ) -> Result<Vec<f64>> {
        let scm = self.scm;
        let map = scm.noise_index(dataset)?;
        if i >= dataset.len() {
            return Err(Error::Validation(format!(
                "record index {i} out of range for {} records",
                dataset.len()
            )));
        }
        let block = dataset.noise.as_ref().expect("checked by noise_index");
        let k = scm.graph.len();
        let mut noise_row = vec![0.0; k];
        for (v, dst) in noise_row.iter_mut().enumerate() {
            *dst = block.values[map[v]][i];
        }
        let mut act = vec![0.0; k];
        let mut base = vec![0.0; k];
        self.worlds_into(&noise_row, a_active, a_base, &mut act, &mut base);
        let mut record = vec![0.0; k];
        for v in 0..k {
            record[v] = if self.to_y_active[v] { act[v] } else { base[v] };
        }
        record[self.y_idx] = act[self.y_idx];
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::generators::*;
    use super::*;
    use crate::graph::{Node, Path};
    use crate::stats;

    fn paths(specs: &[&str]) -> PathSet {
        specs.iter().map(|s| Path::parse(s).unwrap()).collect()
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let scm = fig1a_quadratic(&QuadraticParams::default());
        let a = scm.sample_dataset(500, 7);
        let b = scm.sample_dataset(500, 7);
        assert_eq!(a, b);
        let c = scm.sample_dataset(500, 8);
        assert_ne!(a.columns, c.columns);
    }

    #[test]
    fn empty_intervention_reproduces_records_exactly() {
        let scm = fig1a_quadratic(&QuadraticParams::default());
        let ds = scm.sample_dataset(200, 11);
        let no_do = BTreeMap::new();
        for i in 0..ds.len() {
            assert_eq!(scm.counterfactual_row(&ds, i, &no_do).unwrap(), ds.row(i));
        }
    }

    #[test]
    fn counterfactual_needs_retained_noise() {
        let scm = fig1a_quadratic(&QuadraticParams::default());
        let mut ds = scm.sample_dataset(10, 3);
        ds.noise = None;
        let err = scm
            .counterfactual_row(&ds, 0, &BTreeMap::new())
            .unwrap_err();
        assert!(err.to_string().contains("noise"), "got: {err}");
    }

    #[test]
    fn intervention_fixes_column_and_leaves_upstream_untouched() {
        let scm = fig1c_linear(&Fig1cLinear::default());
        let plain = scm.sample_dataset(4000, 21);
        let dosed = scm
            .intervene_sample(4000, 21, &[("A".to_string(), 1.0)].into())
            .unwrap();
        assert!(dosed.column("A").unwrap().iter().all(|&v| v == 1.0));
        // Same seed: exogenous nodes share their noise, hence their values.
        assert_eq!(plain.column("Z").unwrap(), dosed.column("Z").unwrap());
        assert_eq!(plain.column("B").unwrap(), dosed.column("B").unwrap());
        assert_ne!(plain.column("X").unwrap(), dosed.column("X").unwrap());
        // Different seed: upstream distributions still agree (two-sample KS).
        let other = scm
            .intervene_sample(4000, 99, &[("A".to_string(), 1.0)].into())
            .unwrap();
        for name in ["Z", "B"] {
            let (_, p) = stats::ks_two_sample(plain.column(name).unwrap(), other.column(name).unwrap());
            assert!(p > 0.01, "{name} shifted under intervention: p = {p}");
        }
    }

    #[test]
    fn flipping_sensitive_shifts_covariates_by_closed_form() {
        let scm = fig1a_quadratic(&QuadraticParams::default());
        let ds = scm.sample_dataset(300, 5);
        let a = ds.column("A").unwrap().to_vec();
        let idx_a = ds.column_index("A").unwrap();
        let idx_x1 = ds.column_index("X1").unwrap();
        let idx_x2 = ds.column_index("X2").unwrap();
        let idx_x3 = ds.column_index("X3").unwrap();
        let idx_z = ds.column_index("Z").unwrap();
        for i in 0..ds.len() {
            let flipped = 1.0 - a[i];
            let cf = scm
                .counterfactual_row(&ds, i, &[("A".to_string(), flipped)].into())
                .unwrap();
            let row = ds.row(i);
            let sign = flipped - a[i]; // +1 when flipping 0 -> 1
            assert_eq!(cf[idx_a], flipped);
            // X1 mean is -(shift + A), X3 mean is +(shift + A); the noise term
            // depends only on Z, so the flip moves them by exactly -+1.
            assert!((cf[idx_x1] - (row[idx_x1] - sign)).abs() < 1e-12);
            assert!((cf[idx_x3] - (row[idx_x3] + sign)).abs() < 1e-12);
            // X2 has no sensitive parent: bit-identical under the flip.
            assert_eq!(cf[idx_x2], row[idx_x2]);
            assert_eq!(cf[idx_z], row[idx_z]);
        }
    }

    /// Independent re-implementation of the quadratic benchmark, written
    /// directly from the distribution formulas with its own noise streams.
    fn quadratic_oracle_sample(p: &QuadraticParams, n: usize, seed: u64) -> Vec<[f64; 6]> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "oracle/quadratic");
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let a = if rng.gen::<f64>() < p.p_a { 1.0 } else { 0.0 };
            let z: f64 = p.z_mean + p.z_sd * rng.sample::<f64, _>(StandardNormal);
            let sd = (p.sd_base + p.sd_slope * z).max(p.sd_floor);
            let x1 = -(p.x_shift + a) + sd * rng.sample::<f64, _>(StandardNormal);
            let x2 = z + sd * rng.sample::<f64, _>(StandardNormal);
            let x3 = (p.x_shift + a) + sd * rng.sample::<f64, _>(StandardNormal);
            let logit = p.y_intercept
                + p.y_sensitive * a
                + p.y_quadratic * (x1 * x1 + x2 * x2 + x3 * x3)
                + p.y_latent * z;
            let y = if rng.gen::<f64>() < 1.0 / (1.0 + (-logit).exp()) {
                1.0
            } else {
                0.0
            };
            out.push([a, z, x1, x2, x3, y]);
        }
        out
    }

    fn group_mean(rows: &[[f64; 6]], col: usize, a: f64) -> (f64, f64) {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == a)
            .map(|r| r[col])
            .collect();
        (stats::mean(&vals), stats::std_err(&vals))
    }

    #[test]
    fn quadratic_benchmark_matches_independent_sampler() {
        let p = QuadraticParams::default();
        let scm = fig1a_quadratic(&p);
        let ds = scm.sample_dataset(100_000, 31);
        let scm_rows: Vec<[f64; 6]> = (0..ds.len())
            .map(|i| {
                [
                    ds.column("A").unwrap()[i],
                    ds.column("Z").unwrap()[i],
                    ds.column("X1").unwrap()[i],
                    ds.column("X2").unwrap()[i],
                    ds.column("X3").unwrap()[i],
                    ds.column("Y").unwrap()[i],
                ]
            })
            .collect();
        let oracle = quadratic_oracle_sample(&p, 100_000, 77);

        // Group-conditional means of every variable agree between the two
        // samplers within 4 combined standard errors.
        for col in 1..6 {
            for a in [0.0, 1.0] {
                let (m1, s1) = group_mean(&scm_rows, col, a);
                let (m2, s2) = group_mean(&oracle, col, a);
                let tol = 4.0 * (s1 * s1 + s2 * s2).sqrt();
                assert!(
                    (m1 - m2).abs() <= tol,
                    "col {col} a={a}: {m1} vs {m2} (tol {tol})"
                );
            }
        }

        // Also pin the covariate means to their closed forms.
        let (m_x1_0, se_x1_0) = group_mean(&scm_rows, 2, 0.0);
        let (m_x1_1, se_x1_1) = group_mean(&scm_rows, 2, 1.0);
        let (m_x3_1, se_x3_1) = group_mean(&scm_rows, 4, 1.0);
        assert!((m_x1_0 - (-p.x_shift)).abs() < 4.0 * se_x1_0);
        assert!((m_x1_1 - (-p.x_shift - 1.0)).abs() < 4.0 * se_x1_1);
        assert!((m_x3_1 - (p.x_shift + 1.0)).abs() < 4.0 * se_x3_1);

        // The outcome nearly encodes the sensitive attribute: high agreement,
        // with a low positive rate for A=0 and a high one for A=1.
        let (p_y_a0, _) = group_mean(&scm_rows, 5, 0.0);
        let (p_y_a1, _) = group_mean(&scm_rows, 5, 1.0);
        assert!((0.06..=0.18).contains(&p_y_a0), "P(Y=1|A=0) = {p_y_a0}");
        assert!((0.80..=0.94).contains(&p_y_a1), "P(Y=1|A=1) = {p_y_a1}");
        assert!(p_y_a1 - p_y_a0 > 0.65, "outcome should track the group");
        let agree = scm_rows.iter().filter(|r| r[0] == r[5]).count() as f64
            / scm_rows.len() as f64;
        assert!((0.82..=0.93).contains(&agree), "agreement = {agree}");
    }

    #[test]
    fn pse_of_empty_path_set_is_exactly_zero() {
        let scm = fig1c_linear(&Fig1cLinear::default());
        let est = scm.pse(&PathSet::new(), 1.0, 0.0, 2000, 13).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn pse_matches_edge_coefficient_products_in_linear_model() {
        let c = Fig1cLinear::default();
        let scm = fig1c_linear(&c);
        let n = 20_000;
        let direct = scm.pse(&paths(&["A>Y"]), 1.0, 0.0, n, 41).unwrap();
        assert!((direct.value - c.y_a).abs() < 1e-9, "direct: {}", direct.value);
        assert!(direct.stderr < 1e-9);

        let resolving = scm.pse(&paths(&["A>R>Y"]), 1.0, 0.0, n, 41).unwrap();
        assert!((resolving.value - c.r_a * c.y_r).abs() < 1e-9);

        // The two covariate-mediated paths are only identifiable together.
        let through_x = scm
            .pse(&paths(&["A>X>Y", "A>X>R>Y"]), 1.0, 0.0, n, 41)
            .unwrap();
        let closed = c.x_a * c.y_x + c.x_a * c.r_x * c.y_r;
        assert!((through_x.value - closed).abs() < 1e-9);

        // Flipping active/base negates the effect in a linear model.
        let reversed = scm.pse(&paths(&["A>Y"]), 0.0, 1.0, n, 41).unwrap();
        assert!((reversed.value + c.y_a).abs() < 1e-9);
    }

    #[test]
    fn disjoint_path_sets_decompose_the_total_effect() {
        let scm = fig1c_linear(&Fig1cLinear::default());
        let n = 10_000;
        let seed = 53;
        let parts = [
            paths(&["A>Y"]),
            paths(&["A>R>Y"]),
            paths(&["A>X>Y", "A>X>R>Y"]),
        ];
        let total_set = paths(&["A>Y", "A>R>Y", "A>X>Y", "A>X>R>Y"]);
        let sum: f64 = parts
            .iter()
            .map(|pi| scm.pse(pi, 1.0, 0.0, n, seed).unwrap().value)
            .sum();
        let total = scm.pse(&total_set, 1.0, 0.0, n, seed).unwrap().value;
        assert!((sum - total).abs() < 1e-9, "sum {sum} vs total {total}");
    }

    #[test]
    fn pse_chain_closed_form() {
        let scm = chain_linear(1.2, 0.7, 0.4);
        let through_x = scm.pse(&paths(&["A>X>Y"]), 1.0, 0.0, 5000, 3).unwrap();
        assert!((through_x.value - 1.2 * 0.7).abs() < 1e-9);
        let direct = scm.pse(&paths(&["A>Y"]), 1.0, 0.0, 5000, 3).unwrap();
        assert!((direct.value - 0.4).abs() < 1e-9);
    }

    #[test]
    fn pse_rejects_recanting_witness_path_sets() {
        let scm = fig1c_linear(&Fig1cLinear::default());
        let err = scm
            .pse(&paths(&["A>X>Y"]), 1.0, 0.0, 100, 1)
            .unwrap_err();
        match err {
            Error::NonIdentifiable { witness } => assert_eq!(witness, "X"),
            other => panic!("expected NonIdentifiable, got {other}"),
        }
    }

    #[test]
    fn pse_standard_error_shrinks_like_inverse_sqrt_n() {
        // Binary outcome: per-record nested differences are genuinely noisy.
        let scm = fig1a_quadratic(&QuadraticParams::default());
        let pi = paths(&["A>Y"]);
        let small = scm.pse(&pi, 1.0, 0.0, 2_500, 17).unwrap();
        let large = scm.pse(&pi, 1.0, 0.0, 40_000, 19).unwrap();
        assert!(small.stderr > 0.0 && large.stderr > 0.0);
        let ratio = small.stderr / large.stderr;
        // 16x the records should shrink the error ~4x.
        assert!((2.8..=5.7).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn nested_row_with_empty_set_is_the_factual_record() {
        let scm = fig1c_binary(&Fig1cBinary::default());
        let ds = scm.sample_dataset(50, 23);
        let plan = scm.nested_plan(&PathSet::new()).unwrap();
        let a = ds.column("A").unwrap().to_vec();
        for i in 0..ds.len() {
            let rec = plan.nested_row(&ds, i, 1.0 - a[i], a[i]).unwrap();
            assert_eq!(rec, ds.row(i), "record {i}");
        }
    }

    #[test]
    fn nested_row_with_all_paths_is_the_full_counterfactual() {
        let scm = fig1c_binary(&Fig1cBinary::default());
        let ds = scm.sample_dataset(50, 29);
        let all = paths(&["A>Y", "A>R>Y", "A>X>Y", "A>X>R>Y"]);
        let plan = scm.nested_plan(&all).unwrap();
        let a = ds.column("A").unwrap().to_vec();
        for i in 0..ds.len() {
            let flipped = 1.0 - a[i];
            let nested = plan.nested_row(&ds, i, flipped, a[i]).unwrap();
            let cf = scm
                .counterfactual_row(&ds, i, &[("A".to_string(), flipped)].into())
                .unwrap();
            assert_eq!(nested, cf, "record {i}");
        }
    }

    #[test]
    fn treatment_outcome_is_bimodal_and_collapses_without_effect() {
        let scm = fig2_scm(&Fig2Config::default()).unwrap();
        let ds = scm.sample_dataset(4000, 37);
        let y = ds.column("Y").unwrap();
        assert!(stats::dip_p_value(y, 200, 101) < 0.01, "default config not bimodal");

        let null = fig2_scm(&Fig2Config::zero_effect()).unwrap();
        let ds0 = null.sample_dataset(4000, 37);
        assert!(
            stats::dip_p_value(ds0.column("Y").unwrap(), 200, 101) > 0.10,
            "zero-effect config should be unimodal"
        );
    }

    #[test]
    fn flipping_treatment_moves_records_across_modes() {
        let scm = fig2_scm(&Fig2Config::default()).unwrap();
        let ds = scm.sample_dataset(2000, 43);
        let y = ds.column("Y").unwrap().to_vec();
        let t = ds.column("T").unwrap().to_vec();
        let y_idx = ds.column_index("Y").unwrap();
        // Modes sit near 0 and 4; split them at the midpoint.
        let threshold = 2.0;
        let mut flips = 0usize;
        for i in 0..ds.len() {
            let cf = scm
                .counterfactual_row(&ds, i, &[("T".to_string(), 1.0 - t[i])].into())
                .unwrap();
            if (y[i] < threshold) != (cf[y_idx] < threshold) {
                flips += 1;
            }
        }
        let frac = flips as f64 / ds.len() as f64;
        assert!(frac >= 0.9, "only {frac} of records changed mode");
    }

    #[test]
    fn mechanism_coefficients_must_name_parents() {
        // A real node that is not a parent of X.
        let mut cfg = Fig2Config::default();
        cfg.x.coeffs.insert("T".into(), 1.0);
        let err = fig2_scm(&cfg).unwrap_err();
        assert!(err.to_string().contains("not a parent"), "got: {err}");

        // A name that is no node at all.
        let mut cfg = Fig2Config::default();
        cfg.y.coeffs.insert("Q".into(), 1.0);
        assert!(fig2_scm(&cfg).is_err());
    }

    #[test]
    fn mechanism_kind_must_match_declared_distribution() {
        let graph = CausalGraph::new(
            vec![
                Node {
                    name: "A".into(),
                    role: Role::Sensitive,
                    observed: true,
                },
                Node {
                    name: "Y".into(),
                    role: Role::Outcome,
                    observed: true,
                },
            ],
            &[("A", "Y")],
        )
        .unwrap();
        let mechs: BTreeMap<String, Mechanism> = [
            ("A".to_string(), Mechanism::BernoulliConst { p: 0.5 }),
            ("Y".to_string(), Mechanism::linear(0.0, &[("A", 1.0)], 1.0)),
        ]
        .into();
        let kinds: BTreeMap<String, DistKind> = [
            ("A".to_string(), DistKind::Binary),
            ("Y".to_string(), DistKind::Binary), // linear output declared binary
        ]
        .into();
        let err = Scm::new(graph, mechs, kinds).unwrap_err();
        assert!(err.to_string().contains("does not match"), "got: {err}");
    }

    #[test]
    fn builtin_generator_lookup() {
        for name in [
            "appendix",
            "fig1c-synthetic",
            "fig1c-linear",
            "fig2-default",
            "fig2-null",
        ] {
            assert!(builtin(name).is_ok(), "missing builtin '{name}'");
        }
        assert!(builtin("nope").is_err());
    }
}
