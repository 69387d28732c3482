//! Ready-made synthetic generators used by the CLI, the test suite, and the
//! evaluation pipeline.
//!
//! Each generator returns a fully specified [`Scm`]; parameters come in a
//! struct with sensible defaults so individual values can be overridden.

use std::collections::BTreeMap;

use crate::data::DistKind;
use crate::error::Result;
use crate::graph::{self, CausalGraph, Node, Role};

use super::{Mechanism, NoiseKind, Scm};

/// Parameters of the quadratic-outcome benchmark ([`fig1a_quadratic`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticParams {
    /// Lower bound on the covariate noise scale.
    pub sd_floor: f64,
    /// Intercept of the covariate noise scale in `Z`.
    pub sd_base: f64,
    /// Slope of the covariate noise scale in `Z`.
    pub sd_slope: f64,
    /// `P(A = 1)`.
    pub p_a: f64,
    /// Mean of the latent confounder.
    pub z_mean: f64,
    /// Standard deviation of the latent confounder.
    pub z_sd: f64,
    /// Magnitude of the group-dependent covariate shift.
    pub x_shift: f64,
    /// Outcome logit intercept.
    pub y_intercept: f64,
    /// Outcome logit weight on `A`.
    pub y_sensitive: f64,
    /// Outcome logit weight on the summed squared covariates.
    pub y_quadratic: f64,
    /// Outcome logit weight on `Z`.
    pub y_latent: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams {
            sd_floor: 0.1,
            sd_base: 0.55,
            sd_slope: 0.2,
            p_a: 0.5,
            z_mean: 0.0,
            z_sd: 1.0,
            x_shift: 1.5,
            y_intercept: -8.5,
            y_sensitive: 3.0,
            y_quadratic: 2.0 / 3.0,
            y_latent: 2.0,
        }
    }
}

fn node(name: &str, role: Role) -> Node {
    Node {
        name: name.to_string(),
        role,
        observed: role != Role::Latent,
    }
}

/// Latent-confounder benchmark with three covariates and a quadratic outcome
/// logit.
///
/// * `A ~ Bernoulli(p_a)`, `Z ~ N(z_mean, z_sd²)`.
/// * All three covariates share the heteroscedastic scale
///   `s(Z) = max(sd_floor, sd_base + sd_slope·Z)`:
///   `X1 ~ N(-(x_shift + A), s²)`, `X2 ~ N(Z, s²)` (no `A` parent),
///   `X3 ~ N(x_shift + A, s²)`.
/// * `Y ~ Bernoulli(σ(y_intercept + y_sensitive·A
///   + y_quadratic·(X1² + X2² + X3²) + y_latent·Z))`.
///
/// The two covariate clusters sit at `±(x_shift + A)`, so the squared sum —
/// and with it the outcome rate — is strongly group-dependent: the outcome
/// nearly encodes the sensitive attribute.
pub fn fig1a_quadratic(p: &QuadraticParams) -> Scm {
    let graph = CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("Z", Role::Latent),
            node("X1", Role::Covariate),
            node("X2", Role::Covariate),
            node("X3", Role::Covariate),
            node("Y", Role::Outcome),
        ],
        &[
            ("A", "X1"),
            ("A", "X3"),
            ("A", "Y"),
            ("Z", "X1"),
            ("Z", "X2"),
            ("Z", "X3"),
            ("Z", "Y"),
            ("X1", "Y"),
            ("X2", "Y"),
            ("X3", "Y"),
        ],
    )
    .expect("generator graph is valid");

    let q = *p;
    let scale = move |z: f64| (q.sd_base + q.sd_slope * z).max(q.sd_floor);

    let mut mechs: BTreeMap<String, Mechanism> = BTreeMap::new();
    mechs.insert("A".into(), Mechanism::BernoulliConst { p: q.p_a });
    mechs.insert("Z".into(), Mechanism::linear(q.z_mean, &[], q.z_sd));
    // Parent order is sorted by name: X1/X3 see [A, Z], X2 sees [Z].
    mechs.insert(
        "X1".into(),
        Mechanism::formula(NoiseKind::StdNormal, move |ps, u| {
            -(q.x_shift + ps[0]) + scale(ps[1]) * u
        }),
    );
    mechs.insert(
        "X2".into(),
        Mechanism::formula(NoiseKind::StdNormal, move |ps, u| {
            ps[0] + scale(ps[0]) * u
        }),
    );
    mechs.insert(
        "X3".into(),
        Mechanism::formula(NoiseKind::StdNormal, move |ps, u| {
            (q.x_shift + ps[0]) + scale(ps[1]) * u
        }),
    );
    // Y sees [A, X1, X2, X3, Z].
    mechs.insert(
        "Y".into(),
        Mechanism::formula(NoiseKind::Uniform01, move |ps, u| {
            let logit = q.y_intercept
                + q.y_sensitive * ps[0]
                + q.y_quadratic * (ps[1] * ps[1] + ps[2] * ps[2] + ps[3] * ps[3])
                + q.y_latent * ps[4];
            let p1 = 1.0 / (1.0 + (-logit).exp());
            if u < p1 {
                1.0
            } else {
                0.0
            }
        }),
    );

    let mut kinds: BTreeMap<String, DistKind> = BTreeMap::new();
    for name in ["X1", "X2", "X3", "Z"] {
        kinds.insert(name.into(), DistKind::Continuous);
    }
    kinds.insert("A".into(), DistKind::Binary);
    kinds.insert("Y".into(), DistKind::Binary);

    Scm::new(graph, mechs, kinds).expect("generator mechanisms are valid")
}

/// Coefficients of the all-linear model over the full six-node structure
/// ([`fig1c_linear`]). Field `x_a` is the weight of `A` in `X`'s mechanism,
/// and so on; `*_sd` are noise scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1cLinear {
    pub x_a: f64,
    pub x_b: f64,
    pub x_z: f64,
    pub x_sd: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub r_x: f64,
    pub r_z: f64,
    pub r_sd: f64,
    pub y_a: f64,
    pub y_b: f64,
    pub y_r: f64,
    pub y_x: f64,
    pub y_z: f64,
    pub y_sd: f64,
}

impl Default for Fig1cLinear {
    fn default() -> Self {
        Fig1cLinear {
            x_a: 1.0,
            x_b: 0.5,
            x_z: 0.8,
            x_sd: 1.0,
            r_a: 0.7,
            r_b: 0.4,
            r_x: 0.6,
            r_z: 0.5,
            r_sd: 0.8,
            y_a: 0.9,
            y_b: 0.3,
            y_r: 0.8,
            y_x: 0.5,
            y_z: 0.6,
            y_sd: 1.0,
        }
    }
}

/// All-linear model over the six-node graph with a resolving variable
/// (continuous outcome). Path-specific effects have closed forms: the effect
/// of an active path set is the sum over its paths of the products of edge
/// coefficients, which makes this the reference model for effect-estimation
/// checks.
pub fn fig1c_linear(c: &Fig1cLinear) -> Scm {
    let graph = graph::fig1c();
    let mut mechs: BTreeMap<String, Mechanism> = BTreeMap::new();
    mechs.insert("A".into(), Mechanism::BernoulliConst { p: 0.5 });
    mechs.insert("Z".into(), Mechanism::linear(0.0, &[], 1.0));
    mechs.insert("B".into(), Mechanism::linear(0.0, &[], 1.0));
    mechs.insert(
        "X".into(),
        Mechanism::linear(0.0, &[("A", c.x_a), ("B", c.x_b), ("Z", c.x_z)], c.x_sd),
    );
    mechs.insert(
        "R".into(),
        Mechanism::linear(
            0.0,
            &[("A", c.r_a), ("B", c.r_b), ("X", c.r_x), ("Z", c.r_z)],
            c.r_sd,
        ),
    );
    mechs.insert(
        "Y".into(),
        Mechanism::linear(
            0.0,
            &[
                ("A", c.y_a),
                ("B", c.y_b),
                ("R", c.y_r),
                ("X", c.y_x),
                ("Z", c.y_z),
            ],
            c.y_sd,
        ),
    );

    let mut kinds: BTreeMap<String, DistKind> = BTreeMap::new();
    kinds.insert("A".into(), DistKind::Binary);
    for name in ["Z", "B", "X", "R", "Y"] {
        kinds.insert(name.into(), DistKind::Continuous);
    }

    Scm::new(graph, mechs, kinds).expect("generator mechanisms are valid")
}

/// Parameters of the binary-outcome model over the six-node structure
/// ([`fig1c_binary`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1cBinary {
    pub x_a: f64,
    pub x_b: f64,
    pub x_z: f64,
    pub x_sd: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub r_x: f64,
    pub r_z: f64,
    pub r_sd: f64,
    /// Outcome logit intercept and weights.
    pub y_intercept: f64,
    pub y_a: f64,
    pub y_b: f64,
    pub y_r: f64,
    pub y_x: f64,
    pub y_z: f64,
}

impl Default for Fig1cBinary {
    fn default() -> Self {
        Fig1cBinary {
            x_a: 1.0,
            x_b: 0.5,
            x_z: 0.7,
            x_sd: 0.8,
            r_a: 0.8,
            r_b: 0.5,
            r_x: 0.6,
            r_z: 0.5,
            r_sd: 0.8,
            y_intercept: 0.0,
            y_a: 1.5,
            y_b: 1.0,
            y_r: 1.0,
            y_x: 0.8,
            y_z: 1.2,
        }
    }
}

/// Binary-outcome model over the six-node graph with a resolving variable:
/// `X` and `R` are linear-Gaussian, `Y` is a logistic threshold. Every input
/// carries independent signal for `Y`, so predictor accuracy grows as inputs
/// are added — the testbed for input-selection sweeps.
pub fn fig1c_binary(c: &Fig1cBinary) -> Scm {
    let graph = graph::fig1c();
    let mut mechs: BTreeMap<String, Mechanism> = BTreeMap::new();
    mechs.insert("A".into(), Mechanism::BernoulliConst { p: 0.5 });
    mechs.insert("Z".into(), Mechanism::linear(0.0, &[], 1.0));
    mechs.insert("B".into(), Mechanism::linear(0.0, &[], 1.0));
    mechs.insert(
        "X".into(),
        Mechanism::linear(0.0, &[("A", c.x_a), ("B", c.x_b), ("Z", c.x_z)], c.x_sd),
    );
    mechs.insert(
        "R".into(),
        Mechanism::linear(
            0.0,
            &[("A", c.r_a), ("B", c.r_b), ("X", c.r_x), ("Z", c.r_z)],
            c.r_sd,
        ),
    );
    mechs.insert(
        "Y".into(),
        Mechanism::logistic(
            c.y_intercept,
            &[
                ("A", c.y_a),
                ("B", c.y_b),
                ("R", c.y_r),
                ("X", c.y_x),
                ("Z", c.y_z),
            ],
        ),
    );

    let mut kinds: BTreeMap<String, DistKind> = BTreeMap::new();
    kinds.insert("A".into(), DistKind::Binary);
    kinds.insert("Y".into(), DistKind::Binary);
    for name in ["Z", "B", "X", "R"] {
        kinds.insert(name.into(), DistKind::Continuous);
    }

    Scm::new(graph, mechs, kinds).expect("generator mechanisms are valid")
}

/// Linear mechanism specification for the configurable treatment generator:
/// coefficients are keyed by parent name and validated against the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    pub intercept: f64,
    pub coeffs: BTreeMap<String, f64>,
    pub noise_scale: f64,
}

impl LinearSpec {
    pub fn new(intercept: f64, coeffs: &[(&str, f64)], noise_scale: f64) -> LinearSpec {
        LinearSpec {
            intercept,
            coeffs: coeffs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            noise_scale,
        }
    }
}

/// Logistic-threshold specification for the configurable treatment generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSpec {
    pub intercept: f64,
    pub coeffs: BTreeMap<String, f64>,
}

impl LogisticSpec {
    pub fn new(intercept: f64, coeffs: &[(&str, f64)]) -> LogisticSpec {
        LogisticSpec {
            intercept,
            coeffs: coeffs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Configuration of the treatment-effect generator ([`fig2_scm`]).
///
/// Coefficient keys must name parents in the treatment graph; unknown keys
/// are rejected when the model is built.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Config {
    /// `P(A = 1)`.
    pub p_a: f64,
    /// Mechanism for the covariate `X` (parents `A`, `Z`).
    pub x: LinearSpec,
    /// Mechanism for the treatment `T` (parents `A`, `Z`).
    pub t: LogisticSpec,
    /// Mechanism for the outcome `Y` (parents `A`, `T`, `X`, `Z`). The weight
    /// on `T` is the treatment effect; with the default separation the
    /// outcome is clearly bimodal.
    pub y: LinearSpec,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            p_a: 0.5,
            x: LinearSpec::new(0.0, &[("A", 0.8), ("Z", 0.6)], 1.0),
            t: LogisticSpec::new(0.0, &[("A", 0.4), ("Z", 0.8)]),
            y: LinearSpec::new(
                0.0,
                &[("A", 0.3), ("T", 4.0), ("X", 0.3), ("Z", 0.5)],
                0.5,
            ),
        }
    }
}

impl Fig2Config {
    /// The default configuration with the treatment effect removed; the
    /// outcome collapses to a single mode.
    pub fn zero_effect() -> Fig2Config {
        let mut cfg = Fig2Config::default();
        cfg.y.coeffs.insert("T".into(), 0.0);
        cfg
    }
}

/// Configurable semi-synthetic model over the treatment graph
/// (`A`, `Z`, `X`, `T`, `Y`): Gaussian covariate, logistic treatment
/// assignment confounded by `A` and `Z`, and a linear outcome whose weight on
/// `T` is the treatment effect. Fails if a coefficient references a
/// non-parent.
pub fn fig2_scm(cfg: &Fig2Config) -> Result<Scm> {
    let graph = graph::fig2();
    let mut mechs: BTreeMap<String, Mechanism> = BTreeMap::new();
    mechs.insert("A".into(), Mechanism::BernoulliConst { p: cfg.p_a });
    mechs.insert("Z".into(), Mechanism::linear(0.0, &[], 1.0));
    mechs.insert(
        "X".into(),
        Mechanism::Linear {
            intercept: cfg.x.intercept,
            coeffs: cfg.x.coeffs.clone(),
            noise_scale: cfg.x.noise_scale,
        },
    );
    mechs.insert(
        "T".into(),
        Mechanism::Logistic {
            intercept: cfg.t.intercept,
            coeffs: cfg.t.coeffs.clone(),
        },
    );
    mechs.insert(
        "Y".into(),
        Mechanism::Linear {
            intercept: cfg.y.intercept,
            coeffs: cfg.y.coeffs.clone(),
            noise_scale: cfg.y.noise_scale,
        },
    );

    let mut kinds: BTreeMap<String, DistKind> = BTreeMap::new();
    kinds.insert("A".into(), DistKind::Binary);
    kinds.insert("T".into(), DistKind::Binary);
    for name in ["Z", "X", "Y"] {
        kinds.insert(name.into(), DistKind::Continuous);
    }

    Scm::new(graph, mechs, kinds)
}

/// Three-node chain `A -> X -> Y` with a direct edge `A -> Y`:
/// `X = alpha·A + N(0,1)`, `Y = beta·X + gamma·A + N(0,1)`. The effect along
/// `A>X>Y` is `alpha·beta` and along `A>Y` is `gamma`.
pub fn chain_linear(alpha: f64, beta: f64, gamma: f64) -> Scm {
    let graph = CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("X", Role::Covariate),
            node("Y", Role::Outcome),
        ],
        &[("A", "X"), ("A", "Y"), ("X", "Y")],
    )
    .expect("generator graph is valid");

    let mut mechs: BTreeMap<String, Mechanism> = BTreeMap::new();
    mechs.insert("A".into(), Mechanism::BernoulliConst { p: 0.5 });
    mechs.insert("X".into(), Mechanism::linear(0.0, &[("A", alpha)], 1.0));
    mechs.insert(
        "Y".into(),
        Mechanism::linear(0.0, &[("A", gamma), ("X", beta)], 1.0),
    );

    let mut kinds: BTreeMap<String, DistKind> = BTreeMap::new();
    kinds.insert("A".into(), DistKind::Binary);
    kinds.insert("X".into(), DistKind::Continuous);
    kinds.insert("Y".into(), DistKind::Continuous);

    Scm::new(graph, mechs, kinds).expect("generator mechanisms are valid")
}

/// Look up a builtin generator by CLI name.
pub fn builtin(name: &str) -> Result<Scm> {
    match name {
        "appendix" => Ok(fig1a_quadratic(&QuadraticParams::default())),
        "fig1c-synthetic" => Ok(fig1c_binary(&Fig1cBinary::default())),
        "fig1c-linear" => Ok(fig1c_linear(&Fig1cLinear::default())),
        "fig2-default" => fig2_scm(&Fig2Config::default()),
        "fig2-null" => fig2_scm(&Fig2Config::zero_effect()),
        other => Err(crate::error::Error::UnknownName(format!(
            "builtin generator '{other}'"
        ))),
    }
}
