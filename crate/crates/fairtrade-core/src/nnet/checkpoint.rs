//! Network checkpoints: versioned JSON with spec, named layout, and the
//! flat value array. Layout rows are emitted in lexicographic layer-name
//! order (the same order offsets are assigned), so save → load → save is
//! byte-identical.

use serde::{Deserialize, Serialize};

use super::{Mlp, ParamStore};
use crate::error::{Error, Result};
use crate::nnet::MlpSpec;

const VERSION: u32 = 1;

/// Serialized form of one network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub version: u32,
    pub spec: MlpSpec,
    /// `(name, offset, rows, cols)` in name order.
    pub layout: Vec<(String, usize, usize, usize)>,
    pub values: Vec<f64>,
}

impl MlpCheckpoint {
    /// Snapshot a network's parameters.
    pub fn capture(mlp: &Mlp, params: &ParamStore) -> MlpCheckpoint {
        MlpCheckpoint {
            version: VERSION,
            spec: mlp.spec().clone(),
            layout: mlp
                .layout()
                .iter()
                .map(|(n, e)| (n.to_string(), e.offset, e.rows, e.cols))
                .collect(),
            values: params.values.clone(),
        }
    }

    /// Rebuild the network and its parameters, validating version, layout,
    /// and value count — a mismatch errors rather than truncating.
    pub fn restore(&self) -> Result<(Mlp, ParamStore)> {
        if self.version != VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {} (expected {VERSION})",
                self.version
            )));
        }
        let mlp = Mlp::new(self.spec.clone())?;
        let derived: Vec<(String, usize, usize, usize)> = mlp
            .layout()
            .iter()
            .map(|(n, e)| (n.to_string(), e.offset, e.rows, e.cols))
            .collect();
        if derived != self.layout {
            return Err(Error::Validation(
                "checkpoint layout does not match the spec-derived layout".into(),
            ));
        }
        if self.values.len() != mlp.param_count() {
            return Err(Error::Validation(format!(
                "checkpoint holds {} values, spec needs {}",
                self.values.len(),
                mlp.param_count()
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("checkpoint contains non-finite value {bad}")));
        }
        let mut params = mlp.zero_params();
        params.values.copy_from_slice(&self.values);
        Ok((mlp, params))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<MlpCheckpoint> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, HeadSpec, MlpSpec};

    fn sample() -> (Mlp, ParamStore) {
        let mlp = Mlp::new(MlpSpec {
            input_dim: 3,
            hidden: vec![4],
            activation: Activation::Elu,
            heads: vec![HeadSpec::gaussian(2), HeadSpec::bernoulli(1)],
        })
        .unwrap();
        let params = mlp.init_params(&mut crate::rng::stream(41, "ckpt"));
        (mlp, params)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (mlp, params) = sample();
        let json = MlpCheckpoint::capture(&mlp, &params).to_json().unwrap();
        let loaded = MlpCheckpoint::from_json(&json).unwrap();
        let (mlp2, params2) = loaded.restore().unwrap();
        let json2 = MlpCheckpoint::capture(&mlp2, &params2).to_json().unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (mlp, params) = sample();
        let mut ckpt = MlpCheckpoint::capture(&mlp, &params);
        ckpt.values.pop();
        assert!(matches!(ckpt.restore(), Err(Error::Validation(_))));

        let mut ckpt2 = MlpCheckpoint::capture(&mlp, &params);
        ckpt2.spec.hidden = vec![5];
        assert!(ckpt2.restore().is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let (mlp, params) = sample();
        let mut ckpt = MlpCheckpoint::capture(&mlp, &params);
        ckpt.version = 99;
        assert!(matches!(ckpt.restore(), Err(Error::Validation(_))));
    }
}
