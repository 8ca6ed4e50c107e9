//! Aggregation strategies and the client update wire formats.
//!
//! - FedAvg: sample-count weighted mean of client weights.
//! - FedSGD: one global step along the mean client gradient.
//! - Selective top-H: each client uploads only the H% of weights that moved
//!   furthest from the model it received; the server folds each uploaded
//!   value into a per-index mean with the current global value.

mod codec;
mod selective;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::WeightVector;

pub use self::codec::{
    decode_dense, decode_sparse, dense_encoded_len, encode_dense, encode_sparse, simulated_latency_s,
    sparse_encoded_len, DENSE_HEADER_BYTES, INDEX_BYTES, SPARSE_HEADER_BYTES, VALUE_BYTES,
};
pub use self::selective::{fedhil_aggregate, fedhil_aggregate_literal, select_top_h, selection_count, SparseUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorKind {
    #[serde(alias = "fedavg")]
    FedAvg,
    #[serde(alias = "fedsgd")]
    FedSgd,
    #[serde(alias = "fedhil")]
    FedHil,
    /// No federation: the global model stays as pretrained.
    None,
}

impl AggregatorKind {
    pub fn name(self) -> &'static str {
        match self {
            AggregatorKind::FedAvg => "fedavg",
            AggregatorKind::FedSgd => "fedsgd",
            AggregatorKind::FedHil => "fedhil",
            AggregatorKind::None => "none",
        }
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Self::FedAvg),
            "fedsgd" => Ok(Self::FedSgd),
            "fedhil" => Ok(Self::FedHil),
            "none" | "frozen" => Ok(Self::None),
            other => Err(Error::InvalidConfig(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// Percentage of weights a client uploads, in (0, 100].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HParam(f64);

impl HParam {
    pub fn new(h_percent: f64) -> Result<Self> {
        if h_percent > 0.0 && h_percent <= 100.0 {
            Ok(Self(h_percent))
        } else {
            Err(Error::InvalidConfig(format!(
                "H must be in (0, 100], got {h_percent}"
            )))
        }
    }

    pub fn percent(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HParam {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HParam> for f64 {
    fn from(h: HParam) -> f64 {
        h.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdatePayload {
    Weights(WeightVector),
    Gradient(WeightVector),
    Sparse(SparseUpdate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: String,
    /// Number of local samples behind the update.
    pub sample_count: usize,
    pub payload: UpdatePayload,
}

impl ClientUpdate {
    pub fn payload_len(&self) -> usize {
        match &self.payload {
            UpdatePayload::Weights(w) | UpdatePayload::Gradient(w) => w.len(),
            UpdatePayload::Sparse(s) => s.total_len,
        }
    }

    /// Bytes this update occupies on the wire.
    pub fn encoded_len(&self) -> usize {
        match &self.payload {
            UpdatePayload::Weights(w) | UpdatePayload::Gradient(w) => dense_encoded_len(w.len()),
            UpdatePayload::Sparse(s) => sparse_encoded_len(s.indices.len()),
        }
    }
}

/// `W = sum_i (K_i / K) W_i` with `K = sum_i K_i`.
pub fn fedavg_aggregate(updates: &[ClientUpdate]) -> Result<WeightVector> {
    let first = updates.first().ok_or(Error::Empty("client updates"))?;
    let len = first.payload_len();
    let total: usize = updates.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(Error::ZeroSamples);
    }
    let mut out = vec![0.0; len];
    let mut shape = None;
    for u in updates {
        let UpdatePayload::Weights(w) = &u.payload else {
            return Err(Error::InvalidConfig(format!(
                "FedAvg needs full weights, client `{}` sent another payload",
                u.client_id
            )));
        };
        if w.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                got: w.len(),
            });
        }
        let share = u.sample_count as f64 / total as f64;
        for (o, v) in out.iter_mut().zip(&w.values) {
            *o += share * v;
        }
        shape = shape.or_else(|| w.shape.clone());
    }
    Ok(WeightVector { values: out, shape })
}

/// `W = W_T - lr * mean_i(G_i)`.
pub fn fedsgd_aggregate(gm: &WeightVector, gradients: &[WeightVector], learning_rate: f64) -> Result<WeightVector> {
    if gradients.is_empty() {
        return Err(Error::Empty("client gradients"));
    }
    let mut mean = vec![0.0; gm.len()];
    for g in gradients {
        if g.len() != gm.len() {
            return Err(Error::LengthMismatch {
                expected: gm.len(),
                got: g.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(&g.values) {
            *m += v;
        }
    }
    let n = gradients.len() as f64;
    let values = gm
        .values
        .iter()
        .zip(&mean)
        .map(|(w, s)| w - learning_rate * (s / n))
        .collect();
    Ok(gm.replaced(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(id: &str, k: usize, v: Vec<f64>) -> ClientUpdate {
        ClientUpdate {
            client_id: id.into(),
            sample_count: k,
            payload: UpdatePayload::Weights(WeightVector::flat(v)),
        }
    }

    #[test]
    fn fedavg_single_client_verbatim() {
        let w = vec![0.1, -3.5, 7.25];
        let out = fedavg_aggregate(&[weights("a", 9, w.clone())]).unwrap();
        assert_eq!(out.values, w);
    }

    #[test]
    fn fedavg_weighted_mean() {
        let out = fedavg_aggregate(&[weights("a", 1, vec![1.0]), weights("b", 3, vec![5.0])]).unwrap();
        let oracle = (1.0 * 1.0 + 3.0 * 5.0) / 4.0;
        assert!((out.values[0] - oracle).abs() < 1e-12);
        assert_eq!(oracle, 4.0);
    }

    #[test]
    fn fedavg_identical_clients() {
        let w = vec![0.3, 0.7, -0.1];
        let ups: Vec<_> = [1, 5, 17].iter().map(|&k| weights("c", k, w.clone())).collect();
        let out = fedavg_aggregate(&ups).unwrap();
        for (a, b) in out.values.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fedavg_errors() {
        assert!(fedavg_aggregate(&[]).is_err());
        assert!(matches!(
            fedavg_aggregate(&[weights("a", 0, vec![1.0])]),
            Err(Error::ZeroSamples)
        ));
        assert!(matches!(
            fedavg_aggregate(&[weights("a", 1, vec![1.0]), weights("b", 1, vec![1.0, 2.0])]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fedsgd_single_and_cancelling() {
        let gm = WeightVector::flat(vec![1.0, 2.0]);
        let g = WeightVector::flat(vec![0.5, -1.0]);
        let out = fedsgd_aggregate(&gm, &[g.clone()], 0.1).unwrap();
        assert_eq!(out.values, vec![1.0 - 0.1 * 0.5, 2.0 - 0.1 * -1.0]);
        let neg = WeightVector::flat(vec![-0.5, 1.0]);
        assert_eq!(fedsgd_aggregate(&gm, &[g, neg], 0.1).unwrap().values, gm.values);
        assert!(fedsgd_aggregate(&gm, &[WeightVector::flat(vec![1.0])], 0.1).is_err());
        assert!(fedsgd_aggregate(&gm, &[], 0.1).is_err());
    }

    #[test]
    fn hparam_range() {
        assert!(HParam::new(0.0).is_err());
        assert!(HParam::new(100.5).is_err());
        assert!(HParam::new(f64::NAN).is_err());
        assert_eq!(HParam::new(100.0).unwrap().percent(), 100.0);
        let h: HParam = serde_json::from_str("20").unwrap();
        assert_eq!(h.percent(), 20.0);
        assert!(serde_json::from_str::<HParam>("0").is_err());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for k in [AggregatorKind::FedAvg, AggregatorKind::FedSgd, AggregatorKind::FedHil, AggregatorKind::None] {
            assert_eq!(k.name().parse::<AggregatorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }
}
