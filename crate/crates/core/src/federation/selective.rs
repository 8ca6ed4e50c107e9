use std::cmp::Ordering;

use super::HParam;
use crate::error::{Error, Result};
use crate::nn::WeightVector;

/// The uploaded part of a client model: values of the selected weights at
/// their flat indices. Every other index is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUpdate {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub total_len: usize,
}

impl SparseUpdate {
    pub fn new(indices: Vec<u32>, values: Vec<f64>, total_len: usize) -> Result<Self> {
        let u = Self {
            indices,
            values,
            total_len,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.indices.len(),
                got: self.values.len(),
            });
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Codec("sparse indices must be strictly increasing".into()));
        }
        if let Some(&last) = self.indices.last() {
            if last as usize >= self.total_len {
                return Err(Error::Codec(format!(
                    "index {last} out of range for length {}",
                    self.total_len
                )));
            }
        }
        Ok(())
    }

    /// Dense view with zeros at unselected indices.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.total_len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }
}

/// `ceil(H / 100 * len)`, at least one for non-empty vectors.
pub fn selection_count(h: HParam, len: usize) -> usize {
    if len == 0 {
        return 0;
    }
    // Exact for integral H: h * len is an exact integer below 2^53 and a
    // multiple of 100 divides exactly.
    let raw = (h.percent() * len as f64 / 100.0).ceil() as usize;
    raw.clamp(1, len)
}

/// Selects the `ceil(H% * P)` indices where the client moved furthest from
/// the global model, breaking ties towards the lower index.
pub fn select_top_h(w_client: &WeightVector, w_global: &WeightVector, h: HParam) -> Result<SparseUpdate> {
    if w_client.len() != w_global.len() {
        return Err(Error::LengthMismatch {
            expected: w_global.len(),
            got: w_client.len(),
        });
    }
    let p = w_client.len();
    if u32::try_from(p).is_err() {
        return Err(Error::Codec(format!("{p} weights exceed the u32 index space")));
    }
    let k = selection_count(h, p);
    let diff: Vec<f64> = w_client
        .values
        .iter()
        .zip(&w_global.values)
        .map(|(c, g)| (g - c).abs())
        .collect();
    let mut order: Vec<u32> = (0..p as u32).collect();
    let rank = |a: &u32, b: &u32| -> Ordering {
        diff[*b as usize]
            .total_cmp(&diff[*a as usize])
            .then_with(|| a.cmp(b))
    };
    if k < p {
        order.select_nth_unstable_by(k, rank);
        order.truncate(k);
    }
    order.sort_unstable();
    let values = order.iter().map(|&i| w_client.values[i as usize]).collect();
    Ok(SparseUpdate {
        indices: order,
        values,
        total_len: p,
    })
}

fn check_lengths(gm: &WeightVector, updates: &[SparseUpdate]) -> Result<()> {
    for u in updates {
        if u.total_len != gm.len() {
            return Err(Error::LengthMismatch {
                expected: gm.len(),
                got: u.total_len,
            });
        }
        u.validate()?;
    }
    Ok(())
}

/// Per index: the mean of the global value and every client value uploaded
/// for that index. Indices no client selected keep the global value.
pub fn fedhil_aggregate(gm: &WeightVector, updates: &[SparseUpdate]) -> Result<WeightVector> {
    check_lengths(gm, updates)?;
    let mut sum = vec![0.0; gm.len()];
    let mut count = vec![0u32; gm.len()];
    for u in updates {
        for (&i, &v) in u.indices.iter().zip(&u.values) {
            sum[i as usize] += v;
            count[i as usize] += 1;
        }
    }
    let values = gm
        .values
        .iter()
        .zip(sum.iter().zip(&count))
        .map(|(&g, (&s, &n))| if n == 0 { g } else { (s + g) / f64::from(n + 1) })
        .collect();
    Ok(gm.replaced(values))
}

/// The aggregation formula read literally: the mean of the zero-filled
/// client vectors added onto the global weights. Kept for comparison runs;
/// it inflates selected weights and is not the default.
pub fn fedhil_aggregate_literal(gm: &WeightVector, updates: &[SparseUpdate]) -> Result<WeightVector> {
    check_lengths(gm, updates)?;
    if updates.is_empty() {
        return Ok(gm.clone());
    }
    let mut sum = vec![0.0; gm.len()];
    for u in updates {
        for (&i, &v) in u.indices.iter().zip(&u.values) {
            sum[i as usize] += v;
        }
    }
    let n = updates.len() as f64;
    let values = gm.values.iter().zip(&sum).map(|(g, s)| s / n + g).collect();
    Ok(gm.replaced(values))
}
