//! Three-way data container: N observations, each an n×p matrix.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Label value marking an observation as unlabelled.
pub const UNLABELLED: i32 = -1;

/// N observations of identical shape n×p.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    obs: Vec<DMatrix<f64>>,
    n: usize,
    p: usize,
}

impl DataSet {
    pub fn new(obs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = obs.first().ok_or_else(|| {
            Error::InvalidArgument("a dataset needs at least one observation".to_string())
        })?;
        let (n, p) = first.shape();
        if n == 0 || p == 0 {
            return Err(Error::Shape("observations must be non-empty matrices".to_string()));
        }
        for (i, x) in obs.iter().enumerate() {
            if x.shape() != (n, p) {
                return Err(Error::Shape(format!(
                    "observation {i} is {:?}, expected ({n}, {p})",
                    x.shape()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "observation {i} contains non-finite values"
                )));
            }
        }
        Ok(Self { obs, n, p })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize) -> &DMatrix<f64> {
        &self.obs[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DMatrix<f64>> {
        self.obs.iter()
    }
}

/// Checks a label vector against a dataset: length N, entries in
/// {−1, 0, …, G−1}.
pub fn validate_labels(labels: &[i32], n_obs: usize, n_groups: usize) -> Result<()> {
    if labels.len() != n_obs {
        return Err(Error::Shape(format!(
            "{} labels for {n_obs} observations",
            labels.len()
        )));
    }
    for (i, &l) in labels.iter().enumerate() {
        if l != UNLABELLED && (l < 0 || l as usize >= n_groups) {
            return Err(Error::InvalidArgument(format!(
                "label {l} at observation {i} is outside -1..{}",
                n_groups as i32 - 1
            )));
        }
    }
    Ok(())
}
