//! Model selection and evaluation: BIC, ICL, MAP labelling, adjusted Rand
//! index, misclassification rate, and selection over a grid of G.

use crate::data::DataSet;
use crate::ecm::{fit, FitOptions, FitReport};
use crate::error::{Error, Result};
use crate::matvar::DistKind;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::HashMap;
use std::hash::Hash;

/// BIC = 2ℓ − k·log N (higher is better).
pub fn bic(loglik: f64, n_params: usize, n_obs: usize) -> f64 {
    2.0 * loglik - n_params as f64 * (n_obs as f64).ln()
}

/// ICL ≈ BIC + 2·Σ_i log ẑ_{i, MAP(i)}; equals BIC exactly for one-hot z.
pub fn icl(bic: f64, z: &DMatrix<f64>) -> f64 {
    let mut entropy = 0.0;
    for i in 0..z.nrows() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..z.ncols() {
            best = best.max(z[(i, j)]);
        }
        entropy += best.max(1e-300).ln();
    }
    bic + 2.0 * entropy
}

/// Adjusted Rand index between two partitions by pair counting on the
/// contingency table. 1 for identical partitions (up to relabelling),
/// 0 in expectation for independent random partitions.
pub fn ari<A, B>(labels_a: &[A], labels_b: &[B]) -> Result<f64>
where
    A: Eq + Hash + Copy,
    B: Eq + Hash + Copy,
{
    if labels_a.len() != labels_b.len() {
        return Err(Error::Shape(format!(
            "partitions have lengths {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "ARI needs at least two observations".to_string(),
        ));
    }
    let mut cont: HashMap<(A, B), f64> = HashMap::new();
    let mut row: HashMap<A, f64> = HashMap::new();
    let mut col: HashMap<B, f64> = HashMap::new();
    for (&la, &lb) in labels_a.iter().zip(labels_b.iter()) {
        *cont.entry((la, lb)).or_insert(0.0) += 1.0;
        *row.entry(la).or_insert(0.0) += 1.0;
        *col.entry(lb).or_insert(0.0) += 1.0;
    }
    let comb2 = |x: f64| 0.5 * x * (x - 1.0);
    let index: f64 = cont.values().map(|&v| comb2(v)).sum();
    let sum_a: f64 = row.values().map(|&v| comb2(v)).sum();
    let sum_b: f64 = col.values().map(|&v| comb2(v)).sum();
    let expected = sum_a * sum_b / comb2(n as f64);
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn permutations<T: Copy>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let rest: Vec<T> = items
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &v)| v)
            .collect();
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Misclassification rate over the masked-in observations, under the best
/// one-to-one matching of predicted components to true classes (exhaustive
/// over permutations; intended for small G).
pub fn misclassification_rate(
    pred: &[usize],
    truth: &[usize],
    evaluate_mask: &[bool],
) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != evaluate_mask.len() {
        return Err(Error::Shape("pred/truth/mask lengths differ".to_string()));
    }
    let idx: Vec<usize> = (0..pred.len()).filter(|&i| evaluate_mask[i]).collect();
    if idx.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation mask excludes every observation".to_string(),
        ));
    }
    let mut pred_labels: Vec<usize> = idx.iter().map(|&i| pred[i]).collect::<Vec<_>>();
    pred_labels.sort_unstable();
    pred_labels.dedup();
    let mut true_labels: Vec<usize> = idx.iter().map(|&i| truth[i]).collect::<Vec<_>>();
    true_labels.sort_unstable();
    true_labels.dedup();
    if pred_labels.len().max(true_labels.len()) > 8 {
        return Err(Error::InvalidArgument(
            "exhaustive matching supports at most 8 classes".to_string(),
        ));
    }

    // Count matches under every injective assignment of the smaller label set
    // into the larger one; unmatched labels contribute errors.
    let (small, large, pred_is_small) = if pred_labels.len() <= true_labels.len() {
        (&pred_labels, &true_labels, true)
    } else {
        (&true_labels, &pred_labels, false)
    };
    let mut best_correct = 0usize;
    for perm in permutations(large) {
        let assignment: HashMap<usize, usize> = small
            .iter()
            .copied()
            .zip(perm.iter().copied())
            .collect();
        let mut correct = 0usize;
        for &i in &idx {
            let (s, l) = if pred_is_small {
                (pred[i], truth[i])
            } else {
                (truth[i], pred[i])
            };
            if assignment.get(&s) == Some(&l) {
                correct += 1;
            }
        }
        best_correct = best_correct.max(correct);
    }
    Ok(1.0 - best_correct as f64 / idx.len() as f64)
}

/// Outcome of fitting one (kind, G) cell: the report, or why it failed.
pub type FitOutcome = std::result::Result<FitReport, String>;

/// Fits over a grid of G for one family and records the BIC/ICL winners.
#[derive(Debug)]
pub struct SelectionResult {
    pub kind: DistKind,
    pub per_g: Vec<(usize, FitOutcome)>,
    pub chosen_bic: usize,
    pub chosen_icl: usize,
}

impl SelectionResult {
    pub fn report_for(&self, g: usize) -> Option<&FitReport> {
        self.per_g
            .iter()
            .find(|(gg, _)| *gg == g)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

/// Runs `fit` for every G in the range for one family. Per-G failures are
/// recorded, not fatal; the whole call errors only when every G fails.
pub fn select_over_g_one_kind(
    data: &DataSet,
    labels: &[i32],
    kind: DistKind,
    g_range: std::ops::RangeInclusive<usize>,
    options: &FitOptions,
) -> Result<SelectionResult> {
    let gs: Vec<usize> = g_range.collect();
    if gs.is_empty() {
        return Err(Error::InvalidArgument("empty G range".to_string()));
    }
    let per_g: Vec<(usize, FitOutcome)> = gs
        .par_iter()
        .map(|&g| {
            (
                g,
                fit(data, labels, g, kind, options).map_err(|e| e.to_string()),
            )
        })
        .collect();
    let chosen_bic = per_g
        .iter()
        .filter_map(|(g, r)| r.as_ref().ok().map(|rep| (*g, rep.bic)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(g, _)| g);
    let chosen_icl = per_g
        .iter()
        .filter_map(|(g, r)| r.as_ref().ok().map(|rep| (*g, rep.icl)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(g, _)| g);
    match (chosen_bic, chosen_icl) {
        (Some(bific), Some(iclg)) => Ok(SelectionResult {
            kind,
            per_g,
            chosen_bic: bific,
            chosen_icl: iclg,
        }),
        _ => Err(Error::AllStartsFailed {
            n_starts: gs.len(),
            last: per_g
                .last()
                .and_then(|(_, r)| r.as_ref().err().cloned())
                .unwrap_or_default(),
        }),
    }
}

/// Selection over several families at once; errors only if every (kind, G)
/// cell failed for some family.
pub fn select_over_g(
    data: &DataSet,
    labels: &[i32],
    kinds: &[DistKind],
    g_range: std::ops::RangeInclusive<usize>,
    options: &FitOptions,
) -> Result<Vec<SelectionResult>> {
    kinds
        .iter()
        .map(|&k| select_over_g_one_kind(data, labels, k, g_range.clone(), options))
        .collect()
}
