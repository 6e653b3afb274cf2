//! The four subcommands: simulate, fit, evaluate, marginals.

use crate::dto::{
    component_json, fit_report_json, EvalJson, GCellJson, KindSummaryJson, ParamsJson, RunConfig,
    SimSidecarJson, SummaryJson,
};
use crate::io::{atomic_write, format_value, read_dataset, read_labels, write_dataset, write_labels};
use crate::{CliError, CliResult};
use matmix_core::data::{DataSet, UNLABELLED};
use matmix_core::ecm::{count_free_params, FitOptions};
use matmix_core::matvar::DistKind;
use matmix_core::select::{ari, misclassification_rate, select_over_g_one_kind};
use matmix_core::sim::{preset, simulate_dataset};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    atomic_write(path, &text)
}

/// `simulate <preset> --seed S --out DIR`: writes data.csv, labels.csv and a
/// truth.json sidecar with the generating parameters.
pub fn cmd_simulate(preset_name: &str, seed: u64, out_dir: &Path) -> CliResult<()> {
    let spec = preset(preset_name, seed).map_err(|e| CliError::Schema(e.to_string()))?;
    let sim = simulate_dataset(&spec).map_err(|e| CliError::Schema(e.to_string()))?;
    ensure_dir(out_dir)?;
    write_dataset(&out_dir.join("data.csv"), &sim.data)?;
    write_labels(&out_dir.join("labels.csv"), &sim.labels)?;
    let total: usize = spec.groups.iter().map(|g| g.count).sum();
    let sidecar = SimSidecarJson {
        preset: preset_name.to_string(),
        seed,
        kind: spec.kind.name().to_string(),
        n: sim.data.n(),
        p: sim.data.p(),
        counts: spec.groups.iter().map(|g| g.count).collect(),
        components: spec
            .groups
            .iter()
            .map(|g| component_json(g.count as f64 / total as f64, &g.params))
            .collect(),
    };
    write_json(&out_dir.join("truth.json"), &sidecar)
}

/// Effective fit settings after merging config file and flags (flags win).
#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub kind: Option<String>,
    pub g_min: Option<usize>,
    pub g_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_starts: Option<usize>,
    pub seed: Option<u64>,
    pub init: Option<String>,
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))
        }
    }
}

/// `fit --data ... [--labels ...] [--config ...] --out DIR [overrides]`:
/// fits every requested (kind, G) cell, writing per-cell reports, parameters
/// and MAP labels plus one selection summary. Per-cell failures are recorded
/// in the summary; only a run where every cell fails exits with code 3.
pub fn cmd_fit(
    data_path: &Path,
    labels_path: Option<&Path>,
    config_path: Option<&Path>,
    out_dir: &Path,
    overrides: &FitOverrides,
) -> CliResult<()> {
    let data = read_dataset(data_path)?;
    let labels = match labels_path {
        Some(p) => read_labels(p, Some(data.len()))?,
        None => vec![UNLABELLED; data.len()],
    };

    let mut config = load_config(config_path)?;
    if overrides.kind.is_some() {
        config.kind = overrides.kind.clone();
    }
    if overrides.g_min.is_some() {
        config.g_min = overrides.g_min;
    }
    if overrides.g_max.is_some() {
        config.g_max = overrides.g_max;
    }
    if overrides.epsilon.is_some() {
        config.epsilon = overrides.epsilon;
    }
    if overrides.max_iter.is_some() {
        config.max_iter = overrides.max_iter;
    }
    if overrides.n_starts.is_some() {
        config.n_starts = overrides.n_starts;
    }
    if overrides.seed.is_some() {
        config.seed = overrides.seed;
    }
    if overrides.init.is_some() {
        config.init = overrides.init.clone();
    }

    let options: FitOptions = config.to_options().map_err(CliError::Schema)?;
    let g_min = config.g_min.unwrap_or(1);
    let g_max = config.g_max.unwrap_or(g_min.max(4));
    if g_min == 0 || g_max < g_min {
        return Err(CliError::Schema(format!(
            "invalid G range {g_min}..{g_max}"
        )));
    }
    let kinds: Vec<DistKind> = match &config.kind {
        Some(k) => vec![DistKind::parse(k).map_err(|e| CliError::Schema(e.to_string()))?],
        None => DistKind::ALL.to_vec(),
    };
    let n_groups_for_labels = labels
        .iter()
        .filter(|&&l| l != UNLABELLED)
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0);
    if n_groups_for_labels > g_min {
        return Err(CliError::Schema(format!(
            "labels reference {n_groups_for_labels} classes but g_min is {g_min}"
        )));
    }

    ensure_dir(out_dir)?;
    let mut kind_summaries = Vec::new();
    let mut any_ok = false;
    for kind in kinds {
        let result = select_over_g_one_kind(&data, &labels, kind, g_min..=g_max, &options);
        let mut cells = Vec::new();
        let (chosen_bic, chosen_icl) = match &result {
            Ok(sel) => (Some(sel.chosen_bic), Some(sel.chosen_icl)),
            Err(_) => (None, None),
        };
        match result {
            Ok(sel) => {
                for (g, outcome) in &sel.per_g {
                    match outcome {
                        Ok(report) => {
                            any_ok = true;
                            let n_params = count_free_params(kind, *g, data.n(), data.p());
                            write_json(
                                &out_dir.join(format!("fit_{}_g{}.json", kind.name(), g)),
                                &fit_report_json(kind.name(), *g, n_params, report),
                            )?;
                            let params = ParamsJson {
                                kind: kind.name().to_string(),
                                g: *g,
                                n: data.n(),
                                p: data.p(),
                                components: report
                                    .model
                                    .weights
                                    .iter()
                                    .zip(&report.model.components)
                                    .map(|(w, c)| component_json(*w, c))
                                    .collect(),
                            };
                            write_json(
                                &out_dir.join(format!("params_{}_g{}.json", kind.name(), g)),
                                &params,
                            )?;
                            let map: Vec<i32> =
                                report.map_labels.iter().map(|&l| l as i32).collect();
                            write_labels(
                                &out_dir.join(format!("map_labels_{}_g{}.csv", kind.name(), g)),
                                &map,
                            )?;
                            cells.push(GCellJson::Ok {
                                g: *g,
                                bic: report.bic,
                                icl: report.icl,
                                loglik: report.final_loglik(),
                                converged: report.converged,
                                iterations: report.iterations,
                            });
                        }
                        Err(reason) => cells.push(GCellJson::Failed {
                            g: *g,
                            reason: reason.clone(),
                        }),
                    }
                }
            }
            Err(e) => {
                for g in g_min..=g_max {
                    cells.push(GCellJson::Failed { g, reason: e.to_string() });
                }
            }
        }
        kind_summaries.push(KindSummaryJson {
            kind: kind.name().to_string(),
            cells,
            chosen_bic,
            chosen_icl,
        });
    }
    let summary = SummaryJson {
        n_obs: data.len(),
        n: data.n(),
        p: data.p(),
        n_labelled: labels.iter().filter(|&&l| l != UNLABELLED).count(),
        kinds: kind_summaries,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    if any_ok {
        Ok(())
    } else {
        Err(CliError::Fit("every requested (kind, G) fit failed".to_string()))
    }
}

/// `evaluate --pred ... --truth ... [--mask ...] [--out FILE]`: ARI, MCR and
/// the cross-tabulation over the evaluated points. With a mask file (labels
/// format), only observations the mask marks unlabelled (−1) are evaluated —
/// the semi-supervised holdout convention.
pub fn cmd_evaluate(
    pred_path: &Path,
    truth_path: &Path,
    mask_path: Option<&Path>,
    out_path: Option<&Path>,
) -> CliResult<EvalJson> {
    let pred = read_labels(pred_path, None)?;
    let truth = read_labels(truth_path, Some(pred.len()))?;
    let evaluate: Vec<bool> = match mask_path {
        Some(p) => read_labels(p, Some(pred.len()))?
            .iter()
            .map(|&l| l == UNLABELLED)
            .collect(),
        None => vec![true; pred.len()],
    };
    let idx: Vec<usize> = (0..pred.len()).filter(|&i| evaluate[i]).collect();
    if idx.is_empty() {
        return Err(CliError::Schema("mask excludes every observation".to_string()));
    }
    let pred_eval: Vec<i32> = idx.iter().map(|&i| pred[i]).collect();
    let truth_eval: Vec<i32> = idx.iter().map(|&i| truth[i]).collect();
    let ari_val = ari(&pred_eval, &truth_eval).map_err(|e| CliError::Schema(e.to_string()))?;
    let pred_usize: Vec<usize> = pred_eval.iter().map(|&l| l.max(0) as usize).collect();
    let truth_usize: Vec<usize> = truth_eval.iter().map(|&l| l.max(0) as usize).collect();
    let mcr = misclassification_rate(&pred_usize, &truth_usize, &vec![true; idx.len()])
        .map_err(|e| CliError::Schema(e.to_string()))?;

    let true_set: Vec<i32> = truth_eval.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let pred_set: Vec<i32> = pred_eval.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut confusion = vec![vec![0usize; pred_set.len()]; true_set.len()];
    for (&t, &p) in truth_eval.iter().zip(pred_eval.iter()) {
        let ti = true_set.iter().position(|&v| v == t).unwrap();
        let pi = pred_set.iter().position(|&v| v == p).unwrap();
        confusion[ti][pi] += 1;
    }
    let report = EvalJson {
        n_evaluated: idx.len(),
        ari: ari_val,
        mcr,
        true_labels: true_set,
        pred_labels: pred_set,
        confusion,
    };
    if let Some(p) = out_path {
        if let Some(dir) = p.parent() {
            if !dir.as_os_str().is_empty() {
                ensure_dir(dir)?;
            }
        }
        write_json(p, &report)?;
    }
    Ok(report)
}

/// `marginals --data ... --labels ... --out FILE`: long CSV
/// `obs,group,col,row,value` for per-column marginal plots.
pub fn cmd_marginals(data_path: &Path, labels_path: &Path, out_path: &Path) -> CliResult<()> {
    let data = read_dataset(data_path)?;
    let labels = read_labels(labels_path, Some(data.len()))?;
    let mut out = String::from("obs,group,col,row,value\n");
    for (i, x) in data.iter().enumerate() {
        for c in 0..data.p() {
            for r in 0..data.n() {
                let _ = writeln!(out, "{i},{},{c},{r},{}", labels[i], format_value(x[(r, c)]));
            }
        }
    }
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    atomic_write(out_path, &out)
}

/// Re-export for tests: a dataset round trip through the long form.
pub fn dataset_round_trip(data: &DataSet, path: &Path) -> CliResult<DataSet> {
    write_dataset(path, data)?;
    read_dataset(path)
}
