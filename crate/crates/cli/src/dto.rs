//! JSON shapes written and read by the CLI.

use matmix_core::ecm::{FitOptions, FitReport, InitMethod};
use matmix_core::matvar::{ComponentParams, Concentration};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Fit run configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "mvst" | "mvgh" | "mvvg" | "mvnig"; absent means all four.
    pub kind: Option<String>,
    pub g_min: Option<usize>,
    pub g_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_starts: Option<usize>,
    pub seed: Option<u64>,
    /// "kmeans-on-vec" | "random-soft"
    pub init: Option<String>,
}

pub fn parse_init(s: &str) -> Result<InitMethod, String> {
    match s {
        "kmeans-on-vec" => Ok(InitMethod::KMeansOnVec),
        "random-soft" => Ok(InitMethod::RandomSoft),
        other => Err(format!("unknown init {other:?} (expected kmeans-on-vec|random-soft)")),
    }
}

impl RunConfig {
    pub fn to_options(&self) -> Result<FitOptions, String> {
        let defaults = FitOptions::default();
        Ok(FitOptions {
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            n_starts: self.n_starts.unwrap_or(defaults.n_starts),
            init: match &self.init {
                Some(s) => parse_init(s)?,
                None => defaults.init,
            },
            seed: self.seed.unwrap_or(defaults.seed),
            min_component_weight: None,
        })
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Concentration parameters, tagged by family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ThetaJson {
    #[serde(rename = "mvst")]
    SkewT { nu: f64 },
    #[serde(rename = "mvgh")]
    GeneralizedHyperbolic { lambda: f64, omega: f64 },
    #[serde(rename = "mvvg")]
    VarianceGamma { gamma: f64 },
    #[serde(rename = "mvnig")]
    NormalInverseGaussian { gamma_tilde: f64 },
}

impl From<&Concentration> for ThetaJson {
    fn from(c: &Concentration) -> Self {
        match *c {
            Concentration::SkewT { nu } => ThetaJson::SkewT { nu },
            Concentration::GeneralizedHyperbolic { lambda, omega } => {
                ThetaJson::GeneralizedHyperbolic { lambda, omega }
            }
            Concentration::VarianceGamma { gamma } => ThetaJson::VarianceGamma { gamma },
            Concentration::NormalInverseGaussian { gamma_tilde } => {
                ThetaJson::NormalInverseGaussian { gamma_tilde }
            }
        }
    }
}

/// One component's fitted (or generating) parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentJson {
    pub pi: f64,
    pub m: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub theta: ThetaJson,
}

pub fn component_json(pi: f64, c: &ComponentParams) -> ComponentJson {
    ComponentJson {
        pi,
        m: matrix_rows(&c.m),
        a: matrix_rows(&c.a),
        sigma: matrix_rows(c.sigma.values()),
        psi: matrix_rows(c.psi.values()),
        theta: (&c.theta).into(),
    }
}

/// Full parameter set of a mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsJson {
    pub kind: String,
    pub g: usize,
    pub n: usize,
    pub p: usize,
    pub components: Vec<ComponentJson>,
}

/// Serialized fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReportJson {
    pub kind: String,
    pub g: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_loglik: f64,
    pub bic: f64,
    pub icl: f64,
    pub n_params: usize,
    pub loglik_trace: Vec<f64>,
    pub warnings: Vec<String>,
    pub failed_starts: Vec<String>,
    /// Posterior responsibilities, row per observation.
    pub z: Vec<Vec<f64>>,
}

pub fn fit_report_json(kind: &str, g: usize, n_params: usize, report: &FitReport) -> FitReportJson {
    FitReportJson {
        kind: kind.to_string(),
        g,
        converged: report.converged,
        iterations: report.iterations,
        final_loglik: report.final_loglik(),
        bic: report.bic,
        icl: report.icl,
        n_params,
        loglik_trace: report.loglik_trace.clone(),
        warnings: report.warnings.clone(),
        failed_starts: report.failed_starts.clone(),
        z: matrix_rows(&report.z),
    }
}

/// Per-G outcome in the selection summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum GCellJson {
    #[serde(rename = "ok")]
    Ok {
        g: usize,
        bic: f64,
        icl: f64,
        loglik: f64,
        converged: bool,
        iterations: usize,
    },
    #[serde(rename = "failed")]
    Failed { g: usize, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KindSummaryJson {
    pub kind: String,
    pub cells: Vec<GCellJson>,
    pub chosen_bic: Option<usize>,
    pub chosen_icl: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryJson {
    pub n_obs: usize,
    pub n: usize,
    pub p: usize,
    pub n_labelled: usize,
    pub kinds: Vec<KindSummaryJson>,
}

/// Sidecar describing the generating truth of a simulated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSidecarJson {
    pub preset: String,
    pub seed: u64,
    pub kind: String,
    pub n: usize,
    pub p: usize,
    pub counts: Vec<usize>,
    pub components: Vec<ComponentJson>,
}

/// Evaluation report: ARI, misclassification rate under best matching, and
/// the true-by-predicted cross-tabulation over the evaluated points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalJson {
    pub n_evaluated: usize,
    pub ari: f64,
    pub mcr: f64,
    pub true_labels: Vec<i32>,
    pub pred_labels: Vec<i32>,
    /// counts[i][j] = #(truth == true_labels[i] && pred == pred_labels[j])
    pub confusion: Vec<Vec<usize>>,
}
