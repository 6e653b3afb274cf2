//! Expectation–conditional-maximization engine for the four skewed matrix
//! variate mixtures.
//!
//! One iteration runs the E-step (responsibilities plus the conditional GIG
//! moments a, b, c), three shared CM steps (mixing weights with location and
//! skewness, then the row scale Σ, then the column scale Ψ), the family's
//! concentration update, and the identifiability normalization Σ_g[0,0] = 1.
//! Convergence is judged by Aitken acceleration on the observed log-likelihood.
//! Observations may carry known labels (−1 = unknown), in which case their
//! responsibilities are frozen one-hot and the fit is semi-supervised.

use crate::data::{validate_labels, DataSet, UNLABELLED};
use crate::error::{Error, Result};
use crate::gig::{gig_moments_with_bessel, GigParams};
use crate::matvar::{
    log_density, log_density_from_quads, quad_forms, ComponentParams, Concentration, DistKind,
    ScaleMatrix,
};
use crate::select;
use crate::specfun::{digamma, dlog_bessel_k_dorder, log_bessel_k, log_bessel_k_pair};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

/// A fitted (or initial) G-component mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub kind: DistKind,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentParams>,
}

impl MixtureModel {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.components.len() || self.components.is_empty() {
            return Err(Error::InvalidArgument(
                "weights and components must be non-empty and equal length".to_string(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "mixing proportions must be positive and sum to 1 (sum = {sum})"
            )));
        }
        let (n, p) = (self.components[0].n(), self.components[0].p());
        for c in &self.components {
            if c.n() != n || c.p() != p {
                return Err(Error::Shape("components disagree on (n, p)".to_string()));
            }
            if c.theta.kind() != self.kind {
                return Err(Error::InvalidArgument(
                    "component concentration does not match the mixture kind".to_string(),
                ));
            }
            c.theta.validate()?;
        }
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

/// Per-(observation, component) posterior quantities from one E-step.
#[derive(Debug, Clone)]
pub struct LatentMoments {
    /// Responsibilities ẑ_ig, rows summing to 1 (one-hot where labelled).
    pub z: DMatrix<f64>,
    /// E[W_ig | X_i, z_ig = 1]
    pub a: DMatrix<f64>,
    /// E[1/W_ig | ·]
    pub b: DMatrix<f64>,
    /// E[log W_ig | ·]
    pub c: DMatrix<f64>,
}

/// Initialization strategy for each start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// k-means on vectorized observations for the initial hard assignment.
    KMeansOnVec,
    /// Random soft responsibilities.
    RandomSoft,
}

/// Fitting options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Aitken threshold ε.
    pub epsilon: f64,
    pub n_starts: usize,
    pub init: InitMethod,
    pub seed: u64,
    /// Minimum effective component weight as a fraction of N; None means 2/N.
    pub min_component_weight: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            epsilon: 1e-5,
            n_starts: 5,
            init: InitMethod::KMeansOnVec,
            seed: 0,
            min_component_weight: None,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".to_string()));
        }
        if self.max_iter < 3 {
            return Err(Error::InvalidArgument(
                "max_iter must be at least 3 (Aitken needs three values)".to_string(),
            ));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Result of one fit: the best start's converged model and diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: MixtureModel,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub map_labels: Vec<usize>,
    pub z: DMatrix<f64>,
    pub bic: f64,
    pub icl: f64,
    /// Concentration updates that were pinned at a bracket or clamp boundary.
    pub warnings: Vec<String>,
    /// Starts that aborted, with their causes.
    pub failed_starts: Vec<String>,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// ln Σ exp in a numerically safe way.
fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// N×G matrix of component log-densities ln f_g(X_i).
fn component_log_densities(model: &MixtureModel, data: &DataSet) -> Result<DMatrix<f64>> {
    let g = model.n_components();
    let mut out = DMatrix::zeros(data.len(), g);
    for (i, x) in data.iter().enumerate() {
        for (j, comp) in model.components.iter().enumerate() {
            let ld = log_density(model.kind, x, comp).map_err(|e| match e {
                Error::UnboundedDensity(_) | Error::Domain(_) => {
                    Error::NonFiniteDensity { obs: i, component: j }
                }
                other => other,
            })?;
            out[(i, j)] = ld;
        }
    }
    Ok(out)
}

/// Observed-data log-likelihood; labelled rows contribute log[π_g f_g(X_i)],
/// unlabelled rows the log mixture density via log-sum-exp.
pub fn observed_loglik(model: &MixtureModel, data: &DataSet, labels: &[i32]) -> Result<f64> {
    model.validate()?;
    validate_labels(labels, data.len(), model.n_components())?;
    let ld = component_log_densities(model, data)?;
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    let mut row = vec![0.0; model.n_components()];
    for i in 0..data.len() {
        if labels[i] == UNLABELLED {
            for g in 0..row.len() {
                row[g] = log_w[g] + ld[(i, g)];
            }
            total += log_sum_exp(&row);
        } else {
            let g = labels[i] as usize;
            total += log_w[g] + ld[(i, g)];
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Domain("non-finite observed log-likelihood".to_string()))
    }
}

/// Conditional GIG parameters of W given X and membership, per family.
fn conditional_gig(
    kind: DistKind,
    theta: &Concentration,
    delta: f64,
    rho: f64,
    np: f64,
) -> Result<GigParams> {
    match (kind, theta) {
        (DistKind::SkewT, Concentration::SkewT { nu }) => {
            GigParams::new(rho, delta + nu, -0.5 * (nu + np))
        }
        (DistKind::GeneralizedHyperbolic, Concentration::GeneralizedHyperbolic { lambda, omega }) => {
            GigParams::new(rho + omega, delta + omega, lambda - 0.5 * np)
        }
        (DistKind::VarianceGamma, Concentration::VarianceGamma { gamma }) => {
            GigParams::new(rho + 2.0 * gamma, delta, gamma - 0.5 * np)
        }
        (DistKind::NormalInverseGaussian, Concentration::NormalInverseGaussian { gamma_tilde }) => {
            GigParams::new(rho + gamma_tilde * gamma_tilde, delta + 1.0, -0.5 * (1.0 + np))
        }
        _ => Err(Error::Domain("concentration does not match kind".to_string())),
    }
}

/// One fused pass over all (i, g) cells: component log-densities, the
/// responsibilities, the conditional GIG moments and the observed
/// log-likelihood of the model that produced them. The Bessel evaluation at
/// the conditional order and argument is shared between the density and the
/// moments.
struct EStepState {
    moments: LatentMoments,
    loglik: f64,
}

fn e_step_full(model: &MixtureModel, data: &DataSet, labels: &[i32]) -> Result<EStepState> {
    model.validate()?;
    validate_labels(labels, data.len(), model.n_components())?;
    let n_obs = data.len();
    let g = model.n_components();
    let np = (data.n() * data.p()) as f64;
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();

    let mut ld = DMatrix::zeros(n_obs, g);
    let mut z = DMatrix::zeros(n_obs, g);
    let mut a = DMatrix::zeros(n_obs, g);
    let mut b = DMatrix::zeros(n_obs, g);
    let mut c = DMatrix::zeros(n_obs, g);
    let mut loglik = 0.0;
    let mut row = vec![0.0; g];
    for i in 0..n_obs {
        for (j, comp) in model.components.iter().enumerate() {
            let (delta, rho, skew_ip) = quad_forms(data.get(i), comp)?;
            let cond =
                conditional_gig(model.kind, &comp.theta, delta, rho, np).map_err(|e| {
                    Error::DegenerateObservation(format!(
                        "observation {i}, component {j}: conditional GIG is invalid ({e})"
                    ))
                })?;
            let (m, log_k) = gig_moments_with_bessel(&cond)?;
            a[(i, j)] = m.e_y;
            b[(i, j)] = m.e_inv_y;
            c[(i, j)] = m.e_log_y;
            ld[(i, j)] = log_density_from_quads(comp, delta, rho, skew_ip, Some(log_k))
                .map_err(|e| match e {
                    Error::UnboundedDensity(_) | Error::Domain(_) => {
                        Error::NonFiniteDensity { obs: i, component: j }
                    }
                    other => other,
                })?;
        }
        if labels[i] == UNLABELLED {
            for j in 0..g {
                row[j] = log_w[j] + ld[(i, j)];
            }
            let lse = log_sum_exp(&row);
            loglik += lse;
            for j in 0..g {
                z[(i, j)] = (row[j] - lse).exp();
            }
        } else {
            let known = labels[i] as usize;
            z[(i, known)] = 1.0;
            loglik += log_w[known] + ld[(i, known)];
        }
    }
    if !loglik.is_finite() {
        return Err(Error::Domain("non-finite observed log-likelihood".to_string()));
    }
    Ok(EStepState {
        moments: LatentMoments { z, a, b, c },
        loglik,
    })
}

/// E-step: responsibilities and conditional GIG moments for every (i, g).
pub fn e_step(model: &MixtureModel, data: &DataSet, labels: &[i32]) -> Result<LatentMoments> {
    Ok(e_step_full(model, data, labels)?.moments)
}

/// Per-component z-weighted moment summaries used by the CM steps.
#[derive(Debug, Clone, Copy)]
pub struct ComponentMeans {
    pub n_g: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
}

pub fn component_means(moments: &LatentMoments) -> Vec<ComponentMeans> {
    let g = moments.z.ncols();
    (0..g)
        .map(|j| {
            let mut n_g = 0.0;
            let mut sa = 0.0;
            let mut sb = 0.0;
            let mut sc = 0.0;
            for i in 0..moments.z.nrows() {
                let zi = moments.z[(i, j)];
                n_g += zi;
                sa += zi * moments.a[(i, j)];
                sb += zi * moments.b[(i, j)];
                sc += zi * moments.c[(i, j)];
            }
            ComponentMeans {
                n_g,
                a_bar: sa / n_g,
                b_bar: sb / n_g,
                c_bar: sc / n_g,
            }
        })
        .collect()
}

/// First CM step: mixing proportions, locations and skewness matrices.
///
/// M̂_g = Σ ẑ X_i(ā_g b_ig − 1)/D_g and Â_g = Σ ẑ X_i(b̄_g − b_ig)/D_g with
/// D_g = Σ ẑ ā_g b_ig − N_g; a vanishing D_g (all conditional moments equal,
/// e.g. a degenerate W ≡ 1) makes the decomposition singular.
#[allow(clippy::type_complexity)]
pub fn cm_step_weights_location_skew(
    data: &DataSet,
    moments: &LatentMoments,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let n_obs = data.len();
    let g = moments.z.ncols();
    let means = component_means(moments);
    let mut weights = Vec::with_capacity(g);
    let mut locations = Vec::with_capacity(g);
    let mut skews = Vec::with_capacity(g);
    for j in 0..g {
        let ComponentMeans { n_g, a_bar, b_bar, .. } = means[j];
        let denom = n_g * (a_bar * b_bar - 1.0);
        if denom.abs() < 1e-10 {
            return Err(Error::SingularUpdate(format!(
                "component {j}: Σẑ·ā·b − N_g = {denom:.3e}"
            )));
        }
        let mut m_num = DMatrix::zeros(data.n(), data.p());
        let mut a_num = DMatrix::zeros(data.n(), data.p());
        for i in 0..n_obs {
            let zi = moments.z[(i, j)];
            if zi == 0.0 {
                continue;
            }
            let bi = moments.b[(i, j)];
            m_num += data.get(i) * (zi * (a_bar * bi - 1.0));
            a_num += data.get(i) * (zi * (b_bar - bi));
        }
        weights.push(n_g / n_obs as f64);
        locations.push(m_num / denom);
        skews.push(a_num / denom);
    }
    Ok((weights, locations, skews))
}

/// Second CM step: row scale matrices Σ_g, with Ψ held at its previous value.
pub fn cm_step_sigma(
    data: &DataSet,
    moments: &LatentMoments,
    locations: &[DMatrix<f64>],
    skews: &[DMatrix<f64>],
    psi_prev: &[ScaleMatrix],
) -> Result<Vec<ScaleMatrix>> {
    let g = moments.z.ncols();
    let p = data.p() as f64;
    let means = component_means(moments);
    let mut out = Vec::with_capacity(g);
    for j in 0..g {
        let psi_inv = psi_prev[j].inverse();
        let a_psi = &skews[j] * psi_inv; // A Ψ⁻¹
        let mut s1 = DMatrix::zeros(data.n(), data.n());
        let mut d_sum = DMatrix::zeros(data.n(), data.p());
        let mut za = 0.0;
        for i in 0..data.len() {
            let zi = moments.z[(i, j)];
            if zi == 0.0 {
                continue;
            }
            let d = data.get(i) - &locations[j];
            let dp = &d * psi_inv;
            s1 += (&dp * d.transpose()) * (zi * moments.b[(i, j)]);
            d_sum += d * zi;
            za += zi * moments.a[(i, j)];
        }
        let s2 = &a_psi * d_sum.transpose();
        let s4 = (&a_psi * skews[j].transpose()) * za;
        let sigma = (s1 - &s2 - s2.transpose() + s4) / (means[j].n_g * p);
        let sym = 0.5 * (&sigma + sigma.transpose());
        out.push(ScaleMatrix::new(sym).map_err(|e| {
            Error::NotPositiveDefinite(format!("Σ update for component {j}: {e}"))
        })?);
    }
    Ok(out)
}

/// Third CM step: column scale matrices Ψ_g, with Σ at its new value.
pub fn cm_step_psi(
    data: &DataSet,
    moments: &LatentMoments,
    locations: &[DMatrix<f64>],
    skews: &[DMatrix<f64>],
    sigma_new: &[ScaleMatrix],
) -> Result<Vec<ScaleMatrix>> {
    let g = moments.z.ncols();
    let n = data.n() as f64;
    let means = component_means(moments);
    let mut out = Vec::with_capacity(g);
    for j in 0..g {
        let sigma_inv = sigma_new[j].inverse();
        let at_sigma = skews[j].transpose() * sigma_inv; // A' Σ⁻¹
        let mut s1 = DMatrix::zeros(data.p(), data.p());
        let mut d_sum = DMatrix::zeros(data.n(), data.p());
        let mut za = 0.0;
        for i in 0..data.len() {
            let zi = moments.z[(i, j)];
            if zi == 0.0 {
                continue;
            }
            let d = data.get(i) - &locations[j];
            let ds = d.transpose() * sigma_inv;
            s1 += (&ds * &d) * (zi * moments.b[(i, j)]);
            d_sum += d * zi;
            za += zi * moments.a[(i, j)];
        }
        let s2 = &at_sigma * &d_sum;
        let s4 = (&at_sigma * &skews[j]) * za;
        let psi = (s1 - &s2 - s2.transpose() + s4) / (means[j].n_g * n);
        let sym = 0.5 * (&psi + psi.transpose());
        out.push(ScaleMatrix::new(sym).map_err(|e| {
            Error::NotPositiveDefinite(format!("Ψ update for component {j}: {e}"))
        })?);
    }
    Ok(out)
}

/// Bisection on a monotone function over [lo, hi]. Returns the root, or, if
/// f does not change sign on the bracket, the endpoint with the smaller
/// |residual| plus a pinned flag.
fn bracketed_root(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, bool) {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return (lo, false);
    }
    if fhi == 0.0 {
        return (hi, false);
    }
    if flo.signum() == fhi.signum() {
        return if flo.abs() <= fhi.abs() { (lo, true) } else { (hi, true) };
    }
    let (mut lo, mut hi, mut flo) = (lo, hi, flo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < 1e-12 {
            return (mid, false);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    (0.5 * (lo + hi), false)
}

/// Bracket for the skew-t degrees of freedom ν.
pub const NU_BRACKET: (f64, f64) = (2.001, 200.0);
/// Bracket for the variance-gamma shape γ.
pub const GAMMA_BRACKET: (f64, f64) = (0.05, 200.0);
/// Clamp range for the generalized hyperbolic concentration ω.
pub const OMEGA_CLAMP: (f64, f64) = (1e-4, 500.0);
/// Clamp range for the generalized hyperbolic index λ.
pub const LAMBDA_CLAMP: (f64, f64) = (-50.0, 50.0);

/// Expected per-observation GIG log-likelihood block for the generalized
/// hyperbolic concentration parameters: q(λ, ω) = −ln K_λ(ω) + λc̄ − ω(ā+b̄)/2.
fn gh_q(lambda: f64, omega: f64, means: &ComponentMeans) -> Result<f64> {
    Ok(-log_bessel_k(lambda, omega)? + lambda * means.c_bar
        - 0.5 * omega * (means.a_bar + means.b_bar))
}

/// One conditional-maximization sweep of the concentration parameters for a
/// single component.
///
/// Skew-t and variance-gamma solve their score equations by bracketed
/// bisection (pinned with a warning if the bracket holds no sign change);
/// the generalized hyperbolic takes one λ fixed-point step followed by one
/// damped Newton step in ω (each accepted only when q does not decrease);
/// the NIG update γ̃ = 1/ā is closed form.
pub fn update_concentration(
    kind: DistKind,
    means: &ComponentMeans,
    theta_prev: &Concentration,
) -> Result<(Concentration, Vec<String>)> {
    let mut warnings = Vec::new();
    let theta = match (kind, theta_prev) {
        (DistKind::SkewT, Concentration::SkewT { .. }) => {
            let target = means.b_bar + means.c_bar;
            let f = |nu: f64| {
                (0.5 * nu).ln() + 1.0 - digamma(0.5 * nu).expect("nu bracket is positive") - target
            };
            let (nu, pinned) = bracketed_root(&f, NU_BRACKET.0, NU_BRACKET.1);
            if pinned {
                warnings.push(format!("nu pinned at {nu} (no sign change in bracket)"));
            }
            Concentration::SkewT { nu }
        }
        (DistKind::VarianceGamma, Concentration::VarianceGamma { .. }) => {
            let shift = means.c_bar - means.a_bar;
            let f = |gm: f64| {
                gm.ln() + 1.0 - digamma(gm).expect("gamma bracket is positive") + shift
            };
            let (gamma, pinned) = bracketed_root(&f, GAMMA_BRACKET.0, GAMMA_BRACKET.1);
            if pinned {
                warnings.push(format!("gamma pinned at {gamma} (no sign change in bracket)"));
            }
            Concentration::VarianceGamma { gamma }
        }
        (DistKind::NormalInverseGaussian, Concentration::NormalInverseGaussian { .. }) => {
            Concentration::NormalInverseGaussian { gamma_tilde: 1.0 / means.a_bar }
        }
        (DistKind::GeneralizedHyperbolic, &Concentration::GeneralizedHyperbolic { lambda, omega }) => {
            let q_old = gh_q(lambda, omega, means)?;
            // λ fixed-point step, kept only if q does not decrease.
            let mut new_lambda = lambda;
            let denom = dlog_bessel_k_dorder(lambda, omega)?;
            if denom.abs() > 1e-12 {
                let cand = means.c_bar * lambda / denom;
                let clamped = cand.clamp(LAMBDA_CLAMP.0, LAMBDA_CLAMP.1);
                if clamped != cand {
                    warnings.push(format!("lambda clamped to {clamped}"));
                }
                if clamped.is_finite() && gh_q(clamped, omega, means)? >= q_old {
                    new_lambda = clamped;
                }
            }
            // One damped Newton step in ω at the new λ.
            let q_base = gh_q(new_lambda, omega, means)?;
            let (lk, lk1) = log_bessel_k_pair(new_lambda, omega)?;
            let (lkm, lkm1) = log_bessel_k_pair(-new_lambda, omega)?;
            let r_pos = (lk1 - lk).exp();
            let r_neg = (lkm1 - lkm).exp();
            let dq = 0.5 * (r_pos + r_neg - (means.a_bar + means.b_bar));
            let d2q = 0.5
                * (r_pos * r_pos - (1.0 + 2.0 * new_lambda) / omega * r_pos - 1.0
                    + r_neg * r_neg
                    - (1.0 - 2.0 * new_lambda) / omega * r_neg
                    - 1.0);
            let mut new_omega = omega;
            if d2q < -1e-14 && dq.is_finite() {
                let mut step = -dq / d2q;
                for _ in 0..40 {
                    let cand = (omega + step).clamp(OMEGA_CLAMP.0, OMEGA_CLAMP.1);
                    if gh_q(new_lambda, cand, means)? >= q_base {
                        if cand == OMEGA_CLAMP.0 || cand == OMEGA_CLAMP.1 {
                            warnings.push(format!("omega pinned at clamp {cand}"));
                        }
                        new_omega = cand;
                        break;
                    }
                    step *= 0.5;
                }
            }
            Concentration::GeneralizedHyperbolic { lambda: new_lambda, omega: new_omega }
        }
        _ => {
            return Err(Error::Domain(
                "concentration update: kind does not match previous parameters".to_string(),
            ))
        }
    };
    Ok((theta, warnings))
}

/// Rescales every component so that Σ_g[0,0] = 1 exactly; Ψ_g absorbs the
/// constant, leaving every density value unchanged.
pub fn normalize_identifiability(model: &MixtureModel) -> Result<MixtureModel> {
    let mut components = Vec::with_capacity(model.n_components());
    for comp in &model.components {
        let c = comp.sigma.values()[(0, 0)];
        if !(c > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Σ[0,0] = {c} during identifiability normalization"
            )));
        }
        let sigma = comp.sigma.divided(c)?;
        let psi = comp.psi.scaled(c)?;
        components.push(ComponentParams::new(
            comp.m.clone(),
            comp.a.clone(),
            sigma,
            psi,
            comp.theta,
        )?);
    }
    Ok(MixtureModel {
        kind: model.kind,
        weights: model.weights.clone(),
        components,
    })
}

/// Aitken-acceleration stopping rule on the last three log-likelihoods:
/// with a = (l₂−l₁)/(l₁−l₀) and l∞ = l₁ + (l₂−l₁)/(1−a), converged when
/// 0 < l∞ − l₁ < ε. An exactly flat last step counts as converged; a ≥ 1 or
/// a non-positive difference does not.
pub fn aitken_converged(trace: &[f64], epsilon: f64) -> bool {
    if trace.len() < 3 {
        return false;
    }
    let y0 = trace[trace.len() - 3];
    let y1 = trace[trace.len() - 2];
    let y2 = trace[trace.len() - 1];
    let d2 = y2 - y1;
    if d2 == 0.0 {
        return true;
    }
    let d1 = y1 - y0;
    if d1 == 0.0 {
        return false;
    }
    let a = d2 / d1;
    if a >= 1.0 {
        return false;
    }
    let diff = d2 / (1.0 - a); // l∞ − l₁
    diff > 0.0 && diff < epsilon
}

/// Free-parameter count: (G−1) mixing proportions plus, per component, the
/// n×p location and skewness, both triangles of the two scale matrices minus
/// one entry for the Σ[0,0] = 1 constraint, and the concentration parameters.
pub fn count_free_params(kind: DistKind, g: usize, n: usize, p: usize) -> usize {
    let per_component =
        2 * n * p + n * (n + 1) / 2 + p * (p + 1) / 2 - 1 + kind.n_concentration();
    (g - 1) + g * per_component
}

/// k-means++ seeding followed by Lloyd iterations, on vectorized
/// observations winsorized coordinatewise at the 5th/95th percentiles.
/// The heavy-tailed families throw extreme outliers that would otherwise
/// dominate both the squared-distance seeding and the cluster means.
fn kmeans_labels(data: &DataSet, k: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let n_obs = data.len();
    let mut vecs: Vec<DVector<f64>> = data
        .iter()
        .map(|m| DVector::from_column_slice(m.as_slice()))
        .collect();
    let dim = vecs[0].len();
    for d in 0..dim {
        let mut column: Vec<f64> = vecs.iter().map(|v| v[d]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = column[(0.05 * (n_obs - 1) as f64).round() as usize];
        let hi = column[(0.95 * (n_obs - 1) as f64).round() as usize];
        for v in vecs.iter_mut() {
            v[d] = v[d].clamp(lo, hi);
        }
    }
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
    centers.push(vecs[rng.gen_range(0..n_obs)].clone());
    while centers.len() < k {
        let d2: Vec<f64> = vecs
            .iter()
            .map(|v| {
                centers
                    .iter()
                    .map(|c| (v - c).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            centers.push(vecs[rng.gen_range(0..n_obs)].clone());
            continue;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n_obs - 1;
        for (i, &w) in d2.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                pick = i;
                break;
            }
        }
        centers.push(vecs[pick].clone());
    }
    let mut labels = vec![0usize; n_obs];
    for _ in 0..100 {
        let mut changed = false;
        for (i, v) in vecs.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    let da = (v - &centers[a]).norm_squared();
                    let db = (v - &centers[b]).norm_squared();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = vecs
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == j)
                .map(|(v, _)| v)
                .collect();
            if !members.is_empty() {
                let mut mean = DVector::zeros(vecs[0].len());
                for m in &members {
                    mean += *m;
                }
                *center = mean / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    // No empty clusters: steal a random observation for each.
    for j in 0..k {
        if !labels.contains(&j) {
            let idx = rng.gen_range(0..n_obs);
            labels[idx] = j;
        }
    }
    labels
}

fn initial_theta(kind: DistKind) -> Concentration {
    match kind {
        DistKind::SkewT => Concentration::SkewT { nu: 10.0 },
        DistKind::GeneralizedHyperbolic => {
            Concentration::GeneralizedHyperbolic { lambda: 1.0, omega: 1.0 }
        }
        DistKind::VarianceGamma => Concentration::VarianceGamma { gamma: 2.0 },
        DistKind::NormalInverseGaussian => {
            Concentration::NormalInverseGaussian { gamma_tilde: 1.0 }
        }
    }
}

/// Builds the starting model for one start: group means for M, small uniform
/// noise for A (exactly zero skewness makes the first CM denominator
/// singular), identity scales, and fixed concentration starts.
fn initialize(
    data: &DataSet,
    labels: &[i32],
    g: usize,
    kind: DistKind,
    init: InitMethod,
    rng: &mut ChaCha20Rng,
) -> Result<MixtureModel> {
    let n_obs = data.len();
    let (n, p) = (data.n(), data.p());

    // Soft assignment matrix from the chosen strategy, with labelled rows
    // forced to their class.
    let mut z = DMatrix::zeros(n_obs, g);
    match init {
        InitMethod::KMeansOnVec => {
            let hard = kmeans_labels(data, g, rng);
            for (i, &l) in hard.iter().enumerate() {
                z[(i, l)] = 1.0;
            }
        }
        InitMethod::RandomSoft => {
            for i in 0..n_obs {
                let mut row: Vec<f64> = (0..g).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                for (j, v) in row.iter().enumerate() {
                    z[(i, j)] = *v;
                }
            }
        }
    }
    for (i, &l) in labels.iter().enumerate() {
        if l != UNLABELLED {
            for j in 0..g {
                z[(i, j)] = 0.0;
            }
            z[(i, l as usize)] = 1.0;
        }
    }

    let mut weights = Vec::with_capacity(g);
    let mut components = Vec::with_capacity(g);
    for j in 0..g {
        let n_g: f64 = (0..n_obs).map(|i| z[(i, j)]).sum();
        let n_g = n_g.max(1e-3);
        let mut mean = DMatrix::zeros(n, p);
        for i in 0..n_obs {
            mean += data.get(i) * z[(i, j)];
        }
        mean /= n_g;
        let noise = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() * 0.2 - 0.1);
        weights.push(n_g);
        components.push(ComponentParams::new(
            mean,
            noise,
            ScaleMatrix::identity(n),
            ScaleMatrix::identity(p),
            initial_theta(kind),
        )?);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(MixtureModel { kind, weights, components })
}

/// One complete ECM run from a single initialization.
fn fit_single_start(
    data: &DataSet,
    labels: &[i32],
    g: usize,
    kind: DistKind,
    options: &FitOptions,
    start_idx: usize,
) -> Result<FitReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
    rng.set_stream(0x1000 + start_idx as u64);
    let mut model = initialize(data, labels, g, kind, options.init, &mut rng)?;
    let n_obs = data.len();
    let min_ng = options
        .min_component_weight
        .map(|f| f * n_obs as f64)
        .unwrap_or(2.0);

    let mut state = e_step_full(&model, data, labels)?;
    let mut trace = vec![state.loglik];
    let mut warnings: Vec<String> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..options.max_iter {
        iterations = iter + 1;
        let moments = &state.moments;
        for (j, cm) in component_means(moments).iter().enumerate() {
            if cm.n_g < min_ng {
                return Err(Error::ComponentDied { component: j, weight: cm.n_g / n_obs as f64 });
            }
        }
        let (weights, locations, skews) = cm_step_weights_location_skew(data, moments)?;
        let sigmas = cm_step_sigma(data, moments, &locations, &skews,
            &model.components.iter().map(|c| c.psi.clone()).collect::<Vec<_>>())?;
        let psis = cm_step_psi(data, moments, &locations, &skews, &sigmas)?;
        let means = component_means(moments);
        let mut components = Vec::with_capacity(g);
        for j in 0..g {
            let (theta, mut w) = update_concentration(kind, &means[j], &model.components[j].theta)?;
            for msg in w.drain(..) {
                let tagged = format!("iteration {iterations}, component {j}: {msg}");
                if !warnings.iter().any(|existing: &String| existing.ends_with(&msg)) {
                    warnings.push(tagged);
                }
            }
            components.push(ComponentParams::new(
                locations[j].clone(),
                skews[j].clone(),
                sigmas[j].clone(),
                psis[j].clone(),
                theta,
            )?);
        }
        model = normalize_identifiability(&MixtureModel { kind, weights, components })?;
        state = e_step_full(&model, data, labels)?;
        let last = *trace.last().unwrap();
        if state.loglik < last - 1e-8 {
            // In exact arithmetic every CM step is a conditional maximization;
            // a measurable decrease means the state is numerically degenerate
            // (e.g. a near-empty component stretched over outliers), so the
            // start is abandoned like any other degeneracy.
            return Err(Error::MonotonicityLost {
                iteration: iterations,
                drop: last - state.loglik,
            });
        }
        trace.push(state.loglik);
        if aitken_converged(&trace, options.epsilon) {
            converged = true;
            break;
        }
    }

    let z = state.moments.z;
    let map_labels: Vec<usize> = (0..n_obs)
        .map(|i| {
            (0..g)
                .max_by(|&a, &b| z[(i, a)].partial_cmp(&z[(i, b)]).unwrap())
                .unwrap()
        })
        .collect();
    let loglik = *trace.last().unwrap();
    let bic = select::bic(loglik, count_free_params(kind, g, data.n(), data.p()), n_obs);
    let icl = select::icl(bic, &z);
    Ok(FitReport {
        model,
        loglik_trace: trace,
        converged,
        iterations,
        map_labels,
        z,
        bic,
        icl,
        warnings,
        failed_starts: Vec::new(),
    })
}

/// Fits a G-component mixture of the given family by ECM with multiple
/// independent starts, returning the report of the start with the highest
/// final observed log-likelihood. Individual starts may abort (component
/// death, singular updates); the surviving report lists them. If every start
/// aborts the fit fails with the last cause.
pub fn fit(
    data: &DataSet,
    labels: &[i32],
    g: usize,
    kind: DistKind,
    options: &FitOptions,
) -> Result<FitReport> {
    options.validate()?;
    if g == 0 || data.len() < 2 * g {
        return Err(Error::InvalidArgument(format!(
            "need at least 2·G observations (N = {}, G = {g})",
            data.len()
        )));
    }
    validate_labels(labels, data.len(), g)?;

    let results: Vec<(usize, Result<FitReport>)> = (0..options.n_starts)
        .into_par_iter()
        .map(|s| (s, fit_single_start(data, labels, g, kind, options, s)))
        .collect();

    let mut failed: Vec<String> = Vec::new();
    let mut best: Option<FitReport> = None;
    for (s, res) in results {
        match res {
            Ok(report) => {
                let better = best
                    .as_ref()
                    .map(|b| report.final_loglik() > b.final_loglik())
                    .unwrap_or(true);
                if better {
                    best = Some(report);
                }
            }
            Err(e) => failed.push(format!("start {s}: {e}")),
        }
    }
    match best {
        Some(mut report) => {
            report.failed_starts = failed;
            Ok(report)
        }
        None => Err(Error::AllStartsFailed {
            n_starts: options.n_starts,
            last: failed.last().cloned().unwrap_or_default(),
        }),
    }
}
