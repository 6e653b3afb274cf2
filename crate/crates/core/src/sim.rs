//! Exact samplers for the four skewed matrix variate distributions through
//! their normal variance–mean mixture representation X = M + W·A + √W·V,
//! plus the two simulation presets used throughout the evaluation suite.

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gig::{sample_gig, GigParams};
use crate::matvar::{ComponentParams, Concentration, DistKind, ScaleMatrix};
use nalgebra::{dmatrix, DMatrix};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Gamma, InverseGaussian, StandardNormal};
use rayon::prelude::*;

/// One mixture group to simulate: its parameters and how many draws.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub params: ComponentParams,
    pub count: usize,
}

/// A full simulation: shared distribution kind, per-group parameters and
/// counts, and the master seed.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub kind: DistKind,
    pub groups: Vec<GroupSpec>,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        let first = self.groups.first().ok_or_else(|| {
            Error::InvalidArgument("simulation needs at least one group".to_string())
        })?;
        let (n, p) = (first.params.n(), first.params.p());
        for (g, group) in self.groups.iter().enumerate() {
            if group.count == 0 {
                return Err(Error::InvalidArgument(format!("group {g} has count 0")));
            }
            if group.params.n() != n || group.params.p() != p {
                return Err(Error::Shape(format!(
                    "group {g} is {}x{}, expected {n}x{p}",
                    group.params.n(),
                    group.params.p()
                )));
            }
            if group.params.theta.kind() != self.kind {
                return Err(Error::InvalidArgument(format!(
                    "group {g} concentration is for {}, spec kind is {}",
                    group.params.theta.kind(),
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub fn total_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }
}

/// Simulated observations plus their generating group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataSet,
    pub labels: Vec<i32>,
}

/// One draw of the scalar mixing variable W for the given family.
///
/// Skew-t: W ~ IGamma(ν/2, ν/2), drawn as the reciprocal of a gamma variate.
/// Generalized hyperbolic: W ~ I(ω, 1, λ), i.e. GIG(ω, ω, λ).
/// Variance-gamma: W ~ gamma(γ, γ). NIG: W ~ IG(1, γ̃), mean 1/γ̃ and shape 1.
pub fn sample_w<R: Rng + ?Sized>(theta: &Concentration, rng: &mut R) -> Result<f64> {
    theta.validate()?;
    Ok(match *theta {
        Concentration::SkewT { nu } => {
            let g = Gamma::new(0.5 * nu, 2.0 / nu)
                .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
            1.0 / g.sample(rng)
        }
        Concentration::GeneralizedHyperbolic { lambda, omega } => {
            sample_gig(&GigParams::new(omega, omega, lambda)?, rng)
        }
        Concentration::VarianceGamma { gamma } => {
            let g = Gamma::new(gamma, 1.0 / gamma)
                .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
            g.sample(rng)
        }
        Concentration::NormalInverseGaussian { gamma_tilde } => {
            let ig = InverseGaussian::new(1.0 / gamma_tilde, 1.0)
                .map_err(|e| Error::Domain(format!("inverse Gaussian sampler: {e}")))?;
            ig.sample(rng)
        }
    })
}

/// V ~ N_{n×p}(0, Σ, Ψ) via V = L_Σ · Z · L_Ψ' with Z i.i.d. standard normal.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    sigma: &ScaleMatrix,
    psi: &ScaleMatrix,
    rng: &mut R,
) -> DMatrix<f64> {
    let (n, p) = (sigma.dim(), psi.dim());
    let z = DMatrix::from_iterator(n, p, (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)));
    sigma.chol_l() * z * psi.chol_l().transpose()
}

/// One draw X = M + W·A + √W·V from the variance–mean mixture.
pub fn sample_observation<R: Rng + ?Sized>(
    kind: DistKind,
    params: &ComponentParams,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if params.theta.kind() != kind {
        return Err(Error::Domain(format!(
            "component parameters are for {}, requested {kind}",
            params.theta.kind()
        )));
    }
    let w = sample_w(&params.theta, rng)?;
    let v = sample_matrix_normal(&params.sigma, &params.psi, rng);
    Ok(&params.m + &params.a * w + v * w.sqrt())
}

/// Simulates the full dataset, groups concatenated in spec order.
///
/// Each observation index gets its own ChaCha stream derived from the master
/// seed, so output is bit-identical for a given seed regardless of how many
/// threads generate it.
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let base = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut plan = Vec::with_capacity(spec.total_count());
    for (g, group) in spec.groups.iter().enumerate() {
        for _ in 0..group.count {
            plan.push(g);
        }
    }
    let obs: Result<Vec<DMatrix<f64>>> = plan
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut rng = base.clone();
            rng.set_stream(i as u64 + 1);
            sample_observation(spec.kind, &spec.groups[g].params, &mut rng)
        })
        .collect();
    Ok(LabeledDataset {
        data: DataSet::new(obs?)?,
        labels: plan.iter().map(|&g| g as i32).collect(),
    })
}

fn sim1_scales() -> (ScaleMatrix, ScaleMatrix, ScaleMatrix, ScaleMatrix) {
    let sigma1 = ScaleMatrix::new(dmatrix![
        1.0, 0.5, 0.1;
        0.5, 1.0, 0.5;
        0.1, 0.5, 1.0
    ])
    .expect("preset scale");
    let sigma2 = ScaleMatrix::new(dmatrix![
        1.0, 0.1, 0.1;
        0.1, 1.0, 0.1;
        0.1, 0.1, 1.0
    ])
    .expect("preset scale");
    let psi1 = ScaleMatrix::new(dmatrix![
        1.0, 0.5, 0.5, 0.5;
        0.5, 1.0, 0.0, 0.0;
        0.5, 0.0, 1.0, 0.0;
        0.5, 0.0, 0.0, 1.0
    ])
    .expect("preset scale");
    let psi2 = ScaleMatrix::new(dmatrix![
        1.0, 0.0, 0.0, 0.0;
        0.0, 1.0, 0.5, 0.5;
        0.0, 0.5, 1.0, 0.2;
        0.0, 0.5, 0.2, 1.0
    ])
    .expect("preset scale");
    (sigma1, sigma2, psi1, psi2)
}

fn sim1_locations() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let m1 = dmatrix![
        1.0, 0.0, 0.0, -1.0;
        0.0, 1.0, -1.0, 0.0;
        -1.0, 0.0, 2.0, -1.0
    ];
    let m2 = dmatrix![
        3.0, 4.0, 2.0, 4.0;
        4.0, 3.0, 3.0, 3.0;
        3.0, 4.0, 2.0, 4.0
    ];
    let a1 = dmatrix![
        1.0, -1.0, 0.0, 1.0;
        1.0, -1.0, 0.0, 1.0;
        1.0, -1.0, 0.0, 1.0
    ];
    let a2 = dmatrix![
        1.0, 1.0, 1.0, -1.0;
        1.0, 1.0, 0.5, -1.0;
        1.0, 1.0, 0.0, -1.0
    ];
    (m1, m2, a1, a2)
}

fn sim1_thetas(kind: DistKind) -> [Concentration; 2] {
    match kind {
        DistKind::SkewT => [
            Concentration::SkewT { nu: 4.0 },
            Concentration::SkewT { nu: 20.0 },
        ],
        DistKind::GeneralizedHyperbolic => [
            Concentration::GeneralizedHyperbolic { lambda: 2.0, omega: 4.0 },
            Concentration::GeneralizedHyperbolic { lambda: 2.0, omega: 2.0 },
        ],
        DistKind::VarianceGamma => [
            Concentration::VarianceGamma { gamma: 7.0 },
            Concentration::VarianceGamma { gamma: 14.0 },
        ],
        DistKind::NormalInverseGaussian => [
            Concentration::NormalInverseGaussian { gamma_tilde: 0.5 },
            Concentration::NormalInverseGaussian { gamma_tilde: 2.0 },
        ],
    }
}

fn sim2_locations() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let m1 = dmatrix![
        1.0, -1.0, 0.0;
        0.0, 0.0, -1.0;
        0.0, 1.0, 0.0;
        -1.0, 0.0, -1.0
    ];
    let m2 = dmatrix![
        -1.0, 1.0, 0.0;
        0.0, 0.0, 1.0;
        0.0, -1.0, 0.0;
        1.0, 0.0, 1.0
    ];
    let m3 = dmatrix![
        1.0, 1.0, 2.0;
        1.0, 2.0, 0.0;
        0.0, 1.0, 1.0;
        0.0, 1.0, 0.0
    ];
    let a1 = dmatrix![
        1.0, -1.0, -1.0;
        1.0, -0.5, -1.0;
        1.0, 0.0, -1.0;
        1.0, 0.0, -1.0
    ];
    let a23 = dmatrix![
        1.0, 1.0, -1.0;
        1.0, 0.5, 0.5;
        1.0, 0.0, 0.0;
        1.0, 0.0, 0.0
    ];
    (m1, m2, m3, a1, a23)
}

fn sim2_thetas(kind: DistKind) -> [Concentration; 3] {
    match kind {
        DistKind::SkewT => [
            Concentration::SkewT { nu: 4.0 },
            Concentration::SkewT { nu: 8.0 },
            Concentration::SkewT { nu: 20.0 },
        ],
        DistKind::GeneralizedHyperbolic => [
            Concentration::GeneralizedHyperbolic { lambda: 4.0, omega: 4.0 },
            Concentration::GeneralizedHyperbolic { lambda: 0.0, omega: 2.0 },
            Concentration::GeneralizedHyperbolic { lambda: -2.0, omega: 2.0 },
        ],
        DistKind::VarianceGamma => [
            Concentration::VarianceGamma { gamma: 7.0 },
            Concentration::VarianceGamma { gamma: 9.0 },
            Concentration::VarianceGamma { gamma: 14.0 },
        ],
        DistKind::NormalInverseGaussian => [
            Concentration::NormalInverseGaussian { gamma_tilde: 0.5 },
            Concentration::NormalInverseGaussian { gamma_tilde: 1.0 },
            Concentration::NormalInverseGaussian { gamma_tilde: 2.0 },
        ],
    }
}

/// Number of observations per simulated group (the simulation-2 figure,
/// reused for simulation 1 where the source leaves it unstated).
pub const PRESET_GROUP_SIZE: usize = 200;

/// All preset names accepted by `preset`.
pub const PRESET_NAMES: [&str; 8] = [
    "sim1_mvst",
    "sim1_mvgh",
    "sim1_mvvg",
    "sim1_mvnig",
    "sim2_mvst",
    "sim2_mvgh",
    "sim2_mvvg",
    "sim2_mvnig",
];

/// Builds a named simulation preset. Simulation 1 has two groups of 3×4
/// matrices; simulation 2 has three groups of 4×3 matrices with the scale
/// matrices reused transposed-wise from simulation 1.
pub fn preset(name: &str, seed: u64) -> Result<SimulationSpec> {
    let (sim, kind_name) = name.split_once('_').ok_or_else(|| {
        Error::InvalidArgument(format!("unknown preset {name:?}"))
    })?;
    let kind = DistKind::parse(kind_name)?;
    let (sigma1, sigma2, psi1, psi2) = sim1_scales();
    match sim {
        "sim1" => {
            let (m1, m2, a1, a2) = sim1_locations();
            let [t1, t2] = sim1_thetas(kind);
            let groups = vec![
                GroupSpec {
                    params: ComponentParams::new(m1, a1, sigma1, psi1, t1)?,
                    count: PRESET_GROUP_SIZE,
                },
                GroupSpec {
                    params: ComponentParams::new(m2, a2, sigma2, psi2, t2)?,
                    count: PRESET_GROUP_SIZE,
                },
            ];
            Ok(SimulationSpec { kind, groups, seed })
        }
        "sim2" => {
            let (m1, m2, m3, a1, a23) = sim2_locations();
            let [t1, t2, t3] = sim2_thetas(kind);
            // Σ̃₁ = Ψ₁, Σ̃₂ = Σ̃₃ = Ψ₂, Ψ̃₁ = Ψ̃₃ = Σ₁, Ψ̃₂ = Σ₂.
            let groups = vec![
                GroupSpec {
                    params: ComponentParams::new(m1, a1, psi1.clone(), sigma1.clone(), t1)?,
                    count: PRESET_GROUP_SIZE,
                },
                GroupSpec {
                    params: ComponentParams::new(m2, a23.clone(), psi2.clone(), sigma2, t2)?,
                    count: PRESET_GROUP_SIZE,
                },
                GroupSpec {
                    params: ComponentParams::new(m3, a23, psi2, sigma1, t3)?,
                    count: PRESET_GROUP_SIZE,
                },
            ];
            Ok(SimulationSpec { kind, groups, seed })
        }
        _ => Err(Error::InvalidArgument(format!("unknown preset {name:?}"))),
    }
}
