//! Independent oracles used by the integration and acceptance suites.
//!
//! Nothing here calls into the crate's special-function or density code:
//! integrals are done by adaptive quadrature on log-shifted integrands, the
//! matrix normal is evaluated through the vec/Kronecker route, and gamma
//! constants come from statrs. That keeps every oracle an independent check
//! of the implementation path it validates.

#![allow(dead_code)]

use matmix_core::data::DataSet;
use matmix_core::ecm::LatentMoments;
use matmix_core::matvar::{Concentration, DistKind};
use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson with Richardson acceptance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// ∫ exp(g(u)) du over the region where g is within `drop` of its maximum,
/// located by coarse scan from `hint`. Returns (log_shift, value): the
/// integral is value·e^{log_shift}.
pub fn integrate_log_peak(
    g: &dyn Fn(f64) -> f64,
    hint: f64,
    drop: f64,
    tol: f64,
) -> (f64, f64) {
    // Coarse walk to find the peak region.
    let mut best_u = hint;
    let mut best = g(hint);
    for step in [8.0, 2.0, 0.5, 0.125, 0.03125] {
        loop {
            let up = g(best_u + step);
            let down = g(best_u - step);
            if up > best {
                best = up;
                best_u += step;
            } else if down > best {
                best = down;
                best_u -= step;
            } else {
                break;
            }
        }
    }
    let mut lo = best_u;
    let mut dl = 0.25;
    while g(lo) > best - drop {
        lo -= dl;
        dl *= 1.6;
    }
    let mut hi = best_u;
    let mut dh = 0.25;
    while g(hi) > best - drop {
        hi += dh;
        dh *= 1.6;
    }
    let shifted = |u: f64| (g(u) - best).exp();
    let val = adaptive_simpson(&shifted, lo, best_u, tol)
        + adaptive_simpson(&shifted, best_u, hi, tol);
    (best, val)
}

/// Quadrature oracle for the GIG kernel y^{λ−1}·exp(−(a·y + b/y)/2), working
/// in u = log y where the exponent is concave.
pub struct GigOracle {
    pub a: f64,
    pub b: f64,
    pub lam: f64,
}

impl GigOracle {
    pub fn new(a: f64, b: f64, lam: f64) -> Self {
        Self { a, b, lam }
    }

    fn exponent(&self, s: f64, u: f64) -> f64 {
        s * u - 0.5 * (self.a * u.exp() + self.b * (-u).exp())
    }

    /// (log_shift, value) of ∫ exp(s·u − (a e^u + b e^{−u})/2) du.
    fn tilted(&self, s: f64) -> (f64, f64) {
        let u0 = ((s + (s * s + self.a * self.b).sqrt()) / self.a).ln();
        integrate_log_peak(&|u| self.exponent(s, u), u0, 90.0, 1e-13)
    }

    /// ln ∫₀^∞ y^{λ−1} exp(−(a·y+b/y)/2) dy.
    pub fn log_kernel_mass(&self) -> f64 {
        let (shift, val) = self.tilted(self.lam);
        shift + val.ln()
    }

    /// (E[Y], E[1/Y], E[log Y]) by quadrature ratios.
    pub fn moments(&self) -> (f64, f64, f64) {
        let (s0, v0) = self.tilted(self.lam);
        let (s1, v1) = self.tilted(self.lam + 1.0);
        let (sm, vm) = self.tilted(self.lam - 1.0);
        let e_y = (s1 - s0).exp() * v1 / v0;
        let e_inv = (sm - s0).exp() * vm / v0;
        // E[log Y]: integrate u·exp(exponent) with the λ tilt's shift.
        let u0 = ((self.lam + (self.lam * self.lam + self.a * self.b).sqrt()) / self.a).ln();
        let g = |u: f64| self.exponent(self.lam, u);
        let (shift, _) = integrate_log_peak(&g, u0, 90.0, 1e-13);
        let mut lo = u0;
        while g(lo) > shift - 90.0 {
            lo -= 0.5;
        }
        let mut hi = u0;
        while g(hi) > shift - 90.0 {
            hi += 0.5;
        }
        let num = adaptive_simpson(&|u| u * (g(u) - shift).exp(), lo, hi, 1e-13);
        let den = adaptive_simpson(&|u| (g(u) - shift).exp(), lo, hi, 1e-13);
        (e_y, e_inv, num / den)
    }

    /// CDF values of the normalized GIG at each of the (sorted ascending)
    /// points, by cumulative quadrature in u = log y.
    pub fn cdf_at_sorted(&self, points: &[f64]) -> Vec<f64> {
        let (shift, total) = self.tilted(self.lam);
        let g = |u: f64| (self.exponent(self.lam, u) - shift).exp();
        let mut lo = points[0].ln().min(
            ((self.lam + (self.lam * self.lam + self.a * self.b).sqrt()) / self.a).ln(),
        );
        while self.exponent(self.lam, lo) > shift - 90.0 {
            lo -= 0.5;
        }
        let mut out = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        let mut prev_u = lo;
        for &y in points {
            let u = y.ln();
            if u > prev_u {
                acc += adaptive_simpson(&g, prev_u, u, 1e-12);
                prev_u = u;
            }
            out.push((acc / total).clamp(0.0, 1.0));
        }
        out
    }
}

/// Kolmogorov–Smirnov statistic of a sample (any order) against CDF values
/// aligned to the sorted sample.
pub fn ks_statistic_against_cdf(sample: &mut [f64], cdf_sorted: &dyn Fn(&[f64]) -> Vec<f64>) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let cdf = cdf_sorted(sample);
    let mut d: f64 = 0.0;
    for (i, &c) in cdf.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((c - lo).abs()).max((hi - c).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// vec operator (stacks columns), matching the Kronecker identity convention.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Multivariate normal log-density with an explicit covariance matrix.
pub fn log_mvn(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x.len() as f64;
    let chol = nalgebra::Cholesky::new(cov.clone()).expect("oracle covariance must be PD");
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let diff = x - mean;
    let solved = chol.solve(&diff);
    -0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * diff.dot(&solved)
}

/// Matrix normal log-density through the vectorized route: vec(X) is
/// np-variate normal with mean vec(M) and covariance Ψ⊗Σ.
pub fn log_matrix_normal_vec_route(
    x: &DMatrix<f64>,
    m: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    psi: &DMatrix<f64>,
) -> f64 {
    let cov = psi.kronecker(sigma);
    log_mvn(&vec_of(x), &vec_of(m), &cov)
}

/// Unnormalized log mixing density h(w) for each family.
pub fn log_h_unnormalized(theta: &Concentration, w: f64) -> f64 {
    match *theta {
        Concentration::SkewT { nu } => -(0.5 * nu + 1.0) * w.ln() - 0.5 * nu / w,
        Concentration::GeneralizedHyperbolic { lambda, omega } => {
            (lambda - 1.0) * w.ln() - 0.5 * omega * (w + 1.0 / w)
        }
        Concentration::VarianceGamma { gamma } => (gamma - 1.0) * w.ln() - gamma * w,
        Concentration::NormalInverseGaussian { gamma_tilde } => {
            -1.5 * w.ln() - 0.5 * (1.0 / w + gamma_tilde * gamma_tilde * w)
        }
    }
}

/// log ∫₀^∞ N_vec(X | M + wA, wΣ, Ψ)·h(w) dw by quadrature over log w — the
/// normal variance–mean mixture construction evaluated directly.
pub fn log_density_mixture_oracle(
    kind: DistKind,
    x: &DMatrix<f64>,
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    theta: &Concentration,
) -> f64 {
    assert_eq!(theta.kind(), kind);
    let num = |u: f64| {
        let w = u.exp();
        let mean = m + a * w;
        let cov = psi.kronecker(&(sigma * w));
        log_mvn(&vec_of(x), &vec_of(&mean), &cov) + log_h_unnormalized(theta, w) + u
    };
    let den = |u: f64| log_h_unnormalized(theta, u.exp()) + u;
    let (ns, nv) = integrate_log_peak(&num, 0.0, 80.0, 1e-12);
    let (ds, dv) = integrate_log_peak(&den, 0.0, 80.0, 1e-12);
    ns + nv.ln() - (ds + dv.ln())
}

/// Brute-force adjusted Rand index by explicit all-pairs counting.
pub fn ari_all_pairs(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut n11 = 0.0f64; // same in both
    let mut n10 = 0.0f64; // same in a, split in b
    let mut n01 = 0.0f64;
    let mut n00 = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            match (sa, sb) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let total = n11 + n10 + n01 + n00;
    let expected = (n11 + n10) * (n11 + n01) / total;
    let max = 0.5 * ((n11 + n10) + (n11 + n01));
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (n11 - expected) / (max - expected)
}

/// Random symmetric positive-definite matrix with unit-ish scale.
pub fn random_spd(dim: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let r = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    &r * r.transpose() + DMatrix::identity(dim, dim) * (0.3 + rng.gen::<f64>())
}

/// Expected complete-data block carrying M, A, Σ, Ψ, via explicit inverses
/// and LU determinants (independent of the implementation's Cholesky path).
#[allow(clippy::too_many_arguments)]
pub fn q3_block(
    data: &DataSet,
    moments: &LatentMoments,
    g: usize,
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    psi: &DMatrix<f64>,
) -> f64 {
    let si = sigma.clone().try_inverse().unwrap();
    let pi = psi.clone().try_inverse().unwrap();
    let log_det_s = sigma.clone().lu().determinant().ln();
    let log_det_p = psi.clone().lu().determinant().ln();
    let n = data.n() as f64;
    let p = data.p() as f64;
    let mut total = 0.0;
    for i in 0..data.len() {
        let zi = moments.z[(i, g)];
        if zi == 0.0 {
            continue;
        }
        let d = data.get(i) - m;
        let skew = (&si * &d * &pi * a.transpose()).trace();
        let dq = (&si * &d * &pi * d.transpose()).trace();
        let rq = (&si * a * &pi * a.transpose()).trace();
        total += 0.5
            * zi
            * (2.0 * skew - moments.b[(i, g)] * dq - moments.a[(i, g)] * rq
                - p * log_det_s
                - n * log_det_p);
    }
    total
}

/// Expected concentration block per family (θ-carrying terms only).
pub fn q2_block(theta: &Concentration, moments: &LatentMoments, g: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..moments.z.nrows() {
        let zi = moments.z[(i, g)];
        if zi == 0.0 {
            continue;
        }
        let (a, b, c) = (moments.a[(i, g)], moments.b[(i, g)], moments.c[(i, g)]);
        total += zi
            * match *theta {
                Concentration::SkewT { nu } => {
                    let h = 0.5 * nu;
                    h * h.ln() - statrs::function::gamma::ln_gamma(h) - h * (c + b)
                }
                Concentration::VarianceGamma { gamma } => {
                    gamma * gamma.ln() - statrs::function::gamma::ln_gamma(gamma)
                        + gamma * (c - a)
                }
                Concentration::NormalInverseGaussian { gamma_tilde } => {
                    gamma_tilde - 0.5 * gamma_tilde * gamma_tilde * a
                }
                Concentration::GeneralizedHyperbolic { lambda, omega } => {
                    // Full expected GIG log-kernel; needs ln K, so this one is
                    // only used for q-monotonicity checks, not as an oracle of K.
                    -matmix_core::specfun::log_bessel_k(lambda, omega).unwrap() + lambda * c
                        - 0.5 * omega * (a + b)
                }
            };
    }
    total
}
