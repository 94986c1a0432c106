//! Exact and empirical moments, and univariate moment-problem diagnostics.
//!
//! Exact multivariate Gaussian moments are computed per component by
//! expanding `(μ + Z)^α` binomially in the mean and evaluating the zero-mean
//! moments `E[Z^β]` as sums over pair partitions of the index multiset
//! (Isserlis). Odd central degrees vanish.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{MultivariateGmm, PointSet, UnivariateGmm};
use crate::momentindex::{binomial, enumerate_multi_indices, MonomialBasis, MultiIndex};

/// Default cap on `|α|` for [`multivariate_gmm_moment`].
pub const DEFAULT_DEGREE_CAP: u32 = 6;

/// Power moments `(m_0, m_1, …)` of a finite positive measure on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => return Err(Error::InvalidMomentSequence("empty".into())),
            Some(&m0) if !(m0 > 0.0) => {
                return Err(Error::InvalidMomentSequence(format!("m_0 = {m0} is not positive")))
            }
            _ => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMomentSequence("non-finite moment".into()));
        }
        Ok(Self { values })
    }

    /// Moments `0..=max_order` of a univariate mixture.
    pub fn of_gmm(gmm: &UnivariateGmm, max_order: u32) -> Self {
        Self {
            values: (0..=max_order).map(|n| univariate_gmm_moment(gmm, n)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(m_2, m_4, …)`, the input expected by [`carleman_partial_sum`].
    pub fn even_moments(&self) -> Vec<f64> {
        self.values.iter().skip(2).step_by(2).copied().collect()
    }
}

/// Degree-`k` moments `m_α` stacked in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    basis: MonomialBasis,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(basis: MonomialBasis, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: values.len(),
            });
        }
        Ok(Self { basis, values })
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        self.basis.position(alpha).map(|i| self.values[i])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &MomentVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// `(2k − 1)!!` with `(−1)!! = 1`.
fn odd_double_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (2 * i - 1) as f64).product()
}

/// Raw moment `E[X^n]` of `N(μ, σ²)`:
/// `Σ_{k=0}^{⌊n/2⌋} C(n, 2k) (2k−1)!! σ^{2k} μ^{n−2k}`.
pub fn gaussian_raw_moment(mu: f64, sigma: f64, n: u32) -> f64 {
    let var = sigma * sigma;
    (0..=n / 2)
        .map(|k| {
            let c = binomial(n as u64, 2 * k as u64).map(|c| c as f64).unwrap_or_else(|_| {
                // only reachable for n > 60; fall back to floating products
                (0..2 * k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
            });
            c * odd_double_factorial(k) * var.powi(k as i32) * mu.powi((n - 2 * k) as i32)
        })
        .sum()
}

pub fn univariate_gmm_moment(gmm: &UnivariateGmm, n: u32) -> f64 {
    gmm.components().map(|(w, m, s)| w * gaussian_raw_moment(m, s, n)).sum()
}

/// Exact `m_k^θ = E[(θᵀX)^k]` via the univariate pushforward.
pub fn sliced_gmm_moment(gmm: &MultivariateGmm, theta: &[f64], k: u32) -> Result<f64> {
    Ok(univariate_gmm_moment(&gmm.slice(theta)?, k))
}

/// `E[X^α]` for `X ~ gmm`, with `|α| ≤ 6`.
pub fn multivariate_gmm_moment(gmm: &MultivariateGmm, alpha: &MultiIndex) -> Result<f64> {
    multivariate_gmm_moment_capped(gmm, alpha, DEFAULT_DEGREE_CAP)
}

pub fn multivariate_gmm_moment_capped(gmm: &MultivariateGmm, alpha: &MultiIndex, cap: u32) -> Result<f64> {
    if alpha.dim() != gmm.dim() {
        return Err(Error::DimensionMismatch {
            expected: gmm.dim(),
            found: alpha.dim(),
        });
    }
    let degree = alpha.degree();
    if degree > cap {
        return Err(Error::DegreeCapExceeded { degree, cap });
    }
    let mut total = 0.0;
    for j in 0..gmm.k() {
        let mean = gmm.means()[j].as_slice();
        let cov = &gmm.covariances()[j];
        total += gmm.weights()[j] * noncentral_moment(alpha.entries(), mean, cov);
    }
    Ok(total)
}

/// `E[(μ + Z)^α]` with `Z ~ N(0, Σ)`: sum over `β ≤ α` of
/// `∏ C(α_i, β_i) μ_i^{α_i − β_i} · E[Z^β]`.
fn noncentral_moment(alpha: &[u32], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let mut beta = vec![0u32; alpha.len()];
    let mut total = 0.0;
    loop {
        let central_degree: u32 = beta.iter().sum();
        if central_degree.is_multiple_of(2) {
            let mut coef = 1.0;
            for i in 0..alpha.len() {
                coef *= binomial(alpha[i] as u64, beta[i] as u64).expect("small binomial") as f64
                    * mean[i].powi((alpha[i] - beta[i]) as i32);
            }
            if coef != 0.0 {
                total += coef * central_moment(&beta, cov);
            }
        }
        // odometer over 0 ≤ β ≤ α
        let mut i = 0;
        loop {
            if i == beta.len() {
                return total;
            }
            if beta[i] < alpha[i] {
                beta[i] += 1;
                break;
            }
            beta[i] = 0;
            i += 1;
        }
    }
}

/// Isserlis: `E[Z^β]` for zero-mean Gaussian `Z`.
fn central_moment(beta: &[u32], cov: &DMatrix<f64>) -> f64 {
    let items: Vec<usize> = beta
        .iter()
        .enumerate()
        .flat_map(|(i, &b)| std::iter::repeat_n(i, b as usize))
        .collect();
    if items.len() % 2 == 1 {
        return 0.0;
    }
    pair_partition_sum(&items, cov)
}

fn pair_partition_sum(items: &[usize], cov: &DMatrix<f64>) -> f64 {
    if items.is_empty() {
        return 1.0;
    }
    let first = items[0];
    let rest = &items[1..];
    let mut total = 0.0;
    let mut remaining = Vec::with_capacity(rest.len().saturating_sub(1));
    for p in 0..rest.len() {
        remaining.clear();
        remaining.extend(rest.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v));
        total += cov[(first, rest[p])] * pair_partition_sum(&remaining, cov);
    }
    total
}

/// Analytic degree-`k` moment vector of a mixture.
pub fn gmm_moment_vector(gmm: &MultivariateGmm, k: u32) -> Result<MomentVector> {
    let basis = enumerate_multi_indices(gmm.dim(), k)?;
    let values = basis
        .iter()
        .map(|a| multivariate_gmm_moment_capped(gmm, a, k.max(DEFAULT_DEGREE_CAP)))
        .collect::<Result<Vec<_>>>()?;
    MomentVector::new(basis, values)
}

/// `(1/N) Σ_i x_i^α`.
pub fn empirical_moment(points: &PointSet, alpha: &MultiIndex) -> Result<f64> {
    if alpha.dim() != points.d() {
        return Err(Error::DimensionMismatch {
            expected: points.d(),
            found: alpha.dim(),
        });
    }
    let sum: f64 = points.rows().map(|r| alpha.monomial(r)).sum();
    Ok(sum / points.n() as f64)
}

pub fn empirical_moment_vector(points: &PointSet, k: u32) -> Result<MomentVector> {
    let basis = enumerate_multi_indices(points.d(), k)?;
    let values = basis
        .iter()
        .map(|a| empirical_moment(points, a))
        .collect::<Result<Vec<_>>>()?;
    MomentVector::new(basis, values)
}

/// Outcome of [`hankel_psd_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelCheck {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// Spectral norm `‖H_n‖₂`, the scale of the PSD tolerance.
    pub norm: f64,
}

/// `H_n = (m_{i+j})_{0 ≤ i,j ≤ n}`.
pub fn hankel_matrix(moments: &MomentSequence, n: usize) -> Result<DMatrix<f64>> {
    let needed = 2 * n + 1;
    if moments.len() < needed {
        return Err(Error::InsufficientMoments {
            needed,
            available: moments.len(),
        });
    }
    Ok(DMatrix::from_fn(n + 1, n + 1, |i, j| moments.values[i + j]))
}

/// Smallest eigenvalue of `H_n`; PSD when it is at least `−1e−10 · ‖H_n‖₂`.
pub fn hankel_psd_check(moments: &MomentSequence, n: usize) -> Result<HankelCheck> {
    let h = hankel_matrix(moments, n)?;
    let eig = h.symmetric_eigenvalues();
    let min_eigenvalue = eig.min();
    let norm = eig.amax();
    Ok(HankelCheck {
        is_psd: min_eigenvalue >= -1e-10 * norm,
        min_eigenvalue,
        norm,
    })
}

/// `Σ_{k=1}^{terms} m_{2k}^{−1/(2k)}` with `even_moments[k−1] = m_{2k}`.
///
/// Finitely many terms cannot certify divergence; the value is only a
/// diagnostic of how fast the even moments grow.
pub fn carleman_partial_sum(even_moments: &[f64], terms: usize) -> Result<f64> {
    if even_moments.len() < terms {
        return Err(Error::InsufficientMoments {
            needed: terms,
            available: even_moments.len(),
        });
    }
    let mut sum = 0.0;
    for (i, &m) in even_moments[..terms].iter().enumerate() {
        let order = 2 * (i + 1);
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NonPositiveEvenMoment { order, value: m });
        }
        sum += m.powf(-1.0 / order as f64);
    }
    Ok(sum)
}
