//! Degree-by-degree moment recovery from sliced moments.
//!
//! For directions `θ_1, …, θ_L` the sliced moment `m_k^{θ}` is a homogeneous
//! degree-`k` polynomial in `θ` whose coefficients are the multivariate
//! moments: `y = Φ_k m` with `(Φ_k)_{ℓ,α} = C(k, α) θ_ℓ^α`. Given sliced
//! moments (exact, noisy, or from a fitted descriptor), `m` is recovered by
//! least squares (QR) or ridge regression (Cholesky of `ΦᵀΦ + λI`).

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{emperor_descriptor, Descriptor, DescriptorConfig};
use crate::error::{Error, Result};
use crate::gmm1d::EmConfig;
use crate::model::{sample_gmm, MultivariateGmm};
use crate::momentindex::{enumerate_multi_indices, monomial_count, multinomial_coefficient, MonomialBasis};
use crate::moments::{gmm_moment_vector, sliced_gmm_moment, univariate_gmm_moment, MomentVector};
use crate::rng::{self, tag};
use crate::slicing::{generate_directions, DirectionScheme, SliceSet};

/// `Φ_k` for a slice set, columns in canonical basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    basis: MonomialBasis,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn design_matrix(slices: &SliceSet, k: u32) -> Result<DesignMatrix> {
    let basis = enumerate_multi_indices(slices.dim(), k)?;
    let coefs = basis
        .iter()
        .map(|a| multinomial_coefficient(k, a).map(|c| c as f64))
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(slices.len(), basis.len(), |l, c| {
        coefs[c] * basis.indices()[c].monomial(slices.direction(l))
    });
    Ok(DesignMatrix { matrix, basis })
}

/// Stacked `m_k^{θ_ℓ}` (or estimates of them), one per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedMomentVector {
    pub degree: u32,
    pub values: Vec<f64>,
}

impl SlicedMomentVector {
    pub fn new(degree: u32, values: Vec<f64>) -> Result<Self> {
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row, col: 0 });
        }
        Ok(Self { degree, values })
    }

    /// Exact sliced moments of a mixture.
    pub fn exact(gmm: &MultivariateGmm, slices: &SliceSet, k: u32) -> Result<Self> {
        let values = slices
            .iter()
            .map(|t| sliced_gmm_moment(gmm, t, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, values)
    }
}

pub fn sliced_moments_from_descriptor(descriptor: &Descriptor, k: u32) -> SlicedMomentVector {
    SlicedMomentVector {
        degree: k,
        values: (0..descriptor.len())
            .map(|l| univariate_gmm_moment(&descriptor.projected_mixture(l), k))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition: f64,
}

pub fn design_diagnostics(design: &DesignMatrix) -> DesignDiagnostics {
    let sv = design.matrix.singular_values();
    let mut sigma_min = sv.min();
    let sigma_max = sv.max();
    if design.rows() < design.cols() {
        sigma_min = 0.0;
    }
    DesignDiagnostics {
        sigma_min,
        sigma_max,
        condition: sigma_max / sigma_min,
    }
}

/// Ridge used when none is given: `0` for `L ≥ 2 M_k`, otherwise
/// `1e-8 · trace(ΦᵀΦ) / M_k`.
pub fn default_ridge(design: &DesignMatrix) -> f64 {
    if design.rows() >= 2 * design.cols() {
        0.0
    } else {
        1e-8 * design.matrix.norm_squared() / design.cols() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub moments: MomentVector,
    /// `‖Φ m̂ − y‖₂`.
    pub residual_norm: f64,
}

/// Least squares for `ridge = 0`, ridge regression otherwise. Refuses
/// (rather than pseudo-inverting) when `ridge = 0` and `σ_min < 1e-10 σ_max`.
pub fn solve_moments(design: &DesignMatrix, y: &SlicedMomentVector, ridge: f64) -> Result<Solution> {
    let phi = &design.matrix;
    if y.values.len() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            found: y.values.len(),
        });
    }
    if y.degree != design.degree() {
        return Err(Error::DegreeMismatch {
            expected: design.degree(),
            actual: y.degree,
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    let rhs = DVector::from_column_slice(&y.values);
    let m = if ridge == 0.0 {
        let diag = design_diagnostics(design);
        if phi.nrows() < phi.ncols() || !(diag.sigma_min >= 1e-10 * diag.sigma_max) {
            return Err(Error::RankDeficient {
                sigma_min: diag.sigma_min,
                sigma_max: diag.sigma_max,
            });
        }
        let qr = phi.clone().qr();
        let qty = qr.q().transpose() * &rhs;
        qr.r()
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?
    } else {
        let mut gram = phi.transpose() * phi;
        for i in 0..gram.nrows() {
            gram[(i, i)] += ridge;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Numerical("regularized normal equations not PD".into()))?;
        chol.solve(&(phi.transpose() * &rhs))
    };
    let residual_norm = (phi * &m - &rhs).norm();
    Ok(Solution {
        moments: MomentVector::new(design.basis.clone(), m.iter().copied().collect())?,
        residual_norm,
    })
}

/// Degree-`k` moments from a descriptor. `ridge = None` uses [`default_ridge`].
pub fn recover_moments(descriptor: &Descriptor, k: u32, ridge: Option<f64>) -> Result<MomentVector> {
    let design = design_matrix(descriptor.slices(), k)?;
    let y = sliced_moments_from_descriptor(descriptor, k);
    let lambda = ridge.unwrap_or_else(|| default_ridge(&design));
    Ok(solve_moments(&design, &y, lambda)?.moments)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Exact sliced moments plus i.i.d. `N(0, (τ/√N)²)` noise.
    #[default]
    NoiseModel,
    /// Sliced moments from descriptors fitted to `N` sampled points.
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyConfig {
    pub gmm: MultivariateGmm,
    pub degree: u32,
    pub slice_counts: Vec<usize>,
    pub trials: usize,
    /// `τ_k`, the per-slice noise scale before the `1/√N` factor.
    pub noise_scale: f64,
    pub sample_size: usize,
    pub ridge: f64,
    pub seed: u64,
    pub mode: RateMode,
    /// EM settings for [`RateMode::EndToEnd`].
    pub em: EmConfig,
}

impl RateStudyConfig {
    pub fn new(gmm: MultivariateGmm, degree: u32, slice_counts: Vec<usize>) -> Self {
        Self {
            gmm,
            degree,
            slice_counts,
            trials: 50,
            noise_scale: 1.0,
            sample_size: 100,
            ridge: 0.0,
            seed: 0,
            mode: RateMode::NoiseModel,
            em: EmConfig::default(),
        }
    }

    /// Per-entry noise standard deviation `τ / √N`.
    pub fn noise_sd(&self) -> f64 {
        self.noise_scale / (self.sample_size as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.slice_counts.is_empty() {
            return bad("slice_counts is empty".into());
        }
        if self.slice_counts.windows(2).any(|w| w[0] >= w[1]) {
            return bad("slice_counts must be strictly increasing".into());
        }
        let m = monomial_count(self.gmm.dim(), self.degree)? as usize;
        if self.ridge == 0.0 && self.slice_counts[0] < m {
            return bad(format!(
                "smallest slice count {} is below M_k = {m}; use a ridge > 0",
                self.slice_counts[0]
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1".into());
        }
        if !(self.noise_scale >= 0.0) || !(self.ridge >= 0.0) {
            return bad("noise_scale and ridge must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    #[serde(rename = "L")]
    pub slices: usize,
    pub trial: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    #[serde(rename = "L")]
    pub slices: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStudyReport {
    pub mode: RateMode,
    pub degree: u32,
    pub noise_sd: f64,
    pub rows: Vec<RateRow>,
    #[serde(skip)]
    pub trials: Vec<TrialResult>,
    /// OLS slope of `log rmse_mean` on `log L`; `None` when the fit is degenerate.
    pub slope: Option<f64>,
    pub excluded_smallest: bool,
    /// `λ_min((1/L) ΦᵀΦ)` for the first trial at the largest `L`.
    pub lambda_min_estimate: f64,
}

impl RateStudyReport {
    /// `L,trial,rmse` rows followed by a `# summary` comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,trial,rmse\n");
        for t in &self.trials {
            out.push_str(&format!("{},{},{:?}\n", t.slices, t.trial, t.rmse));
        }
        let slope = self.slope.map_or("nan".to_string(), |s| format!("{s:?}"));
        out.push_str(&format!(
            "# summary,slope={slope},excluded_smallest={},noise_sd={:?}\n",
            self.excluded_smallest, self.noise_sd
        ));
        out
    }
}

/// Simple linear regression; returns `(slope, intercept)`.
fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let fit = (slope, my - slope * mx);
    (fit.0.is_finite() && fit.1.is_finite()).then_some(fit)
}

/// Minimum log-residual for the smallest L to count as a pre-asymptotic outlier.
const TRANSIENT_FLOOR: f64 = 0.05;

/// Log-log slope with the transient-exclusion rule: the smallest `L` is
/// dropped when it sits more than three residual standard deviations off the
/// line fitted through the remaining points.
pub fn fit_log_slope(slices: &[usize], rmse: &[f64]) -> (Option<f64>, bool) {
    if rmse.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return (None, false);
    }
    let x: Vec<f64> = slices.iter().map(|&l| (l as f64).ln()).collect();
    let y: Vec<f64> = rmse.iter().map(|v| v.ln()).collect();
    let Some((slope, _)) = ols(&x, &y) else {
        return (None, false);
    };
    if x.len() > 3 {
        if let Some((s, c)) = ols(&x[1..], &y[1..]) {
            let resid: Vec<f64> = x[1..].iter().zip(&y[1..]).map(|(a, b)| b - (s * a + c)).collect();
            let sd = (resid.iter().map(|r| r * r).sum::<f64>() / (resid.len() - 2).max(1) as f64).sqrt();
            let r0 = (y[0] - (s * x[0] + c)).abs();
            if r0 > 3.0 * sd && r0 > TRANSIENT_FLOOR {
                return (Some(s), true);
            }
        }
    }
    (Some(slope), false)
}

fn trial_seed(seed: u64, slices: usize, trial: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(seed, slices as u64), trial as u64)
}

fn run_trial(config: &RateStudyConfig, truth: &MomentVector, slices: usize, trial: usize) -> Result<(f64, f64)> {
    let seed = trial_seed(config.seed, slices, trial);
    let k = config.degree;
    let (design, y) = match config.mode {
        RateMode::NoiseModel => {
            let dirs = generate_directions(config.gmm.dim(), slices, seed, DirectionScheme::IidGaussianNormalized)?;
            let mut y = SlicedMomentVector::exact(&config.gmm, &dirs, k)?;
            let sd = config.noise_sd();
            let mut noise = rng::substream(seed, tag::NOISE);
            for v in &mut y.values {
                let e: f64 = noise.sample(StandardNormal);
                *v += sd * e;
            }
            (design_matrix(&dirs, k)?, y)
        }
        RateMode::EndToEnd => {
            let points = sample_gmm(&config.gmm, config.sample_size, rng::derive_seed(seed, tag::DATA))?;
            let dc = DescriptorConfig {
                slices,
                components: config.gmm.k(),
                em: config.em,
                seed,
                ..DescriptorConfig::default()
            };
            let desc = emperor_descriptor(&points, &dc)?;
            (
                design_matrix(desc.slices(), k)?,
                sliced_moments_from_descriptor(&desc, k),
            )
        }
    };
    let sol = solve_moments(&design, &y, config.ridge)?;
    let lambda_min = if trial == 0 {
        let gram = design.matrix().transpose() * design.matrix() / slices as f64;
        gram.symmetric_eigenvalues().min()
    } else {
        f64::NAN
    };
    Ok((sol.moments.distance(truth), lambda_min))
}

/// Recovery error `‖m̂ − m‖₂` as a function of the slice count. Work units
/// `(L, trial)` run in parallel with their own seeds and are merged in order.
pub fn rate_study(config: &RateStudyConfig) -> Result<RateStudyReport> {
    config.validate()?;
    let truth = gmm_moment_vector(&config.gmm, config.degree)?;
    let units: Vec<(usize, usize)> = config
        .slice_counts
        .iter()
        .flat_map(|&l| (0..config.trials).map(move |t| (l, t)))
        .collect();
    let results = units
        .par_iter()
        .map(|&(l, t)| run_trial(config, &truth, l, t))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let trials: Vec<TrialResult> = units
        .iter()
        .zip(&results)
        .map(|(&(slices, trial), &(rmse, _))| TrialResult { slices, trial, rmse })
        .collect();
    let rows: Vec<RateRow> = config
        .slice_counts
        .iter()
        .map(|&l| {
            let errs: Vec<f64> = trials.iter().filter(|t| t.slices == l).map(|t| t.rmse).collect();
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            RateRow {
                slices: l,
                rmse_mean: mean,
                rmse_std: var.sqrt(),
            }
        })
        .collect();
    let (slope, excluded_smallest) = fit_log_slope(
        &rows.iter().map(|r| r.slices).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.rmse_mean).collect::<Vec<_>>(),
    );
    let largest = *config.slice_counts.last().expect("validated nonempty");
    let lambda_min_estimate = units
        .iter()
        .zip(&results)
        .find(|((l, t), _)| *l == largest && *t == 0)
        .map(|(_, r)| r.1)
        .unwrap_or(f64::NAN);
    Ok(RateStudyReport {
        mode: config.mode,
        degree: config.degree,
        noise_sd: config.noise_sd(),
        rows,
        trials,
        slope,
        excluded_smallest,
        lambda_min_estimate,
    })
}
