//! Point sets and Gaussian mixtures.
//!
//! File formats:
//!
//! * **PointSet CSV**: one point per line, `d` comma-separated decimal
//!   floats. Lines starting with `#` and blank lines are ignored.
//! * **GMM spec** (JSON): `{"weights": [π_1, …], "means": [[…], …],
//!   "covariances": [[[…], …], …]}` with one `d`-vector mean and one `d×d`
//!   row-major covariance per component.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `N × d` finite samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    /// Takes row-major `data` of `n · d` finite values.
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if data.is_empty() {
            return Err(Error::Empty);
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::RaggedRows {
                row: data.len() / d,
                expected: d,
                found: data.len() % d,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: pos / d,
                col: pos % d,
            });
        }
        let n = data.len() / d;
        Ok(Self { data, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows reordered by `perm` (`perm[i]` is the source row of output row `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Self {
            data,
            n: self.n,
            d: self.d,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn pointset_from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<PointSet> {
    let first = rows.first().ok_or(Error::Empty)?.as_ref().len();
    if first == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut data = Vec::with_capacity(rows.len() * first);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != first {
            return Err(Error::RaggedRows {
                row: i,
                expected: first,
                found: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: i, col });
        }
        data.extend_from_slice(r);
    }
    PointSet::from_flat(data, first)
}

/// Parses PointSet CSV text. Errors name the 1-based line.
pub fn parse_pointset_csv(text: &str) -> Result<PointSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lines = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        rows.push(row);
        lines.push(lineno + 1);
    }
    pointset_from_rows(&rows).map_err(|e| match e {
        Error::RaggedRows { row, .. } | Error::NonFiniteEntry { row, .. } => {
            Error::Parse(format!("line {}: {e}", lines[row]))
        }
        other => other,
    })
}

pub fn read_pointset_csv(path: &Path) -> Result<PointSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_pointset_csv(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn check_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::NoComponents);
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { index, value: w });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum { sum });
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// `Σ_j π_j N(μ_j, Σ_j)` in `R^d`, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateGmm {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    cholesky: Vec<DMatrix<f64>>,
}

impl MultivariateGmm {
    pub fn new(weights: Vec<f64>, means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        validate_gmm(weights, means, covariances)
    }

    /// Like [`MultivariateGmm::new`] after adding `1e-10 · trace(Σ_j) / d`
    /// to every covariance diagonal.
    pub fn with_jitter(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        mut covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        for c in &mut covariances {
            let d = c.nrows().max(1) as f64;
            let eps = 1e-10 * c.trace() / d;
            for i in 0..c.nrows().min(c.ncols()) {
                c[(i, i)] += eps;
            }
        }
        validate_gmm(weights, means, covariances)
    }

    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        validate_gmm(vec![1.0], vec![mean], vec![covariance])
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        Self::single(DVector::zeros(d), DMatrix::identity(d, d)).expect("identity is PD")
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn cholesky_factors(&self) -> &[DMatrix<f64>] {
        &self.cholesky
    }

    /// `Σ_j π_j μ_j`.
    pub fn mean(&self) -> DVector<f64> {
        self.weights
            .iter()
            .zip(&self.means)
            .fold(DVector::zeros(self.dim()), |acc, (w, m)| acc + m * *w)
    }

    /// Applies `x ↦ Q x` to every component.
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Self> {
        let means = self.means.iter().map(|m| q * m).collect();
        let covs = self
            .covariances
            .iter()
            .map(|c| {
                let r = q * c * q.transpose();
                (&r + r.transpose()) * 0.5
            })
            .collect();
        Self::new(self.weights.clone(), means, covs)
    }

    /// Pushforward under `x ↦ θᵀx`: `Σ_j π_j N(θᵀμ_j, θᵀΣ_jθ)`, in component order.
    pub fn slice(&self, theta: &[f64]) -> Result<UnivariateGmm> {
        crate::util::check_unit(theta)?;
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        let t = DVector::from_column_slice(theta);
        let means = self.means.iter().map(|m| m.dot(&t)).collect();
        let stddevs = self.covariances.iter().map(|c| (c * &t).dot(&t).sqrt()).collect();
        Ok(UnivariateGmm::from_parts_unchecked(
            self.weights.clone(),
            means,
            stddevs,
        ))
    }

    pub fn to_spec(&self) -> GmmSpec {
        GmmSpec {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: self
                .covariances
                .iter()
                .map(|c| c.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
        }
    }
}

/// Serialized form of a [`MultivariateGmm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmSpec {
    pub fn to_gmm(&self) -> Result<MultivariateGmm> {
        let d = self.means.first().map(Vec::len).ok_or(Error::NoComponents)?;
        let means = self.means.iter().map(|m| DVector::from_column_slice(m)).collect();
        let mut covs = Vec::with_capacity(self.covariances.len());
        for c in &self.covariances {
            if c.len() != d || c.iter().any(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.len(),
                });
            }
            covs.push(DMatrix::from_fn(d, d, |i, j| c[i][j]));
        }
        validate_gmm(self.weights.clone(), means, covs)
    }
}

impl TryFrom<GmmSpec> for MultivariateGmm {
    type Error = Error;

    fn try_from(spec: GmmSpec) -> Result<Self> {
        spec.to_gmm()
    }
}

pub fn parse_gmm_spec(text: &str) -> Result<MultivariateGmm> {
    let spec: GmmSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.to_gmm()
}

pub fn read_gmm_spec(path: &Path) -> Result<MultivariateGmm> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_gmm_spec(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Checks every mixture invariant and reports the first violation.
pub fn validate_gmm(
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    mut covariances: Vec<DMatrix<f64>>,
) -> Result<MultivariateGmm> {
    if weights.is_empty() {
        return Err(Error::NoComponents);
    }
    if means.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: means.len(),
        });
    }
    if covariances.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: covariances.len(),
        });
    }
    let d = means[0].len();
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    for m in &means {
        if m.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.len(),
            });
        }
        if let Some(col) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: 0, col });
        }
    }
    let weights = check_weights(&weights)?;
    let mut cholesky = Vec::with_capacity(covariances.len());
    for (index, c) in covariances.iter_mut().enumerate() {
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.nrows(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPDCovariance { index });
        }
        let scale = c.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::AsymmetricCovariance { index });
                }
                let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = avg;
                c[(j, i)] = avg;
            }
        }
        let chol = c.clone().cholesky().ok_or(Error::NonPDCovariance { index })?;
        cholesky.push(chol.l());
    }
    Ok(MultivariateGmm {
        weights,
        means,
        covariances,
        cholesky,
    })
}

/// Draws `n` i.i.d. points. Component choice is inverse-CDF on the weights
/// from one uniform; the point is `μ_j + L_j z` with `z` standard normal and
/// `L_j` the Cholesky factor of `Σ_j`. One ChaCha8 stream per call.
pub fn sample_gmm(gmm: &MultivariateGmm, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let d = gmm.dim();
    let mut cdf = Vec::with_capacity(gmm.k());
    let mut acc = 0.0;
    for w in gmm.weights() {
        acc += w;
        cdf.push(acc);
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let j = cdf.partition_point(|&c| c <= u).min(gmm.k() - 1);
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let x = &gmm.means[j] + &gmm.cholesky[j] * &z;
        data.extend(x.iter());
    }
    PointSet::from_flat(data, d)
}

/// One slice's mixture `Σ_k π_k N(μ_k, σ_k²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateGmm {
    weights: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl UnivariateGmm {
    /// Validates weights (positive, summing to 1 within 1e-12, then
    /// renormalized), finite means and positive standard deviations.
    /// Component order is kept as given.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stddevs: Vec<f64>) -> Result<Self> {
        if means.len() != weights.len() || stddevs.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: means.len().min(stddevs.len()),
            });
        }
        let weights = check_weights(&weights)?;
        if let Some(col) = means.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFiniteEntry { row: 0, col });
        }
        for (index, &s) in stddevs.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonPositiveStddev { index, value: s });
            }
        }
        Ok(Self {
            weights,
            means,
            stddevs,
        })
    }

    pub fn single(mean: f64, stddev: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![stddev])
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, means: Vec<f64>, stddevs: Vec<f64>) -> Self {
        Self {
            weights,
            means,
            stddevs,
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }

    /// `(π_k, μ_k, σ_k)` triples in stored order.
    pub fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.k()).map(|i| (self.weights[i], self.means[i], self.stddevs[i]))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components().map(|(w, m, s)| w * normal_pdf(x, m, s)).sum()
    }

    /// Sorted ascending by mean, then stddev, then weight.
    pub fn is_canonical(&self) -> bool {
        let c: Vec<_> = self.components().collect();
        c.windows(2)
            .all(|w| component_order(&w[0], &w[1]) != std::cmp::Ordering::Greater)
    }

    /// Pushes the mixture through `y ↦ scale · y + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| scale * m + shift).collect(),
            stddevs: self.stddevs.iter().map(|s| scale.abs() * s).collect(),
        }
    }
}

pub(crate) fn component_order(a: &(f64, f64, f64), b: &(f64, f64, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then(a.0.total_cmp(&b.0))
}

pub(crate) fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}
