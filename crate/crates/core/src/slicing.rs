//! Directions on the unit sphere and projections onto them.
//!
//! Direction `ℓ` is drawn from its own substream `derive_seed(seed, ℓ)`, so
//! a slice set does not depend on evaluation order. Antipodal pairs are kept:
//! for odd `k` the sliced moments along `θ` and `−θ` differ in sign.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MultivariateGmm, PointSet};
use crate::rng;
use crate::util::{check_unit, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionScheme {
    /// Normalized standard Gaussian vectors, i.e. uniform on the sphere.
    #[default]
    IidGaussianNormalized,
    /// `e_1, …, e_min(d, L)` first, then uniform draws.
    AxisAlignedThenRandom,
}

impl std::str::FromStr for DirectionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" | "iid_gaussian_normalized" => Ok(Self::IidGaussianNormalized),
            "axis" | "axis_aligned_then_random" => Ok(Self::AxisAlignedThenRandom),
            other => Err(Error::InvalidArgument(format!("unknown direction scheme `{other}`"))),
        }
    }
}

/// `L` unit directions in `R^d` (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SliceSetRepr", into = "SliceSetRepr")]
pub struct SliceSet {
    directions: Vec<f64>,
    d: usize,
    seed: u64,
    scheme: DirectionScheme,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceSetRepr {
    dim: usize,
    seed: u64,
    scheme: DirectionScheme,
    directions: Vec<Vec<f64>>,
}

impl TryFrom<SliceSetRepr> for SliceSet {
    type Error = Error;

    fn try_from(r: SliceSetRepr) -> Result<Self> {
        let s = SliceSet::from_directions(&r.directions, r.seed, r.scheme)?;
        if s.d != r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: s.d,
            });
        }
        Ok(s)
    }
}

impl From<SliceSet> for SliceSetRepr {
    fn from(s: SliceSet) -> Self {
        SliceSetRepr {
            dim: s.d,
            seed: s.seed,
            scheme: s.scheme,
            directions: s.iter().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl SliceSet {
    /// Wraps explicit directions; each must have unit norm within 1e-10.
    pub fn from_directions<R: AsRef<[f64]>>(rows: &[R], seed: u64, scheme: DirectionScheme) -> Result<Self> {
        let d = rows
            .first()
            .ok_or(Error::InvalidArgument("slice set needs at least one direction".into()))?
            .as_ref()
            .len();
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut directions = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            check_unit(r)?;
            directions.extend_from_slice(r);
        }
        Ok(Self {
            directions,
            d,
            seed,
            scheme,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> DirectionScheme {
        self.scheme
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        &self.directions[l * self.d..(l + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.directions.chunks_exact(self.d)
    }

    /// Every direction mapped through `θ ↦ Q θ`.
    pub fn rotated(&self, q: &nalgebra::DMatrix<f64>) -> Self {
        let mut directions = Vec::with_capacity(self.directions.len());
        for t in self.iter() {
            let v = q * nalgebra::DVector::from_column_slice(t);
            directions.extend(v.iter());
        }
        Self {
            directions,
            ..self.clone()
        }
    }
}

/// Uniform direction on `S^{d−1}` from substream `stream`.
pub fn random_direction(d: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng::substream(seed, stream);
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-150 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn generate_directions(d: usize, l: usize, seed: u64, scheme: DirectionScheme) -> Result<SliceSet> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if l == 0 {
        return Err(Error::InvalidArgument("slice count must be at least 1".into()));
    }
    let axes = match scheme {
        DirectionScheme::IidGaussianNormalized => 0,
        DirectionScheme::AxisAlignedThenRandom => d.min(l),
    };
    let mut directions = Vec::with_capacity(l * d);
    for idx in 0..l {
        if idx < axes {
            directions.extend((0..d).map(|j| if j == idx { 1.0 } else { 0.0 }));
        } else {
            directions.extend(random_direction(d, seed, idx as u64));
        }
    }
    Ok(SliceSet {
        directions,
        d,
        seed,
        scheme,
    })
}

/// `y_i = ⟨x_i, θ⟩`.
pub fn project(points: &PointSet, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != points.d() {
        return Err(Error::DimensionMismatch {
            expected: points.d(),
            found: theta.len(),
        });
    }
    check_unit(theta)?;
    Ok(points.rows().map(|r| dot(r, theta)).collect())
}

/// `min_{j<j'} max(|θᵀ(μ_j − μ_j')|, |θᵀ(Σ_j − Σ_j')θ|)`; zero means two
/// components coincide in the slice. A single-component mixture has no pairs
/// and scores `+∞`.
pub fn collision_score(gmm: &MultivariateGmm, theta: &[f64]) -> Result<f64> {
    let slice = gmm.slice(theta)?;
    let means = slice.means();
    let vars: Vec<f64> = slice.stddevs().iter().map(|s| s * s).collect();
    let mut best = f64::INFINITY;
    for j in 0..slice.k() {
        for jj in (j + 1)..slice.k() {
            let score = (means[j] - means[jj]).abs().max((vars[j] - vars[jj]).abs());
            best = best.min(score);
        }
    }
    Ok(best)
}
