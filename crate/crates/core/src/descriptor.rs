//! The descriptor pipeline: project, fit, sort, assemble.
//!
//! A [`Descriptor`] holds `L` canonical univariate mixtures with `K`
//! components each. [`Descriptor::flatten`] lays them out slice-major,
//! component-minor, as `(π, μ, σ)` triples: `3·K·L` numbers regardless of `N`
//! and `d`.
//!
//! The descriptor file is JSON:
//!
//! ```json
//! {
//!   "format": "emperor-descriptor",
//!   "version": 1,
//!   "config": { "slices": 64, "components": 3, "em": {...}, "scheme": "iid_gaussian_normalized",
//!               "seed": 42, "standardize_slices": false },
//!   "directions": { "dim": 3, "seed": 42, "scheme": "iid_gaussian_normalized", "directions": [[...], ...] },
//!   "mixtures": [ { "weights": [...], "means": [...], "stddevs": [...] }, ... ],
//!   "standardization": null | [ { "center": c, "scale": s }, ... ],
//!   "metadata": { "warnings": [...], "generator": "emperor 0.1.0" }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing a file gives
//! back bit-identical values.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm1d::{fit_gmm1d, sort_components, EmConfig};
use crate::model::{MultivariateGmm, PointSet, UnivariateGmm};
use crate::rng::{self, tag};
use crate::slicing::{generate_directions, project, DirectionScheme, SliceSet};
use crate::util::{canonical_sum, neumaier_sum};

const FORMAT: &str = "emperor-descriptor";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorConfig {
    pub slices: usize,
    pub components: usize,
    /// EM settings; `components` and `seed` are overridden per slice.
    pub em: EmConfig,
    pub scheme: DirectionScheme,
    pub seed: u64,
    pub standardize_slices: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            slices: 64,
            components: 3,
            em: EmConfig::default(),
            scheme: DirectionScheme::IidGaussianNormalized,
            seed: 0,
            standardize_slices: false,
        }
    }
}

impl DescriptorConfig {
    pub fn new(slices: usize, components: usize, seed: u64) -> Self {
        Self {
            slices,
            components,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices == 0 {
            return Err(Error::InvalidArgument("slices must be at least 1".into()));
        }
        if self.components == 0 {
            return Err(Error::InvalidArgument("components must be at least 1".into()));
        }
        self.slice_em(0).validate()
    }

    /// EM configuration for slice `l`.
    pub fn slice_em(&self, l: usize) -> EmConfig {
        EmConfig {
            components: self.components,
            seed: rng::derive_seed(rng::derive_seed(self.seed, tag::FIT), l as u64),
            ..self.em
        }
    }
}

/// Affine map `z = (y − center) / scale` applied to a slice before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub warnings: Vec<String>,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    config: DescriptorConfig,
    slices: SliceSet,
    per_slice: Vec<UnivariateGmm>,
    standardization: Option<Vec<Standardization>>,
    metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureRepr {
    weights: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorFile {
    format: String,
    version: u32,
    config: DescriptorConfig,
    directions: SliceSet,
    mixtures: Vec<MixtureRepr>,
    standardization: Option<Vec<Standardization>>,
    metadata: Metadata,
}

fn generator() -> String {
    format!("emperor {}", env!("CARGO_PKG_VERSION"))
}

impl Descriptor {
    /// Assembles a descriptor from parts, checking every layout invariant.
    pub fn from_parts(
        config: DescriptorConfig,
        slices: SliceSet,
        per_slice: Vec<UnivariateGmm>,
        standardization: Option<Vec<Standardization>>,
        metadata: Metadata,
    ) -> Result<Self> {
        if per_slice.len() != slices.len() {
            return Err(Error::DimensionMismatch {
                expected: slices.len(),
                found: per_slice.len(),
            });
        }
        if config.slices != slices.len() {
            return Err(Error::InvalidArgument(format!(
                "config declares {} slices, found {}",
                config.slices,
                slices.len()
            )));
        }
        for (l, g) in per_slice.iter().enumerate() {
            if g.k() != config.components {
                return Err(Error::Slice {
                    slice: l,
                    source: Box::new(Error::DimensionMismatch {
                        expected: config.components,
                        found: g.k(),
                    }),
                });
            }
            if !g.is_canonical() {
                return Err(Error::Slice {
                    slice: l,
                    source: Box::new(Error::InvalidArgument("components not sorted by mean".into())),
                });
            }
        }
        if let Some(s) = &standardization {
            if s.len() != slices.len() {
                return Err(Error::DimensionMismatch {
                    expected: slices.len(),
                    found: s.len(),
                });
            }
            if let Some(bad) = s.iter().find(|t| !(t.scale > 0.0) || !t.center.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid standardization {bad:?}")));
            }
        }
        Ok(Self {
            config,
            slices,
            per_slice,
            standardization,
            metadata,
        })
    }

    /// The population descriptor of `gmm`: each slice holds the exact
    /// pushforward mixture, sorted. No sampling or fitting is involved.
    pub fn exact(gmm: &MultivariateGmm, slices: SliceSet) -> Result<Self> {
        let per_slice = slices
            .iter()
            .map(|t| gmm.slice(t).map(|g| sort_components(&g)))
            .collect::<Result<Vec<_>>>()?;
        let config = DescriptorConfig {
            slices: slices.len(),
            components: gmm.k(),
            scheme: slices.scheme(),
            seed: slices.seed(),
            ..DescriptorConfig::default()
        };
        Self::from_parts(
            config,
            slices,
            per_slice,
            None,
            Metadata {
                warnings: vec![],
                generator: generator(),
            },
        )
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn slices(&self) -> &SliceSet {
        &self.slices
    }

    /// Fitted mixtures as stored (in standardized coordinates when
    /// standardization is on).
    pub fn per_slice(&self) -> &[UnivariateGmm] {
        &self.per_slice
    }

    pub fn standardization(&self) -> Option<&[Standardization]> {
        self.standardization.as_deref()
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.per_slice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_slice.is_empty()
    }

    pub fn components(&self) -> usize {
        self.config.components
    }

    /// Slice `l`'s mixture for the raw projections `θ_lᵀx`, undoing any
    /// standardization.
    pub fn projected_mixture(&self, l: usize) -> UnivariateGmm {
        match &self.standardization {
            Some(s) => self.per_slice[l].affine(s[l].scale, s[l].center),
            None => self.per_slice[l].clone(),
        }
    }

    /// `3·K·L` values: slice-major, component-minor, `(π, μ, σ)` per component.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.components() * self.len());
        for g in &self.per_slice {
            for (w, m, s) in g.components() {
                out.extend([w, m, s]);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = DescriptorFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            config: self.config,
            directions: self.slices.clone(),
            mixtures: self
                .per_slice
                .iter()
                .map(|g| MixtureRepr {
                    weights: g.weights().to_vec(),
                    means: g.means().to_vec(),
                    stddevs: g.stddevs().to_vec(),
                })
                .collect(),
            standardization: self.standardization.clone(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("descriptor serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DescriptorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Parse(format!("unexpected format `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported version {}", file.version)));
        }
        let per_slice = file
            .mixtures
            .into_iter()
            .enumerate()
            .map(|(l, m)| {
                UnivariateGmm::new(m.weights, m.means, m.stddevs).map_err(|e| Error::Slice {
                    slice: l,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            file.config,
            file.directions,
            per_slice,
            file.standardization,
            file.metadata,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Flattened vector as one CSV row after a `#` header naming the layout.
    pub fn flat_csv(&self) -> String {
        let values: Vec<String> = self.flatten().iter().map(|v| format!("{v:?}")).collect();
        format!(
            "# emperor descriptor, L={}, K={}, layout=slice-major,component-minor,(weight,mean,stddev)\n{}\n",
            self.len(),
            self.components(),
            values.join(",")
        )
    }
}

struct SliceFit {
    gmm: UnivariateGmm,
    standardization: Option<Standardization>,
    warning: Option<String>,
}

fn moment_matched(sorted: &[f64], k: usize) -> UnivariateGmm {
    let n = sorted.len() as f64;
    let mean = neumaier_sum(sorted.iter().copied()) / n;
    let mut sq: Vec<f64> = sorted.iter().map(|y| (y - mean) * (y - mean)).collect();
    let var = (canonical_sum(&mut sq) / n).max(1e-12);
    UnivariateGmm::from_parts_unchecked(vec![1.0 / k as f64; k], vec![mean; k], vec![var.sqrt(); k])
}

fn fit_slice(points: &PointSet, theta: &[f64], l: usize, config: &DescriptorConfig) -> Result<SliceFit> {
    let mut y = project(points, theta)?;
    y.sort_unstable_by(f64::total_cmp);
    let standardization = if config.standardize_slices {
        let n = y.len() as f64;
        let center = neumaier_sum(y.iter().copied()) / n;
        let mut sq: Vec<f64> = y.iter().map(|v| (v - center) * (v - center)).collect();
        let sd = (canonical_sum(&mut sq) / n).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        y.iter_mut().for_each(|v| *v = (*v - center) / scale);
        Some(Standardization { center, scale })
    } else {
        None
    };
    let em = config.slice_em(l);
    match fit_gmm1d(&y, &em) {
        Ok(report) => Ok(SliceFit {
            gmm: report.gmm,
            standardization,
            warning: None,
        }),
        Err(e @ Error::TooFewSamples { .. }) => Err(e),
        Err(e) => Ok(SliceFit {
            gmm: moment_matched(&y, config.components),
            standardization,
            warning: Some(format!("slice {l}: fit failed ({e}); used moment-matched fallback")),
        }),
    }
}

/// Builds the descriptor of `points`. Slices are fitted in parallel on the
/// current rayon pool and merged by index, so the result does not depend on
/// the thread count.
pub fn emperor_descriptor(points: &PointSet, config: &DescriptorConfig) -> Result<Descriptor> {
    config.validate()?;
    if points.n() < config.components {
        return Err(Error::TooFewSamples {
            needed: config.components,
            available: points.n(),
        });
    }
    let slices = generate_directions(points.d(), config.slices, config.seed, config.scheme)?;
    let fits = (0..slices.len())
        .into_par_iter()
        .map(|l| {
            fit_slice(points, slices.direction(l), l, config).map_err(|e| Error::Slice {
                slice: l,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut per_slice = Vec::with_capacity(fits.len());
    let mut standardization = Vec::new();
    let mut warnings = Vec::new();
    for f in fits {
        per_slice.push(f.gmm);
        standardization.extend(f.standardization);
        warnings.extend(f.warning);
    }
    let standardization = config.standardize_slices.then_some(standardization);
    Descriptor::from_parts(
        *config,
        slices,
        per_slice,
        standardization,
        Metadata {
            warnings,
            generator: generator(),
        },
    )
}

pub fn flatten(descriptor: &Descriptor) -> Vec<f64> {
    descriptor.flatten()
}

/// Baseline poolings over the points of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Pooling {
    /// Coordinate-wise mean.
    Gap,
    /// Coordinate-wise maximum.
    Max,
    /// Coordinate-wise power mean `(mean x^p)^{1/p}`. The default signed
    /// variant uses `sign(x)|x|^p` and takes a signed root, so negative
    /// inputs are allowed; `strict` rejects them instead.
    Gem { p: f64, strict: bool },
    /// Mean followed by the upper triangle (row-major) of the biased covariance.
    Cov,
}

impl Pooling {
    pub fn name(&self) -> String {
        match self {
            Pooling::Gap => "GAP".into(),
            Pooling::Max => "MAX".into(),
            Pooling::Gem { p, .. } => format!("GeM(p={p})"),
            Pooling::Cov => "COV".into(),
        }
    }

    pub fn output_len(&self, d: usize) -> usize {
        match self {
            Pooling::Cov => d + d * (d + 1) / 2,
            _ => d,
        }
    }
}

fn signed_pow(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

pub fn baseline_pool(points: &PointSet, method: Pooling) -> Result<Vec<f64>> {
    let n = points.n() as f64;
    let d = points.d();
    let mean_of = |j: usize, f: &dyn Fn(f64) -> f64| {
        let mut col: Vec<f64> = points.rows().map(|r| f(r[j])).collect();
        canonical_sum(&mut col) / n
    };
    match method {
        Pooling::Gap => Ok((0..d).map(|j| mean_of(j, &|x| x)).collect()),
        Pooling::Max => Ok((0..d)
            .map(|j| points.rows().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect()),
        Pooling::Gem { p, strict } => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("GeM exponent must be >= 1, got {p}")));
            }
            if strict {
                if let Some(&value) = points.as_flat().iter().find(|v| **v < 0.0) {
                    return Err(Error::GemDomain { value });
                }
            }
            Ok((0..d)
                .map(|j| signed_pow(mean_of(j, &|x| signed_pow(x, p)), 1.0 / p))
                .collect())
        }
        Pooling::Cov => {
            let mean: Vec<f64> = (0..d).map(|j| mean_of(j, &|x| x)).collect();
            let mut out = mean.clone();
            for a in 0..d {
                for b in a..d {
                    let mut prod: Vec<f64> = points.rows().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).collect();
                    out.push(canonical_sum(&mut prod) / n);
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pointset_from_rows, sample_gmm};
    use nalgebra::{DMatrix, DVector};

    fn small_points() -> PointSet {
        let g = MultivariateGmm::new(
            vec![0.4, 0.6],
            vec![
                DVector::from_column_slice(&[-2.0, 0.0, 1.0]),
                DVector::from_column_slice(&[2.0, 1.0, 0.0]),
            ],
            vec![DMatrix::identity(3, 3), DMatrix::identity(3, 3) * 0.5],
        )
        .unwrap();
        sample_gmm(&g, 400, 5).unwrap()
    }

    #[test]
    fn flattened_layout() {
        let p = small_points();
        let cfg = DescriptorConfig::new(7, 2, 1);
        let desc = emperor_descriptor(&p, &cfg).unwrap();
        let flat = desc.flatten();
        assert_eq!(flat.len(), 3 * 2 * 7);
        let first = &desc.per_slice()[0];
        assert_eq!(&flat[..3], &[first.weights()[0], first.means()[0], first.stddevs()[0]]);
        for g in desc.per_slice() {
            assert!(g.is_canonical());
        }
    }

    #[test]
    fn exact_descriptor_flattens_standard_normal() {
        let slices = SliceSet::from_directions(&[[1.0]], 0, DirectionScheme::IidGaussianNormalized).unwrap();
        let d = Descriptor::exact(&MultivariateGmm::standard(1), slices).unwrap();
        assert_eq!(d.flatten(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = small_points();
        let cfg = DescriptorConfig {
            standardize_slices: true,
            ..DescriptorConfig::new(5, 2, 9)
        };
        let desc = emperor_descriptor(&p, &cfg).unwrap();
        let text = desc.to_json();
        let back = Descriptor::from_json(&text).unwrap();
        assert_eq!(back, desc);
        assert_eq!(back.flatten(), desc.flatten());
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_malformed_files() {
        let p = small_points();
        let desc = emperor_descriptor(&p, &DescriptorConfig::new(3, 2, 1)).unwrap();
        let text = desc.to_json().replace("emperor-descriptor", "something-else");
        assert!(Descriptor::from_json(&text).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&desc.to_json()).unwrap();
        v["mixtures"][1]["means"] = serde_json::json!([5.0, -5.0]);
        assert!(Descriptor::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&desc.to_json()).unwrap();
        v["mixtures"].as_array_mut().unwrap().pop();
        assert!(Descriptor::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn standardized_slices_unstandardize_exactly() {
        let p = small_points();
        let raw = emperor_descriptor(&p, &DescriptorConfig::new(4, 1, 3)).unwrap();
        let std = emperor_descriptor(
            &p,
            &DescriptorConfig {
                standardize_slices: true,
                ..DescriptorConfig::new(4, 1, 3)
            },
        )
        .unwrap();
        for l in 0..4 {
            let a = raw.projected_mixture(l);
            let b = std.projected_mixture(l);
            assert!((a.means()[0] - b.means()[0]).abs() < 1e-12);
            assert!((a.stddevs()[0] - b.stddevs()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        let p = pointset_from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            emperor_descriptor(&p, &DescriptorConfig::new(3, 3, 0)),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(emperor_descriptor(&p, &DescriptorConfig::new(0, 1, 0)).is_err());
    }

    #[test]
    fn pooling_examples() {
        let p = pointset_from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(baseline_pool(&p, Pooling::Gap).unwrap(), vec![1.0, 1.0]);
        assert_eq!(baseline_pool(&p, Pooling::Max).unwrap(), vec![2.0, 2.0]);
        assert_eq!(baseline_pool(&p, Pooling::Cov).unwrap(), vec![1.0, 1.0, 1.0, 1.0, 1.0]);
        let q = small_points();
        let pos = PointSet::from_flat(q.as_flat().iter().map(|v| v.abs()).collect(), 3).unwrap();
        let gap = baseline_pool(&pos, Pooling::Gap).unwrap();
        let gem1 = baseline_pool(&pos, Pooling::Gem { p: 1.0, strict: true }).unwrap();
        for (a, b) in gap.iter().zip(&gem1) {
            assert!((a - b).abs() < 1e-15);
        }
        let gem3 = baseline_pool(&pos, Pooling::Gem { p: 3.0, strict: true }).unwrap();
        assert!(gem3.iter().zip(&gap).all(|(g, a)| g >= a));
        assert!(matches!(
            baseline_pool(&q, Pooling::Gem { p: 3.0, strict: true }),
            Err(Error::GemDomain { .. })
        ));
        assert!(baseline_pool(&q, Pooling::Gem { p: 3.0, strict: false }).is_ok());
        assert!(baseline_pool(&q, Pooling::Gem { p: 0.5, strict: false }).is_err());
        assert_eq!(
            baseline_pool(&q, Pooling::Cov).unwrap().len(),
            Pooling::Cov.output_len(3)
        );
    }
}
