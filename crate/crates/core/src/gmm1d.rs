//! Univariate Gaussian mixture fitting by expectation-maximization.
//!
//! Samples are sorted before anything else, so a fit depends only on the
//! multiset of values and never on their order. Each restart seeds its
//! centers k-means++ style (first center uniform, then squared-distance
//! sampling), runs one Lloyd pass, and moment-matches each cluster. Every
//! step commutes with `y ↦ a·y + b` for `a > 0`, which makes fits
//! affine-equivariant for a fixed seed.
//!
//! Variances are floored at `variance_floor_scale · Var(y)` (or `1e-12` for
//! constant data). Convergence is declared when the per-sample
//! log-likelihood changes by less than `rel_tol` between iterations. That
//! quantity is unchanged by affine maps of the data.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::{component_order, UnivariateGmm};
use crate::rng;
use crate::util::canonical_sum;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-12;
const MIN_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub components: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub variance_floor_scale: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            components: 2,
            max_iters: 200,
            rel_tol: 1e-8,
            restarts: 5,
            variance_floor_scale: 1e-6,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.components == 0 {
            return bad("components must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.variance_floor_scale > 0.0) || !self.variance_floor_scale.is_finite() {
            return bad("variance_floor_scale must be positive");
        }
        if !(self.rel_tol >= 0.0) {
            return bad("rel_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Best fit, in canonical component order.
    pub gmm: UnivariateGmm,
    pub final_loglik: f64,
    /// EM iterations of the winning restart.
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub floor_hit: bool,
    /// Variance floor that was applied.
    pub variance_floor: f64,
    /// Log-likelihood before each EM step of the winning restart, followed by
    /// the final value.
    pub loglik_trace: Vec<f64>,
    /// Positions `i` in `loglik_trace` where a starved component was reseeded
    /// between `trace[i-1]` and `trace[i]`; EM ascent does not apply there.
    pub reseeds: Vec<usize>,
}

/// Responsibilities `r_ik`, one row per sample.
pub fn responsibilities(samples: &[f64], gmm: &UnivariateGmm) -> Vec<Vec<f64>> {
    let consts = log_constants(gmm);
    let mut logp = vec![0.0; gmm.k()];
    samples
        .iter()
        .map(|&y| {
            let lse = log_joint(y, gmm, &consts, &mut logp);
            logp.iter().map(|lp| (lp - lse).exp()).collect()
        })
        .collect()
}

/// `log π_k − log σ_k − ½ log 2π` per component.
fn log_constants(gmm: &UnivariateGmm) -> Vec<f64> {
    gmm.components()
        .map(|(w, _, s)| w.ln() - s.ln() - LN_SQRT_2PI)
        .collect()
}

/// Fills `logp[k] = log π_k φ(y; μ_k, σ_k)` and returns `log Σ_k exp(logp[k])`.
#[inline]
fn log_joint(y: f64, gmm: &UnivariateGmm, consts: &[f64], logp: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (k, ((c, m), s)) in consts.iter().zip(gmm.means()).zip(gmm.stddevs()).enumerate() {
        let z = (y - m) / s;
        let v = c - 0.5 * z * z;
        logp[k] = v;
        if v > max {
            max = v;
        }
    }
    let sum: f64 = logp.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `Σ_i log Σ_k π_k φ(y_i; μ_k, σ_k)`.
pub fn log_likelihood(samples: &[f64], gmm: &UnivariateGmm) -> f64 {
    let consts = log_constants(gmm);
    let mut logp = vec![0.0; gmm.k()];
    samples.iter().map(|&y| log_joint(y, gmm, &consts, &mut logp)).sum()
}

struct StepOutput {
    gmm: UnivariateGmm,
    loglik: f64,
    masses: Vec<f64>,
}

fn step(samples: &[f64], gmm: &UnivariateGmm, floor: f64) -> StepOutput {
    let k = gmm.k();
    let consts = log_constants(gmm);
    let mut logp = vec![0.0; k];
    let mut mass = vec![0.0; k];
    // moments are accumulated around the previous means for stability
    let mut s1 = vec![0.0; k];
    let mut s2 = vec![0.0; k];
    let mut loglik = 0.0;
    let inv_sd: Vec<f64> = gmm.stddevs().iter().map(|s| 1.0 / s).collect();
    for &y in samples {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            let z = (y - gmm.means()[c]) * inv_sd[c];
            logp[c] = consts[c] - 0.5 * z * z;
            max = max.max(logp[c]);
        }
        let mut sum = 0.0;
        for v in logp.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loglik += max + sum.ln();
        let inv_sum = 1.0 / sum;
        for c in 0..k {
            let r = logp[c] * inv_sum;
            let dy = y - gmm.means()[c];
            mass[c] += r;
            s1[c] += r * dy;
            s2[c] += r * dy * dy;
        }
    }
    let n = samples.len() as f64;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut stddevs = Vec::with_capacity(k);
    for c in 0..k {
        if mass[c] > MIN_WEIGHT * n {
            let shift = s1[c] / mass[c];
            let var = (s2[c] / mass[c] - shift * shift).max(floor);
            weights.push(mass[c] / n);
            means.push(gmm.means()[c] + shift);
            stddevs.push(var.sqrt());
        } else {
            weights.push(MIN_WEIGHT);
            means.push(gmm.means()[c]);
            stddevs.push(gmm.stddevs()[c]);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    StepOutput {
        gmm: UnivariateGmm::from_parts_unchecked(weights, means, stddevs),
        loglik,
        masses: mass,
    }
}

/// One E-step and M-step. Returns the updated mixture and the
/// log-likelihood of the *input* mixture. Updated variances are floored at
/// `variance_floor`.
pub fn em_step(samples: &[f64], gmm: &UnivariateGmm, variance_floor: f64) -> (UnivariateGmm, f64) {
    let out = step(samples, gmm, variance_floor);
    (out.gmm, out.loglik)
}

/// Canonical order: ascending mean, then stddev, then weight.
pub fn sort_components(gmm: &UnivariateGmm) -> UnivariateGmm {
    let mut c: Vec<_> = gmm.components().collect();
    c.sort_by(component_order);
    UnivariateGmm::from_parts_unchecked(
        c.iter().map(|t| t.0).collect(),
        c.iter().map(|t| t.1).collect(),
        c.iter().map(|t| t.2).collect(),
    )
}

struct SampleStats {
    mean: f64,
    var: f64,
}

fn sample_stats(sorted: &[f64]) -> SampleStats {
    let n = sorted.len() as f64;
    let mean = crate::util::neumaier_sum(sorted.iter().copied()) / n;
    let mut sq: Vec<f64> = sorted.iter().map(|y| (y - mean) * (y - mean)).collect();
    let var = canonical_sum(&mut sq) / n;
    SampleStats { mean, var }
}

/// k-means++ seeding on sorted samples, one Lloyd pass, then per-cluster
/// moment matching.
fn initialize(sorted: &[f64], k: usize, floor: f64, total_var: f64, rng: &mut rng::Rng) -> UnivariateGmm {
    let n = sorted.len();
    let mut centers = vec![sorted[rng.random_range(0..n)]];
    let mut dist: Vec<f64> = sorted.iter().map(|y| (y - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = sorted[idx];
        centers.push(c);
        for (d, y) in dist.iter_mut().zip(sorted) {
            *d = d.min((y - c).powi(2));
        }
    }
    centers.sort_by(f64::total_cmp);

    let mut count = vec![0usize; k];
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for &y in sorted {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &m) in centers.iter().enumerate() {
            let d = (y - m).abs();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        let dy = y - centers[best];
        count[best] += 1;
        sum[best] += dy;
        sum_sq[best] += dy * dy;
    }
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut stddevs = Vec::with_capacity(k);
    for c in 0..k {
        if count[c] == 0 {
            weights.push(1.0 / n as f64);
            means.push(centers[c]);
            stddevs.push(total_var.max(floor).sqrt());
        } else {
            let m = count[c] as f64;
            let shift = sum[c] / m;
            weights.push(m / n as f64);
            means.push(centers[c] + shift);
            stddevs.push((sum_sq[c] / m - shift * shift).max(floor).sqrt());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    UnivariateGmm::from_parts_unchecked(weights, means, stddevs)
}

struct Run {
    gmm: UnivariateGmm,
    loglik: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    reseeds: Vec<usize>,
}

fn run_em(sorted: &[f64], init: UnivariateGmm, floor: f64, total_var: f64, config: &EmConfig) -> Run {
    let n = sorted.len() as f64;
    let k = init.k();
    let mut gmm = init;
    let mut reseeded = vec![false; k];
    let mut trace = Vec::new();
    let mut reseeds = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let out = step(sorted, &gmm, floor);
        iterations += 1;
        trace.push(out.loglik);
        gmm = out.gmm;

        let starved: Vec<usize> = (0..k).filter(|&c| out.masses[c] < 1.0 && !reseeded[c]).collect();
        if !starved.is_empty() {
            gmm = reseed(sorted, &gmm, &starved, total_var, floor);
            for c in starved {
                reseeded[c] = true;
            }
            reseeds.push(trace.len());
            prev = None;
            continue;
        }

        if let Some(p) = prev {
            if ((out.loglik - p) / n).abs() < config.rel_tol {
                converged = true;
                break;
            }
        }
        prev = Some(out.loglik);
    }
    let loglik = log_likelihood(sorted, &gmm);
    trace.push(loglik);
    Run {
        gmm,
        loglik,
        iterations,
        converged,
        trace,
        reseeds,
    }
}

/// Moves each starved component onto the worst-explained sample.
fn reseed(sorted: &[f64], gmm: &UnivariateGmm, starved: &[usize], total_var: f64, floor: f64) -> UnivariateGmm {
    let k = gmm.k() as f64;
    let mut weights = gmm.weights().to_vec();
    let mut means = gmm.means().to_vec();
    let mut stddevs = gmm.stddevs().to_vec();
    let mut current = gmm.clone();
    for &c in starved {
        let mut worst = 0;
        let mut worst_density = f64::INFINITY;
        for (i, &y) in sorted.iter().enumerate() {
            let d = current.density(y);
            if d < worst_density {
                worst_density = d;
                worst = i;
            }
        }
        means[c] = sorted[worst];
        stddevs[c] = (total_var / (k * k)).max(floor).sqrt();
        weights[c] = 1.0 / k;
        let total: f64 = weights.iter().sum();
        let w: Vec<f64> = weights.iter().map(|w| w / total).collect();
        current = UnivariateGmm::from_parts_unchecked(w, means.clone(), stddevs.clone());
    }
    current
}

/// Fits a `config.components`-component mixture, keeping the restart with the
/// highest final log-likelihood (earliest restart on ties within 1e-12).
pub fn fit_gmm1d(samples: &[f64], config: &EmConfig) -> Result<FitReport> {
    config.validate()?;
    let k = config.components;
    if samples.len() < k {
        return Err(Error::TooFewSamples {
            needed: k,
            available: samples.len(),
        });
    }
    if let Some(row) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { row, col: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let stats = sample_stats(&sorted);
    let floor = if stats.var > 0.0 {
        config.variance_floor_scale * stats.var
    } else {
        ABSOLUTE_VARIANCE_FLOOR
    };

    if stats.var == 0.0 || k == 1 {
        let var = stats.var.max(floor);
        let gmm =
            UnivariateGmm::from_parts_unchecked(vec![1.0 / k as f64; k], vec![stats.mean; k], vec![var.sqrt(); k]);
        let loglik = log_likelihood(&sorted, &gmm);
        return Ok(FitReport {
            gmm,
            final_loglik: loglik,
            iterations: usize::from(k == 1 && stats.var > 0.0),
            restarts_used: 1,
            converged: true,
            floor_hit: stats.var <= floor,
            variance_floor: floor,
            loglik_trace: vec![loglik],
            reseeds: Vec::new(),
        });
    }

    let mut best: Option<Run> = None;
    for r in 0..config.restarts {
        let mut rng = rng::substream(config.seed, r as u64);
        let init = initialize(&sorted, k, floor, stats.var, &mut rng);
        let run = run_em(&sorted, init, floor, stats.var, config);
        let better = match &best {
            None => true,
            Some(b) => run.loglik > b.loglik + 1e-12 * b.loglik.abs().max(1.0),
        };
        if better && run.loglik.is_finite() {
            best = Some(run);
        }
    }
    let run = best.ok_or_else(|| Error::Numerical("every EM restart diverged".into()))?;
    let gmm = sort_components(&run.gmm);
    let floor_hit = gmm.stddevs().iter().any(|s| s * s <= floor * (1.0 + 1e-9));
    Ok(FitReport {
        gmm,
        final_loglik: run.loglik,
        iterations: run.iterations,
        restarts_used: config.restarts,
        converged: run.converged,
        floor_hit,
        variance_floor: floor,
        loglik_trace: run.trace,
        reseeds: run.reseeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_gmm, MultivariateGmm};
    use nalgebra::{DMatrix, DVector};

    fn mixture_samples(means: &[f64], sds: &[f64], weights: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let g = MultivariateGmm::new(
            weights.to_vec(),
            means.iter().map(|&m| DVector::from_element(1, m)).collect(),
            sds.iter().map(|&s| DMatrix::from_element(1, 1, s * s)).collect(),
        )
        .unwrap();
        sample_gmm(&g, n, seed).unwrap().as_flat().to_vec()
    }

    #[test]
    fn single_component_is_closed_form() {
        let y = [1.0, 2.0, 4.0, 8.0];
        let r = fit_gmm1d(&y, &EmConfig::new(1)).unwrap();
        let mean = 15.0 / 4.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert_eq!(r.gmm.means()[0], mean);
        assert!((r.gmm.stddevs()[0] - var.sqrt()).abs() <= 1e-15 * var.sqrt());
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn separated_pair_is_recovered() {
        let y = mixture_samples(&[-10.0, 10.0], &[1.0, 1.0], &[0.5, 0.5], 5000, 3);
        let r = fit_gmm1d(
            &y,
            &EmConfig {
                components: 2,
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.gmm.means()[0] + 10.0).abs() < 0.1, "{:?}", r.gmm);
        assert!((r.gmm.means()[1] - 10.0).abs() < 0.1, "{:?}", r.gmm);
        for w in r.gmm.weights() {
            assert!((w - 0.5).abs() < 0.05);
        }
        assert!(r.converged);
    }

    #[test]
    fn constant_samples_hit_the_floor() {
        let r = fit_gmm1d(&[4.0; 10], &EmConfig::new(2)).unwrap();
        assert_eq!(r.gmm.means(), &[4.0, 4.0]);
        assert_eq!(r.gmm.weights(), &[0.5, 0.5]);
        assert!(r.floor_hit);
        assert_eq!(r.gmm.stddevs()[0], ABSOLUTE_VARIANCE_FLOOR.sqrt());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_gmm1d(&[1.0, 2.0], &EmConfig::new(3)),
            Err(Error::TooFewSamples {
                needed: 3,
                available: 2
            })
        ));
        assert!(matches!(
            fit_gmm1d(&[1.0, f64::NAN, 2.0], &EmConfig::new(2)),
            Err(Error::NonFiniteEntry { row: 1, .. })
        ));
        assert!(fit_gmm1d(
            &[1.0, 2.0],
            &EmConfig {
                restarts: 0,
                ..EmConfig::new(1)
            }
        )
        .is_err());
    }

    #[test]
    fn em_step_fixed_point_for_single_component() {
        let y = [0.5, -1.0, 2.0, 3.5, 0.0];
        let mean = y.iter().sum::<f64>() / 5.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        let g = UnivariateGmm::single(mean, var.sqrt()).unwrap();
        let (next, _) = em_step(&y, &g, 1e-12);
        assert!((next.means()[0] - mean).abs() < 1e-15);
        assert!((next.stddevs()[0] - var.sqrt()).abs() < 1e-15);
        assert_eq!(next.weights(), &[1.0]);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let y = mixture_samples(&[0.0, 3.0, 5.0], &[1.0, 0.5, 2.0], &[0.2, 0.3, 0.5], 200, 9);
        let g = UnivariateGmm::new(vec![0.3, 0.3, 0.4], vec![-1.0, 2.0, 6.0], vec![1.0, 1.0, 0.3]).unwrap();
        for row in responsibilities(&y, &g) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn em_step_ascends() {
        let y = mixture_samples(&[-2.0, 1.0], &[1.0, 0.7], &[0.4, 0.6], 500, 2);
        let mut g = UnivariateGmm::new(vec![0.5, 0.5], vec![-0.1, 0.1], vec![2.0, 2.0]).unwrap();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..30 {
            let (next, ll) = em_step(&y, &g, 1e-9);
            assert!(ll >= last - 1e-9 * y.len() as f64);
            last = ll;
            g = next;
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let g = UnivariateGmm::single(0.0, 1.0).unwrap();
        assert!((log_likelihood(&[0.0], &g) + 0.918_938_533_204_672_7).abs() < 1e-15);
        let y = [0.3, -1.2, 2.5];
        let g2 = UnivariateGmm::new(vec![0.4, 0.6], vec![-1.0, 1.0], vec![0.5, 1.5]).unwrap();
        let c = 3.0;
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        let diff = log_likelihood(&scaled, &g2.affine(c, 0.0)) - log_likelihood(&y, &g2);
        assert!((diff + 3.0 * c.ln()).abs() < 1e-12);
        let dup = [0.3, -1.2, 2.5, 2.5];
        let add = log_likelihood(&dup, &g2) - log_likelihood(&y, &g2);
        assert!((add - g2.density(2.5).ln()).abs() < 1e-12);
        // far tails stay finite
        assert!(log_likelihood(&[1e6], &g).is_finite());
    }

    #[test]
    fn sorting_examples() {
        let g = UnivariateGmm::new(vec![0.3, 0.7], vec![5.0, -2.0], vec![1.0, 2.0]).unwrap();
        let s = sort_components(&g);
        assert_eq!(
            s.components().collect::<Vec<_>>(),
            vec![(0.7, -2.0, 2.0), (0.3, 5.0, 1.0)]
        );
        assert_eq!(sort_components(&s), s);
        let tie = UnivariateGmm::new(vec![0.5, 0.5], vec![3.0, 3.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(sort_components(&tie).stddevs(), &[0.5, 1.0]);
        for x in [-3.0, 0.0, 1.7, 4.0, 9.0] {
            assert!((g.density(x) - s.density(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn fit_ignores_sample_order() {
        let y = mixture_samples(&[-1.0, 2.0], &[0.5, 1.0], &[0.5, 0.5], 300, 4);
        let mut rev = y.clone();
        rev.reverse();
        let c = EmConfig {
            components: 2,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(fit_gmm1d(&y, &c).unwrap(), fit_gmm1d(&rev, &c).unwrap());
    }
}
