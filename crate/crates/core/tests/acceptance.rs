//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --release --test acceptance` (the test profile is
//! already optimized, so plain `cargo test` works too).

use std::time::{Duration, Instant};

use emperor::bench::{run_benchmark, BenchConfig, DatasetSpec, Method};
use emperor::descriptor::{baseline_pool, emperor_descriptor, Descriptor, DescriptorConfig, Pooling};
use emperor::gmm1d::{fit_gmm1d, EmConfig};
use emperor::model::{sample_gmm, MultivariateGmm, PointSet, UnivariateGmm};
use emperor::momentindex::{enumerate_multi_indices, monomial_count, multinomial_coefficient};
use emperor::moments::{
    gmm_moment_vector, hankel_psd_check, multivariate_gmm_moment, sliced_gmm_moment, MomentSequence,
};
use emperor::reconstruct::{rate_study, recover_moments, RateMode, RateStudyConfig, SlicedMomentVector};
use emperor::slicing::{generate_directions, DirectionScheme};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn random_gmm(rng: &mut ChaCha8Rng, d: usize, k: usize) -> MultivariateGmm {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = (0..k)
        .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    let covs = (0..k)
        .map(|_| {
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2
        })
        .collect();
    MultivariateGmm::new(weights, means, covs).expect("valid random gmm")
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

fn rel_err(est: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = truth.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(1..=5);
        let k = rng.random_range(0..=4u32);
        let comps = rng.random_range(1..=3);
        let gmm = random_gmm(&mut rng, d, comps);
        let theta = random_unit(&mut rng, d);
        let lhs = sliced_gmm_moment(&gmm, &theta, k).map_err(|e| e.to_string())?;
        let mut rhs = 0.0;
        let mut scale = 0.0;
        for alpha in enumerate_multi_indices(d, k).map_err(|e| e.to_string())?.iter() {
            let c = multinomial_coefficient(k, alpha).map_err(|e| e.to_string())? as f64;
            let term = c * alpha.monomial(&theta) * multivariate_gmm_moment(&gmm, alpha).map_err(|e| e.to_string())?;
            rhs += term;
            scale += term.abs();
        }
        worst = worst.max((lhs - rhs).abs() / scale.max(lhs.abs()));
    }
    let msg = format!("50 triples, worst relative gap {worst:.2e} (tol 1e-9)");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let gmm = random_gmm(&mut rng, 4, 3);
    let mut parts = Vec::new();
    let mut ok = true;
    for k in 1..=3u32 {
        let mk = monomial_count(4, k).map_err(|e| e.to_string())? as usize;
        let slices = generate_directions(4, 2 * mk, 7 + k as u64, DirectionScheme::IidGaussianNormalized)
            .map_err(|e| e.to_string())?;
        let desc = Descriptor::exact(&gmm, slices).map_err(|e| e.to_string())?;
        let est = recover_moments(&desc, k, Some(0.0)).map_err(|e| e.to_string())?;
        let truth = gmm_moment_vector(&gmm, k).map_err(|e| e.to_string())?;
        let err = rel_err(est.values(), truth.values());
        ok &= err <= 1e-7;
        parts.push(format!("k={k} L={} err={err:.1e}", 2 * mk));
    }
    let msg = format!("{} (tol 1e-7)", parts.join(", "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let gmm = random_gmm(&mut rng, 3, 2);
    let ls: Vec<usize> = (4..=10).map(|p| 1usize << p).collect();
    let mut cfg = RateStudyConfig::new(gmm, 2, ls);
    cfg.trials = 50;
    cfg.noise_scale = 1.0;
    cfg.sample_size = 100;
    cfg.seed = 3;
    cfg.mode = RateMode::NoiseModel;
    let base = rate_study(&cfg).map_err(|e| e.to_string())?;
    let slope = base.slope.ok_or("no slope")?;
    let mut cfg4 = cfg.clone();
    cfg4.sample_size = 400;
    let quad = rate_study(&cfg4).map_err(|e| e.to_string())?;
    let worst_ratio = base
        .rows
        .iter()
        .zip(&quad.rows)
        .map(|(a, b)| (b.rmse_mean / (0.5 * a.rmse_mean) - 1.0).abs())
        .fold(0.0, f64::max);
    let msg = format!(
        "noise sd {:.3}, slope {slope:.3} (want [-0.65, -0.35]), worst |rmse(4N)/(rmse(N)/2) - 1| = {worst_ratio:.3} (tol 0.25)",
        base.noise_sd
    );
    if (-0.65..=-0.35).contains(&slope) && worst_ratio <= 0.25 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sample_univariate(rng: &mut ChaCha8Rng, g: &UnivariateGmm, n: usize) -> Vec<f64> {
    use rand_distr::{Distribution, Normal};
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut c = g.k() - 1;
            for (i, w) in g.weights().iter().enumerate() {
                acc += w;
                if u < acc {
                    c = i;
                    break;
                }
            }
            Normal::new(g.means()[c], g.stddevs()[c]).unwrap().sample(rng)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_drop = 0.0f64;
    let mut violations = 0;
    for fit in 0..100u64 {
        let true_k = rng.random_range(1..=4);
        let raw: Vec<f64> = (0..true_k).map(|_| rng.random_range(0.2..1.0)).collect();
        let t: f64 = raw.iter().sum();
        let g = UnivariateGmm::new(
            raw.iter().map(|w| w / t).collect(),
            (0..true_k).map(|_| rng.random_range(-5.0..5.0)).collect(),
            (0..true_k).map(|_| rng.random_range(0.3..2.0)).collect(),
        )
        .map_err(|e| e.to_string())?;
        let n = rng.random_range(50..2000);
        let y = sample_univariate(&mut rng, &g, n);
        let cfg = EmConfig {
            components: rng.random_range(1..=4),
            seed: fit,
            ..EmConfig::default()
        };
        let rep = fit_gmm1d(&y, &cfg).map_err(|e| e.to_string())?;
        for i in 1..rep.loglik_trace.len() {
            if rep.reseeds.contains(&i) {
                continue;
            }
            let drop = rep.loglik_trace[i - 1] - rep.loglik_trace[i];
            worst_drop = worst_drop.max(drop / n as f64);
            if drop > 1e-9 * n as f64 {
                violations += 1;
            }
        }
    }

    let y = sample_univariate(&mut rng, &UnivariateGmm::single(1.5, 2.0).unwrap(), 3000);
    let rep = fit_gmm1d(&y, &EmConfig::new(1)).map_err(|e| e.to_string())?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let k1_err = ((rep.gmm.means()[0] - mean).abs() / mean.abs()).max((rep.gmm.stddevs()[0].powi(2) - var).abs() / var);

    let sep = UnivariateGmm::new(vec![0.3, 0.7], vec![-10.0, 10.0], vec![1.0, 1.0]).unwrap();
    let y = sample_univariate(&mut rng, &sep, 5000);
    let rep = fit_gmm1d(&y, &EmConfig::new(2)).map_err(|e| e.to_string())?;
    let mean_err = (rep.gmm.means()[0] + 10.0).abs().max((rep.gmm.means()[1] - 10.0).abs());
    let weight_err = (rep.gmm.weights()[0] - 0.3).abs();

    let msg = format!(
        "100 fits: {violations} ascent violations (worst per-sample drop {worst_drop:.1e}); \
         K=1 rel err {k1_err:.1e}; ±10 mixture mean err {mean_err:.3}, weight err {weight_err:.3}"
    );
    if violations == 0 && k1_err < 1e-12 && mean_err <= 0.1 && weight_err <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let gmm = MultivariateGmm::new(
        vec![0.4, 0.6],
        vec![
            DVector::from_vec(vec![-1.5, 0.5, 1.0]),
            DVector::from_vec(vec![1.0, -0.5, 0.0]),
        ],
        vec![
            DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 0.8, 0.1, 0.0, 0.1, 0.5]),
            DMatrix::from_row_slice(3, 3, &[0.6, -0.2, 0.1, -0.2, 1.2, 0.0, 0.1, 0.0, 0.9]),
        ],
    )
    .map_err(|e| e.to_string())?;
    let truth = gmm_moment_vector(&gmm, 2).map_err(|e| e.to_string())?;
    let mut errs = Vec::new();
    for seed in 0..10u64 {
        let points = sample_gmm(&gmm, 50_000, 1000 + seed).map_err(|e| e.to_string())?;
        let cfg = DescriptorConfig {
            slices: 64,
            components: 2,
            em: EmConfig {
                restarts: 1,
                max_iters: 50,
                rel_tol: 1e-6,
                ..EmConfig::default()
            },
            seed,
            ..DescriptorConfig::default()
        };
        let desc = emperor_descriptor(&points, &cfg).map_err(|e| e.to_string())?;
        let est = recover_moments(&desc, 2, None).map_err(|e| e.to_string())?;
        errs.push(rel_err(est.values(), truth.values()));
    }
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[4] + errs[5]);
    let msg = format!("median relative degree-2 error over 10 seeds {median:.4} (tol 0.10)");
    if median <= 0.10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut failures = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=4);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let t: f64 = raw.iter().sum();
        let g = UnivariateGmm::new(
            raw.iter().map(|w| w / t).collect(),
            (0..k).map(|_| rng.random_range(-3.0..3.0)).collect(),
            (0..k).map(|_| rng.random_range(0.1..2.0)).collect(),
        )
        .map_err(|e| e.to_string())?;
        let seq = MomentSequence::of_gmm(&g, 8);
        for n in 0..=4 {
            if !hankel_psd_check(&seq, n).map_err(|e| e.to_string())?.is_psd {
                failures += 1;
            }
        }
    }
    let bad = MomentSequence::new(vec![1.0, 0.0, -1.0]).map_err(|e| e.to_string())?;
    let bad_check = hankel_psd_check(&bad, 1).map_err(|e| e.to_string())?;
    let msg = format!(
        "{failures} of 500 valid Hankel checks (H_0..H_4) rejected; (1, 0, -1) is_psd={} (min eig {})",
        bad_check.is_psd, bad_check.min_eigenvalue
    );
    if failures == 0 && !bad_check.is_psd {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let mut cfg = BenchConfig::new(DatasetSpec::MatchedMoments {
        dim: 4,
        separation: 0.9,
        sets_per_class: 200,
        points_per_set: 500,
    });
    cfg.methods = vec![Method::Pool(Pooling::Gap), Method::Pool(Pooling::Cov), Method::Emperor];
    let report = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    let gap = report.summary_for("GAP").ok_or("missing GAP")?.test_mean;
    let cov = report.summary_for("COV").ok_or("missing COV")?.test_mean;
    let emp = report.summary_for("EMPEROR").ok_or("missing EMPEROR")?.test_mean;
    let msg = format!(
        "mean test accuracy over 5 seeds: GAP {gap:.3}, COV {cov:.3} (want ≤ 0.60), EMPEROR {emp:.3} (want ≥ 0.85)"
    );
    if gap <= 0.60 && cov <= 0.60 && emp >= 0.85 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let gmm = random_gmm(&mut rng, 3, 2);
    let points = sample_gmm(&gmm, 400, 5).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();

    for standardize in [false, true] {
        let cfg = DescriptorConfig {
            slices: 16,
            components: 2,
            seed: 11,
            standardize_slices: standardize,
            ..DescriptorConfig::default()
        };
        let run = |p: &PointSet| emperor_descriptor(p, &cfg).map(|d| d.to_json());
        let a = in_pool(1, || run(&points)).map_err(|e| e.to_string())?;
        let b = in_pool(4, || run(&points)).map_err(|e| e.to_string())?;
        let c = in_pool(1, || run(&points)).map_err(|e| e.to_string())?;
        if a != b || a != c {
            problems.push(format!(
                "descriptor bytes differ across runs/threads (standardize={standardize})"
            ));
        }
        let mut perm: Vec<usize> = (0..points.n()).collect();
        perm.shuffle(&mut rng);
        let p = run(&points.permuted(&perm)).map_err(|e| e.to_string())?;
        if p != a {
            problems.push(format!(
                "descriptor not permutation invariant (standardize={standardize})"
            ));
        }
    }

    let mut perm: Vec<usize> = (0..points.n()).collect();
    perm.shuffle(&mut rng);
    let shuffled = points.permuted(&perm);
    for pool in [
        Pooling::Gap,
        Pooling::Max,
        Pooling::Gem { p: 3.0, strict: false },
        Pooling::Cov,
    ] {
        if baseline_pool(&points, pool) != baseline_pool(&shuffled, pool) {
            problems.push(format!("{} pooling not permutation invariant", pool.name()));
        }
    }

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(2..=5);
        let g = random_gmm(&mut rng, d, 2);
        let q = random_rotation(&mut rng, d);
        let rotated = g.transformed(&q).map_err(|e| e.to_string())?;
        let theta = random_unit(&mut rng, d);
        let qt: Vec<f64> = (&q * DVector::from_column_slice(&theta)).iter().copied().collect();
        for k in 0..=4 {
            let a = sliced_gmm_moment(&g, &theta, k).map_err(|e| e.to_string())?;
            let b = sliced_gmm_moment(&rotated, &qt, k).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        let slices =
            generate_directions(d, 30, 1, DirectionScheme::IidGaussianNormalized).map_err(|e| e.to_string())?;
        let y = SlicedMomentVector::exact(&g, &slices, 2).map_err(|e| e.to_string())?;
        let yr = SlicedMomentVector::exact(&rotated, &slices.rotated(&q), 2).map_err(|e| e.to_string())?;
        for (a, b) in y.values.iter().zip(&yr.values) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    if worst > 1e-10 {
        problems.push(format!("rotation gap {worst:.1e}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "byte-identical over runs and 1/4 threads, permutation invariant, rotation gap {worst:.1e} (tol 1e-10)"
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 sliced-moment identity", criterion_1, Duration::from_secs(10)),
        ("2 noiseless exact recovery", criterion_2, Duration::from_secs(5)),
        ("3 recovery rate", criterion_3, Duration::from_secs(120)),
        ("4 EM correctness", criterion_4, Duration::MAX),
        ("5 end-to-end moment fidelity", criterion_5, Duration::from_secs(60)),
        ("6 Hankel diagnostics", criterion_6, Duration::MAX),
        ("7 higher-moment separability", criterion_7, Duration::from_secs(300)),
        ("8 determinism and invariance", criterion_8, Duration::MAX),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if elapsed > budget {
            let note = format!(" [runtime {elapsed:.1?} over budget {budget:.0?}]");
            outcome = match outcome {
                Ok(m) | Err(m) => Err(m + &note),
            };
        }
        match outcome {
            Ok(m) => println!("PASS criterion {name}: {m} ({elapsed:.1?})"),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {name}: {m} ({elapsed:.1?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
