//! Recovery error versus number of slices under i.i.d. slice noise.
//!
//! cargo run --example rate_study

use emperor::model::MultivariateGmm;
use emperor::reconstruct::{rate_study, RateStudyConfig};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let gmm = MultivariateGmm::new(
        vec![0.5, 0.5],
        vec![
            DVector::from_vec(vec![-1.0, 0.0, 0.5]),
            DVector::from_vec(vec![1.0, 0.5, 0.0]),
        ],
        vec![DMatrix::identity(3, 3) * 0.5, DMatrix::identity(3, 3)],
    )?;
    let mut config = RateStudyConfig::new(gmm, 2, (4..=10).map(|p| 1 << p).collect());
    config.trials = 50;
    config.noise_scale = 1.0;
    config.sample_size = 100;
    let report = rate_study(&config)?;
    println!("noise sd per slice: {}", report.noise_sd);
    println!("{:>6} {:>12} {:>12}", "L", "rmse", "sd");
    for row in &report.rows {
        println!("{:>6} {:>12.6} {:>12.6}", row.slices, row.rmse_mean, row.rmse_std);
    }
    if let Some(s) = report.slope {
        println!(
            "log-log slope {s:.3} (smallest L excluded: {})",
            report.excluded_smallest
        );
    }
    Ok(())
}
