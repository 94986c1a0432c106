//! Fit a univariate mixture with EM and inspect the fit report.
//!
//! cargo run --example fit_gmm1d

use emperor::gmm1d::{fit_gmm1d, EmConfig};
use emperor::model::{sample_gmm, MultivariateGmm};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let truth = MultivariateGmm::new(
        vec![0.2, 0.5, 0.3],
        vec![
            DVector::from_vec(vec![-4.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![3.0]),
        ],
        vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.3),
        ],
    )?;
    let y = sample_gmm(&truth, 5000, 11)?.column(0);

    let report = fit_gmm1d(&y, &EmConfig::new(3))?;
    println!(
        "converged={} iterations={} loglik/N={:.5} floor_hit={}",
        report.converged,
        report.iterations,
        report.final_loglik / y.len() as f64,
        report.floor_hit
    );
    for (w, m, s) in report.gmm.components() {
        println!("  w {w:.3}  mu {m:+.3}  sd {s:.3}");
    }
    let steps = report.loglik_trace.windows(2).filter(|w| w[1] >= w[0]).count();
    println!(
        "{} of {} steps increased the log-likelihood",
        steps,
        report.loglik_trace.len() - 1
    );
    Ok(())
}
