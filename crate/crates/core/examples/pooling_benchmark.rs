//! Matched-moments set classification: mean/covariance poolings versus EMPEROR.
//!
//! cargo run --release --example pooling_benchmark            # quick, 1 seed
//! cargo run --release --example pooling_benchmark -- --full  # 200 sets/class, 5 seeds

use emperor::bench::{run_benchmark, BenchConfig, DatasetSpec, Method};

fn main() -> emperor::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let (sets, seeds) = if full { (200, 5) } else { (60, 1) };
    let mut config = BenchConfig::new(DatasetSpec::MatchedMoments {
        dim: 4,
        separation: 0.9,
        sets_per_class: sets,
        points_per_set: 500,
    });
    config.seeds = (0..seeds).collect();
    config.methods = Method::all(3.0);
    let report = run_benchmark(&config)?;
    print!("{}", report.table());
    Ok(())
}
