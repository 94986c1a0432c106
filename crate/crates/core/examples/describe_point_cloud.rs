//! Fit an EMPEROR descriptor to a sampled point cloud and print a few slices.
//!
//! cargo run --example describe_point_cloud

use emperor::gmm1d::sort_components;
use emperor::model::{sample_gmm, MultivariateGmm};
use emperor::{emperor_descriptor, DescriptorConfig};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let gmm = MultivariateGmm::new(
        vec![0.4, 0.6],
        vec![
            DVector::from_vec(vec![-2.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.5, 1.0, -0.5]),
        ],
        vec![DMatrix::identity(3, 3) * 0.5, DMatrix::identity(3, 3) * 0.8],
    )?;
    let points = sample_gmm(&gmm, 2000, 7)?;

    let config = DescriptorConfig::new(16, 2, 42);
    let desc = emperor_descriptor(&points, &config)?;
    println!(
        "{} slices x {} components -> {} features",
        desc.len(),
        desc.components(),
        desc.flatten().len()
    );

    for l in 0..4 {
        let fitted = desc.projected_mixture(l);
        let exact = sort_components(&gmm.slice(desc.slices().direction(l))?);
        println!("slice {l}: theta = {:.3?}", desc.slices().direction(l));
        for ((f, e), c) in fitted.components().zip(exact.components()).zip(0..) {
            println!(
                "  comp {c}: fitted (w {:.3}, mu {:+.3}, sd {:.3})  exact (w {:.3}, mu {:+.3}, sd {:.3})",
                f.0, f.1, f.2, e.0, e.1, e.2
            );
        }
    }
    for w in &desc.metadata().warnings {
        println!("warning: {w}");
    }
    Ok(())
}
