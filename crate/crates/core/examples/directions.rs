//! Reproducible slice directions and how close the GMM components come on each.
//!
//! cargo run --example directions

use emperor::model::MultivariateGmm;
use emperor::slicing::{collision_score, generate_directions, DirectionScheme};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let gmm = MultivariateGmm::new(
        vec![0.5, 0.5],
        vec![
            DVector::from_vec(vec![-2.0, 0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0, 0.0]),
        ],
        vec![DMatrix::identity(3, 3), DMatrix::identity(3, 3)],
    )?;
    for scheme in [
        DirectionScheme::AxisAlignedThenRandom,
        DirectionScheme::IidGaussianNormalized,
    ] {
        let slices = generate_directions(3, 5, 1, scheme)?;
        println!("{scheme:?}");
        for theta in slices.iter() {
            println!("  {:+.4?} collision {:.3}", theta, collision_score(&gmm, theta)?);
        }
    }
    let a = generate_directions(3, 5, 1, DirectionScheme::IidGaussianNormalized)?;
    let b = generate_directions(3, 5, 1, DirectionScheme::IidGaussianNormalized)?;
    println!("same seed, same directions: {}", a == b);
    Ok(())
}
