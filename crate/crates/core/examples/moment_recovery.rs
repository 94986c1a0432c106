//! Recover multivariate moments from slice mixtures, exactly and from data.
//!
//! cargo run --example moment_recovery

use emperor::descriptor::Descriptor;
use emperor::model::{sample_gmm, MultivariateGmm};
use emperor::momentindex::monomial_count;
use emperor::moments::gmm_moment_vector;
use emperor::reconstruct::{design_diagnostics, design_matrix, recover_moments};
use emperor::slicing::{generate_directions, DirectionScheme};
use emperor::{emperor_descriptor, DescriptorConfig};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let gmm = MultivariateGmm::new(
        vec![0.5, 0.5],
        vec![
            DVector::from_vec(vec![-1.0, 0.5, 0.0]),
            DVector::from_vec(vec![1.0, 0.0, 0.5]),
        ],
        vec![DMatrix::identity(3, 3) * 0.4, DMatrix::identity(3, 3) * 0.7],
    )?;

    println!("exact slice parameters:");
    for k in 1..=3 {
        let l = 2 * monomial_count(3, k)? as usize;
        let slices = generate_directions(3, l, k as u64, DirectionScheme::IidGaussianNormalized)?;
        let diag = design_diagnostics(&design_matrix(&slices, k)?);
        let est = recover_moments(&Descriptor::exact(&gmm, slices)?, k, Some(0.0))?;
        let truth = gmm_moment_vector(&gmm, k)?;
        println!(
            "  k={k} L={l:>3} cond={:>8.2} error={:.1e}",
            diag.condition,
            est.distance(&truth) / truth.norm()
        );
    }

    println!("fitted descriptor (N = 20000, L = 64):");
    let points = sample_gmm(&gmm, 20_000, 1)?;
    let desc = emperor_descriptor(&points, &DescriptorConfig::new(64, 2, 3))?;
    for k in 1..=3 {
        let est = recover_moments(&desc, k, None)?;
        let truth = gmm_moment_vector(&gmm, k)?;
        println!("  k={k} relative error {:.4}", est.distance(&truth) / truth.norm());
    }
    Ok(())
}
