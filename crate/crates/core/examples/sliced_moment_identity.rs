//! A sliced moment is a homogeneous polynomial in the direction whose
//! coefficients are multinomial-weighted multivariate moments.
//!
//! cargo run --example sliced_moment_identity

use emperor::model::MultivariateGmm;
use emperor::momentindex::{enumerate_multi_indices, multinomial_coefficient};
use emperor::moments::{multivariate_gmm_moment, sliced_gmm_moment};
use nalgebra::{DMatrix, DVector};

fn main() -> emperor::Result<()> {
    let gmm = MultivariateGmm::new(
        vec![0.3, 0.7],
        vec![DVector::from_vec(vec![1.0, -0.5]), DVector::from_vec(vec![-0.4, 0.9])],
        vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]),
            DMatrix::from_row_slice(2, 2, &[0.5, -0.1, -0.1, 0.8]),
        ],
    )?;
    let theta = [0.6, 0.8];
    for k in 0..=4 {
        let direct = sliced_gmm_moment(&gmm, &theta, k)?;
        let mut expanded = 0.0;
        for alpha in enumerate_multi_indices(2, k)?.iter() {
            let c = multinomial_coefficient(k, alpha)? as f64;
            expanded += c * alpha.monomial(&theta) * multivariate_gmm_moment(&gmm, alpha)?;
        }
        println!(
            "k={k}: slice {direct:>12.8}  expansion {expanded:>12.8}  gap {:.1e}",
            (direct - expanded).abs()
        );
    }
    Ok(())
}
