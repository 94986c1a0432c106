//! Hankel positivity and Carleman partial sums for slice moment sequences.
//!
//! cargo run --example moment_diagnostics

use emperor::model::UnivariateGmm;
use emperor::moments::{carleman_partial_sum, hankel_psd_check, MomentSequence};

fn main() -> emperor::Result<()> {
    let g = UnivariateGmm::new(vec![0.3, 0.7], vec![-1.0, 2.0], vec![0.5, 1.0])?;
    let seq = MomentSequence::of_gmm(&g, 12);
    for n in 0..=6 {
        let h = hankel_psd_check(&seq, n)?;
        println!(
            "H_{n}: psd={} min eig {:.3e} norm {:.3e}",
            h.is_psd, h.min_eigenvalue, h.norm
        );
    }
    for terms in [2, 4, 6] {
        println!(
            "Carleman partial sum ({terms} terms): {:.4}",
            carleman_partial_sum(&seq.even_moments(), terms)?
        );
    }

    let bad = MomentSequence::new(vec![1.0, 0.0, -1.0])?;
    let h = hankel_psd_check(&bad, 1)?;
    println!("(1, 0, -1): psd={} min eig {}", h.is_psd, h.min_eigenvalue);
    Ok(())
}
