//! Recover a 3-dimensional principal subspace from data with eight
//! high-leverage rows, and compare against plain PCA.

use rocpca::bench::{evaluate, generate, SyntheticSpec};
use rocpca::config::SolverConfig;
use rocpca::frame::pc_affinity;
use rocpca::solver::{fit, plain_pca, Problem};

fn main() -> rocpca::error::Result<()> {
    let spec = SyntheticSpec::rows(100, 10, vec![20.0, 15.0, 10.0], 1.0, 8, 10.0).with_seed(7);
    let (x, truth) = generate(&spec)?;

    let config = SolverConfig::new(3).with_q(8).with_seed(1);
    let result = fit(&Problem::new(x.clone(), config)?)?;
    let report = evaluate(&result, &truth, None)?;

    println!("variant          {}", result.variant.name());
    println!("outer iterations {}", result.outer_iterations);
    println!("objective        {:.4}", result.objective);
    println!("affinity         {:.2}", report.affinity);
    println!("masking          {:.3}", report.masking);
    println!("swamping         {:.3}", report.swamping);
    println!("flagged rows     {:?}", result.flagged().rows());
    println!("planted rows     {:?}", truth.outlier_rows());

    let pca = plain_pca(&x, 3)?;
    println!("plain PCA        {:.2}", pc_affinity(&pca, &truth.v_star)?);
    Ok(())
}
