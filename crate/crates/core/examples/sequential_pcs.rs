//! Principal directions one at a time with rank-1 fits, next to the joint
//! rank-3 fit.

use rocpca::bench::{generate, SyntheticSpec};
use rocpca::config::SolverConfig;
use rocpca::frame::{pc_affinity, OrthonormalFrame};
use rocpca::solver::{fit, sequential_fit, Problem};

fn main() -> rocpca::error::Result<()> {
    let spec = SyntheticSpec::rows(120, 8, vec![24.0, 16.0, 8.0], 1.0, 6, 8.0).with_seed(9);
    let (x, truth) = generate(&spec)?;
    let config = SolverConfig::default().with_q(6);

    let sequential = sequential_fit(&x, 3, &config)?;
    let joint = fit(&Problem::new(x, SolverConfig { rank_r: 3, ..config })?)?;

    for k in 0..3 {
        let one = |f: &OrthonormalFrame| OrthonormalFrame::new(f.as_matrix().columns(k, 1).into_owned());
        let t = one(&truth.v_star)?;
        println!(
            "direction {}: sequential {:6.2}  joint {:6.2}",
            k + 1,
            pc_affinity(&one(&sequential)?, &t)?,
            pc_affinity(&one(&joint.v_hat)?, &t)?
        );
    }
    println!("subspace:    sequential {:6.2}  joint {:6.2}", pc_affinity(&sequential, &truth.v_star)?, pc_affinity(&joint.v_hat, &truth.v_star)?);
    Ok(())
}
