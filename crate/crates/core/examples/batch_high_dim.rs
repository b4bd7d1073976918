//! Many more variables than observations: estimate the complement in batches
//! and compare with a single full fit.

use std::time::Instant;

use rocpca::batch::{batch_fit, default_plan};
use rocpca::bench::{generate, SyntheticSpec};
use rocpca::config::SolverConfig;
use rocpca::frame::pc_affinity;
use rocpca::solver::{fit, Problem};

fn main() -> rocpca::error::Result<()> {
    let p = 150;
    let spec = SyntheticSpec::rows(40, p, vec![80.0, 60.0, 40.0], 1.5, 4, 5.0).with_seed(5);
    let (x, truth) = generate(&spec)?;
    let config = SolverConfig::new(3).with_q(4);

    let plan = default_plan(p, 3)?;
    println!("plan {:?}", plan.sizes);
    let start = Instant::now();
    let batched = batch_fit(&x, 3, &plan, &config)?;
    println!(
        "batch  affinity {:6.2}  {:6.2}s",
        pc_affinity(&batched, &truth.v_star)?,
        start.elapsed().as_secs_f64()
    );

    let start = Instant::now();
    let full = fit(&Problem::new(x, config)?)?;
    println!(
        "full   affinity {:6.2}  {:6.2}s",
        pc_affinity(&full.v_hat, &truth.v_star)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
