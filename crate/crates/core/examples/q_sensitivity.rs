//! Sweep the budget `q = round(alpha · O)` around the true outlier count `O`.
//!
//! Pass a replicate count as the first argument (default 3).

use rocpca::bench::{run_q_sensitivity, SyntheticSpec};
use rocpca::config::SolverConfig;

fn main() -> rocpca::error::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = SyntheticSpec::rows(100, 10, vec![20.0, 15.0, 10.0], 1.0, 8, 10.0);
    let alphas = [0.5, 0.8, 1.0, 1.5, 2.0, 3.0];
    let table = run_q_sensitivity(&base, &alphas, reps, &SolverConfig::default())?;
    print!("{}", table.to_markdown());
    Ok(())
}
