//! Rows proportional to `[1, ε, …, ε]`: reducing such data to its row space
//! before fitting caps the recoverable affinity with `e₁` far below 100.

use rocpca::bench::svd_pitfall_demo;

fn main() -> rocpca::error::Result<()> {
    println!("{:>6} {:>8} {:>5} {:>12} {:>9} {:>8}", "p", "epsilon", "rank", "closed form", "ceiling", "PCA");
    for (p, epsilon) in [(101, 0.1), (1001, 0.1), (10001, 0.1), (10001, 0.01)] {
        let r = svd_pitfall_demo(p, epsilon, 20, 0)?;
        println!(
            "{:>6} {:>8} {:>5} {:>12.3} {:>9.3} {:>8.3}",
            p,
            epsilon,
            r.rank,
            100.0 * r.closed_form,
            r.ceiling_affinity(),
            100.0 * r.pca_cosine
        );
    }
    Ok(())
}
