//! Entry-wise contamination: a budget of single cells instead of whole rows.

use rocpca::bench::{evaluate, generate, SyntheticSpec};
use rocpca::config::SolverConfig;
use rocpca::outliers::{Flagged, OutlierMode};
use rocpca::solver::{fit, Problem};

fn main() -> rocpca::error::Result<()> {
    let spec = SyntheticSpec::elements(100, 10, vec![20.0, 15.0, 10.0], 1.0, 20, 10.0).with_seed(3);
    let (x, truth) = generate(&spec)?;

    let config = SolverConfig::new(3)
        .with_mode(OutlierMode::Element)
        .with_q(20)
        .with_seed(2);
    let result = fit(&Problem::new(x, config)?)?;
    let report = evaluate(&result, &truth, None)?;

    println!("affinity {:.2}", report.affinity);
    let Flagged::Elements(found) = result.flagged() else {
        unreachable!("element mode flags entries");
    };
    // cells live in the fitted complement basis, so compare by row
    println!(
        "flagged {} cells in {} rows; planted rows {:?}",
        found.len(),
        result.flagged().rows().len(),
        truth.outlier_rows()
    );
    println!("masking {:.3}  swamping {:.3}", report.masking, report.swamping);
    for (i, j) in found.iter().take(5) {
        println!("  row {i:3}  complement coordinate {j}  s = {:8.3}", result.s.values()[(*i, *j)]);
    }
    Ok(())
}
