use std::time::Instant;

use rayon::prelude::*;

use crate::batch::{batch_fit, default_plan};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::outliers::OutlierMode;
use crate::solver::{fit, plain_pca, Problem};

use super::metrics::{evaluate, evaluate_frame, EvalReport};
use super::synthetic::{generate, SyntheticSpec};
use super::table::{Cell, Table};

/// Seed of replicate `rep` derived from a base seed.
pub fn replicate_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

/// Outlier budget `q = round(α·O)`, rejected unless it stays below the number
/// of available units.
pub fn budget_for(spec: &SyntheticSpec, alpha: f64) -> Result<usize> {
    let q = (alpha * spec.num_outliers as f64).round();
    let cap = match spec.outlier_mode {
        OutlierMode::Row => spec.n,
        OutlierMode::Element => spec.n * spec.d(),
    };
    if !(q >= 0.0) || q as usize >= cap {
        return Err(Error::Config(format!(
            "alpha = {alpha} gives q = {q}, which must be below {cap}"
        )));
    }
    Ok(q as usize)
}

fn solver_config(spec: &SyntheticSpec, q: usize, template: &SolverConfig, seed: u64) -> SolverConfig {
    SolverConfig {
        rank_r: spec.r,
        outlier_mode: spec.outlier_mode,
        q: Some(q),
        lambda: None,
        seed,
        ..template.clone()
    }
}

/// Generates replicate `rep`, fits with budget `q` and scores the result.
pub fn fit_replicate(spec: &SyntheticSpec, q: usize, template: &SolverConfig, rep: usize) -> Result<EvalReport> {
    let seed = replicate_seed(spec.seed, rep);
    let (x, truth) = generate(&spec.clone().with_seed(seed))?;
    let start = Instant::now();
    let result = fit(&Problem::new(x, solver_config(spec, q, template, seed))?)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = evaluate(&result, &truth, None)?;
    report.wall_time_seconds = elapsed;
    Ok(report)
}

/// Replicate means of affinity, masking, swamping, joint detection and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMeans {
    pub affinity: f64,
    pub masking: f64,
    pub swamping: f64,
    pub joint_detection: f64,
    pub seconds: f64,
}

impl CellMeans {
    pub fn of(reports: &[EvalReport]) -> Self {
        let k = reports.len() as f64;
        let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        Self {
            affinity: mean(|r| r.affinity),
            masking: mean(|r| r.masking),
            swamping: mean(|r| r.swamping),
            joint_detection: mean(|r| r.joint_detection),
            seconds: mean(|r| r.wall_time_seconds),
        }
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    Ok(())
}

/// One row per `α`: mean affinity, masking, swamping and joint detection over
/// `reps` replicates of `base`, fitted with `q = round(α·O)`. Every `α` sees
/// the same replicate data.
pub fn run_q_sensitivity(base: &SyntheticSpec, alphas: &[f64], reps: usize, template: &SolverConfig) -> Result<Table> {
    check_reps(reps)?;
    let mut table = Table::new(&["L", "O", "alpha", "q", "affinity", "M", "S", "JD"]);
    for &alpha in alphas {
        let q = budget_for(base, alpha)?;
        let reports: Vec<EvalReport> = (0..reps)
            .into_par_iter()
            .map(|rep| fit_replicate(base, q, template, rep))
            .collect::<Result<_>>()?;
        let m = CellMeans::of(&reports);
        table.push(vec![
            base.leverage.into(),
            base.num_outliers.into(),
            alpha.into(),
            q.into(),
            m.affinity.into(),
            m.masking.into(),
            m.swamping.into(),
            m.joint_detection.into(),
        ]);
    }
    Ok(table)
}

/// Robust fit (and optionally plain PCA on centered data) per spec, with
/// `q = round(α·O)`: mean affinity and mean seconds per method.
pub fn run_comparison(
    specs: &[SyntheticSpec],
    alpha: f64,
    reps: usize,
    include_plain_pca: bool,
    template: &SolverConfig,
) -> Result<Table> {
    check_reps(reps)?;
    let mut table = Table::new(&["n", "p", "sigma2", "O", "q", "method", "affinity", "seconds"]);
    for spec in specs {
        let q = budget_for(spec, alpha)?;
        let robust: Vec<EvalReport> = (0..reps)
            .into_par_iter()
            .map(|rep| fit_replicate(spec, q, template, rep))
            .collect::<Result<_>>()?;
        let mut methods = vec![("rocpca", CellMeans::of(&robust))];
        if include_plain_pca {
            let plain: Vec<EvalReport> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let (x, truth) = generate(&spec.clone().with_seed(replicate_seed(spec.seed, rep)))?;
                    let start = Instant::now();
                    let v = plain_pca(&x, spec.r)?;
                    let elapsed = start.elapsed().as_secs_f64();
                    let mut report = evaluate_frame(&v, None, &truth, None)?;
                    report.wall_time_seconds = elapsed;
                    Ok(report)
                })
                .collect::<Result<_>>()?;
            methods.push(("pca", CellMeans::of(&plain)));
        }
        for (name, m) in methods {
            table.push(vec![
                spec.n.into(),
                spec.p.into(),
                spec.sigma2.into(),
                spec.num_outliers.into(),
                q.into(),
                name.into(),
                m.affinity.into(),
                m.seconds.into(),
            ]);
        }
    }
    Ok(table)
}

/// Full fit versus batch fit (default plan) per spec. Replicates run one at
/// a time so the timings are comparable.
pub fn run_batch_comparison(specs: &[SyntheticSpec], q: usize, reps: usize, template: &SolverConfig) -> Result<Table> {
    check_reps(reps)?;
    let mut table = Table::new(&["p", "method", "plan", "affinity", "seconds"]);
    for spec in specs {
        let plan = default_plan(spec.p, spec.r)?;
        let plan_text = plan.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("+");
        let (mut full, mut batch) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
        for rep in 0..reps {
            let seed = replicate_seed(spec.seed, rep);
            let (x, truth) = generate(&spec.clone().with_seed(seed))?;
            let cfg = solver_config(spec, q, template, seed);

            let start = Instant::now();
            let result = fit(&Problem::new(x.clone(), cfg.clone())?)?;
            let mut report = evaluate(&result, &truth, None)?;
            report.wall_time_seconds = start.elapsed().as_secs_f64();
            full.push(report);

            let start = Instant::now();
            let v = batch_fit(&x, spec.r, &plan, &cfg)?;
            let mut report = evaluate_frame(&v, None, &truth, None)?;
            report.wall_time_seconds = start.elapsed().as_secs_f64();
            batch.push(report);
        }
        for (name, plan_cell, reports) in [("full", Cell::Missing, &full), ("batch", Cell::Text(plan_text.clone()), &batch)] {
            let m = CellMeans::of(reports);
            table.push(vec![spec.p.into(), name.into(), plan_cell, m.affinity.into(), m.seconds.into()]);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_guard() {
        let spec = SyntheticSpec::rows(100, 10, vec![60.0, 40.0, 20.0], 2.0, 16, 4.5);
        assert_eq!(budget_for(&spec, 2.0).unwrap(), 32);
        assert_eq!(budget_for(&spec, 0.8).unwrap(), 13);
        assert!(budget_for(&spec, 6.25).is_err());
        assert!(budget_for(&spec, 7.0).is_err());
    }

    #[test]
    fn clean_noiseless_comparison_is_exact_for_both_methods() {
        let spec = SyntheticSpec::rows(30, 6, vec![9.0, 5.0], 0.0, 0, 0.0).with_seed(4);
        let table = run_comparison(&[spec], 2.0, 2, true, &SolverConfig::default()).unwrap();
        for a in table.numbers("affinity") {
            assert!(a > 100.0 - 1e-6, "{a}");
        }
    }

    #[test]
    fn means_are_order_independent() {
        let r = |a: f64| EvalReport {
            affinity: a,
            masking: 0.0,
            swamping: 0.0,
            joint_detection: 1.0,
            rav: None,
            wall_time_seconds: 0.0,
        };
        assert_eq!(CellMeans::of(&[r(1.0), r(2.0)]).affinity, CellMeans::of(&[r(2.0), r(1.0)]).affinity);
    }
}
