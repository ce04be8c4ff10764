//! Thread-parallel path execution. Workers own disjoint contiguous
//! blocks of path indices and results are assembled in path order, so
//! the output is bit-identical to the serial driver for any thread
//! count: parallelism affects speed only, never results.

use std::thread;
use wgarch::params::{KurtosisSpec, ValidatedContinuousParams};
use wgarch::pricing::{smile_from_paths, OptionSpec, PricingError, SmileResult};
use wgarch::simulate::{finalize, simulate_path, PathSet, SimConfig, SimError, SimPrecomp};

pub fn simulate_parallel(
    c: &ValidatedContinuousParams,
    k: &KurtosisSpec,
    cfg: SimConfig,
    threads: usize,
) -> Result<PathSet, SimError> {
    let pre = SimPrecomp::new(c, k, cfg)?;
    let n = cfg.n_paths as usize;
    let workers = threads.clamp(1, n);
    let chunk = n.div_ceil(workers);
    let mut outcomes = Vec::with_capacity(n);
    thread::scope(|scope| {
        let pre = &pre;
        let handles: Vec<_> = (0..workers)
            .map(|w| (w * chunk, ((w + 1) * chunk).min(n)))
            .take_while(|(lo, hi)| lo < hi)
            .map(|(lo, hi)| {
                scope.spawn(move || {
                    (lo..hi).map(|i| simulate_path(pre, i as u64)).collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            outcomes.extend(handle.join().expect("path worker panicked"));
        }
    });
    finalize(&pre, outcomes)
}

/// Smile over a shared parallel-simulated path set (common random
/// numbers across strikes).
pub fn smile_parallel(
    c: &ValidatedContinuousParams,
    k: &KurtosisSpec,
    cfg: SimConfig,
    strikes: &[f64],
    o_template: &OptionSpec,
    threads: usize,
) -> Result<(SmileResult, PathSet), PricingError> {
    let paths = simulate_parallel(c, k, cfg, threads)?;
    let result = smile_from_paths(&paths, strikes, o_template)?;
    Ok((result, paths))
}
