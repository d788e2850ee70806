//! Timing harness. Runs a prepared kernel repeatedly and keeps the best
//! time, the usual guard against scheduler noise; view materialization and
//! storage construction happen before the clock starts because the kernel
//! is handed over already prepared.

use super::sparse::SparsePrepared;
use super::{Counts, ExecError};
use crate::scalar::Value;
use crate::tensor::DenseTensor;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub reps_run: u64,
    pub min_time_s: f64,
    pub total_time_s: f64,
    pub counts: Counts,
}

impl BenchResult {
    pub fn mean_time_s(&self) -> f64 {
        self.total_time_s / self.reps_run as f64
    }
}

/// Runs up to `reps` repetitions, stopping early once `budget_s` seconds
/// of measured time accumulate. Always completes at least one.
pub fn bench_prepared<T: Value>(
    prepared: &SparsePrepared<T>,
    initial_output: Option<&DenseTensor<T>>,
    reps: u64,
    budget_s: f64,
) -> Result<BenchResult, ExecError> {
    let mut counts: Option<Counts> = None;
    let mut min_time_s = f64::INFINITY;
    let mut total_time_s = 0.0;
    let mut reps_run = 0;
    while reps_run < reps.max(1) {
        let start = Instant::now();
        let run = prepared.run(initial_output)?;
        let elapsed = start.elapsed().as_secs_f64();
        reps_run += 1;
        total_time_s += elapsed;
        min_time_s = min_time_s.min(elapsed);
        counts = Some(run.counts);
        if total_time_s >= budget_s {
            break;
        }
    }
    Ok(BenchResult { reps_run, min_time_s, total_time_s, counts: counts.expect("ran at least once") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::sparse::{prepare_sparse, run_sparse, ExecConfig, Operand};
    use crate::suite;
    use crate::tensor::{csf_format, gen_dense_uniform, gen_er_symmetric, CooBuffer, LevelTensor};
    use std::collections::BTreeMap;

    fn prepared_ssymv() -> SparsePrepared<i64> {
        let k = crate::compile(&suite::parsed("ssymv"));
        let buf: CooBuffer<i64> = gen_er_symmetric(2, 25, 0.2, 4);
        let lvl = LevelTensor::from_coo(&buf, &csf_format(&[25, 25], 0)).unwrap();
        let x: DenseTensor<i64> = gen_dense_uniform(&[25], 8);
        let env: BTreeMap<String, Operand<i64>> = [
            ("A".to_string(), Operand::Level(lvl)),
            ("x".to_string(), Operand::Dense(x)),
        ]
        .into();
        prepare_sparse(&k, &env, &ExecConfig::default()).unwrap()
    }

    #[test]
    fn single_rep_returns_single_run() {
        let b = bench_prepared(&prepared_ssymv(), None, 1, 10.0).unwrap();
        assert_eq!(b.reps_run, 1);
        assert_eq!(b.min_time_s, b.total_time_s);
    }

    #[test]
    fn best_time_never_exceeds_the_mean() {
        let b = bench_prepared(&prepared_ssymv(), None, 20, 10.0).unwrap();
        assert_eq!(b.reps_run, 20);
        assert!(b.min_time_s <= b.mean_time_s());
    }

    #[test]
    fn exhausted_budget_stops_after_one() {
        let b = bench_prepared(&prepared_ssymv(), None, 1000, 0.0).unwrap();
        assert_eq!(b.reps_run, 1);
    }

    #[test]
    fn counters_are_rep_independent() {
        let prepared = prepared_ssymv();
        let b = bench_prepared(&prepared, None, 7, 10.0).unwrap();
        let single = prepared.run(None).unwrap();
        assert_eq!(b.counts, single.counts);

        let k = crate::compile(&suite::parsed("ssymv"));
        let buf: CooBuffer<i64> = gen_er_symmetric(2, 25, 0.2, 4);
        let lvl = LevelTensor::from_coo(&buf, &csf_format(&[25, 25], 0)).unwrap();
        let x: DenseTensor<i64> = gen_dense_uniform(&[25], 8);
        let env: BTreeMap<String, Operand<i64>> = [
            ("A".to_string(), Operand::Level(lvl)),
            ("x".to_string(), Operand::Dense(x)),
        ]
        .into();
        let fresh = run_sparse(&k, &env, None, &ExecConfig::default()).unwrap();
        assert_eq!(b.counts, fresh.counts);
    }
}
