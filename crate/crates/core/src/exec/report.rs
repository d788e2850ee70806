//! The serialized record of one measured execution. Everything except
//! `wall_time_s` is a pure function of the kernel, the data, and the seed,
//! so two reports from the same configuration differ only in timing.

use super::Counts;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecReport {
    pub kernel: String,
    pub driver: Option<String>,
    pub nnz: Option<u64>,
    pub reads: BTreeMap<String, u64>,
    pub map_ops: u64,
    pub reduce_ops: u64,
    pub writes: u64,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
}

impl ExecReport {
    pub fn new(
        kernel: &str,
        driver: Option<&str>,
        nnz: Option<u64>,
        seed: Option<u64>,
        counts: &Counts,
        wall_time_s: f64,
    ) -> Self {
        ExecReport {
            kernel: kernel.to_string(),
            driver: driver.map(str::to_string),
            nnz,
            reads: counts.reads_by_tensor.clone(),
            map_ops: counts.map_ops,
            reduce_ops: counts.reduce_ops,
            writes: counts.writes,
            wall_time_s,
            seed,
        }
    }

    pub fn total_reads(&self) -> u64 {
        self.reads.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
