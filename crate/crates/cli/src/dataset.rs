//! Turns a kernel id plus a data source into bound operands, ready for
//! either interpreter. The driver tensor comes from the named file or the
//! seeded generator; every other operand is dense uniform data derived
//! from the same seed.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;
use symten::exec::{reduce_identity, Operand};
use symten::ir::CompiledKernel;
use symten::suite;
use symten::tensor::{
    csf_format, gen_dense_uniform, gen_er_general, gen_er_symmetric, read_matrix_market,
    symmetrize_matrix, CooBuffer, DenseTensor, LevelTensor,
};

#[derive(Clone, Debug)]
pub enum Source {
    Er { dim: usize, p: f64 },
    Mtx(PathBuf),
}

#[derive(Clone, Debug)]
pub struct DataSpec {
    pub kernel_id: String,
    pub source: Option<Source>,
    pub rank: usize,
    pub seed: u64,
    pub symmetrize: bool,
    pub check_sym: bool,
}

pub struct Dataset {
    pub optimized: CompiledKernel,
    pub naive: CompiledKernel,
    pub levels: BTreeMap<String, Operand<f64>>,
    pub denses: BTreeMap<String, DenseTensor<f64>>,
    pub driver: String,
    pub nnz: u64,
    pub seed: Option<u64>,
    pub label: String,
    /// Points the naive kernel's full sweep would visit.
    pub naive_points: u128,
}

/// Desk-scale generator defaults per kernel: (dim, p).
fn default_er(id: &str) -> (usize, f64) {
    match id {
        "ttm" => (20, 0.05),
        "mttkrp3" => (30, 0.1),
        "mttkrp4" => (15, 0.02),
        "mttkrp5" => (10, 0.02),
        _ => (60, 0.1),
    }
}

pub fn build(spec: &DataSpec) -> Result<Dataset> {
    let known: Vec<&str> = suite::kernels().iter().map(|k| k.id).collect();
    if !known.contains(&spec.kernel_id.as_str()) {
        bail!("unknown kernel {:?}; bundled kernels: {}", spec.kernel_id, known.join(", "));
    }
    let a = suite::parsed(&spec.kernel_id);
    let optimized = symten::compile(&a);
    let naive = symten::compile_naive(&a);
    let driver = optimized
        .driver
        .clone()
        .ok_or_else(|| anyhow!("kernel {} designates no driver tensor", spec.kernel_id))?;
    let driver_access = a
        .operands
        .iter()
        .find(|t| t.tensor == driver)
        .expect("driver is one of the kernel's operands");
    let fill: f64 = reduce_identity(a.algebra.reduce).expect("f64 carries every identity");
    let parts: Vec<Vec<usize>> = a
        .symmetries
        .get(&driver)
        .map(|p| p.symmetric_parts().cloned().collect())
        .unwrap_or_default();

    let source = spec.source.clone().unwrap_or_else(|| {
        let (dim, p) = default_er(&spec.kernel_id);
        Source::Er { dim, p }
    });
    let (buf, driver_dims, label, seed_used): (CooBuffer<f64>, Vec<usize>, String, Option<u64>) =
        match &source {
            Source::Er { dim, p } => {
                let dims = vec![*dim; driver_access.order()];
                let buf = if parts.is_empty() {
                    gen_er_general(&dims, *p, spec.seed)
                } else {
                    gen_er_symmetric(driver_access.order(), *dim, *p, spec.seed)
                };
                let label = format!("er(dim={dim},p={p},seed={})", spec.seed);
                (buf, dims, label, Some(spec.seed))
            }
            Source::Mtx(path) => {
                if driver_access.order() != 2 {
                    bail!(
                        "--mtx feeds an order-2 driver; {} drives {} of order {}",
                        spec.kernel_id,
                        driver,
                        driver_access.order()
                    );
                }
                let mut buf = read_matrix_market(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                if spec.symmetrize {
                    buf = symmetrize_matrix(&buf)?;
                }
                let dims = buf.dims().to_vec();
                (buf, dims, format!("mtx({})", path.display()), None)
            }
        };

    let level = LevelTensor::from_coo(&buf, &csf_format(&driver_dims, fill))
        .context("building driver storage")?;
    if spec.check_sym && !parts.is_empty() {
        level
            .verify_symmetric(&parts)
            .with_context(|| format!("{} is not symmetric over the declared axes", driver))?;
    }
    let nnz = level.nnz() as u64;

    let mut extents: Vec<(String, usize)> = Vec::new();
    let extent_of = |extents: &[(String, usize)], v: &str| -> Option<usize> {
        extents.iter().find(|(n, _)| n == v).map(|&(_, e)| e)
    };
    for t in a.operands.iter().filter(|t| t.tensor == driver) {
        for (axis, v) in t.indices.iter().enumerate() {
            let e = driver_dims[axis];
            match extent_of(&extents, &v.to_string()) {
                Some(have) if have != e => {
                    bail!("{} uses {} at extents {} and {}", driver, v, have, e)
                }
                Some(_) => {}
                None => extents.push((v.to_string(), e)),
            }
        }
    }
    for t in &a.operands {
        for v in &t.indices {
            if extent_of(&extents, &v.to_string()).is_none() {
                extents.push((v.to_string(), spec.rank));
            }
        }
    }

    let mut levels: BTreeMap<String, Operand<f64>> = BTreeMap::new();
    let mut denses: BTreeMap<String, DenseTensor<f64>> = BTreeMap::new();
    levels.insert(driver.clone(), Operand::Level(level.clone()));
    denses.insert(driver.clone(), level.to_dense());
    let mut fresh = 0u64;
    for t in &a.operands {
        if denses.contains_key(&t.tensor) {
            continue;
        }
        fresh += 1;
        let dims: Vec<usize> = t
            .indices
            .iter()
            .map(|v| {
                extent_of(&extents, &v.to_string())
                    .ok_or_else(|| anyhow!("no operand determines the extent of {v}"))
            })
            .collect::<Result<_>>()?;
        let dense: DenseTensor<f64> = gen_dense_uniform(&dims, spec.seed.wrapping_add(fresh));
        levels.insert(t.tensor.clone(), Operand::Dense(dense.clone()));
        denses.insert(t.tensor.clone(), dense);
    }

    let naive_points: u128 = a
        .loop_order
        .iter()
        .map(|v| {
            extent_of(&extents, &v.to_string())
                .ok_or_else(|| anyhow!("no operand determines the extent of {v}"))
                .map(|e| e as u128)
        })
        .product::<Result<u128>>()?;

    Ok(Dataset {
        optimized,
        naive,
        levels,
        denses,
        driver,
        nnz,
        seed: seed_used,
        label,
        naive_points,
    })
}
