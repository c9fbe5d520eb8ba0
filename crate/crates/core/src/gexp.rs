//! Conditional g-expectation with driver `|z|` on a binary scenario tree.
//!
//! Each node moves up with probability `q ∈ [q_lo, q_hi]`, chosen freely per
//! node. With time step `dt` the Girsanov family `|μ| <= 1` maps to
//! `q = (1 + μ √dt) / 2`. The g-expectation is the backward recursion
//! `y = max_{q ∈ {q_lo, q_hi}} (q y_up + (1 - q) y_down)` and the same value
//! is the upper envelope over the rectangular set of corner measures.
//!
//! Nodes are addressed by bit paths read from the root, `0` for an up move.
//! Leaf `i` is the path given by the `depth` bits of `i`, most significant
//! first, so the level-`d` partition groups leaves into contiguous runs of
//! length `2^(depth - d)`.

use serde::Serialize;

use crate::error::{MmseError, Result};
use crate::estimator::{solve_mmse, EstimatorResult, SolverConfig};
use crate::measures::MeasureSet;
use crate::space::{Filtration, PartitionAlgebra, RandomVariable};
use crate::sublinear::rho;

/// Deepest tree whose corner measures are enumerated (`2^(2^depth - 1)`
/// generators).
pub const MAX_CORNER_DEPTH: usize = 4;
/// Deepest tree accepted by the recursion.
pub const MAX_TREE_DEPTH: usize = 24;
pub const DEFAULT_DT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeModel {
    pub depth: usize,
    pub q_lo: f64,
    pub q_hi: f64,
    pub dt: f64,
}

impl TreeModel {
    pub fn new(depth: usize, q_lo: f64, q_hi: f64, dt: f64) -> Result<Self> {
        if depth == 0 || depth > MAX_TREE_DEPTH {
            return Err(MmseError::InvalidArgument(format!(
                "tree depth must be in 1..={MAX_TREE_DEPTH}, got {depth}"
            )));
        }
        if !(0.0 < q_lo && q_lo <= q_hi && q_hi < 1.0) {
            return Err(MmseError::InvalidArgument(format!(
                "need 0 < q_lo <= q_hi < 1, got [{q_lo}, {q_hi}]"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MmseError::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(Self {
            depth,
            q_lo,
            q_hi,
            dt,
        })
    }

    /// The interval `[(1 - √dt) / 2, (1 + √dt) / 2]`.
    pub fn girsanov(depth: usize, dt: f64) -> Result<Self> {
        let s = dt.sqrt();
        Self::new(depth, (1.0 - s) / 2.0, (1.0 + s) / 2.0, dt)
    }

    /// `dt = 1/4`, hence `q ∈ [1/4, 3/4]`.
    pub fn standard(depth: usize) -> Result<Self> {
        Self::girsanov(depth, DEFAULT_DT)
    }

    pub fn leaves(&self) -> usize {
        1 << self.depth
    }

    /// Partition of the leaves by their ancestor at `level`.
    pub fn level_partition(&self, level: usize) -> Result<PartitionAlgebra> {
        if level > self.depth {
            return Err(MmseError::InvalidArgument(format!(
                "level {level} exceeds tree depth {}",
                self.depth
            )));
        }
        let run = 1usize << (self.depth - level);
        let labels: Vec<usize> = (0..self.leaves()).map(|i| i / run).collect();
        PartitionAlgebra::from_labels(&labels)
    }

    /// Levels `0..=depth`.
    pub fn filtration(&self) -> Result<Filtration> {
        Filtration::new(
            (0..=self.depth)
                .map(|d| self.level_partition(d))
                .collect::<Result<_>>()?,
        )
    }
}

/// Corner measures: every internal node independently at `q_lo` or `q_hi`.
///
/// Internal nodes are numbered breadth first (`2^d - 1 + path` at depth `d`);
/// bit `j` of the generator index selects `q_hi` at node `j`. A degenerate
/// interval yields a single generator.
pub fn tree_measure_set(tm: &TreeModel) -> Result<MeasureSet> {
    if tm.depth > MAX_CORNER_DEPTH {
        return Err(MmseError::GuardRefusal(format!(
            "corner enumeration supports depth <= {MAX_CORNER_DEPTH}, got {}",
            tm.depth
        )));
    }
    let internal = tm.leaves() - 1;
    let count: u64 = if tm.q_lo == tm.q_hi { 1 } else { 1 << internal };
    let rows = (0..count)
        .map(|mask| {
            (0..tm.leaves())
                .map(|leaf| {
                    let mut p = 1.0;
                    for d in 0..tm.depth {
                        let node = (1usize << d) - 1 + (leaf >> (tm.depth - d));
                        let q = if mask >> node & 1 == 0 {
                            tm.q_lo
                        } else {
                            tm.q_hi
                        };
                        let up = leaf >> (tm.depth - 1 - d) & 1 == 0;
                        p *= if up { q } else { 1.0 - q };
                    }
                    p
                })
                .collect()
        })
        .collect();
    MeasureSet::from_rows(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GExpResult {
    /// `y[d][path]` for every node at depth `d`.
    pub y: Vec<Vec<f64>>,
    /// `z[d][path]` for every internal node.
    pub z: Vec<Vec<f64>>,
    /// Up probability selected at every internal node.
    pub q: Vec<Vec<f64>>,
}

impl GExpResult {
    pub fn root(&self) -> f64 {
        self.y[0][0]
    }

    /// Node values at `level` repeated over their leaves.
    pub fn at_level(&self, tm: &TreeModel, level: usize) -> Result<RandomVariable> {
        tm.level_partition(level)?.broadcast(&self.y[level])
    }
}

fn recursion(tm: &TreeModel, xi_leaf: &[f64], upper: bool) -> Result<GExpResult> {
    crate::error::check_len(tm.leaves(), xi_leaf.len())?;
    if let Some(i) = xi_leaf.iter().position(|v| !v.is_finite()) {
        return Err(MmseError::InvalidArgument(format!(
            "leaf value {i} is not finite"
        )));
    }
    let scale = 2.0 * tm.dt.sqrt();
    let mut y = vec![xi_leaf.to_vec()];
    let mut z = Vec::new();
    let mut q = Vec::new();
    for _ in 0..tm.depth {
        let below = y.last().expect("nonempty");
        let mut level_y = Vec::with_capacity(below.len() / 2);
        let mut level_z = Vec::with_capacity(below.len() / 2);
        let mut level_q = Vec::with_capacity(below.len() / 2);
        for pair in below.chunks(2) {
            let (u, d) = (pair[0], pair[1]);
            let lo = tm.q_lo * u + (1.0 - tm.q_lo) * d;
            let hi = tm.q_hi * u + (1.0 - tm.q_hi) * d;
            let pick_hi = if upper { hi > lo } else { hi < lo };
            level_y.push(if pick_hi { hi } else { lo });
            level_q.push(if pick_hi { tm.q_hi } else { tm.q_lo });
            level_z.push((u - d) / scale);
        }
        y.push(level_y);
        z.push(level_z);
        q.push(level_q);
    }
    y.reverse();
    z.reverse();
    q.reverse();
    Ok(GExpResult { y, z, q })
}

/// Backward recursion taking the larger of the two endpoint expectations.
pub fn g_expectation(tm: &TreeModel, xi_leaf: &[f64]) -> Result<GExpResult> {
    recursion(tm, xi_leaf, true)
}

/// The same recursion with the smaller endpoint expectation.
pub fn lower_expectation(tm: &TreeModel, xi_leaf: &[f64]) -> Result<GExpResult> {
    recursion(tm, xi_leaf, false)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representation {
    pub root: f64,
    pub rho: f64,
    pub gap: f64,
}

/// Root of the recursion against `rho` over the corner measures.
pub fn representation_check(tm: &TreeModel, xi_leaf: &[f64]) -> Result<Representation> {
    let root = g_expectation(tm, xi_leaf)?.root();
    let ms = tree_measure_set(tm)?;
    let value = rho(&ms, &RandomVariable::new(xi_leaf.to_vec())?)?.value;
    Ok(Representation {
        root,
        rho: value,
        gap: (root - value).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GExpComparison {
    pub level: usize,
    pub gexp_cond: RandomVariable,
    pub mmse: RandomVariable,
    pub sup_diff: f64,
    pub estimator: EstimatorResult,
}

/// g-expectation at `level` against the estimator on the level partition.
pub fn compare_gexp_mmse(
    tm: &TreeModel,
    xi_leaf: &[f64],
    level: usize,
    cfg: &SolverConfig,
) -> Result<GExpComparison> {
    let c = tm.level_partition(level)?;
    let gexp_cond = g_expectation(tm, xi_leaf)?.at_level(tm, level)?;
    let ms = tree_measure_set(tm)?;
    let estimator = solve_mmse(&ms, &RandomVariable::new(xi_leaf.to_vec())?, &c, cfg)?;
    let sup_diff = gexp_cond.sup_distance(&estimator.eta_hat)?;
    Ok(GExpComparison {
        level,
        gexp_cond,
        mmse: estimator.eta_hat.clone(),
        sup_diff,
        estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_interval() {
        let tm = TreeModel::standard(1).unwrap();
        assert_eq!((tm.q_lo, tm.q_hi), (0.25, 0.75));
        assert!(TreeModel::girsanov(1, 1.0).is_err());
        assert!(TreeModel::new(0, 0.3, 0.6, 0.25).is_err());
        assert!(TreeModel::new(2, 0.6, 0.3, 0.25).is_err());
    }

    #[test]
    fn corner_generators() {
        let ms = tree_measure_set(&TreeModel::standard(1).unwrap()).unwrap();
        assert_eq!(ms.generator(0).weights(), &[0.25, 0.75]);
        assert_eq!(ms.generator(1).weights(), &[0.75, 0.25]);
        let ms = tree_measure_set(&TreeModel::standard(2).unwrap()).unwrap();
        assert_eq!(ms.k(), 8);
        assert_eq!(ms.generator(0).weights(), &[0.0625, 0.1875, 0.1875, 0.5625]);
        let flat = TreeModel::new(3, 0.4, 0.4, 0.25).unwrap();
        assert_eq!(tree_measure_set(&flat).unwrap().k(), 1);
        let deep = TreeModel::standard(MAX_CORNER_DEPTH + 1).unwrap();
        assert!(matches!(
            tree_measure_set(&deep),
            Err(MmseError::GuardRefusal(_))
        ));
    }

    #[test]
    fn level_partitions() {
        let tm = TreeModel::standard(3).unwrap();
        let p = tm.level_partition(1).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert_eq!(tm.level_partition(3).unwrap().num_blocks(), 8);
        assert_eq!(tm.filtration().unwrap().len(), 4);
        assert!(tm.level_partition(4).is_err());
    }

    #[test]
    fn one_step_example() {
        let tm = TreeModel::standard(1).unwrap();
        let r = g_expectation(&tm, &[2.0, 8.0]).unwrap();
        assert_eq!(r.root(), 6.5);
        assert_eq!(r.q[0][0], 0.25);
        assert_eq!(r.z[0][0], -6.0);
        let cmp = compare_gexp_mmse(&tm, &[2.0, 8.0], 0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(cmp.sup_diff, 1.5, epsilon = 1e-6);
    }

    #[test]
    fn constant_leaves() {
        let tm = TreeModel::standard(3).unwrap();
        let r = g_expectation(&tm, &[1.5; 8]).unwrap();
        assert!(r.y.iter().flatten().all(|&v| v == 1.5));
        assert!(r.z.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn monotone_leaves_pick_upper_endpoint() {
        let tm = TreeModel::standard(3).unwrap();
        let xi: Vec<f64> = (0..8).rev().map(f64::from).collect();
        let r = g_expectation(&tm, &xi).unwrap();
        assert!(r.q.iter().flatten().all(|&q| q == tm.q_hi));
    }

    #[test]
    fn top_leaf_indicator() {
        let tm = TreeModel::standard(2).unwrap();
        let xi = [1.0, 0.0, 0.0, 0.0];
        let cmp = compare_gexp_mmse(&tm, &xi, 1, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(cmp.gexp_cond.values()[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.mmse.values()[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(cmp.sup_diff, 0.25, epsilon = 1e-6);
    }

    #[test]
    fn representation_small_trees() {
        for depth in 1..=3 {
            let tm = TreeModel::standard(depth).unwrap();
            let xi: Vec<f64> = (0..tm.leaves())
                .map(|i| ((i * 7) % 5) as f64 - 2.0)
                .collect();
            assert!(representation_check(&tm, &xi).unwrap().gap <= 1e-10);
        }
    }

    #[test]
    fn negation_swaps_recursions() {
        let tm = TreeModel::standard(2).unwrap();
        let xi = [3.0, -1.0, 0.5, 2.0];
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let up = g_expectation(&tm, &neg).unwrap();
        let low = lower_expectation(&tm, &xi).unwrap();
        assert_eq!(up.root(), -low.root());
    }
}
