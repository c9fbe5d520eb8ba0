//! Grid-search oracle for the estimator. It only evaluates the worst-case
//! error through `rho`, sharing no code path with the dual solver.

use super::{EstimatorResult, SolveStatus, SolverKind};
use crate::error::{MmseError, Result};
use crate::lp::hull_fit;
use crate::measures::{
    conditional_expectation, expectation, is_proper, mix, MeasureSet, MixtureWeights,
    ZeroBlockPolicy,
};
use crate::space::{PartitionAlgebra, RandomVariable};
use crate::sublinear::rho;

pub const BRUTE_FORCE_MAX_BLOCKS: usize = 4;

/// Evaluation budget of the global grid stage.
const GLOBAL_BUDGET: usize = 20_000;
/// Final bracket width of the line searches, relative to the grid step.
const LINE_RESOLUTION: f64 = 1e-3;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct Objective<'a> {
    ms: &'a MeasureSet,
    xi: &'a RandomVariable,
    c: &'a PartitionAlgebra,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, eta: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let est = self.c.broadcast(eta)?;
        Ok(rho(self.ms, &self.xi.sub(&est)?.abs_pow(2.0)?)?.value)
    }
}

/// Visits every point of the grid `center + step * i`, `|i_b| <= radius`,
/// clipped to `[-bound, bound]`, and returns the best one (first in
/// lexicographic order among exact ties).
fn scan(
    f: &mut Objective<'_>,
    center: &[f64],
    step: f64,
    radius: &[i64],
    bound: f64,
) -> Result<(Vec<f64>, f64)> {
    let m = center.len();
    let mut idx: Vec<i64> = radius.iter().map(|r| -r).collect();
    let mut best = (center.to_vec(), f64::INFINITY);
    let mut point = vec![0.0; m];
    loop {
        for b in 0..m {
            point[b] = (center[b] + step * idx[b] as f64).clamp(-bound, bound);
        }
        let v = f.eval(&point)?;
        if v < best.1 {
            best = (point.clone(), v);
        }
        let mut b = 0;
        loop {
            if b == m {
                return Ok(best);
            }
            idx[b] += 1;
            if idx[b] <= radius[b] {
                break;
            }
            idx[b] = -radius[b];
            b += 1;
        }
    }
}

/// Minimizes `F` over coordinates `j..` with the earlier ones fixed in
/// `point`, by golden-section search on `[-bound, bound]` per coordinate.
/// Partial minima of a convex function are convex, so each nested search is
/// unimodal and the recursion finds the global minimum.
fn nested_golden(
    f: &mut Objective<'_>,
    point: &mut [f64],
    j: usize,
    bound: f64,
    width: f64,
) -> Result<(Vec<f64>, f64)> {
    if j == point.len() {
        let v = f.eval(point)?;
        return Ok((point.to_vec(), v));
    }
    let inner = |x: f64, point: &mut [f64], f: &mut Objective<'_>| {
        point[j] = x;
        nested_golden(f, point, j + 1, bound, width)
    };
    let (mut a, mut b) = (-bound, bound);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = inner(x1, point, f)?;
    let mut f2 = inner(x2, point, f)?;
    while b - a > width {
        if f1.1 <= f2.1 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = inner(x1, point, f)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = inner(x2, point, f)?;
        }
    }
    Ok(if f1.1 <= f2.1 { f1 } else { f2 })
}

/// Grid search over `[-M, M]^blocks` followed by a nested line-search
/// refinement.
///
/// The grid runs at `grid_step` when it fits the evaluation budget and at
/// the finest uniform spacing that fits otherwise. The refinement is a
/// golden-section search per block, nested over the blocks and run on the
/// whole box down to `grid_step * 1e-3`; the better of the two points wins.
/// Only `rho` evaluations of the worst-case error are used.
pub fn brute_force_mmse(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    grid_step: f64,
) -> Result<EstimatorResult> {
    if !(grid_step > 0.0) {
        return Err(MmseError::InvalidArgument(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let m = c.num_blocks();
    if m > BRUTE_FORCE_MAX_BLOCKS {
        return Err(MmseError::GuardRefusal(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_BLOCKS} blocks, got {m}"
        )));
    }
    crate::error::check_len(ms.n(), xi.len())?;
    crate::error::check_len(ms.n(), c.n())?;
    let bound = xi.bound();
    let mut f = Objective {
        ms,
        xi,
        c,
        evaluations: 0,
    };

    let full_axis = (2.0 * bound / grid_step).ceil() as usize + 1;
    let full_size = (full_axis as f64).powi(m as i32);
    let (mut best, mut value) = if full_size <= GLOBAL_BUDGET as f64 {
        let half = ((full_axis - 1) / 2) as i64;
        scan(&mut f, &vec![0.0; m], grid_step, &vec![half + 1; m], bound)?
    } else {
        let per_axis = ((GLOBAL_BUDGET as f64).powf(1.0 / m as f64).floor() as i64).max(3);
        let half = (per_axis - 1) / 2;
        scan(
            &mut f,
            &vec![0.0; m],
            bound / half as f64,
            &vec![half; m],
            bound,
        )?
    };
    if bound > 0.0 {
        let (p, v) = nested_golden(
            &mut f,
            &mut vec![0.0; m],
            0,
            bound,
            grid_step * LINE_RESOLUTION,
        )?;
        if v < value {
            best = p;
            value = v;
        }
    }

    let eta_hat = c.broadcast(&best)?;
    let resid = xi.sub(&eta_hat)?;
    let errors: Vec<f64> = ms
        .generators()
        .iter()
        .map(|g| expectation(g, &resid.abs_pow(2.0)?))
        .collect::<Result<_>>()?;
    // Stationarity weights over the nearly active generators.
    let band = 1e-6 * (1.0 + value.abs());
    let active: Vec<usize> = (0..ms.k()).filter(|&k| errors[k] >= value - band).collect();
    let slopes: Vec<Vec<f64>> = active
        .iter()
        .map(|&k| {
            let w = ms.generator(k).weights();
            c.blocks()
                .iter()
                .map(|b| b.iter().map(|&i| w[i] * resid.values()[i]).sum())
                .collect()
        })
        .collect();
    let fit = hull_fit(&slopes, &vec![0.0; m])?;
    let mut lambda = vec![0.0; ms.k()];
    for (&k, &w) in active.iter().zip(&fit.weights) {
        lambda[k] = w;
    }
    let p_hat = MixtureWeights::from_iterate(&lambda);
    let p = mix(ms, &p_hat)?;
    let inner = conditional_expectation(&p, xi, c, ZeroBlockPolicy::FillWithUnconditional)?;
    let phi = expectation(&p, &xi.sub(&inner)?.abs_pow(2.0)?)?;

    let mut warnings = ms.warnings();
    if !is_proper(ms) {
        warnings.push("measure set is not proper: solution may be non-unique".into());
    }
    Ok(EstimatorResult {
        eta_hat,
        p_hat,
        alpha: value,
        saddle_gap: (value - phi).max(0.0),
        iterations: f.evaluations,
        solver: SolverKind::BruteForce,
        status: SolveStatus::Converged,
        warnings,
    })
}
