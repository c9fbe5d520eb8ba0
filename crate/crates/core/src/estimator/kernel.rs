//! Kernel membership, the envelope interval, and the optimality conditions.
//!
//! For `η̃` measurable, `f(η̃) = inf_η rho[(ξ - η̃) η]` is the infimum over
//! block vectors `η` of `max_k <c_k, η>` with `c_k[B] = E_{g_k}[(ξ - η̃) 1_B]`.
//! That is positively homogeneous in `η`, so it is `0` when the origin lies
//! in the convex hull of the `c_k` and `-∞` otherwise (by separation).

use serde::Serialize;

use super::{require_measurable, ExtendedReal};
use crate::error::Result;
use crate::lp::{hull_fit, min_max_affine};
use crate::measures::MeasureSet;
use crate::space::{Filtration, PartitionAlgebra, RandomVariable};
use crate::stability::is_stable;
use crate::sublinear::{ess_inf_conditional, ess_sup_conditional, rho};

/// L1 feasibility tolerance of the hull tests.
pub const KERNEL_TOL: f64 = 1e-9;

/// `E_{g_k}[r 1_B]` for every generator and block.
fn block_moments(ms: &MeasureSet, r: &[f64], c: &PartitionAlgebra) -> Vec<Vec<f64>> {
    ms.generators()
        .iter()
        .map(|g| {
            let w = g.weights();
            c.blocks()
                .iter()
                .map(|b| b.iter().map(|&i| w[i] * r[i]).sum())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMembership {
    pub member: bool,
    /// L1 distance from the origin to the hull of the block moments.
    pub residual: f64,
    /// Mixture weights realizing the closest hull point.
    pub weights: Vec<f64>,
}

/// Decides whether `eta_tilde` lies in the kernel of
/// `f(η̃) = inf_η rho[(ξ - η̃) η]`.
pub fn kernel_member(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    eta_tilde: &RandomVariable,
) -> Result<KernelMembership> {
    require_measurable(eta_tilde, c)?;
    let r = xi.sub(eta_tilde)?;
    let moments = block_moments(ms, r.values(), c);
    let fit = hull_fit(&moments, &vec![0.0; c.num_blocks()])?;
    Ok(KernelMembership {
        member: fit.residual <= KERNEL_TOL,
        residual: fit.residual,
        weights: fit.weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelInterval {
    pub lower: RandomVariable,
    pub upper: RandomVariable,
    /// True when the set passed the stability check around `c`, so the
    /// interval is exactly the kernel; otherwise it is an outer bound.
    pub exact: bool,
}

/// Envelope interval `[ess inf, ess sup]` of the conditional expectations.
///
/// Stability is checked on the filtration `trivial ⊂ c ⊂ discrete`; sets with
/// zero-weight points skip the check and report an outer bound.
pub fn kernel_interval(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
) -> Result<KernelInterval> {
    let lower = ess_inf_conditional(ms, xi, c)?;
    let upper = ess_sup_conditional(ms, xi, c)?;
    let exact = ms.all_strictly_positive() && is_stable(ms, &Filtration::around(c)?)?.stable;
    Ok(KernelInterval {
        lower,
        upper,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsCondition {
    /// `inf_η rho[(ξ - η̂)(ξ - η)]`
    pub inf_value: ExtendedReal,
    /// `rho[(ξ - η̂)²]`
    pub rho_sq: f64,
    pub holds: bool,
}

/// Necessary and sufficient optimality condition
/// `inf_η rho[(ξ - η̂)(ξ - η)] = rho[(ξ - η̂)²]`.
///
/// The objective is `max_k (a_k - <η, b_k>)` with `a_k = E_{g_k}[(ξ-η̂)ξ]` and
/// `b_k[B] = E_{g_k}[(ξ-η̂) 1_B]`. Unboundedness over all `η` is decided by
/// the hull test `0 ∈ conv{b_k}`; otherwise the epigraph LP runs over the box
/// `[-M, M]^blocks`.
pub fn ns_condition(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    eta_hat: &RandomVariable,
    tol: f64,
) -> Result<NsCondition> {
    require_measurable(eta_hat, c)?;
    let r = xi.sub(eta_hat)?;
    let rho_sq = rho(ms, &r.abs_pow(2.0)?)?.value;
    let slopes = block_moments(ms, r.values(), c);
    if hull_fit(&slopes, &vec![0.0; c.num_blocks()])?.residual > KERNEL_TOL {
        return Ok(NsCondition {
            inf_value: ExtendedReal::MinusInfinity,
            rho_sq,
            holds: false,
        });
    }
    let offsets: Vec<f64> = ms
        .generators()
        .iter()
        .map(|g| {
            g.weights()
                .iter()
                .zip(r.values())
                .zip(xi.values())
                .map(|((w, ri), x)| w * ri * x)
                .sum()
        })
        .collect();
    let m = xi.bound();
    let inf = min_max_affine(&offsets, &slopes, -m, m)?.value;
    Ok(NsCondition {
        inf_value: ExtendedReal::Finite(inf),
        rho_sq,
        holds: (inf - rho_sq).abs() <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityEntry {
    /// `rho[(ξ - η)(ξ - η̂)]`
    pub lhs: f64,
    /// `lhs - rho[(ξ - η̂)²]`
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub rho_sq: f64,
    pub entries: Vec<OptimalityEntry>,
}

impl OptimalityReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }
}

/// Checks `rho[(ξ - η)(ξ - η̂)] >= rho[(ξ - η̂)²]` for each supplied `η`.
pub fn optimality_ineq(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    eta_hat: &RandomVariable,
    etas: &[RandomVariable],
    tol: f64,
) -> Result<OptimalityReport> {
    require_measurable(eta_hat, c)?;
    let r = xi.sub(eta_hat)?;
    let rho_sq = rho(ms, &r.abs_pow(2.0)?)?.value;
    let entries = etas
        .iter()
        .map(|eta| {
            require_measurable(eta, c)?;
            let lhs = rho(ms, &xi.sub(eta)?.mul(&r)?)?.value;
            let margin = lhs - rho_sq;
            Ok(OptimalityEntry {
                lhs,
                margin,
                ok: margin >= -tol,
            })
        })
        .collect::<Result<_>>()?;
    Ok(OptimalityReport { rho_sq, entries })
}
