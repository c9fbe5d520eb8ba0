//! Minimum mean square estimation under a sublinear expectation.
//!
//! For a measure set with generators `g_1..g_K`, a target `ξ` and a partition
//! `C`, the estimator minimizes the worst-case error
//!
//! ```text
//! F(η) = max_k E_{g_k}[(ξ - η)²]
//! ```
//!
//! over `C`-measurable `η`. The primary solver works on the dual side: the
//! function
//!
//! ```text
//! φ(λ) = E_{P_λ}[(ξ - E_{P_λ}[ξ | C])²],   P_λ = Σ λ_k g_k
//! ```
//!
//! is concave on the simplex, its gradient is the vector of generator errors
//! `E_{g_k}[(ξ - η_λ)²]` at `η_λ = E_{P_λ}[ξ | C]`, and `max_k ∂_k φ - φ` is
//! exactly the duality gap `F(η_λ) - φ(λ)`. At the maximizer the pair
//! `(η_λ, P_λ)` is a saddle point and `η_λ` is the estimator.

mod brute;
mod kernel;
mod penalized;

pub use brute::{brute_force_mmse, BRUTE_FORCE_MAX_BLOCKS};
pub use kernel::{
    kernel_interval, kernel_member, ns_condition, optimality_ineq, KernelInterval,
    KernelMembership, NsCondition, OptimalityEntry, OptimalityReport, KERNEL_TOL,
};
pub use penalized::{minimax_gap, penalized_value, strictly_comparable, MinimaxGap};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MmseError, Result};
use crate::measures::{
    conditional_expectation, expectation, is_proper, mix, reference_measure, MeasureSet,
    MixtureWeights, ZeroBlockPolicy,
};
use crate::space::{is_measurable, PartitionAlgebra, RandomVariable};

/// A real number or one of the two infinities. Serializes as a JSON number
/// or the strings `"+inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PlusInfinity => s.serialize_str("+inf"),
            ExtendedReal::MinusInfinity => s.serialize_str("-inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative duality-gap target; convergence means `gap <= tol (1 + α)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point of the dual ascent; uniform weights when absent.
    pub initial_weights: Option<MixtureWeights>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            initial_weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    SaddleIteration,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// `ξ` is already measurable; the estimator is `ξ` itself.
    Degenerate,
    /// Iteration budget exhausted; the best iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub eta_hat: RandomVariable,
    /// Worst-case measure as hull coordinates.
    pub p_hat: MixtureWeights,
    pub alpha: f64,
    pub saddle_gap: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    pub status: SolveStatus,
    pub warnings: Vec<String>,
}

impl EstimatorResult {
    pub fn converged(&self) -> bool {
        self.status != SolveStatus::MaxIterations
    }
}

/// Block statistics shared by the solvers.
pub(crate) struct Problem<'a> {
    ms: &'a MeasureSet,
    xi: &'a [f64],
    c: &'a PartitionAlgebra,
    /// `mass[k][b] = g_k(B_b)`
    mass: Vec<Vec<f64>>,
    /// `moment[k][b] = E_{g_k}[ξ 1_{B_b}]`
    moment: Vec<Vec<f64>>,
    /// Reference conditional means, used on blocks a mixture does not charge.
    fallback: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        ms: &'a MeasureSet,
        xi: &'a RandomVariable,
        c: &'a PartitionAlgebra,
    ) -> Result<Self> {
        crate::error::check_len(ms.n(), xi.len())?;
        crate::error::check_len(ms.n(), c.n())?;
        let p0 = reference_measure(ms);
        let fallback = conditional_expectation(&p0, xi, c, ZeroBlockPolicy::Error)?;
        let fallback = c.block_values(&fallback)?;
        let v = xi.values();
        let (mass, moment) = ms
            .generators()
            .iter()
            .map(|g| {
                let w = g.weights();
                c.blocks()
                    .iter()
                    .map(|b| {
                        (
                            b.iter().map(|&i| w[i]).sum::<f64>(),
                            b.iter().map(|&i| w[i] * v[i]).sum::<f64>(),
                        )
                    })
                    .unzip::<f64, f64, Vec<f64>, Vec<f64>>()
            })
            .unzip();
        Ok(Self {
            ms,
            xi: v,
            c,
            mass,
            moment,
            fallback,
        })
    }

    fn k(&self) -> usize {
        self.ms.k()
    }

    fn m(&self) -> usize {
        self.c.num_blocks()
    }

    /// `η_λ = E_{P_λ}[ξ | C]` per block.
    fn eta_of(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|b| {
                let (mut w, mut mx) = (0.0, 0.0);
                for (k, &l) in lambda.iter().enumerate() {
                    w += l * self.mass[k][b];
                    mx += l * self.moment[k][b];
                }
                if w > 0.0 {
                    mx / w
                } else {
                    self.fallback[b]
                }
            })
            .collect()
    }

    /// `E_{g_k}[(ξ - η)²]` for every generator.
    fn errors(&self, eta: &[f64]) -> Vec<f64> {
        let idx = self.c.block_index();
        self.ms
            .generators()
            .iter()
            .map(|g| {
                g.weights()
                    .iter()
                    .zip(self.xi)
                    .zip(idx)
                    .map(|((w, x), &b)| {
                        let d = x - eta[b];
                        w * d * d
                    })
                    .sum()
            })
            .collect()
    }

    /// `(φ(λ), gradient, gap, η_λ)`.
    fn evaluate(&self, lambda: &[f64]) -> Evaluation {
        let eta = self.eta_of(lambda);
        let grad = self.errors(&eta);
        let phi: f64 = lambda.iter().zip(&grad).map(|(l, g)| l * g).sum();
        let top = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Evaluation {
            phi,
            gap: (top - phi).max(0.0),
            top,
            grad,
        }
    }

    /// Newton iteration on the optimality system restricted to the generator
    /// subset `support`: unknowns `(η, λ_S, α)`, equations
    /// `Σ_S λ_k (g_k(B) η_B - E_{g_k}[ξ 1_B]) = 0` per block,
    /// `E_{g_k}[(ξ - η)²] = α` on `S`, and `Σ λ_k = 1`.
    fn newton_on_support(&self, support: &[usize], start: &[f64]) -> Option<Vec<f64>> {
        let m = self.m();
        let s = support.len();
        let dim = m + s + 1;
        let mut lam: Vec<f64> = support.iter().map(|&k| start[k]).collect();
        let total: f64 = lam.iter().sum();
        if total > 0.0 {
            lam.iter_mut().for_each(|l| *l /= total);
        } else {
            lam.iter_mut().for_each(|l| *l = 1.0 / s as f64);
        }
        let mut full = vec![0.0; self.k()];
        for (&k, &l) in support.iter().zip(&lam) {
            full[k] = l;
        }
        let mut eta = self.eta_of(&full);
        let errs = self.errors(&eta);
        let mut alpha = support
            .iter()
            .map(|&k| errs[k])
            .fold(f64::NEG_INFINITY, f64::max);

        let scale = 1.0 + alpha.abs();
        for _ in 0..50 {
            let errs = self.errors(&eta);
            let mut f = DVector::zeros(dim);
            let mut jac = DMatrix::zeros(dim, dim);
            for b in 0..m {
                let mut fb = 0.0;
                let mut wb = 0.0;
                for (j, &k) in support.iter().enumerate() {
                    let d = self.mass[k][b] * eta[b] - self.moment[k][b];
                    fb += lam[j] * d;
                    wb += lam[j] * self.mass[k][b];
                    jac[(b, m + j)] = d;
                }
                f[b] = fb;
                jac[(b, b)] = wb;
            }
            for (j, &k) in support.iter().enumerate() {
                f[m + j] = errs[k] - alpha;
                for b in 0..m {
                    jac[(m + j, b)] = 2.0 * (self.mass[k][b] * eta[b] - self.moment[k][b]);
                }
                jac[(m + j, m + s)] = -1.0;
                jac[(m + s, m + j)] = 1.0;
            }
            f[m + s] = lam.iter().sum::<f64>() - 1.0;
            if f.amax() <= 1e-15 * scale {
                break;
            }
            let svd = jac.svd(true, true);
            let step = svd.solve(&(-&f), 1e-13).ok()?;
            if !step.iter().all(|v| v.is_finite()) {
                return None;
            }
            for b in 0..m {
                eta[b] += step[b];
            }
            for j in 0..s {
                lam[j] += step[m + j];
            }
            alpha += step[m + s];
            if step.amax() <= 1e-16 * scale {
                break;
            }
        }
        if lam.iter().any(|&l| !(l > -1e-9)) {
            return None;
        }
        let mut out = vec![0.0; self.k()];
        for (&k, &l) in support.iter().zip(&lam) {
            out[k] = l.max(0.0);
        }
        let total: f64 = out.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        out.iter_mut().for_each(|l| *l /= total);
        Some(out)
    }

    /// Tries active-set candidates around the current iterate and returns the
    /// best polished point if it improves on the current gap.
    fn polish(&self, lambda: &[f64], current: &Evaluation) -> Option<(Vec<f64>, Evaluation)> {
        let k = self.k();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| current.grad[b].total_cmp(&current.grad[a]).then(a.cmp(&b)));
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        let lmax = lambda.iter().copied().fold(0.0, f64::max);
        let support: Vec<usize> = (0..k).filter(|&j| lambda[j] > 1e-6 * lmax).collect();
        candidates.push(support);
        for size in 1..=k.min(self.m() + 1) {
            let mut s = order[..size].to_vec();
            s.sort_unstable();
            candidates.push(s);
        }
        let band = 1e-4 * (1.0 + current.top.abs());
        let mut near: Vec<usize> = (0..k)
            .filter(|&j| current.grad[j] >= current.top - band)
            .collect();
        near.truncate(4 * (self.m() + 1));
        candidates.push(near);
        candidates.sort();
        candidates.dedup();

        let mut best: Option<(Vec<f64>, Evaluation)> = None;
        for s in candidates.into_iter().filter(|s| !s.is_empty()) {
            let Some(lam) = self.newton_on_support(&s, lambda) else {
                continue;
            };
            let ev = self.evaluate(&lam);
            let incumbent = best.as_ref().map_or(current.gap, |(_, e)| e.gap);
            if ev.gap < incumbent {
                best = Some((lam, ev));
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
struct Evaluation {
    phi: f64,
    gap: f64,
    top: f64,
    grad: Vec<f64>,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

const POLISH_EVERY: usize = 25;

/// Minimizes the worst-case mean square error over `C`-measurable estimators
/// by projected dual ascent with an active-set Newton polish.
pub fn solve_mmse(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    cfg: &SolverConfig,
) -> Result<EstimatorResult> {
    let problem = Problem::new(ms, xi, c)?;
    let mut warnings = ms.warnings();
    if !is_proper(ms) {
        warnings.push("measure set is not proper: solution may be non-unique".into());
    }
    let k = ms.k();

    if is_measurable(xi, c)? {
        return Ok(EstimatorResult {
            eta_hat: xi.clone(),
            p_hat: MixtureWeights::uniform(k)?,
            alpha: 0.0,
            saddle_gap: 0.0,
            iterations: 0,
            solver: SolverKind::SaddleIteration,
            status: SolveStatus::Degenerate,
            warnings,
        });
    }

    let mut lambda = match &cfg.initial_weights {
        Some(w) => {
            crate::error::check_len(k, w.len())?;
            w.weights().to_vec()
        }
        None => vec![1.0 / k as f64; k],
    };
    let mut ev = problem.evaluate(&lambda);
    let mut step = 1.0 / (1.0 + ev.grad.iter().fold(0.0_f64, |a, g| a.max(g.abs())));
    let target = |e: &Evaluation| e.gap <= cfg.tol * (1.0 + e.top.abs());
    let mut iterations = 0;

    while iterations < cfg.max_iter && !target(&ev) {
        if iterations % POLISH_EVERY == 0 {
            if let Some((l, e)) = problem.polish(&lambda, &ev) {
                lambda = l;
                ev = e;
                if target(&ev) {
                    break;
                }
            }
        }
        iterations += 1;
        let mut moved = false;
        while step > 1e-300 {
            let trial: Vec<f64> = lambda
                .iter()
                .zip(&ev.grad)
                .map(|(l, g)| l + step * g)
                .collect();
            let trial = project_simplex(&trial);
            let ascent: f64 = trial
                .iter()
                .zip(&lambda)
                .zip(&ev.grad)
                .map(|((t, l), g)| (t - l) * g)
                .sum();
            if ascent <= 0.0 {
                break;
            }
            let te = problem.evaluate(&trial);
            if te.phi >= ev.phi + 1e-4 * ascent {
                lambda = trial;
                ev = te;
                moved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            // No ascent direction left at floating-point resolution.
            break;
        }
    }
    if let Some((l, e)) = problem.polish(&lambda, &ev) {
        lambda = l;
        ev = e;
    }

    let status = if target(&ev) {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    let p_hat = MixtureWeights::from_iterate(&lambda);
    let eta = problem.eta_of(p_hat.weights());
    let alpha = problem
        .errors(&eta)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EstimatorResult {
        eta_hat: c.broadcast(&eta)?,
        p_hat,
        alpha,
        saddle_gap: ev.gap,
        iterations,
        solver: SolverKind::SaddleIteration,
        status,
        warnings,
    })
}

/// Saddle-point certificate for an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `max_k E_{g_k}[(ξ - η̂)²]`
    pub max_over_p: f64,
    /// `E_{P̂}[(ξ - η̂)²]`
    pub value_at_saddle: f64,
    /// `E_{P̂}[(ξ - E_{P̂}[ξ | C])²]`, the exact inner minimum.
    pub min_over_eta: f64,
    pub passed: bool,
}

/// Checks `E_P[(ξ-η̂)²] ≤ E_{P̂}[(ξ-η̂)²] ≤ E_{P̂}[(ξ-η)²]` for all `P`, `η`,
/// with tolerance `tol (1 + α)`.
pub fn verify_saddle(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    result: &EstimatorResult,
    tol: f64,
) -> Result<Certificate> {
    let residual = xi.sub(&result.eta_hat)?.abs_pow(2.0)?;
    let max_over_p = crate::sublinear::rho(ms, &residual)?.value;
    let p_hat = mix(ms, &result.p_hat)?;
    let value_at_saddle = expectation(&p_hat, &residual)?;
    let inner = conditional_expectation(&p_hat, xi, c, ZeroBlockPolicy::FillWithUnconditional)?;
    let min_over_eta = expectation(&p_hat, &xi.sub(&inner)?.abs_pow(2.0)?)?;
    let t = tol * (1.0 + result.alpha.abs());
    Ok(Certificate {
        max_over_p,
        value_at_saddle,
        min_over_eta,
        passed: max_over_p <= value_at_saddle + t && value_at_saddle <= min_over_eta + t,
    })
}

/// Worst-case mean square error `max_k E_{g_k}[(ξ - η)²]` of an estimator.
pub fn worst_case_error(ms: &MeasureSet, xi: &RandomVariable, eta: &RandomVariable) -> Result<f64> {
    Ok(crate::sublinear::rho(ms, &xi.sub(eta)?.abs_pow(2.0)?)?.value)
}

pub(crate) fn require_measurable(eta: &RandomVariable, c: &PartitionAlgebra) -> Result<()> {
    if is_measurable(eta, c)? {
        Ok(())
    } else {
        Err(MmseError::NotMeasurable)
    }
}
