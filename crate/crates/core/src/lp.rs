//! Dense two-phase simplex method with Bland's pivoting rule.
//!
//! Problems here are tiny (a handful of generators times a few dozen blocks),
//! so the solver keeps a full tableau and recomputes reduced costs from
//! scratch at every pivot. Bland's rule makes the pivot sequence, and hence
//! the returned vertex, deterministic.

use crate::error::{MmseError, Result};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// `minimize c·x subject to A x = b, x >= 0`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible { phase_one_value: f64 },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations for `cost` over columns `0..allowed`.
    /// Returns false if the objective is unbounded below.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.rows)
                        .map(|(&bi, row)| cost[bi] * row[j])
                        .sum::<f64>();
                reduced < -PIVOT_EPS
            });
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_EPS
                                || (ratio <= lr + PIVOT_EPS && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, col),
            }
        }
        Err(MmseError::Internal("simplex pivot limit reached".into()))
    }
}

pub fn solve(lp: &StandardLp) -> Result<LpOutcome> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.a.iter().any(|r| r.len() != n) {
        return Err(MmseError::Internal("malformed linear program".into()));
    }
    // Columns: n structural, m artificial, then rhs.
    let ncols = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (arow, &bi)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = arow.iter().map(|v| sign * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        row.push(sign * bi);
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        ncols,
    };

    let mut phase_one = vec![0.0; ncols];
    for v in phase_one.iter_mut().skip(n) {
        *v = 1.0;
    }
    t.optimize(&phase_one, ncols)?;
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    let scale = 1.0 + lp.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible {
            phase_one_value: infeasibility,
        });
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and get dropped.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9 && !t.basis.contains(&j)) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !t.optimize(&cost, n)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for (r, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs(r).max(0.0);
        }
    }
    let value = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Closest convex combination of `points` to `target` in the L1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFit {
    pub weights: Vec<f64>,
    /// L1 distance between the combination and the target.
    pub residual: f64,
}

/// Solves `min ||Σ μ_k p_k - t||_1` over the simplex. The target lies in the
/// hull iff the residual vanishes.
pub fn hull_fit(points: &[Vec<f64>], target: &[f64]) -> Result<HullFit> {
    let k = points.len();
    let d = target.len();
    if k == 0 || points.iter().any(|p| p.len() != d) {
        return Err(MmseError::Internal("malformed hull problem".into()));
    }
    // Variables: μ (k), s+ (d), s- (d).
    let nvars = k + 2 * d;
    let mut a = Vec::with_capacity(d + 1);
    for j in 0..d {
        let mut row = vec![0.0; nvars];
        for (kk, p) in points.iter().enumerate() {
            row[kk] = p[j];
        }
        row[k + j] = 1.0;
        row[k + d + j] = -1.0;
        a.push(row);
    }
    let mut simplex_row = vec![0.0; nvars];
    for v in simplex_row.iter_mut().take(k) {
        *v = 1.0;
    }
    a.push(simplex_row);
    let mut b = target.to_vec();
    b.push(1.0);
    let mut c = vec![0.0; nvars];
    for v in c.iter_mut().skip(k) {
        *v = 1.0;
    }
    match solve(&StandardLp { a, b, c })? {
        LpOutcome::Optimal { x, value } => Ok(HullFit {
            weights: x[..k].to_vec(),
            residual: value,
        }),
        other => Err(MmseError::Internal(format!(
            "hull fit should be feasible and bounded, got {other:?}"
        ))),
    }
}

/// Solution of `min_η max_k (offsets[k] - <η, slopes[k]>)` over the box
/// `[lo, hi]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxAffine {
    pub value: f64,
    pub argmin: Vec<f64>,
}

/// Epigraph form: minimize `t` subject to `t >= a_k - <η, b_k>`. With
/// `η = u + lo`, `u ∈ [0, hi - lo]`, `t = t⁺ - t⁻`, every row becomes
/// `t⁺ - t⁻ + <u, b_k> - s_k = a_k - lo Σ_B b_kB`.
pub fn min_max_affine(
    offsets: &[f64],
    slopes: &[Vec<f64>],
    lo: f64,
    hi: f64,
) -> Result<MinMaxAffine> {
    let k = offsets.len();
    if k == 0 || slopes.len() != k || !(hi >= lo) {
        return Err(MmseError::Internal("malformed min-max problem".into()));
    }
    let m = slopes[0].len();
    // Variables: t+, t-, u (m), s (k), r (m).
    let nvars = 2 + m + k + m;
    let mut a = Vec::with_capacity(k + m);
    let mut b = Vec::with_capacity(k + m);
    for (kk, (&ak, bk)) in offsets.iter().zip(slopes).enumerate() {
        let mut row = vec![0.0; nvars];
        row[0] = 1.0;
        row[1] = -1.0;
        for (j, &v) in bk.iter().enumerate() {
            row[2 + j] = v;
        }
        row[2 + m + kk] = -1.0;
        a.push(row);
        b.push(ak - lo * bk.iter().sum::<f64>());
    }
    for j in 0..m {
        let mut row = vec![0.0; nvars];
        row[2 + j] = 1.0;
        row[2 + m + k + j] = 1.0;
        a.push(row);
        b.push(hi - lo);
    }
    let mut c = vec![0.0; nvars];
    c[0] = 1.0;
    c[1] = -1.0;
    match solve(&StandardLp { a, b, c })? {
        LpOutcome::Optimal { x, value } => Ok(MinMaxAffine {
            value,
            argmin: x[2..2 + m].iter().map(|u| u + lo).collect(),
        }),
        other => Err(MmseError::Internal(format!(
            "box-constrained min-max must have a finite optimum, got {other:?}"
        ))),
    }
}
