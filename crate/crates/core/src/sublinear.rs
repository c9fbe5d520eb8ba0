//! The sublinear operator `rho(x) = max_P E_P[x]` over a measure set, its
//! conditional envelopes, and checks of its defining properties.

use serde::Serialize;

use crate::error::{MmseError, Result};
use crate::measures::{block_conditional_means, expectation, MeasureSet};
use crate::rng::SeededRng;
use crate::space::{PartitionAlgebra, RandomVariable};

/// Generators within this distance of the maximum are reported as ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoValue {
    pub value: f64,
    /// Smallest index of a maximizing generator.
    pub argmax_generator: usize,
    pub ties: Vec<usize>,
}

/// Expectation of `x` under every generator.
pub fn generator_expectations(ms: &MeasureSet, x: &RandomVariable) -> Result<Vec<f64>> {
    ms.generators().iter().map(|g| expectation(g, x)).collect()
}

pub fn rho(ms: &MeasureSet, x: &RandomVariable) -> Result<RhoValue> {
    let values = generator_expectations(ms, x)?;
    let (argmax, value) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    let ties = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= value - TIE_TOL)
        .map(|(i, _)| i)
        .collect();
    Ok(RhoValue {
        value,
        argmax_generator: argmax,
        ties,
    })
}

#[derive(Clone, Copy)]
enum Envelope {
    Upper,
    Lower,
}

fn envelope(
    ms: &MeasureSet,
    x: &RandomVariable,
    c: &PartitionAlgebra,
    side: Envelope,
) -> Result<RandomVariable> {
    let mut best: Vec<Option<f64>> = vec![None; c.num_blocks()];
    for g in ms.generators() {
        for (slot, m) in best.iter_mut().zip(block_conditional_means(g, x, c)?) {
            // Generators without mass on a block contribute nothing there.
            let Some(m) = m else { continue };
            *slot = Some(match (*slot, side) {
                (None, _) => m,
                (Some(b), Envelope::Upper) => b.max(m),
                (Some(b), Envelope::Lower) => b.min(m),
            });
        }
    }
    let values = best
        .into_iter()
        .enumerate()
        .map(|(b, v)| v.ok_or(MmseError::ZeroMassBlock { block: b }))
        .collect::<Result<Vec<f64>>>()?;
    c.broadcast(&values)
}

/// Blockwise maximum of the generators' conditional means: the conditional
/// upper envelope `ess sup_P E_P[x | c]` over the hull.
pub fn ess_sup_conditional(
    ms: &MeasureSet,
    x: &RandomVariable,
    c: &PartitionAlgebra,
) -> Result<RandomVariable> {
    envelope(ms, x, c, Envelope::Upper)
}

/// Blockwise minimum of the generators' conditional means.
pub fn ess_inf_conditional(
    ms: &MeasureSet,
    x: &RandomVariable,
    c: &PartitionAlgebra,
) -> Result<RandomVariable> {
    envelope(ms, x, c, Envelope::Lower)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl HolderBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// `rho(|x1 x2|)` against `rho(|x1|^p)^(1/p) rho(|x2|^q)^(1/q)`.
pub fn holder_bound(
    ms: &MeasureSet,
    x1: &RandomVariable,
    x2: &RandomVariable,
    p: f64,
    q: f64,
) -> Result<HolderBound> {
    if !(p > 1.0 && q > 1.0) || (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
        return Err(MmseError::InvalidArgument(format!(
            "exponents {p} and {q} are not conjugate"
        )));
    }
    let lhs = rho(ms, &x1.mul(x2)?.abs()?)?.value;
    let a = rho(ms, &x1.abs_pow(p)?)?.value.max(0.0);
    let b = rho(ms, &x2.abs_pow(q)?)?.value.max(0.0);
    Ok(HolderBound {
        lhs,
        rhs: a.powf(1.0 / p) * b.powf(1.0 / q),
    })
}

/// One sample for [`axiom_suite`].
#[derive(Debug, Clone)]
pub struct AxiomSample {
    pub x: RandomVariable,
    pub y: RandomVariable,
    pub lambda: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Monotonicity,
    ConstantPreserving,
    Subadditivity,
    PositiveHomogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub sample: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub checks: usize,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const AXIOM_TOL: f64 = 1e-10;

/// Checks monotonicity, constant preservation, subadditivity and positive
/// homogeneity on each sample. Monotonicity is tested on the ordered pairs
/// `x ∧ y ≤ x ≤ x ∨ y`, and on `(x, y)` itself when it is ordered.
pub fn axiom_suite(ms: &MeasureSet, samples: &[AxiomSample]) -> Result<AxiomReport> {
    let n = ms.n();
    let r = |v: &RandomVariable| rho(ms, v).map(|r| r.value);
    let mut checks = 0;
    let mut violations = Vec::new();
    let mut check = |axiom, sample, lhs: f64, rhs: f64, ok: bool| {
        checks += 1;
        if !ok {
            violations.push(AxiomViolation {
                axiom,
                sample,
                lhs,
                rhs,
            });
        }
    };
    for (s, smp) in samples.iter().enumerate() {
        let (x, y) = (&smp.x, &smp.y);
        let rx = r(x)?;
        let ry = r(y)?;

        let lo = x.zip_with(y, f64::min)?;
        let hi = x.zip_with(y, f64::max)?;
        let (rlo, rhi) = (r(&lo)?, r(&hi)?);
        check(Axiom::Monotonicity, s, rlo, rx, rlo <= rx + AXIOM_TOL);
        check(Axiom::Monotonicity, s, rx, rhi, rx <= rhi + AXIOM_TOL);
        if x.le(y)? {
            check(Axiom::Monotonicity, s, rx, ry, rx <= ry + AXIOM_TOL);
        }

        let rc = r(&RandomVariable::constant(n, smp.constant)?)?;
        check(
            Axiom::ConstantPreserving,
            s,
            rc,
            smp.constant,
            (rc - smp.constant).abs() <= AXIOM_TOL * (1.0 + smp.constant.abs()),
        );

        let rsum = r(&x.add(y)?)?;
        check(
            Axiom::Subadditivity,
            s,
            rsum,
            rx + ry,
            rsum <= rx + ry + AXIOM_TOL,
        );

        let lambda = smp.lambda.abs();
        let rscaled = r(&x.scale(lambda)?)?;
        check(
            Axiom::PositiveHomogeneity,
            s,
            rscaled,
            lambda * rx,
            (rscaled - lambda * rx).abs() <= AXIOM_TOL * (1.0 + lambda * rx.abs()),
        );
    }
    Ok(AxiomReport { checks, violations })
}

/// Seeded samples with values in `[-scale, scale]` and `lambda` in
/// `[0, 4]`. The first sample always uses `lambda = 0`.
pub fn axiom_samples(seed: u64, n: usize, count: usize, scale: f64) -> Result<Vec<AxiomSample>> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|i| {
            let x = RandomVariable::new((0..n).map(|_| rng.uniform(-scale, scale)).collect())?;
            let y = RandomVariable::new((0..n).map(|_| rng.uniform(-scale, scale)).collect())?;
            let lambda = if i == 0 { 0.0 } else { rng.uniform(0.0, 4.0) };
            let constant = rng.uniform(-scale, scale);
            Ok(AxiomSample {
                x,
                y,
                lambda,
                constant,
            })
        })
        .collect()
}
