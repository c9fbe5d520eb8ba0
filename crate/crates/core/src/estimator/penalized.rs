//! The penalized problem `inf_η sup_{η̃ >= 0} rho[(ξ - η)² + η̃ (ξ - η)]` and
//! its relation to the upper envelope `ess sup_P E_P[ξ | C]`.

use serde::Serialize;

use super::{require_measurable, solve_mmse, ExtendedReal, SolverConfig};
use crate::error::{MmseError, Result};
use crate::measures::{is_proper, MeasureSet};
use crate::space::{PartitionAlgebra, RandomVariable};
use crate::sublinear::{ess_sup_conditional, rho};

/// On a finite space: every generator charges every point.
pub fn strictly_comparable(ms: &MeasureSet) -> bool {
    ms.all_strictly_positive()
}

fn require_proper(ms: &MeasureSet) -> Result<()> {
    if is_proper(ms) {
        Ok(())
    } else {
        Err(MmseError::NotProper(
            "penalized problem needs mutually equivalent generators".into(),
        ))
    }
}

/// `sup_{η̃ >= 0} rho[(ξ - η)² + η̃ (ξ - η)]` for a measurable `η`.
///
/// If `η` lies below the upper envelope on some block, placing a constant
/// penalty `t` on that block adds `t · max_k E_{g_k}[(ξ - η) 1_B] > 0` and
/// the supremum is `+∞`. Otherwise every penalty term is nonpositive and the
/// supremum is attained at `η̃ = 0`.
pub fn penalized_value(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    eta: &RandomVariable,
    tol: f64,
) -> Result<ExtendedReal> {
    require_proper(ms)?;
    require_measurable(eta, c)?;
    let upper = ess_sup_conditional(ms, xi, c)?;
    if !upper.le(&eta.shift(tol)?)? {
        return Ok(ExtendedReal::PlusInfinity);
    }
    Ok(ExtendedReal::Finite(
        rho(ms, &xi.sub(eta)?.abs_pow(2.0)?)?.value,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxGap {
    /// Penalized value at the upper envelope.
    pub minimax: f64,
    /// Optimal worst-case error.
    pub maximin: f64,
    pub gap: f64,
    pub ess_sup_is_mmse: bool,
    pub eta_ess: RandomVariable,
    pub eta_hat: RandomVariable,
}

/// Compares the penalized value at the upper envelope with the optimal
/// worst-case error; the envelope is the estimator iff the two agree.
pub fn minimax_gap(
    ms: &MeasureSet,
    xi: &RandomVariable,
    c: &PartitionAlgebra,
    tol: f64,
) -> Result<MinimaxGap> {
    require_proper(ms)?;
    let eta_ess = ess_sup_conditional(ms, xi, c)?;
    let minimax = penalized_value(ms, xi, c, &eta_ess, tol)?
        .finite()
        .ok_or_else(|| MmseError::Internal("penalized value infinite at the envelope".into()))?;
    let cfg = SolverConfig {
        tol: tol.min(1e-10),
        ..SolverConfig::default()
    };
    let solved = solve_mmse(ms, xi, c, &cfg)?;
    let gap = minimax - solved.alpha;
    Ok(MinimaxGap {
        minimax,
        maximin: solved.alpha,
        gap,
        ess_sup_is_mmse: gap <= tol,
        eta_ess,
        eta_hat: solved.eta_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example() -> (MeasureSet, RandomVariable, PartitionAlgebra) {
        (
            MeasureSet::from_rows(vec![vec![0.25, 0.75], vec![0.75, 0.25]]).unwrap(),
            RandomVariable::new(vec![2.0, 8.0]).unwrap(),
            PartitionAlgebra::trivial(2).unwrap(),
        )
    }

    fn constant(c: f64) -> RandomVariable {
        RandomVariable::new(vec![c, c]).unwrap()
    }

    #[test]
    fn penalized_examples() {
        let (ms, xi, c) = example();
        let v = penalized_value(&ms, &xi, &c, &constant(6.5), 1e-12).unwrap();
        assert_abs_diff_eq!(v.finite().unwrap(), 15.75, epsilon = 1e-12);
        let v = penalized_value(&ms, &xi, &c, &constant(5.0), 1e-12).unwrap();
        assert_eq!(v, ExtendedReal::PlusInfinity);
        let v = penalized_value(&ms, &xi, &c, &constant(9.0), 1e-12).unwrap();
        assert_abs_diff_eq!(v.finite().unwrap(), 0.75 * 49.0 + 0.25, epsilon = 1e-12);
    }

    #[test]
    fn gap_example() {
        let (ms, xi, c) = example();
        let g = minimax_gap(&ms, &xi, &c, 1e-8).unwrap();
        assert_abs_diff_eq!(g.minimax, 15.75, epsilon = 1e-12);
        assert_abs_diff_eq!(g.maximin, 9.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g.gap, 6.75, epsilon = 1e-6);
        assert!(!g.ess_sup_is_mmse);
    }

    #[test]
    fn gap_single_generator_and_measurable_target() {
        let ms = MeasureSet::from_rows(vec![vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let xi = RandomVariable::new(vec![1.0, -2.0, 5.0, 0.5]).unwrap();
        let c = PartitionAlgebra::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let g = minimax_gap(&ms, &xi, &c, 1e-8).unwrap();
        assert!(g.gap.abs() <= 1e-8);
        assert!(g.ess_sup_is_mmse);

        let (ms, _, _) = example();
        let xi = RandomVariable::new(vec![1.0, 4.0]).unwrap();
        let g = minimax_gap(&ms, &xi, &PartitionAlgebra::discrete(2).unwrap(), 1e-8).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.eta_ess, xi);
        assert_eq!(g.eta_hat, xi);
    }

    #[test]
    fn non_proper_refused() {
        let ms = MeasureSet::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let xi = RandomVariable::new(vec![2.0, 8.0]).unwrap();
        let c = PartitionAlgebra::trivial(2).unwrap();
        assert!(!strictly_comparable(&ms));
        assert!(matches!(
            minimax_gap(&ms, &xi, &c, 1e-8),
            Err(MmseError::NotProper(_))
        ));
    }
}
