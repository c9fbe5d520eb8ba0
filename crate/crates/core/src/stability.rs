//! Pasting of measures along a filtration, stability of measure sets, the
//! recursivity of the conditional upper envelope, and a randomized search for
//! time-consistency failures of the estimator.

use serde::Serialize;

use crate::error::{MmseError, Result};
use crate::estimator::{solve_mmse, SolverConfig};
use crate::lp::hull_fit;
use crate::measures::{Measure, MeasureSet};
use crate::rng::SeededRng;
use crate::space::{Filtration, PartitionAlgebra, RandomVariable};
use crate::sublinear::ess_sup_conditional;

/// L1 tolerance of the hull-membership test for pasted measures.
pub const STABILITY_TOL: f64 = 1e-9;

pub const STABILITY_LABEL: &str = "stable (generator-pasting)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PastedMeasure {
    pub base: Measure,
    pub tail: Measure,
    pub switch_level: usize,
    pub result: Measure,
}

/// Follows `q0` up to `level` and `q` afterwards:
/// `result[i] = q0(B_i) q[i] / q(B_i)` with `B_i` the level block of `i`.
pub fn paste(q0: &Measure, q: &Measure, f: &Filtration, level: usize) -> Result<PastedMeasure> {
    crate::error::check_len(f.n(), q0.len())?;
    crate::error::check_len(f.n(), q.len())?;
    let part = f.level(level)?;
    let base_mass = q0.block_masses(part)?;
    let tail_mass = q.block_masses(part)?;
    let mut out = vec![0.0; f.n()];
    for (b, block) in part.blocks().iter().enumerate() {
        if base_mass[b] == 0.0 {
            continue;
        }
        if tail_mass[b] == 0.0 {
            return Err(MmseError::PastingDegeneracy { block: b });
        }
        for &i in block {
            out[i] = if base_mass[b] == tail_mass[b] {
                q.weights()[i]
            } else {
                base_mass[b] * q.weights()[i] / tail_mass[b]
            };
        }
    }
    Ok(PastedMeasure {
        base: q0.clone(),
        tail: q.clone(),
        switch_level: level,
        result: Measure::from_raw(out),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityWitness {
    pub base_generator: usize,
    pub tail_generator: usize,
    pub pasted: PastedMeasure,
    /// L1 distance from the pasted measure to the hull.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub label: &'static str,
    pub pastings_checked: usize,
    pub witness: Option<StabilityWitness>,
}

/// Pastes every ordered pair of generators at every level and tests whether
/// the result stays in the hull.
pub fn is_stable(ms: &MeasureSet, f: &Filtration) -> Result<StabilityReport> {
    crate::error::check_len(ms.n(), f.n())?;
    let points: Vec<Vec<f64>> = ms
        .generators()
        .iter()
        .map(|g| g.weights().to_vec())
        .collect();
    let mut checked = 0;
    for level in 0..f.len() {
        for (a, q0) in ms.generators().iter().enumerate() {
            for (b, q) in ms.generators().iter().enumerate() {
                if a == b {
                    continue;
                }
                let pasted = paste(q0, q, f, level)?;
                checked += 1;
                let fit = hull_fit(&points, pasted.result.weights())?;
                if fit.residual > STABILITY_TOL {
                    return Ok(StabilityReport {
                        stable: false,
                        label: STABILITY_LABEL,
                        pastings_checked: checked,
                        witness: Some(StabilityWitness {
                            base_generator: a,
                            tail_generator: b,
                            pasted,
                            residual: fit.residual,
                        }),
                    });
                }
            }
        }
    }
    Ok(StabilityReport {
        stable: true,
        label: STABILITY_LABEL,
        pastings_checked: checked,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursivityCheck {
    pub sigma_level: usize,
    pub tau_level: usize,
    /// Envelope of `ξ` at `σ`.
    pub lhs: RandomVariable,
    /// Envelope at `σ` of the envelope at `τ`.
    pub rhs: RandomVariable,
    pub gap: f64,
    pub equal: bool,
}

pub const RECURSIVITY_TOL: f64 = 1e-9;

pub fn recursivity_check(
    ms: &MeasureSet,
    f: &Filtration,
    xi: &RandomVariable,
    sigma_level: usize,
    tau_level: usize,
) -> Result<RecursivityCheck> {
    if sigma_level > tau_level {
        return Err(MmseError::InvalidArgument(format!(
            "sigma level {sigma_level} exceeds tau level {tau_level}"
        )));
    }
    let sigma = f.level(sigma_level)?;
    let tau = f.level(tau_level)?;
    let lhs = ess_sup_conditional(ms, xi, sigma)?;
    let rhs = ess_sup_conditional(ms, &ess_sup_conditional(ms, xi, tau)?, sigma)?;
    let gap = lhs.sup_distance(&rhs)?;
    Ok(RecursivityCheck {
        sigma_level,
        tau_level,
        lhs,
        rhs,
        gap,
        equal: gap <= RECURSIVITY_TOL,
    })
}

/// Both estimator sequences of a two-level filtration `L1 ⊂ L2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chains {
    /// `[η̂(ξ | L2), η̂(η̂(ξ | L2) | L1)]`
    pub two_stage: Vec<RandomVariable>,
    /// `[η̂(ξ | L1)]`
    pub direct: Vec<RandomVariable>,
    pub gap: f64,
}

/// Runs the two-stage and the direct estimator on the first two levels of
/// `f` (coarse first).
pub fn time_consistency_chains(
    ms: &MeasureSet,
    xi: &RandomVariable,
    f: &Filtration,
    cfg: &SolverConfig,
) -> Result<Chains> {
    if f.len() < 2 {
        return Err(MmseError::InvalidArgument(
            "time-consistency chains need a filtration with two levels".into(),
        ));
    }
    let (coarse, fine) = (f.level(0)?, f.level(1)?);
    let converged = |r: crate::estimator::EstimatorResult| {
        if r.converged() {
            Ok(r.eta_hat)
        } else {
            Err(MmseError::Internal("solver did not converge".into()))
        }
    };
    let stage = converged(solve_mmse(ms, xi, fine, cfg)?)?;
    let chained = converged(solve_mmse(ms, &stage, coarse, cfg)?)?;
    let direct = converged(solve_mmse(ms, xi, coarse, cfg)?)?;
    let gap = chained.sup_distance(&direct)?;
    Ok(Chains {
        two_stage: vec![stage, chained],
        direct: vec![direct],
        gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub seed: u64,
    pub trials: usize,
    pub min_generators: usize,
    pub max_generators: usize,
    pub max_points: usize,
    /// Entries of generators and `ξ` are multiples of `1 / denominator`.
    pub denominator: i64,
    pub threshold: f64,
    pub solver: SolverConfig,
}

impl SearchConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        Self {
            seed,
            trials,
            min_generators: 2,
            max_generators: 4,
            max_points: 8,
            denominator: 16,
            threshold: 1e-3,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub generators: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    /// Coarse level first.
    pub filtration: Vec<Vec<Vec<usize>>>,
    pub chains: Chains,
}

impl Counterexample {
    pub fn measure_set(&self) -> Result<MeasureSet> {
        MeasureSet::from_rows(self.generators.clone())
    }

    pub fn filtration(&self) -> Result<Filtration> {
        let n = self.xi.len();
        Filtration::new(
            self.filtration
                .iter()
                .map(|blocks| PartitionAlgebra::new(n, blocks.clone()))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub seed: u64,
    pub trials_run: usize,
    pub counterexample: Option<Counterexample>,
}

struct Trial {
    generators: Vec<Vec<f64>>,
    xi: Vec<f64>,
    coarse: Vec<usize>,
    fine: Vec<usize>,
}

fn draw_trial(rng: &mut SeededRng, cfg: &SearchConfig) -> Trial {
    let den = cfg.denominator;
    let n = rng.range(3, cfg.max_points as i64) as usize;
    let fine_blocks = rng.range(2, n as i64) as usize;
    let coarse_blocks = rng.range(1, fine_blocks as i64 - 1) as usize;
    let fine = rng.labels(n, fine_blocks);
    let merge = rng.labels(fine_blocks, coarse_blocks);
    let coarse = fine.iter().map(|&l| merge[l]).collect();
    let k = rng.range(cfg.min_generators as i64, cfg.max_generators as i64) as usize;
    let generators = (0..k).map(|_| rng.rational_simplex(n, den)).collect();
    let xi = (0..n).map(|_| rng.rational(-4, 4, den)).collect();
    Trial {
        generators,
        xi,
        coarse,
        fine,
    }
}

/// Searches random rational instances for a two-level filtration on which
/// chaining the estimator differs from estimating directly on the coarse
/// level. Trial `t` draws from a stream seeded with the `t`-th output of the
/// master stream, so the reported counterexample is the one with the
/// smallest trial index.
pub fn mmse_time_consistency_search(cfg: &SearchConfig) -> Result<SearchReport> {
    if cfg.trials == 0 {
        return Err(MmseError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    if cfg.min_generators == 0 || cfg.min_generators > cfg.max_generators {
        return Err(MmseError::InvalidArgument("invalid generator range".into()));
    }
    if cfg.max_points < 3 || cfg.denominator < cfg.max_points as i64 {
        return Err(MmseError::InvalidArgument(
            "need at least 3 points and a denominator no smaller than the point count".into(),
        ));
    }
    let mut master = SeededRng::new(cfg.seed);
    for trial in 0..cfg.trials {
        let mut rng = SeededRng::new(master.next_u64());
        let t = draw_trial(&mut rng, cfg);
        let ms = MeasureSet::from_rows(t.generators.clone())?;
        let xi = RandomVariable::new(t.xi.clone())?;
        let f = Filtration::new(vec![
            PartitionAlgebra::from_labels(&t.coarse)?,
            PartitionAlgebra::from_labels(&t.fine)?,
        ])?;
        let chains = match time_consistency_chains(&ms, &xi, &f, &cfg.solver) {
            Ok(c) => c,
            Err(MmseError::Internal(_)) => continue,
            Err(e) => return Err(e),
        };
        if chains.gap > cfg.threshold {
            return Ok(SearchReport {
                seed: cfg.seed,
                trials_run: trial + 1,
                counterexample: Some(Counterexample {
                    trial,
                    generators: t.generators,
                    xi: t.xi,
                    filtration: f.levels().iter().map(|p| p.blocks().to_vec()).collect(),
                    chains,
                }),
            });
        }
    }
    Ok(SearchReport {
        seed: cfg.seed,
        trials_run: cfg.trials,
        counterexample: None,
    })
}
