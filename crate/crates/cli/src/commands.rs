//! Command implementations. Each returns a JSON payload and an exit status.

use serde::Serialize;
use serde_json::{json, Value};

use mmse_core::estimator::{
    brute_force_mmse, kernel_interval, kernel_member, minimax_gap, ns_condition, solve_mmse,
    verify_saddle, SolverConfig,
};
use mmse_core::gexp::{compare_gexp_mmse, g_expectation, representation_check, tree_measure_set};
use mmse_core::measures::{is_proper, MeasureSet};
use mmse_core::rng::DEFAULT_SEED;
use mmse_core::space::{Filtration, PartitionAlgebra, RandomVariable, SampleSpace};
use mmse_core::stability::{
    is_stable, mmse_time_consistency_search, recursivity_check, time_consistency_chains,
    SearchConfig,
};
use mmse_core::sublinear::{ess_inf_conditional, ess_sup_conditional, rho};

use crate::error::{CliError, ExitStatus};
use crate::instance::{InstanceFile, Model, Options, Structure};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
pub const DEFAULT_TRIALS: usize = 1000;
pub const NS_TOL: f64 = 1e-6;
pub const ORACLE_ALPHA_TOL: f64 = 1e-4;
pub const REPRESENTATION_TOL: f64 = 1e-10;

/// Effective options after command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub grid_step: Option<f64>,
    pub level: Option<usize>,
    pub max_generators: Option<usize>,
}

impl Settings {
    /// Command-line values win over the instance options.
    pub fn merged(&self, options: &Options) -> Settings {
        Settings {
            tol: self.tol.or(options.tol.map(|n| n.get())),
            max_iter: self.max_iter.or(options.max_iter),
            seed: self.seed.or(options.seed),
            trials: self.trials.or(options.trials),
            grid_step: self.grid_step.or(options.grid_step.map(|n| n.get())),
            level: self.level.or(options.level),
            max_generators: self.max_generators,
        }
    }

    fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            tol: self.tol(),
            ..SolverConfig::default()
        };
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }
}

pub struct Outcome {
    pub payload: Value,
    pub status: ExitStatus,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload serializes")
}

/// Measure set, target and every partition of the instance.
struct Flat {
    ms: MeasureSet,
    xi: RandomVariable,
    levels: Vec<PartitionAlgebra>,
    single: bool,
}

fn flatten(model: &Model) -> Result<Flat, CliError> {
    match model {
        Model::Flat {
            ms, xi, structure, ..
        } => {
            let (levels, single) = match structure {
                Structure::Partition(p) => (vec![p.clone()], true),
                Structure::Filtration(f) => (f.levels().to_vec(), false),
            };
            Ok(Flat {
                ms: ms.clone(),
                xi: xi.clone(),
                levels,
                single,
            })
        }
        Model::Tree { tm, leaves } => Ok(Flat {
            ms: tree_measure_set(tm)?,
            xi: RandomVariable::new(leaves.clone())?,
            levels: tm.filtration()?.levels().to_vec(),
            single: false,
        }),
    }
}

impl Flat {
    fn conditioning(&self, level: Option<usize>) -> Result<(usize, &PartitionAlgebra), CliError> {
        let k = level.unwrap_or(0);
        if self.single && k != 0 {
            return Err(CliError::Validation(format!(
                "options.level: {k} given for a single partition"
            )));
        }
        self.levels.get(k).map(|p| (k, p)).ok_or_else(|| {
            CliError::Validation(format!(
                "options.level: {k} out of range ({} levels)",
                self.levels.len()
            ))
        })
    }

    fn filtration(&self) -> Result<Filtration, CliError> {
        Ok(if self.single {
            Filtration::around(&self.levels[0])?
        } else {
            Filtration::new(self.levels.clone())?
        })
    }
}

pub fn cmd_rho(model: &Model, _s: &Settings) -> Result<Outcome, CliError> {
    let flat = flatten(model)?;
    let value = rho(&flat.ms, &flat.xi)?;
    let envelopes = flat
        .levels
        .iter()
        .enumerate()
        .map(|(k, p)| {
            Ok(json!({
                "level": k,
                "partition": p.blocks(),
                "upper": ess_sup_conditional(&flat.ms, &flat.xi, p)?,
                "lower": ess_inf_conditional(&flat.ms, &flat.xi, p)?,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Outcome {
        payload: json!({ "rho": value, "envelopes": envelopes }),
        status: ExitStatus::Success,
    })
}

pub fn cmd_solve(model: &Model, s: &Settings) -> Result<Outcome, CliError> {
    let flat = flatten(model)?;
    let (level, c) = flat.conditioning(s.level)?;
    let (ms, xi) = (&flat.ms, &flat.xi);
    let r = solve_mmse(ms, xi, c, &s.solver())?;
    let saddle = verify_saddle(ms, xi, c, &r, s.tol())?;
    let kernel = kernel_member(ms, xi, c, &r.eta_hat)?;
    let ns = ns_condition(ms, xi, c, &r.eta_hat, NS_TOL)?;
    let envelope = kernel_interval(ms, xi, c)?;
    let penalized = if is_proper(ms) {
        to_value(&minimax_gap(ms, xi, c, s.tol())?)
    } else {
        Value::Null
    };
    let status = if !r.converged() {
        ExitStatus::NonConvergence
    } else if saddle.passed && kernel.member && ns.holds {
        ExitStatus::Success
    } else {
        ExitStatus::CertificateFailure
    };
    Ok(Outcome {
        payload: json!({
            "level": level,
            "partition": c.blocks(),
            "estimator": r,
            "certificates": {
                "saddle": saddle,
                "kernel_member": kernel,
                "ns_condition": ns,
                "all_passed": saddle.passed && kernel.member && ns.holds,
            },
            "envelope": envelope,
            "penalized": penalized,
        }),
        status,
    })
}

pub fn cmd_oracle(model: &Model, s: &Settings) -> Result<Outcome, CliError> {
    let flat = flatten(model)?;
    let (level, c) = flat.conditioning(s.level)?;
    let step = s.grid_step.unwrap_or(DEFAULT_GRID_STEP);
    let grid = brute_force_mmse(&flat.ms, &flat.xi, c, step)?;
    let dual = solve_mmse(&flat.ms, &flat.xi, c, &s.solver())?;
    let alpha_diff = (grid.alpha - dual.alpha).abs();
    let eta_diff = grid.eta_hat.sup_distance(&dual.eta_hat)?;
    let agree = alpha_diff <= ORACLE_ALPHA_TOL && eta_diff <= 2.0 * step;
    let status = if !dual.converged() {
        ExitStatus::NonConvergence
    } else if agree {
        ExitStatus::Success
    } else {
        ExitStatus::CertificateFailure
    };
    Ok(Outcome {
        payload: json!({
            "level": level,
            "partition": c.blocks(),
            "grid_step": step,
            "brute_force": grid,
            "solver": dual,
            "alpha_diff": alpha_diff,
            "eta_diff": eta_diff,
            "agree": agree,
        }),
        status,
    })
}

pub fn cmd_stability(model: &Model, s: &Settings) -> Result<Outcome, CliError> {
    let flat = flatten(model)?;
    let f = flat.filtration()?;
    let report = is_stable(&flat.ms, &f)?;
    let mut checks = Vec::new();
    for sigma in 0..f.len() {
        for tau in sigma..f.len() {
            checks.push(recursivity_check(&flat.ms, &f, &flat.xi, sigma, tau)?);
        }
    }
    let recursive = checks.iter().all(|c| c.equal);
    let chains = if flat.single {
        Value::Null
    } else {
        let cfg = s.solver();
        to_value(&time_consistency_chains(&flat.ms, &flat.xi, &f, &cfg)?)
    };
    let status = if report.stable && !recursive {
        ExitStatus::CertificateFailure
    } else {
        ExitStatus::Success
    };
    Ok(Outcome {
        payload: json!({
            "filtration": f.levels().iter().map(|p| p.blocks()).collect::<Vec<_>>(),
            "stability": report,
            "recursivity": checks,
            "recursive": recursive,
            "time_consistency": chains,
        }),
        status,
    })
}

/// Result of a search together with the counterexample as an instance file.
pub struct SearchOutcome {
    pub outcome: Outcome,
    pub counterexample: Option<InstanceFile>,
}

pub fn cmd_tcsearch(s: &Settings) -> Result<SearchOutcome, CliError> {
    let trials = s.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Validation("trials: must be at least 1".into()));
    }
    let mut cfg = SearchConfig::new(s.seed.unwrap_or(DEFAULT_SEED), trials);
    cfg.solver = s.solver();
    if let Some(k) = s.max_generators {
        if k == 0 {
            return Err(CliError::Validation(
                "max-generators: must be at least 1".into(),
            ));
        }
        cfg.max_generators = k;
        cfg.min_generators = cfg.min_generators.min(k);
    }
    let report = mmse_time_consistency_search(&cfg)?;
    let file = match &report.counterexample {
        Some(ce) => {
            let model = Model::Flat {
                omega: SampleSpace::numbered(ce.xi.len())?,
                ms: ce.measure_set()?,
                xi: RandomVariable::new(ce.xi.clone())?,
                structure: Structure::Filtration(ce.filtration()?),
            };
            let options = Options {
                tol: Some(cfg.solver.tol.into()),
                ..Options::default()
            };
            let mut file = InstanceFile::from_model(&model, options);
            file.chains = Some(to_value(&ce.chains));
            Some(file)
        }
        None => None,
    };
    let payload = json!({
        "seed": report.seed,
        "trials": trials,
        "trials_run": report.trials_run,
        "found": report.counterexample.is_some(),
        "counterexample": report.counterexample.as_ref().map(|ce| json!({
            "trial": ce.trial,
            "gap": ce.chains.gap,
            "instance_digest": file.as_ref().map(|f| f.digest()).transpose().ok().flatten(),
            "instance": file,
        })),
    });
    Ok(SearchOutcome {
        outcome: Outcome {
            payload,
            status: ExitStatus::Success,
        },
        counterexample: file,
    })
}

pub fn cmd_gexp(model: &Model, s: &Settings) -> Result<Outcome, CliError> {
    let Model::Tree { tm, leaves } = model else {
        return Err(CliError::Validation(
            "tree: the gexp command needs a tree instance".into(),
        ));
    };
    let result = g_expectation(tm, leaves)?;
    let representation = representation_check(tm, leaves)?;
    let levels: Vec<usize> = match s.level {
        Some(l) if l > tm.depth => {
            return Err(CliError::Validation(format!(
                "options.level: {l} exceeds tree depth {}",
                tm.depth
            )))
        }
        Some(l) => vec![l],
        None => (0..tm.depth).collect(),
    };
    let cfg = s.solver();
    let comparisons = levels
        .iter()
        .map(|&l| compare_gexp_mmse(tm, leaves, l, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let max_diff = comparisons.iter().map(|c| c.sup_diff).fold(0.0, f64::max);
    let converged = comparisons.iter().all(|c| c.estimator.converged());
    let status = if !converged {
        ExitStatus::NonConvergence
    } else if representation.gap > REPRESENTATION_TOL {
        ExitStatus::CertificateFailure
    } else {
        ExitStatus::Success
    };
    Ok(Outcome {
        payload: json!({
            "tree": tm,
            "g_expectation": result,
            "representation": representation,
            "comparisons": comparisons,
            "max_sup_diff": max_diff,
        }),
        status,
    })
}
