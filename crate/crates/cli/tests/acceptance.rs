//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mmse_core::estimator::{
    brute_force_mmse, kernel_interval, kernel_member, minimax_gap, ns_condition, penalized_value,
    solve_mmse, verify_saddle, EstimatorResult, ExtendedReal, SolverConfig,
};
use mmse_core::gexp::{compare_gexp_mmse, representation_check, tree_measure_set, TreeModel};
use mmse_core::measures::{
    conditional_expectation, mix, MeasureSet, MixtureWeights, ZeroBlockPolicy,
};
use mmse_core::rng::{SeededRng, DEFAULT_SEED};
use mmse_core::sample::{random_instance, random_instances, Instance, InstanceShape};
use mmse_core::space::{Filtration, PartitionAlgebra, RandomVariable};
use mmse_core::stability::{is_stable, recursivity_check};
use mmse_core::sublinear::{ess_sup_conditional, holder_bound, rho};
use serde_json::Value;

const GRID: f64 = 1e-3;
const TOL: f64 = 1e-8;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example() -> (MeasureSet, RandomVariable, PartitionAlgebra) {
    (
        MeasureSet::from_rows(vec![vec![0.25, 0.75], vec![0.75, 0.25]]).unwrap(),
        RandomVariable::new(vec![2.0, 8.0]).unwrap(),
        PartitionAlgebra::trivial(2).unwrap(),
    )
}

struct Solved {
    inst: Instance,
    result: EstimatorResult,
}

fn corpus() -> Vec<Solved> {
    random_instances(DEFAULT_SEED, 200, &InstanceShape::default())
        .unwrap()
        .into_iter()
        .map(|inst| {
            let result = solve_mmse(&inst.ms, &inst.xi, &inst.c, &SolverConfig::default()).unwrap();
            Solved { inst, result }
        })
        .collect()
}

fn example_reproduction() -> Outcome {
    let start = Instant::now();
    let (ms, xi, c) = example();
    let value = rho(&ms, &xi).unwrap().value;
    let r = solve_mmse(&ms, &xi, &c, &SolverConfig::default()).unwrap();
    let p = mix(&ms, &r.p_hat).unwrap();
    let elapsed = start.elapsed();
    check(value == 6.5, || format!("rho = {value}"))?;
    check((r.eta_hat.values()[0] - 5.0).abs() <= 1e-6, || {
        format!("eta = {:?}", r.eta_hat)
    })?;
    let w = p.weights();
    check(
        (w[0] - 0.5).abs() <= 1e-6 && (w[1] - 0.5).abs() <= 1e-6,
        || format!("P = {w:?}"),
    )?;
    check((r.alpha - 9.0).abs() <= 1e-8, || {
        format!("alpha = {}", r.alpha)
    })?;
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "rho 6.5, eta {}, alpha {}, {elapsed:.2?}",
        r.eta_hat.values()[0],
        r.alpha
    ))
}

fn oracle_equivalence(corpus: &[Solved]) -> Outcome {
    let start = Instant::now();
    let (mut alpha_gap, mut eta_gap) = (0.0_f64, 0.0_f64);
    for s in corpus {
        let i = &s.inst;
        check(s.result.converged(), || "solver did not converge".into())?;
        let grid = brute_force_mmse(&i.ms, &i.xi, &i.c, GRID).unwrap();
        alpha_gap = alpha_gap.max((s.result.alpha - grid.alpha).abs());
        eta_gap = eta_gap.max(s.result.eta_hat.sup_distance(&grid.eta_hat).unwrap());
    }
    let elapsed = start.elapsed();
    check(alpha_gap <= 1e-4, || format!("alpha gap {alpha_gap:e}"))?;
    check(eta_gap <= 2.0 * GRID, || format!("eta gap {eta_gap:e}"))?;
    check(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} instances, max alpha gap {alpha_gap:.1e}, max eta gap {eta_gap:.1e}, {elapsed:.1?}",
        corpus.len()
    ))
}

fn saddle_certificates(corpus: &[Solved]) -> Outcome {
    let mut detected = 0;
    for s in corpus {
        let i = &s.inst;
        let cert = verify_saddle(&i.ms, &i.xi, &i.c, &s.result, TOL).unwrap();
        check(cert.passed, || format!("certificate failed: {cert:?}"))?;
        let mut bump = vec![0.0; i.c.num_blocks()];
        bump[0] = 0.1;
        let mut perturbed = s.result.clone();
        perturbed.eta_hat = s
            .result
            .eta_hat
            .add(&i.c.broadcast(&bump).unwrap())
            .unwrap();
        let cert = verify_saddle(&i.ms, &i.xi, &i.c, &perturbed, TOL).unwrap();
        if cert.value_at_saddle > cert.min_over_eta + TOL * (1.0 + perturbed.alpha.abs()) {
            detected += 1;
        }
    }
    let rate = detected as f64 / corpus.len() as f64;
    check(rate >= 0.95, || {
        format!("perturbation detected on {rate:.3}")
    })?;
    Ok(format!(
        "all certificates pass, perturbation detected on {detected}/{}",
        corpus.len()
    ))
}

fn uniqueness() -> Outcome {
    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x55);
    let mut worst = 0.0_f64;
    let instances = random_instances(DEFAULT_SEED + 4, 50, &InstanceShape::default()).unwrap();
    for inst in &instances {
        check(mmse_core::measures::is_proper(&inst.ms), || {
            "instance not proper".into()
        })?;
        let mut etas = Vec::new();
        for _ in 0..10 {
            let cfg = SolverConfig {
                initial_weights: Some(MixtureWeights::new(rng.simplex(inst.ms.k())).unwrap()),
                ..SolverConfig::default()
            };
            etas.push(
                solve_mmse(&inst.ms, &inst.xi, &inst.c, &cfg)
                    .unwrap()
                    .eta_hat,
            );
        }
        for e in &etas[1..] {
            worst = worst.max(e.sup_distance(&etas[0]).unwrap());
        }
    }
    check(worst <= 1e-5, || format!("restart spread {worst:e}"))?;
    Ok(format!(
        "50 instances x 10 restarts, max spread {worst:.1e}"
    ))
}

fn kernel_characterization(corpus: &[Solved]) -> Outcome {
    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x4b);
    let mut interior = 0;
    for s in corpus {
        let i = &s.inst;
        check(
            kernel_member(&i.ms, &i.xi, &i.c, &s.result.eta_hat)
                .unwrap()
                .member,
            || "estimator outside the kernel".into(),
        )?;
        for g in i.ms.generators() {
            let e = conditional_expectation(g, &i.xi, &i.c, ZeroBlockPolicy::Error).unwrap();
            check(
                kernel_member(&i.ms, &i.xi, &i.c, &e).unwrap().member,
                || "generator conditional expectation outside the kernel".into(),
            )?;
        }
        let above = ess_sup_conditional(&i.ms, &i.xi, &i.c)
            .unwrap()
            .shift(0.5)
            .unwrap();
        check(
            !kernel_member(&i.ms, &i.xi, &i.c, &above).unwrap().member,
            || "shifted upper envelope accepted".into(),
        )?;
        let k = kernel_interval(&i.ms, &i.xi, &i.c).unwrap();
        if k.exact {
            for _ in 0..3 {
                let t = rng.uniform(0.05, 0.95);
                let eta = k.lower.zip_with(&k.upper, |a, b| a + t * (b - a)).unwrap();
                check(
                    kernel_member(&i.ms, &i.xi, &i.c, &eta).unwrap().member,
                    || format!("interior point {t} rejected"),
                )?;
                interior += 1;
            }
        }
    }
    check(interior > 0, || "no stable instance sampled".into())?;
    Ok(format!(
        "{} instances, {interior} interior points accepted",
        corpus.len()
    ))
}

fn ns_condition_check(corpus: &[Solved]) -> Outcome {
    for s in corpus {
        let i = &s.inst;
        let at = ns_condition(&i.ms, &i.xi, &i.c, &s.result.eta_hat, 1e-6).unwrap();
        check(at.holds, || format!("fails at the estimator: {at:?}"))?;
        let off = s.result.eta_hat.shift(0.25).unwrap();
        let off = ns_condition(&i.ms, &i.xi, &i.c, &off, 1e-6).unwrap();
        check(!off.holds, || format!("holds off the estimator: {off:?}"))?;
    }
    Ok(format!("{} instances", corpus.len()))
}

fn solve(ms: &MeasureSet, xi: &RandomVariable, c: &PartitionAlgebra) -> RandomVariable {
    solve_mmse(ms, xi, c, &SolverConfig::default())
        .unwrap()
        .eta_hat
}

/// Generators `p_A ⊗ p_B` on `A × B` sharing one marginal; `C` is generated
/// by the first coordinate and `ξ` depends on the second only.
fn product_instance(rng: &mut SeededRng, share_a: bool) -> Instance {
    let a = rng.range(2, 3) as usize;
    let b = rng.range(2, 3) as usize;
    let k = rng.range(2, 4) as usize;
    let (pa, pb) = (rng.simplex(a), rng.simplex(b));
    let rows = (0..k)
        .map(|_| {
            let (ma, mb) = if share_a {
                (pa.clone(), rng.simplex(b))
            } else {
                (rng.simplex(a), pb.clone())
            };
            ma.iter()
                .flat_map(|x| mb.iter().map(move |y| x * y))
                .collect()
        })
        .collect();
    let values: Vec<f64> = (0..b).map(|_| rng.uniform(-5.0, 5.0)).collect();
    let xi = (0..a).flat_map(|_| values.iter().copied()).collect();
    let labels: Vec<usize> = (0..a).flat_map(|i| std::iter::repeat_n(i, b)).collect();
    Instance {
        ms: MeasureSet::from_rows(rows).unwrap(),
        xi: RandomVariable::new(xi).unwrap(),
        c: PartitionAlgebra::from_labels(&labels).unwrap(),
    }
}

fn basic_properties() -> Outcome {
    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x7);
    let shape = InstanceShape::default();
    for n in 0..100 {
        let i = random_instance(&mut rng, &shape).unwrap();
        let eta = solve(&i.ms, &i.xi, &i.c);

        let lo = i.xi.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi =
            i.xi.values()
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        check(
            eta.values().iter().all(|&v| v >= lo - TOL && v <= hi + TOL),
            || format!("instance {n}: bounds violated"),
        )?;

        for lambda in [rng.uniform(0.2, 3.0), -rng.uniform(0.2, 3.0)] {
            let scaled = solve(&i.ms, &i.xi.scale(lambda).unwrap(), &i.c);
            let d = scaled.sup_distance(&eta.scale(lambda).unwrap()).unwrap();
            check(d <= TOL * (1.0 + lambda.abs()), || {
                format!("instance {n}: scaling by {lambda} off by {d:e}")
            })?;
        }

        let shift: Vec<f64> = (0..i.c.num_blocks())
            .map(|_| rng.uniform(-2.0, 2.0))
            .collect();
        let eta0 = i.c.broadcast(&shift).unwrap();
        let shifted = solve(&i.ms, &i.xi.add(&eta0).unwrap(), &i.c);
        let d = shifted.sup_distance(&eta.add(&eta0).unwrap()).unwrap();
        check(d <= TOL, || {
            format!("instance {n}: translation off by {d:e}")
        })?;

        let p = product_instance(&mut rng, n % 2 == 0);
        let eta = solve(&p.ms, &p.xi, &p.c);
        let spread = eta
            .values()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            - eta.values().iter().copied().fold(f64::INFINITY, f64::min);
        check(spread <= TOL, || {
            format!("instance {n}: independent case spread {spread:e}")
        })?;
    }
    Ok("100 instances, properties i to iv".into())
}

fn penalized_problem() -> Outcome {
    let (ms, xi, c) = example();
    let at = |v: f64| {
        penalized_value(
            &ms,
            &xi,
            &c,
            &RandomVariable::constant(2, v).unwrap(),
            1e-12,
        )
        .unwrap()
    };
    match at(6.5) {
        ExtendedReal::Finite(v) => check((v - 15.75).abs() <= 1e-8, || format!("value {v}"))?,
        other => return Err(format!("value at 6.5 is {other:?}")),
    }
    check(at(5.0) == ExtendedReal::PlusInfinity, || {
        format!("value at 5 is {:?}", at(5.0))
    })?;
    let g = minimax_gap(&ms, &xi, &c, TOL).unwrap();
    check((g.gap - 6.75).abs() <= 1e-6 && !g.ess_sup_is_mmse, || {
        format!("{g:?}")
    })?;

    let shape = InstanceShape {
        max_generators: 1,
        ..InstanceShape::default()
    };
    let singles = random_instances(DEFAULT_SEED + 8, 100, &shape).unwrap();
    let mut worst = 0.0_f64;
    for i in &singles {
        let g = minimax_gap(&i.ms, &i.xi, &i.c, TOL).unwrap();
        check(g.ess_sup_is_mmse, || {
            format!("single generator flagged: {g:?}")
        })?;
        worst = worst.max(g.gap.abs());
    }
    check(worst <= 1e-8, || format!("single-generator gap {worst:e}"))?;
    Ok(format!(
        "example gap {}, {} single-generator gaps <= {worst:.1e}",
        g.gap,
        singles.len()
    ))
}

fn two_step(root: f64, up: f64, down: f64) -> Vec<f64> {
    vec![
        root * up,
        root * (1.0 - up),
        (1.0 - root) * down,
        (1.0 - root) * (1.0 - down),
    ]
}

fn corners(intervals: [(f64, f64); 3]) -> MeasureSet {
    let [r, u, d] = intervals;
    let mut rows = Vec::new();
    for a in [r.0, r.1] {
        for b in [u.0, u.1] {
            for c in [d.0, d.1] {
                rows.push(two_step(a, b, c));
            }
        }
    }
    MeasureSet::from_rows(rows).unwrap()
}

fn tree_filtration() -> Filtration {
    Filtration::new(vec![
        PartitionAlgebra::trivial(4).unwrap(),
        PartitionAlgebra::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap(),
        PartitionAlgebra::discrete(4).unwrap(),
    ])
    .unwrap()
}

fn recursivity_gap(ms: &MeasureSet, f: &Filtration, xi: &RandomVariable) -> (bool, f64) {
    let mut all = true;
    let mut gap = 0.0_f64;
    for sigma in 0..f.len() {
        for tau in sigma..f.len() {
            let r = recursivity_check(ms, f, xi, sigma, tau).unwrap();
            all &= r.equal;
            gap = gap.max(r.gap);
        }
    }
    (all, gap)
}

fn stability_recursivity() -> Outcome {
    let f = tree_filtration();
    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x9);
    let mut sets = vec![corners([(0.25, 0.75); 3])];
    for _ in 0..9 {
        sets.push(corners([0, 1, 2].map(|_| {
            let a = rng.uniform(0.05, 0.9);
            (a, rng.uniform(a + 0.01, 0.95))
        })));
    }
    let mut worst = 0.0_f64;
    for ms in &sets {
        let report = is_stable(ms, &f).unwrap();
        check(report.stable, || {
            format!("rectangular set rejected: {:?}", report.witness)
        })?;
        for _ in 0..10 {
            let xi = RandomVariable::new((0..4).map(|_| rng.uniform(-5.0, 5.0)).collect()).unwrap();
            let (ok, gap) = recursivity_gap(ms, &f, &xi);
            check(ok, || format!("recursivity gap {gap:e}"))?;
            worst = worst.max(gap);
        }
    }
    let diagonal =
        MeasureSet::from_rows(vec![two_step(0.25, 0.25, 0.25), two_step(0.75, 0.75, 0.75)])
            .unwrap();
    check(!is_stable(&diagonal, &f).unwrap().stable, || {
        "diagonal set accepted".into()
    })?;
    let xi = RandomVariable::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let (ok, gap) = recursivity_gap(&diagonal, &f, &xi);
    check(!ok && gap > 1e-3, || {
        format!("diagonal recursivity gap {gap:e}")
    })?;
    Ok(format!(
        "10 sets x 10 xi recursive (max gap {worst:.1e}), diagonal gap {gap}"
    ))
}

fn mmse(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_mmse"))
        .args(args)
        .output()
        .unwrap();
    if !out.status.success() {
        panic!(
            "mmse {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    serde_json::from_slice(&out.stdout).unwrap()
}

fn time_consistency_failure() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("counterexample.json");
    let path = file.to_str().unwrap();
    let search = mmse(&["tcsearch", "--counterexample", path]);
    let p = &search["payload"];
    check(p["seed"] == DEFAULT_SEED && p["trials"] == 1000, || {
        format!("{p}")
    })?;
    check(p["found"] == true, || "no counterexample".into())?;
    let ce = &p["counterexample"];
    let gap = ce["gap"].as_f64().unwrap();
    check(gap > 1e-3, || format!("gap {gap}"))?;
    check(Path::new(path).exists(), || {
        "counterexample not written".into()
    })?;
    let replay = mmse(&["stability", path]);
    let again = replay["payload"]["time_consistency"]["gap"]
        .as_f64()
        .unwrap();
    check((again - gap).abs() <= 1e-9, || {
        format!("replayed gap {again} vs {gap}")
    })?;
    check(replay["instance_digest"] == ce["instance_digest"], || {
        "digest changed".into()
    })?;
    Ok(format!(
        "trial {}, gap {gap:.6}, replay differs by {:.1e}",
        ce["trial"],
        (again - gap).abs()
    ))
}

fn gexp_contrast() -> Outcome {
    let cfg = SolverConfig::default();
    let t1 = TreeModel::standard(1).unwrap();
    let c1 = compare_gexp_mmse(&t1, &[8.0, 2.0], 0, &cfg).unwrap();
    check((c1.sup_diff - 1.5).abs() <= 1e-6, || {
        format!("T=1 diff {}", c1.sup_diff)
    })?;

    let t2 = TreeModel::standard(2).unwrap();
    let top = [1.0, 0.0, 0.0, 0.0];
    let c2 = compare_gexp_mmse(&t2, &top, 1, &cfg).unwrap();
    let ms = tree_measure_set(&t2).unwrap();
    let c = t2.level_partition(1).unwrap();
    let grid =
        brute_force_mmse(&ms, &RandomVariable::new(top.to_vec()).unwrap(), &c, GRID).unwrap();
    let oracle_diff = c2.gexp_cond.sup_distance(&grid.eta_hat).unwrap();
    check(c2.sup_diff > 1e-3, || format!("T=2 diff {}", c2.sup_diff))?;
    check((oracle_diff - c2.sup_diff).abs() <= 2.0 * GRID, || {
        format!("oracle diff {oracle_diff} vs {}", c2.sup_diff)
    })?;

    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x11);
    let mut worst = 0.0_f64;
    for depth in 1..=4 {
        let tm = TreeModel::standard(depth).unwrap();
        for _ in 0..5 {
            let leaves: Vec<f64> = (0..tm.leaves()).map(|_| rng.uniform(-5.0, 5.0)).collect();
            worst = worst.max(representation_check(&tm, &leaves).unwrap().gap);
        }
    }
    check(worst <= 1e-10, || format!("representation gap {worst:e}"))?;
    Ok(format!(
        "T=1 diff {}, T=2 diff {} (oracle {oracle_diff:.4}), representation gap {worst:.1e}",
        c1.sup_diff, c2.sup_diff
    ))
}

fn holder() -> Outcome {
    let mut rng = SeededRng::new(DEFAULT_SEED ^ 0x13);
    let shape = InstanceShape::default();
    let mut slack = f64::INFINITY;
    for _ in 0..200 {
        let i = random_instance(&mut rng, &shape).unwrap();
        let y =
            RandomVariable::new((0..i.xi.len()).map(|_| rng.uniform(-5.0, 5.0)).collect()).unwrap();
        for (p, q) in [(2.0, 2.0), (3.0, 1.5)] {
            let h = holder_bound(&i.ms, &i.xi, &y, p, q).unwrap();
            check(h.holds(1e-10), || format!("({p}, {q}): {h:?}"))?;
            slack = slack.min(h.rhs - h.lhs);
        }
    }
    let (ms, xi, _) = example();
    let centred = xi.shift(-5.0).unwrap();
    for (p, q) in [(2.0, 2.0), (3.0, 1.5)] {
        let h = holder_bound(&ms, &centred, &centred, p, q).unwrap();
        check((h.lhs - h.rhs).abs() <= 1e-10, || {
            format!("equality case ({p}, {q}): {h:?}")
        })?;
    }
    Ok(format!(
        "400 checks, min slack {slack:.1e}, equality case exact"
    ))
}

fn main() {
    let corpus = corpus();
    let criteria: Vec<Criterion> = vec![
        ("example reproduction", Box::new(example_reproduction)),
        (
            "oracle equivalence",
            Box::new(|| oracle_equivalence(&corpus)),
        ),
        (
            "saddle certificates",
            Box::new(|| saddle_certificates(&corpus)),
        ),
        ("uniqueness", Box::new(uniqueness)),
        (
            "kernel characterization",
            Box::new(|| kernel_characterization(&corpus)),
        ),
        ("NS condition", Box::new(|| ns_condition_check(&corpus))),
        ("basic properties", Box::new(basic_properties)),
        ("penalized problem", Box::new(penalized_problem)),
        ("stability and recursivity", Box::new(stability_recursivity)),
        (
            "time-consistency failure",
            Box::new(time_consistency_failure),
        ),
        ("g-expectation contrast", Box::new(gexp_contrast)),
        ("Hölder inequality", Box::new(holder)),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(details) => println!("criterion {} [PRIMARY] {name}: PASS ({details})", n + 1),
            Err(details) => {
                failed += 1;
                println!("criterion {} [PRIMARY] {name}: FAIL ({details})", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
