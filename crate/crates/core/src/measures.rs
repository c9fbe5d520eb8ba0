//! Probability measures on a finite space and finite-generator measure sets.
//!
//! A [`MeasureSet`] stands for the convex hull of its generators. Every
//! functional maximized over the set in this crate is linear in the measure,
//! so maxima over the hull are attained at generators.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MmseError, Result};
use crate::space::{PartitionAlgebra, RandomVariable};

/// Tolerance on the total mass of user-supplied weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

fn normalize_simplex(mut w: Vec<f64>, what: &str) -> std::result::Result<Vec<f64>, String> {
    if w.is_empty() {
        return Err(format!("{what} is empty"));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(format!("{what} entry {i} is not finite"));
    }
    if let Some(i) = w.iter().position(|&v| v < 0.0) {
        return Err(format!("{what} entry {i} is negative ({})", w[i]));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("{what} sums to {total}, expected 1"));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    /// Validates nonnegativity and unit mass (within [`SIMPLEX_TOL`]) and then
    /// renormalizes.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        normalize_simplex(weights, "measure")
            .map(|weights| Self { weights })
            .map_err(MmseError::InvalidMeasure)
    }

    /// Wraps weights already known to form a probability vector.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    /// Normalizes arbitrary nonnegative mass into a probability vector.
    pub(crate) fn from_mass(mass: Vec<f64>) -> Result<Self> {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || mass.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(MmseError::InvalidMeasure(
                "mass vector is not a positive finite measure".into(),
            ));
        }
        Ok(Self {
            weights: mass.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(MmseError::InvalidMeasure("empty measure".into()));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Mass of every block of `c`.
    pub fn block_masses(&self, c: &PartitionAlgebra) -> Result<Vec<f64>> {
        check_len(c.n(), self.len())?;
        Ok(c.blocks()
            .iter()
            .map(|b| b.iter().map(|&i| self.weights[i]).sum())
            .collect())
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let weights = Vec::<f64>::deserialize(d)?;
        Measure::new(weights).map_err(serde::de::Error::custom)
    }
}

/// Weights of a convex combination of generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureWeights {
    lambda: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        normalize_simplex(lambda, "mixture weights")
            .map(|lambda| Self { lambda })
            .map_err(MmseError::InvalidArgument)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(MmseError::InvalidArgument("no generators".into()));
        }
        Ok(Self {
            lambda: vec![1.0 / k as f64; k],
        })
    }

    /// Unit vector `e_i` in dimension `k`.
    pub fn vertex(k: usize, i: usize) -> Result<Self> {
        if i >= k {
            return Err(MmseError::InvalidArgument(format!(
                "vertex {i} out of range for {k} generators"
            )));
        }
        let mut lambda = vec![0.0; k];
        lambda[i] = 1.0;
        Ok(Self { lambda })
    }

    /// Clips tiny negative round-off and renormalizes; used for iterates that
    /// are simplex points up to floating error.
    pub(crate) fn from_iterate(lambda: &[f64]) -> Self {
        let clipped: Vec<f64> = lambda.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        Self {
            lambda: clipped.into_iter().map(|v| v / total).collect(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

impl<'de> Deserialize<'de> for MixtureWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lambda = Vec::<f64>::deserialize(d)?;
        MixtureWeights::new(lambda).map_err(serde::de::Error::custom)
    }
}

/// Finitely many generators; the represented set is their convex hull.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSet {
    generators: Vec<Measure>,
}

impl MeasureSet {
    pub fn new(generators: Vec<Measure>) -> Result<Self> {
        let first = generators.first().ok_or_else(|| {
            MmseError::InvalidArgument("measure set needs at least one generator".into())
        })?;
        let n = first.len();
        for g in &generators {
            check_len(n, g.len())?;
        }
        Ok(Self { generators })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Measure::new).collect::<Result<_>>()?)
    }

    pub fn generators(&self) -> &[Measure] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &Measure {
        &self.generators[k]
    }

    /// Number of generators.
    pub fn k(&self) -> usize {
        self.generators.len()
    }

    /// Number of sample points.
    pub fn n(&self) -> usize {
        self.generators[0].len()
    }

    /// Index pairs `(i, j)`, `i < j`, of identical generators. Duplicates do
    /// not change the hull.
    pub fn duplicate_generators(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                if self.generators[i] == self.generators[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn warnings(&self) -> Vec<String> {
        self.duplicate_generators()
            .into_iter()
            .map(|(i, j)| format!("generators {i} and {j} are identical"))
            .collect()
    }

    pub fn all_strictly_positive(&self) -> bool {
        self.generators.iter().all(Measure::is_strictly_positive)
    }
}

/// Zero-mass conditioning block handling for [`conditional_expectation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroBlockPolicy {
    #[default]
    Error,
    FillWithUnconditional,
}

pub fn expectation(p: &Measure, x: &RandomVariable) -> Result<f64> {
    check_len(p.len(), x.len())?;
    Ok(p.weights.iter().zip(x.values()).map(|(w, v)| w * v).sum())
}

/// Per-block conditional means of `x` under `p`; `None` on blocks of zero mass.
pub fn block_conditional_means(
    p: &Measure,
    x: &RandomVariable,
    c: &PartitionAlgebra,
) -> Result<Vec<Option<f64>>> {
    check_len(p.len(), x.len())?;
    check_len(c.n(), x.len())?;
    let (w, v) = (p.weights(), x.values());
    Ok(c.blocks()
        .iter()
        .map(|b| {
            let mass: f64 = b.iter().map(|&i| w[i]).sum();
            if mass > 0.0 {
                Some(b.iter().map(|&i| w[i] * v[i]).sum::<f64>() / mass)
            } else {
                None
            }
        })
        .collect())
}

/// Classical conditional expectation `E_P[x | c]`, the blockwise weighted
/// average.
pub fn conditional_expectation(
    p: &Measure,
    x: &RandomVariable,
    c: &PartitionAlgebra,
    policy: ZeroBlockPolicy,
) -> Result<RandomVariable> {
    let means = block_conditional_means(p, x, c)?;
    let fill = match policy {
        ZeroBlockPolicy::Error => None,
        ZeroBlockPolicy::FillWithUnconditional => Some(expectation(p, x)?),
    };
    let values = means
        .into_iter()
        .enumerate()
        .map(|(b, m)| match (m, fill) {
            (Some(m), _) => Ok(m),
            (None, Some(f)) => Ok(f),
            (None, None) => Err(MmseError::ZeroMassBlock { block: b }),
        })
        .collect::<Result<Vec<f64>>>()?;
    c.broadcast(&values)
}

/// Convex combination of the generators.
pub fn mix(ms: &MeasureSet, w: &MixtureWeights) -> Result<Measure> {
    check_len(ms.k(), w.len())?;
    let mut mass = vec![0.0; ms.n()];
    for (g, &l) in ms.generators().iter().zip(w.weights()) {
        if l == 0.0 {
            continue;
        }
        for (m, &gi) in mass.iter_mut().zip(g.weights()) {
            *m += l * gi;
        }
    }
    Measure::from_mass(mass)
}

/// Uniform mixture of the generators; it dominates every element of the hull.
pub fn reference_measure(ms: &MeasureSet) -> Measure {
    mix(ms, &MixtureWeights::uniform(ms.k()).expect("nonempty set"))
        .expect("mixture of valid generators is a measure")
}

/// True iff every generator charges every point charged by the reference
/// measure, i.e. all elements of the hull are mutually equivalent.
pub fn is_proper(ms: &MeasureSet) -> bool {
    let p0 = reference_measure(ms);
    ms.generators().iter().all(|g| {
        g.weights()
            .iter()
            .zip(p0.weights())
            .all(|(&gi, &ri)| ri == 0.0 || gi > 0.0)
    })
}

/// Radon-Nikodym derivative `dp/dp0` with `0/0 := 0`.
pub fn density(p: &Measure, p0: &Measure) -> Result<RandomVariable> {
    check_len(p0.len(), p.len())?;
    let values = p
        .weights()
        .iter()
        .zip(p0.weights())
        .enumerate()
        .map(|(i, (&a, &b))| {
            if b > 0.0 {
                Ok(a / b)
            } else if a == 0.0 {
                Ok(0.0)
            } else {
                Err(MmseError::AbsoluteContinuity { index: i })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    RandomVariable::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_set() -> MeasureSet {
        MeasureSet::from_rows(vec![vec![0.25, 0.75], vec![0.75, 0.25]]).unwrap()
    }

    fn rv(v: &[f64]) -> RandomVariable {
        RandomVariable::new(v.to_vec()).unwrap()
    }

    fn m(v: &[f64]) -> Measure {
        Measure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let xi = rv(&[2.0, 8.0]);
        assert_eq!(expectation(&m(&[0.25, 0.75]), &xi).unwrap(), 6.5);
        assert_eq!(expectation(&m(&[0.5, 0.5]), &xi).unwrap(), 5.0);
        assert_eq!(
            expectation(&m(&[0.1, 0.2, 0.7]), &rv(&[3.0, 3.0, 3.0])).unwrap(),
            3.0
        );
        assert!(expectation(&m(&[0.5, 0.5]), &rv(&[1.0])).is_err());
    }

    #[test]
    fn conditional_expectation_examples() {
        let xi = rv(&[2.0, 8.0]);
        let trivial = PartitionAlgebra::trivial(2).unwrap();
        let half = conditional_expectation(&m(&[0.5, 0.5]), &xi, &trivial, ZeroBlockPolicy::Error);
        assert_eq!(half.unwrap().values(), &[5.0, 5.0]);
        let quarter =
            conditional_expectation(&m(&[0.25, 0.75]), &xi, &trivial, ZeroBlockPolicy::Error);
        assert_eq!(quarter.unwrap().values(), &[6.5, 6.5]);
        let full = PartitionAlgebra::discrete(2).unwrap();
        let same = conditional_expectation(&m(&[0.3, 0.7]), &xi, &full, ZeroBlockPolicy::Error);
        assert_eq!(same.unwrap(), xi);
    }

    #[test]
    fn zero_mass_block_policies() {
        let xi = rv(&[1.0, 2.0, 4.0]);
        let c = PartitionAlgebra::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let p = m(&[0.5, 0.5, 0.0]);
        assert_eq!(
            conditional_expectation(&p, &xi, &c, ZeroBlockPolicy::Error),
            Err(MmseError::ZeroMassBlock { block: 1 })
        );
        let filled =
            conditional_expectation(&p, &xi, &c, ZeroBlockPolicy::FillWithUnconditional).unwrap();
        assert_eq!(filled.values(), &[1.5, 1.5, 1.5]);
    }

    #[test]
    fn mix_examples() {
        let ms = example_set();
        let half = mix(&ms, &MixtureWeights::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(half.weights(), &[0.5, 0.5]);
        for k in 0..2 {
            let v = mix(&ms, &MixtureWeights::vertex(2, k).unwrap()).unwrap();
            assert_eq!(&v, ms.generator(k));
        }
        let rep = MeasureSet::from_rows(vec![vec![0.2, 0.8]; 3]).unwrap();
        let first = mix(&rep, &MixtureWeights::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(&first, rep.generator(0));
        assert_eq!(rep.duplicate_generators().len(), 3);
        assert!(MixtureWeights::new(vec![0.6, 0.6]).is_err());
        assert!(mix(&ms, &MixtureWeights::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn reference_measure_examples() {
        assert_eq!(reference_measure(&example_set()).weights(), &[0.5, 0.5]);
        let single = MeasureSet::from_rows(vec![vec![0.2, 0.8]]).unwrap();
        assert_eq!(reference_measure(&single).weights(), &[0.2, 0.8]);
        let corners = MeasureSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(reference_measure(&corners).weights(), &[0.5, 0.5]);
    }

    #[test]
    fn properness_examples() {
        assert!(is_proper(&example_set()));
        let corners = MeasureSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!is_proper(&corners));
        assert!(is_proper(
            &MeasureSet::from_rows(vec![vec![0.2, 0.8]]).unwrap()
        ));
        // A point no generator charges does not break properness.
        let shared_null =
            MeasureSet::from_rows(vec![vec![0.5, 0.5, 0.0], vec![0.1, 0.9, 0.0]]).unwrap();
        assert!(is_proper(&shared_null));
    }

    #[test]
    fn density_examples() {
        let p0 = m(&[0.5, 0.5]);
        assert_eq!(density(&p0, &p0).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(
            density(&m(&[0.25, 0.75]), &p0).unwrap().values(),
            &[0.5, 1.5]
        );
        assert_eq!(density(&m(&[0.0, 1.0]), &p0).unwrap().values(), &[0.0, 2.0]);
        assert_eq!(
            density(&m(&[0.5, 0.5]), &m(&[1.0, 0.0])),
            Err(MmseError::AbsoluteContinuity { index: 1 })
        );
        assert_eq!(
            density(&m(&[1.0, 0.0]), &m(&[1.0, 0.0])).unwrap().values(),
            &[1.0, 0.0]
        );
    }

    #[test]
    fn measure_validation() {
        assert!(Measure::new(vec![0.3, 0.6]).is_err());
        assert!(Measure::new(vec![-0.1, 1.1]).is_err());
        let third = 1.0 / 3.0;
        let p = Measure::new(vec![third, third, third]).unwrap();
        assert_abs_diff_eq!(p.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
