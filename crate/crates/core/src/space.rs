//! Finite sample spaces, bounded random variables, partitions and filtrations.
//!
//! On a finite sample space every sub-sigma-algebra is generated by a unique
//! partition of the sample points, so conditioning information is carried as a
//! [`PartitionAlgebra`]. A variable is measurable with respect to a partition
//! exactly when it is constant on every block.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MmseError, Result};

/// Named sample points of a finite space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpace {
    labels: Vec<String>,
}

impl SampleSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(MmseError::InvalidArgument(
                "sample space needs at least one point".into(),
            ));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(MmseError::InvalidArgument(format!(
                    "duplicate sample point label {l:?}"
                )));
            }
        }
        Ok(Self { labels })
    }

    /// Points labelled `w1..wn`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("w{i}")).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A bounded real random variable: one finite value per sample point.
///
/// The bound is always the tight one, `max |value|`. Serializes as the bare
/// array of values.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    values: Vec<f64>,
    bound: f64,
}

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MmseError::InvalidArgument(
                "random variable needs at least one value".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MmseError::InvalidArgument(format!(
                "value at index {i} is not finite"
            )));
        }
        let bound = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(Self { values, bound })
    }

    /// Accepts a caller-supplied bound, which must dominate every value. The
    /// stored bound is tightened to `max |value|`.
    pub fn with_bound(values: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(MmseError::InvalidArgument(format!(
                "bound must be nonnegative, got {bound}"
            )));
        }
        let rv = Self::new(values)?;
        if rv.bound > bound {
            return Err(MmseError::InvalidArgument(format!(
                "values exceed the declared bound {bound} (max |value| = {})",
                rv.bound
            )));
        }
        Ok(rv)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    pub fn shift(&self, c: f64) -> Result<Self> {
        self.map(|v| v + c)
    }

    pub fn abs(&self) -> Result<Self> {
        self.map(f64::abs)
    }

    /// `|x|^p` pointwise; `p == 2` avoids `powf`.
    pub fn abs_pow(&self, p: f64) -> Result<Self> {
        if p == 2.0 {
            self.map(|v| v * v)
        } else {
            self.map(|v| v.abs().powf(p))
        }
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Self) -> Result<bool> {
        check_len(self.len(), other.len())?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a <= b))
    }
}

impl Serialize for RandomVariable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RandomVariable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        RandomVariable::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Clamps every value into `[-m, m]`.
pub fn truncate(x: &RandomVariable, m: f64) -> Result<RandomVariable> {
    if !(m >= 0.0) {
        return Err(MmseError::InvalidArgument(format!(
            "truncation level must be nonnegative, got {m}"
        )));
    }
    x.map(|v| v.clamp(-m, m))
}

/// A partition of `{0..n-1}` into disjoint nonempty blocks.
///
/// Blocks are stored canonically: indices sorted within a block, blocks sorted
/// by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PartitionAlgebra {
    n: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl PartitionAlgebra {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(MmseError::InvalidPartition("empty sample space".into()));
        }
        let mut blocks = blocks;
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(MmseError::InvalidPartition(format!("block {b} is empty")));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= n {
                    return Err(MmseError::InvalidPartition(format!(
                        "index {i} out of range for {n} sample points"
                    )));
                }
                if owner[i] != usize::MAX {
                    return Err(MmseError::InvalidPartition(format!(
                        "index {i} appears in more than one block"
                    )));
                }
                owner[i] = b;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(MmseError::InvalidPartition(format!(
                "index {i} is not covered by any block"
            )));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut block_of = vec![0; n];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        Ok(Self {
            n,
            blocks,
            block_of,
        })
    }

    /// The single-block algebra `{∅, Ω}`.
    pub fn trivial(n: usize) -> Result<Self> {
        Self::new(n, vec![(0..n).collect()])
    }

    /// Singleton blocks: full information.
    pub fn discrete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
    }

    /// Partition induced by a labelling of the sample points; points sharing a
    /// label share a block.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        Self::new(labels.len(), groups.into_values().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Index of the block containing sample point `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn block_index(&self) -> &[usize] {
        &self.block_of
    }

    /// True iff every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Self) -> Result<bool> {
        check_len(coarser.n, self.n)?;
        Ok(self.blocks.iter().all(|b| {
            let owner = coarser.block_of[b[0]];
            b.iter().all(|&i| coarser.block_of[i] == owner)
        }))
    }

    /// Writes one value per block back onto the sample points.
    pub fn broadcast(&self, block_values: &[f64]) -> Result<RandomVariable> {
        check_len(self.num_blocks(), block_values.len())?;
        RandomVariable::new(self.block_of.iter().map(|&b| block_values[b]).collect())
    }

    /// Per-block value of a measurable variable.
    pub fn block_values(&self, x: &RandomVariable) -> Result<Vec<f64>> {
        if !is_measurable(x, self)? {
            return Err(MmseError::NotMeasurable);
        }
        Ok(self.blocks.iter().map(|b| x.values()[b[0]]).collect())
    }

    /// Unweighted blockwise average of `x`, written identically at every
    /// member of each block.
    pub fn average(&self, x: &RandomVariable) -> Result<RandomVariable> {
        check_len(self.n, x.len())?;
        let means: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| x.values()[i]).sum::<f64>() / b.len() as f64)
            .collect();
        self.broadcast(&means)
    }
}

/// True iff `x` is constant on every block of `c` (exact comparison).
pub fn is_measurable(x: &RandomVariable, c: &PartitionAlgebra) -> Result<bool> {
    check_len(c.n(), x.len())?;
    let v = x.values();
    Ok(c.blocks()
        .iter()
        .all(|b| b.iter().all(|&i| v[i] == v[b[0]])))
}

/// True iff every level refines its predecessor.
pub fn refine_check(levels: &[PartitionAlgebra]) -> Result<bool> {
    if let Some(first) = levels.first() {
        for l in levels {
            check_len(first.n(), l.n())?;
        }
    }
    for pair in levels.windows(2) {
        if !pair[1].refines(&pair[0])? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// An increasing sequence of partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Filtration {
    levels: Vec<PartitionAlgebra>,
}

impl Filtration {
    pub fn new(levels: Vec<PartitionAlgebra>) -> Result<Self> {
        if levels.is_empty() {
            return Err(MmseError::InvalidPartition(
                "filtration needs at least one level".into(),
            ));
        }
        if !refine_check(&levels)? {
            return Err(MmseError::InvalidPartition(
                "filtration levels are not nested".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// `trivial ⊂ c ⊂ discrete`, with duplicates dropped.
    pub fn around(c: &PartitionAlgebra) -> Result<Self> {
        let n = c.n();
        let mut levels = vec![PartitionAlgebra::trivial(n)?];
        for p in [c.clone(), PartitionAlgebra::discrete(n)?] {
            if levels.last() != Some(&p) {
                levels.push(p);
            }
        }
        Self::new(levels)
    }

    pub fn levels(&self) -> &[PartitionAlgebra] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Result<&PartitionAlgebra> {
        self.levels.get(k).ok_or_else(|| {
            MmseError::InvalidArgument(format!(
                "level {k} out of range (filtration has {} levels)",
                self.levels.len()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn n(&self) -> usize {
        self.levels[0].n()
    }
}
