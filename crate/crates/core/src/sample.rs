//! Seeded random instances for the sampled test suites.

use crate::error::Result;
use crate::measures::MeasureSet;
use crate::rng::SeededRng;
use crate::space::{PartitionAlgebra, RandomVariable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub min_points: usize,
    pub max_points: usize,
    pub max_blocks: usize,
    pub min_generators: usize,
    pub max_generators: usize,
    /// Half-width of the range of `ξ`.
    pub scale: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            min_points: 2,
            max_points: 6,
            max_blocks: 3,
            min_generators: 1,
            max_generators: 5,
            scale: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub ms: MeasureSet,
    pub xi: RandomVariable,
    pub c: PartitionAlgebra,
}

/// Strictly positive generators, `ξ` uniform on `[-scale, scale]`, and a
/// random partition with at most `max_blocks` blocks.
pub fn random_instance(rng: &mut SeededRng, shape: &InstanceShape) -> Result<Instance> {
    let n = rng.range(shape.min_points as i64, shape.max_points as i64) as usize;
    let blocks = rng.range(1, shape.max_blocks.min(n) as i64) as usize;
    let c = PartitionAlgebra::from_labels(&rng.labels(n, blocks))?;
    let k = rng.range(shape.min_generators as i64, shape.max_generators as i64) as usize;
    let ms = MeasureSet::from_rows((0..k).map(|_| rng.simplex(n)).collect())?;
    let xi = RandomVariable::new(
        (0..n)
            .map(|_| rng.uniform(-shape.scale, shape.scale))
            .collect(),
    )?;
    Ok(Instance { ms, xi, c })
}

/// `count` instances drawn from one stream.
pub fn random_instances(seed: u64, count: usize, shape: &InstanceShape) -> Result<Vec<Instance>> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| random_instance(&mut rng, shape))
        .collect()
}
