//! Instance files: parsing, validation with field paths, canonical form and
//! content digest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mmse_core::gexp::TreeModel;
use mmse_core::measures::{MeasureSet, SIMPLEX_TOL};
use mmse_core::space::{Filtration, PartitionAlgebra, RandomVariable, SampleSpace};

use crate::error::CliError;
use crate::num::{nums, values, Num};

pub const INSTANCE_VERSION: &str = "mmse-instance/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeStanza {
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_lo: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_hi: Option<Num>,
    pub leaves: Vec<Num>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<Num>,
    /// Conditioning level within a filtration or tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

impl Options {
    fn is_empty(&self) -> bool {
        self == &Options::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtration: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeStanza>,
    #[serde(default, skip_serializing_if = "Options::is_empty")]
    pub options: Options,
    /// Estimator sequences recorded with a time-consistency counterexample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<serde_json::Value>,
}

/// Conditioning structure of a validated instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Partition(PartitionAlgebra),
    Filtration(Filtration),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Flat {
        omega: SampleSpace,
        ms: MeasureSet,
        xi: RandomVariable,
        structure: Structure,
    },
    Tree {
        tm: TreeModel,
        leaves: Vec<f64>,
    },
}

fn invalid(path: impl std::fmt::Display, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Validation(format!(
                "{}: {} (line {}, column {})",
                if path == "." { "instance".into() } else { path },
                inner,
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn from_model(model: &Model, options: Options) -> Self {
        let mut file = InstanceFile {
            version: INSTANCE_VERSION.into(),
            omega: None,
            generators: None,
            xi: None,
            partition: None,
            filtration: None,
            tree: None,
            options,
            chains: None,
        };
        match model {
            Model::Flat {
                omega,
                ms,
                xi,
                structure,
            } => {
                file.omega = Some(omega.labels().to_vec());
                file.generators = Some(ms.generators().iter().map(|g| nums(g.weights())).collect());
                file.xi = Some(nums(xi.values()));
                match structure {
                    Structure::Partition(p) => file.partition = Some(p.blocks().to_vec()),
                    Structure::Filtration(f) => {
                        file.filtration =
                            Some(f.levels().iter().map(|p| p.blocks().to_vec()).collect())
                    }
                }
            }
            Model::Tree { tm, leaves } => {
                file.tree = Some(TreeStanza {
                    depth: tm.depth,
                    dt: Some(Num(tm.dt)),
                    q_lo: Some(Num(tm.q_lo)),
                    q_hi: Some(Num(tm.q_hi)),
                    leaves: nums(leaves),
                })
            }
        }
        file
    }

    /// Checks every invariant and builds the library objects.
    pub fn validate(&self) -> Result<Model, CliError> {
        if self.version != INSTANCE_VERSION {
            return Err(invalid(
                "version",
                format!("expected {INSTANCE_VERSION:?}, got {:?}", self.version),
            ));
        }
        let present = [
            self.partition.is_some(),
            self.filtration.is_some(),
            self.tree.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if present != 1 {
            return Err(invalid(
                "instance",
                format!("exactly one of partition, filtration, tree is required, found {present}"),
            ));
        }
        if let Some(t) = &self.options.tol {
            if !(t.get() > 0.0) {
                return Err(invalid("options.tol", "must be positive"));
            }
        }
        if let Some(g) = &self.options.grid_step {
            if !(g.get() > 0.0) {
                return Err(invalid("options.grid_step", "must be positive"));
            }
        }
        match &self.tree {
            Some(tree) => self.validate_tree(tree),
            None => self.validate_flat(),
        }
    }

    fn validate_tree(&self, tree: &TreeStanza) -> Result<Model, CliError> {
        for (field, present) in [
            ("omega", self.omega.is_some()),
            ("generators", self.generators.is_some()),
            ("xi", self.xi.is_some()),
        ] {
            if present {
                return Err(invalid(
                    field,
                    "not allowed with a tree (the tree defines it)",
                ));
            }
        }
        let dt = tree.dt.map_or(mmse_core::gexp::DEFAULT_DT, Num::get);
        let tm = match (tree.q_lo, tree.q_hi) {
            (None, None) => TreeModel::girsanov(tree.depth, dt),
            (Some(lo), Some(hi)) => TreeModel::new(tree.depth, lo.get(), hi.get(), dt),
            _ => return Err(invalid("tree", "q_lo and q_hi must be given together")),
        }
        .map_err(|e| invalid("tree", e))?;
        let expected = 1usize.checked_shl(tree.depth as u32).unwrap_or(usize::MAX);
        if tree.leaves.len() != expected {
            return Err(invalid(
                "tree.leaves",
                format!(
                    "length {}, expected 2^depth = {expected}",
                    tree.leaves.len()
                ),
            ));
        }
        Ok(Model::Tree {
            tm,
            leaves: values(&tree.leaves),
        })
    }

    fn validate_flat(&self) -> Result<Model, CliError> {
        let xi = self.xi.as_ref().ok_or_else(|| invalid("xi", "missing"))?;
        let n = xi.len();
        if n == 0 {
            return Err(invalid("xi", "empty"));
        }
        let omega = match &self.omega {
            Some(labels) => {
                if labels.len() != n {
                    return Err(invalid(
                        "omega",
                        format!("length {}, expected {n} (length of xi)", labels.len()),
                    ));
                }
                SampleSpace::new(labels.clone()).map_err(|e| invalid("omega", e))?
            }
            None => SampleSpace::numbered(n).map_err(|e| invalid("omega", e))?,
        };
        let rows = self
            .generators
            .as_ref()
            .ok_or_else(|| invalid("generators", "missing"))?;
        if rows.is_empty() {
            return Err(invalid("generators", "at least one generator is required"));
        }
        for (k, row) in rows.iter().enumerate() {
            let path = format!("generators[{k}]");
            if row.len() != n {
                return Err(invalid(path, format!("length {}, expected {n}", row.len())));
            }
            if let Some(i) = row.iter().position(|v| v.get() < 0.0) {
                return Err(invalid(
                    format!("{path}[{i}]"),
                    format!("negative ({})", row[i].get()),
                ));
            }
            let total: f64 = row.iter().map(|v| v.get()).sum();
            if (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(invalid(path, format!("sums to {total}, expected 1")));
            }
        }
        let ms = MeasureSet::from_rows(rows.iter().map(|r| values(r)).collect())
            .map_err(|e| invalid("generators", e))?;
        let xi = RandomVariable::new(values(xi)).map_err(|e| invalid("xi", e))?;
        let structure = if let Some(blocks) = &self.partition {
            Structure::Partition(
                PartitionAlgebra::new(n, blocks.clone()).map_err(|e| invalid("partition", e))?,
            )
        } else {
            let levels = self.filtration.as_ref().expect("checked above");
            let parts = levels
                .iter()
                .enumerate()
                .map(|(k, blocks)| {
                    PartitionAlgebra::new(n, blocks.clone())
                        .map_err(|e| invalid(format!("filtration[{k}]"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Structure::Filtration(Filtration::new(parts).map_err(|e| invalid("filtration", e))?)
        };
        Ok(Model::Flat {
            omega,
            ms,
            xi,
            structure,
        })
    }

    /// Same content with numbers as decimal strings and partition blocks in
    /// canonical order.
    pub fn canonical(&self) -> Result<Self, CliError> {
        let model = self.validate()?;
        let mut file = self.clone();
        if let Model::Flat { structure, .. } = &model {
            match structure {
                Structure::Partition(p) => file.partition = Some(p.blocks().to_vec()),
                Structure::Filtration(f) => {
                    file.filtration = Some(f.levels().iter().map(|p| p.blocks().to_vec()).collect())
                }
            }
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// `sha256:` followed by the hex digest of the compact canonical JSON.
    pub fn digest(&self) -> Result<String, CliError> {
        let bytes = serde_json::to_vec(&self.canonical()?).expect("instance serializes");
        Ok(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
    }
}
