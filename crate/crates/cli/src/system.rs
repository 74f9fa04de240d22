//! JSON system files.

use std::collections::BTreeMap;

use poisson_stab::algebra::LieAlgebra;
use poisson_stab::catalog::{CatalogEntry, PoissonTemplate};
use poisson_stab::leafspace::T2Override;
use poisson_stab::stability::EuclideanGroup;
use poisson_stab::{Expression, HamiltonianSystem, Params, PoissonStructure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, ErrorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub dim: usize,
    pub poisson: PoissonSpec,
    pub hamiltonian: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Casimirs in addition to those known for the structure.
    #[serde(default)]
    pub casimirs: Vec<String>,
    pub equilibrium: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_override: Option<T2OverrideSpec>,
    /// Lie algebra whose dual carries the equilibrium as a momentum value.
    /// `se2` and `se3` switch the verdict to the relative-equilibrium
    /// criteria of the Euclidean groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoissonSpec {
    LiePoisson {
        algebra: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    R3Casimir {
        casimir: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    StructureMatrix {
        /// Rows of `Π_ij`.
        entries: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T2OverrideSpec {
    pub pieces: Vec<T2PieceSpec>,
    #[serde(default)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T2PieceSpec {
    pub offset: Vec<f64>,
    /// Spanning vectors of the piece.
    pub tangent: Vec<Vec<f64>>,
}

/// A validated system file turned into library objects.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub name: String,
    pub system: HamiltonianSystem,
    pub equilibrium: Vec<f64>,
    pub t2_override: Option<T2Override>,
    pub euclidean: Option<EuclideanGroup>,
    pub algebra: Option<LieAlgebra>,
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
        Self::from_json(&text).map_err(|mut e| {
            e.path = Some(path.to_string());
            e
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files serialize")
    }

    fn parse(&self, text: &str, dim: usize) -> Result<Expression, CliError> {
        Expression::parse(text, dim, &self.parameters)
            .map_err(|e| CliError::new(ErrorKind::Expression, format!("in `{text}`: {e}")))
    }

    pub fn load(&self) -> Result<LoadedSystem, CliError> {
        let n = self.dim;
        if n == 0 {
            return Err(CliError::validation("dim must be positive"));
        }
        let structure = match &self.poisson {
            PoissonSpec::LiePoisson { algebra, tag } => {
                let alg = LieAlgebra::by_name(algebra).map_err(|e| CliError::validation(e.to_string()))?;
                with_tag(PoissonStructure::lie_poisson(alg), tag)
            }
            PoissonSpec::R3Casimir { casimir, tag } => {
                if n != 3 {
                    return Err(CliError::validation(format!("r3_casimir needs dim 3, file says {n}")));
                }
                with_tag(PoissonStructure::r3_casimir(self.parse(casimir, 3)?)?, tag)
            }
            PoissonSpec::StructureMatrix { entries, tag } => {
                if entries.len() != n || entries.iter().any(|r| r.len() != n) {
                    return Err(CliError::validation(format!("structure matrix must be {n} x {n}")));
                }
                let es = entries
                    .iter()
                    .flatten()
                    .map(|s| self.parse(s, n))
                    .collect::<Result<Vec<_>, _>>()?;
                with_tag(PoissonStructure::structure_matrix(n, es)?, tag)
            }
        };
        if structure.dim != n {
            return Err(CliError::validation(format!(
                "dim is {n} but the Poisson structure has dimension {}",
                structure.dim
            )));
        }
        if self.equilibrium.len() != n {
            return Err(CliError::validation(format!(
                "equilibrium has {} entries, expected {n}",
                self.equilibrium.len()
            )));
        }
        let structure = if self.casimirs.is_empty() {
            structure
        } else {
            let mut cs = structure.casimirs.clone();
            for c in &self.casimirs {
                cs.push(self.parse(c, n)?);
            }
            structure.with_casimirs(cs)
        };
        let h = self.parse(&self.hamiltonian, n)?;
        let system = HamiltonianSystem::new(structure, h)?;
        let t2_override = self.t2_override.as_ref().map(|o| T2Override {
            pieces: o.pieces.iter().map(|p| (p.offset.clone(), p.tangent.clone())).collect(),
            exact: o.exact,
        });
        let algebra = match &self.algebra {
            Some(a) => Some(LieAlgebra::by_name(a).map_err(|e| CliError::validation(e.to_string()))?),
            None => None,
        };
        if let Some(a) = &algebra {
            if a.dim() != n {
                return Err(CliError::validation(format!("algebra `{}` has dimension {}, system has {n}", a.name(), a.dim())));
            }
        }
        let euclidean = match self.algebra.as_deref() {
            Some("se2") => Some(EuclideanGroup::SE2),
            Some("se3") => Some(EuclideanGroup::SE3),
            _ => None,
        };
        Ok(LoadedSystem {
            name: self.name.clone(),
            system,
            equilibrium: self.equilibrium.clone(),
            t2_override,
            euclidean,
            algebra,
        })
    }

    /// System file of a catalogue entry at its defaults overridden by `overrides`.
    pub fn from_catalog(entry: &CatalogEntry, overrides: &Params) -> Result<Self, CliError> {
        let t = entry.template()?;
        let tag = t.tag.map(str::to_string);
        let dim = t.dim();
        let poisson = match &t.poisson {
            PoissonTemplate::LiePoisson(a) => PoissonSpec::LiePoisson {
                algebra: a.to_string(),
                tag,
            },
            PoissonTemplate::R3Casimir(a) => PoissonSpec::R3Casimir {
                casimir: a.to_string(),
                tag,
            },
            PoissonTemplate::StructureMatrix { dim, entries } => PoissonSpec::StructureMatrix {
                entries: entries.chunks(*dim).map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
                tag,
            },
        };
        let algebra = t.euclidean.map(|g| match g {
            EuclideanGroup::SE2 => "se2".to_string(),
            EuclideanGroup::SE3 => "se3".to_string(),
        });
        Ok(Self {
            name: entry.name.to_string(),
            dim,
            poisson,
            hamiltonian: t.hamiltonian.to_string(),
            parameters: t.merged(overrides),
            casimirs: t.extra_casimirs.iter().map(|s| s.to_string()).collect(),
            equilibrium: t.equilibrium.to_vec(),
            t2_override: None,
            algebra,
        })
    }
}

fn with_tag(s: PoissonStructure, tag: &Option<String>) -> PoissonStructure {
    match tag {
        Some(t) => s.with_tag(t),
        None => s,
    }
}
