//! Versioned JSON reports.

use poisson_stab::catalog::EntryOutcome;
use poisson_stab::dynamics::ProbeReport;
use poisson_stab::leafspace::{PieceKind, T2Source};
use poisson_stab::stability::{Analysis, EquilibriumCheck, StabilityVerdict};
use poisson_stab::{GeneratorClassification, T2Description};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub system: String,
    pub equilibrium: Vec<f64>,
    pub verdict: StabilityVerdict,
    pub equilibrium_check: Option<EquilibriumJson>,
    pub classification: Option<ClassificationJson>,
    pub t2: Option<T2Json>,
    /// Eigenvalues of the linearization as `[re, im]`.
    pub spectrum: Vec<[f64; 2]>,
    /// Every criterion that was run, in order.
    pub steps: Vec<StabilityVerdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumJson {
    pub residual: f64,
    pub scale: f64,
    pub generator: Vec<f64>,
    pub is_equilibrium: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationJson {
    pub tame: bool,
    pub very_tame: bool,
    pub pairing: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T2Json {
    pub source: T2Source,
    pub dim: usize,
    pub leaf_dim: usize,
    pub contained_exactly: bool,
    pub pieces: Vec<PieceJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceJson {
    pub kind: PieceKind,
    pub note: String,
    pub offset: Vec<f64>,
    /// Orthonormal basis vectors.
    pub tangent: Vec<Vec<f64>>,
}

impl From<&EquilibriumCheck> for EquilibriumJson {
    fn from(e: &EquilibriumCheck) -> Self {
        Self {
            residual: e.residual,
            scale: e.scale,
            generator: e.generator.iter().copied().collect(),
            is_equilibrium: e.is_equilibrium,
        }
    }
}

impl From<&GeneratorClassification> for ClassificationJson {
    fn from(c: &GeneratorClassification) -> Self {
        Self {
            tame: c.tame,
            very_tame: c.very_tame,
            pairing: c.pairing,
            witness: c.witness.as_ref().map(|w| w.iter().copied().collect()),
        }
    }
}

impl From<&T2Description> for T2Json {
    fn from(t: &T2Description) -> Self {
        Self {
            source: t.source,
            dim: t.dim(),
            leaf_dim: t.leaf_tangent.ncols(),
            contained_exactly: t.contained_exactly,
            pieces: t
                .pieces
                .iter()
                .map(|p| PieceJson {
                    kind: p.kind,
                    note: p.note.clone(),
                    offset: p.offset.iter().copied().collect(),
                    tangent: p.tangent.column_iter().map(|c| c.iter().copied().collect()).collect(),
                })
                .collect(),
        }
    }
}

impl Report {
    pub fn new(system: &str, equilibrium: &[f64], verdict: StabilityVerdict) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: system.to_string(),
            equilibrium: equilibrium.to_vec(),
            verdict,
            equilibrium_check: None,
            classification: None,
            t2: None,
            spectrum: Vec::new(),
            steps: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn from_analysis(system: &str, equilibrium: &[f64], a: &Analysis) -> Self {
        let mut r = Self::new(system, equilibrium, a.verdict.clone());
        r.equilibrium_check = Some((&a.equilibrium).into());
        r.classification = a.classification.as_ref().map(Into::into);
        r.t2 = a.t2.as_ref().map(Into::into);
        r.spectrum = a.spectrum.iter().map(|&(re, im)| [re, im]).collect();
        r.steps = a.steps.clone();
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeJson {
    pub schema_version: u32,
    pub system: String,
    #[serde(flatten)]
    pub report: ProbeReport,
}

impl ProbeJson {
    pub fn new(system: &str, report: ProbeReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: system.to_string(),
            report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe reports serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckJson {
    pub schema_version: u32,
    pub seed: u64,
    pub entries: Vec<EntryOutcome>,
}
