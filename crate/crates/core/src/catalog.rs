//! Builtin example systems with expected verdicts over parameter grids.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::algebra::LieAlgebra;
use crate::dynamics::{self, ProbeOptions};
use crate::expr::{Expression, Params};
use crate::poisson::{HamiltonianSystem, PoissonStructure};
use crate::stability::{self, AnalysisOptions, EuclideanGroup, StabilityVerdict, VerdictValue, Witness};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("no catalogue entry `{name}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    NotFound { name: String, suggestion: Option<String> },
    #[error("entry `{0}` is documentation only")]
    Unrunnable(String),
    #[error("entry `{name}` failed to build: {reason}")]
    Build { name: String, reason: String },
}

/// How the Poisson structure of an entry is given.
#[derive(Debug, Clone, PartialEq)]
pub enum PoissonTemplate {
    LiePoisson(&'static str),
    R3Casimir(&'static str),
    StructureMatrix { dim: usize, entries: &'static [&'static str] },
}

/// Verdict expected at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Stable,
    /// Anything but `Stable`.
    NotStable,
    Exactly(VerdictValue),
    /// Boundary point: no verdict is asserted.
    Unconstrained,
}

impl Expected {
    pub fn accepts(self, v: VerdictValue) -> bool {
        match self {
            Self::Stable => v == VerdictValue::Stable,
            Self::NotStable => v != VerdictValue::Stable,
            Self::Exactly(e) => v == e,
            Self::Unconstrained => true,
        }
    }

    pub fn describe(self) -> String {
        match self {
            Self::Stable => "Stable".to_string(),
            Self::NotStable => "not Stable".to_string(),
            Self::Exactly(v) => format!("{v:?}"),
            Self::Unconstrained => "any".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsExpectation {
    /// Every trial stays in the ball.
    Confined,
    /// Every trial leaves the ball.
    Escapes,
}

#[derive(Debug, Clone)]
pub struct ProbeDefaults {
    pub radius: f64,
    pub delta: f64,
    pub trials: usize,
    pub t_final: f64,
    pub directions: Option<Vec<Vec<f64>>>,
    pub expect: fn(&Params) -> Option<DynamicsExpectation>,
}

impl ProbeDefaults {
    pub fn options(&self, seed: u64) -> ProbeOptions {
        let mut o = ProbeOptions::new(self.radius, vec![self.delta], self.trials, self.t_final, seed);
        o.directions = self.directions.clone();
        o
    }
}

#[derive(Debug, Clone)]
pub struct Template {
    pub poisson: PoissonTemplate,
    pub tag: Option<&'static str>,
    pub hamiltonian: &'static str,
    /// Casimirs beyond those the structure constructor attaches.
    pub extra_casimirs: &'static [&'static str],
    pub defaults: &'static [(&'static str, f64)],
    pub equilibrium: &'static [f64],
    pub grid: fn() -> Vec<Params>,
    pub expected: fn(&Params) -> Expected,
    /// Judge with the Euclidean relative-equilibrium criteria instead of the
    /// Poisson pipeline.
    pub euclidean: Option<EuclideanGroup>,
    /// The reduced energy-momentum test must report a wild generator.
    pub require_wild_reduced: bool,
    /// The single-piece energy-Casimir run must not return `Stable`.
    pub single_piece_fails: bool,
    pub probe: Option<ProbeDefaults>,
}

#[derive(Debug, Clone)]
pub enum EntryKind {
    Runnable(Box<Template>),
    DocumentationOnly { reason: &'static str },
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub title: &'static str,
    /// Sentence from the source text stating the expected behaviour.
    pub quote: &'static str,
    pub kind: EntryKind,
}

pub fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Template {
    pub fn default_params(&self) -> Params {
        params(self.defaults)
    }

    /// Defaults overridden by `overrides`.
    pub fn merged(&self, overrides: &Params) -> Params {
        let mut p = self.default_params();
        for (k, v) in overrides {
            p.insert(k.clone(), *v);
        }
        p
    }

    pub fn dim(&self) -> usize {
        match &self.poisson {
            PoissonTemplate::LiePoisson(name) => LieAlgebra::by_name(name).map(|a| a.dim()).unwrap_or(0),
            PoissonTemplate::R3Casimir(_) => 3,
            PoissonTemplate::StructureMatrix { dim, .. } => *dim,
        }
    }

    pub fn build(&self, p: &Params) -> Result<HamiltonianSystem, String> {
        let p = self.merged(p);
        let err = |e: &dyn core::fmt::Display| e.to_string();
        let structure = match &self.poisson {
            PoissonTemplate::LiePoisson(name) => PoissonStructure::lie_poisson(LieAlgebra::by_name(name).map_err(|e| err(&e))?),
            PoissonTemplate::R3Casimir(a) => {
                PoissonStructure::r3_casimir(Expression::parse(a, 3, &p).map_err(|e| err(&e))?).map_err(|e| err(&e))?
            }
            PoissonTemplate::StructureMatrix { dim, entries } => {
                let es = entries
                    .iter()
                    .map(|s| Expression::parse(s, *dim, &p))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| err(&e))?;
                PoissonStructure::structure_matrix(*dim, es).map_err(|e| err(&e))?
            }
        };
        let dim = structure.dim;
        let mut structure = match self.tag {
            Some(t) => structure.with_tag(t),
            None => structure,
        };
        if !self.extra_casimirs.is_empty() {
            let mut cs = structure.casimirs.clone();
            for c in self.extra_casimirs {
                cs.push(Expression::parse(c, dim, &p).map_err(|e| err(&e))?);
            }
            structure = structure.with_casimirs(cs);
        }
        let h = Expression::parse(self.hamiltonian, dim, &p).map_err(|e| err(&e))?;
        HamiltonianSystem::new(structure, h).map_err(|e| err(&e))
    }
}

impl CatalogEntry {
    pub fn template(&self) -> Result<&Template, CatalogError> {
        match &self.kind {
            EntryKind::Runnable(t) => Ok(t),
            EntryKind::DocumentationOnly { .. } => Err(CatalogError::Unrunnable(self.name.to_string())),
        }
    }

    pub fn system(&self, p: &Params) -> Result<HamiltonianSystem, CatalogError> {
        self.template()?.build(p).map_err(|reason| CatalogError::Build {
            name: self.name.to_string(),
            reason,
        })
    }
}

fn grid1(name: &'static str, values: &[f64]) -> Vec<Params> {
    values.iter().map(|v| params(&[(name, *v)])).collect()
}

fn grid_product(names: &[&'static str], values: &[f64]) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for n in names {
        let mut next = Vec::new();
        for p in &out {
            for v in values {
                let mut q = p.clone();
                q.insert(n.to_string(), *v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn get(p: &Params, k: &str) -> f64 {
    p.get(k).copied().unwrap_or(0.0)
}

fn confined(_: &Params) -> Option<DynamicsExpectation> {
    Some(DynamicsExpectation::Confined)
}

const SE2PLUS_MATRIX: [&str; 25] = [
    "0", "0", "-y", "0", "0", //
    "0", "0", "x", "0", "0", //
    "y", "-x", "0", "0", "0", //
    "0", "0", "0", "0", "-1", //
    "0", "0", "0", "1", "0",
];

/// All entries in a fixed order.
pub fn entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "so3_origin",
            title: "so(3)* at the origin: every Hamiltonian",
            quote: "a stable equilibrium, for any Hamiltonian $h$",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("so3"),
                tag: None,
                hamiltonian: "a*x + b*y*z + x^2*z - z^2",
                extra_casimirs: &[],
                defaults: &[("a", 1.0), ("b", 1.0)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || grid_product(&["a", "b"], &[-1.0, 0.0, 2.0]),
                expected: |_| Expected::Stable,
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: Some(ProbeDefaults {
                    radius: 0.1,
                    delta: 0.01,
                    trials: 64,
                    t_final: 20.0,
                    directions: None,
                    expect: confined,
                }),
            })),
        },
        CatalogEntry {
            name: "so3_rigid_body",
            title: "free rigid body about the third axis",
            quote: "Every point $x_e \\neq 0$ is regular",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("so3"),
                tag: None,
                hamiltonian: "(x^2/i1 + y^2/i2 + z^2/i3)/2",
                extra_casimirs: &[],
                defaults: &[("i1", 1.0), ("i2", 2.0), ("i3", 3.0)],
                equilibrium: &[0.0, 0.0, 1.0],
                grid: || {
                    [[1.0, 2.0, 3.0], [2.0, 1.0, 3.0], [1.0, 3.0, 2.0], [3.0, 1.0, 2.0], [2.0, 3.0, 1.0], [3.0, 2.0, 1.0]]
                        .iter()
                        .map(|i| params(&[("i1", i[0]), ("i2", i[1]), ("i3", i[2])]))
                        .collect()
                },
                expected: |p| {
                    let (a, b, c) = (get(p, "i1"), get(p, "i2"), get(p, "i3"));
                    if (c > a && c > b) || (c < a && c < b) {
                        Expected::Stable
                    } else {
                        Expected::Exactly(VerdictValue::InstabilityEvidence)
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se2_axis",
            title: "se(2)* at a point of the z-axis",
            quote: "the point $x_e$ is stable if the restriction of\n$h$ to the $z$-axis is positive or negative definite",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se2"),
                tag: None,
                hamiltonian: "a*x + c*z + d*z^2 + (x^2 + y^2)/2",
                extra_casimirs: &[],
                defaults: &[("a", 0.0), ("c", 0.0), ("d", 1.0)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || {
                    let mut out = Vec::new();
                    for a in [0.0, 1.0] {
                        for c in [-1.0, 0.0, 1.0] {
                            for d in [-1.0, 0.0, 1.0] {
                                out.push(params(&[("a", a), ("c", c), ("d", d)]));
                            }
                        }
                    }
                    out
                },
                expected: |p| {
                    if get(p, "c") != 0.0 || get(p, "d") != 0.0 {
                        Expected::Stable
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se2n1",
            title: "one cylinder of the se(2)^n family at r = 0",
            quote: "The $T_2$-set corresponding to any equilibrium with all $r_i=0$ is the set\n$\\set{(r_i,\\theta^i,z_i)}{r_1=\\cdots=r_n=0}$",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se2"),
                tag: None,
                hamiltonian: "z^2/2 + (x^2 + 2*y^2)*(1 + z^2)/2",
                extra_casimirs: &[],
                defaults: &[("z0", 1.0)],
                equilibrium: &[0.0, 0.0, 1.0],
                grid: || vec![Params::new()],
                expected: |_| Expected::Stable,
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: Some(ProbeDefaults {
                    radius: 0.1,
                    delta: 0.01,
                    trials: 32,
                    t_final: 20.0,
                    directions: None,
                    expect: confined,
                }),
            })),
        },
        CatalogEntry {
            name: "sl2_linear",
            title: "sl(2)* at the origin, linear Hamiltonian",
            quote: "$0$ is stable if $dh(0)$ `points into\nthe cone $A = 0$'",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("sl2"),
                tag: None,
                hamiltonian: "k1*x + k2*y + k3*z",
                extra_casimirs: &[],
                defaults: &[("k1", 1.0), ("k2", 0.0), ("k3", 2.0)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || grid_product(&["k1", "k2", "k3"], &[-2.0, -1.0, 0.0, 1.0, 2.0]),
                expected: |p| {
                    let d = get(p, "k1").powi(2) + get(p, "k2").powi(2) - get(p, "k3").powi(2);
                    if d < 0.0 {
                        Expected::Stable
                    } else if d > 0.0 {
                        Expected::Exactly(VerdictValue::InstabilityEvidence)
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: Some(ProbeDefaults {
                    radius: 0.1,
                    delta: 0.01,
                    trials: 32,
                    t_final: 20.0,
                    directions: None,
                    expect: |p| {
                        let d = get(p, "k1").powi(2) + get(p, "k2").powi(2) - get(p, "k3").powi(2);
                        (d < 0.0).then_some(DynamicsExpectation::Confined)
                    },
                }),
            })),
        },
        CatalogEntry {
            name: "sl2_quadratic",
            title: "sl(2)* at the origin, quadratic Hamiltonian",
            quote: "the Hamiltonian $ax^2+by^2+cz^2$ has a stable\nequilibrium whenever $c > -a$ and $c > -b$",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("sl2"),
                tag: None,
                hamiltonian: "a*x^2 + b*y^2 + c*z^2",
                extra_casimirs: &[],
                defaults: &[("a", 1.0), ("b", 1.0), ("c", 0.0)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || grid_product(&["a", "b", "c"], &[-2.0, -1.0, 0.0, 1.0, 2.0]),
                expected: |p| {
                    let (a, b, c) = (get(p, "a"), get(p, "b"), get(p, "c"));
                    // h ↦ −h maps the second region onto the first.
                    if (c > -a && c > -b) || (c < -a && c < -b) {
                        Expected::Stable
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se2plus",
            title: "se(2)* x R^2: leafwise stable but unstable",
            quote: "is a solution which leaves any neighbourhood of $0$ for $t$\nsufficiently large",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::StructureMatrix {
                    dim: 5,
                    entries: &SE2PLUS_MATRIX,
                },
                tag: Some("se2plus"),
                hamiltonian: "a*z - q*y + (q^2 + p^2)/2",
                extra_casimirs: &["(x^2 + y^2)/2"],
                defaults: &[("a", 1.0)],
                equilibrium: &[0.0, 0.0, 0.0, 0.0, 0.0],
                grid: || grid1("a", &[1.0, 2.0, -1.0]),
                expected: |_| Expected::Exactly(VerdictValue::LeafwiseStable),
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: Some(ProbeDefaults {
                    radius: 0.1,
                    delta: 0.01,
                    trials: 4,
                    t_final: 100.0,
                    directions: Some(vec![vec![0.0, 1.0, 0.0, 0.0, 0.0], vec![0.0, -1.0, 0.0, 0.0, 0.0]]),
                    expect: |p| (get(p, "a") == 1.0).then_some(DynamicsExpectation::Escapes),
                }),
            })),
        },
        CatalogEntry {
            name: "twoplanes",
            title: "A = (x^2 - y^2)/2: two planes through the origin",
            quote: "if $a>b$ then taking $a>\\lambda>b$ gives stability",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::R3Casimir("(x^2 - y^2)/2"),
                tag: Some("twoplanes"),
                hamiltonian: "a*x^2 - b*y^2 + z^2",
                extra_casimirs: &[],
                defaults: &[("a", 2.0), ("b", 1.0)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || grid_product(&["a", "b"], &[-2.0, -1.0, 0.0, 1.0, 2.0]),
                expected: |p| {
                    if get(p, "a") > get(p, "b") {
                        Expected::Stable
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "threeplanes",
            title: "A = (a^2 x^2 - y^2) y: three planes through the origin",
            quote: "the standard\nEnergy-Casimir method can not be used to deduce stability",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::R3Casimir("(a^2*x^2 - y^2)*y"),
                tag: Some("threeplanes"),
                hamiltonian: "x^2 - y^2 + z^2",
                extra_casimirs: &[],
                defaults: &[("a", 0.5)],
                equilibrium: &[0.0, 0.0, 0.0],
                grid: || grid1("a", &[0.5, -0.5, 0.9, 1.0, 1.5, 2.0]),
                expected: |p| {
                    let a = get(p, "a").abs();
                    if a < 1.0 {
                        Expected::Stable
                    } else if a > 1.0 {
                        Expected::NotStable
                    } else {
                        Expected::Unconstrained
                    }
                },
                euclidean: None,
                require_wild_reduced: false,
                single_piece_fails: true,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "rsdr",
            title: "R semidirect R: wild relative equilibria",
            quote: "perturbations into $\\nu_2\\ne 0$ of such equilibria are carried far\nfrom their origin by translation parallel to the $\\nu_1$ axis",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("rsdr"),
                tag: None,
                hamiltonian: "y",
                extra_casimirs: &[],
                defaults: &[],
                equilibrium: &[0.0, 0.0],
                grid: || vec![Params::new()],
                expected: |_| Expected::Exactly(VerdictValue::LeafwiseStable),
                euclidean: None,
                require_wild_reduced: true,
                single_piece_fails: false,
                probe: Some(ProbeDefaults {
                    radius: 0.1,
                    delta: 0.01,
                    trials: 8,
                    t_final: 100.0,
                    directions: Some(vec![vec![0.0, 1.0], vec![0.0, -1.0]]),
                    expect: |_| Some(DynamicsExpectation::Escapes),
                }),
            })),
        },
        CatalogEntry {
            name: "se2_regular",
            title: "SE(2), regular momentum",
            quote: "If $\\mu_e^a\\ne 0$ then $\\mu_e$ is regular",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se2"),
                tag: None,
                hamiltonian: "(x^2 + k*y^2)/2 + z^2/2",
                extra_casimirs: &[],
                defaults: &[("k", 2.0)],
                equilibrium: &[1.0, 0.0, 0.0],
                grid: || grid1("k", &[0.5, 2.0, 3.0]),
                expected: |p| if get(p, "k") > 1.0 { Expected::Stable } else { Expected::NotStable },
                euclidean: Some(EuclideanGroup::SE2),
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se2_nonregular",
            title: "SE(2), zero translational momentum",
            quote: "$\\xi_e$ is tame if and only if $\\xi_e^r=0$",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se2"),
                tag: None,
                hamiltonian: "u*x + (x^2 + y^2)/2 + k*(z - 1)^2/2 + w*z",
                extra_casimirs: &[],
                defaults: &[("u", 1.0), ("k", 1.0), ("w", 0.0)],
                equilibrium: &[0.0, 0.0, 1.0],
                grid: || {
                    let mut out = Vec::new();
                    for u in [0.0, 1.0] {
                        for k in [-1.0, 0.0, 1.0] {
                            for w in [0.0, 1.0] {
                                out.push(params(&[("u", u), ("k", k), ("w", w)]));
                            }
                        }
                    }
                    out
                },
                expected: |p| {
                    if get(p, "w") != 0.0 {
                        Expected::Exactly(VerdictValue::Inconclusive)
                    } else if get(p, "k") != 0.0 {
                        Expected::Stable
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: Some(EuclideanGroup::SE2),
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se3_regular",
            title: "SE(3), regular momentum",
            quote: "If $\\mu_e^a\\ne 0$ then $\\mu_e$ is regular",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se3"),
                tag: None,
                hamiltonian: "(x1^2 + x2^2 + x3^2)/2 + (x4^2 + x5^2 + k*x6^2)/2",
                extra_casimirs: &[],
                defaults: &[("k", 0.5)],
                equilibrium: &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                grid: || grid1("k", &[0.0, 0.5, 2.0]),
                expected: |p| if get(p, "k") < 1.0 { Expected::Stable } else { Expected::NotStable },
                euclidean: Some(EuclideanGroup::SE3),
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "se3_nonregular",
            title: "SE(3), zero translational and nonzero rotational momentum",
            quote: "$\\xi_e$ is tame if and only if $\\xi_e^r=0$",
            kind: EntryKind::Runnable(Box::new(Template {
                poisson: PoissonTemplate::LiePoisson("se3"),
                tag: None,
                hamiltonian: "(x4^2 + x5^2 + x6^2)/2 + u*x4 + k*(x1^2 + x2^2)/2 + (x3 - 1)^2/2 + w*x3",
                extra_casimirs: &[],
                defaults: &[("u", 1.0), ("k", 1.0), ("w", 0.0)],
                equilibrium: &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                grid: || {
                    let mut out = Vec::new();
                    for u in [0.0, 1.0] {
                        for k in [-1.0, 1.0, 2.0] {
                            for w in [0.0, 1.0] {
                                out.push(params(&[("u", u), ("k", k), ("w", w)]));
                            }
                        }
                    }
                    out
                },
                expected: |p| {
                    if get(p, "w") != 0.0 {
                        Expected::Exactly(VerdictValue::Inconclusive)
                    } else if get(p, "k") > 0.0 {
                        Expected::Stable
                    } else {
                        Expected::NotStable
                    }
                },
                euclidean: Some(EuclideanGroup::SE3),
                require_wild_reduced: false,
                single_piece_fails: false,
                probe: None,
            })),
        },
        CatalogEntry {
            name: "unnecessary",
            title: "leaves accumulating on themselves (torus quotient)",
            quote: "the use of $T_2^U(x_e)$ instead of the larger\nset $T_2(x_e)$ is necessary when the symplectic leaves accumulate upon\nthemselves",
            kind: EntryKind::DocumentationOnly {
                reason: "quotient topology: the phase space is a torus quotient with a dense leaf, which the chart-based pipeline cannot represent",
            },
        },
        CatalogEntry {
            name: "nosmoothing",
            title: "subregular nilpotent in sl(3)*",
            quote: "does not\nhave a smoothing for any neighbourhood $U$",
            kind: EntryKind::DocumentationOnly {
                reason: "no smoothing exists: the T2-set has an A2 singularity whose tangent cone is a half-line",
            },
        },
    ]
}

/// Entry names in catalogue order.
pub fn list() -> Vec<&'static str> {
    entries().iter().map(|e| e.name).collect()
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn get_entry(name: &str) -> Result<CatalogEntry, CatalogError> {
    let all = entries();
    if let Some(e) = all.iter().find(|e| e.name == name) {
        return Ok(e.clone());
    }
    let suggestion = all
        .iter()
        .map(|e| (levenshtein(name, e.name), e.name))
        .min()
        .filter(|(d, n)| *d <= n.len().max(name.len()) / 2)
        .map(|(_, n)| n.to_string());
    Err(CatalogError::NotFound {
        name: name.to_string(),
        suggestion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Unrunnable,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointOutcome {
    pub params: Params,
    pub expected: String,
    pub computed: Option<VerdictValue>,
    pub criterion: String,
    pub ok: bool,
    pub detail: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntryOutcome {
    pub name: String,
    pub status: Status,
    pub points: Vec<PointOutcome>,
    pub message: Option<String>,
}

/// Verdict an entry is judged by at one parameter point.
pub fn entry_verdict(t: &Template, sys: &HamiltonianSystem, x_e: &[f64]) -> Result<StabilityVerdict, String> {
    match t.euclidean {
        Some(g) => stability::euclidean_criteria(g, &sys.h, x_e).map_err(|e| e.to_string()),
        None => stability::analyze(sys, x_e, &AnalysisOptions::default())
            .map(|a| a.verdict)
            .map_err(|e| e.to_string()),
    }
}

/// Checks one parameter point of an entry.
pub fn check_point(entry: &CatalogEntry, p: &Params, seed: u64) -> PointOutcome {
    let mut out = PointOutcome {
        params: p.clone(),
        expected: String::new(),
        computed: None,
        criterion: String::new(),
        ok: false,
        detail: Vec::new(),
    };
    let t = match entry.template() {
        Ok(t) => t,
        Err(e) => {
            out.detail.push(e.to_string());
            return out;
        }
    };
    let p = t.merged(p);
    out.params = p.clone();
    let expected = (t.expected)(&p);
    out.expected = expected.describe();
    let sys = match t.build(&p) {
        Ok(s) => s,
        Err(e) => {
            out.detail.push(e);
            return out;
        }
    };
    let x_e = t.equilibrium;
    let verdict = match entry_verdict(t, &sys, x_e) {
        Ok(v) => v,
        Err(e) => {
            out.detail.push(e);
            return out;
        }
    };
    out.computed = Some(verdict.value);
    out.criterion = verdict.criterion.clone();
    let mut ok = expected.accepts(verdict.value);
    if !ok {
        out.detail.push(format!("expected {}, got {:?} ({})", expected.describe(), verdict.value, verdict.criterion));
    }
    if t.require_wild_reduced {
        let alg = sys.structure.algebra().cloned();
        let wild = alg
            .map(|a| stability::reduced_energy_momentum(&a, &sys.h, x_e))
            .map(|r| matches!(r, Ok(StabilityVerdict { witness: Witness::WildGenerator { .. }, .. })))
            .unwrap_or(false);
        if !wild {
            ok = false;
            out.detail.push("reduced energy-momentum did not report a wild generator".to_string());
        }
    }
    if t.single_piece_fails {
        let single = stability::analyze(
            &sys,
            x_e,
            &AnalysisOptions {
                single_piece: true,
                ..AnalysisOptions::default()
            },
        )
        .ok()
        .and_then(|a| a.steps.into_iter().find(|s| s.criterion.contains("single piece")));
        match single {
            Some(s) if s.value != VerdictValue::Stable => {}
            other => {
                ok = false;
                out.detail.push(format!("single-piece energy-Casimir run: {:?}", other.map(|s| s.value)));
            }
        }
    }
    if let Some(pd) = &t.probe {
        if let Some(want) = (pd.expect)(&p) {
            match dynamics::probe(&sys, x_e, &pd.options(seed)) {
                Ok(r) => {
                    let frac = r.summaries.first().map_or(0.0, |s| s.confinement_fraction);
                    let good = match want {
                        DynamicsExpectation::Confined => frac == 1.0,
                        DynamicsExpectation::Escapes => frac == 0.0,
                    };
                    out.detail.push(format!("probe confinement fraction {frac}"));
                    if !good {
                        ok = false;
                        out.detail.push(format!("probe expected {want:?}"));
                    }
                }
                Err(e) => {
                    ok = false;
                    out.detail.push(format!("probe failed: {e}"));
                }
            }
        }
    }
    out.ok = ok;
    out
}

pub const DEFAULT_SEED: u64 = 42;

/// Runs the expectations of `names` (all entries when empty). `out_of_time`
/// is polled before each entry; once it returns true the remaining entries
/// are reported as skipped.
pub fn run_expectations(names: &[&str], seed: u64, out_of_time: &mut dyn FnMut() -> bool) -> Result<Vec<EntryOutcome>, CatalogError> {
    let selected: Vec<CatalogEntry> = if names.is_empty() {
        entries()
    } else {
        names.iter().map(|n| get_entry(n)).collect::<Result<_, _>>()?
    };
    let mut out = Vec::new();
    for e in selected {
        out.push(run_entry(&e, seed, out_of_time));
    }
    Ok(out)
}

pub fn run_entry(e: &CatalogEntry, seed: u64, out_of_time: &mut dyn FnMut() -> bool) -> EntryOutcome {
    let t = match &e.kind {
        EntryKind::DocumentationOnly { reason } => {
            return EntryOutcome {
                name: e.name.to_string(),
                status: Status::Unrunnable,
                points: Vec::new(),
                message: Some(reason.to_string()),
            }
        }
        EntryKind::Runnable(t) => t,
    };
    if out_of_time() {
        return EntryOutcome {
            name: e.name.to_string(),
            status: Status::Skipped,
            points: Vec::new(),
            message: Some("time budget exhausted".to_string()),
        };
    }
    let points: Vec<PointOutcome> = (t.grid)().iter().map(|p| check_point(e, p, seed)).collect();
    let failed = points.iter().filter(|p| !p.ok).count();
    EntryOutcome {
        name: e.name.to_string(),
        status: if failed == 0 { Status::Pass } else { Status::Fail },
        message: (failed > 0).then(|| format!("{failed} of {} grid points failed", points.len())),
        points,
    }
}
