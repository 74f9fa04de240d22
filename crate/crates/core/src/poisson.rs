//! Poisson structures on `R^n`, brackets, Hamiltonian vector fields and
//! leaf ranks.
//!
//! The tensor is `Π_ij(x) = {x_i, x_j}(x)` and `{f, g} = ∇f·Π∇g`. The flow
//! of `h` is `ḟ = {h, f}`, so `ẋ = Πᵀ∇h`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::LieAlgebra;
use crate::expr::{ExprError, Expression};
use crate::{linalg, sample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("Poisson tensor has odd numerical rank {rank} at the sampled point")]
    OddRank { rank: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid structure: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PoissonKind {
    /// Row-major `n × n` entries `Π_ij`.
    StructureMatrix(Vec<Expression>),
    LiePoisson(LieAlgebra),
    /// `{f, g} = ∇A·(∇f × ∇g)` on `R³`.
    R3Casimir(Expression),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStructure {
    pub kind: PoissonKind,
    pub dim: usize,
    pub casimirs: Vec<Expression>,
    /// Catalogue key used to look up T₂ data (e.g. `"sl2"`, `"threeplanes"`).
    pub tag: Option<String>,
}

/// Sampled-residual summary.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    pub max_residual: f64,
    pub scale: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn new(max_residual: f64, scale: f64, rtol: f64) -> Self {
        Self {
            max_residual,
            scale,
            pass: max_residual <= rtol * scale,
        }
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl PoissonStructure {
    /// Lie-Poisson structure; catalogued algebras come with their
    /// polynomial Casimirs.
    pub fn lie_poisson(alg: LieAlgebra) -> Self {
        let dim = alg.dim();
        let sources: &[&str] = match alg.name() {
            "so3" => &["(x^2 + y^2 + z^2)/2"],
            "se2" => &["(x^2 + y^2)/2"],
            "sl2" => &["(x^2 + y^2 - z^2)/2"],
            "se3" => &["(x4^2 + x5^2 + x6^2)/2", "x1*x4 + x2*x5 + x3*x6"],
            "se2_plus_r2" => &["(x^2 + y^2)/2", "q", "p"],
            _ => &[],
        };
        let casimirs = if alg.catalogued {
            sources
                .iter()
                .map(|s| Expression::parse(s, dim, &Default::default()).expect("catalogued Casimir"))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            tag: Some(String::from(alg.name())),
            kind: PoissonKind::LiePoisson(alg),
            dim,
            casimirs,
        }
    }

    pub fn r3_casimir(a: Expression) -> Result<Self, PoissonError> {
        if a.dim() != 3 {
            return Err(PoissonError::DimensionMismatch {
                expected: 3,
                found: a.dim(),
            });
        }
        Ok(Self {
            casimirs: alloc::vec![a.clone()],
            kind: PoissonKind::R3Casimir(a),
            dim: 3,
            tag: None,
        })
    }

    /// Entries are row-major `Π_ij`; diagonal entries must be zero and
    /// the matrix antisymmetric (checked by sampling).
    pub fn structure_matrix(dim: usize, entries: Vec<Expression>) -> Result<Self, PoissonError> {
        if entries.len() != dim * dim {
            return Err(PoissonError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if let Some(e) = entries.iter().find(|e| e.dim() != dim) {
            return Err(PoissonError::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
        Ok(Self {
            kind: PoissonKind::StructureMatrix(entries),
            dim,
            casimirs: Vec::new(),
            tag: None,
        })
    }

    pub fn with_casimirs(mut self, casimirs: Vec<Expression>) -> Self {
        self.casimirs = casimirs;
        self
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = Some(String::from(tag));
        self
    }

    pub fn algebra(&self) -> Option<&LieAlgebra> {
        match &self.kind {
            PoissonKind::LiePoisson(a) => Some(a),
            _ => None,
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), PoissonError> {
        if x.len() != self.dim {
            return Err(PoissonError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `Π(x)`.
    pub fn tensor(&self, x: &[f64]) -> Result<DMatrix<f64>, PoissonError> {
        self.check(x)?;
        let n = self.dim;
        Ok(match &self.kind {
            PoissonKind::StructureMatrix(e) => {
                let vals = e.iter().map(|f| f.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
                DMatrix::from_row_slice(n, n, &vals)
            }
            PoissonKind::LiePoisson(alg) => alg
                .ad_star_matrix(x)
                .map_err(|_| PoissonError::DimensionMismatch {
                    expected: alg.dim(),
                    found: x.len(),
                })?
                .transpose(),
            PoissonKind::R3Casimir(a) => {
                let g = a.gradient(x)?;
                DMatrix::from_fn(3, 3, |i, j| (0..3).map(|k| levi_civita(i, j, k) * g[k]).sum())
            }
        })
    }

    /// `∂_l Π` for `l = 0..n`.
    pub fn tensor_derivatives(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>, PoissonError> {
        self.check(x)?;
        let n = self.dim;
        Ok(match &self.kind {
            PoissonKind::StructureMatrix(e) => {
                let grads = e.iter().map(|f| f.gradient(x)).collect::<Result<Vec<_>, _>>()?;
                (0..n)
                    .map(|l| DMatrix::from_fn(n, n, |i, j| grads[i * n + j][l]))
                    .collect()
            }
            PoissonKind::LiePoisson(alg) => (0..n)
                .map(|l| DMatrix::from_fn(n, n, |i, j| -alg.c(i, j, l)))
                .collect(),
            PoissonKind::R3Casimir(a) => {
                let h = a.derive(x)?.hessian;
                (0..3)
                    .map(|l| {
                        DMatrix::from_fn(3, 3, |i, j| {
                            (0..3).map(|k| levi_civita(i, j, k) * h[(l, k)]).sum()
                        })
                    })
                    .collect()
            }
        })
    }

    /// `{f, g}(x)`.
    pub fn bracket(&self, f: &Expression, g: &Expression, x: &[f64]) -> Result<f64, PoissonError> {
        let df = f.gradient(x)?;
        let dg = g.gradient(x)?;
        Ok(df.dot(&(self.tensor(x)? * dg)))
    }

    /// `X_h(x) = Πᵀ(x)∇h(x)`.
    pub fn hamiltonian_vector(&self, dh: &DVector<f64>, x: &[f64]) -> Result<DVector<f64>, PoissonError> {
        Ok(self.tensor(x)?.tr_mul(dh))
    }

    /// Rank of `Π(x)`; even for a genuine Poisson tensor.
    pub fn leaf_rank(&self, x: &[f64]) -> Result<usize, PoissonError> {
        let r = linalg::rank(&self.tensor(x)?);
        if r % 2 == 1 {
            return Err(PoissonError::OddRank { rank: r });
        }
        Ok(r)
    }

    /// Max over samples in the box and coordinate functions of `|{C, x_i}|`;
    /// passes when it is at most `1e-9 · scale`.
    pub fn verify_casimir(
        &self,
        c: &Expression,
        lo: &[f64],
        hi: &[f64],
        samples: usize,
        seed: u64,
    ) -> Result<ResidualReport, PoissonError> {
        let mut r = sample::rng(seed, 0);
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for _ in 0..samples {
            let x = sample::in_box(&mut r, lo, hi);
            let dc = c.gradient(&x)?;
            let pi = self.tensor(&x)?;
            let v = pi.tr_mul(&dc);
            worst = worst.max(v.amax());
            scale = scale.max(1.0 + dc.norm() * pi.norm());
        }
        Ok(ResidualReport::new(worst, scale, 1e-9))
    }

    /// Max antisymmetry defect `|Π + Πᵀ|` over samples in the box.
    pub fn check_antisymmetry(&self, lo: &[f64], hi: &[f64], samples: usize, seed: u64) -> Result<ResidualReport, PoissonError> {
        let mut r = sample::rng(seed, 1);
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for _ in 0..samples {
            let x = sample::in_box(&mut r, lo, hi);
            let pi = self.tensor(&x)?;
            worst = worst.max((&pi + pi.transpose()).amax());
            scale = scale.max(pi.amax());
        }
        Ok(ResidualReport::new(worst, scale, 1e-12))
    }

    /// Max Jacobiator entry over samples in the box.
    pub fn check_jacobi(&self, lo: &[f64], hi: &[f64], samples: usize, seed: u64) -> Result<ResidualReport, PoissonError> {
        let n = self.dim;
        let mut r = sample::rng(seed, 2);
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for _ in 0..samples {
            let x = sample::in_box(&mut r, lo, hi);
            let pi = self.tensor(&x)?;
            let d = self.tensor_derivatives(&x)?;
            let dmax = d.iter().fold(0.0f64, |m, a| m.max(a.amax()));
            scale = scale.max(pi.amax() * dmax);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let s: f64 = (0..n)
                            .map(|l| {
                                pi[(i, l)] * d[l][(j, k)]
                                    + pi[(j, l)] * d[l][(k, i)]
                                    + pi[(k, l)] * d[l][(i, j)]
                            })
                            .sum();
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        Ok(ResidualReport::new(worst, scale, 1e-9))
    }
}

/// A Poisson structure with a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    pub structure: PoissonStructure,
    pub h: Expression,
}

impl HamiltonianSystem {
    pub fn new(structure: PoissonStructure, h: Expression) -> Result<Self, PoissonError> {
        if h.dim() != structure.dim {
            return Err(PoissonError::DimensionMismatch {
                expected: structure.dim,
                found: h.dim(),
            });
        }
        Ok(Self { structure, h })
    }

    pub fn dim(&self) -> usize {
        self.structure.dim
    }

    /// `ẋ = Πᵀ(x)∇h(x)`.
    pub fn vector_field(&self, x: &[f64]) -> Result<DVector<f64>, PoissonError> {
        let dh = self.h.gradient(x)?;
        self.structure.hamiltonian_vector(&dh, x)
    }

    /// Jacobian of the vector field, exact from the second-order jets.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, PoissonError> {
        let n = self.dim();
        let d = self.h.derive(x)?;
        let pi = self.structure.tensor(x)?;
        let dpi = self.structure.tensor_derivatives(x)?;
        Ok(DMatrix::from_fn(n, n, |k, l| {
            (0..n)
                .map(|j| d.hessian[(l, j)] * pi[(j, k)] + d.gradient[j] * dpi[l][(j, k)])
                .sum()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;

    fn e(src: &str, dim: usize) -> Expression {
        Expression::parse(src, dim, &Params::new()).unwrap()
    }

    #[test]
    fn r3_bracket_of_coordinates() {
        let ps = PoissonStructure::r3_casimir(e("(x^2+y^2+z^2)/2", 3)).unwrap();
        let v = ps.bracket(&e("x", 3), &e("y", 3), &[0.4, -1.0, 2.5]).unwrap();
        assert_eq!(v, 2.5);
        let g = e("sin(x)*y + z^3", 3);
        assert!(ps.bracket(&g, &g, &[0.1, 0.2, 0.3]).unwrap().abs() < 1e-15);
        let a = e("(x^2+y^2+z^2)/2", 3);
        assert!(ps.bracket(&a, &g, &[0.1, 0.2, 0.3]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lie_poisson_matches_r3_models() {
        for (alg, a) in [
            (LieAlgebra::so3(), "(x^2+y^2+z^2)/2"),
            (LieAlgebra::se2(), "(x^2+y^2)/2"),
            (LieAlgebra::sl2(), "(x^2+y^2-z^2)/2"),
        ] {
            let lp = PoissonStructure::lie_poisson(alg);
            let r3 = PoissonStructure::r3_casimir(e(a, 3)).unwrap();
            let x = [0.3, -0.7, 1.1];
            assert!((lp.tensor(&x).unwrap() - r3.tensor(&x).unwrap()).amax() < 1e-15);
        }
    }

    #[test]
    fn leaf_ranks() {
        let se2 = PoissonStructure::lie_poisson(LieAlgebra::se2());
        assert_eq!(se2.leaf_rank(&[0.0, 0.0, 1.0]).unwrap(), 0);
        assert_eq!(se2.leaf_rank(&[1.0, 0.0, 0.0]).unwrap(), 2);
        assert_eq!(PoissonStructure::lie_poisson(LieAlgebra::so3()).leaf_rank(&[0.0; 3]).unwrap(), 0);
        assert_eq!(PoissonStructure::lie_poisson(LieAlgebra::sl2()).leaf_rank(&[1.0, 0.0, 1.0]).unwrap(), 2);
    }

    #[test]
    fn odd_rank_is_reported() {
        let zero = e("0", 3);
        let one = e("1", 3);
        let entries = alloc::vec![zero.clone(), one.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero];
        let ps = PoissonStructure::structure_matrix(3, entries).unwrap();
        assert!(matches!(ps.leaf_rank(&[0.0; 3]), Err(PoissonError::OddRank { rank: 1 })));
        assert!(!ps.check_antisymmetry(&[-1.0; 3], &[1.0; 3], 5, 0).unwrap().pass);
    }

    #[test]
    fn casimir_verification() {
        let se2 = PoissonStructure::lie_poisson(LieAlgebra::se2());
        let lo = [-1.0; 3];
        let hi = [1.0; 3];
        assert!(se2.verify_casimir(&e("x^2+y^2", 3), &lo, &hi, 50, 3).unwrap().pass);
        for name in crate::algebra::CATALOGUED_ALGEBRAS {
            let ps = PoissonStructure::lie_poisson(LieAlgebra::by_name(name).unwrap());
            let n = ps.dim;
            for c in &ps.casimirs {
                assert!(ps.verify_casimir(c, &alloc::vec![-2.0; n], &alloc::vec![2.0; n], 50, 1).unwrap().pass, "{name}");
            }
        }
        let bad = se2.verify_casimir(&e("z", 3), &lo, &hi, 50, 3).unwrap();
        assert!(!bad.pass);
        // {z, x} = y and {z, y} = −x, so the residual is max(|x|, |y|) at the worst sample.
        assert!(bad.max_residual > 0.5 && bad.max_residual <= 1.0);
        let a = e("(x^2*2 - y^2)*y", 3);
        let r3 = PoissonStructure::r3_casimir(a.clone()).unwrap();
        assert_eq!(r3.verify_casimir(&a, &lo, &hi, 50, 3).unwrap().max_residual, 0.0);
    }

    #[test]
    fn jacobi_holds_for_models() {
        let lo = [-1.0; 3];
        let hi = [1.0; 3];
        let r3 = PoissonStructure::r3_casimir(e("(x^2 - y^2)*y + sin(z)", 3)).unwrap();
        assert!(r3.check_jacobi(&lo, &hi, 100, 0).unwrap().pass);
        // Π_12 = 1, Π_23 = y: w = (y, 0, 1) has w·curl w = −1, so Jacobi fails.
        let z = e("0", 3);
        let entries = alloc::vec![z.clone(), e("1", 3), z.clone(), e("-1", 3), z.clone(), e("y", 3), z.clone(), e("-y", 3), z];
        let ps = PoissonStructure::structure_matrix(3, entries).unwrap();
        assert!(!ps.check_jacobi(&lo, &hi, 20, 0).unwrap().pass);
    }

    #[test]
    fn vector_field_and_jacobian() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::sl2());
        let sys = HamiltonianSystem::new(ps, e("2*x + z", 3)).unwrap();
        assert!(sys.vector_field(&[0.0; 3]).unwrap().amax() == 0.0);
        let j = sys.jacobian(&[0.0; 3]).unwrap();
        // Directional derivative oracle.
        let x = [0.2, -0.1, 0.3];
        let fx = sys.vector_field(&x).unwrap();
        assert!((j * DVector::from_column_slice(&x) - fx).amax() < 1e-14);
    }
}
