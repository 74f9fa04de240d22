//! Lie algebras by structure constants, coadjoint operators, isotropy and
//! the transverse Poisson structure at a coadjoint orbit.
//!
//! Sign convention: `⟨ad*_ξ μ, η⟩ = −⟨μ, [ξ, η]⟩`, and the Lie-Poisson
//! bracket is `{f, g}(μ) = −⟨μ, [df, dg]⟩`. The catalogued algebras are
//! written in bases where this bracket reproduces the `R³` brackets
//! `∇A·(∇f×∇g)` with `A = ½(x² + y² + εz²)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("structure constants are not antisymmetric at ({i}, {j}, {k})")]
    NotAntisymmetric { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails with residual {residual:e}")]
    Jacobi { residual: f64 },
    #[error("expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("transverse system is near singular (condition number {condition:e})")]
    NearSingular { condition: f64 },
    #[error("unknown algebra `{0}`")]
    Unknown(String),
    #[error("covector is not in the annihilator of the complement (residual {residual:e})")]
    NotTransverse { residual: f64 },
}

/// Finite-dimensional real Lie algebra `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LieAlgebra {
    name: String,
    dim: usize,
    c: Vec<f64>,
    pub has_invariant_inner_product: bool,
    pub catalogued: bool,
}

/// Names accepted by [`LieAlgebra::by_name`].
pub const CATALOGUED_ALGEBRAS: [&str; 6] = ["so3", "se2", "sl2", "se3", "rsdr", "se2_plus_r2"];

impl LieAlgebra {
    /// Validates antisymmetry and the Jacobi identity (tolerance `1e-12`
    /// relative to the size of the constants).
    pub fn new(name: &str, dim: usize, constants: Vec<f64>) -> Result<Self, AlgebraError> {
        if constants.len() != dim * dim * dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim * dim * dim,
                found: constants.len(),
            });
        }
        let alg = Self {
            name: name.to_string(),
            dim,
            c: constants,
            has_invariant_inner_product: false,
            catalogued: false,
        };
        let scale = 1.0 + alg.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if (alg.c(i, j, k) + alg.c(j, i, k)).abs() > 1e-12 * scale {
                        return Err(AlgebraError::NotAntisymmetric { i, j, k });
                    }
                }
            }
        }
        let residual = alg.jacobi_residual();
        if residual > 1e-12 * scale * scale {
            return Err(AlgebraError::Jacobi { residual });
        }
        Ok(alg)
    }

    /// Builds from the nonzero brackets `[e_i, e_j] = Σ coeff e_k`, given as
    /// `(i, j, k, coeff)`; the `(j, i)` entries are filled by antisymmetry.
    pub fn from_brackets(
        name: &str,
        dim: usize,
        brackets: &[(usize, usize, usize, f64)],
    ) -> Result<Self, AlgebraError> {
        let mut c = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in brackets {
            c[(i * dim + j) * dim + k] += v;
            c[(j * dim + i) * dim + k] -= v;
        }
        Self::new(name, dim, c)
    }

    fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.c(i, j, m) * self.c(m, k, l)
                                + self.c(j, k, m) * self.c(m, i, l)
                                + self.c(k, i, m) * self.c(m, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn constants(&self) -> &[f64] {
        &self.c
    }

    fn check(&self, v: &[f64]) -> Result<(), AlgebraError> {
        if v.len() != self.dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `[ξ, η]`.
    pub fn bracket(&self, xi: &[f64], eta: &[f64]) -> Result<DVector<f64>, AlgebraError> {
        self.check(xi)?;
        self.check(eta)?;
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if xi[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if eta[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += xi[i] * eta[j] * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// The matrix of `ξ ↦ ad*_ξ μ`, the transpose of the Lie-Poisson tensor at `μ`.
    pub fn ad_star_matrix(&self, mu: &[f64]) -> Result<DMatrix<f64>, AlgebraError> {
        self.check(mu)?;
        let n = self.dim;
        Ok(DMatrix::from_fn(n, n, |k, i| {
            -(0..n).map(|m| self.c(i, k, m) * mu[m]).sum::<f64>()
        }))
    }

    /// `ad*_ξ μ`.
    pub fn ad_star(&self, xi: &[f64], mu: &[f64]) -> Result<DVector<f64>, AlgebraError> {
        self.check(xi)?;
        Ok(self.ad_star_matrix(mu)? * DVector::from_column_slice(xi))
    }

    /// `ad_ξ` as a matrix acting on `𝔤`.
    pub fn ad_matrix(&self, xi: &[f64]) -> Result<DMatrix<f64>, AlgebraError> {
        self.check(xi)?;
        let n = self.dim;
        Ok(DMatrix::from_fn(n, n, |k, j| {
            (0..n).map(|i| xi[i] * self.c(i, j, k)).sum::<f64>()
        }))
    }

    pub fn by_name(name: &str) -> Result<Self, AlgebraError> {
        match name {
            "so3" => Ok(Self::so3()),
            "se2" => Ok(Self::se2()),
            "sl2" => Ok(Self::sl2()),
            "se3" => Ok(Self::se3()),
            "rsdr" => Ok(Self::rsdr()),
            "se2_plus_r2" => Ok(Self::se2_plus_r2()),
            other => Err(AlgebraError::Unknown(other.to_string())),
        }
    }

    fn catalogued(mut self, invariant_inner_product: bool) -> Self {
        self.catalogued = true;
        self.has_invariant_inner_product = invariant_inner_product;
        self
    }

    /// `so(3)`: `[e_i, e_j] = −ε_ijk e_k`.
    pub fn so3() -> Self {
        Self::from_brackets(
            "so3",
            3,
            &[(0, 1, 2, -1.0), (1, 2, 0, -1.0), (2, 0, 1, -1.0)],
        )
        .expect("so3")
        .catalogued(true)
    }

    /// `se(2)` with translations `e1, e2` and rotation `e3`.
    pub fn se2() -> Self {
        Self::from_brackets("se2", 3, &[(1, 2, 0, -1.0), (2, 0, 1, -1.0)])
            .expect("se2")
            .catalogued(false)
    }

    /// `sl(2, R)` in the basis matching `A = ½(x² + y² − z²)`.
    pub fn sl2() -> Self {
        Self::from_brackets(
            "sl2",
            3,
            &[(0, 1, 2, 1.0), (1, 2, 0, -1.0), (2, 0, 1, -1.0)],
        )
        .expect("sl2")
        .catalogued(true)
    }

    /// `se(3)` with rotations `e1..e3` followed by translations `e4..e6`.
    pub fn se3() -> Self {
        let mut b = Vec::new();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            b.push((i, j, k, -1.0));
            b.push((i, j + 3, k + 3, -1.0));
            b.push((j, i + 3, k + 3, 1.0));
        }
        Self::from_brackets("se3", 6, &b).expect("se3").catalogued(false)
    }

    /// The two-dimensional non-abelian algebra `ℝ ⋉ ℝ`.
    pub fn rsdr() -> Self {
        Self::from_brackets("rsdr", 2, &[(0, 1, 1, -1.0)])
            .expect("rsdr")
            .catalogued(false)
    }

    /// `se(2) ⊕ ℝ²` with the abelian summand in coordinates 4, 5.
    pub fn se2_plus_r2() -> Self {
        Self::from_brackets("se2_plus_r2", 5, &[(1, 2, 0, -1.0), (2, 0, 1, -1.0)])
            .expect("se2_plus_r2")
            .catalogued(false)
    }

    /// Isotropy algebra of `μ` and the transverse splitting.
    pub fn isotropy(&self, mu: &[f64]) -> Result<TransverseData, AlgebraError> {
        let m = self.ad_star_matrix(mu)?;
        let n = self.dim;
        let g_mu = linalg::nullspace(&m);
        let n_mu = linalg::orthogonal_complement(&g_mu);
        let n_mu_ann = linalg::orthogonal_complement(&n_mu);
        let g_mu_ann = linalg::orthogonal_complement(&g_mu);
        let stacked = linalg::hstack(&g_mu_ann, &n_mu_ann);
        let inv = stacked
            .clone()
            .try_inverse()
            .unwrap_or_else(|| linalg::pinv(&stacked));
        let mut keep = DMatrix::zeros(n, n);
        keep.view_mut((0, 0), g_mu_ann.shape()).copy_from(&g_mu_ann);
        let projector = keep * inv;
        let complement_invariant = (0..g_mu.ncols()).all(|b| {
            let ad = self
                .ad_matrix(g_mu.column(b).as_slice())
                .expect("dimension");
            linalg::contains(&n_mu, &(ad * &n_mu), 1e-10)
        });
        Ok(TransverseData {
            algebra: self.clone(),
            mu: DVector::from_column_slice(mu),
            g_mu,
            n_mu,
            n_mu_ann,
            g_mu_ann,
            projector,
            complement_invariant,
        })
    }

    /// Sampled regularity test: the rank of `ad*·μ'` over `samples` uniform
    /// draws `μ'` in the ball about `μ`.
    pub fn is_regular(&self, mu: &[f64], radius: f64, samples: usize, seed: u64) -> RegularityReport {
        let base = linalg::rank(&self.ad_star_matrix(mu).expect("dimension"));
        let mut ranks = vec![base];
        let mut r = sample::rng(seed, 0);
        for _ in 0..samples {
            let p = sample::in_ball(&mut r, self.dim, radius);
            let q: Vec<f64> = mu.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let k = linalg::rank(&self.ad_star_matrix(&q).expect("dimension"));
            if !ranks.contains(&k) {
                ranks.push(k);
            }
        }
        ranks.sort_unstable();
        RegularityReport {
            regular: ranks.len() == 1,
            rank_at_mu: base,
            ranks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityReport {
    pub regular: bool,
    pub rank_at_mu: usize,
    /// Distinct ranks encountered, ascending.
    pub ranks: Vec<usize>,
}

/// Splittings `𝔤 = 𝔤_μ ⊕ 𝔫_μ`, `𝔤* = 𝔤_μ° ⊕ 𝔫_μ°` at a momentum `μ`.
/// All bases are stored as matrix columns in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseData {
    pub algebra: LieAlgebra,
    pub mu: DVector<f64>,
    pub g_mu: DMatrix<f64>,
    pub n_mu: DMatrix<f64>,
    /// Annihilator of `𝔫_μ`, identified with `𝔤_μ*`.
    pub n_mu_ann: DMatrix<f64>,
    pub g_mu_ann: DMatrix<f64>,
    /// Projection onto `𝔤_μ°` along `𝔫_μ°`.
    pub projector: DMatrix<f64>,
    /// Whether `𝔫_μ` is `ad(𝔤_μ)`-invariant (the split case).
    pub complement_invariant: bool,
}

impl TransverseData {
    pub fn isotropy_dim(&self) -> usize {
        self.g_mu.ncols()
    }

    fn check_nu(&self, nu: &[f64]) -> Result<DVector<f64>, AlgebraError> {
        let n = self.algebra.dim();
        if nu.len() != n {
            return Err(AlgebraError::DimensionMismatch {
                expected: n,
                found: nu.len(),
            });
        }
        let nu = DVector::from_column_slice(nu);
        let residual = (self.n_mu.transpose() * &nu).amax();
        if self.n_mu.ncols() > 0 && residual > 1e-9 * (1.0 + nu.amax()) {
            return Err(AlgebraError::NotTransverse { residual });
        }
        Ok(nu)
    }

    /// The `η ∈ 𝔫_μ` solving `π_{𝔤_μ°}(ad*_{ξ+η}(μ + ν)) = 0`.
    pub fn transverse_connector(&self, nu: &[f64], xi: &[f64]) -> Result<DVector<f64>, AlgebraError> {
        let nu = self.check_nu(nu)?;
        let n = self.algebra.dim();
        if xi.len() != n {
            return Err(AlgebraError::DimensionMismatch {
                expected: n,
                found: xi.len(),
            });
        }
        let k = self.n_mu.ncols();
        if k == 0 {
            return Ok(DVector::zeros(n));
        }
        let point = &self.mu + &nu;
        let m = self.algebra.ad_star_matrix(point.as_slice())?;
        let coords = linalg::pinv(&self.g_mu_ann) * &self.projector;
        let lhs = &coords * &m * &self.n_mu;
        let rhs = -(&coords * &m * DVector::from_column_slice(xi));
        let condition = linalg::condition_number(&lhs);
        if condition > 1e12 {
            return Err(AlgebraError::NearSingular { condition });
        }
        let a = lhs.lu().solve(&rhs).ok_or(AlgebraError::NearSingular {
            condition: f64::INFINITY,
        })?;
        Ok(&self.n_mu * a)
    }

    /// `j_μ(ν)ξ = ξ + η`.
    pub fn connector_image(&self, nu: &[f64], xi: &[f64]) -> Result<DVector<f64>, AlgebraError> {
        Ok(DVector::from_column_slice(xi) + self.transverse_connector(nu, xi)?)
    }

    /// Residual `|π_{𝔤_μ°}(ad*_{ξ+η}(μ + ν))|` of the connector equation.
    pub fn connector_residual(&self, nu: &[f64], xi: &[f64], eta: &DVector<f64>) -> f64 {
        let point = &self.mu + DVector::from_column_slice(nu);
        let m = self.algebra.ad_star_matrix(point.as_slice()).expect("dimension");
        (&self.projector * m * (DVector::from_column_slice(xi) + eta)).norm()
    }

    /// Transverse bracket of the linear functionals whose differentials are
    /// `df`, `dg` (coordinates in the basis `g_mu` of `𝔤_μ`) at `μ + ν`.
    pub fn transverse_bracket(&self, nu: &[f64], df: &[f64], dg: &[f64]) -> Result<f64, AlgebraError> {
        let d = self.isotropy_dim();
        for v in [df, dg] {
            if v.len() != d {
                return Err(AlgebraError::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        let xf = &self.g_mu * DVector::from_column_slice(df);
        let xg = &self.g_mu * DVector::from_column_slice(dg);
        let jf = self.connector_image(nu, xf.as_slice())?;
        let jg = self.connector_image(nu, xg.as_slice())?;
        let point = &self.mu + DVector::from_column_slice(nu);
        let br = self.algebra.bracket(jf.as_slice(), jg.as_slice())?;
        Ok(-point.dot(&br))
    }

    /// Basis `{j_μ(ν)ξ_b}` of the tangent space to `Z_{μ,ν}` at the identity.
    pub fn z_tangent(&self, nu: &[f64]) -> Result<DMatrix<f64>, AlgebraError> {
        let n = self.algebra.dim();
        let cols = (0..self.isotropy_dim())
            .map(|b| self.connector_image(nu, self.g_mu.column(b).as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(linalg::columns(n, &cols))
    }

    /// Maps `𝔤_μ*` coordinates (dual to the columns of `g_mu`) into `𝔫_μ°`.
    pub fn transverse_covector(&self, coords: &[f64]) -> DVector<f64> {
        // ν ∈ 𝔫_μ° with ⟨ν, g_mu_b⟩ = coords_b.
        let pairing = self.g_mu.transpose() * &self.n_mu_ann;
        let a = linalg::lstsq(&pairing, &DVector::from_column_slice(coords));
        &self.n_mu_ann * a
    }

    pub fn describe(&self) -> String {
        format!(
            "{}: dim g_mu = {}, dim n_mu = {}, split = {}",
            self.algebra.name(),
            self.isotropy_dim(),
            self.n_mu.ncols(),
            self.complement_invariant
        )
    }
}
