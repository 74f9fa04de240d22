//! T₂-sets, smoothings and the tame / very tame / wild classification of
//! generators.
//!
//! A T₂-set is the set of points whose leaves cannot be separated from the
//! leaf of `x_e` in the leaf space. There is no general algorithm for it, so
//! descriptions come from a table of known structures, from a user override,
//! or (at regular points) from the leaf itself.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{LieAlgebra, TransverseData};
use crate::linalg;
use crate::poisson::{PoissonError, PoissonKind, PoissonStructure};
use crate::sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeafError {
    #[error("no T2 data for structure `{structure}` at this point; supply t2_override")]
    NotCatalogued { structure: String },
    #[error("covector does not annihilate the leaf tangent (residual {residual:e})")]
    NotAGenerator { residual: f64 },
    #[error("invalid T2 override: {0}")]
    InvalidOverride(String),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PieceKind {
    /// Affine subspace `offset + span(tangent)`.
    Affine,
    /// The (possibly curved) symplectic leaf through `offset`, represented
    /// by its tangent space there.
    Leaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub offset: DVector<f64>,
    /// Basis vectors as columns.
    pub tangent: DMatrix<f64>,
    pub kind: PieceKind,
    pub note: String,
}

impl AffinePiece {
    pub fn affine(offset: &DVector<f64>, tangent: DMatrix<f64>, note: &str) -> Self {
        Self {
            offset: offset.clone(),
            tangent,
            kind: PieceKind::Affine,
            note: note.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.tangent.ncols()
    }
}

/// Tangent cone of the T₂-set at `x_e`.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentCone {
    /// Union of linear subspaces (columns are bases).
    Subspaces(Vec<DMatrix<f64>>),
    /// `{v : vᵀ Q v = 0}` for a symmetric nondegenerate form `Q`.
    Quadric(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum T2Source {
    Catalogue,
    UserOverride,
    RegularLeaf,
}

/// A U-local T₂-set with a smoothing by pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Description {
    pub base: DVector<f64>,
    pub pieces: Vec<AffinePiece>,
    /// Basis of the span of the tangent cone.
    pub tangent_span: DMatrix<f64>,
    /// Basis of `range Π(x_e)`.
    pub leaf_tangent: DMatrix<f64>,
    pub contained_exactly: bool,
    pub source: T2Source,
    pub cone: TangentCone,
}

/// User-supplied smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Override {
    pub pieces: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorClassification {
    pub xi: DVector<f64>,
    pub tame: bool,
    pub very_tame: bool,
    /// A unit vector of the tangent span with `⟨ξ, v⟩ ≠ 0` when wild.
    pub witness: Option<DVector<f64>>,
    pub pairing: f64,
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn basis(n: usize, vecs: &[DVector<f64>]) -> DMatrix<f64> {
    linalg::columns(n, vecs)
}

fn near_zero(x: &DVector<f64>, idx: &[usize]) -> bool {
    let scale = 1.0 + x.amax();
    idx.iter().all(|&i| x[i].abs() <= 1e-12 * scale)
}

impl T2Description {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    fn from_pieces(
        base: DVector<f64>,
        pieces: Vec<AffinePiece>,
        leaf_tangent: DMatrix<f64>,
        contained_exactly: bool,
        source: T2Source,
        cone: TangentCone,
    ) -> Self {
        let n = base.len();
        let span_of = |mats: &[DMatrix<f64>]| {
            let mut all = DMatrix::zeros(n, 0);
            for m in mats {
                all = linalg::hstack(&all, m);
            }
            linalg::orthonormalize(&all)
        };
        let tangent_span = match &cone {
            TangentCone::Subspaces(s) => span_of(s),
            TangentCone::Quadric(q) => DMatrix::identity(q.nrows(), q.ncols()),
        };
        Self {
            base,
            pieces,
            tangent_span,
            leaf_tangent,
            contained_exactly,
            source,
            cone,
        }
    }

    fn point(base: DVector<f64>, note: &str) -> Self {
        let n = base.len();
        let z = DMatrix::zeros(n, 0);
        Self::from_pieces(
            base.clone(),
            vec![AffinePiece::affine(&base, z.clone(), note)],
            z.clone(),
            true,
            T2Source::Catalogue,
            TangentCone::Subspaces(vec![z]),
        )
    }

    fn union_of_subspaces(base: DVector<f64>, planes: Vec<(DMatrix<f64>, &str)>, leaf: DMatrix<f64>, exact: bool) -> Self {
        let pieces = planes
            .iter()
            .map(|(t, note)| AffinePiece::affine(&base, linalg::orthonormalize(t), note))
            .collect::<Vec<_>>();
        let cone = TangentCone::Subspaces(pieces.iter().map(|p| p.tangent.clone()).collect());
        Self::from_pieces(base, pieces, leaf, exact, T2Source::Catalogue, cone)
    }

    /// The single-piece smoothing `B = U` over the same T₂-set.
    pub fn full_neighbourhood(&self) -> Self {
        let n = self.dim();
        let mut out = self.clone();
        out.pieces = vec![AffinePiece::affine(
            &self.base,
            DMatrix::identity(n, n),
            "full neighbourhood",
        )];
        out.contained_exactly = false;
        out
    }

    /// Residuals of the structural invariants; empty when all hold.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !linalg::contains(&self.tangent_span, &self.leaf_tangent, 1e-9) {
            out.push("leaf tangent is not contained in the tangent span".to_string());
        }
        if !self.pieces.iter().any(|p| {
            let d = &p.offset - &self.base;
            d.amax() <= 1e-12 * (1.0 + self.base.amax())
                || linalg::contains(&p.tangent, &DMatrix::from_column_slice(d.len(), 1, d.as_slice()), 1e-9)
        }) {
            out.push("base point lies in no piece".to_string());
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if p.kind == PieceKind::Affine
                && self.contained_exactly
                && !linalg::contains(&self.tangent_span, &p.tangent, 1e-9)
            {
                out.push(format!("piece {i} leaves the tangent span"));
            }
        }
        out
    }
}

/// Sampled rank constancy of `Π` in a small ball around `x`.
pub fn is_regular_point(ps: &PoissonStructure, x: &[f64], samples: usize, seed: u64) -> Result<bool, LeafError> {
    if let PoissonKind::LiePoisson(alg) = &ps.kind {
        let r = 1e-3 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        return Ok(alg.is_regular(x, r, samples, seed).regular);
    }
    let base = linalg::rank(&ps.tensor(x)?);
    let mut rng = sample::rng(seed, 0);
    let r = 1e-3 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for _ in 0..samples {
        let d = sample::in_ball(&mut rng, x.len(), r);
        let y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
        if linalg::rank(&ps.tensor(&y)?) != base {
            return Ok(false);
        }
    }
    Ok(true)
}

fn regular_leaf(base: DVector<f64>, leaf: DMatrix<f64>) -> T2Description {
    let piece = AffinePiece {
        offset: base.clone(),
        tangent: leaf.clone(),
        kind: PieceKind::Leaf,
        note: "symplectic leaf (regular point)".to_string(),
    };
    T2Description::from_pieces(
        base,
        vec![piece],
        leaf.clone(),
        true,
        T2Source::RegularLeaf,
        TangentCone::Subspaces(vec![leaf]),
    )
}

fn catalogued(ps: &PoissonStructure, x: &DVector<f64>, leaf: &DMatrix<f64>) -> Option<T2Description> {
    let tag = ps.tag.as_deref()?;
    let n = x.len();
    let e = |i| unit(n, i);
    let cols = |v: &[DVector<f64>]| basis(n, v);
    match tag {
        "so3" if near_zero(x, &[0, 1, 2]) => Some(T2Description::point(x.clone(), "origin")),
        "se2" if near_zero(x, &[0, 1]) => Some(T2Description::union_of_subspaces(
            x.clone(),
            vec![(cols(&[e(2)]), "z-axis")],
            leaf.clone(),
            true,
        )),
        "sl2" if near_zero(x, &[0, 1, 2]) => {
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
            Some(T2Description::from_pieces(
                x.clone(),
                vec![AffinePiece::affine(x, DMatrix::identity(3, 3), "B = U (cone A = 0)")],
                leaf.clone(),
                false,
                T2Source::Catalogue,
                TangentCone::Quadric(q),
            ))
        }
        "twoplanes" if near_zero(x, &[0, 1]) => {
            let s = core::f64::consts::FRAC_1_SQRT_2;
            Some(T2Description::union_of_subspaces(
                x.clone(),
                vec![
                    (cols(&[DVector::from_vec(vec![s, s, 0.0]), e(2)]), "x = y"),
                    (cols(&[DVector::from_vec(vec![s, -s, 0.0]), e(2)]), "x = -y"),
                ],
                leaf.clone(),
                true,
            ))
        }
        "threeplanes" if near_zero(x, &[0, 1]) => {
            let a = match &ps.kind {
                PoissonKind::R3Casimir(expr) => expr.param("a")?,
                _ => return None,
            };
            Some(T2Description::union_of_subspaces(
                x.clone(),
                vec![
                    (cols(&[e(0), e(2)]), "y = 0"),
                    (cols(&[DVector::from_vec(vec![1.0, a, 0.0]), e(2)]), "y = a x"),
                    (cols(&[DVector::from_vec(vec![1.0, -a, 0.0]), e(2)]), "y = -a x"),
                ],
                leaf.clone(),
                true,
            ))
        }
        "se2plus" if near_zero(x, &[0, 1]) => Some(T2Description::union_of_subspaces(
            x.clone(),
            vec![(cols(&[e(2), e(3), e(4)]), "x = y = 0")],
            leaf.clone(),
            true,
        )),
        "se2_plus_r2" if near_zero(x, &[0, 1]) => Some(T2Description::union_of_subspaces(
            x.clone(),
            vec![(cols(&[e(2)]), "z-axis at fixed (q, p)")],
            leaf.clone(),
            true,
        )),
        "se3" if near_zero(x, &[3, 4, 5]) => {
            if near_zero(x, &[0, 1, 2]) {
                return None;
            }
            Some(T2Description::union_of_subspaces(
                x.clone(),
                vec![(cols(&[e(0), e(1), e(2)]), "translational momentum = 0")],
                leaf.clone(),
                true,
            ))
        }
        "rsdr" if near_zero(x, &[1]) => Some(T2Description::union_of_subspaces(
            x.clone(),
            vec![(DMatrix::identity(2, 2), "both open half-planes and the axis")],
            leaf.clone(),
            true,
        )),
        _ => None,
    }
}

/// The T₂-set of `x_e`: a user override if given, else the table of known
/// singular points, else the leaf itself when `x_e` is regular.
pub fn t2_description(
    ps: &PoissonStructure,
    x_e: &[f64],
    override_: Option<&T2Override>,
) -> Result<T2Description, LeafError> {
    let x = DVector::from_column_slice(x_e);
    let leaf = linalg::range(&ps.tensor(x_e)?);
    if let Some(o) = override_ {
        return from_override(x, leaf, o);
    }
    if let Some(t2) = catalogued(ps, &x, &leaf) {
        return Ok(t2);
    }
    if is_regular_point(ps, x_e, 64, 0x5eed)? {
        return Ok(regular_leaf(x, leaf));
    }
    Err(LeafError::NotCatalogued {
        structure: ps.tag.clone().unwrap_or_else(|| "user".to_string()),
    })
}

fn from_override(x: DVector<f64>, leaf: DMatrix<f64>, o: &T2Override) -> Result<T2Description, LeafError> {
    let n = x.len();
    if o.pieces.is_empty() {
        return Err(LeafError::InvalidOverride("no pieces".to_string()));
    }
    let mut pieces = Vec::new();
    for (i, (offset, tangent)) in o.pieces.iter().enumerate() {
        if offset.len() != n || tangent.iter().any(|t| t.len() != n) {
            return Err(LeafError::InvalidOverride(format!("piece {i} has wrong dimension")));
        }
        let t: Vec<DVector<f64>> = tangent.iter().map(|v| DVector::from_column_slice(v)).collect();
        pieces.push(AffinePiece::affine(
            &DVector::from_column_slice(offset),
            linalg::orthonormalize(&basis(n, &t)),
            "user piece",
        ));
    }
    let cone = TangentCone::Subspaces(pieces.iter().map(|p| p.tangent.clone()).collect());
    let t2 = T2Description::from_pieces(x, pieces, leaf, o.exact, T2Source::UserOverride, cone);
    let bad = t2.invariant_violations();
    if !bad.is_empty() {
        return Err(LeafError::InvalidOverride(bad.join("; ")));
    }
    Ok(t2)
}

/// Tame / very tame / wild classification of a covector at `x_e`.
pub fn classify_generator(t2: &T2Description, xi: &DVector<f64>) -> Result<GeneratorClassification, LeafError> {
    let tol = 1e-9 * (1.0 + xi.norm());
    let residual = if t2.leaf_tangent.ncols() == 0 {
        0.0
    } else {
        (t2.leaf_tangent.transpose() * xi).amax()
    };
    if residual > tol {
        return Err(LeafError::NotAGenerator { residual });
    }
    let proj = &t2.tangent_span * (t2.tangent_span.transpose() * xi);
    let pairing = proj.norm();
    let tame = pairing <= tol;
    let very_tame = tame
        && t2.pieces.iter().all(|p| match p.kind {
            PieceKind::Leaf => true,
            PieceKind::Affine => {
                let shift = xi.dot(&(&p.offset - &t2.base)).abs();
                let along = if p.dim() == 0 {
                    0.0
                } else {
                    (p.tangent.transpose() * xi).amax()
                };
                shift <= tol * (1.0 + (&p.offset - &t2.base).norm()) && along <= tol
            }
        });
    Ok(GeneratorClassification {
        xi: xi.clone(),
        tame,
        very_tame,
        witness: if tame { None } else { Some(&proj / pairing) },
        pairing,
    })
}

/// Basis of the wild momenta `𝔴*_μ = ann_{𝔤_μ*} 𝔱_μ`, as covectors in
/// `𝔫_μ° ≅ 𝔤_μ*`, where `𝔱_μ ⊆ 𝔤_μ` are the very tame generators at `μ`.
pub fn wild_momenta(alg: &LieAlgebra, mu: &[f64]) -> Result<WildMomenta, LeafError> {
    let ps = PoissonStructure::lie_poisson(alg.clone());
    let t2 = t2_description(&ps, mu, None)?;
    let td = alg.isotropy(mu).expect("dimension checked by t2_description");
    let n = alg.dim();
    // Very tame generators: elements of 𝔤_μ annihilating every piece.
    let mut constraints = t2.tangent_span.clone();
    for p in &t2.pieces {
        if p.kind == PieceKind::Affine {
            constraints = linalg::hstack(&constraints, &p.tangent);
            let d = &p.offset - &t2.base;
            if d.norm() > 0.0 {
                constraints = linalg::hstack(&constraints, &DMatrix::from_column_slice(n, 1, d.as_slice()));
            }
        }
    }
    // ξ = G a with Cᵀ G a = 0.
    let g = &td.g_mu;
    let tame_coords = if constraints.ncols() == 0 {
        DMatrix::identity(g.ncols(), g.ncols())
    } else {
        linalg::nullspace(&linalg::chop(&(constraints.transpose() * g), 1e-12))
    };
    let very_tame = linalg::orthonormalize(&(g * tame_coords));
    // ν ∈ 𝔫_μ° with ⟨ν, t⟩ = 0 for t in 𝔱_μ.
    let w = &td.n_mu_ann;
    let coords = if very_tame.ncols() == 0 {
        DMatrix::identity(w.ncols(), w.ncols())
    } else {
        linalg::nullspace(&linalg::chop(&(very_tame.transpose() * w), 1e-12))
    };
    let basis = linalg::orthonormalize(&(w * coords));
    Ok(WildMomenta {
        basis,
        very_tame,
        transverse: td,
        t2,
    })
}

#[derive(Debug, Clone)]
pub struct WildMomenta {
    /// Columns span `𝔴*_μ ⊆ 𝔤*`.
    pub basis: DMatrix<f64>,
    /// Columns span `𝔱_μ ⊆ 𝔤`.
    pub very_tame: DMatrix<f64>,
    pub transverse: TransverseData,
    pub t2: T2Description,
}

/// Vectors `v` in `T(T₂) ∩ T B_i` whose squares `v⊗v` generate the
/// symmetric square of that set, expressed in ambient coordinates.
fn square_generators(t2: &T2Description, piece: &AffinePiece) -> Vec<DVector<f64>> {
    let n = t2.dim();
    let mut out = Vec::new();
    let mut push_subspace = |b: &DMatrix<f64>| {
        let k = b.ncols();
        for i in 0..k {
            out.push(b.column(i).into_owned());
            for j in 0..i {
                out.push(b.column(i) + b.column(j));
            }
        }
    };
    match &t2.cone {
        TangentCone::Subspaces(subs) => {
            for s in subs {
                // s ∩ piece
                let stacked = linalg::hstack(s, &(-&piece.tangent));
                let null = linalg::nullspace(&stacked);
                let inter = s * null.rows(0, s.ncols());
                push_subspace(&linalg::orthonormalize(&inter));
            }
        }
        TangentCone::Quadric(q) => {
            let b = &piece.tangent;
            if b.ncols() == 0 {
                return out;
            }
            let qb = linalg::restrict(q, b);
            let eig = qb.clone().symmetric_eigen();
            let scale = eig.eigenvalues.amax();
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                let v = eig.eigenvectors.column(i).into_owned();
                if l > 1e-10 * scale {
                    pos.push(v / l.sqrt());
                } else if l < -1e-10 * scale {
                    neg.push(v / (-l).sqrt());
                } else {
                    out.push(b * v);
                }
            }
            if !pos.is_empty() && !neg.is_empty() {
                let mut rng = sample::rng(0xc0_5e, 0);
                for _ in 0..(4 * n * n) {
                    let a = sample::unit_direction(&mut rng, pos.len());
                    let c = sample::unit_direction(&mut rng, neg.len());
                    let mut v = DVector::zeros(b.ncols());
                    for (k, p) in pos.iter().enumerate() {
                        v += p * a[k];
                    }
                    for (k, m) in neg.iter().enumerate() {
                        v += m * c[k];
                    }
                    out.push(b * v);
                }
            }
        }
    }
    out
}

/// Whether `{v⊗v : v ∈ T(T₂) ∩ T B_i}` spans `Sym²(T B_i)`. When it does,
/// every Casimir has vanishing Hessian on the piece and Casimir terms
/// cannot help there.
pub fn check_spanning_condition(t2: &T2Description, piece_index: usize) -> bool {
    let piece = &t2.pieces[piece_index];
    let k = piece.dim();
    if k == 0 {
        return true;
    }
    let gens = square_generators(t2, piece);
    let target = k * (k + 1) / 2;
    if gens.is_empty() {
        return false;
    }
    let mut rows = DMatrix::zeros(gens.len(), target);
    for (r, v) in gens.iter().enumerate() {
        let c = piece.tangent.transpose() * v;
        let mut col = 0;
        for i in 0..k {
            for j in i..k {
                rows[(r, col)] = c[i] * c[j];
                col += 1;
            }
        }
    }
    linalg::rank(&rows) == target
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expression, Params};

    fn r3(a: &str, tag: &str, params: &Params) -> PoissonStructure {
        PoissonStructure::r3_casimir(Expression::parse(a, 3, params).unwrap())
            .unwrap()
            .with_tag(tag)
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn so3_origin_is_a_point() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::so3());
        let t2 = t2_description(&ps, &[0.0; 3], None).unwrap();
        assert_eq!(t2.pieces.len(), 1);
        assert_eq!(t2.tangent_span.ncols(), 0);
        assert!(classify_generator(&t2, &v(&[1.0, 2.0, 3.0])).unwrap().very_tame);
    }

    #[test]
    fn sl2_origin_full_piece() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::sl2());
        let t2 = t2_description(&ps, &[0.0; 3], None).unwrap();
        assert_eq!(t2.tangent_span.ncols(), 3);
        assert!(!t2.contained_exactly);
        assert_eq!(t2.pieces[0].dim(), 3);
        let c = classify_generator(&t2, &v(&[0.0, 0.0, 1.0])).unwrap();
        assert!(!c.tame && c.witness.is_some());
        assert!(classify_generator(&t2, &v(&[0.0; 3])).unwrap().tame);
    }

    #[test]
    fn threeplanes_pieces() {
        let mut p = Params::new();
        p.insert("a".into(), 0.5);
        let ps = r3("(a^2*x^2 - y^2)*y", "threeplanes", &p);
        let t2 = t2_description(&ps, &[0.0; 3], None).unwrap();
        assert_eq!(t2.pieces.len(), 3);
        assert!(t2.contained_exactly);
        assert!(t2.invariant_violations().is_empty());
        for i in 0..3 {
            assert!(check_spanning_condition(&t2, i));
        }
        assert!(check_spanning_condition(&t2.full_neighbourhood(), 0));
    }

    #[test]
    fn spanning_condition_fails_where_casimirs_help() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::sl2());
        let t2 = t2_description(&ps, &[0.0; 3], None).unwrap();
        assert!(!check_spanning_condition(&t2, 0));
        let ps = r3("(x^2 - y^2)/2", "twoplanes", &Params::new());
        let t2 = t2_description(&ps, &[0.0; 3], None).unwrap();
        assert!(check_spanning_condition(&t2, 0));
        assert!(!check_spanning_condition(&t2.full_neighbourhood(), 0));
    }

    #[test]
    fn se2_axis_classification() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::se2());
        let t2 = t2_description(&ps, &[0.0, 0.0, 2.0], None).unwrap();
        let c = classify_generator(&t2, &v(&[1.0, -0.5, 0.0])).unwrap();
        assert!(c.tame && c.very_tame);
        let c = classify_generator(&t2, &v(&[1.0, 0.0, 0.3])).unwrap();
        assert!(!c.tame);
        let w = c.witness.unwrap();
        assert!((w[2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regular_points_use_the_leaf() {
        let ps = PoissonStructure::lie_poisson(LieAlgebra::se2());
        let t2 = t2_description(&ps, &[1.0, 0.0, 0.0], None).unwrap();
        assert_eq!(t2.source, T2Source::RegularLeaf);
        assert_eq!(t2.tangent_span.ncols(), 2);
        // Generators at (1,0,0) annihilate span{e2, e3}.
        let c = classify_generator(&t2, &v(&[1.0, 0.0, 0.0])).unwrap();
        assert!(c.very_tame);
        assert!(matches!(
            classify_generator(&t2, &v(&[0.0, 1.0, 0.0])),
            Err(LeafError::NotAGenerator { .. })
        ));
    }

    #[test]
    fn unknown_singular_point() {
        let ps = r3("x*y*z", "user", &Params::new());
        assert!(matches!(
            t2_description(&ps, &[0.0; 3], None),
            Err(LeafError::NotCatalogued { .. })
        ));
        let o = T2Override {
            pieces: vec![(vec![0.0; 3], vec![vec![1.0, 0.0, 0.0]])],
            exact: true,
        };
        let t2 = t2_description(&ps, &[0.0; 3], Some(&o)).unwrap();
        assert_eq!(t2.source, T2Source::UserOverride);
    }

    #[test]
    fn wild_momenta_examples() {
        let w = wild_momenta(&LieAlgebra::se2(), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.basis.ncols(), 1);
        assert!((w.basis[(2, 0)].abs() - 1.0).abs() < 1e-12);
        let w = wild_momenta(&LieAlgebra::so3(), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.basis.ncols(), 0);
        let w = wild_momenta(&LieAlgebra::se3(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.basis.ncols(), 1);
        assert_eq!(w.very_tame.ncols(), 3);
        let w = wild_momenta(&LieAlgebra::rsdr(), &[1.0, 0.0]).unwrap();
        assert_eq!(w.basis.ncols(), 2);
    }
}
