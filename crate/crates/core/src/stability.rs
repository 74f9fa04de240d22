//! Stability criteria for equilibria of Poisson systems.
//!
//! Each criterion returns a [`StabilityVerdict`]. Only sufficient criteria
//! return `Stable`; the linearization returns evidence of
//! instability, never a proof. [`analyze`] runs the whole pipeline.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{AlgebraError, LieAlgebra};
use crate::expr::Expression;
use crate::leafspace::{
    self, AffinePiece, GeneratorClassification, LeafError, PieceKind, T2Description, T2Override, TangentCone,
};
use crate::linalg;
use crate::poisson::{HamiltonianSystem, PoissonError};
use crate::sample;

/// Relative equilibrium gate.
pub const EQUILIBRIUM_RTOL: f64 = 1e-9;
/// Relative definiteness gate for restricted Hessians.
pub const DEFINITE_RTOL: f64 = 1e-8;
/// Relative gate on the real part of linearization eigenvalues.
pub const SPECTRUM_RTOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("not an equilibrium: |X_h(x_e)| = {residual:e}")]
    NotEquilibrium { residual: f64 },
    #[error("T2 tangent span has dimension {dim}, expected 1")]
    WrongDimension { dim: usize },
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Leaf(#[from] LeafError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VerdictValue {
    Stable,
    LeafwiseStable,
    InstabilityEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PieceWitness {
    pub piece: usize,
    pub note: String,
    /// Casimir coefficients used on this piece.
    pub lambda: Vec<f64>,
    /// Spectrum of the restricted Hessian, ascending.
    pub eigenvalues: Vec<f64>,
    /// The spanning condition held, so no Casimir terms were tried.
    pub casimirs_unnecessary: bool,
    pub definite: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Witness {
    None,
    Pieces { pieces: Vec<PieceWitness> },
    Eigenvalue { re: f64, im: f64 },
    WildGenerator { xi: Vec<f64>, direction: Vec<f64>, pairing: f64 },
    Transversal { pairings: Vec<f64> },
    Hessian { eigenvalues: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityVerdict {
    pub value: VerdictValue,
    pub criterion: String,
    pub witness: Witness,
    pub notes: Vec<String>,
}

impl StabilityVerdict {
    fn new(value: VerdictValue, criterion: &str, witness: Witness) -> Self {
        Self {
            value,
            criterion: criterion.to_string(),
            witness,
            notes: Vec::new(),
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn is_stable(&self) -> bool {
        self.value == VerdictValue::Stable
    }
}

fn wild_verdict(criterion: &str, c: &GeneratorClassification) -> StabilityVerdict {
    StabilityVerdict::new(
        VerdictValue::Inconclusive,
        criterion,
        Witness::WildGenerator {
            xi: c.xi.iter().copied().collect(),
            direction: c.witness.as_ref().map(|w| w.iter().copied().collect()).unwrap_or_default(),
            pairing: c.pairing,
        },
    )
    .note("generator is wild")
}

/// Casimirs whose multiples may be added to `h`, with a coefficient box.
#[derive(Debug, Clone, PartialEq)]
pub struct CasimirFamily {
    pub basis: Vec<Expression>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CasimirFamily {
    pub fn new(basis: Vec<Expression>, bound: f64) -> Self {
        let k = basis.len();
        Self {
            basis,
            lo: vec![-bound; k],
            hi: vec![bound; k],
        }
    }

    /// The structure's Casimirs and their squares, coefficients in `[−10, 10]`.
    pub fn default_for(sys: &HamiltonianSystem) -> Self {
        let mut basis = sys.structure.casimirs.clone();
        basis.extend(sys.structure.casimirs.iter().map(|c| c.powi(2)));
        Self::new(basis, 10.0)
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), 10.0)
    }
}

/// Spectrum and definiteness of a symmetric matrix under the relative gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Definiteness {
    pub eigenvalues: Vec<f64>,
    pub definite: bool,
    /// `min |eig| / (1 + ‖H‖)` when all eigenvalues share a sign, else 0.
    pub margin: f64,
}

pub fn definiteness(h: &DMatrix<f64>) -> Definiteness {
    let ev = linalg::symmetric_eigenvalues(h);
    if ev.is_empty() {
        return Definiteness {
            eigenvalues: ev,
            definite: true,
            margin: f64::INFINITY,
        };
    }
    let norm = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let same_sign = ev.iter().all(|v| *v > 0.0) || ev.iter().all(|v| *v < 0.0);
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let margin = if same_sign { min / (1.0 + norm) } else { 0.0 };
    Definiteness {
        eigenvalues: ev,
        definite: same_sign && min > DEFINITE_RTOL * (1.0 + norm),
        margin,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCheck {
    pub residual: f64,
    pub scale: f64,
    pub generator: DVector<f64>,
    pub is_equilibrium: bool,
}

/// `|X_h(x_e)|` and the generator `dh(x_e)`.
pub fn equilibrium_and_generator(sys: &HamiltonianSystem, x_e: &[f64]) -> Result<EquilibriumCheck, StabilityError> {
    let dh = sys.h.gradient(x_e)?;
    let pi = sys.structure.tensor(x_e)?;
    let residual = pi.tr_mul(&dh).norm();
    let scale = 1.0 + dh.norm() * (1.0 + pi.norm());
    Ok(EquilibriumCheck {
        residual,
        scale,
        is_equilibrium: residual <= EQUILIBRIUM_RTOL * scale,
        generator: dh,
    })
}

/// Stable when `dh(x_e)` is nonzero on a one-dimensional tangent span.
pub fn one_dim_t2_test(sys: &HamiltonianSystem, x_e: &[f64], t2: &T2Description) -> Result<StabilityVerdict, StabilityError> {
    let dim = t2.tangent_span.ncols();
    if dim != 1 {
        return Err(StabilityError::WrongDimension { dim });
    }
    const NAME: &str = "one-dimensional T2-set transversality";
    let dh = sys.h.gradient(x_e)?;
    let pairing = dh.dot(&t2.tangent_span.column(0));
    let witness = Witness::Transversal { pairings: vec![pairing] };
    if !t2.contained_exactly {
        return Ok(StabilityVerdict::new(VerdictValue::Inconclusive, NAME, witness).note("T2 pieces are not exact"));
    }
    let scale = 1.0 + dh.norm();
    let value = if pairing.abs() > EQUILIBRIUM_RTOL * scale {
        VerdictValue::Stable
    } else {
        VerdictValue::Inconclusive
    };
    Ok(StabilityVerdict::new(value, NAME, witness))
}

/// Stable when `ann(dh(x_e))` meets the tangent cone of the T₂-set only at
/// zero, so that `x_e` is isolated in its energy level within the T₂-set.
pub fn cone_transversality_test(sys: &HamiltonianSystem, x_e: &[f64], t2: &T2Description) -> Result<StabilityVerdict, StabilityError> {
    const NAME: &str = "T2-set isolated in the energy level";
    let dh = sys.h.gradient(x_e)?;
    let tol = EQUILIBRIUM_RTOL * (1.0 + dh.norm());
    match &t2.cone {
        TangentCone::Subspaces(subs) => {
            let mut pairings = Vec::new();
            let mut ok = true;
            for s in subs {
                match s.ncols() {
                    0 => {}
                    1 => {
                        let p = dh.dot(&s.column(0));
                        pairings.push(p);
                        ok &= p.abs() > tol;
                    }
                    _ => ok = false,
                }
            }
            let value = if ok { VerdictValue::Stable } else { VerdictValue::Inconclusive };
            Ok(StabilityVerdict::new(value, NAME, Witness::Transversal { pairings }))
        }
        TangentCone::Quadric(q) => {
            if dh.norm() <= tol {
                return Ok(StabilityVerdict::new(VerdictValue::Inconclusive, NAME, Witness::None).note("dh(x_e) = 0"));
            }
            let row = DMatrix::from_row_slice(1, dh.len(), dh.as_slice());
            let ann = linalg::nullspace(&row);
            let d = definiteness(&linalg::restrict(q, &ann));
            let value = if d.definite { VerdictValue::Stable } else { VerdictValue::Inconclusive };
            Ok(StabilityVerdict::new(value, NAME, Witness::Hessian { eigenvalues: d.eigenvalues })
                .note("cone form restricted to ann dh(x_e)"))
        }
    }
}

/// The Hessian of `h` restricted to the symplectic leaf at an equilibrium,
/// in an orthonormal basis of the leaf tangent. Includes the curvature term
/// `dh·γ''` of curves in the leaf.
pub fn leafwise_hessian(sys: &HamiltonianSystem, x_e: &[f64]) -> Result<DMatrix<f64>, StabilityError> {
    let n = sys.dim();
    let d = sys.h.derive(x_e)?;
    let pi = sys.structure.tensor(x_e)?;
    let dpi = sys.structure.tensor_derivatives(x_e)?;
    // v_i = X_{x_i}(x_e) is row i of Π; V has the v_i as columns.
    let v = pi.transpose();
    let u = linalg::range(&v);
    if u.ncols() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // (DX_i v_j)_k = Σ_l ∂_l Π_ik v_j[l]
    let mut q = &v.transpose() * &d.hessian * &v;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                let dx: f64 = (0..n).map(|l| dpi[l][(i, k)] * v[(l, j)]).sum();
                s += d.gradient[k] * dx;
            }
            q[(i, j)] += s;
        }
    }
    let q = (&q + q.transpose()) * 0.5;
    let s = linalg::pinv(&v) * &u;
    Ok(linalg::restrict(&q, &s))
}

struct PieceProblem {
    h0: DMatrix<f64>,
    dirs: Vec<DMatrix<f64>>,
    /// λ = base + map · t
    base: DVector<f64>,
    map: DMatrix<f64>,
    t_lo: Vec<f64>,
    t_hi: Vec<f64>,
}

impl PieceProblem {
    fn at(&self, t: &[f64]) -> DMatrix<f64> {
        let mut h = self.h0.clone();
        for (d, ti) in self.dirs.iter().zip(t) {
            h += d * *ti;
        }
        h
    }

    fn lambda(&self, t: &[f64]) -> DVector<f64> {
        &self.base + &self.map * DVector::from_column_slice(t)
    }
}

/// Exact 1-D search: the sign pattern of `H(t) = A + tB` only changes where
/// `det H(t) = 0`, so testing one point per interval between real roots is
/// exhaustive.
fn pencil_search(a: &DMatrix<f64>, b: &DMatrix<f64>, lo: f64, hi: f64) -> (f64, Definiteness) {
    let k = a.nrows();
    let mut roots = Vec::new();
    if b.amax() > 0.0 {
        let shifts = [0.0, 0.318_309_886_183_790_7, -0.577_215_664_901_532_9, 1.414_213_562_373_095];
        let s = shifts
            .iter()
            .copied()
            .map(|s| (s, linalg::condition_number(&(a + b * s))))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if let Some(inv) = (a + b * s.0).try_inverse() {
            for mu in linalg::eigenvalues(&(inv * b)) {
                if mu.re.abs() > 1e-14 && mu.im.abs() <= 1e-9 * mu.re.hypot(mu.im) {
                    let t = s.0 - 1.0 / mu.re;
                    if t > lo && t < hi {
                        roots.push(t);
                    }
                }
            }
        }
        let _ = k;
    }
    roots.push(lo);
    roots.push(hi);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    let mut candidates: Vec<f64> = roots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if lo <= 0.0 && 0.0 <= hi {
        candidates.push(0.0);
    }
    let mut best = (0.0, definiteness(&(a + b * 0.0)));
    best.1.margin = f64::NEG_INFINITY;
    for t in candidates {
        let d = definiteness(&(a + b * t));
        if d.definite && (!best.1.definite || d.margin > best.1.margin) || (!best.1.definite && d.margin > best.1.margin) {
            best = (t, d);
        }
    }
    best
}

fn search(problem: &PieceProblem, seed: u64) -> (Vec<f64>, Definiteness) {
    let m = problem.dirs.len();
    if m == 0 {
        return (Vec::new(), definiteness(&problem.h0));
    }
    if m == 1 {
        let (t, d) = pencil_search(&problem.h0, &problem.dirs[0], problem.t_lo[0], problem.t_hi[0]);
        return (vec![t], d);
    }
    let sweep = |mut t: Vec<f64>| {
        let mut d = definiteness(&problem.at(&t));
        for _round in 0..3 {
            for j in 0..m {
                let mut others = t.clone();
                others[j] = 0.0;
                let a = problem.at(&others);
                let (tj, dj) = pencil_search(&a, &problem.dirs[j], problem.t_lo[j], problem.t_hi[j]);
                if dj.margin > d.margin || (dj.definite && !d.definite) {
                    t[j] = tj;
                    d = dj;
                }
            }
            if d.definite {
                break;
            }
        }
        (t, d)
    };
    let mut best = sweep(vec![0.0; m]);
    if best.1.definite {
        return best;
    }
    for start in 0..64u64 {
        let mut r = sample::rng(seed, start);
        let t0 = sample::in_box(&mut r, &problem.t_lo, &problem.t_hi);
        let cand = sweep(t0);
        if cand.1.margin > best.1.margin || (cand.1.definite && !best.1.definite) {
            best = cand;
        }
        if best.1.definite {
            break;
        }
    }
    best
}

/// Builds the affine λ problem on an affine piece: criticality of
/// `h + Σλ C` along the piece fixes an affine subspace of coefficients.
fn piece_problem(
    b: &DMatrix<f64>,
    dh: &DVector<f64>,
    d2h: &DMatrix<f64>,
    casimirs: &[(DVector<f64>, DMatrix<f64>)],
    family: &CasimirFamily,
) -> Option<PieceProblem> {
    let k = b.ncols();
    let m = casimirs.len();
    let h0 = linalg::restrict(d2h, b);
    let hc: Vec<DMatrix<f64>> = casimirs.iter().map(|(_, h)| linalg::restrict(h, b)).collect();
    let gscale = 1.0 + dh.norm() + casimirs.iter().map(|(g, _)| g.norm()).sum::<f64>();
    let rhs = -(b.transpose() * dh);
    let mut kmat = DMatrix::zeros(k, m);
    for (j, (g, _)) in casimirs.iter().enumerate() {
        kmat.set_column(j, &(b.transpose() * g));
    }
    let (base, map) = if k == 0 || m == 0 {
        if rhs.amax() > EQUILIBRIUM_RTOL * gscale {
            return None;
        }
        (DVector::zeros(m), DMatrix::identity(m, m))
    } else {
        let base = linalg::lstsq(&kmat, &rhs);
        if (&kmat * &base - &rhs).amax() > EQUILIBRIUM_RTOL * gscale {
            return None;
        }
        (base, linalg::nullspace(&kmat))
    };
    let h0 = hc.iter().zip(base.iter()).fold(h0, |acc, (h, l)| acc + h * *l);
    // Drop directions that do not move the restricted Hessian.
    let hscale = 1.0 + h0.amax() + hc.iter().map(|h| h.amax()).fold(0.0, f64::max);
    let mut dirs = Vec::new();
    let mut cols = Vec::new();
    for c in 0..map.ncols() {
        let d = hc.iter().zip(map.column(c).iter()).fold(DMatrix::zeros(k, k), |acc, (h, w)| acc + h * *w);
        if d.amax() > 1e-12 * hscale {
            dirs.push(d);
            cols.push(map.column(c).into_owned());
        }
    }
    let map = linalg::columns(m, &cols);
    // Coefficient box mapped to t: take, for each t_j, the bounds from the
    // coordinates it moves with the others at zero.
    let mut t_lo = Vec::new();
    let mut t_hi = Vec::new();
    for c in 0..map.ncols() {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..m {
            let w = map[(i, c)];
            if w.abs() > 1e-14 {
                let (a, bnd) = ((family.lo[i] - base[i]) / w, (family.hi[i] - base[i]) / w);
                lo = lo.max(a.min(bnd));
                hi = hi.min(a.max(bnd));
            }
        }
        t_lo.push(lo);
        t_hi.push(hi);
    }
    Some(PieceProblem {
        h0,
        dirs,
        base,
        map,
        t_lo,
        t_hi,
    })
}

/// Energy-Casimir test on a smoothing of the T₂-set: for every piece, some
/// `h + Σλ_k C_k` must have a definite Hessian restricted to the piece.
pub fn t2_energy_casimir(
    sys: &HamiltonianSystem,
    x_e: &[f64],
    t2: &T2Description,
    family: &CasimirFamily,
) -> Result<StabilityVerdict, StabilityError> {
    const NAME: &str = "T2 energy-Casimir";
    let d = sys.h.derive(x_e)?;
    let class = leafspace::classify_generator(t2, &d.gradient)?;
    if !class.tame {
        return Ok(wild_verdict(NAME, &class));
    }
    let casimirs = family
        .basis
        .iter()
        .map(|c| c.derive(x_e).map(|dc| (dc.gradient, dc.hessian)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut witnesses = Vec::new();
    let mut failed = None;
    for (i, piece) in t2.pieces.iter().enumerate() {
        let w = match piece.kind {
            PieceKind::Leaf => {
                let q = leafwise_hessian(sys, x_e)?;
                let def = definiteness(&q);
                PieceWitness {
                    piece: i,
                    note: piece.note.clone(),
                    lambda: vec![0.0; casimirs.len()],
                    eigenvalues: def.eigenvalues,
                    casimirs_unnecessary: true,
                    definite: def.definite,
                }
            }
            PieceKind::Affine => affine_piece_witness(i, piece, t2, &d.gradient, &d.hessian, &casimirs, family),
        };
        if !w.definite && failed.is_none() {
            failed = Some(i);
        }
        witnesses.push(w);
    }
    let value = if failed.is_none() { VerdictValue::Stable } else { VerdictValue::Inconclusive };
    let mut v = StabilityVerdict::new(value, NAME, Witness::Pieces { pieces: witnesses });
    if let Some(i) = failed {
        v = v.note(format!("no definite restricted Hessian on piece {i} ({})", t2.pieces[i].note));
    }
    if t2.pieces.len() == 1 && t2.pieces[0].dim() == t2.dim() {
        v = v.note("single full-neighbourhood piece: standard energy-Casimir method");
    }
    Ok(v)
}

fn affine_piece_witness(
    i: usize,
    piece: &AffinePiece,
    t2: &T2Description,
    dh: &DVector<f64>,
    d2h: &DMatrix<f64>,
    casimirs: &[(DVector<f64>, DMatrix<f64>)],
    family: &CasimirFamily,
) -> PieceWitness {
    let spanning = leafspace::check_spanning_condition(t2, i);
    let m = casimirs.len();
    let used: &[(DVector<f64>, DMatrix<f64>)] = if spanning { &[] } else { casimirs };
    let fam = if spanning { CasimirFamily::empty() } else { family.clone() };
    let mut w = PieceWitness {
        piece: i,
        note: piece.note.clone(),
        lambda: vec![0.0; m],
        eigenvalues: Vec::new(),
        casimirs_unnecessary: spanning,
        definite: false,
    };
    let Some(problem) = piece_problem(&piece.tangent, dh, d2h, used, &fam) else {
        w.note = format!("{}: h + C not critical on the piece", piece.note);
        return w;
    };
    let (t, def) = search(&problem, 0x00ca_5e42 ^ i as u64);
    if !spanning {
        w.lambda = problem.lambda(&t).iter().copied().collect();
    }
    w.eigenvalues = def.eigenvalues;
    w.definite = def.definite;
    w
}

/// Complex eigenvalues of the linearization and any instability evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub verdict: StabilityVerdict,
}

pub fn linearization_spectrum(sys: &HamiltonianSystem, x_e: &[f64]) -> Result<Spectrum, StabilityError> {
    const NAME: &str = "linearization spectrum";
    let j = sys.jacobian(x_e)?;
    let n = j.nrows();
    let scale = 1.0 + j.norm();
    let ev: Vec<(f64, f64)> = linalg::eigenvalues(&j).iter().map(|c| (c.re, c.im)).collect();
    let worst = ev
        .iter()
        .copied()
        .fold(None::<(f64, f64)>, |m, e| match m {
            Some(b) if b.0 >= e.0 => Some(b),
            _ => Some(e),
        });
    let mut verdict = match worst {
        Some((re, im)) if re > SPECTRUM_RTOL * scale => {
            StabilityVerdict::new(VerdictValue::InstabilityEvidence, NAME, Witness::Eigenvalue { re, im })
        }
        Some((re, im)) => StabilityVerdict::new(VerdictValue::Inconclusive, NAME, Witness::Eigenvalue { re, im }),
        None => StabilityVerdict::new(VerdictValue::Inconclusive, NAME, Witness::None),
    };
    // Defective eigenvalues on the imaginary axis signal polynomial growth.
    let tol = 1e-6 * scale;
    let mut seen: Vec<f64> = Vec::new();
    for &(re, im) in &ev {
        if re.abs() > tol || im < -tol || seen.iter().any(|s| (s - im).abs() <= tol) {
            continue;
        }
        seen.push(im);
        let alg = ev
            .iter()
            .filter(|(r, i)| r.abs() <= tol && (i - im).abs() <= 1e-4 * scale.sqrt())
            .count();
        let omega = if im.abs() <= tol { 0.0 } else { im };
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&j);
        big.view_mut((n, n), (n, n)).copy_from(&j);
        for k in 0..n {
            big[(k, n + k)] = omega;
            big[(n + k, k)] = -omega;
        }
        let nullity = 2 * n - rank_loose(&big);
        let geo = if omega == 0.0 { nullity / 2 } else { nullity / 2 };
        if geo < alg {
            verdict = verdict.note(format!(
                "eigenvalue {omega}i has algebraic multiplicity {alg} but geometric multiplicity {geo} (Jordan block: secular growth of the linearization)"
            ));
        }
    }
    Ok(Spectrum { eigenvalues: ev, verdict })
}

fn rank_loose(a: &DMatrix<f64>) -> usize {
    let sv = linalg::singular_values(a);
    let max = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > 1e-8 * (1.0 + max)).count()
}

fn leafwise_verdict(sys: &HamiltonianSystem, x_e: &[f64]) -> Result<StabilityVerdict, StabilityError> {
    const NAME: &str = "leafwise Hessian";
    let q = leafwise_hessian(sys, x_e)?;
    let d = definiteness(&q);
    let value = if d.definite { VerdictValue::LeafwiseStable } else { VerdictValue::Inconclusive };
    let mut v = StabilityVerdict::new(value, NAME, Witness::Hessian { eigenvalues: d.eigenvalues });
    if q.nrows() == 0 {
        v = v.note("the leaf through x_e is a point");
    }
    Ok(v)
}

/// Reduced energy-momentum test at a relative equilibrium of a
/// left-invariant system, carried out on `𝔤*`.
///
/// The test space is `𝔫_μ × 𝔴*_μ`, parameterized by
/// `(η, ν) ↦ Ad*_{exp η}(μ_e + ν)`; the form is the Hessian of
/// `h(Ad*_{exp η}(μ_e + ν)) − ⟨μ_e + ν, ξ_e⟩`, which includes the orbit
/// curvature term `⟨ad*_η ad*_η' μ_e, ξ_e⟩`.
pub fn reduced_energy_momentum(alg: &LieAlgebra, h: &Expression, mu_e: &[f64]) -> Result<StabilityVerdict, StabilityError> {
    const NAME: &str = "reduced energy-momentum";
    let n = alg.dim();
    let d = h.derive(mu_e)?;
    let xi = d.gradient.clone();
    let drift = alg.ad_star(xi.as_slice(), mu_e)?;
    let scale = 1.0 + xi.norm() * (1.0 + mu_e.iter().map(|v| v * v).sum::<f64>().sqrt());
    if drift.norm() > EQUILIBRIUM_RTOL * scale {
        return Err(StabilityError::NotEquilibrium { residual: drift.norm() });
    }
    let wild = leafspace::wild_momenta(alg, mu_e)?;
    let t = &wild.very_tame;
    let outside = &xi - t * (t.transpose() * &xi);
    if outside.norm() > EQUILIBRIUM_RTOL * (1.0 + xi.norm()) {
        let dir = &outside / outside.norm();
        return Ok(StabilityVerdict::new(
            VerdictValue::Inconclusive,
            NAME,
            Witness::WildGenerator {
                xi: xi.iter().copied().collect(),
                direction: dir.iter().copied().collect(),
                pairing: outside.norm(),
            },
        )
        .note("generator is not very tame"));
    }
    let td = &wild.transverse;
    let nb = &td.n_mu;
    let wb = &wild.basis;
    let (p, q) = (nb.ncols(), wb.ncols());
    let mu = DVector::from_column_slice(mu_e);
    let ad = |eta: &DVector<f64>, m: &DVector<f64>| alg.ad_star(eta.as_slice(), m.as_slice()).expect("dimension");
    let orbit: Vec<DVector<f64>> = (0..p).map(|a| ad(&nb.column(a).into_owned(), &mu)).collect();
    let mut g = DMatrix::zeros(p + q, p + q);
    for a in 0..p {
        let ea = nb.column(a).into_owned();
        for b in 0..p {
            let eb = nb.column(b).into_owned();
            let curv = ad(&ea, &orbit[b]) + ad(&eb, &orbit[a]);
            g[(a, b)] = orbit[a].dot(&(&d.hessian * &orbit[b])) + 0.5 * curv.dot(&xi);
        }
        for c in 0..q {
            let nu = wb.column(c).into_owned();
            let v = orbit[a].dot(&(&d.hessian * &nu)) + ad(&ea, &nu).dot(&xi);
            g[(a, p + c)] = v;
            g[(p + c, a)] = v;
        }
    }
    for c in 0..q {
        for e in 0..q {
            g[(p + c, p + e)] = wb.column(c).dot(&(&d.hessian * wb.column(e)));
        }
    }
    let def = definiteness(&g);
    let value = if def.definite { VerdictValue::Stable } else { VerdictValue::Inconclusive };
    let _ = n;
    Ok(StabilityVerdict::new(value, NAME, Witness::Hessian { eigenvalues: def.eigenvalues })
        .note(format!("dim n_mu = {p}, dim wild momenta = {q}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EuclideanGroup {
    SE2,
    SE3,
}

impl EuclideanGroup {
    pub fn algebra(self) -> LieAlgebra {
        match self {
            Self::SE2 => LieAlgebra::se2(),
            Self::SE3 => LieAlgebra::se3(),
        }
    }

    /// Index ranges of the rotational and translational blocks.
    pub fn blocks(self) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
        match self {
            Self::SE2 => (2..3, 0..2),
            Self::SE3 => (0..3, 3..6),
        }
    }
}

/// Relative equilibria of `SE(2)`/`SE(3)` systems: the regular case when the
/// translational momentum is nonzero, else the tame gate `ξ^r = 0` followed
/// by the wild-momenta test.
pub fn euclidean_criteria(group: EuclideanGroup, h: &Expression, mu_e: &[f64]) -> Result<StabilityVerdict, StabilityError> {
    let alg = group.algebra();
    if mu_e.len() != alg.dim() {
        return Err(StabilityError::Unsupported(format!("momentum has length {}", mu_e.len())));
    }
    let (rot, tr) = group.blocks();
    let ma: f64 = mu_e[tr].iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = 1.0 + mu_e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ma > 1e-12 * scale {
        let td = alg.isotropy(mu_e)?;
        let v = reduced_energy_momentum(&alg, h, mu_e)?;
        return Ok(v.note(format!(
            "{group:?} regular case (translational momentum nonzero), dim g_mu = {}",
            td.isotropy_dim()
        )));
    }
    let xi = h.gradient(mu_e)?;
    let xr: f64 = xi.as_slice()[rot].iter().map(|v| v * v).sum::<f64>().sqrt();
    if xr > EQUILIBRIUM_RTOL * (1.0 + xi.norm()) {
        let mut dir = DVector::zeros(alg.dim());
        for i in group.blocks().0 {
            dir[i] = xi[i] / xr;
        }
        return Ok(StabilityVerdict::new(
            VerdictValue::Inconclusive,
            "reduced energy-momentum",
            Witness::WildGenerator {
                xi: xi.iter().copied().collect(),
                direction: dir.iter().copied().collect(),
                pairing: xr,
            },
        )
        .note(format!("{group:?} nonregular case: rotational generator is nonzero, so the generator is wild")));
    }
    let v = reduced_energy_momentum(&alg, h, mu_e)?;
    Ok(v.note(format!("{group:?} nonregular case (translational momentum zero)")))
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub t2_override: Option<T2Override>,
    pub family: Option<CasimirFamily>,
    /// Also run the single-piece (`B = U`) energy-Casimir variant.
    pub single_piece: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub verdict: StabilityVerdict,
    pub equilibrium: EquilibriumCheck,
    pub classification: Option<GeneratorClassification>,
    pub t2: Option<T2Description>,
    pub spectrum: Vec<(f64, f64)>,
    pub steps: Vec<StabilityVerdict>,
}

/// Runs equilibrium check, generator classification, the T₂ tests, the
/// energy-Casimir search, the spectrum, the leafwise Hessian and (for
/// Lie-Poisson structures) the reduced energy-momentum test.
pub fn analyze(sys: &HamiltonianSystem, x_e: &[f64], opts: &AnalysisOptions) -> Result<Analysis, StabilityError> {
    let eq = equilibrium_and_generator(sys, x_e)?;
    if !eq.is_equilibrium {
        return Err(StabilityError::NotEquilibrium { residual: eq.residual });
    }
    let mut steps = Vec::new();
    let mut notes = Vec::new();
    let t2 = match leafspace::t2_description(&sys.structure, x_e, opts.t2_override.as_ref()) {
        Ok(t) => Some(t),
        Err(LeafError::NotCatalogued { structure }) => {
            notes.push(format!("no T2 data for `{structure}` at x_e; T2 criteria skipped"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut classification = None;
    if let Some(t2) = &t2 {
        let c = leafspace::classify_generator(t2, &eq.generator)?;
        let span = t2.tangent_span.ncols();
        if span == 0 && t2.contained_exactly {
            steps.push(StabilityVerdict::new(VerdictValue::Stable, "isolated point of the T2-set", Witness::None));
        } else if !c.tame {
            steps.push(wild_verdict("generator classification", &c));
            if span == 1 && t2.contained_exactly {
                steps.push(one_dim_t2_test(sys, x_e, t2)?);
            } else {
                steps.push(cone_transversality_test(sys, x_e, t2)?);
            }
        } else {
            let family = opts.family.clone().unwrap_or_else(|| CasimirFamily::default_for(sys));
            steps.push(t2_energy_casimir(sys, x_e, t2, &family)?);
            if opts.single_piece {
                let mut single = t2_energy_casimir(sys, x_e, &t2.full_neighbourhood(), &family)?;
                single.criterion = "energy-Casimir (single piece B = U)".to_string();
                steps.push(single);
            }
        }
        classification = Some(c);
    }
    let spectrum = linearization_spectrum(sys, x_e)?;
    steps.push(spectrum.verdict.clone());
    steps.push(leafwise_verdict(sys, x_e)?);
    if let Some(alg) = sys.structure.algebra() {
        match reduced_energy_momentum(alg, &sys.h, x_e) {
            Ok(v) => steps.push(v),
            Err(e) => notes.push(format!("reduced energy-momentum skipped: {e}")),
        }
    }
    let pick = |value: VerdictValue| steps.iter().find(|s| s.value == value).cloned();
    let stable = steps
        .iter()
        .find(|s| s.value == VerdictValue::Stable && !s.criterion.contains("single piece"))
        .cloned();
    let evidence = pick(VerdictValue::InstabilityEvidence);
    let mut verdict = if let Some(mut s) = stable {
        if evidence.is_some() {
            s.notes.push("linearization shows eigenvalues with positive real part".to_string());
        }
        s
    } else if let Some(e) = evidence {
        e
    } else if let Some(l) = pick(VerdictValue::LeafwiseStable) {
        l
    } else {
        StabilityVerdict::new(VerdictValue::Inconclusive, "none", Witness::None)
    };
    verdict.notes.extend(notes);
    Ok(Analysis {
        verdict,
        equilibrium: eq,
        classification,
        t2,
        spectrum: spectrum.eigenvalues,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::poisson::PoissonStructure;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn r3_sys(a: &str, tag: &str, h: &str, p: &Params) -> HamiltonianSystem {
        let ps = PoissonStructure::r3_casimir(Expression::parse(a, 3, p).unwrap()).unwrap().with_tag(tag);
        HamiltonianSystem::new(ps, Expression::parse(h, 3, p).unwrap()).unwrap()
    }

    fn lp_sys(alg: LieAlgebra, h: &str, p: &Params) -> HamiltonianSystem {
        let ps = PoissonStructure::lie_poisson(alg);
        let n = ps.dim;
        HamiltonianSystem::new(ps, Expression::parse(h, n, p).unwrap()).unwrap()
    }

    #[test]
    fn definiteness_gate() {
        assert!(definiteness(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).definite);
        assert!(!definiteness(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).definite);
        assert!(!definiteness(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))).definite);
        assert!(definiteness(&DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]))).definite);
        assert!(definiteness(&DMatrix::zeros(0, 0)).definite);
    }

    #[test]
    fn equilibrium_examples() {
        let s = lp_sys(LieAlgebra::sl2(), "3*x - y + z^2", &Params::new());
        assert_eq!(equilibrium_and_generator(&s, &[0.0; 3]).unwrap().residual, 0.0);
        let s = lp_sys(LieAlgebra::so3(), "(x^2+y^2+z^2)/2", &Params::new());
        let eq = equilibrium_and_generator(&s, &[1.0, 0.0, 0.0]).unwrap();
        assert!(eq.is_equilibrium);
        assert_eq!(eq.generator.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn twoplanes_needs_no_casimirs_when_a_exceeds_b() {
        let p = params(&[("a", 2.0), ("b", 1.0)]);
        let s = r3_sys("(x^2 - y^2)/2", "twoplanes", "a*x^2 - b*y^2 + z^2", &p);
        let t2 = leafspace::t2_description(&s.structure, &[0.0; 3], None).unwrap();
        let v = t2_energy_casimir(&s, &[0.0; 3], &t2, &CasimirFamily::default_for(&s)).unwrap();
        assert!(v.is_stable());
        let Witness::Pieces { pieces } = v.witness else { panic!() };
        assert!(pieces.iter().all(|p| p.casimirs_unnecessary));
    }

    #[test]
    fn sl2_quadratic_uses_the_casimir() {
        let p = params(&[("a", 1.0), ("b", 1.0), ("c", 0.0)]);
        let s = lp_sys(LieAlgebra::sl2(), "a*x^2 + b*y^2 + c*z^2", &p);
        let t2 = leafspace::t2_description(&s.structure, &[0.0; 3], None).unwrap();
        let v = t2_energy_casimir(&s, &[0.0; 3], &t2, &CasimirFamily::default_for(&s)).unwrap();
        assert!(v.is_stable(), "{v:?}");
        let Witness::Pieces { pieces } = v.witness else { panic!() };
        // h + λ·A = (1+λ/2)(x²+y²) − (λ/2) z² is definite for λ in (−2, 0).
        assert!(pieces[0].lambda[0] > -2.0 && pieces[0].lambda[0] < 0.0);
        // c < −a, c < −b: negative definite for λ in (2c, −2).
        let p = params(&[("a", 1.0), ("b", 1.0), ("c", -1.5)]);
        let s = lp_sys(LieAlgebra::sl2(), "a*x^2 + b*y^2 + c*z^2", &p);
        let v = t2_energy_casimir(&s, &[0.0; 3], &t2, &CasimirFamily::default_for(&s)).unwrap();
        assert!(v.is_stable());
        let p = params(&[("a", 1.0), ("b", -1.0), ("c", 0.0)]);
        let s = lp_sys(LieAlgebra::sl2(), "a*x^2 + b*y^2 + c*z^2", &p);
        let v = t2_energy_casimir(&s, &[0.0; 3], &t2, &CasimirFamily::default_for(&s)).unwrap();
        assert!(!v.is_stable());
    }

    #[test]
    fn wild_generators_are_refused() {
        let s = lp_sys(LieAlgebra::sl2(), "x + 2*z", &Params::new());
        let t2 = leafspace::t2_description(&s.structure, &[0.0; 3], None).unwrap();
        let v = t2_energy_casimir(&s, &[0.0; 3], &t2, &CasimirFamily::default_for(&s)).unwrap();
        assert_eq!(v.value, VerdictValue::Inconclusive);
        assert!(matches!(v.witness, Witness::WildGenerator { .. }));
        assert!(matches!(one_dim_t2_test(&s, &[0.0; 3], &t2), Err(StabilityError::WrongDimension { dim: 3 })));
        assert!(cone_transversality_test(&s, &[0.0; 3], &t2).unwrap().is_stable());
        let s = lp_sys(LieAlgebra::sl2(), "2*x + z", &Params::new());
        assert!(!cone_transversality_test(&s, &[0.0; 3], &t2).unwrap().is_stable());
    }

    #[test]
    fn sl2_spectrum() {
        let s = lp_sys(LieAlgebra::sl2(), "2*x + z", &Params::new());
        let sp = linearization_spectrum(&s, &[0.0; 3]).unwrap();
        assert_eq!(sp.verdict.value, VerdictValue::InstabilityEvidence);
        let Witness::Eigenvalue { re, .. } = sp.verdict.witness else { panic!() };
        assert!((re - 3f64.sqrt()).abs() < 1e-12);
        let s = lp_sys(LieAlgebra::sl2(), "x + 2*z", &Params::new());
        let sp = linearization_spectrum(&s, &[0.0; 3]).unwrap();
        assert_eq!(sp.verdict.value, VerdictValue::Inconclusive);
    }

    #[test]
    fn se2_axis_wild_and_tame() {
        let s = lp_sys(LieAlgebra::se2(), "z + (x^2+y^2)/2", &Params::new());
        let t2 = leafspace::t2_description(&s.structure, &[0.0, 0.0, 1.0], None).unwrap();
        assert!(one_dim_t2_test(&s, &[0.0, 0.0, 1.0], &t2).unwrap().is_stable());
        let s = lp_sys(LieAlgebra::se2(), "z^2/2", &Params::new());
        let t2 = leafspace::t2_description(&s.structure, &[0.0; 3], None).unwrap();
        assert_eq!(one_dim_t2_test(&s, &[0.0; 3], &t2).unwrap().value, VerdictValue::Inconclusive);
    }

    #[test]
    fn rigid_body_axes() {
        let p = params(&[("i1", 1.0), ("i2", 2.0), ("i3", 3.0)]);
        let h = "(x^2/i1 + y^2/i2 + z^2/i3)/2";
        let alg = LieAlgebra::so3();
        let e = Expression::parse(h, 3, &p).unwrap();
        assert!(reduced_energy_momentum(&alg, &e, &[0.0, 0.0, 1.0]).unwrap().is_stable());
        assert!(reduced_energy_momentum(&alg, &e, &[1.0, 0.0, 0.0]).unwrap().is_stable());
        assert!(!reduced_energy_momentum(&alg, &e, &[0.0, 1.0, 0.0]).unwrap().is_stable());
        // Oracle: the restricted form on the long axis is diag(1/I1 − 1/I3, 1/I2 − 1/I3).
        let Witness::Hessian { eigenvalues } = reduced_energy_momentum(&alg, &e, &[0.0, 0.0, 1.0]).unwrap().witness else { panic!() };
        let mut expected = [1.0 - 1.0 / 3.0, 0.5 - 1.0 / 3.0];
        expected.sort_by(f64::total_cmp);
        assert!((eigenvalues[0] - expected[0]).abs() < 1e-12 && (eigenvalues[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn rsdr_generator_is_wild() {
        let e = Expression::parse("y", 2, &Params::new()).unwrap();
        let v = reduced_energy_momentum(&LieAlgebra::rsdr(), &e, &[1.0, 0.0]).unwrap();
        assert!(matches!(v.witness, Witness::WildGenerator { .. }));
    }

    #[test]
    fn euclidean_cases() {
        let e = Expression::parse("(x^2+y^2)/2 + z^2/2", 3, &Params::new()).unwrap();
        let v = euclidean_criteria(EuclideanGroup::SE2, &e, &[0.0, 0.0, 0.0]).unwrap();
        assert!(v.is_stable(), "{v:?}");
        let e3 = Expression::parse("(x1^2+x2^2+x3^2)/2 + (x4^2+x5^2+x6^2)/2", 6, &Params::new()).unwrap();
        let v = euclidean_criteria(EuclideanGroup::SE3, &e3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(v.witness, Witness::WildGenerator { .. }));
        let e3 = Expression::parse("(x4^2+x5^2+x6^2)/2 + x3^2", 6, &Params::new()).unwrap();
        let v = euclidean_criteria(EuclideanGroup::SE3, &e3, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(v.notes.iter().any(|n| n.contains("dim g_mu = 2")), "{v:?}");
    }

    #[test]
    fn analyze_pipeline() {
        let s = lp_sys(LieAlgebra::so3(), "x^3 - y*z", &Params::new());
        assert!(analyze(&s, &[0.0; 3], &AnalysisOptions::default()).unwrap().verdict.is_stable());
        let p = params(&[("a", 1.0)]);
        let ps = PoissonStructure::lie_poisson(LieAlgebra::sl2());
        let s = HamiltonianSystem::new(ps, Expression::parse("2*x + z", 3, &p).unwrap()).unwrap();
        assert_eq!(analyze(&s, &[0.0; 3], &AnalysisOptions::default()).unwrap().verdict.value, VerdictValue::InstabilityEvidence);
        let s = lp_sys(LieAlgebra::so3(), "x", &Params::new());
        assert!(matches!(analyze(&s, &[0.0, 1.0, 0.0], &AnalysisOptions::default()), Err(StabilityError::NotEquilibrium { .. })));
    }
}
