//! Acceptance suite: one PASS/FAIL line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use poisson_stab::algebra::LieAlgebra;
use poisson_stab::catalog::{self, EntryKind};
use poisson_stab::dynamics::{self, IntegratorOptions, Samples};
use poisson_stab::leafspace::{self, T2Description};
use poisson_stab::stability::{self, AnalysisOptions, CasimirFamily, VerdictValue, Witness};
use poisson_stab::{Expression, HamiltonianSystem, Params, PoissonStructure};
use poisson_stab_cli::commands;
use poisson_stab_cli::ProbeJson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn lie_poisson(alg: &str, h: &str, params: &Params) -> HamiltonianSystem {
    let alg = LieAlgebra::by_name(alg).unwrap();
    let n = alg.dim();
    HamiltonianSystem::new(PoissonStructure::lie_poisson(alg), Expression::parse(h, n, params).unwrap()).unwrap()
}

fn entry_system(name: &str, p: &[(&str, f64)]) -> (HamiltonianSystem, Vec<f64>) {
    let e = catalog::get_entry(name).unwrap();
    let t = e.template().unwrap();
    (e.system(&catalog::params(p)).unwrap(), t.equilibrium.to_vec())
}

fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn definite(ev: &[f64]) -> bool {
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gate = 1e-8 * (1.0 + scale);
    ev.iter().all(|&v| v > gate) || ev.iter().all(|&v| v < -gate)
}

fn sl2_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let sys = lie_poisson("sl2", "k1*x + k2*y + k3*z", &catalog::params(&[("k1", k[0]), ("k2", k[1]), ("k3", k[2])]));
        let spec = stability::linearization_spectrum(&sys, &[0.0; 3]).map_err(|e| e.to_string())?;
        let d = k[0] * k[0] + k[1] * k[1] - k[2] * k[2];
        let r = d.abs().sqrt();
        let expected: Vec<(f64, f64)> = if d >= 0.0 {
            vec![(0.0, 0.0), (r, 0.0), (-r, 0.0)]
        } else {
            vec![(0.0, 0.0), (0.0, r), (0.0, -r)]
        };
        ensure(spec.eigenvalues.len() == 3, format!("{} eigenvalues for {k:?}", spec.eigenvalues.len()))?;
        let mut unused = spec.eigenvalues.clone();
        for (re, im) in expected {
            let (i, err) = unused
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| (i, (a - re).hypot(b - im)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            worst = worst.max(err);
            unused.remove(i);
        }
    }
    ensure(worst <= 1e-8, format!("max eigenvalue error {worst:.3e} > 1e-8"))?;
    Ok(format!("100 generators, max eigenvalue error {worst:.1e}"))
}

fn threeplanes_separation() -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for a in [0.5, 1.0] {
        let (sys, x_e) = entry_system("threeplanes", &[("a", a)]);
        let t2 = leafspace::t2_description(&sys.structure, &x_e, None).map_err(|e| e.to_string())?;
        let family = CasimirFamily::default_for(&sys);
        let full = stability::t2_energy_casimir(&sys, &x_e, &t2, &family).map_err(|e| e.to_string())?;
        let single = stability::t2_energy_casimir(&sys, &x_e, &t2.full_neighbourhood(), &family).map_err(|e| e.to_string())?;
        lines.push(format!("a={a}: T2 {:?}, single piece {:?}", full.value, single.value));
        if full.value != VerdictValue::Stable {
            failures.push(format!("a={a}: T2 energy-Casimir gave {:?} ({})", full.value, full.notes.join("; ")));
        }
        if single.value != VerdictValue::Inconclusive {
            failures.push(format!("a={a}: single-piece run gave {:?}", single.value));
        }
    }
    ensure(failures.is_empty(), format!("{} [{}]", failures.join("; "), lines.join(", ")))?;
    Ok(lines.join(", "))
}

fn verdict_at(name: &str, p: &[(&str, f64)]) -> Result<stability::Analysis, String> {
    let (sys, x_e) = entry_system(name, p);
    stability::analyze(&sys, &x_e, &AnalysisOptions::default()).map_err(|e| format!("{name} {p:?}: {e}"))
}

fn twoplanes_region() -> Outcome {
    let vals = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut bad = Vec::new();
    for a in vals {
        for b in vals {
            let v = verdict_at("twoplanes", &[("a", a), ("b", b)])?.verdict.value;
            if (v == VerdictValue::Stable) != (a > b) {
                bad.push(format!("(a={a}, b={b}) -> {v:?}"));
            }
        }
    }
    ensure(bad.is_empty(), format!("mismatches: {}", bad.join(", ")))?;
    Ok("25 grid points, Stable exactly when a > b".to_string())
}

/// Recomputes the restricted Hessians behind a piecewise witness.
fn witness_is_valid(sys: &HamiltonianSystem, x_e: &[f64], t2: &T2Description, w: &Witness) -> bool {
    let Witness::Pieces { pieces } = w else {
        return false;
    };
    let family = CasimirFamily::default_for(sys);
    let mut covered = vec![false; t2.pieces.len()];
    for pw in pieces {
        let Some(piece) = t2.pieces.get(pw.piece) else {
            return false;
        };
        let mut hess = sys.h.derive(x_e).unwrap().hessian;
        for (lam, c) in pw.lambda.iter().zip(&family.basis) {
            hess += c.derive(x_e).unwrap().hessian * *lam;
        }
        let b = &piece.tangent;
        let restricted = b.transpose() * hess * b;
        if restricted.nrows() > 0 && !definite(&sym_eigenvalues(&restricted)) {
            return false;
        }
        covered[pw.piece] = true;
    }
    covered.iter().all(|&c| c)
}

fn sl2_quadratic_region() -> Outcome {
    let vals = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut missed = Vec::new();
    let mut unjustified = Vec::new();
    let mut outside = 0;
    for a in vals {
        for b in vals {
            for c in vals {
                let p = [("a", a), ("b", b), ("c", c)];
                let an = verdict_at("sl2_quadratic", &p)?;
                let inside = c > -a && c > -b;
                let closure = c >= -a && c >= -b;
                let stable = an.verdict.value == VerdictValue::Stable;
                if inside && !stable {
                    missed.push(format!("{p:?} -> {:?}", an.verdict.value));
                }
                if stable && !closure {
                    outside += 1;
                    let (sys, x_e) = entry_system("sl2_quadratic", &p);
                    let t2 = leafspace::t2_description(&sys.structure, &x_e, None).map_err(|e| e.to_string())?;
                    if !witness_is_valid(&sys, &x_e, &t2, &an.verdict.witness) {
                        unjustified.push(format!("{p:?}"));
                    }
                }
            }
        }
    }
    ensure(missed.is_empty(), format!("not Stable inside the region: {}", missed.join(", ")))?;
    ensure(unjustified.is_empty(), format!("Stable without a valid witness: {}", unjustified.join(", ")))?;
    Ok(format!("125 grid points; {outside} Stable points outside the region all carry re-verified definite witnesses"))
}

fn se2plus_closed_form(t: f64, d: f64) -> [f64; 5] {
    let (s, c) = t.sin_cos();
    [
        d * s,
        d * c,
        d * d / 8.0 * (t * (2.0 * t).sin() - s * s - t * t),
        d / 2.0 * t * s,
        d / 2.0 * (s + t * c),
    ]
}

fn se2plus_instability() -> Outcome {
    let delta = 0.01;
    let (sys, x_e) = entry_system("se2plus", &[("a", 1.0)]);
    let mut opts = IntegratorOptions::new(1e-12);
    opts.samples = Samples::Uniform(5001);
    let rec = dynamics::integrate_with(&sys, &[0.0, delta, 0.0, 0.0, 0.0], 50.0, &opts).map_err(|e| e.to_string())?;
    let mut err = 0.0f64;
    for (t, x) in rec.times.iter().zip(&rec.states) {
        let exact = se2plus_closed_form(*t, delta);
        for i in 0..5 {
            err = err.max((x[i] - exact[i]).abs());
        }
    }
    let z50 = rec.last()[2];
    let x50 = rec.last().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let hess = stability::leafwise_hessian(&sys, &x_e).map_err(|e| e.to_string())?;
    let ev = sym_eigenvalues(&hess);
    let detail = format!(
        "max error {err:.2e}, |z(50)| = {:.4} (closed form {:.4}), max |x_i(50)| = {x50:.3}, leafwise Hessian eigenvalues {ev:?}",
        z50.abs(),
        se2plus_closed_form(50.0, delta)[2].abs()
    );
    ensure(err <= 1e-4, format!("trajectory error too large: {detail}"))?;
    ensure(definite(&ev), format!("leafwise Hessian not definite: {detail}"))?;
    ensure(z50.abs() > 10.0 * delta, format!("|z(50)| <= 10 delta: {detail}"))?;
    Ok(detail)
}

fn rsdr_drift() -> Outcome {
    let (sys, x_e) = entry_system("rsdr", &[]);
    let nu0 = [0.03, 0.01];
    let mut opts = IntegratorOptions::new(1e-12);
    opts.samples = Samples::Uniform(1001);
    let rec = dynamics::integrate_with(&sys, &nu0, 100.0, &opts).map_err(|e| e.to_string())?;
    let drift_err = rec
        .times
        .iter()
        .zip(&rec.states)
        .map(|(t, x)| (x[0] - (nu0[0] - t * nu0[1])).abs())
        .fold(0.0, f64::max);
    ensure(drift_err <= 1e-9, format!("nu1 deviates from the linear drift by {drift_err:.2e}"))?;

    let entry = catalog::get_entry("rsdr").unwrap();
    let pd = entry.template().unwrap().probe.clone().unwrap();
    let report = commands::probe(&sys, &x_e, &pd.options(catalog::DEFAULT_SEED), 2).map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    for t in &report.trials {
        ensure((t.offset[1].abs() - 0.01).abs() < 1e-15, format!("trial offset {:?} is not a pure nu2 kick", t.offset))?;
        let esc = t.escape_time.ok_or_else(|| format!("trial {} did not escape", t.trial))?;
        ensure((esc - 10.0).abs() <= 0.1, format!("escape time {esc} outside 10 +- 0.1"))?;
        times.push(esc);
    }
    let alg = LieAlgebra::rsdr();
    let v = stability::reduced_energy_momentum(&alg, &sys.h, &x_e).map_err(|e| e.to_string())?;
    ensure(
        matches!(v.witness, Witness::WildGenerator { .. }),
        format!("reduced energy-momentum witness {:?}", v.witness),
    )?;
    Ok(format!(
        "drift error {drift_err:.1e}; {} trials escaped at t = {:.4}; wild generator reported",
        times.len(),
        times[0]
    ))
}

fn conservation() -> Outcome {
    let sys = lie_poisson("so3", "(x^2/1 + y^2/2 + z^2/3)/2", &Params::new());
    let mut worst_h = 0.0f64;
    let mut worst_c = 0.0f64;
    for x0 in [[1.0, 0.5, -0.3], [0.1, 1.0, 0.2], [0.4, -0.2, 1.0]] {
        let rec = dynamics::integrate(&sys, &x0, 100.0, 1e-10).map_err(|e| e.to_string())?;
        worst_h = worst_h.max(rec.max_energy_drift);
        worst_c = rec.max_casimir_drift.iter().fold(worst_c, |m, &d| m.max(d));
    }
    ensure(worst_h < 1e-7 && worst_c < 1e-7, format!("drift h {worst_h:.2e}, A {worst_c:.2e}"))?;
    Ok(format!("relative drift h {worst_h:.1e}, A {worst_c:.1e}"))
}

/// `{f, g}` on se(2)* for coordinates (x, y, z) with translations x, y.
fn se2_bracket(mu: &[f64], df: &DVector<f64>, dg: &DVector<f64>) -> f64 {
    let (x, y) = (mu[0], mu[1]);
    let pi = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -y, 0.0, 0.0, x, y, -x, 0.0]);
    df.dot(&(pi * dg))
}

fn transverse_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let se2 = LieAlgebra::se2();
    let mut j_err = 0.0f64;
    let regular = se2.isotropy(&[1.0, 0.5, 0.2]).map_err(|e| e.to_string())?;
    let split = se2.isotropy(&[0.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let so3 = LieAlgebra::so3().isotropy(&[0.3, -0.2, 1.0]).map_err(|e| e.to_string())?;
    for td in [&regular, &split, &so3] {
        for _ in 0..20 {
            let c: Vec<f64> = (0..td.isotropy_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xi = &td.g_mu * DVector::from_vec(c);
            let j = td.connector_image(&[0.0; 3], xi.as_slice()).map_err(|e| e.to_string())?;
            j_err = j_err.max((j - xi).amax());
        }
    }
    ensure(j_err <= 1e-12, format!("j_mu(0) differs from the identity by {j_err:.2e}"))?;

    let mut reg_max = 0.0f64;
    for _ in 0..100 {
        let nu_coords: Vec<f64> = (0..regular.isotropy_dim()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let nu = regular.transverse_covector(&nu_coords);
        let df: Vec<f64> = (0..regular.isotropy_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dg: Vec<f64> = (0..regular.isotropy_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = regular.transverse_bracket(nu.as_slice(), &df, &dg).map_err(|e| e.to_string())?;
        reg_max = reg_max.max(b.abs());
    }
    ensure(reg_max <= 1e-10, format!("transverse bracket at a regular point reaches {reg_max:.2e}"))?;

    let mut split_err = 0.0f64;
    for _ in 0..100 {
        let nu: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let df: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dg: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = split.transverse_bracket(&nu, &df, &dg).map_err(|e| e.to_string())?;
        let point: Vec<f64> = nu.iter().zip(split.mu.iter()).map(|(a, b)| a + b).collect();
        let xf = &split.g_mu * DVector::from_vec(df);
        let xg = &split.g_mu * DVector::from_vec(dg);
        split_err = split_err.max((b - se2_bracket(&point, &xf, &xg)).abs());
    }
    ensure(split_err <= 1e-10, format!("split transverse bracket differs from se(2)* by {split_err:.2e}"))?;
    Ok(format!(
        "|j(0) - id| {j_err:.1e}; regular bracket max {reg_max:.1e}; split bracket error {split_err:.1e}"
    ))
}

fn se3_cone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::INFINITY;
    let mut worst_residual = 0.0f64;
    for _ in 0..1000 {
        let mu = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 2.0;
        if mu.norm() < 0.1 {
            continue;
        }
        let r = dynamics::random_rotation(&mut rng);
        let nu_a = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let t = rng.gen_range(0.0..3.0);
        let s = dynamics::cone_bound_sample(&mu, &r, t, &nu_a);
        worst = worst.min(s.slack());
        worst_residual = worst_residual.max(s.residual);
    }
    ensure(worst >= -1e-9, format!("minimum slack {worst:.3e}"))?;
    Ok(format!("minimum slack {worst:.2e}, max residual of the solved translation {worst_residual:.1e}"))
}

fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let vars = ["x", "y", "z"];
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            vars[rng.gen_range(0..3)].to_string()
        } else {
            format!("{:.3}", rng.gen_range(-2.0..2.0))
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => format!("({a} + {})", random_expr(rng, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, depth - 1)),
        2 | 3 => format!("({a} * {})", random_expr(rng, depth - 1)),
        4 => format!("({a} / (2 + {}^2))", random_expr(rng, depth - 1)),
        5 => format!("sin({a})"),
        6 => format!("cos({a})"),
        7 => format!("exp(sin({a}))"),
        8 => format!("sqrt(1 + ({a})^2)"),
        _ => format!("log(3 + cos({a}))"),
    }
}

fn ad_vs_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    for _ in 0..50 {
        let text = random_expr(&mut rng, 4);
        let e = Expression::parse(&text, 3, &Params::new()).map_err(|err| format!("`{text}`: {err}"))?;
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = e.derive(&p).map_err(|err| err.to_string())?;
        let f = |q: &[f64]| e.evaluate(q).unwrap();
        let shifted = |i: usize, hi: f64, j: usize, hj: f64| {
            let mut q = p.clone();
            q[i] += hi;
            q[j] += hj;
            f(&q)
        };
        let richardson = |g: &dyn Fn(f64) -> f64, h: f64| (4.0 * g(h / 2.0) - g(h)) / 3.0;
        let mut fd_g = DVector::zeros(3);
        let mut fd_h = DMatrix::zeros(3, 3);
        for i in 0..3 {
            fd_g[i] = richardson(&|h| (shifted(i, h, i, 0.0) - shifted(i, -h, i, 0.0)) / (2.0 * h), 1e-3);
            for j in 0..3 {
                fd_h[(i, j)] = richardson(
                    &|h| {
                        (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h) + shifted(i, -h, j, -h)) / (4.0 * h * h)
                    },
                    2e-3,
                );
            }
        }
        let rel = |a: f64, b: f64| a / b.max(1e-12);
        worst_g = worst_g.max(rel((&d.gradient - &fd_g).amax(), fd_g.amax()));
        worst_h = worst_h.max(rel((&d.hessian - &fd_h).amax(), fd_h.amax()));
    }
    ensure(worst_g < 1e-6 && worst_h < 1e-6, format!("relative error gradient {worst_g:.2e}, Hessian {worst_h:.2e}"))?;
    Ok(format!("50 expressions, relative error gradient {worst_g:.1e}, Hessian {worst_h:.1e}"))
}

fn determinism() -> Outcome {
    let entry = catalog::get_entry("so3_origin").unwrap();
    let t = entry.template().unwrap();
    let sys = entry.system(&Params::new()).unwrap();
    let pd = t.probe.clone().unwrap();
    let opts = pd.options(42);
    let bytes: Vec<String> = [1, 2, 8]
        .iter()
        .map(|&w| commands::probe(&sys, t.equilibrium, &opts, w).map(|r| ProbeJson::new(entry.name, r).to_json()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(bytes[0] == bytes[1] && bytes[1] == bytes[2], "probe JSON differs between worker counts".to_string())?;
    Ok(format!("{} trials, {} identical bytes for 1, 2 and 8 workers", opts.trials_per_delta, bytes[0].len()))
}

fn tame_casimirs() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for e in catalog::entries() {
        let EntryKind::Runnable(t) = &e.kind else { continue };
        for p in (t.grid)() {
            let sys = e.system(&p).map_err(|err| err.to_string())?;
            let t2 = leafspace::t2_description(&sys.structure, t.equilibrium, None).map_err(|err| format!("{}: {err}", e.name))?;
            for c in &sys.structure.casimirs {
                let dc = c.gradient(t.equilibrium).map_err(|err| err.to_string())?;
                let class = leafspace::classify_generator(&t2, &dc).map_err(|err| format!("{}: {err}", e.name))?;
                checked += 1;
                if !class.tame {
                    bad.push(format!("{} {:?}: dC = {:?}", e.name, p, dc.as_slice()));
                }
            }
        }
    }
    ensure(bad.is_empty(), format!("wild Casimir differentials: {}", bad.join(", ")))?;
    Ok(format!("{checked} (structure, Casimir, equilibrium) triples tame"))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 12] = [
        ("sl(2) linearization spectrum", 1.0, sl2_spectrum),
        ("three planes: T2 energy-Casimir versus single piece", 1.0, threeplanes_separation),
        ("two planes stability region", 2.0, twoplanes_region),
        ("sl(2) quadratic stability region", 5.0, sl2_quadratic_region),
        ("se(2) x R^2 instability", 2.0, se2plus_instability),
        ("R semidirect R drift and escape", 2.0, rsdr_drift),
        ("rigid body conservation envelope", 2.0, conservation),
        ("transverse connector and bracket", 1.0, transverse_machinery),
        ("SE(3) cone inequality", 2.0, se3_cone),
        ("automatic differentiation", 1.0, ad_vs_finite_differences),
        ("probe determinism across workers", 5.0, determinism),
        ("Casimir differentials are tame", 1.0, tame_casimirs),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let timing = if secs > *budget {
            format!("{secs:.2}s, over the {budget}s budget")
        } else {
            format!("{secs:.2}s")
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({timing}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({timing}): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
