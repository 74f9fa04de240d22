use poisson_stab::algebra::LieAlgebra;
use poisson_stab::catalog::{self, EntryKind};
use poisson_stab::dynamics::{self, GroupElement, IntegratorOptions, Samples};
use poisson_stab::stability::EuclideanGroup;
use poisson_stab::{Expression, HamiltonianSystem, Params, PoissonStructure};

fn se3_system(h: &str) -> HamiltonianSystem {
    let h = Expression::parse(h, 6, &Params::new()).unwrap();
    HamiltonianSystem::new(PoissonStructure::lie_poisson(LieAlgebra::se3()), h).unwrap()
}

#[test]
fn constant_generator_reconstructs_a_one_parameter_subgroup() {
    let e = catalog::get_entry("se3_regular").unwrap();
    let t = e.template().unwrap();
    let sys = e.system(&Params::new()).unwrap();
    let mut o = IntegratorOptions::new(1e-12);
    o.samples = Samples::Uniform(51);
    let traj = dynamics::integrate_with(&sys, t.equilibrium, 5.0, &o).unwrap();
    let g0 = GroupElement::identity(EuclideanGroup::SE3);
    let gt = dynamics::reconstruct(EuclideanGroup::SE3, &sys, &traj, &g0, 2).unwrap();
    let xi: Vec<f64> = sys.h.gradient(t.equilibrium).unwrap().iter().copied().collect();
    for (time, g) in gt.times.iter().zip(&gt.elements) {
        let scaled: Vec<f64> = xi.iter().map(|v| v * time).collect();
        let exact = dynamics::exp(EuclideanGroup::SE3, &scaled);
        assert!(g.distance(&exact) < 1e-10, "t = {time}: {}", g.distance(&exact));
    }
}

#[test]
fn reconstruction_converges_at_second_order() {
    let sys = se3_system("(x1^2 + 2*x2^2 + 3*x3^2)/2 + (x4^2 + x5^2 + 2*x6^2)/2 + x1*x4/3");
    let x0 = [0.4, -0.3, 1.0, 0.2, 0.5, -0.1];
    let mut o = IntegratorOptions::new(1e-12);
    o.samples = Samples::Uniform(41);
    let traj = dynamics::integrate_with(&sys, &x0, 4.0, &o).unwrap();
    let g0 = GroupElement::identity(EuclideanGroup::SE3);
    let run = |k| dynamics::reconstruct(EuclideanGroup::SE3, &sys, &traj, &g0, k).unwrap();
    let reference = run(256);
    let err = |k| {
        let gt = run(k);
        gt.elements.iter().zip(&reference.elements).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(4), err(8));
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "errors {e1:e}, {e2:e}, ratio {ratio}");
}

#[test]
fn drift_stays_inside_the_envelope_on_catalogued_systems() {
    let (tol, t_final) = (1e-10, 100.0);
    for e in catalog::entries() {
        let EntryKind::Runnable(t) = &e.kind else { continue };
        let sys = e.system(&Params::new()).unwrap();
        let x0: Vec<f64> = t.equilibrium.iter().enumerate().map(|(i, v)| v + 0.3 * (1.0 + i as f64 * 0.37).sin()).collect();
        let rec = dynamics::integrate(&sys, &x0, t_final, tol).unwrap();
        let bound = 100.0 * tol * t_final;
        assert!(rec.max_energy_drift <= bound, "{}: energy drift {:e}", e.name, rec.max_energy_drift);
        for d in &rec.max_casimir_drift {
            assert!(*d <= bound, "{}: Casimir drift {d:e}", e.name);
        }
    }
}

#[test]
fn reversing_the_field_returns_to_the_start() {
    let tol = 1e-9;
    for name in ["so3_rigid_body", "twoplanes", "se2plus", "sl2_quadratic"] {
        let e = catalog::get_entry(name).unwrap();
        let t = e.template().unwrap();
        let sys = e.system(&Params::new()).unwrap();
        let x0: Vec<f64> = t.equilibrium.iter().enumerate().map(|(i, v)| v + 0.05 * (1.0 + i as f64).cos()).collect();
        let fwd = dynamics::integrate(&sys, &x0, 10.0, tol).unwrap();
        let fine = dynamics::integrate(&sys, &x0, 10.0, tol * 1e-3).unwrap();
        let fwd_err = fwd.last().iter().zip(fine.last()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mut o = IntegratorOptions::new(tol);
        o.reverse = true;
        let back = dynamics::integrate_with(&sys, fwd.last(), 10.0, &o).unwrap();
        let back_err = back.last().iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(back_err <= 10.0 * fwd_err + 1e-14, "{name}: back {back_err:e}, forward {fwd_err:e}");
    }
}
