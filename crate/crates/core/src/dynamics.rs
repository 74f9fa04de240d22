//! Numerical integration with conservation monitoring, confinement probes,
//! group reconstruction and cone monitors for reconstructed trajectories.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::linalg;
use crate::poisson::{HamiltonianSystem, PoissonError};
use crate::sample;
use crate::stability::EuclideanGroup;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("step limit {limit} reached at t = {t}")]
    StepLimit { limit: usize, t: f64 },
    #[error("tolerance {0:e} outside [1e-13, 1e-3]")]
    Tolerance(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid probe setup: {0}")]
    InvalidProbe(String),
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Where the trajectory is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    /// `n ≥ 2` equally spaced times including both ends.
    Uniform(usize),
    /// Increasing times in `[0, t_final]`.
    Times(Vec<f64>),
    /// Every accepted step.
    Steps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub tol: f64,
    pub samples: Samples,
    /// Integrate the negated vector field.
    pub reverse: bool,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            samples: Samples::Uniform(1001),
            reverse: false,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// `casimirs[k][i]`: Casimir `i` at sample `k`.
    pub casimirs: Vec<Vec<f64>>,
    /// `|h(x(t)) − h(x0)| / scale` per sample.
    pub energy_drift: Vec<f64>,
    pub casimir_drifts: Vec<Vec<f64>>,
    /// Largest relative drifts over all accepted steps.
    pub max_energy_drift: f64,
    pub max_casimir_drift: Vec<f64>,
    pub stats: StepStats,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with header `t,x1,...,xn,h,C1,...,Ck` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let k = self.casimirs.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",h");
        for i in 1..=k {
            out.push_str(&format!(",C{i}"));
        }
        out.push('\n');
        for s in 0..self.times.len() {
            out.push_str(&sig17(self.times[s]));
            for v in &self.states[s] {
                out.push(',');
                out.push_str(&sig17(*v));
            }
            out.push(',');
            out.push_str(&sig17(self.energy[s]));
            for v in &self.casimirs[s] {
                out.push(',');
                out.push_str(&sig17(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Scale used for relative conservation drift.
pub fn drift_scale(v0: f64) -> f64 {
    if v0.abs() > 1e-12 {
        v0.abs()
    } else {
        1.0
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }
}

fn axpy(y: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, v) in terms {
        for (o, vi) in out.iter_mut().zip(v.iter()) {
            *o += c * vi;
        }
    }
    out
}

/// Adaptive Dormand–Prince 5(4) stepper with PI step-size control.
pub struct Dopri5<F> {
    f: F,
    tol: f64,
    pub t: f64,
    pub x: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    fac_old: f64,
    pub stats: StepStats,
    max_steps: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError>,
{
    pub fn new(mut f: F, t0: f64, x0: &[f64], t_end: f64, tol: f64, max_steps: usize) -> Result<Self, DynamicsError> {
        if !(1e-13..=1e-3).contains(&tol) {
            return Err(DynamicsError::Tolerance(tol));
        }
        let k1 = f(x0)?;
        let mut s = Self {
            f,
            tol,
            t: t0,
            x: x0.to_vec(),
            k1,
            h: 0.0,
            fac_old: 1e-4,
            stats: StepStats {
                evaluations: 1,
                ..StepStats::default()
            },
            max_steps,
        };
        s.h = s.initial_step(t_end - t0)?;
        Ok(s)
    }

    fn sk(&self, a: f64, b: f64) -> f64 {
        self.tol + self.tol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, span: f64) -> Result<f64, DynamicsError> {
        let n = self.x.len().max(1) as f64;
        let d0 = (self.x.iter().map(|v| (v / self.sk(*v, 0.0)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self.x.iter().zip(&self.k1).map(|(v, k)| (k / self.sk(*v, 0.0)).powi(2)).sum::<f64>() / n).sqrt();
        let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(span.abs());
        let x1 = axpy(&self.x, &[(h, &self.k1)]);
        let k2 = (self.f)(&x1)?;
        self.stats.evaluations += 1;
        let d2 = (self.x.iter().zip(k2.iter().zip(&self.k1)).map(|(v, (a, b))| ((a - b) / self.sk(*v, 0.0)).powi(2)).sum::<f64>() / n).sqrt() / h;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
        Ok((100.0 * h).min(h1).min(span.abs()).max(1e-12))
    }

    /// Advances by one accepted step not beyond `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseStep, DynamicsError> {
        let n = self.x.len();
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(DynamicsError::StepLimit { limit: self.max_steps, t: self.t });
            }
            let mut h = self.h.min(t_end - self.t);
            let last = h >= t_end - self.t;
            if last {
                h = t_end - self.t;
            }
            if h < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(DynamicsError::StepSizeUnderflow { t: self.t });
            }
            let x = &self.x;
            let k1 = &self.k1;
            let k2 = (self.f)(&axpy(x, &[(h * A21, k1)]))?;
            let k3 = (self.f)(&axpy(x, &[(h * A31, k1), (h * A32, &k2)]))?;
            let k4 = (self.f)(&axpy(x, &[(h * A41, k1), (h * A42, &k2), (h * A43, &k3)]))?;
            let k5 = (self.f)(&axpy(x, &[(h * A51, k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]))?;
            let k6 = (self.f)(&axpy(x, &[(h * A61, k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]))?;
            let x1 = axpy(x, &[(h * A71, k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)]);
            let k7 = (self.f)(&x1)?;
            self.stats.evaluations += 6;
            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err += (e / self.sk(x[i], x1[i])).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() || x1.iter().any(|v| !v.is_finite()) {
                self.stats.rejected += 1;
                self.h = h * 0.1;
                if self.h < 1e-14 * self.t.abs().max(1.0) {
                    return Err(DynamicsError::NonFinite { t: self.t });
                }
                continue;
            }
            // PI controller.
            const BETA: f64 = 0.04;
            const SAFE: f64 = 0.9;
            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let fac = (fac11 / self.fac_old.powf(BETA) / SAFE).clamp(0.1, 5.0);
                self.fac_old = err.max(1e-4);
                let r1 = x.clone();
                let r2: Vec<f64> = (0..n).map(|i| x1[i] - x[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k1[i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                    .collect();
                let dense = DenseStep {
                    t0: self.t,
                    h,
                    r: [r1, r2, r3, r4, r5],
                };
                self.t = if last { t_end } else { self.t + h };
                self.x = x1;
                self.k1 = k7;
                self.stats.accepted += 1;
                self.h = h / fac;
                return Ok(dense);
            }
            self.stats.rejected += 1;
            self.h = h / (fac11 / SAFE).min(5.0);
        }
    }
}

fn field<'a>(sys: &'a HamiltonianSystem, reverse: bool) -> impl FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError> + 'a {
    move |x: &[f64]| {
        let v = sys.vector_field(x)?;
        Ok(if reverse { v.iter().map(|a| -a).collect() } else { v.iter().copied().collect() })
    }
}

struct Monitor<'a> {
    sys: &'a HamiltonianSystem,
    h0: f64,
    c0: Vec<f64>,
}

impl<'a> Monitor<'a> {
    fn new(sys: &'a HamiltonianSystem, x0: &[f64]) -> Result<Self, DynamicsError> {
        let h0 = sys.h.evaluate(x0)?;
        let c0 = sys.structure.casimirs.iter().map(|c| c.evaluate(x0)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { sys, h0, c0 })
    }

    fn values(&self, x: &[f64]) -> Result<(f64, Vec<f64>), DynamicsError> {
        let h = self.sys.h.evaluate(x)?;
        let c = self.sys.structure.casimirs.iter().map(|c| c.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
        Ok((h, c))
    }

    fn drifts(&self, h: f64, c: &[f64]) -> (f64, Vec<f64>) {
        (
            (h - self.h0).abs() / drift_scale(self.h0),
            c.iter().zip(&self.c0).map(|(v, v0)| (v - v0).abs() / drift_scale(*v0)).collect(),
        )
    }
}

/// Integrates `sys` from `x0` over `[0, t_final]` with the default sampling.
pub fn integrate(sys: &HamiltonianSystem, x0: &[f64], t_final: f64, tol: f64) -> Result<TrajectoryRecord, DynamicsError> {
    integrate_with(sys, x0, t_final, &IntegratorOptions::new(tol))
}

pub fn integrate_with(
    sys: &HamiltonianSystem,
    x0: &[f64],
    t_final: f64,
    opts: &IntegratorOptions,
) -> Result<TrajectoryRecord, DynamicsError> {
    if x0.len() != sys.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    let monitor = Monitor::new(sys, x0)?;
    let k = monitor.c0.len();
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        casimirs: Vec::new(),
        energy_drift: Vec::new(),
        casimir_drifts: Vec::new(),
        max_energy_drift: 0.0,
        max_casimir_drift: vec![0.0; k],
        stats: StepStats::default(),
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, x: Vec<f64>| -> Result<(), DynamicsError> {
        let (h, c) = monitor.values(&x)?;
        let (dh, dc) = monitor.drifts(h, &c);
        rec.times.push(t);
        rec.states.push(x);
        rec.energy.push(h);
        rec.casimirs.push(c);
        rec.energy_drift.push(dh);
        rec.casimir_drifts.push(dc);
        Ok(())
    };
    let times: Vec<f64> = match &opts.samples {
        Samples::Uniform(m) => {
            let m = (*m).max(2);
            (0..m).map(|i| t_final * i as f64 / (m - 1) as f64).collect()
        }
        Samples::Times(ts) => ts.clone(),
        Samples::Steps => Vec::new(),
    };
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        push(&mut rec, times[next], x0.to_vec())?;
        next += 1;
    }
    if matches!(opts.samples, Samples::Steps) {
        push(&mut rec, 0.0, x0.to_vec())?;
    }
    if t_final > 0.0 {
        let mut st = Dopri5::new(field(sys, opts.reverse), 0.0, x0, t_final, opts.tol, opts.max_steps)?;
        while st.t < t_final {
            let d = st.step(t_final)?;
            let (h, c) = monitor.values(&st.x)?;
            let (dh, dc) = monitor.drifts(h, &c);
            rec.max_energy_drift = rec.max_energy_drift.max(dh);
            for (m, v) in rec.max_casimir_drift.iter_mut().zip(dc) {
                *m = m.max(v);
            }
            while next < times.len() && times[next] <= st.t {
                let x = if times[next] >= st.t { st.x.clone() } else { d.eval(times[next]) };
                push(&mut rec, times[next], x)?;
                next += 1;
            }
            if matches!(opts.samples, Samples::Steps) {
                push(&mut rec, st.t, st.x.clone())?;
            }
        }
        rec.stats = st.stats;
    }
    for d in &rec.energy_drift {
        rec.max_energy_drift = rec.max_energy_drift.max(*d);
    }
    Ok(rec)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Outcome of following one trajectory until it leaves a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    pub max_distance: f64,
    pub escape_time: Option<f64>,
}

/// Integrates until `|x(t) − center| > radius` or `t_final`, locating the
/// exit time by bisection on the dense output.
pub fn follow_until_escape(
    sys: &HamiltonianSystem,
    x0: &[f64],
    center: &[f64],
    radius: f64,
    t_final: f64,
    tol: f64,
) -> Result<Excursion, DynamicsError> {
    let mut max_distance = dist(x0, center);
    if max_distance > radius {
        return Ok(Excursion {
            max_distance,
            escape_time: Some(0.0),
        });
    }
    let mut st = Dopri5::new(field(sys, false), 0.0, x0, t_final, tol, 2_000_000)?;
    const INTERIOR: usize = 8;
    while st.t < t_final {
        let d = st.step(t_final)?;
        let mut prev = d.t0;
        for j in 1..=INTERIOR {
            let t = d.t0 + d.h * j as f64 / INTERIOR as f64;
            let x = if j == INTERIOR { st.x.clone() } else { d.eval(t) };
            let r = dist(&x, center);
            if r > radius {
                let (mut lo, mut hi) = (prev, t);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if dist(&d.eval(mid), center) > radius {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Excursion {
                    max_distance: max_distance.max(r),
                    escape_time: Some(hi),
                });
            }
            max_distance = max_distance.max(r);
            prev = t;
        }
    }
    Ok(Excursion {
        max_distance,
        escape_time: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub radius: f64,
    pub deltas: Vec<f64>,
    pub trials_per_delta: usize,
    pub t_final: f64,
    pub seed: u64,
    pub tol: f64,
    /// Perturbation directions used cyclically instead of random ones.
    pub directions: Option<Vec<Vec<f64>>>,
}

impl ProbeOptions {
    pub fn new(radius: f64, deltas: Vec<f64>, trials_per_delta: usize, t_final: f64, seed: u64) -> Self {
        Self {
            radius,
            deltas,
            trials_per_delta,
            t_final,
            seed,
            tol: 1e-10,
            directions: None,
        }
    }
}

/// One trial of a probe, fully determined by the options and its indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub delta_index: usize,
    pub trial: usize,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialResult {
    pub delta_index: usize,
    pub trial: usize,
    pub delta: f64,
    pub offset: Vec<f64>,
    pub max_distance: f64,
    /// `None` means the trial stayed in the ball up to `t_final`.
    pub escape_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaSummary {
    pub delta: f64,
    pub trials: usize,
    pub confined: usize,
    pub confinement_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeReport {
    pub equilibrium: Vec<f64>,
    pub radius: f64,
    pub t_final: f64,
    pub seed: u64,
    pub summaries: Vec<DeltaSummary>,
    pub trials: Vec<TrialResult>,
    pub notes: Vec<String>,
}

/// Stream index of a trial: delta index in the high word, trial in the low.
pub fn trial_stream(delta_index: usize, trial: usize) -> u64 {
    ((delta_index as u64) << 32) | trial as u64
}

pub fn probe_plan(dim: usize, opts: &ProbeOptions) -> Result<Vec<TrialSpec>, DynamicsError> {
    if opts.radius <= 0.0 {
        return Err(DynamicsError::InvalidProbe("radius must be positive".to_string()));
    }
    if let Some(dirs) = &opts.directions {
        if dirs.is_empty() || dirs.iter().any(|d| d.len() != dim || d.iter().all(|v| *v == 0.0)) {
            return Err(DynamicsError::InvalidProbe(format!("directions must be nonzero vectors of length {dim}")));
        }
    }
    let mut out = Vec::new();
    for (di, &delta) in opts.deltas.iter().enumerate() {
        if !(delta > 0.0 && delta < opts.radius) {
            return Err(DynamicsError::InvalidProbe(format!("need 0 < delta < R, got delta = {delta}")));
        }
        for trial in 0..opts.trials_per_delta {
            let dir = match &opts.directions {
                Some(dirs) => {
                    let d = DVector::from_column_slice(&dirs[trial % dirs.len()]);
                    &d / d.norm()
                }
                None => sample::unit_direction(&mut sample::rng(opts.seed, trial_stream(di, trial)), dim),
            };
            out.push(TrialSpec {
                delta_index: di,
                trial,
                offset: (dir * delta).iter().copied().collect(),
            });
        }
    }
    Ok(out)
}

pub fn run_trial(sys: &HamiltonianSystem, x_e: &[f64], opts: &ProbeOptions, spec: &TrialSpec) -> TrialResult {
    let x0: Vec<f64> = x_e.iter().zip(&spec.offset).map(|(a, b)| a + b).collect();
    let (max_distance, escape_time, error) = match follow_until_escape(sys, &x0, x_e, opts.radius, opts.t_final, opts.tol) {
        Ok(e) => (e.max_distance, e.escape_time, None),
        Err(e) => (f64::NAN, None, Some(e.to_string())),
    };
    TrialResult {
        delta_index: spec.delta_index,
        trial: spec.trial,
        delta: opts.deltas[spec.delta_index],
        offset: spec.offset.clone(),
        max_distance,
        escape_time,
        error,
    }
}

/// Builds the report; independent of the order of `results`.
pub fn assemble_probe(x_e: &[f64], opts: &ProbeOptions, mut results: Vec<TrialResult>) -> ProbeReport {
    results.sort_by_key(|r| (r.delta_index, r.trial));
    let summaries = opts
        .deltas
        .iter()
        .enumerate()
        .map(|(di, &delta)| {
            let rs: Vec<&TrialResult> = results.iter().filter(|r| r.delta_index == di).collect();
            let confined = rs.iter().filter(|r| r.escape_time.is_none() && r.error.is_none()).count();
            DeltaSummary {
                delta,
                trials: rs.len(),
                confined,
                confinement_fraction: if rs.is_empty() { 0.0 } else { confined as f64 / rs.len() as f64 },
            }
        })
        .collect();
    let mut notes = vec![format!(
        "finite horizon: trials that stay within R up to t_final = {} count as confined",
        opts.t_final
    )];
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        notes.push(format!("{failed} trials failed to integrate and count as unconfined"));
    }
    ProbeReport {
        equilibrium: x_e.to_vec(),
        radius: opts.radius,
        t_final: opts.t_final,
        seed: opts.seed,
        summaries,
        trials: results,
        notes,
    }
}

/// Monte-Carlo confinement probe, run sequentially.
pub fn probe(sys: &HamiltonianSystem, x_e: &[f64], opts: &ProbeOptions) -> Result<ProbeReport, DynamicsError> {
    let plan = probe_plan(sys.dim(), opts)?;
    let results = plan.iter().map(|s| run_trial(sys, x_e, opts, s)).collect();
    Ok(assemble_probe(x_e, opts, results))
}

/// An element `(R, a)` of SE(2) or SE(3), acting by `x ↦ Rx + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl GroupElement {
    pub fn identity(group: EuclideanGroup) -> Self {
        let k = space_dim(group);
        Self {
            rotation: DMatrix::identity(k, k),
            translation: DVector::zeros(k),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: &self.rotation * &other.rotation,
            translation: &self.rotation * &other.translation + &self.translation,
        }
    }

    /// `max(‖RᵀR − I‖, |det R − 1|)`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.rotation.nrows();
        let e = (self.rotation.transpose() * &self.rotation - DMatrix::identity(k, k)).amax();
        e.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.rotation - &other.rotation).amax().max((&self.translation - &other.translation).amax())
    }

    fn reorthonormalize(&mut self) {
        let r = linalg::nearest_rotation(&self.rotation);
        self.rotation = r;
    }
}

fn space_dim(group: EuclideanGroup) -> usize {
    match group {
        EuclideanGroup::SE2 => 2,
        EuclideanGroup::SE3 => 3,
    }
}

/// Splits an algebra element into angular velocity and linear velocity.
fn split(group: EuclideanGroup, xi: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let (rot, tr) = group.blocks();
    (DVector::from_column_slice(&xi[rot]), DVector::from_column_slice(&xi[tr]))
}

fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Group exponential of `ξ`.
pub fn exp(group: EuclideanGroup, xi: &[f64]) -> GroupElement {
    let (w, v) = split(group, xi);
    match group {
        EuclideanGroup::SE2 => {
            let th = w[0];
            let (s, c) = th.sin_cos();
            let (a, b) = if th.abs() < 1e-5 {
                let t2 = th * th;
                (1.0 - t2 / 6.0 + t2 * t2 / 120.0, th / 2.0 - th * t2 / 24.0)
            } else {
                (s / th, (1.0 - c) / th)
            };
            GroupElement {
                rotation: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
                translation: DVector::from_vec(vec![a * v[0] - b * v[1], b * v[0] + a * v[1]]),
            }
        }
        EuclideanGroup::SE3 => {
            let w = Vector3::new(w[0], w[1], w[2]);
            let v = Vector3::new(v[0], v[1], v[2]);
            let th = w.norm();
            let k = hat(&w);
            let k2 = k * k;
            let (a, b, c) = if th < 1e-4 {
                let t2 = th * th;
                (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0)
            } else {
                let (s, co) = th.sin_cos();
                (s / th, (1.0 - co) / (th * th), (th - s) / (th * th * th))
            };
            let r = Matrix3::identity() + k * a + k2 * b;
            let vm = Matrix3::identity() + k * b + k2 * c;
            let t = vm * v;
            GroupElement {
                rotation: DMatrix::from_iterator(3, 3, r.iter().copied()),
                translation: DVector::from_column_slice(t.as_slice()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrajectory {
    pub times: Vec<f64>,
    pub elements: Vec<GroupElement>,
    pub generators: Vec<Vec<f64>>,
    /// Richardson estimate of the reconstruction error at the final time.
    pub error_estimate: f64,
    pub substeps: usize,
}

fn hermite(t0: f64, t1: f64, x0: &[f64], x1: &[f64], f0: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (h00, h10, h01, h11) = (
        2.0 * s * s * s - 3.0 * s * s + 1.0,
        s * s * s - 2.0 * s * s + s,
        -2.0 * s * s * s + 3.0 * s * s,
        s * s * s - s * s,
    );
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i])
        .collect()
}

fn reconstruct_pass(
    group: EuclideanGroup,
    sys: &HamiltonianSystem,
    traj: &TrajectoryRecord,
    fields: &[Vec<f64>],
    g0: &GroupElement,
    substeps: usize,
) -> Result<Vec<GroupElement>, DynamicsError> {
    let mut g = g0.clone();
    let mut out = vec![g.clone()];
    for k in 0..traj.times.len().saturating_sub(1) {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let dt = (t1 - t0) / substeps as f64;
        for s in 0..substeps {
            let tm = t0 + (s as f64 + 0.5) * dt;
            let xm = hermite(t0, t1, &traj.states[k], &traj.states[k + 1], &fields[k], &fields[k + 1], tm);
            let xi = sys.h.gradient(&xm)?;
            let step: Vec<f64> = xi.iter().map(|v| v * dt).collect();
            g = g.compose(&exp(group, &step));
            g.reorthonormalize();
        }
        out.push(g.clone());
    }
    Ok(out)
}

/// Solves `ġ = g·ξ(t)`, `ξ(t) = dh(ν(t))`, along a reduced trajectory on
/// `𝔤*` by exponential midpoint steps, `substeps` per sample interval.
pub fn reconstruct(
    group: EuclideanGroup,
    sys: &HamiltonianSystem,
    traj: &TrajectoryRecord,
    g0: &GroupElement,
    substeps: usize,
) -> Result<GroupTrajectory, DynamicsError> {
    let n = match group {
        EuclideanGroup::SE2 => 3,
        EuclideanGroup::SE3 => 6,
    };
    if sys.dim() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, found: sys.dim() });
    }
    let k = space_dim(group);
    if g0.rotation.shape() != (k, k) || g0.translation.len() != k {
        return Err(DynamicsError::DimensionMismatch {
            expected: k,
            found: g0.translation.len(),
        });
    }
    let substeps = substeps.max(1);
    let fields = traj
        .states
        .iter()
        .map(|x| sys.vector_field(x).map(|v| v.iter().copied().collect()))
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    let fine = reconstruct_pass(group, sys, traj, &fields, g0, substeps)?;
    let error_estimate = if traj.times.len() > 1 {
        let coarse = reconstruct_pass(group, sys, traj, &fields, g0, substeps.div_ceil(2).max(1))?;
        let ratio = if substeps >= 2 { 3.0 } else { 1.0 };
        fine.last().unwrap().distance(coarse.last().unwrap()) / ratio
    } else {
        0.0
    };
    let generators = traj
        .states
        .iter()
        .map(|x| sys.h.gradient(x).map(|v| v.iter().copied().collect()))
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    Ok(GroupTrajectory {
        times: traj.times.clone(),
        elements: fine,
        generators,
        error_estimate,
        substeps,
    })
}

/// Spatial momentum `Ad*_{g⁻¹} ν`, in the same (rotational, translational)
/// layout as the body momentum.
pub fn spatial_momentum(group: EuclideanGroup, g: &GroupElement, nu: &[f64]) -> Vec<f64> {
    let (rot, tr) = group.blocks();
    let r = &g.rotation;
    let a = &g.translation;
    let p = r * DVector::from_column_slice(&nu[tr.clone()]);
    let mut out = vec![0.0; nu.len()];
    match group {
        EuclideanGroup::SE2 => {
            out[rot.start] = nu[rot.start] + a[0] * p[1] - a[1] * p[0];
        }
        EuclideanGroup::SE3 => {
            let pi = r * DVector::from_column_slice(&nu[rot.clone()]);
            let a3 = Vector3::new(a[0], a[1], a[2]);
            let p3 = Vector3::new(p[0], p[1], p[2]);
            let cross = a3.cross(&p3);
            for i in 0..3 {
                out[rot.start + i] = pi[i] + cross[i];
            }
        }
    }
    for (i, j) in tr.enumerate() {
        out[j] = p[i];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConeCase {
    /// Translational momentum nonzero: translation confined to a cone about it.
    Regular,
    /// SE(3), translational momentum zero, rotational momentum nonzero.
    NonregularSe3,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConeReport {
    pub case: ConeCase,
    pub eps0: f64,
    pub eps1: f64,
    pub samples: usize,
    pub first_violation: Option<f64>,
    /// Largest value of the checked quantity minus its bound.
    pub worst_excess: f64,
}

fn angle_sin(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let c = u.dot(v) / (nu * nv);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Checks a reconstructed trajectory against the A-set of its momentum.
///
/// Regular case: the translation lies within angle `eps0` of the
/// translational momentum, or within distance `eps1` of the origin.
/// SE(3) nonregular case: `|sin θ(R(t)μ^r, μ^r)| < eps1·|a(t)| + eps0`.
pub fn a_stability_monitor(
    group: EuclideanGroup,
    gt: &GroupTrajectory,
    mu_e: &[f64],
    eps0: f64,
    eps1: f64,
) -> Result<ConeReport, DynamicsError> {
    let (rot, tr) = group.blocks();
    if mu_e.len() != rot.len() + tr.len() {
        return Err(DynamicsError::DimensionMismatch {
            expected: rot.len() + tr.len(),
            found: mu_e.len(),
        });
    }
    let mu_a = DVector::from_column_slice(&mu_e[tr]);
    let mu_r = DVector::from_column_slice(&mu_e[rot]);
    let scale = 1.0 + mu_e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let case = if mu_a.norm() > 1e-12 * scale {
        ConeCase::Regular
    } else if group == EuclideanGroup::SE3 && mu_r.norm() > 1e-12 * scale {
        ConeCase::NonregularSe3
    } else {
        return Err(DynamicsError::UnsupportedCase(format!(
            "{group:?} with momentum {mu_e:?}: the A-set is the whole group"
        )));
    };
    let mut first_violation = None;
    let mut worst = f64::NEG_INFINITY;
    for (t, g) in gt.times.iter().zip(&gt.elements) {
        let excess = match case {
            ConeCase::Regular => {
                let a = &g.translation;
                if a.norm() <= eps1 {
                    a.norm() - eps1
                } else {
                    let c = a.dot(&mu_a) / (a.norm() * mu_a.norm());
                    c.clamp(-1.0, 1.0).acos() - eps0
                }
            }
            ConeCase::NonregularSe3 => {
                let s = angle_sin(&(&g.rotation * &mu_r), &mu_r);
                s - (eps1 * g.translation.norm() + eps0)
            }
        };
        worst = worst.max(excess);
        if excess >= 0.0 && first_violation.is_none() {
            first_violation = Some(*t);
        }
    }
    Ok(ConeReport {
        case,
        eps0,
        eps1,
        samples: gt.times.len(),
        first_violation,
        worst_excess: worst,
    })
}

/// Least-squares translation `a` solving
/// `μ^r × (R(μ^r + ν^r) + a × Rν^a) = 0`, with the residual norm.
pub fn solve_e1(mu_r: &Vector3<f64>, r: &Matrix3<f64>, nu_r: &Vector3<f64>, nu_a: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let w = r * nu_a;
    // μ × (a × w) = (μ·w) a − w (μ·a)
    let m = Matrix3::identity() * mu_r.dot(&w) - w * mu_r.transpose();
    let b = -mu_r.cross(&(r * (mu_r + nu_r)));
    let md = DMatrix::from_iterator(3, 3, m.iter().copied());
    let a = linalg::lstsq(&md, &DVector::from_column_slice(b.as_slice()));
    let a = Vector3::new(a[0], a[1], a[2]);
    let res = (m * a - b).norm();
    (a, res)
}

/// One sample of the SE(3) orientation bound: `|sin θ_{R,μ^r}|` and
/// `|ν^a||a|/|μ^r|` for `a` solving the isotropy-type equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeBoundSample {
    pub sin_theta: f64,
    pub bound: f64,
    pub residual: f64,
    pub t: f64,
}

impl ConeBoundSample {
    pub fn slack(&self) -> f64 {
        self.bound - self.sin_theta
    }
}

pub fn cone_bound_sample(mu_r: &Vector3<f64>, r: &Matrix3<f64>, t: f64, nu_a: &Vector3<f64>) -> ConeBoundSample {
    let (a, residual) = solve_e1(mu_r, r, &(mu_r * t), nu_a);
    let sin_theta = mu_r.cross(&(r * mu_r)).norm() / mu_r.norm_squared();
    ConeBoundSample {
        sin_theta,
        bound: nu_a.norm() * a.norm() / mu_r.norm(),
        residual,
        t,
    }
}

/// Uniformly distributed rotation from a random unit quaternion.
pub fn random_rotation(r: &mut impl rand::Rng) -> Matrix3<f64> {
    let q = sample::unit_direction(r, 4);
    let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    uq.to_rotation_matrix().into_inner()
}

/// `expr` evaluated along a trajectory.
pub fn along(expr: &Expression, traj: &TrajectoryRecord) -> Result<Vec<f64>, DynamicsError> {
    Ok(traj.states.iter().map(|x| expr.evaluate(x)).collect::<Result<Vec<_>, _>>()?)
}
