//! Synthetic Reynolds ensembles and the decomposed form of the symmetries.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::flow::{Dim, FlowState};
use super::{rules, NsError};
use crate::checks::Leg;
use crate::expr::{CompiledExpr, SpaceTimePoint};
use crate::frames::NsSymmetrySpec;

pub const ENSEMBLE_SIZE: usize = 4096;
pub const ENSEMBLE_SEED: u64 = 0xBEEF;
/// Largest wavenumber component of the synthetic modes.
const MAX_WAVENUMBER: i32 = 3;

/// One realization: `u' = cos(theta) b`, `p' = P sin(theta)`,
/// `psi' = S sin(theta)` with `theta = k . x - omega t + phase`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mode {
    #[serde(with = "crate::expr::vec3_serde")]
    pub k: Vector3<f64>,
    pub omega: f64,
    pub phase: f64,
    #[serde(with = "crate::expr::vec3_serde")]
    pub amplitude: Vector3<f64>,
    pub pressure: f64,
    pub stream: f64,
}

impl Mode {
    fn theta(&self, t: f64, x: &Vector3<f64>) -> f64 {
        self.k.dot(x) - self.omega * t + self.phase
    }

    pub fn velocity(&self, t: f64, x: &Vector3<f64>) -> Vector3<f64> {
        self.theta(t, x).cos() * self.amplitude
    }

    pub fn pressure(&self, t: f64, x: &Vector3<f64>) -> f64 {
        self.pressure * self.theta(t, x).sin()
    }

    pub fn stream(&self, t: f64, x: &Vector3<f64>) -> f64 {
        self.stream * self.theta(t, x).sin()
    }

    /// Amplitude of `div u' = -sin(theta) k . b`.
    pub fn divergence_amplitude(&self) -> f64 {
        self.k.dot(&self.amplitude).abs()
    }

    fn negated(&self) -> Mode {
        Mode { amplitude: -self.amplitude, pressure: -self.pressure, stream: -self.stream, ..*self }
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub modes: Vec<Mode>,
    pub mean: FlowState,
    pub seed: u64,
    mean_u: CompiledExpr,
    mean_p: CompiledExpr,
    mean_psi: Option<CompiledExpr>,
}

fn random_wavenumber(rng: &mut ChaCha8Rng, planar: bool) -> Vector3<f64> {
    loop {
        let mut c = || rng.random_range(-MAX_WAVENUMBER..=MAX_WAVENUMBER) as f64;
        let k = Vector3::new(c(), c(), if planar { 0.0 } else { c() });
        if k != Vector3::zeros() {
            return k;
        }
    }
}

fn random_mode(rng: &mut ChaCha8Rng, planar: bool) -> Mode {
    let k = random_wavenumber(rng, planar);
    let omega = rng.random_range(-1.0..1.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let pressure = rng.random_range(-1.0..1.0);
    if planar {
        let stream = rng.random_range(-1.0..1.0) / k.norm();
        let amplitude = stream * Vector3::new(k.y, -k.x, 0.0);
        return Mode { k, omega, phase, amplitude, pressure, stream };
    }
    // Curl of the vector potential a sin(theta).
    let amplitude = loop {
        let a = crate::sampling::random_unit(rng);
        let b = k.cross(&a) / k.norm();
        if b.norm() > 0.1 {
            break b;
        }
    };
    Mode { k, omega, phase, amplitude, pressure, stream: 0.0 }
}

impl Ensemble {
    pub fn from_modes(modes: Vec<Mode>, mean: FlowState, seed: u64) -> Result<Self, NsError> {
        if modes.len() < 2 {
            return Err(NsError::EmptyEnsemble(modes.len()));
        }
        let mean_u = CompiledExpr::new(&mean.u);
        let mean_p = CompiledExpr::new(&mean.p);
        let mean_psi = mean.psi.as_ref().filter(|_| mean.dim == Dim::Two).map(CompiledExpr::new);
        Ok(Self { modes, mean, seed, mean_u, mean_p, mean_psi })
    }

    /// `n` random solenoidal modes in antithetic pairs, so the fluctuations
    /// average to zero. Planar means give planar modes with stream functions.
    pub fn synthetic(n: usize, seed: u64, mean: FlowState) -> Result<Self, NsError> {
        if n < 2 {
            return Err(NsError::EmptyEnsemble(n));
        }
        if !n.is_multiple_of(2) {
            return Err(NsError::InvalidState(format!("ensemble size must be even, found {n}")));
        }
        let planar = mean.dim == Dim::Two;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            let m = random_mode(&mut rng, planar);
            modes.push(m);
            modes.push(m.negated());
        }
        Self::from_modes(modes, mean, seed)
    }

    /// The default ensemble over the given mean flow.
    pub fn standard(mean: FlowState) -> Result<Self, NsError> {
        Self::synthetic(ENSEMBLE_SIZE, ENSEMBLE_SEED, mean)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn is_planar(&self) -> bool {
        self.mean_psi.is_some() && self.modes.iter().all(|m| m.k.z == 0.0 && m.amplitude.z == 0.0)
    }

    /// Largest divergence amplitude over the realizations.
    pub fn max_divergence(&self) -> f64 {
        self.modes.iter().map(Mode::divergence_amplitude).fold(0.0, f64::max)
    }

    /// Sample means of the velocity and pressure fluctuations.
    pub fn fluctuation_mean(&self, pt: &SpaceTimePoint) -> (Vector3<f64>, f64) {
        let n = self.len() as f64;
        let (u, p) =
            self.modes.iter().fold((Vector3::zeros(), 0.0), |(u, p), m| (u + m.velocity(pt.t, &pt.x), p + m.pressure(pt.t, &pt.x)));
        (u / n, p / n)
    }

    fn mean_at(&self, pt: &SpaceTimePoint) -> Result<(Vector3<f64>, f64, f64), NsError> {
        let b = Default::default();
        let e = |e: crate::expr::EvalError| NsError::Singular(e.to_string());
        let u = self.mean_u.eval(pt, &b).map_err(e)?.as_vector().expect("vector mean");
        let p = self.mean_p.eval(pt, &b).map_err(e)?.as_scalar().expect("scalar mean");
        let psi = match &self.mean_psi {
            Some(c) => c.eval(pt, &b).map_err(e)?.as_scalar().expect("scalar stream function"),
            None => 0.0,
        };
        Ok((u, p, psi))
    }
}

fn second_moment<'a>(samples: impl Iterator<Item = &'a Vector3<f64>>, n: usize) -> Matrix3<f64> {
    samples.fold(Matrix3::zeros(), |acc, u| acc + u * u.transpose()) / n as f64
}

/// Reynolds stress `<u'_i u'_j>` at one point.
pub fn reynolds_tau(ens: &Ensemble, pt: &SpaceTimePoint) -> Result<Matrix3<f64>, NsError> {
    if ens.len() < 2 {
        return Err(NsError::EmptyEnsemble(ens.len()));
    }
    let u: Vec<Vector3<f64>> = ens.modes.iter().map(|m| m.velocity(pt.t, &pt.x)).collect();
    Ok(second_moment(u.iter(), u.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecomposedReport {
    pub symmetry: String,
    /// Largest sample mean of the transformed fluctuations.
    pub mean_preservation: f64,
    /// Largest mismatch between the transformed full field and the
    /// transformed mean plus transformed fluctuation.
    pub split: f64,
    /// Largest deviation of the transformed stress from `kappa^2 M tau M^T`.
    pub tau: f64,
    /// The factor `kappa^2` of the stress rule.
    pub tau_factor: f64,
    pub leg: Leg,
    pub witness: SpaceTimePoint,
    pub points: usize,
    pub tolerance: f64,
}

/// Applies the mean and fluctuation rules of `spec` to every realization and
/// checks that the decomposition and the stress rule are preserved.
pub fn check_decomposed_symmetry(
    ens: &Ensemble,
    spec: &NsSymmetrySpec,
    points: &[SpaceTimePoint],
    tol: f64,
) -> Result<DecomposedReport, NsError> {
    let div = ens.max_divergence();
    if div > tol {
        return Err(NsError::NotSolenoidal(div));
    }
    if matches!(spec, NsSymmetrySpec::S6 { .. }) && !ens.is_planar() {
        return Err(NsError::Dimension("S6 needs a planar ensemble with stream functions".into()));
    }
    let Some(first) = points.first() else {
        return Err(NsError::TooFewPoints { valid: 0, required: 1 });
    };
    let n = ens.len();
    let (mut mean_res, mut split, mut tau_res, mut witness, mut worst) = (0.0f64, 0.0f64, 0.0f64, *first, -1.0f64);
    let mut tau_factor = 1.0;
    let mut fl = Vec::with_capacity(n);
    for pt in points {
        let (t, x) = (pt.t, pt.x);
        let (um, pm, psim) = ens.mean_at(pt)?;
        let um_new = rules::velocity(spec, t, &x, &um);
        let pm_new = rules::pressure(spec, t, &x, pm, psim);
        let (m, k) = rules::velocity_factor(spec, t);
        tau_factor = k * k;
        fl.clear();
        let (mut pmean, mut local_split) = (0.0, 0.0f64);
        for mode in &ens.modes {
            let (u, p, psi) = (mode.velocity(t, &x), mode.pressure(t, &x), mode.stream(t, &x));
            let u_new = k * m * u;
            let p_new = rules::pressure_fluctuation(spec, p, psi);
            let full_u = rules::velocity(spec, t, &x, &(um + u));
            let full_p = rules::pressure(spec, t, &x, pm + p, psim + psi);
            local_split = local_split.max((full_u - um_new - u_new).amax()).max((full_p - pm_new - p_new).abs());
            pmean += p_new;
            fl.push(u_new);
        }
        let umean = fl.iter().sum::<Vector3<f64>>() / n as f64;
        let local_mean = umean.amax().max((pmean / n as f64).abs());
        let tau = reynolds_tau(ens, pt)?;
        let predicted = tau_factor * m * tau * m.transpose();
        let local_tau = (second_moment(fl.iter(), n) - predicted).amax();
        let local = local_mean.max(local_split).max(local_tau);
        if local > worst {
            worst = local;
            witness = *pt;
        }
        mean_res = mean_res.max(local_mean);
        split = split.max(local_split);
        tau_res = tau_res.max(local_tau);
    }
    Ok(DecomposedReport {
        symmetry: spec.tag().to_string(),
        mean_preservation: mean_res,
        split,
        tau: tau_res,
        tau_factor,
        leg: Leg::new(mean_res.max(split).max(tau_res), tol),
        witness,
        points: points.len(),
        tolerance: tol,
    })
}
