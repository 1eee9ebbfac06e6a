//! Fixed-step integration of `m xddot = F` and trajectory transport.

use std::io;

use nalgebra::Vector3;
use serde::Serialize;

use super::model::ForceModel;
use super::MechanicsError;
use crate::expr::vec3_serde;
use crate::frames::{EuclideanSpec, GalileiSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    #[serde(with = "vec3_serde")]
    pub x: Vector3<f64>,
    #[serde(with = "vec3_serde")]
    pub v: Vector3<f64>,
}

impl State {
    pub fn new(t: f64, x: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { t, x, v }
    }
}

/// Uniformly sampled states of one particle in one frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub frame: String,
    pub dt: f64,
    pub samples: Vec<State>,
}

/// Mechanical frame changes.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameChange {
    Galilei(GalileiSpec),
    Euclidean(EuclideanSpec),
}

impl FrameChange {
    pub fn label(&self) -> String {
        crate::frames::FrameTransform::from(self.clone()).label()
    }

    pub fn map_state(&self, s: &State) -> State {
        match self {
            FrameChange::Galilei(g) => State::new(s.t + g.tau, g.r * s.x + g.v * s.t + g.c, g.r * s.v + g.v),
            FrameChange::Euclidean(e) => State::new(s.t + e.tau, e.r(s.t) * s.x + e.c(s.t), e.map_velocity(s.t, &s.x, &s.v)),
        }
    }
}

impl From<FrameChange> for crate::frames::FrameTransform {
    fn from(f: FrameChange) -> Self {
        match f {
            FrameChange::Galilei(g) => Self::Galilei(g),
            FrameChange::Euclidean(e) => Self::Euclidean(e),
        }
    }
}

impl Trajectory {
    /// Checks that times increase with a uniform step.
    pub fn new(frame: &str, dt: f64, samples: Vec<State>) -> Result<Self, MechanicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(MechanicsError::NonPositiveStep(dt));
        }
        let t0 = samples.first().map_or(0.0, |s| s.t);
        for (k, w) in samples.windows(2).enumerate() {
            let expected = t0 + (k + 1) as f64 * dt;
            if w[1].t <= w[0].t || (w[1].t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(MechanicsError::NonUniform { index: k + 1 });
            }
        }
        Ok(Self { frame: frame.into(), dt, samples })
    }

    pub fn last(&self) -> &State {
        self.samples.last().expect("trajectories are nonempty")
    }

    /// CSV with columns `t,x1,x2,x3,v1,v2,v3`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x1", "x2", "x3", "v1", "v2", "v3"])?;
        for s in &self.samples {
            let row = [s.t, s.x.x, s.x.y, s.x.z, s.v.x, s.v.y, s.v.z];
            out.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn accel(model: &ForceModel, t: f64, x: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>, MechanicsError> {
    Ok(model.force(t, x, v)? / model.mass)
}

/// Classical fourth-order Runge-Kutta with fixed step `dt`.
pub fn integrate(model: &ForceModel, ic: State, dt: f64, n_steps: usize) -> Result<Trajectory, MechanicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MechanicsError::NonPositiveStep(dt));
    }
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(ic);
    let (mut x, mut v) = (ic.x, ic.v);
    for k in 0..n_steps {
        let t = ic.t + k as f64 * dt;
        let h = 0.5 * dt;
        let a1 = accel(model, t, &x, &v)?;
        let (x2, v2) = (x + v * h, v + a1 * h);
        let a2 = accel(model, t + h, &x2, &v2)?;
        let (x3, v3) = (x + v2 * h, v + a2 * h);
        let a3 = accel(model, t + h, &x3, &v3)?;
        let (x4, v4) = (x + v3 * dt, v + a3 * dt);
        let a4 = accel(model, t + dt, &x4, &v4)?;
        x += (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
        v += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        samples.push(State::new(ic.t + (k + 1) as f64 * dt, x, v));
    }
    Ok(Trajectory { frame: "inertial".into(), dt, samples })
}

/// Pointwise mapped states.
pub fn transform_trajectory(traj: &Trajectory, spec: &FrameChange) -> Trajectory {
    Trajectory { frame: spec.label(), dt: traj.dt, samples: traj.samples.iter().map(|s| spec.map_state(s)).collect() }
}
