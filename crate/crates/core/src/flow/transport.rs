use nalgebra::{SVector, Vector3};

use super::dopri::{self, StepControl};
use super::Trajectory;
use crate::error::{Error, Result};
use crate::model::{eval_jacobian, Params, State};

/// Which linearised equation to transport along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    /// `v' = Df(x(t)) v`.
    Tangent,
    /// `w' = −Df(x(t))ᵀ w`.
    Adjoint,
}

/// Samples `(t, v(t))` of a transported vector, one per accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPath {
    pub times: Vec<f64>,
    pub vectors: Vec<Vector3<f64>>,
}

impl TransportPath {
    pub fn last(&self) -> (f64, Vector3<f64>) {
        (*self.times.last().unwrap(), *self.vectors.last().unwrap())
    }
}

const TRANSPORT_CTL: StepControl = StepControl {
    rel_tol: 1e-11,
    abs_tol: 1e-13,
    max_step: 0.25,
    max_steps: 20_000_000,
};

impl Trajectory {
    fn state_clamped(&self, t: f64) -> State {
        let idx = self.segment_index(t).unwrap_or_else(|| {
            let sign = self.direction.sign();
            if sign * t < sign * self.dense[0].t0 {
                0
            } else {
                self.dense.len() - 1
            }
        });
        self.dense[idx].eval(t)
    }
}

/// Transports `v0` from time `t_from` to `t_to` along the recorded
/// trajectory (either direction in time). The trajectory must have been
/// integrated with `Record::Dense`.
pub fn transport_on_segment(
    p: &Params,
    traj: &Trajectory,
    kind: TransportKind,
    t_from: f64,
    t_to: f64,
    v0: Vector3<f64>,
) -> Result<TransportPath> {
    if !traj.has_dense() {
        return Err(Error::InvalidConfig(
            "transport requires a trajectory recorded with dense output".into(),
        ));
    }
    let scale = v0.norm();
    if scale == 0.0 {
        return Ok(TransportPath {
            times: vec![t_from, t_to],
            vectors: vec![v0, v0],
        });
    }
    let rhs = |t: f64, v: &SVector<f64, 3>| {
        let j = eval_jacobian(p, &traj.state_clamped(t));
        match kind {
            TransportKind::Tangent => j * v,
            TransportKind::Adjoint => -(j.transpose() * v),
        }
    };
    let mut path = TransportPath {
        times: vec![t_from],
        vectors: vec![v0],
    };
    let (tf, vf) = dopri::integrate(rhs, t_from, v0 / scale, t_to, &TRANSPORT_CTL, |d, v1| {
        path.times.push(d.t1());
        path.vectors.push(v1 * scale);
        Ok(None)
    })?;
    if path.times.last() != Some(&tf) {
        path.times.push(tf);
        path.vectors.push(vf * scale);
    }
    Ok(path)
}

/// Solves the variational equation along `traj` from its start to its end.
pub fn transport_tangent(p: &Params, traj: &Trajectory, v0: Vector3<f64>) -> Result<TransportPath> {
    let (t0, _) = traj.start();
    let (t1, _) = traj.end();
    transport_on_segment(p, traj, TransportKind::Tangent, t0, t1, v0)
}

/// Solves the adjoint variational equation along `traj` from its start.
pub fn transport_adjoint(p: &Params, traj: &Trajectory, w0: Vector3<f64>) -> Result<TransportPath> {
    let (t0, _) = traj.start();
    let (t1, _) = traj.end();
    transport_on_segment(p, traj, TransportKind::Adjoint, t0, t1, w0)
}

/// Solves the variational equation from the end of `traj` back to its start.
pub fn transport_tangent_reverse(
    p: &Params,
    traj: &Trajectory,
    v_end: Vector3<f64>,
) -> Result<TransportPath> {
    let (t0, _) = traj.start();
    let (t1, _) = traj.end();
    transport_on_segment(p, traj, TransportKind::Tangent, t1, t0, v_end)
}
