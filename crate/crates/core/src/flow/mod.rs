//! Adaptive integration of the model with event detection, arclength
//! accounting and transport of tangent and adjoint vectors.

pub mod dopri;
mod events;
mod transport;

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::model::{eval_field, Params, State};

pub use dopri::{Dense, StepControl};
pub use events::{Crossing, EventAction, EventKind, EventRecord, EventSpec};
pub(crate) use events::polish_root;
pub use transport::{
    transport_adjoint, transport_on_segment, transport_tangent, transport_tangent_reverse,
    TransportKind, TransportPath,
};

/// Escape radius beyond which a trajectory is declared divergent.
pub const R_ESC: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// What the integrator keeps besides events and the final point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    /// Only the initial and final states.
    Endpoints,
    /// Every accepted step.
    Steps,
    /// Every accepted step plus the continuous extension of each step.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Integration time span (positive, in time units).
    pub t_max: f64,
    pub direction: Direction,
    pub arclength_cap: Option<f64>,
    pub escape_radius: f64,
    pub record: Record,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            t_max: 5000.0,
            direction: Direction::Forward,
            arclength_cap: None,
            escape_radius: R_ESC,
            record: Record::Steps,
            max_steps: 20_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let tol_ok = |v: f64| (1e-14..=1e-3).contains(&v);
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must lie in [1e-14, 1e-3] (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.t_max > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig("t_max and max_step must be positive".into()));
        }
        if let Some(cap) = self.arclength_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidConfig("arclength cap must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Self { t_max, ..self }
    }

    pub fn with_record(self, record: Record) -> Self {
        Self { record, ..self }
    }

    pub fn with_direction(self, direction: Direction) -> Self {
        Self { direction, ..self }
    }

    pub fn with_arclength_cap(self, cap: f64) -> Self {
        Self {
            arclength_cap: Some(cap),
            ..self
        }
    }

    pub fn with_tolerances(self, rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TimeLimit,
    ArclengthCap,
    /// A terminating event fired (index into the event list).
    Event(usize),
    /// An event reached its `max_count`.
    EventCap(usize),
}

/// Time-ordered orbit segment with its event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<EventRecord>,
    pub arclength: f64,
    pub termination: Termination,
    pub dense: Vec<Dense<3>>,
    pub direction: Direction,
}

impl Trajectory {
    pub fn start(&self) -> (f64, State) {
        (self.times[0], self.states[0])
    }

    pub fn end(&self) -> (f64, State) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }

    pub fn duration(&self) -> f64 {
        (self.end().0 - self.start().0).abs()
    }

    pub fn events_of(&self, id: usize) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(move |e| e.id == id)
    }

    pub fn has_dense(&self) -> bool {
        !self.dense.is_empty()
    }

    /// Interpolated state at `t` from the recorded continuous extension.
    pub fn state_at(&self, t: f64) -> Option<State> {
        let seg = self.segment_index(t)?;
        Some(self.dense[seg].eval(t))
    }

    pub(crate) fn segment_index(&self, t: f64) -> Option<usize> {
        if self.dense.is_empty() {
            return None;
        }
        let sign = self.direction.sign();
        let key = sign * t;
        let first = sign * self.dense[0].t0;
        let last = sign * self.dense.last().unwrap().t1();
        let slack = 1e-12 * t.abs().max(1.0);
        if key < first - slack || key > last + slack {
            return None;
        }
        let idx = self
            .dense
            .partition_point(|d| sign * d.t1() < key)
            .min(self.dense.len() - 1);
        Some(idx)
    }

    /// Minimum distance to `target` over the recorded states, with its time.
    pub fn closest_approach(&self, target: &State) -> (f64, f64) {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(t, s)| (*t, (s - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

/// Quadrature of the speed `‖f‖` over part of a step (3-point Gauss–Legendre).
fn arclength_on(p: &Params, d: &Dense<3>, ta: f64, tb: f64) -> f64 {
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let half = 0.5 * (tb - ta);
    let mid = 0.5 * (tb + ta);
    let mut acc = 0.0;
    for k in 0..3 {
        let s = d.eval(mid + half * X[k]);
        acc += W[k] * eval_field(p, &s).norm();
    }
    acc * half.abs()
}

/// Integrates the model from `s0` under `cfg`, detecting `events`.
pub fn integrate(
    p: &Params,
    s0: &State,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<Trajectory> {
    cfg.validate()?;
    if !s0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("initial state is not finite".into()));
    }
    for e in events {
        e.validate()?;
    }
    let t0 = 0.0;
    let t_end = cfg.direction.sign() * cfg.t_max;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![*s0],
        events: Vec::new(),
        arclength: 0.0,
        termination: Termination::TimeLimit,
        dense: Vec::new(),
        direction: cfg.direction,
    };
    let mut counts = vec![0usize; events.len()];
    let mut g_prev: Vec<f64> = events.iter().map(|e| e.value(s0)).collect();
    let mut diverged: Option<(f64, State)> = None;
    let rhs = |_t: f64, y: &SVector<f64, 3>| eval_field(p, y);
    let result = dopri::integrate(rhs, t0, *s0, t_end, &cfg.step_control(), |d, y1| {
        let t1 = d.t1();
        // earliest stop inside this step
        let mut stop: Option<(f64, Termination)> = None;
        let seg_len = arclength_on(p, d, d.t0, t1);
        if let Some(cap) = cfg.arclength_cap {
            if traj.arclength + seg_len >= cap {
                let target = cap - traj.arclength;
                let tc = events::solve_monotone(
                    |t| arclength_on(p, d, d.t0, t) - target,
                    d.t0,
                    t1,
                );
                stop = Some((tc, Termination::ArclengthCap));
            }
        }
        // collect event roots in this step, in time order
        let mut found: Vec<(f64, usize, Crossing, State)> = Vec::new();
        for (i, e) in events.iter().enumerate() {
            let g1 = e.value(y1);
            if let Some((tr, dirn)) = e.locate(d, g_prev[i], g1) {
                let elapsed = (tr - t0).abs();
                if elapsed >= e.ignore_before {
                    found.push((tr, i, dirn, d.eval(tr)));
                }
            }
            g_prev[i] = g1;
        }
        let sign = cfg.direction.sign();
        found.sort_by(|a, b| (sign * a.0).total_cmp(&(sign * b.0)));
        for (tr, i, dirn, st) in found {
            if let Some((ts, _)) = stop {
                if sign * tr > sign * ts {
                    break;
                }
            }
            traj.events.push(EventRecord {
                id: i,
                t: tr,
                state: st,
                direction: dirn,
            });
            counts[i] += 1;
            let capped = events[i].max_count.is_some_and(|m| counts[i] >= m);
            if events[i].action == EventAction::Terminate {
                stop = Some((tr, Termination::Event(i)));
                break;
            }
            if capped {
                stop = Some((tr, Termination::EventCap(i)));
                break;
            }
        }
        if let Some((ts, why)) = stop {
            traj.arclength += arclength_on(p, d, d.t0, ts);
            traj.termination = why;
            if cfg.record == Record::Dense {
                traj.dense.push(d.clone());
            }
            return Ok(Some(ts));
        }
        traj.arclength += seg_len;
        if cfg.record != Record::Endpoints {
            traj.times.push(t1);
            traj.states.push(*y1);
        }
        if cfg.record == Record::Dense {
            traj.dense.push(d.clone());
        }
        if y1.norm() > cfg.escape_radius {
            diverged = Some((t1, *y1));
            return Ok(Some(t1));
        }
        Ok(None)
    });
    let (tf, yf) = result?;
    if traj.times.last() != Some(&tf) {
        traj.times.push(tf);
        traj.states.push(yf);
    }
    if let Some((t, state)) = diverged {
        return Err(Error::Divergence {
            t,
            state,
            partial: Box::new(traj),
        });
    }
    Ok(traj)
}

/// Arclength at each recorded sample, by trapezoidal quadrature of the speed
/// between samples, scaled so the last entry equals the integrator's own
/// arclength.
pub fn sample_arclengths(p: &Params, traj: &Trajectory) -> Vec<f64> {
    let mut partial = vec![0.0; traj.states.len()];
    for k in 1..traj.states.len() {
        let dt = (traj.times[k] - traj.times[k - 1]).abs();
        let v0 = eval_field(p, &traj.states[k - 1]).norm();
        let v1 = eval_field(p, &traj.states[k]).norm();
        partial[k] = partial[k - 1] + 0.5 * dt * (v0 + v1);
    }
    let scale = match partial.last() {
        Some(&l) if l > 0.0 => traj.arclength / l,
        _ => 1.0,
    };
    partial.iter_mut().for_each(|v| *v *= scale);
    partial
}

/// Writes a trajectory as CSV with columns `t,x,y,z,arclength`.
///
/// The arclength column is accumulated from the recorded samples by
/// trapezoidal quadrature of the speed between samples, scaled so the last
/// row equals the integrator's own arclength.
pub fn write_trajectory_csv<W: std::io::Write>(
    p: &Params,
    traj: &Trajectory,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,x,y,z,arclength")?;
    let partial = sample_arclengths(p, traj);
    for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            crate::io::num(*t),
            crate::io::num(s.x),
            crate::io::num(s.y),
            crate::io::num(s.z),
            crate::io::num(partial[k])
        )?;
    }
    Ok(())
}

/// Writes the event log as CSV with columns `event_id,t,x,y,z,direction`.
pub fn write_events_csv<W: std::io::Write>(traj: &Trajectory, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "event_id,t,x,y,z,direction")?;
    for e in &traj.events {
        let dir = match e.direction {
            Crossing::Increasing => "increasing",
            Crossing::Decreasing => "decreasing",
            Crossing::Any => "any",
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.id,
            crate::io::num(e.t),
            crate::io::num(e.state.x),
            crate::io::num(e.state.y),
            crate::io::num(e.state.z),
            dir
        )?;
    }
    Ok(())
}
