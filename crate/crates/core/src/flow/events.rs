use nalgebra::Vector3;

use super::dopri::Dense;
use crate::error::{Error, Result};
use crate::model::State;

/// Geometric surface on which an event fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// `n·x = d`.
    Plane { normal: Vector3<f64>, offset: f64 },
    /// `‖x − c‖ = R`.
    Sphere { center: State, radius: f64 },
    /// Boundary of the quadrant `V = {x ≤ 0, y ≤ 0}`; the event value is
    /// `max(x, y)`, so entry into `V` is a decreasing crossing.
    HalfSpaceEntry,
    /// `‖x − target‖ = r`; entering the ball is a decreasing crossing.
    Proximity { target: State, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Any,
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    Record,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub kind: EventKind,
    pub crossing: Crossing,
    pub action: EventAction,
    /// Integration stops once this many crossings have been recorded.
    pub max_count: Option<usize>,
    /// Crossings within this elapsed time from the start are ignored.
    pub ignore_before: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub id: usize,
    pub t: f64,
    pub state: State,
    pub direction: Crossing,
}

/// Value tolerance for polished event roots.
pub const EVENT_TOL: f64 = 1e-12;

impl EventSpec {
    pub fn new(kind: EventKind, crossing: Crossing, action: EventAction) -> Self {
        Self {
            kind,
            crossing,
            action,
            max_count: None,
            ignore_before: 0.0,
        }
    }

    pub fn plane(normal: Vector3<f64>, offset: f64, crossing: Crossing) -> Self {
        Self::new(EventKind::Plane { normal, offset }, crossing, EventAction::Record)
    }

    pub fn sphere(center: State, radius: f64, crossing: Crossing) -> Self {
        Self::new(EventKind::Sphere { center, radius }, crossing, EventAction::Record)
    }

    /// Terminating entry into `V = {x ≤ 0, y ≤ 0}`.
    pub fn quadrant_entry() -> Self {
        Self::new(
            EventKind::HalfSpaceEntry,
            Crossing::Decreasing,
            EventAction::Terminate,
        )
    }

    pub fn proximity(target: State, radius: f64) -> Self {
        Self::new(
            EventKind::Proximity { target, radius },
            Crossing::Decreasing,
            EventAction::Record,
        )
    }

    pub fn terminating(self) -> Self {
        Self {
            action: EventAction::Terminate,
            ..self
        }
    }

    pub fn with_max_count(self, n: usize) -> Self {
        Self {
            max_count: Some(n),
            ..self
        }
    }

    pub fn ignoring_before(self, elapsed: f64) -> Self {
        Self {
            ignore_before: elapsed,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EventKind::Plane { normal, .. } if normal.norm() == 0.0 => {
                Err(Error::InvalidConfig("plane normal must be nonzero".into()))
            }
            EventKind::Sphere { radius, .. } | EventKind::Proximity { radius, .. }
                if !(radius > 0.0) =>
            {
                Err(Error::InvalidConfig("radius must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Signed event function; the event fires at its zeros.
    #[inline]
    pub fn value(&self, s: &State) -> f64 {
        match self.kind {
            EventKind::Plane { normal, offset } => normal.dot(s) - offset,
            EventKind::Sphere { center, radius } => (s - center).norm() - radius,
            EventKind::HalfSpaceEntry => s.x.max(s.y),
            EventKind::Proximity { target, radius } => (s - target).norm() - radius,
        }
    }

    /// Locates a crossing inside the step described by `d`, given the event
    /// values at both ends. Only strict sign changes count, so grazing
    /// contacts are ignored.
    pub(crate) fn locate<const N: usize>(
        &self,
        d: &Dense<N>,
        g0: f64,
        g1: f64,
    ) -> Option<(f64, Crossing)> {
        let dir = if g0 < 0.0 && g1 >= 0.0 && !(g1 == 0.0 && g0 == 0.0) {
            Crossing::Increasing
        } else if g0 > 0.0 && g1 <= 0.0 {
            Crossing::Decreasing
        } else {
            return None;
        };
        // g1 == 0 exactly counts only when it is reached from a strict side
        if g1 == 0.0 && g0 == 0.0 {
            return None;
        }
        match (self.crossing, dir) {
            (Crossing::Increasing, Crossing::Decreasing)
            | (Crossing::Decreasing, Crossing::Increasing) => return None,
            _ => {}
        }
        let g = |t: f64| {
            let y = d.eval(t);
            self.value(&State::new(y[0], y[1], y[2]))
        };
        let t = polish_root(g, d.t0, d.t1(), g0, g1);
        Some((t, dir))
    }
}

/// Root of `g` on `[ta, tb]` with `g(ta) = ga`, `g(tb) = gb` of opposite
/// signs: Illinois false position with a bisection safeguard, stopped at
/// `|g| ≤ EVENT_TOL` or when the bracket collapses to rounding.
pub(crate) fn polish_root<G: Fn(f64) -> f64>(g: G, ta: f64, tb: f64, ga: f64, gb: f64) -> f64 {
    if gb == 0.0 {
        return tb;
    }
    if ga == 0.0 {
        return ta;
    }
    let (mut a, mut b, mut fa, mut fb) = (ta, tb, ga, gb);
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for it in 0..200 {
        let width = (b - a).abs();
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || it % 4 == 3 || (c - a).abs() < 0.01 * width || (b - c).abs() < 0.01 * width {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc.abs() <= EVENT_TOL * 1e-3 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if best.1.abs() <= EVENT_TOL * 1e-3 {
            break;
        }
    }
    best.0
}

/// Root of a monotone increasing `g` with `g(ta) < 0 ≤ g(tb)`.
pub(crate) fn solve_monotone<G: Fn(f64) -> f64>(g: G, ta: f64, tb: f64) -> f64 {
    let ga = g(ta);
    let gb = g(tb);
    polish_root(g, ta, tb, ga, gb)
}
