//! Signed split and gap functions for connections of the unstable manifold
//! of the origin, bisection drivers along a parameter slice, and the
//! orientation index of the primary homoclinic orbit.

use std::fmt;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::flow::{self, Crossing, EventRecord, EventSpec, IntegratorConfig, Record, Termination, Trajectory};
use crate::flow::transport_tangent_reverse;
use crate::linalg::eigenvector2;
use crate::manifolds::{
    grow_orbit_manifold, section_trace, CurveSet, ManifoldPatch, OrbitManifold, StableGraph,
};
use crate::model::{self, classify_case, CaseReport, Params, State};
use crate::orbits::{
    continue_orbit, detect_multiplier_event, find_periodic_orbit, Branch, BranchEnd,
    ContinuationControl, MultiplierEvent, Orientability, PeriodicOrbit, SectionMap,
};
use crate::winding::{compute_zeta, unstable_seed, Zeta};

/// Cross products below this are treated as collinear segments.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Radius of the ball around the origin in which splits are measured.
pub const R_LOC: f64 = 0.05;
/// Loops of the unstable manifold farther than this from both saddle
/// orbits are not attributed to either.
pub const PROXIMITY_RADIUS: f64 = 0.1;
/// Default bisection tolerance in μ for signed detectors.
pub const SIGNED_TOL: f64 = 1e-8;
/// Default bisection tolerance in μ (or α) for integer-valued detectors.
pub const INTEGER_TOL: f64 = 1e-6;
/// Largest split accepted as lying on a homoclinic locus.
pub const LOCUS_TOL: f64 = 1e-6;
/// Offset of the unstable-manifold seed from the origin.
pub const SEED_OFFSET: f64 = 1e-7;

const MAX_ITERATES: usize = 150;
const RUN_T_MAX: f64 = 5000.0;

fn run_config(record: Record) -> IntegratorConfig {
    IntegratorConfig::default()
        .with_t_max(RUN_T_MAX)
        .with_tolerances(1e-12, 1e-14)
        .with_record(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapKind {
    HomoclinicToOrigin,
    HeteroclinicToOrbit,
    TangencyCount,
}

impl GapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GapKind::HomoclinicToOrigin => "homoclinic-to-0",
            GapKind::HeteroclinicToOrbit => "heteroclinic-to-orbit",
            GapKind::TangencyCount => "tangency-count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapValue {
    Signed(f64),
    Count(usize),
}

impl GapValue {
    pub fn signed(self) -> Option<f64> {
        match self {
            GapValue::Signed(v) => Some(v),
            GapValue::Count(_) => None,
        }
    }

    pub fn count(self) -> Option<usize> {
        match self {
            GapValue::Count(n) => Some(n),
            GapValue::Signed(_) => None,
        }
    }
}

/// What the measuring trajectory did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySummary {
    pub duration: f64,
    /// Crossings of the loop section `x = q_x` or of the target's section.
    pub crossings: usize,
    /// Distance to the origin or to the target fixed point where measured.
    pub closest: f64,
    pub final_state: State,
    /// Loop or section iterate at which the value was taken.
    pub iterate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMeasurement {
    pub kind: GapKind,
    pub value: GapValue,
    pub summary: TrajectorySummary,
}

struct UnstableRun {
    traj: Trajectory,
    loops: Vec<EventRecord>,
    entries: Vec<EventRecord>,
}

impl UnstableRun {
    fn reached_v(&self) -> bool {
        self.traj.termination == Termination::Event(2)
    }
}

/// Integrates the unstable manifold branch of the origin until it enters `V`
/// or completes `max_loops` loops, recording loop-section crossings and
/// entries into the ball of radius `ball`.
fn run_unstable(p: &Params, max_loops: usize, ball: f64, record: Record) -> Result<UnstableRun> {
    let q_x = model::find_q(p)?.location.x;
    let s0 = unstable_seed(p, SEED_OFFSET)?;
    let events = [
        EventSpec::plane(State::x(), q_x, Crossing::Decreasing).with_max_count(max_loops),
        EventSpec::sphere(State::zeros(), ball, Crossing::Decreasing),
        EventSpec::quadrant_entry(),
    ];
    let traj = flow::integrate(p, &s0, &run_config(record), &events)?;
    let loops = traj.events_of(0).copied().collect();
    let entries = traj.events_of(1).copied().collect();
    Ok(UnstableRun {
        traj,
        loops,
        entries,
    })
}

/// Split of the unstable manifold from the stable manifold of the origin on
/// its first return.
pub fn homoclinic_split(p: &Params) -> Result<GapMeasurement> {
    homoclinic_split_after(p, 1)
}

/// Signed split on the pass near the origin that follows loop `k` of the
/// unstable manifold.
///
/// When the pass enters the ball of radius [`R_LOC`] the value is the offset
/// `u − h(s, ss)` from the local stable-manifold graph at the entry point.
/// Otherwise it is the distance of closest approach, signed by the outcome of
/// the pass: negative when the branch then enters `V`, positive when it
/// starts another loop. Either way a positive value means the branch passes
/// on the side of `W^s(0)` that leads to another loop.
pub fn homoclinic_split_after(p: &Params, k: usize) -> Result<GapMeasurement> {
    let k = k.max(1);
    let run = run_unstable(p, k + 1, R_LOC, Record::Steps)?;
    if run.loops.len() < k {
        return Err(Error::NoCloseApproach);
    }
    let t_a = run.loops[k - 1].t;
    let (t_end, final_state) = run.traj.end();
    let t_b = run.loops.get(k).map_or(t_end, |e| e.t);
    let closest = run
        .traj
        .times
        .iter()
        .zip(&run.traj.states)
        .filter(|(t, _)| **t > t_a && **t <= t_b)
        .map(|(_, s)| s.norm())
        .fold(final_state.norm(), f64::min);
    let entry = run.entries.iter().find(|e| e.t > t_a && e.t <= t_b);
    let value = match entry {
        Some(e) => StableGraph::new(p)?.offset(&e.state),
        None => {
            let continues = run.loops.len() > k;
            if !continues && !run.reached_v() {
                return Err(Error::NoCloseApproach);
            }
            if continues {
                closest
            } else {
                -closest
            }
        }
    };
    Ok(GapMeasurement {
        kind: GapKind::HomoclinicToOrigin,
        value: GapValue::Signed(value),
        summary: TrajectorySummary {
            duration: run.traj.duration(),
            crossings: run.loops.len(),
            closest,
            final_state,
            iterate: k,
        },
    })
}

/// Decomposition of section offsets in the eigenbasis of an orbit's
/// linearised return map.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SaddleFrame {
    center: Vector2<f64>,
    inverse: Matrix2<f64>,
    lambda_u: f64,
}

impl SaddleFrame {
    fn new(orbit: &PeriodicOrbit) -> Result<Self> {
        if orbit.orientability == Orientability::Complex || !orbit.is_saddle() {
            return Err(Error::OrbitMissing(format!(
                "{} is not a saddle with real multipliers",
                orbit.label
            )));
        }
        let dp = orbit.return_jacobian;
        let (l1, l2) = (orbit.multipliers[0].re, orbit.multipliers[1].re);
        let mut v1 = eigenvector2(&dp, l1);
        let mut v2 = eigenvector2(&dp, l2);
        for v in [&mut v1, &mut v2] {
            if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
                *v = -*v;
            }
        }
        let inverse = Matrix2::from_columns(&[v1, v2])
            .try_inverse()
            .ok_or_else(|| Error::OrbitMissing("degenerate Floquet eigenvectors".into()))?;
        Ok(Self {
            center: orbit.section_point(),
            inverse,
            lambda_u: l2,
        })
    }

    /// Component of `u − center` along the unstable eigenvector.
    fn unstable_component(&self, u: &Vector2<f64>) -> f64 {
        (self.inverse * (u - self.center)).y
    }
}

/// Signed gap between the unstable manifold of the origin and the stable
/// manifold of `target`.
///
/// The branch is followed through the target's section. After the primary
/// excursion, the iterate closest to the fixed point is decomposed in the
/// eigenbasis of the linearised return map, and its unstable component is
/// returned, multiplied by `sign(Λ2)^k` for iterate `k` so that the sign does
/// not alternate with the iterate index.
pub fn hetero_gap(p: &Params, target: &PeriodicOrbit) -> Result<GapMeasurement> {
    let frame = SaddleFrame::new(target)?;
    let section = target.section;
    let s0 = unstable_seed(p, SEED_OFFSET)?;
    let events = [
        section.event().with_max_count(MAX_ITERATES),
        EventSpec::quadrant_entry(),
    ];
    let traj = flow::integrate(p, &s0, &run_config(Record::Endpoints), &events)?;
    let hits: Vec<&EventRecord> = traj.events_of(0).collect();
    let (k, u, d) = hits
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, e)| {
            let u = section.to_section(&e.state);
            (i + 1, u, (u - frame.center).norm())
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or(Error::NeverNearOrbit(f64::INFINITY))?;
    if d > PROXIMITY_RADIUS {
        return Err(Error::NeverNearOrbit(d));
    }
    let sign = if frame.lambda_u < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    let (_, final_state) = traj.end();
    Ok(GapMeasurement {
        kind: GapKind::HeteroclinicToOrbit,
        value: GapValue::Signed(sign * frame.unstable_component(&u)),
        summary: TrajectorySummary {
            duration: traj.duration(),
            crossings: hits.len(),
            closest: d,
            final_state,
            iterate: k,
        },
    })
}

/// Orientation index of the homoclinic orbit at `p` with the default ball.
pub fn orientation_index(p: &Params) -> Result<f64> {
    orientation_index_with(p, R_LOC)
}

/// Orientation index of the homoclinic orbit, which must exist at `p`.
///
/// The orbit is followed from its departure until it enters the ball of
/// radius `r_end` around the origin. There the tangent plane of the stable
/// manifold is known from the local graph; its `ss`-direction is transported
/// backward to the departure point and decomposed in the eigenbasis of the
/// origin. The index is `c_ss / |(c_s, c_ss)|`: close to +1 when the stable
/// manifold closes along the strong stable direction without a twist, close
/// to −1 when it twists, and passing through 0 at an inclination flip.
pub fn orientation_index_with(p: &Params, r_end: f64) -> Result<f64> {
    let split = homoclinic_split(p)?
        .value
        .signed()
        .expect("split is signed");
    if split.abs() > LOCUS_TOL {
        return Err(Error::NotOnHomoclinicLocus(split));
    }
    let graph = StableGraph::new(p)?;
    let s0 = unstable_seed(p, SEED_OFFSET)?;
    let q_x = model::find_q(p)?.location.x;
    let events = [
        EventSpec::plane(State::x(), q_x, Crossing::Decreasing),
        EventSpec::sphere(State::zeros(), r_end, Crossing::Decreasing).terminating(),
        EventSpec::quadrant_entry(),
    ];
    let cfg = run_config(Record::Dense).with_t_max(200.0);
    let traj = flow::integrate(p, &s0, &cfg, &events)?;
    let (_, end) = traj.end();
    if traj.termination != Termination::Event(1) || traj.events_of(0).count() != 1 {
        return Err(Error::TruncationTooShort(end.norm()));
    }
    let (_, tss) = graph.tangents(&end);
    let path = transport_tangent_reverse(p, &traj, tss)?;
    let (_, v0) = path.last();
    let c = graph.coordinates(&v0);
    Ok(c.z / c.y.hypot(c.z))
}

/// A located codimension-one point on a parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoint {
    pub kind: String,
    pub alpha: f64,
    pub mu: f64,
    /// Width of the final bracket in the bisected parameter.
    pub bracket: f64,
    /// Loops of the connecting orbit near Γ_o.
    pub loops_gamma_o: usize,
    /// Loops of the connecting orbit near Γ_t.
    pub loops_gamma_t: usize,
    pub case: Option<CaseReport>,
}

impl fmt::Display for BifurcationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} alpha={} mu={:.9e} bracket={:.1e} n={} m={}",
            self.kind, self.alpha, self.mu, self.bracket, self.loops_gamma_o, self.loops_gamma_t
        )
    }
}

/// Writes `kind,alpha,mu,bracket,loops_gamma_o,loops_gamma_t`.
pub fn write_bifurcation_csv<W: std::io::Write>(
    points: &[BifurcationPoint],
    out: &mut W,
) -> std::io::Result<()> {
    use crate::io::num;
    writeln!(out, "kind,alpha,mu,bracket,loops_gamma_o,loops_gamma_t")?;
    for b in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            b.kind,
            num(b.alpha),
            num(b.mu),
            num(b.bracket),
            b.loops_gamma_o,
            b.loops_gamma_t
        )?;
    }
    Ok(())
}

/// Bisection on a two-valued predicate; `side(x)` is `true` on the side of
/// `hi`. Returns the final bracket.
fn bisect<F>(lo: f64, hi: f64, tol: f64, mut side: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<bool>,
{
    let (mut a, mut b) = (lo, hi);
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if side(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok((a, b))
}

fn failure(mu: f64) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ Error::DetectorFailure { .. } => e,
        e => Error::DetectorFailure {
            mu,
            source: Box::new(e),
        },
    }
}

/// Which saddle orbit a detector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitRole {
    GammaO,
    GammaT,
}

impl OrbitRole {
    pub fn label(self) -> &'static str {
        match self {
            OrbitRole::GammaO => "Γ_o",
            OrbitRole::GammaT => "Γ_t",
        }
    }
}

/// Saddle orbits Γ_o and Γ_t along a slice of fixed α, tracked from one
/// branch computed through their common fold.
#[derive(Debug, Clone)]
pub struct SliceContext {
    pub base: Params,
    /// Γ_o from the reference μ to the fold, then the branch through the
    /// fold and back toward the reference μ.
    pub branch: Branch,
}

/// Step bound for natural-parameter tracking of a saddle orbit.
const TRACK_STEP: f64 = 2e-4;

impl SliceContext {
    /// Locates Γ_o at `(alpha, mu_ref)` from `guess` and continues it through
    /// its fold down to `mu_low` and back to `mu_ref`.
    pub fn new(base: &Params, mu_ref: f64, mu_low: f64, guess: &State) -> Result<Self> {
        let p = base.with_mu(mu_ref);
        let section = SectionMap::q_plane(&p)?;
        let o = find_periodic_orbit(&p, &section, guess, 1)?;
        let ctl = ContinuationControl::default();
        let down = continue_orbit(&o, mu_low, &ctl)?;
        let mut points = down.points.clone();
        if down.end == BranchEnd::TurningPoint {
            let back = continue_orbit(&down.last().orbit, mu_ref, &ctl)?;
            points.extend(back.points.into_iter().skip(1));
        }
        Ok(Self {
            base: *base,
            branch: Branch {
                points,
                end: down.end,
            },
        })
    }

    /// Slice at reference parameters with Γ_o located at μ = −0.002.
    pub fn reference(alpha: f64) -> Result<Self> {
        Self::standard(&Params::reference(alpha, -0.002))
    }

    /// Slice through `base` (its μ is ignored) with Γ_o located at
    /// μ = −0.002 and continued down to μ = −0.008.
    pub fn standard(base: &Params) -> Result<Self> {
        let p = base.with_mu(-0.002);
        let q = model::find_q(&p)?.location;
        Self::new(&p, -0.002, -0.008, &State::new(q.x, -0.3437, 0.0705))
    }

    pub fn params(&self, mu: f64) -> Params {
        self.base.with_mu(mu)
    }

    fn samples(&self, role: OrbitRole) -> impl Iterator<Item = &PeriodicOrbit> {
        self.branch.points.iter().map(|b| &b.orbit).filter(move |o| {
            o.is_saddle()
                && match role {
                    OrbitRole::GammaO => o.orientability == Orientability::Orientable,
                    OrbitRole::GammaT => o.orientability == Orientability::Nonorientable,
                }
        })
    }

    /// The saddle orbit `role` at parameter `mu`, tracked from the nearest
    /// branch sample.
    pub fn orbit(&self, role: OrbitRole, mu: f64) -> Result<PeriodicOrbit> {
        let start = self
            .samples(role)
            .min_by(|a, b| (a.params.mu - mu).abs().total_cmp(&(b.params.mu - mu).abs()))
            .ok_or_else(|| Error::OrbitMissing(format!("no {} on the branch", role.label())))?;
        let mut prev: Option<PeriodicOrbit> = None;
        let mut cur = start.clone();
        let mut h = TRACK_STEP.min((mu - cur.params.mu).abs());
        while cur.params.mu != mu {
            let dir = (mu - cur.params.mu).signum();
            let next_mu = if (mu - cur.params.mu).abs() <= h {
                mu
            } else {
                cur.params.mu + dir * h
            };
            let guess = match &prev {
                Some(pv) if pv.params.mu != cur.params.mu => {
                    let r = (next_mu - cur.params.mu) / (cur.params.mu - pv.params.mu);
                    cur.fixed_point + (cur.fixed_point - pv.fixed_point) * r
                }
                _ => cur.fixed_point,
            };
            match find_periodic_orbit(&self.params(next_mu), &cur.section, &guess, cur.loop_count) {
                Ok(o) => {
                    prev = Some(cur);
                    cur = o;
                    h = (h * 1.5).min(TRACK_STEP);
                }
                Err(e) => {
                    h *= 0.5;
                    if h < 1e-10 {
                        return Err(Error::OrbitMissing(format!(
                            "{} lost near mu = {}: {e}",
                            role.label(),
                            cur.params.mu
                        )));
                    }
                }
            }
        }
        Ok(cur.with_label(role.label()))
    }

    /// Loops of the unstable manifold of the origin attributed to Γ_o and
    /// Γ_t among loops `2..=last` (the first loop is the primary excursion).
    pub fn rotation_counts(&self, mu: f64, last: usize) -> Result<(usize, usize)> {
        if last < 2 {
            return Ok((0, 0));
        }
        let p = self.params(mu);
        let run = run_unstable(&p, last, R_LOC, Record::Endpoints)?;
        let plane = SectionMap::q_plane(&p)?;
        let anchor = |role| -> Option<State> {
            let o = self.orbit(role, mu).ok()?;
            let tr = flow::integrate(
                &p,
                &o.fixed_point,
                &o.section.integrator.with_t_max(o.period * 1.01),
                &[plane.event().with_max_count(1)],
            )
            .ok()?;
            let hit = tr.events_of(0).next().map(|e| e.state);
            hit
        };
        let (ao, at) = (anchor(OrbitRole::GammaO), anchor(OrbitRole::GammaT));
        let dist = |a: Option<State>, s: &State| a.map_or(f64::INFINITY, |a| (a - s).norm());
        let (mut n, mut m) = (0, 0);
        for e in run.loops.iter().take(last).skip(1) {
            let (d_o, d_t) = (dist(ao, &e.state), dist(at, &e.state));
            if d_o.min(d_t) > PROXIMITY_RADIUS {
                continue;
            }
            if d_o <= d_t {
                n += 1;
            } else {
                m += 1;
            }
        }
        Ok((n, m))
    }
}

/// Quantity whose change across a bracket marks a bifurcation.
/// Section-coordinate polylines of a trace.
fn polylines(set: &CurveSet, section: &SectionMap) -> Vec<Vec<Vector2<f64>>> {
    set.curves
        .iter()
        .filter(|c| c.points.len() >= 2)
        .map(|c| c.points.iter().map(|s| section.to_section(s)).collect())
        .collect()
}

/// Proper crossing point of segments `[a0, a1]` and `[b0, b1]`; collinear
/// or touching pairs do not count.
fn segment_crossing(
    a0: &Vector2<f64>,
    a1: &Vector2<f64>,
    b0: &Vector2<f64>,
    b1: &Vector2<f64>,
) -> Option<Vector2<f64>> {
    let cross = |u: Vector2<f64>, v: Vector2<f64>| u.x * v.y - u.y * v.x;
    let (r, q) = (a1 - a0, b1 - b0);
    let denom = cross(r, q);
    if denom.abs() <= COLLINEAR_TOL * r.norm() * q.norm() {
        return None;
    }
    let t = cross(b0 - a0, q) / denom;
    let u = cross(b0 - a0, r) / denom;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then(|| a0 + r * t)
}

type Segment = (Vector2<f64>, Vector2<f64>, [f64; 4]);

fn segments(ls: &[Vec<Vector2<f64>>]) -> Vec<Segment> {
    ls.iter()
        .flat_map(|l| {
            l.windows(2).map(|w| {
                let bb = [w[0].x.min(w[1].x), w[0].y.min(w[1].y), w[0].x.max(w[1].x), w[0].y.max(w[1].y)];
                (w[0], w[1], bb)
            })
        })
        .collect()
}

/// Crossing points between two families of polylines.
pub fn crossing_points(a: &[Vec<Vector2<f64>>], b: &[Vec<Vector2<f64>>]) -> Vec<Vector2<f64>> {
    let (sa, sb) = (segments(a), segments(b));
    let overlap = |p: &[f64; 4], q: &[f64; 4]| p[0] <= q[2] && q[0] <= p[2] && p[1] <= q[3] && q[1] <= p[3];
    sa.iter()
        .flat_map(|(a0, a1, ba)| {
            sb.iter()
                .filter(move |(_, _, bb)| overlap(ba, bb))
                .filter_map(move |(b0, b1, _)| segment_crossing(a0, a1, b0, b1))
        })
        .collect()
}

pub fn count_crossings(a: &[Vec<Vector2<f64>>], b: &[Vec<Vector2<f64>>]) -> usize {
    crossing_points(a, b).len()
}

/// Section-coordinate polylines of the trace of a patch.
pub fn trace_polylines(patch: &ManifoldPatch, section: &SectionMap) -> Vec<Vec<Vector2<f64>>> {
    polylines(&section_trace(patch, section.normal, section.offset, section.crossing), section)
}

/// Counts transverse intersections between the section traces of two
/// manifold patches. A count that drops to zero under parameter change
/// marks a tangency of the two manifolds.
pub fn tangency_count(a: &ManifoldPatch, b: &ManifoldPatch, section: &SectionMap) -> Result<GapMeasurement> {
    if std::ptr::eq(a, b) || (a.owner == b.owner && a.stability == b.stability) {
        return Err(Error::InvalidConfig("tangency count needs two different manifolds".into()));
    }
    let trace = |m: &ManifoldPatch| section_trace(m, section.normal, section.offset, section.crossing);
    let (ta, tb) = (trace(a), trace(b));
    let (la, lb) = (polylines(&ta, section), polylines(&tb, section));
    if la.is_empty() || lb.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = count_crossings(&la, &lb);
    let closest = la
        .iter()
        .flatten()
        .flat_map(|u| lb.iter().flatten().map(move |v| (u - v).norm()))
        .fold(f64::INFINITY, f64::min);
    let last = a.trajectories.last().map(|t| t.end()).unwrap_or((0.0, State::zeros()));
    Ok(GapMeasurement {
        kind: GapKind::TangencyCount,
        value: GapValue::Count(n),
        summary: TrajectorySummary {
            duration: a.trajectories.iter().map(Trajectory::duration).fold(0.0, f64::max),
            crossings: ta.point_count() + tb.point_count(),
            closest,
            final_state: last.1,
            iterate: ta.curves.len() + tb.curves.len(),
        },
    })
}

/// Eigen-coordinate `s` of the plane near the origin on which a patch is
/// compared with the local stable manifold graph.
pub const GRAPH_PLANE_S: f64 = 0.1;
/// Half-widths in `ss` and `u` of the window on that plane.
pub const GRAPH_WINDOW: (f64, f64) = (0.05, 0.1);

/// Counts crossings of a patch with the stable manifold of the origin: sign
/// changes of the offset from the local graph along the trace of the patch
/// on the plane `s = GRAPH_PLANE_S`, restricted to the graph window.
pub fn origin_tangency_count(p: &Params, patch: &ManifoldPatch) -> Result<GapMeasurement> {
    let graph = StableGraph::new(p)?;
    let inverse = graph
        .eigen
        .basis()
        .try_inverse()
        .ok_or_else(|| Error::EigenstructureMissing("singular eigenbasis at the origin".into()))?;
    let normal = inverse.row(1).transpose();
    let trace = section_trace(patch, normal, GRAPH_PLANE_S, Crossing::Decreasing);
    let (w_ss, w_u) = GRAPH_WINDOW;
    let mut count = 0;
    let mut kept = 0;
    let mut closest = f64::INFINITY;
    for c in &trace.curves {
        let mut prev: Option<f64> = None;
        for x in &c.points {
            let xi = graph.coordinates(x);
            if xi.z.abs() > w_ss || xi.x.abs() > w_u {
                prev = None;
                continue;
            }
            let off = graph.offset(x);
            kept += 1;
            closest = closest.min(off.abs());
            if prev.is_some_and(|q| q.signum() != off.signum()) {
                count += 1;
            }
            prev = Some(off);
        }
    }
    if kept == 0 {
        return Err(Error::EmptyTrace);
    }
    let last = patch.trajectories.last().map(|t| t.end().1).unwrap_or_else(State::zeros);
    Ok(GapMeasurement {
        kind: GapKind::TangencyCount,
        value: GapValue::Count(count),
        summary: TrajectorySummary {
            duration: patch.trajectories.iter().map(Trajectory::duration).fold(0.0, f64::max),
            crossings: kept,
            closest,
            final_state: last,
            iterate: trace.curves.len(),
        },
    })
}

/// Which pair of manifolds a tangency detector compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tangency {
    /// Unstable and stable manifolds of the same saddle orbit.
    Homoclinic(OrbitRole),
    /// Unstable manifold of the orbit and stable manifold of the origin.
    StableOrigin(OrbitRole),
}

/// Manifold growth used by tangency detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyConfig {
    pub n_seeds: usize,
    pub cap_unstable: f64,
    pub cap_stable: f64,
}

impl Default for TangencyConfig {
    fn default() -> Self {
        Self {
            n_seeds: 200,
            cap_unstable: 150.0,
            cap_stable: 15.0,
        }
    }
}

/// Default bisection tolerance in μ for tangency detectors.
pub const TANGENCY_TOL: f64 = 1e-5;

/// Intersection count for a tangency detector at one parameter value; an
/// empty trace counts as no intersection.
pub fn tangency_at(ctx: &SliceContext, which: Tangency, cfg: &TangencyConfig, mu: f64) -> Result<usize> {
    let p = ctx.params(mu);
    let role = match which {
        Tangency::Homoclinic(r) | Tangency::StableOrigin(r) => r,
    };
    let orbit = ctx.orbit(role, mu)?;
    let wu = grow_orbit_manifold(&p, &orbit, OrbitManifold::Unstable, cfg.cap_unstable, cfg.n_seeds)?;
    let measured = match which {
        Tangency::Homoclinic(_) => {
            let ws = grow_orbit_manifold(&p, &orbit, OrbitManifold::Stable, cfg.cap_stable, cfg.n_seeds)?;
            tangency_count(&wu, &ws, &SectionMap::q_plane(&p)?)
        }
        Tangency::StableOrigin(_) => origin_tangency_count(&p, &wu),
    };
    match measured {
        Ok(g) => Ok(g.value.count().unwrap()),
        Err(Error::EmptyTrace) => Ok(0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    /// Homoclinic split on the pass where the winding number changes.
    Split,
    /// Heteroclinic gap to a saddle orbit of the slice.
    Gap(OrbitRole),
    /// Change of the winding number ζ.
    ZetaChange,
    /// Floquet multiplier event along the slice branch.
    Multiplier(MultiplierEvent),
    /// Appearance of intersections between two manifolds.
    Tangency(Tangency),
}

impl Detector {
    fn default_tol(self) -> f64 {
        match self {
            Detector::Split | Detector::Gap(_) | Detector::Multiplier(_) => SIGNED_TOL,
            Detector::ZetaChange => INTEGER_TOL,
            Detector::Tangency(_) => TANGENCY_TOL,
        }
    }

    fn default_kind(self) -> String {
        match self {
            Detector::Split | Detector::ZetaChange => "H".into(),
            Detector::Gap(r) => format!("Q_0^{{{}}}", r.label()),
            Detector::Multiplier(MultiplierEvent::PlusOne) => "SNP".into(),
            Detector::Multiplier(MultiplierEvent::MinusOne) => "PD".into(),
            Detector::Multiplier(MultiplierEvent::ComplexCollision) => "CC".into(),
            Detector::Tangency(Tangency::Homoclinic(r)) => format!("Tan_{{{}}}", r.label()),
            Detector::Tangency(Tangency::StableOrigin(_)) => "F".into(),
        }
    }
}

/// A named detector with its search bracket on a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceTarget {
    pub kind: &'static str,
    pub detector: Detector,
    pub bracket: (f64, f64),
}

/// Detectors and brackets of the codimension-one points on the slice
/// α = 0.5, in order of decreasing μ.
pub fn reference_slice_targets() -> Vec<SliceTarget> {
    use MultiplierEvent::{MinusOne, PlusOne};
    use OrbitRole::{GammaO, GammaT};
    let t = |kind, detector, bracket| SliceTarget { kind, detector, bracket };
    vec![
        t("^2H_t", Detector::Split, (-0.004, -0.001)),
        t("Q_0^{Γ_t}[Γ_o]", Detector::Gap(GammaT), (-0.00289, -0.00287)),
        t("H_t[2Γ_o]", Detector::Split, (-0.0040, -0.0037)),
        t("Q_0^{Γ_t}[2Γ_o]", Detector::Gap(GammaT), (-0.00383, -0.00381)),
        t("H_t[3Γ_o]", Detector::Split, (-0.0043, -0.0042)),
        t("Q_0^{Γ_o}", Detector::Gap(GammaO), (-0.0049, -0.0048)),
        t("F", Detector::Tangency(Tangency::StableOrigin(GammaO)), (-0.0071, -0.0065)),
        t("Tan_{Γ_o}", Detector::Tangency(Tangency::Homoclinic(GammaO)), (-0.0072, -0.0068)),
        t("PD_{Γ_t}", Detector::Multiplier(MinusOne), (-0.0075, -0.007)),
        t("SNP_{Γ_o}", Detector::Multiplier(PlusOne), (-0.0075, -0.007)),
    ]
}

/// Options of [`locate_bifurcation`].
#[derive(Debug, Clone, Default)]
pub struct LocateOptions {
    pub tol: Option<f64>,
    pub kind: Option<String>,
    pub tangency: TangencyConfig,
}

fn zeta_rank(z: Zeta) -> u32 {
    z.finite().unwrap_or(u32::MAX)
}

/// Bisects a change of ζ on `bracket`, either on ζ itself or on the sign of
/// the split after the lower loop count. Returns `(mu, width, k)`.
fn bisect_homoclinic<P>(params: P, bracket: (f64, f64), tol: f64, by_split: bool) -> Result<(f64, f64, usize)>
where
    P: Fn(f64) -> Params,
{
    let (lo, hi) = bracket;
    let zeta_at = |mu: f64| compute_zeta(&params(mu)).map(|r| r.zeta).map_err(failure(mu));
    let (z_lo, z_hi) = (zeta_at(lo)?, zeta_at(hi)?);
    if z_lo == z_hi {
        return Err(Error::NoSignChange { lo, hi });
    }
    let k = zeta_rank(z_lo).min(zeta_rank(z_hi)) as usize;
    // ζ ≤ k on one end, ζ > k on the other
    let hi_continues = zeta_rank(z_hi) as usize > k;
    let by_zeta = |mu: f64| -> Result<bool> { Ok((zeta_rank(zeta_at(mu)?) as usize > k) == hi_continues) };
    let (a, b) = if by_split {
        bisect(lo, hi, tol, |mu| match homoclinic_split_after(&params(mu), k) {
            Ok(g) => Ok((g.value.signed().unwrap() > 0.0) == hi_continues),
            Err(Error::NoCloseApproach) => by_zeta(mu),
            Err(e) => Err(failure(mu)(e)),
        })?
    } else {
        bisect(lo, hi, tol, by_zeta)?
    };
    Ok((0.5 * (a + b), (b - a).abs(), k))
}

/// Locates a homoclinic orbit of the origin in μ at fixed α by the split
/// detector, without tracking any periodic orbit.
pub fn locate_homoclinic(base: &Params, bracket: (f64, f64), tol: f64) -> Result<BifurcationPoint> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let (mu, width, _) = bisect_homoclinic(|mu| base.with_mu(mu), (lo, hi), tol, true)?;
    Ok(BifurcationPoint {
        kind: "H".into(),
        alpha: base.alpha,
        mu,
        bracket: width,
        loops_gamma_o: 0,
        loops_gamma_t: 0,
        case: None,
    })
}

/// Locates the bifurcation detected by `detector` inside `bracket` on the
/// slice of `ctx`.
pub fn locate_bifurcation(
    ctx: &SliceContext,
    bracket: (f64, f64),
    detector: Detector,
    opts: &LocateOptions,
) -> Result<BifurcationPoint> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let tol = opts.tol.unwrap_or_else(|| detector.default_tol());
    let alpha = ctx.base.alpha;
    let kind = opts.kind.clone().unwrap_or_else(|| detector.default_kind());
    let (mu, width, last_loop) = match detector {
        Detector::ZetaChange | Detector::Split => {
            bisect_homoclinic(|mu| ctx.params(mu), (lo, hi), tol, detector == Detector::Split)?
        }
        Detector::Gap(role) => {
            let gap = |mu: f64| -> Result<GapMeasurement> {
                let target = ctx.orbit(role, mu).map_err(failure(mu))?;
                hetero_gap(&ctx.params(mu), &target).map_err(failure(mu))
            };
            let g_lo = gap(lo)?.value.signed().unwrap();
            let g_hi = gap(hi)?.value.signed().unwrap();
            if g_lo.signum() == g_hi.signum() {
                return Err(Error::NoSignChange { lo, hi });
            }
            let (a, b) = bisect(lo, hi, tol, |mu| {
                Ok(gap(mu)?.value.signed().unwrap().signum() == g_hi.signum())
            })?;
            let mid = 0.5 * (a + b);
            let it = gap(mid)?.summary.iterate;
            (mid, (b - a).abs(), it.saturating_sub(1))
        }
        Detector::Multiplier(event) => {
            let points: Vec<_> = ctx
                .branch
                .points
                .iter()
                .filter(|b| b.mu >= lo && b.mu <= hi)
                .cloned()
                .collect();
            let sub = Branch {
                points,
                end: ctx.branch.end,
            };
            let ev = detect_multiplier_event(&sub, event).map_err(|e| match e {
                Error::NoBracket => Error::NoSignChange { lo, hi },
                e => e,
            })?;
            (ev.mu, ev.bracket, 0)
        }
        Detector::Tangency(which) => {
            let meets = |mu: f64| -> Result<bool> {
                tangency_at(ctx, which, &opts.tangency, mu)
                    .map(|n| n > 0)
                    .map_err(failure(mu))
            };
            let (m_lo, m_hi) = (meets(lo)?, meets(hi)?);
            if m_lo == m_hi {
                return Err(Error::NoSignChange { lo, hi });
            }
            let (a, b) = bisect(lo, hi, tol, |mu| Ok(meets(mu)? == m_hi))?;
            (0.5 * (a + b), (b - a).abs(), 0)
        }
    };
    let (n, m) = ctx.rotation_counts(mu, last_loop)?;
    Ok(BifurcationPoint {
        kind,
        alpha,
        mu,
        bracket: width,
        loops_gamma_o: n,
        loops_gamma_t: m,
        case: None,
    })
}

/// Locates the inclination flip along `μ = 0` by bisection in α on the
/// sign of the orientation index.
pub fn locate_inclination_flip(
    base: &Params,
    alpha_bracket: (f64, f64),
    tol: f64,
) -> Result<BifurcationPoint> {
    let (lo, hi) = alpha_bracket;
    let index = |a: f64| {
        orientation_index(&base.with_alpha(a).with_mu(0.0)).map_err(|e| Error::DetectorFailure {
            mu: 0.0,
            source: Box::new(e),
        })
    };
    let (i_lo, i_hi) = (index(lo)?, index(hi)?);
    if i_lo.signum() == i_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (a, b) = bisect(lo, hi, tol, |a| Ok(index(a)?.signum() == i_hi.signum()))?;
    let alpha = 0.5 * (a + b);
    let case = classify_case(&base.with_alpha(alpha).with_mu(0.0))?;
    Ok(BifurcationPoint {
        kind: "C_I".into(),
        alpha,
        mu: 0.0,
        bracket: (b - a).abs(),
        loops_gamma_o: 0,
        loops_gamma_t: 0,
        case: Some(case),
    })
}
