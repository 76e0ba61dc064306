//! Saddle and attracting periodic orbits as fixed points of a Poincaré return
//! map, their Floquet multipliers, continuation in μ and multiplier events.

use std::fmt;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SVector, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::{self, dopri, Crossing, EventSpec, IntegratorConfig, Record, StepControl};
use crate::linalg::{discriminant2, eigenvalues2, eigenvector2};
use crate::model::{eval_field, eval_jacobian, Params, State};

/// Minimum `|n·f|` accepted at a section crossing.
pub const TRANSVERSALITY_MIN: f64 = 1e-6;
/// Finite-difference step in μ for parameter derivatives.
pub const FD_STEP: f64 = 1e-7;
/// Returns discarded before recording a return sequence.
pub const N_SKIP: usize = 200;

/// Poincaré section `n·x = d` crossed in a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMap {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub crossing: Crossing,
    /// Longest flight time allowed between two successive returns.
    pub max_return_time: f64,
    pub integrator: IntegratorConfig,
}

impl Default for SectionMap {
    fn default() -> Self {
        Self::y_zero()
    }
}

/// A single application of the return map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    pub state: State,
    /// Flight time from the start point.
    pub time: f64,
}

impl SectionMap {
    /// The plane `y = 0` crossed with `ẏ > 0`; section coordinates are `(x, z)`.
    pub fn y_zero() -> Self {
        Self {
            normal: Vector3::y(),
            offset: 0.0,
            crossing: Crossing::Increasing,
            max_return_time: 200.0,
            integrator: IntegratorConfig::default()
                .with_tolerances(1e-12, 1e-14)
                .with_record(Record::Endpoints),
        }
    }

    /// The plane `x = q_x` through the secondary equilibrium, crossed with
    /// `ẋ < 0`; section coordinates are `(z, y)`. Every loop of the
    /// unstable manifold of the origin and of the saddle orbits near it
    /// crosses this plane once.
    pub fn q_plane(p: &Params) -> Result<Self> {
        let q = crate::model::find_q(p)?;
        Ok(Self {
            normal: Vector3::x(),
            offset: q.location.x,
            crossing: Crossing::Decreasing,
            ..Self::y_zero()
        })
    }

    fn unit_normal(&self) -> Vector3<f64> {
        self.normal.normalize()
    }

    /// Orthonormal in-plane basis `(e1, e2)`; for `y = 0` it is `(x̂, ẑ)`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.unit_normal();
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::z() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = e1.cross(&n);
        (e1, e2)
    }

    pub fn value(&self, s: &State) -> f64 {
        self.normal.dot(s) - self.offset
    }

    /// Section coordinates of a point (its offset from the plane is dropped).
    pub fn to_section(&self, s: &State) -> Vector2<f64> {
        let (e1, e2) = self.basis();
        Vector2::new(e1.dot(s), e2.dot(s))
    }

    pub fn lift(&self, u: &Vector2<f64>) -> State {
        let n = self.unit_normal();
        let (e1, e2) = self.basis();
        n * (self.offset / self.normal.norm()) + e1 * u.x + e2 * u.y
    }

    pub fn event(&self) -> EventSpec {
        EventSpec::plane(self.normal, self.offset, self.crossing).ignoring_before(1e-6)
    }

    fn check_transverse(&self, p: &Params, s: &State) -> Result<()> {
        let nf = self.unit_normal().dot(&eval_field(p, s)).abs();
        if nf < TRANSVERSALITY_MIN {
            Err(Error::SectionNotTransverse(nf))
        } else {
            Ok(())
        }
    }

    /// The `k`-th return of the trajectory through `s`.
    pub fn iterate(&self, p: &Params, s: &State, k: usize) -> Result<Return> {
        let k = k.max(1);
        let cfg = self.integrator.with_t_max(self.max_return_time * k as f64);
        let ev = [self.event().with_max_count(k)];
        let traj = match flow::integrate(p, s, &cfg, &ev) {
            Ok(t) => t,
            Err(Error::Divergence { .. }) => return Err(Error::NoReturn),
            Err(e) => return Err(e),
        };
        let hits: Vec<_> = traj.events_of(0).collect();
        if hits.len() < k {
            return Err(Error::NoReturn);
        }
        for h in &hits {
            self.check_transverse(p, &h.state)?;
        }
        let last = hits[k - 1];
        Ok(Return {
            state: last.state,
            time: last.t,
        })
    }

    /// Return map in section coordinates.
    pub fn map(&self, p: &Params, u: &Vector2<f64>, k: usize) -> Result<Vector2<f64>> {
        let r = self.iterate(p, &self.lift(u), k)?;
        Ok(self.to_section(&r.state))
    }

    /// Jacobian of `P^k` at `u` from the variational equation, with `P^k(u)`.
    pub fn map_jacobian(
        &self,
        p: &Params,
        u: &Vector2<f64>,
        k: usize,
    ) -> Result<(Matrix2<f64>, Vector2<f64>)> {
        let x0 = self.lift(u);
        let ret = self.iterate(p, &x0, k)?;
        let (m, _) = monodromy(p, &x0, ret.time)?;
        Ok((self.reduce(&m, &eval_field(p, &ret.state)), self.to_section(&ret.state)))
    }

    /// Restriction of a flow derivative to the section, projecting along `f`
    /// at the arrival point.
    fn reduce(&self, m: &Matrix3<f64>, f_end: &Vector3<f64>) -> Matrix2<f64> {
        let n = self.unit_normal();
        let (e1, e2) = self.basis();
        let proj = Matrix3::identity() - f_end * n.transpose() / n.dot(f_end);
        let b = nalgebra::Matrix3x2::from_columns(&[e1, e2]);
        b.transpose() * proj * m * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientability {
    /// `0 < Λ1 < 1 < Λ2`.
    Orientable,
    /// `Λ2 < −1 < Λ1 < 0`.
    Nonorientable,
    Complex,
}

impl Orientability {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientability::Orientable => "orientable",
            Orientability::Nonorientable => "nonorientable",
            Orientability::Complex => "complex",
        }
    }

    pub fn from_multipliers(m: &[Complex64; 2]) -> Self {
        if m[0].im != 0.0 || m[1].im != 0.0 {
            Orientability::Complex
        } else if m[1].re > 0.0 {
            Orientability::Orientable
        } else {
            Orientability::Nonorientable
        }
    }
}

impl fmt::Display for Orientability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub params: Params,
    pub section: SectionMap,
    pub fixed_point: State,
    pub period: f64,
    pub monodromy: Matrix3<f64>,
    /// Linearised return map in section coordinates.
    pub return_jacobian: Matrix2<f64>,
    /// Nontrivial multipliers ordered by modulus.
    pub multipliers: [Complex64; 2],
    pub orientability: Orientability,
    pub loop_count: usize,
    /// `∫₀ᵀ tr Df dt` along the orbit.
    pub trace_integral: f64,
    pub label: String,
}

impl PeriodicOrbit {
    pub fn with_label(self, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..self
        }
    }

    pub fn section_point(&self) -> Vector2<f64> {
        self.section.to_section(&self.fixed_point)
    }

    /// True when both nontrivial multipliers are real and straddle the unit
    /// circle.
    pub fn is_saddle(&self) -> bool {
        self.orientability != Orientability::Complex
            && self.multipliers[0].norm() < 1.0
            && self.multipliers[1].norm() > 1.0
    }

    /// `det(DP − I)`; changes sign where a multiplier crosses +1.
    pub fn fold_test(&self) -> f64 {
        (self.return_jacobian - Matrix2::identity()).determinant()
    }

    /// `det(DP + I)`; changes sign where a multiplier crosses −1.
    pub fn flip_test(&self) -> f64 {
        (self.return_jacobian + Matrix2::identity()).determinant()
    }

    pub fn discriminant(&self) -> f64 {
        discriminant2(&self.return_jacobian)
    }

    /// `det Φ(T)` evaluated over unit-length sub-intervals.
    pub fn monodromy_determinant(&self) -> Result<f64> {
        monodromy_determinant(&self.params, &self.fixed_point, self.period, self.period.ceil() as usize)
    }

    /// Samples of the orbit over one period, with dense output.
    pub fn trajectory(&self) -> Result<flow::Trajectory> {
        let cfg = self
            .section
            .integrator
            .with_t_max(self.period)
            .with_record(Record::Dense);
        flow::integrate(&self.params, &self.fixed_point, &cfg, &[])
    }
}

fn default_label(loop_count: usize, o: Orientability) -> String {
    let base = match o {
        Orientability::Orientable => "Γ_o",
        Orientability::Nonorientable => "Γ_t",
        Orientability::Complex => "Γ^a",
    };
    if loop_count > 1 {
        format!("{loop_count}{base}")
    } else {
        base.to_string()
    }
}

const VARIATIONAL_CTL: StepControl = StepControl {
    rel_tol: 1e-12,
    abs_tol: 1e-14,
    max_step: 0.25,
    max_steps: 20_000_000,
};

/// End state, fundamental matrix `Φ(t)` from the identity, and `∫₀ᵗ tr Df`.
fn variational(p: &Params, s0: &State, t: f64) -> Result<(State, Matrix3<f64>, f64)> {
    let mut y0 = SVector::<f64, 13>::zeros();
    y0[0] = s0.x;
    y0[1] = s0.y;
    y0[2] = s0.z;
    for i in 0..3 {
        y0[3 + 4 * i] = 1.0;
    }
    let rhs = |_t: f64, y: &SVector<f64, 13>| {
        let s = State::new(y[0], y[1], y[2]);
        let f = eval_field(p, &s);
        let j = eval_jacobian(p, &s);
        let phi = Matrix3::from_row_slice(&y.as_slice()[3..12]);
        let dphi = j * phi;
        let mut out = SVector::<f64, 13>::zeros();
        out[0] = f.x;
        out[1] = f.y;
        out[2] = f.z;
        for r in 0..3 {
            for c in 0..3 {
                out[3 + 3 * r + c] = dphi[(r, c)];
            }
        }
        out[12] = j.trace();
        out
    };
    let (_, y) = dopri::integrate(rhs, 0.0, y0, t, &VARIATIONAL_CTL, |_, _| Ok(None))?;
    Ok((
        State::new(y[0], y[1], y[2]),
        Matrix3::from_row_slice(&y.as_slice()[3..12]),
        y[12],
    ))
}

/// Monodromy `Φ(T)` and `∫₀ᵀ tr Df` from the joint state/variational system.
pub fn monodromy(p: &Params, s0: &State, period: f64) -> Result<(Matrix3<f64>, f64)> {
    let (_, m, tr) = variational(p, s0, period)?;
    Ok((m, tr))
}

/// `det Φ(T)` as the product of the determinants of the fundamental
/// matrices over `pieces` equal sub-intervals. Each factor is well
/// conditioned, unlike the determinant of `Φ(T)` itself once a multiplier
/// is large.
pub fn monodromy_determinant(p: &Params, s0: &State, period: f64, pieces: usize) -> Result<f64> {
    let pieces = pieces.max(1);
    let h = period / pieces as f64;
    let mut s = *s0;
    let mut det = 1.0;
    for _ in 0..pieces {
        let (next, phi, _) = variational(p, &s, h)?;
        det *= phi.determinant();
        s = next;
    }
    Ok(det)
}

/// Builds the orbit record for a converged section fixed point.
pub fn orbit_from_fixed_point(
    p: &Params,
    section: &SectionMap,
    u: &Vector2<f64>,
    loop_count: usize,
) -> Result<PeriodicOrbit> {
    let x0 = section.lift(u);
    section.check_transverse(p, &x0)?;
    let ret = section.iterate(p, &x0, loop_count)?;
    let period = ret.time;
    let (m, trace_integral) = monodromy(p, &x0, period)?;
    let dp = section.reduce(&m, &eval_field(p, &x0));
    let mut multipliers = eigenvalues2(&dp);
    // the product of the nontrivial multipliers is exp(∫tr Df); this keeps
    // the contracting one accurate when the expanding one is large
    if multipliers[0].im == 0.0 && multipliers[1].re.abs() > 1.0 {
        multipliers[0] = Complex64::new(trace_integral.exp() / multipliers[1].re, 0.0);
    }
    let orientability = Orientability::from_multipliers(&multipliers);
    Ok(PeriodicOrbit {
        params: *p,
        section: *section,
        fixed_point: x0,
        period,
        monodromy: m,
        return_jacobian: dp,
        multipliers,
        orientability,
        loop_count,
        trace_integral,
        label: default_label(loop_count, orientability),
    })
}

/// Residual bound for accepted section fixed points.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// For strongly unstable orbits the residual floor is set by integration
/// error times the expanding multiplier; a Newton correction below this
/// bound is then accepted as converged.
pub const CORRECTION_TOL: f64 = 1e-10;
const NOISE_RESIDUAL_MAX: f64 = 1e-6;

fn converged(residual: f64, correction: f64) -> bool {
    residual <= FIXED_POINT_TOL || (correction <= CORRECTION_TOL && residual <= NOISE_RESIDUAL_MAX)
}
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_STEP: f64 = 0.05;

fn newton_fixed_point(
    p: &Params,
    section: &SectionMap,
    u0: Vector2<f64>,
    k: usize,
) -> Result<Vector2<f64>> {
    let mut u = u0;
    let mut r = section.map(p, &u, k)? - u;
    for _ in 0..NEWTON_MAX_ITER {
        if r.norm() <= FIXED_POINT_TOL {
            return Ok(u);
        }
        let (j, _) = section.map_jacobian(p, &u, k)?;
        let a = j - Matrix2::identity();
        let mut du = a
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::NewtonDiverged("singular Jacobian".into()))?;
        if converged(r.norm(), du.norm()) {
            return Ok(u + du);
        }
        if du.norm() > NEWTON_MAX_STEP {
            du *= NEWTON_MAX_STEP / du.norm();
        }
        // backtracking on the residual norm
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..10 {
            let trial = u + du * lambda;
            if let Ok(pt) = section.map(p, &trial, k) {
                let rt = pt - trial;
                if rt.norm() < r.norm() || rt.norm() <= FIXED_POINT_TOL {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((un, rn)) => {
                u = un;
                r = rn;
            }
            None if r.norm() <= 10.0 * FIXED_POINT_TOL => return Ok(u),
            None => {
                return Err(Error::NewtonDiverged(format!(
                    "no decrease from residual {:e}",
                    r.norm()
                )))
            }
        }
    }
    if r.norm() <= FIXED_POINT_TOL {
        Ok(u)
    } else {
        Err(Error::NewtonDiverged(format!(
            "residual {:e} after {NEWTON_MAX_ITER} iterations",
            r.norm()
        )))
    }
}

/// Solves `P^k(s) = s` on the section by Newton with a finite-difference
/// Jacobian, starting from `guess` (projected onto the section).
pub fn find_periodic_orbit(
    p: &Params,
    section: &SectionMap,
    guess: &State,
    loop_count: usize,
) -> Result<PeriodicOrbit> {
    let k = loop_count.max(1);
    let u = newton_fixed_point(p, section, section.to_section(guess), k)?;
    orbit_from_fixed_point(p, section, &u, k)
}

/// Continuation step control; steps are measured in `(x, z, MU_SCALE·μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationControl {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_points: usize,
}

impl Default for ContinuationControl {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            min_step: 1e-9,
            max_step: 2e-2,
            max_points: 5000,
        }
    }
}

/// Weight of μ in the pseudo-arclength metric.
pub const MU_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub mu: f64,
    pub orbit: PeriodicOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchEnd {
    ReachedTarget,
    /// μ reversed direction between the last two points.
    TurningPoint,
    MaxPoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub end: BranchEnd,
}

impl Branch {
    pub fn last(&self) -> &BranchPoint {
        self.points.last().unwrap()
    }

    /// Writes `mu,period,fixed_x,fixed_z,re_L1,im_L1,re_L2,im_L2,orientability`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(
            out,
            "mu,period,fixed_x,fixed_z,re_L1,im_L1,re_L2,im_L2,orientability"
        )?;
        for bp in &self.points {
            let o = &bp.orbit;
            let u = o.section_point();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                num(bp.mu),
                num(o.period),
                num(u.x),
                num(u.y),
                num(o.multipliers[0].re),
                num(o.multipliers[0].im),
                num(o.multipliers[1].re),
                num(o.multipliers[1].im),
                o.orientability
            )?;
        }
        Ok(())
    }
}

type W3 = Vector3<f64>;

fn pack(u: &Vector2<f64>, mu: f64) -> W3 {
    W3::new(u.x, u.y, mu * MU_SCALE)
}

fn unpack(w: &W3) -> (Vector2<f64>, f64) {
    (Vector2::new(w.x, w.y), w.z / MU_SCALE)
}

struct Extended<'a> {
    base: Params,
    section: &'a SectionMap,
    k: usize,
}

impl Extended<'_> {
    fn residual(&self, w: &W3) -> Result<Vector2<f64>> {
        let (u, mu) = unpack(w);
        Ok(self.section.map(&self.base.with_mu(mu), &u, self.k)? - u)
    }

    /// State columns from the variational equation, parameter column by
    /// central differences.
    fn jacobian(&self, w: &W3) -> Result<(Matrix2x3<f64>, Vector2<f64>)> {
        let (u, mu) = unpack(w);
        let (ju, pu) = self.section.map_jacobian(&self.base.with_mu(mu), &u, self.k)?;
        let mut dw = W3::zeros();
        dw.z = FD_STEP * MU_SCALE;
        let dmu = (self.residual(&(w + dw))? - self.residual(&(w - dw))?) / (2.0 * dw.z);
        let mut j = Matrix2x3::zeros();
        j.fixed_view_mut::<2, 2>(0, 0).copy_from(&(ju - Matrix2::identity()));
        j.set_column(2, &dmu);
        Ok((j, pu - u))
    }

    fn tangent(&self, w: &W3, prev: &W3) -> Result<W3> {
        let (j, _) = self.jacobian(w)?;
        let r0: W3 = j.row(0).transpose();
        let r1: W3 = j.row(1).transpose();
        let t = r0.cross(&r1);
        let n = t.norm();
        if n == 0.0 {
            return Err(Error::NewtonDiverged("rank-deficient extended Jacobian".into()));
        }
        let t = t / n;
        Ok(if t.dot(prev) < 0.0 { -t } else { t })
    }

    /// Newton on `G(w) = 0`, `t·(w − w_pred) = 0`.
    fn correct(&self, pred: &W3, t: &W3) -> Result<W3> {
        let mut w = *pred;
        for _ in 0..12 {
            let (j, g) = self.jacobian(&w)?;
            let a = Matrix3::from_rows(&[j.row(0).into_owned(), j.row(1).into_owned(), t.transpose()]);
            let rhs = W3::new(-g.x, -g.y, -t.dot(&(w - pred)));
            let dw = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NewtonDiverged("singular bordered system".into()))?;
            if converged(g.norm(), dw.norm()) {
                return Ok(w + dw);
            }
            w += dw;
            if dw.norm() > 0.2 {
                return Err(Error::NewtonDiverged("corrector step too large".into()));
            }
        }
        let g = self.residual(&w)?;
        if g.norm() <= FIXED_POINT_TOL {
            Ok(w)
        } else {
            Err(Error::NewtonDiverged(format!("corrector residual {:e}", g.norm())))
        }
    }
}

/// Pseudo-arclength continuation of `orbit` in μ toward `mu_target`.
///
/// The march stops after passing the target (the last point is re-solved at
/// exactly `mu_target`) or right after μ turns around at a fold, in which
/// case the final two points straddle the turning point. A step that cannot
/// be completed above `ctl.min_step` raises `StepFloorReached`.
pub fn continue_orbit(
    orbit: &PeriodicOrbit,
    mu_target: f64,
    ctl: &ContinuationControl,
) -> Result<Branch> {
    let ext = Extended {
        base: orbit.params,
        section: &orbit.section,
        k: orbit.loop_count,
    };
    let mu0 = orbit.params.mu;
    let dir = if mu_target >= mu0 { 1.0 } else { -1.0 };
    let mut points = vec![BranchPoint {
        mu: mu0,
        orbit: orbit.clone(),
    }];
    let mut w = pack(&orbit.section_point(), mu0);
    let mut t = ext.tangent(&w, &W3::new(0.0, 0.0, dir))?;
    let mut h = ctl.initial_step;
    while points.len() < ctl.max_points {
        let pred = w + t * h;
        let step = ext.correct(&pred, &t).and_then(|wn| {
            let (u, mu) = unpack(&wn);
            let o = orbit_from_fixed_point(&orbit.params.with_mu(mu), &orbit.section, &u, ext.k)?;
            Ok((wn, o))
        });
        let (wn, on) = match step {
            Ok(v) => v,
            Err(_) => {
                h *= 0.5;
                if h < ctl.min_step {
                    return Err(Error::StepFloorReached {
                        last_good: unpack(&w).1,
                        failed: unpack(&pred).1,
                    });
                }
                continue;
            }
        };
        let (_, mu) = unpack(&wn);
        if dir * (mu - mu_target) >= 0.0 {
            // land exactly on the target by a natural-parameter solve
            let (u_prev, mu_prev) = unpack(&w);
            let (u_next, _) = unpack(&wn);
            let s = (mu_target - mu_prev) / (mu - mu_prev);
            let guess = section_lerp(&u_prev, &u_next, s);
            let pt = orbit.params.with_mu(mu_target);
            let u = newton_fixed_point(&pt, &orbit.section, guess, ext.k)?;
            let o = orbit_from_fixed_point(&pt, &orbit.section, &u, ext.k)?;
            points.push(BranchPoint {
                mu: mu_target,
                orbit: o.with_label(orbit.label.clone()),
            });
            return Ok(Branch {
                points,
                end: BranchEnd::ReachedTarget,
            });
        }
        let tn = ext.tangent(&wn, &t)?;
        points.push(BranchPoint {
            mu,
            orbit: on.with_label(orbit.label.clone()),
        });
        if tn.z * dir < 0.0 {
            return Ok(Branch {
                points,
                end: BranchEnd::TurningPoint,
            });
        }
        w = wn;
        t = tn;
        h = (h * 1.5).min(ctl.max_step);
    }
    Ok(Branch {
        points,
        end: BranchEnd::MaxPoints,
    })
}

fn section_lerp(a: &Vector2<f64>, b: &Vector2<f64>, s: f64) -> Vector2<f64> {
    a + (b - a) * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierEvent {
    /// A multiplier crosses +1 (fold of periodic orbits).
    PlusOne,
    /// A multiplier crosses −1 (period doubling).
    MinusOne,
    /// The nontrivial pair collides on the real axis.
    ComplexCollision,
}

impl MultiplierEvent {
    fn test(self, o: &PeriodicOrbit) -> f64 {
        match self {
            MultiplierEvent::PlusOne => o.fold_test(),
            MultiplierEvent::MinusOne => o.flip_test(),
            MultiplierEvent::ComplexCollision => o.discriminant(),
        }
    }
}

/// Refined event along a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEventPoint {
    pub mu: f64,
    /// μ-width of the final bracket.
    pub bracket: f64,
    pub orbit: PeriodicOrbit,
}

/// Bisects the first bracket of `event` along `branch` until the μ-width of
/// the bracket is at most 1e-8, re-solving the orbit at every midpoint.
pub fn detect_multiplier_event(
    branch: &Branch,
    event: MultiplierEvent,
) -> Result<MultiplierEventPoint> {
    let pts = &branch.points;
    let idx = (1..pts.len())
        .find(|&i| event.test(&pts[i - 1].orbit).signum() != event.test(&pts[i].orbit).signum())
        .ok_or(Error::NoBracket)?;
    let (a, b) = (&pts[idx - 1], &pts[idx]);
    let o = &a.orbit;
    let ext = Extended {
        base: o.params,
        section: &o.section,
        k: o.loop_count,
    };
    let wa = pack(&a.orbit.section_point(), a.mu);
    let wb = pack(&b.orbit.section_point(), b.mu);
    let t = (wb - wa).normalize();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut o_lo, mut o_hi) = (a.orbit.clone(), b.orbit.clone());
    let (mut mu_lo, mut mu_hi) = (a.mu, b.mu);
    let g_lo = event.test(&o_lo).signum();
    for _ in 0..80 {
        if (mu_hi - mu_lo).abs() <= 1e-8 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let pred = wa + (wb - wa) * mid;
        let wm = ext.correct(&pred, &t)?;
        let (u, mu) = unpack(&wm);
        let om = orbit_from_fixed_point(&o.params.with_mu(mu), &o.section, &u, ext.k)?;
        if event.test(&om).signum() == g_lo {
            lo = mid;
            mu_lo = mu;
            o_lo = om;
        } else {
            hi = mid;
            mu_hi = mu;
            o_hi = om;
        }
    }
    // linear interpolation of the test function inside the final bracket
    let (g0, g1) = (event.test(&o_lo), event.test(&o_hi));
    let r = if g1 != g0 { g0 / (g0 - g1) } else { 0.5 };
    let mu = mu_lo + (mu_hi - mu_lo) * r;
    // the orbit at the interpolated root, falling back to the bracket end
    let orbit = ext
        .correct(&(wa + (wb - wa) * (lo + (hi - lo) * r)), &t)
        .and_then(|w| {
            let (u, m) = unpack(&w);
            orbit_from_fixed_point(&o.params.with_mu(m), &o.section, &u, ext.k)
        })
        .ok()
        .filter(|om| event.test(om).abs() <= g0.abs().max(g1.abs()))
        .unwrap_or(o_hi);
    Ok(MultiplierEventPoint {
        mu,
        bracket: (mu_hi - mu_lo).abs(),
        orbit,
    })
}

/// Iterations of the doubled return map used to settle onto the doubled
/// orbit before the Newton polish.
const DOUBLING_SETTLE: usize = 400;

/// The period-doubled orbit born at the flip event `ev`, located at
/// `ev.mu + dmu`. On the side of a supercritical flip where it exists the
/// doubled orbit attracts nearby points of the section, so the doubled
/// return map is iterated from the flip eigendirection and the limit is
/// polished by Newton with twice the loop count.
pub fn switch_period_doubling(ev: &MultiplierEventPoint, dmu: f64) -> Result<PeriodicOrbit> {
    let base = &ev.orbit;
    let k = base.loop_count;
    let section = base.section;
    let p = base.params.with_mu(ev.mu + dmu);
    let single = find_periodic_orbit(&p, &section, &base.fixed_point, k)?;
    let flip = single
        .multipliers
        .iter()
        .map(|m| m.re)
        .min_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs()))
        .unwrap();
    let w = eigenvector2(&single.return_jacobian, flip);
    let us = single.section_point();
    let amplitude = dmu.abs().sqrt().clamp(1e-4, 1e-2);
    let mut u = us + w * amplitude;
    for _ in 0..DOUBLING_SETTLE {
        let next = section.map(&p, &u, 2 * k)?;
        let step = (next - u).norm();
        u = next;
        if step <= 1e-11 {
            break;
        }
    }
    let doubled = find_periodic_orbit(&p, &section, &section.lift(&u), 2 * k)?;
    let separation = (doubled.section_point() - us).norm();
    let half = (section.map(&p, &doubled.section_point(), k)? - doubled.section_point()).norm();
    if separation <= 1e-8 || half <= 1e-8 {
        return Err(Error::NewtonDiverged(format!(
            "doubled orbit collapsed onto the {k}-loop orbit (separation {separation:e})"
        )));
    }
    let label = format!("{}{}", 2 * k, base.label.trim_start_matches(|c: char| c.is_ascii_digit()));
    Ok(doubled.with_label(label))
}

/// Follows a period-doubling cascade from its first flip `first`: at each
/// level the doubled orbit is switched onto at `offset` past the previous
/// flip and continued in the same direction until its own flip. Level
/// `n + 1` is searched within the previous spacing times `reach`.
pub fn period_doubling_cascade(
    first: &MultiplierEventPoint,
    levels: usize,
    offset: f64,
    reach: f64,
) -> Result<Vec<MultiplierEventPoint>> {
    let ctl = ContinuationControl::default();
    let mut out = vec![first.clone()];
    let mut spacing: Option<f64> = None;
    for _ in 0..levels {
        let prev = out.last().unwrap();
        let dmu = match spacing {
            Some(s) => s * offset.signum() * 0.1,
            None => offset,
        };
        let doubled = switch_period_doubling(prev, dmu)?;
        let span = spacing.map_or(100.0 * offset.abs(), |s| s * reach);
        let target = prev.mu + offset.signum() * span;
        let branch = continue_orbit(&doubled, target, &ctl)?;
        let ev = detect_multiplier_event(&branch, MultiplierEvent::MinusOne)?;
        spacing = Some((ev.mu - prev.mu).abs());
        let ev = MultiplierEventPoint {
            orbit: ev.orbit.with_label(doubled.label.clone()),
            ..ev
        };
        out.push(ev);
    }
    Ok(out)
}

/// Post-transient section returns rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSequence {
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
}

impl ReturnSequence {
    /// Successive pairs `(x_i, x_{i+1})` of the rescaled sequence.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.scaled.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Mean of `x_{i+1}` over `nbins` equal bins of `x_i ∈ [0, 1]`.
    pub fn binned_envelope(&self, nbins: usize) -> Vec<Option<f64>> {
        let mut sum = vec![0.0; nbins];
        let mut cnt = vec![0usize; nbins];
        for (x, y) in self.pairs() {
            let b = ((x * nbins as f64) as usize).min(nbins - 1);
            sum[b] += y;
            cnt[b] += 1;
        }
        sum.iter()
            .zip(&cnt)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(out, "x_i,x_ip1")?;
        for (a, b) in self.pairs() {
            writeln!(out, "{},{}", num(a), num(b))?;
        }
        Ok(())
    }
}

/// Number of sign changes in the slope of a binned envelope (empty bins are
/// skipped).
pub fn slope_sign_changes(envelope: &[Option<f64>]) -> usize {
    let vals: Vec<f64> = envelope.iter().flatten().copied().collect();
    let signs: Vec<f64> = vals
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Follows the trajectory through `s0`, drops `N_SKIP` returns, and records
/// the first section coordinate of the next `n` returns.
pub fn collect_returns(
    p: &Params,
    s0: &State,
    section: &SectionMap,
    n: usize,
) -> Result<ReturnSequence> {
    collect_returns_skipping(p, s0, section, n, N_SKIP)
}

pub fn collect_returns_skipping(
    p: &Params,
    s0: &State,
    section: &SectionMap,
    n: usize,
    n_skip: usize,
) -> Result<ReturnSequence> {
    let wanted = n_skip + n;
    let cfg = section
        .integrator
        .with_tolerances(1e-10, 1e-12)
        .with_t_max(section.max_return_time * wanted as f64);
    let ev = [section.event().with_max_count(wanted)];
    let traj = match flow::integrate(p, s0, &cfg, &ev) {
        Ok(t) => t,
        Err(Error::Divergence { partial, .. }) => {
            let got = partial.events_of(0).count().saturating_sub(n_skip);
            return Err(Error::InsufficientReturns { got, wanted: n });
        }
        Err(e) => return Err(e),
    };
    let raw: Vec<f64> = traj
        .events_of(0)
        .skip(n_skip)
        .map(|e| section.to_section(&e.state).x)
        .collect();
    if raw.len() < n {
        return Err(Error::InsufficientReturns {
            got: raw.len(),
            wanted: n,
        });
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-9 * hi.abs().max(lo.abs()).max(1e-300) {
        return Err(Error::ConstantSequence);
    }
    let scaled = raw.iter().map(|x| (x - lo) / (hi - lo)).collect();
    Ok(ReturnSequence { raw, scaled })
}
