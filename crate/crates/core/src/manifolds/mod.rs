//! Invariant manifolds as trajectory families: one-dimensional manifolds of
//! equilibria, the two-dimensional stable manifold of a saddle, and the
//! stable and unstable manifolds of saddle periodic orbits seeded along
//! their Floquet bundles. Intersections with a sphere or a plane are strung
//! into curves by seed adjacency.

pub mod local;

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{
    self, polish_root, transport_on_segment, Crossing, Direction, IntegratorConfig, Record,
    Trajectory, TransportKind,
};
use crate::linalg;
use crate::model::{Equilibrium, EquilibriumEigen, Params, State};
use crate::orbits::{Orientability, PeriodicOrbit};

pub use local::StableGraph;

/// Seed offset for one-dimensional manifolds.
pub const EPS_1D: f64 = 1e-7;
/// Seed offset for two-dimensional manifolds.
pub const EPS_2D: f64 = 1e-5;
/// Default seed count for two-dimensional families.
pub const DEFAULT_SEEDS: usize = 200;
/// Default arclength cap for the stable manifold of the origin.
pub const CAP_EQUILIBRIUM: f64 = 4.0;
/// Default arclength cap for manifolds of periodic orbits.
pub const CAP_ORBIT: f64 = 25.0;
/// Curves are split where consecutive points are farther apart than this
/// multiple of the median gap.
pub const SPLIT_FACTOR: f64 = 10.0;
/// Centre and radius of the default intersection sphere.
pub const SPHERE_CENTER: [f64; 3] = [0.5, 0.0, 0.0];
pub const SPHERE_RADIUS: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumManifold {
    Stable2d,
    Unstable1d,
    StrongStable1d,
}

impl EquilibriumManifold {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumManifold::Stable2d => "stable-2d",
            EquilibriumManifold::Unstable1d => "unstable-1d",
            EquilibriumManifold::StrongStable1d => "strong-stable-1d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldStability {
    Stable,
    Unstable,
    StrongStable,
}

impl ManifoldStability {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldStability::Stable => "stable",
            ManifoldStability::Unstable => "unstable",
            ManifoldStability::StrongStable => "strong-stable",
        }
    }

    fn direction(self) -> Direction {
        match self {
            ManifoldStability::Unstable => Direction::Forward,
            _ => Direction::Backward,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Owner {
    Equilibrium(Equilibrium),
    Orbit(Box<PeriodicOrbit>),
}

impl Owner {
    pub fn label(&self) -> String {
        match self {
            Owner::Equilibrium(eq) if eq.location.norm() == 0.0 => "0".into(),
            Owner::Equilibrium(_) => "q".into(),
            Owner::Orbit(o) => o.label.clone(),
        }
    }
}

/// Seeds in boundary order: a closed chain is a circle of the seed ribbon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedChain {
    pub indices: Vec<usize>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedDescriptor {
    pub offset: f64,
    /// Seed angle (equilibria) or phase along the orbit, per trajectory.
    pub angles: Vec<f64>,
    /// Side of each seed relative to the owner.
    pub sides: Vec<i8>,
    pub points: Vec<State>,
    pub cap: f64,
    pub chains: Vec<SeedChain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPatch {
    pub params: Params,
    pub owner: Owner,
    pub stability: ManifoldStability,
    pub dimension: u8,
    pub trajectories: Vec<Trajectory>,
    pub seeds: SeedDescriptor,
    /// Whether the Floquet bundle returns to `+v(0)`; orbit patches only.
    pub bundle_orientable: Option<bool>,
}

impl ManifoldPatch {
    pub fn label(&self) -> String {
        let sup = match self.stability {
            ManifoldStability::Stable => "s",
            ManifoldStability::Unstable => "u",
            ManifoldStability::StrongStable => "ss",
        };
        format!("W^{sup}({})", self.owner.label())
    }

    /// Number of boundary circles of the seed ribbon.
    pub fn boundary_circles(&self) -> usize {
        self.seeds.chains.iter().filter(|c| c.closed).count()
    }

    /// Writes `traj_id,t,x,y,z,arclength`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(out, "traj_id,t,x,y,z,arclength")?;
        for (id, tr) in self.trajectories.iter().enumerate() {
            let arc = flow::sample_arclengths(&self.params, tr);
            for (k, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
                writeln!(out, "{id},{},{},{},{},{}", num(*t), num(s.x), num(s.y), num(s.z), num(arc[k]))?;
            }
        }
        Ok(())
    }
}

fn growth_config(direction: Direction, cap: f64) -> IntegratorConfig {
    IntegratorConfig::default()
        .with_tolerances(1e-10, 1e-12)
        .with_t_max(1e4)
        .with_direction(direction)
        .with_arclength_cap(cap)
        .with_record(Record::Dense)
}

/// Integrates every seed; escaping trajectories keep their partial segment.
fn grow(p: &Params, seeds: &[State], cfg: &IntegratorConfig) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|s| match flow::integrate(p, s, cfg, &[]) {
            Err(Error::Divergence { partial, .. }) => Ok(*partial),
            other => other,
        })
        .collect()
}

fn validate_growth(cap: f64, n_seeds: usize) -> Result<()> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::Config("arclength cap must be positive".into()));
    }
    if n_seeds == 0 {
        return Err(Error::Config("seed count must be positive".into()));
    }
    Ok(())
}

/// Real eigenvalues and eigenvectors of an equilibrium, sorted by value.
fn real_spectrum(eq: &Equilibrium) -> Vec<(f64, Vector3<f64>)> {
    let mut v: Vec<(f64, Vector3<f64>)> = match eq.eigen {
        EquilibriumEigen::Real { values, vectors } => values.into_iter().zip(vectors).collect(),
        EquilibriumEigen::Focus(f) => vec![(f.real, f.real_vector)],
    };
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Orthonormal basis of the stable eigenspace, with the first vector along
/// the strong stable direction when one exists.
fn stable_plane(eq: &Equilibrium) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
    let missing = || Error::EigenstructureMissing("no two-dimensional stable eigenspace".into());
    let (a, b) = match eq.eigen {
        EquilibriumEigen::Real { .. } => {
            let spec = real_spectrum(eq);
            if !(spec[1].0 < 0.0 && spec[2].0 > 0.0) {
                return Err(missing());
            }
            (spec[0].1, spec[1].1)
        }
        EquilibriumEigen::Focus(f) => {
            if !(f.pair.re < 0.0) {
                return Err(missing());
            }
            let re = Vector3::new(f.pair_vector[0].re, f.pair_vector[1].re, f.pair_vector[2].re);
            let im = Vector3::new(f.pair_vector[0].im, f.pair_vector[1].im, f.pair_vector[2].im);
            (re, im)
        }
    };
    let u1 = a.normalize();
    let u2 = (b - u1 * u1.dot(&b)).normalize();
    Ok((u1, u2, a))
}

/// Seed angles on `[0, 2π)` clustered by cosine spacing around the angles
/// `φ₀` and `φ₀ + π`.
fn clustered_angles(n: usize, phi0: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = 2.0 * (i as f64 + 0.5) / n as f64;
            let (whole, frac) = (t.floor(), t.fract());
            phi0 + PI * (whole + 0.5 * (1.0 - (PI * frac).cos()))
        })
        .collect()
}

/// Grows a one- or two-dimensional manifold of an equilibrium.
pub fn grow_equilibrium_manifold(
    p: &Params,
    eq: &Equilibrium,
    which: EquilibriumManifold,
    cap: f64,
    n_seeds: usize,
) -> Result<ManifoldPatch> {
    validate_growth(cap, n_seeds)?;
    let x0 = eq.location;
    let (stability, dimension, offset, angles, sides, points, chains) = match which {
        EquilibriumManifold::Stable2d => {
            let (u1, u2, _) = stable_plane(eq)?;
            // angle 0 is the strong stable direction
            let angles = clustered_angles(n_seeds, 0.0);
            let points = angles
                .iter()
                .map(|a| x0 + EPS_2D * (u1 * a.cos() + u2 * a.sin()))
                .collect();
            let chains = vec![SeedChain {
                indices: (0..n_seeds).collect(),
                closed: true,
            }];
            (ManifoldStability::Stable, 2, EPS_2D, angles, vec![1; n_seeds], points, chains)
        }
        EquilibriumManifold::Unstable1d | EquilibriumManifold::StrongStable1d => {
            let spec = real_spectrum(eq);
            let (vector, stability) = if which == EquilibriumManifold::Unstable1d {
                let last = spec[spec.len() - 1];
                let n_pos = spec.iter().filter(|s| s.0 > 0.0).count();
                let ok = match eq.eigen {
                    EquilibriumEigen::Real { .. } => n_pos == 1,
                    EquilibriumEigen::Focus(f) => last.0 > 0.0 && f.pair.re < 0.0,
                };
                if !ok {
                    return Err(Error::EigenstructureMissing("no one-dimensional unstable direction".into()));
                }
                (last.1, ManifoldStability::Unstable)
            } else {
                let first = spec[0];
                let ok = match eq.eigen {
                    EquilibriumEigen::Real { .. } => spec[1].0 < 0.0 && first.0 < spec[1].0,
                    EquilibriumEigen::Focus(f) => first.0 < f.pair.re && f.pair.re < 0.0,
                };
                if !ok {
                    return Err(Error::EigenstructureMissing("no strong stable direction".into()));
                }
                (first.1, ManifoldStability::StrongStable)
            };
            let v = vector.normalize();
            let points = vec![x0 + EPS_1D * v, x0 - EPS_1D * v];
            let chains = (0..2)
                .map(|i| SeedChain {
                    indices: vec![i],
                    closed: false,
                })
                .collect();
            (stability, 1, EPS_1D, vec![0.0, PI], vec![1, -1], points, chains)
        }
    };
    let cfg = growth_config(stability.direction(), cap);
    let trajectories = grow(p, &points, &cfg)?;
    Ok(ManifoldPatch {
        params: *p,
        owner: Owner::Equilibrium(*eq),
        stability,
        dimension,
        trajectories,
        seeds: SeedDescriptor {
            offset,
            angles,
            sides,
            points,
            cap,
            chains,
        },
        bundle_orientable: None,
    })
}

/// Grows the stable manifold of the origin backward from its local graph
/// along the line `s = s0` in eigen-coordinates. The `ss` offsets are
/// log-spaced in `ss_range` on both sides of the weak stable branch, which
/// resolves the sheet that follows that branch backward around the loop.
pub fn grow_origin_stable_from_graph(
    p: &Params,
    s0: f64,
    ss_range: (f64, f64),
    n_per_side: usize,
    cap: f64,
) -> Result<ManifoldPatch> {
    validate_growth(cap, n_per_side)?;
    let (lo, hi) = ss_range;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::Config("ss range must satisfy 0 < min < max".into()));
    }
    let graph = StableGraph::new(p)?;
    let ratio = (hi / lo).ln();
    let mags: Vec<f64> = (0..n_per_side)
        .map(|i| {
            let t = if n_per_side == 1 { 0.0 } else { i as f64 / (n_per_side - 1) as f64 };
            lo * (ratio * t).exp()
        })
        .collect();
    let offsets: Vec<f64> = mags
        .iter()
        .rev()
        .map(|m| -m)
        .chain(std::iter::once(0.0))
        .chain(mags.iter().copied())
        .collect();
    let points: Vec<State> = offsets.iter().map(|&ss| graph.point(s0, ss)).collect();
    let n = points.len();
    let trajectories = grow(p, &points, &growth_config(Direction::Backward, cap))?;
    Ok(ManifoldPatch {
        params: *p,
        owner: Owner::Equilibrium(crate::model::origin_equilibrium(p)),
        stability: ManifoldStability::Stable,
        dimension: 2,
        trajectories,
        seeds: SeedDescriptor {
            offset: s0,
            angles: offsets,
            sides: vec![1; n],
            points,
            cap,
            chains: vec![SeedChain {
                indices: (0..n).collect(),
                closed: false,
            }],
        },
        bundle_orientable: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitManifold {
    Stable,
    Unstable,
}

/// Floquet bundle of a saddle periodic orbit for one multiplier, with the
/// periodic normalisation `v(θ) = Φ(θ) v₀ / |Λ|^{θ/T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetBundle {
    pub multiplier: f64,
    /// Eigenvector of the monodromy matrix at the fixed point.
    pub v0: Vector3<f64>,
    pub orbit: Trajectory,
    pub period: f64,
}

impl FloquetBundle {
    pub fn new(orbit: &PeriodicOrbit, which: OrbitManifold) -> Result<Self> {
        if orbit.orientability == Orientability::Complex {
            return Err(Error::ComplexMultipliers);
        }
        let k = match which {
            OrbitManifold::Stable => 0,
            OrbitManifold::Unstable => 1,
        };
        let multiplier = orbit.multipliers[k].re;
        let v0 = linalg::real_eigenvector3(&orbit.monodromy, multiplier).normalize();
        Ok(Self {
            multiplier,
            v0,
            orbit: orbit.trajectory()?,
            period: orbit.period,
        })
    }

    /// `+1` when the bundle returns to `+v(0)` after one period.
    pub fn orientable(&self) -> bool {
        self.multiplier > 0.0
    }

    /// Residual `‖M v₀ − Λ v₀‖` against a monodromy matrix.
    pub fn residual(&self, monodromy: &nalgebra::Matrix3<f64>) -> f64 {
        (monodromy * self.v0 - self.v0 * self.multiplier).norm()
    }

    /// Bundle vector at phase `theta ∈ [0, T]`. Expanding directions are
    /// transported forward from 0, contracting ones backward from `T`.
    pub fn vector(&self, p: &Params, theta: f64) -> Result<Vector3<f64>> {
        let (l, t) = (self.multiplier.abs(), self.period);
        if l >= 1.0 {
            let path = transport_on_segment(p, &self.orbit, TransportKind::Tangent, 0.0, theta, self.v0)?;
            Ok(path.last().1 / l.powf(theta / t))
        } else {
            let path = transport_on_segment(p, &self.orbit, TransportKind::Tangent, t, theta, self.v0)?;
            Ok(path.last().1 * self.multiplier.signum() * l.powf(1.0 - theta / t))
        }
    }

    pub fn point(&self, theta: f64) -> State {
        self.orbit.state_at(theta).unwrap_or_else(|| self.orbit.end().1)
    }

    /// `γ(θ) + offset · v(θ)`.
    pub fn seed_point(&self, p: &Params, theta: f64, offset: f64) -> Result<State> {
        Ok(self.point(theta) + self.vector(p, theta)? * offset)
    }
}

/// Grows the stable or unstable manifold of a saddle periodic orbit from
/// seeds `γ(θ) ± ε v(θ)` on the Floquet bundle.
pub fn grow_orbit_manifold(
    p: &Params,
    orbit: &PeriodicOrbit,
    which: OrbitManifold,
    cap: f64,
    n_seeds: usize,
) -> Result<ManifoldPatch> {
    grow_orbit_manifold_with(p, orbit, which, cap, n_seeds, EPS_2D)
}

pub fn grow_orbit_manifold_with(
    p: &Params,
    orbit: &PeriodicOrbit,
    which: OrbitManifold,
    cap: f64,
    n_seeds: usize,
    offset: f64,
) -> Result<ManifoldPatch> {
    validate_growth(cap, n_seeds)?;
    let bundle = FloquetBundle::new(orbit, which)?;
    let t = orbit.period;
    // half-step phases keep seeds off the section through the fixed point
    let phases: Vec<f64> = (0..n_seeds).map(|i| t * (i as f64 + 0.5) / n_seeds as f64).collect();
    let frame: Vec<(State, Vector3<f64>)> = phases
        .par_iter()
        .map(|&th| Ok((bundle.point(th), bundle.vector(p, th)?)))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(2 * n_seeds);
    let mut sides = Vec::with_capacity(2 * n_seeds);
    let mut angles = Vec::with_capacity(2 * n_seeds);
    for side in [1i8, -1] {
        for (th, (x, v)) in phases.iter().zip(&frame) {
            points.push(x + v * (offset * side as f64));
            sides.push(side);
            angles.push(*th);
        }
    }
    let plus: Vec<usize> = (0..n_seeds).collect();
    let minus: Vec<usize> = (n_seeds..2 * n_seeds).collect();
    let orientable = bundle.orientable();
    let chains = if orientable {
        vec![
            SeedChain {
                indices: plus,
                closed: true,
            },
            SeedChain {
                indices: minus,
                closed: true,
            },
        ]
    } else {
        vec![SeedChain {
            indices: plus.into_iter().chain(minus).collect(),
            closed: true,
        }]
    };
    let stability = match which {
        OrbitManifold::Stable => ManifoldStability::Stable,
        OrbitManifold::Unstable => ManifoldStability::Unstable,
    };
    let trajectories = grow(p, &points, &growth_config(stability.direction(), cap))?;
    Ok(ManifoldPatch {
        params: *p,
        owner: Owner::Orbit(Box::new(orbit.clone())),
        stability,
        dimension: 2,
        trajectories,
        seeds: SeedDescriptor {
            offset,
            angles,
            sides,
            points,
            cap,
            chains,
        },
        bundle_orientable: Some(orientable),
    })
}

/// Surface against which a patch is intersected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambient {
    Sphere { center: State, radius: f64 },
    /// `n·x = d`, crossed in the given direction of forward time.
    Plane {
        normal: Vector3<f64>,
        offset: f64,
        crossing: Crossing,
    },
}

impl Ambient {
    pub fn default_sphere() -> Self {
        Ambient::Sphere {
            center: State::from(SPHERE_CENTER),
            radius: SPHERE_RADIUS,
        }
    }

    pub fn value(&self, s: &State) -> f64 {
        match *self {
            Ambient::Sphere { center, radius } => (s - center).norm() - radius,
            Ambient::Plane { normal, offset, .. } => normal.dot(s) - offset,
        }
    }

    fn accepts(&self, g0: f64, g1: f64, direction: Direction) -> bool {
        if !((g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0)) {
            return false;
        }
        let increasing_in_time = (g1 > g0) == (direction == Direction::Forward);
        match self {
            Ambient::Sphere { .. } => true,
            Ambient::Plane { crossing, .. } => match crossing {
                Crossing::Any => true,
                Crossing::Increasing => increasing_in_time,
                Crossing::Decreasing => !increasing_in_time,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<State>,
    /// Trajectory index of each point.
    pub trajectories: Vec<usize>,
    /// Which crossing of its trajectory each point is (0 = first).
    pub crossing_index: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub owner: String,
    pub ambient: Ambient,
    pub curves: Vec<Curve>,
}

impl CurveSet {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.curves.iter().map(|c| c.points.len()).sum()
    }

    /// Writes `curve_id,seq,x,y,z`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(out, "curve_id,seq,x,y,z")?;
        for (id, c) in self.curves.iter().enumerate() {
            for (k, s) in c.points.iter().enumerate() {
                writeln!(out, "{id},{k},{},{},{}", num(s.x), num(s.y), num(s.z))?;
            }
        }
        Ok(())
    }
}

/// Polished crossings of one trajectory with the ambient surface, in
/// integration order.
pub fn crossings(traj: &Trajectory, ambient: &Ambient) -> Vec<State> {
    let mut out = Vec::new();
    for d in &traj.dense {
        let a = State::from(*d.start());
        let b = State::from(d.eval(d.t1()));
        let (ga, gb) = (ambient.value(&a), ambient.value(&b));
        if !ambient.accepts(ga, gb, traj.direction) {
            continue;
        }
        let g = |t: f64| ambient.value(&State::from(d.eval(t)));
        let t = polish_root(g, d.t0, d.t1(), ga, gb);
        out.push(State::from(d.eval(t)));
    }
    out
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Some(v[v.len() / 2])
}

/// Strings per-trajectory crossings into curves: for each seed chain and
/// crossing index, consecutive seeds form a run, and runs are split where a
/// gap exceeds `SPLIT_FACTOR` times the running median of nearby gaps.
fn string_curves(patch: &ManifoldPatch, ambient: Ambient) -> CurveSet {
    let per_traj: Vec<Vec<State>> = patch
        .trajectories
        .par_iter()
        .map(|t| crossings(t, &ambient))
        .collect();
    let mut curves = Vec::new();
    if patch.dimension == 1 {
        for (i, pts) in per_traj.iter().enumerate() {
            for (k, s) in pts.iter().enumerate() {
                curves.push(Curve {
                    points: vec![*s],
                    trajectories: vec![i],
                    crossing_index: k,
                    closed: false,
                });
            }
        }
    } else {
        let max_k = per_traj.iter().map(Vec::len).max().unwrap_or(0);
        for chain in &patch.seeds.chains {
            for k in 0..max_k {
                curves.extend(chain_curves(chain, k, &per_traj));
            }
        }
    }
    CurveSet {
        owner: patch.label(),
        ambient,
        curves,
    }
}

/// Window half-width of the running median used to split curves.
const GAP_WINDOW: usize = 4;

fn chain_curves(chain: &SeedChain, k: usize, per_traj: &[Vec<State>]) -> Vec<Curve> {
    let n = chain.indices.len();
    let at = |pos: usize| per_traj[chain.indices[pos]].get(k);
    let next = |pos: usize| {
        if pos + 1 < n {
            Some(pos + 1)
        } else if chain.closed && n > 1 {
            Some(0)
        } else {
            None
        }
    };
    // gap[pos] joins pos to next(pos)
    let gaps: Vec<Option<f64>> = (0..n)
        .map(|pos| match (at(pos), next(pos).and_then(at)) {
            (Some(a), Some(b)) => Some((a - b).norm()),
            _ => None,
        })
        .collect();
    let linked = |pos: usize| -> bool {
        let Some(g) = gaps[pos] else { return false };
        let lo = pos.saturating_sub(GAP_WINDOW);
        let hi = (pos + GAP_WINDOW + 1).min(n);
        match median((lo..hi).filter_map(|i| gaps[i]).collect()) {
            Some(m) => g <= SPLIT_FACTOR * m,
            None => false,
        }
    };
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for pos in 0..n {
        if at(pos).is_none() {
            continue;
        }
        cur.push(pos);
        if pos + 1 == n || !linked(pos) {
            runs.push(std::mem::take(&mut cur));
        }
    }
    let wraps = chain.closed && n > 1 && linked(n - 1);
    let full = runs.len() == 1 && runs[0].len() == n;
    if wraps && !full && runs.len() > 1 && runs[0][0] == 0 {
        let head = runs.remove(0);
        runs.last_mut().unwrap().extend(head);
    }
    runs.into_iter()
        .map(|run| Curve {
            points: run.iter().map(|&pos| *at(pos).unwrap()).collect(),
            trajectories: run.iter().map(|&pos| chain.indices[pos]).collect(),
            crossing_index: k,
            closed: full && wraps,
        })
        .collect()
}

/// Intersection of a patch with the default sphere.
pub fn intersect_with_sphere(patch: &ManifoldPatch) -> CurveSet {
    string_curves(patch, Ambient::default_sphere())
}

pub fn intersect_with_sphere_at(patch: &ManifoldPatch, center: State, radius: f64) -> CurveSet {
    string_curves(patch, Ambient::Sphere { center, radius })
}

/// Crossings of a patch with a plane section, grouped by crossing index.
pub fn section_trace(patch: &ManifoldPatch, normal: Vector3<f64>, offset: f64, crossing: Crossing) -> CurveSet {
    string_curves(
        patch,
        Ambient::Plane {
            normal,
            offset,
            crossing,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::origin_equilibrium;

    #[test]
    fn clustered_angles_are_sorted_and_cover_circle() {
        let a = clustered_angles(40, 0.0);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a[0] > 0.0 && *a.last().unwrap() < 2.0 * PI);
        let near = a.iter().filter(|x| (*x - PI).abs() < 0.3).count();
        let far = a.iter().filter(|x| (*x - PI / 2.0).abs() < 0.3).count();
        assert!(near > far);
    }

    #[test]
    fn strong_stable_manifold_of_origin_is_z_axis() {
        let p = Params::reference(0.5, 0.0);
        let patch = grow_equilibrium_manifold(&p, &origin_equilibrium(&p), EquilibriumManifold::StrongStable1d, 1.0, 2).unwrap();
        assert_eq!(patch.trajectories.len(), 2);
        for t in &patch.trajectories {
            assert!(t.states.iter().all(|s| s.x.abs() <= 1e-8 && s.y.abs() <= 1e-8));
            assert!((t.arclength - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_meets_z_axis_twice() {
        let p = Params::reference(0.5, 0.0);
        let patch = grow_equilibrium_manifold(&p, &origin_equilibrium(&p), EquilibriumManifold::StrongStable1d, 2.0, 2).unwrap();
        let set = intersect_with_sphere(&patch);
        assert_eq!(set.point_count(), 2);
        let want = 0.11f64.sqrt();
        for c in &set.curves {
            assert!((c.points[0].z.abs() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn trajectory_inside_sphere_has_no_crossings() {
        let p = Params::reference(0.5, 0.0);
        let patch = grow_equilibrium_manifold(&p, &origin_equilibrium(&p), EquilibriumManifold::StrongStable1d, 0.1, 2).unwrap();
        assert!(intersect_with_sphere(&patch).is_empty());
    }

    #[test]
    fn stable_seeds_lie_in_eigenplane() {
        let p = Params::reference(0.2, 0.0);
        let eq = origin_equilibrium(&p);
        let patch = grow_equilibrium_manifold(&p, &eq, EquilibriumManifold::Stable2d, 0.5, 24).unwrap();
        let (u1, u2, _) = stable_plane(&eq).unwrap();
        let n = u1.cross(&u2);
        for s in &patch.seeds.points {
            assert!(n.dot(s).abs() <= 1e-12);
        }
        assert_eq!(patch.boundary_circles(), 1);
    }
}
