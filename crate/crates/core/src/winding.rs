//! Winding number ζ of the unstable manifold of the origin around the strong
//! stable manifold of q, and raster sweeps of ζ over the `(alpha, mu)` plane.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{self, Crossing, EventSpec, IntegratorConfig, Record, Termination};
use crate::model::{self, origin_eigens, Params, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zeta {
    Finite(u32),
    /// The crossing cap or time limit was hit before reaching `∂V`.
    Saturated,
}

impl Zeta {
    /// Raster encoding: the value itself, or −1 when saturated.
    pub fn code(self) -> i64 {
        match self {
            Zeta::Finite(n) => n as i64,
            Zeta::Saturated => -1,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Zeta::Finite(n) => Some(n),
            Zeta::Saturated => None,
        }
    }
}

impl fmt::Display for Zeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zeta::Finite(n) => write!(f, "{n}"),
            Zeta::Saturated => f.write_str("saturated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindingTermination {
    ReachedBoundary,
    TimeLimit,
    CrossingCap,
}

impl WindingTermination {
    pub fn as_str(self) -> &'static str {
        match self {
            WindingTermination::ReachedBoundary => "reached-boundary",
            WindingTermination::TimeLimit => "time-limit",
            WindingTermination::CrossingCap => "crossing-cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingResult {
    pub zeta: Zeta,
    pub crossing_count: usize,
    pub termination: WindingTermination,
    pub final_state: State,
    pub total_time: f64,
    /// x-coordinate of q defining the counting plane.
    pub q_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingConfig {
    pub seed_offset: f64,
    pub max_crossings: usize,
    pub integrator: IntegratorConfig,
}

impl Default for WindingConfig {
    fn default() -> Self {
        Self {
            seed_offset: 1e-7,
            max_crossings: 200,
            integrator: IntegratorConfig::default()
                .with_t_max(5000.0)
                .with_record(Record::Endpoints),
        }
    }
}

/// Seed on the branch of the unstable manifold of the origin whose initial
/// velocity has positive x-component.
pub fn unstable_seed(p: &Params, offset: f64) -> Result<State> {
    let e = origin_eigens(p)?;
    let seed = e.e_u * offset;
    let v = model::eval_field(p, &seed);
    Ok(if v.x >= 0.0 { seed } else { -seed })
}

pub fn compute_zeta(p: &Params) -> Result<WindingResult> {
    compute_zeta_with(p, &WindingConfig::default())
}

pub fn compute_zeta_with(p: &Params, cfg: &WindingConfig) -> Result<WindingResult> {
    let q = model::find_q(p)?;
    let q_x = q.location.x;
    let s0 = unstable_seed(p, cfg.seed_offset)?;
    let events = [
        EventSpec::plane(State::x(), q_x, Crossing::Any).with_max_count(cfg.max_crossings),
        EventSpec::quadrant_entry(),
    ];
    let traj = flow::integrate(p, &s0, &cfg.integrator, &events)?;
    let crossing_count = traj.events_of(0).count();
    let (total_time, final_state) = traj.end();
    let (zeta, termination) = match traj.termination {
        Termination::Event(1) => {
            if crossing_count % 2 != 0 {
                return Err(Error::OddCrossingCount(crossing_count));
            }
            (
                Zeta::Finite((crossing_count / 2) as u32),
                WindingTermination::ReachedBoundary,
            )
        }
        Termination::EventCap(_) => (Zeta::Saturated, WindingTermination::CrossingCap),
        _ => (Zeta::Saturated, WindingTermination::TimeLimit),
    };
    Ok(WindingResult {
        zeta,
        crossing_count,
        termination,
        final_state,
        total_time,
        q_x,
    })
}

/// Rectangular parameter raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub alpha_range: (f64, f64),
    pub mu_range: (f64, f64),
    pub n_alpha: usize,
    pub n_mu: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ok(self.alpha_range) || !ok(self.mu_range) {
            return Err(Error::Config("grid ranges must be finite with min ≤ max".into()));
        }
        if self.n_alpha == 0 || self.n_mu == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        Ok(())
    }

    fn node(range: (f64, f64), n: usize, i: usize) -> f64 {
        if n == 1 {
            range.0
        } else {
            range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
        }
    }

    pub fn alpha(&self, i: usize) -> f64 {
        Self::node(self.alpha_range, self.n_alpha, i)
    }

    pub fn mu(&self, j: usize) -> f64 {
        Self::node(self.mu_range, self.n_mu, j)
    }

    pub fn len(&self) -> usize {
        self.n_alpha * self.n_mu
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(i_alpha, j_mu)` of a flat, row-major (mu-major) cell index.
    pub fn unflatten(&self, k: usize) -> (usize, usize) {
        (k % self.n_alpha, k / self.n_alpha)
    }
}

/// Per-cell outcome; errors are kept as text so a sweep never aborts.
pub type Cell = std::result::Result<WindingResult, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spec: GridSpec,
    /// Row-major: `cells[j_mu * n_alpha + i_alpha]`.
    pub cells: Vec<Cell>,
}

impl SweepGrid {
    pub fn cell(&self, i_alpha: usize, j_mu: usize) -> &Cell {
        &self.cells[j_mu * self.spec.n_alpha + i_alpha]
    }

    pub fn zeta(&self, i_alpha: usize, j_mu: usize) -> Option<Zeta> {
        self.cell(i_alpha, j_mu).as_ref().ok().map(|r| r.zeta)
    }

    /// Writes `alpha,mu,zeta,crossings,termination`; saturated is −1,
    /// failed cells carry `error` in the termination column.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(out, "alpha,mu,zeta,crossings,termination")?;
        for (k, cell) in self.cells.iter().enumerate() {
            let (i, j) = self.spec.unflatten(k);
            let (a, m) = (self.spec.alpha(i), self.spec.mu(j));
            match cell {
                Ok(r) => writeln!(
                    out,
                    "{},{},{},{},{}",
                    num(a),
                    num(m),
                    r.zeta.code(),
                    r.crossing_count,
                    r.termination.as_str()
                )?,
                Err(_) => writeln!(out, "{},{},,,error", num(a), num(m))?,
            }
        }
        Ok(())
    }
}

/// Evaluates ζ on every raster cell using up to `workers` threads. The raster
/// is assembled by cell index, so the result is independent of scheduling.
pub fn sweep_zeta(
    base: &Params,
    spec: &GridSpec,
    cfg: &WindingConfig,
    workers: usize,
) -> Result<SweepGrid> {
    spec.validate()?;
    let eval = |k: usize| -> Cell {
        let (i, j) = spec.unflatten(k);
        let p = Params {
            alpha: spec.alpha(i),
            mu: spec.mu(j),
            ..*base
        };
        compute_zeta_with(&p, cfg).map_err(|e| e.to_string())
    };
    let cells = if workers <= 1 {
        (0..spec.len()).map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| (0..spec.len()).into_par_iter().map(eval).collect())
    };
    Ok(SweepGrid { spec: *spec, cells })
}
