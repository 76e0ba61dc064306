//! Acceptance criteria, one PASS/FAIL line each.

use std::time::{Duration, Instant};

use flipscope::connections::{self, LocateOptions, OrbitRole, SliceContext};
use flipscope::flow::{self, IntegratorConfig, Record};
use flipscope::manifolds::{self, EquilibriumManifold, FloquetBundle, OrbitManifold};
use flipscope::model::{self, Params, State};
use flipscope::orbits::{self, MultiplierEvent, PeriodicOrbit, SectionMap};
use flipscope::projection;
use flipscope::winding::{self, GridSpec, WindingConfig, Zeta};
use nalgebra::Vector3;

const TABLE: [(&str, f64); 8] = [
    ("^2H_t", -2.880268e-3),
    ("Q_0^{Γ_t}[Γ_o]", -2.880324e-3),
    ("H_t[2Γ_o]", -3.816057e-3),
    ("Q_0^{Γ_t}[2Γ_o]", -3.816233e-3),
    ("H_t[3Γ_o]", -4.249463e-3),
    ("Q_0^{Γ_o}", -4.861805e-3),
    ("PD_{Γ_t}", -7.211185e-3),
    ("SNP_{Γ_o}", -7.386406e-3),
];
const TAN: f64 = -7.076705e-3;
const F: f64 = -7.054355e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = std::result::Result<Outcome, String>;

fn outcome(pass: bool, detail: impl Into<String>) -> Check {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn run(&mut self, n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let res = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = limit.map_or(true, |l| elapsed <= l);
        let pass = pass && in_time;
        let limit_text = limit.map_or(String::new(), |l| format!(" / limit {l:.0?}"));
        println!(
            "{} {n:>2} {name}: {detail} [{elapsed:.2?}{limit_text}]",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(n);
        }
    }
}

fn c1_eigenvalues() -> Check {
    let p = Params::reference(0.5, 0.0);
    let start = Instant::now();
    let e = model::origin_eigens(&p).map_err(err)?;
    let elapsed = start.elapsed();
    let dev = (e.lambda_u - 1.7)
        .abs()
        .max((e.lambda_s + 0.3).abs())
        .max((e.lambda_ss + 2.0).abs());
    outcome(
        dev <= 1e-12 && elapsed < Duration::from_millis(1),
        format!(
            "({}, {}, {}) max deviation {dev:.1e}, call {elapsed:.1?}",
            e.lambda_u, e.lambda_s, e.lambda_ss
        ),
    )
}

fn c2_primary_homoclinic() -> Check {
    let mut worst_split: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    for alpha in [0.2, 0.35, 0.5] {
        let p = Params::reference(alpha, 0.0);
        let g = connections::homoclinic_split(&p).map_err(err)?;
        let split = g.value.signed().ok_or("split is not a signed value")?;
        worst_split = worst_split.max(split.abs());
        let b = connections::locate_homoclinic(&p, (-1e-3, 1e-3), 1e-9).map_err(err)?;
        worst_mu = worst_mu.max(b.mu.abs());
    }
    outcome(
        worst_split <= 1e-6 && worst_mu <= 1e-7,
        format!("max |split(α, 0)| {worst_split:.1e}, max |μ*| {worst_mu:.1e}"),
    )
}

fn c3_inclination_flip() -> Check {
    let base = Params::reference(0.5, 0.0);
    let flip = connections::locate_inclination_flip(&base, (0.2, 0.5), 1e-8).map_err(err)?;
    let i_02 = connections::orientation_index(&base.with_alpha(0.2)).map_err(err)?;
    let i_05 = connections::orientation_index(&base.with_alpha(0.5)).map_err(err)?;
    let dev = (flip.alpha - 0.3694818).abs();
    outcome(
        dev <= 1e-3 && i_02 > 0.0 && i_05 < 0.0,
        format!("α* = {:.9}, deviation {dev:.1e}, index(0.2) = {i_02:+.3}, index(0.5) = {i_05:+.3}", flip.alpha),
    )
}

fn c4_winding() -> Check {
    let z = |a: f64, m: f64| winding::compute_zeta(&Params::reference(a, m)).map(|r| r.zeta).map_err(err);
    let (z1, z2, z3) = (z(0.5, 0.001)?, z(0.5, -0.001)?, z(0.2, -0.001)?);
    outcome(
        z1 == Zeta::Finite(1) && z2 == Zeta::Finite(2) && z3 == Zeta::Saturated,
        format!("ζ(0.5, 0.001) = {z1}, ζ(0.5, -0.001) = {z2}, ζ(0.2, -0.001) = {z3}"),
    )
}

/// Located slice points in the order of the reference targets.
fn locate_slice(ctx: &SliceContext) -> Result<Vec<(String, f64)>, String> {
    let mut out = Vec::new();
    for t in connections::reference_slice_targets() {
        let opts = LocateOptions {
            kind: Some(t.kind.into()),
            ..LocateOptions::default()
        };
        let b = connections::locate_bifurcation(ctx, t.bracket, t.detector, &opts).map_err(err)?;
        out.push((t.kind.to_string(), b.mu));
    }
    Ok(out)
}

fn located(points: &[(String, f64)], kind: &str) -> Result<f64, String> {
    points
        .iter()
        .find(|(k, _)| k == kind)
        .map(|p| p.1)
        .ok_or_else(|| format!("{kind} was not located"))
}

fn c5_table(points: &[(String, f64)], elapsed: Duration) -> Check {
    let mut worst: f64 = 0.0;
    let mut mus = Vec::new();
    for (kind, reference) in TABLE {
        let mu = located(points, kind)?;
        worst = worst.max((mu - reference).abs());
        mus.push(mu);
    }
    let ordered = mus.windows(2).all(|w| w[0] > w[1]);
    outcome(
        worst <= 2e-5 && ordered && elapsed <= Duration::from_secs(900),
        format!(
            "max deviation {worst:.2e}, order {}, all slice points located in {elapsed:.1?} (limit 15 min)",
            if ordered { "matches" } else { "differs" }
        ),
    )
}

fn c6_tangencies(points: &[(String, f64)]) -> Check {
    let tan = located(points, "Tan_{Γ_o}")?;
    let f = located(points, "F")?;
    let q0 = located(points, "Q_0^{Γ_o}")?;
    let pd = located(points, "PD_{Γ_t}")?;
    let ordered = q0 > f && f > tan && tan > pd;
    outcome(
        (tan - TAN).abs() <= 1e-4 && (f - F).abs() <= 1e-4 && ordered,
        format!(
            "Tan = {tan:.6e} (deviation {:.1e}), F = {f:.6e} (deviation {:.1e}), order {}",
            (tan - TAN).abs(),
            (f - F).abs(),
            if ordered { "matches" } else { "differs" }
        ),
    )
}

fn liouville_error(o: &PeriodicOrbit) -> Result<f64, String> {
    let det = o.monodromy_determinant().map_err(err)?;
    let expected = o.trace_integral.exp();
    Ok(((det - expected) / expected).abs())
}

fn c7_floquet(ctx: &SliceContext) -> Check {
    let gamma_o = ctx.orbit(OrbitRole::GammaO, -0.002).map_err(err)?;
    let gamma_t = ctx.orbit(OrbitRole::GammaT, -0.002).map_err(err)?;
    let snp = orbits::detect_multiplier_event(&ctx.branch, MultiplierEvent::PlusOne).map_err(err)?;
    let pd = orbits::detect_multiplier_event(&ctx.branch, MultiplierEvent::MinusOne).map_err(err)?;
    let cascade = orbits::period_doubling_cascade(&pd, 3, 2e-5, 1.0).map_err(err)?;
    let mut all: Vec<&PeriodicOrbit> = vec![&gamma_o, &gamma_t, &snp.orbit];
    all.extend(ctx.branch.points.iter().map(|b| &b.orbit));
    all.extend(cascade.iter().map(|e| &e.orbit));
    let mut worst: f64 = 0.0;
    for o in &all {
        worst = worst.max(liouville_error(o)?);
    }
    let real_sign = |o: &PeriodicOrbit, positive: bool| {
        o.multipliers
            .iter()
            .all(|m| m.im == 0.0 && (m.re > 0.0) == positive && m.re != 0.0)
    };
    let signs = real_sign(&gamma_o, true) && real_sign(&gamma_t, false);
    let cascade_mu: Vec<f64> = cascade.iter().map(|e| e.mu).collect();
    let monotone = cascade_mu.windows(2).all(|w| w[1] > w[0]);
    outcome(
        worst <= 1e-6 && signs && monotone,
        format!(
            "{} orbits, max relative det error {worst:.1e}, Γ_o ({:+.3e}, {:+.3e}), Γ_t ({:+.3e}, {:+.3e}), PD cascade {:?}",
            all.len(),
            gamma_o.multipliers[0].re,
            gamma_o.multipliers[1].re,
            gamma_t.multipliers[0].re,
            gamma_t.multipliers[1].re,
            cascade_mu.iter().map(|m| format!("{m:.6e}")).collect::<Vec<_>>()
        ),
    )
}

fn c8_return_map(ctx: &SliceContext) -> Check {
    let mu = -0.007076768;
    let p = ctx.params(mu);
    let gamma_o = ctx.orbit(OrbitRole::GammaO, mu).map_err(err)?;
    let bundle = FloquetBundle::new(&gamma_o, OrbitManifold::Unstable).map_err(err)?;
    let s0 = bundle.seed_point(&p, 0.0, manifolds::EPS_2D).map_err(err)?;
    let seq = orbits::collect_returns(&p, &s0, &SectionMap::y_zero(), 300).map_err(err)?;
    let changes = orbits::slope_sign_changes(&seq.binned_envelope(20));
    outcome(changes == 1, format!("{} returns, {changes} slope sign changes over 20 bins", seq.raw.len()))
}

/// μ of the boundaries below the plateaus `1..=last` in one grid column,
/// scanning downward from the largest μ. Each boundary is placed midway
/// between the last node of a plateau and the first node past it.
fn column_boundaries(grid: &winding::SweepGrid, i: usize, last: u32) -> Result<Vec<f64>, String> {
    let spec = grid.spec;
    let mut out = Vec::new();
    let mut current = 1;
    let mut prev_mu = None;
    for j in (0..spec.n_mu).rev() {
        let z = grid.zeta(i, j).ok_or_else(|| format!("cell ({i}, {j}) failed"))?;
        let rank = z.finite().unwrap_or(u32::MAX);
        if prev_mu.is_none() && rank != 1 {
            return Err(format!("column {i} does not start in plateau 1 (ζ = {z})"));
        }
        if rank < current {
            return Err(format!("column {i}: ζ decreases at node {j}"));
        }
        if rank > current {
            if rank != current + 1 && current < last {
                return Err(format!("column {i}: plateau {} skipped at node {j}", current + 1));
            }
            out.push(0.5 * (prev_mu.unwrap() + spec.mu(j)));
            if current == last {
                return Ok(out);
            }
            current = rank;
        }
        prev_mu = Some(spec.mu(j));
    }
    Err(format!("column {i} never leaves plateau {current}"))
}

fn c9_sweep(primary: f64, points: &[(String, f64)]) -> Check {
    let spec = GridSpec {
        alpha_range: (0.3, 0.7),
        mu_range: (-0.006, 0.0005),
        n_alpha: 100,
        n_mu: 100,
    };
    let grid = winding::sweep_zeta(&Params::reference(0.3, 0.0), &spec, &WindingConfig::default(), 8)
        .map_err(err)?;
    let failed = grid.cells.iter().filter(|c| c.is_err()).count();
    let cell = (spec.mu_range.1 - spec.mu_range.0) / (spec.n_mu - 1) as f64;
    let i_lo = (0..spec.n_alpha)
        .rev()
        .find(|&i| spec.alpha(i) <= 0.5)
        .ok_or("no column below α = 0.5")?;
    let (a_lo, a_hi) = (spec.alpha(i_lo), spec.alpha(i_lo + 1));
    let w = (0.5 - a_lo) / (a_hi - a_lo);
    let lo = column_boundaries(&grid, i_lo, 4)?;
    let hi = column_boundaries(&grid, i_lo + 1, 4)?;
    let expected = [
        primary,
        located(points, "^2H_t")?,
        located(points, "H_t[2Γ_o]")?,
        located(points, "H_t[3Γ_o]")?,
    ];
    let mut worst: f64 = 0.0;
    let mut text = Vec::new();
    for k in 0..4 {
        let b = (1.0 - w) * lo[k] + w * hi[k];
        worst = worst.max((b - expected[k]).abs());
        text.push(format!("{}→{} {b:.4e}", k + 1, k + 2));
    }
    outcome(
        failed == 0 && worst <= cell,
        format!(
            "{failed} failed cells, boundaries at α = 0.5: {}; max deviation {worst:.1e} vs cell {cell:.2e}",
            text.join(", ")
        ),
    )
}

fn central_jacobian(p: &Params, s: &State) -> nalgebra::Matrix3<f64> {
    let h = 1e-6;
    let mut j = nalgebra::Matrix3::zeros();
    for k in 0..3 {
        let mut e = State::zeros();
        e[k] = h;
        let col = (model::eval_field(p, &(s + e)) - model::eval_field(p, &(s - e))) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

/// The loop of W^u(0) at the primary homoclinic point, from |x| ≈ 0.13 on
/// the way out to |x| ≈ 0.25 on the way back.
fn excursion(p: &Params) -> flipscope::Result<flow::Trajectory> {
    let s0 = winding::unstable_seed(p, 1e-6)?;
    let out = flow::integrate(p, &s0, &IntegratorConfig::default().with_t_max(7.0), &[])?;
    let cfg = IntegratorConfig::default().with_t_max(8.0).with_record(Record::Dense);
    flow::integrate(p, &out.end().1, &cfg, &[])
}

fn c10_properties() -> Check {
    let mut notes = Vec::new();
    let mut pass = true;

    let mut jac_err: f64 = 0.0;
    let mut axis_err: f64 = 0.0;
    for (a, m) in [(0.2, 0.0), (0.5, -0.004), (0.7, 0.0005), (0.35, -0.0071)] {
        let p = Params::reference(a, m);
        for k in 0..64 {
            let t = k as f64;
            let s = State::new((0.7 * t).sin(), (1.3 * t).cos() * 0.8, (0.37 * t).sin() * 0.9);
            let j = model::eval_jacobian(&p, &s);
            jac_err = jac_err.max((j - central_jacobian(&p, &s)).abs().max() / (1.0 + j.abs().max()));
            let f = model::eval_field(&p, &State::new(0.0, 0.0, s.z));
            axis_err = axis_err.max(f.x.abs().max(f.y.abs()));
        }
    }
    pass &= jac_err <= 1e-6 && axis_err == 0.0;
    notes.push(format!("Jacobian {jac_err:.1e}, z-axis {axis_err:.0e}"));

    let p = Params::reference(0.5, 0.0);
    let traj = excursion(&p).map_err(err)?;
    let mut drift: f64 = 0.0;
    for k in 0..10 {
        let t = k as f64 + 1.0;
        let v0 = Vector3::new(t.sin(), (2.0 * t).cos(), 0.5 + (3.0 * t).sin());
        let w0 = Vector3::new((1.5 * t).cos(), 0.3 * t.sin(), 1.0);
        let v = flow::transport_tangent(&p, &traj, v0).map_err(err)?.last().1;
        let w = flow::transport_adjoint(&p, &traj, w0).map_err(err)?.last().1;
        drift = drift.max(((w.dot(&v) - w0.dot(&v0)) / w0.dot(&v0)).abs());
    }
    pass &= drift <= 1e-8;
    notes.push(format!("pairing drift {drift:.1e}"));

    let p = Params::reference(0.5, -0.0071);
    let origin = model::origin_equilibrium(&p);
    let patch = manifolds::grow_equilibrium_manifold(&p, &origin, EquilibriumManifold::Stable2d, manifolds::CAP_EQUILIBRIUM, 100)
        .map_err(err)?;
    let curves = manifolds::intersect_with_sphere(&patch);
    let center = State::from(manifolds::SPHERE_CENTER);
    let mut sphere: f64 = 0.0;
    let mut round_trip: f64 = 0.0;
    for c in &curves.curves {
        for x in &c.points {
            sphere = sphere.max(((x - center).norm() - manifolds::SPHERE_RADIUS).abs());
            let xp = projection::rotate_to_canonical(x).map_err(err)?;
            let back = projection::unproject(&projection::stereo_project(&xp).map_err(err)?);
            round_trip = round_trip.max((back - x).norm());
        }
    }
    pass &= curves.point_count() > 0 && sphere <= 1e-8 && round_trip <= 1e-10;
    notes.push(format!(
        "{} sphere points, residual {sphere:.1e}, round trip {round_trip:.1e}",
        curves.point_count()
    ));

    let spec = GridSpec {
        alpha_range: (0.3, 0.7),
        mu_range: (-0.005, 0.0005),
        n_alpha: 6,
        n_mu: 6,
    };
    let csv = |workers| -> Result<Vec<u8>, String> {
        let g = winding::sweep_zeta(&Params::reference(0.3, 0.0), &spec, &WindingConfig::default(), workers)
            .map_err(err)?;
        let mut buf = Vec::new();
        g.write_csv(&mut buf).map_err(err)?;
        Ok(buf)
    };
    let (a, b, c) = (csv(1)?, csv(4)?, csv(4)?);
    let identical = a == b && b == c;
    pass &= identical;
    notes.push(format!("sweep CSV {}", if identical { "byte-identical" } else { "differs" }));

    outcome(pass, notes.join(", "))
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    let secs = Duration::from_secs;
    report.run(1, "origin eigenvalues", None, c1_eigenvalues);
    report.run(2, "primary homoclinic locus", None, c2_primary_homoclinic);
    report.run(3, "inclination flip", Some(secs(60)), c3_inclination_flip);
    report.run(4, "winding values", Some(secs(5)), c4_winding);

    let start = Instant::now();
    let slice = SliceContext::reference(0.5).and_then(|ctx| {
        let points = locate_slice(&ctx).map_err(|e| flipscope::Error::Config(e))?;
        Ok((ctx, points))
    });
    let slice_time = start.elapsed();
    let (ctx, points) = match slice {
        Ok(v) => (Some(v.0), v.1),
        Err(e) => {
            println!("slice location failed: {e}");
            (None, Vec::new())
        }
    };
    report.run(5, "slice points", None, || c5_table(&points, slice_time));
    report.run(6, "tangency points", None, || c6_tangencies(&points));
    report.run(7, "Floquet properties", None, || {
        c7_floquet(ctx.as_ref().ok_or("no slice context")?)
    });
    report.run(8, "return map", Some(secs(60)), || c8_return_map(ctx.as_ref().ok_or("no slice context")?));
    report.run(9, "sweep structure", Some(secs(600)), || {
        let primary = connections::locate_homoclinic(&Params::reference(0.5, 0.0), (-1e-3, 1e-3), 1e-9)
            .map_err(err)?
            .mu;
        c9_sweep(primary, &points)
    });
    report.run(10, "property suites", Some(secs(300)), c10_properties);

    if report.failed.is_empty() {
        println!("all criteria passed");
    } else {
        println!("failed criteria: {:?}", report.failed);
        std::process::exit(1);
    }
}
