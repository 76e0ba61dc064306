use std::sync::OnceLock;

use approx::assert_relative_eq;
use flipscope::connections::{OrbitRole, SliceContext};
use flipscope::manifolds::{FloquetBundle, OrbitManifold};
use flipscope::model::{self, Params};
use flipscope::orbits::{self, MultiplierEvent, Orientability, PeriodicOrbit, SectionMap, TRANSVERSALITY_MIN};
use flipscope::Error;

fn slice() -> &'static SliceContext {
    static CTX: OnceLock<SliceContext> = OnceLock::new();
    CTX.get_or_init(|| SliceContext::reference(0.5).unwrap())
}

/// Composite Simpson quadrature of `tr Df` over one period.
fn trace_integral(o: &PeriodicOrbit) -> f64 {
    let traj = o.trajectory().unwrap();
    let n = 20_000;
    let h = o.period / n as f64;
    let tr = |t: f64| model::eval_jacobian(&o.params, &traj.state_at(t).unwrap()).trace();
    let mut acc = tr(0.0) + tr(o.period);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * tr(k as f64 * h);
    }
    acc * h / 3.0
}

fn real(o: &PeriodicOrbit) -> (f64, f64) {
    assert!(o.multipliers.iter().all(|m| m.im == 0.0), "complex multipliers on {}", o.label);
    (o.multipliers[0].re, o.multipliers[1].re)
}

#[test]
fn region_one_orbit_on_y_zero_section() {
    let q_plane = slice().orbit(OrbitRole::GammaO, 0.001).unwrap();
    let traj = q_plane.trajectory().unwrap();
    let section = SectionMap::y_zero();
    // first upward crossing of y = 0 along the q-plane orbit
    let k = (1..traj.states.len())
        .find(|&i| traj.states[i - 1].y < 0.0 && traj.states[i].y >= 0.0)
        .unwrap();
    let o = orbits::find_periodic_orbit(&q_plane.params, &section, &traj.states[k], 1).unwrap();
    let (l1, l2) = real(&o);
    assert!(0.0 < l1 && l1 < 1.0 && 1.0 < l2);
    assert_eq!(o.orientability, Orientability::Orientable);
    assert_relative_eq!(o.period, q_plane.period, max_relative = 1e-8);
    assert_relative_eq!(l2, real(&q_plane).1, max_relative = 1e-5);
}

#[test]
fn gamma_t_is_nonorientable() {
    let o = slice().orbit(OrbitRole::GammaT, -0.002).unwrap();
    let (l1, l2) = real(&o);
    assert!(l2 < -1.0 && -1.0 < l1 && l1 < 0.0);
    assert_eq!(o.orientability, Orientability::Nonorientable);
}

#[test]
fn liouville_on_gamma_o() {
    let o = slice().orbit(OrbitRole::GammaO, -0.002).unwrap();
    let expected = trace_integral(&o).exp();
    assert_relative_eq!(o.trace_integral.exp(), expected, max_relative = 1e-6);
    // |Λ2| is moderate here, so the reduced Jacobian's determinant is accurate
    assert_relative_eq!(o.return_jacobian.determinant(), expected, max_relative = 1e-6);
    assert_relative_eq!(o.monodromy_determinant().unwrap(), expected, max_relative = 1e-6);
}

#[test]
fn accepted_orbits_satisfy_floquet_invariants() {
    for b in &slice().branch.points {
        let o = &b.orbit;
        let f = model::eval_field(&o.params, &o.fixed_point);
        assert!((o.monodromy * f - f).norm() <= 1e-6 * f.norm(), "trivial multiplier at mu = {}", b.mu);
        let det = o.monodromy_determinant().unwrap();
        assert_relative_eq!(det, o.trace_integral.exp(), max_relative = 1e-6);
        assert!(o.period > 0.0);
        assert!(o.section.normal.normalize().dot(&f).abs() >= TRANSVERSALITY_MIN);
        assert_eq!(o.orientability, Orientability::from_multipliers(&o.multipliers));
        let expected = if o.multipliers.iter().any(|m| m.im != 0.0) {
            Orientability::Complex
        } else if o.multipliers[0].re > 0.0 && o.multipliers[1].re > 0.0 {
            Orientability::Orientable
        } else {
            Orientability::Nonorientable
        };
        assert_eq!(o.orientability, expected);
    }
}

#[test]
fn continuation_without_events_is_smooth() {
    let start = slice().orbit(OrbitRole::GammaO, -0.002).unwrap();
    let branch = orbits::continue_orbit(&start, -0.004, &Default::default()).unwrap();
    let pts = &branch.points;
    assert!(pts.len() > 3);
    for w in pts.windows(2) {
        assert_eq!(w[0].orbit.orientability, Orientability::Orientable);
        let (a, b) = (real(&w[0].orbit).1, real(&w[1].orbit).1);
        assert!((a - b).abs() <= 0.05 * a.abs(), "multiplier jump {a} → {b}");
    }
}

#[test]
fn fold_and_flip_on_the_slice() {
    let snp = orbits::detect_multiplier_event(&slice().branch, MultiplierEvent::PlusOne).unwrap();
    let pd = orbits::detect_multiplier_event(&slice().branch, MultiplierEvent::MinusOne).unwrap();
    assert!((snp.mu - -7.386406e-3).abs() <= 2e-5);
    assert!((pd.mu - -7.211185e-3).abs() <= 2e-5);
    assert!(pd.bracket <= 1e-8 && snp.bracket <= 1e-8);
}

#[test]
fn complex_collision_root() {
    let cc = orbits::detect_multiplier_event(&slice().branch, MultiplierEvent::ComplexCollision).unwrap();
    assert!(cc.orbit.discriminant().abs() <= 1e-8, "discriminant {}", cc.orbit.discriminant());
}

#[test]
fn period_doubling_cascade_is_monotone() {
    let pd = orbits::detect_multiplier_event(&slice().branch, MultiplierEvent::MinusOne).unwrap();
    let cascade = orbits::period_doubling_cascade(&pd, 3, 2e-5, 1.0).unwrap();
    let mus: Vec<f64> = cascade.iter().map(|e| e.mu).collect();
    let expected = [-7.211185e-3, -7.163762e-3, -7.153300e-3, -7.151054e-3];
    for (m, e) in mus.iter().zip(expected) {
        assert!((m - e).abs() <= 2e-5, "{m} vs {e}");
    }
    assert!(mus.windows(2).all(|w| w[1] > w[0]));
    let periods: Vec<f64> = cascade.iter().map(|e| e.orbit.period).collect();
    for w in periods.windows(2) {
        assert_relative_eq!(w[1], 2.0 * w[0], max_relative = 1e-2);
    }
}

#[test]
fn return_map_is_unimodal_and_seed_independent() {
    let mu = -0.007076768;
    let p = slice().params(mu);
    let gamma_o = slice().orbit(OrbitRole::GammaO, mu).unwrap();
    let bundle = FloquetBundle::new(&gamma_o, OrbitManifold::Unstable).unwrap();
    let envelopes: Vec<Vec<f64>> = [1e-5, 1.00001e-5, 1.00002e-5]
        .iter()
        .map(|&off| {
            let s0 = bundle.seed_point(&p, 0.0, off).unwrap();
            let seq = orbits::collect_returns(&p, &s0, &SectionMap::y_zero(), 3000).unwrap();
            let env = seq.binned_envelope(20);
            assert_eq!(orbits::slope_sign_changes(&env), 1);
            env.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()
        })
        .collect();
    for e in &envelopes[1..] {
        for (a, b) in e.iter().zip(&envelopes[0]) {
            if a.is_finite() && b.is_finite() {
                assert!((a - b).abs() <= 0.02, "bin mean {a} vs {b}");
            }
        }
    }
}

#[test]
fn attracting_orbit_gives_constant_returns() {
    let ctx = slice();
    let o = ctx
        .branch
        .points
        .iter()
        .map(|b| &b.orbit)
        .find(|o| o.multipliers.iter().all(|m| m.norm() < 0.9))
        .expect("an attracting orbit on the branch");
    let r = orbits::collect_returns(&o.params, &o.fixed_point, &o.section, 50);
    assert!(matches!(r, Err(Error::ConstantSequence)), "{r:?}");
}

#[test]
fn params_are_the_slice_parameters() {
    assert_eq!(slice().params(-0.003), Params::reference(0.5, -0.003));
}
