use flipscope::flow::{self, IntegratorConfig};
use flipscope::model::Params;
use flipscope::Error;
use flipscope::winding::{self, GridSpec, WindingConfig, WindingTermination, Zeta};
use proptest::prelude::*;

fn zeta(alpha: f64, mu: f64) -> Zeta {
    winding::compute_zeta(&Params::reference(alpha, mu)).unwrap().zeta
}

/// Bisection on ζ between two slice points with different values.
fn boundary(alpha: f64, mut hi: f64, mut lo: f64) -> f64 {
    let z_hi = zeta(alpha, hi);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (hi + lo);
        if zeta(alpha, mid) == z_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (hi + lo)
}

#[test]
fn slice_plateaus_and_boundaries() {
    let samples = [(0.0005, 1), (-0.001, 2), (-0.0033, 3), (-0.004, 4), (-0.0043, 5)];
    for (mu, z) in samples {
        assert_eq!(zeta(0.5, mu), Zeta::Finite(z), "μ = {mu}");
    }
    let expected = [-2.880268e-3, -3.816057e-3, -4.249463e-3];
    for (k, w) in samples[1..].windows(2).enumerate() {
        let b = boundary(0.5, w[0].0, w[1].0);
        assert!((b - expected[k]).abs() <= 1e-4, "boundary {b} vs {}", expected[k]);
    }
    assert!(boundary(0.5, 0.0005, -0.001).abs() <= 1e-4);
}

#[test]
fn quadrant_is_positively_invariant() {
    for (alpha, mu) in [(0.5, 0.001), (0.5, -0.001), (0.5, -0.0033), (0.5, -0.004)] {
        let p = Params::reference(alpha, mu);
        let r = winding::compute_zeta(&p).unwrap();
        assert_eq!(r.termination, WindingTermination::ReachedBoundary);
        // trajectories inside V may run off to infinity; the part before the
        // escape radius is what is checked
        let traj = match flow::integrate(&p, &r.final_state, &IntegratorConfig::default().with_t_max(10.0), &[]) {
            Ok(t) => t,
            Err(Error::Divergence { partial, .. }) => *partial,
            Err(e) => panic!("{e}"),
        };
        for s in &traj.states {
            assert!(s.x <= 1e-12 && s.y <= 1e-12, "left V at {s:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn zeta_is_constant_inside_a_plateau(alpha in 0.49..0.51f64, mu in -0.0020..-0.0003f64) {
        prop_assert_eq!(zeta(alpha, mu), Zeta::Finite(2));
    }

    #[test]
    fn crossing_count_is_even_on_reaching_boundary(alpha in 0.3..0.7f64, mu in -0.006..0.001f64) {
        let r = winding::compute_zeta(&Params::reference(alpha, mu)).unwrap();
        if r.termination == WindingTermination::ReachedBoundary {
            prop_assert_eq!(r.crossing_count % 2, 0);
            prop_assert_eq!(r.zeta, Zeta::Finite((r.crossing_count / 2) as u32));
        }
    }
}

#[test]
fn coarse_sweep_has_ordered_plateaus() {
    let spec = GridSpec {
        alpha_range: (0.3, 0.7),
        mu_range: (-0.006, 0.001),
        n_alpha: 50,
        n_mu: 50,
    };
    let grid = winding::sweep_zeta(&Params::reference(0.3, 0.0), &spec, &WindingConfig::default(), 4).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..spec.n_alpha {
        let mut last = 0;
        for j in (0..spec.n_mu).rev() {
            let z = grid.zeta(i, j).unwrap().finite().unwrap_or(u32::MAX);
            assert!(z >= last, "ζ decreases downward in column {i}");
            last = z;
            seen.insert(z);
        }
    }
    for z in 1..=4 {
        assert!(seen.contains(&z), "plateau {z} missing");
    }
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let spec = GridSpec {
        alpha_range: (0.35, 0.65),
        mu_range: (-0.005, 0.0005),
        n_alpha: 7,
        n_mu: 9,
    };
    let base = Params::reference(0.3, 0.0);
    let cfg = WindingConfig::default();
    let a = winding::sweep_zeta(&base, &spec, &cfg, 1).unwrap();
    let b = winding::sweep_zeta(&base, &spec, &cfg, 3).unwrap();
    assert_eq!(a, b);
}
