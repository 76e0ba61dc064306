use approx::assert_relative_eq;
use flipscope::model::{self, Params, Stability, State, Target};
use flipscope::Error;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn any_params() -> impl Strategy<Value = Params> {
    (
        prop::array::uniform9(-3.0..3.0f64),
    )
        .prop_map(|(v,)| Params {
            a: v[0],
            b: v[1],
            c: v[2],
            alpha: v[3],
            beta: v[4],
            gamma: v[5],
            mu: v[6],
            mu_tilde: v[7],
            delta: v[8],
        })
}

fn any_state() -> impl Strategy<Value = State> {
    prop::array::uniform3(-2.0..2.0f64).prop_map(State::from)
}

fn central_jacobian(p: &Params, s: &State) -> Matrix3<f64> {
    let h = 1e-6;
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut e = State::zeros();
        e[k] = h;
        j.set_column(k, &((model::eval_field(p, &(s + e)) - model::eval_field(p, &(s - e))) / (2.0 * h)));
    }
    j
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn origin_is_an_equilibrium_for_all_parameters(p in any_params()) {
        prop_assert_eq!(model::eval_field(&p, &State::zeros()), Vector3::zeros());
    }
}

proptest! {
    #[test]
    fn z_axis_is_invariant_without_delta(z in -10.0..10.0f64, alpha in 0.0..1.0f64, mu in -0.01..0.01f64) {
        let f = model::eval_field(&Params::reference(alpha, mu), &State::new(0.0, 0.0, z));
        prop_assert_eq!(f.x, 0.0);
        prop_assert_eq!(f.y, 0.0);
    }

    #[test]
    fn jacobian_matches_central_differences(p in any_params(), s in any_state()) {
        let j = model::eval_jacobian(&p, &s);
        let fd = central_jacobian(&p, &s);
        let scale = 1.0 + j.abs().max();
        prop_assert!((j - fd).abs().max() <= 1e-6 * scale);
    }

    #[test]
    fn origin_eigenpairs_have_small_residual(alpha in 0.1..0.8f64, mu in -0.01..0.01f64) {
        let p = Params::reference(alpha, mu);
        let e = model::origin_eigens(&p).unwrap();
        let j = model::eval_jacobian(&p, &State::zeros());
        for (l, v) in [(e.lambda_u, e.e_u), (e.lambda_s, e.e_s), (e.lambda_ss, e.e_ss)] {
            prop_assert!((j * v - l * v).norm() <= 1e-10 * v.norm());
        }
    }
}

#[test]
fn field_term_by_term_at_tenth() {
    // x = y = z = 0.1, α = 0.5, μ = μ̃ = δ = 0: μ̃ − αz = −0.05
    let s = State::new(0.1, 0.1, 0.1);
    let f = model::eval_field(&Params::reference(0.5, 0.0), &s);
    let m = -0.05;
    let fx = 0.7 * 0.1 + 0.1 - 0.7 * 0.01 + m * 0.1 * (2.0 - 0.3);
    let fy = 0.1 + 0.7 * 0.1 - 1.5 * 0.01 - 1.5 * 0.7 * 0.01 - 2.0 * 0.1 * m;
    let fz = -2.0 * 0.1 + 2.0 * 0.01 + 0.5 * (0.01 * 0.9 - 0.01);
    assert_relative_eq!(f, Vector3::new(fx, fy, fz), epsilon = 1e-15);
    assert_relative_eq!(f, Vector3::new(0.1545, 0.1545, -0.1805), epsilon = 1e-15);
}

#[test]
fn jacobian_at_a_generic_state_matches_differences() {
    let p = Params::reference(0.5, 0.0);
    let s = State::new(0.2, -0.1, 0.3);
    let j = model::eval_jacobian(&p, &s);
    assert_relative_eq!(j, central_jacobian(&p, &s), epsilon = 1e-8, max_relative = 1e-6);
}

#[test]
fn jacobian_eigenvalues_at_origin() {
    let j = model::eval_jacobian(&Params::reference(0.5, 0.0), &State::zeros());
    let mut ev: Vec<f64> = j.eigenvalues().unwrap().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    assert_relative_eq!(ev[0], -2.0, epsilon = 1e-12);
    assert_relative_eq!(ev[1], -0.3, epsilon = 1e-12);
    assert_relative_eq!(ev[2], 1.7, epsilon = 1e-12);
}

/// Coarse scan of ‖f‖ over [0, 1.5]³ away from the origin followed by
/// Newton with a difference Jacobian.
fn brute_force_q(p: &Params) -> State {
    let n = 60;
    let mut best = (f64::INFINITY, State::zeros());
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let s = State::new(i as f64, j as f64, k as f64) * (1.5 / n as f64);
                if s.norm() < 0.2 {
                    continue;
                }
                let r = model::eval_field(p, &s).norm();
                if r < best.0 {
                    best = (r, s);
                }
            }
        }
    }
    let mut s = best.1;
    for _ in 0..30 {
        let step = central_jacobian(p, &s).lu().solve(&model::eval_field(p, &s)).unwrap();
        s -= step;
    }
    s
}

#[test]
fn q_agrees_with_brute_force_root() {
    let p = Params::reference(0.5, 0.001);
    let oracle = brute_force_q(&p);
    let q = model::find_q(&p).unwrap();
    assert!(model::eval_field(&p, &q.location).norm() <= 1e-12);
    assert_relative_eq!(q.location, oracle, epsilon = 1e-10);
    assert_eq!(q.stability, Stability::StableFocus);
}

#[test]
fn q_past_hopf_has_unstable_pair() {
    let p = Params::reference(0.5, 0.012);
    let (re, _) = model::q_pair_real_part(&p, &State::from(model::Q_GUESS)).unwrap();
    assert!(re > 0.0);
    assert_eq!(model::find_q(&p).unwrap().stability, Stability::SaddleFocus);
}

#[test]
fn origin_guess_gives_origin() {
    let p = Params::reference(0.5, 0.0);
    let eq = model::find_equilibrium(&p, &State::zeros(), Target::Any).unwrap();
    assert_eq!(eq.location, State::zeros());
    assert_eq!(eq.stability, Stability::Saddle);
    assert!(matches!(
        model::find_equilibrium(&p, &State::new(1e-9, 0.0, 0.0), Target::Secondary),
        Err(Error::ConvergedToOrigin)
    ));
}

#[test]
fn case_c_classification() {
    let r = model::classify_case(&Params::reference(0.5, 0.0)).unwrap();
    assert!(r.weak_clause && r.case_c && !r.strong_clause && !r.resonant);
    let resonant = Params {
        a: 0.0,
        ..Params::reference(0.5, 0.0)
    };
    let r = model::classify_case(&resonant).unwrap();
    assert!(r.resonant);
    assert_relative_eq!(r.eigen.lambda_u, 1.0);
}

#[test]
fn hopf_of_q() {
    let base = Params::reference(0.5, 0.0);
    // oracle: sign change of the pair's real part on a μ grid
    let re = |mu: f64| model::q_pair_real_part(&base.with_mu(mu), &State::from(model::Q_GUESS)).unwrap().0;
    let grid: Vec<f64> = (0..=40).map(|k| 0.00025 * k as f64).collect();
    let k = grid.windows(2).position(|w| re(w[0]) < 0.0 && re(w[1]) > 0.0).unwrap();
    let mu = model::detect_hopf_at_q(&base, (0.0, 0.01), 0.5).unwrap();
    assert!(grid[k] <= mu && mu <= grid[k + 1]);
    assert!(re(mu).abs() <= 1e-6);
    let narrow = model::detect_hopf_at_q(&base, (mu - 5e-4, mu + 5e-4), 0.5).unwrap();
    assert!((narrow - mu).abs() <= 1e-8);
    assert!(matches!(
        model::detect_hopf_at_q(&base, (-0.01, -0.005), 0.5),
        Err(Error::NoSignChange { .. })
    ));
}
