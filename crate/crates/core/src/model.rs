//! The three-dimensional polynomial vector field, its Jacobian, equilibria and
//! the eigen-structure of the origin.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CubicRoots};

/// Phase-space point `(x, y, z)`.
pub type State = Vector3<f64>;

/// The nine model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub mu_tilde: f64,
    pub delta: f64,
}

impl Params {
    /// Reference configuration for the case-C inclination flip with the two
    /// unfolding parameters `(alpha, mu)` free.
    pub fn reference(alpha: f64, mu: f64) -> Self {
        Self {
            a: 0.7,
            b: 1.0,
            c: -2.0,
            alpha,
            beta: 1.0,
            gamma: 2.0,
            mu,
            mu_tilde: 0.0,
            delta: 0.0,
        }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.a,
            self.b,
            self.c,
            self.alpha,
            self.beta,
            self.gamma,
            self.mu,
            self.mu_tilde,
            self.delta,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Evaluates the vector field at `s`.
#[inline]
pub fn eval_field(p: &Params, s: &State) -> Vector3<f64> {
    let (x, y, z) = (s.x, s.y, s.z);
    let m = p.mu_tilde - p.alpha * z;
    Vector3::new(
        p.a * x + p.b * y - p.a * x * x + m * x * (2.0 - 3.0 * x) + p.delta * z,
        p.b * x + p.a * y - 1.5 * p.b * x * x - 1.5 * p.a * x * y - 2.0 * y * m - p.delta * z,
        p.c * z + p.mu * x + p.gamma * x * z + p.alpha * p.beta * (x * x * (1.0 - x) - y * y),
    )
}

/// Analytic Jacobian of the vector field at `s`.
#[inline]
pub fn eval_jacobian(p: &Params, s: &State) -> Matrix3<f64> {
    let (x, y, z) = (s.x, s.y, s.z);
    let m = p.mu_tilde - p.alpha * z;
    Matrix3::new(
        p.a - 2.0 * p.a * x + m * (2.0 - 6.0 * x),
        p.b,
        -p.alpha * x * (2.0 - 3.0 * x) + p.delta,
        p.b - 3.0 * p.b * x - 1.5 * p.a * y,
        p.a - 1.5 * p.a * x - 2.0 * m,
        2.0 * p.alpha * y - p.delta,
        p.mu + p.gamma * z + p.alpha * p.beta * (2.0 * x - 3.0 * x * x),
        -2.0 * p.alpha * p.beta * y,
        p.c + p.gamma * x,
    )
}

/// Trace of the Jacobian (divergence of the field).
#[inline]
pub fn divergence(p: &Params, s: &State) -> f64 {
    eval_jacobian(p, s).trace()
}

/// Real eigen-structure of a saddle with one unstable and two stable directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub lambda_ss: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub e_ss: Vector3<f64>,
    pub e_s: Vector3<f64>,
    pub e_u: Vector3<f64>,
}

impl EigenData {
    /// Matrix with columns `(e_u, e_s, e_ss)`.
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.e_u, self.e_s, self.e_ss])
    }

    /// Coordinates `(u, s, ss)` of `v` in the eigenbasis.
    pub fn coordinates(&self, v: &Vector3<f64>) -> Option<Vector3<f64>> {
        self.basis().try_inverse().map(|inv| inv * v)
    }
}

/// Eigenvalues with a complex pair, as found at foci.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusEigen {
    pub real: f64,
    pub real_vector: Vector3<f64>,
    pub pair: Complex64,
    pub pair_vector: [Complex64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumEigen {
    Real {
        values: [f64; 3],
        vectors: [Vector3<f64>; 3],
    },
    Focus(FocusEigen),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Saddle,
    SaddleFocus,
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub location: State,
    pub eigen: EquilibriumEigen,
    pub stability: Stability,
}

/// Full eigen-decomposition of a 3×3 Jacobian.
pub fn classify_jacobian(j: &Matrix3<f64>) -> (EquilibriumEigen, Stability) {
    match linalg::eigenvalues3(j) {
        CubicRoots::Real(values) => {
            let vectors = values.map(|l| linalg::real_eigenvector3(j, l));
            let n_pos = values.iter().filter(|&&l| l > 0.0).count();
            let stability = match n_pos {
                0 => Stability::StableNode,
                3 => Stability::UnstableNode,
                _ => Stability::Saddle,
            };
            (EquilibriumEigen::Real { values, vectors }, stability)
        }
        CubicRoots::Complex { real, re, im } => {
            let pair = Complex64::new(re, im);
            let focus = FocusEigen {
                real,
                real_vector: linalg::real_eigenvector3(j, real),
                pair,
                pair_vector: linalg::complex_eigenvector3(j, pair),
            };
            let stability = if re < 0.0 && real < 0.0 {
                Stability::StableFocus
            } else if re > 0.0 && real > 0.0 {
                Stability::UnstableFocus
            } else {
                Stability::SaddleFocus
            };
            (EquilibriumEigen::Focus(focus), stability)
        }
    }
}

/// Eigen-structure of the origin, which is an equilibrium for all parameters.
pub fn origin_eigens(p: &Params) -> Result<EigenData> {
    let j = eval_jacobian(p, &State::zeros());
    let values = if p.delta == 0.0 {
        let r = (p.b * p.b + 4.0 * p.mu_tilde * p.mu_tilde).sqrt();
        let mut v = [p.a - r, p.a + r, p.c];
        v.sort_by(|x, y| x.total_cmp(y));
        v
    } else {
        match linalg::eigenvalues3(&j) {
            CubicRoots::Real(v) => v,
            CubicRoots::Complex { real, re, .. } => return Err(Error::NotASaddle([real, re, re])),
        }
    };
    let [lambda_ss, lambda_s, lambda_u] = values;
    if !(lambda_ss < lambda_s && lambda_s < 0.0 && 0.0 < lambda_u) {
        return Err(Error::NotASaddle(values));
    }
    let mut e_u = linalg::real_eigenvector3(&j, lambda_u);
    let mut e_s = linalg::real_eigenvector3(&j, lambda_s);
    let mut e_ss = linalg::real_eigenvector3(&j, lambda_ss);
    // Sign conventions: e_u points into x > 0, e_s has positive x, e_ss has z ≥ 0.
    if e_u.x < 0.0 {
        e_u = -e_u;
    }
    if e_s.x < 0.0 {
        e_s = -e_s;
    }
    if e_ss.z < 0.0 || (e_ss.z == 0.0 && e_ss.x < 0.0) {
        e_ss = -e_ss;
    }
    Ok(EigenData {
        lambda_ss,
        lambda_s,
        lambda_u,
        e_ss,
        e_s,
        e_u,
    })
}

/// The origin as an [`Equilibrium`] with its full eigen-decomposition.
pub fn origin_equilibrium(p: &Params) -> Equilibrium {
    let (eigen, stability) = classify_jacobian(&eval_jacobian(p, &State::zeros()));
    Equilibrium {
        location: State::zeros(),
        eigen,
        stability,
    }
}

/// Which equilibrium `find_equilibrium` should accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Any,
    /// Reject the origin (`‖location‖ ≤ 1e-6`).
    Secondary,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_RESIDUAL: f64 = 1e-12;
const NEWTON_STEP: f64 = 1e-13;
const ORIGIN_GUARD: f64 = 1e-6;

/// Newton iteration for an equilibrium starting at `guess`.
pub fn find_equilibrium(p: &Params, guess: &State, target: Target) -> Result<Equilibrium> {
    let mut s = *guess;
    let mut residual = eval_field(p, &s).norm();
    let mut converged = residual <= NEWTON_RESIDUAL;
    for _ in 0..NEWTON_MAX_ITER {
        if converged {
            break;
        }
        let f = eval_field(p, &s);
        let j = eval_jacobian(p, &s);
        let Some(step) = j.lu().solve(&f) else {
            return Err(Error::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                residual,
            });
        };
        s -= step;
        residual = eval_field(p, &s).norm();
        if !s.iter().all(|v| v.is_finite()) {
            break;
        }
        converged = residual <= NEWTON_RESIDUAL || step.norm() <= NEWTON_STEP;
    }
    if !converged || !residual.is_finite() {
        return Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    // a final polishing step keeps the residual at the floor
    if let Some(step) = eval_jacobian(p, &s).lu().solve(&eval_field(p, &s)) {
        let t = s - step;
        if eval_field(p, &t).norm() <= residual {
            s = t;
        }
    }
    if target == Target::Secondary && s.norm() <= ORIGIN_GUARD {
        return Err(Error::ConvergedToOrigin);
    }
    let (eigen, stability) = classify_jacobian(&eval_jacobian(p, &s));
    Ok(Equilibrium {
        location: s,
        eigen,
        stability,
    })
}

/// Default Newton seed for the secondary equilibrium q.
pub const Q_GUESS: [f64; 3] = [0.7, 0.2, 0.1];

/// Locates the secondary equilibrium q: Newton from the default seed, then a
/// multistart over `[0, 1.5]³` on failure.
pub fn find_q(p: &Params) -> Result<Equilibrium> {
    if let Ok(eq) = find_equilibrium(p, &State::from(Q_GUESS), Target::Secondary) {
        return Ok(eq);
    }
    let mut best: Option<Equilibrium> = None;
    let n = 6;
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let g = State::new(
                    1.5 * i as f64 / n as f64,
                    1.5 * j as f64 / n as f64 - 0.75,
                    1.5 * k as f64 / n as f64 - 0.75,
                );
                if let Ok(eq) = find_equilibrium(p, &g, Target::Secondary) {
                    let d = (eq.location - State::from(Q_GUESS)).norm();
                    if best
                        .as_ref()
                        .map_or(true, |b| d < (b.location - State::from(Q_GUESS)).norm())
                    {
                        best = Some(eq);
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::QNotFound("no secondary equilibrium in the multistart box".into()))
}

/// Eigenvalue-condition report for the homoclinic flip at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseReport {
    pub eigen: EigenData,
    /// Non-resonance fails: `|λ^s| = λ^u` within `RESONANCE_TOL`.
    pub resonant: bool,
    /// `|λ^ss| < λ^u`.
    pub strong_clause: bool,
    /// `2|λ^s| < λ^u`.
    pub weak_clause: bool,
    /// Case-C eigenvalue condition: either clause holds.
    pub case_c: bool,
    /// `|λ^s| < |λ^ss| / 2`.
    pub ratio_test: bool,
}

pub const RESONANCE_TOL: f64 = 1e-9;

pub fn classify_case(p: &Params) -> Result<CaseReport> {
    let eigen = origin_eigens(p)?;
    Ok(case_from_eigenvalues(eigen))
}

pub fn case_from_eigenvalues(eigen: EigenData) -> CaseReport {
    let (ss, s, u) = (eigen.lambda_ss.abs(), eigen.lambda_s.abs(), eigen.lambda_u);
    let strong_clause = ss < u;
    let weak_clause = 2.0 * s < u;
    CaseReport {
        eigen,
        resonant: (s - u).abs() <= RESONANCE_TOL,
        strong_clause,
        weak_clause,
        case_c: strong_clause || weak_clause,
        ratio_test: s < ss / 2.0,
    }
}

/// Real part of the complex eigenvalue pair at q, if q is a focus.
pub fn q_pair_real_part(p: &Params, guess: &State) -> Result<(f64, State)> {
    let eq = find_equilibrium(p, guess, Target::Secondary)?;
    match eq.eigen {
        EquilibriumEigen::Focus(f) => Ok((f.pair.re, eq.location)),
        EquilibriumEigen::Real { .. } => Err(Error::EigenstructureMissing(
            "q has no complex eigenvalue pair".into(),
        )),
    }
}

/// Locates the Hopf bifurcation of q in `mu` at fixed `alpha` by bisection on
/// the real part of q's complex eigenvalue pair.
pub fn detect_hopf_at_q(base: &Params, mu_range: (f64, f64), alpha: f64) -> Result<f64> {
    let p = base.with_alpha(alpha);
    let (mut lo, mut hi) = mu_range;
    let (mut g_lo, mut s_lo) = q_pair_real_part(&p.with_mu(lo), &State::from(Q_GUESS))?;
    let (g_hi, _) = q_pair_real_part(&p.with_mu(hi), &s_lo)?;
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while (hi - lo).abs() > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let (g, s) = q_pair_real_part(&p.with_mu(mid), &s_lo)?;
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
            s_lo = s;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn origin_is_equilibrium() {
        let p = Params::reference(0.5, 0.003);
        assert_eq!(eval_field(&p, &State::zeros()), Vector3::zeros());
    }

    #[test]
    fn z_axis_is_invariant() {
        let p = Params::reference(0.5, -0.002);
        let f = eval_field(&p, &State::new(0.0, 0.0, 0.7));
        assert_eq!(f.x, 0.0);
        assert_eq!(f.y, 0.0);
        assert_relative_eq!(f.z, -1.4);
    }

    #[test]
    fn field_at_reference_point() {
        // term-by-term evaluation at (0.1, 0.1, 0.1), alpha = 0.5, mu = 0
        let p = Params::reference(0.5, 0.0);
        let f = eval_field(&p, &State::new(0.1, 0.1, 0.1));
        // exact rationals 309/2000, 309/2000, -361/2000
        assert_relative_eq!(f.x, 309.0 / 2000.0, epsilon = 1e-15);
        assert_relative_eq!(f.y, 309.0 / 2000.0, epsilon = 1e-15);
        assert_relative_eq!(f.z, -361.0 / 2000.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_at_origin_block_form() {
        let p = Params::reference(0.37, 0.0);
        let j = eval_jacobian(&p, &State::zeros());
        assert_eq!(j, Matrix3::new(0.7, 1.0, 0.0, 1.0, 0.7, 0.0, 0.0, 0.0, -2.0));
    }

    #[test]
    fn reference_eigenvalues() {
        let e = origin_eigens(&Params::reference(0.5, 0.0)).unwrap();
        assert_relative_eq!(e.lambda_u, 1.7, epsilon = 1e-12);
        assert_relative_eq!(e.lambda_s, -0.3, epsilon = 1e-12);
        assert_relative_eq!(e.lambda_ss, -2.0, epsilon = 1e-12);
        assert_relative_eq!(e.e_ss, Vector3::z(), epsilon = 1e-14);
    }

    #[test]
    fn resonant_configuration_is_flagged() {
        let p = Params {
            a: 0.0,
            ..Params::reference(0.5, 0.0)
        };
        let r = classify_case(&p).unwrap();
        assert_relative_eq!(r.eigen.lambda_u, 1.0);
        assert_relative_eq!(r.eigen.lambda_s, -1.0);
        assert_relative_eq!(r.eigen.lambda_ss, -2.0);
        assert!(r.resonant);
    }

    #[test]
    fn case_c_holds_via_weak_clause() {
        let r = classify_case(&Params::reference(0.5, 0.0)).unwrap();
        assert!(!r.strong_clause);
        assert!(r.weak_clause);
        assert!(r.case_c);
        assert!(!r.resonant);
    }

    #[test]
    fn not_a_saddle() {
        let p = Params {
            a: 1.5,
            ..Params::reference(0.5, 0.0)
        };
        assert!(matches!(origin_eigens(&p), Err(Error::NotASaddle(_))));
    }

    #[test]
    fn origin_from_origin_guess() {
        let eq = find_equilibrium(&Params::reference(0.5, 0.001), &State::zeros(), Target::Any).unwrap();
        assert_eq!(eq.location, State::zeros());
        assert_eq!(eq.stability, Stability::Saddle);
        assert!(matches!(
            find_equilibrium(&Params::reference(0.5, 0.001), &State::new(1e-9, 0.0, 0.0), Target::Secondary),
            Err(Error::ConvergedToOrigin)
        ));
    }
}
