//! Small dense eigenproblems (2×2 and 3×3) solved in closed form.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

/// Roots of the characteristic polynomial of a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CubicRoots {
    /// Three real roots in ascending order.
    Real([f64; 3]),
    /// One real root and a complex pair `re ± i·im` with `im > 0`.
    Complex { real: f64, re: f64, im: f64 },
}

/// Eigenvalues of `m` via the characteristic cubic, classified by the sign of
/// its discriminant, with real roots polished by Newton steps on the cubic.
pub fn eigenvalues3(m: &Matrix3<f64>) -> CubicRoots {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    // lambda^3 + b lambda^2 + c lambda + d
    let (b, c, d) = (-tr, minors, -det);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let scale = 1.0 + tr.abs() + minors.abs().sqrt() + det.abs().cbrt();
    let polish = |mut x: f64| {
        for _ in 0..4 {
            let f = ((x + b) * x + c) * x + d;
            let df = (3.0 * x + 2.0 * b) * x + c;
            if df.abs() < 1e-300 {
                break;
            }
            let dx = f / df;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        x
    };
    if disc >= -1e-14 * scale.powi(6) {
        let mut roots = if p.abs() < 1e-300 {
            [shift; 3]
        } else {
            let r = 2.0 * (-p / 3.0).max(0.0).sqrt();
            let arg = if r == 0.0 {
                0.0
            } else {
                (3.0 * q / (p * r)).clamp(-1.0, 1.0)
            };
            let phi = arg.acos() / 3.0;
            let tau = std::f64::consts::TAU / 3.0;
            [
                shift + r * phi.cos(),
                shift + r * (phi - tau).cos(),
                shift + r * (phi - 2.0 * tau).cos(),
            ]
        };
        for root in roots.iter_mut() {
            *root = polish(*root);
        }
        roots.sort_by(|x, y| x.total_cmp(y));
        CubicRoots::Real(roots)
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let real = polish(shift + u + v);
        // deflate: lambda^2 + (b + real) lambda + (c + real (b + real))
        let b2 = b + real;
        let c2 = c + real * b2;
        let re = -b2 / 2.0;
        let im = (c2 - re * re).max(0.0).sqrt();
        CubicRoots::Complex { real, re, im }
    }
}

/// Null vector of the (nearly singular) real matrix `a = m - lambda I`, unit norm.
///
/// Takes the largest cross product of two rows; falls back to the column
/// direction when the matrix has rank ≤ 1.
pub fn null_vector3(a: &Matrix3<f64>) -> Vector3<f64> {
    let rows: [Vector3<f64>; 3] = [
        a.row(0).transpose(),
        a.row(1).transpose(),
        a.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()
        .unwrap_or_else(Vector3::zeros);
    if best.norm() > 1e-150 {
        best.normalize()
    } else {
        // rank ≤ 1: any vector orthogonal to the dominant row
        let r = rows
            .iter()
            .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
            .copied()
            .unwrap();
        let trial = if r.x.abs() < 0.9 * r.norm() {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let w = trial - r * (r.dot(&trial) / r.norm_squared().max(1e-300));
        w.normalize()
    }
}

/// Unit eigenvector of `m` for the real eigenvalue `lambda`, refined by
/// inverse iteration.
pub fn real_eigenvector3(m: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let identity = Matrix3::identity();
    let mut v = null_vector3(&(m - identity * lambda));
    let scale = m.abs().max().max(1.0);
    let shifted = m - identity * (lambda + 1e-13 * scale);
    if let Some(inv) = shifted.try_inverse() {
        for _ in 0..3 {
            let w = inv * v;
            let n = w.norm();
            if !n.is_finite() || n == 0.0 {
                break;
            }
            let w = w / n;
            // keep the sign stable
            v = if w.dot(&v) < 0.0 { -w } else { w };
        }
    }
    v
}

/// Complex eigenvector of a real 3×3 matrix for eigenvalue `lambda`.
pub fn complex_eigenvector3(m: &Matrix3<f64>, lambda: Complex64) -> [Complex64; 3] {
    let a = |i: usize, j: usize| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        Complex64::new(m[(i, j)], 0.0) - d
    };
    let row = |i: usize| [a(i, 0), a(i, 1), a(i, 2)];
    let cross = |r: [Complex64; 3], s: [Complex64; 3]| {
        [
            r[1] * s[2] - r[2] * s[1],
            r[2] * s[0] - r[0] * s[2],
            r[0] * s[1] - r[1] * s[0],
        ]
    };
    let norm = |v: &[Complex64; 3]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let candidates = [
        cross(row(0), row(1)),
        cross(row(0), row(2)),
        cross(row(1), row(2)),
    ];
    let best = candidates
        .into_iter()
        .max_by(|x, y| norm(x).total_cmp(&norm(y)))
        .unwrap();
    let n = norm(&best);
    [best[0] / n, best[1] / n, best[2] / n]
}

/// Eigenvalues of a real 2×2 matrix as complex numbers, ordered by modulus.
pub fn eigenvalues2(m: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr / 4.0 - det;
    let mut out = if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation
        let big = tr / 2.0 + s.copysign(tr);
        let small = if big != 0.0 { det / big } else { tr / 2.0 - s };
        [Complex64::new(small, 0.0), Complex64::new(big, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [
            Complex64::new(tr / 2.0, -s),
            Complex64::new(tr / 2.0, s),
        ]
    };
    if out[0].norm() > out[1].norm() {
        out.swap(0, 1);
    }
    out
}

/// Discriminant `tr²/4 − det` of a 2×2 matrix; negative means a complex pair.
pub fn discriminant2(m: &Matrix2<f64>) -> f64 {
    let tr = m.trace();
    tr * tr / 4.0 - m.determinant()
}

/// Unit eigenvector of a real 2×2 matrix for a real eigenvalue.
pub fn eigenvector2(m: &Matrix2<f64>, lambda: f64) -> nalgebra::Vector2<f64> {
    let a = m - Matrix2::identity() * lambda;
    let r0 = nalgebra::Vector2::new(-a[(0, 1)], a[(0, 0)]);
    let r1 = nalgebra::Vector2::new(-a[(1, 1)], a[(1, 0)]);
    let v = if r0.norm_squared() >= r1.norm_squared() {
        r0
    } else {
        r1
    };
    if v.norm() == 0.0 {
        nalgebra::Vector2::x()
    } else {
        v.normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_cubic() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.7, -0.3, -2.0));
        match eigenvalues3(&m) {
            CubicRoots::Real(r) => {
                assert_relative_eq!(r[0], -2.0, epsilon = 1e-14);
                assert_relative_eq!(r[1], -0.3, epsilon = 1e-14);
                assert_relative_eq!(r[2], 1.7, epsilon = 1e-14);
            }
            other => panic!("expected real roots, got {other:?}"),
        }
    }

    #[test]
    fn rotation_block_is_complex() {
        let m = Matrix3::new(-0.1, -1.0, 0.0, 1.0, -0.1, 0.0, 0.0, 0.0, -3.0);
        match eigenvalues3(&m) {
            CubicRoots::Complex { real, re, im } => {
                assert_relative_eq!(real, -3.0, epsilon = 1e-12);
                assert_relative_eq!(re, -0.1, epsilon = 1e-12);
                assert_relative_eq!(im, 1.0, epsilon = 1e-12);
            }
            other => panic!("expected complex pair, got {other:?}"),
        }
        let v = complex_eigenvector3(&m, Complex64::new(-0.1, 1.0));
        for i in 0..3 {
            let mut r = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                r += m[(i, j)] * v[j];
            }
            assert!((r - Complex64::new(-0.1, 1.0) * v[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_residual() {
        let m = Matrix3::new(0.7, 1.0, 0.0, 1.0, 0.7, 0.0, 0.01, 0.0, -2.0);
        if let CubicRoots::Real(r) = eigenvalues3(&m) {
            for l in r {
                let v = real_eigenvector3(&m, l);
                assert!((m * v - v * l).norm() < 1e-12);
            }
        } else {
            panic!("real spectrum expected");
        }
    }

    #[test]
    fn two_by_two_ordering() {
        let m = Matrix2::new(-3.0, 0.0, 0.0, 0.2);
        let e = eigenvalues2(&m);
        assert_relative_eq!(e[0].re, 0.2);
        assert_relative_eq!(e[1].re, -3.0);
        assert!(discriminant2(&m) > 0.0);
    }
}
