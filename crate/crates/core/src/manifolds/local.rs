//! Local stable manifold of the origin as a polynomial graph over the stable
//! eigenplane, `u = h(s, ss)` in eigen-coordinates `(u, s, ss)`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{origin_eigens, EigenData, Params, State};

/// Default truncation order of the graph.
pub const GRAPH_ORDER: usize = 14;

/// Bivariate polynomial truncated at total degree `n`; `c[i][j]` multiplies
/// `s^i ss^j`.
#[derive(Debug, Clone, PartialEq)]
struct Poly {
    n: usize,
    c: Vec<Vec<f64>>,
}

impl Poly {
    fn zero(n: usize) -> Self {
        Self {
            n,
            c: vec![vec![0.0; n + 1]; n + 1],
        }
    }

    fn constant(n: usize, v: f64) -> Self {
        let mut p = Self::zero(n);
        p.c[0][0] = v;
        p
    }

    fn monomial(n: usize, i: usize, j: usize) -> Self {
        let mut p = Self::zero(n);
        p.c[i][j] = 1.0;
        p
    }

    fn terms(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.n).flat_map(move |i| (0..=self.n - i).map(move |j| (i, j)))
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (i, j) in self.terms() {
            r.c[i][j] += o.c[i][j];
        }
        r
    }

    fn scale(&self, k: f64) -> Poly {
        let mut r = self.clone();
        for (i, j) in self.terms() {
            r.c[i][j] *= k;
        }
        r
    }

    fn axpy(&self, k: f64, o: &Poly) -> Poly {
        self.add(&o.scale(k))
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero(self.n);
        for (i, j) in self.terms() {
            let a = self.c[i][j];
            if a == 0.0 {
                continue;
            }
            for k in 0..=self.n - i - j {
                for l in 0..=self.n - i - j - k {
                    r.c[i + k][j + l] += a * o.c[k][l];
                }
            }
        }
        r
    }

    fn d_s(&self) -> Poly {
        let mut r = Poly::zero(self.n);
        for (i, j) in self.terms() {
            if i > 0 {
                r.c[i - 1][j] = i as f64 * self.c[i][j];
            }
        }
        r
    }

    fn d_ss(&self) -> Poly {
        let mut r = Poly::zero(self.n);
        for (i, j) in self.terms() {
            if j > 0 {
                r.c[i][j - 1] = j as f64 * self.c[i][j];
            }
        }
        r
    }

    fn eval(&self, s: f64, ss: f64) -> f64 {
        // Horner in ss for each power of s
        let mut acc = 0.0;
        for i in (0..=self.n).rev() {
            let mut row = 0.0;
            for j in (0..=self.n - i).rev() {
                row = row * ss + self.c[i][j];
            }
            acc = acc * s + row;
        }
        acc
    }
}

/// Vector field evaluated on polynomial coordinates.
fn field_poly(p: &Params, x: &Poly, y: &Poly, z: &Poly) -> [Poly; 3] {
    let n = x.n;
    let one = Poly::constant(n, 1.0);
    let xx = x.mul(x);
    let m = Poly::constant(n, p.mu_tilde).axpy(-p.alpha, z);
    let two_m3x = Poly::constant(n, 2.0).axpy(-3.0, x);
    let f1 = x
        .scale(p.a)
        .axpy(p.b, y)
        .axpy(-p.a, &xx)
        .add(&m.mul(x).mul(&two_m3x))
        .axpy(p.delta, z);
    let f2 = x
        .scale(p.b)
        .axpy(p.a, y)
        .axpy(-1.5 * p.b, &xx)
        .axpy(-1.5 * p.a, &x.mul(y))
        .axpy(-2.0, &y.mul(&m))
        .axpy(-p.delta, z);
    let cubic = xx.mul(&one.axpy(-1.0, x)).axpy(-1.0, &y.mul(y));
    let f3 = z
        .scale(p.c)
        .axpy(p.mu, x)
        .axpy(p.gamma, &x.mul(z))
        .axpy(p.alpha * p.beta, &cubic);
    [f1, f2, f3]
}

/// Graph `u = h(s, ss)` of the local stable manifold of the origin, solved
/// order by order from the invariance equation.
#[derive(Debug, Clone, PartialEq)]
pub struct StableGraph {
    pub eigen: EigenData,
    pub order: usize,
    basis: Matrix3<f64>,
    inverse: Matrix3<f64>,
    h: Poly,
    h_s: Poly,
    h_ss: Poly,
}

impl StableGraph {
    pub fn new(p: &Params) -> Result<Self> {
        Self::with_order(p, GRAPH_ORDER)
    }

    pub fn with_order(p: &Params, order: usize) -> Result<Self> {
        let eigen = origin_eigens(p)?;
        let basis = eigen.basis();
        let inverse = basis
            .try_inverse()
            .ok_or_else(|| Error::EigenstructureMissing("singular eigenbasis at the origin".into()))?;
        let n = order.max(2);
        let s = Poly::monomial(n, 1, 0);
        let ss = Poly::monomial(n, 0, 1);
        let mut h = Poly::zero(n);
        for deg in 2..=n {
            let coords = [&h, &s, &ss];
            let lift = |row: usize| {
                (0..3).fold(Poly::zero(n), |acc, k| acc.axpy(basis[(row, k)], coords[k]))
            };
            let f = field_poly(p, &lift(0), &lift(1), &lift(2));
            let dxi: Vec<Poly> = (0..3)
                .map(|r| (0..3).fold(Poly::zero(n), |acc, k| acc.axpy(inverse[(r, k)], &f[k])))
                .collect();
            let e = h.d_s().mul(&dxi[1]).add(&h.d_ss().mul(&dxi[2])).axpy(-1.0, &dxi[0]);
            for i in 0..=deg {
                let j = deg - i;
                let denom = eigen.lambda_u - i as f64 * eigen.lambda_s - j as f64 * eigen.lambda_ss;
                h.c[i][j] = e.c[i][j] / denom;
            }
        }
        let (h_s, h_ss) = (h.d_s(), h.d_ss());
        Ok(Self {
            eigen,
            order: n,
            basis,
            inverse,
            h,
            h_s,
            h_ss,
        })
    }

    /// Eigen-coordinates `(u, s, ss)` of a state.
    pub fn coordinates(&self, x: &State) -> Vector3<f64> {
        self.inverse * x
    }

    pub fn height(&self, s: f64, ss: f64) -> f64 {
        self.h.eval(s, ss)
    }

    /// Point of the graph above `(s, ss)`.
    pub fn point(&self, s: f64, ss: f64) -> State {
        self.basis * Vector3::new(self.height(s, ss), s, ss)
    }

    /// Signed offset `u − h(s, ss)` of `x` from the graph along `e_u`.
    pub fn offset(&self, x: &State) -> f64 {
        let xi = self.coordinates(x);
        xi.x - self.height(xi.y, xi.z)
    }

    /// Tangent vectors `∂/∂s` and `∂/∂ss` of the graph at the foot of `x`.
    pub fn tangents(&self, x: &State) -> (Vector3<f64>, Vector3<f64>) {
        let xi = self.coordinates(x);
        let ts = self.basis * Vector3::new(self.h_s.eval(xi.y, xi.z), 1.0, 0.0);
        let tss = self.basis * Vector3::new(self.h_ss.eval(xi.y, xi.z), 0.0, 1.0);
        (ts, tss)
    }
}
