//! Rotation of the intersection sphere to a canonical frame followed by
//! stereographic projection from its south pole.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::manifolds::{CurveSet, SPHERE_CENTER, SPHERE_RADIUS};
use crate::model::State;

/// First frame direction before normalisation.
pub const FRAME_U: [f64; 3] = [0.5706, 0.1854, 0.0];
/// Radial tolerance for points accepted as lying on the sphere.
pub const SPHERE_TOL: f64 = 1e-8;
/// Smallest admitted `z' + R`.
pub const POLE_GUARD: f64 = 1e-9;
/// Curves are split where they pass this close to the pole.
pub const POLE_SPLIT: f64 = 1e-6;

/// Rows `û, v̂, ŵ` of the rotation, orthonormalised by Gram–Schmidt with
/// `û` kept fixed.
pub fn canonical_frame() -> Matrix3<f64> {
    let u = Vector3::from(FRAME_U);
    let v = Vector3::new(1.0, -(u.x + u.z) / u.y, 1.0);
    let w = u.cross(&v);
    let e1 = u.normalize();
    let v = v - e1 * e1.dot(&v);
    let e2 = v.normalize();
    let w = w - e1 * e1.dot(&w) - e2 * e2.dot(&w);
    let e3 = w.normalize();
    Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
}

/// `π(x − c)` for a point of the default sphere.
pub fn rotate_to_canonical(x: &State) -> Result<Vector3<f64>> {
    let d = x - State::from(SPHERE_CENTER);
    let residual = d.norm() - SPHERE_RADIUS;
    if residual.abs() > SPHERE_TOL {
        return Err(Error::NotOnSphere(residual));
    }
    Ok(canonical_frame() * d)
}

/// `(R x' / (R + z'), R y' / (R + z'))`.
pub fn stereo_project(xp: &Vector3<f64>) -> Result<Vector2<f64>> {
    let r = SPHERE_RADIUS;
    let den = r + xp.z;
    if den <= POLE_GUARD {
        return Err(Error::AtPole);
    }
    Ok(Vector2::new(r * xp.x / den, r * xp.y / den))
}

/// Inverse of [`stereo_project`] followed by the inverse rotation, returning
/// a point of the default sphere.
pub fn unproject(pt: &Vector2<f64>) -> State {
    let r = SPHERE_RADIUS;
    let rho2 = pt.norm_squared();
    // z' from rho = R sqrt(R² − z'²) / (R + z')
    let zp = r * (r * r - rho2) / (r * r + rho2);
    let scale = (r + zp) / r;
    let xp = Vector3::new(pt.x * scale, pt.y * scale, zp);
    State::from(SPHERE_CENTER) + canonical_frame().transpose() * xp
}

/// Point on the default sphere that projects from the pole.
pub fn pole() -> State {
    State::from(SPHERE_CENTER) + canonical_frame().transpose() * Vector3::new(0.0, 0.0, -SPHERE_RADIUS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCurve {
    pub points: Vec<Vector2<f64>>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSet {
    /// Owner label of the source curve set.
    pub source: String,
    pub curves: Vec<ProjectedCurve>,
    /// Number of places where a curve was split at the pole.
    pub pole_splits: usize,
}

impl ProjectedSet {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Writes `curve_id,seq,px,py`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        use crate::io::num;
        writeln!(out, "curve_id,seq,px,py")?;
        for (id, c) in self.curves.iter().enumerate() {
            for (k, p) in c.points.iter().enumerate() {
                writeln!(out, "{id},{k},{},{}", num(p.x), num(p.y))?;
            }
        }
        Ok(())
    }
}

/// Projects every curve of a sphere curve set; curves passing within
/// `POLE_SPLIT` of the pole are split there.
pub fn project_set(cs: &CurveSet) -> Result<ProjectedSet> {
    let south = Vector3::new(0.0, 0.0, -SPHERE_RADIUS);
    let mut curves = Vec::new();
    let mut pole_splits = 0;
    for c in &cs.curves {
        let mut runs: Vec<Vec<Vector2<f64>>> = vec![Vec::new()];
        let mut split = false;
        for x in &c.points {
            let xp = rotate_to_canonical(x)?;
            if (xp - south).norm() < POLE_SPLIT {
                split = true;
                pole_splits += 1;
                if !runs.last().unwrap().is_empty() {
                    runs.push(Vec::new());
                }
                continue;
            }
            runs.last_mut().unwrap().push(stereo_project(&xp)?);
        }
        let closed = c.closed && !split;
        curves.extend(
            runs.into_iter()
                .filter(|r| !r.is_empty())
                .map(|points| ProjectedCurve { points, closed }),
        );
    }
    Ok(ProjectedSet {
        source: cs.owner.clone(),
        curves,
        pole_splits,
    })
}
