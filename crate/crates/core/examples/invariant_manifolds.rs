//! Manifolds of the origin and of the saddle orbits, their seed topology,
//! and their intersection curves with the sphere of radius 0.6 about
//! (0.5, 0, 0).

use flipscope::connections::{OrbitRole, SliceContext};
use flipscope::manifolds::{self, EquilibriumManifold, OrbitManifold};
use flipscope::model;

fn main() -> flipscope::Result<()> {
    let mu = -0.0071;
    let ctx = SliceContext::reference(0.5)?;
    let p = ctx.params(mu);
    let origin = model::origin_equilibrium(&p);

    let ws0 = manifolds::grow_equilibrium_manifold(
        &p,
        &origin,
        EquilibriumManifold::Stable2d,
        manifolds::CAP_EQUILIBRIUM,
        200,
    )?;
    let wu0 = manifolds::grow_equilibrium_manifold(&p, &origin, EquilibriumManifold::Unstable1d, 30.0, 2)?;
    let mut patches = vec![ws0, wu0];
    for role in [OrbitRole::GammaO, OrbitRole::GammaT] {
        let o = ctx.orbit(role, mu)?;
        for which in [OrbitManifold::Stable, OrbitManifold::Unstable] {
            patches.push(manifolds::grow_orbit_manifold(&p, &o, which, 10.0, 100)?);
        }
    }
    for patch in &patches {
        let curves = manifolds::intersect_with_sphere(&patch);
        println!(
            "{:<10} {:>3} trajectories, {} boundary circles, orientable bundle {:?}, {} sphere curves ({} points)",
            patch.label(),
            patch.trajectories.len(),
            patch.boundary_circles(),
            patch.bundle_orientable,
            curves.curves.len(),
            curves.point_count()
        );
    }
    let path = std::env::temp_dir().join("wu_gamma_o.csv");
    patches[3].write_csv(&mut std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
