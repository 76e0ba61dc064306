//! Stereographic images of the sphere intersections of W^s(0) and W^ss(0).

use flipscope::manifolds::{self, EquilibriumManifold};
use flipscope::model::{self, Params};
use flipscope::projection;

fn main() -> flipscope::Result<()> {
    let p = Params::reference(0.5, -0.0071);
    let origin = model::origin_equilibrium(&p);
    for which in [EquilibriumManifold::Stable2d, EquilibriumManifold::StrongStable1d] {
        let patch = manifolds::grow_equilibrium_manifold(&p, &origin, which, manifolds::CAP_EQUILIBRIUM, 200)?;
        let curves = manifolds::intersect_with_sphere(&patch);
        let set = projection::project_set(&curves)?;
        println!("{}: {} curves, {} pole splits", patch.label(), set.curves.len(), set.pole_splits);
        for (k, c) in set.curves.iter().enumerate().take(4) {
            let first = c.points[0];
            println!("  curve {k}: {} points, closed {}, starts at ({:+.6}, {:+.6})", c.points.len(), c.closed, first.x, first.y);
        }
        let path = std::env::temp_dir().join(format!("projected_{}.csv", which.as_str()));
        set.write_csv(&mut std::fs::File::create(&path)?)?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}
