//! Winding number ζ of the unstable manifold of the origin at a few
//! parameter points on both sides of the primary homoclinic locus.

use flipscope::model::Params;
use flipscope::winding;

fn main() -> flipscope::Result<()> {
    for (alpha, mu) in [(0.5, 0.001), (0.5, -0.001), (0.5, -0.0035), (0.5, -0.0041), (0.2, -0.001)] {
        let r = winding::compute_zeta(&Params::reference(alpha, mu))?;
        println!(
            "(alpha, mu) = ({alpha}, {mu:>8}): zeta = {:>9}, crossings = {:>3}, {}",
            r.zeta,
            r.crossing_count,
            r.termination.as_str()
        );
    }
    Ok(())
}
