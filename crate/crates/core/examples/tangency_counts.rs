//! Intersection counts behind the two tangency detectors: transverse
//! homoclinic points of Γ_o, and crossings of W^u(Γ_o) with the local
//! stable manifold of the origin.

use flipscope::connections::{self, OrbitRole, SliceContext, Tangency, TangencyConfig};

fn main() -> flipscope::Result<()> {
    let ctx = SliceContext::reference(0.5)?;
    let cfg = TangencyConfig::default();
    println!("{:>10} {:>12} {:>12}", "mu", "W^u∩W^s(Γo)", "W^u(Γo)∩W^s(0)");
    for mu in [-0.0068, -0.00703, -0.00705, -0.00706, -0.00708, -0.0071] {
        let tan = connections::tangency_at(&ctx, Tangency::Homoclinic(OrbitRole::GammaO), &cfg, mu)?;
        let f = connections::tangency_at(&ctx, Tangency::StableOrigin(OrbitRole::GammaO), &cfg, mu)?;
        println!("{mu:>10} {tan:>12} {f:>12}");
    }
    Ok(())
}
