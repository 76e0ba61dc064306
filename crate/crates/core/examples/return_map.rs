//! First-return map on y = 0 of a trajectory on the chaotic attractor near
//! the last homoclinic tangency of Γ_o.

use flipscope::connections::{OrbitRole, SliceContext};
use flipscope::manifolds::{FloquetBundle, OrbitManifold};
use flipscope::orbits::{self, SectionMap};

fn main() -> flipscope::Result<()> {
    let mu = -0.007076768;
    let ctx = SliceContext::reference(0.5)?;
    let p = ctx.params(mu);
    let gamma_o = ctx.orbit(OrbitRole::GammaO, mu)?;
    let bundle = FloquetBundle::new(&gamma_o, OrbitManifold::Unstable)?;
    for offset in [1e-5, 1.00001e-5, 1.00002e-5] {
        let s0 = bundle.seed_point(&p, 0.0, offset)?;
        let seq = orbits::collect_returns(&p, &s0, &SectionMap::y_zero(), 300)?;
        let env = seq.binned_envelope(20);
        println!(
            "offset {offset:.6e}: x range [{:.6}, {:.6}], slope sign changes {}",
            seq.raw.iter().copied().fold(f64::INFINITY, f64::min),
            seq.raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            orbits::slope_sign_changes(&env)
        );
        let bins: Vec<String> = env.iter().map(|v| v.map_or("-".into(), |v| format!("{v:.2}"))).collect();
        println!("  envelope {}", bins.join(" "));
    }
    Ok(())
}
