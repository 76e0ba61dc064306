//! Saddle periodic orbits of the α = 0.5 slice: Γ_o is located by Newton on
//! the return map, continued through its fold, and the fold and the period
//! doubling of Γ_t are refined on the branch.

use flipscope::connections::{OrbitRole, SliceContext};
use flipscope::orbits::{self, MultiplierEvent};

fn main() -> flipscope::Result<()> {
    let ctx = SliceContext::reference(0.5)?;
    println!("branch with {} points, end {:?}", ctx.branch.points.len(), ctx.branch.end);
    for role in [OrbitRole::GammaO, OrbitRole::GammaT] {
        let o = ctx.orbit(role, -0.002)?;
        println!(
            "{} at mu = -0.002: T = {:.6}, multipliers ({:.4e}, {:.4e}), det M = {:.6e}, exp(∫tr) = {:.6e}",
            o.label,
            o.period,
            o.multipliers[0].re,
            o.multipliers[1].re,
            o.monodromy_determinant()?,
            o.trace_integral.exp()
        );
    }
    let snp = orbits::detect_multiplier_event(&ctx.branch, MultiplierEvent::PlusOne)?;
    let pd = orbits::detect_multiplier_event(&ctx.branch, MultiplierEvent::MinusOne)?;
    println!("SNP at mu = {:.9e}", snp.mu);
    println!("PD  at mu = {:.9e}", pd.mu);

    let path = std::env::temp_dir().join("slice_branch.csv");
    ctx.branch.write_csv(&mut std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
