//! Codimension-one points on the slice α = 0.5, from the primary
//! homoclinic cascade down to the fold of Γ_o.
//!
//! Pass `--fast` to skip the two tangency detectors, which grow full
//! manifolds at every bisection step.

use flipscope::connections::{self, Detector, LocateOptions, SliceContext};

fn main() -> flipscope::Result<()> {
    let fast = std::env::args().any(|a| a == "--fast");
    let ctx = SliceContext::reference(0.5)?;
    let mut points = Vec::new();
    for t in connections::reference_slice_targets() {
        if fast && matches!(t.detector, Detector::Tangency(_)) {
            continue;
        }
        let start = std::time::Instant::now();
        let opts = LocateOptions {
            kind: Some(t.kind.into()),
            ..LocateOptions::default()
        };
        let b = connections::locate_bifurcation(&ctx, t.bracket, t.detector, &opts)?;
        println!("{b}  ({:.1?})", start.elapsed());
        points.push(b);
    }
    let path = std::env::temp_dir().join("slice_bifurcations.csv");
    connections::write_bifurcation_csv(&points, &mut std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
