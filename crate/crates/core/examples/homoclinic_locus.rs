//! The primary homoclinic orbit along μ = 0: its split, the orientation
//! index on both sides of the inclination flip, and the flip itself.

use flipscope::connections;
use flipscope::model::Params;

fn main() -> flipscope::Result<()> {
    for alpha in [0.2, 0.35, 0.5] {
        let p = Params::reference(alpha, 0.0);
        let split = connections::homoclinic_split(&p)?;
        let h = connections::locate_homoclinic(&p, (-1e-3, 1e-3), 1e-10)?;
        println!(
            "alpha = {alpha}: split at mu = 0 is {:+.3e}, homoclinic at mu = {:+.3e}, orientation index {:+.6}",
            split.value.signed().unwrap(),
            h.mu,
            connections::orientation_index(&p)?
        );
    }
    let flip = connections::locate_inclination_flip(&Params::reference(0.2, 0.0), (0.2, 0.5), 1e-9)?;
    println!("inclination flip at alpha = {:.9}", flip.alpha);
    if let Some(case) = flip.case {
        println!("  case C eigenvalue condition: {}", case.case_c);
    }
    Ok(())
}
