//! Coarse winding-number raster printed as a character map, with the full
//! raster written as CSV.

use flipscope::model::Params;
use flipscope::winding::{self, GridSpec, WindingConfig, Zeta};

fn main() -> flipscope::Result<()> {
    let spec = GridSpec {
        alpha_range: (0.3, 0.7),
        mu_range: (-0.006, 0.0005),
        n_alpha: 41,
        n_mu: 27,
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let grid = winding::sweep_zeta(&Params::reference(0.5, 0.0), &spec, &WindingConfig::default(), workers)?;
    for j in (0..spec.n_mu).rev() {
        let row: String = (0..spec.n_alpha)
            .map(|i| match grid.zeta(i, j) {
                Some(Zeta::Finite(n)) if n < 10 => char::from_digit(n, 10).unwrap(),
                Some(Zeta::Finite(_)) => '+',
                Some(Zeta::Saturated) => '.',
                None => '?',
            })
            .collect();
        println!("{:>9.5} {row}", spec.mu(j));
    }
    println!("          alpha from {} to {}", spec.alpha_range.0, spec.alpha_range.1);
    let path = std::env::temp_dir().join("zeta_sweep.csv");
    grid.write_csv(&mut std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
