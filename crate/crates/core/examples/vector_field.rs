//! Eigenvalues of the origin, the secondary equilibrium q and the case-C
//! eigenvalue test at the reference parameters.

use flipscope::model::{self, Params};

fn main() -> flipscope::Result<()> {
    let p = Params::reference(0.5, 0.0);
    let e = model::origin_eigens(&p)?;
    println!("origin: λu = {}, λs = {}, λss = {}", e.lambda_u, e.lambda_s, e.lambda_ss);
    println!("  e_u = {:?}", e.e_u.as_slice());
    println!("  e_s = {:?}", e.e_s.as_slice());
    println!("  e_ss = {:?}", e.e_ss.as_slice());

    let case = model::classify_case(&p)?;
    println!("case C: {} (resonant: {})", case.case_c, case.resonant);

    for mu in [0.001, -0.002, -0.007] {
        let q = model::find_q(&p.with_mu(mu))?;
        println!("mu = {mu:>7}: q = {:?} ({:?})", q.location.as_slice(), q.stability);
    }
    Ok(())
}
