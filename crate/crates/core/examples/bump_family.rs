//! Radial bumps `1 − s^eps` near the origin, cut off smoothly: their HTV
//! stays bounded as `eps → 0` while the profiles approach an indicator.
//! Also checks the average-gap inequality at a few radii.

use hstv::radial::{bump_profile, eval_average_gap, radial_htv};
use hstv::schatten::PExponent;

fn main() -> hstv::Result<()> {
    println!("eps,htv_p1,htv_p2,htv_pinf,f0");
    for eps in [0.5, 0.25, 0.1, 0.05, 0.01] {
        let b = bump_profile(eps)?;
        let vals: Vec<f64> = [PExponent::ONE, PExponent::TWO, PExponent::Infinity]
            .iter()
            .map(|&p| radial_htv(&b, p, f64::INFINITY).map(|v| v.value))
            .collect::<hstv::Result<_>>()?;
        println!("{eps},{:.8},{:.8},{:.8},{:.6}", vals[0], vals[1], vals[2], b.value_at_origin()?);
    }
    let b = bump_profile(0.25)?;
    for r in [0.1, 0.3, 0.6] {
        let g = eval_average_gap(&b, r)?;
        println!("r = {r}: |f(0) - mean| = {:.6} <= {:.6}: {}", g.gap, g.bound, g.holds);
    }
    Ok(())
}
