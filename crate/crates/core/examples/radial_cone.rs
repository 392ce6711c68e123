//! HTV of the cut cone `(1 − |x|)₊` on growing balls, split into the
//! absolutely continuous part and the jump of the gradient at the rim.

use hstv::radial::{radial_htv, RadialProfile};
use hstv::schatten::PExponent;

fn main() -> hstv::Result<()> {
    for d in [2, 3, 4] {
        let cone = RadialProfile::cone(d);
        println!("d = {d}");
        for p in [PExponent::ONE, PExponent::TWO, PExponent::Infinity] {
            for r in [0.5, 1.0, 2.0] {
                let v = radial_htv(&cone, p, r)?;
                println!("  p = {:>3}, r = {r}: total {:.10} = ac {:.10} + jump {:.10}", label(p), v.value, v.ac_part, v.jump_part);
            }
        }
    }
    Ok(())
}

fn label(p: PExponent) -> String {
    match p {
        PExponent::Finite(v) => format!("{v}"),
        PExponent::Infinity => "inf".into(),
    }
}
