//! HTV of the pyramid fixtures: one pyramid costs 16, two side by side 32,
//! and the family `G_h` approaches 32 from above as `h → 0`.

use hstv::cpwl::{double_pyramid, htv, pyramid, remnotclosed_fixtures};
use hstv::mesh::AxisBox;
use hstv::schatten::PExponent;

fn main() -> hstv::Result<()> {
    let b = AxisBox::new(vec![-3.0, -2.0], vec![3.0, 2.0])?;
    println!("pyramid        {:.12}", htv(&pyramid([0.0, 0.0]), &b, PExponent::ONE)?.total);
    println!("double pyramid {:.12}", htv(&double_pyramid(), &b, PExponent::ONE)?.total);
    for h in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        let g = remnotclosed_fixtures(h)?;
        let r = htv(&g, &b, PExponent::ONE)?;
        println!("G_{h:<7}      {:.12}  ({} faces with a kink)", r.total, r.per_face.len());
    }
    Ok(())
}
