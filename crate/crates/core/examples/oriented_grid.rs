//! Builds a 3×3 orientation field with mixed rotations and audits the
//! resulting triangulation at two grid scales.

use std::f64::consts::PI;

use hstv::mesh::AxisBox;
use hstv::oriented_grid::{oriented_triangulation, rotation_2d, GridParams, OrientationField};

fn main() -> hstv::Result<()> {
    let delta = 0.25;
    let degrees = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 10.0, 80.0];
    let domain = AxisBox::new(vec![0.0; 2], vec![3.0 * delta; 2])?;
    let field = OrientationField::from_fn(delta, &domain, &[delta / 2.0; 2], |z| {
        let i = (z[0] / delta).floor() as usize;
        let j = (z[1] / delta).floor() as usize;
        rotation_2d(degrees[3 * j + i] * PI / 180.0)
    })?;
    for eps in [1.0 / 64.0, 1.0 / 128.0] {
        let params = GridParams::practical(eps, delta, domain.clone())?;
        let start = std::time::Instant::now();
        let (t, audit) = oriented_triangulation(&field, &params)?;
        let u = audit.mesh.uniformity.expect("uniformity audited");
        println!(
            "eps = 1/{}: {} vertices, {} triangles, c_bar = {:.3} (C_G = {}), c_* = {:.3}, diam/eps = {:.3}, {:.2?}",
            (1.0 / eps) as u32,
            t.vertices().len(),
            t.elements().len(),
            u.c_bar,
            params.c_g,
            audit.mesh.nondegeneracy_c,
            audit.max_diameter_over_eps,
            start.elapsed()
        );
        for c in audit.cells.iter().filter(|c| c.active) {
            println!(
                "  cell {:?}: {} layer points, gamma = {:.2e}, min margin = {:.2e} eps",
                c.z,
                c.mid_points,
                c.gamma.unwrap_or(f64::NAN),
                c.min_margin.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
