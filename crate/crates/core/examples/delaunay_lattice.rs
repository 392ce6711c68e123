//! Delaunay triangulations of degenerate inputs: a square lattice (every cell
//! cocircular) and a jittered copy, with their exact audits.

use hstv::delaunay::delaunay_triangulate;
use hstv::mesh::{self, AxisBox, VertexSet};

fn main() -> hstv::Result<()> {
    let n = 8;
    let eps = 1.0 / n as f64;
    let lattice: Vec<Vec<f64>> =
        (0..=n).flat_map(|j| (0..=n).map(move |i| vec![i as f64 * eps, j as f64 * eps])).collect();
    // deterministic jitter away from the boundary
    let jittered: Vec<Vec<f64>> = lattice
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let inside = p.iter().all(|&x| x > 0.0 && x < 1.0);
            let t = (k as f64 * 2.399_963).sin() * 0.15 * eps;
            if inside { vec![p[0] + t, p[1] - 0.7 * t] } else { p.clone() }
        })
        .collect();
    for (name, pts) in [("lattice", lattice), ("jittered", jittered)] {
        let t = delaunay_triangulate(&VertexSet::from_points(2, &pts)?)?;
        let audit = mesh::audit(&t, Some(eps), Some(&AxisBox::unit(2)))?;
        let exact = mesh::check_delaunay_exact(&t);
        println!(
            "{name}: {} triangles, exact Delaunay {}, c_* = {:.3}, c_bar = {:.3}",
            t.elements().len(),
            exact.ok,
            audit.nondegeneracy_c,
            audit.uniformity.map(|u| u.c_bar).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
