//! Cheapest unit bumps on fans and refined fans, then an HTV-regularised fit
//! of two data points swept over the fidelity weight.

use std::f64::consts::PI;

use hstv::fit2d::{self, bump_cost, grid_mesh, lambda_threshold_experiment, polygon_fan, refine_uniform, Exterior, FitProblem};

fn main() -> hstv::Result<()> {
    for k in [4, 6, 8, 16, 32] {
        let fan = polygon_fan(k, 1.0)?;
        let r = (PI / k as f64).cos();
        let coarse = bump_cost(&fan, 0, r)?;
        let fine = bump_cost(&refine_uniform(&fan)?, 0, r)?;
        println!("k = {k:>2}: bump {:.6}, refined {:.6}, lower bound 4pi = {:.6}", coarse.value, fine.value, 4.0 * PI);
    }

    let mesh = grid_mesh(8, 2.0)?;
    let id = |i: usize, j: usize| j * 9 + i;
    let prob = FitProblem::new(mesh, vec![id(3, 4), id(5, 4)], vec![1.0, -0.5], 1.0)?.with_exterior(Exterior::Zero);
    let report = lambda_threshold_experiment(&prob, &[0.5, 2.0, 4.0 * PI, 20.0])?;
    println!("threshold {:.6}", report.threshold);
    for row in &report.rows {
        println!("  lambda {:>10.4}: objective {:.6} (htv {:.6}, misfit {:.6})", row.lambda, row.objective, row.htv_part, row.fidelity_part);
    }
    println!("monotone {}, plateau {}, modification ok {}", report.monotone, report.plateau, report.modification_ok);

    let sol = fit2d::solve(&prob.with_lambda(f64::INFINITY))?;
    println!("interpolation: htv {:.6}, certificate {:.1e}, {} simplex iterations", sol.htv_part, sol.certificate, sol.iterations);
    Ok(())
}
