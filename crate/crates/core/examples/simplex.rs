//! The revised simplex on a textbook problem, with its optimality certificate.

use hstv::lp::{solve, LinearProgram};

fn main() -> hstv::Result<()> {
    // maximise 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18, as a minimisation
    // in equality form with slacks
    let mut lp = LinearProgram::new();
    let x = lp.add_variable(-3.0);
    let y = lp.add_variable(-5.0);
    let s: Vec<usize> = (0..3).map(|_| lp.add_variable(0.0)).collect();
    lp.add_row(&[(x, 1.0), (s[0], 1.0)], 4.0);
    lp.add_row(&[(y, 2.0), (s[1], 1.0)], 12.0);
    lp.add_row(&[(x, 3.0), (y, 2.0), (s[2], 1.0)], 18.0);
    let sol = solve(&lp)?;
    println!("x = {:.6}, y = {:.6}, objective = {:.6}", sol.x[x], sol.x[y], sol.objective);
    println!("duals {:.6?}", sol.dual);
    println!("certificate {:?} (relative {:.1e})", sol.certificate, sol.certificate.relative(sol.objective));
    Ok(())
}
