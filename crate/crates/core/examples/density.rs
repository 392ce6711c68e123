//! Interpolates smooth targets on Hessian-adapted grids and compares the
//! interpolants' HTV with the exact value as the grid is refined.
//!
//! The quadratics have a constant Hessian, so one wide cell is best. The
//! curved targets need the field to vary, which takes smaller cells.

use hstv::approx::{density_experiment, rows_to_csv, DeltaRule, FieldChoice, Target};
use hstv::mesh::AxisBox;

fn main() -> hstv::Result<()> {
    let omega = AxisBox::new(vec![0.0001; 2], vec![0.9999; 2])?;
    let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let wide = DeltaRule::default();
    let narrow = DeltaRule { c: 3.0 };
    for (name, field, rule) in [
        ("quad_iso", FieldChoice::Adapted, wide),
        ("quad_saddle", FieldChoice::Adapted, wide),
        ("quad_saddle", FieldChoice::Identity, wide),
        ("gauss", FieldChoice::Adapted, narrow),
        ("cone", FieldChoice::Adapted, narrow),
    ] {
        let w = Target::builtin(name, 2)?;
        let rows = density_experiment(&w, &eps, rule, &omega, field)?;
        println!("# {name}, {field:?} field, delta = {}·sqrt(eps)", rule.c);
        print!("{}", rows_to_csv(&rows));
    }
    Ok(())
}
