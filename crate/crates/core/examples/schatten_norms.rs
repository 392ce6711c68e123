//! Schatten norms of a few small matrices, and the trace bound on symmetric
//! ones: `|Tr M| ≤ |M|_1` with equality exactly for semidefinite `M`.

use hstv::schatten::{schatten_norm, singular_values, trace_schatten_gap, GeneralMatrix, PExponent, SymMatrix};

fn main() -> hstv::Result<()> {
    let ps = [PExponent::ONE, PExponent::TWO, PExponent::Finite(4.0), PExponent::Infinity];
    let mats = [
        ("rotation", GeneralMatrix::from_rows(&[vec![0.6, -0.8], vec![0.8, 0.6]])?),
        ("shear", GeneralMatrix::from_rows(&[vec![1.0, 3.0], vec![0.0, 1.0]])?),
        ("rank one", GeneralMatrix::outer(&[1.0, 2.0, 2.0], &[0.0, 3.0, 4.0])?),
    ];
    for (name, m) in &mats {
        let norms: Vec<String> = ps.iter().map(|&p| format!("{:.6}", schatten_norm(m, p))).collect();
        println!("{name:>9}: sigma = {:.6?}, |M|_p for p = 1, 2, 4, inf: {}", singular_values(m), norms.join(", "));
    }

    for (name, rows) in [
        ("positive", vec![vec![2.0, 1.0], vec![1.0, 2.0]]),
        ("negative", vec![vec![-1.0, 0.5], vec![0.5, -3.0]]),
        ("saddle", vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
    ] {
        let g = trace_schatten_gap(&SymMatrix::from_rows(&rows)?);
        println!(
            "{name:>9}: Tr = {:+.3}, |M|_1 = {:.3}, equality = {}, sign = {}",
            g.trace, g.s1, g.equality, g.definite_sign
        );
    }
    Ok(())
}
