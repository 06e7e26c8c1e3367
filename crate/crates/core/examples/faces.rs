//! Recession function on the closed orthant and its restrictions to faces.
use nalgebra::{DMatrix, DVector};
use normlike::normlike::NormlikeInstance;
use normlike::psd_linalg::PsdMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = vec![
        PsdMatrix::from_diagonal(&[1.0, 0.0])?,
        PsdMatrix::from_diagonal(&[0.0, 1.0])?,
        PsdMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0])?,
    ];
    let c = vec![
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![0.0, 2.0]),
        DVector::from_vec(vec![1.0, -1.0]),
    ];
    let inst = NormlikeInstance::constant(0.5, a, c, DVector::zeros(2), DMatrix::zeros(2, 2))?;
    let f = inst.recession();
    println!("rank {}  mu {:?}", f.rank(), f.mu());

    let x = [3.0, 2.0, 1.0];
    println!("f{x:?} = {:.6}", f.eval(&x)?);
    // approach the face x3 = 0
    for lambda in [1e1, 1e3, 1e5] {
        let p = [3.0, 2.0, 1.0 / lambda];
        println!("f{p:?} = {:.9}", f.eval(&p)?);
    }
    println!("extended f(3, 2, 0) = {:.9}", f.eval_extended(&[3.0, 2.0, 0.0])?);
    let face = f.face(&[0, 1])?;
    println!(
        "face {{1, 2}}: rank {}  f(3, 2) = {:.9}",
        face.rank(),
        face.eval(&[3.0, 2.0])?
    );
    Ok(())
}
