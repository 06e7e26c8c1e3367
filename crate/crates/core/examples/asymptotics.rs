//! phi0 along rays and the decay exponents of its derivatives for k = 1.
use nalgebra::{DMatrix, DVector};
use normlike::normlike::NormlikeInstance;
use normlike::psd_linalg::PsdMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a1 = PsdMatrix::from_diagonal(&[1.0, 0.0])?;
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let inst = NormlikeInstance::constant(
        0.1,
        vec![a1],
        vec![DVector::from_vec(vec![1.0, 0.0])],
        DVector::from_vec(vec![0.3, 1.0]),
        b,
    )?;

    println!("closed form phi0(10) = {:.9}", inst.phi0_k1_closed(10.0, 0)?);
    println!("decay coefficient {:.9}", inst.k1_decay_coefficient(0)?);
    let rep = inst.asymptotics_report(&[vec![1.0]], 1e6);
    println!("sup |phi0| = {:.6}", rep.bounded_sup);
    if let Some((d1, d2)) = rep.fitted_exponents() {
        println!("slopes: first {d1:.4}, second {d2:.4}");
    }
    if let Some(l) = rep.continuity_limit() {
        println!("limit at infinity {l:.9}");
    }
    for w in &rep.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
