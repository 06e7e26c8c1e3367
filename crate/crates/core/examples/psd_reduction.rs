//! PSD helpers: simultaneous reduction, Moore-Penrose inverse, Schur blocks.
use nalgebra::DMatrix;
use normlike::psd_linalg::{
    block_inverse, pseudo_inverse, schur_complement, simultaneous_reduce, BlockPartition, PsdMatrix,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a1 = PsdMatrix::from_row_slice(3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])?;
    let a2 = PsdMatrix::from_row_slice(3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])?;
    let red = simultaneous_reduce(&[a1.clone(), a2])?;
    println!("common rank {}", red.r);
    for (i, b) in red.blocks.iter().enumerate() {
        println!("block {}: {}", i + 1, b.matrix());
    }

    let p = pseudo_inverse(&a1);
    let defect = (a1.matrix() * &p * a1.matrix() - a1.matrix()).amax();
    println!("rank A1 = {}, |A A+ A - A| = {defect:.2e}", a1.rank());

    let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
    let split = BlockPartition::new(3, 1)?;
    println!("schur complement {}", schur_complement(&m, split)?);
    let inv = block_inverse(&m, split)?;
    println!("|M Minv - I| = {:.2e}", (&m * inv - DMatrix::identity(3, 3)).amax());
    Ok(())
}
