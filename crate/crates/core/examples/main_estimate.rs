//! Inverse-entry constants for a flag of PSD matrices, and the Neumann
//! expansion of a perturbed inverse.
use nalgebra::DMatrix;
use normlike::normlike::{neumann_series, FlagForm, ProbeSpec};
use normlike::psd_linalg::PsdMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let flag = [
        PsdMatrix::from_diagonal(&[2.0, 1.0, 1.0])?,
        PsdMatrix::from_diagonal(&[1.0, 3.0, 0.0])?,
        PsdMatrix::from_diagonal(&[1.0, 0.0, 0.0])?,
    ];
    let form = FlagForm::from_flag(&flag)?;
    println!("ranks {:?}", form.ranks());
    let est = form.inverse_entry_bound_check(&ProbeSpec::new(200, 7))?;
    println!(
        "c = {:.4}  det c1 = {:.4}  cof c2 = {:.4}",
        est.c, est.det_c1, est.cof_c2
    );
    println!("kappa' = {:.4}", form.kappa_prime(est.c));

    let a = DMatrix::from_diagonal_element(3, 3, 10.0);
    let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
    let exact = (&a + &m).try_inverse().ok_or("singular")?;
    for order in [0, 2, 6] {
        let q = neumann_series(&a, &m, order)?;
        println!(
            "order {order}: ratio {:.3}  error {:.3e}  bound {:.3e}",
            q.ratio,
            (&q.partial_sum - &exact).amax(),
            q.tail_bound
        );
    }
    Ok(())
}
