//! The two-variable scalar instance: phi, its recession function and phi0.
use normlike::normlike::NormlikeInstance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = NormlikeInstance::scalar_example();
    let f = inst.recession();
    println!("mu = {:?}", f.mu());
    for x in [[2.0, 3.0], [5.0, 5.0], [40.0, 10.0]] {
        let phi = inst.eval_phi(&x, 0)?;
        let rec = f.eval(&x)?;
        println!(
            "x = {x:?}  phi = {phi:.6}  f = {rec:.6}  phi0 = {:.6}",
            inst.phi0(&x, 0)?
        );
    }
    // f is 1-homogeneous, phi0 stays bounded along rays
    for t in [1e1, 1e3, 1e5] {
        println!("t = {t:e}  phi0(t, t) = {:.9}", inst.phi0(&[t, t], 0)?);
    }
    Ok(())
}
