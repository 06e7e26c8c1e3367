//! Lear divisor coefficients mu + nu from an instance's boundary slopes.
use normlike::heightjump::lear_divisor;
use normlike::normlike::NormlikeInstance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = NormlikeInstance::scalar_example();
    let mu = inst.recession().mu().to_vec();
    let nu = vec![0.0, 1.0];
    let labels = vec!["E".to_string(), "F".to_string()];
    let d = lear_divisor(&mu, &nu, &labels, vec![("closure".into(), 0.5)])?;
    println!("coefficients {:?}", d.coefficients());
    for (name, a) in &d.components {
        println!("  {name}: {a}");
    }
    println!("closure part {:?}", d.closure_part);
    Ok(())
}
