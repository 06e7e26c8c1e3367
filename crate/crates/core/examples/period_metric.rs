//! A one-variable period model: log norm of the section, and the bridge to
//! normlike data.
use nalgebra::Complex;
use normlike::suite::scalar_model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = scalar_model(0);
    println!(
        "g {} k {} n {}  kappa {:.4}",
        model.g(),
        model.k(),
        model.n(),
        model.kappa()
    );
    for x in [2.0_f64, 10.0, 100.0, 600.0] {
        let q = [Complex::from_polar((-x).exp(), 0.7)];
        let v = model.log_norm_section(&q)?;
        println!("x = {x:>5}  -log|s| = {v:.9}  remainder {:.9}", v - x);
    }
    let grid: Vec<Vec<Complex<f64>>> = [1.5_f64, 3.0, 8.0]
        .iter()
        .map(|x| vec![Complex::new((-x).exp(), 0.0)])
        .collect();
    let inst = model.to_normlike(&grid)?;
    for (lambda, q) in grid.iter().enumerate() {
        let x = model.x_of(q);
        let direct = model.log_norm_section(q)?;
        let via = inst.eval_phi(&x, lambda)?;
        println!("bridge at x = {:.2}: {direct:.12} vs {via:.12}", x[0]);
    }
    Ok(())
}
