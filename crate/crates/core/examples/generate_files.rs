//! Generates an instance file, writes it, reads it back and evaluates it.
use normlike::io::InstanceFile;
use normlike::random::{random_file, GenOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = GenOptions {
        g: Some(3),
        k: Some(2),
        samples: Some(1),
    };
    let file = InstanceFile::Normlike(random_file(0xC0FFEE, 4, &opts));
    let text = file.to_json();
    let path = std::env::temp_dir().join("normlike_example.json");
    std::fs::write(&path, &text)?;

    let (back, bytes) = InstanceFile::read(&path)?;
    assert_eq!(back.to_json(), text);
    println!("round trip ok, sha256 {}", normlike::report::digest(&bytes));
    let inst = back.to_instance()?;
    let d = inst.validate()?;
    println!(
        "g {} k {} kappa {}  least eigenvalue {:?}",
        inst.g(),
        inst.k(),
        inst.kappa(),
        d.least_eigenvalue
    );
    let x = vec![inst.kappa() * 4.0 + 1.0; inst.k()];
    println!("phi({x:?}) = {:.9}", inst.eval_phi(&x, 0)?);
    std::fs::remove_file(&path)?;
    Ok(())
}
