//! Runs the property suite on freshly generated instances and period models.
use normlike::suite::{instance_checks, metric_checks, random_instances, random_models, SuiteConfig};

fn main() {
    let cfg = SuiteConfig {
        probes: 20,
        ..SuiteConfig::default()
    };
    let instances = random_instances(cfg.seed, 20);
    let models = random_models(cfg.seed, 8);
    let mut failed = 0;
    for c in instance_checks(&instances, &cfg)
        .into_iter()
        .chain(metric_checks(&models, &cfg))
    {
        let tag = if c.passed() { "ok  " } else { "FAIL" };
        failed += usize::from(!c.passed());
        println!("{tag} {:<34} {:.3e} (tol {:.1e})", c.name, c.observed, c.tolerance);
    }
    println!("{failed} failures");
}
