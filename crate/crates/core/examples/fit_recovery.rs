//! Recovery rate over 50 random shapes. Optional argument: noise sigma in
//! metres (0.002 for the noisy run).

use toolsmith::superquadric::recovery::recovery_suite;
use toolsmith::superquadric::FitConfig;

fn main() -> toolsmith::Result<()> {
    let noise: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let t = std::time::Instant::now();
    let report = recovery_suite(50, 1000, 2024, noise, &FitConfig::default())?;
    for (i, c) in report.cases.iter().enumerate().filter(|(_, c)| !c.ok) {
        println!(
            "miss {i}: truth scale {:.4?} shape {:.3?}, fitted scale {:.4?} shape {:.3?}",
            c.truth.scale, c.truth.shape, c.fitted.scale, c.fitted.shape
        );
    }
    println!(
        "noise {noise}: {}/{} recovered in {:.1}s",
        report.passed(),
        report.cases.len(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
