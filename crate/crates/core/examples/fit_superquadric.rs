//! Samples a tapered superquadric, refits it and prints both parameter sets.

use toolsmith::report::fit_table;
use toolsmith::superquadric::{canonicalize, fit_superquadric, sample_surface, FitConfig, SuperquadricParams};

fn main() -> toolsmith::Result<()> {
    let truth = SuperquadricParams::new([0.04, 0.025, 0.09], [0.6, 1.2], [0.1, -0.05, 0.3])
        .with_euler([0.4, -0.3, 1.1])
        .with_taper([0.3, 0.2]);
    let cloud = sample_surface(&truth, 1000, 0.0005, 7)?;
    let fit = fit_superquadric(&cloud, &FitConfig::default())?;

    let t = canonicalize(&truth);
    println!(
        "truth: scale {:.4?} shape {:.3?} taper {:.3?}",
        t.scale, t.shape, t.taper
    );
    print!("{}", fit_table("fit", cloud.len(), &fit));
    Ok(())
}
