use toolsmith::gen::{generate, preset};
use toolsmith::segmentation::load_reference_components;
use toolsmith::superquadric::{canonicalize, fit_superquadric, FitConfig};

#[test]
fn scaled_reference_fits_scale_with_it() {
    let dir = tempfile::tempdir().unwrap();
    generate(&preset("hammer").unwrap(), dir.path()).unwrap();
    let paths = [dir.path().join("ref_handle.ply"), dir.path().join("ref_head.ply")];
    let cfg = FitConfig::default();
    let base = load_reference_components(&paths, 1.0).unwrap();
    for s in [0.5, 2.0] {
        let scaled = load_reference_components(&paths, s).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            let fa = canonicalize(&fit_superquadric(a, &cfg).unwrap().params);
            let fb = canonicalize(&fit_superquadric(b, &cfg).unwrap().params);
            for k in 0..3 {
                let want = s * fa.scale[k];
                assert!(
                    (fb.scale[k] - want).abs() <= 0.02 * want,
                    "scale {s}, axis {k}: {} vs {want}",
                    fb.scale[k]
                );
            }
        }
    }
}
