//! Generates the hammer scene, drops the table plane and lists the clusters.

use toolsmith::gen::{generate, preset};
use toolsmith::geom::load_ply;
use toolsmith::segmentation::{segment_scene, SegmentationConfig};

fn main() -> toolsmith::Result<()> {
    let dir = std::env::temp_dir().join("toolsmith_segment_scene");
    generate(
        &preset(&std::env::args().nth(1).unwrap_or_else(|| "hammer".into()))?,
        &dir,
    )?;
    let scene = load_ply(dir.join("scene.ply"))?;
    let seg = segment_scene(&scene, &SegmentationConfig::default(), 0)?;

    println!("{} scene points", scene.len());
    if let Some(p) = seg.plane {
        println!("plane normal {:.3?} offset {:.4}", p.normal, p.offset);
    }
    for (i, part) in seg.parts.iter().enumerate() {
        let c = part.centroid()?;
        println!(
            "cluster {i}: {} points at ({:.3}, {:.3}, {:.3})",
            part.len(),
            c.x,
            c.y,
            c.z
        );
    }
    println!("{} points left unclustered", seg.residual_points);
    Ok(())
}
