//! Alignments, candidate attachment sites and chosen library points for the
//! best hammer build.

use toolsmith::attachment::{attachment_fit, best_alignment, AttAggregate};
use toolsmith::gen::{generate, preset};
use toolsmith::pipeline::{prepare_scenario, PipelineConfig};

fn main() -> toolsmith::Result<()> {
    let dir = std::env::temp_dir().join("toolsmith_attachment_sites");
    let g = generate(&preset("hammer")?, &dir)?;
    let prep = prepare_scenario(&g.scenario, &PipelineConfig::default())?;

    // handle = C, head = B
    let by_id = |id: &str| prep.parts.iter().find(|p| p.id == id).expect("preset part");
    let parts = [by_id("C"), by_id("B")];
    let fit = attachment_fit(&parts, prep.library.as_ref(), &prep.reference, AttAggregate::Sum)?;

    println!("{} alignments", fit.alignments.len());
    for (i, a) in fit.alignments.iter().enumerate().take(4) {
        println!("  alignment {i}: flips {:?} error {:.4}", a.flips, a.alignment_error);
    }
    println!("{} sites", fit.sites.len());
    for s in &fit.sites {
        println!(
            "  ({:.3}, {:.3}, {:.3}) from alignment {}",
            s.location[0], s.location[1], s.location[2], s.alignment
        );
    }
    println!("e_att {:.4}", fit.e_att);
    if let Some(best) = best_alignment(&fit.chosen) {
        for c in fit.chosen.iter().filter(|c| c.alignment == best) {
            println!(
                "  alignment {best}: {} uses {:.3?} ({:?}) at distance {:.4}",
                c.part_id, c.location, c.polarity, c.distance
            );
        }
    }
    Ok(())
}
