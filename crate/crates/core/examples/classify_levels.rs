//! Classifies the worked board-attaching examples into levels and variants.

use toolsmith::taxonomy::{classify_equivalence, levels_table};

fn main() -> toolsmith::Result<()> {
    let t = levels_table();
    println!(
        "goal {}, reference ({}, {}, {})",
        t.goal, t.reference.object, t.reference.action, t.reference.effect
    );
    for cell in &t.cells {
        let k = classify_equivalence(&t.reference, &cell.candidate, &t.goal)?;
        println!(
            "{:<18} {:<5} {:<15} -> {}   {}",
            cell.candidate.object, cell.candidate.action, cell.candidate.effect, k, cell.description
        );
    }
    Ok(())
}
