//! Ranks the 12 hammer builds with and without the attachment library.

use toolsmith::gen::{generate, preset};
use toolsmith::pipeline::{prepare_scenario, rank_prepared, PipelineConfig};
use toolsmith::report::ranking_table;

fn main() -> toolsmith::Result<()> {
    let dir = std::env::temp_dir().join("toolsmith_rank_hammer");
    let g = generate(&preset("hammer")?, &dir)?;
    let cfg = PipelineConfig::default();
    let prep = prepare_scenario(&g.scenario, &cfg)?;
    println!(
        "fitted {} reference components and {} parts in {:.2}s\n",
        prep.reference.len(),
        prep.parts.len(),
        prep.fit_seconds
    );

    for known in [true, false] {
        let r = rank_prepared(&prep, &cfg, None, known)?;
        print!("{}", ranking_table(&r, None));
        println!("scored in {:.3}s\n", r.score_seconds);
    }
    Ok(())
}
