//! Spoon construction with unknown attachments: every candidate site of each
//! ranked build is tried in turn.

use toolsmith::gen::{generate, preset};
use toolsmith::pipeline::{prepare_scenario, simulate_prepared, PipelineConfig};
use toolsmith::report::{attempt_table, ranking_table};

fn main() -> toolsmith::Result<()> {
    let cfg = PipelineConfig::default();
    let dir = std::env::temp_dir().join("toolsmith_simulate_spoon");
    let g = generate(&preset("spoon")?, &dir)?;
    let prep = prepare_scenario(&g.scenario, &cfg)?;
    let (ranking, log) = simulate_prepared(&prep, &cfg, None, true)?;
    print!("{}", ranking_table(&ranking, log.solution_rank));
    println!();
    print!("{}", attempt_table(&log));
    Ok(())
}
