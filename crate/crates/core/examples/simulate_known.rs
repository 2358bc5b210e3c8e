//! Build-and-test replay with known attachments for the hammer and spatula.

use toolsmith::gen::{generate, preset};
use toolsmith::pipeline::{prepare_scenario, simulate_prepared, PipelineConfig};
use toolsmith::report::attempt_table;

fn main() -> toolsmith::Result<()> {
    let cfg = PipelineConfig::default();
    for name in ["hammer", "spatula"] {
        let dir = std::env::temp_dir().join(format!("toolsmith_simulate_{name}"));
        let g = generate(&preset(name)?, &dir)?;
        let prep = prepare_scenario(&g.scenario, &cfg)?;
        let (_, log) = simulate_prepared(&prep, &cfg, None, false)?;
        println!("== {name}");
        print!("{}", attempt_table(&log));
    }
    Ok(())
}
