//! Writes all three preset scenarios under the given directory
//! (default: the system temp dir).

use std::path::PathBuf;

use toolsmith::gen::{generate, preset, PRESET_NAMES};

fn main() -> toolsmith::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("toolsmith_presets"));
    for name in PRESET_NAMES {
        let g = generate(&preset(name)?, root.join(name))?;
        println!("{name}: {} files, scenario {}", g.files.len(), g.scenario.display());
    }
    Ok(())
}
