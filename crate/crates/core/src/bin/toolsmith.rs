use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use toolsmith::gen::{generate, preset, GenSpec};
use toolsmith::geom::{load_ply, save_ply};
use toolsmith::pipeline::{prepare_scenario, rank_prepared, simulate_prepared, PipelineConfig};
use toolsmith::report::{attempt_table, fit_table, ranking_table};
use toolsmith::scoring::ScoreWeights;
use toolsmith::segmentation::segment_scene;
use toolsmith::superquadric::{canonicalize, fit_superquadric};
use toolsmith::taxonomy::{levels_table, ClassifyRequest};
use toolsmith::{Error, Result};

/// Stdout writers that end the process quietly when the reader goes away,
/// as when piping into `head`.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        if write!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "toolsmith",
    version,
    about = "Rank and simulate tool constructions from candidate parts"
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a superquadric to a PLY cloud.
    Fit {
        /// PLY point cloud.
        cloud: PathBuf,
    },
    /// Remove the table plane and split a scene into parts.
    Segment {
        /// PLY scene cloud with a table plane.
        scene: PathBuf,
        /// Write each part as part_<i>.ply here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank every candidate build of a scenario.
    Rank {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Four comma-separated weights: scale,shape,ratio,attachment.
        #[arg(long)]
        weights: Option<ScoreWeights>,
        /// Ignore the attachment library.
        #[arg(long)]
        unknown_attachments: bool,
    },
    /// Rank, then replay construction attempts against the world model.
    Simulate {
        /// Scenario JSON file with a world model.
        scenario: PathBuf,
        /// Four comma-separated weights: scale,shape,ratio,attachment.
        #[arg(long)]
        weights: Option<ScoreWeights>,
        /// Ignore the library and explore candidate sites.
        #[arg(long)]
        unknown_attachments: bool,
    },
    /// Generate a synthetic scenario from a spec file or a shipped preset.
    Gen {
        /// Generator spec JSON file.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// hammer, spoon or spatula.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify affordance solutions into improvisation levels.
    Classify {
        /// Request file; the built-in worked examples when omitted.
        file: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(if e.is_fit_failure() { 3 } else { 2 })
        }
    }
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) {
    outln!("{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    match &cli.cmd {
        Cmd::Fit { cloud } => fit(cli, &cfg, cloud),
        Cmd::Segment { scene, out } => segment(cli, &cfg, scene, out.as_deref()),
        Cmd::Rank {
            scenario,
            weights,
            unknown_attachments,
        } => {
            let prep = prepare_scenario(scenario, &cfg)?;
            let r = rank_prepared(&prep, &cfg, *weights, !unknown_attachments)?;
            if cli.json {
                print_json(&r);
            } else {
                out!("{}", ranking_table(&r, None));
            }
            Ok(())
        }
        Cmd::Simulate {
            scenario,
            weights,
            unknown_attachments,
        } => {
            let prep = prepare_scenario(scenario, &cfg)?;
            let (r, log) = simulate_prepared(&prep, &cfg, *weights, *unknown_attachments)?;
            if cli.json {
                print_json(&json!({ "ranking": r, "log": log, "summary": log.summary() }));
            } else {
                out!("{}", ranking_table(&r, log.solution_rank));
                outln!();
                out!("{}", attempt_table(&log));
            }
            Ok(())
        }
        Cmd::Gen {
            spec,
            preset: name,
            out,
        } => {
            let mut s = match (spec, name) {
                (Some(p), _) => GenSpec::load(p)?,
                (None, Some(n)) => preset(n)?,
                (None, None) => return Err(Error::InvalidInput("gen needs a spec file or --preset".into())),
            };
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let g = generate(&s, out)?;
            if cli.json {
                print_json(&g);
            } else {
                for f in &g.files {
                    outln!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Cmd::Classify { file } => {
            let req = match file {
                Some(p) => ClassifyRequest::load(p)?,
                None => ClassifyRequest::from(&levels_table()),
            };
            let results = req.run();
            if cli.json {
                print_json(&json!({ "goal": req.goal, "reference": req.reference, "results": results }));
            } else {
                outln!(
                    "goal {}  reference ({}, {}, {})",
                    req.goal, req.reference.object, req.reference.action, req.reference.effect
                );
                outln!(
                    "{:<18} {:<8} {:<16} {:<11} {}",
                    "object", "action", "effect", "provenance", "class"
                );
                for r in &results {
                    let c = &r.candidate;
                    let class = match (&r.classification, &r.error) {
                        (Some(k), _) => k.to_string(),
                        (None, Some(e)) => format!("error: {e}"),
                        (None, None) => String::new(),
                    };
                    outln!(
                        "{:<18} {:<8} {:<16} {:<11} {}",
                        c.object,
                        c.action,
                        c.effect,
                        format!("{:?}", c.provenance).to_lowercase(),
                        class
                    );
                }
            }
            Ok(())
        }
    }
}

fn fit(cli: &Cli, cfg: &PipelineConfig, path: &Path) -> Result<()> {
    let cloud = load_ply(path)?;
    let res = fit_superquadric(&cloud, &cfg.fit)?;
    if cli.json {
        print_json(&json!({
            "file": path,
            "points": cloud.len(),
            "seed": cfg.seed,
            "params": res.params,
            "canonical": canonicalize(&res.params),
            "residual": res.residual,
            "iterations": res.iterations,
            "converged": res.converged,
        }));
    } else {
        out!("{}", fit_table(&path.display().to_string(), cloud.len(), &res));
    }
    Ok(())
}

fn segment(cli: &Cli, cfg: &PipelineConfig, path: &Path, out: Option<&Path>) -> Result<()> {
    let cloud = load_ply(path)?;
    let seg = segment_scene(&cloud, &cfg.segmentation, cfg.seed)?;
    let mut parts = Vec::new();
    for (i, p) in seg.parts.iter().enumerate() {
        let file = match out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
                let f = dir.join(format!("part_{i}.ply"));
                save_ply(p, &f)?;
                Some(f)
            }
            None => None,
        };
        let c = p.centroid()?;
        parts.push(json!({ "index": i, "points": p.len(), "centroid": [c.x, c.y, c.z], "file": file }));
    }
    if cli.json {
        print_json(&json!({ "plane": seg.plane, "residual_points": seg.residual_points, "parts": parts }));
    } else {
        match &seg.plane {
            Some(pl) => outln!(
                "plane normal ({:.3}, {:.3}, {:.3}) offset {:.4}",
                pl.normal[0], pl.normal[1], pl.normal[2], pl.offset
            ),
            None => outln!("no plane removed"),
        }
        for (i, p) in seg.parts.iter().enumerate() {
            let c = p.centroid()?;
            outln!(
                "part {i}: {} points, centroid ({:.3}, {:.3}, {:.3})",
                p.len(),
                c.x,
                c.y,
                c.z
            );
        }
    }
    Ok(())
}
