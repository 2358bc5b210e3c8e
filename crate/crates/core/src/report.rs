//! Plain-text tables for rankings, attempt logs and fits.

use std::fmt::Write;

use crate::pipeline::Ranking;
use crate::sim::AttemptLog;
use crate::superquadric::{canonicalize, SqFitResult};

fn num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.4}")
    }
}

/// One row per build: rank, parts, the four error terms and e_const.
/// `solution_rank` marks the row the simulator settled on.
pub fn ranking_table(r: &Ranking, solution_rank: Option<usize>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "scenario {}  weights {}  attachments {}",
        r.scenario,
        r.weights,
        if r.attachments_known { "known" } else { "unknown" }
    );
    let _ = writeln!(
        s,
        "{:>4}  {:<16} {:>9} {:>9} {:>9} {:>9} {:>10} {:>5}",
        "rank", "parts", "e_shape", "e_scale", "e_ratio", "e_att", "e_const", "sites"
    );
    for (i, b) in r.builds.iter().enumerate() {
        let mark = if solution_rank == Some(i + 1) {
            "  <- solution"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{:>4}  {:<16} {:>9} {:>9} {:>9} {:>9} {:>10} {:>5}{}",
            i + 1,
            b.label(),
            num(b.e_shape),
            num(b.e_scale),
            num(b.e_ratio),
            num(b.e_att),
            num(b.e_const),
            b.sites.len(),
            mark
        );
    }
    s
}

pub fn attempt_table(log: &AttemptLog) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3}  {:>4}  {:<16} {:>5}  {:<28} {:<20}",
        "#", "rank", "parts", "align", "location", "outcome"
    );
    for (i, a) in log.attempts.iter().enumerate() {
        let loc = format!("({:.3}, {:.3}, {:.3})", a.location[0], a.location[1], a.location[2]);
        let _ = writeln!(
            s,
            "{:>3}  {:>4}  {:<16} {:>5}  {:<28} {:<20} {}",
            i + 1,
            a.rank,
            a.parts.join("+"),
            a.alignment,
            loc,
            a.outcome.to_string(),
            a.detail
        );
    }
    let _ = writeln!(s, "{}", log.summary());
    s
}

pub fn fit_table(name: &str, points: usize, fit: &SqFitResult) -> String {
    let k = canonicalize(&fit.params);
    let p = &k;
    format!(
        "{name}: {points} points, residual {:.3e}, {} iterations{}\n  scale  ({:.4}, {:.4}, {:.4})\n  shape  ({:.3}, {:.3})\n  euler  ({:.3}, {:.3}, {:.3})\n  taper  ({:.3}, {:.3})\n  center ({:.4}, {:.4}, {:.4})\n",
        fit.residual,
        fit.iterations,
        if fit.converged { "" } else { " (not converged)" },
        p.scale[0],
        p.scale[1],
        p.scale[2],
        p.shape[0],
        p.shape[1],
        p.euler[0],
        p.euler[1],
        p.euler[2],
        p.taper[0],
        p.taper[1],
        p.center[0],
        p.center[1],
        p.center[2],
    )
}
