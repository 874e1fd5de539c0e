//! Side-by-side summary table of one or more run directories.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use crate::artifacts::{check_consistent, Summary};

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "n/a".to_string(), f)
}

/// Label and formatted value for every row of the table.
fn rows(s: &Summary) -> Vec<(&'static str, String)> {
    vec![
        ("seed", s.seed.to_string()),
        ("config hash", s.config_hash.clone()),
        (
            "outcome",
            s.outcome
                .and_then(|o| serde_json::to_value(o).ok())
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_else(|| "n/a".to_string()),
        ),
        ("explored volume (m3)", format!("{:.1}", s.final_volume_m3)),
        ("reachable explored (%)", opt(s.reachable_coverage, |c| format!("{:.1}", c * 100.0))),
        ("distance travelled (m)", format!("{:.1}", s.distance_travelled_m)),
        ("mean velocity (m/s)", format!("{:.3}", s.mean_speed)),
        ("max velocity (m/s)", format!("{:.3}", s.max_speed)),
        ("hover fraction", format!("{:.4}", s.hover_fraction)),
        ("repositioning events", s.repositioning_count.to_string()),
        ("duration (s)", format!("{:.2}", s.duration_s)),
    ]
}

pub fn render(dirs: &[&Path]) -> Result<String> {
    let summaries = dirs.iter().map(|d| check_consistent(d)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = dirs
        .iter()
        .map(|d| {
            d.file_name()
                .map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned())
        })
        .collect();
    let table: Vec<Vec<(&str, String)>> = summaries.iter().map(rows).collect();
    let label_w = table[0].iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let col_w: Vec<usize> = (0..dirs.len())
        .map(|c| table[c].iter().map(|(_, v)| v.len()).chain([names[c].len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for (c, n) in names.iter().enumerate() {
        let _ = write!(out, "  {:>w$}", n, w = col_w[c]);
    }
    out.push('\n');
    for (r, (label, _)) in table[0].iter().enumerate() {
        let _ = write!(out, "{label:label_w$}");
        for (col, w) in table.iter().zip(&col_w) {
            let _ = write!(out, "  {:>w$}", col[r].1);
        }
        out.push('\n');
    }
    Ok(out)
}
