//! `report`: merge certification results into one CSV table.

use std::path::{Path, PathBuf};

use advbound::bounds::BoundReport;

use crate::{io_at, CliError};

/// Collects report JSON files: explicit files as given, directories searched
/// recursively, each directory's entries in name order.
fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_dir() {
        let mut children: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_at(path))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_at(path))?;
        children.sort();
        for child in children {
            if child.is_dir() || child.extension().is_some_and(|e| e == "json") {
                collect(&child, out)?;
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Reads every report under `paths` and renders the merged CSV. JSON files
/// that are not reports (manifests, timings) are skipped when found by a
/// directory search.
pub fn cmd_report(paths: &[PathBuf]) -> Result<(Vec<BoundReport>, String), CliError> {
    let mut reports = Vec::new();
    for p in paths {
        let explicit = !p.is_dir();
        let mut files = Vec::new();
        collect(p, &mut files)?;
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(io_at(&f))?;
            match BoundReport::from_json(&text) {
                Ok(r) => reports.push(r),
                Err(e) if explicit => return Err(CliError::Config(format!("{}: not a bound report: {e}", f.display()))),
                Err(_) => log::debug!("skipping {}", f.display()),
            }
        }
    }
    let mut csv = String::from(BoundReport::CSV_HEADER);
    csv.push('\n');
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    Ok((reports, csv))
}
