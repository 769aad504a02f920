//! The `stats` subcommand: a CSV table in, one analysis result out.

use std::path::Path;

use anyhow::Context;
use rfglove_core::metrics::{Analysis, DataMatrix, StatsResult};

pub fn analyse_csv(csv_path: &Path, analysis: Analysis) -> anyhow::Result<StatsResult> {
    let file = std::fs::File::open(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let data = DataMatrix::from_csv(file).with_context(|| csv_path.display().to_string())?;
    Ok(analysis.run(&data)?)
}

pub fn analyse_to_file(csv_path: &Path, analysis: Analysis, out_path: &Path) -> anyhow::Result<StatsResult> {
    let result = analyse_csv(csv_path, analysis)?;
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    std::fs::write(out_path, text).with_context(|| format!("writing {}", out_path.display()))?;
    Ok(result)
}
