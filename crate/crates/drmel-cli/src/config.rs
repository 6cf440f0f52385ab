//! Flat key=value config files supplying defaults for the command flags.

use crate::{CliError, CliResult};
use std::collections::BTreeMap;
use std::path::Path;

/// Parsed `key = value` pairs; `#` starts a comment, blank lines skipped.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "input", "basis", "levels", "conf", "seed", "format", "out", "design", "reps", "n", "diff",
];

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}: line {}: expected `key = value`, found `{raw}`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}: line {}: unknown config key `{key}`",
                    path.display(),
                    lineno + 1
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Parse a levels expression: either a comma list `0.05,0.5,0.95` or a
/// range `start:end:step`. An empty string yields no levels.
pub fn parse_levels(expr: &str) -> CliResult<Vec<f64>> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Ok(Vec::new());
    }
    let mut levels = Vec::new();
    if expr.contains(':') {
        let parts: Vec<&str> = expr.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "range levels must be start:end:step, found `{expr}`"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("invalid level `{p}`")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || end < start {
            return Err(CliError::Usage(format!("bad level range `{expr}`")));
        }
        let count = ((end - start) / step).round() as usize;
        for i in 0..=count {
            let v = start + i as f64 * step;
            if v <= end + 1e-12 {
                levels.push(v);
            }
        }
    } else {
        for token in expr.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            levels.push(
                token
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("invalid level `{token}`")))?,
            );
        }
    }
    for &a in &levels {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Usage(format!("level {a} outside (0, 1)")));
        }
    }
    Ok(levels)
}
