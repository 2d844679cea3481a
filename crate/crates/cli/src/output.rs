//! Tab-separated and JSON writers, and header parsing for replays.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

const CONFIG_BEGIN: &str = "# [config]";
const CONFIG_END: &str = "# [end config]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Table {
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
    /// (quantity, value, unit)
    Report(Vec<(String, String, String)>),
}

impl Body {
    pub fn table(columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Body::Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Body::Table { columns, rows } => json!({ "columns": columns, "rows": rows }),
            Body::Report(rows) => Value::Array(
                rows.iter()
                    .map(|(q, v, u)| json!({ "quantity": q, "value": v, "unit": u }))
                    .collect(),
            ),
        }
    }

    fn to_tsv(&self, out: &mut String) {
        match self {
            Body::Table { columns, rows } => {
                out.push_str(&columns.join("\t"));
                out.push('\n');
                for row in rows {
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    out.push_str(&cells.join("\t"));
                    out.push('\n');
                }
            }
            Body::Report(rows) => {
                out.push_str("quantity\tvalue\tunit\n");
                for (q, v, u) in rows {
                    let _ = writeln!(out, "{q}\t{v}\t{u}");
                }
            }
        }
    }
}

/// Everything one subcommand produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub command: &'static str,
    /// (file stem, body)
    pub files: Vec<(String, Body)>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

fn header(command: &str, cfg: &RunConfig) -> String {
    let mut out = format!("# qfc {command}\n# seed = {}\n{CONFIG_BEGIN}\n", cfg.seed);
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str(CONFIG_END);
    out.push('\n');
    out
}

/// Writes the artifacts and returns the paths written.
pub fn write(artifacts: &Artifacts, cfg: &RunConfig, format: Format, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    match format {
        Format::Tsv => {
            for (stem, body) in &artifacts.files {
                let mut text = header(artifacts.command, cfg);
                body.to_tsv(&mut text);
                let path = out_dir.join(format!("{stem}.tsv"));
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
        }
        Format::Json => {
            let files: serde_json::Map<String, Value> = artifacts
                .files
                .iter()
                .map(|(stem, body)| (stem.clone(), body.to_json()))
                .collect();
            let doc = json!({
                "command": artifacts.command,
                "seed": cfg.seed,
                "config": cfg,
                "results": files,
            });
            let path = out_dir.join(format!("{}.json", artifacts.command.replace('-', "_")));
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Command, configuration and format recovered from an output file.
pub fn read_provenance(path: &Path) -> Result<(String, RunConfig, Format)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let command = doc["command"]
            .as_str()
            .ok_or_else(|| anyhow!("{} has no command field", path.display()))?
            .to_string();
        let cfg: RunConfig = serde_json::from_value(doc["config"].clone())
            .with_context(|| format!("config block of {}", path.display()))?;
        return Ok((command, cfg, Format::Json));
    }

    let mut lines = text.lines();
    let command = lines
        .next()
        .and_then(|l| l.strip_prefix("# qfc "))
        .ok_or_else(|| anyhow!("{} does not start with a qfc header", path.display()))?
        .trim()
        .to_string();
    let mut toml_text = String::new();
    let mut inside = false;
    for line in lines {
        if line == CONFIG_BEGIN {
            inside = true;
        } else if line == CONFIG_END {
            let cfg = RunConfig::parse(&toml_text).with_context(|| format!("config block of {}", path.display()))?;
            return Ok((command, cfg, Format::Tsv));
        } else if inside {
            let stripped = line
                .strip_prefix("# ")
                .or_else(|| line.strip_prefix('#'))
                .unwrap_or(line);
            toml_text.push_str(stripped);
            toml_text.push('\n');
        }
    }
    bail!("{} has no complete config block", path.display())
}
