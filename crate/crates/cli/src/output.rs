use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Root seed; every random subsystem derives its own stream from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replay settings from a JSON config or from an earlier output's
    /// `# config:` header. Its values override flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Settings JSON carried by a config file: either the whole file, or the
/// `# config:` header line of a CSV output, or the `config` field of a JSON
/// output.
fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return Ok(serde_json::from_str(line)?);
    }
    let value: Value = serde_json::from_str(&text).context("config is neither JSON nor an output with a config header")?;
    Ok(value.get("config").cloned().unwrap_or(value))
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Apply `--config` on top of the parsed flags.
pub fn resolve<T: Serialize + DeserializeOwned>(command: &str, args: T, common: &Common) -> Result<T> {
    let Some(path) = &common.config else { return Ok(args) };
    let mut value = serde_json::to_value(&args)?;
    let cfg = read_config(path)?;
    if let Some(c) = cfg.get("command").and_then(Value::as_str) {
        anyhow::ensure!(c == command, "config was written by `{c}`, not `{command}`");
    }
    merge(&mut value, cfg.get("args").unwrap_or(&cfg));
    Ok(serde_json::from_value(value)?)
}

pub fn config_value<T: Serialize>(command: &str, args: &T) -> Value {
    json!({ "command": command, "args": args })
}

pub fn generated_at() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Header lines for text artifacts: timestamp first so replays differ only there.
pub fn header_lines(config: &Value) -> String {
    format!("# generated_at: {}\n# config: {}\n", generated_at(), config)
}

/// Emit rows as CSV (config and summary in `#` header lines) or as one JSON
/// document.
pub fn emit<R: Serialize>(common: &Common, config: &Value, summary: Option<Value>, rows: &[R]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    match common.format {
        Format::Csv => {
            buf.extend_from_slice(header_lines(config).as_bytes());
            if let Some(s) = &summary {
                writeln!(buf, "# summary: {s}")?;
            }
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({
                "generated_at": generated_at(),
                "config": config,
                "summary": summary,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut buf, &doc)?;
            buf.push(b'\n');
        }
    }
    match &common.out {
        Some(path) => std::fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
