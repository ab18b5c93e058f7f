//! Artifact writers. Every artifact starts with the resolved config and the
//! code version.

use std::io::Write;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Echo<'a> {
    version: &'a str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    version: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

fn write_out(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Numerical(e.to_string()))
        }
    }
}

pub fn emit_json<T: Serialize>(cfg: &RunConfig, result: &T) -> Result<(), CliError> {
    let art = Artifact { version: VERSION, config: cfg, result };
    let mut text = serde_json::to_string_pretty(&art).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write_out(cfg, &text)
}

/// CSV with a leading `# {version, config}` comment line and optional
/// trailing `# key: value` lines.
pub fn emit_csv(cfg: &RunConfig, header: &[&str], rows: &[Vec<String>], trailer: &[String]) -> Result<(), CliError> {
    let echo = serde_json::to_string(&Echo { version: VERSION, config: cfg }).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Numerical(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut text = format!("# {echo}\n{body}");
    for t in trailer {
        text.push_str(&format!("# {t}\n"));
    }
    write_out(cfg, &text)
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}
