use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use bioevent_core::report::{Report, RunManifest, TOOL_VERSION};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::args::Format;

/// A finished command: its structured document, its flat tables and the
/// facts needed for the run manifest.
pub struct Output {
    command: String,
    structured: Option<String>,
    /// (file name, bytes); the first is what tabular stdout shows.
    tables: Vec<(String, Vec<u8>)>,
    config_digest: String,
    inputs: BTreeMap<String, String>,
}

impl Output {
    pub fn new<T: Serialize>(report: &Report<T>, tables: Vec<(String, Vec<u8>)>) -> Result<Self> {
        let mut json = report.to_json()?;
        json.push('\n');
        Ok(Self {
            command: report.command.clone(),
            structured: Some(json),
            tables,
            config_digest: report.config_digest.clone(),
            inputs: report.inputs.clone(),
        })
    }

    /// Output that is a single file in one fixed format.
    pub fn raw(
        command: &str,
        name: String,
        bytes: Vec<u8>,
        inputs: BTreeMap<String, String>,
        config_digest: String,
    ) -> Self {
        Self {
            command: command.to_string(),
            structured: None,
            tables: vec![(name, bytes)],
            config_digest,
            inputs,
        }
    }

    fn manifest(&self, timestamp: &str) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            config_digest: self.config_digest.clone(),
            input_digests: self.inputs.clone(),
            tool_version: TOOL_VERSION.to_string(),
            timestamp: timestamp.to_string(),
        }
    }

    fn files(&self, format: Format) -> Vec<(String, &[u8])> {
        match (&self.structured, format) {
            (Some(json), Format::Structured) => {
                vec![(format!("{}.json", self.command), json.as_bytes())]
            }
            _ => self
                .tables
                .iter()
                .map(|(n, b)| (n.clone(), b.as_slice()))
                .collect(),
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Writes outputs under `out` with a timestamped manifest, or prints the
/// primary document to stdout.
pub fn emit(outputs: &[Output], format: Format, out: Option<&Path>) -> Result<()> {
    let Some(dir) = out else {
        let mut stdout = std::io::stdout().lock();
        for o in outputs {
            let files = o.files(format);
            if let Some((_, bytes)) = files.first() {
                stdout.write_all(bytes)?;
            }
            for (name, _) in files.iter().skip(1) {
                log::info!("{name} not shown; pass --out DIR to write every table");
            }
        }
        return Ok(());
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let timestamp = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    for o in outputs {
        for (name, bytes) in o.files(format) {
            write_file(dir, &name, bytes)?;
        }
    }
    let manifest = match outputs {
        [one] => serde_json::to_string_pretty(&one.manifest(&timestamp))?,
        many => serde_json::to_string_pretty(
            &many
                .iter()
                .map(|o| o.manifest(&timestamp))
                .collect::<Vec<_>>(),
        )?,
    };
    write_file(dir, "manifest.json", format!("{manifest}\n").as_bytes())
}
