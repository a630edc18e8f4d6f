//! Report files: every JSON report carries `schema_version`, the command name
//! and the overall `passed` flag next to the command-specific body.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use nisynth_core::sim::Trajectory;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    passed: bool,
    #[serde(flatten)]
    report: &'a T,
}

pub fn report_json<T: Serialize>(command: &str, passed: bool, report: &T) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        passed,
        report,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn write_report<T: Serialize>(dir: &Path, command: &str, passed: bool, report: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{command}.json"));
    fs::write(&path, report_json(command, passed, report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    traj.write_csv(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}
