//! Delegation to a user-supplied solver command.

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use super::lp_format::{export_lp, parse_external_solution, ParseSolutionError};
use super::model::MilpModel;
use super::Solution;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("could not run `{command}`")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("solver exited with {status}: {stderr}")]
    Failed {
        status: std::process::ExitStatus,
        stderr: String,
    },
    #[error("solver printed no solution path")]
    NoSolutionPath,
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseSolutionError),
}

/// Writes the model to `workdir/model.lp`, runs `command <model path>` and
/// parses the solution file whose path is the last line the command prints.
/// Relative paths are resolved against `workdir`.
pub fn solve_external(
    model: &MilpModel,
    command: &str,
    workdir: &Path,
) -> Result<Solution, ExternalError> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or(ExternalError::EmptyCommand)?;
    let model_path = workdir.join("model.lp");
    std::fs::write(&model_path, export_lp(model)).map_err(|source| ExternalError::Io {
        path: model_path.clone(),
        source,
    })?;
    let output = Command::new(program)
        .args(parts)
        .arg(&model_path)
        .current_dir(workdir)
        .output()
        .map_err(|source| ExternalError::Spawn {
            command: command.to_string(),
            source,
        })?;
    if !output.status.success() {
        return Err(ExternalError::Failed {
            status: output.status,
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let last = stdout.lines().rev().map(str::trim).find(|l| !l.is_empty());
    let path = workdir.join(last.ok_or(ExternalError::NoSolutionPath)?);
    let text =
        std::fs::read_to_string(&path).map_err(|source| ExternalError::Io { path, source })?;
    Ok(parse_external_solution(model, &text)?)
}
