//! `key = value` config files merged beneath command-line flags.
//!
//! Each key names a long flag of the subcommand (`epochs = 50` becomes
//! `--epochs 50`). Boolean flags take `true`/`false`. Blank lines and lines
//! starting with `#` are ignored. The generated flags are placed before the
//! user's own, and since later occurrences win, flags override the file.

use std::path::Path;

use crate::CliError;

/// Turns config-file text into flag arguments.
pub fn parse(text: &str) -> Result<Vec<String>, CliError> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key == "config" {
            return Err(CliError::Config(format!("config line {}: invalid key {key:?}", i + 1)));
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

pub fn load(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

/// Removes a global `--config PATH` (or `--config=PATH`) from `argv` and
/// splices the file's flags in right after the subcommand name.
pub fn merge(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--" {
            break;
        }
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                return Err(CliError::Usage("--config needs a path".into()));
            }
            path = Some(argv.remove(i + 1));
            argv.remove(i);
            continue;
        }
        if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            argv.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(argv) };
    let extra = load(Path::new(&path))?;
    let at = argv
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| CliError::Usage("--config given without a subcommand".into()))?;
    argv.splice(at..at, extra);
    Ok(argv)
}
