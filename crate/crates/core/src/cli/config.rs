//! Flat `key=value` configuration files.
//!
//! Keys are long flag names without the leading dashes. Entries are spliced
//! into the argument list ahead of the command-line flags, so flags given on
//! the command line win.

use std::ffi::OsString;

use crate::{Error, Result};

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(k + 1, format!("expected key=value, got {line:?}")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::parse(k + 1, format!("invalid key {key:?}")));
        }
        out.push((key.replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

/// Arguments equivalent to the configuration entries.
pub fn config_args(entries: &[(String, String)]) -> Vec<OsString> {
    entries
        .iter()
        .map(|(k, v)| OsString::from(format!("--{k}={v}")))
        .collect()
}

/// Path given with `--config`, if any.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(OsString::from(p));
        }
    }
    None
}

/// Insert `extra` right after the subcommand name.
pub fn splice_after_subcommand(argv: &[OsString], extra: Vec<OsString>) -> Vec<OsString> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if s.starts_with('-') {
            i += 1;
            continue;
        }
        break;
    }
    let at = (i + 1).min(argv.len());
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}
