//! `key=value` config files, spliced in front of the command-line flags.

use std::collections::BTreeSet;

use crate::Failure;

/// Parses a config file: one `key=value` per line, `#` comments, blank
/// lines ignored.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let k = k.trim();
        if k.is_empty() || k == "config" {
            return Err(format!("config line {}: bad key {k:?}", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn flag_name(arg: &str) -> Option<&str> {
    let body = arg.strip_prefix("--")?;
    Some(body.split_once('=').map_or(body, |(k, _)| k))
}

/// Inserts config entries right after the subcommand. Repeated single
/// flags resolve to the last occurrence, so command-line values win. Keys
/// given on the command line at all are dropped from the file, which keeps
/// appending flags such as `--transform` from mixing both sources.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::io(format!("cannot read config {path}: {e}")))?;
    let entries = parse_config(&text).map_err(Failure::refuse)?;
    let given: BTreeSet<&str> = argv.iter().filter_map(|a| flag_name(a)).collect();
    let mut merged: Vec<String> = argv.iter().take(2).cloned().collect();
    for (k, v) in &entries {
        if !given.contains(k.as_str()) {
            merged.push(format!("--{k}={v}"));
        }
    }
    merged.extend(argv.iter().skip(2).cloned());
    Ok(merged)
}
