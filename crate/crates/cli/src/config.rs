//! `--config` files: `key = value` lines mirroring long flags. Entries are
//! appended after the command line unless the same flag is already present.

use crate::Failure;

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
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

fn has_flag(argv: &[String], flag: &str) -> bool {
    argv.iter().any(|a| {
        a == flag
            || a.strip_prefix(flag)
                .is_some_and(|rest| rest.starts_with('='))
    })
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::invalid(
                "invalid_config",
                format!("line {}: expected key=value", n + 1),
            )
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Failure::invalid(
                "invalid_config",
                format!("line {}: invalid key `{key}`", n + 1),
            ));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

pub fn merge(mut argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::invalid("invalid_config", format!("cannot read {path}: {e}")))?;
    for (key, value) in parse(&text)? {
        let flag = format!("--{key}");
        if has_flag(&argv, &flag) {
            continue;
        }
        match value.as_str() {
            "true" => argv.push(flag),
            "false" => {}
            _ => argv.push(format!("{flag}={value}")),
        }
    }
    Ok(argv)
}
