use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use clap::{Command, CommandFactory};

use crate::args::Cli;
use crate::Failure;

/// Appends the settings of a `--config` file to `args` as long flags,
/// skipping keys given explicitly or conflicting with an explicit flag.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(sub_name) = args.get(1) else { return Ok(args) };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(sub_name) else { return Ok(args) };
    let Some(path) = config_path(&args[2..]) else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    let entries = parse_config(&text, Path::new(&path))?;

    let longs: HashMap<&str, &clap::Arg> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l, a)))
        .filter(|(l, _)| !matches!(*l, "config" | "help"))
        .collect();
    let explicit: Vec<&clap::Arg> = args[2..]
        .iter()
        .filter_map(|t| t.strip_prefix("--"))
        .filter_map(|t| longs.get(t.split('=').next().unwrap_or(t)).copied())
        .collect();

    let mut merged = args.clone();
    for (line, key, value) in entries {
        let Some(arg) = longs.get(key.as_str()) else {
            return Err(Failure::Usage(format!("{path}:{line}: unknown key `{key}`")));
        };
        if explicit.iter().any(|e| e.get_id() == arg.get_id() || excludes(sub, e, arg)) {
            continue;
        }
        if arg.get_action().takes_values() {
            merged.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" => merged.push(format!("--{key}")),
                "false" => {}
                _ => {
                    return Err(Failure::Usage(format!(
                        "{path}:{line}: `{key}` takes true or false, got `{value}`"
                    )))
                }
            }
        }
    }
    Ok(merged)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(t) = it.next() {
        if t == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = t.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn excludes(sub: &Command, a: &clap::Arg, b: &clap::Arg) -> bool {
    if sub.get_arg_conflicts_with(a).iter().any(|c| c.get_id() == b.get_id()) {
        return true;
    }
    sub.get_groups().any(|g| {
        g.get_args().any(|id| id == a.get_id())
            && g.get_args().any(|id| id == b.get_id())
    })
}

/// `(line, key, value)` for every setting; `#` starts a comment.
fn parse_config(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>, Failure> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            )));
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if !seen.insert(key.clone()) {
            return Err(Failure::Usage(format!(
                "{}:{}: duplicate key `{key}`",
                path.display(),
                i + 1
            )));
        }
        out.push((i + 1, key, value));
    }
    Ok(out)
}
