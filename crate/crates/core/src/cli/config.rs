//! Flat `key=value` config files whose keys mirror the long flags of the
//! selected subcommand.

use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, ArgAction, Command};

use crate::error::{Error, Result};

/// Keys accepted in every config file besides the subcommand's own flags.
pub const GLOBAL_KEYS: [&str; 2] = ["seed", "threads"];

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parsed config: tokens to splice after the subcommand, plus the global keys.
#[derive(Clone, Debug, Default)]
pub struct Resolved {
    pub tokens: Vec<OsString>,
    pub entries: Vec<Entry>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Resolved {
    pub fn has(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.key == key)
    }
}

pub fn parse_text(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key=value, got {raw:?}", i + 1)));
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        let entry = Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        };
        // a later line overrides an earlier one
        out.retain(|e| e.key != entry.key);
        out.push(entry);
    }
    Ok(out)
}

fn accepted_keys(leaf: &Command) -> Vec<String> {
    let mut keys: Vec<String> = leaf
        .get_arguments()
        .filter(|a| !a.is_global_set())
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|k| k != "help" && k != "config" && k != "manifest")
        .collect();
    keys.extend(GLOBAL_KEYS.iter().map(|s| s.to_string()));
    keys.sort();
    keys.dedup();
    keys
}

fn parse_bool(entry: &Entry) -> Result<bool> {
    match entry.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {}: {} expects true or false, got {:?}",
            entry.line, entry.key, entry.value
        ))),
    }
}

/// Validates `entries` against `leaf` and converts them to flag tokens.
pub fn resolve(leaf: &Command, entries: Vec<Entry>) -> Result<Resolved> {
    let mut r = Resolved::default();
    for e in &entries {
        let type_error = |what: String| {
            Error::Config(format!("line {}: {}={:?}: {what}", e.line, e.key, e.value))
        };
        match e.key.as_str() {
            "seed" => {
                r.seed = Some(e.value.parse().map_err(|err| type_error(format!("{err}")))?);
                continue;
            }
            "threads" => {
                r.threads = Some(e.value.parse().map_err(|err| type_error(format!("{err}")))?);
                continue;
            }
            _ => {}
        }
        let arg = leaf
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()) && !a.is_global_set())
            .filter(|_| e.key != "help")
            .ok_or_else(|| {
                Error::Config(format!(
                    "line {}: unknown key {:?} for `{}`; accepted keys: {}",
                    e.line,
                    e.key,
                    leaf.get_name(),
                    accepted_keys(leaf).join(", ")
                ))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            if parse_bool(e)? {
                r.tokens.push(OsString::from(format!("--{}", e.key)));
            }
            continue;
        }
        // a single-argument command with the same value parser
        let mut probe_arg = Arg::new("value")
            .long("value")
            .value_parser(arg.get_value_parser().clone())
            .allow_hyphen_values(true)
            .action(ArgAction::Append);
        if let Some(d) = arg.get_value_delimiter() {
            probe_arg = probe_arg.value_delimiter(d);
        }
        Command::new("config")
            .no_binary_name(true)
            .arg(probe_arg)
            .try_get_matches_from([OsString::from(format!("--value={}", e.value))])
            .map_err(|err| type_error(err.kind().to_string()))?;
        r.tokens.push(OsString::from(format!("--{}={}", e.key, e.value)));
    }
    r.entries = entries;
    Ok(r)
}

pub fn load(path: &Path, leaf: &Command) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    resolve(leaf, parse_text(&text)?)
}

/// Index just after the last subcommand token of `path` in `argv`. Only
/// global options may precede a subcommand name.
pub fn leaf_index(argv: &[OsString], path: &[String], globals_with_value: &[&str]) -> usize {
    let mut pos = 1;
    for name in path {
        while pos < argv.len() && argv[pos].to_str() != Some(name.as_str()) {
            let takes_value = argv[pos]
                .to_str()
                .is_some_and(|t| globals_with_value.contains(&t));
            pos += if takes_value { 2 } else { 1 };
        }
        pos += 1;
    }
    pos.min(argv.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf() -> Command {
        Command::new("eval")
            .arg(Arg::new("alpha").long("alpha").value_parser(clap::value_parser!(f64)))
            .arg(
                Arg::new("t")
                    .long("t")
                    .value_delimiter(',')
                    .value_parser(clap::value_parser!(f64)),
            )
            .arg(Arg::new("paper-literal").long("paper-literal").action(ArgAction::SetTrue))
    }

    #[test]
    fn empty_file_gives_no_tokens() {
        let r = resolve(&leaf(), parse_text("# nothing\n\n").unwrap()).unwrap();
        assert!(r.tokens.is_empty());
        assert!(r.seed.is_none());
    }

    #[test]
    fn keys_map_to_flags() {
        let text = "alpha = 0.5\nt=0.25,0.5\npaper_literal=true\nseed=9 # trailing\n";
        let r = resolve(&leaf(), parse_text(text).unwrap()).unwrap();
        assert_eq!(r.tokens, vec!["--alpha=0.5", "--t=0.25,0.5", "--paper-literal"]);
        assert_eq!(r.seed, Some(9));
    }

    #[test]
    fn unknown_key_lists_accepted() {
        let err = resolve(&leaf(), parse_text("beta=1").unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta") && msg.contains("alpha, paper-literal, seed, t, threads"), "{msg}");
    }

    #[test]
    fn type_mismatch_names_line() {
        let err = resolve(&leaf(), parse_text("\nalpha=half").unwrap()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = resolve(&leaf(), parse_text("paper_literal=maybe").unwrap()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn leaf_position_skips_globals() {
        let argv: Vec<OsString> = ["nl", "--seed", "mc", "mc", "--threads", "2", "sigma", "--n", "5"]
            .iter()
            .map(OsString::from)
            .collect();
        let path = vec!["mc".to_string(), "sigma".to_string()];
        assert_eq!(leaf_index(&argv, &path, &["--seed", "--threads"]), 7);
    }
}
