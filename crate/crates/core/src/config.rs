//! Plain-text `key = value` configuration files.
//!
//! Keys are the long flag names of the command they configure (`seeds`,
//! `grasp-sigma-mm`, ...). Blank lines and lines starting with `#` are
//! ignored. Flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub type Config = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<Config> {
    let mut out = Config::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Config> {
    if !path.exists() {
        return Err(Error::ArtifactMissing(path.to_path_buf()));
    }
    parse_config(&fs::read_to_string(path)?)
}

/// Appends `--key value` for every config entry that `accepts` and that
/// is not already present in `args`. Boolean entries become bare flags when
/// true and are dropped when false.
pub fn merge_into_args(args: &mut Vec<String>, config: &Config, accepts: impl Fn(&str) -> Option<bool>) -> Result<()> {
    for (key, value) in config {
        let Some(is_flag) = accepts(key) else {
            continue;
        };
        let flag = format!("--{key}");
        let given = args.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        if is_flag {
            match value.as_str() {
                "true" | "1" | "yes" => args.push(flag),
                "false" | "0" | "no" => {}
                other => return Err(Error::Config(format!("`{key}` expects true or false, got `{other}`"))),
            }
        } else {
            args.push(flag);
            args.push(value.clone());
        }
    }
    Ok(())
}
