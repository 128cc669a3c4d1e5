//! Flat `key = value` run configuration files.
//!
//! One assignment per line; `#` starts a comment; keys are matched with `-`
//! and `_` treated alike, so `init-scale` and `init_scale` are the same key.
//! Command-line flags take precedence over values read from a file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{BrnnError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BrnnError::parse(line_no, format!("expected 'key = value', got '{line}'"))
            })?;
            let key = normalize(key);
            if key.is_empty() {
                return Err(BrnnError::parse(line_no, "empty key"));
            }
            if entries
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(BrnnError::parse(line_no, format!("duplicate key '{key}'")));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ConfigFile::parse(&fs::read_to_string(path)?)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(&normalize(key)) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|_| BrnnError::parse(*line, format!("invalid value '{raw}' for '{key}'"))),
        }
    }

    /// Keys not in `known`, for reporting typos.
    pub fn unknown_keys<'a>(&'a self, known: &[&str]) -> Vec<&'a str> {
        let known: Vec<String> = known.iter().map(|k| normalize(k)).collect();
        self.entries
            .keys()
            .filter(|k| !known.contains(k))
            .map(String::as_str)
            .collect()
    }
}

/// `flag`, else the file's `key`, else `default`.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    file: Option<&ConfigFile>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(f) = file {
        if let Some(v) = f.get(key)? {
            return Ok(v);
        }
    }
    Ok(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let f =
            ConfigFile::parse("# run\neta = 0.05\nagg=median  # trailing\n\ninit-scale = 0.2\n")
                .unwrap();
        assert_eq!(f.get::<f64>("eta").unwrap(), Some(0.05));
        assert_eq!(f.get::<String>("agg").unwrap().as_deref(), Some("median"));
        assert_eq!(f.get::<f64>("init_scale").unwrap(), Some(0.2));
        assert_eq!(resolve(Some(0.1), Some(&f), "eta", 1.0).unwrap(), 0.1);
        assert_eq!(resolve(None, Some(&f), "eta", 1.0).unwrap(), 0.05);
        assert_eq!(resolve(None, Some(&f), "epochs", 7usize).unwrap(), 7);
        assert_eq!(f.unknown_keys(&["eta", "agg"]), vec!["init_scale"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            ConfigFile::parse("eta = 1\nbogus line\n"),
            Err(BrnnError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ConfigFile::parse("eta = 1\neta = 2\n"),
            Err(BrnnError::Parse { line: 2, .. })
        ));
        let f = ConfigFile::parse("\nepochs = many\n").unwrap();
        assert!(matches!(
            f.get::<usize>("epochs"),
            Err(BrnnError::Parse { line: 2, .. })
        ));
    }
}
