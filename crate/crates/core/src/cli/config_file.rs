use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `key = value` lines; `#` starts a comment. Keys mirror long flag names,
/// with `_` and `-` interchangeable.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: 1,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            values.insert(normalize(key), value.trim().to_string());
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    /// The flag value when given, else the file value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let key = normalize(key);
        let from_file = self.values.get(&key);
        if from_file.is_some() {
            self.used.borrow_mut().insert(key.clone());
        }
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| Error::Config(format!("config key '{key}': cannot parse '{raw}': {e}")))
            })
            .transpose()
    }

    /// Fails on keys no subcommand option consumed.
    pub fn check_all_used(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ConfigFile::parse("rank = 3\ntol_outer = 1e-5 # comment\n\nseed=9", Path::new("c")).unwrap();
        assert_eq!(file.pick::<usize>(None, "rank").unwrap(), Some(3));
        assert_eq!(file.pick::<usize>(Some(5), "rank").unwrap(), Some(5));
        assert_eq!(file.pick::<f64>(None, "tol-outer").unwrap(), Some(1e-5));
        assert_eq!(file.pick::<f64>(None, "eta").unwrap(), None);
        assert!(file.check_all_used().is_err());
        file.pick::<u64>(None, "seed").unwrap();
        assert!(file.check_all_used().is_ok());
    }

    #[test]
    fn bad_values_and_lines_are_reported() {
        let file = ConfigFile::parse("rank = three", Path::new("c")).unwrap();
        assert!(matches!(file.pick::<usize>(None, "rank"), Err(Error::Config(_))));
        assert!(matches!(ConfigFile::parse("rank 3", Path::new("c")), Err(Error::Parse { row: 1, .. })));
    }
}
