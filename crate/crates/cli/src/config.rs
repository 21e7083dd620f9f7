//! Line-based `key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration. Every read marks its key as used; [`Config::finish`]
/// rejects whatever is left over.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    used: std::cell::RefCell<Vec<String>>,
    source: String,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "{source}:{}: expected `key = value`, got `{line}`",
                    i + 1
                )));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config(format!("{source}:{}: empty key", i + 1)));
            }
            let entry = Entry {
                value: v.trim().to_string(),
                line: i + 1,
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(CliError::config(format!(
                    "{source}:{}: key `{key}` already set on line {}",
                    i + 1,
                    prev.line
                )));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
            source: source.to_string(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self {
                source: "<defaults>".into(),
                ..Default::default()
            }),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text, &p.display().to_string())
            }
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.borrow_mut().push(key.to_string());
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value.parse().map(Some).map_err(|err| {
            CliError::config(format!(
                "{}:{}: bad value `{}` for `{key}`: {err}",
                self.source, e.line, e.value
            ))
        })
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| {
            CliError::config(format!("missing required key `{key}` in {}", self.source))
        })
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.get::<String>(key)? else {
            return Ok(None);
        };
        let line = self.entries[key].line;
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|err| {
                    CliError::config(format!(
                        "{}:{line}: bad list item `{}` for `{key}`: {err}",
                        self.source,
                        s.trim()
                    ))
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// `--seed` wins over the file; one of the two must be present.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        let from_file = self.get::<u64>("seed")?;
        flag.or(from_file).ok_or_else(|| {
            CliError::config(format!(
                "missing required key `seed` in {} (or pass --seed)",
                self.source
            ))
        })
    }

    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(k))
            .map(|(k, e)| format!("`{k}` (line {})", e.line))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "unknown key(s) in {}: {}",
                self.source,
                unknown.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# header\n a = 1 # trailing\n\nb=x,y\n", "t").unwrap();
        assert_eq!(c.require::<u32>("a").unwrap(), 1);
        assert_eq!(c.list::<String>("b").unwrap().unwrap(), vec!["x", "y"]);
        c.finish().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let c = Config::parse("a = 1\ntypo = 2\n", "t").unwrap();
        c.get::<u32>("a").unwrap();
        let err = c.finish().unwrap_err();
        assert!(err.message.contains("typo") && err.code == 2);
    }

    #[test]
    fn bad_lines_and_values() {
        assert!(Config::parse("novalue\n", "t").is_err());
        assert!(Config::parse("a = 1\na = 2\n", "t").is_err());
        let c = Config::parse("a = abc\n", "t").unwrap();
        let err = c.get::<f64>("a").unwrap_err();
        assert!(err.message.contains("t:1"), "{}", err.message);
    }

    #[test]
    fn seed_flag_overrides_and_missing_seed_named() {
        let c = Config::parse("seed = 3\n", "t").unwrap();
        assert_eq!(c.seed(Some(9)).unwrap(), 9);
        assert_eq!(c.seed(None).unwrap(), 3);
        let empty = Config::parse("", "t").unwrap();
        assert!(empty.seed(None).unwrap_err().message.contains("seed"));
    }
}
