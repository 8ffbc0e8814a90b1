//! Flat `key = value` configuration files.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment (full
//! line or trailing); blank lines are ignored; keys are
//! `snake_case`; values keep internal whitespace so lists are written
//! space-separated (`lambda_grid = 10 20 40 80`). There is no nesting.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{HarnessError, Result};

pub type Config = BTreeMap<String, String>;

pub fn parse_str(text: &str) -> Result<Config> {
    let mut map = Config::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(HarnessError::Config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

/// Typed accessors with uniform error messages.
pub struct Reader<'a> {
    map: &'a Config,
}

impl<'a> Reader<'a> {
    pub fn new(map: &'a Config) -> Self {
        Self { map }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| HarnessError::Config(format!("missing required key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    HarnessError::Config(format!("key '{key}': '{v}' is not a number"))
                })
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    HarnessError::Config(format!("key '{key}': '{v}' is not an integer"))
                })
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(HarnessError::Config(format!(
                    "key '{key}': '{v}' is not a boolean"
                ))),
            })
            .transpose()
    }

    /// Space-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| {
                            HarnessError::Config(format!(
                                "key '{key}': '{tok}' is not a number"
                            ))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_whitespace() {
        let cfg = parse_str(
            "# coverage run\nn = 5000\nlambda_grid = 10 20 40 80  # octaves\n\nmu = sin_pi_prod\n",
        )
        .unwrap();
        let r = Reader::new(&cfg);
        assert_eq!(r.usize("n").unwrap(), Some(5000));
        assert_eq!(r.f64_list("lambda_grid").unwrap().unwrap(), vec![10.0, 20.0, 40.0, 80.0]);
        assert_eq!(r.raw("mu"), Some("sin_pi_prod"));
        assert_eq!(r.raw("absent"), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = parse_str("n 5000").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(parse_str("= 3").is_err());
    }

    #[test]
    fn typed_errors_name_the_key() {
        let cfg = parse_str("n = many").unwrap();
        let err = Reader::new(&cfg).usize("n").unwrap_err();
        assert!(err.to_string().contains("'n'"));
    }
}
