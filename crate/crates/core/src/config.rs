//! Plain `key=value` configuration text.
//!
//! Blank lines and everything after a `#` are ignored. Keys are unique; a
//! repeated key is a parse error so that typos do not silently shadow values.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected key=value, got `{line}`"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parses a required value.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        match self.entries.get(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::parse(*line, format!("cannot parse `{key}` from `{v}`"))),
            None => Err(Error::parse(0, format!("missing required key `{key}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    /// Parses a comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::parse(*line, format!("cannot parse `{s}` in `{key}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Applies `key=value` overrides on top of the parsed entries.
    pub fn apply_overrides<'a>(
        &mut self,
        overrides: impl IntoIterator<Item = &'a str>,
    ) -> Result<()> {
        for ov in overrides {
            let (k, v) = ov
                .split_once('=')
                .ok_or_else(|| Error::parse(0, format!("override `{ov}` is not key=value")))?;
            self.entries
                .insert(k.trim().to_string(), (0, v.trim().to_string()));
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_comments() {
        let kv = KeyValues::parse("a = 1.5 # note\n\n# full comment\nb=x,y\n").unwrap();
        assert_eq!(kv.get::<f64>("a").unwrap(), 1.5);
        assert_eq!(kv.raw("b"), Some("x,y"));
        assert_eq!(
            kv.get_list::<String>("b").unwrap().unwrap(),
            vec!["x".to_string(), "y".to_string()]
        );
    }

    #[test]
    fn rejects_duplicates_with_line_number() {
        let err = KeyValues::parse("a=1\na=2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_value_reports_line() {
        let kv = KeyValues::parse("\n\nf = nope\n").unwrap();
        let err = kv.get::<f64>("f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }
}
