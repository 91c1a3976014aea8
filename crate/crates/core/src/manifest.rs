//! Plain-text `key=value` run manifests.

use std::fmt::Display;

use crate::error::{Error, Result};

/// Ordered key-value record; keys may repeat.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        debug_assert!(
            !key.contains('=') && !key.contains('\n'),
            "bad manifest key {key:?}"
        );
        let value = value.to_string().replace('\n', " ");
        self.entries.push((key, value));
        self
    }

    /// Appends every line of a `key=value` block, e.g. [`crate::losses::LossSpec::to_kv`],
    /// with keys prefixed by `prefix.`.
    pub fn push_block(&mut self, prefix: &str, block: &str) -> Result<&mut Self> {
        for (k, v) in parse_lines(block)? {
            self.push(format!("{prefix}.{k}"), v);
        }
        Ok(self)
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self {
            entries: parse_lines(text)?,
        })
    }
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse {
                    what: "manifest".into(),
                    reason: format!("line `{line}` has no `=`"),
                })
        })
        .collect()
}
