//! Layered `key = value` configuration: shipped defaults, then an optional
//! file, then command-line overrides. Only keys present in the defaults are
//! accepted, so typos fail loudly instead of being ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;

pub const DEFAULTS: &str = include_str!("../configs/defaults.ini");

#[derive(Debug, Clone)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn parse(text: &str, origin: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let ini = Ini::load_from_str(text).with_context(|| format!("malformed configuration in {origin}"))?;
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (section, props) in ini.iter() {
        let entry = out.entry(section.unwrap_or("").to_string()).or_default();
        for (k, v) in props.iter() {
            entry.insert(k.to_string(), v.to_string());
        }
    }
    Ok(out)
}

impl Config {
    pub fn defaults() -> Self {
        Self {
            sections: parse(DEFAULTS, "built-in defaults").expect("shipped defaults parse"),
        }
    }

    pub fn version(&self) -> &str {
        self.sections.get("").and_then(|s| s.get("version")).map_or("unversioned", String::as_str)
    }

    /// Apply the sections of a file on top of the current values.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let origin = path.display().to_string();
        for (section, props) in parse(&text, &origin)? {
            for (k, v) in props {
                self.set(&section, &k, &v).with_context(|| format!("in {origin}"))?;
            }
        }
        Ok(())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let Some(props) = self.sections.get_mut(section) else {
            bail!("unknown section [{section}]");
        };
        match props.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => bail!("unknown key `{key}` in [{section}]"),
        }
    }

    /// `key = value` lines of one section, in key order.
    pub fn dump(&self, section: &str) -> Vec<String> {
        let mut out = vec![format!("[{section}]")];
        if let Some(props) = self.sections.get(section) {
            out.extend(props.iter().map(|(k, v)| format!("{k} = {v}")));
        }
        out
    }

    #[cfg(test)]
    pub fn has_section(&self, section: &str) -> bool {
        !section.is_empty() && self.sections.contains_key(section)
    }

    pub fn raw(&self, section: &str, key: &str) -> Result<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
            .ok_or_else(|| anyhow!("missing key `{key}` in [{section}]"))
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key)?;
        raw.parse().map_err(|e| anyhow!("[{section}] {key} = {raw}: {e}"))
    }

    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("[{section}] {key} = {raw}: {e}")))
            .collect()
    }

    pub fn pairs<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<(T, T)>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|p| {
                let (a, b) = p.split_once(':').ok_or_else(|| anyhow!("[{section}] {key}: `{p}` is not a pair a:b"))?;
                let parse = |s: &str| s.trim().parse::<T>().map_err(|e| anyhow!("[{section}] {key} = {raw}: {e}"));
                Ok((parse(a)?, parse(b)?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_experiment() {
        let c = Config::defaults();
        assert_eq!(c.version(), "kfl-defaults-1");
        for s in crate::EXPERIMENTS {
            assert!(c.has_section(s), "{s}");
        }
        assert_eq!(c.list::<u32>("counting-check", "K").unwrap(), vec![1, 2, 4]);
        assert_eq!(c.pairs::<u32>("bilinear-check", "cells").unwrap()[2], (16, 4));
        assert!(c.get::<bool>("counting-check", "exact_1d").unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = Config::defaults();
        assert!(c.set("counting-check", "n", "3").is_err());
        assert!(c.set("nope", "N", "3").is_err());
        c.set("counting-check", "N", " 3 ").unwrap();
        assert_eq!(c.list::<u32>("counting-check", "N").unwrap(), vec![3]);
        assert!(c.get::<u32>("counting-check", "max_slope").is_err());
    }
}
