//! Flat `key = value` configuration files mirroring the long flag names.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parsed configuration; entries are consumed as they are applied so leftovers
/// can be reported as unknown keys.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key = value", n + 1)));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }

    /// Fill `slot` from `key` unless a flag already set it.
    pub fn apply<T>(&mut self, key: &str, slot: &mut Option<T>) -> Result<(), CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some((line, v)) = self.entries.remove(key) {
            if slot.is_none() {
                let parsed = v
                    .parse()
                    .map_err(|e| CliError::Usage(format!("config line {line}: bad value for `{key}`: {e}")))?;
                *slot = Some(parsed);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((k, (line, _))) => Err(CliError::Usage(format!("config line {line}: unknown key `{k}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_and_unknown_keys_fail() {
        let mut c = ConfigFile::parse("# run\nseed = 7\n\ngrid=8x16x16\n").unwrap();
        let mut seed: Option<u64> = Some(3);
        let mut grid: Option<String> = None;
        c.apply("seed", &mut seed).unwrap();
        c.apply("grid", &mut grid).unwrap();
        c.finish().unwrap();
        assert_eq!(seed, Some(3));
        assert_eq!(grid.as_deref(), Some("8x16x16"));

        let mut c = ConfigFile::parse("seed = 1\ncolour = red\n").unwrap();
        c.apply("seed", &mut None::<u64>).unwrap();
        assert!(c.finish().unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn malformed_lines() {
        assert!(ConfigFile::parse("seed 1").is_err());
        assert!(ConfigFile::parse("= 1").is_err());
        assert!(ConfigFile::parse("a=1\na=2").is_err());
        let mut c = ConfigFile::parse("seed = x").unwrap();
        assert!(c.apply("seed", &mut None::<u64>).is_err());
    }
}
