use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use powerq_core::Caps;

/// Settings shared by every subcommand. Built from defaults, then the config
/// file, then command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub caps: Caps,
    pub output: Option<PathBuf>,
    pub verbosity: u8,
    pub seed: u64,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Config::default();
        cfg.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", n + 1);
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<usize> {
            value
                .parse::<usize>()
                .with_context(|| format!("{key}: {value:?} is not a non-negative integer"))
        };
        match key {
            "enumeration" => self.caps.enumeration = num()?,
            "terms" => self.caps.terms = num()?,
            "depth" => self.caps.depth = num()?,
            "cosets" => self.caps.cosets = num()?,
            "truncation" => self.caps.truncation = num()?,
            "word_length" => self.caps.word_length = num()?,
            "seed" => self.seed = value.parse().with_context(|| format!("seed: {value:?}"))?,
            "verbosity" => self.verbosity = value.parse().with_context(|| format!("verbosity: {value:?}"))?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }
}
