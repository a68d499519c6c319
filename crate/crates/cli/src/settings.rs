//! `--config` TOML overrides.
//!
//! ```toml
//! [encoder]      # any EncoderConfig field except vocab_size
//! hidden = 32
//! [train]        # TrainConfig, with Adam settings under [train.adam]
//! epochs = 5
//! [pretrain]     # PretrainConfig
//! chunk_len = 16
//! [decode]
//! relation_threshold = 0.5
//! ```
//!
//! Tables are laid over the built-in defaults key by key; command-line
//! flags take precedence over both.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Default, Clone)]
pub struct Settings {
    table: toml::Table,
}

const SECTIONS: [&str; 4] = ["encoder", "train", "pretrain", "decode"];

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        for (k, v) in &table {
            if !SECTIONS.contains(&k.as_str()) {
                bail!("unknown section [{k}]; expected one of {}", SECTIONS.join(", "));
            }
            if !v.is_table() {
                bail!("[{k}] must be a table");
            }
        }
        Ok(Settings { table })
    }

    /// `base` with the keys of section `name` replaced.
    pub fn overlay<T: Serialize + DeserializeOwned>(&self, name: &str, base: T) -> Result<T> {
        let Some(section) = self.table.get(name).and_then(|v| v.as_table()) else {
            return Ok(base);
        };
        let mut merged = toml::Table::try_from(&base).context("serializing defaults")?;
        merge(&mut merged, section, name)?;
        toml::Value::Table(merged)
            .try_into()
            .with_context(|| format!("invalid [{name}] section"))
    }
}

fn merge(dst: &mut toml::Table, src: &toml::Table, path: &str) -> Result<()> {
    for (k, v) in src {
        match (dst.get_mut(k), v) {
            (Some(toml::Value::Table(d)), toml::Value::Table(s)) => merge(d, s, &format!("{path}.{k}"))?,
            (Some(slot), _) => *slot = v.clone(),
            (None, _) => bail!("unknown key {path}.{k}"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanmask::model::{EncoderConfig, TrainConfig};

    #[test]
    fn overlays_nested_keys() {
        let s = Settings::parse("[train]\nepochs = 3\n[train.adam]\nlr = 0.01\n").unwrap();
        let t = s.overlay("train", TrainConfig::default()).unwrap();
        assert_eq!(t.epochs, 3);
        assert_eq!(t.adam.lr, 0.01);
        assert_eq!(t.adam.beta1, 0.9);
        assert_eq!(t.batch_size, 15);
    }

    #[test]
    fn missing_section_keeps_defaults() {
        let s = Settings::parse("").unwrap();
        assert_eq!(s.overlay("encoder", EncoderConfig::desk(50)).unwrap(), EncoderConfig::desk(50));
    }

    #[test]
    fn rejects_unknown_sections_and_bad_types() {
        assert!(Settings::parse("[bogus]\nx = 1\n").is_err());
        let typo = Settings::parse("[train]\nepoch = 3\n").unwrap();
        assert!(typo.overlay("train", TrainConfig::default()).is_err());
        let s = Settings::parse("[encoder]\nhidden = \"wide\"\n").unwrap();
        assert!(s.overlay("encoder", EncoderConfig::desk(50)).is_err());
    }
}
