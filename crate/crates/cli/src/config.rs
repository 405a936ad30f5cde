//! Key/value configuration files with command-line override semantics:
//! flags win over the file, the file wins over environment fallbacks, and
//! built-in defaults apply last. Format: one `key value...` record per
//! line, `#` comments and blank lines ignored.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

pub const SEED_ENV_VAR: &str = "RUNWAYSEQ_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, Vec<String>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace().map(str::to_string);
            let key = tokens.next().unwrap();
            let args: Vec<String> = tokens.collect();
            if args.is_empty() {
                bail!(
                    "{}:{}: key {key:?} has no value",
                    path.display(),
                    lineno + 1
                );
            }
            values.insert(key, args);
        }
        Ok(FileConfig { values })
    }

    fn single(&self, key: &str) -> Result<Option<&str>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(args) if args.len() == 1 => Ok(Some(&args[0])),
            Some(args) => bail!("config key {key:?} expects one value, found {}", args.len()),
        }
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.single(key)? {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key {key:?} has invalid value {raw:?}")),
        }
    }

    /// Three-way split fractions: `split 0.7 0.2 0.1`.
    pub fn split(&self) -> Result<Option<(f64, f64, f64)>> {
        match self.values.get("split") {
            None => Ok(None),
            Some(args) if args.len() == 3 => {
                let parse = |s: &String| -> Result<f64> {
                    s.parse()
                        .map_err(|_| anyhow::anyhow!("bad split fraction {s:?}"))
                };
                Ok(Some((parse(&args[0])?, parse(&args[1])?, parse(&args[2])?)))
            }
            Some(args) => bail!(
                "config key \"split\" expects three fractions, found {}",
                args.len()
            ),
        }
    }
}

/// Seed precedence: flag, then config file, then RUNWAYSEQ_SEED, then 42.
pub fn resolve_seed(flag: Option<u64>, cfg: &FileConfig) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = cfg.get::<u64>("seed")? {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw
            .parse()
            .with_context(|| format!("{SEED_ENV_VAR} has invalid value {raw:?}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Flag, then config file, then the built-in default.
pub fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(cfg.get::<T>(key)?.unwrap_or(default))
}
