//! Flat TOML run configuration: file values, overridden by flags.

use std::path::Path;

use entgen::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const RESOLVED_FILE: &str = "config.resolved";

/// Merges the optional config file with the flags that were given and
/// deserializes the result. Unset flags serialize to nothing, so file values
/// survive unless a flag names the same key.
pub fn resolve<F: Serialize, C: DeserializeOwned>(file: Option<&Path>, flags: &F) -> Result<C> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let overrides = toml::Table::try_from(flags).map_err(|e| Error::Usage(e.to_string()))?;
    table.extend(overrides);
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Usage(format!("config: {}", e.message())))
}

pub fn write_resolved<C: Serialize>(dir: &Path, config: &C) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = toml::to_string(config).map_err(|e| Error::Usage(e.to_string()))?;
    std::fs::write(dir.join(RESOLVED_FILE), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use serde::Deserialize;

    use super::*;

    #[derive(Serialize)]
    struct Flags {
        epochs: Option<usize>,
        seed: Option<u64>,
    }

    #[derive(Debug, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Resolved {
        epochs: usize,
        seed: u64,
        rate: f64,
    }

    impl Default for Resolved {
        fn default() -> Self {
            Resolved {
                epochs: 1,
                seed: 1,
                rate: 0.5,
            }
        }
    }

    #[test]
    fn flags_win_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epochs = 7\nseed = 3\n").unwrap();
        let r: Resolved = resolve(
            Some(&path),
            &Flags {
                epochs: None,
                seed: Some(9),
            },
        )
        .unwrap();
        assert_eq!(
            r,
            Resolved {
                epochs: 7,
                seed: 9,
                rate: 0.5
            }
        );
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epoch = 7\n").unwrap();
        let r: Result<Resolved> = resolve(
            Some(&path),
            &Flags {
                epochs: None,
                seed: None,
            },
        );
        assert!(matches!(r, Err(Error::Usage(_))));
    }
}
