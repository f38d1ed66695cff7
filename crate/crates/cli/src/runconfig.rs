//! Run configuration files: a flat TOML table with the training keys plus
//! `output_dir`. Relative paths are taken from the file's directory.

use std::path::{Path, PathBuf};

use qdgen::engine::TrainingConfig;
use toml::{Table, Value};

use crate::exit::{Failure, CONFIG};

/// Keys that only the command line uses.
const CLI_KEYS: [&str; 1] = ["output_dir"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfigFile {
    pub training: TrainingConfig,
    pub output_dir: Option<PathBuf>,
}

fn check_integers(table: &Table, prefix: &str) -> Result<(), Failure> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Integer(i) if *i < 0 => {
                return Err(Failure::config(&key, format!("{i} is negative")));
            }
            Value::Table(t) => check_integers(t, &key)?,
            _ => {}
        }
    }
    Ok(())
}

pub fn parse_run_config(text: &str, base_dir: &Path) -> Result<RunConfigFile, Failure> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Failure::new(CONFIG, format!("config is not valid TOML: {e}")))?;
    check_integers(&table, "")?;
    let output_dir = match table.remove(CLI_KEYS[0]) {
        None => None,
        Some(Value::String(s)) => Some(base_dir.join(s)),
        Some(_) => return Err(Failure::config("output_dir", "must be a string")),
    };
    let explicit_dataset = table.contains_key("dataset");
    let mut training: TrainingConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::new(CONFIG, format!("config: {}", e.message())))?;
    if explicit_dataset {
        training.dataset = base_dir.join(&training.dataset);
    }
    training.validate()?;
    Ok(RunConfigFile { training, output_dir })
}

pub fn load_run_config(path: &Path) -> Result<RunConfigFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(CONFIG, format!("cannot read config {}: {e}", path.display())))?;
    parse_run_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfigFile, Failure> {
        parse_run_config(text, Path::new("/base"))
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse("n_qubits = 6\ndataset = \"toy.smi\"\n[cobyla]\nmax_evals = 50\n").unwrap();
        assert_eq!(c.training.n_qubits, 6);
        assert_eq!(c.training.cobyla.max_evals, 50);
        assert_eq!(c.training.dataset, Path::new("/base/toy.smi"));
        assert_eq!(c.training.hidden_dim, TrainingConfig::default().hidden_dim);
        assert!(c.output_dir.is_none());
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("n_qubits = -4", "n_qubits"),
            ("[cobyla]\nmax_evals = -1", "cobyla.max_evals"),
            ("hidden_dim = 0", "hidden_dim"),
            ("epochs_lstm = 0\nepochs_qcbm = 0", "epochs_lstm"),
            ("n_qubit = 4", "n_qubit"),
        ] {
            let e = parse(text).unwrap_err();
            assert_eq!(e.code, CONFIG);
            assert!(e.message.contains(key), "{text}: {}", e.message);
        }
    }
}
