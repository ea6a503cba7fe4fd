//! Run configuration: one JSON document, with command-line flags layered on
//! top. Relative paths in the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cfa_core::{CfaError, LabelSet, Result, Strategy, TieMode, TiePolicy, WeightSource};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemEntry {
    pub id: String,
    pub path: PathBuf,
}

impl FromStr for SystemEntry {
    type Err = CfaError;

    /// `ID=PATH`
    fn from_str(s: &str) -> Result<Self> {
        let (id, path) = s
            .split_once('=')
            .ok_or_else(|| CfaError::validation(format!("expected ID=PATH, got '{s}'")))?;
        if id.trim().is_empty() || path.trim().is_empty() {
            return Err(CfaError::validation(format!("expected ID=PATH, got '{s}'")));
        }
        Ok(SystemEntry {
            id: id.trim().to_string(),
            path: PathBuf::from(path.trim()),
        })
    }
}

/// Which weights the weighted strategies use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Ds,
    /// Individual precision@1 against the expert labels.
    Perf,
}

impl Weights {
    pub fn source(self) -> WeightSource {
        match self {
            Weights::Ds => WeightSource::DiversityStrength,
            Weights::Perf => WeightSource::Performance,
        }
    }
}

impl FromStr for Weights {
    type Err = CfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ds" => Ok(Weights::Ds),
            "perf" => Ok(Weights::Perf),
            other => Err(CfaError::validation(format!(
                "unknown weights '{other}' (expected ds|perf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub labels: Option<Vec<String>>,
    pub systems: Vec<SystemEntry>,
    pub experts: Option<PathBuf>,
    pub tie_policy: TiePolicy,
    pub tie_mode: TieMode,
    pub strategies: Vec<Strategy>,
    pub min_subset: usize,
    pub weights: Weights,
    pub out: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub token: Option<String>,
    pub concurrency: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            labels: None,
            systems: Vec::new(),
            experts: None,
            tie_policy: TiePolicy::Fractional,
            tie_mode: TieMode::Strict,
            strategies: Strategy::ALL.to_vec(),
            min_subset: 2,
            weights: Weights::Ds,
            out: PathBuf::from("out"),
            lexicon: None,
            train: None,
            endpoint: None,
            token: None,
            concurrency: 4,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CfaError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CfaError::validation(format!("{}: invalid config: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.systems {
            rebase(base, &mut s.path);
        }
        for p in [&mut cfg.experts, &mut cfg.lexicon, &mut cfg.train]
            .into_iter()
            .flatten()
        {
            rebase(base, p);
        }
        rebase(base, &mut cfg.out);
        Ok(cfg)
    }

    pub fn label_set(&self) -> Result<Option<LabelSet>> {
        match &self.labels {
            None => Ok(None),
            Some(l) => {
                let set = LabelSet::new(l.clone())?;
                check_label_chars(&set)?;
                Ok(Some(set))
            }
        }
    }

    /// Checks the parts of the config that the fusion commands rely on.
    pub fn validate_fusion(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(CfaError::validation("no scoring systems configured"));
        }
        let mut ids: Vec<&str> = self.systems.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CfaError::validation(format!(
                "system id '{}' configured twice",
                w[0]
            )));
        }
        for s in &self.systems {
            if !s.path.is_file() {
                return Err(CfaError::io(
                    &s.path,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("score file for system '{}' not found", s.id),
                    ),
                ));
            }
        }
        if self.strategies.is_empty() {
            return Err(CfaError::validation("no combination strategies configured"));
        }
        Ok(())
    }
}

/// Labels are written into `;`-joined ranking columns.
pub fn check_label_chars(labels: &LabelSet) -> Result<()> {
    match labels.iter().find(|l| l.contains(';') || l.contains('\n')) {
        Some(l) => Err(CfaError::validation(format!(
            "label '{l}' contains ';' or a newline"
        ))),
        None => Ok(()),
    }
}

pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    let list = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(Strategy::from_str)
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(CfaError::validation("empty strategy list"));
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_rebase() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"labels":["a","b","c"],"systems":[{"id":"A","path":"s/A.csv"}],"tie_mode":"lenient","strategies":["asc","wrc"]}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.systems[0].path, dir.path().join("s/A.csv"));
        assert_eq!(cfg.tie_mode, TieMode::Lenient);
        assert_eq!(cfg.tie_policy, TiePolicy::Fractional);
        assert_eq!(cfg.strategies, [Strategy::Asc, Strategy::Wrc]);
        assert_eq!(cfg.min_subset, 2);
        assert_eq!(cfg.out, dir.path().join("out"));
    }

    #[test]
    fn rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"lables":["a"]}"#).unwrap();
        assert!(matches!(
            RunConfig::load(&path),
            Err(CfaError::Validation(_))
        ));
    }

    #[test]
    fn parses_flags() {
        assert_eq!(
            parse_strategies("asc, wsc").unwrap(),
            [Strategy::Asc, Strategy::Wsc]
        );
        assert!(parse_strategies("asc,foo").is_err());
        let e: SystemEntry = "A=x/y.csv".parse().unwrap();
        assert_eq!(e.id, "A");
        assert!("nopath".parse::<SystemEntry>().is_err());
        assert_eq!("perf".parse::<Weights>().unwrap(), Weights::Perf);
    }
}
