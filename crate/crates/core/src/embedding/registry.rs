use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Real,
    Synthetic,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRegistryEntry {
    pub dataset_id: String,
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_dataset_id: Option<String>,
    /// Image directory, relative paths resolve against the service data root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_root: Option<String>,
}

/// Known datasets, stored as `{"datasets": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub datasets: Vec<DatasetRegistryEntry>,
}

impl Registry {
    pub fn new(datasets: Vec<DatasetRegistryEntry>) -> Result<Self> {
        let reg = Self { datasets };
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let reg: Registry =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("registry: {e}")))?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn get(&self, id: &str) -> Option<&DatasetRegistryEntry> {
        self.datasets.iter().find(|d| d.dataset_id == id)
    }

    pub fn require(&self, id: &str) -> Result<&DatasetRegistryEntry> {
        self.get(id).ok_or_else(|| Error::MissingDataset(id.to_owned()))
    }

    /// Ids are unique, and a synthetic entry's training set names a real entry.
    pub fn validate(&self) -> Result<()> {
        for (n, d) in self.datasets.iter().enumerate() {
            if self.datasets[..n].iter().any(|o| o.dataset_id == d.dataset_id) {
                return Err(Error::InvariantViolation(format!(
                    "dataset id {:?} registered twice",
                    d.dataset_id
                )));
            }
            if d.kind != DatasetKind::Synthetic {
                continue;
            }
            if let Some(train) = &d.training_dataset_id {
                match self.get(train) {
                    Some(t) if t.kind == DatasetKind::Real => {}
                    Some(_) => {
                        return Err(Error::InvariantViolation(format!(
                            "training set {train:?} of {:?} is not a real dataset",
                            d.dataset_id
                        )))
                    }
                    None => return Err(Error::MissingDataset(train.clone())),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, kind: DatasetKind, train: Option<&str>) -> DatasetRegistryEntry {
        DatasetRegistryEntry {
            dataset_id: id.into(),
            kind,
            generator_name: None,
            training_dataset_id: train.map(Into::into),
            image_root: None,
        }
    }

    #[test]
    fn synthetic_must_point_at_real() {
        assert!(Registry::new(vec![
            entry("casia", DatasetKind::Real, None),
            entry("dcface", DatasetKind::Synthetic, Some("casia")),
        ])
        .is_ok());
        assert!(matches!(
            Registry::new(vec![entry("dcface", DatasetKind::Synthetic, Some("casia"))]),
            Err(Error::MissingDataset(_))
        ));
        assert!(Registry::new(vec![
            entry("ijbc", DatasetKind::Benchmark, None),
            entry("dcface", DatasetKind::Synthetic, Some("ijbc")),
        ])
        .is_err());
    }

    #[test]
    fn json_shape() {
        let text = r#"{"datasets":[{"dataset_id":"ffhq","kind":"real"},
            {"dataset_id":"idiff","kind":"synthetic","generator_name":"LDM","training_dataset_id":"ffhq"}]}"#;
        let reg: Registry = serde_json::from_str(text).unwrap();
        reg.validate().unwrap();
        assert_eq!(reg.require("idiff").unwrap().generator_name.as_deref(), Some("LDM"));
        assert!(reg.require("nope").is_err());
    }
}
