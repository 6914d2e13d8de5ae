//! Choosing the concrete domain at run time and loading its data.

use std::path::{Path, PathBuf};

use sestra::data::{parse_scone_file, InteractionRecord};
use sestra::domains::{DomainKind, ALCHEMY_BEAKERS};
use sestra::Domain;

use crate::commands::UsageError;

/// A domain variant, as named in a saved model's fingerprint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainSpec {
    Alchemy(usize),
    Scene,
    Tangrams,
}

impl DomainSpec {
    pub fn from_kind(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Alchemy => DomainSpec::Alchemy(ALCHEMY_BEAKERS),
            DomainKind::Scene => DomainSpec::Scene,
            DomainKind::Tangrams => DomainSpec::Tangrams,
        }
    }

    pub fn from_fingerprint(fp: &str) -> Result<Self, UsageError> {
        match fp {
            "alchemy" => Ok(DomainSpec::Alchemy(ALCHEMY_BEAKERS)),
            "scene" => Ok(DomainSpec::Scene),
            "tangrams" => Ok(DomainSpec::Tangrams),
            other => other
                .strip_prefix("alchemy-")
                .and_then(|n| n.parse().ok())
                .filter(|n| (1..=200).contains(n))
                .map(DomainSpec::Alchemy)
                .ok_or_else(|| UsageError(format!("model was saved for an unknown domain {other:?}"))),
        }
    }
}

/// Binds `$d` to the domain named by `$spec` and evaluates `$body`.
macro_rules! with_domain {
    ($spec:expr, |$d:ident| $body:expr) => {
        match $spec {
            $crate::domain::DomainSpec::Alchemy(n) => {
                let $d = sestra::domains::Alchemy::with_beakers(n);
                $body
            }
            $crate::domain::DomainSpec::Scene => {
                let $d = sestra::domains::Scene::new();
                $body
            }
            $crate::domain::DomainSpec::Tangrams => {
                let $d = sestra::domains::Tangrams::new();
                $body
            }
        }
    };
}
pub(crate) use with_domain;

/// `data` itself when it is a file, otherwise `<data>/<domain>-<split>.tsv`.
pub fn data_path<D: Domain>(domain: &D, data: &Path, split: &str) -> PathBuf {
    if data.is_dir() {
        data.join(format!("{}-{split}.tsv", domain.name()))
    } else {
        data.to_path_buf()
    }
}

pub fn load_records<D: Domain>(domain: &D, data: &Path, split: &str) -> anyhow::Result<Vec<InteractionRecord<D::State>>> {
    let path = data_path(domain, data, split);
    if !path.is_file() {
        return Err(UsageError(format!("data file {} does not exist", path.display())).into());
    }
    Ok(parse_scone_file(domain, &path)?)
}
