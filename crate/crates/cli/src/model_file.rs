//! JSON description of a tree-AR generator, for the `simulate` subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use ctar::{ContextTree, LeafParams, Quantiser, TreeArModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub thresholds: Vec<f64>,
    pub order: usize,
    #[serde(default)]
    pub intercept: bool,
    /// Leaf label (digit string) to parameters; labels must form a proper
    /// tree.
    pub leaves: BTreeMap<String, LeafSpec>,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct LeafSpec {
    pub phi: Vec<f64>,
    pub sigma2: f64,
}

pub fn load_model(path: &Path) -> Result<TreeArModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let spec: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let labels: Vec<&str> = spec.leaves.keys().map(String::as_str).collect();
    let tree = ContextTree::from_leaf_labels(spec.m, &labels)?;
    let quantiser = Quantiser::new(spec.thresholds)?;
    let leaf_params = spec
        .leaves
        .into_iter()
        .map(|(label, leaf)| {
            (
                label,
                LeafParams {
                    phi: leaf.phi,
                    sigma2: leaf.sigma2,
                },
            )
        })
        .collect();
    let mut model = TreeArModel::new(tree, quantiser, spec.order, spec.intercept, leaf_params)?;
    if let Some(burn_in) = spec.burn_in {
        model = model.with_burn_in(burn_in);
    }
    Ok(model)
}
