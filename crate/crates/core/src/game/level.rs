use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Cell, ShadowMask, BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One object; plain autoencoder.
    Ae,
    /// Three objects, random pick per cast.
    Vae,
}

impl Variant {
    pub fn object_count(self) -> usize {
        match self {
            Variant::Ae => 1,
            Variant::Vae => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum LevelError {
    #[error("level JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("level {name:?}: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub name: String,
    pub variant: Variant,
    pub cube_budget: usize,
    pub targets: Vec<ShadowMask>,
    pub initial_cells: Vec<Cell>,
}

impl Level {
    pub fn from_json(text: &str) -> Result<Self, LevelError> {
        let level: Level = serde_json::from_str(text)?;
        level.validate()?;
        Ok(level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("levels always serialize")
    }

    pub fn validate(&self) -> Result<(), LevelError> {
        let invalid = |reason: String| LevelError::Invalid {
            name: self.name.clone(),
            reason,
        };
        if self.cube_budget == 0 {
            return Err(invalid("cube_budget must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(invalid("at least one target shadow is required".into()));
        }
        let unique: BTreeSet<&Cell> = self.initial_cells.iter().collect();
        if unique.len() != self.initial_cells.len() {
            return Err(invalid("initial_cells contains duplicates".into()));
        }
        if self.initial_cells.len() != self.cube_budget {
            return Err(invalid(format!(
                "{} initial cells but cube_budget is {}",
                self.initial_cells.len(),
                self.cube_budget
            )));
        }
        if let Some(c) = self.initial_cells.iter().find(|c| !c.in_bounds(BOUND)) {
            return Err(invalid(format!("initial cell {c:?} is outside ±{BOUND}")));
        }
        Ok(())
    }
}

const SHIPPED: [&str; 4] = [
    include_str!("../../../../levels/easy1.json"),
    include_str!("../../../../levels/easy1-vae.json"),
    include_str!("../../../../levels/hard1.json"),
    include_str!("../../../../levels/hard1-vae.json"),
];

/// Built-in levels in play order: Easy before Hard.
pub fn shipped_levels() -> Vec<Level> {
    SHIPPED
        .iter()
        .map(|text| Level::from_json(text).expect("shipped level files are valid"))
        .collect()
}
