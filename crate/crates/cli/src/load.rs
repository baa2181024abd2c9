//! Input loading: pick the right parser by extension, falling back to a
//! content sniff for unlabeled files.

use std::path::Path;

use anyhow::{Context, Result};

use risktree_core::canonical::parse_canonical;
use risktree_core::model::Forest;
use risktree_core::outline::parse_outline;

pub fn forest(path: &Path) -> Result<Forest> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.display().to_string();

    let canonical = name.ends_with(".atk.json")
        || name.ends_with(".json")
        || (!name.ends_with(".atk") && text.trim_start().starts_with('{'));

    if canonical {
        Ok(parse_canonical(&text).map_err(|e| anyhow::anyhow!("{name}: {e}"))?)
    } else {
        Ok(parse_outline(&text, &name).map_err(|e| anyhow::anyhow!("{e}"))?.forest)
    }
}
