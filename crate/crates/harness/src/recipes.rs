//! Built-in experiment configs, addressable by name from the CLI.

use anyhow::{anyhow, Result};

use crate::config::ExperimentConfig;

/// `(name, TOML source)` for every built-in recipe.
pub const RECIPES: &[(&str, &str)] = &[
    ("fig1", include_str!("../recipes/fig1.toml")),
    ("fig2", include_str!("../recipes/fig2.toml")),
    ("fig3", include_str!("../recipes/fig3.toml")),
    ("fig4", include_str!("../recipes/fig4.toml")),
    ("fig5", include_str!("../recipes/fig5.toml")),
    ("fig6", include_str!("../recipes/fig6.toml")),
    ("thm25", include_str!("../recipes/thm25.toml")),
    ("prop28", include_str!("../recipes/prop28.toml")),
    ("bifurcation", include_str!("../recipes/bifurcation.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    RECIPES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// First comment line of the recipe, used by `recipes list`.
pub fn description(name: &str) -> Option<&'static str> {
    source(name)?
        .lines()
        .find_map(|l| l.strip_prefix('#'))
        .map(str::trim)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| {
        anyhow!(
            "unknown recipe `{name}`; known: {}",
            names().collect::<Vec<_>>().join(", ")
        )
    })?;
    ExperimentConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_parses_under_its_own_name() {
        for name in names() {
            let cfg = load(name).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            assert_eq!(cfg.name, name);
            assert!(description(name).is_some());
        }
    }
}
