//! Built-in benchmark fixtures, embedded so runs are reproducible without
//! external files.

use crate::space::ConfigSpace;

/// Six-configuration fixture: two steps, a parameterless algorithm, and two
/// two-value domains. Small enough to check every quantity by hand.
pub const FIX6_SPACE_JSON: &str = include_str!("../data/fix6.json");

/// Hand-picked loss table over the six fix6 configurations.
pub const FIX6_LOSSES_JSON: &str = include_str!("../data/fix6_losses.json");

/// Image-classification pipeline shape: 3 steps, 6/17/30 per-step
/// configurations, 3060 total over 12 paths.
pub const IMGCLS_SPACE_JSON: &str = include_str!("../data/imgcls.json");

/// Native mini pipeline space: 420 configurations over 12 paths.
pub const MINIML_SPACE_JSON: &str = include_str!("../data/miniml.json");

pub fn fix6_space() -> ConfigSpace {
    ConfigSpace::parse(FIX6_SPACE_JSON).expect("embedded fix6 space is valid")
}

pub fn imgcls_space() -> ConfigSpace {
    ConfigSpace::parse(IMGCLS_SPACE_JSON).expect("embedded imgcls space is valid")
}

pub fn miniml_space() -> ConfigSpace {
    ConfigSpace::parse(MINIML_SPACE_JSON).expect("embedded miniml space is valid")
}

/// Resolves a built-in space by name, used by the CLI's `--space` flag
/// before falling back to the filesystem.
pub fn builtin_space(name: &str) -> Option<ConfigSpace> {
    match name {
        "fix6" => Some(fix6_space()),
        "imgcls" => Some(imgcls_space()),
        "miniml" => Some(miniml_space()),
        _ => None,
    }
}

/// The mini150 dataset fixture: 150 rows of 4 features + label, committed
/// so every build shares bytes. `generate_mini150` reproduces it exactly.
pub const MINI150_CSV: &str = include_str!("../data/mini150.csv");

pub fn mini150_dataset() -> crate::eval::Dataset {
    crate::eval::Dataset::parse_csv(MINI150_CSV).expect("embedded mini150 fixture is valid")
}
