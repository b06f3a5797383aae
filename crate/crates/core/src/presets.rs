//! Named lattice sizes.
//!
//! The half-plane presets carry the `W x H` labels of the reference study.
//! Labels are mapped onto ball counts as `cols = floor(W / sqrt 3)` and
//! `rows = floor(H / 2)`, which sends `100x50` to 57 x 25.

use crate::lattice::{LatticeError, LatticeSpec};

pub const TORUS_38X38: &str = "torus-38x38";

/// The seven half-plane sizes, smallest first.
pub const HALF_PLANE_PRESETS: [&str; 7] = [
    "paper-10x5",
    "paper-60x30",
    "paper-100x50",
    "paper-200x100",
    "paper-300x150",
    "paper-400x200",
    "paper-500x250",
];

/// Every bundled preset name.
pub fn names() -> Vec<&'static str> {
    let mut all = HALF_PLANE_PRESETS.to_vec();
    all.push(TORUS_38X38);
    all
}

/// Ball counts for a `W x H` label.
pub fn label_to_counts(width: u32, height: u32) -> (usize, usize) {
    let cols = (width as f64 / 3f64.sqrt()).floor() as usize;
    let rows = (height / 2) as usize;
    (cols, rows)
}

pub fn preset(name: &str) -> Result<LatticeSpec, LatticeError> {
    if name == TORUS_38X38 {
        return Ok(LatticeSpec::torus(38, 38));
    }
    let unknown = || LatticeError::InvalidSpec(format!("unknown preset `{name}`"));
    if !HALF_PLANE_PRESETS.contains(&name) {
        return Err(unknown());
    }
    let label = name.strip_prefix("paper-").ok_or_else(unknown)?;
    let (w, h) = label.split_once('x').ok_or_else(unknown)?;
    let w: u32 = w.parse().map_err(|_| unknown())?;
    let h: u32 = h.parse().map_err(|_| unknown())?;
    let (cols, rows) = label_to_counts(w, h);
    Ok(LatticeSpec::half_plane(cols, rows))
}
