//! Resolution of a run configuration from preset defaults, an optional TOML
//! file, and command-line flags, in increasing order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use pinned_billiards::engine::{Anchor, InitialCondition, SimConfig, StoppingRule};
use pinned_billiards::lattice::{LatticeKind, LatticeSpec};
use pinned_billiards::presets;
use pinned_billiards::Vec2;

/// Default accepted-collision stop on tori.
pub const TORUS_DEFAULT_STOP: u64 = 422_834;
/// Default accepted-collision stop on half-planes.
pub const HALF_PLANE_DEFAULT_STOP: u64 = 45_158;

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub kind: Option<String>,
    pub cols: Option<usize>,
    pub rows: Option<usize>,
    pub radius: Option<f64>,
    pub seed: Option<u64>,
    pub stop_accepted: Option<u64>,
    pub stop_attempted: Option<u64>,
    pub snapshots: Option<Vec<u64>>,
    pub anchor: Option<String>,
    pub direction: Option<[f64; 2]>,
    pub total_energy: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct LatticeArgs {
    /// Named lattice preset (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Lattice kind: half-plane-rect or torus.
    #[arg(long)]
    pub kind: Option<String>,
    /// Balls per even row.
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InitArgs {
    /// Ball given the initial velocity: boundary-center, corner, or an index.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Initial direction as `x,y`; normalised before use.
    #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
    pub direction: Option<[f64; 2]>,
    /// Total kinetic energy placed on the anchored ball.
    #[arg(long)]
    pub energy: Option<f64>,
}

pub fn parse_vec2(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([parse(x)?, parse(y)?])
}

/// Fully resolved simulation settings, echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSim {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub kind: String,
    pub cols: usize,
    pub rows: usize,
    pub radius: f64,
    pub balls: usize,
    pub seed: u64,
    pub stop_rule: String,
    pub stop_target: u64,
    pub snapshots: Vec<u64>,
    pub anchor: String,
    pub direction: [f64; 2],
    pub total_energy: f64,
}

impl ResolvedSim {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let kind: LatticeKind = self.kind.parse()?;
        let lattice = LatticeSpec {
            kind,
            cols: self.cols,
            rows: self.rows,
            radius: self.radius,
        };
        let stop = match self.stop_rule.as_str() {
            "accepted" => StoppingRule::Accepted(self.stop_target),
            "attempted" => StoppingRule::Attempted(self.stop_target),
            other => bail!("unknown stop rule `{other}`"),
        };
        let config = SimConfig {
            lattice,
            seed: self.seed,
            initial: InitialCondition {
                anchor: self.anchor.parse::<Anchor>()?,
                direction: Vec2::new(self.direction[0], self.direction[1]),
                total_energy: self.total_energy,
            },
            stop,
            snapshots: self.snapshots.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn label(&self) -> String {
        match &self.preset {
            Some(p) => p.clone(),
            None => format!("{}-{}x{}", self.kind, self.cols, self.rows),
        }
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        Ok(toml::Table::try_from(self)?)
    }
}

/// Raw inputs before precedence is applied.
#[derive(Debug, Clone, Default)]
pub struct SimInputs {
    pub lattice: LatticeArgs,
    pub init: InitArgs,
    pub seed: Option<u64>,
    pub stop_accepted: Option<u64>,
    pub stop_attempted: Option<u64>,
    pub snapshots: Vec<u64>,
}

/// Lattice spec from flags over file over preset.
pub fn resolve_lattice(
    flags: &LatticeArgs,
    file: &FileConfig,
    default_preset: Option<&str>,
) -> Result<(Option<String>, LatticeSpec)> {
    let preset_name = flags
        .preset
        .clone()
        .or_else(|| file.preset.clone())
        .or_else(|| default_preset.map(str::to_string));
    let base = match &preset_name {
        Some(name) => Some(presets::preset(name)?),
        None => None,
    };
    let kind = match flags.kind.as_ref().or(file.kind.as_ref()) {
        Some(k) => k.parse::<LatticeKind>()?,
        None => base
            .map(|b| b.kind)
            .ok_or_else(|| anyhow!("no lattice given: pass --preset or --kind/--cols/--rows"))?,
    };
    let cols = flags.cols.or(file.cols).or(base.map(|b| b.cols));
    let rows = flags.rows.or(file.rows).or(base.map(|b| b.rows));
    let (Some(cols), Some(rows)) = (cols, rows) else {
        bail!("lattice needs both cols and rows");
    };
    let radius = flags
        .radius
        .or(file.radius)
        .or(base.map(|b| b.radius))
        .unwrap_or(LatticeSpec::DEFAULT_RADIUS);
    let spec = LatticeSpec {
        kind,
        cols,
        rows,
        radius,
    };
    spec.validate()?;
    // a preset name only describes the lattice if nothing overrode it
    let preset_name = preset_name.filter(|_| Some(spec) == base);
    Ok((preset_name, spec))
}

pub fn resolve_sim(
    inputs: &SimInputs,
    file: &FileConfig,
    default_preset: Option<&str>,
) -> Result<ResolvedSim> {
    let (preset, lattice) = resolve_lattice(&inputs.lattice, file, default_preset)?;
    let defaults = InitialCondition::default_for(lattice.kind);

    let flag_stop = stop_from(inputs.stop_accepted, inputs.stop_attempted)?;
    let file_stop = stop_from(file.stop_accepted, file.stop_attempted)?;
    let stop = flag_stop.or(file_stop).unwrap_or(match lattice.kind {
        LatticeKind::Torus => StoppingRule::Accepted(TORUS_DEFAULT_STOP),
        LatticeKind::HalfPlaneRect => StoppingRule::Accepted(HALF_PLANE_DEFAULT_STOP),
    });

    let mut snapshots = if !inputs.snapshots.is_empty() {
        inputs.snapshots.clone()
    } else {
        file.snapshots.clone().unwrap_or_default()
    };
    snapshots.sort_unstable();
    snapshots.dedup();

    let anchor = match inputs.init.anchor.as_ref().or(file.anchor.as_ref()) {
        Some(a) => a.parse::<Anchor>()?,
        None => defaults.anchor,
    };
    let direction = inputs
        .init
        .direction
        .or(file.direction)
        .unwrap_or([defaults.direction.x, defaults.direction.y]);
    let total_energy = inputs
        .init
        .energy
        .or(file.total_energy)
        .unwrap_or(defaults.total_energy);

    let (stop_rule, stop_target) = match stop {
        StoppingRule::Accepted(n) => ("accepted", n),
        StoppingRule::Attempted(n) => ("attempted", n),
    };
    let resolved = ResolvedSim {
        preset,
        kind: lattice.kind.to_string(),
        cols: lattice.cols,
        rows: lattice.rows,
        radius: lattice.radius,
        balls: lattice.ball_count(),
        seed: inputs.seed.or(file.seed).unwrap_or(1),
        stop_rule: stop_rule.to_string(),
        stop_target,
        snapshots,
        anchor: anchor.to_string(),
        direction,
        total_energy,
    };
    // anchors can only be checked against a built lattice
    let config = resolved.to_sim_config()?;
    pinned_billiards::engine::init(&config, &config.lattice.build()?)?;
    Ok(resolved)
}

fn stop_from(accepted: Option<u64>, attempted: Option<u64>) -> Result<Option<StoppingRule>> {
    match (accepted, attempted) {
        (Some(_), Some(_)) => {
            bail!("give either an accepted or an attempted stop target, not both")
        }
        (Some(n), None) => Ok(Some(StoppingRule::Accepted(n))),
        (None, Some(n)) => Ok(Some(StoppingRule::Attempted(n))),
        (None, None) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs_with_preset(name: &str) -> SimInputs {
        SimInputs {
            lattice: LatticeArgs {
                preset: Some(name.into()),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn preset_defaults() {
        let r = resolve_sim(
            &inputs_with_preset("torus-38x38"),
            &FileConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.balls, 1444);
        assert_eq!(r.stop_target, TORUS_DEFAULT_STOP);
        assert_eq!(r.anchor, "corner");
        assert_eq!(r.seed, 1);
        assert_eq!(r.label(), "torus-38x38");

        let r = resolve_sim(
            &inputs_with_preset("paper-100x50"),
            &FileConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!((r.cols, r.rows), (57, 25));
        assert_eq!(r.anchor, "boundary-center");
        assert_eq!(r.stop_target, HALF_PLANE_DEFAULT_STOP);
    }

    #[test]
    fn flags_override_file_override_preset() {
        let file: FileConfig = toml::from_str(
            r#"
            preset = "torus-38x38"
            seed = 5
            cols = 10
            stop_accepted = 100
            snapshots = [50, 10, 50]
            "#,
        )
        .unwrap();
        let mut inputs = SimInputs {
            seed: Some(9),
            ..Default::default()
        };
        let r = resolve_sim(&inputs, &file, None).unwrap();
        assert_eq!((r.cols, r.rows), (10, 38));
        assert_eq!(r.preset, None, "overridden lattice is no longer the preset");
        assert_eq!(r.seed, 9);
        assert_eq!(r.stop_target, 100);
        assert_eq!(r.snapshots, vec![10, 50]);

        inputs.stop_attempted = Some(7);
        let r = resolve_sim(&inputs, &file, None).unwrap();
        assert_eq!((r.stop_rule.as_str(), r.stop_target), ("attempted", 7));
    }

    #[test]
    fn config_errors() {
        assert!(resolve_sim(&SimInputs::default(), &FileConfig::default(), None).is_err());
        assert!(resolve_sim(
            &inputs_with_preset("paper-1x1"),
            &FileConfig::default(),
            None
        )
        .is_err());
        let mut inputs = inputs_with_preset("torus-38x38");
        inputs.stop_accepted = Some(10);
        inputs.stop_attempted = Some(10);
        assert!(resolve_sim(&inputs, &FileConfig::default(), None).is_err());
        let mut inputs = inputs_with_preset("torus-38x38");
        inputs.init.anchor = Some("boundary-center".into());
        assert!(resolve_sim(&inputs, &FileConfig::default(), None).is_err());
        assert!(toml::from_str::<FileConfig>("colz = 3").is_err());
    }

    #[test]
    fn vec2_parsing() {
        assert_eq!(parse_vec2("1,-0.5").unwrap(), [1.0, -0.5]);
        assert!(parse_vec2("1").is_err());
    }

    #[test]
    fn resolved_round_trips_to_sim_config() {
        let r = resolve_sim(
            &inputs_with_preset("paper-60x30"),
            &FileConfig::default(),
            None,
        )
        .unwrap();
        let cfg = r.to_sim_config().unwrap();
        assert_eq!(cfg.lattice, presets::preset("paper-60x30").unwrap());
        let table = r.to_table().unwrap();
        assert_eq!(table["seed"].as_integer(), Some(1));
    }
}
