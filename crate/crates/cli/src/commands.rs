use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use serde::Serialize;

use pinned_billiards::engine::{self, RunResult, SimConfig, StoppingRule, RNG_ALGORITHM};
use pinned_billiards::lattice::Configuration;
use pinned_billiards::presets::{self, HALF_PLANE_PRESETS};
use pinned_billiards::stats::{
    self, Axis, CorrelationKind, CorrelationSample, StatsError, COMPONENT_BIN_WIDTH,
    CORRELATION_BIN_WIDTH,
};
use pinned_billiards::tables::{fmt_real, write_meta};
use pinned_billiards::Vec2;

use crate::config::{resolve_sim, FileConfig, InitArgs, LatticeArgs, SimInputs};
use crate::output::{Manifest, OutputDir};
use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "PINNED_BILLIARDS_OUT";

/// Band index past which the sweep reports the remaining energy share.
pub const FAR_BAND: usize = 10;

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many applied collisions.
    #[arg(long, conflicts_with = "stop_attempted")]
    pub stop_accepted: Option<u64>,
    /// Stop after this many drawn pairs.
    #[arg(long)]
    pub stop_attempted: Option<u64>,
    /// Accepted-collision count at which to record a snapshot (repeatable).
    #[arg(long = "snap")]
    pub snapshots: Vec<u64>,
    /// Output directory for this run.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Comma-separated half-plane presets; defaults to all seven sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<String>,
    /// Number of seeds per size (seeds 1..=N).
    #[arg(long, default_value_t = 10, conflicts_with = "seeds")]
    pub runs: u64,
    /// Explicit comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Accepted-collision budget per ball; runs that reach a terminal state
    /// stop earlier.
    #[arg(long, default_value_t = 512)]
    pub per_ball: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// Number of runs (seeds 1..=N).
    #[arg(long, default_value_t = 240, conflicts_with = "seeds")]
    pub runs: u64,
    /// Explicit comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, conflicts_with = "stop_attempted")]
    pub stop_accepted: Option<u64>,
    #[arg(long)]
    pub stop_attempted: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn seed_list(runs: u64, seeds: &[u64]) -> Vec<u64> {
    if seeds.is_empty() {
        (1..=runs).collect()
    } else {
        seeds.to_vec()
    }
}

fn check_unique(seeds: &[u64]) -> Result<()> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(anyhow!("seed {} appears more than once", w[0]));
    }
    Ok(())
}

/// Runs `body` against the output directory and writes the manifest last,
/// marking it incomplete if `body` failed.
fn with_output<F>(
    dir: PathBuf,
    command: &str,
    config: toml::Table,
    body: F,
) -> Result<Manifest, CliError>
where
    F: FnOnce(&mut OutputDir) -> Result<()>,
{
    let mut out = OutputDir::create(dir).map_err(CliError::Runtime)?;
    match body(&mut out) {
        Ok(()) => out.finish(command, config, true).map_err(CliError::Runtime),
        Err(err) => {
            let _ = out.finish(command, config, false);
            Err(CliError::Runtime(err))
        }
    }
}

#[derive(Debug, Serialize)]
struct SnapshotSummary {
    accepted: u64,
    attempted: u64,
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    band0_fraction: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RunSummaryDoc {
    seed: u64,
    lattice: String,
    kind: String,
    balls: usize,
    rng_algorithm: String,
    accepted: u64,
    attempted: u64,
    absorbed: bool,
    initial_energy: f64,
    final_energy: f64,
    max_energy_drift: f64,
    initial_momentum: [f64; 2],
    final_momentum: [f64; 2],
    snapshots: Vec<SnapshotSummary>,
}

fn xy(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

fn write_snapshot(
    w: &mut Vec<u8>,
    lattice: &Configuration,
    velocities: &[Vec2],
) -> std::io::Result<()> {
    writeln!(w, "# units=index:1;x:length;y:length;vx:speed;vy:speed")?;
    writeln!(w, "index,x,y,vx,vy")?;
    for (i, (p, v)) in lattice.positions.iter().zip(velocities).enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{}",
            fmt_real(p.x),
            fmt_real(p.y),
            fmt_real(v.x),
            fmt_real(v.y)
        )?;
    }
    Ok(())
}

/// One correlation record; degenerate estimates are kept with a flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationRow {
    pub seed: u64,
    pub kind: CorrelationKind,
    pub value: Option<f64>,
    pub n: usize,
}

impl CorrelationRow {
    fn from_result(
        seed: u64,
        kind: CorrelationKind,
        n: usize,
        r: Result<CorrelationSample, StatsError>,
    ) -> Self {
        Self {
            seed,
            kind,
            value: r.ok().map(|c| c.value),
            n,
        }
    }
}

pub fn correlation_rows(
    seed: u64,
    velocities: &[Vec2],
    lattice: &Configuration,
) -> [CorrelationRow; 2] {
    [
        CorrelationRow::from_result(
            seed,
            CorrelationKind::Collisional,
            lattice.adjacency.len(),
            stats::collisional_correlation(velocities, lattice),
        ),
        CorrelationRow::from_result(
            seed,
            CorrelationKind::Xy,
            velocities.len(),
            stats::xy_correlation(velocities),
        ),
    ]
}

fn write_correlations(
    w: &mut Vec<u8>,
    rows: &[CorrelationRow],
    meta: &[(&str, String)],
) -> std::io::Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "# units=seed:1;kind:1;value:1;n:1;status:1")?;
    writeln!(w, "seed,kind,value,n,status")?;
    for row in rows {
        match row.value {
            Some(v) => writeln!(w, "{},{},{},{},ok", row.seed, row.kind, fmt_real(v), row.n)?,
            None => writeln!(w, "{},{},,{},degenerate", row.seed, row.kind, row.n)?,
        }
    }
    Ok(())
}

fn write_component_histograms(
    out: &mut OutputDir,
    velocities: &[Vec2],
    accepted: u64,
) -> Result<()> {
    for axis in [Axis::X, Axis::Y, Axis::Pooled] {
        let hist = match stats::component_histogram(velocities, axis, COMPONENT_BIN_WIDTH) {
            Ok(h) => h,
            Err(StatsError::AllZeroVelocities) => continue,
            Err(e) => return Err(e.into()),
        };
        let normalised: Vec<f64> = axis
            .components(velocities)
            .iter()
            .map(|c| c / hist.scale_used)
            .collect();
        let fit = stats::gaussian_fit(&normalised)?;
        let meta = [
            ("axis", axis.to_string()),
            ("accepted", accepted.to_string()),
            ("n", normalised.len().to_string()),
            ("mu", fmt_real(fit.mu)),
            ("sigma", fmt_real(fit.sigma)),
        ];
        out.write(&format!("hist_{axis}_{accepted}.csv"), |w| {
            hist.write_table(w, &meta)
        })?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<Manifest, CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Config)?,
        None => FileConfig::default(),
    };
    let inputs = SimInputs {
        lattice: args.lattice.clone(),
        init: args.init.clone(),
        seed: args.seed,
        stop_accepted: args.stop_accepted,
        stop_attempted: args.stop_attempted,
        snapshots: args.snapshots.clone(),
    };
    let resolved = resolve_sim(&inputs, &file, None).map_err(CliError::Config)?;
    let config = resolved.to_sim_config().map_err(CliError::Config)?;
    let dir = args.out.clone().or(file.out.clone()).unwrap_or_else(|| {
        out_root().join(format!(
            "simulate-{}-seed{}",
            resolved.label(),
            resolved.seed
        ))
    });
    let table = resolved.to_table().map_err(CliError::Config)?;
    let label = resolved.label();

    let manifest = with_output(dir, "simulate", table, |out| {
        let lattice = config.lattice.build()?;
        let result = engine::run_on(&config, &lattice)?;
        out.write("positions.csv", |w| lattice.write_positions(w))?;
        out.write("adjacency.csv", |w| lattice.write_adjacency(w))?;

        let mut states: Vec<(u64, u64, &[Vec2])> = result
            .snapshots
            .iter()
            .map(|s| (s.accepted, s.attempted, s.velocities.as_slice()))
            .collect();
        let fin = &result.final_state;
        if states.last().map(|s| s.0) != Some(fin.accepted) {
            states.push((fin.accepted, fin.attempted, fin.velocities.as_slice()));
        }

        let mut snap_docs = Vec::new();
        for &(accepted, attempted, velocities) in &states {
            out.write(&format!("snapshot_{accepted}.csv"), |w| {
                write_snapshot(w, &lattice, velocities)
            })?;
            write_component_histograms(out, velocities, accepted)?;
            let band0 = if lattice.has_bands() {
                let profile = stats::energy_profile(velocities, &lattice)?;
                out.write(&format!("profile_{accepted}.csv"), |w| {
                    profile.write_table(w)
                })?;
                println!(
                    "accepted {accepted}: band-0 energy fraction {:.4}",
                    profile.band_fraction[0]
                );
                Some(profile.band_fraction[0])
            } else {
                None
            };
            let rows = correlation_rows(config.seed, velocities, &lattice);
            let meta = [
                ("accepted", accepted.to_string()),
                ("measured_at", "snapshot".to_string()),
            ];
            out.write(&format!("correlations_{accepted}.csv"), |w| {
                write_correlations(w, &rows, &meta)
            })?;
            snap_docs.push(SnapshotSummary {
                accepted,
                attempted,
                energy: pinned_billiards::kinetic_energy(velocities),
                band0_fraction: band0,
            });
        }

        let s = &result.summary;
        let doc = RunSummaryDoc {
            seed: s.seed,
            lattice: label.clone(),
            kind: lattice.kind().to_string(),
            balls: lattice.len(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            accepted: s.accepted,
            attempted: s.attempted,
            absorbed: s.absorbed,
            initial_energy: s.initial_energy,
            final_energy: s.final_energy,
            max_energy_drift: s.max_energy_drift,
            initial_momentum: xy(s.initial_momentum),
            final_momentum: xy(s.final_momentum),
            snapshots: snap_docs,
        };
        let text = toml::to_string(&doc)?;
        out.write("summary.toml", |w| w.write_all(text.as_bytes()))?;
        println!(
            "{label} seed {}: {} accepted / {} attempted collisions{}, energy {} (drift {:.2e})",
            s.seed,
            s.accepted,
            s.attempted,
            if s.absorbed { " (terminal state)" } else { "" },
            s.final_energy,
            s.max_energy_drift
        );
        Ok(())
    })?;
    Ok(manifest)
}

#[derive(Debug, Serialize)]
struct SweepEcho {
    sizes: Vec<String>,
    seeds: Vec<u64>,
    per_ball: u64,
    far_band: usize,
    anchor: String,
    total_energy: f64,
}

/// Mean energy profile of one size across seeds.
#[derive(Debug, Clone)]
pub struct SizeProfile {
    pub preset: String,
    pub balls: usize,
    pub band_distance: Vec<f64>,
    pub band_energy: Vec<f64>,
    pub band_fraction: Vec<f64>,
    pub per_seed: Vec<(u64, RunSummaryRow)>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunSummaryRow {
    pub accepted: u64,
    pub attempted: u64,
    pub absorbed: bool,
    pub band0_fraction: f64,
    pub fraction_beyond_far: f64,
}

impl SizeProfile {
    pub fn mean_fraction_beyond(&self, band: usize) -> f64 {
        self.band_fraction
            .iter()
            .skip(band + 1)
            .fold(0.0, |a, f| a + f)
    }
}

/// Runs every seed on one half-plane preset and averages the final profiles.
pub fn sweep_size(preset: &str, seeds: &[u64], per_ball: u64) -> Result<SizeProfile> {
    let spec = presets::preset(preset)?;
    let budget = per_ball * spec.ball_count() as u64;
    let base = SimConfig::new(spec, 0, StoppingRule::Accepted(budget));
    let lattice = spec.build()?;
    let results = engine::run_batch(&base, seeds)?;
    let bands = lattice.num_bands();
    let mut band_energy = vec![0.0; bands];
    let mut band_fraction = vec![0.0; bands];
    let mut per_seed = Vec::with_capacity(results.len());
    for r in &results {
        let profile = stats::energy_profile(&r.final_state.velocities, &lattice)?;
        for b in 0..bands {
            band_energy[b] += profile.band_energy[b];
            band_fraction[b] += profile.band_fraction[b];
        }
        per_seed.push((
            r.summary.seed,
            RunSummaryRow {
                accepted: r.summary.accepted,
                attempted: r.summary.attempted,
                absorbed: r.summary.absorbed,
                band0_fraction: profile.band_fraction[0],
                fraction_beyond_far: profile.fraction_beyond(FAR_BAND),
            },
        ));
    }
    let k = results.len().max(1) as f64;
    band_energy.iter_mut().for_each(|e| *e /= k);
    band_fraction.iter_mut().for_each(|f| *f /= k);
    Ok(SizeProfile {
        preset: preset.to_string(),
        balls: lattice.len(),
        band_distance: (0..bands).map(|b| lattice.band_distance(b)).collect(),
        band_energy,
        band_fraction,
        per_seed,
    })
}

pub fn sweep(args: &SweepArgs) -> Result<Manifest, CliError> {
    let sizes: Vec<String> = if args.sizes.is_empty() {
        HALF_PLANE_PRESETS.iter().map(|s| s.to_string()).collect()
    } else {
        args.sizes.clone()
    };
    for name in &sizes {
        let spec = presets::preset(name).map_err(|e| CliError::Config(e.into()))?;
        if spec.kind != pinned_billiards::LatticeKind::HalfPlaneRect {
            return Err(CliError::Config(anyhow!(
                "sweep needs half-plane presets, `{name}` is a torus"
            )));
        }
    }
    let seeds = seed_list(args.runs, &args.seeds);
    check_unique(&seeds).map_err(CliError::Config)?;
    if seeds.is_empty() {
        return Err(CliError::Config(anyhow!("sweep needs at least one seed")));
    }
    let init = pinned_billiards::InitialCondition::default_for(
        pinned_billiards::LatticeKind::HalfPlaneRect,
    );
    let echo = SweepEcho {
        sizes: sizes.clone(),
        seeds: seeds.clone(),
        per_ball: args.per_ball,
        far_band: FAR_BAND,
        anchor: init.anchor.to_string(),
        total_energy: init.total_energy,
    };
    let table = toml::Table::try_from(&echo).map_err(|e| CliError::Config(e.into()))?;
    let dir = args.out.clone().unwrap_or_else(|| out_root().join("sweep"));

    with_output(dir, "sweep", table, |out| {
        let mut profiles = Vec::new();
        for name in &sizes {
            let p = sweep_size(name, &seeds, args.per_ball)?;
            out.write(&format!("{name}/profile.csv"), |w| {
                write_meta(
                    w,
                    &[
                        ("seeds", seeds.len().to_string()),
                        ("statistic", "mean over seeds".into()),
                    ],
                )?;
                writeln!(w, "# units=band:1;distance:length;energy:energy;fraction:1")?;
                writeln!(w, "band,distance,energy,fraction")?;
                for b in 0..p.band_fraction.len() {
                    writeln!(
                        w,
                        "{b},{},{},{}",
                        fmt_real(p.band_distance[b]),
                        fmt_real(p.band_energy[b]),
                        fmt_real(p.band_fraction[b])
                    )?;
                }
                Ok(())
            })?;
            out.write(&format!("{name}/runs.csv"), |w| {
                writeln!(w, "# units=seed:1;accepted:collisions;attempted:samples;absorbed:bool;fractions:1")?;
                writeln!(w, "seed,accepted,attempted,absorbed,band0_fraction,fraction_beyond_{FAR_BAND}")?;
                for (seed, r) in &p.per_seed {
                    writeln!(
                        w,
                        "{seed},{},{},{},{},{}",
                        r.accepted,
                        r.attempted,
                        r.absorbed,
                        fmt_real(r.band0_fraction),
                        fmt_real(r.fraction_beyond_far)
                    )?;
                }
                Ok(())
            })?;
            println!(
                "{name}: {} balls, band-0 fraction {:.4}, beyond band {FAR_BAND} {:.4}",
                p.balls,
                p.band_fraction[0],
                p.mean_fraction_beyond(FAR_BAND)
            );
            profiles.push(p);
        }
        out.write("sweep.csv", |w| {
            writeln!(
                w,
                "# units=size:preset;balls:1;band:1;distance:length;fraction:1"
            )?;
            writeln!(w, "size,balls,band,distance,fraction")?;
            for p in &profiles {
                for (b, f) in p.band_fraction.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{b},{},{}",
                        p.preset,
                        p.balls,
                        fmt_real(p.band_distance[b]),
                        fmt_real(*f)
                    )?;
                }
            }
            Ok(())
        })?;
        out.write("sweep_summary.csv", |w| {
            writeln!(w, "# units=size:preset;counts:1;fractions:1")?;
            writeln!(
                w,
                "size,balls,seeds,band0_fraction,fraction_beyond_{FAR_BAND},absorbed_runs"
            )?;
            for p in &profiles {
                let absorbed = p.per_seed.iter().filter(|(_, r)| r.absorbed).count();
                writeln!(
                    w,
                    "{},{},{},{},{},{absorbed}",
                    p.preset,
                    p.balls,
                    p.per_seed.len(),
                    fmt_real(p.band_fraction[0]),
                    fmt_real(p.mean_fraction_beyond(FAR_BAND))
                )?;
            }
            Ok(())
        })?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct BatchEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    kind: String,
    cols: usize,
    rows: usize,
    radius: f64,
    seeds: Vec<u64>,
    stop_rule: String,
    stop_target: u64,
    anchor: String,
    direction: [f64; 2],
    total_energy: f64,
    measured_at: String,
}

pub fn batch(args: &BatchArgs) -> Result<Manifest, CliError> {
    let seeds = seed_list(args.runs, &args.seeds);
    check_unique(&seeds).map_err(CliError::Config)?;
    let inputs = SimInputs {
        lattice: args.lattice.clone(),
        init: args.init.clone(),
        seed: Some(0),
        stop_accepted: args.stop_accepted,
        stop_attempted: args.stop_attempted,
        snapshots: Vec::new(),
    };
    let resolved = resolve_sim(&inputs, &FileConfig::default(), Some(presets::TORUS_38X38))
        .map_err(CliError::Config)?;
    let base = resolved.to_sim_config().map_err(CliError::Config)?;
    let echo = BatchEcho {
        preset: resolved.preset.clone(),
        kind: resolved.kind.clone(),
        cols: resolved.cols,
        rows: resolved.rows,
        radius: resolved.radius,
        seeds: seeds.clone(),
        stop_rule: resolved.stop_rule.clone(),
        stop_target: resolved.stop_target,
        anchor: resolved.anchor.clone(),
        direction: resolved.direction,
        total_energy: resolved.total_energy,
        measured_at: "final state of each run".into(),
    };
    let table = toml::Table::try_from(&echo).map_err(|e| CliError::Config(e.into()))?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| out_root().join(format!("batch-{}", resolved.label())));

    with_output(dir, "batch", table, |out| {
        let lattice = base.lattice.build()?;
        let results = engine::run_batch(&base, &seeds)?;
        let rows = batch_correlations(&results, &lattice);
        let meta = [
            ("measured_at", "final".to_string()),
            ("runs", seeds.len().to_string()),
        ];
        out.write("correlations.csv", |w| write_correlations(w, &rows, &meta))?;
        out.write("runs.csv", |w| {
            writeln!(w, "# units=seed:1;accepted:collisions;attempted:samples;absorbed:bool;final_energy:energy;max_energy_drift:1")?;
            writeln!(w, "seed,accepted,attempted,absorbed,final_energy,max_energy_drift")?;
            for r in &results {
                let s = &r.summary;
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    s.seed,
                    s.accepted,
                    s.attempted,
                    s.absorbed,
                    fmt_real(s.final_energy),
                    fmt_real(s.max_energy_drift)
                )?;
            }
            Ok(())
        })?;
        for kind in [CorrelationKind::Collisional, CorrelationKind::Xy] {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.kind == kind)
                .filter_map(|r| r.value)
                .collect();
            let hist = stats::correlation_histogram(&values, CORRELATION_BIN_WIDTH)?;
            let mean = if values.is_empty() {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            let meta = [
                ("kind", kind.to_string()),
                ("runs", values.len().to_string()),
                ("mean", fmt_real(mean)),
            ];
            out.write(&format!("hist_{kind}.csv"), |w| hist.write_table(w, &meta))?;
            println!(
                "{kind} correlation: mean {mean:.4} over {} runs",
                values.len()
            );
        }
        Ok(())
    })
}

/// Collisional and x-y correlations of each run's final state, in seed order.
pub fn batch_correlations(results: &[RunResult], lattice: &Configuration) -> Vec<CorrelationRow> {
    results
        .iter()
        .flat_map(|r| correlation_rows(r.summary.seed, &r.final_state.velocities, lattice))
        .collect()
}

pub fn list_presets() {
    for name in presets::names() {
        if let Ok(spec) = presets::preset(name) {
            println!(
                "{name}: {} {}x{} ({} balls)",
                spec.kind,
                spec.cols,
                spec.rows,
                spec.ball_count()
            );
        }
    }
}
