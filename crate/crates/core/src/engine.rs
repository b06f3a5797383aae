//! Monte Carlo driver: draws contact pairs uniformly at random and applies the
//! elastic exchange whenever the drawn pair is approaching.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{collide_unit, is_approaching, kinetic_energy, total_momentum};
use crate::lattice::{Configuration, LatticeError, LatticeKind, LatticeSpec};
use crate::vec2::Vec2;

/// Generator used for every run. Seeded with `ChaCha8Rng::seed_from_u64`;
/// pair indices are drawn with `RngExt::random_range` (rand 0.10).
pub type SimRng = ChaCha8Rng;

/// Identifier of the pseudo-random stream, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "chacha8-rand_chacha-0.10-seed_from_u64/random_range-rand-0.10";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("cannot resolve initial ball: {0}")]
    Anchor(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("seed {0} appears more than once")]
    DuplicateSeed(u64),
}

/// Which ball receives the initial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Index(usize),
    /// Middle ball of the wall row. Half-plane only.
    BoundaryCenter,
    /// First ball of the wall row on the half-plane; last ball (top right) on
    /// the torus.
    Corner,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Index(i) => write!(f, "{i}"),
            Anchor::BoundaryCenter => f.write_str("boundary-center"),
            Anchor::Corner => f.write_str("corner"),
        }
    }
}

impl FromStr for Anchor {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boundary-center" => Ok(Anchor::BoundaryCenter),
            "corner" => Ok(Anchor::Corner),
            other => other
                .parse()
                .map(Anchor::Index)
                .map_err(|_| EngineError::Anchor(format!("unrecognised anchor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub anchor: Anchor,
    /// Normalised before use; must be nonzero.
    pub direction: Vec2,
    pub total_energy: f64,
}

impl InitialCondition {
    pub const DEFAULT_ENERGY: f64 = 100.0;

    /// Straight into the lattice from the middle of the wall on the
    /// half-plane; along +x from the top-right corner on the torus.
    pub fn default_for(kind: LatticeKind) -> Self {
        match kind {
            LatticeKind::HalfPlaneRect => Self {
                anchor: Anchor::BoundaryCenter,
                direction: Vec2::new(0.0, 1.0),
                total_energy: Self::DEFAULT_ENERGY,
            },
            LatticeKind::Torus => Self {
                anchor: Anchor::Corner,
                direction: Vec2::new(1.0, 0.0),
                total_energy: Self::DEFAULT_ENERGY,
            },
        }
    }

    fn resolve(&self, config: &Configuration) -> Result<(usize, Vec2), EngineError> {
        let n = config.len();
        let ball = match (self.anchor, config.kind()) {
            (Anchor::Index(i), _) => i,
            (Anchor::BoundaryCenter, LatticeKind::HalfPlaneRect) => {
                let wall = config.row(0);
                wall.start + wall.len() / 2
            }
            (Anchor::BoundaryCenter, LatticeKind::Torus) => {
                return Err(EngineError::Anchor(
                    "the torus has no boundary; give an explicit ball index".into(),
                ))
            }
            (Anchor::Corner, LatticeKind::HalfPlaneRect) => 0,
            (Anchor::Corner, LatticeKind::Torus) => n - 1,
        };
        if ball >= n {
            return Err(EngineError::Anchor(format!(
                "ball index {ball} out of range for {n} balls"
            )));
        }
        let norm = self.direction.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EngineError::Anchor(format!(
                "direction {} cannot be normalised",
                self.direction
            )));
        }
        let direction = self.direction * (1.0 / norm);
        if config.kind() == LatticeKind::HalfPlaneRect {
            if config.band_of[ball] != 0 {
                return Err(EngineError::Anchor(format!(
                    "ball {ball} is not on the wall row"
                )));
            }
            if !(direction.y > 0.0) {
                return Err(EngineError::Anchor(format!(
                    "direction {} does not point into the lattice",
                    self.direction
                )));
            }
        }
        if !(self.total_energy.is_finite() && self.total_energy > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "total energy must be positive, got {}",
                self.total_energy
            )));
        }
        Ok((ball, direction))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingRule {
    /// Stop once this many collisions have been applied.
    Accepted(u64),
    /// Stop once this many pairs have been drawn.
    Attempted(u64),
}

impl StoppingRule {
    pub fn target(self) -> u64 {
        match self {
            StoppingRule::Accepted(n) | StoppingRule::Attempted(n) => n,
        }
    }

    fn reached(self, state: &SimState) -> bool {
        match self {
            StoppingRule::Accepted(n) => state.accepted >= n,
            StoppingRule::Attempted(n) => state.attempted >= n,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub lattice: LatticeSpec,
    pub seed: u64,
    pub initial: InitialCondition,
    pub stop: StoppingRule,
    /// Accepted-collision counts at which the state is recorded, ascending.
    pub snapshots: Vec<u64>,
}

impl SimConfig {
    pub fn new(lattice: LatticeSpec, seed: u64, stop: StoppingRule) -> Self {
        Self {
            lattice,
            seed,
            initial: InitialCondition::default_for(lattice.kind),
            stop,
            snapshots: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.lattice.validate()?;
        if self.snapshots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EngineError::InvalidConfig(
                "snapshot counts must be strictly ascending".into(),
            ));
        }
        if let (StoppingRule::Accepted(target), Some(&last)) = (self.stop, self.snapshots.last()) {
            if last > target {
                return Err(EngineError::InvalidConfig(format!(
                    "snapshot at {last} collisions lies beyond the stop target {target}"
                )));
            }
        }
        Ok(())
    }
}

/// Mutable state of one run; owned by a single worker.
#[derive(Debug, Clone)]
pub struct SimState {
    pub velocities: Vec<Vec2>,
    pub rng: SimRng,
    pub accepted: u64,
    pub attempted: u64,
}

impl SimState {
    pub fn energy(&self) -> f64 {
        kinetic_energy(&self.velocities)
    }

    pub fn momentum(&self) -> Vec2 {
        total_momentum(&self.velocities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    /// Index into the configuration's adjacency list.
    pub pair: usize,
    pub applied: bool,
}

/// Velocities and counters captured when the accepted count hit a scheduled
/// value. Positions are those of the run's configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub accepted: u64,
    pub attempted: u64,
    pub velocities: Vec<Vec2>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest `|E - E0| / E0` seen at any snapshot or at the end.
    pub max_energy_drift: f64,
    pub initial_momentum: Vec2,
    pub final_momentum: Vec2,
    pub accepted: u64,
    pub attempted: u64,
    /// No contact pair was approaching, so no further collision was possible.
    pub absorbed: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SimConfig,
    pub final_state: SimState,
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
}

/// Places the whole energy on the anchored ball and seeds the generator.
pub fn init(config: &SimConfig, lattice: &Configuration) -> Result<SimState, EngineError> {
    let (ball, direction) = config.initial.resolve(lattice)?;
    let mut velocities = vec![Vec2::ZERO; lattice.len()];
    velocities[ball] = direction * (2.0 * config.initial.total_energy).sqrt();
    Ok(SimState {
        velocities,
        rng: SimRng::seed_from_u64(config.seed),
        accepted: 0,
        attempted: 0,
    })
}

/// Draws one contact pair and collides it if the pair is approaching.
#[inline]
pub fn step(state: &mut SimState, config: &Configuration) -> StepEvent {
    let pair = state.rng.random_range(0..config.adjacency.len());
    let (i, j) = config.adjacency[pair];
    let d = config.directions[pair];
    let (v1, v2) = (state.velocities[i], state.velocities[j]);
    state.attempted += 1;
    let applied = is_approaching(v1, v2, d);
    if applied {
        let out = collide_unit(v1, v2, d);
        state.velocities[i] = out.v1;
        state.velocities[j] = out.v2;
        state.accepted += 1;
    }
    StepEvent { pair, applied }
}

/// True when some contact pair is approaching.
pub fn has_approaching_pair(state: &SimState, config: &Configuration) -> bool {
    config
        .adjacency
        .iter()
        .zip(&config.directions)
        .any(|(&(i, j), &d)| is_approaching(state.velocities[i], state.velocities[j], d))
}

/// Builds the lattice and runs to completion.
pub fn run(config: &SimConfig) -> Result<RunResult, EngineError> {
    config.validate()?;
    let lattice = config.lattice.build()?;
    run_on(config, &lattice)
}

/// Runs on an already-built configuration, which must match `config.lattice`.
pub fn run_on(config: &SimConfig, lattice: &Configuration) -> Result<RunResult, EngineError> {
    config.validate()?;
    if lattice.spec != config.lattice {
        return Err(EngineError::InvalidConfig(
            "configuration was built from a different lattice spec".into(),
        ));
    }
    let mut state = init(config, lattice)?;
    let initial_energy = state.energy();
    let initial_momentum = state.momentum();
    let mut snapshots = Vec::with_capacity(config.snapshots.len());
    let mut pending = config.snapshots.iter().copied().peekable();
    let mut max_drift = 0.0f64;
    let mut absorbed = false;

    let mut take_due = |state: &SimState, snapshots: &mut Vec<Snapshot>, max_drift: &mut f64| {
        while pending.peek() == Some(&state.accepted) {
            pending.next();
            let energy = state.energy();
            *max_drift = max_drift.max(((energy - initial_energy) / initial_energy).abs());
            snapshots.push(Snapshot {
                accepted: state.accepted,
                attempted: state.attempted,
                velocities: state.velocities.clone(),
                energy,
            });
        }
    };

    take_due(&state, &mut snapshots, &mut max_drift);
    // After this many rejections in a row, check whether any pair can still
    // collide at all.
    let stall_limit = 4 * lattice.adjacency.len() as u64;
    let mut rejected_run = 0u64;
    while !config.stop.reached(&state) {
        if step(&mut state, lattice).applied {
            rejected_run = 0;
            take_due(&state, &mut snapshots, &mut max_drift);
        } else {
            rejected_run += 1;
            if rejected_run >= stall_limit {
                if !has_approaching_pair(&state, lattice) {
                    absorbed = true;
                    break;
                }
                rejected_run = 0;
            }
        }
    }

    let final_energy = state.energy();
    max_drift = max_drift.max(((final_energy - initial_energy) / initial_energy).abs());
    let summary = RunSummary {
        seed: config.seed,
        initial_energy,
        final_energy,
        max_energy_drift: max_drift,
        initial_momentum,
        final_momentum: state.momentum(),
        accepted: state.accepted,
        attempted: state.attempted,
        absorbed,
    };
    Ok(RunResult {
        config: config.clone(),
        final_state: state,
        snapshots,
        summary,
    })
}

/// One independent run per seed, in seed-list order. Runs execute on the
/// rayon pool; each depends only on its own seed.
pub fn run_batch(base: &SimConfig, seeds: &[u64]) -> Result<Vec<RunResult>, EngineError> {
    let mut seen = HashSet::with_capacity(seeds.len());
    for &seed in seeds {
        if !seen.insert(seed) {
            return Err(EngineError::DuplicateSeed(seed));
        }
    }
    if seeds.is_empty() {
        return Ok(Vec::new());
    }
    base.validate()?;
    let lattice = base.lattice.build()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let config = SimConfig {
                seed,
                ..base.clone()
            };
            run_on(&config, &lattice)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;

    fn pair_config(v1: Vec2, v2: Vec2) -> (Configuration, SimState) {
        let lattice = LatticeSpec::half_plane(2, 2).build().unwrap();
        // keep only the wall pair (0, 1): d points from ball 1 to ball 0
        let mut cfg = lattice.clone();
        cfg.adjacency.truncate(1);
        cfg.directions.truncate(1);
        let mut velocities = vec![Vec2::ZERO; 3];
        velocities[0] = v1;
        velocities[1] = v2;
        let state = SimState {
            velocities,
            rng: SimRng::seed_from_u64(0),
            accepted: 0,
            attempted: 0,
        };
        (cfg, state)
    }

    #[test]
    fn head_on_pair_swaps() {
        let (cfg, mut state) = pair_config(Vec2::new(1.0, 0.0), Vec2::ZERO);
        let ev = step(&mut state, &cfg);
        assert_eq!(
            ev,
            StepEvent {
                pair: 0,
                applied: true
            }
        );
        assert_eq!(state.velocities[0], Vec2::ZERO);
        assert_eq!(state.velocities[1], Vec2::new(1.0, 0.0));
        assert_eq!((state.accepted, state.attempted), (1, 1));
    }

    #[test]
    fn resting_pair_does_nothing() {
        let (cfg, mut state) = pair_config(Vec2::ZERO, Vec2::ZERO);
        let ev = step(&mut state, &cfg);
        assert!(!ev.applied);
        assert_eq!((state.accepted, state.attempted), (0, 1));
        assert!(state.velocities.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn init_sets_speed_from_energy() {
        let spec = LatticeSpec::torus(4, 4);
        let lattice = build_torus(&spec).unwrap();
        let mut config = SimConfig::new(spec, 1, StoppingRule::Accepted(0));
        let state = init(&config, &lattice).unwrap();
        assert!((state.velocities[15].norm() - 200f64.sqrt()).abs() < 1e-12);
        assert!((state.energy() - 100.0).abs() < 1e-12);
        assert_eq!(
            state.velocities.iter().filter(|v| v.norm() > 0.0).count(),
            1
        );

        config.initial = InitialCondition {
            anchor: Anchor::Index(3),
            direction: Vec2::new(0.0, 1.0),
            total_energy: 0.5,
        };
        let state = init(&config, &lattice).unwrap();
        assert_eq!(state.velocities[3], Vec2::new(0.0, 1.0));

        config.initial.direction = Vec2::ZERO;
        assert!(matches!(
            init(&config, &lattice),
            Err(EngineError::Anchor(_))
        ));
    }

    #[test]
    fn anchor_resolution_errors() {
        let spec = LatticeSpec::torus(4, 4);
        let lattice = build_torus(&spec).unwrap();
        let mut config = SimConfig::new(spec, 1, StoppingRule::Accepted(0));
        config.initial.anchor = Anchor::BoundaryCenter;
        assert!(matches!(
            init(&config, &lattice),
            Err(EngineError::Anchor(_))
        ));
        config.initial.anchor = Anchor::Index(16);
        assert!(init(&config, &lattice).is_err());

        let spec = LatticeSpec::half_plane(5, 4);
        let lattice = spec.build().unwrap();
        let mut config = SimConfig::new(spec, 1, StoppingRule::Accepted(0));
        let state = init(&config, &lattice).unwrap();
        assert!(state.velocities[2].y > 0.0);
        config.initial.anchor = Anchor::Index(6);
        assert!(init(&config, &lattice).is_err(), "off the wall row");
        config.initial.anchor = Anchor::Corner;
        config.initial.direction = Vec2::new(1.0, 0.0);
        assert!(init(&config, &lattice).is_err(), "parallel to the wall");
        config.initial.direction = Vec2::new(1.0, 1.0);
        assert!(init(&config, &lattice).is_ok());
    }

    #[test]
    fn anchor_parsing() {
        assert_eq!("corner".parse::<Anchor>().unwrap(), Anchor::Corner);
        assert_eq!(
            "boundary-center".parse::<Anchor>().unwrap(),
            Anchor::BoundaryCenter
        );
        assert_eq!("17".parse::<Anchor>().unwrap(), Anchor::Index(17));
        assert!("middle".parse::<Anchor>().is_err());
        assert_eq!(Anchor::BoundaryCenter.to_string(), "boundary-center");
    }

    #[test]
    fn zero_target_is_identity() {
        let mut config = SimConfig::new(LatticeSpec::torus(4, 4), 9, StoppingRule::Accepted(0));
        config.snapshots = vec![0];
        let result = run(&config).unwrap();
        assert_eq!(result.final_state.attempted, 0);
        assert_eq!(result.snapshots.len(), 1);
        let lattice = config.lattice.build().unwrap();
        assert_eq!(
            result.final_state.velocities,
            init(&config, &lattice).unwrap().velocities
        );
    }

    #[test]
    fn deterministic_event_sequence() {
        let spec = LatticeSpec::torus(4, 4);
        let lattice = spec.build().unwrap();
        let config = SimConfig::new(spec, 42, StoppingRule::Attempted(10));
        let events = |()| {
            let mut state = init(&config, &lattice).unwrap();
            (0..10)
                .map(|_| step(&mut state, &lattice))
                .collect::<Vec<_>>()
        };
        assert_eq!(events(()), events(()));
    }

    #[test]
    fn snapshots_land_on_schedule() {
        let mut config = SimConfig::new(LatticeSpec::torus(6, 6), 3, StoppingRule::Accepted(500));
        config.snapshots = vec![0, 1, 250, 500];
        let result = run(&config).unwrap();
        let counts: Vec<u64> = result.snapshots.iter().map(|s| s.accepted).collect();
        assert_eq!(counts, config.snapshots);
        assert!(result
            .snapshots
            .windows(2)
            .all(|w| w[0].attempted <= w[1].attempted));
        assert_eq!(result.summary.accepted, 500);
        assert!(result.summary.max_energy_drift < 1e-12);
    }

    #[test]
    fn invalid_schedules() {
        let mut config = SimConfig::new(LatticeSpec::torus(4, 4), 3, StoppingRule::Accepted(10));
        config.snapshots = vec![5, 5];
        assert!(run(&config).is_err());
        config.snapshots = vec![11];
        assert!(run(&config).is_err());
        config.stop = StoppingRule::Attempted(10);
        assert!(run(&config).is_ok());
    }

    #[test]
    fn stalled_lattice_is_reported_as_absorbed() {
        // a single pair whose only moving ball leaves the wall row outward
        let spec = LatticeSpec::half_plane(2, 2);
        let mut config = SimConfig::new(spec, 5, StoppingRule::Accepted(1_000));
        config.initial.anchor = Anchor::Index(0);
        config.initial.direction = Vec2::new(0.0, 1.0);
        let result = run(&config).unwrap();
        assert!(result.summary.absorbed);
        assert!(result.summary.accepted < 1_000);
        assert!((result.summary.final_energy - 100.0).abs() < 1e-12);
    }

    #[test]
    fn batch_rejects_duplicates_and_accepts_empty() {
        let base = SimConfig::new(LatticeSpec::torus(4, 4), 0, StoppingRule::Accepted(10));
        assert_eq!(
            run_batch(&base, &[7, 7]).unwrap_err(),
            EngineError::DuplicateSeed(7)
        );
        assert!(run_batch(&base, &[]).unwrap().is_empty());
    }

    #[test]
    fn batch_matches_sequential_runs() {
        let base = SimConfig::new(LatticeSpec::torus(6, 6), 0, StoppingRule::Accepted(300));
        let seeds = [11, 3, 8, 1];
        let batch = run_batch(&base, &seeds).unwrap();
        for (seed, res) in seeds.iter().zip(&batch) {
            let single = run(&SimConfig {
                seed: *seed,
                ..base.clone()
            })
            .unwrap();
            assert_eq!(res.final_state.velocities, single.final_state.velocities);
            assert_eq!(res.summary, single.summary);
        }
    }
}
