//! Triangular-lattice configurations: a staggered rectangle standing on a
//! straight wall (the half-plane approximation) and a flat torus.
//!
//! Row `k` sits at `y = k * sqrt(3) * radius`; odd rows are shifted right by
//! one radius. Balls are indexed row-major starting from row 0, which is the
//! injection wall of the half-plane rectangle.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::dynamics::unit_direction;
use crate::tables::fmt_real;
use crate::vec2::Vec2;

/// Relative tolerance on the contact distance `2 * radius`.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    HalfPlaneRect,
    Torus,
}

impl LatticeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LatticeKind::HalfPlaneRect => "half-plane-rect",
            LatticeKind::Torus => "torus",
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatticeKind {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half-plane-rect" | "half-plane" => Ok(LatticeKind::HalfPlaneRect),
            "torus" => Ok(LatticeKind::Torus),
            other => Err(LatticeError::InvalidSpec(format!(
                "unknown lattice kind `{other}`"
            ))),
        }
    }
}

/// Size and shape of a lattice, given as ball counts rather than extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Balls per even row.
    pub cols: usize,
    pub rows: usize,
    pub radius: f64,
}

impl LatticeSpec {
    pub const DEFAULT_RADIUS: f64 = 0.5;

    pub fn half_plane(cols: usize, rows: usize) -> Self {
        Self {
            kind: LatticeKind::HalfPlaneRect,
            cols,
            rows,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn torus(cols: usize, rows: usize) -> Self {
        Self {
            kind: LatticeKind::Torus,
            cols,
            rows,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let invalid = |msg: String| Err(LatticeError::InvalidSpec(msg));
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return invalid(format!("radius must be positive, got {}", self.radius));
        }
        if self.cols < 2 || self.rows < 2 {
            return invalid(format!(
                "need cols >= 2 and rows >= 2, got {}x{}",
                self.cols, self.rows
            ));
        }
        if self.kind == LatticeKind::Torus {
            if self.cols < 4 || self.rows < 4 {
                return invalid(format!(
                    "torus needs cols >= 4 and rows >= 4, got {}x{}",
                    self.cols, self.rows
                ));
            }
            if !self.rows.is_multiple_of(2) {
                return invalid(format!("torus needs an even row count, got {}", self.rows));
            }
        }
        Ok(())
    }

    /// Number of balls the builder will place.
    pub fn ball_count(&self) -> usize {
        match self.kind {
            LatticeKind::HalfPlaneRect => {
                let even = self.rows.div_ceil(2);
                let odd = self.rows / 2;
                even * self.cols + odd * (self.cols - 1)
            }
            LatticeKind::Torus => self.rows * self.cols,
        }
    }

    pub fn build(&self) -> Result<Configuration, LatticeError> {
        match self.kind {
            LatticeKind::HalfPlaneRect => build_half_plane_rect(self),
            LatticeKind::Torus => build_torus(self),
        }
    }

    fn row_pitch(&self) -> f64 {
        3f64.sqrt() * self.radius
    }
}

/// Immutable lattice geometry shared read-only by every run on it.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub spec: LatticeSpec,
    pub positions: Vec<Vec2>,
    /// Contact pairs `(i, j)` with `i < j`, sorted.
    pub adjacency: Vec<(usize, usize)>,
    /// Unit contact direction of each adjacency entry, pointing from `j`
    /// toward `i` (minimum image on the torus).
    pub directions: Vec<Vec2>,
    /// Row distance from the injection wall; identically zero on the torus.
    pub band_of: Vec<usize>,
    /// Periodic domain extents, present only for the torus.
    pub wrap: Option<Vec2>,
    /// Row-major offset of each row's first ball, plus a final sentinel.
    row_start: Vec<usize>,
}

impl Configuration {
    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.row_start.len() - 1
    }

    /// Balls in row `row`, as an index range.
    pub fn row(&self, row: usize) -> std::ops::Range<usize> {
        self.row_start[row]..self.row_start[row + 1]
    }

    pub fn has_bands(&self) -> bool {
        self.kind() == LatticeKind::HalfPlaneRect
    }

    pub fn num_bands(&self) -> usize {
        self.band_of.iter().max().map_or(0, |b| b + 1)
    }

    /// Ball count per band.
    pub fn band_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_bands()];
        for &b in &self.band_of {
            sizes[b] += 1;
        }
        sizes
    }

    /// Physical distance of band `band` from the wall.
    pub fn band_distance(&self, band: usize) -> f64 {
        band as f64 * self.spec.row_pitch()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.len()];
        for &(i, j) in &self.adjacency {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Displacement `p_i - p_j`, wrapped to the minimum image on the torus.
    pub fn displacement(&self, i: usize, j: usize) -> Vec2 {
        min_image(self.positions[i] - self.positions[j], self.wrap)
    }

    /// Writes `index,x,y,band`, one ball per line.
    pub fn write_positions<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# units=index:1;x:length;y:length;band:1")?;
        writeln!(out, "index,x,y,band")?;
        for (i, (p, band)) in self.positions.iter().zip(&self.band_of).enumerate() {
            writeln!(out, "{},{},{},{}", i, fmt_real(p.x), fmt_real(p.y), band)?;
        }
        Ok(())
    }

    /// Writes `i,j`, one contact pair per line.
    pub fn write_adjacency<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# units=i:1;j:1")?;
        writeln!(out, "i,j")?;
        for &(i, j) in &self.adjacency {
            writeln!(out, "{i},{j}")?;
        }
        Ok(())
    }
}

fn min_image(mut delta: Vec2, wrap: Option<Vec2>) -> Vec2 {
    if let Some(extent) = wrap {
        delta.x -= extent.x * (delta.x / extent.x).round();
        delta.y -= extent.y * (delta.y / extent.y).round();
    }
    delta
}

fn is_contact(distance: f64, radius: f64) -> bool {
    let target = 2.0 * radius;
    distance >= target * (1.0 - CONTACT_TOLERANCE) && distance <= target * (1.0 + CONTACT_TOLERANCE)
}

pub fn build_half_plane_rect(spec: &LatticeSpec) -> Result<Configuration, LatticeError> {
    if spec.kind != LatticeKind::HalfPlaneRect {
        return Err(LatticeError::InvalidSpec(format!(
            "expected a half-plane-rect spec, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    let r = spec.radius;
    let mut positions = Vec::with_capacity(spec.ball_count());
    let mut band_of = Vec::with_capacity(spec.ball_count());
    let mut row_start = Vec::with_capacity(spec.rows + 1);
    for row in 0..spec.rows {
        row_start.push(positions.len());
        let y = row as f64 * spec.row_pitch();
        let (count, offset) = if row % 2 == 0 {
            (spec.cols, 0.0)
        } else {
            (spec.cols - 1, r)
        };
        for c in 0..count {
            positions.push(Vec2::new(2.0 * r * c as f64 + offset, y));
            band_of.push(row);
        }
    }
    row_start.push(positions.len());
    finish(*spec, positions, band_of, row_start, None)
}

pub fn build_torus(spec: &LatticeSpec) -> Result<Configuration, LatticeError> {
    if spec.kind != LatticeKind::Torus {
        return Err(LatticeError::InvalidSpec(format!(
            "expected a torus spec, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    let r = spec.radius;
    let extent = Vec2::new(
        2.0 * r * spec.cols as f64,
        spec.row_pitch() * spec.rows as f64,
    );
    let mut positions = Vec::with_capacity(spec.ball_count());
    let mut row_start = Vec::with_capacity(spec.rows + 1);
    for row in 0..spec.rows {
        row_start.push(positions.len());
        let y = row as f64 * spec.row_pitch();
        let offset = if row % 2 == 0 { 0.0 } else { r };
        for c in 0..spec.cols {
            let x = (2.0 * r * c as f64 + offset).rem_euclid(extent.x);
            positions.push(Vec2::new(x, y));
        }
    }
    row_start.push(positions.len());
    let band_of = vec![0; positions.len()];
    finish(*spec, positions, band_of, row_start, Some(extent))
}

fn finish(
    spec: LatticeSpec,
    positions: Vec<Vec2>,
    band_of: Vec<usize>,
    row_start: Vec<usize>,
    wrap: Option<Vec2>,
) -> Result<Configuration, LatticeError> {
    let adjacency = grid_adjacency(&positions, spec.radius, wrap);
    let directions = adjacency
        .iter()
        .map(|&(i, j)| {
            let delta = min_image(positions[i] - positions[j], wrap);
            // contact pairs are 2r apart, so this never fails
            unit_direction(delta, Vec2::ZERO).expect("contact pair at zero distance")
        })
        .collect();
    Ok(Configuration {
        spec,
        positions,
        adjacency,
        directions,
        band_of,
        wrap,
        row_start,
    })
}

/// Contact pairs found by bucketing centres into a uniform grid whose cells
/// are at least one diameter wide, then testing the 3x3 block around each cell.
fn grid_adjacency(positions: &[Vec2], radius: f64, wrap: Option<Vec2>) -> Vec<(usize, usize)> {
    if positions.is_empty() {
        return Vec::new();
    }
    let diameter = 2.0 * radius;
    let (origin, extent) = match wrap {
        Some(extent) => (Vec2::ZERO, extent),
        None => {
            let (mut lo, mut hi) = (positions[0], positions[0]);
            for p in positions {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            (lo, hi - lo + Vec2::new(diameter, diameter))
        }
    };
    let nx = ((extent.x / diameter).floor() as usize).max(1);
    let ny = ((extent.y / diameter).floor() as usize).max(1);
    let cell = Vec2::new(extent.x / nx as f64, extent.y / ny as f64);

    let cell_of = |p: Vec2| -> (usize, usize) {
        let cx = (((p.x - origin.x) / cell.x).floor() as isize).clamp(0, nx as isize - 1);
        let cy = (((p.y - origin.y) / cell.y).floor() as isize).clamp(0, ny as isize - 1);
        (cx as usize, cy as usize)
    };

    // counting sort of ball indices by cell
    let mut start = vec![0usize; nx * ny + 1];
    let cells: Vec<usize> = positions
        .iter()
        .map(|&p| {
            let (cx, cy) = cell_of(p);
            cy * nx + cx
        })
        .collect();
    for &c in &cells {
        start[c + 1] += 1;
    }
    for k in 0..nx * ny {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; positions.len()];
    for (i, &c) in cells.iter().enumerate() {
        members[fill[c]] = i;
        fill[c] += 1;
    }

    let periodic = wrap.is_some();
    let mut pairs = Vec::new();
    let mut neighbours = Vec::with_capacity(9);
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        neighbours.clear();
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let mut x = cx as isize + dx;
                let mut y = cy as isize + dy;
                if periodic {
                    x = x.rem_euclid(nx as isize);
                    y = y.rem_euclid(ny as isize);
                } else if x < 0 || y < 0 || x >= nx as isize || y >= ny as isize {
                    continue;
                }
                let c = y as usize * nx + x as usize;
                if !neighbours.contains(&c) {
                    neighbours.push(c);
                }
            }
        }
        for &c in &neighbours {
            for &j in &members[start[c]..start[c + 1]] {
                if j <= i {
                    continue;
                }
                let d = min_image(p - positions[j], wrap).norm();
                if is_contact(d, radius) {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Brute-force O(N^2) contact search, independent of the grid used by the
/// builders. Intended for cross-checking generated configurations.
pub fn adjacency_oracle(
    positions: &[Vec2],
    radius: f64,
    wrap: Option<Vec2>,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let mut dx = positions[i].x - positions[j].x;
            let mut dy = positions[i].y - positions[j].y;
            if let Some(w) = wrap {
                // try every periodic image and keep the nearest
                let mut best = f64::INFINITY;
                for kx in -1..=1 {
                    for ky in -1..=1 {
                        let ex = dx + kx as f64 * w.x;
                        let ey = dy + ky as f64 * w.y;
                        best = best.min((ex * ex + ey * ey).sqrt());
                    }
                }
                dx = best;
                dy = 0.0;
            }
            let d = (dx * dx + dy * dy).sqrt();
            if is_contact(d, radius) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
