//! Measurements taken from simulation snapshots: energy per band, normalised
//! velocity-component histograms with a zero-mean Gaussian fit, a
//! Kolmogorov-Smirnov check against a centred normal law, and the two
//! correlation estimators.

use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::lattice::Configuration;
use crate::tables::{fmt_real, write_meta};
use crate::vec2::Vec2;

/// Bin width of the component histograms.
pub const COMPONENT_BIN_WIDTH: f64 = 0.025;
/// Bin width of the correlation histograms.
pub const CORRELATION_BIN_WIDTH: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("energy bands are only defined on half-plane configurations")]
    BandingUnavailable,
    #[error("all velocity components are zero; normalisation scale undefined")]
    AllZeroVelocities,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sigma must be positive and finite, got {0}")]
    DegenerateSigma(f64),
    #[error("sample lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a margin has zero variance")]
    DegenerateVariance,
    #[error("bin width {0} does not tile the range")]
    InvalidBinWidth(f64),
}

/// Kinetic energy grouped by row distance from the injection wall.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub band_energy: Vec<f64>,
    pub band_fraction: Vec<f64>,
    /// Physical distance of each band from the wall.
    pub band_distance: Vec<f64>,
    pub total: f64,
}

pub fn energy_profile(
    velocities: &[Vec2],
    config: &Configuration,
) -> Result<EnergyProfile, StatsError> {
    if !config.has_bands() {
        return Err(StatsError::BandingUnavailable);
    }
    let bands = config.num_bands();
    let mut band_energy = vec![0.0; bands];
    for (v, &band) in velocities.iter().zip(&config.band_of) {
        band_energy[band] += 0.5 * v.norm_sq();
    }
    let total: f64 = band_energy.iter().sum();
    let band_fraction = band_energy
        .iter()
        .map(|&e| if total > 0.0 { e / total } else { 0.0 })
        .collect();
    let band_distance = (0..bands).map(|b| config.band_distance(b)).collect();
    Ok(EnergyProfile {
        band_energy,
        band_fraction,
        band_distance,
        total,
    })
}

impl EnergyProfile {
    /// Share of the energy held by bands strictly beyond `band`.
    pub fn fraction_beyond(&self, band: usize) -> f64 {
        self.band_fraction
            .iter()
            .skip(band + 1)
            .fold(0.0, |a, f| a + f)
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_meta(
            &mut out,
            &[
                ("total_energy", fmt_real(self.total)),
                (
                    "units",
                    "band:1;distance:length;energy:energy;fraction:1".into(),
                ),
            ],
        )?;
        writeln!(out, "band,distance,energy,fraction")?;
        for (b, ((e, f), d)) in self
            .band_energy
            .iter()
            .zip(&self.band_fraction)
            .zip(&self.band_distance)
            .enumerate()
        {
            writeln!(
                out,
                "{b},{},{},{}",
                fmt_real(*d),
                fmt_real(*e),
                fmt_real(*f)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    /// Both components in one sample.
    Pooled,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Pooled => "pooled",
        }
    }

    pub fn components(self, velocities: &[Vec2]) -> Vec<f64> {
        match self {
            Axis::X => velocities.iter().map(|v| v.x).collect(),
            Axis::Y => velocities.iter().map(|v| v.y).collect(),
            Axis::Pooled => velocities.iter().flat_map(|v| [v.x, v.y]).collect(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Count,
    Density,
}

/// Fixed-width histogram over `[lo, hi]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalization: Normalization,
    /// Divisor applied to the raw samples before binning.
    pub scale_used: f64,
    /// Samples that fell outside `[lo, hi]`.
    pub out_of_range: u64,
}

impl Histogram {
    pub fn uniform(
        lo: f64,
        hi: f64,
        width: f64,
        samples: &[f64],
        scale: f64,
    ) -> Result<Self, StatsError> {
        let span = (hi - lo) / width;
        let bins = span.round();
        if !(width > 0.0) || bins < 1.0 || (span - bins).abs() > 1e-9 {
            return Err(StatsError::InvalidBinWidth(width));
        }
        let bins = bins as usize;
        let bin_edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        let mut out_of_range = 0;
        for &raw in samples {
            let s = raw / scale;
            if !(s >= lo && s <= hi) {
                out_of_range += 1;
                continue;
            }
            let k = (((s - lo) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self {
            bin_edges,
            counts,
            normalization: Normalization::Count,
            scale_used: scale,
            out_of_range,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self, k: usize) -> f64 {
        self.bin_edges[k + 1] - self.bin_edges[k]
    }

    /// Count divided by (in-range samples x bin width).
    pub fn densities(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if n > 0.0 {
                    c as f64 / (n * self.bin_width(k))
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn write_table<W: Write>(&self, mut out: W, meta: &[(&str, String)]) -> io::Result<()> {
        let mut all = vec![
            ("scale_used", fmt_real(self.scale_used)),
            (
                "normalization",
                match self.normalization {
                    Normalization::Count => "count".to_string(),
                    Normalization::Density => "density".to_string(),
                },
            ),
            (
                "units",
                "bin_left:scale_used;bin_right:scale_used;count:1;density:1/scale_used".to_string(),
            ),
        ];
        all.extend(meta.iter().cloned());
        write_meta(&mut out, &all)?;
        writeln!(out, "bin_left,bin_right,count,density")?;
        for (k, (&c, d)) in self.counts.iter().zip(self.densities()).enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_real(self.bin_edges[k]),
                fmt_real(self.bin_edges[k + 1]),
                c,
                fmt_real(d)
            )?;
        }
        Ok(())
    }
}

/// Largest absolute velocity component over both axes.
pub fn max_abs_component(velocities: &[Vec2]) -> f64 {
    velocities
        .iter()
        .flat_map(|v| [v.x.abs(), v.y.abs()])
        .fold(0.0, f64::max)
}

/// Histogram of one velocity component divided by the largest absolute
/// component of the snapshot, so every sample lies in `[-1, 1]`.
pub fn component_histogram(
    velocities: &[Vec2],
    axis: Axis,
    bin_width: f64,
) -> Result<Histogram, StatsError> {
    let scale = max_abs_component(velocities);
    if !(scale > 0.0) {
        return Err(StatsError::AllZeroVelocities);
    }
    let samples = axis.components(velocities);
    Ok(Histogram::uniform(-1.0, 1.0, bin_width, &samples, scale)?
        .with_normalization(Normalization::Density))
}

/// Histogram of correlation values over `[-1, 1]`.
pub fn correlation_histogram(values: &[f64], bin_width: f64) -> Result<Histogram, StatsError> {
    Histogram::uniform(-1.0, 1.0, bin_width, values, 1.0)
}

/// Zero-mean Gaussian fitted by maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    /// Set when sigma is zero, i.e. every sample is zero.
    pub degenerate: bool,
}

pub fn gaussian_fit(samples: &[f64]) -> Result<GaussianFit, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let sigma = (samples.iter().map(|s| s * s).sum::<f64>() / n as f64).sqrt();
    Ok(GaussianFit {
        mu: 0.0,
        sigma,
        n,
        degenerate: !(sigma > 0.0),
    })
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the centred normal law with standard deviation `sigma`.
pub fn normality_statistic(samples: &[f64], sigma: f64) -> Result<f64, StatsError> {
    if samples.len() < 8 {
        return Err(StatsError::InsufficientSamples {
            needed: 8,
            got: samples.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(StatsError::DegenerateSigma(sigma));
    }
    let phi = standard_normal();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi.cdf(x / sigma);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Upper `1 - alpha` quantile of the KS statistic for `n` draws from a
/// centred normal with known sigma, estimated from `reps` seeded
/// replications. With `estimate_sigma` the sigma is refitted on each
/// replication, matching a test that takes it from the data.
pub fn calibrate_ks_threshold(
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    estimate_sigma: bool,
) -> Result<f64, StatsError> {
    if reps == 0 {
        return Err(StatsError::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(reps);
    let mut draws = vec![0.0; n];
    for _ in 0..reps {
        for x in draws.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let sigma = if estimate_sigma {
            gaussian_fit(&draws)?.sigma
        } else {
            1.0
        };
        stats.push(normality_statistic(&draws, sigma)?);
    }
    stats.sort_by(f64::total_cmp);
    let rank = (((1.0 - alpha) * reps as f64).ceil() as usize).clamp(1, reps);
    Ok(stats[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    /// Velocities of contacting balls projected on their line of centres.
    Collisional,
    /// x against y component across balls.
    Xy,
}

impl CorrelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationKind::Collisional => "collisional",
            CorrelationKind::Xy => "xy",
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSample {
    pub kind: CorrelationKind,
    pub value: f64,
    pub n: usize,
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::InsufficientSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of `(v_i . d, v_j . d)` over every contact pair
/// `(i, j)`, with `d` the unit direction from `j` toward `i`.
pub fn collisional_correlation(
    velocities: &[Vec2],
    config: &Configuration,
) -> Result<CorrelationSample, StatsError> {
    let (first, second): (Vec<f64>, Vec<f64>) = config
        .adjacency
        .iter()
        .zip(&config.directions)
        .map(|(&(i, j), &d)| (velocities[i].dot(d), velocities[j].dot(d)))
        .unzip();
    Ok(CorrelationSample {
        kind: CorrelationKind::Collisional,
        value: pearson(&first, &second)?,
        n: first.len(),
    })
}

pub fn xy_correlation(velocities: &[Vec2]) -> Result<CorrelationSample, StatsError> {
    let xs = Axis::X.components(velocities);
    let ys = Axis::Y.components(velocities);
    Ok(CorrelationSample {
        kind: CorrelationKind::Xy,
        value: pearson(&xs, &ys)?,
        n: xs.len(),
    })
}

/// Mean of squares, i.e. the variance about a known zero mean.
pub fn mean_square(samples: &[f64]) -> f64 {
    samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use proptest::prelude::*;

    #[test]
    fn profile_of_initial_state() {
        let cfg = LatticeSpec::half_plane(5, 4).build().unwrap();
        let mut v = vec![Vec2::ZERO; cfg.len()];
        v[2] = Vec2::new(0.0, 200f64.sqrt());
        let p = energy_profile(&v, &cfg).unwrap();
        assert_eq!(p.band_fraction[0], 1.0);
        assert!(p.band_fraction[1..].iter().all(|&f| f == 0.0));
        assert!((p.total - 100.0).abs() < 1e-12);
        assert_eq!(p.fraction_beyond(0), 0.0);
    }

    #[test]
    fn profile_with_uniform_speed_follows_band_sizes() {
        let cfg = LatticeSpec::half_plane(6, 5).build().unwrap();
        let v: Vec<Vec2> = (0..cfg.len())
            .map(|i| {
                let t = i as f64 * 0.7;
                Vec2::new(t.cos(), t.sin()) * 3.0
            })
            .collect();
        let p = energy_profile(&v, &cfg).unwrap();
        let sizes = cfg.band_sizes();
        let n = cfg.len() as f64;
        for (f, s) in p.band_fraction.iter().zip(sizes) {
            assert!((f - s as f64 / n).abs() < 1e-12);
        }
        let sum: f64 = p.band_fraction.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_has_no_bands() {
        let cfg = LatticeSpec::torus(4, 4).build().unwrap();
        let v = vec![Vec2::new(1.0, 0.0); 16];
        assert_eq!(
            energy_profile(&v, &cfg),
            Err(StatsError::BandingUnavailable)
        );
    }

    #[test]
    fn histogram_extremes() {
        let v = [Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)];
        let h = component_histogram(&v, Axis::X, COMPONENT_BIN_WIDTH).unwrap();
        assert_eq!(h.counts.len(), 80);
        assert_eq!(h.bin_edges.len(), 81);
        assert_eq!(h.scale_used, 1.0);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[79], 1);
        assert_eq!(h.total(), 2);
        let pooled = component_histogram(&v, Axis::Pooled, COMPONENT_BIN_WIDTH).unwrap();
        assert_eq!(pooled.total(), 4);
    }

    #[test]
    fn histogram_of_zero_velocities() {
        let v = [Vec2::ZERO; 3];
        assert_eq!(
            component_histogram(&v, Axis::Y, COMPONENT_BIN_WIDTH),
            Err(StatsError::AllZeroVelocities)
        );
    }

    #[test]
    fn histogram_rejects_non_tiling_width() {
        assert!(Histogram::uniform(-1.0, 1.0, 0.3, &[0.0], 1.0).is_err());
        assert!(Histogram::uniform(-1.0, 1.0, 0.0, &[0.0], 1.0).is_err());
    }

    #[test]
    fn correlation_bins_step_by_two_hundredths() {
        let h = correlation_histogram(&[0.0, 0.011, -0.5, 1.0], CORRELATION_BIN_WIDTH).unwrap();
        assert_eq!(h.counts.len(), 100);
        for w in h.bin_edges.windows(2) {
            assert!((w[1] - w[0] - 0.02).abs() < 1e-12);
        }
        assert_eq!(h.counts[50], 2);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn density_integrates_to_one() {
        let v: Vec<Vec2> = (0..100)
            .map(|i| Vec2::new((i as f64 * 0.37).sin(), 0.3))
            .collect();
        let h = component_histogram(&v, Axis::X, COMPONENT_BIN_WIDTH).unwrap();
        let mass: f64 = h.densities().iter().map(|d| d * COMPONENT_BIN_WIDTH).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_table_layout() {
        let v = [Vec2::new(1.0, 0.5), Vec2::new(-0.5, 0.0)];
        let h = component_histogram(&v, Axis::X, 0.5).unwrap();
        let mut buf = Vec::new();
        h.write_table(&mut buf, &[("sigma", fmt_real(0.79))])
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let meta = crate::tables::read_meta(&text);
        assert_eq!(meta[0].0, "scale_used");
        assert_eq!(meta[2].0, "units");
        assert_eq!(meta[3], ("sigma".to_string(), fmt_real(0.79)));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "bin_left,bin_right,count,density");
        assert_eq!(rows.len(), 5);
    }

    #[test]
    fn fit_examples() {
        let fit = gaussian_fit(&[1.0, -1.0]).unwrap();
        assert_eq!(fit.sigma, 1.0);
        assert_eq!(fit.mu, 0.0);
        assert!(!fit.degenerate);
        let fit = gaussian_fit(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(fit.sigma, 0.0);
        assert!(fit.degenerate);
        assert!(matches!(
            gaussian_fit(&[1.0]),
            Err(StatsError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn ks_of_stratified_quantiles() {
        let phi = standard_normal();
        for (n, sigma) in [(8usize, 1.0), (100, 2.5), (1000, 0.3)] {
            let samples: Vec<f64> = (1..=n)
                .map(|k| sigma * phi.inverse_cdf((k as f64 - 0.5) / n as f64))
                .collect();
            let d = normality_statistic(&samples, sigma).unwrap();
            assert!((d - 0.5 / n as f64).abs() < 1e-9, "n={n}: {d}");
        }
    }

    #[test]
    fn ks_of_point_mass() {
        let d = normality_statistic(&[0.0; 10], 1.0).unwrap();
        assert!(d >= 0.5);
        assert_eq!(
            normality_statistic(&[0.0; 10], 0.0),
            Err(StatsError::DegenerateSigma(0.0))
        );
        assert!(normality_statistic(&[0.0; 7], 1.0).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // cov = 4, var_x = var_y = 5 (sums of centred products)
        assert!(
            (pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch(2, 1))
        );
        assert_eq!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::DegenerateVariance)
        );
    }

    #[test]
    fn xy_examples() {
        let line: Vec<Vec2> = (1..6).map(|k| Vec2::new(k as f64, k as f64)).collect();
        assert!((xy_correlation(&line).unwrap().value - 1.0).abs() < 1e-12);
        let cross = [
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        let c = xy_correlation(&cross).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.n, 4);
        assert_eq!(c.kind, CorrelationKind::Xy);
    }

    fn direct_pearson(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len() as f64;
        let (sx, sy) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (sxx, syy, sxy) = pairs.iter().fold((0.0, 0.0, 0.0), |a, p| {
            (a.0 + p.0 * p.0, a.1 + p.1 * p.1, a.2 + p.0 * p.1)
        });
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn collisional_linear_field() {
        // v_i = c p_i: for contact pairs the projections differ by c * 2r,
        // so they move together across pairs
        let cfg = LatticeSpec::half_plane(6, 5).build().unwrap();
        let v: Vec<Vec2> = cfg.positions.iter().map(|&p| p * 0.7).collect();
        let c = collisional_correlation(&v, &cfg).unwrap();
        let pairs: Vec<(f64, f64)> = cfg
            .adjacency
            .iter()
            .zip(&cfg.directions)
            .map(|(&(i, j), &d)| (v[i].dot(d), v[j].dot(d)))
            .collect();
        assert!((c.value - direct_pearson(&pairs)).abs() < 1e-9);
        assert_eq!(c.n, cfg.adjacency.len());
    }

    #[test]
    fn collisional_anticorrelated() {
        // keep only the wall row, a horizontal chain with d = (-1, 0)
        let mut cfg = LatticeSpec::half_plane(4, 2).build().unwrap();
        let keep: Vec<usize> = (0..cfg.adjacency.len())
            .filter(|&k| {
                let (i, j) = cfg.adjacency[k];
                cfg.band_of[i] == 0 && cfg.band_of[j] == 0
            })
            .collect();
        cfg.adjacency = keep.iter().map(|&k| cfg.adjacency[k]).collect();
        cfg.directions = keep.iter().map(|&k| cfg.directions[k]).collect();
        assert_eq!(cfg.adjacency, vec![(0, 1), (1, 2), (2, 3)]);
        let mut v = vec![Vec2::ZERO; cfg.len()];
        for (i, x) in [-1.0, 1.0, -1.0, 1.0].into_iter().enumerate() {
            v[i] = Vec2::new(x, 0.25);
        }
        // projections per pair: (1, -1), (-1, 1), (1, -1)
        let c = collisional_correlation(&v, &cfg).unwrap();
        assert!((c.value + 1.0).abs() < 1e-12);
        assert_eq!(c.kind, CorrelationKind::Collisional);
    }

    #[test]
    fn ks_calibration_is_reproducible() {
        let a = calibrate_ks_threshold(200, 0.01, 200, 3, false).unwrap();
        let b = calibrate_ks_threshold(200, 0.01, 200, 3, false).unwrap();
        assert_eq!(a, b);
        // asymptotic 1% critical value is 1.63 / sqrt(n)
        let asymptotic = 1.63 / 200f64.sqrt();
        assert!(
            (a - asymptotic).abs() < 0.3 * asymptotic,
            "{a} vs {asymptotic}"
        );
    }

    fn fixture_normals() -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        (0..64).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    proptest! {
        #[test]
        fn pearson_bounded(xs in prop::collection::vec(-1e3f64..1e3, 2..40), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + 10.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                prop_assert!(r.abs() <= 1.0 + 1e-12);
            }
            if let Ok(r) = pearson(&xs, &xs) {
                prop_assert!((r - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn fit_is_scale_equivariant(scale in 1e-3f64..1e3) {
            let z = fixture_normals();
            let scaled: Vec<f64> = z.iter().map(|x| x * scale).collect();
            let base = gaussian_fit(&z).unwrap().sigma;
            let fit = gaussian_fit(&scaled).unwrap().sigma;
            prop_assert!((fit - scale * base).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn histogram_is_complete(vs in prop::collection::vec((-50f64..50.0, -50f64..50.0), 1..60)) {
            let v: Vec<Vec2> = vs.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            prop_assume!(max_abs_component(&v) > 0.0);
            for (axis, expected) in [(Axis::X, v.len()), (Axis::Y, v.len()), (Axis::Pooled, 2 * v.len())] {
                let h = component_histogram(&v, axis, COMPONENT_BIN_WIDTH).unwrap();
                prop_assert_eq!(h.out_of_range, 0);
                prop_assert_eq!(h.total() as usize, expected);
            }
        }
    }
}
