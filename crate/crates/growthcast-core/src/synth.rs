//! Deterministic synthetic urban-growth series.
//!
//! Stands in for unavailable satellite data at desk scale: seeded urban
//! blobs grow strictly by accretion at their boundary, and each mask is
//! rendered as a noisy pseudo-satellite image with a textured non-urban
//! background so the segmentation step has realistic work to do.

use crate::maskops::BinaryMask;
use crate::pipeline::{Raster, SourceDepth};
use crate::tensor::RngStream;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("initial urban fraction must be in (0,1)")]
    BadInitialFraction,
    #[error("growth rate must be in [0,1]")]
    BadGrowthRate,
    #[error("need at least 2 dates, got {0}")]
    TooFewDates(usize),
    #[error("need at least 2 masks, got {0}")]
    TooFewMasks(usize),
}

#[derive(Debug, Clone)]
pub struct GrowthConfig {
    pub width: usize,
    pub height: usize,
    /// Number of dates T in the series.
    pub dates: usize,
    pub seed: u64,
    /// Initial urban fraction f0 (approximate; blobs are painted until
    /// the fraction is reached).
    pub initial_fraction: f64,
    /// Fraction of boundary-adjacent non-urban pixels converted per step.
    pub growth_rate: f64,
    /// Gaussian noise level of the rendered pseudo-satellite images.
    pub noise_sigma: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            width: 128,
            height: 128,
            dates: 3,
            seed: 42,
            initial_fraction: 0.15,
            growth_rate: 0.05,
            noise_sigma: 0.05,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return Err(SynthError::BadInitialFraction);
        }
        if !(0.0..=1.0).contains(&self.growth_rate) {
            return Err(SynthError::BadGrowthRate);
        }
        if self.dates < 2 {
            return Err(SynthError::TooFewDates(self.dates));
        }
        Ok(())
    }
}

/// Ground-truth masks and their rendered images, one per date.
#[derive(Debug, Clone)]
pub struct GrowthSeries {
    pub masks: Vec<BinaryMask>,
    pub renders: Vec<Raster>,
}

/// Grayscale rendering levels.
const URBAN_LEVEL: f64 = 0.80;
const BACKGROUND_LEVEL: f64 = 0.25;
const TEXTURE_AMPLITUDE: f64 = 0.08;
const TEXTURE_CELL: usize = 16;

/// Generate the full series. Deterministic per seed.
pub fn generate_series(cfg: &GrowthConfig) -> Result<GrowthSeries, SynthError> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);

    let mut mask = seed_blobs(cfg, &mut root.derive(0));
    let mut masks = vec![mask.clone()];
    for step in 1..cfg.dates {
        mask = grow(&mask, cfg.growth_rate, &mut root.derive(step as u64));
        masks.push(mask.clone());
    }
    let renders = masks
        .iter()
        .enumerate()
        .map(|(t, m)| render(m, cfg.noise_sigma, &mut root.derive(1000 + t as u64)))
        .collect();
    Ok(GrowthSeries { masks, renders })
}

/// Paint random disks until the urban fraction is reached.
fn seed_blobs(cfg: &GrowthConfig, rng: &mut RngStream) -> BinaryMask {
    let (w, h) = (cfg.width, cfg.height);
    let mut mask = BinaryMask::new(w, h);
    let target = (cfg.initial_fraction * (w * h) as f64) as usize;
    let r_max = (w.min(h) / 16).max(3);
    let mut guard = 0;
    while mask.count_ones() < target && guard < 10_000 {
        guard += 1;
        let cx = rng.below(w) as isize;
        let cy = rng.below(h) as isize;
        let r = (2 + rng.below(r_max.saturating_sub(1).max(1))) as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    mask.set(x as usize, y as usize, true);
                }
            }
        }
    }
    mask
}

/// Non-urban pixels 8-adjacent to urban, row-major, with their urban
/// neighbor counts.
fn boundary_candidates(mask: &BinaryMask) -> Vec<(usize, u32)> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                continue;
            }
            let mut n = 0u32;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && mask.get(nx as usize, ny as usize)
                    {
                        n += 1;
                    }
                }
            }
            if n > 0 {
                out.push((y * w + x, n));
            }
        }
    }
    out
}

/// Number of boundary-adjacent non-urban pixels (the growth candidates).
pub fn boundary_candidate_count(mask: &BinaryMask) -> usize {
    boundary_candidates(mask).len()
}

/// One accretion step: convert round(g * candidates) boundary pixels,
/// preferring pixels with more urban neighbors (concavities fill first)
/// and breaking ties with seeded random keys.
fn grow(mask: &BinaryMask, rate: f64, rng: &mut RngStream) -> BinaryMask {
    let mut candidates = boundary_candidates(mask);
    let k = (rate * candidates.len() as f64).round() as usize;
    let mut out = mask.clone();
    if k == 0 || candidates.is_empty() {
        return out;
    }
    let mut keyed: Vec<(u32, u64, usize)> = candidates
        .drain(..)
        .map(|(idx, n)| (n, rng.next_u64(), idx))
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, _, idx) in keyed.iter().take(k) {
        let (w, x, y) = (mask.width(), idx % mask.width(), idx / mask.width());
        debug_assert!(x < w);
        out.set(x, y, true);
    }
    out
}

/// Mask -> grayscale pseudo-satellite image: bright urban pixels over a
/// low-frequency textured background, plus Gaussian noise, clipped to
/// [0,1].
fn render(mask: &BinaryMask, sigma: f64, rng: &mut RngStream) -> Raster {
    let (w, h) = (mask.width(), mask.height());
    // Coarse random grid, bilinearly interpolated, gives the background
    // its spatial texture.
    let gw = w.div_ceil(TEXTURE_CELL) + 1;
    let gh = h.div_ceil(TEXTURE_CELL) + 1;
    let grid: Vec<f64> = (0..gw * gh)
        .map(|_| rng.uniform_symmetric(TEXTURE_AMPLITUDE))
        .collect();
    let texture = |x: usize, y: usize| -> f64 {
        let fx = x as f64 / TEXTURE_CELL as f64;
        let fy = y as f64 / TEXTURE_CELL as f64;
        let (gx, gy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - gx as f64, fy - gy as f64);
        let at = |i: usize, j: usize| grid[j.min(gh - 1) * gw + i.min(gw - 1)];
        let top = at(gx, gy) * (1.0 - tx) + at(gx + 1, gy) * tx;
        let bot = at(gx, gy + 1) * (1.0 - tx) + at(gx + 1, gy + 1) * tx;
        top * (1.0 - ty) + bot * ty
    };
    let mut data = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let base = if mask.get(x, y) {
                URBAN_LEVEL
            } else {
                BACKGROUND_LEVEL + texture(x, y)
            };
            let v = rng.normal(base, sigma).clamp(0.0, 1.0);
            data[y * w + x] = v as f32;
        }
    }
    Raster::new(w, h, 1, data, SourceDepth::Float).expect("values clipped to [0,1]")
}

/// Per-date urban fractions and per-step changed-pixel counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthStats {
    pub fractions: Vec<f64>,
    pub changed: Vec<usize>,
}

pub fn growth_stats(masks: &[BinaryMask]) -> Result<GrowthStats, SynthError> {
    if masks.len() < 2 {
        return Err(SynthError::TooFewMasks(masks.len()));
    }
    let total = (masks[0].width() * masks[0].height()) as f64;
    let fractions = masks
        .iter()
        .map(|m| m.count_ones() as f64 / total)
        .collect();
    let changed = masks
        .windows(2)
        .map(|w| w[1].difference_count(&w[0]).expect("same dims"))
        .collect();
    Ok(GrowthStats { fractions, changed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> GrowthConfig {
        GrowthConfig {
            width: 64,
            height: 64,
            dates: 4,
            seed,
            ..GrowthConfig::default()
        }
    }

    #[test]
    fn growth_is_monotone_accretion() {
        let s = generate_series(&small_cfg(1)).unwrap();
        for w in s.masks.windows(2) {
            assert!(w[0].is_subset_of(&w[1]).unwrap());
        }
    }

    #[test]
    fn same_seed_gives_identical_series() {
        let a = generate_series(&small_cfg(9)).unwrap();
        let b = generate_series(&small_cfg(9)).unwrap();
        assert_eq!(a.masks, b.masks);
        for (ra, rb) in a.renders.iter().zip(&b.renders) {
            assert_eq!(ra.data(), rb.data());
        }
    }

    #[test]
    fn zero_growth_keeps_all_masks_equal() {
        let cfg = GrowthConfig {
            growth_rate: 0.0,
            ..small_cfg(3)
        };
        let s = generate_series(&cfg).unwrap();
        for m in &s.masks[1..] {
            assert_eq!(*m, s.masks[0]);
        }
        let stats = growth_stats(&s.masks).unwrap();
        assert!(stats.changed.iter().all(|&c| c == 0));
    }

    #[test]
    fn renders_stay_in_unit_interval() {
        let s = generate_series(&small_cfg(5)).unwrap();
        for r in &s.renders {
            assert!(r.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn fractions_non_decreasing_and_stats_match() {
        let s = generate_series(&small_cfg(7)).unwrap();
        let stats = growth_stats(&s.masks).unwrap();
        for w in stats.fractions.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(stats.changed.len(), s.masks.len() - 1);
    }

    #[test]
    fn measured_growth_tracks_configured_rate() {
        // Rate = converted / boundary candidates before the step.
        let mut rel_errors = Vec::new();
        for seed in 0..10 {
            let cfg = GrowthConfig {
                width: 128,
                height: 128,
                dates: 3,
                seed,
                ..GrowthConfig::default()
            };
            let s = generate_series(&cfg).unwrap();
            let stats = growth_stats(&s.masks).unwrap();
            for (t, &changed) in stats.changed.iter().enumerate() {
                let boundary = boundary_candidate_count(&s.masks[t]) as f64;
                let measured = changed as f64 / boundary;
                rel_errors.push((measured - cfg.growth_rate).abs() / cfg.growth_rate);
            }
        }
        let worst = rel_errors.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 0.2, "worst relative rate error {worst}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GrowthConfig::default();
        cfg.dates = 1;
        assert!(matches!(
            generate_series(&cfg),
            Err(SynthError::TooFewDates(1))
        ));
        cfg.dates = 3;
        cfg.initial_fraction = 0.0;
        assert!(matches!(
            generate_series(&cfg),
            Err(SynthError::BadInitialFraction)
        ));
    }
}
