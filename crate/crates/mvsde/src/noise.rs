//! Reproducible, resolution-coupled driving noise.
//!
//! A [`NoiseBundle`] realizes, per particle, the Brownian increments on the
//! finest grid (`n_max` cells, `n_max` a power of two) and the full list of
//! Poisson jump events (time, mark) on `[0, T)`. Coarser schemes consume the
//! same bundle through a [`NoiseView`]: the coarse Brownian increment is the
//! sum of the fine increments it contains, and each jump event is applied in
//! whatever coarse cell contains its time. Runs at every resolution that
//! divides `n_max` are therefore driven by literally the same randomness,
//! which is what makes coupled strong-error estimates possible.
//!
//! Every particle owns counter-based substreams keyed by
//! `(seed, domain, particle)`, so the bundle is bit-identical no matter how
//! many worker threads generate it, and particle `i`'s noise does not change
//! when the particle count grows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::LevySpec;
use crate::rng::{stream, Domain};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("finest resolution must be a power of two, got {n_max}")]
    NotPowerOfTwo { n_max: usize },
    #[error("horizon must be positive and finite, got {horizon}")]
    BadHorizon { horizon: f64 },
    #[error("{n} does not divide the finest resolution {n_max}")]
    NotADivisor { n: usize, n_max: usize },
    #[error("bundle holds {available} particles, requested index {requested}")]
    ParticleOutOfRange { requested: usize, available: usize },
    #[error("inconsistent bundle parts: {0}")]
    BadParts(String),
    #[error("unsupported bundle file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One jump event: an arrival time in `[0, T)` and its mark.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: Vec<f64>,
}

/// Per-particle Wiener increments at the finest resolution plus explicit
/// jump events. Immutable and shareable across threads once generated.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    seed: u64,
    particle_count: usize,
    wiener_dim: usize,
    n_max: usize,
    horizon: f64,
    mark_dim: usize,
    /// `[particle][cell][component]`, each component `N(0, T / n_max)`.
    increments: Vec<f64>,
    /// Flattened jump times, ascending within each particle's range.
    jump_times: Vec<f64>,
    /// Flattened marks, `mark_dim` per event, same order as `jump_times`.
    jump_marks: Vec<f64>,
    /// Particle `i`'s events live at `jump_offsets[i]..jump_offsets[i + 1]`.
    jump_offsets: Vec<usize>,
}

impl NoiseBundle {
    /// Realizes the driving noise for `particle_count` particles.
    ///
    /// Increments are i.i.d. `N(0, T / n_max)` per cell and component; jump
    /// counts are Poisson with intensity `levy.rate() * T`; jump times are
    /// uniform on `[0, T)`; marks come from the Levy mark sampler.
    pub fn generate(
        seed: u64,
        particle_count: usize,
        wiener_dim: usize,
        n_max: usize,
        levy: &LevySpec,
        horizon: f64,
    ) -> Result<Self, NoiseError> {
        if n_max == 0 || !n_max.is_power_of_two() {
            return Err(NoiseError::NotPowerOfTwo { n_max });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(NoiseError::BadHorizon { horizon });
        }
        let mark_dim = levy.mark_dim();
        let cell_std = (horizon / n_max as f64).sqrt();
        let rate = levy.rate();

        let per_particle: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..particle_count)
            .into_par_iter()
            .map(|particle| {
                let mut wiener = stream(seed, Domain::Wiener, particle as u64);
                let mut incs = vec![0.0; n_max * wiener_dim];
                for slot in &mut incs {
                    let z: f64 = wiener.sample(rand_distr::StandardNormal);
                    *slot = cell_std * z;
                }

                let mut jumps = stream(seed, Domain::Jump, particle as u64);
                let count = if rate > 0.0 {
                    let poisson =
                        Poisson::new(rate * horizon).expect("positive jump intensity");
                    poisson.sample(&mut jumps) as usize
                } else {
                    0
                };
                let mut events: Vec<(f64, Vec<f64>)> = (0..count)
                    .map(|_| {
                        let time = jumps.random_range(0.0..horizon);
                        let mut mark = vec![0.0; mark_dim];
                        levy.sample_mark(&mut jumps, &mut mark);
                        (time, mark)
                    })
                    .collect();
                events.sort_by(|a, b| a.0.total_cmp(&b.0));
                // ties have probability zero; nudge so times stay strictly
                // increasing even if the sampler ever collides
                for i in 1..events.len() {
                    if events[i].0 <= events[i - 1].0 {
                        events[i].0 = f64::from_bits(events[i - 1].0.to_bits() + 1);
                    }
                }
                let mut times = Vec::with_capacity(count);
                let mut marks = Vec::with_capacity(count * mark_dim);
                for (time, mark) in events {
                    times.push(time);
                    marks.extend_from_slice(&mark);
                }
                (incs, times, marks)
            })
            .collect();

        let mut increments = Vec::with_capacity(particle_count * n_max * wiener_dim);
        let mut jump_times = Vec::new();
        let mut jump_marks = Vec::new();
        let mut jump_offsets = Vec::with_capacity(particle_count + 1);
        jump_offsets.push(0);
        for (incs, times, marks) in per_particle {
            increments.extend_from_slice(&incs);
            jump_times.extend_from_slice(&times);
            jump_marks.extend_from_slice(&marks);
            jump_offsets.push(jump_times.len());
        }

        Ok(Self {
            seed,
            particle_count,
            wiener_dim,
            n_max,
            horizon,
            mark_dim,
            increments,
            jump_times,
            jump_marks,
            jump_offsets,
        })
    }

    /// Builds a bundle from explicit parts — handy for deterministic tests
    /// and for replaying externally recorded noise. `events` is one sorted
    /// event list per particle.
    pub fn from_parts(
        seed: u64,
        wiener_dim: usize,
        n_max: usize,
        horizon: f64,
        mark_dim: usize,
        increments: Vec<f64>,
        events: Vec<Vec<JumpEvent>>,
    ) -> Result<Self, NoiseError> {
        if n_max == 0 || !n_max.is_power_of_two() {
            return Err(NoiseError::NotPowerOfTwo { n_max });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(NoiseError::BadHorizon { horizon });
        }
        let per = n_max * wiener_dim;
        if per == 0 || increments.len() % per != 0 {
            return Err(NoiseError::BadParts(format!(
                "increment length {} is not a multiple of n_max * wiener_dim = {per}",
                increments.len()
            )));
        }
        let particle_count = increments.len() / per;
        if events.len() != particle_count {
            return Err(NoiseError::BadParts(format!(
                "{} event lists for {particle_count} particles",
                events.len()
            )));
        }
        let mut jump_times = Vec::new();
        let mut jump_marks = Vec::new();
        let mut jump_offsets = vec![0];
        for list in &events {
            let mut prev = f64::NEG_INFINITY;
            for event in list {
                if !(event.time >= 0.0 && event.time < horizon) {
                    return Err(NoiseError::BadParts(format!(
                        "jump time {} outside [0, {horizon})",
                        event.time
                    )));
                }
                if event.time <= prev {
                    return Err(NoiseError::BadParts(
                        "jump times must be strictly increasing".into(),
                    ));
                }
                if event.mark.len() != mark_dim {
                    return Err(NoiseError::BadParts("mark dimension mismatch".into()));
                }
                prev = event.time;
                jump_times.push(event.time);
                jump_marks.extend_from_slice(&event.mark);
            }
            jump_offsets.push(jump_times.len());
        }
        Ok(Self {
            seed,
            particle_count,
            wiener_dim,
            n_max,
            horizon,
            mark_dim,
            increments,
            jump_times,
            jump_marks,
            jump_offsets,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    pub fn wiener_dim(&self) -> usize {
        self.wiener_dim
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    /// Number of jump events of one particle.
    pub fn jump_count(&self, particle: usize) -> usize {
        self.jump_offsets[particle + 1] - self.jump_offsets[particle]
    }

    /// Coarsened read-only view at resolution `n` (must divide `n_max`).
    pub fn view(&self, n: usize) -> Result<NoiseView<'_>, NoiseError> {
        if n == 0 || self.n_max % n != 0 {
            return Err(NoiseError::NotADivisor { n, n_max: self.n_max });
        }
        Ok(NoiseView { bundle: self, n, stride: self.n_max / n })
    }

    /// A copy whose particle `i` carries particle `perm[i]`'s noise.
    /// Used for permutation-equivariance diagnostics.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, NoiseError> {
        if perm.len() != self.particle_count {
            return Err(NoiseError::BadParts("permutation length mismatch".into()));
        }
        let per = self.n_max * self.wiener_dim;
        let mut increments = Vec::with_capacity(self.increments.len());
        let mut events = Vec::with_capacity(self.particle_count);
        for &src in perm {
            if src >= self.particle_count {
                return Err(NoiseError::ParticleOutOfRange {
                    requested: src,
                    available: self.particle_count,
                });
            }
            increments.extend_from_slice(&self.increments[src * per..(src + 1) * per]);
            let range = self.jump_offsets[src]..self.jump_offsets[src + 1];
            events.push(
                range
                    .map(|e| JumpEvent {
                        time: self.jump_times[e],
                        mark: self.jump_marks[e * self.mark_dim..(e + 1) * self.mark_dim]
                            .to_vec(),
                    })
                    .collect(),
            );
        }
        Self::from_parts(
            self.seed,
            self.wiener_dim,
            self.n_max,
            self.horizon,
            self.mark_dim,
            increments,
            events,
        )
    }

    /// Writes the bundle in the versioned little-endian layout documented in
    /// the repository README.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NoiseError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"MVNB")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in [
            self.particle_count as u64,
            self.wiener_dim as u64,
            self.n_max as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&(self.mark_dim as u64).to_le_bytes())?;
        w.write_all(&(self.jump_times.len() as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.jump_offsets {
            w.write_all(&(*v as u64).to_le_bytes())?;
        }
        for v in &self.jump_times {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.jump_marks {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a bundle previously written by [`NoiseBundle::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"MVNB" {
            return Err(NoiseError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(NoiseError::Format(format!("unsupported version {version}")));
        }
        let seed = read_u64(&mut r)?;
        let particle_count = read_u64(&mut r)? as usize;
        let wiener_dim = read_u64(&mut r)? as usize;
        let n_max = read_u64(&mut r)? as usize;
        let horizon = read_f64(&mut r)?;
        let mark_dim = read_u64(&mut r)? as usize;
        let event_count = read_u64(&mut r)? as usize;
        let mut increments = vec![0.0; particle_count * n_max * wiener_dim];
        for v in &mut increments {
            *v = read_f64(&mut r)?;
        }
        let mut jump_offsets = vec![0usize; particle_count + 1];
        for v in &mut jump_offsets {
            *v = read_u64(&mut r)? as usize;
        }
        if jump_offsets[0] != 0 || *jump_offsets.last().unwrap() != event_count {
            return Err(NoiseError::Format("inconsistent jump offsets".into()));
        }
        let mut jump_times = vec![0.0; event_count];
        for v in &mut jump_times {
            *v = read_f64(&mut r)?;
        }
        let mut jump_marks = vec![0.0; event_count * mark_dim];
        for v in &mut jump_marks {
            *v = read_f64(&mut r)?;
        }
        Ok(Self {
            seed,
            particle_count,
            wiener_dim,
            n_max,
            horizon,
            mark_dim,
            increments,
            jump_times,
            jump_marks,
            jump_offsets,
        })
    }

    fn increment_slice(&self, particle: usize, fine_cell: usize) -> &[f64] {
        let base = (particle * self.n_max + fine_cell) * self.wiener_dim;
        &self.increments[base..base + self.wiener_dim]
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, NoiseError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64, NoiseError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64, NoiseError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Coarsened, read-only view of a bundle at resolution `n`.
///
/// Pure: the underlying bundle is never mutated. Summation of fine
/// increments runs in fixed fine-index order, so coarse increments are
/// bit-identical across runs and thread counts.
#[derive(Debug, Clone, Copy)]
pub struct NoiseView<'a> {
    bundle: &'a NoiseBundle,
    n: usize,
    stride: usize,
}

impl<'a> NoiseView<'a> {
    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Fine cells per coarse cell.
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn bundle(&self) -> &'a NoiseBundle {
        self.bundle
    }

    /// Brownian increment over coarse cell `cell` = sum of its fine cells.
    pub fn wiener_increment(&self, particle: usize, cell: usize, out: &mut [f64]) {
        self.partial_wiener_increment(particle, cell, self.stride, out);
    }

    /// Brownian increment over the first `fine_count` fine cells of `cell`
    /// (used by the within-cell displacement probes).
    pub fn partial_wiener_increment(
        &self,
        particle: usize,
        cell: usize,
        fine_count: usize,
        out: &mut [f64],
    ) {
        debug_assert!(fine_count <= self.stride);
        out.fill(0.0);
        let first = cell * self.stride;
        for fine in first..first + fine_count {
            for (slot, v) in out.iter_mut().zip(self.bundle.increment_slice(particle, fine)) {
                *slot += v;
            }
        }
    }

    /// Start of coarse cell `cell` in time units.
    pub fn cell_start(&self, cell: usize) -> f64 {
        cell as f64 * self.bundle.horizon / self.n as f64
    }

    /// Jump events of `particle` with time in `[cell start, limit)`.
    /// `limit = None` means the full cell.
    pub fn jumps_in_cell(
        &self,
        particle: usize,
        cell: usize,
        limit: Option<f64>,
    ) -> JumpEvents<'a> {
        let lo_time = self.cell_start(cell);
        let hi_time = match limit {
            Some(t) => t,
            None if cell + 1 == self.n => self.bundle.horizon,
            None => self.cell_start(cell + 1),
        };
        let times =
            &self.bundle.jump_times[self.bundle.jump_offsets[particle]..self.bundle.jump_offsets[particle + 1]];
        let lo = times.partition_point(|&t| t < lo_time);
        let hi = times.partition_point(|&t| t < hi_time);
        let base = self.bundle.jump_offsets[particle];
        JumpEvents { bundle: self.bundle, next: base + lo, end: base + hi }
    }
}

/// Iterator over `(time, mark)` pairs of one particle inside one cell.
pub struct JumpEvents<'a> {
    bundle: &'a NoiseBundle,
    next: usize,
    end: usize,
}

impl<'a> Iterator for JumpEvents<'a> {
    type Item = (f64, &'a [f64]);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let mark_dim = self.bundle.mark_dim;
        Some((self.bundle.jump_times[i], &self.bundle.jump_marks[i * mark_dim..(i + 1) * mark_dim]))
    }
}

impl ExactSizeIterator for JumpEvents<'_> {
    fn len(&self) -> usize {
        self.end - self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevySpec;

    fn uniform_levy(lambda: f64) -> LevySpec {
        LevySpec::finite_activity(lambda, 1, |rng, out| out[0] = rng.random_range(-1.0..1.0))
            .unwrap()
    }

    #[test]
    fn zero_intensity_means_no_jumps() {
        let bundle = NoiseBundle::generate(7, 50, 1, 16, &LevySpec::none(), 1.0).unwrap();
        for i in 0..50 {
            assert_eq!(bundle.jump_count(i), 0);
        }
    }

    #[test]
    fn rejects_bad_resolutions() {
        let levy = LevySpec::none();
        assert!(matches!(
            NoiseBundle::generate(7, 1, 1, 12, &levy, 1.0),
            Err(NoiseError::NotPowerOfTwo { .. })
        ));
        let bundle = NoiseBundle::generate(7, 1, 1, 16, &levy, 1.0).unwrap();
        assert!(matches!(bundle.view(3), Err(NoiseError::NotADivisor { .. })));
        assert!(bundle.view(8).is_ok());
    }

    #[test]
    fn increment_variance_matches_cell_size() {
        // N = 1 particle, n_max = 1024: sample variance of the increment
        // components should be T / 1024 within 3 SE over ~10^5 draws
        let n_max = 1024;
        let particles = 100;
        let bundle = NoiseBundle::generate(3, particles, 1, n_max, &LevySpec::none(), 1.0).unwrap();
        let view = bundle.view(n_max).unwrap();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut buf = [0.0];
        let count = (particles * n_max) as f64;
        for p in 0..particles {
            for c in 0..n_max {
                view.wiener_increment(p, c, &mut buf);
                sum += buf[0];
                sumsq += buf[0] * buf[0];
            }
        }
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        let expected = 1.0 / n_max as f64;
        let se = expected * (2.0 / count).sqrt();
        assert!(
            (var - expected).abs() < 3.0 * se,
            "variance {var} vs expected {expected} (3 SE = {})",
            3.0 * se
        );
    }

    #[test]
    fn jump_count_matches_intensity() {
        let lambda = 2.0;
        let particles = 10_000;
        let bundle =
            NoiseBundle::generate(5, particles, 1, 4, &uniform_levy(lambda), 1.0).unwrap();
        let total: usize = (0..particles).map(|i| bundle.jump_count(i)).sum();
        let mean = total as f64 / particles as f64;
        let se = (lambda / particles as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * se, "mean jump count {mean} vs {lambda}");
        // times strictly increasing and inside [0, T)
        for p in 0..particles {
            let view = bundle.view(4).unwrap();
            let mut prev = -1.0;
            for c in 0..4 {
                for (t, _) in view.jumps_in_cell(p, c, None) {
                    assert!(t > prev && t >= 0.0 && t < 1.0);
                    prev = t;
                }
            }
        }
    }

    #[test]
    fn coarsening_is_exact_summation() {
        let bundle = NoiseBundle::generate(9, 4, 2, 8, &uniform_levy(1.0), 2.0).unwrap();
        let fine = bundle.view(8).unwrap();
        let coarse = bundle.view(4).unwrap();
        let mut fine_buf = [0.0; 2];
        let mut coarse_buf = [0.0; 2];
        for p in 0..4 {
            for c in 0..4 {
                coarse.wiener_increment(p, c, &mut coarse_buf);
                let mut manual = [0.0; 2];
                for f in 2 * c..2 * c + 2 {
                    fine.wiener_increment(p, f, &mut fine_buf);
                    manual[0] += fine_buf[0];
                    manual[1] += fine_buf[1];
                }
                assert_eq!(coarse_buf, manual, "coarse cell must be the exact fine sum");
            }
        }
        // identity view returns the raw increments
        let identity = bundle.view(8).unwrap();
        let mut a = [0.0; 2];
        identity.wiener_increment(1, 3, &mut a);
        assert_eq!(&a[..], bundle.increment_slice(1, 3));
    }

    #[test]
    fn total_displacement_invariant_under_coarsening() {
        let bundle = NoiseBundle::generate(13, 2, 1, 64, &LevySpec::none(), 1.0).unwrap();
        let mut buf = [0.0];
        for p in 0..2 {
            let mut totals = Vec::new();
            for n in [64usize, 32, 16, 8, 4, 2, 1] {
                let view = bundle.view(n).unwrap();
                let mut total = 0.0;
                for c in 0..n {
                    view.wiener_increment(p, c, &mut buf);
                    total += buf[0];
                }
                totals.push(total);
            }
            for t in &totals[1..] {
                assert!((t - totals[0]).abs() < 1e-12, "telescoping sum broke: {totals:?}");
            }
        }
    }

    #[test]
    fn jump_events_partition_across_cells() {
        let bundle = NoiseBundle::generate(17, 20, 1, 16, &uniform_levy(3.0), 1.0).unwrap();
        for n in [16usize, 8, 4, 1] {
            let view = bundle.view(n).unwrap();
            for p in 0..20 {
                let seen: usize = (0..n).map(|c| view.jumps_in_cell(p, c, None).len()).sum();
                assert_eq!(seen, bundle.jump_count(p), "resolution {n}, particle {p}");
            }
        }
    }

    #[test]
    fn regeneration_is_bit_identical_and_particle_stable() {
        let levy = uniform_levy(1.5);
        let a = NoiseBundle::generate(21, 6, 2, 32, &levy, 1.0).unwrap();
        let b = NoiseBundle::generate(21, 6, 2, 32, &levy, 1.0).unwrap();
        assert_eq!(a, b);

        // growing the particle count leaves existing particles untouched
        let wider = NoiseBundle::generate(21, 9, 2, 32, &levy, 1.0).unwrap();
        let per = 32 * 2;
        assert_eq!(&wider.increments[..6 * per], &a.increments[..]);
        for p in 0..6 {
            assert_eq!(wider.jump_count(p), a.jump_count(p));
        }
    }

    #[test]
    fn particles_are_uncorrelated() {
        let bundle = NoiseBundle::generate(23, 2, 1, 4096, &LevySpec::none(), 1.0).unwrap();
        let view = bundle.view(4096).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        let mut cross = 0.0;
        for c in 0..4096 {
            view.wiener_increment(0, c, &mut a);
            view.wiener_increment(1, c, &mut b);
            cross += a[0] * b[0];
        }
        // each product has variance (T/n)^2; the sum has sd = sqrt(n) * T/n
        let sd = (4096.0f64).sqrt() / 4096.0;
        assert!(cross.abs() < 4.0 * sd, "cross-correlation {cross} exceeds 4 sd {sd}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("mvsde_noise_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bundle.mvnb");
        let bundle = NoiseBundle::generate(31, 5, 2, 16, &uniform_levy(2.0), 1.5).unwrap();
        bundle.save(&path).unwrap();
        let loaded = NoiseBundle::load(&path).unwrap();
        assert_eq!(bundle, loaded);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn from_parts_validates() {
        let err = NoiseBundle::from_parts(
            0,
            1,
            4,
            1.0,
            1,
            vec![0.0; 4],
            vec![vec![JumpEvent { time: 1.5, mark: vec![0.0] }]],
        );
        assert!(matches!(err, Err(NoiseError::BadParts(_))));
    }
}
